//! 2x2 complex butterfly FIR filters.
//!
//! `taps[p][q]` maps input polarization `q` onto output `p`; with H = 0 and
//! V = 1 that is `[[hh, hv], [vh, vv]]`. Taps are centered: a spike at index
//! `(M - 1) / 2` passes the input through without delay.

use std::io::Write;
use std::ops::Range;

use crate::{DualPol, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    /// `sps` input samples per output symbol (decimating equalizer).
    Fractional { sps: usize },
    /// One output per input sample.
    Symbol,
}

impl Spacing {
    pub fn decimation(self) -> usize {
        match self {
            Spacing::Fractional { sps } => sps,
            Spacing::Symbol => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ButterflyFilter {
    pub taps: [[Vec<C64>; 2]; 2],
    pub spacing: Spacing,
}

const NAMES: [[&str; 2]; 2] = [["hh", "hv"], ["vh", "vv"]];

impl ButterflyFilter {
    /// Single `1 + 0j` at the center tap of `hh` and `vv`.
    pub fn spike_init(m: usize, spacing: Spacing) -> Result<Self> {
        let mut w = Self::zeros(m, spacing)?;
        let c = m / 2;
        w.taps[0][0][c] = C64::new(1.0, 0.0);
        w.taps[1][1][c] = C64::new(1.0, 0.0);
        Ok(w)
    }

    pub fn zeros(m: usize, spacing: Spacing) -> Result<Self> {
        if m.is_multiple_of(2) {
            return Err(Error::InvalidLength(m));
        }
        if spacing.decimation() == 0 {
            return Err(Error::Precondition("decimation must be at least 1".into()));
        }
        let z = vec![C64::new(0.0, 0.0); m];
        Ok(Self {
            taps: [[z.clone(), z.clone()], [z.clone(), z]],
            spacing,
        })
    }

    /// Taps per sub-filter.
    pub fn len(&self) -> usize {
        self.taps[0][0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self) -> usize {
        self.len() / 2
    }

    /// All taps in `hh, hv, vh, vv` order.
    pub fn flatten(&self) -> Vec<C64> {
        self.taps.iter().flatten().flatten().copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[C64]) {
        let m = self.len();
        assert_eq!(flat.len(), 4 * m, "flat tap vector has wrong length");
        for (k, chunk) in flat.chunks(m).enumerate() {
            self.taps[k / 2][k % 2].copy_from_slice(chunk);
        }
    }

    /// Total tap energy feeding output polarization `p`.
    pub fn row_energy(&self, p: usize) -> f64 {
        self.taps[p].iter().flatten().map(|t| t.norm_sqr()).sum()
    }

    /// Input samples consumed for output `n` run from `first_input(n)` to
    /// `first_input(n) + len() - 1`.
    fn first_input(&self, n: usize) -> Option<usize> {
        (self.spacing.decimation() * n + self.center()).checked_sub(self.len() - 1)
    }

    fn check_range(&self, input_len: usize, range: &Range<usize>) -> Result<()> {
        if range.is_empty() {
            return Ok(());
        }
        let last = self.spacing.decimation() * (range.end - 1) + self.center();
        if self.first_input(range.start).is_none() || last >= input_len {
            return Err(Error::Range(format!(
                "outputs {}..{} need input samples beyond 0..{}",
                range.start, range.end, input_len
            )));
        }
        Ok(())
    }

    /// Both outputs at index `n`; the caller guarantees enough context.
    #[inline]
    pub fn output_at(&self, input: &DualPol, n: usize) -> [C64; 2] {
        let base = self.spacing.decimation() * n + self.center();
        let mut out = [C64::new(0.0, 0.0); 2];
        for (p, o) in out.iter_mut().enumerate() {
            for q in 0..2 {
                let x = &input[q];
                for (k, &t) in self.taps[p][q].iter().enumerate() {
                    *o += t * x[base - k];
                }
            }
        }
        out
    }

    /// Filters `input` and returns outputs `range` for both polarizations:
    /// `out_p[n] = Σ_q Σ_k taps[p][q][k] · in_q[d·n + c − k]`.
    pub fn equalize(&self, input: &DualPol, range: Range<usize>) -> Result<DualPol> {
        if input[0].len() != input[1].len() {
            return Err(Error::Shape("polarization lengths differ".into()));
        }
        self.check_range(input[0].len(), &range)?;
        let mut out = [Vec::with_capacity(range.len()), Vec::with_capacity(range.len())];
        for n in range {
            let [h, v] = self.output_at(input, n);
            out[0].push(h);
            out[1].push(v);
        }
        Ok(out)
    }

    /// Writes `filter,index,re,im` rows.
    pub fn write_taps_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "filter,index,re,im")?;
        for (p, row) in self.taps.iter().enumerate() {
            for (q, taps) in row.iter().enumerate() {
                for (k, t) in taps.iter().enumerate() {
                    writeln!(w, "{},{},{},{}", NAMES[p][q], k, t.re, t.im)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stream(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn random_filter(m: usize, rng: &mut ChaCha8Rng) -> ButterflyFilter {
        let mut w = ButterflyFilter::zeros(m, Spacing::Fractional { sps: 2 }).unwrap();
        let flat = random_stream(4 * m, rng);
        w.set_flat(&flat);
        w
    }

    #[test]
    fn spike_layout() {
        let w = ButterflyFilter::spike_init(15, Spacing::Fractional { sps: 2 }).unwrap();
        assert_eq!(w.taps[0][0][7], C64::new(1.0, 0.0));
        let nonzero = w.flatten().iter().filter(|t| t.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
        let w = ButterflyFilter::spike_init(25, Spacing::Symbol).unwrap();
        assert_eq!(w.taps[1][1][12], C64::new(1.0, 0.0));
        assert!(matches!(
            ButterflyFilter::spike_init(14, Spacing::Symbol),
            Err(Error::InvalidLength(14))
        ));
    }

    #[test]
    fn spike_is_identity_or_decimation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [random_stream(64, &mut rng), random_stream(64, &mut rng)];
        let w = ButterflyFilter::spike_init(7, Spacing::Symbol).unwrap();
        let y = w.equalize(&x, 3..61).unwrap();
        assert_eq!(y[0], x[0][3..61]);
        assert_eq!(y[1], x[1][3..61]);

        let w = ButterflyFilter::spike_init(15, Spacing::Fractional { sps: 2 }).unwrap();
        let y = w.equalize(&x, 4..25).unwrap();
        for (i, n) in (4..25).enumerate() {
            assert_eq!(y[0][i], x[0][2 * n]);
            assert_eq!(y[1][i], x[1][2 * n]);
        }
    }

    #[test]
    fn cross_spike_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = [random_stream(64, &mut rng), random_stream(64, &mut rng)];
        let mut w = ButterflyFilter::zeros(5, Spacing::Fractional { sps: 2 }).unwrap();
        w.taps[0][1][2] = C64::new(1.0, 0.0);
        w.taps[1][0][2] = C64::new(1.0, 0.0);
        let y = w.equalize(&x, 1..30).unwrap();
        for (i, n) in (1..30).enumerate() {
            assert_eq!(y[0][i], x[1][2 * n]);
            assert_eq!(y[1][i], x[0][2 * n]);
        }
    }

    #[test]
    fn range_errors() {
        let x = [vec![C64::new(0.0, 0.0); 40], vec![C64::new(0.0, 0.0); 40]];
        let w = ButterflyFilter::spike_init(15, Spacing::Fractional { sps: 2 }).unwrap();
        // n = 3 needs sample 6 + 7 - 14 < 0
        assert!(matches!(w.equalize(&x, 3..10), Err(Error::Range(_))));
        // n = 17 needs sample 41
        assert!(matches!(w.equalize(&x, 4..18), Err(Error::Range(_))));
        assert!(w.equalize(&x, 4..17).is_ok());
    }

    #[test]
    fn matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 15;
        let w = random_filter(m, &mut rng);
        let x = [random_stream(2 * 64 + m, &mut rng), random_stream(2 * 64 + m, &mut rng)];
        let y = w.equalize(&x, 7..64).unwrap();
        // reference: out_p[n] = sum over all (q, j) with j = 2n + c - k
        for (i, n) in (7..64).enumerate() {
            for p in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for q in 0..2 {
                    for j in 0..x[q].len() {
                        let k = 2 * n as isize + 7 - j as isize;
                        if (0..m as isize).contains(&k) {
                            acc += w.taps[p][q][k as usize] * x[q][j];
                        }
                    }
                }
                assert!((acc - y[p][i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn taps_csv() {
        let w = ButterflyFilter::spike_init(3, Spacing::Symbol).unwrap();
        let mut buf = Vec::new();
        w.write_taps_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 13);
        assert_eq!(lines[0], "filter,index,re,im");
        assert_eq!(lines[2], "hh,1,1,0");
        assert_eq!(lines[12], "vv,2,0,0");
    }

    proptest! {
        #[test]
        fn linear_and_shift_invariant(seed in any::<u64>(), a_re in -2.0..2.0f64, b_im in -2.0..2.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_filter(9, &mut rng);
            let x = [random_stream(80, &mut rng), random_stream(80, &mut rng)];
            let y = [random_stream(80, &mut rng), random_stream(80, &mut rng)];
            let a = C64::new(a_re, 0.3);
            let b = C64::new(-0.7, b_im);
            let mix: DualPol = [0, 1].map(|p| x[p].iter().zip(&y[p]).map(|(u, v)| a * u + b * v).collect());
            let lhs = w.equalize(&mix, 4..36).unwrap();
            let ex = w.equalize(&x, 4..36).unwrap();
            let ey = w.equalize(&y, 4..36).unwrap();
            for p in 0..2 {
                for i in 0..lhs[p].len() {
                    prop_assert!((lhs[p][i] - (a * ex[p][i] + b * ey[p][i])).norm() < 1e-12);
                }
            }
            // shift by two samples -> one symbol
            let shifted: DualPol = [0, 1].map(|p| x[p][2..].to_vec());
            let es = w.equalize(&shifted, 4..35).unwrap();
            for p in 0..2 {
                for i in 0..es[p].len() {
                    prop_assert!((es[p][i] - ex[p][i + 1]).norm() < 1e-12);
                }
            }
        }
    }
}
