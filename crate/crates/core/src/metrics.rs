//! Scoring of equalized frames: blind-ambiguity resolution, bitwise MAP
//! posteriors, BMI, and run-level statistics.

use serde::Serialize;

use crate::constellation::ShapedConstellation;
use crate::{DualPol, Error, Result, C64};

/// Correlation below which a polarization counts as not recovered.
pub const MIN_CORRELATION: f64 = 0.1;

/// Minimum overlap between equalized and transmitted streams.
pub const MIN_OVERLAP: usize = 500;

/// How the equalizer output maps onto the transmitted streams:
/// `out[p][n] ≈ jᵏ · tx[p ^ swap][n − lag]` with `k = rotation[p]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Alignment {
    pub swap: bool,
    pub lag: [isize; 2],
    pub rotation: [u8; 2],
    pub correlation: [f64; 2],
}

impl Alignment {
    pub fn source(&self, p: usize) -> usize {
        p ^ self.swap as usize
    }

    /// Index pairs `(n_out, n_tx)` covered by the alignment of output `p`.
    pub fn pairs(&self, p: usize, len: usize) -> impl Iterator<Item = (usize, usize)> {
        let lag = self.lag[p];
        let lo = lag.max(0) as usize;
        let hi = (len as isize + lag.min(0)).max(0) as usize;
        (lo..hi).map(move |n| (n, (n as isize - lag) as usize))
    }

    /// Undoes the quarter-turn rotation of output `p`.
    pub fn derotate(&self, p: usize, z: C64) -> C64 {
        z * C64::new(0.0, -1.0).powu(self.rotation[p] as u32)
    }
}

/// Best (lag, rotation, correlation) of `z` against `x`.
fn best_match(z: &[C64], x: &[C64], max_lag: usize) -> (isize, u8, f64) {
    let n = z.len() as isize;
    let mut best = (0, 0, f64::NEG_INFINITY);
    for lag in -(max_lag as isize)..=max_lag as isize {
        let lo = lag.max(0);
        let hi = n + lag.min(0);
        let (mut acc, mut ez, mut ex) = (C64::new(0.0, 0.0), 0.0, 0.0);
        for i in lo..hi {
            let a = z[i as usize];
            let b = x[(i - lag) as usize];
            acc += a * b.conj();
            ez += a.norm_sqr();
            ex += b.norm_sqr();
        }
        if ez == 0.0 || ex == 0.0 {
            continue;
        }
        let c = acc / (ez * ex).sqrt();
        for k in 0..4u8 {
            let v = (c * C64::new(0.0, -1.0).powu(k as u32)).re;
            if v > best.2 {
                best = (lag, k, v);
            }
        }
    }
    best
}

/// Searches polarization swap × quarter-turn rotations per polarization ×
/// lags in `[-max_lag, max_lag]` for the best correlation with `tx`.
pub fn resolve_blind_ambiguity(eq_out: &DualPol, tx: &DualPol, max_lag: usize) -> Result<Alignment> {
    let n = eq_out[0].len();
    if eq_out[1].len() != n || tx[0].len() != n || tx[1].len() != n {
        return Err(Error::Shape("equalized and transmitted streams differ in length".into()));
    }
    if n < MIN_OVERLAP + max_lag {
        return Err(Error::Precondition(format!(
            "{n} symbols leave less than {MIN_OVERLAP} overlap at lag {max_lag}"
        )));
    }
    let mut best: Option<Alignment> = None;
    for swap in [false, true] {
        let m: [(isize, u8, f64); 2] =
            [0, 1].map(|p| best_match(&eq_out[p], &tx[p ^ swap as usize], max_lag));
        let cand = Alignment {
            swap,
            lag: [m[0].0, m[1].0],
            rotation: [m[0].1, m[1].1],
            correlation: [m[0].2, m[1].2],
        };
        let score = |a: &Alignment| a.correlation[0] + a.correlation[1];
        if best.as_ref().is_none_or(|b| score(&cand) > score(b)) {
            best = Some(cand);
        }
    }
    let best = best.expect("two candidates evaluated");
    let worst = best.correlation[0].min(best.correlation[1]);
    if !(worst >= MIN_CORRELATION) {
        return Err(Error::Unresolvable(worst.max(-1.0)));
    }
    Ok(best)
}

/// `P(bᵢ = 1 | z)` under the constellation priors, row-major with
/// `bits_per_symbol` entries per symbol.
pub fn bitwise_posteriors(z: &[C64], c: &ShapedConstellation, noise_var: f64) -> Result<Vec<f64>> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidVariance(noise_var));
    }
    let m = c.bits_per_symbol();
    let log_prior: Vec<f64> = c.priors.iter().map(|p| p.ln()).collect();
    let mut out = Vec::with_capacity(z.len() * m);
    let mut metric = vec![0.0; c.len()];
    for zi in z {
        let mut best = f64::NEG_INFINITY;
        for ((v, pt), lp) in metric.iter_mut().zip(&c.points).zip(&log_prior) {
            *v = lp - (zi - pt).norm_sqr() / noise_var;
            best = best.max(*v);
        }
        let mut total = 0.0;
        let mut ones = vec![0.0; m];
        for (k, v) in metric.iter().enumerate() {
            let w = (v - best).exp();
            total += w;
            for (i, o) in ones.iter_mut().enumerate() {
                if c.label_bit(k, i) {
                    *o += w;
                }
            }
        }
        out.extend(ones.iter().map(|o| o / total));
    }
    Ok(out)
}

/// BMI = ℋ − (1/N) Σ_n Σ_i −log₂ P(bᵢ = b_{n,i} | z_n), clipped to [0, ℋ].
pub fn bmi_estimate(posteriors: &[f64], true_labels: &[u8], c: &ShapedConstellation) -> f64 {
    let m = c.bits_per_symbol();
    if true_labels.is_empty() {
        return 0.0;
    }
    assert_eq!(posteriors.len(), true_labels.len() * m, "posteriors and labels misaligned");
    let mut cond = 0.0;
    for (row, &label) in posteriors.chunks(m).zip(true_labels) {
        for (i, &p1) in row.iter().enumerate() {
            let bit = (label >> (m - 1 - i)) & 1 == 1;
            let p = if bit { p1 } else { 1.0 - p1 };
            cond -= p.max(f64::MIN_POSITIVE).log2();
        }
    }
    (c.entropy_bits - cond / true_labels.len() as f64).clamp(0.0, c.entropy_bits)
}

/// BMI of one frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrameScore {
    /// 1-based.
    pub frame: usize,
    pub bmi: [f64; 2],
    pub bmi_mean: f64,
}

/// Aligns an equalized frame with the transmitted symbol indices and scores
/// each polarization. The demapper variance is the error power measured
/// against the aligned transmit symbols. Unresolvable frames score zero.
pub fn score_frame(
    frame: usize,
    eq_out: &DualPol,
    tx_indices: &[Vec<usize>; 2],
    c: &ShapedConstellation,
    max_lag: usize,
) -> Result<FrameScore> {
    let tx: DualPol = [0, 1].map(|p| tx_indices[p].iter().map(|&i| c.points[i]).collect());
    let al = match resolve_blind_ambiguity(eq_out, &tx, max_lag) {
        Ok(a) => a,
        Err(Error::Unresolvable(_)) => {
            return Ok(FrameScore {
                frame,
                bmi: [0.0; 2],
                bmi_mean: 0.0,
            })
        }
        Err(e) => return Err(e),
    };
    let mut bmi = [0.0; 2];
    for (p, slot) in bmi.iter_mut().enumerate() {
        let src = &tx_indices[al.source(p)];
        let (z, labels): (Vec<C64>, Vec<u8>) = al
            .pairs(p, eq_out[p].len())
            .map(|(n, m)| (al.derotate(p, eq_out[p][n]), c.bit_labels[src[m]]))
            .unzip();
        let idx: Vec<usize> = al.pairs(p, eq_out[p].len()).map(|(_, m)| src[m]).collect();
        let err = z
            .iter()
            .zip(&idx)
            .map(|(zi, &k)| (zi - c.points[k]).norm_sqr())
            .sum::<f64>()
            / z.len() as f64;
        let post = bitwise_posteriors(&z, c, err.max(1e-12))?;
        *slot = bmi_estimate(&post, &labels, c);
    }
    Ok(FrameScore {
        frame,
        bmi,
        bmi_mean: 0.5 * (bmi[0] + bmi[1]),
    })
}

/// Per-run outcome against a BMI threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    pub failed: bool,
    /// 1-based frame where the mean BMI first reached the threshold.
    pub first_pass_frame: Option<usize>,
    pub trajectory: Vec<FrameScore>,
}

impl RunStats {
    pub fn from_trajectory(trajectory: Vec<FrameScore>, bmi_thr: f64) -> Self {
        let failed = trajectory.last().is_none_or(|f| f.bmi_mean < bmi_thr);
        let first_pass_frame = trajectory.iter().find(|f| f.bmi_mean >= bmi_thr).map(|f| f.frame);
        Self {
            failed,
            first_pass_frame,
            trajectory,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub failed_pct: f64,
    /// Mean first-pass frame over non-failed runs.
    pub k_bar: Option<f64>,
}

/// Failed-run percentage and mean first-pass frame index k̄. Each
/// trajectory lists per-frame mean BMI, frame 1 first.
pub fn aggregate_run_stats(trajectories: &[Vec<f64>], bmi_thr: f64) -> Result<Aggregate> {
    if trajectories.is_empty() {
        return Err(Error::Precondition("no runs to aggregate".into()));
    }
    let mut failed = 0usize;
    let mut passes = Vec::new();
    for t in trajectories {
        if t.last().is_none_or(|&b| b < bmi_thr) {
            failed += 1;
            continue;
        }
        if let Some(k) = t.iter().position(|&b| b >= bmi_thr) {
            passes.push((k + 1) as f64);
        }
    }
    let k_bar = (!passes.is_empty()).then(|| passes.iter().sum::<f64>() / passes.len() as f64);
    Ok(Aggregate {
        failed_pct: 100.0 * failed as f64 / trajectories.len() as f64,
        k_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::add_awgn;
    use crate::constellation::{build_uniform_qam64, sample_frame, solve_mb_distribution};

    fn tx(n: usize, seed: u64) -> (DualPol, [Vec<usize>; 2]) {
        let f = sample_frame(&build_uniform_qam64(), n, seed).unwrap();
        (f.symbols, f.indices)
    }

    #[test]
    fn identity_alignment() {
        let (x, _) = tx(1000, 1);
        let a = resolve_blind_ambiguity(&x, &x, 15).unwrap();
        assert_eq!(a.lag, [0, 0]);
        assert_eq!(a.rotation, [0, 0]);
        assert!(!a.swap);
        assert!((a.correlation[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swapped_and_rotated() {
        let (x, _) = tx(1000, 2);
        let y = [x[1].iter().map(|s| -s).collect(), x[0].iter().map(|s| -s).collect()];
        let a = resolve_blind_ambiguity(&y, &x, 15).unwrap();
        assert!(a.swap);
        assert_eq!(a.rotation, [2, 2]);
        let y = [x[0].iter().map(|s| s * C64::new(0.0, 1.0)).collect(), x[1].clone()];
        let a = resolve_blind_ambiguity(&y, &x, 15).unwrap();
        assert_eq!(a.rotation, [1, 0]);
    }

    #[test]
    fn delayed_stream() {
        let (x, _) = tx(1003, 3);
        // out[n] = tx[n − 3]
        let y: DualPol = [0, 1].map(|p| {
            let mut v = vec![C64::new(0.0, 0.0); 3];
            v.extend_from_slice(&x[p][..1000]);
            v
        });
        let x: DualPol = [0, 1].map(|p| x[p][..1003 - 3].to_vec());
        let y: DualPol = [0, 1].map(|p| y[p][..1000].to_vec());
        // brute-force correlation oracle picks the same peak
        let peak = (-15isize..=15)
            .max_by(|&a, &b| {
                let corr = |lag: isize| {
                    (0..1000isize)
                        .filter(|n| (0..1000).contains(&(n - lag)))
                        .map(|n| y[0][n as usize] * x[0][(n - lag) as usize].conj())
                        .sum::<C64>()
                        .norm()
                };
                corr(a).total_cmp(&corr(b))
            })
            .unwrap();
        let a = resolve_blind_ambiguity(&y, &x, 15).unwrap();
        assert_eq!(peak, 3);
        assert_eq!(a.lag, [3, 3]);
    }

    #[test]
    fn unresolvable_and_short() {
        let (x, _) = tx(1000, 4);
        let (y, _) = tx(1000, 5);
        assert!(matches!(resolve_blind_ambiguity(&y, &x, 15), Err(Error::Unresolvable(_))));
        let (s, _) = tx(510, 6);
        assert!(matches!(resolve_blind_ambiguity(&s, &s, 15), Err(Error::Precondition(_))));
    }

    #[test]
    fn posteriors_limits() {
        let c = build_uniform_qam64();
        let z = vec![c.points[9], c.points[50]];
        let p = bitwise_posteriors(&z, &c, 1e-6).unwrap();
        for (n, &k) in [9usize, 50].iter().enumerate() {
            for i in 0..6 {
                let want = if c.label_bit(k, i) { 1.0 } else { 0.0 };
                assert!((p[n * 6 + i] - want).abs() < 1e-12);
            }
        }
        let (_, pcs) = solve_mb_distribution(5.73).unwrap();
        let p = bitwise_posteriors(&z, &pcs, 1e12).unwrap();
        for i in 0..6 {
            assert!((p[i] - pcs.bit_one_prior(i)).abs() < 1e-9);
        }
        let p = bitwise_posteriors(&[C64::new(0.0, 0.0)], &c, 0.05).unwrap();
        // first bit of each quadrature is its sign
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[3] - 0.5).abs() < 1e-12);
        assert!(bitwise_posteriors(&z, &c, 0.0).is_err());
    }

    #[test]
    fn bmi_limits() {
        for c in [build_uniform_qam64(), solve_mb_distribution(5.73).unwrap().1] {
            let f = sample_frame(&c, 2000, 7).unwrap();
            let labels: Vec<u8> = f.indices[0].iter().map(|&i| c.bit_labels[i]).collect();
            let perfect: Vec<f64> = labels
                .iter()
                .flat_map(|&l| (0..6).rev().map(move |s| ((l >> s) & 1) as f64))
                .collect();
            assert!((bmi_estimate(&perfect, &labels, &c) - c.entropy_bits).abs() < 1e-12);
            let prior: Vec<f64> = labels
                .iter()
                .flat_map(|_| (0..6).map(|i| c.bit_one_prior(i)))
                .collect();
            assert_eq!(bmi_estimate(&prior, &labels, &c), 0.0);
        }
    }

    /// Independent Monte-Carlo GMI from the AWGN likelihood (per-bit LLR
    /// form, natural-log sums) with the true noise variance.
    fn gmi_oracle(z: &[C64], idx: &[usize], c: &ShapedConstellation, nv: f64) -> f64 {
        let mut acc = 0.0;
        for (zi, &k) in z.iter().zip(idx) {
            let lik: Vec<f64> = c
                .points
                .iter()
                .map(|p| (-(zi - p).norm_sqr() / nv).exp())
                .collect();
            for i in 0..6 {
                let b = c.label_bit(k, i);
                let (mut num, mut den) = (0.0, 0.0);
                for j in 0..c.len() {
                    let w = c.priors[j] * lik[j];
                    den += w;
                    if c.label_bit(j, i) == b {
                        num += w;
                    }
                }
                acc += (num / den).log2();
            }
        }
        c.entropy_bits + acc / z.len() as f64
    }

    #[test]
    fn bmi_matches_awgn_oracle() {
        let c = build_uniform_qam64();
        let f = sample_frame(&c, 100_000, 9).unwrap();
        let noisy = add_awgn(&f.symbols, 24.0, 1, 10);
        let nv = 10f64.powf(-2.4);
        let post = bitwise_posteriors(&noisy[0], &c, nv).unwrap();
        let labels: Vec<u8> = f.indices[0].iter().map(|&i| c.bit_labels[i]).collect();
        let bmi = bmi_estimate(&post, &labels, &c);
        let oracle = gmi_oracle(&noisy[0], &f.indices[0], &c, nv);
        assert!((bmi - oracle).abs() < 0.05, "{bmi} vs {oracle}");
        assert!(bmi > 5.5 && bmi < 6.0);

        // frame scoring with an estimated variance lands in the same place
        let s = score_frame(1, &noisy, &f.indices, &c, 15).unwrap();
        assert!((s.bmi[0] - oracle).abs() < 0.05);
    }

    #[test]
    fn score_frame_undoes_ambiguities() {
        let c = build_uniform_qam64();
        let f = sample_frame(&c, 1200, 12).unwrap();
        let noisy = add_awgn(&f.symbols, 24.0, 1, 13);
        let base = score_frame(1, &noisy, &f.indices, &c, 15).unwrap();
        let j = C64::new(0.0, 1.0);
        let twisted: DualPol = [
            noisy[1].iter().map(|s| s * j).collect(),
            noisy[0].iter().map(|s| -s).collect(),
        ];
        let s = score_frame(1, &twisted, &f.indices, &c, 15).unwrap();
        for p in 0..2 {
            assert!((s.bmi[1 - p] - base.bmi[p]).abs() < 1e-12);
        }
        let (other, _) = tx(1200, 99);
        let bad = score_frame(3, &other, &f.indices, &c, 15).unwrap();
        assert_eq!(bad.bmi_mean, 0.0);
        assert_eq!(bad.frame, 3);
    }

    #[test]
    fn aggregate_examples() {
        let t = |k: usize| -> Vec<f64> { (1..=10).map(|f| if f >= k { 5.5 } else { 3.0 }).collect() };
        let a = aggregate_run_stats(&[t(3), t(5), t(7)], 5.0).unwrap();
        assert_eq!(a.failed_pct, 0.0);
        assert_eq!(a.k_bar, Some(5.0));

        let low = vec![vec![4.0; 10]; 4];
        let a = aggregate_run_stats(&low, 5.0).unwrap();
        assert_eq!(a.failed_pct, 100.0);
        assert_eq!(a.k_bar, None);

        let mut mixed: Vec<Vec<f64>> = (0..8).map(|k| t(k + 1)).collect();
        mixed.push(vec![4.0; 10]);
        // passes once but ends below threshold: still failed
        let mut dip = t(2);
        *dip.last_mut().unwrap() = 4.9;
        mixed.push(dip);
        let a = aggregate_run_stats(&mixed, 5.0).unwrap();
        assert_eq!(a.failed_pct, 20.0);
        assert_eq!(a.k_bar, Some(4.5));
        assert!(aggregate_run_stats(&[], 5.0).is_err());
    }

    #[test]
    fn run_stats_flags() {
        let traj: Vec<FrameScore> = [4.0, 5.2, 4.9]
            .iter()
            .enumerate()
            .map(|(k, &b)| FrameScore {
                frame: k + 1,
                bmi: [b, b],
                bmi_mean: b,
            })
            .collect();
        let s = RunStats::from_trajectory(traj, 5.0);
        assert!(s.failed);
        assert_eq!(s.first_pass_frame, Some(2));
    }
}
