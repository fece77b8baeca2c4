//! Viterbi-Viterbi fourth-power carrier phase estimation.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::{DualPol, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpeConfig {
    /// Odd length of the centered averaging window, in symbols.
    pub window_symbols: usize,
    /// Estimate each polarization separately; otherwise both share one
    /// estimate from the summed fourth powers.
    pub per_polarization: bool,
    /// Argument of the constellation's E[a⁴]. The plain estimator assumes 0;
    /// square QAM has E[a⁴] < 0, i.e. π.
    pub reference_angle: f64,
}

impl Default for CpeConfig {
    fn default() -> Self {
        Self {
            window_symbols: 501,
            per_polarization: true,
            reference_angle: 0.0,
        }
    }
}

impl CpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_symbols.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "CPE window must be odd, got {}",
                self.window_symbols
            )));
        }
        Ok(())
    }
}

/// Sliding-window phase estimate, unwrapped so consecutive estimates differ
/// by less than π/4. Windows shrink at the stream edges.
fn estimate_from_fourth_powers(p4: &[C64], cfg: &CpeConfig) -> Vec<f64> {
    let n = p4.len();
    let half = cfg.window_symbols / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(C64::new(0.0, 0.0));
    for &x in p4 {
        let last = *prefix.last().unwrap();
        prefix.push(last + x);
    }
    let rot = C64::from_polar(1.0, -cfg.reference_angle);
    let mut phases = Vec::with_capacity(n);
    let mut prev: Option<f64> = None;
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let raw = ((prefix[hi] - prefix[lo]) * rot).arg() / 4.0;
        let phi = match prev {
            None => raw,
            Some(p) => raw + ((p - raw) / FRAC_PI_2).round() * FRAC_PI_2,
        };
        phases.push(phi);
        prev = Some(phi);
    }
    phases
}

/// Corrects one stream; returns the derotated symbols and the phase track.
pub fn viterbi_viterbi_correct(z: &[C64], cfg: &CpeConfig) -> Result<(Vec<C64>, Vec<f64>)> {
    cfg.validate()?;
    if z.is_empty() {
        return Err(Error::Precondition("empty symbol stream".into()));
    }
    let p4: Vec<C64> = z.iter().map(|x| x.powu(4)).collect();
    let phases = estimate_from_fourth_powers(&p4, cfg);
    let out = z
        .iter()
        .zip(&phases)
        .map(|(x, &phi)| x * C64::from_polar(1.0, -phi))
        .collect();
    Ok((out, phases))
}

/// Corrects both polarizations, jointly or separately per `cfg`.
pub fn correct_dual(z: &DualPol, cfg: &CpeConfig) -> Result<DualPol> {
    if cfg.per_polarization {
        let (h, _) = viterbi_viterbi_correct(&z[0], cfg)?;
        let (v, _) = viterbi_viterbi_correct(&z[1], cfg)?;
        return Ok([h, v]);
    }
    cfg.validate()?;
    if z[0].is_empty() || z[0].len() != z[1].len() {
        return Err(Error::Shape("joint CPE needs equal, non-empty streams".into()));
    }
    let p4: Vec<C64> = z[0]
        .iter()
        .zip(&z[1])
        .map(|(a, b)| a.powu(4) + b.powu(4))
        .collect();
    let phases = estimate_from_fourth_powers(&p4, cfg);
    let derotate = |s: &Vec<C64>| -> Vec<C64> {
        s.iter()
            .zip(&phases)
            .map(|(x, &phi)| x * C64::from_polar(1.0, -phi))
            .collect()
    };
    Ok([derotate(&z[0]), derotate(&z[1])])
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_uniform_qam64, sample_frame};
    use proptest::prelude::*;

    /// Points on the axes, E[a⁴] = 1.
    fn axis_ring(n: usize) -> Vec<C64> {
        (0..n)
            .map(|k| C64::from_polar(1.0, ((k * 7 + k / 3) % 4) as f64 * FRAC_PI_2))
            .collect()
    }

    fn rotate(z: &[C64], phi: f64) -> Vec<C64> {
        z.iter().map(|x| x * C64::from_polar(1.0, phi)).collect()
    }

    #[test]
    fn constant_rotation_is_removed() {
        let z = rotate(&axis_ring(2000), 0.1);
        let (out, phases) = viterbi_viterbi_correct(&z, &CpeConfig::default()).unwrap();
        for p in &phases {
            assert!((p - 0.1).abs() < 1e-9);
        }
        for (a, b) in out.iter().zip(axis_ring(2000)) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_rotation_is_identity() {
        let z = axis_ring(600);
        let (out, phases) = viterbi_viterbi_correct(&z, &CpeConfig::default()).unwrap();
        assert!(phases.iter().all(|p| p.abs() < 1e-12));
        for (a, b) in out.iter().zip(&z) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_ambiguity() {
        let z = axis_ring(800);
        let (a, _) = viterbi_viterbi_correct(&rotate(&z, FRAC_PI_2), &CpeConfig::default()).unwrap();
        // the estimator cannot see a quarter turn: output stays rotated by π/2,
        // which is the constellation's own symmetry
        for (x, y) in a.iter().zip(&z) {
            assert!((x - y * C64::new(0.0, 1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn qam_with_reference_angle() {
        let c = build_uniform_qam64();
        let f = sample_frame(&c, 20_000, 4).unwrap();
        let cfg = CpeConfig {
            reference_angle: c.fourth_moment().arg(),
            ..Default::default()
        };
        assert!((cfg.reference_angle.abs() - PI).abs() < 1e-12);
        let (_, phases) = viterbi_viterbi_correct(&rotate(&f.symbols[0], -0.3), &cfg).unwrap();
        // 64-QAM fourth powers scatter ~2.5x their mean, so the stream mean
        // carries ~2.5 / (4·√N) ≈ 5e-3 rad of self noise
        let mean = phases.iter().sum::<f64>() / phases.len() as f64;
        assert!((mean + 0.3).abs() < 0.02, "{mean}");
    }

    #[test]
    fn joint_estimate() {
        let z = [rotate(&axis_ring(700), 0.2), rotate(&axis_ring(700), 0.2)];
        let cfg = CpeConfig {
            per_polarization: false,
            ..Default::default()
        };
        let out = correct_dual(&z, &cfg).unwrap();
        for (a, b) in out[1].iter().zip(axis_ring(700)) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        assert!(viterbi_viterbi_correct(&[], &CpeConfig::default()).is_err());
        let bad = CpeConfig {
            window_symbols: 500,
            ..Default::default()
        };
        assert!(viterbi_viterbi_correct(&axis_ring(10), &bad).is_err());
    }

    proptest! {
        #[test]
        fn trajectory_continuous_and_quarter_turn_invariant(
            seed in any::<u64>(), k in 0usize..4, window in prop::sample::select(vec![1usize, 11, 101])
        ) {
            let c = build_uniform_qam64();
            let f = sample_frame(&c, 400, seed).unwrap();
            let cfg = CpeConfig { window_symbols: window, ..Default::default() };
            let (_, a) = viterbi_viterbi_correct(&f.symbols[0], &cfg).unwrap();
            for pair in a.windows(2) {
                prop_assert!((pair[1] - pair[0]).abs() <= std::f64::consts::FRAC_PI_4 + 1e-12);
            }
            let rotated = rotate(&f.symbols[0], k as f64 * FRAC_PI_2);
            let (_, b) = viterbi_viterbi_correct(&rotated, &cfg).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let d = wrap_angle(4.0 * (x - y));
                prop_assert!(d.abs() < 1e-9);
            }
        }
    }
}
