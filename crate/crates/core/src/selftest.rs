//! Built-in invariant and oracle checks, runnable from the CLI.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::butterfly::{ButterflyFilter, Spacing};
use crate::channel::{apply_channel, ChannelParams};
use crate::cma::cma_loss_and_grad;
use crate::constellation::{build_uniform_qam64, godard_radius, solve_mb_distribution};
use crate::cpe::{viterbi_viterbi_correct, CpeConfig};
use crate::vae::elbo::elbo_loss_and_grads;
use crate::{DualPol, Result, C64};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured deviation from the reference value.
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &'static str, error: f64, tolerance: f64) -> Self {
        Self {
            name,
            passed: error.is_finite() && error < tolerance,
            error,
            tolerance,
        }
    }
}

fn random_dual(rng: &mut ChaCha8Rng, n: usize) -> DualPol {
    let mut draw = || (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    [draw(), draw()]
}

fn perturbed_spike(rng: &mut ChaCha8Rng, m: usize, spacing: Spacing) -> Result<ButterflyFilter> {
    let mut f = ButterflyFilter::spike_init(m, spacing)?;
    let flat: Vec<C64> = f
        .flatten()
        .iter()
        .map(|t| t + C64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)))
        .collect();
    f.set_flat(&flat);
    Ok(f)
}

/// Worst central-difference mismatch against 2·∂L/∂w*, relative to the
/// largest gradient entry.
fn gradient_mismatch(
    w: &ButterflyFilter,
    grad: &ButterflyFilter,
    loss: impl Fn(&ButterflyFilter) -> Result<f64>,
) -> Result<f64> {
    const STEP: f64 = 1e-6;
    let base = w.flatten();
    let g = grad.flatten();
    let scale = g.iter().map(|x| 2.0 * x.norm()).fold(f64::MIN_POSITIVE, f64::max);
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let mut probe = w.clone();
            let mut eval = |sign: f64| {
                let mut v = base.clone();
                v[k] += dir * (sign * STEP);
                probe.set_flat(&v);
                loss(&probe)
            };
            let fd = (eval(1.0)? - eval(-1.0)?) / (2.0 * STEP);
            worst = worst.max((fd - 2.0 * (g[k].conj() * dir).re).abs() / scale);
        }
    }
    Ok(worst)
}

fn godard() -> Check {
    let levels = [-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0];
    let (mut m2, mut m4) = (0.0, 0.0);
    for i in levels {
        for q in levels {
            let e: f64 = i * i + q * q;
            m2 += e / 64.0;
            m4 += e * e / 64.0;
        }
    }
    let r2 = godard_radius(&build_uniform_qam64());
    Check::new("godard radius", (r2 - m4 / (m2 * m2)).abs().max((r2 - 58.0 / 42.0).abs()), 1e-12)
}

fn shaping() -> Result<Check> {
    let (_, c) = solve_mb_distribution(5.73)?;
    let h: f64 = c.priors.iter().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum();
    Ok(Check::new("maxwell-boltzmann entropy", (h - 5.73).abs(), 1e-4))
}

fn unitarity(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (gamma_hv, tau_pmd, l_cd) in [(0.2 * PI, 5e-12, 1e3), (PI / 4.0, 1e-11, 3e3)] {
        let p = ChannelParams {
            gamma_hv,
            tau_pmd,
            l_cd,
            ..ChannelParams::default()
        };
        let x = random_dual(rng, 2048);
        let y = apply_channel(&x, &p)?;
        let norm = |d: &DualPol| d.iter().flatten().map(|s| s.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max((norm(&y) / norm(&x) - 1.0).abs());
    }
    Ok(Check::new("channel unitarity", worst, 1e-9))
}

fn butterfly(rng: &mut ChaCha8Rng) -> Result<Check> {
    let w = perturbed_spike(rng, 9, Spacing::Fractional { sps: 2 })?;
    let x = random_dual(rng, 128);
    let out = w.equalize(&x, 8..56)?;
    let c = w.center();
    let mut worst: f64 = 0.0;
    for (i, n) in (8..56).enumerate() {
        for p in 0..2 {
            let direct: C64 = (0..2)
                .flat_map(|q| (0..w.len()).map(move |k| (q, k)))
                .map(|(q, k)| w.taps[p][q][k] * x[q][2 * n + c - k])
                .sum();
            worst = worst.max((direct - out[p][i]).norm());
        }
    }
    Ok(Check::new("butterfly convolution", worst, 1e-12))
}

fn gradients(rng: &mut ChaCha8Rng) -> Result<[Check; 2]> {
    let c = build_uniform_qam64();
    let r2 = godard_radius(&c);
    let (mut cma, mut elbo): (f64, f64) = (0.0, 0.0);
    for _ in 0..5 {
        let x = random_dual(rng, 100);
        let w = perturbed_spike(rng, 5, Spacing::Fractional { sps: 2 })?;
        let e = cma_loss_and_grad(&w, &x, 4..30, r2)?;
        cma = cma.max(gradient_mismatch(&w, &e.grad, |f| Ok(cma_loss_and_grad(f, &x, 4..30, r2)?.loss))?);

        let w = perturbed_spike(rng, 3, Spacing::Fractional { sps: 2 })?;
        let h = perturbed_spike(rng, 3, Spacing::Symbol)?;
        let nv = [0.2, 0.4];
        let e = elbo_loss_and_grads(&w, &h, &x, &c, 3..11, nv)?;
        elbo = elbo.max(gradient_mismatch(&w, &e.grad_w, |f| {
            Ok(elbo_loss_and_grads(f, &h, &x, &c, 3..11, nv)?.loss)
        })?);
        elbo = elbo.max(gradient_mismatch(&h, &e.grad_h, |f| {
            Ok(elbo_loss_and_grads(&w, f, &x, &c, 3..11, nv)?.loss)
        })?);
    }
    Ok([
        Check::new("cma gradient", cma, 1e-4),
        Check::new("elbo gradient", elbo, 1e-4),
    ])
}

fn phase_recovery(rng: &mut ChaCha8Rng) -> Result<Check> {
    let symbols: Vec<C64> = (0..3000)
        .map(|_| C64::from_polar(1.0, PI / 4.0 + f64::from(rng.random_range(0..4u8)) * PI / 2.0))
        .collect();
    let cfg = CpeConfig {
        reference_angle: PI,
        ..CpeConfig::default()
    };
    let mut worst: f64 = 0.0;
    for phi in [-0.7, -0.3, 0.0, 0.1, 0.5, 0.75] {
        let rotated: Vec<C64> = symbols.iter().map(|s| s * C64::from_polar(1.0, phi)).collect();
        let (_, est) = viterbi_viterbi_correct(&rotated, &cfg)?;
        worst = est.iter().fold(worst, |m, e| m.max((e - phi).abs()));
    }
    Ok(Check::new("viterbi-viterbi offset", worst, 1e-2))
}

/// Runs every check with a fixed seed.
pub fn run_selftest() -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut checks = vec![godard(), shaping()?, unitarity(&mut rng)?, butterfly(&mut rng)?];
    checks.extend(gradients(&mut rng)?);
    checks.push(phase_recovery(&mut rng)?);
    Ok(checks)
}
