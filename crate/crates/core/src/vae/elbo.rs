//! Negative ELBO of the VAE equalizer and its exact gradients.
//!
//! For each polarization `p` the decoder reconstructs the received samples
//! from the posterior means, `ŷ_p = Σ_q h_pq ⊛ up(μ_q)`, on the oversampled
//! grid. With the noise variance maximized out in closed form the loss is
//!
//! ```text
//! L = Σ_p N_smp · ln( ‖y_p − ŷ_p‖² + Σ_q Σ_j (|h_pq|² ⊛ up(v_q))_j )
//!     + Σ_{p,n} KL(q_{p,n} ‖ prior)
//! ```
//!
//! where `v = E − |μ|²` is the posterior variance of each symbol. Only
//! samples whose full `h` support lies on the symbol window are compared.

use std::ops::Range;

use super::{posterior_soft_demap, SoftPosterior};
use crate::butterfly::{ButterflyFilter, Spacing};
use crate::constellation::ShapedConstellation;
use crate::{DualPol, Error, Result, C64};

/// Added to each residual power so the logarithm stays finite.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ElboEvaluation {
    pub loss: f64,
    /// Σ_p N_smp · ln(S_p).
    pub reconstruction: f64,
    /// Σ KL in nats.
    pub kl: f64,
    /// S_p including the floor.
    pub residual_power: [f64; 2],
    /// Compared received samples per polarization.
    pub n_samples: usize,
    /// Set when a raw residual power fell below [`RESIDUAL_FLOOR`].
    pub floored: bool,
    /// ∂L/∂w*.
    pub grad_w: ButterflyFilter,
    /// ∂L/∂h_est*.
    pub grad_h: ButterflyFilter,
    pub outputs: DualPol,
    pub posteriors: [SoftPosterior; 2],
}

impl ElboEvaluation {
    /// Closed-form per-sample noise variance estimate, S_p / N_smp.
    pub fn noise_var_estimate(&self) -> [f64; 2] {
        self.residual_power.map(|s| s / self.n_samples as f64)
    }
}

/// Evaluates the loss over output symbols `range`; `noise_var` is the
/// demapper variance per output polarization (held constant).
pub fn elbo_loss_and_grads(
    w: &ButterflyFilter,
    h_est: &ButterflyFilter,
    input: &DualPol,
    c: &ShapedConstellation,
    range: Range<usize>,
    noise_var: [f64; 2],
) -> Result<ElboEvaluation> {
    if h_est.spacing != Spacing::Symbol {
        return Err(Error::Precondition("channel estimate must be sample spaced".into()));
    }
    let d = w.spacing.decimation();
    let n_sym = range.len();
    let ce = h_est.center();
    let me = h_est.len();
    // local sample grid: symbol i sits at d·i, last at d·(n_sym − 1)
    let grid = if n_sym == 0 { 0 } else { d * (n_sym - 1) + 1 };
    if grid < me {
        return Err(Error::Range(format!(
            "{n_sym} symbols span {grid} samples, fewer than the {me}-tap channel estimate"
        )));
    }
    let n_smp = grid - 2 * ce;
    let y0 = d * range.start;

    let outputs = w.equalize(input, range.clone())?;
    let posteriors = [
        posterior_soft_demap(&outputs[0], c, noise_var[0])?,
        posterior_soft_demap(&outputs[1], c, noise_var[1])?,
    ];

    // residual r_p[j] for j in ce..ce + n_smp (stored from 0)
    let mut resid = [vec![C64::new(0.0, 0.0); n_smp], vec![C64::new(0.0, 0.0); n_smp]];
    let mut raw = [0.0f64; 2];
    let h2: [[Vec<f64>; 2]; 2] =
        [0, 1].map(|p| [0, 1].map(|q| h_est.taps[p][q].iter().map(|t| t.norm_sqr()).collect()));
    for p in 0..2 {
        let y = &input[p];
        for (jj, r) in resid[p].iter_mut().enumerate() {
            let j = jj + ce;
            // symbols i with m = j + ce − d·i in 0..me
            let i_lo = (j + ce + 1).saturating_sub(me).div_ceil(d);
            let i_hi = (j + ce) / d;
            let mut yhat = C64::new(0.0, 0.0);
            let mut var = 0.0;
            for i in i_lo..=i_hi.min(n_sym - 1) {
                let m = j + ce - d * i;
                for q in 0..2 {
                    yhat += h_est.taps[p][q][m] * posteriors[q].mean[i];
                    var += h2[p][q][m] * posteriors[q].variance(i);
                }
            }
            *r = y[y0 + j] - yhat;
            raw[p] += r.norm_sqr() + var;
        }
    }
    let floored = raw.iter().any(|&s| s < RESIDUAL_FLOOR);
    let s = raw.map(|v| v + RESIDUAL_FLOOR);
    let reconstruction: f64 = s.iter().map(|v| n_smp as f64 * v.ln()).sum();
    let kl: f64 = posteriors.iter().map(|post| post.kl_to_prior(c)).sum();
    let alpha = s.map(|v| n_smp as f64 / v);

    // decoder gradients and sensitivities w.r.t. the upsampled μ and v
    let mut grad_h = ButterflyFilter::zeros(me, Spacing::Symbol)?;
    let mut g_mu = [vec![C64::new(0.0, 0.0); n_sym], vec![C64::new(0.0, 0.0); n_sym]];
    let mut g_var = [vec![0.0f64; n_sym], vec![0.0f64; n_sym]];
    for p in 0..2 {
        for (jj, &r) in resid[p].iter().enumerate() {
            let j = jj + ce;
            let i_lo = (j + ce + 1).saturating_sub(me).div_ceil(d);
            let i_hi = (j + ce) / d;
            for i in i_lo..=i_hi.min(n_sym - 1) {
                let m = j + ce - d * i;
                for q in 0..2 {
                    let mu = posteriors[q].mean[i];
                    let h = h_est.taps[p][q][m];
                    grad_h.taps[p][q][m] +=
                        (-r * mu.conj() + h * posteriors[q].variance(i)) * alpha[p];
                    g_mu[q][i] -= h.conj() * r * alpha[p];
                    g_var[q][i] += h2[p][q][m] * alpha[p];
                }
            }
        }
    }

    // back through the soft demapper to the equalizer outputs
    let log_prior: Vec<f64> = c.priors.iter().map(|p| p.ln()).collect();
    let mut g_z = [vec![C64::new(0.0, 0.0); n_sym], vec![C64::new(0.0, 0.0); n_sym]];
    let mut sens = vec![0.0f64; c.len()];
    for q in 0..2 {
        let post = &posteriors[q];
        for i in 0..n_sym {
            let row = post.row(i);
            let logs = &post.log_q[i * c.len()..(i + 1) * c.len()];
            let (a, gv, mu) = (g_mu[q][i], g_var[q][i], post.mean[i]);
            let mut mean_sens = 0.0;
            for (k, (&qc, pt)) in row.iter().zip(&c.points).enumerate() {
                let s = if qc > 0.0 {
                    2.0 * (a.conj() * pt).re
                        + gv * (pt.norm_sqr() - 2.0 * (mu.conj() * pt).re)
                        + (logs[k] - log_prior[k])
                } else {
                    0.0
                };
                sens[k] = s;
                mean_sens += qc * s;
            }
            // ∂L/∂z* = (1/σ²) Σ_c q_c (s_c − s̄) c
            let gz: C64 = row
                .iter()
                .zip(&sens)
                .zip(&c.points)
                .map(|((&qc, &s), pt)| pt * (qc * (s - mean_sens)))
                .sum();
            g_z[q][i] = gz / post.noise_var;
        }
    }

    let mut grad_w = ButterflyFilter::zeros(w.len(), w.spacing)?;
    let cw = w.center();
    for (i, n) in range.enumerate() {
        let base = d * n + cw;
        for p in 0..2 {
            let g = g_z[p][i];
            for q in 0..2 {
                let x = &input[q];
                for (k, gw) in grad_w.taps[p][q].iter_mut().enumerate() {
                    *gw += g * x[base - k].conj();
                }
            }
        }
    }

    Ok(ElboEvaluation {
        loss: reconstruction + kl,
        reconstruction,
        kl,
        residual_power: s,
        n_samples: n_smp,
        floored,
        grad_w,
        grad_h,
        outputs,
        posteriors,
    })
}
