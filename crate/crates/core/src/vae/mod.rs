//! VAE-based blind equalizer.
//!
//! The encoder is the butterfly equalizer followed by a prior-aware MAP soft
//! demapper; the decoder is a second butterfly, the channel estimate
//! `h_est`, running on the oversampled grid. Both are trained jointly with
//! Adam on the negative ELBO ([`elbo`]). No carrier phase stage is used: the
//! decoder absorbs any common phase.

pub mod adam;
pub mod elbo;

use std::ops::Range;

pub use adam::AdamState;
pub use elbo::{elbo_loss_and_grads, ElboEvaluation};

use crate::butterfly::ButterflyFilter;
use crate::constellation::ShapedConstellation;
use crate::{DualPol, Error, Result, C64};

/// Lower bound on the demapper noise variance during training.
pub const NOISE_VAR_FLOOR: f64 = 1e-6;

/// Per-symbol posterior over the constellation points.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftPosterior {
    pub n_points: usize,
    /// Row-major, `n_points` per symbol.
    pub q: Vec<f64>,
    /// ln q, same layout; `-inf` where q underflows.
    pub log_q: Vec<f64>,
    pub mean: Vec<C64>,
    pub energy: Vec<f64>,
    pub noise_var: f64,
}

impl SoftPosterior {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n_points..(i + 1) * self.n_points]
    }

    /// E − |μ|², clamped at zero against rounding.
    pub fn variance(&self, i: usize) -> f64 {
        (self.energy[i] - self.mean[i].norm_sqr()).max(0.0)
    }

    /// Σ_n KL(q_n ‖ prior), nats.
    pub fn kl_to_prior(&self, c: &ShapedConstellation) -> f64 {
        let log_prior: Vec<f64> = c.priors.iter().map(|p| p.ln()).collect();
        self.q
            .chunks(self.n_points)
            .zip(self.log_q.chunks(self.n_points))
            .map(|(row, logs)| {
                row.iter()
                    .zip(logs)
                    .zip(&log_prior)
                    .filter(|((&q, _), _)| q > 0.0)
                    .map(|((&q, &lq), &lp)| q * (lq - lp))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// `q(c) ∝ prior(c) · exp(−|z − c|² / noise_var)` for every symbol.
pub fn posterior_soft_demap(
    z: &[C64],
    c: &ShapedConstellation,
    noise_var: f64,
) -> Result<SoftPosterior> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidVariance(noise_var));
    }
    let m = c.len();
    let log_prior: Vec<f64> = c.priors.iter().map(|p| p.ln()).collect();
    let mut q = vec![0.0; z.len() * m];
    let mut log_q = vec![0.0; z.len() * m];
    let mut mean = Vec::with_capacity(z.len());
    let mut energy = Vec::with_capacity(z.len());
    for ((zi, row), logs) in z.iter().zip(q.chunks_mut(m)).zip(log_q.chunks_mut(m)) {
        let mut best = f64::NEG_INFINITY;
        for ((l, pt), lp) in logs.iter_mut().zip(&c.points).zip(&log_prior) {
            *l = lp - (zi - pt).norm_sqr() / noise_var;
            best = best.max(*l);
        }
        let mut total = 0.0;
        for (r, l) in row.iter_mut().zip(logs.iter()) {
            let e = *l - best;
            // below e^-745 the exponential is zero anyway
            *r = if e > -745.0 { e.exp() } else { 0.0 };
            total += *r;
        }
        let log_total = best + total.ln();
        let mut mu = C64::new(0.0, 0.0);
        let mut e = 0.0;
        for ((r, l), pt) in row.iter_mut().zip(logs.iter_mut()).zip(&c.points) {
            *r /= total;
            *l = if *r > 0.0 { *l - log_total } else { f64::NEG_INFINITY };
            mu += pt * *r;
            e += *r * pt.norm_sqr();
        }
        mean.push(mu);
        energy.push(e);
    }
    Ok(SoftPosterior {
        n_points: m,
        q,
        log_q,
        mean,
        energy,
        noise_var,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VaeScheme {
    /// Each iteration equalizes and emits `n_b` new symbols.
    Batch { n_b: usize },
    /// Each iteration trains on the last `n_b` symbols and emits the newest
    /// `n_flex`.
    Flex { n_b: usize, n_flex: usize },
}

impl VaeScheme {
    pub fn window(self) -> usize {
        match self {
            VaeScheme::Batch { n_b } | VaeScheme::Flex { n_b, .. } => n_b,
        }
    }

    pub fn emit(self) -> usize {
        match self {
            VaeScheme::Batch { n_b } => n_b,
            VaeScheme::Flex { n_flex, .. } => n_flex,
        }
    }
}

/// Equalizer taps, channel estimate and optimizer state of one run.
#[derive(Clone, Debug)]
pub struct VaeEqualizer {
    pub w: ButterflyFilter,
    pub h_est: ButterflyFilter,
    pub adam_w: AdamState,
    pub adam_h: AdamState,
    /// Per-sample received-domain noise variance from the last iteration.
    pub noise_var_rx: [f64; 2],
    pub scheme: VaeScheme,
    pub constellation: ShapedConstellation,
    pub last_loss: Option<f64>,
}

impl VaeEqualizer {
    pub fn new(
        w: ButterflyFilter,
        h_est: ButterflyFilter,
        scheme: VaeScheme,
        constellation: ShapedConstellation,
        initial_noise_var: f64,
    ) -> Result<Self> {
        if let VaeScheme::Flex { n_b, n_flex } = scheme {
            if n_flex == 0 || n_flex > n_b {
                return Err(Error::Config(format!(
                    "flex needs 0 < n_flex <= n_b, got {n_flex} / {n_b}"
                )));
            }
        }
        if scheme.window() == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(Self {
            adam_w: AdamState::new(4 * w.len()),
            adam_h: AdamState::new(4 * h_est.len()),
            w,
            h_est,
            noise_var_rx: [initial_noise_var; 2],
            scheme,
            constellation,
            last_loss: None,
        })
    }

    /// Demapper variance: the closed-form residual estimate of the previous
    /// iteration, floored.
    pub fn demapper_noise_var(&self) -> [f64; 2] {
        self.noise_var_rx.map(|v| v.max(NOISE_VAR_FLOOR))
    }

    fn window_at(&self, cursor: usize) -> Result<Range<usize>> {
        let end = cursor + self.scheme.emit();
        let start = end.checked_sub(self.scheme.window()).ok_or_else(|| {
            Error::Range(format!("training window before symbol {cursor} starts below 0"))
        })?;
        Ok(start..end)
    }

    /// One training iteration at `cursor`; returns the newly equalized
    /// symbols (computed before the update) and the advanced cursor.
    pub fn iterate(
        &mut self,
        input: &DualPol,
        cursor: usize,
        learning_rate: f64,
    ) -> Result<(DualPol, usize)> {
        let window = self.window_at(cursor)?;
        let d = self.w.spacing.decimation();
        let needed = d * (window.end - 1) + self.w.center() + 1;
        if needed > input[0].len() {
            return Err(Error::EndOfStream {
                needed: window.end,
                available: input[0].len().saturating_sub(self.w.center()) / d,
            });
        }
        let eval = elbo_loss_and_grads(
            &self.w,
            &self.h_est,
            input,
            &self.constellation,
            window.clone(),
            self.demapper_noise_var(),
        )?;

        let mut w = self.w.flatten();
        let gw: Vec<C64> = eval.grad_w.flatten().iter().map(|g| g * 2.0).collect();
        self.adam_w.update(&mut w, &gw, learning_rate)?;
        self.w.set_flat(&w);
        let mut h = self.h_est.flatten();
        let gh: Vec<C64> = eval.grad_h.flatten().iter().map(|g| g * 2.0).collect();
        self.adam_h.update(&mut h, &gh, learning_rate)?;
        self.h_est.set_flat(&h);

        self.noise_var_rx = eval.noise_var_estimate();
        self.last_loss = Some(eval.loss);
        let skip = window.len() - self.scheme.emit();
        let out = [eval.outputs[0][skip..].to_vec(), eval.outputs[1][skip..].to_vec()];
        Ok((out, cursor + self.scheme.emit()))
    }

    /// Equalizes `count` symbols from `start`, iterating as often as needed.
    pub fn process(
        &mut self,
        input: &DualPol,
        start: usize,
        count: usize,
        learning_rate: f64,
    ) -> Result<DualPol> {
        let emit = self.scheme.emit();
        if !count.is_multiple_of(emit) {
            return Err(Error::Config(format!(
                "{count} symbols is not a multiple of the update size {emit}"
            )));
        }
        let mut out: DualPol = [Vec::with_capacity(count), Vec::with_capacity(count)];
        let mut cursor = start;
        while cursor < start + count {
            let (sym, next) = self.iterate(input, cursor, learning_rate)?;
            out[0].extend(sym[0].iter());
            out[1].extend(sym[1].iter());
            cursor = next;
        }
        Ok(out)
    }
}
