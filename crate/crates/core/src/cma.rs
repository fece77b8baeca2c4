//! Constant modulus algorithm: symbol-wise, batch and flex updates.
//!
//! All gradients are Wirtinger derivatives with respect to the conjugate
//! taps, `∂L/∂w*`.

use std::ops::Range;

use crate::butterfly::ButterflyFilter;
use crate::{DualPol, Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CmaVariant {
    Symbolwise,
    Batch { n_b: usize },
    Flex { n_b: usize, n_flex: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmaConfig {
    pub learning_rate: f64,
    /// Godard radius R₂.
    pub radius: f64,
    pub variant: CmaVariant,
}

impl CmaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("CMA learning rate must be positive".into()));
        }
        match self.variant {
            CmaVariant::Batch { n_b: 0 } => {
                Err(Error::Config("batch size must be positive".into()))
            }
            CmaVariant::Flex { n_b, n_flex } if n_flex == 0 || n_flex >= n_b => Err(
                Error::Config(format!("flex needs 0 < n_flex < n_b, got {n_flex} / {n_b}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Loss, gradient and the equalized symbols of one batch.
#[derive(Clone, Debug)]
pub struct CmaEvaluation {
    pub loss: f64,
    pub grad: ButterflyFilter,
    pub outputs: DualPol,
}

/// Mean of `(R₂ − |z|²)²` over all outputs in `range` and both
/// polarizations, with its exact gradient.
pub fn cma_loss_and_grad(
    w: &ButterflyFilter,
    input: &DualPol,
    range: Range<usize>,
    radius: f64,
) -> Result<CmaEvaluation> {
    let outputs = w.equalize(input, range.clone())?;
    let mut grad = ButterflyFilter::zeros(w.len(), w.spacing)?;
    let count = (2 * range.len()).max(1) as f64;
    let d = w.spacing.decimation();
    let c = w.center();
    let mut loss = 0.0;
    for (i, n) in range.enumerate() {
        let base = d * n + c;
        for p in 0..2 {
            let z = outputs[p][i];
            let e = radius - z.norm_sqr();
            loss += e * e;
            // ∂e²/∂w* = -2 e z x*
            let coef = z * (-2.0 * e / count);
            for q in 0..2 {
                let x = &input[q];
                for (k, g) in grad.taps[p][q].iter_mut().enumerate() {
                    *g += coef * x[base - k].conj();
                }
            }
        }
    }
    Ok(CmaEvaluation {
        loss: loss / count,
        grad,
        outputs,
    })
}

/// Godard stochastic-gradient update for output symbol `n`; returns the
/// output computed before the update.
pub fn cma_symbolwise_step(
    w: &mut ButterflyFilter,
    input: &DualPol,
    n: usize,
    learning_rate: f64,
    radius: f64,
) -> [C64; 2] {
    let z = w.output_at(input, n);
    let base = w.spacing.decimation() * n + w.center();
    for p in 0..2 {
        let coef = z[p] * (learning_rate * (radius - z[p].norm_sqr()));
        for q in 0..2 {
            let x = &input[q];
            for (k, t) in w.taps[p][q].iter_mut().enumerate() {
                *t += coef * x[base - k].conj();
            }
        }
    }
    z
}

fn descend(w: &mut ButterflyFilter, grad: &ButterflyFilter, learning_rate: f64) {
    for (wr, gr) in w.taps.iter_mut().zip(&grad.taps) {
        for (wt, gt) in wr.iter_mut().zip(gr) {
            for (t, g) in wt.iter_mut().zip(gt) {
                *t -= g * learning_rate;
            }
        }
    }
}

/// One plain gradient-descent step on the CMA loss over `range`, with the
/// step scaled by the batch length so that it equals the sum of the
/// symbol-wise Godard updates at frozen taps. Returns the evaluation taken
/// before the step.
pub fn cma_batch_step(
    w: &mut ButterflyFilter,
    input: &DualPol,
    range: Range<usize>,
    learning_rate: f64,
    radius: f64,
) -> Result<CmaEvaluation> {
    let n = range.len() as f64;
    let eval = cma_loss_and_grad(w, input, range, radius)?;
    descend(w, &eval.grad, learning_rate * n);
    Ok(eval)
}

/// A CMA-family equalizer with its adaptation state.
#[derive(Clone, Debug)]
pub struct CmaEqualizer {
    pub w: ButterflyFilter,
    pub cfg: CmaConfig,
}

impl CmaEqualizer {
    pub fn new(w: ButterflyFilter, cfg: CmaConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { w, cfg })
    }

    /// Symbols emitted per update.
    pub fn emit_size(&self) -> usize {
        match self.cfg.variant {
            CmaVariant::Symbolwise => 1,
            CmaVariant::Batch { n_b } => n_b,
            CmaVariant::Flex { n_flex, .. } => n_flex,
        }
    }

    /// Equalizes symbols `start..start + count` while adapting, and returns
    /// them. `count` must be a multiple of [`Self::emit_size`].
    pub fn process(
        &mut self,
        input: &DualPol,
        start: usize,
        count: usize,
        learning_rate: f64,
    ) -> Result<DualPol> {
        let emit = self.emit_size();
        if !count.is_multiple_of(emit) {
            return Err(Error::Config(format!(
                "{count} symbols is not a multiple of the update size {emit}"
            )));
        }
        let needed = self.w.spacing.decimation() * (start + count) + self.w.center();
        if needed > input[0].len() {
            return Err(Error::EndOfStream {
                needed: start + count,
                available: input[0].len() / self.w.spacing.decimation(),
            });
        }
        let radius = self.cfg.radius;
        let mut out: DualPol = [Vec::with_capacity(count), Vec::with_capacity(count)];
        match self.cfg.variant {
            CmaVariant::Symbolwise => {
                if self.w.spacing.decimation() * start + self.w.center() < self.w.len() - 1 {
                    return Err(Error::Range(format!("symbol {start} lacks filter context")));
                }
                for n in start..start + count {
                    let z = cma_symbolwise_step(&mut self.w, input, n, learning_rate, radius);
                    out[0].push(z[0]);
                    out[1].push(z[1]);
                }
            }
            CmaVariant::Batch { n_b } => {
                for b in (start..start + count).step_by(n_b) {
                    let eval = cma_batch_step(&mut self.w, input, b..b + n_b, learning_rate, radius)?;
                    for p in 0..2 {
                        out[p].extend_from_slice(&eval.outputs[p]);
                    }
                }
            }
            CmaVariant::Flex { n_b, n_flex } => {
                for cursor in (start..start + count).step_by(n_flex) {
                    let end = cursor + n_flex;
                    let begin = end.checked_sub(n_b).ok_or_else(|| {
                        Error::Range(format!("flex window before symbol {cursor} starts below 0"))
                    })?;
                    let eval = cma_batch_step(&mut self.w, input, begin..end, learning_rate, radius)?;
                    for p in 0..2 {
                        out[p].extend_from_slice(&eval.outputs[p][n_b - n_flex..]);
                    }
                }
            }
        }
        Ok(out)
    }
}
