//! Adam over complex parameters, real and imaginary parts treated as
//! independent coordinates.

use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    /// First moments, componentwise.
    pub m: Vec<C64>,
    /// Second moments; `re` holds the real coordinate, `im` the imaginary.
    pub v: Vec<C64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![C64::new(0.0, 0.0); n_params],
            v: vec![C64::new(0.0, 0.0); n_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Applies one bias-corrected update. `grads` are real-coordinate
    /// gradients, `∂L/∂re + j ∂L/∂im` (twice the Wirtinger derivative).
    pub fn update(&mut self, params: &mut [C64], grads: &[C64], learning_rate: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "Adam state holds {} parameters, got {} params and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = *m * b1 + g * (1.0 - b1);
            *v = C64::new(
                b2 * v.re + (1.0 - b2) * g.re * g.re,
                b2 * v.im + (1.0 - b2) * g.im * g.im,
            );
            let step = |m: f64, v: f64| learning_rate * (m / c1) / ((v / c2).sqrt() + self.eps);
            *p -= C64::new(step(m.re, v.re), step(m.im, v.im));
        }
        Ok(())
    }
}
