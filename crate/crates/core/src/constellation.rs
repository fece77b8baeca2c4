//! Square 64-QAM with Gray labels, optionally Maxwell-Boltzmann shaped.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::{rng, DualPol, Error, Result, C64};

/// Bits carried by one 64-QAM symbol.
pub const BITS_PER_SYMBOL: usize = 6;

const LEVELS_PER_AXIS: usize = 8;

/// Interval width at which the shaping-parameter bisection stops.
const BISECTION_TOL: f64 = 1e-12;

/// A discrete constellation with bit labels and prior probabilities.
///
/// Points are normalized to unit average energy under the priors.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapedConstellation {
    pub points: Vec<C64>,
    pub bit_labels: Vec<u8>,
    pub priors: Vec<f64>,
    pub entropy_bits: f64,
    /// Factor that maps the integer lattice (levels ±1, ±3, …) onto `points`.
    pub scale: f64,
}

/// Maxwell-Boltzmann shaping parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapingParams {
    pub lambda_mb: f64,
    pub target_entropy_bits: f64,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn lattice() -> (Vec<C64>, Vec<u8>) {
    let mut points = Vec::with_capacity(LEVELS_PER_AXIS * LEVELS_PER_AXIS);
    let mut labels = Vec::with_capacity(LEVELS_PER_AXIS * LEVELS_PER_AXIS);
    for i in 0..LEVELS_PER_AXIS {
        for q in 0..LEVELS_PER_AXIS {
            let level = |k: usize| 2.0 * k as f64 - (LEVELS_PER_AXIS as f64 - 1.0);
            points.push(C64::new(level(i), level(q)));
            labels.push(((gray(i) << 3) | gray(q)) as u8);
        }
    }
    (points, labels)
}

fn entropy_bits(priors: &[f64]) -> f64 {
    priors
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

fn mb_priors(lattice: &[C64], lambda: f64) -> Vec<f64> {
    // shift by the minimum energy so large lambda does not underflow
    let e_min = lattice.iter().map(|x| x.norm_sqr()).fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = lattice
        .iter()
        .map(|x| (-lambda * (x.norm_sqr() - e_min)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

impl ShapedConstellation {
    /// Builds a constellation from raw points, normalizing it to unit
    /// average energy under `priors` (which are renormalized to sum to 1).
    pub fn from_parts(points: Vec<C64>, bit_labels: Vec<u8>, priors: Vec<f64>) -> Result<Self> {
        if points.len() != bit_labels.len() || points.len() != priors.len() || points.is_empty() {
            return Err(Error::Shape(format!(
                "{} points, {} labels, {} priors",
                points.len(),
                bit_labels.len(),
                priors.len()
            )));
        }
        if priors.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Precondition("priors must be finite and non-negative".into()));
        }
        let total: f64 = priors.iter().sum();
        if total <= 0.0 {
            return Err(Error::Precondition("priors sum to zero".into()));
        }
        let priors: Vec<f64> = priors.iter().map(|p| p / total).collect();
        let energy: f64 = points.iter().zip(&priors).map(|(x, p)| p * x.norm_sqr()).sum();
        if energy <= 0.0 {
            return Err(Error::Precondition("constellation has zero energy".into()));
        }
        let scale = energy.sqrt().recip();
        Ok(Self {
            points: points.iter().map(|x| x * scale).collect(),
            entropy_bits: entropy_bits(&priors),
            bit_labels,
            priors,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of label bits per point.
    pub fn bits_per_symbol(&self) -> usize {
        self.len().next_power_of_two().trailing_zeros() as usize
    }

    /// Label bit `i` of point `c`, most significant bit first.
    pub fn label_bit(&self, c: usize, i: usize) -> bool {
        let m = self.bits_per_symbol();
        (self.bit_labels[c] >> (m - 1 - i)) & 1 == 1
    }

    /// E[|a|²] under the priors.
    pub fn mean_energy(&self) -> f64 {
        self.points.iter().zip(&self.priors).map(|(x, p)| p * x.norm_sqr()).sum()
    }

    /// E[a⁴] under the priors (complex; real and negative for square QAM).
    pub fn fourth_moment(&self) -> C64 {
        self.points.iter().zip(&self.priors).map(|(x, p)| x.powu(4) * p).sum()
    }

    /// Marginal probability that label bit `i` equals one.
    pub fn bit_one_prior(&self, i: usize) -> f64 {
        (0..self.len()).filter(|&c| self.label_bit(c, i)).map(|c| self.priors[c]).sum()
    }

    /// Rescales to unit energy under the current priors.
    pub fn normalized(&self) -> Self {
        let e = self.mean_energy();
        let s = e.sqrt().recip();
        Self {
            points: self.points.iter().map(|x| x * s).collect(),
            scale: self.scale * s,
            ..self.clone()
        }
    }
}

/// Square 64-QAM on levels {±1, ±3, ±5, ±7}, Gray labeled per quadrature,
/// uniform priors, unit average energy.
pub fn build_uniform_qam64() -> ShapedConstellation {
    let (points, labels) = lattice();
    let n = points.len();
    ShapedConstellation::from_parts(points, labels, vec![1.0 / n as f64; n])
        .expect("lattice is well formed")
}

/// Finds the Maxwell-Boltzmann rate λ with entropy `target_entropy_bits`
/// and returns the shaped, renormalized 64-QAM.
///
/// Priors are `exp(-λ |x|²)` on the integer lattice. As λ grows the entropy
/// falls monotonically towards 2 bits (the four innermost points), so
/// targets at or below that limit are rejected as well.
pub fn solve_mb_distribution(
    target_entropy_bits: f64,
) -> Result<(ShapingParams, ShapedConstellation)> {
    let max = BITS_PER_SYMBOL as f64;
    if !(target_entropy_bits > 0.0 && target_entropy_bits <= max) {
        return Err(Error::InvalidTarget(target_entropy_bits, max));
    }
    let (points, labels) = lattice();
    let entropy_at = |lambda: f64| entropy_bits(&mb_priors(&points, lambda));

    let lambda = if target_entropy_bits >= max {
        0.0
    } else {
        let mut hi = 10.0;
        while entropy_at(hi) > target_entropy_bits {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::InvalidTarget(target_entropy_bits, max));
            }
        }
        let mut lo = 0.0;
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if entropy_at(mid) > target_entropy_bits {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let priors = mb_priors(&points, lambda);
    let c = ShapedConstellation::from_parts(points, labels, priors)?;
    if (c.entropy_bits - target_entropy_bits).abs() > 1e-6 {
        return Err(Error::InvalidTarget(target_entropy_bits, max));
    }
    Ok((
        ShapingParams {
            lambda_mb: lambda,
            target_entropy_bits,
        },
        c,
    ))
}

/// Transmit symbol indices and symbols for both polarizations.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub indices: [Vec<usize>; 2],
    pub symbols: DualPol,
}

/// Draws two independent i.i.d. symbol streams from the constellation priors.
pub fn sample_frame(c: &ShapedConstellation, n_symbols: usize, seed: u64) -> Result<Frame> {
    if n_symbols == 0 {
        return Err(Error::Precondition("n_symbols must be at least 1".into()));
    }
    let dist = WeightedIndex::new(&c.priors)
        .map_err(|e| Error::Precondition(format!("priors unusable for sampling: {e}")))?;
    let mut rng = rng::substream(seed, rng::STREAM_DATA);
    let mut draw = || -> Vec<usize> { (0..n_symbols).map(|_| dist.sample(&mut rng)).collect() };
    let indices = [draw(), draw()];
    let symbols = [
        indices[0].iter().map(|&i| c.points[i]).collect(),
        indices[1].iter().map(|&i| c.points[i]).collect(),
    ];
    Ok(Frame { indices, symbols })
}

/// Godard radius R₂ = E[|a|⁴] / E[|a|²].
pub fn godard_radius(c: &ShapedConstellation) -> f64 {
    let (m2, m4) = c
        .points
        .iter()
        .zip(&c.priors)
        .fold((0.0, 0.0), |(m2, m4), (x, p)| {
            let e = x.norm_sqr();
            (m2 + p * e, m4 + p * e * e)
        });
    m4 / m2
}
