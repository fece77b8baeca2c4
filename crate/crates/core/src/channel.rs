//! Linear dual-polarization fiber channel.
//!
//! The fiber is a static 2x2 frequency response
//!
//! ```text
//! H(f) = R(γ) · diag(exp(jπτf), exp(-jπτf)) · exp(-j2π² β L f²)
//! ```
//!
//! with `R(γ) = [[cos γ, sin γ], [-sin γ, cos γ]]`, applied to the whole
//! oversampled waveform as one circular FFT block. The transmitter uses a
//! root-raised-cosine pulse; the receiver applies the matched filter and
//! leaves everything else to the fractionally spaced equalizer.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{rng, DualPol, Error, Result, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 2x2 Jones matrix, row-major.
pub type Jones = [[C64; 2]; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// HV rotation between reference polarization and the fiber PSPs, rad.
    pub gamma_hv: f64,
    /// Differential group delay between the PSPs, s.
    pub tau_pmd: f64,
    /// Group velocity dispersion, s²/m.
    pub beta_cd: f64,
    /// Uncompensated fiber length, m.
    pub l_cd: f64,
    /// Es/N0 per polarization in dB; `+inf` disables noise.
    pub snr_db: f64,
    /// Baud.
    pub symbol_rate: f64,
    /// Samples per symbol.
    pub n_os: usize,
    /// Carrier wavelength, m. Only used for the D parameter.
    pub wavelength: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            gamma_hv: 0.0,
            tau_pmd: 0.0,
            beta_cd: -26e-27,
            l_cd: 0.0,
            snr_db: f64::INFINITY,
            symbol_rate: 100e9,
            n_os: 2,
            wavelength: 1550e-9,
        }
    }
}

impl ChannelParams {
    pub fn symbol_period(&self) -> f64 {
        self.symbol_rate.recip()
    }

    pub fn sample_rate(&self) -> f64 {
        self.n_os as f64 * self.symbol_rate
    }

    /// Dispersion parameter D = -2πc·β/λ², s/m².
    pub fn d_cd(&self) -> f64 {
        -2.0 * PI * SPEED_OF_LIGHT * self.beta_cd / (self.wavelength * self.wavelength)
    }

    /// Per-polarization noise variance at symbol rate, 10^(-SNR/10).
    pub fn symbol_noise_var(&self) -> f64 {
        if self.snr_db.is_finite() {
            10f64.powf(-self.snr_db / 10.0)
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_os < 2 {
            return Err(Error::Config(format!("n_os = {} (need >= 2)", self.n_os)));
        }
        if !(self.symbol_rate > 0.0) {
            return Err(Error::Config("symbol_rate must be positive".into()));
        }
        for (name, v) in [
            ("gamma_hv", self.gamma_hv),
            ("tau_pmd", self.tau_pmd),
            ("beta_cd", self.beta_cd),
            ("l_cd", self.l_cd),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db is NaN".into()));
        }
        Ok(())
    }
}

/// The channel matrix at frequency `f` (Hz, |f| ≤ half the sample rate).
pub fn frequency_response(p: &ChannelParams, f: f64) -> Jones {
    let (s, c) = p.gamma_hv.sin_cos();
    let pmd = C64::from_polar(1.0, PI * p.tau_pmd * f);
    let cd = C64::from_polar(1.0, -2.0 * PI * PI * p.beta_cd * p.l_cd * f * f);
    let d0 = pmd * cd;
    let d1 = pmd.conj() * cd;
    [
        [d0 * c, d1 * s],
        [d0 * -s, d1 * c],
    ]
}

/// Frequency of FFT bin `i` for an `n`-point transform at `fs`. Negative
/// frequencies occupy the upper half, so bin `n/2` is `-fs/2`.
pub fn bin_frequency(i: usize, n: usize, fs: f64) -> f64 {
    let k = if 2 * i < n { i as f64 } else { i as f64 - n as f64 };
    k * fs / n as f64
}

/// The channel matrix sampled on an FFT grid.
#[derive(Clone, Debug)]
pub struct FrequencyResponse {
    /// Bin frequencies in FFT order, Hz.
    pub freqs: Vec<f64>,
    pub matrices: Vec<Jones>,
}

impl FrequencyResponse {
    pub fn sample(p: &ChannelParams, n: usize) -> Self {
        let fs = p.sample_rate();
        let freqs: Vec<f64> = (0..n).map(|i| bin_frequency(i, n, fs)).collect();
        let matrices = freqs.iter().map(|&f| frequency_response(p, f)).collect();
        Self { freqs, matrices }
    }
}

/// Root-raised-cosine pulse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub rolloff: f64,
    pub span_symbols: usize,
}

impl Default for PulseShape {
    fn default() -> Self {
        Self {
            rolloff: 0.1,
            span_symbols: 32,
        }
    }
}

impl PulseShape {
    /// Unit-energy RRC taps at `n_os` samples per symbol,
    /// `span_symbols * n_os + 1` long, centered.
    pub fn taps(&self, n_os: usize) -> Vec<f64> {
        let beta = self.rolloff;
        let half = (self.span_symbols * n_os / 2) as isize;
        let mut taps: Vec<f64> = (-half..=half)
            .map(|k| rrc(k as f64 / n_os as f64, beta))
            .collect();
        let energy: f64 = taps.iter().map(|t| t * t).sum();
        let norm = energy.sqrt().recip();
        taps.iter_mut().for_each(|t| *t *= norm);
        taps
    }

    /// Centered `len` samples of the noiseless back-to-back impulse
    /// response seen by the receiver: the scaled shaping pulse, or with
    /// `matched` the shaping pulse followed by [`matched_filter`].
    pub fn link_response(&self, n_os: usize, len: usize, matched: bool) -> Vec<f64> {
        if matched {
            return self.back_to_back(n_os, len);
        }
        let taps = self.taps(n_os);
        let c = (taps.len() / 2) as isize;
        let gain = (n_os as f64).sqrt();
        let half = (len / 2) as isize;
        (c - half..=c + half)
            .map(|k| usize::try_from(k).ok().and_then(|k| taps.get(k)).map_or(0.0, |t| t * gain))
            .collect()
    }

    /// Centered `len` samples of the shaping filter followed by the
    /// matched filter, i.e. the noiseless back-to-back impulse response at
    /// `n_os` samples per symbol. Peaks at 1.
    pub fn back_to_back(&self, n_os: usize, len: usize) -> Vec<f64> {
        let taps = self.taps(n_os);
        let half = (len / 2) as isize;
        (-half..=half)
            .map(|lag| {
                let lag = lag.unsigned_abs();
                taps.iter().zip(taps.iter().skip(lag)).map(|(a, b)| a * b).sum()
            })
            .collect()
    }
}

/// RRC impulse response at `t` symbol periods, unnormalized.
fn rrc(t: f64, beta: f64) -> f64 {
    if t == 0.0 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && ((4.0 * beta * t).abs() - 1.0).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Circular convolution of `x` with a centered real filter.
fn circular_filter(x: &[C64], taps: &[f64]) -> Vec<C64> {
    let n = x.len();
    let half = taps.len() / 2;
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, &t)| x[(i + n + half - k % n) % n] * t)
                .sum()
        })
        .collect()
}

/// Zero-stuffs each polarization by `n_os` and applies the RRC pulse
/// (circularly, centered), so symbol `n` peaks at sample `n * n_os`.
/// Output is scaled to unit mean power for unit-energy symbols.
pub fn shape_and_resample(symbols: &DualPol, p: &ChannelParams, ps: &PulseShape) -> Result<DualPol> {
    let taps = ps.taps(p.n_os);
    for pol in symbols {
        if pol.len() < ps.span_symbols.max(1) {
            return Err(Error::Precondition(format!(
                "stream of {} symbols is shorter than the pulse span {}",
                pol.len(),
                ps.span_symbols
            )));
        }
    }
    let gain = (p.n_os as f64).sqrt();
    let shape = |pol: &Vec<C64>| {
        let mut up = vec![C64::new(0.0, 0.0); pol.len() * p.n_os];
        for (n, &s) in pol.iter().enumerate() {
            up[n * p.n_os] = s * gain;
        }
        circular_filter(&up, &taps)
    };
    Ok([shape(&symbols[0]), shape(&symbols[1])])
}

/// Receiver matched filter. Rescales so a noiseless back-to-back link
/// returns the transmit symbols at samples `n * n_os`.
pub fn matched_filter(waveform: &DualPol, p: &ChannelParams, ps: &PulseShape) -> DualPol {
    let taps: Vec<f64> = ps
        .taps(p.n_os)
        .into_iter()
        .map(|t| t / (p.n_os as f64).sqrt())
        .collect();
    [
        circular_filter(&waveform[0], &taps),
        circular_filter(&waveform[1], &taps),
    ]
}

/// Applies the channel matrix bin by bin over one circular FFT block.
pub fn apply_channel(waveform: &[Vec<C64>], p: &ChannelParams) -> Result<DualPol> {
    if waveform.len() != 2 {
        return Err(Error::Shape(format!(
            "expected 2 polarizations, got {}",
            waveform.len()
        )));
    }
    let n = waveform[0].len();
    if waveform[1].len() != n {
        return Err(Error::Shape(format!(
            "polarization lengths differ: {} vs {}",
            n,
            waveform[1].len()
        )));
    }
    if n == 0 {
        return Ok([Vec::new(), Vec::new()]);
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut h = waveform[0].clone();
    let mut v = waveform[1].clone();
    fwd.process(&mut h);
    fwd.process(&mut v);
    let fs = p.sample_rate();
    for i in 0..n {
        let m = frequency_response(p, bin_frequency(i, n, fs));
        let (a, b) = (h[i], v[i]);
        h[i] = m[0][0] * a + m[0][1] * b;
        v[i] = m[1][0] * a + m[1][1] * b;
    }
    inv.process(&mut h);
    inv.process(&mut v);
    let scale = (n as f64).recip();
    h.iter_mut().chain(v.iter_mut()).for_each(|x| *x *= scale);
    Ok([h, v])
}

/// Adds circularly symmetric white Gaussian noise to both polarizations.
///
/// The waveform is assumed to carry unit power per sample at `n_os` samples
/// per symbol, so the per-sample variance is `n_os · 10^(-snr_db/10)`,
/// i.e. Es/N0 = `snr_db` in the symbol-rate bandwidth. Infinite SNR adds
/// nothing.
pub fn add_awgn(waveform: &DualPol, snr_db: f64, n_os: usize, seed: u64) -> DualPol {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return waveform.clone();
    }
    let var = n_os as f64 * 10f64.powf(-snr_db / 10.0);
    let sigma = (var / 2.0).sqrt();
    let mut rng = rng::substream(seed, rng::STREAM_NOISE);
    let mut noisy = |pol: &Vec<C64>| -> Vec<C64> {
        pol.iter()
            .map(|&x| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                x + C64::new(re, im) * sigma
            })
            .collect()
    };
    let h = noisy(&waveform[0]);
    let v = noisy(&waveform[1]);
    [h, v]
}
