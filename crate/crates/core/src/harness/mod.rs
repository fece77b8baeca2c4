//! Run orchestration: builds the link, drives a scheme frame by frame,
//! scores every frame, and aggregates sweeps.

mod config_file;
mod output;
pub mod plot;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::butterfly::{ButterflyFilter, Spacing};
use crate::channel::{add_awgn, apply_channel, matched_filter, shape_and_resample, ChannelParams, PulseShape};
use crate::cma::{CmaConfig, CmaEqualizer, CmaVariant};
use crate::constellation::{build_uniform_qam64, godard_radius, sample_frame, solve_mb_distribution, ShapedConstellation};
use crate::cpe::{correct_dual, CpeConfig};
use crate::metrics::{aggregate_run_stats, score_frame, Aggregate, RunStats, MIN_OVERLAP};
use crate::vae::{VaeEqualizer, VaeScheme};
use crate::{DualPol, Error, Result, C64};

pub use config_file::{apply_entry, parse_config, parse_value, resolve_config, ConfigEntry};
pub use output::{
    read_summary, read_trajectories, write_constellation_csv, write_meta, write_summary, write_trajectories,
    SummaryRow, TrajectoryRow,
};

/// Entropy of the shaped constellation.
pub const PCS_ENTROPY: f64 = 5.73;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    Cma,
    CmaBatch,
    CmaFlex,
    VaeBatch,
    VaeFlex,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [Self::Cma, Self::CmaBatch, Self::CmaFlex, Self::VaeBatch, Self::VaeFlex];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cma => "cma",
            Self::CmaBatch => "cmabatch",
            Self::CmaFlex => "cmaflex",
            Self::VaeBatch => "vaebatch",
            Self::VaeFlex => "vaeflex",
        }
    }

    pub fn is_cma(self) -> bool {
        matches!(self, Self::Cma | Self::CmaBatch | Self::CmaFlex)
    }

    pub fn is_flex(self) -> bool {
        matches!(self, Self::CmaFlex | Self::VaeFlex)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}' (valid: {})", scheme_list())))
    }
}

/// Comma-separated names of all schemes.
pub fn scheme_list() -> String {
    SchemeId::ALL.map(|s| s.name()).join(", ")
}

/// Per-scheme hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: SchemeId,
    pub learning_rate: f64,
    /// Batch or window size; 1 for the symbol-wise CMA.
    pub n_b: usize,
    /// New symbols per flex iteration; equals `n_b` otherwise.
    pub n_flex: usize,
    pub scheduler_period: usize,
    pub m_eq: usize,
    /// Channel-estimate length (VAE only).
    pub m_est: usize,
}

impl SchemeConfig {
    pub fn defaults(scheme: SchemeId) -> Self {
        let (learning_rate, n_b, n_flex) = match scheme {
            SchemeId::Cma => (8e-4, 1, 1),
            SchemeId::CmaBatch => (1.2e-4, 200, 200),
            SchemeId::CmaFlex => (4.5e-5, 100, 10),
            SchemeId::VaeBatch => (2e-3, 200, 200),
            SchemeId::VaeFlex => (2e-3, 100, 10),
        };
        Self {
            scheme,
            learning_rate,
            n_b,
            n_flex,
            scheduler_period: if scheme.is_flex() { 5 } else { 20 },
            m_eq: 15,
            m_est: 25,
        }
    }

    /// Symbols emitted per update.
    pub fn emit_size(&self) -> usize {
        self.n_flex
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        if self.scheduler_period == 0 {
            return Err(Error::Config("scheduler period must be >= 1".into()));
        }
        if self.m_eq.is_multiple_of(2) || self.m_est.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "filter lengths must be odd, got m_eq {} and m_est {}",
                self.m_eq, self.m_est
            )));
        }
        if self.n_flex == 0 || self.n_flex > self.n_b {
            return Err(Error::Config(format!("need 0 < n_flex <= n_b, got {} / {}", self.n_flex, self.n_b)));
        }
        match self.scheme {
            SchemeId::Cma if self.n_b != 1 => Err(Error::Config("symbol-wise CMA has n_b = 1".into())),
            SchemeId::CmaBatch | SchemeId::VaeBatch if self.n_flex != self.n_b => {
                Err(Error::Config(format!("{} needs n_flex = n_b", self.scheme)))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationChoice {
    Uniform,
    Pcs,
}

impl ConstellationChoice {
    pub fn build(self) -> Result<ShapedConstellation> {
        match self {
            Self::Uniform => Ok(build_uniform_qam64()),
            Self::Pcs => Ok(solve_mb_distribution(PCS_ENTROPY)?.1),
        }
    }

    pub fn default_bmi_thr(self) -> f64 {
        match self {
            Self::Uniform => 5.0,
            Self::Pcs => 4.8,
        }
    }

    pub fn default_snr_db(self) -> f64 {
        match self {
            Self::Uniform => 24.0,
            Self::Pcs => 22.0,
        }
    }
}

impl FromStr for ConstellationChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "pcs" => Ok(Self::Pcs),
            _ => Err(Error::Config(format!("unknown constellation '{s}' (valid: uniform, pcs)"))),
        }
    }
}

impl fmt::Display for ConstellationChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Pcs => "pcs",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub channel: ChannelParams,
    pub pulse: PulseShape,
    pub constellation: ConstellationChoice,
    pub scheme: SchemeConfig,
    pub runs: usize,
    pub frames: usize,
    pub symbols_per_frame: usize,
    pub bmi_thr: f64,
    pub base_seed: u64,
    pub cpe_window: usize,
    /// Apply a receiver matched filter before the equalizer. Off by default:
    /// the fractionally spaced equalizer absorbs it.
    pub matched_filter: bool,
    /// Full-size run counts: 100, or 20 for the flex schemes.
    pub paper_scale: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults at the CD-sweep working point with `L_cd = 0`.
    pub fn new(scheme: SchemeId, constellation: ConstellationChoice) -> Self {
        let channel = ChannelParams {
            snr_db: constellation.default_snr_db(),
            ..ChannelParams::default()
        };
        let mut cfg = Self {
            channel,
            pulse: PulseShape::default(),
            constellation,
            scheme: SchemeConfig::defaults(scheme),
            runs: 10,
            frames: 20,
            symbols_per_frame: 20_000,
            bmi_thr: constellation.default_bmi_thr(),
            base_seed: 0,
            cpe_window: 501,
            matched_filter: false,
            paper_scale: false,
        };
        cfg.cd_sweep_point(0.0);
        cfg
    }

    /// γ = 0.2π, τ = T_S/2, `M_est` = 25, residual CD over `l_cd_km`.
    pub fn cd_sweep_point(&mut self, l_cd_km: f64) -> &mut Self {
        self.channel.gamma_hv = 0.2 * std::f64::consts::PI;
        self.channel.tau_pmd = 0.5 * self.channel.symbol_period();
        self.channel.l_cd = l_cd_km * 1e3;
        self.scheme.m_est = 25;
        self
    }

    /// τ = T_S, `L_cd` = 1 km, `M_est` = 15, HV shift `gamma_hv`.
    pub fn hv_sweep_point(&mut self, gamma_hv: f64) -> &mut Self {
        self.channel.gamma_hv = gamma_hv;
        self.channel.tau_pmd = self.channel.symbol_period();
        self.channel.l_cd = 1e3;
        self.scheme.m_est = 15;
        self
    }

    /// Replaces the scheme by its defaults, keeping filter lengths.
    pub fn with_scheme(&self, scheme: SchemeId) -> Self {
        let mut cfg = self.clone();
        cfg.scheme = SchemeConfig {
            m_eq: self.scheme.m_eq,
            m_est: self.scheme.m_est,
            ..SchemeConfig::defaults(scheme)
        };
        cfg
    }

    /// Runs and frame size actually used.
    pub fn effective_size(&self) -> (usize, usize) {
        let runs = match (self.paper_scale, self.scheme.scheme.is_flex()) {
            (false, _) => self.runs,
            (true, true) => 20,
            (true, false) => 100,
        };
        (runs, self.symbols_per_frame)
    }

    /// Symbols on either side of the scored frames; covers filter and
    /// training-window look-back.
    pub fn guard_symbols(&self) -> usize {
        self.scheme.m_eq.max(self.scheme.m_est) + self.scheme.n_b + self.pulse.span_symbols
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.scheme.validate()?;
        let (runs, n_frame) = self.effective_size();
        if runs == 0 || self.frames == 0 || n_frame == 0 {
            return Err(Error::Config("runs, frames and symbols per frame must be >= 1".into()));
        }
        if n_frame < MIN_OVERLAP + self.scheme.m_eq {
            return Err(Error::Config(format!(
                "{n_frame} symbols per frame are too few to score; need at least {}",
                MIN_OVERLAP + self.scheme.m_eq
            )));
        }
        if n_frame % self.scheme.emit_size() != 0 {
            return Err(Error::Config(format!(
                "{n_frame} symbols per frame is not a multiple of the {} update size {}",
                self.scheme.scheme,
                self.scheme.emit_size()
            )));
        }
        if self.cpe_window.is_multiple_of(2) {
            return Err(Error::Config(format!("CPE window {} must be odd", self.cpe_window)));
        }
        if !self.bmi_thr.is_finite() {
            return Err(Error::Config("BMI threshold must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.pulse.rolloff) || self.pulse.span_symbols == 0 {
            return Err(Error::Config(format!(
                "pulse needs rolloff in [0, 1] and a non-empty span, got {} over {} symbols",
                self.pulse.rolloff, self.pulse.span_symbols
            )));
        }
        Ok(())
    }
}

/// ε(k) = ε₀ · 2^(−⌊k / period⌋) for the 0-based frame `k`.
pub fn lr_schedule(initial: f64, frame: usize, period: usize) -> f64 {
    let halvings = (frame / period.max(1)).min(1100) as i32;
    initial * 0.5f64.powi(halvings)
}

/// A scheme with its adaptation state. Only the CMA family carries a
/// phase estimator.
#[allow(clippy::large_enum_variant)] // one per run, never moved in hot loops
enum Pipeline {
    Cma { eq: CmaEqualizer, cpe: CpeConfig },
    Vae { eq: VaeEqualizer },
}

impl Pipeline {
    fn build(cfg: &ExperimentConfig, c: &ShapedConstellation) -> Result<Self> {
        let sc = &cfg.scheme;
        let w = ButterflyFilter::spike_init(sc.m_eq, Spacing::Fractional { sps: cfg.channel.n_os })?;
        Ok(match sc.scheme {
            SchemeId::Cma | SchemeId::CmaBatch | SchemeId::CmaFlex => {
                let variant = match sc.scheme {
                    SchemeId::Cma => CmaVariant::Symbolwise,
                    SchemeId::CmaBatch => CmaVariant::Batch { n_b: sc.n_b },
                    _ => CmaVariant::Flex {
                        n_b: sc.n_b,
                        n_flex: sc.n_flex,
                    },
                };
                let cma = CmaConfig {
                    learning_rate: sc.learning_rate,
                    radius: godard_radius(c),
                    variant,
                };
                let cpe = CpeConfig {
                    window_symbols: cfg.cpe_window,
                    reference_angle: c.fourth_moment().arg(),
                    ..CpeConfig::default()
                };
                Pipeline::Cma {
                    eq: CmaEqualizer::new(w, cma)?,
                    cpe,
                }
            }
            SchemeId::VaeBatch | SchemeId::VaeFlex => {
                let scheme = if sc.scheme == SchemeId::VaeBatch {
                    VaeScheme::Batch { n_b: sc.n_b }
                } else {
                    VaeScheme::Flex {
                        n_b: sc.n_b,
                        n_flex: sc.n_flex,
                    }
                };
                // the channel estimate starts at the known transceiver pulse
                let mut h = ButterflyFilter::zeros(sc.m_est, Spacing::Symbol)?;
                let g = cfg.pulse.link_response(cfg.channel.n_os, sc.m_est, cfg.matched_filter);
                for p in 0..2 {
                    h.taps[p][p] = g.iter().map(|&v| C64::new(v, 0.0)).collect();
                }
                let nv = cfg.channel.symbol_noise_var();
                Pipeline::Vae {
                    eq: VaeEqualizer::new(w, h, scheme, c.clone(), nv)?,
                }
            }
        })
    }

    fn has_phase_estimator(&self) -> bool {
        matches!(self, Pipeline::Cma { .. })
    }

    fn process(&mut self, rx: &DualPol, start: usize, count: usize, lr: f64) -> Result<DualPol> {
        match self {
            Pipeline::Cma { eq, cpe } => correct_dual(&eq.process(rx, start, count, lr)?, cpe),
            Pipeline::Vae { eq } => eq.process(rx, start, count, lr),
        }
    }

    fn taps(&self) -> &ButterflyFilter {
        match self {
            Pipeline::Cma { eq, .. } => &eq.w,
            Pipeline::Vae { eq } => &eq.w,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub stats: RunStats,
    /// Learning rate used in each frame.
    pub learning_rates: Vec<f64>,
    #[serde(skip)]
    pub last_frame: DualPol,
    #[serde(skip)]
    pub final_taps: ButterflyFilter,
}

impl RunResult {
    pub fn final_bmi(&self) -> f64 {
        self.stats.trajectory.last().map_or(0.0, |f| f.bmi_mean)
    }
}

/// Received oversampled stream after channel and noise, optionally
/// matched filtered.
pub fn receive(
    symbols: &DualPol,
    p: &ChannelParams,
    ps: &PulseShape,
    matched: bool,
    seed: u64,
) -> Result<DualPol> {
    let tx = shape_and_resample(symbols, p, ps)?;
    let mut rx = apply_channel(&tx, p)?;
    if p.snr_db.is_finite() {
        rx = add_awgn(&rx, p.snr_db, p.n_os, seed);
    }
    Ok(if matched { matched_filter(&rx, p, ps) } else { rx })
}

/// One seeded run; the result is a pure function of `(cfg, seed)`.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let c = cfg.constellation.build()?;
    let (_, n_frame) = cfg.effective_size();
    let guard = cfg.guard_symbols();
    let total = cfg.frames * n_frame + 2 * guard;
    let data = sample_frame(&c, total, seed)?;
    let rx = receive(&data.symbols, &cfg.channel, &cfg.pulse, cfg.matched_filter, seed)?;

    let mut pipeline = Pipeline::build(cfg, &c)?;
    debug_assert_eq!(pipeline.has_phase_estimator(), cfg.scheme.scheme.is_cma());
    let mut trajectory = Vec::with_capacity(cfg.frames);
    let mut learning_rates = Vec::with_capacity(cfg.frames);
    let mut last_frame: DualPol = [Vec::new(), Vec::new()];
    for k in 0..cfg.frames {
        let lr = lr_schedule(cfg.scheme.learning_rate, k, cfg.scheme.scheduler_period);
        let start = guard + k * n_frame;
        let out = pipeline.process(&rx, start, n_frame, lr).map_err(|e| match e {
            Error::EndOfStream { needed, available } => Error::Config(format!(
                "stream exhausted at frame {}: needed {needed} symbols, {available} available",
                k + 1
            )),
            e => e,
        })?;
        let tx_idx = [0, 1].map(|p| data.indices[p][start..start + n_frame].to_vec());
        trajectory.push(score_frame(k + 1, &out, &tx_idx, &c, cfg.scheme.m_eq)?);
        learning_rates.push(lr);
        last_frame = out;
    }
    Ok(RunResult {
        seed,
        stats: RunStats::from_trajectory(trajectory, cfg.bmi_thr),
        learning_rates,
        last_frame,
        final_taps: pipeline.taps().clone(),
    })
}

/// Sweep axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Residual fiber length in km at the CD-sweep working point.
    Cd,
    /// HV shift in rad at the HV-sweep working point.
    Hv,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cd => "cd",
            Self::Hv => "hv",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Self::Cd => "km",
            Self::Hv => "rad",
        }
    }

    /// Moves `cfg` to the working point of this sweep at `value`.
    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            Self::Cd => cfg.cd_sweep_point(value),
            Self::Hv => cfg.hv_sweep_point(value),
        };
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cd" | "l_cd" => Ok(Self::Cd),
            "hv" | "gamma_hv" => Ok(Self::Hv),
            _ => Err(Error::Config(format!("unknown sweep parameter '{s}' (valid: cd, hv)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub scheme: SchemeId,
    pub config: ExperimentConfig,
    pub aggregate: Aggregate,
    pub runs: Vec<RunResult>,
}

impl SweepPoint {
    /// Mean final BMI over all runs.
    pub fn final_bmi_mean(&self) -> f64 {
        self.runs.iter().map(RunResult::final_bmi).sum::<f64>() / self.runs.len() as f64
    }

    /// Mean final BMI over runs that did not fail.
    pub fn converged_bmi_mean(&self) -> Option<f64> {
        let ok: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| !r.stats.failed)
            .map(RunResult::final_bmi)
            .collect();
        (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepStats {
    /// `None` for a single configuration.
    pub param: Option<SweepParam>,
    pub points: Vec<SweepPoint>,
}

impl SweepStats {
    pub fn point(&self, value: f64, scheme: SchemeId) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.value == value && p.scheme == scheme)
    }
}

/// Runs every `(value, scheme)` combination with seeds `base_seed + r`.
/// `schemes` carry their own hyperparameters; working-point settings of
/// `base` are overwritten by the sweep.
pub fn run_sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    schemes: &[SchemeConfig],
) -> Result<SweepStats> {
    if values.is_empty() || schemes.is_empty() {
        return Err(Error::Config("sweep needs at least one value and one scheme".into()));
    }
    let mut configs = Vec::new();
    for &v in values {
        for sc in schemes {
            let mut cfg = base.clone();
            cfg.scheme = sc.clone();
            param.apply(&mut cfg, v);
            configs.push((v, cfg));
        }
    }
    Ok(SweepStats {
        param: Some(param),
        points: run_points(configs)?,
    })
}

/// Runs one configuration as a single-point sweep with value 0.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepStats> {
    Ok(SweepStats {
        param: None,
        points: run_points(vec![(0.0, cfg.clone())])?,
    })
}

fn run_points(configs: Vec<(f64, ExperimentConfig)>) -> Result<Vec<SweepPoint>> {
    for (_, cfg) in &configs {
        cfg.validate()?;
    }
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, (_, cfg))| {
            let (runs, _) = cfg.effective_size();
            (0..runs as u64).map(move |r| (i, cfg.base_seed.wrapping_add(r)))
        })
        .collect();
    let results: Vec<Result<RunResult>> =
        jobs.par_iter().map(|&(i, seed)| run_single(&configs[i].1, seed)).collect();

    let mut grouped: Vec<Vec<RunResult>> = vec![Vec::new(); configs.len()];
    for (&(i, _), res) in jobs.iter().zip(results) {
        grouped[i].push(res?);
    }
    configs
        .into_iter()
        .zip(grouped)
        .map(|((value, config), runs)| {
            let traj: Vec<Vec<f64>> = runs
                .iter()
                .map(|r| r.stats.trajectory.iter().map(|f| f.bmi_mean).collect())
                .collect();
            Ok(SweepPoint {
                value,
                scheme: config.scheme.scheme,
                aggregate: aggregate_run_stats(&traj, config.bmi_thr)?,
                config,
                runs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        assert_eq!(lr_schedule(1e-3, 19, 20), 1e-3);
        assert_eq!(lr_schedule(1e-3, 40, 20), 2.5e-4);
        assert_eq!(lr_schedule(1e-3, 5, 5), 5e-4);
        assert_eq!(lr_schedule(1e-3, 0, 0), 1e-3);
    }

    #[test]
    fn scheme_defaults() {
        let d = SchemeConfig::defaults;
        assert_eq!(d(SchemeId::Cma).learning_rate, 8e-4);
        assert_eq!((d(SchemeId::CmaBatch).learning_rate, d(SchemeId::CmaBatch).n_b), (1.2e-4, 200));
        assert_eq!((d(SchemeId::VaeBatch).learning_rate, d(SchemeId::VaeBatch).n_b), (2e-3, 200));
        let f = d(SchemeId::CmaFlex);
        assert_eq!((f.learning_rate, f.n_b, f.n_flex, f.scheduler_period), (4.5e-5, 100, 10, 5));
        let f = d(SchemeId::VaeFlex);
        assert_eq!((f.learning_rate, f.n_b, f.n_flex, f.scheduler_period), (2e-3, 100, 10, 5));
        assert_eq!(d(SchemeId::VaeBatch).scheduler_period, 20);
        for s in SchemeId::ALL {
            d(s).validate().unwrap();
            assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
        }
        assert!("foo".parse::<SchemeId>().unwrap_err().to_string().contains("vaeflex"));
    }

    #[test]
    fn thresholds_follow_constellation() {
        let c = ExperimentConfig::new(SchemeId::VaeBatch, ConstellationChoice::Pcs);
        assert_eq!(c.bmi_thr, 4.8);
        assert_eq!(c.channel.snr_db, 22.0);
        let c = ExperimentConfig::new(SchemeId::VaeBatch, ConstellationChoice::Uniform);
        assert_eq!(c.bmi_thr, 5.0);
    }

    #[test]
    fn paper_scale_budget() {
        for s in SchemeId::ALL {
            let mut c = ExperimentConfig::new(s, ConstellationChoice::Uniform);
            c.paper_scale = true;
            let (runs, n) = c.effective_size();
            assert_eq!(runs, if s.is_flex() { 20 } else { 100 });
            assert_eq!(n, c.symbols_per_frame);
        }
    }

    #[test]
    fn invalid_configs() {
        let mut c = ExperimentConfig::new(SchemeId::CmaBatch, ConstellationChoice::Uniform);
        c.symbols_per_frame = 1100;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(SchemeId::Cma, ConstellationChoice::Uniform);
        c.scheme.m_eq = 14;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(SchemeId::VaeFlex, ConstellationChoice::Uniform);
        c.runs = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(SchemeId::VaeBatch, ConstellationChoice::Pcs);
        c.pulse.rolloff = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn pipelines_isolate_phase_estimation() {
        for s in SchemeId::ALL {
            let cfg = ExperimentConfig::new(s, ConstellationChoice::Uniform);
            let c = cfg.constellation.build().unwrap();
            let p = Pipeline::build(&cfg, &c).unwrap();
            assert_eq!(p.has_phase_estimator(), s.is_cma());
        }
    }
}
