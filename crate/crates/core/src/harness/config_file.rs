//! Flat `key = value` configuration files.
//!
//! ```text
//! # HV sweep, VAE only
//! scheme = vaebatch
//! gamma_hv = 0.25pi
//! snr_db = 24
//! ```

use std::f64::consts::PI;

use super::{ConstellationChoice, ExperimentConfig, SchemeId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigEntry {
    /// 1-based source line; 0 for entries that did not come from a file.
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl ConfigEntry {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            line: 0,
            key: key.into(),
            value: value.into(),
        }
    }
}

/// Splits a config file into entries. Blank lines and `#` comments are
/// skipped; keys are lowercase identifiers and may appear once.
pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out: Vec<ConfigEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: "expected key = value".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_') {
            return Err(Error::Parse {
                line,
                msg: format!("invalid key '{key}'"),
            });
        }
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("missing value for '{key}'"),
            });
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(Error::Parse {
                line,
                msg: format!("'{key}' already set on line {}", prev.line),
            });
        }
        out.push(ConfigEntry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

/// Parses a number with an optional `pi` factor: `0.25pi`, `pi`, `-1e3`,
/// `inf`.
pub fn parse_value(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("invalid number '{s}'"));
    let v = match s.strip_suffix("pi") {
        Some(head) => {
            let head = head.trim_end().trim_end_matches('*').trim_end();
            let k = match head {
                "" => 1.0,
                "-" => -1.0,
                h => h.parse::<f64>().map_err(|_| bad())?,
            };
            k * PI
        }
        None => s.parse::<f64>().map_err(|_| bad())?,
    };
    if v.is_nan() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid count '{s}'")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{s}'"))),
    }
}

/// Applies one setting. `scheme` resets the scheme hyperparameters to
/// their defaults; `constellation` resets SNR and BMI threshold.
pub fn apply_entry(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let ch = &mut cfg.channel;
    match key {
        "scheme" => *cfg = cfg.with_scheme(value.parse::<SchemeId>()?),
        "constellation" => {
            let c: ConstellationChoice = value.parse()?;
            cfg.constellation = c;
            cfg.bmi_thr = c.default_bmi_thr();
            cfg.channel.snr_db = c.default_snr_db();
        }
        "runs" => cfg.runs = parse_count(value)?,
        "frames" => cfg.frames = parse_count(value)?,
        "symbols_per_frame" => cfg.symbols_per_frame = parse_count(value)?,
        "seed" => {
            cfg.base_seed = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid seed '{value}'")))?
        }
        "bmi_thr" => cfg.bmi_thr = parse_value(value)?,
        "snr_db" => ch.snr_db = parse_value(value)?,
        "gamma_hv" => ch.gamma_hv = parse_value(value)?,
        "tau_pmd_ts" => ch.tau_pmd = parse_value(value)? * ch.symbol_period(),
        "l_cd_km" => ch.l_cd = parse_value(value)? * 1e3,
        "beta_cd_ps2_per_km" => ch.beta_cd = parse_value(value)? * 1e-27,
        "learning_rate" => cfg.scheme.learning_rate = parse_value(value)?,
        "n_b" => cfg.scheme.n_b = parse_count(value)?,
        "n_flex" => cfg.scheme.n_flex = parse_count(value)?,
        "scheduler_period" => cfg.scheme.scheduler_period = parse_count(value)?,
        "m_eq" => cfg.scheme.m_eq = parse_count(value)?,
        "m_est" => cfg.scheme.m_est = parse_count(value)?,
        "cpe_window" => cfg.cpe_window = parse_count(value)?,
        "paper_scale" => cfg.paper_scale = parse_bool(value)?,
        "matched_filter" => cfg.matched_filter = parse_bool(value)?,
        "rolloff" => cfg.pulse.rolloff = parse_value(value)?,
        _ => return Err(Error::Config(format!("unknown setting '{key}'"))),
    }
    Ok(())
}

/// Builds a configuration from entries in order, later entries winning.
/// `scheme` and `constellation` are applied first so that they do not
/// reset explicitly given values.
pub fn resolve_config(entries: &[ConfigEntry], default_scheme: SchemeId) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(default_scheme, ConstellationChoice::Uniform);
    let first = |e: &&ConfigEntry| e.key == "scheme" || e.key == "constellation";
    let ordered = entries.iter().filter(first).chain(entries.iter().filter(|e| !first(e)));
    for e in ordered {
        apply_entry(&mut cfg, &e.key, &e.value).map_err(|err| match (e.line, err) {
            (0, err) => err,
            (line, Error::Config(msg)) => Error::Parse { line, msg },
            (_, err) => err,
        })?;
    }
    Ok(cfg)
}
