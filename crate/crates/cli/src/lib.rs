//! Command-line front end for the blind equalizer bootstrap benchmarks.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use blindeq::harness::plot::summary_charts;
use blindeq::harness::{
    parse_config, parse_value, read_summary, resolve_config, run_experiment, run_sweep, scheme_list,
    write_constellation_csv, write_meta, write_summary, write_trajectories, ConfigEntry,
    ExperimentConfig, SchemeId, SweepParam, SweepStats,
};
use blindeq::selftest::run_selftest;
use blindeq::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "blindeq", version, about = "Blind equalizer bootstrap benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration for each selected scheme.
    Run(Common),
    /// Sweep residual CD (`cd`, km) or the HV rotation angle (`hv`, rad).
    Sweep {
        #[arg(long, value_parser = parse_param)]
        param: SweepParam,
        /// Comma separated sweep values; `pi` multiples are accepted.
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_number)]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in invariant and oracle checks.
    Selftest,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma separated schemes or `all`.
    #[arg(long, value_parser = parse_schemes)]
    scheme: Option<SchemeList>,
    /// `uniform` or `pcs`.
    #[arg(long)]
    constellation: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    symbols_per_frame: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Full-size run counts: 100, or 20 for the flex schemes.
    #[arg(long)]
    paper_scale: bool,
    /// Extra `key=value` settings using the config file keys.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write SVG charts of the summary.
    #[arg(long)]
    plot: bool,
    /// Write the last frame's equalized symbols and final taps of run 0.
    #[arg(long)]
    dump: bool,
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|_| format!("unknown sweep parameter '{s}' (valid: cd, hv)"))
}

fn parse_number(s: &str) -> Result<f64, String> {
    parse_value(s).map_err(|e| e.to_string())
}

#[derive(Clone, Debug)]
struct SchemeList(Vec<SchemeId>);

fn parse_schemes(s: &str) -> Result<SchemeList, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(SchemeList(SchemeId::ALL.to_vec()));
    }
    s.split(',')
        .map(|p| p.trim().parse::<SchemeId>().map_err(|_| format!("unknown scheme '{p}' (valid: {}, all)", scheme_list())))
        .collect::<Result<_, _>>()
        .map(SchemeList)
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => Failure::Usage(e.to_string()),
            e => Failure::Runtime(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Config file entries followed by flag entries; later entries win.
fn entries(common: &Common) -> Result<Vec<ConfigEntry>, Failure> {
    let mut entries = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Runtime(Error::Config(format!("{}: {e}", path.display()))))?;
            parse_config(&text)?
        }
        None => Vec::new(),
    };
    let mut flags = Vec::new();
    if let Some(c) = &common.constellation {
        flags.push(ConfigEntry::new("constellation", c));
    }
    let counts = [
        ("runs", common.runs),
        ("frames", common.frames),
        ("symbols_per_frame", common.symbols_per_frame),
    ];
    for (key, v) in counts {
        if let Some(v) = v {
            flags.push(ConfigEntry::new(key, v.to_string()));
        }
    }
    if let Some(s) = common.seed {
        flags.push(ConfigEntry::new("seed", s.to_string()));
    }
    if common.paper_scale {
        flags.push(ConfigEntry::new("paper_scale", "true"));
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        flags.push(ConfigEntry::new(k.trim(), v.trim()));
    }
    for f in flags {
        entries.retain(|e| e.key != f.key);
        entries.push(f);
    }
    Ok(entries)
}

/// One resolved configuration per selected scheme.
fn configs(common: &Common) -> Result<Vec<ExperimentConfig>, Failure> {
    let mut entries = entries(common)?;
    let schemes = match &common.scheme {
        Some(list) => {
            entries.retain(|e| e.key != "scheme");
            list.0.clone()
        }
        None => {
            let from_file = entries.iter().find(|e| e.key == "scheme").map(|e| e.value.parse::<SchemeId>());
            vec![from_file.transpose()?.unwrap_or(SchemeId::VaeBatch)]
        }
    };
    schemes
        .into_iter()
        .map(|s| {
            let cfg = resolve_config(&entries, s)?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_outputs(stats: &SweepStats, common: &Common) -> Result<Vec<PathBuf>, Failure> {
    let dir = &common.out;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, body: &dyn Fn(&mut BufWriter<File>) -> Result<(), Failure>| {
        let mut f = create(dir, &name)?;
        body(&mut f)?;
        f.flush()?;
        written.push(dir.join(name));
        Ok::<(), Failure>(())
    };
    emit("trajectories.csv".into(), &|f| Ok(write_trajectories(f, stats)?))?;
    emit("summary.csv".into(), &|f| Ok(write_summary(f, stats)?))?;
    emit("meta.json".into(), &|f| Ok(write_meta(f, stats)?))?;
    if common.dump {
        for p in &stats.points {
            let Some(run) = p.runs.first() else { continue };
            let tag = format!("{}_{:.4}", p.scheme, p.value);
            emit(format!("constellation_{tag}.csv"), &|f| Ok(write_constellation_csv(f, &run.last_frame)?))?;
            emit(format!("taps_{tag}.csv"), &|f| Ok(run.final_taps.write_taps_csv(f)?))?;
        }
    }
    if common.plot {
        let rows = read_summary(File::open(dir.join("summary.csv"))?)?;
        let (param, unit) = stats.param.map_or(("point", ""), |p| (p.name(), p.unit()));
        for (name, svg) in summary_charts(&rows, param, unit) {
            emit(name, &|f| Ok(f.write_all(svg.as_bytes())?))?;
        }
    }
    Ok(written)
}

fn report(stats: &SweepStats, written: &[PathBuf]) {
    for p in &stats.points {
        let k = p.aggregate.k_bar.map_or("-".to_string(), |k| format!("{k:.2}"));
        println!(
            "{:>10} {:<9} failed {:>5.1}%  k_bar {k:>6}  final BMI {:.3}",
            format!("{:.4}", p.value),
            p.scheme.to_string(),
            p.aggregate.failed_pct,
            p.final_bmi_mean()
        );
    }
    for w in written {
        println!("wrote {}", w.display());
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Selftest => {
            let checks = run_selftest()?;
            for c in &checks {
                let tag = if c.passed { "ok" } else { "FAILED" };
                println!("{tag:>6}  {:<28} error {:.2e} (tolerance {:.0e})", c.name, c.error, c.tolerance);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Runtime(Error::Precondition("selftest failed".into())))
            }
        }
        Command::Run(common) => {
            let mut stats = SweepStats {
                param: None,
                points: Vec::new(),
            };
            for cfg in configs(&common)? {
                stats.points.extend(run_experiment(&cfg)?.points);
            }
            let written = write_outputs(&stats, &common)?;
            report(&stats, &written);
            Ok(())
        }
        Command::Sweep { param, values, common } => {
            let cfgs = configs(&common)?;
            let schemes: Vec<_> = cfgs.iter().map(|c| c.scheme.clone()).collect();
            let stats = run_sweep(&cfgs[0], param, &values, &schemes)?;
            let written = write_outputs(&stats, &common)?;
            report(&stats, &written);
            Ok(())
        }
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit status: 0 on success, 2 on usage or
/// configuration errors, 1 on runtime or I/O failures.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
