//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::activations::ActivationKind;
use crate::config::{parse_override, resolve_config, ConfigError, ModeName, TrainConfig};
use crate::problems::{Geometry, ProblemKind};
use crate::training::{build_training_batch, cost_ratio, train_with_observer, TrainError, TrainOutcome};

#[derive(Parser, Debug)]
#[command(name = "ipinn", version, about = "Interface PINN solver for elliptic interface problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one network and write run.json, loss.csv, slopes.csv and params.json.
    Run(RunArgs),
    /// Train both modes over a seed list and write compare.csv.
    Compare(CompareArgs),
    /// Train the adaptive mode once per activation kind and write sweep.csv.
    SweepActivations(RunArgs),
    /// Print the benchmark geometry and data as JSON.
    PrintGeometry(GeometryArgs),
    /// Write the collocation points of a configuration as CSV.
    DumpBatch(DumpArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnExists {
    /// Fail when the output directory already holds files.
    Refuse,
    /// Write to the first free `<dir>-v<N>` instead.
    Version,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON configuration file; missing fields take the problem's defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Activation kind shared by all subdomains (adai mode).
    #[arg(long)]
    pub activation: Option<String>,
    /// Comma-separated kinds, one per subdomain (ipinn mode).
    #[arg(long)]
    pub activations: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Dotted `key=value` override, e.g. `sampling.interior=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value_t = OnExists::Refuse)]
    pub on_exists: OnExists,
    /// Print every logged loss record to stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated seeds shared by both modes.
    #[arg(long)]
    pub seeds: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct GeometryArgs {
    /// Limit output to one problem.
    #[arg(long)]
    pub problem: Option<String>,
    /// Letter layout JSON replacing the built-in one.
    #[arg(long)]
    pub geometry_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DumpArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Destination file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Failure classes mapped to distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Run(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(c) => c.into(),
            other => CliError::Run(other.into()),
        }
    }
}

type Gathered = (Option<Value>, Vec<(String, String)>);

/// Reads the optional file and collects overrides in increasing precedence.
fn gather(args: &ConfigArgs) -> Result<Gathered, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Some(value)
        }
        None => None,
    };
    let mut overrides = Vec::new();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k.to_string(), v));
        }
    };
    flag("problem", args.problem.clone());
    flag("mode", args.mode.clone());
    flag("activation", args.activation.clone());
    flag("activations", args.activations.clone());
    flag("iterations", args.iterations.map(|v| v.to_string()));
    flag("seed", args.seed.map(|v| v.to_string()));
    // kept as a JSON string so path-like values are never reinterpreted
    flag("output_dir", args.output_dir.as_ref().map(|p| Value::String(p.display().to_string()).to_string()));
    for s in &args.set {
        overrides.push(parse_override(s)?);
    }
    Ok((file, overrides))
}

pub fn load_config(args: &ConfigArgs) -> Result<TrainConfig, CliError> {
    let (file, overrides) = gather(args)?;
    Ok(resolve_config(file.as_ref(), &overrides)?)
}

/// The resolved config with its output location cleared, so artifacts replay into any directory.
pub fn echo_config(config: &TrainConfig) -> TrainConfig {
    TrainConfig { output_dir: None, ..config.clone() }
}

fn config_comment(config: &TrainConfig) -> String {
    format!("# config={}\n", echo_config(config).to_json())
}

/// Picks the directory to write into, honoring the collision policy.
pub fn prepare_output_dir(dir: &Path, policy: OnExists) -> anyhow::Result<PathBuf> {
    let occupied = |p: &Path| p.exists() && (p.is_file() || fs::read_dir(p).map(|mut d| d.next().is_some()).unwrap_or(true));
    let chosen = if !occupied(dir) {
        dir.to_path_buf()
    } else {
        match policy {
            OnExists::Refuse => bail!(
                "output directory {} already exists and is not empty; pass --on-exists version or choose another directory",
                dir.display()
            ),
            OnExists::Version => {
                let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
                (2..)
                    .map(|k| dir.with_file_name(format!("{name}-v{k}")))
                    .find(|p| !occupied(p))
                    .expect("unbounded search")
            }
        }
    };
    fs::create_dir_all(&chosen).with_context(|| format!("creating {}", chosen.display()))?;
    Ok(chosen)
}

fn default_dir(config: &TrainConfig, what: &str) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{what}", config.problem.name())))
}

/// Writes the four run artifacts into `dir`.
pub fn write_run_files(dir: &Path, outcome: &TrainOutcome) -> anyhow::Result<()> {
    let report = &outcome.report;
    let config = &report.config_echo;
    let mut run = serde_json::to_value(report)?;
    run["config_echo"] = serde_json::to_value(echo_config(config))?;
    run["final_loss"] = serde_json::to_value(report.final_loss())?;
    let params = json!({ "config": echo_config(config), "snapshot": outcome.snapshot });
    let files = [
        ("run.json", serde_json::to_string_pretty(&run)? + "\n"),
        ("loss.csv", config_comment(config) + &report.loss_csv()),
        ("slopes.csv", config_comment(config) + &report.slopes_csv()),
        ("params.json", serde_json::to_string_pretty(&params)? + "\n"),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn train_logged(config: &TrainConfig, progress: bool, label: &str) -> Result<TrainOutcome, TrainError> {
    train_with_observer(config, |rec, slopes| {
        if progress {
            let mut line = format!("[{label}] it {:>7}  loss {:.6e}", rec.iteration, rec.loss.total);
            if let Some(a) = slopes {
                let _ = write!(line, "  a = {a:.4?}");
            }
            eprintln!("{line}");
        }
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let dir = default_dir(&config, &format!("{}-seed{}", config.mode.name(), config.seed));
    let dir = prepare_output_dir(&dir, args.on_exists)?;
    let outcome = train_logged(&config, args.progress, config.mode.name())?;
    write_run_files(&dir, &outcome)?;
    let r = &outcome.report;
    println!("final RMSE {:.6e}", r.final_rmse);
    println!("final loss {:.6e}", r.final_loss().total);
    println!("wall time {:.3} s", r.wall_time_seconds);
    println!("output {}", dir.display());
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-mode settings of a comparison: shared fields, then the `adai` / `ipinn` objects.
fn compare_configs(args: &CompareArgs) -> Result<(Vec<u64>, TrainConfig, TrainConfig), CliError> {
    let (file, overrides) = gather(&args.run.config)?;
    let mut shared = file.unwrap_or_else(|| json!({}));
    let obj = shared
        .as_object_mut()
        .ok_or_else(|| CliError::Config("the config file must hold a JSON object".into()))?;
    let file_seeds = obj.remove("seeds");
    let per_mode: Vec<Option<Value>> = ["adai", "ipinn"].iter().map(|m| obj.remove(*m)).collect();
    obj.remove("mode");

    let seeds: Vec<u64> = match (&args.seeds, file_seeds) {
        (Some(s), _) => s
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| CliError::Config(format!("invalid seed `{v}` in --seeds"))))
            .collect::<Result<_, _>>()?,
        (None, Some(v)) => serde_json::from_value(v).map_err(|e| CliError::Config(format!("`seeds`: {e}")))?,
        (None, None) => vec![0, 1, 2],
    };
    if seeds.is_empty() {
        return Err(CliError::Config("`seeds` must not be empty".into()));
    }

    let build = |mode: ModeName, extra: &Option<Value>| -> Result<TrainConfig, CliError> {
        let mut file = shared.clone();
        if let Some(e) = extra {
            if !e.is_object() {
                return Err(CliError::Config(format!("`{}` must be an object", mode.name())));
            }
            for (k, v) in e.as_object().unwrap() {
                file[k] = v.clone();
            }
        }
        if mode == ModeName::Adai {
            file.as_object_mut().unwrap().remove("activations");
        }
        let mut ov: Vec<(String, String)> = overrides
            .iter()
            .filter(|(k, _)| k != "mode" && !(mode == ModeName::Adai && k == "activations") && !(mode == ModeName::Ipinn && k == "activation"))
            .cloned()
            .collect();
        ov.push(("mode".into(), mode.name().into()));
        Ok(resolve_config(Some(&file), &ov)?)
    };
    let adai = build(ModeName::Adai, &per_mode[0])?;
    let ipinn = build(ModeName::Ipinn, &per_mode[1])?;
    if adai.problem != ipinn.problem {
        return Err(CliError::Config("both modes must use the same problem".into()));
    }
    Ok((seeds, adai, ipinn))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub method: String,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub rmse: f64,
    pub wall_time_seconds: f64,
    pub cost: f64,
}

pub fn compare_csv(rows: &[CompareRow], config: &TrainConfig) -> String {
    let mut out = config_comment(config);
    out += "method,seed,iterations,rmse,wall_time_seconds,cost\n";
    for r in rows {
        let seed = r.seed.map_or_else(|| "median".to_string(), |s| s.to_string());
        let _ = writeln!(out, "{},{seed},{},{:e},{:.6},{:.6}", r.method, r.iterations, r.rmse, r.wall_time_seconds, r.cost);
    }
    out
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let (seeds, adai, ipinn) = compare_configs(args)?;
    let root = prepare_output_dir(&default_dir(&adai, "compare"), args.run.on_exists)?;
    let mut rows = Vec::new();
    let mut adai_times = Vec::new();
    for (mode_cfg, label) in [(&adai, "adai"), (&ipinn, "ipinn")] {
        let mut mode_rows = Vec::new();
        for (i, &seed) in seeds.iter().enumerate() {
            let config = TrainConfig { seed, ..mode_cfg.clone() };
            let outcome = train_logged(&config, args.run.progress, &format!("{label} seed {seed}"))?;
            let dir = root.join(format!("{label}-seed{seed}"));
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_run_files(&dir, &outcome)?;
            let r = &outcome.report;
            if label == "adai" {
                adai_times.push(r.wall_time_seconds);
            }
            let cost = cost_ratio(r.wall_time_seconds, adai_times[i])?;
            mode_rows.push(CompareRow {
                method: label.into(),
                seed: Some(seed),
                iterations: r.iterations,
                rmse: r.final_rmse,
                wall_time_seconds: r.wall_time_seconds,
                cost,
            });
            println!("{label} seed {seed}: RMSE {:.6e}, {:.3} s", r.final_rmse, r.wall_time_seconds);
        }
        let pick = |f: fn(&CompareRow) -> f64| median(&mode_rows.iter().map(f).collect::<Vec<_>>());
        let summary = CompareRow {
            method: label.into(),
            seed: None,
            iterations: mode_cfg.iterations,
            rmse: pick(|r| r.rmse),
            wall_time_seconds: pick(|r| r.wall_time_seconds),
            cost: pick(|r| r.cost),
        };
        println!("{label} median RMSE {:.6e}", summary.rmse);
        rows.extend(mode_rows);
        rows.push(summary);
    }
    let path = root.join("compare.csv");
    fs::write(&path, compare_csv(&rows, &adai)).with_context(|| format!("writing {}", path.display()))?;
    println!("output {}", root.display());
    Ok(())
}

pub fn cmd_sweep(args: &RunArgs) -> Result<(), CliError> {
    let base = load_config(&args.config)?;
    if base.mode != ModeName::Adai {
        return Err(CliError::Config("sweep-activations runs the adai mode only".into()));
    }
    let root = prepare_output_dir(&default_dir(&base, "sweep"), args.on_exists)?;
    let m = base.num_subdomains();
    let mut out = config_comment(&base);
    out += "kind";
    for k in 1..=m {
        let _ = write!(out, ",a_{k}");
    }
    out += ",rmse,cost\n";
    let mut first_time = None;
    for kind in ActivationKind::ALL {
        let config = TrainConfig { activation: kind, ..base.clone() };
        let outcome = train_logged(&config, args.progress, kind.name())?;
        let dir = root.join(kind.name());
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_run_files(&dir, &outcome)?;
        let r = &outcome.report;
        let t0 = *first_time.get_or_insert(r.wall_time_seconds);
        let slopes = &r.a_history.as_ref().and_then(|h| h.last()).expect("adai mode records slopes").slopes;
        out += kind.name();
        for a in slopes {
            let _ = write!(out, ",{a:.6}");
        }
        let _ = writeln!(out, ",{:e},{:.6}", r.final_rmse, cost_ratio(r.wall_time_seconds, t0)?);
        println!("{}: RMSE {:.6e}, {:.3} s", kind.name(), r.final_rmse, r.wall_time_seconds);
    }
    let path = root.join("sweep.csv");
    fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    println!("output {}", root.display());
    Ok(())
}

pub fn geometry_json(args: &GeometryArgs) -> Result<Value, CliError> {
    let kinds: Vec<ProblemKind> = match &args.problem {
        Some(p) => vec![serde_json::from_value(Value::String(p.clone())).map_err(|e| CliError::Config(format!("`problem`: {e}")))?],
        None => vec![ProblemKind::Poisson1d, ProblemKind::Letters2d, ProblemKind::Spheres3d],
    };
    let mut out = serde_json::Map::new();
    for kind in kinds {
        let mut overrides = vec![("problem".to_string(), kind.name().to_string())];
        if let (Some(f), ProblemKind::Letters2d) = (&args.geometry_file, kind) {
            overrides.push(("geometry_file".into(), Value::String(f.display().to_string()).to_string()));
        }
        let config = resolve_config(None, &overrides)?;
        let problem = config.build_problem()?;
        let mut v = serde_json::to_value(&problem).map_err(anyhow::Error::from)?;
        if let Geometry::Letters { layout } = &problem.geometry {
            let segments: Vec<_> = layout.letters.iter().map(|l| l.boundary_segments()).collect();
            v["letter_segments"] = serde_json::to_value(segments).map_err(anyhow::Error::from)?;
        }
        out.insert(kind.name().into(), v);
    }
    Ok(Value::Object(out))
}

pub fn cmd_dump_batch(args: &DumpArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let batch = build_training_batch(&config)?;
    let body = config_comment(&config) + &batch.to_csv();
    match &args.output {
        Some(path) => {
            if path.exists() {
                return Err(CliError::Run(anyhow::anyhow!("{} already exists", path.display())));
            }
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?
        }
        None => emit(&body)?,
    }
    Ok(())
}

/// Writes bulk output to stdout; a reader that hangs up early is not an error.
fn emit(body: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(body.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Run(e.into())),
        _ => Ok(()),
    }
}

/// Caps the worker pool from `IPINN_THREADS`.
pub fn configure_threads(value: Option<String>) -> Result<(), CliError> {
    let Some(raw) = value else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("IPINN_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Run(e.into()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::SweepActivations(a) => cmd_sweep(a),
        Command::PrintGeometry(a) => {
            let v = geometry_json(a)?;
            emit(&(serde_json::to_string_pretty(&v).map_err(anyhow::Error::from)? + "\n"))
        }
        Command::DumpBatch(a) => cmd_dump_batch(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn versioned_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        assert_eq!(prepare_output_dir(&dir, OnExists::Refuse).unwrap(), dir);
        // empty directories are reused
        assert_eq!(prepare_output_dir(&dir, OnExists::Refuse).unwrap(), dir);
        fs::write(dir.join("run.json"), "{}").unwrap();
        assert!(prepare_output_dir(&dir, OnExists::Refuse).is_err());
        let v2 = prepare_output_dir(&dir, OnExists::Version).unwrap();
        assert_eq!(v2, tmp.path().join("out-v2"));
        fs::write(v2.join("x"), "").unwrap();
        assert_eq!(prepare_output_dir(&dir, OnExists::Version).unwrap(), tmp.path().join("out-v3"));
    }

    #[test]
    fn compare_splits_kinds_by_mode() {
        let args = CompareArgs {
            run: RunArgs {
                config: ConfigArgs { activations: Some("tanh,swish,tanh,swish,tanh".into()), iterations: Some(5), ..Default::default() },
                on_exists: OnExists::Refuse,
                progress: false,
            },
            seeds: Some("4,5".into()),
        };
        let (seeds, adai, ipinn) = compare_configs(&args).unwrap();
        assert_eq!(seeds, vec![4, 5]);
        assert_eq!((adai.mode, ipinn.mode), (ModeName::Adai, ModeName::Ipinn));
        assert!(adai.activations.is_none());
        assert_eq!(ipinn.iterations, 5);
    }

    #[test]
    fn thread_variable_validation() {
        assert!(configure_threads(None).is_ok());
        assert_eq!(configure_threads(Some("zero".into())).unwrap_err().exit_code(), 2);
        assert_eq!(configure_threads(Some("0".into())).unwrap_err().exit_code(), 2);
    }
}
