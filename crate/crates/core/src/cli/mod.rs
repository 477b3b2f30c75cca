//! Command-line interface: simulate, ingest, select-theta, run, report and
//! score-one.

mod args;
mod output;

pub use args::{Cli, Command, ConfigArgs};
pub use output::{sha256_file, Manifest, ManifestFile, StagedDir};

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use thiserror::Error;

use crate::data::{
    build_cases, generate_synthetic, read_cases, read_grid, read_observations, read_stations, write_cases_to,
    DataError, SyntheticSpec,
};
use crate::dists::{Gev, TruncatedNormal};
use crate::estimation::EstimationError;
use crate::models::{
    build_report, run_rolling_experiment, select_theta, ConfigError, ExperimentConfig, ModelError, RecordSet,
};
use crate::scoring::{crps, log_score, pit, twcrps, EmpiricalEnsemble, PredictiveDist, ScoreError, WeightFn};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Score(_) => 4,
            CliError::Model(m) => match m {
                ModelError::Config(_) | ModelError::EmptyThetaGrid => 2,
                ModelError::Data(_)
                | ModelError::NoVerificationDays { .. }
                | ModelError::Records { .. }
                | ModelError::MissingForecaster(_)
                | ModelError::MissingColumn(_)
                | ModelError::Io { .. } => 3,
                ModelError::Estimation(EstimationError::InvalidCase { .. })
                | ModelError::Estimation(EstimationError::TooFewMembers(_))
                | ModelError::Estimation(EstimationError::NonFiniteMember { .. }) => 3,
                ModelError::Estimation(_) | ModelError::Score(_) | ModelError::ThreadPool(_) => 4,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "data",
            _ => "numerical",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let violations = match self {
            CliError::Config(c) | CliError::Model(ModelError::Config(c)) => c.violations.clone(),
            _ => Vec::new(),
        };
        json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
            "violations": violations,
        })
        .to_string()
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { spec, seed, out } => simulate(spec.as_deref(), seed, &out),
        Command::Ingest {
            grids,
            stations,
            observations,
            lead,
            step_hours,
            out,
        } => ingest(&grids, &stations, &observations, lead, step_hours, &out),
        Command::SelectTheta { cases, config, out } => {
            let cfg = config.resolve()?;
            let data = read_cases(&cases)?;
            let sel = select_theta(&data, &cfg, &cfg.theta_grid)?;
            output::write_atomic(&out, sel.to_csv().as_bytes())?;
            println!("{}", json!({ "theta": sel.theta, "n_cases": sel.n_cases }));
            Ok(())
        }
        Command::Run { cases, config, out_dir } => run(&cases, &config.resolve()?, &out_dir),
        Command::Report { out_dir } => report(&out_dir),
        Command::ScoreOne {
            dist,
            params,
            y,
            metric,
            weight,
        } => {
            let v = score_one(&dist, &params, y, &metric, weight.as_deref())?;
            println!("{v:?}");
            Ok(())
        }
    }
}

fn simulate(spec: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut s = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            toml::from_str::<SyntheticSpec>(&text).map_err(|e| {
                CliError::Config(ConfigError {
                    violations: vec![e.message().to_string()],
                })
            })?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s.validate().map_err(|e| match e {
        DataError::InvalidSpec(v) => CliError::Config(ConfigError { violations: v }),
        other => other.into(),
    })?;
    let data = generate_synthetic(&s)?;
    let mut buf = Vec::new();
    write_cases_to(&data.dataset, &mut buf)?;
    output::write_atomic(out, &buf)
}

fn ingest(
    grids: &[PathBuf],
    stations: &Path,
    observations: &Path,
    lead: u32,
    step_hours: u32,
    out: &Path,
) -> Result<(), CliError> {
    if lead == 0 || step_hours == 0 || 24 % step_hours != 0 {
        return Err(CliError::Usage(format!(
            "lead = {lead} must be positive and step_hours = {step_hours} must divide 24"
        )));
    }
    let fields = grids.iter().map(|p| read_grid(p)).collect::<Result<Vec<_>, _>>()?;
    let stations = read_stations(stations)?;
    let obs = read_observations(observations)?;
    let data = build_cases(&fields, &stations, &obs, lead, step_hours)?;
    let mut buf = Vec::new();
    write_cases_to(&data, &mut buf)?;
    output::write_atomic(out, &buf)
}

fn run(cases: &Path, cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let started = chrono::Utc::now();
    let data = read_cases(cases)?;
    let out = run_rolling_experiment(&data, cfg)?;
    let report = build_report(&out.records, &cfg.table_weights(), &cfg.sweep_thresholds)?;

    let staged = StagedDir::create(out_dir)?;
    staged.write("forecasts.csv", out.records.to_csv().as_bytes())?;
    for (name, content) in report.files() {
        staged.write(&name, content.as_bytes())?;
    }
    let mut fits = serde_json::to_string_pretty(&out.fits).expect("serializable");
    fits.push('\n');
    staged.write("fits.json", fits.as_bytes())?;
    let mut diag = serde_json::to_string_pretty(&out.diagnostics).expect("serializable");
    diag.push('\n');
    staged.write("diagnostics.json", diag.as_bytes())?;
    staged.write("config.toml", cfg.to_toml().as_bytes())?;

    let manifest = Manifest {
        tool: "windpost".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "run".into(),
        seed: cfg.seed,
        config: cfg.clone(),
        inputs: vec![ManifestFile::of(cases)?],
        outputs: staged.digests()?,
        started_at: started.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
    };
    staged.write("manifest.json", manifest.to_json().as_bytes())?;
    staged.promote()
}

/// Rebuild every report artifact of a run directory from its
/// `forecasts.csv` and `config.toml`.
fn report(out_dir: &Path) -> Result<(), CliError> {
    let cfg_path = out_dir.join("config.toml");
    let text = std::fs::read_to_string(&cfg_path).map_err(|e| CliError::io(&cfg_path, e))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let rec_path = out_dir.join("forecasts.csv");
    let file = std::fs::File::open(&rec_path).map_err(|e| CliError::io(&rec_path, e))?;
    let records = RecordSet::read_from(std::io::BufReader::new(file))?;
    let report = build_report(&records, &cfg.table_weights(), &cfg.sweep_thresholds)?;
    let staged = StagedDir::create(out_dir)?;
    for (name, content) in report.files() {
        staged.write(&name, content.as_bytes())?;
    }
    staged.promote()
}

pub(crate) fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse {p:?} as a number")))
        })
        .collect()
}

fn parse_weight(s: &str) -> Result<WeightFn, CliError> {
    let bad = |e: ScoreError| CliError::Usage(e.to_string());
    let nums = |rest: &str| {
        rest.split(':')
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("weight {s:?}: cannot parse {p:?}")))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    match s.split_once(':') {
        None if s == "constant" => Ok(WeightFn::Constant),
        Some(("indicator", rest)) => match nums(rest)?[..] {
            [r] => WeightFn::indicator(r).map_err(bad),
            _ => Err(CliError::Usage(format!("weight {s:?}: expected indicator:r"))),
        },
        Some(("gaussian", rest)) => match nums(rest)?[..] {
            [mu, sigma] => WeightFn::gaussian_cdf(mu, sigma).map_err(bad),
            _ => Err(CliError::Usage(format!("weight {s:?}: expected gaussian:mu:sigma"))),
        },
        _ => Err(CliError::Usage(format!(
            "weight {s:?}: expected constant, indicator:r or gaussian:mu:sigma"
        ))),
    }
}

/// Score a single forecast given on the command line.
pub fn score_one(dist: &str, params: &str, y: f64, metric: &str, weight: Option<&str>) -> Result<f64, CliError> {
    let p = parse_list(params)?;
    let f: PredictiveDist = match (dist, &p[..]) {
        ("tn", [mu, sigma]) => TruncatedNormal::new(*mu, *sigma)?.into(),
        ("gev", [mu, sigma, xi]) => Gev::new(*mu, *sigma, *xi)?.into(),
        ("ensemble", members) if !members.is_empty() => EmpiricalEnsemble::new(members.to_vec())?.into(),
        _ => {
            return Err(CliError::Usage(format!(
                "expected tn mu,sigma | gev mu,sigma,xi | ensemble x1,x2,...; got {dist} {params}"
            )))
        }
    };
    Ok(match metric {
        "crps" => crps(&f, y)?,
        "twcrps" => {
            let w = parse_weight(weight.unwrap_or("constant"))?;
            twcrps(&f, y, &w)?
        }
        "logs" => log_score(&f, y)?,
        "pit" => pit(&f, y)?,
        _ => {
            return Err(CliError::Usage(format!(
                "unknown metric {metric:?}; use crps, twcrps, logs or pit"
            )))
        }
    })
}

impl From<crate::dists::DistError> for CliError {
    fn from(e: crate::dists::DistError) -> Self {
        CliError::Usage(e.to_string())
    }
}
