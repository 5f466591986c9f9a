use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use armagg::aggmodel::AggregationConfig;
use armagg::ValidationConfig;
use armagg_cli::config::{
    build_scheme, load_model, parse_horizons, parse_scheme_arg, ExperimentConfig, McSettings, ModeArg,
};
use armagg_cli::io::{emit, manifest_path, read_sample, Manifest};
use armagg_cli::run::{self, error_category, ErrorsSettings, RunOutput};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "armagg", version, about = "Finite-sample ARMA forecasting errors and temporal aggregation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check causality, invertibility and AR/MA common roots.
    Validate(Flags),
    /// Print the ψ and π weights.
    Expand(Flags),
    /// Forecast from a sample file.
    Forecast(Flags),
    /// Total forecast error per horizon, or for one aggregate with --scheme.
    Errors(Flags),
    /// Aggregate a model; writes the model JSON and a sidecar.
    AggregateModel(Flags),
    /// Aggregate a sample file.
    AggregateSeries(Flags),
    /// Compare the TMS, TA, H and OH predictors over horizons.
    Compare(Flags),
    /// Check formulas against simulation.
    McCheck(Flags),
    /// Build a model from a seed specification.
    SeedModel(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Approx,
    Exact,
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// JSON config mirroring these flags; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Inclusive range `a..b`, or a single horizon.
    #[arg(long)]
    horizons: Option<String>,
    /// stock, flow, average or weights=<csv>.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long = "K")]
    k: Option<usize>,
    /// Comma-separated subset of TMS, TA, H, OH.
    #[arg(long, value_delimiter = ',')]
    predictors: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Use the literal nested sums instead of the factorized ones.
    #[arg(long)]
    naive_sums: bool,
    #[arg(long)]
    common_root_tol: Option<f64>,
    /// Let OH consider the divisor 1 (the TMS predictor).
    #[arg(long)]
    oh_include_unit_divisor: bool,
    /// Truncation order for `expand`.
    #[arg(long)]
    order: Option<usize>,
    /// Sample file for `forecast` and `aggregate-series`.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Seed specification for `seed-model`.
    #[arg(long)]
    spec: Option<PathBuf>,
}

impl Flags {
    fn model(&self) -> Result<armagg::ArmaModel> {
        let path = self.model.as_deref().context("--model is required")?;
        let m = load_model(path)?;
        Ok(match self.sigma2 {
            Some(s) => m.with_sigma2(s)?,
            None => m,
        })
    }

    fn validation(&self) -> ValidationConfig {
        let mut v = ValidationConfig::default();
        if let Some(tol) = self.common_root_tol {
            v.common_root_tol = tol;
        }
        v
    }

    fn scheme(&self) -> Result<Option<armagg::AggregationScheme>> {
        match &self.scheme {
            Some(s) => Ok(Some(build_scheme(&parse_scheme_arg(s)?, self.k)?)),
            None => Ok(None),
        }
    }

    fn mode(&self) -> ModeArg {
        match self.mode {
            Some(Mode::Exact) => ModeArg::Exact,
            _ => ModeArg::Approx,
        }
    }

    /// Config file (if any) overridden by explicit flags.
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig {
                model: self.model.clone().context("--model or --config is required")?,
                t: self.t.context("--T or --config is required")?,
                sigma2: None,
                horizons: self.horizons.clone().context("--horizons or --config is required")?,
                scheme: "stock".into(),
                k: None,
                predictors: vec!["TMS".into(), "H".into(), "OH".into()],
                out: None,
                mode: ModeArg::Approx,
                naive_sums: false,
                common_root_tol: None,
                oh_include_unit_divisor: false,
                mc: None,
            },
        };
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(t) = self.t {
            cfg.t = t;
        }
        if self.sigma2.is_some() {
            cfg.sigma2 = self.sigma2;
        }
        if let Some(h) = &self.horizons {
            cfg.horizons = h.clone();
        }
        if let Some(s) = &self.scheme {
            cfg.scheme = s.clone();
        }
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if let Some(p) = &self.predictors {
            cfg.predictors = p.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.mode.is_some() {
            cfg.mode = self.mode();
        }
        cfg.naive_sums |= self.naive_sums;
        if self.common_root_tol.is_some() {
            cfg.common_root_tol = self.common_root_tol;
        }
        cfg.oh_include_unit_divisor |= self.oh_include_unit_divisor;
        match (self.paths, self.seed, cfg.mc) {
            (Some(paths), seed, mc) => {
                cfg.mc = Some(McSettings {
                    paths,
                    seed: seed.or(mc.map(|m| m.seed)).unwrap_or(0),
                })
            }
            (None, Some(seed), Some(mc)) => cfg.mc = Some(McSettings { seed, ..mc }),
            _ => {}
        }
        Ok(cfg)
    }
}

fn write_run(out: Option<&Path>, run: &RunOutput) -> Result<()> {
    emit(out, &run.csv)?;
    if let Some(p) = out {
        emit(Some(&manifest_path(p)), &run.manifest)?;
    }
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.sidecar.json"))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(f) => {
            let (json, passed) = run::validate_output(&f.model()?, &f.validation())?;
            emit(f.out.as_deref(), &json)?;
            if !passed {
                bail!(armagg::Error::ModelInvalid("validation failed".into()));
            }
        }
        Command::Expand(f) => {
            let order = f.order.context("--order is required")?;
            emit(f.out.as_deref(), &run::expand_table(&f.model()?, order)?)?;
        }
        Command::Forecast(f) => {
            let sample = read_sample(f.sample.as_deref().context("--sample is required")?)?;
            let horizons = parse_horizons(f.horizons.as_deref().unwrap_or("1"))?;
            let csv = run::forecast_table(&f.model()?, &sample, horizons, f.scheme()?.as_ref())?;
            emit(f.out.as_deref(), &csv)?;
        }
        Command::Errors(f) => {
            let cfg = f.experiment()?;
            let model = cfg.load_model()?;
            let scheme = match &f.scheme {
                Some(s) => Some(build_scheme(&parse_scheme_arg(s)?, cfg.k)?),
                None => None,
            };
            let horizons = cfg.horizon_range()?;
            let csv = run::errors_table(&model, cfg.t, horizons.clone(), cfg.mode, cfg.naive_sums, scheme.as_ref())?;
            let settings = ErrorsSettings {
                horizons: (*horizons.start(), *horizons.end()),
                mode: cfg.mode,
                naive_sums: cfg.naive_sums,
                scheme: scheme.map(|s| s.weights().to_vec()),
            };
            let manifest = Manifest::new("errors", &model, cfg.t, &settings, cfg.out.as_deref()).to_json()?;
            write_run(cfg.out.as_deref(), &RunOutput { csv, manifest })?;
        }
        Command::AggregateModel(f) => {
            let scheme = f.scheme()?.context("--scheme is required")?;
            let cfg = AggregationConfig {
                validation: f.validation(),
                ..Default::default()
            };
            let (model, sidecar) = run::aggregate_model_output(&f.model()?, &scheme, &cfg)?;
            emit(f.out.as_deref(), &model)?;
            match f.out.as_deref() {
                Some(p) => emit(Some(&sidecar_path(p)), &sidecar)?,
                None => print!("{sidecar}"),
            }
        }
        Command::AggregateSeries(f) => {
            let scheme = f.scheme()?.context("--scheme is required")?;
            let sample = read_sample(f.sample.as_deref().context("--sample is required")?)?;
            emit(f.out.as_deref(), &run::aggregate_series_table(&sample.values, &scheme)?)?;
        }
        Command::Compare(f) => {
            let cfg = f.experiment()?;
            write_run(cfg.out.as_deref(), &run::run_errors(&cfg)?)?;
        }
        Command::McCheck(f) => {
            let cfg = f.experiment()?;
            write_run(cfg.out.as_deref(), &run::run_mc_check(&cfg)?)?;
        }
        Command::SeedModel(f) => {
            let spec = f.spec.as_deref().context("--spec is required")?;
            let (seed, json) = run::seed_model_output(spec, &f.validation())?;
            for w in &seed.warnings {
                eprintln!("warning: {w}");
            }
            emit(f.out.as_deref(), &json)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": error_category(&e), "message": format!("{e:#}") });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
