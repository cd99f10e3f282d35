use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hybridlink::curve::{parse_grid, run_sweep, Evaluators, McSettings, MetricCurve, MetricSpec, RowStatus, SCHEMA_VERSION};
use hybridlink::e2e_metrics::{capacity_constant, diversity_order, E2EParams, ModulationScheme};
use hybridlink::rf_link::DiscriminantPolicy;
use hybridlink::scenario::{db_to_linear, derive_geometry, Detection, ScenarioConfig, User};
use hybridlink::CoreError;

const DEFAULT_CONFIG: &str = "config/table2.json";

#[derive(Parser)]
#[command(name = "hybridlink", version, about = "Outage, BER, capacity and moment sweeps for the hybrid FSO/RF relay link")]
struct Cli {
    /// scenario file (JSON)
    #[arg(long, global = true, default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// override a config field, e.g. --set n_fso=4 or --set gamma_r_override_db.R=-36
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// output file; stdout when absent
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// more log output (repeatable)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// check the scenario and print the derived channel parameters
    Validate,
    /// outage probability against γ̄_H
    #[command(alias = "op")]
    OpSweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// threshold in dB; the config value when absent
        #[arg(long)]
        threshold_db: Option<f64>,
    },
    /// average BER of one modulation
    #[command(alias = "ber")]
    BerSweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// ook, bpsk, qpsk, <M>psk or <M>qam
        #[arg(long)]
        modulation: String,
    },
    /// ergodic capacity
    #[command(alias = "capacity")]
    CapacitySweep {
        #[command(flatten)]
        sweep: SweepArgs,
        /// report bits/s/Hz instead of nats/s/Hz
        #[arg(long)]
        bits: bool,
    },
    /// n-th moment of the end-to-end SNR
    Moments {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 1.0)]
        order: f64,
    },
    /// diversity order of the selected user and detection
    Diversity {
        #[command(flatten)]
        link: LinkArgs,
    },
    /// exact forms against Monte Carlo with a 3-sigma verdict per row
    McValidate {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, value_enum, default_value_t = McMetric::Op)]
        metric: McMetric,
        /// modulation for --metric ber
        #[arg(long, default_value = "bpsk")]
        modulation: String,
        #[arg(long, default_value_t = 1.0)]
        order: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum McMetric {
    Op,
    Ber,
    Capacity,
    Moments,
}

#[derive(Clone, Copy, ValueEnum)]
enum UserArg {
    #[value(name = "T", alias = "t")]
    T,
    #[value(name = "R", alias = "r")]
    R,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectionArg {
    Heterodyne,
    Imdd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    ComplexModulus,
    Reject,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Evaluator {
    Exact,
    Asymptotic,
    Mc,
}

#[derive(Args)]
struct LinkArgs {
    #[arg(long, value_enum, default_value = "R")]
    user: UserArg,
    /// the config value when absent
    #[arg(long, value_enum)]
    detection: Option<DetectionArg>,
    /// handling of complex roots in the generalized-K fit
    #[arg(long, value_enum, default_value_t = PolicyArg::ComplexModulus)]
    policy: PolicyArg,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    link: LinkArgs,
    /// γ̄_H grid start:stop:step in dB
    #[arg(long, default_value = "20:60:2")]
    grid: String,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "exact,asymptotic")]
    evaluators: Vec<Evaluator>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// independent RNG streams per grid point
    #[arg(long, default_value_t = 64)]
    streams: u32,
}

/// Config or request problem (exit 1) versus evaluator failure (exit 2).
enum Failure {
    Config(CoreError),
    Eval(CoreError),
    Io(String),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Specfun(_) | CoreError::OutOfBand { .. } | CoreError::Tabulation(_) => Failure::Eval(e),
            _ => Failure::Config(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Ok(v) = std::env::var("HYBRIDLINK_WORKERS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => log::warn!("ignoring HYBRIDLINK_WORKERS={v:?}"),
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(e)) => {
            eprintln!("{}", diagnostic("config", &e));
            ExitCode::from(1)
        }
        Err(Failure::Eval(e)) => {
            eprintln!("{}", diagnostic("evaluation", &e));
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("{}", json!({ "error": "io", "message": msg }));
            ExitCode::from(2)
        }
    }
}

fn diagnostic(kind: &str, e: &CoreError) -> Value {
    match e {
        CoreError::Config { field, message } => json!({ "error": kind, "field": field, "message": message }),
        _ => json!({ "error": kind, "message": e.to_string() }),
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load_config(&cli.config, &cli.sets)?;
    match &cli.command {
        Command::Validate => {
            let report = validate_report(&cfg)?;
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report).unwrap() + "\n",
                Format::Csv => text_report(&report),
            };
            emit(cli, &text)?;
            Ok(0)
        }
        Command::OpSweep { sweep, threshold_db } => {
            let cfg = with_detection(&cfg, &sweep.link);
            let threshold = db_to_linear(threshold_db.unwrap_or(cfg.threshold_db));
            sweep_command(cli, &cfg, sweep, &MetricSpec::Op { threshold }, false)
        }
        Command::BerSweep { sweep, modulation } => {
            let scheme = ModulationScheme::parse(modulation)?;
            let mut cfg = with_detection(&cfg, &sweep.link);
            if sweep.link.detection.is_none() {
                cfg.detection = scheme.detection;
            }
            sweep_command(cli, &cfg, sweep, &MetricSpec::Ber { scheme }, false)
        }
        Command::CapacitySweep { sweep, bits } => {
            let cfg = with_detection(&cfg, &sweep.link);
            let base = base_params(&cfg, &sweep.link)?;
            let c0 = capacity_constant(&base);
            sweep_command(cli, &cfg, sweep, &MetricSpec::Capacity { c0 }, *bits)
        }
        Command::Moments { sweep, order } => {
            let cfg = with_detection(&cfg, &sweep.link);
            sweep_command(cli, &cfg, sweep, &MetricSpec::Moment { order: *order }, false)
        }
        Command::Diversity { link } => {
            let cfg = with_detection(&cfg, link);
            let p = base_params(&cfg, link)?;
            let d = diversity_order(&p);
            let text = match cli.format {
                Format::Json => {
                    let v = json!({
                        "schema_version": SCHEMA_VERSION,
                        "user": p.user.to_string(),
                        "detection_order": p.fso.r,
                        "diversity_order": d,
                    });
                    serde_json::to_string_pretty(&v).unwrap() + "\n"
                }
                Format::Csv => format!("user,detection_order,diversity_order\n{},{},{}\n", p.user, p.fso.r, d),
            };
            emit(cli, &text)?;
            Ok(0)
        }
        Command::McValidate {
            sweep,
            metric,
            modulation,
            order,
        } => {
            let mut cfg = with_detection(&cfg, &sweep.link);
            let spec = match metric {
                McMetric::Op => MetricSpec::Op {
                    threshold: cfg.threshold(),
                },
                McMetric::Ber => {
                    let scheme = ModulationScheme::parse(modulation)?;
                    if sweep.link.detection.is_none() {
                        cfg.detection = scheme.detection;
                    }
                    MetricSpec::Ber { scheme }
                }
                McMetric::Capacity => MetricSpec::Capacity {
                    c0: capacity_constant(&base_params(&cfg, &sweep.link)?),
                },
                McMetric::Moments => MetricSpec::Moment { order: *order },
            };
            let base = base_params(&cfg, &sweep.link)?;
            let grid = parse_grid(&sweep.grid)?;
            let ev = Evaluators {
                exact: true,
                asymptotic: false,
                mc: Some(mc_settings(sweep)),
            };
            let curve = run_sweep(&spec, &base, &grid, &ev)?;
            let mut within = 0;
            let mut compared = 0;
            for row in &curve.rows {
                if let (Some(x), Some(m), Some(s)) = (row.exact, row.mc_estimate, row.mc_stderr) {
                    compared += 1;
                    let z = if s > 0.0 { (x - m).abs() / s } else { f64::INFINITY };
                    if z <= 3.0 || (x - m).abs() <= 1e-12 {
                        within += 1;
                    }
                }
            }
            eprintln!("mc-validate: {within}/{compared} grid points within 3 standard errors");
            finish(cli, &curve, false)
        }
    }
}

fn mc_settings(s: &SweepArgs) -> McSettings {
    McSettings {
        samples: s.samples,
        seed: s.seed,
        streams: s.streams,
    }
}

fn sweep_command(cli: &Cli, cfg: &ScenarioConfig, sweep: &SweepArgs, spec: &MetricSpec, bits: bool) -> Result<u8, Failure> {
    let base = base_params(cfg, &sweep.link)?;
    let grid = parse_grid(&sweep.grid)?;
    let ev = Evaluators {
        exact: sweep.evaluators.contains(&Evaluator::Exact),
        asymptotic: sweep.evaluators.contains(&Evaluator::Asymptotic),
        mc: sweep.evaluators.contains(&Evaluator::Mc).then(|| mc_settings(sweep)),
    };
    let curve = run_sweep(spec, &base, &grid, &ev)?;
    finish(cli, &curve, bits)
}

fn finish(cli: &Cli, curve: &MetricCurve, bits: bool) -> Result<u8, Failure> {
    let mut curve = curve.clone();
    if bits {
        let k = std::f64::consts::LN_2;
        for row in &mut curve.rows {
            for v in [&mut row.exact, &mut row.asymptotic, &mut row.mc_estimate, &mut row.mc_stderr] {
                *v = v.map(|x| x / k);
            }
        }
        curve.unit = "bits/s/Hz".into();
    }
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&curve).unwrap() + "\n",
        Format::Csv => to_csv(&curve),
    };
    emit(cli, &text)?;
    let failed = curve.rows.iter().filter(|r| r.status == RowStatus::Failed).count();
    if failed > 0 {
        eprintln!("{failed} of {} grid points failed every evaluator", curve.rows.len());
        return Ok(2);
    }
    Ok(0)
}

fn to_csv(curve: &MetricCurve) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "gamma_h_db",
        "exact",
        "asymptotic",
        "mc_estimate",
        "mc_stderr",
        "status",
        "evaluator_metadata",
    ])
    .unwrap();
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &curve.rows {
        let status = match r.status {
            RowStatus::Ok => "ok",
            RowStatus::Partial => "partial",
            RowStatus::Failed => "failed",
        };
        w.write_record([
            r.gamma_h_db.to_string(),
            f(r.exact),
            f(r.asymptotic),
            f(r.mc_estimate),
            f(r.mc_stderr),
            status.to_string(),
            r.metadata.clone(),
        ])
        .unwrap();
    }
    let body = String::from_utf8(w.into_inner().unwrap()).unwrap();
    let metric = serde_json::to_value(&curve.metric).unwrap();
    let kind = metric["kind"].as_str().unwrap_or("");
    format!(
        "# schema_version={} metric={} user={} detection_order={} unit={}\n{}",
        curve.schema_version, kind, curve.user, curve.detection_order, curve.unit, body
    )
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn load_config(path: &Path, sets: &[String]) -> Result<ScenarioConfig, Failure> {
    if sets.is_empty() {
        return Ok(ScenarioConfig::load(path)?);
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(config_error("<file>", format!("{}: {e}", path.display()))))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| Failure::Config(config_error("<file>", e.to_string())))?;
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| Failure::Config(config_error(s, "expected KEY=VALUE")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut slot = &mut doc;
        for part in key.split('.') {
            if !slot.is_object() {
                *slot = json!({});
            }
            slot = slot.as_object_mut().unwrap().entry(part.to_string()).or_insert(Value::Null);
        }
        *slot = value;
    }
    Ok(ScenarioConfig::from_json(&doc.to_string())?)
}

fn config_error(field: &str, message: impl Into<String>) -> CoreError {
    CoreError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn with_detection(cfg: &ScenarioConfig, link: &LinkArgs) -> ScenarioConfig {
    let mut cfg = cfg.clone();
    match link.detection {
        Some(DetectionArg::Heterodyne) => cfg.detection = Detection::Heterodyne,
        Some(DetectionArg::Imdd) => cfg.detection = Detection::Imdd,
        None => {}
    }
    cfg
}

fn user(link: &LinkArgs) -> User {
    match link.user {
        UserArg::T => User::T,
        UserArg::R => User::R,
    }
}

fn policy(link: &LinkArgs) -> DiscriminantPolicy {
    match link.policy {
        PolicyArg::ComplexModulus => DiscriminantPolicy::ComplexModulus,
        PolicyArg::Reject => DiscriminantPolicy::Reject,
    }
}

/// γ̄_H is set per grid point later; 0 dB is a placeholder.
fn base_params(cfg: &ScenarioConfig, link: &LinkArgs) -> Result<E2EParams, Failure> {
    Ok(E2EParams::derive(cfg, user(link), 0.0, policy(link))?)
}

fn validate_report(cfg: &ScenarioConfig) -> Result<Value, Failure> {
    let geom = derive_geometry(cfg)?;
    let mut users = serde_json::Map::new();
    let mut fso = Value::Null;
    for u in [User::T, User::R] {
        let p = E2EParams::derive(cfg, u, 0.0, DiscriminantPolicy::ComplexModulus)?;
        if fso.is_null() {
            let f = &p.fso;
            fso = json!({
                "h_p": f.h_p,
                "a0": f.gml.a0,
                "q_g": f.gml.q_g,
                "varpi": f.gml.varpi,
                "rytov_uplink": f.rytov.uplink,
                "rytov_downlink": f.rytov.downlink,
                "rytov_total": f.rytov.total,
                "alpha_tilde": f.alpha_t,
                "beta_tilde": f.beta_t,
                "alpha": f.alpha,
                "beta": f.beta,
                "normalization_nf": f.norm_nf,
                "perturbations": f.perturbations,
            });
        }
        let r = &p.rf;
        users.insert(
            u.to_string(),
            json!({
                "k": r.k,
                "m": r.m,
                "psi": r.psi,
                "fit_branch": r.branch,
                "discriminant": r.discriminant,
                "path_loss_db": r.budget.path_loss_db,
                "budget_snr_db": r.budget.budget_snr_db,
                "mean_snr_db": r.budget.mean_snr_db,
                "overridden": r.budget.overridden,
                "diversity_order": diversity_order(&p),
            }),
        );
    }
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "detection_order": cfg.detection_order(),
        "geometry": geom,
        "fso": fso,
        "rf": users,
    }))
}

fn text_report(v: &Value) -> String {
    let mut out = String::from("configuration ok\n");
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            _ => out.push_str(&format!("{prefix} = {v}\n")),
        }
    }
    walk("", v, &mut out);
    out
}
