//! `wsn-detect` command-line front end.
//!
//! Every subcommand resolves its settings from built-in defaults, then an
//! optional `key=value` config file (`--config`), then command-line flags.
//! The resolved settings are written as `# key=value` lines at the top of
//! every CSV output, followed by the column header and one row per
//! parameter combination. Numbers use fixed six-decimal formatting.
//!
//! Exit codes: 0 success, 1 usage or invalid settings, 2 data error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::calibration::{estimate_detection, estimate_pw, estimate_response, generate_runs, CalibrationError};
use crate::detectors::{Evidence, Priors, ResponseField, SelectionResult};
use crate::hexgrid::{GridTopology, NodeId};
use crate::probability::{
    derive_params, exact_false_detect, exact_miss, false_positive_bounds, joint_tz, DerivedParams, LocalModel,
    SensorParams,
};
use crate::records::{parse_grid, unpack_bits, write_header, write_run, RunRecordFile};
use crate::simulator::{
    run_experiment_with, threshold_sweep_with, trace_experiment, Estimate, Execution, ExperimentConfig, Scenario,
    SimulationSummary, TruthScenario,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io(_) => 2,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "wsn-detect", version, about = "Event detection in hexagonal-grid sensor networks with faulty sensors")]
pub struct Cli {
    /// key=value settings file; flags given on the command line take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived response probabilities and likelihood coefficients
    Derive(CommonArgs),
    /// Exact joint (T, Z) tables, per-degree error probabilities and false-positive bounds
    Exact(CommonArgs),
    /// Monte Carlo estimates of S1..S5, N3..N5 and the false-negative rate
    Simulate(CommonArgs),
    /// Occam-window success and search counts for several thresholds
    Sweep(CommonArgs),
    /// Simulate controlled runs and write a run-record file
    Record(CommonArgs),
    /// Estimate p1, p2, pc, pw from a run-record file
    Calibrate(CalibrateArgs),
    /// Apply every decision rule to one observed response field
    Detect(DetectArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// Center-node detection probability (comma-separated sweep)
    #[arg(long)]
    pub p1: Option<String>,
    /// Adjacent-node detection probability (comma-separated sweep)
    #[arg(long)]
    pub p2: Option<String>,
    /// Response probability after a detection (comma-separated sweep)
    #[arg(long)]
    pub pc: Option<String>,
    /// False-alarm probability (comma-separated sweep)
    #[arg(long)]
    pub pw: Option<String>,
    /// Grid size ROWSxCOLS
    #[arg(long)]
    pub grid: Option<String>,
    /// Replications per parameter combination
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// normal | event | both
    #[arg(long)]
    pub scenario: Option<String>,
    /// Fixed event node ROW,COL (default: uniform over the grid)
    #[arg(long)]
    pub event: Option<String>,
    /// Occam-window threshold(s) C in (0, 1)
    #[arg(long = "occam-c")]
    pub occam_c: Option<String>,
    /// Output file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-replication trace CSV (simulate only)
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Evaluate replications on one thread
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Run-record file
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Response field as a hex-packed row-major bitstring
    #[arg(long)]
    pub field: Option<String>,
    /// Prior probability of the normal model for Bayesian averaging
    /// (default: equal prior on every model)
    #[arg(long = "p-norm")]
    pub p_norm: Option<String>,
    /// Threshold C* of the Q-ratio rule
    #[arg(long = "q-ratio")]
    pub q_ratio: Option<String>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub pc: Vec<f64>,
    pub pw: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub reps: u64,
    pub seed: u64,
    pub scenario: Scenario,
    pub event: Option<NodeId>,
    pub occam_c: Vec<f64>,
    pub p_norm: Option<f64>,
    pub q_ratio: f64,
}

const CONFIG_KEYS: &[&str] = &[
    "p1", "p2", "pc", "pw", "grid", "reps", "seed", "scenario", "event", "occam-c", "p-norm", "q-ratio",
];

impl RunConfig {
    fn defaults(command: &str) -> BTreeMap<&'static str, String> {
        let occam = if command == "sweep" { "0.6,0.7,0.8,0.9" } else { "0.9" };
        BTreeMap::from([
            ("p1", "0.9".to_string()),
            ("p2", "0.5".to_string()),
            ("pc", "0.9".to_string()),
            ("pw", "0.01".to_string()),
            ("grid", "32x32".to_string()),
            ("reps", "10000".to_string()),
            ("seed", "1".to_string()),
            ("scenario", "both".to_string()),
            ("occam-c", occam.to_string()),
            ("q-ratio", "0.9".to_string()),
        ])
    }

    fn resolve(raw: &BTreeMap<&'static str, String>) -> Result<Self, CliError> {
        let get = |k: &str| raw.get(k).map(String::as_str);
        let list = |k: &'static str| parse_list(k, get(k).unwrap_or(""));
        let (rows, cols) = parse_grid(get("grid").unwrap_or("")).map_err(|e| usage(format!("grid: {e}")))?;
        let reps = get("reps")
            .unwrap_or("")
            .parse::<u64>()
            .map_err(|_| usage("reps must be a positive integer"))?;
        if reps == 0 {
            return Err(usage("reps must be at least 1"));
        }
        let seed = get("seed")
            .unwrap_or("")
            .parse::<u64>()
            .map_err(|_| usage("seed must be a non-negative integer"))?;
        let scenario = match get("scenario").unwrap_or("") {
            "normal" => Scenario::Normal,
            "event" => Scenario::Event,
            "both" => Scenario::Both,
            other => return Err(usage(format!("scenario '{other}' is not normal|event|both"))),
        };
        let event = get("event")
            .map(|v| {
                let (r, c) = v
                    .split_once(',')
                    .ok_or_else(|| usage(format!("event '{v}' is not ROW,COL")))?;
                Ok::<_, CliError>(NodeId::new(
                    r.trim().parse().map_err(|_| usage(format!("event row '{r}'")))?,
                    c.trim().parse().map_err(|_| usage(format!("event col '{c}'")))?,
                ))
            })
            .transpose()?;
        let occam_c = list("occam-c")?;
        if let Some(bad) = occam_c.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(usage(format!("occam-c = {bad} must lie strictly between 0 and 1")));
        }
        let p_norm = get("p-norm")
            .map(|v| v.parse::<f64>().map_err(|_| usage(format!("p-norm '{v}' is not a number"))))
            .transpose()?;
        let q_ratio = get("q-ratio")
            .unwrap_or("")
            .parse::<f64>()
            .map_err(|_| usage("q-ratio must be a number"))?;
        Ok(Self {
            p1: list("p1")?,
            p2: list("p2")?,
            pc: list("pc")?,
            pw: list("pw")?,
            rows,
            cols,
            reps,
            seed,
            scenario,
            event,
            occam_c,
            p_norm,
            q_ratio,
        })
    }

    /// Cartesian product in `p1, p2, pc, pw` nesting order, each validated.
    pub fn combinations(&self) -> Result<Vec<SensorParams>, CliError> {
        let mut out = Vec::new();
        for &p1 in &self.p1 {
            for &p2 in &self.p2 {
                for &pc in &self.pc {
                    for &pw in &self.pw {
                        let p = SensorParams::new(p1, p2, pc, pw)
                            .map_err(|e| usage(format!("invalid parameters p1={p1} p2={p2} pc={pc} pw={pw}: {e}")))?;
                        derive_params(p).map_err(|e| usage(e.to_string()))?;
                        out.push(p);
                    }
                }
            }
        }
        Ok(out)
    }

    fn topology(&self) -> Result<GridTopology, CliError> {
        GridTopology::new(self.rows, self.cols).map_err(|e| usage(e.to_string()))
    }

    fn provenance(&self, command: &str) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let scenario = match self.scenario {
            Scenario::Normal => "normal",
            Scenario::Event => "event",
            Scenario::Both => "both",
        };
        let mut s = String::new();
        let _ = writeln!(s, "# wsn-detect {} {command}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# p1={}", join(&self.p1));
        let _ = writeln!(s, "# p2={}", join(&self.p2));
        let _ = writeln!(s, "# pc={}", join(&self.pc));
        let _ = writeln!(s, "# pw={}", join(&self.pw));
        let _ = writeln!(s, "# grid={}x{}", self.rows, self.cols);
        let _ = writeln!(s, "# reps={}", self.reps);
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# scenario={scenario}");
        match self.event {
            Some(n) => {
                let _ = writeln!(s, "# event={},{}", n.row, n.col);
            }
            None => s.push_str("# event=uniform\n"),
        }
        let _ = writeln!(s, "# occam-c={}", join(&self.occam_c));
        s
    }

    fn experiment(&self, params: SensorParams, occam_c: f64) -> ExperimentConfig {
        ExperimentConfig {
            params,
            rows: self.rows,
            cols: self.cols,
            scenario: self.scenario,
            event_node: self.event,
            replications: self.reps,
            seed: self.seed,
            occam_c,
        }
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let items: Result<Vec<f64>, _> = value.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(usage(format!("{key}: '{value}' is not a comma-separated list of numbers"))),
    }
}

/// Parse a `key=value` settings file.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<&'static str, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim();
        let key = CONFIG_KEYS
            .iter()
            .find(|c| **c == k)
            .ok_or_else(|| usage(format!("config line {}: unknown key '{k}'", i + 1)))?;
        out.insert(*key, v.trim().to_string());
    }
    Ok(out)
}

fn merge_settings(
    command: &str,
    file: Option<&BTreeMap<&'static str, String>>,
    args: &CommonArgs,
    extra: &[(&'static str, Option<&String>)],
) -> Result<RunConfig, CliError> {
    let mut raw = RunConfig::defaults(command);
    if let Some(file) = file {
        raw.extend(file.iter().map(|(k, v)| (*k, v.clone())));
    }
    let flags: [(&'static str, Option<&String>); 9] = [
        ("p1", args.p1.as_ref()),
        ("p2", args.p2.as_ref()),
        ("pc", args.pc.as_ref()),
        ("pw", args.pw.as_ref()),
        ("grid", args.grid.as_ref()),
        ("reps", args.reps.as_ref()),
        ("seed", args.seed.as_ref()),
        ("scenario", args.scenario.as_ref()),
        ("occam-c", args.occam_c.as_ref()),
    ];
    for (k, v) in flags.into_iter().chain(extra.iter().copied()) {
        if let Some(v) = v {
            raw.insert(k, v.clone());
        }
    }
    if let Some(e) = &args.event {
        raw.insert("event", e.clone());
    }
    RunConfig::resolve(&raw)
}

pub fn fmt6(x: f64) -> String {
    if x.is_finite() {
        let s = format!("{x:.6}");
        if s == "-0.000000" {
            "0.000000".into()
        } else {
            s
        }
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

fn params_cells(p: &SensorParams) -> String {
    format!("{},{},{},{}", fmt6(p.p1), fmt6(p.p2), fmt6(p.pc), fmt6(p.pw))
}

pub const DERIVE_HEADER: &str = "p1,p2,pc,pw,P1,P2,alpha,beta,gamma,delta,c,d,tau0";

pub fn derive_row(dp: &DerivedParams) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        params_cells(&dp.params),
        fmt6(dp.big_p1),
        fmt6(dp.big_p2),
        fmt6(dp.alpha),
        fmt6(dp.beta),
        fmt6(dp.gamma),
        fmt6(dp.delta),
        opt6(dp.c),
        opt6(dp.d),
        opt6(dp.tau0),
    )
}

pub const EXACT_HEADER: &str = "p1,p2,pc,pw,record,k,t,z,value";

pub fn exact_rows(dp: &DerivedParams, topology: &GridTopology) -> Vec<String> {
    let pc = params_cells(&dp.params);
    let mut rows = Vec::new();
    let degrees = topology.distinct_degrees();
    for &k in &degrees {
        for (model, name) in [(LocalModel::Null, "joint_null"), (LocalModel::EventAtCenter, "joint_event")] {
            let table = joint_tz(model, k, dp).expect("degree <= 6");
            for (t, z, p) in table.iter() {
                rows.push(format!("{pc},{name},{k},{t},{},{}", z as u8, fmt6(p)));
            }
        }
    }
    for &k in &degrees {
        let fd = exact_false_detect(k, dp).expect("degree <= 6");
        let miss = exact_miss(k, dp).expect("degree <= 6");
        rows.push(format!("{pc},false_detect,{k},,,{}", fmt6(fd)));
        rows.push(format!("{pc},miss,{k},,,{}", fmt6(miss)));
    }
    let b = false_positive_bounds(topology, dp).expect("degree <= 6");
    rows.push(format!("{pc},fp_lower,,,,{}", fmt6(b.lower)));
    rows.push(format!("{pc},fp_upper,,,,{}", fmt6(b.upper)));
    rows
}

pub const SIMULATE_HEADER: &str =
    "p1,p2,pc,pw,S1,S2,S3,N3,S4,N4,S5,N5,fnr,S1_se,S2_se,S3_se,N3_se,S4_se,N4_se,S5_se,N5_se,fnr_se,seed";

pub fn simulate_row(summary: &SimulationSummary) -> String {
    let n = summary.normal.as_ref();
    let e = summary.event.as_ref();
    let v = |x: Option<Estimate>| x.map(|x| fmt6(x.value)).unwrap_or_default();
    let se = |x: Option<Estimate>| x.map(|x| fmt6(x.std_error)).unwrap_or_default();
    let cols = [
        n.map(|m| m.s1),
        e.map(|m| m.s2),
        e.map(|m| m.s3),
        e.map(|m| m.n3),
        e.map(|m| m.s4),
        e.map(|m| m.n4),
        e.map(|m| m.s5),
        e.map(|m| m.n5),
        e.map(|m| m.false_negative_rate),
    ];
    let values: Vec<String> = cols.iter().map(|c| v(*c)).collect();
    let errors: Vec<String> = cols.iter().map(|c| se(*c)).collect();
    format!(
        "{},{},{},{}",
        params_cells(&summary.config.params),
        values.join(","),
        errors.join(","),
        summary.config.seed
    )
}

pub const SWEEP_HEADER: &str = "p1,p2,pc,pw,C,success,search,success_se,search_se,seed";

pub const TRACE_HEADER: &str = "p1,p2,pc,pw,lane,replication,truth,single_correct,single_searched,argmax_hit,argmax_searched,neighborhood_hit,neighborhood_searched,occam_hit,occam_searched";

/// Destination that is flushed after every row.
struct Sink {
    inner: Box<dyn Write>,
}

impl Sink {
    fn open(path: Option<&PathBuf>) -> Result<Self, CliError> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
            None => Box::new(io::stdout()),
        };
        Ok(Self { inner })
    }

    fn write(&mut self, text: &str) -> Result<(), CliError> {
        self.inner.write_all(text.as_bytes())?;
        self.inner.flush()?;
        Ok(())
    }

    fn line(&mut self, text: &str) -> Result<(), CliError> {
        self.write(&format!("{text}\n"))
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<Option<BTreeMap<&'static str, String>>, CliError> {
    path.map(|p| {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
        parse_config_file(&text)
    })
    .transpose()
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn cmd_derive(cfg: &RunConfig, out: &mut Sink) -> Result<(), CliError> {
    let combos = cfg.combinations()?;
    out.write(&cfg.provenance("derive"))?;
    out.line(DERIVE_HEADER)?;
    for p in combos {
        out.line(&derive_row(&derive_params(p).map_err(|e| usage(e.to_string()))?))?;
    }
    Ok(())
}

fn cmd_exact(cfg: &RunConfig, out: &mut Sink) -> Result<(), CliError> {
    let topology = cfg.topology()?;
    let combos = cfg.combinations()?;
    out.write(&cfg.provenance("exact"))?;
    out.line(EXACT_HEADER)?;
    for p in combos {
        let dp = derive_params(p).map_err(|e| usage(e.to_string()))?;
        for row in exact_rows(&dp, &topology) {
            out.line(&row)?;
        }
    }
    Ok(())
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn single_threshold(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.occam_c[..] {
        [c] => Ok(c),
        _ => Err(usage("simulate takes a single occam-c value; use sweep for several")),
    }
}

fn cmd_simulate(cfg: &RunConfig, args: &CommonArgs, out: &mut Sink) -> Result<(), CliError> {
    let combos = cfg.combinations()?;
    let c = single_threshold(cfg)?;
    let topology = cfg.topology()?;
    if let Some(n) = cfg.event {
        topology.index_of(n).map_err(|e| usage(e.to_string()))?;
    }
    let mut trace = args.trace.as_ref().map(|p| Sink::open(Some(p))).transpose()?;
    if let Some(t) = trace.as_mut() {
        t.write(&cfg.provenance("simulate"))?;
        t.line(TRACE_HEADER)?;
    }
    out.write(&cfg.provenance("simulate"))?;
    out.line(SIMULATE_HEADER)?;
    for p in combos {
        let exp = cfg.experiment(p, c);
        let summary = run_experiment_with(&exp, execution(args.serial)).map_err(data_err)?;
        out.line(&simulate_row(&summary))?;
        if let Some(t) = trace.as_mut() {
            let (normal, event) = trace_experiment(&exp).map_err(data_err)?;
            let pc = params_cells(&p);
            let mut text = String::new();
            for (r, o) in normal.iter().enumerate() {
                let _ = writeln!(text, "{pc},normal,{r},normal,{},{},,,,,,", o.accepted_normal as u8, o.searched);
            }
            for (r, o) in event.iter().enumerate() {
                let _ = writeln!(
                    text,
                    "{pc},event,{r},{}:{},{},{},{},{},{},{},{},{}",
                    o.truth.row,
                    o.truth.col,
                    o.single_correct as u8,
                    o.single_searched,
                    o.argmax_hit as u8,
                    o.argmax_searched,
                    o.neighborhood_hit as u8,
                    o.neighborhood_searched,
                    o.occam_hit as u8,
                    o.occam_searched
                );
            }
            t.write(&text)?;
        }
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, args: &CommonArgs, out: &mut Sink) -> Result<(), CliError> {
    let combos = cfg.combinations()?;
    out.write(&cfg.provenance("sweep"))?;
    out.line(SWEEP_HEADER)?;
    for p in combos {
        let mut exp = cfg.experiment(p, cfg.occam_c[0]);
        exp.scenario = Scenario::Event;
        let points = threshold_sweep_with(&exp, &cfg.occam_c, execution(args.serial)).map_err(data_err)?;
        let mut text = String::new();
        for pt in points {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{}",
                params_cells(&p),
                fmt6(pt.threshold),
                fmt6(pt.success.value),
                fmt6(pt.search.value),
                fmt6(pt.success.std_error),
                fmt6(pt.search.std_error),
                cfg.seed
            );
        }
        out.write(&text)?;
    }
    Ok(())
}

fn cmd_record(cfg: &RunConfig, out: &mut Sink) -> Result<(), CliError> {
    let combos = cfg.combinations()?;
    let [p] = combos[..] else {
        return Err(usage("record takes exactly one parameter combination"));
    };
    let topology = cfg.topology()?;
    let event_truth = match cfg.event {
        Some(n) => {
            topology.index_of(n).map_err(|e| usage(e.to_string()))?;
            TruthScenario::EventAt(n)
        }
        None => TruthScenario::EventUniform,
    };
    let mut text = String::new();
    let _ = write!(text, "{}", cfg.provenance("record"));
    write_header(&mut text, cfg.rows, cfg.cols, Some(&p));
    let mut runs = Vec::new();
    if cfg.scenario.runs_normal() {
        runs.extend(generate_runs(&p, &topology, TruthScenario::Normal, cfg.reps, cfg.seed).map_err(data_err)?);
    }
    if cfg.scenario.runs_event() {
        runs.extend(generate_runs(&p, &topology, event_truth, cfg.reps, cfg.seed).map_err(data_err)?);
    }
    for run in &runs {
        write_run(&mut text, run);
    }
    out.write(&text)
}

pub const CALIBRATE_HEADER: &str = "parameter,source,estimate,std_error,observations";

/// Rows of the calibration report plus the list of inestimable parameters.
pub fn calibration_report(file: &RunRecordFile) -> Result<(Vec<String>, Vec<String>), CliError> {
    let topology = GridTopology::new(file.rows, file.cols).map_err(data_err)?;
    if file.runs.is_empty() {
        return Err(CliError::Data("insufficient data: the file contains no runs".into()));
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let normal_runs = file
        .runs
        .iter()
        .filter(|r| r.kind == crate::calibration::RunKind::Normal)
        .count();
    let event_runs = file.runs.len() - normal_runs;
    match estimate_pw(&file.runs) {
        Ok(e) => rows.push(format!("pw,normal_runs,{},{},{normal_runs}", fmt6(e.value), fmt6(e.std_error))),
        Err(e) => missing.push(format!("pw (normal runs): {e}")),
    }
    match estimate_detection(&file.runs, &topology) {
        Ok(e) => {
            rows.push(format!("p1,event_runs,{},{},{event_runs}", fmt6(e.p1.value), fmt6(e.p1.std_error)));
            rows.push(format!("p2,event_runs,{},{},{event_runs}", fmt6(e.p2.value), fmt6(e.p2.std_error)));
        }
        Err(CalibrationError::Grid(e)) => return Err(data_err(e)),
        Err(e) => missing.push(format!("p1, p2: {e}")),
    }
    match estimate_response(&file.runs) {
        Ok(e) => {
            rows.push(format!("pc,paired,{},{},{}", fmt6(e.pc.value), fmt6(e.pc.std_error), e.detected));
            rows.push(format!("pw,paired,{},{},{}", fmt6(e.pw.value), fmt6(e.pw.std_error), e.undetected));
        }
        Err(e) => missing.push(format!("pc, pw (paired): {e}")),
    }
    Ok((rows, missing))
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.input.display())))?;
    let file = RunRecordFile::parse(&text).map_err(|e| match e {
        crate::records::RecordError::Empty => CliError::Data("insufficient data: empty run-record file".into()),
        other => data_err(other),
    })?;
    let (rows, missing) = calibration_report(&file)?;
    let mut out = Sink::open(args.out.as_ref())?;
    let mut text = format!(
        "# wsn-detect {} calibrate\n# input={}\n# grid={}x{}\n# runs={}\n",
        env!("CARGO_PKG_VERSION"),
        args.input.display(),
        file.rows,
        file.cols,
        file.runs.len()
    );
    text.push_str(CALIBRATE_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    out.write(&text)?;
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("inestimable parameters:\n  {}", missing.join("\n  "))))
    }
}

pub const DETECT_HEADER: &str = "rule,chosen,search_count,candidates";

fn describe(rule: &str, sel: &SelectionResult) -> String {
    let chosen = sel.chosen.map(|m| m.to_string()).unwrap_or_default();
    let cands: Vec<String> = sel.candidates.iter().map(|m| m.to_string()).collect();
    format!("{rule},{chosen},{},{}", sel.search_count(), cands.join(" "))
}

fn cmd_detect(cfg: &RunConfig, args: &DetectArgs, out: &mut Sink) -> Result<(), CliError> {
    let combos = cfg.combinations()?;
    let [p] = combos[..] else {
        return Err(usage("detect takes exactly one parameter combination"));
    };
    let topology = cfg.topology()?;
    let hex = args.field.as_ref().ok_or_else(|| usage("detect needs --field HEX"))?;
    let bits = unpack_bits(hex.trim(), topology.len()).map_err(|e| CliError::Data(format!("field: {e}")))?;
    let field = ResponseField::new(bits, &topology).map_err(data_err)?;
    let dp = derive_params(p).map_err(|e| usage(e.to_string()))?;
    let ev = Evidence::compute(&field, &topology, &dp).map_err(data_err)?;
    let mut rng = crate::simulator::replication_rng(cfg.seed, 0, 0);
    let priors = match cfg.p_norm {
        Some(pn) => Priors::with_normal(pn, topology.len()).map_err(|e| usage(e.to_string()))?,
        None => Priors::uniform(topology.len()),
    };
    let c = single_threshold(cfg)?;
    let mut text = cfg.provenance("detect");
    text.push_str(DETECT_HEADER);
    text.push('\n');
    let mut rows = vec![
        describe("single", &ev.select_single(&mut rng)),
        describe("argmax", &ev.select_argmax_set()),
        describe("neighborhood", &ev.select_with_neighborhood()),
        describe(&format!("occam({c})"), &ev.select_occam(c).map_err(|e| usage(e.to_string()))?),
    ];
    if dp.q_defined() {
        let sel = ev.select_q_ratio(cfg.q_ratio).map_err(|e| usage(e.to_string()))?;
        rows.push(describe(&format!("q_ratio({})", cfg.q_ratio), &sel));
    }
    let bma = ev.select_bma(&priors, &mut rng).map_err(data_err)?;
    rows.push(describe("bma", &bma));
    let post = bma.posterior.as_ref().expect("bma posterior");
    rows.push(format!("bma_posterior_normal,,,{}", fmt6(post[0].1)));
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    out.write(&text)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = load_config(cli.config.as_ref())?;
    match &cli.command {
        Command::Derive(a) => cmd_derive(&merge_settings("derive", file.as_ref(), a, &[])?, &mut Sink::open(a.out.as_ref())?),
        Command::Exact(a) => cmd_exact(&merge_settings("exact", file.as_ref(), a, &[])?, &mut Sink::open(a.out.as_ref())?),
        Command::Simulate(a) => {
            let cfg = merge_settings("simulate", file.as_ref(), a, &[])?;
            cmd_simulate(&cfg, a, &mut Sink::open(a.out.as_ref())?)
        }
        Command::Sweep(a) => {
            let cfg = merge_settings("sweep", file.as_ref(), a, &[])?;
            cmd_sweep(&cfg, a, &mut Sink::open(a.out.as_ref())?)
        }
        Command::Record(a) => cmd_record(&merge_settings("record", file.as_ref(), a, &[])?, &mut Sink::open(a.out.as_ref())?),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Detect(a) => {
            let extra = [("p-norm", a.p_norm.as_ref()), ("q-ratio", a.q_ratio.as_ref())];
            let cfg = merge_settings("detect", file.as_ref(), &a.common, &extra)?;
            cmd_detect(&cfg, a, &mut Sink::open(a.common.out.as_ref())?)
        }
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
