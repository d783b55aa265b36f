//! Command-line front end: `dof`, `rate` and `advise` over the two-way,
//! two-hop and two-way two-hop scenarios (plus point-to-point for `rate`).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dof::{self, PowerCoupling, ScenarioSpec};
use crate::error::Error;
use crate::mimo::{ergodic_rate, McConfig, RateEstimate};
use crate::model::{antenna_allocation, fd_splits, DuplexMode, LinkBudget, SiParams};
use crate::rates::{self, NodeBudgets, TwoWayControl};
use crate::region::DofRegion;
use crate::search::{convex_hull, grid_maximin, support_gap, GridSpec};
use crate::slope::{self, SlopeOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Caps the worker threads of the global pool.
pub const THREADS_ENV: &str = "DUPLEX_DOF_THREADS";

/// Lambda used for two-way two-hop runs when none is given.
pub const ASSUMED_TWR_LAMBDA: f64 = 0.9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FIT_UNSTABLE: i32 = 4;

const DOF_TOL: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "duplex-dof", version, about = "HD vs FD degrees of freedom and ergodic rates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Closed-form DoF values and regions, checked against a grid oracle.
    Dof(CommandArgs),
    /// Monte-Carlo rate curves and their high-SNR slopes.
    Rate(CommandArgs),
    /// Recommend HD or FD from the DoF comparison.
    Advise(CommandArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommandArgs {
    #[arg(value_enum)]
    pub scenario: ScenarioArg,
    #[command(flatten)]
    pub opts: RunArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioArg {
    TwoWay,
    TwoHop,
    Twr,
    /// Point-to-point MIMO link (`rate` only).
    P2p,
}

impl ScenarioArg {
    fn name(self) -> &'static str {
        match self {
            ScenarioArg::TwoWay => "two-way",
            ScenarioArg::TwoHop => "two-hop",
            ScenarioArg::Twr => "twr",
            ScenarioArg::P2p => "p2p",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn parse_mode(s: &str) -> Result<DuplexMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Antennas at node A.
    #[arg(long)]
    pub na: Option<usize>,
    /// Antennas at node B.
    #[arg(long)]
    pub nb: Option<usize>,
    /// Antennas at the relay.
    #[arg(long)]
    pub nr: Option<usize>,
    /// SI exponent in [0, 1]; needed whenever an FD mode is evaluated.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Comma-separated subset of hd, ac, rc.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    pub modes: Vec<DuplexMode>,
    /// Time-sharing fraction.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Power coupling exponent: coupled power = P_A^gamma.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Receive antennas of A (two-way FD).
    #[arg(long)]
    pub ra: Option<usize>,
    /// Receive antennas of B (two-way FD).
    #[arg(long)]
    pub rb: Option<usize>,
    /// Receive antennas of the relay (two-hop FD).
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo samples per SNR point (raised adaptively).
    #[arg(long, default_value_t = 20_000)]
    pub samples: u64,
    #[arg(long, default_value_t = McConfig::DEFAULT_CHUNK)]
    pub chunk: u64,
    #[arg(long, default_value_t = 40.0, allow_negative_numbers = true)]
    pub snr_start: f64,
    #[arg(long, default_value_t = 70.0, allow_negative_numbers = true)]
    pub snr_stop: f64,
    #[arg(long, default_value_t = 5.0)]
    pub snr_step: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io { path: PathBuf, source: std::io::Error },
    FitUnstable(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::FitUnstable(_) => EXIT_FIT_UNSTABLE,
            CliError::Internal(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
            CliError::FitUnstable(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::FitUnstable { .. } => CliError::FitUnstable(e.to_string()),
            Error::NumericalFailure(_) => CliError::Internal(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Fully resolved run configuration, embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub version: &'static str,
    pub command: &'static str,
    pub scenario_name: &'static str,
    pub scenario: ScenarioSpec,
    pub modes: Vec<DuplexMode>,
    pub lambda: Option<f64>,
    pub si: SiParams,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub ra: Option<usize>,
    pub rb: Option<usize>,
    pub r: Option<usize>,
    pub snr_grid_db: Option<Vec<f64>>,
    pub mc: Option<McConfig>,
    pub output_path: PathBuf,
    pub output_format: OutputFormat,
    pub assumptions: Vec<String>,
}

impl RunConfig {
    fn fd_modes(&self) -> Vec<DuplexMode> {
        self.modes.iter().copied().filter(|m| m.is_full_duplex()).collect()
    }

    fn wants_hd(&self) -> bool {
        self.modes.contains(&DuplexMode::HalfDuplex)
    }
}

fn require(v: Option<usize>, flag: &str, scenario: &str) -> CliResult<usize> {
    match v {
        Some(0) => Err(config_err(format!("--{flag} must be at least 1"))),
        Some(n) => Ok(n),
        None => Err(config_err(format!("{scenario} needs --{flag}"))),
    }
}

fn snr_grid(o: &RunArgs) -> CliResult<Vec<f64>> {
    if !(o.snr_step.is_finite() && o.snr_step > 0.0) {
        return Err(config_err("--snr-step must be positive"));
    }
    if !(o.snr_start.is_finite() && o.snr_stop.is_finite() && o.snr_stop > o.snr_start) {
        return Err(config_err("--snr-stop must exceed --snr-start"));
    }
    let n = ((o.snr_stop - o.snr_start) / o.snr_step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| o.snr_start + o.snr_step * i as f64).collect();
    if grid.len() < 4 {
        return Err(config_err(format!("the SNR grid has {} points, need at least 4", grid.len())));
    }
    Ok(grid)
}

/// Validate the arguments of one command into a [`RunConfig`].
pub fn resolve(command: &Command) -> CliResult<RunConfig> {
    let (name, args) = match command {
        Command::Dof(a) => ("dof", a),
        Command::Rate(a) => ("rate", a),
        Command::Advise(a) => ("advise", a),
    };
    let o = &args.opts;
    let sc = args.scenario;
    if sc == ScenarioArg::P2p && name != "rate" {
        return Err(config_err("the p2p scenario is only available for `rate`"));
    }
    let scenario = match sc {
        ScenarioArg::TwoWay | ScenarioArg::P2p => {
            ScenarioSpec::TwoWay { n_a: require(o.na, "na", sc.name())?, n_b: require(o.nb, "nb", sc.name())? }
        }
        ScenarioArg::TwoHop => ScenarioSpec::TwoHop {
            n_a: require(o.na, "na", sc.name())?,
            n_r: require(o.nr, "nr", sc.name())?,
            n_b: require(o.nb, "nb", sc.name())?,
        },
        ScenarioArg::Twr => ScenarioSpec::TwoWayTwoHop {
            n_a: require(o.na, "na", sc.name())?,
            n_r: require(o.nr, "nr", sc.name())?,
            n_b: require(o.nb, "nb", sc.name())?,
        },
    };

    let mut modes: Vec<DuplexMode> = Vec::new();
    let requested = if o.modes.is_empty() {
        match (name, sc) {
            (_, ScenarioArg::P2p) => vec![DuplexMode::HalfDuplex],
            ("advise", _) => vec![DuplexMode::HalfDuplex, DuplexMode::AntennaConservedFD],
            _ => DuplexMode::ALL.to_vec(),
        }
    } else {
        o.modes.clone()
    };
    for m in requested {
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    if name == "advise" && !(modes.contains(&DuplexMode::HalfDuplex) && modes.iter().any(|m| m.is_full_duplex())) {
        return Err(config_err("advise compares hd with at least one of ac, rc"));
    }

    let mut assumptions = Vec::new();
    let needs_lambda = sc != ScenarioArg::P2p && (modes.iter().any(|m| m.is_full_duplex()) || name == "advise");
    let lambda = match (o.lambda, needs_lambda, sc) {
        (Some(l), _, _) => Some(l),
        (None, true, ScenarioArg::Twr) => {
            assumptions.push(format!(
                "lambda not given; assumed lambda = {ASSUMED_TWR_LAMBDA} for the symmetric two-way relay comparison"
            ));
            Some(ASSUMED_TWR_LAMBDA)
        }
        (None, true, _) => return Err(config_err("full-duplex modes need --lambda")),
        (None, false, _) => None,
    };
    let si = SiParams::new(lambda.unwrap_or(1.0), o.beta, o.mu)?;
    if lambda.is_none() {
        assumptions.push("no full-duplex mode evaluated; lambda unused".into());
    }
    if let Some(t) = o.tau {
        if !(0.0..=1.0).contains(&t) {
            return Err(config_err(format!("--tau {t} not in [0, 1]")));
        }
    }
    if let Some(g) = o.gamma {
        match sc {
            ScenarioArg::TwoHop | ScenarioArg::Twr => PowerCoupling::for_relay(g)?,
            _ => PowerCoupling::new(g)?,
        };
    }
    let (snr_grid_db, mc) = if name == "rate" {
        (Some(snr_grid(o)?), Some(McConfig::new(o.samples, o.seed, o.chunk)?))
    } else {
        (None, None)
    };
    Ok(RunConfig {
        version: VERSION,
        command: name,
        scenario_name: sc.name(),
        scenario,
        modes,
        lambda,
        si,
        tau: o.tau,
        gamma: o.gamma,
        ra: o.ra,
        rb: o.rb,
        r: o.r,
        snr_grid_db,
        mc,
        output_path: o.out.clone(),
        output_format: o.format,
        assumptions,
    })
}

// ---------------------------------------------------------------------------
// Output

/// 10 significant digits, shortest representation of the rounded value.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn cell(x: f64) -> String {
    format_float(x)
}

fn cell_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn cell_count(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Files written by one command and a human-readable summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Sink<'a> {
    cfg: &'a RunConfig,
    out: Outcome,
}

impl<'a> Sink<'a> {
    fn new(cfg: &'a RunConfig) -> CliResult<Self> {
        fs::create_dir_all(&cfg.output_path)
            .map_err(|source| CliError::Io { path: cfg.output_path.clone(), source })?;
        Ok(Self { cfg, out: Outcome::default() })
    }

    fn write(&mut self, path: PathBuf, body: String) -> CliResult<()> {
        fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.out.files.push(path);
        Ok(())
    }

    fn config_json(&self) -> String {
        serde_json::to_string(self.cfg).expect("config serializes")
    }

    fn csv(&mut self, stem: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut body = format!("# duplex-dof {VERSION}\n# config: {}\n", self.config_json());
        for a in &self.cfg.assumptions {
            body.push_str(&format!("# assumption: {a}\n"));
        }
        body.push_str(&header.join(","));
        body.push('\n');
        for row in rows {
            let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
            body.push_str(&fields.join(","));
            body.push('\n');
        }
        self.write(self.cfg.output_path.join(format!("{stem}.csv")), body)
    }

    fn json(&mut self, stem: &str, results: Value, oracle_report: Value) -> CliResult<()> {
        let doc = json!({
            "config": serde_json::to_value(self.cfg).expect("config serializes"),
            "results": results,
            "oracle_report": oracle_report,
            "assumptions": self.cfg.assumptions,
        });
        let mut body = serde_json::to_string_pretty(&doc).expect("json serializes");
        body.push('\n');
        self.write(self.cfg.output_path.join(format!("{stem}.json")), body)
    }

    fn csv_output(&self) -> bool {
        self.cfg.output_format == OutputFormat::Csv
    }
}

// ---------------------------------------------------------------------------
// Grid oracles used by `dof`

#[derive(Debug, Clone, Serialize)]
struct OracleRow {
    label: String,
    quantity: &'static str,
    closed_form: f64,
    oracle: f64,
    abs_diff: f64,
}

impl OracleRow {
    fn new(label: impl Into<String>, quantity: &'static str, closed_form: f64, oracle: f64) -> Self {
        Self { label: label.into(), quantity, closed_form, oracle, abs_diff: (closed_form - oracle).abs() }
    }

    fn cells(&self) -> Vec<String> {
        vec![self.label.clone(), self.quantity.into(), cell(self.closed_form), cell(self.oracle), cell(self.abs_diff)]
    }
}

const ORACLE_HEADER: [&str; 5] = ["mode", "quantity", "closed_form", "oracle", "abs_diff"];

fn dense_gammas() -> Vec<f64> {
    let n = 4001;
    let mut g: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
    let inv: Vec<f64> = g.iter().map(|x| 1.0 / x).collect();
    g.extend(inv);
    g.extend([1e-9, 1e9]);
    g
}

fn twoway_oracle_region(n_a: usize, n_b: usize, mode: DuplexMode, si: &SiParams) -> CliResult<DofRegion> {
    if mode == DuplexMode::HalfDuplex {
        let pts =
            (0..=2000).map(|i| dof::twoway_hd_point(n_a, n_b, i as f64 / 2000.0)).collect::<Result<Vec<_>, _>>()?;
        return Ok(convex_hull(&pts));
    }
    let mut pts = Vec::new();
    let gammas = dense_gammas();
    for a in fd_splits(n_a, mode) {
        for b in fd_splits(n_b, mode) {
            for &g in &gammas {
                pts.push(dof::twoway_fd_point(n_a, n_b, mode, &a, &b, &PowerCoupling::new(g)?, si)?);
            }
        }
    }
    Ok(convex_hull(&pts))
}

/// Max-min DoF of one relayed direction by exhaustive grid search.
fn relay_oracle(n_a: usize, n_r: usize, n_b: usize, mode: DuplexMode, si: &SiParams) -> CliResult<f64> {
    if mode == DuplexMode::HalfDuplex {
        let (a, b) = (n_a.min(n_r) as f64, n_r.min(n_b) as f64);
        let grid = GridSpec::new(2001, 2, 1.0)?.with_exact_points([(b / (a + b), 1.0)]);
        return Ok(grid_maximin(|t, _, _| (t * a).min((1.0 - t) * b), None, &grid)?.value);
    }
    if n_r < 2 {
        return Ok(0.0);
    }
    let c = si.leakage();
    let grid = GridSpec::new(2, 4001, 1.0)?.with_exact_points([(0.0, 1.0 / (2.0 - si.lambda()))]);
    let objective = |_t: f64, g: f64, r: usize| {
        let t = match mode {
            DuplexMode::RfChainConservedFD => 2 * n_r - 2 * r,
            _ => n_r - r,
        };
        ((1.0 - g * c) * n_a.min(r) as f64).min(g * t.min(n_b) as f64)
    };
    Ok(grid_maximin(objective, Some(n_r), &grid)?.value)
}

// ---------------------------------------------------------------------------
// dof

fn region_rows(label: &str, region: &DofRegion) -> Vec<Vec<String>> {
    region
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| vec![label.to_string(), i.to_string(), cell(v.d_ab), cell(v.d_ba)])
        .collect()
}

const REGION_HEADER: [&str; 4] = ["mode", "vertex_index", "d_ab", "d_ba"];

fn write_regions(
    sink: &mut Sink,
    regions: &[(String, DofRegion)],
    oracle: &[OracleRow],
    extra: Value,
) -> CliResult<()> {
    let scenario = sink.cfg.scenario_name;
    if sink.csv_output() {
        for (label, region) in regions {
            sink.csv(&format!("{scenario}_region_{label}"), &REGION_HEADER, &region_rows(label, region))?;
        }
        let rows: Vec<Vec<String>> = oracle.iter().map(OracleRow::cells).collect();
        sink.csv(&format!("{scenario}_oracle"), &ORACLE_HEADER, &rows)?;
    } else {
        let map: serde_json::Map<String, Value> =
            regions.iter().map(|(l, r)| (l.clone(), serde_json::to_value(r).expect("region serializes"))).collect();
        let mut results = json!({ "regions": map });
        if let (Some(obj), Value::Object(more)) = (results.as_object_mut(), extra) {
            obj.extend(more);
        }
        sink.json(&format!("{scenario}_dof"), results, json!(oracle))?;
    }
    Ok(())
}

fn cmd_dof(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut sink = Sink::new(cfg)?;
    let si = cfg.si;
    let mut summary = String::new();
    match cfg.scenario {
        ScenarioSpec::TwoWay { n_a, n_b } => {
            let mut regions = Vec::new();
            let mut oracle = Vec::new();
            for &mode in &cfg.modes {
                let region = if mode.is_full_duplex() {
                    dof::twoway_fd_region(n_a, n_b, mode, &si)?
                } else {
                    dof::twoway_hd_region(n_a, n_b)?
                };
                let check = twoway_oracle_region(n_a, n_b, mode, &si)?;
                oracle.push(OracleRow::new(mode.tag(), "support_gap", 0.0, support_gap(&region, &check, 361)));
                oracle.push(OracleRow::new(mode.tag(), "max_sum", region.max_sum(), check.max_sum()));
                summary.push_str(&format!("{mode}: max sum DoF {}\n", format_float(region.max_sum())));
                regions.push((mode.tag().to_string(), region));
            }
            write_regions(&mut sink, &regions, &oracle, json!({}))?;
        }
        ScenarioSpec::TwoHop { n_a, n_r, n_b } => {
            let mut rows = Vec::new();
            let mut records = Vec::new();
            let mut oracle = Vec::new();
            for &mode in &cfg.modes {
                let (tau, gamma, r, value) = if mode.is_full_duplex() {
                    let d = dof::twohop_fd_dof(n_a, n_r, n_b, mode, &si)?;
                    (None, d.gamma_opt, d.r_opt, d.dof)
                } else {
                    let d = dof::twohop_hd_dof(n_a, n_r, n_b)?;
                    (Some(d.tau_opt), Some(1.0), None, d.dof)
                };
                oracle.push(OracleRow::new(mode.tag(), "dof", value, relay_oracle(n_a, n_r, n_b, mode, &si)?));
                rows.push(vec![mode.tag().to_string(), cell_opt(tau), cell_opt(gamma), cell_count(r), cell(value)]);
                records.push(json!({"mode": mode.tag(), "tau_opt": tau, "gamma_opt": gamma, "r_opt": r, "dof": value}));
                summary.push_str(&format!("{mode}: DoF {}\n", format_float(value)));
            }
            if sink.csv_output() {
                sink.csv("two-hop_dof", &["mode", "tau_opt", "gamma_opt", "r_opt", "dof"], &rows)?;
                let orows: Vec<Vec<String>> = oracle.iter().map(OracleRow::cells).collect();
                sink.csv("two-hop_oracle", &ORACLE_HEADER, &orows)?;
            } else {
                sink.json("two-hop_dof", json!({ "dof": records }), json!(oracle))?;
            }
        }
        ScenarioSpec::TwoWayTwoHop { n_a, n_r, n_b } => {
            let mut regions = Vec::new();
            let mut oracle = Vec::new();
            let mut corners = serde_json::Map::new();
            if cfg.wants_hd() {
                if n_a != n_b {
                    return Err(config_err("the HD two-way relay regions need --na == --nb"));
                }
                let (upper, mac_bc) = dof::twr_hd_regions(n_a, n_r)?;
                summary.push_str(&format!("hd: MAC-BC symmetric DoF {}\n", format_float(mac_bc.max_symmetric())));
                regions.push(("hd_upper".to_string(), upper));
                regions.push(("hd_mac_bc".to_string(), mac_bc));
            }
            for mode in cfg.fd_modes() {
                let (ab, ba) = dof::twr_fd_corners(n_a, n_r, n_b, mode, &si)?;
                oracle.push(OracleRow::new(mode.tag(), "corner_ab", ab.dof, relay_oracle(n_a, n_r, n_b, mode, &si)?));
                oracle.push(OracleRow::new(mode.tag(), "corner_ba", ba.dof, relay_oracle(n_b, n_r, n_a, mode, &si)?));
                corners.insert(mode.tag().into(), json!([ab.dof, ba.dof]));
                let region = dof::twr_fd_region(n_a, n_r, n_b, mode, &si)?;
                summary.push_str(&format!(
                    "{mode}: corners ({}, {}), symmetric DoF {}\n",
                    format_float(ab.dof),
                    format_float(ba.dof),
                    format_float(region.max_symmetric())
                ));
                regions.push((mode.tag().to_string(), region));
            }
            write_regions(&mut sink, &regions, &oracle, json!({ "fd_corners": corners }))?;
        }
    }
    sink.out.summary = summary;
    Ok(sink.out)
}

// ---------------------------------------------------------------------------
// rate

type RateBuilder<'a> = Box<dyn Fn(f64, &McConfig) -> crate::error::Result<Vec<RateEstimate>> + Sync + 'a>;

/// One simulated curve family: a builder from `P_A` to per-direction rates
/// and the DoF each direction should show.
struct Curve<'a> {
    label: String,
    builder: RateBuilder<'a>,
    expected: Vec<f64>,
}

fn normalized(p: f64) -> crate::error::Result<LinkBudget> {
    LinkBudget::normalized(p)
}

fn coupled(p: f64, gamma: f64) -> f64 {
    p.powf(gamma)
}

fn default_rx(n: usize, mode: DuplexMode) -> usize {
    let r = match mode {
        DuplexMode::RfChainConservedFD => 2 * n / 3,
        _ => n / 2,
    };
    r.clamp(1, n.saturating_sub(1).max(1))
}

/// FD relaying DoF at a fixed coupling, best split (smallest on ties).
fn relay_dof_at(
    n_a: usize,
    n_r: usize,
    n_b: usize,
    mode: DuplexMode,
    gamma: f64,
    si: &SiParams,
) -> (f64, Option<usize>) {
    let c = si.leakage();
    let mut best = (0.0, None);
    for s in fd_splits(n_r, mode) {
        let v = ((1.0 - gamma * c) * n_a.min(s.rx) as f64).max(0.0).min(gamma * s.tx.min(n_b) as f64);
        if best.1.is_none() || v > best.0 + 1e-12 {
            best = (v, Some(s.rx));
        }
    }
    best
}

fn pair(r: crate::rates::ScenarioRates) -> Vec<RateEstimate> {
    let mut v = vec![r.r_ab];
    if let Some(ba) = r.r_ba {
        v.push(ba);
    }
    v
}

fn build_curves<'a>(cfg: &'a RunConfig) -> CliResult<Vec<Curve<'a>>> {
    let si = cfg.si;
    let mut curves = Vec::new();
    let spec = cfg.scenario;
    if cfg.scenario_name == "p2p" {
        let ScenarioSpec::TwoWay { n_a, n_b } = spec else { unreachable!() };
        curves.push(Curve {
            label: "p2p".into(),
            builder: Box::new(move |p, c| Ok(vec![ergodic_rate(n_b, n_a, p, c)?])),
            expected: vec![n_a.min(n_b) as f64],
        });
        return Ok(curves);
    }
    for &mode in &cfg.modes {
        let label = mode.tag().to_string();
        match spec {
            ScenarioSpec::TwoWay { n_a, n_b } => {
                let g = cfg.gamma.unwrap_or(1.0);
                if mode.is_full_duplex() {
                    let rx_a = cfg.ra.unwrap_or_else(|| default_rx(n_a, mode));
                    let rx_b = cfg.rb.unwrap_or_else(|| default_rx(n_b, mode));
                    let sa = antenna_allocation(n_a, mode, Some(rx_a))?;
                    let sb = antenna_allocation(n_b, mode, Some(rx_b))?;
                    let d = dof::twoway_fd_point(n_a, n_b, mode, &sa, &sb, &PowerCoupling::new(g)?, &si)?;
                    let control = TwoWayControl::Splits { rx_a, rx_b };
                    curves.push(Curve {
                        label,
                        builder: Box::new(move |p, c| {
                            let b = NodeBudgets::two_way(normalized(p)?, normalized(coupled(p, g))?);
                            Ok(pair(rates::twoway_rates(&spec, mode, &b, &si, control, c)?))
                        }),
                        expected: vec![d.d_ab, d.d_ba],
                    });
                } else {
                    let tau = cfg.tau.unwrap_or(0.5);
                    let m = n_a.min(n_b) as f64;
                    curves.push(Curve {
                        label,
                        builder: Box::new(move |p, c| {
                            let b = NodeBudgets::two_way(normalized(p)?, normalized(coupled(p, g))?);
                            Ok(pair(rates::twoway_rates(&spec, mode, &b, &si, TwoWayControl::Tau(tau), c)?))
                        }),
                        expected: vec![tau * m, (1.0 - tau) * m],
                    });
                }
            }
            ScenarioSpec::TwoHop { n_a, n_r, n_b } => {
                if !mode.is_full_duplex() {
                    let tau = cfg.tau;
                    let (a, b) = (n_a.min(n_r) as f64, n_r.min(n_b) as f64);
                    let expected = match tau {
                        Some(t) => (t * a).min((1.0 - t) * b),
                        None => dof::twohop_hd_dof(n_a, n_r, n_b)?.dof,
                    };
                    curves.push(Curve {
                        label,
                        builder: Box::new(move |p, c| {
                            let b = NodeBudgets::relayed(normalized(p)?, normalized(p)?, normalized(p)?);
                            Ok(pair(rates::twohop_hd_rate(&spec, &b, tau, c)?))
                        }),
                        expected: vec![expected],
                    });
                } else if let Some(g) = cfg.gamma {
                    let (best, best_r) = relay_dof_at(n_a, n_r, n_b, mode, g, &si);
                    let rx = match cfg.r.or(best_r) {
                        Some(r) => r,
                        None => return Err(config_err("a full-duplex relay needs --nr >= 2")),
                    };
                    let s = antenna_allocation(n_r, mode, Some(rx))?;
                    let expected = if cfg.r.is_some() {
                        ((1.0 - g * si.leakage()) * n_a.min(s.rx) as f64).max(0.0).min(g * s.tx.min(n_b) as f64)
                    } else {
                        best
                    };
                    curves.push(Curve {
                        label,
                        builder: Box::new(move |p, c| {
                            let b = NodeBudgets::relayed(normalized(p)?, normalized(coupled(p, g))?, normalized(p)?);
                            Ok(pair(rates::twohop_fd_rate_at(&spec, mode, &b, &si, rx, c)?))
                        }),
                        expected: vec![expected],
                    });
                } else {
                    let expected = dof::twohop_fd_dof(n_a, n_r, n_b, mode, &si)?.dof;
                    curves.push(Curve {
                        label,
                        builder: Box::new(move |p, c| {
                            let relay = normalized(p)?.with_max_relay_power(p.max(f64::MIN_POSITIVE))?;
                            let b = NodeBudgets::relayed(normalized(p)?, relay, normalized(p)?);
                            Ok(pair(rates::twohop_fd_rate(&spec, mode, &b, &si, c)?))
                        }),
                        expected: vec![expected],
                    });
                }
            }
            ScenarioSpec::TwoWayTwoHop { n_a, n_r, n_b } => {
                let tau = cfg.tau.unwrap_or(0.5);
                let gamma = cfg.gamma;
                let expected = if mode.is_full_duplex() {
                    let (ab, ba) = match gamma {
                        Some(g) => {
                            (relay_dof_at(n_a, n_r, n_b, mode, g, &si).0, relay_dof_at(n_b, n_r, n_a, mode, g, &si).0)
                        }
                        None => {
                            let (ab, ba) = dof::twr_fd_corners(n_a, n_r, n_b, mode, &si)?;
                            (ab.dof, ba.dof)
                        }
                    };
                    vec![tau * ab, (1.0 - tau) * ba]
                } else {
                    let ab = (tau * n_a.min(n_r) as f64).min((1.0 - tau) * n_r.min(n_b) as f64);
                    let ba = (tau * n_b.min(n_r) as f64).min((1.0 - tau) * n_r.min(n_a) as f64);
                    let cap = tau * n_r.min(n_a + n_b) as f64;
                    let s = if ab + ba > cap { cap / (ab + ba) } else { 1.0 };
                    vec![ab * s, ba * s]
                };
                curves.push(Curve {
                    label,
                    builder: Box::new(move |p, c| {
                        let relay = match (mode.is_full_duplex(), gamma) {
                            (true, Some(g)) => normalized(coupled(p, g))?,
                            (true, None) => normalized(p)?.with_max_relay_power(p.max(f64::MIN_POSITIVE))?,
                            (false, _) => normalized(p)?,
                        };
                        let b = NodeBudgets::relayed(normalized(p)?, relay, normalized(p)?);
                        Ok(pair(rates::twr_rates(&spec, mode, &b, &si, tau, c)?))
                    }),
                    expected,
                });
            }
        }
    }
    Ok(curves)
}

const DIRECTIONS: [&str; 2] = ["ab", "ba"];

fn cmd_rate(cfg: &RunConfig) -> CliResult<Outcome> {
    let grid = cfg.snr_grid_db.clone().expect("rate has a grid");
    let mc = cfg.mc.expect("rate has a Monte-Carlo config");
    let curves = build_curves(cfg)?;
    let mut sink = Sink::new(cfg)?;

    let mut rate_rows = Vec::new();
    let mut slope_rows = Vec::new();
    let mut curve_json = Vec::new();
    let mut slope_json = Vec::new();
    let mut unstable = Vec::new();
    let mut summary = String::new();
    for curve in &curves {
        let samples = slope::sample_curves(&curve.builder, &grid, &mc, &SlopeOptions::default())?;
        let mut points = Vec::new();
        for (db, rs) in samples.snr_db.iter().zip(&samples.rates) {
            let ba = rs.get(1);
            rate_rows.push(vec![
                cell(*db),
                curve.label.clone(),
                cell(rs[0].mean_rate),
                cell(rs[0].std_err),
                cell_opt(ba.map(|r| r.mean_rate)),
                cell_opt(ba.map(|r| r.std_err)),
            ]);
            points.push(json!({
                "snr_db": db,
                "r_ab": rs[0].mean_rate,
                "r_ab_stderr": rs[0].std_err,
                "r_ba": ba.map(|r| r.mean_rate),
                "r_ba_stderr": ba.map(|r| r.std_err),
            }));
        }
        curve_json.push(json!({ "mode": curve.label, "n_samples": samples.n_samples, "points": points }));

        for (k, expected) in curve.expected.iter().enumerate() {
            let series: Vec<RateEstimate> = samples.rates.iter().map(|r| r[k]).collect();
            let fit = slope::fit_slope(&samples.snr_db, &series, samples.n_samples);
            let (est, stable) = match fit {
                Ok(e) => (Some(e), true),
                Err(Error::FitUnstable { r_squared, .. }) => {
                    unstable.push(format!("{} {}: r^2 = {r_squared:.4}", curve.label, DIRECTIONS[k]));
                    (Some(slope::fit_slope_unchecked(&samples.snr_db, &series, samples.n_samples)), false)
                }
                Err(e) => return Err(e.into()),
            };
            let est = est.expect("fit exists");
            summary.push_str(&format!(
                "{} {}: slope {} (expected DoF {})\n",
                curve.label,
                DIRECTIONS[k],
                format_float(est.slope),
                format_float(*expected)
            ));
            slope_rows.push(vec![
                curve.label.clone(),
                DIRECTIONS[k].into(),
                cell(est.slope),
                cell(est.intercept),
                cell(est.r_squared),
                cell(*expected),
                cell(est.snr_window.0),
                cell(est.snr_window.1),
                est.n_samples.to_string(),
                stable.to_string(),
            ]);
            slope_json.push(json!({
                "mode": curve.label,
                "direction": DIRECTIONS[k],
                "slope": est.slope,
                "intercept": est.intercept,
                "r_squared": est.r_squared,
                "expected_dof": expected,
                "abs_diff": (est.slope - expected).abs(),
                "snr_window": [est.snr_window.0, est.snr_window.1],
                "n_samples": est.n_samples,
                "stable": stable,
            }));
        }
    }

    let scenario = cfg.scenario_name;
    if sink.csv_output() {
        sink.csv(
            &format!("{scenario}_rate"),
            &["snr_db", "mode", "r_ab", "r_ab_stderr", "r_ba", "r_ba_stderr"],
            &rate_rows,
        )?;
        sink.csv(
            &format!("{scenario}_slope"),
            &[
                "mode",
                "direction",
                "slope",
                "intercept",
                "r_squared",
                "expected_dof",
                "snr_low_db",
                "snr_high_db",
                "n_samples",
                "stable",
            ],
            &slope_rows,
        )?;
    } else {
        sink.json(&format!("{scenario}_rate"), json!({ "curves": curve_json }), json!(slope_json))?;
    }
    sink.out.summary = summary;
    if !unstable.is_empty() {
        let files: Vec<String> = sink.out.files.iter().map(|p| p.display().to_string()).collect();
        return Err(CliError::FitUnstable(format!(
            "slope fit unstable ({}); rows written to {}",
            unstable.join("; "),
            files.join(", ")
        )));
    }
    Ok(sink.out)
}

// ---------------------------------------------------------------------------
// advise

#[derive(Debug, Clone, Serialize)]
pub struct Advice {
    pub scenario: &'static str,
    pub recommended_mode: DuplexMode,
    /// DoF of the recommended mode minus DoF of the best alternative.
    pub margin_dof: f64,
    pub binding_condition: String,
    pub condition_values: String,
    pub hd_dof: f64,
    pub fd_mode: DuplexMode,
    pub fd_dof: f64,
    /// Two-way relaying only: FD minus HD single-direction (corner) DoF.
    pub corner_advantage_dof: Option<f64>,
}

fn best_fd<F>(modes: &[DuplexMode], mut value: F) -> CliResult<(DuplexMode, f64)>
where
    F: FnMut(DuplexMode) -> CliResult<f64>,
{
    let mut best: Option<(DuplexMode, f64)> = None;
    for &m in modes {
        let v = value(m)?;
        if best.is_none_or(|(_, b)| v > b + DOF_TOL) {
            best = Some((m, v));
        }
    }
    best.ok_or_else(|| config_err("no full-duplex mode to compare"))
}

fn twohop_condition(n_a: usize, n_r: usize, n_b: usize, mode: DuplexMode, lambda: f64) -> (String, String) {
    let ac = mode == DuplexMode::AntennaConservedFD;
    if n_a == n_b {
        let n = n_a as f64;
        if ac {
            ("N_R > N(2-λ)".into(), format!("{n_r} > {}", format_float(n * (2.0 - lambda))))
        } else if n_r.is_multiple_of(3) {
            ("N_R > (3/4)N(2-λ)".into(), format!("{n_r} > {}", format_float(0.75 * n * (2.0 - lambda))))
        } else {
            ("max-min DoF comparison (3 does not divide N_R)".into(), format!("N_R = {n_r}"))
        }
    } else if n_a == 1 {
        if ac {
            let rhs = (n_b as f64).min(if lambda > 0.0 { 1.0 / lambda } else { f64::INFINITY });
            ("N_R > min(N_B, 1/λ)".into(), format!("{n_r} > {}", format_float(rhs)))
        } else {
            let m = (2 * n_r - 2).min(n_b) as f64;
            let b = n_r.min(n_b) as f64;
            (
                "λ > 1 - min(2N_R-2, N_B)/min(N_R, N_B)".into(),
                format!("{} > {}", format_float(lambda), format_float(1.0 - m / b)),
            )
        }
    } else {
        ("max-min DoF comparison (general relay split)".into(), String::new())
    }
}

fn cmd_advise(cfg: &RunConfig) -> CliResult<Outcome> {
    let si = cfg.si;
    let lambda = si.lambda();
    let fd_modes = cfg.fd_modes();
    let advice = match cfg.scenario {
        ScenarioSpec::TwoHop { n_a, n_r, n_b } => {
            let hd = dof::twohop_hd_dof(n_a, n_r, n_b)?.dof;
            let (fd_mode, fd) = best_fd(&fd_modes, |m| Ok(dof::twohop_fd_dof(n_a, n_r, n_b, m, &si)?.dof))?;
            let (binding_condition, condition_values) = twohop_condition(n_a, n_r, n_b, fd_mode, lambda);
            let fd_wins = fd > hd + DOF_TOL;
            Advice {
                scenario: cfg.scenario_name,
                recommended_mode: if fd_wins { fd_mode } else { DuplexMode::HalfDuplex },
                margin_dof: (fd - hd).abs(),
                binding_condition,
                condition_values,
                hd_dof: hd,
                fd_mode,
                fd_dof: fd,
                corner_advantage_dof: None,
            }
        }
        ScenarioSpec::TwoWay { n_a, n_b } => {
            let hd = n_a.min(n_b) as f64;
            let (fd_mode, fd) = best_fd(&fd_modes, |m| Ok(dof::twoway_fd_region(n_a, n_b, m, &si)?.max_sum()))?;
            let (binding_condition, condition_values) = if fd_mode == DuplexMode::AntennaConservedFD {
                (
                    "AC FD sum DoF <= (1-(1-λ)^2) min(N_A, N_B) < min(N_A, N_B)".to_string(),
                    format!("{} vs {}", format_float(fd), format_float(hd)),
                )
            } else {
                let th = dof::prop2_threshold(n_a, n_b);
                (
                    "λ > min(N_A, N_B) / (min(r_B, t_A) + min(r_A, t_B)) at r = floor(2N/3), γ = 1".to_string(),
                    match th {
                        Some(t) => format!("{} > {}", format_float(lambda), format_float(t)),
                        None => "no threshold below 1".into(),
                    },
                )
            };
            let fd_wins = fd > hd + DOF_TOL;
            Advice {
                scenario: cfg.scenario_name,
                recommended_mode: if fd_wins { fd_mode } else { DuplexMode::HalfDuplex },
                margin_dof: (fd - hd).abs(),
                binding_condition,
                condition_values,
                hd_dof: hd,
                fd_mode,
                fd_dof: fd,
                corner_advantage_dof: None,
            }
        }
        ScenarioSpec::TwoWayTwoHop { n_a, n_r, n_b } => {
            if n_a != n_b {
                return Err(config_err("the two-way relay comparison needs --na == --nb"));
            }
            let (_, mac_bc) = dof::twr_hd_regions(n_a, n_r)?;
            let hd = mac_bc.max_symmetric();
            let (fd_mode, fd) = best_fd(&fd_modes, |m| Ok(dof::twr_fd_region(n_a, n_r, n_b, m, &si)?.max_symmetric()))?;
            let fd_corner = dof::twr_fd_corners(n_a, n_r, n_b, fd_mode, &si)?.0.dof;
            let hd_corner = mac_bc.support(1.0, 0.0);
            let fd_wins = fd > hd + DOF_TOL;
            Advice {
                scenario: cfg.scenario_name,
                recommended_mode: if fd_wins { fd_mode } else { DuplexMode::HalfDuplex },
                margin_dof: (fd - hd).abs(),
                binding_condition: "symmetric point: FD time sharing D_AB D_BA/(D_AB + D_BA) vs HD MAC-BC".into(),
                condition_values: format!(
                    "{} vs {}; corner {} vs {}",
                    format_float(fd),
                    format_float(hd),
                    format_float(fd_corner),
                    format_float(hd_corner)
                ),
                hd_dof: hd,
                fd_mode,
                fd_dof: fd,
                corner_advantage_dof: Some(fd_corner - hd_corner),
            }
        }
    };

    let mut sink = Sink::new(cfg)?;
    let stem = format!("{}_advice", cfg.scenario_name);
    if sink.csv_output() {
        sink.csv(
            &stem,
            &[
                "scenario",
                "recommended_mode",
                "margin_dof",
                "binding_condition",
                "condition_values",
                "hd_dof",
                "fd_mode",
                "fd_dof",
                "corner_advantage_dof",
            ],
            &[vec![
                advice.scenario.into(),
                advice.recommended_mode.tag().into(),
                cell(advice.margin_dof),
                advice.binding_condition.clone(),
                advice.condition_values.clone(),
                cell(advice.hd_dof),
                advice.fd_mode.tag().into(),
                cell(advice.fd_dof),
                cell_opt(advice.corner_advantage_dof),
            ]],
        )?;
    } else {
        sink.json(&stem, serde_json::to_value(&advice).expect("advice serializes"), json!([]))?;
    }
    sink.out.summary = format!(
        "recommended: {} (margin {} DoF; {}: {})\n",
        advice.recommended_mode,
        format_float(advice.margin_dof),
        advice.binding_condition,
        advice.condition_values
    );
    Ok(sink.out)
}

// ---------------------------------------------------------------------------

/// Run one parsed command.
pub fn execute(command: &Command) -> CliResult<Outcome> {
    let cfg = resolve(command)?;
    match command {
        Command::Dof(_) => cmd_dof(&cfg),
        Command::Rate(_) => cmd_rate(&cfg),
        Command::Advise(_) => cmd_advise(&cfg),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_err(format!("{THREADS_ENV}={v} is not a positive integer")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn print_outcome(out: &Outcome) {
    print!("{}", out.summary);
    for f in &out.files {
        println!("wrote {}", display_path(f));
    }
}

fn display_path(p: &Path) -> String {
    p.display().to_string()
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match execute(&cli.command) {
        Ok(out) => {
            print_outcome(&out);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
