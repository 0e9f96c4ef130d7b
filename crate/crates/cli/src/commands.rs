use std::fmt;

use orbitsim::classify::{figure_region, verdict, OrbitStatus, Region};
use orbitsim::config::{self, ConfigError};
use orbitsim::drift::{auxiliary_probs, drifts, increment_norm_bound, Zone};
use orbitsim::oracle::{self, OracleError};
use orbitsim::service::{FailureRateClass, ServiceDist};
use orbitsim::simulate::{
    departure_trend, regenerative_stats, run_ensemble, run_trajectory, stream_rng, uniform_grid, Horizon, Model,
    SimOptions, Trend,
};
use orbitsim::stats::{normalise, total_variation};
use orbitsim::{DriftMatrix, LoadSummary, SystemParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{CapsArg, Cli, Command, Format, GridArg, HorizonArg, Series};
use crate::output::{config_hash, json_record, number, yes_no, Csv};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Usage(String),
    Oracle(OracleError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config: {e}"),
            CliError::Usage(m) => f.write_str(m),
            CliError::Oracle(e) => write!(f, "oracle: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Oracle(e)
    }
}

/// Rendered output and whether every check passed.
pub struct Output {
    pub text: String,
    pub ok: bool,
}

impl Output {
    fn ok(text: String) -> Self {
        Output { text, ok: true }
    }
}

/// Arrival and service rates of the reference regimes.
pub fn reference_params(alpha1: f64, alpha2: f64) -> SystemParams {
    SystemParams::new(
        [2.0, 0.5],
        [alpha1, alpha2],
        [ServiceDist::Exponential { rate: 4.0 }, ServiceDist::Exponential { rate: 2.0 }],
    )
}

/// `(alpha1, alpha2)` of the eight reference regimes.
pub const TABLE1_ROWS: [(f64, f64); 8] =
    [(10.0, 2.7), (7.0, 3.0), (12.0, 2.0), (2.0, 0.3), (2.0, 1.2), (5.0, 0.3), (2.0, 3.0), (10.0, 0.7)];

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let c = &cli.common;
    let load_params = || -> Result<SystemParams, CliError> {
        let path = c.config.as_ref().ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
        Ok(config::load(path)?)
    };
    let canonical = |params: Option<&SystemParams>| {
        format!(
            "{:?}\nseed={}\n{}",
            cli.command,
            c.seed,
            params.map(config::to_key_values).unwrap_or_default()
        )
    };
    match &cli.command {
        Command::Classify => {
            let p = load_params()?;
            let hash = config_hash(&canonical(Some(&p)));
            Ok(Output::ok(classify(&p, &hash, c.format.unwrap_or(Format::Json))))
        }
        Command::Simulate { horizon, series, stride } => {
            let p = load_params()?;
            let hash = config_hash(&canonical(Some(&p)));
            Ok(Output::ok(simulate(&p, &hash, *horizon, *series, *stride, c.seed, c.format.unwrap_or(Format::Csv))))
        }
        Command::Ensemble { m, horizon, points } => {
            let p = load_params()?;
            let hash = config_hash(&canonical(Some(&p)));
            let Horizon::Time(end) = horizon.0 else {
                return Err(CliError::Usage("ensemble needs a time horizon (t=T)".into()));
            };
            if *m == 0 || *points < 2 {
                return Err(CliError::Usage("ensemble needs --m >= 1 and --points >= 2".into()));
            }
            Ok(Output::ok(ensemble(&p, &hash, end, *m, *points, c.seed, c.format.unwrap_or(Format::Csv))))
        }
        Command::RegionScan { grid } => {
            let p = match &c.config {
                Some(_) => load_params()?,
                None => reference_params(1.0, 1.0),
            };
            let hash = config_hash(&canonical(Some(&p)));
            Ok(Output::ok(region_scan(&p, &hash, grid, c.format.unwrap_or(Format::Csv))))
        }
        Command::Table1 { simulate, horizon } => {
            let hash = config_hash(&canonical(None));
            let rows = table1_rows(simulate.then_some(horizon.0), c.seed);
            Ok(Output::ok(render_table1(&rows, &hash, c.format.unwrap_or(Format::Csv))))
        }
        Command::OracleCompare { caps, horizon, theorem3 } => {
            let p = load_params()?;
            let hash = config_hash(&canonical(Some(&p)));
            let checks = oracle_compare(&p, *caps, *horizon, *theorem3, c.seed);
            let ok = checks.iter().all(|c| c.status != CheckStatus::Fail);
            Ok(Output { text: render_checks(&checks, &hash, c.format.unwrap_or(Format::Json)), ok })
        }
    }
}

#[derive(Serialize)]
struct ClassifyRecord<'a> {
    params: &'a SystemParams,
    load: LoadSummary,
    drifts: DriftMatrix,
    verdict: orbitsim::StabilityVerdict,
    p_l: f64,
    p_b2: f64,
    service_classes: [FailureRateClass; 2],
    increment_norm_bound: f64,
}

fn classify(p: &SystemParams, hash: &str, format: Format) -> String {
    let aux = auxiliary_probs(p);
    let record = ClassifyRecord {
        params: p,
        load: p.load_coefficients(),
        drifts: drifts(p),
        verdict: verdict(p),
        p_l: aux.p_l,
        p_b2: aux.p_b2,
        service_classes: [p.service1.failure_rate_class(), p.service2.failure_rate_class()],
        increment_norm_bound: increment_norm_bound(p),
    };
    match format {
        Format::Json => json_record(hash, &record),
        Format::Csv => {
            let v = &record.verdict;
            let mut csv = Csv::new(&[
                "region",
                "criterion_holds",
                "orbit1",
                "orbit2",
                "figure_region",
                "rho",
                "rho_hat",
                "p_l",
                "p_b2",
                "config_hash",
            ]);
            csv.row(&[
                v.region.to_string(),
                v.criterion_holds.to_string(),
                v.orbit1.to_string(),
                v.orbit2.to_string(),
                v.figure_region.map(|r| r.to_string()).unwrap_or_default(),
                record.load.rho.to_string(),
                record.load.rho_hat.to_string(),
                record.p_l.to_string(),
                record.p_b2.to_string(),
                hash.to_string(),
            ]);
            csv.finish()
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    horizon: Horizon,
    clock: f64,
    counts: orbitsim::simulate::Counts,
    busy_fraction: f64,
    pasta_busy_fraction: f64,
    final_state: orbitsim::simulate::PathPoint,
    regenerative: Option<orbitsim::simulate::RegenerativeStats>,
    trend: [Trend; 2],
    truncated: bool,
}

fn simulate(p: &SystemParams, hash: &str, horizon: HorizonArg, series: Series, stride: u64, seed: u64, format: Format) -> String {
    let stride = stride.max(1);
    let opts = match (format, series) {
        (Format::Csv, Series::Path) => SimOptions { path_stride: stride, departure_stride: 0, ..SimOptions::default() },
        _ => SimOptions { departure_stride: stride, ..SimOptions::default() },
    };
    let tr = run_trajectory(p, horizon.0, &opts, stream_rng(seed, 0));
    match (format, series) {
        (Format::Csv, Series::Path) => {
            let mut csv = Csv::new(&["t", "N", "X1", "X2"]);
            for pt in &tr.path {
                csv.row(&[pt.t.to_string(), pt.n.to_string(), pt.x1.to_string(), pt.x2.to_string()]);
            }
            csv.finish()
        }
        (Format::Csv, Series::Departures) => {
            let mut csv = Csv::new(&["n", "D_n", "X1_n", "X2_n"]);
            for d in &tr.departures {
                csv.row(&[d.n.to_string(), d.t.to_string(), d.x1.to_string(), d.x2.to_string()]);
            }
            csv.finish()
        }
        (Format::Json, _) => {
            let arrivals = tr.counts.total_arrivals().max(1) as f64;
            let summary = SimulateSummary {
                horizon: horizon.0,
                clock: tr.clock,
                counts: tr.counts,
                busy_fraction: tr.busy_fraction(),
                pasta_busy_fraction: tr.counts.arrivals_finding_busy as f64 / arrivals,
                final_state: tr.final_state,
                regenerative: (tr.initial == (0, 0)).then(|| regenerative_stats(&tr, p)),
                trend: [departure_trend(&tr, 0), departure_trend(&tr, 1)],
                truncated: tr.truncated,
            };
            json_record(hash, &summary)
        }
    }
}

#[derive(Serialize)]
struct EnsembleRecord {
    m: usize,
    t: Vec<f64>,
    mean_x1: Vec<f64>,
    mean_x2: Vec<f64>,
    se_x1: Vec<f64>,
    se_x2: Vec<f64>,
}

fn ensemble(p: &SystemParams, hash: &str, end: f64, m: usize, points: usize, seed: u64, format: Format) -> String {
    let grid = uniform_grid(end, points);
    let ens = run_ensemble(p, Model::TwoOrbit, &grid, m, seed);
    let se = |k| (0..grid.len()).map(|i| ens.se(k, i)).collect::<Vec<_>>();
    let record = EnsembleRecord { m, t: grid.clone(), mean_x1: ens.mean_x1.clone(), mean_x2: ens.mean_x2.clone(), se_x1: se(0), se_x2: se(1) };
    match format {
        Format::Json => json_record(hash, &record),
        Format::Csv => {
            let mut csv = Csv::new(&["t", "X1", "X2", "X1_se", "X2_se"]);
            for i in 0..grid.len() {
                csv.row(&[
                    record.t[i].to_string(),
                    record.mean_x1[i].to_string(),
                    record.mean_x2[i].to_string(),
                    record.se_x1[i].to_string(),
                    record.se_x2[i].to_string(),
                ]);
            }
            csv.finish()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub alpha1: f64,
    pub alpha2: f64,
    pub region: Region,
    pub figure_region: Option<u8>,
}

pub fn scan_points(p: &SystemParams, grid: &GridArg) -> Vec<ScanPoint> {
    let mut out = Vec::new();
    for a1 in grid.0.values() {
        for a2 in grid.1.values() {
            let q = SystemParams { alpha1: a1, alpha2: a2, ..p.clone() };
            let region = orbitsim::classify::classify_theorem_a(&drifts(&q));
            out.push(ScanPoint { alpha1: a1, alpha2: a2, region, figure_region: figure_region(&q).ok().flatten() });
        }
    }
    out
}

fn region_scan(p: &SystemParams, hash: &str, grid: &GridArg, format: Format) -> String {
    let points = scan_points(p, grid);
    match format {
        Format::Json => json_record(hash, &serde_json::json!({ "points": points })),
        Format::Csv => {
            let mut csv = Csv::new(&["alpha1", "alpha2", "region", "figure_region"]);
            for s in &points {
                csv.row(&[
                    s.alpha1.to_string(),
                    s.alpha2.to_string(),
                    s.region.to_string(),
                    s.figure_region.map(|r| r.to_string()).unwrap_or_default(),
                ]);
            }
            csv.finish()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub row: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `alpha_k / (lambda_k + alpha_k)`.
    pub ratio1: f64,
    pub ratio2: f64,
    pub g1: f64,
    pub g2: f64,
    pub stable1: bool,
    pub stable2: bool,
    pub region: Region,
    pub simulated: Option<[Trend; 2]>,
}

/// Computes the reference table; with a horizon, each row is also simulated
/// from the empty state (row `i` uses stream `i`) and trend-tested.
pub fn table1_rows(horizon: Option<Horizon>, seed: u64) -> Vec<Table1Row> {
    TABLE1_ROWS
        .par_iter()
        .enumerate()
        .map(|(i, &(a1, a2))| {
            let p = reference_params(a1, a2);
            let load = p.load_coefficients();
            let v = verdict(&p);
            let simulated = horizon.map(|h| {
                let tr = run_trajectory(&p, h, &SimOptions::default(), stream_rng(seed, i as u64));
                [departure_trend(&tr, 0), departure_trend(&tr, 1)]
            });
            Table1Row {
                row: i + 1,
                alpha1: a1,
                alpha2: a2,
                ratio1: a1 / (p.lambda1 + a1),
                ratio2: a2 / (p.lambda2 + a2),
                g1: load.g1.expect("rho < 1").at(&a1),
                g2: load.g2.expect("rho < 1").at(&a1),
                stable1: v.orbit1 == OrbitStatus::Tight,
                stable2: v.orbit2 == OrbitStatus::Tight,
                region: v.region,
                simulated,
            }
        })
        .collect()
}

fn render_table1(rows: &[Table1Row], hash: &str, format: Format) -> String {
    match format {
        Format::Json => json_record(hash, &serde_json::json!({ "rows": rows })),
        Format::Csv => {
            let simulated = rows.iter().any(|r| r.simulated.is_some());
            let mut header = vec!["row", "alpha1", "alpha2", "ratio1", "ratio2", "g1", "g2", "stable1", "stable2", "region"];
            if simulated {
                header.extend(["sim_stable1", "sim_stable2"]);
            }
            let mut csv = Csv::new(&header);
            for r in rows {
                let mut fields = vec![
                    r.row.to_string(),
                    two_decimals(r.alpha1),
                    two_decimals(r.alpha2),
                    two_decimals(r.ratio1),
                    two_decimals(r.ratio2),
                    two_decimals(r.g1),
                    two_decimals(r.g2),
                    yes_no(r.stable1),
                    yes_no(r.stable2),
                    r.region.to_string(),
                ];
                if let Some(t) = r.simulated {
                    fields.extend(t.iter().map(|t| yes_no(t.status == OrbitStatus::Tight)));
                }
                csv.row(&fields);
            }
            csv.finish()
        }
    }
}

/// Rounds half away from zero, so 0.3 / 0.8 prints as 0.38 despite being
/// stored just below 0.375.
pub fn two_decimals(x: f64) -> String {
    let cents = x * 100.0;
    format!("{:.2}", (cents + cents.signum() * 1e-9).round() / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, threshold: f64, detail: String) -> Check {
        let status = if measured <= threshold { CheckStatus::Pass } else { CheckStatus::Fail };
        Check { name: name.into(), measured, threshold, status, detail }
    }

    fn skipped(name: &str, detail: &str) -> Check {
        Check { name: name.into(), measured: f64::NAN, threshold: f64::NAN, status: CheckStatus::Skipped, detail: detail.into() }
    }

    fn failed(name: &str, detail: String) -> Check {
        Check { name: name.into(), measured: f64::NAN, threshold: f64::NAN, status: CheckStatus::Fail, detail }
    }
}

/// Total-variation bound for the time-average occupancy check.
pub const CTMC_TV_THRESHOLD: f64 = 0.02;
/// Total-variation bound for the single-orbit limit check.
pub const THEOREM3_TV_THRESHOLD: f64 = 0.05;
const EMBEDDED_CAP: u64 = 400;
const SINGLE_ORBIT_CAP: u64 = 2000;

pub fn oracle_compare(p: &SystemParams, caps: CapsArg, horizon: HorizonArg, theorem3: bool, seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let dm = drifts(p);
    let exponential = matches!(p.service1, ServiceDist::Exponential { .. }) && matches!(p.service2, ServiceDist::Exponential { .. });

    for zone in Zone::ALL {
        let est = oracle::mc_drift_estimate(p, zone, 100_000, seed);
        let z = (0..2).map(|k| est[k].z(dm.zone(zone)[k]).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(
            &format!("mc_drift_{}", zone.label()),
            z,
            3.0,
            format!("max |z| over classes; estimates {:.6}±{:.6}, {:.6}±{:.6}", est[0].mean, est[0].se, est[1].mean, est[1].se),
        ));
    }

    if exponential {
        match oracle::embedded_transition_matrix(p, (EMBEDDED_CAP, EMBEDDED_CAP)) {
            Ok(chain) => {
                let mut worst: f64 = 0.0;
                for (zone, state) in [(Zone::Z01, (0, 10)), (Zone::Z10, (10, 0)), (Zone::Z11, (10, 10))] {
                    let got = chain.row_drift(state.0, state.1);
                    for k in 0..2 {
                        worst = worst.max((got[k] - dm.zone(zone)[k]).abs());
                    }
                }
                checks.push(Check::at_most("embedded_row_drift", worst, 1e-8, "max |row drift - closed form|".into()));
                let triples = oracle::sample_monotonicity_triples(&chain, 1000, 30, seed);
                let report = oracle::check_monotonicity(&chain, &triples);
                checks.push(Check::at_most(
                    "monotonicity",
                    report.violations.len() as f64,
                    0.0,
                    format!("{} triples checked", report.checked),
                ));
            }
            Err(e) => checks.push(Check::failed("embedded_row_drift", e.to_string())),
        }
    } else {
        checks.push(Check::skipped("embedded_row_drift", "needs exponential services"));
        checks.push(Check::skipped("monotonicity", "needs exponential services"));
    }

    let ergodic = verdict(p).region.is_ergodic();
    if !exponential {
        checks.push(Check::skipped("ctmc_vs_simulation", "needs exponential services"));
    } else if !ergodic {
        checks.push(Check::skipped("ctmc_vs_simulation", "system is not ergodic"));
    } else {
        checks.extend(ctmc_checks(p, caps, horizon, seed));
    }

    if theorem3 {
        checks.push(theorem3_check(p, horizon, seed));
    }
    checks
}

fn ctmc_checks(p: &SystemParams, caps: CapsArg, horizon: HorizonArg, seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let sol = match oracle::solve_ctmc(p, (caps.0, caps.1)) {
        Ok(sol) => sol,
        Err(e) => return vec![Check::failed("ctmc_solve", e.to_string())],
    };
    checks.push(Check::at_most("ctmc_residual", sol.residual, oracle::RESIDUAL_THRESHOLD, String::new()));
    checks.push(Check::at_most("ctmc_cap_mass", sol.cap_mass, oracle::CAP_MASS_THRESHOLD, format!("caps {},{}", caps.0, caps.1)));
    let opts = SimOptions { occupancy_caps: Some((caps.0, caps.1)), ..SimOptions::default() };
    let p0 = SystemParams { init_orbit1: 0, init_orbit2: 0, ..p.clone() };
    let tr = run_trajectory(&p0, horizon.0, &opts, stream_rng(seed, 0));
    let occ = tr.occupancy.as_ref().expect("occupancy requested");
    checks.push(Check::at_most(
        "ctmc_vs_simulation_tv",
        sol.occupancy_tv(occ, true),
        CTMC_TV_THRESHOLD,
        "time-average law of (busy, X1, X2)".into(),
    ));
    let rs = regenerative_stats(&tr, p);
    let tau = 1.0 / (p.lambda1 + p.lambda2);
    let p0_z = (rs.empty_time.mean - tau) / rs.empty_time.se;
    checks.push(Check::at_most("regenerative_p0", p0_z.abs(), 3.0, format!("P0 {:.6} vs Etau/ET {:.6}", rs.p0.mean, tau / rs.et.mean)));
    checks.push(Check::at_most("regenerative_wald", rs.wald_residual.z(0.0).abs(), 3.0, format!("ET {:.6} vs Etau*Etheta {:.6}", rs.et.mean, tau * rs.etheta.mean)));
    let pi0_emb = sol.departure_law()[0];
    checks.push(Check::at_most(
        "embedded_pi0",
        rs.pi0.z(pi0_emb).abs(),
        3.0,
        format!("simulated {:.6} vs chain {:.6}", rs.pi0.mean, pi0_emb),
    ));
    checks
}

fn theorem3_check(p: &SystemParams, horizon: HorizonArg, seed: u64) -> Check {
    let (q, orbit) = match verdict(p).region {
        Region::C2Transient => (p.clone(), 1),
        Region::B2Transient => (p.swap_classes(), 2),
        other => return Check::skipped("theorem3_tv", &format!("region {other} has no single-orbit limit")),
    };
    let q = SystemParams { init_orbit1: 0, init_orbit2: 0, ..q };
    let Horizon::Departures(n) = horizon.0 else {
        return Check::failed("theorem3_tv", "needs a departure horizon (n=N)".into());
    };
    let law = match oracle::single_orbit_stationary(&q, SINGLE_ORBIT_CAP) {
        Ok(law) => law,
        Err(e) => return Check::failed("theorem3_tv", e.to_string()),
    };
    let opts = SimOptions { departure_stride: 0, departure_histogram_from: Some(n / 2), ..SimOptions::default() };
    let tr = run_trajectory(&q, horizon.0, &opts, stream_rng(seed, 0));
    let hist: Vec<f64> = tr.departure_histogram.iter().map(|&c| c as f64).collect();
    let tv = total_variation(&normalise(&hist), &law.pi);
    Check::at_most("theorem3_tv", tv, THEOREM3_TV_THRESHOLD, format!("late-window law of orbit {orbit} vs single-orbit chain"))
}

fn render_checks(checks: &[Check], hash: &str, format: Format) -> String {
    match format {
        Format::Json => json_record(hash, &serde_json::json!({ "checks": checks })),
        Format::Csv => {
            let mut csv = Csv::new(&["check", "measured", "threshold", "status"]);
            for c in checks {
                let status = serde_json::to_value(c.status).expect("status serialises");
                csv.row(&[c.name.clone(), number(c.measured), number(c.threshold), status.as_str().unwrap_or("").into()]);
            }
            csv.finish()
        }
    }
}
