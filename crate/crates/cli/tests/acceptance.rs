//! Acceptance criteria. Runs without the libtest harness so that every
//! `criterion N: PASS|FAIL` line is printed; exits non-zero if any fails.

use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use orbitsim::classify::{classify_theorem_a, discriminants, stability_criterion, stability_margin, OrbitStatus, Outcome};
use orbitsim::drift::{auxiliary_probs, drifts, Zone};
use orbitsim::oracle::{
    check_monotonicity, embedded_transition_matrix, mc_drift_estimate, sample_monotonicity_triples,
    single_orbit_stationary, stationary_ctmc,
};
use orbitsim::service::exponential_join_pmf;
use orbitsim::simulate::{
    regenerative_stats, run_ensemble, run_trajectory, stream_rng, uniform_grid, Ensemble, Horizon, Model, SimOptions,
};
use orbitsim::stats::{mean_estimate, normalise, ols_slope, total_variation};
use orbitsim::{Params, ServiceDist};
use orbitsim_cli::commands::{reference_params, table1_rows, TABLE1_ROWS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance for two-decimal table entries.
const TABLE_TOL: f64 = 0.005 + 1e-9;
const DRIFT_SE: f64 = 3.0;
const REGEN_SE: f64 = 3.0;
const CTMC_TV: f64 = 0.02;
const THEOREM3_TV: f64 = 0.05;
const SLOPE_SE: f64 = 5.0;
const TIGHT_LEVEL: f64 = 50.0;
const BUSY_REL: f64 = 0.01;
const SEPARATION: f64 = 1e-6;

/// Seed shared by the simulation-based criteria.
const SEED: u64 = 2;

fn report(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn pareto_params(alpha1: f64, alpha2: f64) -> Params {
    Params::new(
        [2.0, 0.5],
        [alpha1, alpha2],
        [ServiceDist::Pareto { scale: 0.125, shape: 2.0 }, ServiceDist::Pareto { scale: 0.4, shape: 5.0 }],
    )
}

/// Printed rows: ratio1, ratio2, g1, g2, stable X1, stable X2.
const PRINTED: [([f64; 4], [bool; 2]); 8] = [
    ([0.83, 0.84, 3.50, 2.17], [true, true]),
    ([0.78, 0.86, 2.00, 1.17], [true, true]),
    ([0.86, 0.80, 4.50, 2.50], [true, true]),
    ([0.50, 0.38, -0.50, 0.83], [false, false]),
    ([0.50, 0.71, -1.00, 1.67], [false, true]),
    ([0.71, 0.38, 1.00, 1.33], [true, false]),
    ([0.50, 0.86, -0.50, 0.83], [false, true]),
    ([0.83, 0.58, 3.50, 2.17], [true, false]),
];

fn criterion_1_reference_table() -> bool {
    let start = Instant::now();
    let rows = table1_rows(None, SEED);
    let elapsed = start.elapsed();
    let mut mismatches = Vec::new();
    for (row, (values, flags)) in rows.iter().zip(PRINTED) {
        let computed = [row.ratio1, row.ratio2, row.g1, row.g2];
        for (name, (c, v)) in ["ratio1", "ratio2", "g1", "g2"].iter().zip(computed.iter().zip(values)) {
            if (c - v).abs() > TABLE_TOL {
                mismatches.push(format!("row {} {name}: computed {c:.4}, printed {v:.2}", row.row));
            }
        }
        if [row.stable1, row.stable2] != flags {
            mismatches.push(format!("row {} flags {:?} vs printed {flags:?}", row.row, [row.stable1, row.stable2]));
        }
    }
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(1);
    report(1, pass, &format!("runtime {elapsed:?}; mismatches: [{}]", mismatches.join("; ")));
    pass
}

fn draw(rng: &mut ChaCha8Rng) -> Params {
    let lambda = [rng.random_range(0.05..5.0), rng.random_range(0.05..5.0)];
    let rho: f64 = rng.random_range(0.02..0.98);
    let share: f64 = rng.random_range(0.02..0.98);
    let rhos = [rho * share, rho * (1.0 - share)];
    Params::new(
        lambda,
        [rng.random_range(0.01..30.0), rng.random_range(0.01..30.0)],
        [
            ServiceDist::Exponential { rate: lambda[0] / rhos[0] },
            ServiceDist::Exponential { rate: lambda[1] / rhos[1] },
        ],
    )
}

fn separated(p: &Params) -> bool {
    let dm = drifts(p);
    let [d1, d2] = discriminants(&dm);
    let s1 = (dm.m11[0] * dm.m10[1]).abs() + (dm.m11[1] * dm.m10[0]).abs();
    let s2 = (dm.m11[1] * dm.m01[0]).abs() + (dm.m11[0] * dm.m01[1]).abs();
    let s11 = dm.m11[0].abs().max(dm.m11[1].abs());
    d1.abs() > SEPARATION * s1
        && d2.abs() > SEPARATION * s2
        && dm.m11.iter().all(|m| m.abs() > SEPARATION * s11)
        && stability_margin(p) != Outcome::Boundary
}

fn criterion_2_criterion_region_equivalence() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut draws, mut agree, mut ergodic) = (0, 0, 0);
    while draws < 10_000 {
        let p = draw(&mut rng);
        if !separated(&p) {
            continue;
        }
        draws += 1;
        let region_ergodic = classify_theorem_a(&drifts(&p)).is_ergodic();
        ergodic += usize::from(region_ergodic);
        agree += usize::from(region_ergodic == stability_criterion(&p));
    }
    let elapsed = start.elapsed();
    let pass = agree == draws && elapsed < Duration::from_secs(10);
    report(2, pass, &format!("{agree}/{draws} agree ({ergodic} ergodic), runtime {elapsed:?}"));
    pass
}

fn criterion_3_drift_monte_carlo() -> bool {
    let configs = [
        ("row 1", reference_params(10.0, 2.7)),
        ("row 4", reference_params(2.0, 0.3)),
        ("row 8", reference_params(10.0, 0.7)),
        ("pareto row 1", pareto_params(10.0, 2.7)),
    ];
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for (name, p) in &configs {
        let dm = drifts(p);
        for zone in Zone::ALL {
            let est = mc_drift_estimate(p, zone, 100_000, SEED);
            for k in 0..2 {
                let z = est[k].z(dm.zone(zone)[k]);
                worst = worst.max(z.abs());
                lines.push(format!("{name} M{}_{}: z {z:+.2}", zone.label(), k + 1));
            }
        }
    }
    let pass = worst <= DRIFT_SE;
    report(3, pass, &format!("max |z| {worst:.2} over {} entries", lines.len()));
    if !pass {
        println!("{lines:#?}");
    }
    pass
}

fn criterion_4_embedded_chain() -> bool {
    let mut pmf_err: f64 = 0.0;
    for (rate, lambda) in [(4.0, 2.5), (2.0, 2.5), (4.0, 2.0), (2.0, 0.5)] {
        let d = ServiceDist::Exponential { rate };
        for i in 0..=50 {
            let quad = d.orbit_join_pmf_quadrature(lambda, i).unwrap();
            pmf_err = pmf_err.max((exponential_join_pmf(rate, lambda, i) - quad).abs());
        }
    }
    let mut drift_err: f64 = 0.0;
    let mut violations = 0;
    let mut checked = 0;
    for (a1, a2) in [TABLE1_ROWS[0], TABLE1_ROWS[3], TABLE1_ROWS[7]] {
        let p = reference_params(a1, a2);
        let dm = drifts(&p);
        let chain = embedded_transition_matrix(&p, (300, 300)).unwrap();
        for (x1, x2) in [(0, 1), (0, 25), (1, 0), (25, 0), (1, 1), (7, 40), (40, 7)] {
            let zone = Zone::of(x1, x2).unwrap();
            let got = chain.row_drift(x1, x2);
            for k in 0..2 {
                drift_err = drift_err.max((got[k] - dm.zone(zone)[k]).abs());
            }
        }
        let triples = sample_monotonicity_triples(&chain, 1000, 30, SEED);
        let rep = check_monotonicity(&chain, &triples);
        violations += rep.violations.len();
        checked += rep.checked;
    }
    let pass = pmf_err <= 1e-10 && drift_err <= 1e-8 && violations == 0 && checked >= 1000;
    report(
        4,
        pass,
        &format!("pmf err {pmf_err:.2e}, row drift err {drift_err:.2e}, {violations} violations in {checked} triples"),
    );
    pass
}

fn criterion_5_stationarity() -> bool {
    let p = reference_params(10.0, 2.7);
    let caps = (200, 200);
    let sol = stationary_ctmc(&p, caps).unwrap();
    let opts = SimOptions { departure_stride: 0, occupancy_caps: Some(caps), ..SimOptions::default() };
    let tr = run_trajectory(&p, Horizon::Departures(1_000_000), &opts, stream_rng(SEED, 0));
    let tv = sol.occupancy_tv(tr.occupancy.as_ref().unwrap(), true);

    let rs = regenerative_stats(&tr, &p);
    let tau = 1.0 / (p.lambda1 + p.lambda2);
    // P0 = Eτ / ET, with the delta-method error of Eτ / ÊT.
    let p0_hat = tau / rs.et.mean;
    let p0_z = (p0_hat - sol.p0()) / (tau * rs.et.se / rs.et.mean.powi(2));
    let wald_z = rs.wald_residual.z(0.0);
    let pi0_z = rs.pi0.z(sol.departure_law()[0]);

    let pass = tv <= CTMC_TV && p0_z.abs() <= REGEN_SE && wald_z.abs() <= REGEN_SE && pi0_z.abs() <= REGEN_SE;
    report(
        5,
        pass,
        &format!(
            "tv {tv:.4}; P0 {:.5} vs Eτ/ÊT {p0_hat:.5} (z {p0_z:+.2}); ÊT {:.4} vs Eτ·Êθ {:.4} (z {wald_z:+.2}); \
             π0 {:.5} vs 1/Êθ {:.5} (z {pi0_z:+.2}); {} cycles",
            sol.p0(),
            rs.et.mean,
            tau * rs.etheta.mean,
            sol.departure_law()[0],
            rs.pi0.mean,
            rs.cycles
        ),
    );
    pass
}

/// Per-member least-squares slope over the second half of the grid.
fn divergence_z(ens: &Ensemble, orbit: usize) -> f64 {
    let half = ens.grid.len() / 2;
    let t = &ens.grid[half..];
    let slopes: Vec<f64> = ens
        .members
        .iter()
        .map(|m| {
            let y: Vec<f64> = m[half..].iter().map(|s| if orbit == 0 { s.0 } else { s.1 } as f64).collect();
            ols_slope(t, &y).mean
        })
        .collect();
    let est = mean_estimate(&slopes);
    est.mean / est.se
}

/// Largest ensemble mean over the final quarter of the horizon.
fn late_peak(ens: &Ensemble, orbit: usize) -> f64 {
    let means = if orbit == 0 { &ens.mean_x1 } else { &ens.mean_x2 };
    means[3 * means.len() / 4..].iter().copied().fold(f64::MIN, f64::max)
}

fn criterion_6_partial_stability() -> bool {
    let grid = uniform_grid(20_000.0, 201);
    let mut pass = true;
    let mut lines = Vec::new();
    let mut divergent_means = Vec::new();
    for (label, make) in [("exp", reference_params as fn(f64, f64) -> Params), ("pareto", pareto_params)] {
        for row in 5..=8 {
            let (a1, a2) = TABLE1_ROWS[row - 1];
            let p = make(a1, a2).with_init(1000, 1000);
            let ens = run_ensemble(&p, Model::TwoOrbit, &grid, 100, SEED);
            // Rows 5 and 7 lose orbit 1; rows 6 and 8 lose orbit 2.
            let (divergent, tight) = if row % 2 == 1 { (0, 1) } else { (1, 0) };
            let z = divergence_z(&ens, divergent);
            let peak = late_peak(&ens, tight);
            let ok = z > SLOPE_SE && peak < TIGHT_LEVEL;
            pass &= ok;
            lines.push(format!("{label} row {row}: divergent X{} slope z {z:.1}, tight X{} late peak {peak:.2}", divergent + 1, tight + 1));
            if row == 6 || row == 8 {
                divergent_means.push((label, row, ens.mean_x2.clone()));
            }
        }
    }
    for label in ["exp", "pareto"] {
        let curve = |row| &divergent_means.iter().find(|d| d.0 == label && d.1 == row).unwrap().2;
        let (six, eight) = (curve(6), curve(8));
        let above = six.iter().zip(eight).skip(1).all(|(a, b)| a > b);
        pass &= above;
        lines.push(format!("{label}: row 6 X2 above row 8 X2 at every t > 0: {above}"));
    }
    report(6, pass, &lines.join("; "));
    pass
}

fn criterion_7_busy_fractions() -> bool {
    let horizon = Horizon::Departures(1_000_000);
    let opts = SimOptions { departure_stride: 0, ..SimOptions::default() };
    let row1 = run_trajectory(&reference_params(10.0, 2.7), horizon, &opts, stream_rng(SEED, 0));
    let row8_params = reference_params(10.0, 0.7);
    let row8 = run_trajectory(&row8_params, horizon, &opts, stream_rng(SEED, 1));
    let aux = auxiliary_probs(&row8_params);
    let b1 = row1.busy_fraction();
    let b8 = row8.busy_fraction();
    let ok1 = (b1 - 0.75).abs() <= BUSY_REL * 0.75;
    let ok8 = (b8 - aux.p_b2).abs() <= BUSY_REL * aux.p_b2;
    let ordered = b8 < aux.p_l;
    let pass = ok1 && ok8 && ordered;
    report(
        7,
        pass,
        &format!("row 1 busy {b1:.4} vs 0.75; row 8 busy {b8:.4} vs P_B2 {:.4}; P_L {:.4}", aux.p_b2, aux.p_l),
    );
    pass
}

fn criterion_8_single_orbit_limit() -> bool {
    let p = reference_params(10.0, 0.7);
    let n = 1_000_000;
    let law = single_orbit_stationary(&p, 2000).unwrap();
    let opts = SimOptions { departure_stride: 0, departure_histogram_from: Some(n / 2), ..SimOptions::default() };
    let tr = run_trajectory(&p, Horizon::Departures(n), &opts, stream_rng(SEED, 0));
    let hist: Vec<f64> = tr.departure_histogram.iter().map(|&c| c as f64).collect();
    let tv = total_variation(&normalise(&hist), &law.pi);
    let pass = tv <= THEOREM3_TV;
    report(8, pass, &format!("tv {tv:.4} over departures {}..{n}", n / 2));
    pass
}

fn criterion_9_balking() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut agree, mut ergodic, mut draws) = (0, 0, 0);
    while draws < 1000 {
        let mu = [rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)];
        let p = Params::new(
            [rng.random_range(0.05..5.0), rng.random_range(0.05..5.0)],
            [rng.random_range(0.01..30.0), rng.random_range(0.01..30.0)],
            [ServiceDist::Exponential { rate: mu[0] }, ServiceDist::Exponential { rate: mu[1] }],
        );
        let l = p.load_coefficients();
        let plain = (l.rho_hat1 / (l.rho1 + l.rho_hat1)).min(l.rho_hat2 / (l.rho2 + l.rho_hat2));
        if (l.rho - plain).abs() <= 1e-9 * plain {
            continue;
        }
        draws += 1;
        agree += usize::from(stability_criterion(&p.clone().with_balking(1.0, 1.0)) == (l.rho < plain));
        let none = p.with_balking(0.0, 0.0);
        let v = orbitsim::verdict(&none);
        ergodic += usize::from(stability_criterion(&none) && v.region.is_ergodic() && v.orbit1 == OrbitStatus::Tight);
    }
    let pass = agree == draws && ergodic == draws;
    report(9, pass, &format!("b=1 agrees {agree}/{draws}; b=0 ergodic {ergodic}/{draws}"));
    pass
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> bool); 9] = [
        (1, criterion_1_reference_table),
        (2, criterion_2_criterion_region_equivalence),
        (3, criterion_3_drift_monte_carlo),
        (4, criterion_4_embedded_chain),
        (5, criterion_5_stationarity),
        (6, criterion_6_partial_stability),
        (7, criterion_7_busy_fractions),
        (8, criterion_8_single_orbit_limit),
        (9, criterion_9_balking),
    ];
    let mut failed = Vec::new();
    for (n, run) in criteria {
        let pass = panic::catch_unwind(run).unwrap_or_else(|_| {
            report(n, false, "panicked");
            false
        });
        if !pass {
            failed.push(n);
        }
    }
    println!("acceptance: {} of 9 criteria pass; failing: {failed:?}", 9 - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
