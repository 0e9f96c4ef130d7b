use std::collections::HashMap;

use orbitsim::classify::{single_orbit_stable, Outcome};
use orbitsim::oracle::{
    embedded_transition_matrix, single_class_retrial_law, single_orbit_stationary, solve_ctmc, stationary_ctmc,
    SingleOrbitChain,
};
use orbitsim::simulate::{regenerative_stats, run_trajectory, stream_rng, Horizon, SimOptions};
use orbitsim::stats::total_variation;
use orbitsim::{Params, ServiceDist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exp_params(lambda: [f64; 2], alpha: [f64; 2], mu: [f64; 2]) -> Params {
    Params::new(lambda, alpha, [ServiceDist::Exponential { rate: mu[0] }, ServiceDist::Exponential { rate: mu[1] }])
}

fn row(alpha1: f64, alpha2: f64) -> Params {
    exp_params([2.0, 0.5], [alpha1, alpha2], [4.0, 2.0])
}

#[test]
fn ctmc_without_class_two_is_the_single_class_queue() {
    let (lambda, alpha, mu) = (1.5, 3.0, 4.0);
    let p = exp_params([lambda, 0.0], [alpha, 1.0], [mu, 2.0]);
    let sol = solve_ctmc(&p, (150, 0)).unwrap();
    let (idle, busy) = single_class_retrial_law(lambda, alpha, mu, 150);
    for x in 0..=40u64 {
        assert!((sol.prob(0, x, 0) - idle[x as usize]).abs() < 1e-12, "idle {x}");
        assert!((sol.prob(1, x, 0) - busy[x as usize]).abs() < 1e-12, "busy {x}");
    }
    // Known closed form for the busy fraction: rho.
    assert!((sol.busy_fraction() - lambda / mu).abs() < 1e-10);
}

#[test]
fn embedded_chain_matches_ctmc_departure_law_in_light_traffic() {
    let p = row(10.0, 2.7);
    let p = Params { lambda1: 1.0, lambda2: 0.3, ..p };
    let caps = (60, 60);
    let chain = embedded_transition_matrix(&p, caps).unwrap();
    let (pi, cap_mass, residual) = chain.stationary().unwrap();
    assert!(cap_mass < 1e-8 && residual < 1e-10);
    let ctmc = stationary_ctmc(&p, caps).unwrap();
    let law = ctmc.departure_law();
    let tv = total_variation(&pi, &law);
    assert!(tv < 1e-8, "tv {tv}");
}

#[test]
fn single_orbit_drift_sign_matches_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 20 {
        let mu = [rng.random_range(1.0..6.0), rng.random_range(1.0..6.0)];
        let p = exp_params(
            [rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)],
            [rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)],
            mu,
        );
        let outcome = single_orbit_stable(&p);
        if outcome == Outcome::Boundary {
            continue;
        }
        let chain = SingleOrbitChain::new(&p, 400).unwrap();
        let drift = chain.row_drift(50);
        assert_eq!(drift < 0.0, outcome == Outcome::Holds, "{p:?}: drift {drift}");
        checked += 1;
    }
}

#[test]
fn single_orbit_chain_without_class_two_input() {
    // Tiny class-2 input: the chain reduces to the single-class retrial queue.
    let p = exp_params([1.5, 1e-9], [3.0, 1e-9], [4.0, 2.0]);
    let law = single_orbit_stationary(&p, 200).unwrap();
    let one_class = exp_params([1.5, 0.0], [3.0, 1.0], [4.0, 2.0]);
    let chain = embedded_transition_matrix(&one_class, (200, 40)).unwrap();
    let (pi, _, _) = chain.stationary().unwrap();
    let marginal: Vec<f64> = (0..=200u64).map(|x| pi[(x * 41) as usize]).collect();
    assert!(total_variation(&law.pi, &marginal) < 1e-6);
}

#[test]
fn arrivals_see_time_averages() {
    let p = row(10.0, 2.7);
    let tr = run_trajectory(&p, Horizon::Departures(400_000), &SimOptions::default(), stream_rng(21, 0));
    let seen = tr.counts.arrivals_finding_busy as f64 / tr.counts.total_arrivals() as f64;
    let se = (seen * (1.0 - seen) / tr.counts.total_arrivals() as f64).sqrt();
    // Arrivals are autocorrelated through the queue; allow a generous batch factor.
    assert!((seen - tr.busy_fraction()).abs() < 10.0 * se, "{seen} vs {}", tr.busy_fraction());
    assert!((tr.busy_fraction() - 0.75).abs() < 0.01);
}

#[test]
fn simulated_transitions_follow_embedded_rows() {
    let p = row(10.0, 2.7);
    let tr = run_trajectory(&p, Horizon::Departures(1_000_000), &SimOptions::default(), stream_rng(22, 0));
    let chain = embedded_transition_matrix(&p, (200, 200)).unwrap();
    let mut counts: HashMap<(u64, u64), HashMap<(u64, u64), u64>> = HashMap::new();
    for w in tr.departures.windows(2) {
        *counts.entry((w[0].x1, w[0].x2)).or_default().entry((w[1].x1, w[1].x2)).or_default() += 1;
    }
    for state in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1)] {
        let observed = &counts[&state];
        let n: u64 = observed.values().sum();
        assert!(n > 10_000, "state {state:?} visited {n} times");
        let mut tv = 0.0;
        for (dest, q) in chain.row(state.0, state.1) {
            let freq = observed.get(&dest).copied().unwrap_or(0) as f64 / n as f64;
            tv += 0.5 * (freq - q).abs();
            if q >= 1e-3 {
                let se = (q * (1.0 - q) / n as f64).sqrt();
                assert!((freq - q).abs() < 4.5 * se, "{state:?} -> {dest:?}: {freq} vs {q}");
            }
        }
        assert!(tv < 0.02, "{state:?}: tv {tv}");
    }
}

#[test]
fn regenerative_identities_hold_in_light_traffic() {
    let p = row(10.0, 2.7);
    let tr = run_trajectory(&p, Horizon::Departures(300_000), &SimOptions::default(), stream_rng(23, 0));
    let rs = regenerative_stats(&tr, &p);
    let tau = 1.0 / 2.5;
    assert!(rs.empty_time.covers(tau, 3.5), "{:?}", rs.empty_time);
    assert!(rs.wald_residual.covers(0.0, 3.5), "{:?}", rs.wald_residual);
    assert!((rs.pi0.mean * rs.etheta.mean - 1.0).abs() < 1e-9);
    let ctmc = stationary_ctmc(&p, (200, 200)).unwrap();
    assert!(rs.p0.covers(ctmc.p0(), 3.5), "{:?} vs {}", rs.p0, ctmc.p0());
}
