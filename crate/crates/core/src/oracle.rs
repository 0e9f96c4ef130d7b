//! Brute-force references for the analytic results.
//!
//! * [`stationary_ctmc`]: the continuous-time chain `(N, X1, X2)` for
//!   exponential services, truncated at orbit caps, solved by sparse LU.
//! * [`EmbeddedChain`]: one-step transition probabilities between departure
//!   epochs, assembled from the join pmfs.
//! * [`mc_drift_estimate`]: Monte Carlo over a single inter-departure
//!   interval, for any service distribution.
//! * [`single_orbit_stationary`]: the departure-epoch law of orbit 1 when
//!   orbit 2 never empties.
//!
//! Truncated chains keep mass at the cap: a transition that would push an
//! orbit beyond its cap leaves it at the cap.

use std::collections::BTreeMap;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::drift::Zone;
use crate::params::SystemParams;
use crate::service::{ServiceDist, ServiceError, JOIN_PMF_TAIL};
use crate::simulate::{stream_rng, Occupancy};
use crate::stats::{mean_estimate, total_variation, Estimate};

/// Largest probability allowed on the cap levels.
pub const CAP_MASS_THRESHOLD: f64 = 1e-6;
/// Largest accepted `‖π Q‖∞`.
pub const RESIDUAL_THRESHOLD: f64 = 1e-10;

const MAX_JOIN_TERMS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{field} must be exponential for this oracle")]
    NotExponential { field: &'static str },
    #[error("probability mass {mass:e} on the cap levels exceeds {threshold:e}")]
    CapMass { mass: f64, threshold: f64 },
    #[error("caps {caps:?} cannot hold one step of joins from the origin ({needed} levels needed)")]
    CapTooSmall { caps: (u64, u64), needed: u64 },
    #[error("linear solve failed: {0}")]
    Singular(String),
    #[error("residual {residual:e} exceeds {threshold:e}")]
    Residual { residual: f64, threshold: f64 },
    #[error(transparent)]
    Service(#[from] ServiceError),
}

/// Stationary vector of a finite chain given by its off-diagonal entries
/// (rates, or one-step probabilities), with `‖π (M − diag)‖∞`.
///
/// State 0 is pinned to weight 1, its balance equation dropped, and the
/// remaining system solved by sparse LU before normalising.
pub fn solve_stationary(n: usize, entries: &[(usize, usize, f64)]) -> Result<(Vec<f64>, f64), OracleError> {
    let mut out = vec![0.0; n];
    for &(i, j, r) in entries {
        if i != j {
            out[i] += r;
        }
    }
    if n == 1 {
        return Ok((vec![1.0], 0.0));
    }
    // Balance of state j: Σ_i π_i M_ij − π_j out_j = 0, for j = 1..n.
    let mut triplets = Vec::with_capacity(entries.len() + n);
    let mut rhs = vec![0.0; n - 1];
    for &(i, j, r) in entries {
        if i == j || j == 0 {
            continue;
        }
        if i == 0 {
            rhs[j - 1] -= r;
        } else {
            triplets.push(Triplet::new(j - 1, i - 1, r));
        }
    }
    for (j, &o) in out.iter().enumerate().skip(1) {
        triplets.push(Triplet::new(j - 1, j - 1, -o));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n - 1, n - 1, &triplets)
        .map_err(|e| OracleError::Singular(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| OracleError::Singular(format!("{e:?}")))?;
    let mut b = Col::<f64>::from_fn(n - 1, |i| rhs[i]);
    lu.solve_in_place(b.as_mat_mut());

    let mut pi = Vec::with_capacity(n);
    pi.push(1.0);
    pi.extend(b.iter().copied());
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::Singular("non-finite solution".into()));
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);

    let mut balance: Vec<f64> = pi.iter().zip(&out).map(|(p, o)| -p * o).collect();
    for &(i, j, r) in entries {
        if i != j {
            balance[j] += pi[i] * r;
        }
    }
    let residual = balance.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((pi, residual))
}

fn exponential_rates(p: &SystemParams) -> Result<[f64; 2], OracleError> {
    let rate = |d: &ServiceDist, field| match *d {
        ServiceDist::Exponential { rate } => Ok(rate),
        _ => Err(OracleError::NotExponential { field }),
    };
    Ok([rate(&p.service1, "service1")?, rate(&p.service2, "service2")?])
}

/// Stationary law of the truncated continuous-time chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtmcSolution {
    pub caps: (u64, u64),
    /// Indexed by [`CtmcSolution::index`].
    pub pi: Vec<f64>,
    /// Probability of states with an orbit at its cap.
    pub cap_mass: f64,
    pub residual: f64,
    /// Service rates, used to weight departure epochs.
    pub mu: [f64; 2],
}

impl CtmcSolution {
    pub fn index(&self, n: u8, x1: u64, x2: u64) -> usize {
        ((n as u64 * (self.caps.0 + 1) + x1) * (self.caps.1 + 1) + x2) as usize
    }

    pub fn prob(&self, n: u8, x1: u64, x2: u64) -> f64 {
        self.pi[self.index(n, x1, x2)]
    }

    /// Probability that the whole system is empty.
    pub fn p0(&self) -> f64 {
        self.prob(0, 0, 0)
    }

    pub fn busy_fraction(&self) -> f64 {
        1.0 - self.level_mass(0)
    }

    fn level_mass(&self, n: u8) -> f64 {
        let len = ((self.caps.0 + 1) * (self.caps.1 + 1)) as usize;
        let start = n as usize * len;
        self.pi[start..start + len].iter().sum()
    }

    /// Law of `(X1, X2)` left behind by a departure, indexed
    /// `x1 * (cap2 + 1) + x2`. Departures leave `(x1, x2)` at rate
    /// `Σ_n π(n, x1, x2) μ_n`.
    pub fn departure_law(&self) -> Vec<f64> {
        let len = ((self.caps.0 + 1) * (self.caps.1 + 1)) as usize;
        let w: Vec<f64> = (0..len).map(|i| self.pi[len + i] * self.mu[0] + self.pi[2 * len + i] * self.mu[1]).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    /// Marginal law of `X1`.
    pub fn marginal_x1(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.caps.0 as usize + 1];
        for n in 0..3u8 {
            for x1 in 0..=self.caps.0 {
                for x2 in 0..=self.caps.1 {
                    m[x1 as usize] += self.prob(n, x1, x2);
                }
            }
        }
        m
    }

    /// Marginal law of `(N > 0, X1)`, indexed `busy * (cap1 + 1) + x1`.
    pub fn marginal_busy_x1(&self) -> Vec<f64> {
        let c1 = self.caps.0 as usize + 1;
        let mut m = vec![0.0; 2 * c1];
        for n in 0..3u8 {
            for x1 in 0..=self.caps.0 {
                for x2 in 0..=self.caps.1 {
                    m[usize::from(n > 0) * c1 + x1 as usize] += self.prob(n, x1, x2);
                }
            }
        }
        m
    }

    /// Total variation between this law and a simulated time-average
    /// occupancy on the same caps. With `binary`, the server state is
    /// reduced to idle/busy before comparing.
    pub fn occupancy_tv(&self, occ: &Occupancy, binary: bool) -> f64 {
        assert_eq!(occ.caps, self.caps, "occupancy and chain caps differ");
        let len = ((self.caps.0 + 1) * (self.caps.1 + 1)) as usize;
        let total: f64 = occ.time.iter().flatten().sum::<f64>() + occ.overflow_time;
        let sim: Vec<f64> = occ.time.iter().flatten().map(|t| t / total).collect();
        let reduce = |v: &[f64]| -> Vec<f64> {
            if !binary {
                return v.to_vec();
            }
            let mut r = v[..len].to_vec();
            r.extend((0..len).map(|i| v[len + i] + v[2 * len + i]));
            r
        };
        let (sim, exact) = (reduce(&sim), reduce(&self.pi));
        total_variation(&sim, &exact) + 0.5 * occ.overflow_time / total
    }
}

/// Solves the truncated continuous-time chain and checks cap mass and
/// residual against [`CAP_MASS_THRESHOLD`] and [`RESIDUAL_THRESHOLD`].
pub fn stationary_ctmc(p: &SystemParams, caps: (u64, u64)) -> Result<CtmcSolution, OracleError> {
    let sol = solve_ctmc(p, caps)?;
    if sol.residual > RESIDUAL_THRESHOLD {
        return Err(OracleError::Residual { residual: sol.residual, threshold: RESIDUAL_THRESHOLD });
    }
    if sol.cap_mass > CAP_MASS_THRESHOLD {
        return Err(OracleError::CapMass { mass: sol.cap_mass, threshold: CAP_MASS_THRESHOLD });
    }
    Ok(sol)
}

/// Same chain without the acceptance checks.
pub fn solve_ctmc(p: &SystemParams, caps: (u64, u64)) -> Result<CtmcSolution, OracleError> {
    let mu = exponential_rates(p)?;
    let (c1, c2) = caps;
    let idx = |n: u64, x1: u64, x2: u64| ((n * (c1 + 1) + x1) * (c2 + 1) + x2) as usize;
    let size = (3 * (c1 + 1) * (c2 + 1)) as usize;
    let mut entries = Vec::with_capacity(size * 4);
    for n in 0..3u64 {
        for x1 in 0..=c1 {
            for x2 in 0..=c2 {
                let i = idx(n, x1, x2);
                let mut add = |j: usize, r: f64| {
                    if j != i && r > 0.0 {
                        entries.push((i, j, r));
                    }
                };
                if n == 0 {
                    add(idx(1, x1, x2), p.lambda1);
                    add(idx(2, x1, x2), p.lambda2);
                    if x1 > 0 {
                        add(idx(1, x1 - 1, x2), p.alpha1);
                    }
                    if x2 > 0 {
                        add(idx(2, x1, x2 - 1), p.alpha2);
                    }
                } else {
                    add(idx(n, (x1 + 1).min(c1), x2), p.balk1 * p.lambda1);
                    add(idx(n, x1, (x2 + 1).min(c2)), p.balk2 * p.lambda2);
                    add(idx(0, x1, x2), mu[n as usize - 1]);
                }
            }
        }
    }
    let (pi, residual) = solve_stationary(size, &entries)?;
    let mut cap_mass = 0.0;
    for n in 0..3 {
        for x1 in 0..=c1 {
            for x2 in 0..=c2 {
                if x1 == c1 || x2 == c2 {
                    cap_mass += pi[idx(n, x1, x2)];
                }
            }
        }
    }
    Ok(CtmcSolution { caps, pi, cap_mass, residual, mu })
}

/// Stationary law of the constant-retrial single-class queue with
/// exponential service, from the cut equations
/// `(λ + α 1{x>0}) π(0,x) = μ π(1,x)` and `λ π(1,x) = α π(0,x+1)`.
///
/// Returns `(idle, busy)` vectors over `x = 0..=cap`.
pub fn single_class_retrial_law(lambda: f64, alpha: f64, mu: f64, cap: u64) -> (Vec<f64>, Vec<f64>) {
    let len = cap as usize + 1;
    let mut idle = vec![0.0; len];
    let mut busy = vec![0.0; len];
    idle[0] = 1.0;
    for x in 0..len {
        let out = lambda + if x > 0 { alpha } else { 0.0 };
        busy[x] = out / mu * idle[x];
        if x + 1 < len {
            idle[x + 1] = lambda / alpha * busy[x];
        }
    }
    let total: f64 = idle.iter().chain(&busy).sum();
    idle.iter_mut().chain(busy.iter_mut()).for_each(|v| *v /= total);
    (idle, busy)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

/// Join-count pmf normalised after tail truncation.
fn join_table(d: &ServiceDist, lambda: f64) -> Result<Vec<f64>, OracleError> {
    let mut table = d.join_pmf_table(lambda, JOIN_PMF_TAIL, MAX_JOIN_TERMS)?;
    let total: f64 = table.iter().sum();
    table.iter_mut().for_each(|v| *v /= total);
    Ok(table)
}

/// Departure-epoch chain of the two-orbit system, truncated at `caps`.
///
/// During one service the two classes join as independent thinned Poisson
/// streams, so the total number of joins `n` follows the join pmf of the
/// merged rate `b1 λ1 + b2 λ2` and splits binomially between the orbits.
#[derive(Debug, Clone)]
pub struct EmbeddedChain {
    pub params: SystemParams,
    pub caps: (u64, u64),
    tables: [Vec<f64>; 2],
    split: f64,
    ln_fact: Vec<f64>,
}

/// Sparse row: destination state and probability.
pub type Row = Vec<((u64, u64), f64)>;

impl EmbeddedChain {
    pub fn new(p: &SystemParams, caps: (u64, u64)) -> Result<Self, OracleError> {
        let b = [p.balk1 * p.lambda1, p.balk2 * p.lambda2];
        let merged = b[0] + b[1];
        let tables = [join_table(&p.service1, merged)?, join_table(&p.service2, merged)?];
        let needed = tables.iter().map(|t| t.len() as u64).max().unwrap_or(1);
        if caps.0.min(caps.1) < needed {
            return Err(OracleError::CapTooSmall { caps, needed });
        }
        let split = if merged > 0.0 { b[0] / merged } else { 0.5 };
        Ok(EmbeddedChain { params: p.clone(), caps, tables, split, ln_fact: ln_factorials(needed as usize) })
    }

    /// Largest number of joins during one service that the tables keep.
    pub fn max_joins(&self) -> usize {
        self.tables.iter().map(Vec::len).max().unwrap_or(1) - 1
    }

    fn binomial(&self, n: usize, i: usize) -> f64 {
        let s = self.split;
        if s <= 0.0 {
            return f64::from(i == 0);
        }
        if s >= 1.0 {
            return f64::from(i == n);
        }
        (self.ln_fact[n] - self.ln_fact[i] - self.ln_fact[n - i] + i as f64 * s.ln() + (n - i) as f64 * (1.0 - s).ln())
            .exp()
    }

    /// One-step probabilities out of `(x1, x2)`.
    pub fn row(&self, x1: u64, x2: u64) -> Row {
        let p = &self.params;
        // (weight, class served, retrial?)
        let mut choices = vec![(p.lambda1, 0usize, false), (p.lambda2, 1, false)];
        if x1 > 0 {
            choices.push((p.alpha1, 0, true));
        }
        if x2 > 0 {
            choices.push((p.alpha2, 1, true));
        }
        let total: f64 = choices.iter().map(|c| c.0).sum();
        let mut acc: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (w, class, retrial) in choices {
            let mut base = [x1, x2];
            if retrial {
                base[class] -= 1;
            }
            for (n, &pn) in self.tables[class].iter().enumerate() {
                for i in 0..=n {
                    let dest = ((base[0] + i as u64).min(self.caps.0), (base[1] + (n - i) as u64).min(self.caps.1));
                    *acc.entry(dest).or_insert(0.0) += w / total * pn * self.binomial(n, i);
                }
            }
        }
        acc.into_iter().filter(|e| e.1 > 0.0).collect()
    }

    /// `Σ (x' − x) P(x, x')` for both orbits.
    pub fn row_drift(&self, x1: u64, x2: u64) -> [f64; 2] {
        self.row(x1, x2).iter().fold([0.0, 0.0], |acc, &((y1, y2), q)| {
            [acc[0] + q * (y1 as f64 - x1 as f64), acc[1] + q * (y2 as f64 - x2 as f64)]
        })
    }

    /// `P(X_{n+1} >= y | X_n = x)` componentwise.
    pub fn upper_tail(&self, x: (u64, u64), y: (u64, u64)) -> f64 {
        self.row(x.0, x.1).iter().filter(|((a, b), _)| *a >= y.0 && *b >= y.1).map(|e| e.1).sum()
    }

    /// Stationary law over the truncated state space, indexed
    /// `x1 * (cap2 + 1) + x2`, with its cap mass and residual.
    pub fn stationary(&self) -> Result<(Vec<f64>, f64, f64), OracleError> {
        let (c1, c2) = self.caps;
        let idx = |a: u64, b: u64| (a * (c2 + 1) + b) as usize;
        let mut entries = Vec::new();
        for x1 in 0..=c1 {
            for x2 in 0..=c2 {
                for ((y1, y2), q) in self.row(x1, x2) {
                    entries.push((idx(x1, x2), idx(y1, y2), q));
                }
            }
        }
        let (pi, residual) = solve_stationary(((c1 + 1) * (c2 + 1)) as usize, &entries)?;
        let mut cap_mass = 0.0;
        for x1 in 0..=c1 {
            for x2 in 0..=c2 {
                if x1 == c1 || x2 == c2 {
                    cap_mass += pi[idx(x1, x2)];
                }
            }
        }
        Ok((pi, cap_mass, residual))
    }
}

/// Builds the departure-epoch chain; only exponential services are
/// accepted, matching the closed-form join pmfs.
pub fn embedded_transition_matrix(p: &SystemParams, caps: (u64, u64)) -> Result<EmbeddedChain, OracleError> {
    exponential_rates(p)?;
    EmbeddedChain::new(p, caps)
}

/// `(x, x̂, y)` with `x >= x̂` componentwise.
pub type Triple = ((u64, u64), (u64, u64), (u64, u64));

/// One `(x, x̂, y)` triple that broke monotonicity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub x: (u64, u64),
    pub x_hat: (u64, u64),
    pub y: (u64, u64),
    pub p_x: f64,
    pub p_x_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub checked: usize,
    pub violations: Vec<MonotonicityViolation>,
}

/// Checks `P(X1 ∈ C_y | x) >= P(X1 ∈ C_y | x̂) − 1e-10` for `x >= x̂`,
/// where `C_y` is the set of states componentwise at least `y`.
pub fn check_monotonicity(chain: &EmbeddedChain, triples: &[Triple]) -> MonotonicityReport {
    let mut violations = Vec::new();
    for &(x, x_hat, y) in triples {
        assert!(x.0 >= x_hat.0 && x.1 >= x_hat.1, "x must dominate x_hat");
        let p_x = chain.upper_tail(x, y);
        let p_x_hat = chain.upper_tail(x_hat, y);
        if p_x < p_x_hat - 1e-10 {
            violations.push(MonotonicityViolation { x, x_hat, y, p_x, p_x_hat });
        }
    }
    MonotonicityReport { checked: triples.len(), violations }
}

/// Random triples with `x̂` in `[1, span]^2`, `x − x̂` in `[0, span]^2`
/// and `y` in `[0, 2 span + max_joins]^2`.
///
/// `x̂` avoids the axes: with an empty orbit the next customer is more
/// likely to be a primary arrival of the other class, and moving `x̂`
/// off the axis can lower the upper-orthant probability, so the property
/// is checked where both orbits are active.
pub fn sample_monotonicity_triples(
    chain: &EmbeddedChain,
    count: usize,
    span: u64,
    seed: u64,
) -> Vec<Triple> {
    let mut rng = stream_rng(seed, 0);
    let reach = 2 * span + chain.max_joins() as u64;
    (0..count)
        .map(|_| {
            let x_hat = (rng.random_range(1..=span), rng.random_range(1..=span));
            let x = (x_hat.0 + rng.random_range(0..=span), x_hat.1 + rng.random_range(0..=span));
            let y = (rng.random_range(0..=reach), rng.random_range(0..=reach));
            (x, x_hat, y)
        })
        .collect()
}

/// Simulates one inter-departure interval starting in `zone` `reps` times
/// and returns the mean increment of each orbit.
///
/// The idle period is a race between primary arrivals and retrials from
/// the non-empty orbits; the winner is served for a sampled service time
/// during which orbit `k` receives `Poisson(b_k λ_k S)` new customers.
pub fn mc_drift_estimate(p: &SystemParams, zone: Zone, reps: usize, seed: u64) -> [Estimate; 2] {
    let active = zone.active();
    let weights = [
        p.lambda1,
        p.lambda2,
        if active[0] { p.alpha1 } else { 0.0 },
        if active[1] { p.alpha2 } else { 0.0 },
    ];
    let total: f64 = weights.iter().sum();
    let join = [p.balk1 * p.lambda1, p.balk2 * p.lambda2];
    let stream = match zone {
        Zone::Z01 => 0,
        Zone::Z10 => 1,
        Zone::Z11 => 2,
    };
    let mut rng = stream_rng(seed, stream);
    let mut inc = [Vec::with_capacity(reps), Vec::with_capacity(reps)];
    for _ in 0..reps {
        let mut pick = rng.random::<f64>() * total;
        let mut which = 0;
        while which < 3 && pick >= weights[which] {
            pick -= weights[which];
            which += 1;
        }
        while weights[which] == 0.0 {
            which -= 1;
        }
        let class = which % 2;
        let service = if class == 0 { &p.service1 } else { &p.service2 };
        let s = service.sample(1.0 - rng.random::<f64>());
        for k in 0..2 {
            let mean = join[k] * s;
            let joins = if mean > 0.0 { Poisson::new(mean).expect("finite mean").sample(&mut rng) } else { 0.0 };
            let leave = if which >= 2 && class == k { 1.0 } else { 0.0 };
            inc[k].push(joins - leave);
        }
    }
    [mean_estimate(&inc[0]), mean_estimate(&inc[1])]
}

/// Departure-epoch chain of orbit 1 when orbit 2 never empties.
///
/// An idle server is reached by class-1 primaries (`λ1`), class-2
/// customers (`λ2 + α2`) and, when orbit 1 is non-empty, its retrials
/// (`α1`). Class-2 customers that find the server busy are lost.
#[derive(Debug, Clone)]
pub struct SingleOrbitChain {
    pub params: SystemParams,
    pub cap: u64,
    tables: [Vec<f64>; 2],
}

impl SingleOrbitChain {
    pub fn new(p: &SystemParams, cap: u64) -> Result<Self, OracleError> {
        let rate = p.balk1 * p.lambda1;
        let tables = [join_table(&p.service1, rate)?, join_table(&p.service2, rate)?];
        let needed = tables.iter().map(|t| t.len() as u64).max().unwrap_or(1);
        if cap < needed {
            return Err(OracleError::CapTooSmall { caps: (cap, 0), needed });
        }
        Ok(SingleOrbitChain { params: p.clone(), cap, tables })
    }

    pub fn row(&self, x: u64) -> Vec<(u64, f64)> {
        let p = &self.params;
        let mut choices = vec![(p.lambda1, 0usize, false), (p.lambda2 + p.alpha2, 1, false)];
        if x > 0 {
            choices.push((p.alpha1, 0, true));
        }
        let total: f64 = choices.iter().map(|c| c.0).sum();
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for (w, class, retrial) in choices {
            let base = x - u64::from(retrial);
            for (i, &q) in self.tables[class].iter().enumerate() {
                *acc.entry((base + i as u64).min(self.cap)).or_insert(0.0) += w / total * q;
            }
        }
        acc.into_iter().collect()
    }

    pub fn row_drift(&self, x: u64) -> f64 {
        self.row(x).iter().map(|&(y, q)| q * (y as f64 - x as f64)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleOrbitLaw {
    pub pi: Vec<f64>,
    pub cap_mass: f64,
    pub residual: f64,
}

pub fn single_orbit_stationary(p: &SystemParams, cap: u64) -> Result<SingleOrbitLaw, OracleError> {
    let chain = SingleOrbitChain::new(p, cap)?;
    let mut entries = Vec::new();
    for x in 0..=cap {
        for (y, q) in chain.row(x) {
            entries.push((x as usize, y as usize, q));
        }
    }
    let (pi, residual) = solve_stationary(cap as usize + 1, &entries)?;
    if residual > RESIDUAL_THRESHOLD {
        return Err(OracleError::Residual { residual, threshold: RESIDUAL_THRESHOLD });
    }
    let cap_mass = pi[cap as usize];
    if cap_mass > CAP_MASS_THRESHOLD {
        return Err(OracleError::CapMass { mass: cap_mass, threshold: CAP_MASS_THRESHOLD });
    }
    Ok(SingleOrbitLaw { pi, cap_mass, residual })
}
