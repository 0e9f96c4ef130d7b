//! Discrete-event simulation.
//!
//! The state is `(N, X1, X2)`: `N` is 0 when the server is idle and `k`
//! while a class-`k` customer is in service; `X_k` is the size of orbit `k`.
//! Arrival and retrial clocks are exponential, so after every event the
//! competing clocks are simply redrawn (an exponential race). Only the
//! service completion keeps an absolute time. Retrials that find the
//! server busy change nothing and are therefore not generated.
//!
//! # Seeding
//!
//! Trajectory `i` of an experiment with root seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`. Streams are
//! independent, so ensemble members do not depend on how many others run
//! or in which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::params::SystemParams;
use crate::classify::OrbitStatus;
use crate::stats::{batch_means_slope, mean_estimate, Estimate};

/// Which system is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Model {
    #[default]
    TwoOrbit,
    /// Orbit 2 never empties: class-2 customers reach an idle server at
    /// rate `lambda2 + alpha2` and are lost when it is busy. `X2` stays 0.
    AssociatedSingleOrbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Horizon {
    Time(f64),
    Departures(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub model: Model,
    /// Record `(t, N, X1, X2)` after every `path_stride`-th event; 0 disables.
    pub path_stride: u64,
    /// Record the state left behind by every `departure_stride`-th
    /// departure; 0 disables.
    pub departure_stride: u64,
    /// Times at which `(X1, X2)` is sampled.
    pub time_grid: Vec<f64>,
    /// Accumulate time spent in each `(N, X1, X2)` with `X_k <= cap_k`.
    pub occupancy_caps: Option<(u64, u64)>,
    /// Histogram of `X1` left behind by departures with index `>= from`.
    pub departure_histogram_from: Option<u64>,
    /// Upper bound on the length of every recorded series.
    pub max_records: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            model: Model::TwoOrbit,
            path_stride: 0,
            departure_stride: 1,
            time_grid: Vec::new(),
            occupancy_caps: None,
            departure_histogram_from: None,
            max_records: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    pub t: f64,
    pub n: u8,
    pub x1: u64,
    pub x2: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeparturePoint {
    pub n: u64,
    pub t: f64,
    pub x1: u64,
    pub x2: u64,
}

/// An arrival that found the whole system empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regeneration {
    pub time: f64,
    /// Departures completed before this instant.
    pub departures_before: u64,
    /// Total time the system spent empty before this instant.
    pub empty_time_before: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub arrivals: [u64; 2],
    pub departures: [u64; 2],
    pub balked: [u64; 2],
    pub retrials: [u64; 2],
    /// Primary arrivals that found the server busy.
    pub arrivals_finding_busy: u64,
}

impl Counts {
    pub fn total_departures(&self) -> u64 {
        self.departures[0] + self.departures[1]
    }

    pub fn total_arrivals(&self) -> u64 {
        self.arrivals[0] + self.arrivals[1]
    }
}

/// Time spent in each state with `X_k <= cap_k`, indexed
/// `[n][x1 * (cap2 + 1) + x2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occupancy {
    pub caps: (u64, u64),
    pub time: [Vec<f64>; 3],
    pub overflow_time: f64,
}

impl Occupancy {
    fn new(caps: (u64, u64)) -> Self {
        let len = ((caps.0 + 1) * (caps.1 + 1)) as usize;
        Occupancy { caps, time: std::array::from_fn(|_| vec![0.0; len]), overflow_time: 0.0 }
    }

    pub fn index(&self, x1: u64, x2: u64) -> usize {
        (x1 * (self.caps.1 + 1) + x2) as usize
    }

    fn add(&mut self, n: u8, x1: u64, x2: u64, dt: f64) {
        if x1 <= self.caps.0 && x2 <= self.caps.1 {
            let i = self.index(x1, x2);
            self.time[n as usize][i] += dt;
        } else {
            self.overflow_time += dt;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub path: Vec<PathPoint>,
    pub departures: Vec<DeparturePoint>,
    pub regenerations: Vec<Regeneration>,
    /// `(X1, X2)` at each point of the requested time grid that was reached.
    pub grid: Vec<(u64, u64)>,
    pub occupancy: Option<Occupancy>,
    pub departure_histogram: Vec<u64>,
    pub counts: Counts,
    pub busy_time: f64,
    pub empty_time: f64,
    pub clock: f64,
    /// Departures that left the whole system empty.
    pub departures_leaving_empty: u64,
    pub initial: (u64, u64),
    pub final_state: PathPoint,
    /// A recorded series hit `max_records` and stopped growing.
    pub truncated: bool,
}

impl Trajectory {
    pub fn busy_fraction(&self) -> f64 {
        self.busy_time / self.clock
    }

    pub fn in_system(&self) -> u64 {
        self.final_state.x1 + self.final_state.x2 + u64::from(self.final_state.n > 0)
    }
}

/// Generator for trajectory `stream` of an experiment seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Sim<'a> {
    p: &'a SystemParams,
    opts: &'a SimOptions,
    rng: ChaCha8Rng,
    n: u8,
    x: [u64; 2],
    clock: f64,
    service_end: f64,
    events: u64,
    grid_next: usize,
    tr: Trajectory,
}

impl<'a> Sim<'a> {
    fn exp(&mut self, rate: f64) -> f64 {
        let e: f64 = self.rng.sample(Exp1);
        e / rate
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn push<T>(truncated: &mut bool, max: usize, v: &mut Vec<T>, item: T) {
        if v.len() < max {
            v.push(item);
        } else {
            *truncated = true;
        }
    }

    /// Advances the clock to `t`, accounting the current state.
    fn advance(&mut self, t: f64) {
        let dt = t - self.clock;
        while self.grid_next < self.opts.time_grid.len() && self.opts.time_grid[self.grid_next] < t {
            let point = (self.x[0], self.x[1]);
            Self::push(&mut self.tr.truncated, self.opts.max_records, &mut self.tr.grid, point);
            self.grid_next += 1;
        }
        if self.n > 0 {
            self.tr.busy_time += dt;
        } else if self.x == [0, 0] {
            self.tr.empty_time += dt;
        }
        if let Some(occ) = self.tr.occupancy.as_mut() {
            occ.add(self.n, self.x[0], self.x[1], dt);
        }
        self.clock = t;
    }

    fn start_service(&mut self, class: usize) {
        self.n = class as u8 + 1;
        let u = 1.0 - self.uniform();
        let service = if class == 0 { &self.p.service1 } else { &self.p.service2 };
        self.service_end = self.clock + service.sample(u);
    }

    fn record_event(&mut self) {
        self.events += 1;
        let stride = self.opts.path_stride;
        if stride > 0 && self.events.is_multiple_of(stride) {
            let point = PathPoint { t: self.clock, n: self.n, x1: self.x[0], x2: self.x[1] };
            Self::push(&mut self.tr.truncated, self.opts.max_records, &mut self.tr.path, point);
        }
    }

    /// Idle server: race of primary arrivals and retrials.
    fn idle_step(&mut self, limit: f64) -> bool {
        let p = self.p;
        let single = self.opts.model == Model::AssociatedSingleOrbit;
        let r1 = if self.x[0] > 0 { p.alpha1 } else { 0.0 };
        let r2 = if single || self.x[1] > 0 { p.alpha2 } else { 0.0 };
        let rates = [p.lambda1, p.lambda2, r1, r2];
        let total: f64 = rates.iter().sum();
        let t = self.clock + self.exp(total);
        if t >= limit {
            self.advance(limit);
            return false;
        }
        let empty = self.x == [0, 0];
        self.advance(t);
        let mut pick = self.uniform() * total;
        let mut which = 3;
        for (i, r) in rates.iter().enumerate() {
            if pick < *r {
                which = i;
                break;
            }
            pick -= r;
        }
        // Rounding can leave `which` on a zero-rate retrial; fall back to the
        // last positive rate.
        while rates[which] == 0.0 {
            which -= 1;
        }
        match which {
            0 | 1 => {
                self.tr.counts.arrivals[which] += 1;
                if empty && !single {
                    let reg = Regeneration {
                        time: t,
                        departures_before: self.tr.counts.total_departures(),
                        empty_time_before: self.tr.empty_time,
                    };
                    Self::push(&mut self.tr.truncated, self.opts.max_records, &mut self.tr.regenerations, reg);
                }
                self.start_service(which);
            }
            _ => {
                let class = which - 2;
                self.tr.counts.retrials[class] += 1;
                if !(single && class == 1) {
                    self.x[class] -= 1;
                }
                self.start_service(class);
            }
        }
        self.record_event();
        true
    }

    /// Busy server: primary arrivals until the service ends.
    fn busy_step(&mut self, limit: f64) -> bool {
        let p = self.p;
        let lambda = p.lambda1 + p.lambda2;
        let t = self.clock + self.exp(lambda);
        if t >= self.service_end {
            if self.service_end >= limit {
                self.advance(limit);
                return false;
            }
            let end = self.service_end;
            self.advance(end);
            self.depart();
            return true;
        }
        if t >= limit {
            self.advance(limit);
            return false;
        }
        self.advance(t);
        let class = if self.uniform() * lambda < p.lambda1 { 0 } else { 1 };
        self.tr.counts.arrivals[class] += 1;
        self.tr.counts.arrivals_finding_busy += 1;
        let lost = self.opts.model == Model::AssociatedSingleOrbit && class == 1;
        let join = if class == 0 { p.balk1 } else { p.balk2 };
        // Always draw, so the stream does not depend on the joining probability.
        let u = self.uniform();
        if !lost && u < join {
            self.x[class] += 1;
        } else {
            self.tr.counts.balked[class] += 1;
        }
        self.record_event();
        true
    }

    fn depart(&mut self) {
        let class = (self.n - 1) as usize;
        self.n = 0;
        self.tr.counts.departures[class] += 1;
        let k = self.tr.counts.total_departures();
        let single = self.opts.model == Model::AssociatedSingleOrbit;
        if self.x == [0, 0] && !single {
            self.tr.departures_leaving_empty += 1;
        }
        let stride = self.opts.departure_stride;
        if stride > 0 && k.is_multiple_of(stride) {
            let point = DeparturePoint { n: k, t: self.clock, x1: self.x[0], x2: self.x[1] };
            Self::push(&mut self.tr.truncated, self.opts.max_records, &mut self.tr.departures, point);
        }
        if let Some(from) = self.opts.departure_histogram_from {
            if k >= from {
                let x1 = self.x[0] as usize;
                if x1 < self.opts.max_records {
                    if self.tr.departure_histogram.len() <= x1 {
                        self.tr.departure_histogram.resize(x1 + 1, 0);
                    }
                    self.tr.departure_histogram[x1] += 1;
                } else {
                    self.tr.truncated = true;
                }
            }
        }
        self.record_event();
    }
}

/// Simulates one trajectory from an idle server with orbits at
/// `(init_orbit1, init_orbit2)`.
pub fn run_trajectory(p: &SystemParams, horizon: Horizon, opts: &SimOptions, rng: ChaCha8Rng) -> Trajectory {
    let initial = (p.init_orbit1, if opts.model == Model::AssociatedSingleOrbit { 0 } else { p.init_orbit2 });
    let tr = Trajectory {
        path: Vec::new(),
        departures: Vec::new(),
        regenerations: Vec::new(),
        grid: Vec::with_capacity(opts.time_grid.len()),
        occupancy: opts.occupancy_caps.map(Occupancy::new),
        departure_histogram: Vec::new(),
        counts: Counts::default(),
        busy_time: 0.0,
        empty_time: 0.0,
        clock: 0.0,
        departures_leaving_empty: 0,
        initial,
        final_state: PathPoint { t: 0.0, n: 0, x1: initial.0, x2: initial.1 },
        truncated: false,
    };
    let mut sim = Sim {
        p,
        opts,
        rng,
        n: 0,
        x: [initial.0, initial.1],
        clock: 0.0,
        service_end: f64::INFINITY,
        events: 0,
        grid_next: 0,
        tr,
    };
    if opts.path_stride > 0 {
        sim.tr.path.push(sim.tr.final_state);
    }
    let (limit, max_departures) = match horizon {
        Horizon::Time(t) => (t, u64::MAX),
        Horizon::Departures(n) => (f64::INFINITY, n),
    };
    while sim.tr.counts.total_departures() < max_departures {
        let going = if sim.n == 0 { sim.idle_step(limit) } else { sim.busy_step(limit) };
        if !going {
            break;
        }
    }
    // Grid points at or beyond the last event time.
    if let Horizon::Time(t) = horizon {
        while sim.grid_next < opts.time_grid.len() && opts.time_grid[sim.grid_next] <= t {
            let point = (sim.x[0], sim.x[1]);
            Sim::push(&mut sim.tr.truncated, opts.max_records, &mut sim.tr.grid, point);
            sim.grid_next += 1;
        }
    }
    sim.tr.clock = sim.clock;
    sim.tr.final_state = PathPoint { t: sim.clock, n: sim.n, x1: sim.x[0], x2: sim.x[1] };
    sim.tr
}

/// Pointwise ensemble averages on a common time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub grid: Vec<f64>,
    pub mean_x1: Vec<f64>,
    pub mean_x2: Vec<f64>,
    /// Per-member samples, indexed `[member][grid point]`.
    pub members: Vec<Vec<(u64, u64)>>,
}

impl Ensemble {
    /// Standard error of the ensemble mean of orbit `k` at grid point `i`.
    pub fn se(&self, k: usize, i: usize) -> f64 {
        let values: Vec<f64> =
            self.members.iter().map(|m| if k == 0 { m[i].0 as f64 } else { m[i].1 as f64 }).collect();
        if values.len() < 2 {
            return f64::NAN;
        }
        mean_estimate(&values).se
    }
}

/// Runs `m` independent trajectories over `[0, grid.last()]` (member `i`
/// uses stream `i`) and averages the orbit sizes at every grid time.
pub fn run_ensemble(p: &SystemParams, model: Model, grid: &[f64], m: usize, seed: u64) -> Ensemble {
    assert!(m >= 1, "ensemble needs at least one member");
    let end = grid.last().copied().unwrap_or(0.0);
    let opts = SimOptions { model, departure_stride: 0, time_grid: grid.to_vec(), ..SimOptions::default() };
    let members: Vec<Vec<(u64, u64)>> = (0..m as u64)
        .into_par_iter()
        .map(|i| run_trajectory(p, Horizon::Time(end), &opts, stream_rng(seed, i)).grid)
        .collect();
    let avg = |k: usize| -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                members.iter().map(|s| if k == 0 { s[i].0 } else { s[i].1 } as f64).sum::<f64>() / m as f64
            })
            .collect()
    };
    Ensemble { grid: grid.to_vec(), mean_x1: avg(0), mean_x2: avg(1), members }
}

/// Evenly spaced grid `0, end/(points-1), ..., end`.
pub fn uniform_grid(end: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| end * i as f64 / (points - 1) as f64).collect()
}

/// Cycle statistics between consecutive regeneration instants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegenerativeStats {
    pub cycles: usize,
    /// Mean cycle length.
    pub et: Estimate,
    /// Mean number of departures per cycle.
    pub etheta: Estimate,
    /// Mean empty time per cycle (its expectation is `1 / (lambda1 + lambda2)`).
    pub empty_time: Estimate,
    /// Fraction of time the system is empty, as a ratio estimator over cycles.
    pub p0: Estimate,
    /// Fraction of departures that leave the system empty.
    pub pi0: Estimate,
    /// `T_i − Eτ θ_i` per cycle; zero mean under the Wald identity.
    pub wald_residual: Estimate,
    /// Fewer than 10 complete cycles.
    pub unreliable: bool,
}

pub fn regenerative_stats(tr: &Trajectory, p: &SystemParams) -> RegenerativeStats {
    let tau = 1.0 / (p.lambda1 + p.lambda2);
    let regs = &tr.regenerations;
    let cycles = regs.len().saturating_sub(1);
    let mut t = Vec::with_capacity(cycles);
    let mut theta = Vec::with_capacity(cycles);
    let mut y = Vec::with_capacity(cycles);
    for w in regs.windows(2) {
        t.push(w[1].time - w[0].time);
        theta.push((w[1].departures_before - w[0].departures_before) as f64);
        y.push(w[1].empty_time_before - w[0].empty_time_before);
    }
    let nan = Estimate { mean: f64::NAN, se: f64::NAN };
    if cycles < 2 {
        return RegenerativeStats {
            cycles,
            et: nan,
            etheta: nan,
            empty_time: nan,
            p0: nan,
            pi0: nan,
            wald_residual: nan,
            unreliable: true,
        };
    }
    let n = cycles as f64;
    let et = mean_estimate(&t);
    let etheta = mean_estimate(&theta);
    let empty_time = mean_estimate(&y);
    let ratio = |num: &[f64], den: &[f64]| {
        let r = num.iter().sum::<f64>() / den.iter().sum::<f64>();
        let resid: Vec<f64> = num.iter().zip(den).map(|(a, b)| a - r * b).collect();
        let dbar = den.iter().sum::<f64>() / n;
        let sd = (resid.iter().map(|v| v * v).sum::<f64>() / (n - 1.0)).sqrt();
        Estimate { mean: r, se: sd / (n.sqrt() * dbar) }
    };
    let p0 = ratio(&y, &t);
    let ones = vec![1.0; cycles];
    let pi0 = ratio(&ones, &theta);
    let wald: Vec<f64> = t.iter().zip(&theta).map(|(a, b)| a - tau * b).collect();
    RegenerativeStats {
        cycles,
        et,
        etheta,
        empty_time,
        p0,
        pi0,
        wald_residual: mean_estimate(&wald),
        unreliable: cycles < 10,
    }
}

/// Blocks used by [`departure_trend`].
pub const TREND_BATCHES: usize = 20;
/// Standard errors above zero needed to call an orbit divergent.
pub const TREND_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    /// Slope of block means per block.
    pub slope: Estimate,
    pub status: OrbitStatus,
}

/// Trend test on the departure-epoch series of `orbit` (0 or 1) over the
/// second half of the run: the orbit is `Divergent` when the batch-means
/// slope exceeds [`TREND_THRESHOLD`] standard errors, `Tight` otherwise.
pub fn departure_trend(tr: &Trajectory, orbit: usize) -> Trend {
    let half = &tr.departures[tr.departures.len() / 2..];
    if half.len() < 2 * TREND_BATCHES {
        let nan = Estimate { mean: f64::NAN, se: f64::NAN };
        return Trend { slope: nan, status: OrbitStatus::Unknown };
    }
    let series: Vec<f64> = half.iter().map(|d| if orbit == 0 { d.x1 } else { d.x2 } as f64).collect();
    let slope = batch_means_slope(&series, TREND_BATCHES);
    let status = if slope.mean > TREND_THRESHOLD * slope.se { OrbitStatus::Divergent } else { OrbitStatus::Tight };
    Trend { slope, status }
}
