//! Mean one-step increments of the departure-epoch chain.
//!
//! Between two departures the server first idles until the next customer
//! arrives (a primary arrival of either class or a retrial from a non-empty
//! orbit), then serves it. During that service every blocked primary
//! arrival of class `k` joins orbit `k` with probability `b_k`. Writing
//! `A` for the set of non-empty orbits, the expected change of orbit `k` is
//!
//! ```text
//! M^A_k = (b_k λ_k (ρ + Σ_{j∈A} ρ̂_j) − [k∈A] α_k) / (λ1 + λ2 + Σ_{j∈A} α_j)
//! ```
//!
//! It depends on the service distributions only through their means.

use serde::Serialize;

use crate::params::SystemParams;
use crate::scalar::Scalar;

/// Which orbits are non-empty at a departure epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Zone {
    /// Orbit 1 empty, orbit 2 not.
    #[serde(rename = "01")]
    Z01,
    /// Orbit 1 non-empty, orbit 2 empty.
    #[serde(rename = "10")]
    Z10,
    #[serde(rename = "11")]
    Z11,
}

impl Zone {
    pub const ALL: [Zone; 3] = [Zone::Z01, Zone::Z10, Zone::Z11];

    pub fn active(self) -> [bool; 2] {
        match self {
            Zone::Z01 => [false, true],
            Zone::Z10 => [true, false],
            Zone::Z11 => [true, true],
        }
    }

    pub fn of(x1: u64, x2: u64) -> Option<Zone> {
        match (x1 > 0, x2 > 0) {
            (false, true) => Some(Zone::Z01),
            (true, false) => Some(Zone::Z10),
            (true, true) => Some(Zone::Z11),
            (false, false) => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Zone::Z01 => "01",
            Zone::Z10 => "10",
            Zone::Z11 => "11",
        }
    }
}

impl std::str::FromStr for Zone {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "01" => Ok(Zone::Z01),
            "10" => Ok(Zone::Z10),
            "11" => Ok(Zone::Z11),
            other => Err(format!("unknown zone {other:?}; expected 01, 10 or 11")),
        }
    }
}

/// Per-class mean increments in each zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftMatrix<S = f64> {
    pub m01: [S; 2],
    pub m10: [S; 2],
    pub m11: [S; 2],
}

impl<S: Scalar> DriftMatrix<S> {
    pub fn zone(&self, zone: Zone) -> &[S; 2] {
        match zone {
            Zone::Z01 => &self.m01,
            Zone::Z10 => &self.m10,
            Zone::Z11 => &self.m11,
        }
    }

    /// Relabels the classes.
    pub fn swapped(&self) -> Self {
        let flip = |m: &[S; 2]| [m[1].clone(), m[0].clone()];
        DriftMatrix { m01: flip(&self.m10), m10: flip(&self.m01), m11: flip(&self.m11) }
    }

    pub fn is_finite(&self) -> bool {
        Zone::ALL.iter().all(|&z| self.zone(z).iter().all(Scalar::is_finite_value))
    }

    pub fn to_f64(&self) -> DriftMatrix<f64> {
        let conv = |m: &[S; 2]| [m[0].to_f64_lossy(), m[1].to_f64_lossy()];
        DriftMatrix { m01: conv(&self.m01), m10: conv(&self.m10), m11: conv(&self.m11) }
    }
}

/// Mean increment of both orbits in `zone`.
pub fn zone_drift<S: Scalar>(p: &SystemParams<S>, zone: Zone) -> [S; 2] {
    let load = p.load_coefficients();
    let active = zone.active();
    let lambdas = p.lambdas();
    let alphas = p.alphas();
    let balks = p.balks();
    let rho_hats = load.rho_hats();

    let mut work = load.rho.clone();
    let mut rate = lambdas[0].clone() + lambdas[1].clone();
    for j in 0..2 {
        if active[j] {
            work = work + rho_hats[j].clone();
            rate = rate + alphas[j].clone();
        }
    }
    std::array::from_fn(|k| {
        let mut numer = balks[k].clone() * lambdas[k].clone() * work.clone();
        if active[k] {
            numer = numer - alphas[k].clone();
        }
        numer / rate.clone()
    })
}

pub fn drifts<S: Scalar>(p: &SystemParams<S>) -> DriftMatrix<S> {
    DriftMatrix { m01: zone_drift(p, Zone::Z01), m10: zone_drift(p, Zone::Z10), m11: zone_drift(p, Zone::Z11) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxiliaryProbs<S = f64> {
    /// Stationary probability that a class-1 customer finds the server busy
    /// in the single-orbit system where orbit 2 never empties.
    pub p_l: S,
    /// Long-run busy fraction of the server in the same regime.
    pub p_b2: S,
}

pub fn auxiliary_probs<S: Scalar>(p: &SystemParams<S>) -> AuxiliaryProbs<S> {
    let load = p.load_coefficients();
    let one = S::one();
    let busy = load.rho.clone() + load.rho_hat.clone();
    let p_l = busy.clone() / (one.clone() + busy);
    let p_b2 = (load.rho.clone() + load.rho_hat2.clone()) / (load.rho2 + load.rho_hat2 + one);
    AuxiliaryProbs { p_l, p_b2 }
}

/// Upper bound on `E ||Δ||` from any state.
///
/// At most one orbit loses a customer per step and the expected number of
/// joins is at most `(b1 λ1 + b2 λ2) max E S`, so `1 + (b1 λ1 + b2 λ2) max E S`
/// bounds the Euclidean norm of the increment.
pub fn increment_norm_bound<S: Scalar>(p: &SystemParams<S>) -> S {
    let m1 = p.service1.mean();
    let m2 = p.service2.mean();
    let max_mean = if m1 > m2 { m1 } else { m2 };
    S::one() + (p.balk1.clone() * p.lambda1.clone() + p.balk2.clone() * p.lambda2.clone()) * max_mean
}
