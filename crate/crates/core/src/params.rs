//! Model inputs and the load coefficients derived from them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::service::ServiceDist;

/// Inputs of the two-class retrial system.
///
/// Class `k` customers arrive at rate `lambda_k`, are served according to
/// `service_k`, and when they find the server busy join orbit `k` with
/// probability `balk_k` (otherwise they leave). Orbit `k` releases its
/// head-of-line customer at constant rate `alpha_k` whenever it is
/// non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(
        serialize = "S: Scalar + Serialize, ServiceDist<S>: Serialize",
        deserialize = "S: Scalar + Deserialize<'de>, ServiceDist<S>: Deserialize<'de>"
    )
)]
pub struct SystemParams<S = f64> {
    pub lambda1: S,
    pub lambda2: S,
    pub alpha1: S,
    pub alpha2: S,
    pub service1: ServiceDist<S>,
    pub service2: ServiceDist<S>,
    #[serde(default = "one")]
    pub balk1: S,
    #[serde(default = "one")]
    pub balk2: S,
    #[serde(default, rename = "init1")]
    pub init_orbit1: u64,
    #[serde(default, rename = "init2")]
    pub init_orbit2: u64,
}

fn one<S: Scalar>() -> S {
    S::one()
}

/// One violated invariant, named by the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid parameters: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ParamError(pub Vec<Violation>);

impl<S: Scalar> SystemParams<S> {
    /// Base model (no balking, empty orbits).
    pub fn new(lambda: [S; 2], alpha: [S; 2], service: [ServiceDist<S>; 2]) -> Self {
        let [lambda1, lambda2] = lambda;
        let [alpha1, alpha2] = alpha;
        let [service1, service2] = service;
        SystemParams {
            lambda1,
            lambda2,
            alpha1,
            alpha2,
            service1,
            service2,
            balk1: S::one(),
            balk2: S::one(),
            init_orbit1: 0,
            init_orbit2: 0,
        }
    }

    pub fn with_balking(mut self, balk1: S, balk2: S) -> Self {
        self.balk1 = balk1;
        self.balk2 = balk2;
        self
    }

    pub fn with_init(mut self, orbit1: u64, orbit2: u64) -> Self {
        self.init_orbit1 = orbit1;
        self.init_orbit2 = orbit2;
        self
    }

    pub fn lambdas(&self) -> [S; 2] {
        [self.lambda1.clone(), self.lambda2.clone()]
    }

    pub fn alphas(&self) -> [S; 2] {
        [self.alpha1.clone(), self.alpha2.clone()]
    }

    pub fn balks(&self) -> [S; 2] {
        [self.balk1.clone(), self.balk2.clone()]
    }

    pub fn services(&self) -> [&ServiceDist<S>; 2] {
        [&self.service1, &self.service2]
    }

    /// Relabels class 1 as class 2 and vice versa.
    pub fn swap_classes(&self) -> Self {
        SystemParams {
            lambda1: self.lambda2.clone(),
            lambda2: self.lambda1.clone(),
            alpha1: self.alpha2.clone(),
            alpha2: self.alpha1.clone(),
            service1: self.service2.clone(),
            service2: self.service1.clone(),
            balk1: self.balk2.clone(),
            balk2: self.balk1.clone(),
            init_orbit1: self.init_orbit2,
            init_orbit2: self.init_orbit1,
        }
    }

    /// Returns the parameters unchanged if every invariant holds, otherwise
    /// every violation found.
    pub fn validate(self) -> Result<Self, ParamError> {
        let mut violations = Vec::new();
        let rates: [(&'static str, &S, &str); 4] = [
            ("lambda1", &self.lambda1, "arrival rate"),
            ("lambda2", &self.lambda2, "arrival rate"),
            ("alpha1", &self.alpha1, "retrial rate"),
            ("alpha2", &self.alpha2, "retrial rate"),
        ];
        for (field, value, what) in rates {
            if !value.is_finite_value() || *value <= S::zero() {
                violations.push(Violation { field, message: format!("{what} must be positive and finite, got {value}") });
            }
        }
        for (field, value) in [("balk1", &self.balk1), ("balk2", &self.balk2)] {
            if !value.is_finite_value() || *value < S::zero() || *value > S::one() {
                violations.push(Violation { field, message: format!("joining probability must lie in [0, 1], got {value}") });
            }
        }
        for (field, dist) in [("service1", &self.service1), ("service2", &self.service2)] {
            if let Some(message) = dist.problem() {
                violations.push(Violation { field, message });
            }
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ParamError(violations))
        }
    }

    pub fn load_coefficients(&self) -> LoadSummary<S> {
        LoadSummary::from_params(self)
    }

    pub fn to_f64(&self) -> SystemParams<f64> {
        SystemParams {
            lambda1: self.lambda1.to_f64_lossy(),
            lambda2: self.lambda2.to_f64_lossy(),
            alpha1: self.alpha1.to_f64_lossy(),
            alpha2: self.alpha2.to_f64_lossy(),
            service1: self.service1.to_f64(),
            service2: self.service2.to_f64(),
            balk1: self.balk1.to_f64_lossy(),
            balk2: self.balk2.to_f64_lossy(),
            init_orbit1: self.init_orbit1,
            init_orbit2: self.init_orbit2,
        }
    }
}

/// Straight line `alpha2 = slope * alpha1 + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Line<S = f64> {
    pub slope: S,
    pub intercept: S,
}

impl<S: Scalar> Line<S> {
    pub fn at(&self, alpha1: &S) -> S {
        self.slope.clone() * alpha1.clone() + self.intercept.clone()
    }
}

/// Load coefficients and the geometry of the stability map in the
/// `(alpha1, alpha2)` plane.
///
/// `rho_k = lambda_k / mu_k` and `rho_hat_k = alpha_k / mu_k`. The two
/// boundary lines `g1`, `g2` and their crossing point `alpha_star` only
/// exist for `rho < 1`; they are `None` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSummary<S = f64> {
    pub rho1: S,
    pub rho2: S,
    pub rho: S,
    pub rho_hat1: S,
    pub rho_hat2: S,
    pub rho_hat: S,
    pub mu1: S,
    pub mu2: S,
    pub alpha_star: Option<[S; 2]>,
    /// `alpha2 < g1(alpha1)` iff the class-1 interior drift is negative.
    pub g1: Option<Line<S>>,
    /// `alpha2 > g2(alpha1)` iff the class-2 interior drift is negative.
    pub g2: Option<Line<S>>,
}

impl<S: Scalar> LoadSummary<S> {
    pub fn from_params(p: &SystemParams<S>) -> Self {
        let mu1 = p.service1.rate();
        let mu2 = p.service2.rate();
        let rho1 = p.lambda1.clone() / mu1.clone();
        let rho2 = p.lambda2.clone() / mu2.clone();
        let rho_hat1 = p.alpha1.clone() / mu1.clone();
        let rho_hat2 = p.alpha2.clone() / mu2.clone();
        let rho = rho1.clone() + rho2.clone();
        let rho_hat = rho_hat1.clone() + rho_hat2.clone();

        let (alpha_star, g1, g2) = if rho < S::one() {
            let one = S::one();
            let factor = rho.clone() / (one.clone() - rho.clone());
            let star = [factor.clone() * p.lambda1.clone(), factor * p.lambda2.clone()];
            let ratio = mu2.clone() / mu1.clone();
            let g1 = Line {
                slope: (one.clone() - rho1.clone()) / rho1.clone() * ratio.clone(),
                intercept: -(rho.clone() * mu2.clone()),
            };
            let c2 = rho2.clone() / (one - rho2.clone());
            let g2 = Line { slope: c2.clone() * ratio, intercept: c2 * rho.clone() * mu2.clone() };
            (Some(star), Some(g1), Some(g2))
        } else {
            (None, None, None)
        };

        LoadSummary { rho1, rho2, rho, rho_hat1, rho_hat2, rho_hat, mu1, mu2, alpha_star, g1, g2 }
    }

    pub fn rhos(&self) -> [S; 2] {
        [self.rho1.clone(), self.rho2.clone()]
    }

    pub fn rho_hats(&self) -> [S; 2] {
        [self.rho_hat1.clone(), self.rho_hat2.clone()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    fn base(alpha1: f64, alpha2: f64) -> SystemParams {
        SystemParams::new(
            [2.0, 0.5],
            [alpha1, alpha2],
            [ServiceDist::Exponential { rate: 4.0 }, ServiceDist::Exponential { rate: 2.0 }],
        )
    }

    #[test]
    fn accepts_base_configuration() {
        let p = base(10.0, 2.7);
        assert_eq!(p.clone().validate().unwrap(), p);
    }

    #[test]
    fn names_each_violation() {
        let mut p = base(10.0, 2.7);
        p.lambda1 = 0.0;
        p.balk2 = 1.5;
        p.service1 = ServiceDist::Pareto { scale: 1.0, shape: 1.0 };
        let err = p.validate().unwrap_err();
        let fields: Vec<_> = err.0.iter().map(|v| v.field).collect();
        assert_eq!(fields, ["lambda1", "balk2", "service1"]);
        let text = err.to_string();
        assert!(text.contains("arrival rate must be positive"));
        assert!(text.contains("infinite mean"));
    }

    #[test]
    fn nan_rate_rejected() {
        let mut p = base(10.0, 2.7);
        p.alpha2 = f64::NAN;
        assert_eq!(p.validate().unwrap_err().0[0].field, "alpha2");
    }

    #[test]
    fn table_geometry() {
        let load = base(10.0, 2.7).load_coefficients();
        assert_eq!((load.rho1, load.rho2, load.rho), (0.5, 0.25, 0.75));
        let star = load.alpha_star.unwrap();
        assert!((star[0] - 6.0).abs() < 1e-12 && (star[1] - 1.5).abs() < 1e-12);
        assert!((load.g1.as_ref().unwrap().at(&10.0) - 3.5).abs() < 1e-12);
        assert!((load.g2.as_ref().unwrap().at(&10.0) - 13.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_load_has_no_geometry() {
        let mut p = base(10.0, 2.7);
        p.lambda1 = 4.0;
        let load = p.load_coefficients();
        assert!(load.rho >= 1.0);
        assert!(load.alpha_star.is_none() && load.g1.is_none() && load.g2.is_none());
    }

    #[test]
    fn exact_lines_meet_at_alpha_star() {
        let p = SystemParams::new(
            [ratio(2, 1), ratio(1, 2)],
            [ratio(10, 1), ratio(27, 10)],
            [ServiceDist::Exponential { rate: ratio(4, 1) }, ServiceDist::Exponential { rate: ratio(2, 1) }],
        );
        let load = p.load_coefficients();
        let star = load.alpha_star.clone().unwrap();
        assert_eq!(star, [ratio(6, 1), ratio(3, 2)]);
        assert_eq!(load.g1.unwrap().at(&star[0]), star[1]);
        assert_eq!(load.g2.unwrap().at(&star[0]), star[1]);
    }
}
