//! Service-time distributions.
//!
//! Besides sampling and moments, this module evaluates the orbit-join
//! probabilities: the chance that exactly `i` Poisson(`lambda`) arrivals
//! occur during one service,
//!
//! ```text
//! p(i) = ∫ e^{-λt} (λt)^i / i! dF(t)
//! ```
//!
//! which drive every transition of the departure-epoch chain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::quadrature::{self, QuadratureError};
use crate::scalar::Scalar;

/// Absolute error requested from the quadrature behind [`ServiceDist::orbit_join_pmf`].
pub const JOIN_PMF_TOLERANCE: f64 = 1e-12;

/// Discarded tail mass allowed when tabulating a join pmf.
pub const JOIN_PMF_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceDist<S = f64> {
    Exponential { rate: S },
    /// `P(S > t) = (scale / t)^shape` for `t >= scale`.
    Pareto { scale: S, shape: S },
    Deterministic { value: S },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("distribution has no density")]
    NoDensity,
    #[error("join pmf tail still {remaining:e} after {terms} terms")]
    TailNotReached { terms: usize, remaining: f64 },
    #[error("cannot parse service distribution {0:?}; expected exp(rate), pareto(x,beta) or det(v)")]
    Parse(String),
}

/// Failure-rate classification of a service distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class_d", rename_all = "snake_case")]
pub enum FailureRateClass {
    /// `inf r(x) > 0`.
    InClassD { inf_failure_rate: f64 },
    NotInClassD,
    /// Distributions without a density have no failure rate.
    NotApplicable,
}

impl FailureRateClass {
    pub fn in_class_d(&self) -> bool {
        matches!(self, FailureRateClass::InClassD { .. })
    }
}

impl<S: Scalar> ServiceDist<S> {
    pub fn mean(&self) -> S {
        match self {
            ServiceDist::Exponential { rate } => S::one() / rate.clone(),
            ServiceDist::Pareto { scale, shape } => scale.clone() * shape.clone() / (shape.clone() - S::one()),
            ServiceDist::Deterministic { value } => value.clone(),
        }
    }

    /// Service rate `1 / E S`.
    pub fn rate(&self) -> S {
        S::one() / self.mean()
    }

    /// Describes why the distribution is unusable, if it is.
    pub fn problem(&self) -> Option<String> {
        let positive = |v: &S| v.is_finite_value() && *v > S::zero();
        match self {
            ServiceDist::Exponential { rate } if !positive(rate) => Some("exponential rate must be positive and finite".into()),
            ServiceDist::Pareto { scale, .. } if !positive(scale) => Some("pareto scale must be positive and finite".into()),
            ServiceDist::Pareto { shape, .. } if !shape.is_finite_value() || *shape <= S::one() => {
                Some("pareto shape must exceed 1 (infinite mean otherwise)".into())
            }
            ServiceDist::Deterministic { value } if !positive(value) => {
                Some("deterministic value must be positive and finite".into())
            }
            _ => None,
        }
    }

    pub fn to_f64(&self) -> ServiceDist<f64> {
        match self {
            ServiceDist::Exponential { rate } => ServiceDist::Exponential { rate: rate.to_f64_lossy() },
            ServiceDist::Pareto { scale, shape } => ServiceDist::Pareto {
                scale: scale.to_f64_lossy(),
                shape: shape.to_f64_lossy(),
            },
            ServiceDist::Deterministic { value } => ServiceDist::Deterministic { value: value.to_f64_lossy() },
        }
    }
}

fn ln_factorial(i: u64) -> f64 {
    (2..=i).map(|k| (k as f64).ln()).sum()
}

/// `e^{-m} m^i / i!`
pub fn poisson_weight(mean: f64, i: u64) -> f64 {
    if mean <= 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    (i as f64 * mean.ln() - mean - ln_factorial(i)).exp()
}

impl ServiceDist<f64> {
    /// Inverse-CDF transform of `u` in `(0, 1]`.
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            ServiceDist::Exponential { rate } => -u.ln() / rate,
            ServiceDist::Pareto { scale, shape } => scale * u.powf(-1.0 / shape),
            ServiceDist::Deterministic { value } => value,
        }
    }

    pub fn density(&self, t: f64) -> Option<f64> {
        match *self {
            ServiceDist::Exponential { rate } => Some(if t < 0.0 { 0.0 } else { rate * (-rate * t).exp() }),
            ServiceDist::Pareto { scale, shape } => {
                Some(if t < scale { 0.0 } else { shape / scale * (scale / t).powf(shape + 1.0) })
            }
            ServiceDist::Deterministic { .. } => None,
        }
    }

    pub fn failure_rate_class(&self) -> FailureRateClass {
        match *self {
            ServiceDist::Exponential { rate } => FailureRateClass::InClassD { inf_failure_rate: rate },
            // r(x) = shape / x decays to zero.
            ServiceDist::Pareto { .. } => FailureRateClass::NotInClassD,
            ServiceDist::Deterministic { .. } => FailureRateClass::NotApplicable,
        }
    }

    /// Probability that exactly `i` arrivals of a Poisson(`lambda`) stream
    /// fall inside one service time.
    ///
    /// Exponential and deterministic services use closed forms; Pareto is
    /// integrated numerically to [`JOIN_PMF_TOLERANCE`].
    pub fn orbit_join_pmf(&self, lambda: f64, i: u64) -> Result<f64, ServiceError> {
        match *self {
            ServiceDist::Exponential { rate } => Ok(exponential_join_pmf(rate, lambda, i)),
            ServiceDist::Deterministic { value } => Ok(poisson_weight(lambda * value, i)),
            ServiceDist::Pareto { .. } => self.orbit_join_pmf_quadrature(lambda, i),
        }
    }

    /// Same integral evaluated by quadrature against the density, for any
    /// absolutely continuous distribution.
    pub fn orbit_join_pmf_quadrature(&self, lambda: f64, i: u64) -> Result<f64, ServiceError> {
        if lambda <= 0.0 {
            return Ok(if i == 0 { 1.0 } else { 0.0 });
        }
        let (lower, peak, width) = match *self {
            ServiceDist::Exponential { rate } => {
                let c = lambda + rate;
                (0.0, i as f64 / c, (i as f64 + 1.0).sqrt() / c)
            }
            ServiceDist::Pareto { scale, shape } => {
                // Mode of t^(i-shape-1) e^(-lambda t), split there.
                let mode = (i as f64 - shape - 1.0) / lambda;
                (scale, mode.max(scale), ((i as f64 + 1.0).sqrt() / lambda).max(scale))
            }
            ServiceDist::Deterministic { .. } => return Err(ServiceError::NoDensity),
        };
        let integrand = |t: f64| self.density(t).unwrap_or(0.0) * poisson_weight(lambda * t, i);
        let (value, _) = quadrature::integrate_half_line(integrand, lower, peak, width, JOIN_PMF_TOLERANCE)?;
        Ok(value)
    }

    /// Tabulates the join pmf from `i = 0` until the remaining mass drops
    /// below `tail`.
    pub fn join_pmf_table(&self, lambda: f64, tail: f64, max_terms: usize) -> Result<Vec<f64>, ServiceError> {
        let mut table = Vec::new();
        let mut total = 0.0;
        for i in 0..max_terms as u64 {
            let p = self.orbit_join_pmf(lambda, i)?;
            total += p;
            table.push(p);
            if 1.0 - total < tail {
                return Ok(table);
            }
        }
        Err(ServiceError::TailNotReached { terms: max_terms, remaining: 1.0 - total })
    }
}

/// `mu lambda^i / (lambda + mu)^(i+1)`: geometric number of arrivals during
/// an exponential service.
pub fn exponential_join_pmf(rate: f64, lambda: f64, i: u64) -> f64 {
    if lambda <= 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    let total = lambda + rate;
    (rate.ln() + i as f64 * lambda.ln() - (i as f64 + 1.0) * total.ln()).exp()
}

impl<S: Scalar> fmt::Display for ServiceDist<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceDist::Exponential { rate } => write!(f, "exp({rate})"),
            ServiceDist::Pareto { scale, shape } => write!(f, "pareto({scale},{shape})"),
            ServiceDist::Deterministic { value } => write!(f, "det({value})"),
        }
    }
}

impl FromStr for ServiceDist<f64> {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ServiceError::Parse(s.to_string());
        let text = s.trim();
        let open = text.find('(').ok_or_else(bad)?;
        let inner = text[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args = inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        match (text[..open].trim().to_ascii_lowercase().as_str(), args.as_slice()) {
            ("exp", [rate]) => Ok(ServiceDist::Exponential { rate: *rate }),
            ("pareto", [scale, shape]) => Ok(ServiceDist::Pareto { scale: *scale, shape: *shape }),
            ("det", [value]) => Ok(ServiceDist::Deterministic { value: *value }),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ServiceDist<f64> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> Result<Z::Ok, Z::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ServiceDist<f64> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
