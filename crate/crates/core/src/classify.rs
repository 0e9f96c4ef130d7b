//! Stability decisions: the drift-sign case analysis for two-dimensional
//! chains, the closed-form ergodicity criterion, partial stability and the
//! single-orbit condition.
//!
//! Every comparison goes through [`Scalar::tolerance`]. Quantities within
//! tolerance of zero are never resolved; they produce [`Region::Boundary`]
//! or [`Outcome::Boundary`] together with a note naming the quantity.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::drift::{drifts, DriftMatrix};
use crate::params::SystemParams;
use crate::scalar::{near_zero, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    #[serde(rename = "A1_ergodic")]
    A1Ergodic,
    #[serde(rename = "A2_nonergodic")]
    A2NonErgodic,
    #[serde(rename = "B1_ergodic")]
    B1Ergodic,
    #[serde(rename = "B2_transient")]
    B2Transient,
    #[serde(rename = "C1_ergodic")]
    C1Ergodic,
    #[serde(rename = "C2_transient")]
    C2Transient,
    #[serde(rename = "D_transient")]
    DTransient,
    Boundary,
}

impl Region {
    pub fn is_ergodic(self) -> bool {
        matches!(self, Region::A1Ergodic | Region::B1Ergodic | Region::C1Ergodic)
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::A1Ergodic => "A1_ergodic",
            Region::A2NonErgodic => "A2_nonergodic",
            Region::B1Ergodic => "B1_ergodic",
            Region::B2Transient => "B2_transient",
            Region::C1Ergodic => "C1_ergodic",
            Region::C2Transient => "C2_transient",
            Region::DTransient => "D_transient",
            Region::Boundary => "Boundary",
        }
    }

    /// The region of the chain with class labels exchanged.
    pub fn swapped(self) -> Region {
        match self {
            Region::B1Ergodic => Region::C1Ergodic,
            Region::C1Ergodic => Region::B1Ergodic,
            Region::B2Transient => Region::C2Transient,
            Region::C2Transient => Region::B2Transient,
            other => other,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OrbitStatus {
    Tight,
    Divergent,
    Unknown,
}

impl fmt::Display for OrbitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrbitStatus::Tight => "Tight",
            OrbitStatus::Divergent => "Divergent",
            OrbitStatus::Unknown => "Unknown",
        })
    }
}

/// Result of a strict inequality test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Outcome {
    Holds,
    Boundary,
    Fails,
}

impl Outcome {
    /// Decides `lhs < rhs`, treating differences within tolerance of the
    /// larger magnitude as equality.
    pub fn less<S: Scalar>(lhs: &S, rhs: &S) -> Outcome {
        let diff = rhs.clone() - lhs.clone();
        let scale = if lhs.abs() > rhs.abs() { lhs.abs() } else { rhs.abs() };
        if near_zero(&diff, &scale) {
            Outcome::Boundary
        } else if diff > S::zero() {
            Outcome::Holds
        } else {
            Outcome::Fails
        }
    }

    pub fn holds(self) -> bool {
        self == Outcome::Holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Negative,
    Zero,
    Positive,
}

fn sign<S: Scalar>(value: &S, scale: &S) -> Sign {
    if near_zero(value, scale) {
        Sign::Zero
    } else if *value < S::zero() {
        Sign::Negative
    } else {
        Sign::Positive
    }
}

/// The two drift-product discriminants.
///
/// `d1 = M11_1 M10_2 − M11_2 M10_1` and `d2 = M11_2 M01_1 − M11_1 M01_2`.
pub fn discriminants<S: Scalar>(dm: &DriftMatrix<S>) -> [S; 2] {
    let [a1, a2] = dm.m11.clone();
    let d1 = a1.clone() * dm.m10[1].clone() - a2.clone() * dm.m10[0].clone();
    let d2 = a2 * dm.m01[0].clone() - a1 * dm.m01[1].clone();
    [d1, d2]
}

fn discriminant_scales<S: Scalar>(dm: &DriftMatrix<S>) -> [S; 2] {
    let [a1, a2] = dm.m11.clone();
    let s1 = (a1.clone() * dm.m10[1].clone()).abs() + (a2.clone() * dm.m10[0].clone()).abs();
    let s2 = (a2 * dm.m01[0].clone()).abs() + (a1 * dm.m01[1].clone()).abs();
    [s1, s2]
}

/// Case dispatch on the interior drift signs and the discriminants, with
/// the reason for any [`Region::Boundary`] result.
pub fn classify_with_notes<S: Scalar>(dm: &DriftMatrix<S>) -> (Region, Vec<String>) {
    let scale = [&dm.m01, &dm.m10, &dm.m11]
        .into_iter()
        .flatten()
        .fold(S::zero(), |acc, v| if v.abs() > acc { v.abs() } else { acc });
    let s1 = sign(&dm.m11[0], &scale);
    let s2 = sign(&dm.m11[1], &scale);
    let [d1, d2] = discriminants(dm);
    let [sc1, sc2] = discriminant_scales(dm);
    let d1 = sign(&d1, &sc1);
    let d2 = sign(&d2, &sc2);

    let mut notes = Vec::new();
    if s1 == Sign::Zero {
        notes.push("interior drift of orbit 1 is zero".to_string());
    }
    if s2 == Sign::Zero {
        notes.push("interior drift of orbit 2 is zero".to_string());
    }
    if !notes.is_empty() {
        return (Region::Boundary, notes);
    }
    use Sign::*;
    let region = match (s1, s2) {
        (Negative, Negative) => match (d1, d2) {
            (Zero, _) | (_, Zero) => None,
            (Negative, Negative) => Some(Region::A1Ergodic),
            _ => Some(Region::A2NonErgodic),
        },
        (Positive, Negative) => match d1 {
            Negative => Some(Region::B1Ergodic),
            Positive => Some(Region::B2Transient),
            Zero => None,
        },
        (Negative, Positive) => match d2 {
            Negative => Some(Region::C1Ergodic),
            Positive => Some(Region::C2Transient),
            Zero => None,
        },
        _ => Some(Region::DTransient),
    };
    match region {
        Some(r) => (r, notes),
        None => {
            if d1 == Zero && s2 == Negative {
                notes.push("discriminant M11_1*M10_2 - M11_2*M10_1 is zero".to_string());
            }
            if d2 == Zero && s1 == Negative {
                notes.push("discriminant M11_2*M01_1 - M11_1*M01_2 is zero".to_string());
            }
            (Region::Boundary, notes)
        }
    }
}

pub fn classify_theorem_a<S: Scalar>(dm: &DriftMatrix<S>) -> Region {
    classify_with_notes(dm).0
}

/// `b1 ρ1 + b2 ρ2 < min_k α_k / (α_k + λ_k)`.
pub fn stability_margin<S: Scalar>(p: &SystemParams<S>) -> Outcome {
    let load = p.load_coefficients();
    let lhs = p.balk1.clone() * load.rho1 + p.balk2.clone() * load.rho2;
    let t1 = p.alpha1.clone() / (p.alpha1.clone() + p.lambda1.clone());
    let t2 = p.alpha2.clone() / (p.alpha2.clone() + p.lambda2.clone());
    let rhs = if t1 < t2 { t1 } else { t2 };
    Outcome::less(&lhs, &rhs)
}

pub fn stability_criterion<S: Scalar>(p: &SystemParams<S>) -> bool {
    stability_margin(p).holds()
}

/// Tightness of orbit 1 in the associated single-orbit system, in which
/// orbit 2 never empties: `b1 ρ1 (ρ + ρ̂) < ρ̂1`.
pub fn single_orbit_stable<S: Scalar>(p: &SystemParams<S>) -> Outcome {
    let load = p.load_coefficients();
    let lhs = p.balk1.clone() * load.rho1 * (load.rho + load.rho_hat);
    Outcome::less(&lhs, &load.rho_hat1)
}

/// Busy fraction of the associated single-orbit system with orbit 1
/// stationary. Reduces to `(ρ + ρ̂2) / (ρ2 + ρ̂2 + 1)` without balking.
fn saturated_busy_fraction<S: Scalar>(p: &SystemParams<S>) -> S {
    let load = p.load_coefficients();
    let one = S::one();
    let open = load.rho2.clone() + load.rho_hat2.clone();
    (load.rho1.clone() + open.clone()) / (one.clone() + load.rho1 * (one - p.balk1.clone()) + open)
}

/// Growth of orbit 2 against a saturated retrial stream:
/// `b2 λ2 P_B2 > α2 (1 − P_B2)`, i.e. `ρ > ρ̂2 / (ρ2 + ρ̂2)` without balking.
pub fn saturated_orbit_grows<S: Scalar>(p: &SystemParams<S>) -> Outcome {
    let busy = saturated_busy_fraction(p);
    let inflow = p.balk2.clone() * p.lambda2.clone() * busy.clone();
    let outflow = p.alpha2.clone() * (S::one() - busy);
    Outcome::less(&outflow, &inflow)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialStability {
    pub orbit1: OrbitStatus,
    pub orbit2: OrbitStatus,
    pub notes: Vec<String>,
}

/// Tight/divergent flags for the transient regions where one orbit still
/// stabilises. Outside B2 and C2 both flags are `Unknown`.
pub fn partial_stability<S: Scalar>(p: &SystemParams<S>, dm: &DriftMatrix<S>) -> PartialStability {
    match classify_theorem_a(dm) {
        Region::C2Transient => c2_flags(p),
        Region::B2Transient => {
            let mirrored = c2_flags(&p.swap_classes());
            PartialStability {
                orbit1: mirrored.orbit2,
                orbit2: mirrored.orbit1,
                notes: mirrored.notes.into_iter().map(swap_orbit_names).collect(),
            }
        }
        _ => PartialStability { orbit1: OrbitStatus::Unknown, orbit2: OrbitStatus::Unknown, notes: Vec::new() },
    }
}

fn c2_flags<S: Scalar>(p: &SystemParams<S>) -> PartialStability {
    let mut notes = Vec::new();
    let orbit1 = match single_orbit_stable(p) {
        Outcome::Holds => OrbitStatus::Tight,
        other => {
            notes.push(format!("orbit 1 tightness condition: {other:?}"));
            OrbitStatus::Unknown
        }
    };
    let orbit2 = match saturated_orbit_grows(p) {
        Outcome::Holds => OrbitStatus::Divergent,
        other => {
            notes.push(format!("orbit 2 growth condition: {other:?}"));
            OrbitStatus::Unknown
        }
    };
    let class_d = [&p.service1, &p.service2].map(|d| d.to_f64().failure_rate_class().in_class_d());
    if !(class_d[0] && class_d[1]) {
        notes.push("service distributions not both in class D; partial stability reported regardless".to_string());
    }
    PartialStability { orbit1, orbit2, notes }
}

fn swap_orbit_names(note: String) -> String {
    note.replace("orbit 1", "orbit #").replace("orbit 2", "orbit 1").replace("orbit #", "orbit 2")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("figure regions are only defined for rho < 1 (rho = {rho})")]
pub struct UndefinedRegion {
    pub rho: String,
}

/// Index 1..=8 of the region in the `(alpha1, alpha2)` map for fixed loads.
///
/// `None` marks points on a boundary and the non-ergodic case with both
/// interior drifts negative, which the map does not enumerate.
pub fn figure_region<S: Scalar>(p: &SystemParams<S>) -> Result<Option<u8>, UndefinedRegion> {
    let load = p.load_coefficients();
    let Some(star) = load.alpha_star.as_ref() else {
        return Err(UndefinedRegion { rho: load.rho.to_string() });
    };
    let below = |value: &S, cut: &S| match Outcome::less(value, cut) {
        Outcome::Holds => Some(true),
        Outcome::Fails => Some(false),
        Outcome::Boundary => None,
    };
    Ok(match classify_theorem_a(&drifts(p)) {
        Region::A1Ergodic => Some(1),
        Region::B1Ergodic => Some(2),
        Region::C1Ergodic => Some(3),
        Region::DTransient => Some(4),
        Region::B2Transient => below(&p.alpha2, &star[1]).map(|b| if b { 5 } else { 7 }),
        Region::C2Transient => below(&p.alpha1, &star[0]).map(|b| if b { 6 } else { 8 }),
        Region::A2NonErgodic | Region::Boundary => None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub region: Region,
    pub criterion_holds: bool,
    pub orbit1: OrbitStatus,
    pub orbit2: OrbitStatus,
    pub figure_region: Option<u8>,
    pub notes: Vec<String>,
}

impl StabilityVerdict {
    pub fn flags(&self) -> [OrbitStatus; 2] {
        [self.orbit1, self.orbit2]
    }
}

pub fn verdict<S: Scalar>(p: &SystemParams<S>) -> StabilityVerdict {
    let dm = drifts(p);
    let (region, mut notes) = classify_with_notes(&dm);
    let margin = stability_margin(p);
    if margin == Outcome::Boundary {
        notes.push("closed-form criterion holds with equality".to_string());
    }
    let criterion_holds = margin.holds();
    if region != Region::Boundary && margin != Outcome::Boundary && region.is_ergodic() != criterion_holds {
        notes.push(format!(
            "closed-form criterion ({criterion_holds}) disagrees with drift classification ({region}); \
             the closed form is exact only for equal joining probabilities"
        ));
    }
    let (orbit1, orbit2) = match region {
        r if r.is_ergodic() => (OrbitStatus::Tight, OrbitStatus::Tight),
        Region::DTransient => (OrbitStatus::Divergent, OrbitStatus::Divergent),
        Region::B2Transient | Region::C2Transient => {
            let partial = partial_stability(p, &dm);
            notes.extend(partial.notes);
            (partial.orbit1, partial.orbit2)
        }
        _ => (OrbitStatus::Unknown, OrbitStatus::Unknown),
    };
    let figure_region = figure_region(p).ok().flatten();
    StabilityVerdict { region, criterion_holds, orbit1, orbit2, figure_region, notes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use crate::service::ServiceDist;
    use num_rational::BigRational;

    const ROWS: [(f64, f64); 8] =
        [(10.0, 2.7), (7.0, 3.0), (12.0, 2.0), (2.0, 0.3), (2.0, 1.2), (5.0, 0.3), (2.0, 3.0), (10.0, 0.7)];

    fn row(alpha1: f64, alpha2: f64) -> SystemParams {
        SystemParams::new(
            [2.0, 0.5],
            [alpha1, alpha2],
            [ServiceDist::Exponential { rate: 4.0 }, ServiceDist::Exponential { rate: 2.0 }],
        )
    }

    fn exact(alpha1: BigRational, alpha2: BigRational) -> SystemParams<BigRational> {
        SystemParams::new(
            [ratio(2, 1), ratio(1, 2)],
            [alpha1, alpha2],
            [ServiceDist::Exponential { rate: ratio(4, 1) }, ServiceDist::Exponential { rate: ratio(2, 1) }],
        )
    }

    #[test]
    fn table_rows_regions() {
        use Region::*;
        let expected = [A1Ergodic, B1Ergodic, C1Ergodic, DTransient, B2Transient, C2Transient, B2Transient, C2Transient];
        for ((a1, a2), want) in ROWS.into_iter().zip(expected) {
            assert_eq!(classify_theorem_a(&drifts(&row(a1, a2))), want, "row ({a1}, {a2})");
        }
    }

    #[test]
    fn table_rows_figure_regions() {
        let got: Vec<_> = ROWS.iter().map(|&(a1, a2)| figure_region(&row(a1, a2)).unwrap()).collect();
        assert_eq!(got, (1..=8).map(Some).collect::<Vec<_>>());
    }

    #[test]
    fn table_rows_flags() {
        use OrbitStatus::*;
        let expected = [
            (Tight, Tight),
            (Tight, Tight),
            (Tight, Tight),
            (Divergent, Divergent),
            (Divergent, Tight),
            (Tight, Divergent),
            (Divergent, Tight),
            (Tight, Divergent),
        ];
        for ((a1, a2), want) in ROWS.into_iter().zip(expected) {
            let v = verdict(&row(a1, a2));
            assert_eq!((v.orbit1, v.orbit2), want, "row ({a1}, {a2})");
        }
    }

    #[test]
    fn criterion_examples() {
        assert!(stability_criterion(&row(10.0, 2.7)));
        assert!(!stability_criterion(&row(2.0, 0.3)));
        assert!(stability_criterion(&row(2.0, 0.3).with_balking(0.0, 0.0)));
    }

    #[test]
    fn row6_partial_despite_failed_necessary_condition() {
        let p = row(5.0, 0.3);
        assert!(p.load_coefficients().rho > p.alpha1 / (p.lambda1 + p.alpha1));
        let ps = partial_stability(&p, &drifts(&p));
        assert_eq!((ps.orbit1, ps.orbit2), (OrbitStatus::Tight, OrbitStatus::Divergent));
    }

    #[test]
    fn single_orbit_examples() {
        assert_eq!(single_orbit_stable(&row(10.0, 0.7)), Outcome::Holds);
        let mut p = row(10.0, 0.7);
        p.lambda1 = 1e-300;
        assert_eq!(single_orbit_stable(&p), Outcome::Holds);
    }

    #[test]
    fn single_orbit_equality_is_boundary() {
        // ρ1 (ρ + ρ̂) = ρ̂1 with ρ1 = 1/2, ρ2 = 1/4, ρ̂2 = 1/4: α1 = 4 ρ̂1, ρ̂1 = 1/2 (1 + ρ̂1) → ρ̂1 = 1.
        let p = exact(ratio(4, 1), ratio(1, 2));
        assert_eq!(single_orbit_stable(&p), Outcome::Boundary);
        assert_eq!(single_orbit_stable(&p.to_f64()), Outcome::Boundary);
    }

    #[test]
    fn corner_point_is_boundary() {
        let p = exact(ratio(6, 1), ratio(3, 2));
        assert_eq!(classify_theorem_a(&drifts(&p)), Region::Boundary);
        assert_eq!(figure_region(&p).unwrap(), None);
        assert_eq!(figure_region(&p.to_f64()).unwrap(), None);
    }

    #[test]
    fn heavy_load_has_no_figure_region() {
        let mut p = row(10.0, 2.7);
        p.lambda1 = 4.0;
        assert!(figure_region(&p).is_err());
        let v = verdict(&p);
        assert_eq!(v.figure_region, None);
        assert!(!v.region.is_ergodic());
    }

    #[test]
    fn exact_and_float_agree_on_rows() {
        for (a1, a2) in ROWS {
            let e = exact(
                BigRational::from_float(a1).unwrap(),
                BigRational::from_float(a2).unwrap(),
            );
            assert_eq!(classify_theorem_a(&drifts(&e)), classify_theorem_a(&drifts(&row(a1, a2))));
        }
    }

    #[test]
    fn f32_rows() {
        let p32 = SystemParams::<f32>::new(
            [2.0, 0.5],
            [10.0, 0.7],
            [ServiceDist::Exponential { rate: 4.0 }, ServiceDist::Exponential { rate: 2.0 }],
        );
        assert_eq!(classify_theorem_a(&drifts(&p32)), Region::C2Transient);
    }

    #[test]
    fn verdict_serialises_with_field_names() {
        let json = serde_json::to_value(verdict(&row(10.0, 0.7))).unwrap();
        assert_eq!(json["region"], "C2_transient");
        assert_eq!(json["orbit1"], "Tight");
        assert_eq!(json["orbit2"], "Divergent");
        assert_eq!(json["figure_region"], 8);
        assert_eq!(json["criterion_holds"], false);
    }
}
