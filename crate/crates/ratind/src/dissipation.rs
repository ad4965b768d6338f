//! Dissipation calculus: the 0-homogeneous operator A, its viscous
//! regularization, the rescaled-time potential with logarithmic barrier, the
//! closed-form per-step resolvent, and Fenchel membership residuals.
//!
//! Norms and pairings are taken in H throughout.

use serde::{Deserialize, Serialize};

use crate::model::{SpaceGeometry, StateVector};
use crate::{Error, Result};

/// Extended real used for potential values; +infinity is a tagged sentinel so
/// it never enters floating arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }
}

/// Value of A(z): the H-normalization of z, or the closed unit H-ball at 0.
#[derive(Debug, Clone, PartialEq)]
pub enum ASet {
    Singleton(StateVector),
    UnitBall,
}

pub fn a_of(z: &StateVector, geom: &SpaceGeometry) -> Result<ASet> {
    let norm = geom.h_norm(z)?;
    if norm > 0.0 {
        Ok(ASet::Singleton(z.scale(1.0 / norm)))
    } else {
        Ok(ASet::UnitBall)
    }
}

/// Unique minimizer of (eps/2)||d||^2_H + ||d||_H + (g, d)_H.
///
/// Solves the per-step inclusion eps*d + A(d) + g = 0: sticks at 0 while
/// ||g||_H <= 1, otherwise moves opposite to g with speed (||g||_H - 1)/eps.
pub fn resolvent_shrink(g: &StateVector, epsilon: f64, geom: &SpaceGeometry) -> Result<StateVector> {
    debug_assert!(epsilon > 0.0);
    let norm = geom.h_norm(g)?;
    if norm <= 1.0 {
        return Ok(StateVector::zeros(g.dim()));
    }
    let speed = (norm - 1.0) / epsilon;
    Ok(g.scale(-speed / norm))
}

/// Resolvent together with the subgradient selection s in A(d) satisfying
/// eps*d + s = -g (minimal-norm selection s = -g when d = 0).
pub fn resolvent_selection(
    g: &StateVector,
    epsilon: f64,
    geom: &SpaceGeometry,
) -> Result<(StateVector, StateVector)> {
    let d = resolvent_shrink(g, epsilon, geom)?;
    let s = g.scale(-1.0).add_scaled(&d, -epsilon);
    Ok((d, s))
}

/// Psi_eps(z) = (eps/2)||z||^2_H + ||z||_H; Psi_0 is the H-norm.
pub fn psi_eps(z: &StateVector, epsilon: f64, geom: &SpaceGeometry) -> Result<f64> {
    let norm = geom.h_norm(z)?;
    Ok(0.5 * epsilon * norm * norm + norm)
}

/// F(r) = -r - ln(1-r) on [0,1), +infinity otherwise.
pub fn big_f(r: f64) -> ExtReal {
    if (0.0..1.0).contains(&r) {
        ExtReal::Finite(-r - (1.0 - r).ln())
    } else {
        ExtReal::PosInf
    }
}

/// Value of f = dF: a half line at 0, a singleton on (0,1), empty otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FSubdiff {
    /// (-infinity, 0] at r = 0.
    NonposHalfLine,
    Singleton(f64),
    Empty,
}

pub fn little_f(r: f64) -> FSubdiff {
    if r == 0.0 {
        FSubdiff::NonposHalfLine
    } else if r > 0.0 && r < 1.0 {
        FSubdiff::Singleton(1.0 / (1.0 - r) - 1.0)
    } else {
        FSubdiff::Empty
    }
}

/// Evaluation of the rescaled-time dissipation potential
/// ||z||_H + eps * F(||z||_H), with the minimal-norm subgradient selection.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationEval {
    pub value: ExtReal,
    pub subgradient_selection: Option<StateVector>,
    pub in_domain: bool,
}

pub fn psi_hat_eps(z: &StateVector, epsilon: f64, geom: &SpaceGeometry) -> Result<DissipationEval> {
    let norm = geom.h_norm(z)?;
    match big_f(norm) {
        ExtReal::PosInf => Ok(DissipationEval {
            value: ExtReal::PosInf,
            subgradient_selection: None,
            in_domain: false,
        }),
        ExtReal::Finite(f_val) => {
            let selection = if norm == 0.0 {
                // minimal selection: 0 lies in A(0) + eps * (-inf, 0] * {0}
                StateVector::zeros(z.dim())
            } else {
                let f_r = match little_f(norm) {
                    FSubdiff::Singleton(v) => v,
                    _ => unreachable!("0 < norm < 1"),
                };
                z.scale((1.0 + epsilon * f_r) / norm)
            };
            Ok(DissipationEval {
                value: ExtReal::Finite(norm + epsilon * f_val),
                subgradient_selection: Some(selection),
                in_domain: true,
            })
        }
    }
}

/// Fenchel gap ||z||_H + max(||v||_H - 1, 0) - (v, z)_H for the indicator-free
/// rate-independent potential. Zero exactly on subdifferential pairs.
pub fn fenchel_gap(z: &StateVector, v: &StateVector, geom: &SpaceGeometry) -> Result<f64> {
    let z_norm = geom.h_norm(z)?;
    if z_norm > 1.0 + 1e-9 {
        return Err(Error::OutOfDomain(format!(
            "fenchel_gap: ||z||_H = {z_norm} exceeds the unit ball"
        )));
    }
    let v_norm = geom.h_norm(v)?;
    let conj = (v_norm - 1.0).max(0.0);
    Ok(z_norm + conj - geom.h_inner(v, z)?)
}

/// Pointwise Mosco gap: (||z|| + eps F(||z||)) - ||z|| = eps * F(||z||).
pub fn mosco_gap(z: &StateVector, epsilon: f64, geom: &SpaceGeometry) -> Result<f64> {
    let norm = geom.h_norm(z)?;
    match big_f(norm) {
        ExtReal::Finite(f_val) => Ok(epsilon * f_val),
        ExtReal::PosInf => Err(Error::OutOfDomain(format!(
            "mosco_gap: ||z||_H = {norm} outside [0, 1)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit2() -> SpaceGeometry {
        SpaceGeometry::unit(2)
    }

    #[test]
    fn a_of_normalizes() {
        let g = unit2();
        match a_of(&StateVector(vec![3.0, 4.0]), &g).unwrap() {
            ASet::Singleton(s) => {
                assert!((s.0[0] - 0.6).abs() < 1e-15);
                assert!((s.0[1] - 0.8).abs() < 1e-15);
            }
            ASet::UnitBall => panic!("expected singleton"),
        }
    }

    #[test]
    fn a_of_zero_is_unit_ball() {
        let g = unit2();
        assert_eq!(a_of(&StateVector::zeros(2), &g).unwrap(), ASet::UnitBall);
    }

    #[test]
    fn resolvent_sticks_inside_ball() {
        let g = unit2();
        let d = resolvent_shrink(&StateVector(vec![0.5, 0.0]), 0.1, &g).unwrap();
        assert_eq!(d, StateVector::zeros(2));
    }

    #[test]
    fn resolvent_closed_form_examples() {
        let g = unit2();
        let d = resolvent_shrink(&StateVector(vec![2.0, 0.0]), 0.5, &g).unwrap();
        assert!((d.0[0] + 2.0).abs() < 1e-12 && d.0[1] == 0.0);
        let d = resolvent_shrink(&StateVector(vec![0.0, -3.0]), 1.0, &g).unwrap();
        assert!(d.0[0] == 0.0 && (d.0[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resolvent_selection_optimality() {
        let g = unit2();
        for (gv, eps) in [
            (StateVector(vec![2.0, 0.0]), 0.5),
            (StateVector(vec![0.3, -0.1]), 0.2),
            (StateVector(vec![-1.5, 2.5]), 1e-3),
        ] {
            let (d, s) = resolvent_selection(&gv, eps, &g).unwrap();
            // eps*d + s + g = 0
            let res = d.scale(eps).add(&s).add(&gv);
            assert!(g.h_norm(&res).unwrap() < 1e-12);
            // s is an admissible subgradient of the H-norm at d
            match a_of(&d, &g).unwrap() {
                ASet::Singleton(dir) => {
                    assert!(g.h_norm(&s.sub(&dir)).unwrap() < 1e-10);
                }
                ASet::UnitBall => {
                    assert!(g.h_norm(&s).unwrap() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rate_independent_limit_speed() {
        // eps * ||d|| -> ||g|| - 1 as eps -> 0 (algebraic identity here).
        let g = unit2();
        let gv = StateVector(vec![1.7, -0.6]);
        let excess = g.h_norm(&gv).unwrap() - 1.0;
        for eps in [1e-1, 1e-2, 1e-3] {
            let d = resolvent_shrink(&gv, eps, &g).unwrap();
            let scaled = eps * g.h_norm(&d).unwrap();
            assert!((scaled - excess).abs() / excess <= 1e-9);
        }
    }

    #[test]
    fn psi_eps_examples() {
        let g = unit2();
        assert_eq!(psi_eps(&StateVector::zeros(2), 0.7, &g).unwrap(), 0.0);
        assert!((psi_eps(&StateVector(vec![1.0, 0.0]), 0.5, &g).unwrap() - 1.25).abs() < 1e-15);
        assert!((psi_eps(&StateVector(vec![0.0, 2.0]), 0.0, &g).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn big_f_values() {
        assert_eq!(big_f(0.0), ExtReal::Finite(0.0));
        let v = big_f(0.5).finite().unwrap();
        assert!((v - (-0.5 - 0.5f64.ln())).abs() < 1e-15);
        assert!((v - 0.19314718055994531).abs() < 1e-12);
        assert_eq!(big_f(1.0), ExtReal::PosInf);
        assert_eq!(big_f(-0.1), ExtReal::PosInf);
    }

    #[test]
    fn little_f_values() {
        assert_eq!(little_f(0.0), FSubdiff::NonposHalfLine);
        match little_f(0.5) {
            FSubdiff::Singleton(v) => assert!((v - 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(little_f(1.0), FSubdiff::Empty);
    }

    #[test]
    fn psi_hat_examples() {
        let g = unit2();
        let at_zero = psi_hat_eps(&StateVector::zeros(2), 0.3, &g).unwrap();
        assert!(at_zero.in_domain);
        assert_eq!(at_zero.value, ExtReal::Finite(0.0));

        let outside = psi_hat_eps(&StateVector(vec![1.2, 0.0]), 0.3, &g).unwrap();
        assert!(!outside.in_domain);
        assert_eq!(outside.value, ExtReal::PosInf);
        assert!(outside.subgradient_selection.is_none());

        let inside = psi_hat_eps(&StateVector(vec![0.5, 0.0]), 0.2, &g).unwrap();
        let v = inside.value.finite().unwrap();
        assert!((v - (0.5 + 0.2 * big_f(0.5).finite().unwrap())).abs() < 1e-15);
        assert!((v - 0.5386294361119891).abs() < 1e-12);
    }

    #[test]
    fn fenchel_gap_examples() {
        let g = unit2();
        let gap = fenchel_gap(&StateVector::zeros(2), &StateVector(vec![0.3, 0.0]), &g).unwrap();
        assert!(gap.abs() < 1e-15);
        let gap = fenchel_gap(
            &StateVector(vec![1.0, 0.0]),
            &StateVector(vec![2.0, 0.0]),
            &g,
        )
        .unwrap();
        assert!(gap.abs() < 1e-15);
        let gap = fenchel_gap(
            &StateVector(vec![0.5, 0.0]),
            &StateVector(vec![0.0, 1.0]),
            &g,
        )
        .unwrap();
        assert!((gap - 0.5).abs() < 1e-15);
        assert!(fenchel_gap(&StateVector(vec![2.0, 0.0]), &StateVector::zeros(2), &g).is_err());
    }

    #[test]
    fn fenchel_gap_matches_directional_subdifferential_test() {
        // brute-force membership: v in dPsi(z) iff Psi(w) >= Psi(z) + (v, w-z)
        // for all w in the effective domain (the closed unit ball, matching
        // the conjugate max(||v||-1, 0)), probed on directions and radii.
        let g = unit2();
        let member = |z: &StateVector, v: &StateVector| -> bool {
            let psi = |w: &StateVector| g.h_norm(w).unwrap();
            let mut ok = true;
            for i in 0..64 {
                let th = i as f64 * std::f64::consts::TAU / 64.0;
                for r in [0.1, 0.5, 1.0] {
                    let w = StateVector(vec![r * th.cos(), r * th.sin()]);
                    let rhs = psi(z) + g.h_inner(v, &w.sub(z)).unwrap();
                    if psi(&w) < rhs - 1e-9 {
                        ok = false;
                    }
                }
            }
            ok
        };
        let cases = [
            (StateVector(vec![1.0, 0.0]), StateVector(vec![2.0, 0.0]), true),
            (StateVector::zeros(2), StateVector(vec![0.3, 0.0]), true),
            (StateVector(vec![0.5, 0.0]), StateVector(vec![0.0, 1.0]), false),
        ];
        for (z, v, expect) in cases {
            let gap = fenchel_gap(&z, &v, &g).unwrap();
            assert_eq!(gap.abs() < 1e-9, expect);
            assert_eq!(member(&z, &v), expect);
        }
    }

    #[test]
    fn mosco_gap_examples() {
        let g = unit2();
        assert_eq!(mosco_gap(&StateVector::zeros(2), 0.4, &g).unwrap(), 0.0);
        let z = StateVector(vec![0.5, 0.0]);
        let gap = mosco_gap(&z, 0.1, &g).unwrap();
        assert!((gap - 0.1 * big_f(0.5).finite().unwrap()).abs() < 1e-15);
        assert!((gap - 0.019314718055994531).abs() < 1e-12);
        // linear in eps
        assert!((mosco_gap(&z, 0.05, &g).unwrap() - gap / 2.0).abs() < 1e-15);
        assert!(mosco_gap(&StateVector(vec![1.0, 0.0]), 0.1, &g).is_err());
    }

    proptest! {
        #[test]
        fn resolvent_dissipative(gx in -5.0f64..5.0, gy in -5.0f64..5.0, eps in 1e-4f64..1.0) {
            let geom = unit2();
            let gv = StateVector(vec![gx, gy]);
            let d = resolvent_shrink(&gv, eps, &geom).unwrap();
            let pairing = geom.h_inner(&d, &gv.scale(-1.0)).unwrap();
            prop_assert!(pairing >= -1e-12);
        }

        #[test]
        fn a_of_zero_homogeneous(zx in -3.0f64..3.0, zy in -3.0f64..3.0, lam in 0.1f64..10.0) {
            let geom = unit2();
            let z = StateVector(vec![zx, zy]);
            prop_assume!(geom.h_norm(&z).unwrap() > 1e-6);
            let a1 = a_of(&z, &geom).unwrap();
            let a2 = a_of(&z.scale(lam), &geom).unwrap();
            match (a1, a2) {
                (ASet::Singleton(s1), ASet::Singleton(s2)) => {
                    prop_assert!(geom.h_norm(&s1.sub(&s2)).unwrap() < 1e-10);
                }
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn psi_hat_dominates_psi(zx in -0.7f64..0.7, zy in -0.7f64..0.7, eps in 1e-4f64..1.0) {
            let geom = unit2();
            let z = StateVector(vec![zx, zy]);
            prop_assume!(geom.h_norm(&z).unwrap() < 1.0);
            let hat = psi_hat_eps(&z, eps, &geom).unwrap().value.finite().unwrap();
            prop_assert!(hat >= geom.h_norm(&z).unwrap() - 1e-14);
        }

        #[test]
        fn fenchel_gap_nonnegative(zx in -0.7f64..0.7, zy in -0.7f64..0.7,
                                   vx in -3.0f64..3.0, vy in -3.0f64..3.0) {
            let geom = unit2();
            let z = StateVector(vec![zx, zy]);
            let v = StateVector(vec![vx, vy]);
            prop_assume!(geom.h_norm(&z).unwrap() <= 1.0);
            prop_assert!(fenchel_gap(&z, &v, &geom).unwrap() >= -1e-12);
        }
    }
}
