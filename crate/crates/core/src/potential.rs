//! Reaction profile `beta`, its primitive `Phi` and the structural
//! constants `theta1 < theta2` and `c1`.
//!
//! `Phi` vanishes on `(-inf, 0]`, equals one on `[theta2, inf)`, and its
//! half-derivative is pinched between `u / c1` and `c1 * u` on `[0, theta1]`.
//! These four facts are what every downstream bound consumes, so
//! [`certify_constants`] re-checks them on a dense grid.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::numerics;

/// Tolerance used for the equality lines of the certification
/// (`Phi = 0`, `Phi = 1`, unit mass).
pub const EQUALITY_TOL: f64 = 1e-12;

const BUMP_TABLE_INTERVALS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `beta(t) = 12 t (1 - t)^2` on `[0, 1]`.
    Polynomial,
    /// `beta(t) = K t exp(-1 / (1 - t))` on `[0, 1)`, smooth at `t = 1`.
    /// `Phi` is tabulated at knots and completed by a Gauss-Legendre partial integral.
    Bump {
        norm: f64,
        cumulative: Arc<Vec<f64>>,
    },
}

/// An admissible reaction profile together with its certified constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub name: String,
    pub theta1: f64,
    pub theta2: f64,
    pub c1: f64,
    pub support_right: f64,
    mass: f64,
    shape: Shape,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::polynomial()
    }
}

fn bump_raw(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        t * (-1.0 / (1.0 - t)).exp()
    }
}

fn bump_raw_prime(t: f64) -> f64 {
    if t < 0.0 || t >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t;
        (-1.0 / s).exp() * (1.0 - t / (s * s))
    }
}

impl PotentialSpec {
    /// Default profile `beta(t) = 12 t (1-t)^2` with
    /// `(theta1, theta2, c1) = (0.5, 1.0, 6.0)`.
    pub fn polynomial() -> Self {
        Self {
            name: "polynomial".into(),
            theta1: 0.5,
            theta2: 1.0,
            c1: 6.0,
            support_right: 1.0,
            mass: 1.0,
            shape: Shape::Polynomial,
        }
    }

    /// Smooth bump alternative `K t exp(-1/(1-t))`, normalized to unit mass.
    pub fn bump() -> Self {
        let raw_mass = numerics::integrate(bump_raw, 0.0, 1.0, 1e-15).expect("bump mass");
        let norm = 1.0 / raw_mass;
        let n = BUMP_TABLE_INTERVALS;
        let step = 1.0 / n as f64;
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 0..n {
            let a = k as f64 * step;
            acc += norm
                * numerics::integrate(bump_raw, a, a + step, 1e-17)
                    .or_else(|_| {
                        Ok::<f64, Error>(numerics::gauss_legendre10(bump_raw, a, a + step))
                    })
                    .unwrap();
            cumulative.push(acc);
        }
        // pin the tail to exactly one; the drift is at round-off level
        let last = *cumulative.last().unwrap();
        for c in cumulative.iter_mut() {
            *c /= last;
        }
        Self {
            name: "bump".into(),
            theta1: 0.5,
            theta2: 1.0,
            c1: 5.0,
            support_right: 1.0,
            mass: 1.0,
            shape: Shape::Bump {
                norm: norm / last,
                cumulative: Arc::new(cumulative),
            },
        }
    }

    /// Looks a potential up by its CLI name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "polynomial" | "default" => Ok(Self::polynomial()),
            "bump" => Ok(Self::bump()),
            other => Err(domain(format!(
                "unknown potential `{other}` (expected `polynomial` or `bump`)"
            ))),
        }
    }

    /// Replaces the structural constants; used for sensitivity runs.
    pub fn with_constants(mut self, theta1: f64, theta2: f64, c1: f64) -> Self {
        self.theta1 = theta1;
        self.theta2 = theta2;
        self.c1 = c1;
        self
    }

    /// Multiplies `beta` (and hence `Phi`) by `mass`.
    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    /// `beta(t)`; zero outside `[0, support_right]`.
    pub fn beta(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.support_right {
            return 0.0;
        }
        self.mass
            * match &self.shape {
                Shape::Polynomial => {
                    let s = 1.0 - t;
                    12.0 * t * s * s
                }
                Shape::Bump { norm, .. } => norm * bump_raw(t),
            }
    }

    /// `beta'(t)`, one-sided from the right at `t = 0`.
    pub fn beta_prime(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.support_right {
            return 0.0;
        }
        self.mass
            * match &self.shape {
                Shape::Polynomial => 12.0 * (1.0 - t) * (1.0 - 3.0 * t),
                Shape::Bump { norm, .. } => norm * bump_raw_prime(t),
            }
    }

    /// `Phi(t) = int_0^t beta`.
    pub fn phi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.support_right {
            return self.mass;
        }
        self.mass
            * match &self.shape {
                Shape::Polynomial => t * t * (6.0 - 8.0 * t + 3.0 * t * t),
                Shape::Bump { norm, cumulative } => {
                    let n = cumulative.len() - 1;
                    let step = 1.0 / n as f64;
                    let k = ((t / step) as usize).min(n - 1);
                    let a = k as f64 * step;
                    // table value at the left knot plus a Gauss-Legendre partial integral
                    cumulative[k] + norm * numerics::gauss_legendre10(bump_raw, a, t)
                }
            }
    }

    /// `Phi(b) - Phi(a)` without cancellation when `a` and `b` are close.
    pub fn phi_diff(&self, a: f64, b: f64) -> f64 {
        let s = self.support_right;
        if !(a >= 0.0 && b >= 0.0 && a <= s && b <= s) {
            return self.phi(b) - self.phi(a);
        }
        match &self.shape {
            Shape::Polynomial => {
                let (sum, sq) = (a + b, a * a + b * b);
                self.mass * (b - a) * (6.0 * sum - 8.0 * (sq + a * b) + 3.0 * sum * sq)
            }
            Shape::Bump { .. } => {
                if (b - a).abs() < 1e-2 {
                    numerics::gauss_legendre10(|t| self.beta(t), a, b)
                } else {
                    self.phi(b) - self.phi(a)
                }
            }
        }
    }

    /// `Phi(a + d) - Phi(a)` for a small increment `d >= 0` known exactly.
    pub fn phi_increment(&self, a: f64, d: f64) -> f64 {
        let b = a + d;
        let s = self.support_right;
        if !(a >= 0.0 && d >= 0.0 && b <= s) {
            return self.phi_diff(a, b);
        }
        match &self.shape {
            Shape::Polynomial => {
                let (sum, sq) = (a + b, a * a + b * b);
                self.mass * d * (6.0 * sum - 8.0 * (sq + a * b) + 3.0 * sum * sq)
            }
            Shape::Bump { .. } => {
                if d < 1e-2 {
                    // nodes placed from d itself so that a + d may round without losing d
                    d * numerics::gauss_legendre10(|s| self.beta(a + d * s), 0.0, 1.0)
                } else {
                    self.phi(b) - self.phi(a)
                }
            }
        }
    }

    /// `Phi_eps(t) = Phi(t / eps)`.
    pub fn phi_eps(&self, t: f64, eps: f64) -> Result<f64> {
        Ok(self.scaled(eps)?.phi(t))
    }

    /// `Phi_eps'(t) = beta(t / eps) / eps`.
    pub fn phi_eps_prime(&self, t: f64, eps: f64) -> Result<f64> {
        Ok(self.scaled(eps)?.dphi(t))
    }

    /// Binds an `eps > 0`, rejecting nonpositive or non-finite values.
    pub fn scaled(&self, eps: f64) -> Result<Scaled<'_>> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(domain(format!(
                "eps must be positive and finite, got {eps}"
            )));
        }
        Ok(Scaled { pot: self, eps })
    }

    /// Stable textual fingerprint of the profile and its constants.
    pub fn fingerprint(&self) -> String {
        format!(
            "{}|theta1={:e}|theta2={:e}|c1={:e}|support={:e}|mass={:e}",
            self.name, self.theta1, self.theta2, self.c1, self.support_right, self.mass
        )
    }
}

/// `Phi_eps` and its derivatives for a fixed, validated `eps`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<'a> {
    pub pot: &'a PotentialSpec,
    pub eps: f64,
}

impl Scaled<'_> {
    #[inline]
    pub fn phi(&self, u: f64) -> f64 {
        self.pot.phi(u / self.eps)
    }

    #[inline]
    pub fn dphi(&self, u: f64) -> f64 {
        self.pot.beta(u / self.eps) / self.eps
    }

    #[inline]
    pub fn ddphi(&self, u: f64) -> f64 {
        self.pot.beta_prime(u / self.eps) / (self.eps * self.eps)
    }

    /// Right-hand side of the Euler-Lagrange equation, `Phi_eps'(u) / 2`.
    #[inline]
    pub fn reaction(&self, u: f64) -> f64 {
        0.5 * self.dphi(u)
    }
}

/// Worst margin of one certified inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityMargin {
    pub inequality: String,
    pub worst_margin: f64,
    pub witness_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub potential: String,
    pub grid_points: usize,
    pub margins: Vec<InequalityMargin>,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.margins.iter().all(|m| m.worst_margin > 0.0)
    }

    pub fn first_failure(&self) -> Option<&InequalityMargin> {
        self.margins.iter().find(|m| !(m.worst_margin > 0.0))
    }
}

fn worst_over<F: Fn(f64) -> f64>(
    name: &str,
    ts: impl Iterator<Item = f64>,
    margin: F,
) -> InequalityMargin {
    let mut worst = InequalityMargin {
        inequality: name.to_string(),
        worst_margin: f64::INFINITY,
        witness_t: f64::NAN,
    };
    for t in ts {
        let m = margin(t);
        if m < worst.worst_margin || m.is_nan() {
            worst.worst_margin = m;
            worst.witness_t = t;
        }
    }
    worst
}

/// Evaluates every structural inequality on a uniform grid without
/// failing; see [`certify_constants`] for the checked version.
pub fn certification_margins(
    spec: &PotentialSpec,
    grid_points: usize,
) -> Result<CertificationReport> {
    if grid_points < 1000 {
        return Err(domain(format!(
            "grid_points must be at least 1000, got {grid_points}"
        )));
    }
    let (t1, t2, c1) = (spec.theta1, spec.theta2, spec.c1);
    if !(0.0 < t1 && t1 < t2 && t2 <= spec.support_right + 1e-15 && c1 > 0.0) {
        return Err(domain(format!(
            "constants must satisfy 0 < theta1 < theta2 <= support_right and c1 > 0, got ({t1}, {t2}, {c1})"
        )));
    }
    let n = grid_points;
    let grid = |a: f64, b: f64| (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64);

    let mut margins = Vec::with_capacity(6);
    margins.push(worst_over("phi_zero_on_negatives", grid(-t2, 0.0), |t| {
        EQUALITY_TOL - spec.phi(t).abs()
    }));
    margins.push(worst_over(
        "phi_one_above_theta2",
        grid(t2, 2.0 * t2),
        |t| EQUALITY_TOL - (spec.phi(t) - 1.0).abs(),
    ));
    // interior points of (0, theta1]; both sides vanish at t = 0
    let lower_grid = grid(0.0, t2).filter(|&t| t > 0.0 && t <= t1);
    margins.push(worst_over("half_phi_prime_lower_bound", lower_grid, |t| {
        0.5 * spec.beta(t) - t / c1
    }));
    let upper_grid = grid(0.0, t2).filter(|&t| t > 0.0 && t <= t1);
    margins.push(worst_over("half_phi_prime_upper_bound", upper_grid, |t| {
        c1 * t - 0.5 * spec.beta(t)
    }));
    // beta vanishes at both ends of its support; the sign test carries round-off slack
    margins.push(worst_over(
        "beta_nonnegative",
        grid(0.0, spec.support_right),
        |t| EQUALITY_TOL + spec.beta(t),
    ));
    let mass = numerics::integrate(|t| spec.beta(t), 0.0, spec.support_right, 1e-14)?;
    margins.push(InequalityMargin {
        inequality: "beta_unit_mass".into(),
        worst_margin: 1e-10 - (mass - 1.0).abs(),
        witness_t: spec.support_right,
    });
    margins.push(InequalityMargin {
        inequality: "beta_prime_positive_at_zero".into(),
        worst_margin: spec.beta_prime(0.0),
        witness_t: 0.0,
    });
    Ok(CertificationReport {
        potential: spec.name.clone(),
        grid_points,
        margins,
    })
}

/// Verifies the structural constants, failing on the first negative margin.
pub fn certify_constants(spec: &PotentialSpec, grid_points: usize) -> Result<CertificationReport> {
    let report = certification_margins(spec, grid_points)?;
    if let Some(bad) = report.first_failure() {
        return Err(Error::Certification {
            inequality: bad.inequality.clone(),
            witness_t: bad.witness_t,
            margin: bad.worst_margin,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn beta_examples() {
        let p = PotentialSpec::polynomial();
        assert_eq!(p.beta(0.0), 0.0);
        assert_eq!(p.beta(-1.0), 0.0);
        assert!((p.beta(0.5) - 1.5).abs() < 1e-15);
        assert_eq!(p.beta(1.0), 0.0);
        assert!((p.beta_prime(0.0) - 12.0).abs() < 1e-15);
    }

    #[test]
    fn phi_examples() {
        let p = PotentialSpec::polynomial();
        assert_eq!(p.phi(-3.0), 0.0);
        assert_eq!(p.phi(2.0), 1.0);
        // oracle: adaptive quadrature of beta
        let q = numerics::integrate(|t| p.beta(t), 0.0, 0.5, 1e-15).unwrap();
        assert!((q - 0.6875).abs() < 1e-14);
        assert!((p.phi(0.5) - 0.6875).abs() < 1e-15);
    }

    #[test]
    fn phi_eps_examples() {
        let p = PotentialSpec::polynomial();
        for eps in [1.0, 0.3, 1e-4] {
            assert!((p.phi_eps(0.5 * eps, eps).unwrap() - p.phi(0.5)).abs() < 1e-14);
            assert_eq!(p.phi_eps(2.0 * eps, eps).unwrap(), 1.0);
        }
        let d = p.phi_eps_prime(0.25, 0.5).unwrap();
        assert!((d - 3.0).abs() < 1e-14);
        // oracle: central difference of phi_eps
        let h = 1e-6;
        let fd =
            (p.phi_eps(0.25 + h, 0.5).unwrap() - p.phi_eps(0.25 - h, 0.5).unwrap()) / (2.0 * h);
        assert!((fd - d).abs() < 1e-8);
        assert!(p.phi_eps(0.1, 0.0).is_err());
        assert!(p.phi_eps_prime(0.1, -1.0).is_err());
    }

    #[test]
    fn default_constants_certify() {
        let r = certify_constants(&PotentialSpec::polynomial(), 100_000).unwrap();
        assert!(r.passed());
        let upper = r
            .margins
            .iter()
            .find(|m| m.inequality == "half_phi_prime_upper_bound")
            .unwrap();
        assert!(upper.worst_margin > 0.0);
    }

    #[test]
    fn tight_c1_fails_near_zero() {
        let p = PotentialSpec::polynomial().with_constants(0.5, 1.0, 1.0);
        match certify_constants(&p, 10_000) {
            Err(Error::Certification {
                inequality,
                witness_t,
                ..
            }) => {
                assert_eq!(inequality, "half_phi_prime_upper_bound");
                // worst raw margin sits at the interior maximum of beta/2 - t; the ratio blows past c1 as t -> 0
                assert!(witness_t > 0.0 && witness_t < 0.5, "{witness_t}");
                assert!(0.5 * p.beta(1e-4) / 1e-4 > p.c1 + 4.9);
            }
            other => panic!("expected certification failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_reaction_fails_mass() {
        let p = PotentialSpec::polynomial().with_mass(0.0);
        let r = certification_margins(&p, 1000).unwrap();
        assert!(!r.passed());
        assert!(certify_constants(&p, 1000).is_err());
        assert!(certification_margins(&p, 999).is_err());
    }

    #[test]
    fn bump_certifies_and_is_normalized() {
        let p = PotentialSpec::bump();
        let r = certify_constants(&p, 20_000).unwrap();
        assert!(r.passed(), "{r:?}");
        for t in [0.013, 0.25, 0.5, 0.77, 0.999] {
            let q = numerics::integrate(|s| p.beta(s), 0.0, t, 1e-15).unwrap();
            assert!((q - p.phi(t)).abs() < 1e-10, "t={t}: {q} vs {}", p.phi(t));
        }
    }

    #[test]
    fn phi_diff_matches_difference() {
        for p in [PotentialSpec::polynomial(), PotentialSpec::bump()] {
            for (a, b) in [
                (0.2, 0.2001),
                (0.0, 0.7),
                (0.9, 0.35),
                (-0.5, 0.3),
                (0.5, 1.5),
            ] {
                let d = p.phi_diff(a, b);
                assert!(
                    (d - (p.phi(b) - p.phi(a))).abs() < 1e-12,
                    "{} {a} {b}",
                    p.name
                );
            }
        }
    }

    #[test]
    fn phi_increment_matches_difference() {
        for p in [PotentialSpec::polynomial(), PotentialSpec::bump()] {
            for (a, d) in [(0.2, 1e-4), (0.0, 0.7), (0.35, 0.5), (0.3, 0.0)] {
                assert!(
                    (p.phi_increment(a, d) - (p.phi(a + d) - p.phi(a))).abs() < 1e-12,
                    "{} {a} {d}",
                    p.name
                );
            }
        }
        // oracle: leading Taylor term beta(a) d for tiny increments
        let p = PotentialSpec::polynomial();
        let d = 1e-12;
        assert!((p.phi_increment(0.2, d) / (p.beta(0.2) * d) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(PotentialSpec::by_name("quartic").is_err());
        assert_eq!(
            PotentialSpec::by_name("polynomial").unwrap(),
            PotentialSpec::polynomial()
        );
    }

    proptest! {
        #[test]
        fn closed_form_matches_quadrature(t in -0.5f64..1.5) {
            let p = PotentialSpec::polynomial();
            let q = if t <= 0.0 { 0.0 } else {
                numerics::integrate(|s| p.beta(s), 0.0, t.min(1.0), 1e-14).unwrap()
            };
            prop_assert!((q - p.phi(t)).abs() < 1e-10);
        }

        #[test]
        fn phi_is_monotone(a in -1.0f64..2.0, b in -1.0f64..2.0) {
            let p = PotentialSpec::polynomial();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(p.phi(lo) <= p.phi(hi));
        }

        #[test]
        fn phi_eps_scaling(t in -1.0f64..2.0, eps in 1e-3f64..1.0, lambda in 1e-2f64..1e2) {
            let p = PotentialSpec::polynomial();
            let a = p.phi_eps(lambda * t, lambda * eps).unwrap();
            let b = p.phi_eps(t, eps).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
