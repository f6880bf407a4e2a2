//! Global one-dimensional solutions of `w'' = Phi_eps'(w) / 2` and the
//! truncated barriers built from them.
//!
//! Every profile is stored at unit scale and rescaled as
//! `w_eps(x) = eps * W(x / eps)`. Along a solution `W'^2 - Phi(W) = H` with
//! `H = A^2 - 1`, where `A` is the slope at `+inf`. The increasing branch is
//! tabulated as `x(w) = int_{theta1}^{w} ds / sqrt(Phi(s) + H)` in a
//! variable `z` chosen so that `dx/dz` stays bounded at the lower end:
//!
//! * monotone (`H = 0`): `w = e^z`, the integrand tends to `1 / k` where
//!   `k = sqrt(beta'(0) / 2)` is the tail rate;
//! * super-linear (`H > 0`): `w = (sqrt(H) / k) sinh z`;
//! * V-shaped (`H < 0`): `w = m cosh z` with `Phi(m) = -H`, which removes the
//!   square-root singularity at the minimum.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::numerics;
use crate::potential::PotentialSpec;

/// Lower end of the tabulated monotone profile; below it the linearized
/// exponential tail is used.
pub const MONOTONE_TAIL_SWITCH: f64 = 1e-12;

const TABLE_PANELS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ProfileKind {
    Monotone,
    SuperLinear { t: f64 },
    VShaped { tau: f64 },
}

impl ProfileKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProfileKind::Monotone => "monotone",
            ProfileKind::SuperLinear { .. } => "super-linear",
            ProfileKind::VShaped { .. } => "v-shaped",
        }
    }

    /// `A`, the slope at `+inf`.
    pub fn slope_at_infinity(&self) -> f64 {
        match *self {
            ProfileKind::Monotone => 1.0,
            ProfileKind::SuperLinear { t } => 1.0 + t,
            ProfileKind::VShaped { tau } => 1.0 - tau.abs(),
        }
    }

    /// `H = A^2 - 1`, computed without cancellation.
    pub fn hamiltonian(&self) -> f64 {
        match *self {
            ProfileKind::Monotone => 0.0,
            ProfileKind::SuperLinear { t } => t * (2.0 + t),
            ProfileKind::VShaped { tau } => tau.abs() * (tau.abs() - 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Exp,
    Sinh(f64),
    Cosh(f64),
}

impl Map {
    fn g(&self, z: f64) -> f64 {
        match *self {
            Map::Exp => z.exp(),
            Map::Sinh(a) => a * z.sinh(),
            Map::Cosh(m) => m * z.cosh(),
        }
    }

    fn dg(&self, z: f64) -> f64 {
        match *self {
            Map::Exp => z.exp(),
            Map::Sinh(a) => a * z.cosh(),
            Map::Cosh(m) => m * z.sinh(),
        }
    }

    fn inv(&self, w: f64) -> f64 {
        match *self {
            Map::Exp => w.ln(),
            Map::Sinh(a) => (w / a).asinh(),
            Map::Cosh(m) => (w / m).max(1.0).acosh(),
        }
    }
}

/// Unit-scale tabulation of one profile.
#[derive(Debug)]
struct UnitProfile {
    pot: PotentialSpec,
    kind: ProfileKind,
    h: f64,
    a: f64,
    /// `sqrt(H)` for super-linear, tail rate `k` for monotone, unused otherwise.
    low_slope: f64,
    /// Minimum value for V-shaped profiles, zero otherwise.
    m: f64,
    map: Map,
    z: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
    /// Summed quadrature error estimate of the table.
    quad_error: f64,
}

impl UnitProfile {
    fn build(pot: &PotentialSpec, kind: ProfileKind, quad_tol: f64) -> Result<Self> {
        let (t1, t2) = (pot.theta1, pot.theta2);
        let h = kind.hamiltonian();
        let a = kind.slope_at_infinity();
        let k = (0.5 * pot.beta_prime(0.0)).sqrt();
        if !(k > 0.0 && k.is_finite()) {
            return Err(domain(format!(
                "profiles need beta'(0) > 0, got {}",
                pot.beta_prime(0.0)
            )));
        }
        let (map, z_lo, m, low_slope) = match kind {
            ProfileKind::Monotone => (Map::Exp, MONOTONE_TAIL_SWITCH.ln(), 0.0, k),
            ProfileKind::SuperLinear { t } => {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(domain(format!(
                        "super-linear parameter t must be positive, got {t}"
                    )));
                }
                (Map::Sinh(h.sqrt() / k), 0.0, 0.0, h.sqrt())
            }
            ProfileKind::VShaped { tau } => {
                if !(tau > -1.0 && tau < 0.0) {
                    return Err(domain(format!(
                        "v-shaped parameter tau must lie in (-1, 0), got {tau}"
                    )));
                }
                // Phi(m) = -H; the normalization needs the minimum below theta1
                if -h >= pot.phi(t1) {
                    return Err(domain(format!(
                        "v-shaped parameter tau = {tau} puts the minimum above theta1 (needs Phi(theta1) > 2|tau| - tau^2)"
                    )));
                }
                let m = numerics::find_root(|s| pot.phi(s) + h, 0.0, t1, 1e-17)?;
                (Map::Cosh(m), 0.0, m, 0.0)
            }
        };
        let z_mid = map.inv(t1);
        let z_top = map.inv(t2);
        let span = z_top - z_lo;
        let n_lo = ((TABLE_PANELS as f64 * (z_mid - z_lo) / span).round() as usize).max(16);
        let n_hi = ((TABLE_PANELS as f64 * (z_top - z_mid) / span).round() as usize).max(16);
        let mut z = Vec::with_capacity(n_lo + n_hi + 1);
        for j in 0..n_lo {
            z.push(z_lo + (z_mid - z_lo) * j as f64 / n_lo as f64);
        }
        for j in 0..=n_hi {
            z.push(z_mid + (z_top - z_mid) * j as f64 / n_hi as f64);
        }
        let mut prof = Self {
            pot: pot.clone(),
            kind,
            h,
            a,
            low_slope,
            m,
            map,
            w: z.iter().map(|&zz| map.g(zz)).collect(),
            x: vec![0.0; z.len()],
            z,
            quad_error: 0.0,
        };
        // pin exact node values at the three distinguished points
        prof.w[n_lo] = t1;
        *prof.w.last_mut().unwrap() = t2;
        if matches!(kind, ProfileKind::SuperLinear { .. }) {
            prof.w[0] = 0.0;
        }
        if let Map::Cosh(mm) = map {
            prof.w[0] = mm;
        }
        let panels = prof.z.len() - 1;
        let panel_tol = quad_tol / panels as f64;
        let mut lengths = vec![0.0; panels];
        for (j, len) in lengths.iter_mut().enumerate() {
            let (za, zb) = (prof.z[j], prof.z[j + 1]);
            *len = numerics::integrate_with_limit(|zz| prof.dxdz(zz), za, zb, panel_tol, 200)
                .map_err(|e| match e {
                    Error::Quadrature { achieved, .. } => Error::Quadrature {
                        requested: quad_tol,
                        achieved: achieved * panels as f64,
                    },
                    other => other,
                })?;
            // second estimate to bound the achieved error
            let coarse = numerics::gauss_legendre10(|zz| prof.dxdz(zz), za, zb);
            prof.quad_error += (coarse - *len).abs();
        }
        for j in (0..n_lo).rev() {
            prof.x[j] = prof.x[j + 1] - lengths[j];
        }
        for j in n_lo..panels {
            prof.x[j + 1] = prof.x[j] + lengths[j];
        }
        Ok(prof)
    }

    /// `dx/dz` on the increasing branch.
    fn dxdz(&self, z: f64) -> f64 {
        let dg = self.map.dg(z);
        let q = match self.map {
            Map::Cosh(m) => {
                if z == 0.0 {
                    return (2.0 * m / self.pot.beta(m)).sqrt();
                }
                // w - m = 2 m sinh^2(z / 2) without cancellation
                self.pot
                    .phi_increment(m, 2.0 * m * (0.5 * z).sinh().powi(2))
            }
            _ => self.pot.phi(self.map.g(z)) + self.h,
        };
        dg / q.sqrt()
    }

    fn x_lo(&self) -> f64 {
        self.x[0]
    }

    fn x_top(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Increasing-branch value at `x >= x_lo` (or the tail below it).
    fn eval_branch(&self, x: f64) -> f64 {
        let t2 = *self.w.last().unwrap();
        if x >= self.x_top() {
            return t2 + self.a * (x - self.x_top());
        }
        if x <= self.x_lo() {
            return match self.kind {
                ProfileKind::Monotone => self.w[0] * (self.low_slope * (x - self.x_lo())).exp(),
                ProfileKind::SuperLinear { .. } => self.low_slope * (x - self.x_lo()),
                ProfileKind::VShaped { .. } => self.m,
            };
        }
        let j = (self.x.partition_point(|&xx| xx <= x) - 1).min(self.x.len() - 2);
        if x == self.x[j] {
            return self.w[j];
        }
        let (za, zb) = (self.z[j], self.z[j + 1]);
        let (xa, xb) = (self.x[j], self.x[j + 1]);
        let mut zz = za + (zb - za) * (x - xa) / (xb - xa);
        for _ in 0..12 {
            let f = xa + numerics::gauss_legendre10(|s| self.dxdz(s), za, zz) - x;
            let d = self.dxdz(zz);
            let step = f / d;
            zz = (zz - step).clamp(za, zb);
            if step.abs() <= 4.0 * f64::EPSILON * (1.0 + zz.abs()) {
                break;
            }
        }
        self.map.g(zz)
    }

    fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ProfileKind::VShaped { .. } => {
                let y = self.x_lo();
                self.eval_branch(if x < y { 2.0 * y - x } else { x })
            }
            _ => self.eval_branch(x),
        }
    }

    fn eval_derivative(&self, x: f64) -> f64 {
        if let ProfileKind::VShaped { .. } = self.kind {
            let y = self.x_lo();
            if x < y {
                return -self.eval_derivative(2.0 * y - x);
            }
        }
        if x >= self.x_top() {
            return self.a;
        }
        if x <= self.x_lo() {
            return match self.kind {
                ProfileKind::Monotone => self.low_slope * self.eval_branch(x),
                ProfileKind::SuperLinear { .. } => self.low_slope,
                ProfileKind::VShaped { .. } => 0.0,
            };
        }
        let w = self.eval_branch(x);
        match self.map {
            Map::Cosh(m) => self.pot.phi_diff(m, w).max(0.0).sqrt(),
            _ => (self.pot.phi(w) + self.h).max(0.0).sqrt(),
        }
    }

    /// Position on the increasing branch where the profile equals `w`.
    fn inverse(&self, w: f64) -> f64 {
        let t2 = *self.w.last().unwrap();
        if w >= t2 {
            return self.x_top() + (w - t2) / self.a;
        }
        if w <= self.w[0] {
            return match self.kind {
                ProfileKind::Monotone => {
                    if w <= 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        self.x_lo() + (w / self.w[0]).ln() / self.low_slope
                    }
                }
                ProfileKind::SuperLinear { .. } => self.x_lo() + w / self.low_slope,
                ProfileKind::VShaped { .. } => self.x_lo(),
            };
        }
        let j = (self.w.partition_point(|&ww| ww <= w) - 1).min(self.w.len() - 2);
        if w == self.w[j] {
            return self.x[j];
        }
        let zz = self.map.inv(w).clamp(self.z[j], self.z[j + 1]);
        self.x[j] + numerics::gauss_legendre10(|s| self.dxdz(s), self.z[j], zz)
    }
}

/// A global one-dimensional solution at scale `eps`.
#[derive(Debug, Clone)]
pub struct Profile1D {
    pub eps: f64,
    unit: Arc<UnitProfile>,
}

/// Builds the profile of the given family, normalized by `w(0) = theta1 eps`.
pub fn make_profile(
    pot: &PotentialSpec,
    eps: f64,
    kind: ProfileKind,
    quad_tol: f64,
) -> Result<Profile1D> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(domain(format!("eps must be positive, got {eps}")));
    }
    if !(quad_tol > 0.0) {
        return Err(domain(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        )));
    }
    Ok(Profile1D {
        eps,
        unit: Arc::new(UnitProfile::build(pot, kind, quad_tol)?),
    })
}

impl Profile1D {
    pub fn kind(&self) -> ProfileKind {
        self.unit.kind
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.unit.pot
    }

    pub fn slope_at_infinity(&self) -> f64 {
        self.unit.a
    }

    /// `A^2 - 1`.
    pub fn hamiltonian_constant(&self) -> f64 {
        self.unit.h
    }

    /// Estimated quadrature error of the unit-scale table (in `x / eps`).
    pub fn quadrature_error(&self) -> f64 {
        self.unit.quad_error
    }

    /// Same unit profile at another scale; shares the table.
    pub fn rescaled(&self, eps: f64) -> Result<Profile1D> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(domain(format!("eps must be positive, got {eps}")));
        }
        Ok(Profile1D {
            eps,
            unit: Arc::clone(&self.unit),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eps * self.unit.eval(x / self.eps)
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        self.unit.eval_derivative(x / self.eps)
    }

    /// `w'^2 - Phi_eps(w) - (A^2 - 1)` at `x`.
    pub fn hamiltonian_residual(&self, x: f64) -> f64 {
        let w = self.unit.eval(x / self.eps);
        let d = self.unit.eval_derivative(x / self.eps);
        if let Map::Cosh(m) = self.unit.map {
            if w >= m {
                return d * d - self.unit.pot.phi_diff(m, w);
            }
        }
        d * d - self.unit.pot.phi(w) - self.unit.h
    }

    /// Point of the increasing branch where the profile takes the value `w`.
    /// Values below the branch map to its left end (`-inf` for the monotone
    /// profile at `w <= 0`).
    pub fn inverse(&self, w: f64) -> f64 {
        self.eps * self.unit.inverse(w / self.eps)
    }

    /// Left end of the tabulated increasing branch: the root, the minimum
    /// point, or the tail switch.
    pub fn branch_start(&self) -> f64 {
        self.eps * self.unit.x_lo()
    }

    /// Point past which the profile is affine with slope `A`.
    pub fn linear_start(&self) -> f64 {
        self.eps * self.unit.x_top()
    }
}

pub fn eval(profile: &Profile1D, x: f64) -> f64 {
    profile.eval(x)
}

pub fn eval_derivative(profile: &Profile1D, x: f64) -> f64 {
    profile.eval_derivative(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootQuery {
    pub root: f64,
    pub value_at_root: f64,
    /// `-eps sqrt(2 c1) log(1 + theta1 / t)`.
    pub lower_bound: f64,
    pub margin: f64,
}

/// Unique root of a super-linear profile, with its logarithmic lower bound.
pub fn root_of_super(profile: &Profile1D) -> Result<RootQuery> {
    let ProfileKind::SuperLinear { t } = profile.kind() else {
        return Err(Error::Kind {
            expected: "super-linear",
            got: profile.kind().name(),
        });
    };
    let pot = profile.potential();
    let root = profile.branch_start();
    let lower_bound = -profile.eps * (2.0 * pot.c1).sqrt() * (1.0 + pot.theta1 / t).ln();
    Ok(RootQuery {
        root,
        value_at_root: profile.eval(root),
        lower_bound,
        margin: root - lower_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimumQuery {
    pub y: f64,
    pub m: f64,
    /// `sqrt(|tau| / c1) eps`.
    pub m_lower: f64,
    /// `sqrt(2 c1 |tau|) eps`.
    pub m_upper: f64,
    /// `-eps sqrt(2 c1) (2 + log(theta1 / sqrt(2 |tau| / c1)))`.
    pub y_lower: f64,
}

impl MinimumQuery {
    /// Smallest of the three bound margins.
    pub fn margin(&self) -> f64 {
        (self.m - self.m_lower)
            .min(self.m_upper - self.m)
            .min(self.y - self.y_lower)
    }
}

/// Minimum point and value of a V-shaped profile, with their bounds.
pub fn min_of_vshaped(profile: &Profile1D) -> Result<MinimumQuery> {
    let ProfileKind::VShaped { tau } = profile.kind() else {
        return Err(Error::Kind {
            expected: "v-shaped",
            got: profile.kind().name(),
        });
    };
    let pot = profile.potential();
    let (eps, c1, s) = (profile.eps, pot.c1, tau.abs());
    Ok(MinimumQuery {
        y: profile.branch_start(),
        m: eps * profile.unit.m,
        m_lower: (s / c1).sqrt() * eps,
        m_upper: (2.0 * c1 * s).sqrt() * eps,
        y_lower: -eps * (2.0 * c1).sqrt() * (2.0 + (pot.theta1 / (2.0 * s / c1).sqrt()).ln()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Sub,
    Super,
}

/// Sub-solution `w^eps` (zero left of the root) or super-solution
/// `w^{-eps}` (frozen at the minimum value left of the minimum point).
#[derive(Debug, Clone)]
pub struct TruncatedBarrier {
    pub base: Profile1D,
    pub cut: f64,
    pub floor: f64,
    pub side: Side,
}

/// Builds the barrier with parameter `t = eps` (sub) or `tau = -eps` (super).
pub fn make_barrier(pot: &PotentialSpec, eps: f64, side: Side) -> Result<TruncatedBarrier> {
    make_barrier_with_tol(pot, eps, side, 1e-12)
}

pub fn make_barrier_with_tol(
    pot: &PotentialSpec,
    eps: f64,
    side: Side,
    quad_tol: f64,
) -> Result<TruncatedBarrier> {
    match side {
        Side::Sub => {
            let base = make_profile(pot, eps, ProfileKind::SuperLinear { t: eps }, quad_tol)?;
            let cut = base.branch_start();
            Ok(TruncatedBarrier {
                base,
                cut,
                floor: 0.0,
                side,
            })
        }
        Side::Super => {
            let base = make_profile(pot, eps, ProfileKind::VShaped { tau: -eps }, quad_tol)?;
            let q = min_of_vshaped(&base)?;
            Ok(TruncatedBarrier {
                base,
                cut: q.y,
                floor: q.m,
                side,
            })
        }
    }
}

impl TruncatedBarrier {
    pub fn eps(&self) -> f64 {
        self.base.eps
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.cut {
            self.floor
        } else {
            self.base.eval(x)
        }
    }

    /// `sup { z : b(z) <= w }`; `-inf` when `w` is below the floor.
    pub fn last_below(&self, w: f64) -> f64 {
        if w < self.floor {
            f64::NEG_INFINITY
        } else {
            self.base.inverse(w).max(self.cut)
        }
    }

    /// `inf { z : b(z) >= w }`; `-inf` when `w` is at most the floor.
    pub fn first_above(&self, w: f64) -> f64 {
        if w <= self.floor {
            f64::NEG_INFINITY
        } else {
            self.base.inverse(w)
        }
    }
}

pub fn eval_barrier(b: &TruncatedBarrier, x: f64) -> f64 {
    b.eval(x)
}

/// `eps < theta1^2 / (8 c1)`, the range in which the super barrier has a
/// transition band of width `O(eps)`.
pub fn super_barrier_eps_limit(pot: &PotentialSpec) -> f64 {
    pot.theta1 * pot.theta1 / (8.0 * pot.c1)
}

/// Frozen regression value of the constant `c` with
/// `diam { theta1 eps <= w <= theta2 eps } <= c eps`.
pub fn frozen_diameter_constant(_pot: &PotentialSpec) -> f64 {
    // measured maxima over eps in (0, theta1^2 / (8 c1)): 0.5287 polynomial, 0.5216 bump
    0.55
}

/// Diameter of the transition band `{theta1 eps <= b <= theta2 eps}`.
pub fn transition_diameter(b: &TruncatedBarrier) -> Result<f64> {
    let pot = b.base.potential();
    let eps = b.eps();
    if b.side == Side::Super && eps >= super_barrier_eps_limit(pot) {
        return Err(domain(format!(
            "super barrier transition diameter needs eps < theta1^2 / (8 c1) = {:.6}, got {eps}",
            super_barrier_eps_limit(pot)
        )));
    }
    let d = b.base.inverse(pot.theta2 * eps) - b.base.inverse(pot.theta1 * eps);
    let c = frozen_diameter_constant(pot);
    if d > c * eps {
        return Err(Error::Check {
            check: "transition_diameter".into(),
            witness: vec![eps],
            margin: c * eps - d,
        });
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftRow {
    pub inequality: String,
    pub worst_margin: f64,
    pub witness_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub eps: f64,
    pub delta: f64,
    pub sigma: f64,
    pub eps0: f64,
    pub in_hypothesis: bool,
    pub rows: Vec<ShiftRow>,
}

impl ShiftReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.worst_margin >= 0.0)
    }

    pub fn worst_margin(&self) -> f64 {
        self.rows
            .iter()
            .fold(f64::INFINITY, |m, r| m.min(r.worst_margin))
    }
}

/// Number of sample points per inequality in [`shift_comparison_check`].
pub const SHIFT_SAMPLES: usize = 10_000;

fn scan(name: &str, a: f64, b: f64, margin: impl Fn(f64) -> f64) -> ShiftRow {
    let mut row = ShiftRow {
        inequality: name.into(),
        worst_margin: f64::INFINITY,
        witness_x: f64::NAN,
    };
    if b <= a {
        return row;
    }
    for k in 0..SHIFT_SAMPLES {
        // open interval: cell midpoints
        let x = a + (b - a) * (k as f64 + 0.5) / SHIFT_SAMPLES as f64;
        let m = margin(x);
        if m < row.worst_margin {
            row.worst_margin = m;
            row.witness_x = x;
        }
    }
    row
}

/// Evaluates the four shifted-barrier comparisons against the identity on
/// `(-1, 1)` with shift `delta + eps^sigma`. Failures are errors only when
/// `eps < eps0`.
pub fn shift_comparison_check(
    pot: &PotentialSpec,
    eps: f64,
    delta: f64,
    sigma: f64,
    eps0: f64,
) -> Result<ShiftReport> {
    if !(0.0..1.0).contains(&delta) {
        return Err(domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(domain(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let sub = make_barrier(pot, eps, Side::Sub)?;
    let sup = make_barrier(pot, eps, Side::Super)?;
    let es = eps.powf(sigma);
    let s = delta + es;
    let half = delta + 0.5 * es;
    let rows = vec![
        scan("sub_right_shift_below_identity", sub.cut + s, 1.0, |x| {
            x - (sub.eval(x - s) + half)
        }),
        scan("sub_left_shift_above_identity", -1.0, 1.0, |x| {
            sub.eval(x + s) - half - x
        }),
        scan("super_right_shift_below_identity", sup.cut + s, 1.0, |x| {
            x - (sup.eval(x - s) + half)
        }),
        scan("super_left_shift_above_identity", -1.0, 1.0, |x| {
            sup.eval(x + s) - half - x
        }),
    ];
    let report = ShiftReport {
        eps,
        delta,
        sigma,
        eps0,
        in_hypothesis: eps < eps0,
        rows,
    };
    if report.in_hypothesis {
        if let Some(bad) = report.rows.iter().find(|r| r.worst_margin < 0.0) {
            return Err(Error::Check {
                check: bad.inequality.clone(),
                witness: vec![bad.witness_x],
                margin: bad.worst_margin,
            });
        }
    }
    Ok(report)
}

/// Largest `eps` of a decreasing ladder below which every shift check
/// passes for all `deltas`; zero if the smallest rung already fails.
pub fn measure_shift_eps0(
    pot: &PotentialSpec,
    sigma: f64,
    deltas: &[f64],
    ladder: &[f64],
) -> Result<f64> {
    let mut eps0 = 0.0;
    for &eps in ladder.iter().rev() {
        let mut ok = true;
        for &d in deltas {
            ok &= shift_comparison_check(pot, eps, d, sigma, 0.0)?.passed();
        }
        if !ok {
            break;
        }
        eps0 = eps;
    }
    Ok(eps0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pot() -> PotentialSpec {
        PotentialSpec::polynomial()
    }

    #[test]
    fn monotone_reaches_theta2_near_known_point() {
        let p = make_profile(&pot(), 1.0, ProfileKind::Monotone, 1e-12).unwrap();
        // oracle: direct adaptive quadrature of 1/sqrt(Phi) from 0.5 to 1
        let q = numerics::integrate(|s| 1.0 / pot().phi(s).sqrt(), 0.5, 1.0, 1e-14).unwrap();
        assert!(
            (p.linear_start() - q).abs() < 1e-11,
            "{} vs {q}",
            p.linear_start()
        );
        assert!((p.linear_start() - 0.526).abs() < 1e-3);
        assert!((p.eval(q) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn normalization_is_exact() {
        for kind in [
            ProfileKind::Monotone,
            ProfileKind::SuperLinear { t: 0.3 },
            ProfileKind::VShaped { tau: -0.1 },
        ] {
            for eps in [1.0, 0.01] {
                let p = make_profile(&pot(), eps, kind, 1e-12).unwrap();
                assert_eq!(p.eval(0.0), 0.5 * eps, "{kind:?}");
            }
        }
    }

    #[test]
    fn monotone_slope_at_theta1() {
        let p = make_profile(&pot(), 1.0, ProfileKind::Monotone, 1e-12).unwrap();
        assert!((p.eval_derivative(0.0) - 0.6875f64.sqrt()).abs() < 1e-12);
        let h = 1e-5;
        let fd = (p.eval(h) - p.eval(-h)) / (2.0 * h);
        assert!((fd - 0.6875f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn super_linear_left_slope() {
        let p = make_profile(&pot(), 1.0, ProfileKind::SuperLinear { t: 1.0 }, 1e-12).unwrap();
        assert!((p.eval_derivative(-50.0) - 3f64.sqrt()).abs() < 1e-14);
        assert!((p.eval_derivative(50.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn v_shaped_minimum_value() {
        let p = make_profile(&pot(), 1.0, ProfileKind::VShaped { tau: -0.1 }, 1e-12).unwrap();
        let q = min_of_vshaped(&p).unwrap();
        // oracle: Brent on Phi(m) = 0.19 with the closed-form polynomial
        let m = numerics::find_root(
            |s| 6.0 * s * s - 8.0 * s.powi(3) + 3.0 * s.powi(4) - 0.19,
            0.0,
            0.5,
            1e-16,
        )
        .unwrap();
        assert!((q.m - m).abs() < 1e-14);
        assert!((q.m - 0.206).abs() < 1e-3);
        assert!(q.m_lower <= q.m && q.m <= q.m_upper);
        assert!(
            (q.y_lower - (-(12f64).sqrt() * (2.0 + (0.5 / (0.2f64 / 6.0).sqrt()).ln()))).abs()
                < 1e-12
        );
        assert!(q.y >= q.y_lower);
        assert!((p.eval(q.y) - q.m).abs() < 1e-14);
        for s in [0.0, 0.1, 0.7, 1.9, 3.0] {
            assert!((p.eval(q.y + s) - p.eval(q.y - s)).abs() < 1e-13);
        }
    }

    #[test]
    fn v_shaped_outside_normalizable_range_is_rejected() {
        assert!(make_profile(&pot(), 1.0, ProfileKind::VShaped { tau: -0.5 }, 1e-12).is_err());
        assert!(make_profile(&pot(), 1.0, ProfileKind::VShaped { tau: 0.1 }, 1e-12).is_err());
    }

    #[test]
    fn kind_errors() {
        let mono = make_profile(&pot(), 1.0, ProfileKind::Monotone, 1e-12).unwrap();
        assert!(matches!(root_of_super(&mono), Err(Error::Kind { .. })));
        assert!(matches!(min_of_vshaped(&mono), Err(Error::Kind { .. })));
    }

    #[test]
    fn root_bound_example() {
        let p = make_profile(&pot(), 0.01, ProfileKind::SuperLinear { t: 0.01 }, 1e-12).unwrap();
        let r = root_of_super(&p).unwrap();
        assert!((r.lower_bound - (-0.01 * 12f64.sqrt() * 51f64.ln())).abs() < 1e-14);
        assert!(r.root >= r.lower_bound && r.root < 0.0);
        assert_eq!(r.value_at_root, 0.0);
        let big = make_profile(&pot(), 1.0, ProfileKind::SuperLinear { t: 1e4 }, 1e-12).unwrap();
        assert!(root_of_super(&big).unwrap().root > -1e-3);
    }

    #[test]
    fn barriers_follow_definitions() {
        let eps = 0.002;
        let sub = make_barrier(&pot(), eps, Side::Sub).unwrap();
        let sup = make_barrier(&pot(), eps, Side::Super).unwrap();
        assert_eq!(sub.eval(sub.cut - 1e-3), 0.0);
        assert_eq!(sup.eval(sup.cut - 1.0), sup.floor);
        assert_eq!(sub.eval(0.0), 0.5 * eps);
        assert_eq!(sup.eval(0.0), 0.5 * eps);
        let d = transition_diameter(&sup).unwrap();
        assert!(d > 0.0 && d.is_finite());
        assert!(transition_diameter(&make_barrier(&pot(), 0.01, Side::Super).unwrap()).is_err());
    }

    #[test]
    fn sub_diameter_is_scale_free() {
        let a =
            transition_diameter(&make_barrier(&pot(), 1e-3, Side::Sub).unwrap()).unwrap() / 1e-3;
        let b = make_barrier(&pot(), 1e-3, Side::Sub)
            .unwrap()
            .base
            .rescaled(0.25)
            .unwrap();
        let d = b.inverse(0.25) - b.inverse(0.125);
        assert!((a - d / 0.25).abs() < 1e-12);
        assert!(a < 6f64.sqrt());
    }

    #[test]
    fn inverse_round_trip() {
        for kind in [
            ProfileKind::Monotone,
            ProfileKind::SuperLinear { t: 0.01 },
            ProfileKind::VShaped { tau: -0.01 },
        ] {
            let p = make_profile(&pot(), 1.0, kind, 1e-12).unwrap();
            for k in 0..200 {
                let x = p.branch_start().max(-20.0) + 0.05 * k as f64 + 1e-3;
                assert!((p.inverse(p.eval(x)) - x).abs() < 1e-8, "{kind:?} at {x}");
            }
        }
    }

    #[test]
    fn shift_checks_pass_for_small_eps() {
        for delta in [0.0, 0.5] {
            let r = shift_comparison_check(&pot(), 1e-4, delta, 0.5, 1e-3).unwrap();
            assert!(r.passed(), "{r:?}");
        }
        let r = shift_comparison_check(&pot(), 0.3, 0.0, 0.5, 1e-3).unwrap();
        assert!(!r.in_hypothesis);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::sync::OnceLock;

        fn profiles() -> &'static [Profile1D; 3] {
            static P: OnceLock<[Profile1D; 3]> = OnceLock::new();
            P.get_or_init(|| {
                [
                    ProfileKind::Monotone,
                    ProfileKind::SuperLinear { t: 0.2 },
                    ProfileKind::VShaped { tau: -0.2 },
                ]
                .map(|k| make_profile(&PotentialSpec::polynomial(), 1.0, k, 1e-12).unwrap())
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn inversion_is_consistent(k in 0usize..3, s in 0.0f64..1.0) {
                let p = &profiles()[k];
                let x = p.branch_start().max(-10.0) + 1e-6 + s * (p.linear_start() + 2.0 - p.branch_start().max(-10.0));
                let w = p.eval(x);
                prop_assume!(w > 1e-10);
                prop_assert!((p.inverse(w) - x).abs() < 1e-8, "{x} -> {w} -> {}", p.inverse(w));
            }

            #[test]
            fn scaling_covariance(k in 0usize..3, x in -4.0f64..4.0, le in -3.0f64..0.0) {
                let eps = 10f64.powf(le);
                let p = profiles()[k].rescaled(eps).unwrap();
                prop_assert!((p.eval(x * eps) - eps * profiles()[k].eval(x)).abs() < 1e-8 * eps);
            }

            #[test]
            fn hamiltonian_is_conserved(k in 0usize..3, x in -5.0f64..5.0) {
                prop_assert!(profiles()[k].hamiltonian_residual(x).abs() < 1e-8);
            }
        }
    }
}
