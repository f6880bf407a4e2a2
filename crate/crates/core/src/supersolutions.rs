//! Radial super-solutions of `-Delta psi + psi / (c1 eps^2) >= 0` and the
//! exponential-decay certificate they yield inside `{u <= theta1 eps}`.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::grid::{GridField, Point};
use crate::potential::PotentialSpec;

/// Roots of `mu^2 + ((N - 1) eps / rho) mu - 1 / c1 = 0`, as `(mu_plus, mu_minus)`.
pub fn mu_pm(eps: f64, rho: f64, dim: usize, c1: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && rho > 0.0 && dim >= 1 && c1 > 0.0) {
        return Err(domain(format!(
            "mu_pm needs eps, rho, c1 > 0 and N >= 1, got ({eps}, {rho}, {dim}, {c1})"
        )));
    }
    let b = (dim as f64 - 1.0) * eps / (2.0 * rho);
    let disc = (b * b + 1.0 / c1).sqrt();
    // mu_plus via the product of roots to avoid cancellation when b is large
    let mu_minus = -b - disc;
    let mu_plus = (-1.0 / c1) / mu_minus;
    Ok((mu_plus, mu_minus))
}

/// `psi`, equal to the radial profile `phi` on `rho <= r <= R` and frozen
/// at `phi(rho)` inside `B_rho`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialBarrier {
    pub eps: f64,
    pub rho: f64,
    pub r_outer: f64,
    pub center: Point,
    pub dim: usize,
    pub c1: f64,
    pub mu_plus: f64,
    pub mu_minus: f64,
    k: f64,
}

impl RadialBarrier {
    pub fn new(
        eps: f64,
        rho: f64,
        r_outer: f64,
        center: Point,
        dim: usize,
        c1: f64,
    ) -> Result<Self> {
        if !(r_outer >= rho) {
            return Err(domain(format!(
                "need R >= rho, got R = {r_outer}, rho = {rho}"
            )));
        }
        if !(dim == 1 || dim == 2) {
            return Err(domain(format!(
                "radial barrier supports N = 1, 2, got {dim}"
            )));
        }
        let (mu_plus, mu_minus) = mu_pm(eps, rho, dim, c1)?;
        let k = 1.0
            / (1.0 - (mu_plus / mu_minus) * (-(mu_plus - mu_minus) * (r_outer - rho) / eps).exp());
        Ok(Self {
            eps,
            rho,
            r_outer,
            center,
            dim,
            c1,
            mu_plus,
            mu_minus,
            k,
        })
    }

    fn e1(&self, r: f64) -> f64 {
        (self.mu_plus * (r - self.r_outer) / self.eps).exp()
    }

    fn e2(&self, r: f64) -> f64 {
        (self.mu_plus / self.mu_minus)
            * (self.mu_plus * (self.rho - self.r_outer) / self.eps
                + self.mu_minus * (r - self.rho) / self.eps)
                .exp()
    }

    // phi = e1 g / g(R) with g(r) = 1 - (mu+/mu-) exp((mu- - mu+)(r - rho)/eps), so phi(R) = 1 exactly
    fn g(&self, r: f64) -> f64 {
        1.0 - (self.mu_plus / self.mu_minus)
            * ((self.mu_minus - self.mu_plus) * (r - self.rho) / self.eps).exp()
    }

    /// Radial profile `phi(r)` for `r in [rho, R]`.
    pub fn phi(&self, r: f64) -> f64 {
        self.e1(r) * self.g(r) / self.g(self.r_outer)
    }

    pub fn phi_prime(&self, r: f64) -> f64 {
        self.k
            * (self.mu_plus / self.eps)
            * (self.e1(r) - self.e2(r) * self.mu_minus / self.mu_plus)
    }

    pub fn phi_second(&self, r: f64) -> f64 {
        let e = self.eps * self.eps;
        self.k
            * (self.mu_plus * self.mu_plus * self.e1(r)
                - self.mu_minus * self.mu_minus * self.e2(r))
            / e
    }

    fn radius(&self, x: Point) -> f64 {
        let dx = x[0] - self.center[0];
        if self.dim == 1 {
            dx.abs()
        } else {
            dx.hypot(x[1] - self.center[1])
        }
    }

    fn psi_of_r(&self, r: f64) -> f64 {
        self.phi(r.max(self.rho))
    }

    /// Exact value of `-Delta psi + psi / (c1 eps^2)` at radius `r`.
    pub fn exact_operator(&self, r: f64) -> f64 {
        if r < self.rho {
            return self.phi(self.rho) / (self.c1 * self.eps * self.eps);
        }
        (self.dim as f64 - 1.0) * (1.0 / self.rho - 1.0 / r) * self.phi_prime(r)
    }
}

/// `psi(x)`; points outside `B_R(x0)` are a domain error.
pub fn eval_psi(b: &RadialBarrier, x: Point) -> Result<f64> {
    let r = b.radius(x);
    if r > b.r_outer * (1.0 + 1e-12) {
        return Err(domain(format!(
            "point at distance {r} lies outside B_R with R = {}",
            b.r_outer
        )));
    }
    Ok(b.psi_of_r(r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersolutionCheck {
    pub h: f64,
    /// Minimum over checked nodes of `-Delta_h psi + psi / (c1 eps^2)`.
    pub margin: f64,
    pub witness: Point,
    /// Largest `|discrete - exact|` operator value over checked nodes.
    pub truncation: f64,
    pub nodes_checked: usize,
}

/// Evaluates the discrete operator on the lattice `x0 + h Z^N`, at nodes
/// whose stencil lies in `B_R` and whose radius is not within `h` of `rho`.
/// Fails if the minimum margin is below `-c_tol h^2`.
pub fn discrete_supersolution_check(
    b: &RadialBarrier,
    h: f64,
    c_tol: f64,
) -> Result<SupersolutionCheck> {
    if !(h > 0.0 && h <= b.eps / 10.0 * (1.0 + 1e-12)) {
        return Err(domain(format!(
            "spacing must satisfy 0 < h <= eps / 10, got h = {h}, eps = {}",
            b.eps
        )));
    }
    let n = (b.r_outer / h).floor() as i64;
    let js: Vec<i64> = if b.dim == 2 {
        (-n..=n).collect()
    } else {
        vec![0]
    };
    let inv = 1.0 / (b.c1 * b.eps * b.eps);
    let inside = |p: Point| b.radius(p) <= b.r_outer * (1.0 + 1e-12);
    let psi = |p: Point| b.psi_of_r(b.radius(p));
    let mut out = SupersolutionCheck {
        h,
        margin: f64::INFINITY,
        witness: b.center,
        truncation: 0.0,
        nodes_checked: 0,
    };
    for &j in &js {
        for i in -n..=n {
            let p = [b.center[0] + i as f64 * h, b.center[1] + j as f64 * h];
            let r = b.radius(p);
            if (r - b.rho).abs() < h {
                continue;
            }
            let mut nbrs = vec![[p[0] - h, p[1]], [p[0] + h, p[1]]];
            if b.dim == 2 {
                nbrs.push([p[0], p[1] - h]);
                nbrs.push([p[0], p[1] + h]);
            }
            if !inside(p) || !nbrs.iter().all(|&q| inside(q)) {
                continue;
            }
            let c = psi(p);
            let lap = nbrs.iter().map(|&q| psi(q) - c).sum::<f64>() / (h * h);
            let m = -lap + c * inv;
            out.nodes_checked += 1;
            out.truncation = out.truncation.max((m - b.exact_operator(r)).abs());
            if m < out.margin {
                out.margin = m;
                out.witness = p;
            }
        }
    }
    if out.margin < -c_tol * h * h {
        return Err(Error::Check {
            check: "radial_supersolution".into(),
            witness: out.witness.to_vec(),
            margin: out.margin,
        });
    }
    Ok(out)
}

/// `3 theta1 eps exp(-eps^{-1/4} / (4 sqrt(c1)))`.
pub fn decay_bound(pot: &PotentialSpec, eps: f64) -> f64 {
    3.0 * pot.theta1 * eps * (-(eps.powf(-0.25)) / (4.0 * pot.c1.sqrt())).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub bound: f64,
    pub max_value_in_ball: f64,
    pub margin: f64,
    pub pass: bool,
    pub nodes_in_ball: usize,
}

/// Checks `u <= 3 theta1 eps exp(-eps^{-1/4} / (4 sqrt c1))` on
/// `B_{eps^{3/4} / 2}(x0)`, given `B_{eps^{3/4}}(x0) ⊂ {u <= theta1 eps}`.
pub fn decay_certificate(
    u: &GridField,
    pot: &PotentialSpec,
    eps: f64,
    x0: Point,
) -> Result<DecayReport> {
    if !(eps > 0.0) {
        return Err(domain(format!("eps must be positive, got {eps}")));
    }
    let r = eps.powf(0.75);
    if !u.contains_ball(x0, r) {
        return Err(domain(format!(
            "ball of radius eps^(3/4) = {r} around {x0:?} leaves the grid"
        )));
    }
    let level = pot.theta1 * eps;
    let offending: Vec<Vec<f64>> = u
        .ball_nodes(x0, r)
        .into_iter()
        .filter(|&k| u.values[k] > level)
        .map(|k| u.point(k)[..u.dim].to_vec())
        .collect();
    if !offending.is_empty() {
        return Err(Error::Precondition {
            reason: format!("B_(eps^(3/4))(x0) is not inside {{u <= {level:e}}}"),
            nodes: offending,
        });
    }
    let inner = u.ball_nodes(x0, 0.5 * r);
    let max_value_in_ball = inner
        .iter()
        .map(|&k| u.values[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let bound = decay_bound(pot, eps);
    let margin = bound - max_value_in_ball;
    Ok(DecayReport {
        bound,
        max_value_in_ball,
        margin,
        pass: margin >= 0.0,
        nodes_in_ball: inner.len(),
    })
}

/// Largest rung of a decreasing `eps` ladder from which on the two
/// conditions `mu_plus >= 1 / (2 sqrt c1)` and `-mu_plus / mu_minus <= 2`
/// hold, with `R = eps^{3/4}` and `rho = R / 2`.
pub fn decay_eps0(dim: usize, c1: f64, ladder: &[f64]) -> Result<f64> {
    let mut eps0 = 0.0;
    for &eps in ladder.iter().rev() {
        let rho = 0.5 * eps.powf(0.75);
        let (mp, mm) = mu_pm(eps, rho, dim, c1)?;
        if !(mp >= 0.5 / c1.sqrt() && -mp / mm <= 2.0) {
            break;
        }
        eps0 = eps;
    }
    Ok(eps0)
}
