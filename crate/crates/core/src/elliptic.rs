//! Discrete energy `E_eps(u) = sum_cells h^N (|grad_h u|^2 + Phi_eps(u))`
//! and solvers for its critical points `Delta_h u = Phi_eps'(u) / 2`.
//!
//! The cell gradient is the mean of the squared edge differences of the
//! cell and the potential is the corner average. With this choice the
//! gradient of the discrete energy at an interior node is
//! `h^N (-2 Delta_h u + Phi_eps'(u))`, i.e. `-2 h^N` times the residual of
//! the 5-point (3-point in 1D) scheme.
//!
//! For `h <= eps / 8` the one-node energy
//! `v -> sum_nbrs (v - u_n)^2 + h^2 Phi_eps(v)` is strictly convex, so the
//! node updates below are exact coordinate minimizations.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::grid::{GridField, Point, SolveInfo};
use crate::potential::{PotentialSpec, Scaled};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sweep {
    /// Two-color ordering; each color is updated in parallel.
    RedBlack,
    /// Natural ordering, single-threaded.
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Explicit descent step in units of `h^2`.
    pub descent_step: f64,
    pub armijo_factor: f64,
    pub sweep: Sweep,
}

impl SolveConfig {
    /// Stopping rule `1e-8` in 1D and `1e-6` in 2D, at most `1e5` sweeps.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            residual_tol: if dim == 1 { 1e-8 } else { 1e-6 },
            max_iterations: 100_000,
            descent_step: 0.1,
            armijo_factor: 1e-4,
            sweep: Sweep::RedBlack,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0
            && self.descent_step > 0.0
            && self.armijo_factor > 0.0
            && self.armijo_factor < 1.0)
        {
            return Err(domain(format!(
                "solver config needs residual_tol > 0, descent_step > 0 and armijo_factor in (0, 1), got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Dirichlet values on the outer layer of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    template: GridField,
}

impl DirichletData {
    /// Takes the outer layer of `field`; interior values are ignored.
    pub fn from_field(field: &GridField) -> Self {
        let mut template = field.clone();
        for k in 0..template.len() {
            if !template.is_boundary(k) {
                template.values[k] = 0.0;
            }
        }
        template.info = None;
        Self { template }
    }

    pub fn from_fn<F: Fn(Point) -> f64>(grid: &GridField, f: F) -> Self {
        let mut template = grid.clone();
        for k in 0..template.len() {
            template.values[k] = if template.is_boundary(k) {
                f(template.point(k))
            } else {
                0.0
            };
        }
        template.info = None;
        Self { template }
    }

    pub fn grid(&self) -> &GridField {
        &self.template
    }

    pub fn is_zero(&self) -> bool {
        self.template.values.iter().all(|&v| v == 0.0)
    }

    /// Field with this boundary layer and the interior of `init`.
    pub fn impose(&self, init: &GridField) -> Result<GridField> {
        if init.shape != self.template.shape
            || init.h != self.template.h
            || init.origin != self.template.origin
        {
            return Err(domain(
                "initial field and boundary data live on different grids",
            ));
        }
        let mut out = init.clone();
        for k in 0..out.len() {
            if out.is_boundary(k) {
                out.values[k] = self.template.values[k];
            }
        }
        Ok(out)
    }

    fn matches(&self, init: &GridField) -> Result<()> {
        if init.shape != self.template.shape
            || init.h != self.template.h
            || init.origin != self.template.origin
        {
            return Err(domain(
                "initial field and boundary data live on different grids",
            ));
        }
        let bad: Vec<Vec<f64>> = (0..init.len())
            .filter(|&k| init.is_boundary(k) && init.values[k] != self.template.values[k])
            .take(16)
            .map(|k| init.point(k)[..init.dim].to_vec())
            .collect();
        if !bad.is_empty() {
            return Err(Error::Precondition {
                reason: "initial field differs from the boundary data".into(),
                nodes: bad,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub dirichlet: f64,
    pub potential: f64,
    pub total: f64,
}

fn cell_sums<F: Fn(f64) -> f64>(u: &GridField, node_pot: F) -> (f64, f64) {
    let h = u.h;
    let v = &u.values;
    let p: Vec<f64> = v.iter().map(|&x| node_pot(x)).collect();
    let (mut grad, mut pot) = (0.0, 0.0);
    if u.dim == 1 {
        for i in 0..u.nx() - 1 {
            let d = v[i + 1] - v[i];
            grad += d * d / h;
            pot += 0.5 * (p[i] + p[i + 1]) * h;
        }
    } else {
        let nx = u.nx();
        for j in 0..u.ny() - 1 {
            let mut rg = 0.0;
            let mut rp = 0.0;
            for i in 0..nx - 1 {
                let a = j * nx + i;
                let (b, c, d) = (a + 1, a + nx, a + nx + 1);
                let dx1 = v[b] - v[a];
                let dx2 = v[d] - v[c];
                let dy1 = v[c] - v[a];
                let dy2 = v[d] - v[b];
                rg += 0.5 * (dx1 * dx1 + dx2 * dx2 + dy1 * dy1 + dy2 * dy2);
                rp += 0.25 * (p[a] + p[b] + p[c] + p[d]);
            }
            grad += rg;
            pot += rp * h * h;
        }
    }
    (grad, pot)
}

/// Discrete `E_eps`, split into Dirichlet and potential parts.
pub fn energy_eps(pot: &PotentialSpec, u: &GridField, eps: f64) -> Result<EnergyReport> {
    let s = pot.scaled(eps)?;
    let (dirichlet, potential) = cell_sums(u, |x| s.phi(x));
    Ok(EnergyReport {
        dirichlet,
        potential,
        total: dirichlet + potential,
    })
}

/// Discrete sharp-interface energy; a cell counts as positive when the
/// mean of its corner values is positive.
pub fn energy_one_phase(u: &GridField) -> f64 {
    let h = u.h;
    let v = &u.values;
    let (grad, _) = cell_sums(u, |_| 0.0);
    let mut area = 0.0;
    if u.dim == 1 {
        for i in 0..u.nx() - 1 {
            if v[i] + v[i + 1] > 0.0 {
                area += h;
            }
        }
    } else {
        let nx = u.nx();
        for j in 0..u.ny() - 1 {
            for i in 0..nx - 1 {
                let a = j * nx + i;
                if v[a] + v[a + 1] + v[a + nx] + v[a + nx + 1] > 0.0 {
                    area += h * h;
                }
            }
        }
    }
    grad + area
}

#[inline]
fn laplacian_at(u: &GridField, k: usize) -> f64 {
    let v = &u.values;
    let h2 = u.h * u.h;
    if u.dim == 1 {
        (v[k - 1] - 2.0 * v[k] + v[k + 1]) / h2
    } else {
        let nx = u.nx();
        (v[k - 1] + v[k + 1] + v[k - nx] + v[k + nx] - 4.0 * v[k]) / h2
    }
}

/// `Delta_h u - Phi_eps'(u) / 2` at interior nodes, zero on the boundary.
pub fn residual(pot: &PotentialSpec, u: &GridField, eps: f64) -> Result<GridField> {
    let s = pot.scaled(eps)?;
    let mut out = u.clone();
    out.info = None;
    out.values = (0..u.len())
        .into_par_iter()
        .map(|k| {
            if u.is_boundary(k) {
                0.0
            } else {
                laplacian_at(u, k) - s.reaction(u.values[k])
            }
        })
        .collect();
    Ok(out)
}

/// Sup norm of [`residual`].
pub fn residual_sup(pot: &PotentialSpec, u: &GridField, eps: f64) -> Result<f64> {
    let s = pot.scaled(eps)?;
    Ok(residual_sup_scaled(&s, u))
}

fn residual_sup_scaled(s: &Scaled<'_>, u: &GridField) -> f64 {
    (0..u.len())
        .into_par_iter()
        .map(|k| {
            if u.is_boundary(k) {
                0.0
            } else {
                (laplacian_at(u, k) - s.reaction(u.values[k])).abs()
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// Smallest residual resolvable in double precision for this field:
/// `64 eps_mach max|u| / h^2`.
pub fn roundoff_floor(u: &GridField) -> f64 {
    64.0 * f64::EPSILON * u.max_abs() / (u.h * u.h)
}

/// Residual tolerance actually enforced: the requested one, lifted to the
/// round-off floor of the field.
pub fn effective_tolerance(u: &GridField, requested: f64) -> f64 {
    requested.max(roundoff_floor(u))
}

fn check_resolution(u: &GridField, eps: f64) -> Result<()> {
    if u.h > eps / 8.0 * (1.0 + 1e-9) {
        return Err(domain(format!(
            "grid spacing h = {} does not resolve eps = {eps} (need h <= eps / 8)",
            u.h
        )));
    }
    Ok(())
}

/// Upper bound for `Phi_eps'` used to bracket the one-node problem.
fn dphi_max(s: &Scaled<'_>) -> f64 {
    let pot = s.pot;
    let n = 4096;
    let m = (0..=n)
        .map(|k| pot.beta(pot.support_right * k as f64 / n as f64))
        .fold(0.0, f64::max);
    1.01 * m / s.eps + 1e-300
}

/// Minimizer of `(d v - sum) + (h^2 / 2) Phi_eps'(v) = 0`, the stationarity
/// condition of the one-node energy; bracketed Newton.
#[inline]
fn node_solve(s: &Scaled<'_>, half_h2: f64, d: f64, sum: f64, start: f64, gmax: f64) -> f64 {
    let mut hi = sum / d;
    let mut lo = (sum - half_h2 * gmax) / d;
    let mut v = start.clamp(lo, hi);
    for _ in 0..30 {
        let g = d * v - sum + half_h2 * s.dphi(v);
        if g == 0.0 {
            return v;
        }
        if g > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let dg = d + half_h2 * s.ddphi(v);
        let mut next = v - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - v).abs();
        v = next;
        if step <= 1e-15 * (v.abs() + s.eps) || hi - lo <= 1e-15 * (v.abs() + s.eps) {
            break;
        }
    }
    v
}

fn sor_half_sweep(
    s: &Scaled<'_>,
    u: &GridField,
    next: &mut [f64],
    color: usize,
    omega: f64,
    gmax: f64,
) {
    let nx = u.nx();
    let ny = u.ny();
    let half_h2 = 0.5 * u.h * u.h;
    let v = &u.values;
    next.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        row.copy_from_slice(&v[j * nx..(j + 1) * nx]);
        if j == 0 || j + 1 == ny {
            return;
        }
        let start = 1 + (j + 1 + color) % 2;
        let mut i = start;
        while i + 1 < nx {
            let k = j * nx + i;
            let sum = v[k - 1] + v[k + 1] + v[k - nx] + v[k + nx];
            let star = node_solve(s, half_h2, 4.0, sum, v[k], gmax);
            row[i] = v[k] + omega * (star - v[k]);
            i += 2;
        }
    });
}

fn sor_lexicographic(s: &Scaled<'_>, u: &mut GridField, omega: f64, gmax: f64) {
    let nx = u.nx();
    let half_h2 = 0.5 * u.h * u.h;
    let (d, stride) = if u.dim == 1 { (2.0, 0) } else { (4.0, nx) };
    for k in 0..u.len() {
        if u.is_boundary(k) {
            continue;
        }
        let v = &u.values;
        let mut sum = v[k - 1] + v[k + 1];
        if stride > 0 {
            sum += v[k - stride] + v[k + stride];
        }
        let star = node_solve(s, half_h2, d, sum, v[k], gmax);
        u.values[k] = v[k] + omega * (star - v[k]);
    }
}

const STALL_CHECKS: usize = 10;

/// Nonlinear SOR in 2D.
fn solve_sor(s: &Scaled<'_>, mut u: GridField, cfg: &SolveConfig) -> Result<GridField> {
    let gmax = dphi_max(s);
    let n = u.nx().max(u.ny()) as f64;
    let mut omega = 2.0 / (1.0 + (std::f64::consts::PI / (n - 1.0)).sin());
    let mut scratch = vec![0.0; u.len()];
    let check_every = 10;
    let mut best = f64::INFINITY;
    let mut best_field = u.clone();
    let mut res = residual_sup_scaled(s, &u);
    let mut it = 0;
    let mut stall = 0;
    let mut window = STALL_CHECKS;
    while it < cfg.max_iterations {
        let tol = effective_tolerance(&u, cfg.residual_tol);
        if res <= tol {
            break;
        }
        for _ in 0..check_every {
            match cfg.sweep {
                Sweep::RedBlack if u.dim == 2 => {
                    for color in 0..2 {
                        sor_half_sweep(s, &u, &mut scratch, color, omega, gmax);
                        std::mem::swap(&mut u.values, &mut scratch);
                    }
                }
                _ => sor_lexicographic(s, &mut u, omega, gmax),
            }
            it += 1;
        }
        res = residual_sup_scaled(s, &u);
        if !res.is_finite() || res > 1e3 * best.max(1e-300) && best.is_finite() {
            // divergence: restart from the best iterate with less over-relaxation
            u = best_field.clone();
            res = best;
            omega = 1.0 + 0.5 * (omega - 1.0);
            continue;
        }
        if res < 0.95 * best {
            stall = 0;
        } else {
            stall += 1;
        }
        if res < best {
            best = res;
            best_field.values.copy_from_slice(&u.values);
        }
        if stall >= window {
            // over-relaxed sweeps stagnate near the solution; try to finish with Newton
            let tol = effective_tolerance(&best_field, cfg.residual_tol);
            let polished = newton_polish_2d(s, best_field.clone(), tol, 30);
            let r = residual_sup_scaled(s, &polished);
            if r < best {
                best = r;
                best_field.values.copy_from_slice(&polished.values);
            }
            u = polished;
            res = r;
            if res <= tol {
                break;
            }
            stall = 0;
            window *= 2;
        }
    }
    let tol = effective_tolerance(&u, cfg.residual_tol);
    if res > tol {
        return Err(Error::Convergence {
            iterations: it,
            residual: res,
            best: Box::new(u),
        });
    }
    u.info = Some(SolveInfo {
        iterations: it,
        residual: res,
        energy: 0.0,
    });
    Ok(u)
}

/// `(-Delta_h + Phi_eps''(u) / 2) x` on interior nodes, zero on the boundary.
fn apply_jacobian(u: &GridField, react: &[f64], x: &[f64], out: &mut [f64]) {
    let nx = u.nx();
    let inv_h2 = 1.0 / (u.h * u.h);
    out.par_iter_mut().enumerate().for_each(|(k, o)| {
        *o = if u.is_boundary(k) {
            0.0
        } else {
            (4.0 * x[k] - x[k - 1] - x[k + 1] - x[k - nx] - x[k + nx]) * inv_h2 + react[k] * x[k]
        };
    });
}

fn dot_serial(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients for the Newton correction;
/// `None` if the operator shows a non-positive curvature direction.
fn newton_direction(
    u: &GridField,
    react: &[f64],
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Option<Vec<f64>> {
    let n = u.len();
    let inv_h2 = 1.0 / (u.h * u.h);
    let minv: Vec<f64> = (0..n)
        .map(|k| {
            if u.is_boundary(k) {
                0.0
            } else {
                1.0 / (4.0 * inv_h2 + react[k])
            }
        })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot_serial(&r, &z);
    let r0 = dot_serial(&r, &r).sqrt();
    if r0 == 0.0 {
        return Some(x);
    }
    for _ in 0..max_iter {
        apply_jacobian(u, react, &p, &mut ap);
        let pap = dot_serial(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        if dot_serial(&r, &r).sqrt() <= rel_tol * r0 {
            break;
        }
        for k in 0..n {
            z[k] = r[k] * minv[k];
        }
        let rz_new = dot_serial(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Some(x)
}

/// Damped Newton on the 2D discrete equation, started from an SOR iterate.
fn newton_polish_2d(s: &Scaled<'_>, mut u: GridField, tol: f64, steps: usize) -> GridField {
    let n = u.len();
    let mut res = residual_sup_scaled(s, &u);
    let cg_iter = 20 * (u.nx() + u.ny());
    for _ in 0..steps {
        if res <= tol {
            break;
        }
        let react: Vec<f64> = u.values.iter().map(|&v| 0.5 * s.ddphi(v)).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|k| {
                if u.is_boundary(k) {
                    0.0
                } else {
                    laplacian_at(&u, k) - s.reaction(u.values[k])
                }
            })
            .collect();
        // rhs = Delta u - Phi'/2 = -F(u) with F = -Delta u + Phi'/2, so J dx = rhs.
        let Some(dx) = newton_direction(&u, &react, &rhs, 1e-4, cg_iter) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-4 {
            let mut trial = u.clone();
            for k in 0..n {
                trial.values[k] += t * dx[k];
            }
            let r = residual_sup_scaled(s, &trial);
            if r < res {
                u = trial;
                res = r;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    u
}

/// Solves the tridiagonal system `(-1, diag_i, -1) x = rhs` on interior
/// nodes; `None` on a pivot of modulus below `min_pivot` (a non-positive
/// pivot if `definite`).
fn thomas(diag: &[f64], rhs: &[f64], definite: bool) -> Option<Vec<f64>> {
    const MIN_PIVOT: f64 = 1e-12;
    let bad = |p: f64| if definite { p <= MIN_PIVOT } else { p.abs() <= MIN_PIVOT };
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if bad(piv) {
        return None;
    }
    c[0] = -1.0 / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] + c[i - 1];
        if bad(piv) {
            return None;
        }
        c[i] = -1.0 / piv;
        d[i] = (rhs[i] + d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Some(x)
}

/// Newton's method with a tridiagonal solve and energy backtracking (1D).
fn solve_newton_1d(s: &Scaled<'_>, mut u: GridField, cfg: &SolveConfig) -> Result<GridField> {
    let n = u.nx();
    let h2 = u.h * u.h;
    let energy = |f: &GridField| {
        let (g, p) = cell_sums(f, |x| s.phi(x));
        g + p
    };
    let mut e = energy(&u);
    let mut res = residual_sup_scaled(s, &u);
    let mut it = 0;
    while res > effective_tolerance(&u, cfg.residual_tol) {
        if it >= cfg.max_iterations {
            return Err(Error::Convergence {
                iterations: it,
                residual: res,
                best: Box::new(u),
            });
        }
        it += 1;
        let v = u.values.clone();
        let rhs: Vec<f64> = (1..n - 1)
            .map(|i| v[i - 1] - 2.0 * v[i] + v[i + 1] - 0.5 * h2 * s.dphi(v[i]))
            .collect();
        let mut accepted = false;
        for modified in [false, true] {
            let diag: Vec<f64> = (1..n - 1)
                .map(|i| {
                    let c = 0.5 * h2 * s.ddphi(v[i]);
                    2.0 + if modified { c.max(0.0) } else { c }
                })
                .collect();
            // the exact Hessian may be indefinite away from the solution
            let Some(step) = thomas(&diag, &rhs, modified) else {
                continue;
            };
            // energy gradient is -2 h * residual; slope along the step
            let slope: f64 = -2.0 / u.h * rhs.iter().zip(&step).map(|(r, d)| r * d).sum::<f64>();
            if !modified && !(slope < 0.0) {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..40 {
                let mut trial = u.clone();
                for i in 1..n - 1 {
                    trial.values[i] = v[i] + alpha * step[i - 1];
                }
                let et = energy(&trial);
                let rt = residual_sup_scaled(s, &trial);
                if et <= e + cfg.armijo_factor * alpha * slope.min(0.0)
                    || (rt < res && et <= e + 1e-13 * e.abs())
                {
                    u = trial;
                    e = et;
                    res = rt;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::Convergence {
                iterations: it,
                residual: res,
                best: Box::new(u),
            });
        }
    }
    u.info = Some(SolveInfo {
        iterations: it,
        residual: res,
        energy: e,
    });
    Ok(u)
}

/// Finds a critical point of the discrete energy with the given boundary
/// data, starting from `init`.
pub fn solve_critical(
    pot: &PotentialSpec,
    boundary: &DirichletData,
    eps: f64,
    init: &GridField,
    cfg: &SolveConfig,
) -> Result<GridField> {
    let s = pot.scaled(eps)?;
    cfg.validate()?;
    boundary.matches(init)?;
    check_resolution(init, eps)?;
    let mut u = init.clone();
    u.eps = eps;
    if boundary.is_zero() {
        u.values.iter_mut().for_each(|v| *v = 0.0);
        u.info = Some(SolveInfo {
            iterations: 0,
            residual: 0.0,
            energy: 0.0,
        });
        return Ok(u);
    }
    let mut out = if u.dim == 1 {
        solve_newton_1d(&s, u, cfg)?
    } else {
        solve_sor(&s, u, cfg)?
    };
    let min = out.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -cfg.residual_tol {
        return Err(domain(format!("solver produced a negative value {min}")));
    }
    // negatives above -residual_tol are round-off around the zero phase
    out.values.iter_mut().for_each(|v| *v = v.max(0.0));
    let e = energy_eps(pot, &out, eps)?.total;
    if let Some(info) = out.info.as_mut() {
        info.energy = e;
    }
    Ok(out)
}

/// Energy descent followed by [`solve_critical`]; also returns the energy
/// of every accepted descent step.
pub fn minimize_energy_logged(
    pot: &PotentialSpec,
    boundary: &DirichletData,
    eps: f64,
    init: &GridField,
    cfg: &SolveConfig,
    descent_steps: usize,
) -> Result<(GridField, Vec<f64>)> {
    let s = pot.scaled(eps)?;
    cfg.validate()?;
    boundary.matches(init)?;
    check_resolution(init, eps)?;
    let mut u = init.clone();
    u.eps = eps;
    let energy = |f: &GridField| {
        let (g, p) = cell_sums(f, |x| s.phi(x));
        g + p
    };
    let mut e = energy(&u);
    let mut log = vec![e];
    let base = cfg.descent_step * u.h * u.h;
    for _ in 0..descent_steps {
        let r = residual_sup_scaled(&s, &u);
        if r <= effective_tolerance(&u, cfg.residual_tol) {
            break;
        }
        let res = residual(pot, &u, eps)?;
        // descent direction 2 * residual = -(dE/du) / h^N
        let g2: f64 = res.values.iter().map(|r| 4.0 * r * r).sum::<f64>() * u.h.powi(u.dim as i32);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial = u.clone();
            for (t, r) in trial.values.iter_mut().zip(&res.values) {
                *t += alpha * base * 2.0 * r;
            }
            let et = energy(&trial);
            if et < e - cfg.armijo_factor * alpha * base * g2 {
                u = trial;
                e = et;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        let prev = *log.last().unwrap();
        log.push(e);
        if prev - e <= cfg.residual_tol * e.abs().max(1.0) * u.h {
            break;
        }
    }
    let polished = solve_critical(pot, boundary, eps, &u, cfg)?;
    let direct = solve_critical(pot, boundary, eps, init, cfg)?;
    let ep = energy_eps(pot, &polished, eps)?.total;
    let ed = energy_eps(pot, &direct, eps)?.total;
    Ok((if ep <= ed { polished } else { direct }, log))
}

/// Energy descent with backtracking, polished by [`solve_critical`]. The
/// result has energy no larger than the direct critical point from `init`.
pub fn minimize_energy(
    pot: &PotentialSpec,
    boundary: &DirichletData,
    eps: f64,
    init: &GridField,
    cfg: &SolveConfig,
) -> Result<GridField> {
    Ok(minimize_energy_logged(pot, boundary, eps, init, cfg, 500)?.0)
}

/// `eps * u(x / eps)` resampled on `[-1, 1]^N` with spacing `factor * h`.
pub fn blowdown(u: &GridField, factor: f64) -> Result<GridField> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(domain(format!(
            "blow-down factor must lie in (0, 1], got {factor}"
        )));
    }
    let reach = 1.0 / factor;
    if !u.contains_ball([0.0, 0.0], reach)
        || (u.dim == 2 && {
            let (lo, hi) = u.bounds();
            lo[0] > -reach || lo[1] > -reach || hi[0] < reach || hi[1] < reach
        })
    {
        return Err(domain(format!(
            "source field does not cover [-{reach}, {reach}]^N"
        )));
    }
    let n = ((2.0 / (factor * u.h)).round() as usize + 1).max(3);
    // sharp fields stay sharp
    let mut out = GridField::centered_box(u.dim, 1.0, n, factor * u.eps)?;
    let mut missing = false;
    for k in 0..out.len() {
        let p = out.point(k);
        match u.interpolate([p[0] / factor, p[1] / factor]) {
            Some(v) => out.values[k] = factor * v,
            None => missing = true,
        }
    }
    if missing {
        return Err(domain("blow-down target leaves the source grid"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles1d::{make_profile, ProfileKind};

    fn pot() -> PotentialSpec {
        PotentialSpec::polynomial()
    }

    #[test]
    fn energy_trivial_cases() {
        let z = GridField::centered_box(2, 0.5, 21, 0.0).unwrap();
        assert_eq!(energy_eps(&pot(), &z, 0.1).unwrap().total, 0.0);
        let mut c = z.clone();
        c.values.iter_mut().for_each(|v| *v = 1.1);
        let r = energy_eps(&pot(), &c, 0.1).unwrap();
        assert_eq!(r.dirichlet, 0.0);
        assert!((r.potential - 1.0).abs() < 1e-12);
        assert_eq!(energy_one_phase(&z), 0.0);
    }

    #[test]
    fn one_phase_energy_of_half_plane() {
        let u = GridField::from_fn(&[65, 65], 1.0 / 64.0, &[-0.5, -0.5], 0.0, |p| p[0].max(0.0))
            .unwrap();
        assert!((energy_one_phase(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_gradient_is_minus_two_residual() {
        let u = GridField::from_fn(&[9, 7], 0.01, &[0.0, 0.0], 0.1, |p| {
            0.03 + 0.2 * p[0] + 0.5 * p[1] * p[1]
        })
        .unwrap();
        let res = residual(&pot(), &u, 0.1).unwrap();
        let k = u.index(4, 3);
        let dh = 1e-7;
        let mut a = u.clone();
        let mut b = u.clone();
        a.values[k] += dh;
        b.values[k] -= dh;
        let fd = (energy_eps(&pot(), &a, 0.1).unwrap().total
            - energy_eps(&pot(), &b, 0.1).unwrap().total)
            / (2.0 * dh);
        let expect = -2.0 * u.h * u.h * res.values[k];
        assert!(
            (fd - expect).abs() < 1e-7 * expect.abs().max(1e-3),
            "{fd} vs {expect}"
        );
    }

    #[test]
    fn residual_trivial_cases() {
        let z = GridField::centered_box(2, 0.5, 11, 0.0).unwrap();
        assert_eq!(residual_sup(&pot(), &z, 0.1).unwrap(), 0.0);
        let mut c = z.clone();
        c.values.iter_mut().for_each(|v| *v = 3.0);
        assert_eq!(residual_sup(&pot(), &c, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn zero_data_short_circuits() {
        let g = GridField::centered_box(2, 0.5, 17, 0.1).unwrap();
        let bc = DirichletData::from_field(&g);
        let mut init = g.clone();
        let k = init.index(8, 8);
        init.values[k] = 0.3;
        let out = solve_critical(&pot(), &bc, 0.5, &init, &SolveConfig::for_dim(2)).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_dimensional_profile_is_recovered() {
        let eps = 0.05;
        let prof = make_profile(&pot(), eps, ProfileKind::Monotone, 1e-12).unwrap();
        let h = eps / 16.0;
        let n = (1.0 / h).round() as usize + 1;
        let exact = GridField::from_fn(&[n], h, &[-0.5], eps, |p| prof.eval(p[0])).unwrap();
        let bc = DirichletData::from_field(&exact);
        let mut init = exact.clone();
        let (a, b) = (exact.values[0], exact.values[n - 1]);
        for i in 0..n {
            init.values[i] = a + (b - a) * i as f64 / (n - 1) as f64;
        }
        let u = solve_critical(&pot(), &bc, eps, &init, &SolveConfig::for_dim(1)).unwrap();
        let err = u.sup_distance(&exact).unwrap();
        assert!(err <= 10.0 * h * h, "{err} vs {}", 10.0 * h * h);
    }

    #[test]
    fn planar_two_dimensional_solve() {
        let eps = 0.1;
        let prof = make_profile(&pot(), eps, ProfileKind::Monotone, 1e-12).unwrap();
        let g = GridField::centered_box(2, 0.5, 81, eps).unwrap();
        let bc = DirichletData::from_fn(&g, |p| prof.eval(p[1]));
        let init = bc
            .impose(
                &GridField::from_fn(&[81, 81], g.h, &[-0.5, -0.5], eps, |p| p[1].max(0.0)).unwrap(),
            )
            .unwrap();
        let u = solve_critical(&pot(), &bc, eps, &init, &SolveConfig::for_dim(2)).unwrap();
        let exact =
            GridField::from_fn(&[81, 81], g.h, &[-0.5, -0.5], eps, |p| prof.eval(p[1])).unwrap();
        assert!(u.sup_distance(&exact).unwrap() < 10.0 * g.h * g.h);
        assert!(u.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn descent_log_decreases() {
        let eps = 0.1;
        let g = GridField::centered_box(2, 0.5, 81, eps).unwrap();
        let bc = DirichletData::from_field(&g);
        let mut init = g.clone();
        for k in 0..init.len() {
            if !init.is_boundary(k) {
                init.values[k] = eps;
            }
        }
        let (u, log) =
            minimize_energy_logged(&pot(), &bc, eps, &init, &SolveConfig::for_dim(2), 50).unwrap();
        assert!(log.len() > 2);
        assert!(log.windows(2).all(|w| w[1] < w[0]));
        assert!(u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn blowdown_identity_and_coverage() {
        let u = GridField::from_fn(&[41, 41], 0.05, &[-1.0, -1.0], 1.0, |p| p[1].max(0.0)).unwrap();
        let same = blowdown(&u, 1.0).unwrap();
        assert!(same.sup_distance(&u).unwrap() < 1e-15);
        let half = blowdown(&u, 0.5);
        assert!(half.is_err());
        let big =
            GridField::from_fn(&[81, 81], 0.05, &[-2.0, -2.0], 1.0, |p| p[1].max(0.0)).unwrap();
        let d = blowdown(&big, 0.5).unwrap();
        for k in 0..d.len() {
            assert!((d.values[k] - d.point(k)[1].max(0.0)).abs() < 1e-14);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn energy_gradient_matches_residual(seed in proptest::collection::vec(0.0f64..0.2, 49), k in 0usize..25) {
                let eps = 0.1;
                let mut u = GridField::centered_box(2, 0.5, 7, eps).unwrap();
                u.values.copy_from_slice(&seed);
                let (i, j) = (1 + k % 5, 1 + k / 5);
                let node = u.index(i, j);
                let d = 1e-6;
                let mut up = u.clone();
                up.values[node] += d;
                let mut dn = u.clone();
                dn.values[node] -= d;
                // oracle: central difference of the energy
                let fd = (energy_eps(&pot(), &up, eps).unwrap().total - energy_eps(&pot(), &dn, eps).unwrap().total) / (2.0 * d);
                let r = residual(&pot(), &u, eps).unwrap().values[node];
                let g = -2.0 * u.h * u.h * r;
                prop_assert!((fd - g).abs() < 1e-6 * (1.0 + g.abs()), "{fd} vs {g}");
            }

            #[test]
            fn constants_above_theta2_have_zero_residual(c in 1.0f64..5.0, eps in 0.01f64..1.0) {
                let mut u = GridField::centered_box(2, 0.5, 9, eps).unwrap();
                u.values.iter_mut().for_each(|v| *v = c * eps + 1e-9);
                prop_assert_eq!(residual_sup(&pot(), &u, eps).unwrap(), 0.0);
            }
        }
    }
}
