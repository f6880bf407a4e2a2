//! One function per suite: run the module checks over the configured
//! ladders and collect verdict rows and measured curves.

use std::f64::consts::{FRAC_PI_2, PI};

use onephase_core::analysis::{
    best_direction, contraction_ratio, flat_equivalence_probe, hausdorff_distance,
    improvement_curve, lipschitz_sup, nondegeneracy, trap_shifts, weiss, weiss_series, Barriers,
};
use onephase_core::elliptic::{blowdown, residual_sup};
use onephase_core::potential::certification_margins;
use onephase_core::profiles1d::{
    frozen_diameter_constant, make_barrier, make_profile, min_of_vshaped, root_of_super,
    shift_comparison_check, super_barrier_eps_limit, transition_diameter, ProfileKind, Side,
};
use onephase_core::supersolutions::{
    decay_bound, decay_certificate, decay_eps0, discrete_supersolution_check, RadialBarrier,
};
use onephase_core::{Error, GridField, Point, PotentialSpec};
use rayon::prelude::*;

use crate::config::{Boundary, ExperimentConfig, Suite};
use crate::error::HResult;
use crate::fields::{nearest_band_node, nodes_for, solve_with_data, square, Data, PROFILE_TOL};
use crate::oracle::shoot;
use crate::report::{Curve, Row, SuiteReport};

pub mod anchor {
    pub const POTENTIAL: &str = "potential: structural inequalities on beta and Phi";
    pub const ODE: &str = "1D solutions: ODE and Hamiltonian conservation";
    pub const ROOT: &str = "1D solutions: root bound of the super-linear profile";
    pub const MINIMUM: &str = "1D solutions: minimum bounds of the V-shaped profile";
    pub const DIAMETER: &str = "truncated barriers: transition-band diameter";
    pub const SHIFTS: &str = "truncated barriers: shifted comparisons";
    pub const RADIAL: &str = "radial super-solution: discrete operator sign";
    pub const DECAY: &str = "exponential decay below the band";
    pub const ORDER: &str = "solver: second-order consistency";
    pub const SOLVE: &str = "solver: convergence of the nonlinear iteration";
    pub const WEISS: &str = "Weiss functional: monotonicity";
    pub const WEISS_HALF: &str = "Weiss functional: homogeneous half-plane value";
    pub const WEISS_SCALING: &str = "Weiss functional: blow-down scaling";
    pub const EQUIVALENCE: &str = "flatness: Flat1/Flat2 equivalence";
    pub const TRAP: &str = "improvement of oscillation: trap contraction";
    pub const IMPROVEMENT: &str = "improvement of flatness: deficit contraction";
    pub const DRIFT: &str = "improvement of flatness: direction drift";
    pub const LIPSCHITZ: &str = "uniform Lipschitz estimate";
    pub const NONDEGENERACY: &str = "uniform non-degeneracy";
    pub const BLOWDOWN: &str = "blow-down: uniform closeness to a half-plane solution";
    pub const INCLUSION: &str = "blow-down: sublevel-set inclusions";
}

/// Frozen lower bound `c_kappa` for `sup_{B_r(z)} u / r` at `r = 10 eps` on band points.
pub const NONDEGENERACY_C: f64 = 0.5;

pub fn run(cfg: &ExperimentConfig) -> HResult<SuiteReport> {
    let pot = PotentialSpec::by_name(&cfg.potential)?;
    match cfg.experiment {
        Suite::Certify => certify(cfg, &pot),
        Suite::Profile => profile(cfg, &pot),
        Suite::Barriers => barriers(cfg, &pot),
        Suite::Decay => decay(cfg, &pot),
        Suite::Solve => solve(cfg, &pot),
        Suite::Weiss => weiss_suite(cfg, &pot),
        Suite::Flatness => flatness(cfg, &pot),
        Suite::Blowdown => blowdown_probe(cfg, &pot),
    }
}

/// Row from a checked computation: a failed check becomes a failing row
/// carrying its margin.
fn checked(check: String, anchor: &str, hyp: bool, res: Result<f64, Error>) -> HResult<Row> {
    match res {
        Ok(m) => Ok(Row::margin(check, anchor, hyp, m)),
        Err(Error::Check { margin, .. }) => Ok(Row::margin(check, anchor, hyp, margin)),
        Err(e) => Err(e.into()),
    }
}

pub fn certify(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("certify");
    let n = cfg.count("grid_points")?;
    let cert = certification_margins(pot, n)?;
    for m in &cert.margins {
        rep.rows.push(Row::strict(
            format!("{} (grid {n})", m.inequality),
            anchor::POTENTIAL,
            true,
            m.worst_margin,
        ));
    }
    let mut c = Curve::new("potential", &["t", "beta", "phi"]);
    for k in 0..=512 {
        let t = pot.support_right * k as f64 / 512.0;
        c.push(vec![t, pot.beta(t), pot.phi(t)]);
    }
    rep.curves.push(c);
    Ok(rep)
}

fn kinds(t: f64) -> [ProfileKind; 3] {
    [
        ProfileKind::Monotone,
        ProfileKind::SuperLinear { t },
        ProfileKind::VShaped { tau: -t },
    ]
}

/// Largest allowed gap between a profile and its shooting oracle.
pub const ORACLE_TOL: f64 = 1e-6;
/// Largest allowed Hamiltonian residual of a profile.
pub const HAMILTONIAN_TOL: f64 = 1e-8;
const SHOOTING_STEPS_PER_UNIT: usize = 1000;

pub fn profile(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("profile");
    let t = cfg.list("t")?[0];
    let window = cfg.scalar("window")?;
    let steps = (window * SHOOTING_STEPS_PER_UNIT as f64).round() as usize;
    let results: Vec<HResult<(Vec<Row>, Curve)>> = kinds(t)
        .into_par_iter()
        .map(|kind| {
            let unit = make_profile(pot, 1.0, kind, PROFILE_TOL)?;
            let shot = shoot(pot, kind, window, steps);
            let mut rows = Vec::new();
            for &eps in &cfg.eps {
                let p = unit.rescaled(eps)?;
                let (mut gap, mut ham) = (0.0f64, 0.0f64);
                for (s, w) in shot.points() {
                    gap = gap.max((p.eval(eps * s) - eps * w).abs());
                    ham = ham.max(p.hamiltonian_residual(eps * s).abs());
                }
                rows.push(Row::margin(
                    format!("{} eps={eps:e}: |profile - RK4 shooting| on [-{window} eps, {window} eps] <= {ORACLE_TOL:e}", kind.name()),
                    anchor::ODE,
                    true,
                    ORACLE_TOL - gap,
                ));
                rows.push(Row::margin(
                    format!("{} eps={eps:e}: Hamiltonian residual <= {HAMILTONIAN_TOL:e}", kind.name()),
                    anchor::ODE,
                    true,
                    HAMILTONIAN_TOL - ham,
                ));
            }
            let mut c = Curve::new(kind.name().replace('-', "_"), &["x", "w", "w_prime", "w_shooting"]);
            for (k, (s, w)) in shot.points().enumerate() {
                if k % 10 == 0 {
                    c.push(vec![s, unit.eval(s), unit.eval_derivative(s), w]);
                }
            }
            Ok((rows, c))
        })
        .collect();
    for r in results {
        let (rows, c) = r?;
        rep.rows.extend(rows);
        rep.curves.push(c);
    }
    for &t in cfg.list("t")? {
        let sup = make_profile(pot, 1.0, ProfileKind::SuperLinear { t }, PROFILE_TOL)?;
        let vee = make_profile(pot, 1.0, ProfileKind::VShaped { tau: -t }, PROFILE_TOL)?;
        for &eps in cfg.list("bound_eps")? {
            let q = root_of_super(&sup.rescaled(eps)?)?;
            rep.rows.push(Row::margin(
                format!("super-linear t={t:e} eps={eps:e}: root >= -eps sqrt(2 c1) log(1 + theta1 / t)"),
                anchor::ROOT,
                true,
                q.margin,
            ));
            let m = min_of_vshaped(&vee.rescaled(eps)?)?;
            rep.rows.push(Row::margin(
                format!("v-shaped tau={:e} eps={eps:e}: m >= sqrt(|tau| / c1) eps", -t),
                anchor::MINIMUM,
                true,
                m.m - m.m_lower,
            ));
            rep.rows.push(Row::margin(
                format!("v-shaped tau={:e} eps={eps:e}: m <= sqrt(2 c1 |tau|) eps", -t),
                anchor::MINIMUM,
                true,
                m.m_upper - m.m,
            ));
            rep.rows.push(Row::margin(
                format!("v-shaped tau={:e} eps={eps:e}: y >= -eps sqrt(2 c1) (2 + log(theta1 / sqrt(2 |tau| / c1)))", -t),
                anchor::MINIMUM,
                true,
                m.y - m.y_lower,
            ));
        }
    }
    Ok(rep)
}

pub fn barriers(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("barriers");
    let c = frozen_diameter_constant(pot);
    let deltas = cfg.list("deltas")?;
    let sigma = cfg.scalar("sigma")?;
    let eps0 = cfg.scalar("eps0")?;
    let rungs: Vec<HResult<Vec<Row>>> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let mut rows = Vec::new();
            for side in [Side::Sub, Side::Super] {
                let hyp = side == Side::Sub || eps < super_barrier_eps_limit(pot);
                let name = format!("{side:?} barrier eps={eps:e}: band diameter <= {c} eps");
                if !hyp {
                    rows.push(Row::margin(name, anchor::DIAMETER, false, f64::NAN));
                    continue;
                }
                let b = make_barrier(pot, eps, side)?;
                rows.push(checked(
                    name,
                    anchor::DIAMETER,
                    true,
                    transition_diameter(&b).map(|d| c * eps - d),
                )?);
            }
            for &delta in deltas {
                match shift_comparison_check(pot, eps, delta, sigma, eps0) {
                    Ok(r) => {
                        for row in &r.rows {
                            rows.push(Row::margin(
                                format!("{} eps={eps:e} delta={delta} sigma={sigma}", row.inequality),
                                anchor::SHIFTS,
                                r.in_hypothesis,
                                row.worst_margin,
                            ));
                        }
                    }
                    Err(Error::Check { check, margin, .. }) => rows.push(Row::margin(
                        format!("{check} eps={eps:e} delta={delta} sigma={sigma}"),
                        anchor::SHIFTS,
                        true,
                        margin,
                    )),
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(rows)
        })
        .collect();
    for r in rungs {
        rep.rows.extend(r?);
    }
    let (rows, curve) = radial_rows(cfg, pot)?;
    rep.rows.extend(rows);
    rep.curves.push(curve);
    Ok(rep)
}

/// Refinement study of the discrete radial super-solution check: the
/// constant `C` is measured on the coarsest grid and applied to the finer ones.
fn radial_rows(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<(Vec<Row>, Curve)> {
    let [eps, rho, r_outer] = cfg.list("radial")? else {
        return Err(crate::error::HarnessError::Invalid(
            "`radial` must be eps, rho, R".into(),
        ));
    };
    let b = RadialBarrier::new(*eps, *rho, *r_outer, [0.0, 0.0], 2, pot.c1)?;
    let checks: Vec<_> = cfg
        .list("h_ratios")?
        .iter()
        .map(|&q| discrete_supersolution_check(&b, eps / q, f64::INFINITY))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut curve = Curve::new("radial", &["h", "margin", "truncation"]);
    let c_meas = checks[0].truncation / (checks[0].h * checks[0].h);
    for ch in &checks {
        curve.push(vec![ch.h, ch.margin, ch.truncation]);
        rows.push(Row::margin(
            format!("radial eps={eps} rho={rho} R={r_outer} h={:e}: margin >= -C h^2 (C = {c_meas:.4e} from h={:e})", ch.h, checks[0].h),
            anchor::RADIAL,
            true,
            ch.margin + c_meas * ch.h * ch.h,
        ));
    }
    // the margin converges to the exact minimum at rate h^2; the sup of the
    // truncation error is still pre-asymptotic on this ladder and goes to the curve
    for w in checks.windows(2) {
        let order = (w[0].margin / w[1].margin).ln() / (w[0].h / w[1].h).ln();
        rows.push(Row::margin(
            format!("radial margin order between h={:e} and h={:e} within 2 +- 0.2 (measured {order:.3})", w[0].h, w[1].h),
            anchor::RADIAL,
            true,
            0.2 - (order - 2.0).abs(),
        ));
    }
    Ok((rows, curve))
}

/// Square grid for rung `eps` with spacing `h_for(eps)`.
pub fn rung_grid(cfg: &ExperimentConfig, eps: f64) -> HResult<GridField> {
    let h = cfg.h_for(eps);
    let n = match cfg.box_half {
        Some(l) => nodes_for(l, h),
        None => cfg.count("nodes")?,
    };
    square(n, h, eps)
}

/// Ladder for the measured decay threshold.
fn decay_ladder() -> Vec<f64> {
    (0..41).map(|k| 10f64.powf(-1.0 - k as f64 / 8.0)).collect()
}

pub fn decay(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("decay");
    let eps0 = decay_eps0(2, pot.c1, &decay_ladder())?;
    let max_centers = cfg.count("centers")?;
    let rungs: Vec<HResult<(Vec<Row>, Vec<Vec<f64>>, Vec<f64>)>> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let grid = rung_grid(cfg, eps)?;
            let data = Data::new(pot, eps, cfg.boundary)?;
            let u = solve_with_data(pot, eps, &grid, &data, cfg.seed, 0.0)?;
            let hyp = eps <= eps0;
            let r = eps.powf(0.75);
            let nu = cfg.boundary.normal();
            // centers on the normal line through the origin, deepest first
            let mut rows = Vec::new();
            let mut pts = Vec::new();
            let mut s = -r;
            let (lo, hi) = u.bounds();
            let far = (hi[0] - lo[0]).max(hi[1] - lo[1]);
            while rows.len() < max_centers && s > -far {
                let x0: Point = [s * nu[0], s * nu[1]];
                s -= 0.5 * r;
                match decay_certificate(&u, pot, eps, x0) {
                    Ok(d) => {
                        pts.push(vec![eps, x0[0], x0[1], d.max_value_in_ball, d.bound]);
                        rows.push(Row::strict(
                            format!("decay eps={eps:e} x0=({:.4e}, {:.4e}): max over B_(eps^(3/4)/2) < 3 theta1 eps exp(-eps^(-1/4) / (4 sqrt c1))", x0[0], x0[1]),
                            anchor::DECAY,
                            hyp,
                            d.margin,
                        ));
                    }
                    Err(Error::Precondition { .. }) => continue,
                    Err(Error::Domain(_)) => break,
                    Err(e) => return Err(e.into()),
                }
            }
            let z = nearest_band_node(&u, pot, eps)?;
            let (reg, reg_pt) = regularity_rows(&u, pot, eps, z)?;
            if rows.is_empty() {
                rows.push(Row::margin(
                    format!("decay eps={eps:e}: no center with B_(eps^(3/4)) inside {{u <= theta1 eps}}"),
                    anchor::DECAY,
                    false,
                    f64::NAN,
                ));
            }
            rows.extend(reg);
            Ok((rows, pts, reg_pt))
        })
        .collect();
    let mut c = Curve::new("centers", &["eps", "x", "y", "max_in_ball", "bound"]);
    let mut lc = Curve::new("regularity", &["eps", "lipschitz", "nondegeneracy"]);
    for r in rungs {
        let (rows, pts, reg_pt) = r?;
        rep.rows.extend(rows);
        for p in pts {
            c.push(p);
        }
        lc.push(reg_pt);
    }
    rep.curves.push(lc);
    let mut b = Curve::new("bound", &["eps", "bound", "theta1_eps"]);
    for eps in decay_ladder() {
        b.push(vec![eps, decay_bound(pot, eps), pot.theta1 * eps]);
    }
    rep.curves.push(c);
    rep.curves.push(b);
    Ok(rep)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn solve(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("solve");
    let eps = cfg.eps[0];
    let hs = cfg.list("order_h")?;
    let unit = make_profile(pot, eps, ProfileKind::Monotone, PROFILE_TOL)?;
    let nu = Boundary::Tilted(0.1).normal();
    let res: Vec<HResult<(f64, f64)>> = hs
        .par_iter()
        .map(|&h| {
            let n1 = nodes_for(0.5, h);
            let g1 = GridField::from_fn(&[n1], h, &[-0.5 * (n1 - 1) as f64 * h], eps, |p| unit.eval(p[0]))?;
            let n2 = nodes_for(0.25, h);
            let half = 0.5 * (n2 - 1) as f64 * h;
            let g2 = GridField::from_fn(&[n2, n2], h, &[-half, -half], eps, |p| {
                unit.eval(nu[0] * p[0] + nu[1] * p[1])
            })?;
            Ok((residual_sup(pot, &g1, eps)?, residual_sup(pot, &g2, eps)?))
        })
        .collect();
    let res: Vec<(f64, f64)> = res.into_iter().collect::<HResult<_>>()?;
    let mut c = Curve::new("order", &["h", "residual_1d", "residual_2d"]);
    for (h, r) in hs.iter().zip(&res) {
        c.push(vec![*h, r.0, r.1]);
    }
    rep.curves.push(c);
    for (dim, ys) in [
        (1, res.iter().map(|r| r.0).collect::<Vec<_>>()),
        (2, res.iter().map(|r| r.1).collect()),
    ] {
        let slope = loglog_slope(hs, &ys);
        rep.rows.push(Row::margin(
            format!("{dim}D residual of the sampled profile: log-log slope in h within 2 +- 0.2 (measured {slope:.4})"),
            anchor::ORDER,
            true,
            0.2 - (slope - 2.0).abs(),
        ));
    }
    let grid = rung_grid(cfg, eps)?;
    let data = Data::new(pot, eps, cfg.boundary)?;
    let u = solve_with_data(pot, eps, &grid, &data, cfg.seed, 0.0)?;
    let info = u.info.clone().unwrap_or_default();
    rep.rows.push(Row::margin(
        format!(
            "{}x{} solve at eps={eps:e}: residual {:.3e} after {} sweeps within 1e-6",
            grid.nx(),
            grid.ny(),
            info.residual,
            info.iterations
        ),
        anchor::SOLVE,
        true,
        1e-6 - info.residual,
    ));
    rep.fields.push(("field".into(), u));
    Ok(rep)
}

/// Every other node of a 2D field (odd node counts).
fn coarsen(u: &GridField) -> HResult<GridField> {
    let (nx, ny) = (u.nx(), u.ny());
    let (cx, cy) = ((nx + 1) / 2, (ny + 1) / 2);
    let mut out = GridField::zeros(&[cx, cy], 2.0 * u.h, &u.origin, u.eps)?;
    for j in 0..cy {
        for i in 0..cx {
            let k = out.index(i, j);
            out.values[k] = u.values[u.index(2 * i, 2 * j)];
        }
    }
    Ok(out)
}

pub fn weiss_suite(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("weiss");
    // sharp half-planes: W = pi / 2 for every r
    let sh = cfg.scalar("sharp_h")?;
    let sr = cfg.scalar("sharp_r")?;
    let sharp_n = nodes_for(1.0, sh);
    for angle in [0.0, 0.3] {
        let nu = Boundary::Tilted(angle).normal();
        let half = 0.5 * (sharp_n - 1) as f64 * sh;
        let u = GridField::from_fn(&[sharp_n, sharp_n], sh, &[-half, -half], 0.0, |p| {
            (nu[0] * p[0] + nu[1] * p[1]).max(0.0)
        })?;
        let w = weiss(&u, pot, [0.0, 0.0], sr)?;
        rep.rows.push(Row::margin(
            format!("sharp half-plane angle={angle} h={sh:e} r={sr}: |W - pi/2| <= 1e-2 (W = {w:.6})"),
            anchor::WEISS_HALF,
            true,
            1e-2 - (w - PI / 2.0).abs(),
        ));
    }
    // monotonicity on a solved field, slack from the 2h field
    let eps = cfg.eps[0];
    let grid = rung_grid(cfg, eps)?;
    let data = Data::new(pot, eps, cfg.boundary)?;
    let u = solve_with_data(pot, eps, &grid, &data, cfg.seed, 0.0)?;
    let z = nearest_band_node(&u, pot, eps)?;
    let u = u.translated(z);
    let radii = cfg.list("radii")?;
    let fine = weiss_series(&u, pot, [0.0, 0.0], radii)?;
    let coarse = weiss_series(&coarsen(&u)?, pot, [0.0, 0.0], radii)?;
    let slack = fine
        .values
        .iter()
        .zip(&coarse.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let mut c = Curve::new("series", &["r", "w_h", "w_2h"]);
    for k in 0..radii.len() {
        c.push(vec![radii[k], fine.values[k], coarse.values[k]]);
    }
    rep.curves.push(c);
    rep.rows.push(Row::margin(
        format!("solved field eps={eps:e}: W nondecreasing in r within the h/2h slack {slack:.3e} (worst step {:.3e})", fine.monotone_violation),
        anchor::WEISS,
        true,
        fine.monotone_violation + slack,
    ));
    // scaling identity on a unit-eps field
    let unit_h = 0.125;
    let n = nodes_for(8.0, unit_h);
    let grid = square(n, unit_h, 1.0)?;
    let data = Data::new(pot, 1.0, Boundary::Tilted(0.1))?;
    let mut u1 = grid.clone();
    for k in 0..u1.len() {
        u1.values[k] = data.eval(u1.point(k));
    }
    for &f in cfg.list("scaling_factors")? {
        let ub = blowdown(&u1, f)?;
        for &r in cfg.list("scaling_radii")? {
            let a = weiss(&ub, pot, [0.0, 0.0], r)?;
            let b = weiss(&u1, pot, [0.0, 0.0], r / f)?;
            rep.rows.push(Row::margin(
                format!("blow-down factor={f} r={r}: |W_eps(u_eps, r) - W(u, r / eps)| <= 1e-9 (W = {b:.6})"),
                anchor::WEISS_SCALING,
                true,
                1e-9 * b.abs().max(1.0) - (a - b).abs(),
            ));
        }
    }
    Ok(rep)
}

pub fn flatness(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("flatness");
    // equivalence on solved planar (1D) fields
    let planar_r = cfg.scalar("planar_r")?;
    let deltas = cfg.list("deltas")?;
    let eps0 = cfg.scalar("eps0")?;
    let delta0 = cfg.scalar("delta0")?;
    let rungs: Vec<HResult<Vec<Row>>> = cfg
        .list("planar_eps")?
        .par_iter()
        .map(|&eps| {
            let h = eps / 8.0;
            let n = nodes_for(1.05 * planar_r, h);
            let half = 0.5 * (n - 1) as f64 * h;
            let grid = GridField::zeros(&[n], h, &[-half], eps)?;
            // 1D nodes sit at (x, 0), so the data normal is e1
            let data = Data::new(pot, eps, Boundary::Tilted(FRAC_PI_2))?;
            let u = solve_with_data(pot, eps, &grid, &data, cfg.seed, 0.1 * eps)?;
            let bars = Barriers::new(pot, eps)?;
            let mut rows = Vec::new();
            for &delta in deltas {
                let rep = match flat_equivalence_probe(&u, pot, &bars, [1.0, 0.0], delta, planar_r, eps0, delta0.max(delta + 1e-12)) {
                    Ok(r) => r,
                    Err(Error::Check { check, margin, .. }) => {
                        rows.push(Row::margin(format!("{check} eps/R={:e} delta={delta}", eps / planar_r), anchor::EQUIVALENCE, true, margin));
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let hyp = rep.in_hypothesis;
                for (name, imp) in [
                    ("Flat1(delta, R) => Flat2(delta + sqrt(eps/R), (1 - sqrt(eps/R)) R)", &rep.flat1_to_flat2),
                    ("Flat2(delta, R) => Flat1(delta + sqrt(eps/R), (1 - sqrt(eps/R)) R)", &rep.flat2_to_flat1),
                ] {
                    rows.push(Row {
                        check: format!("{name} eps/R={:e} delta={delta} (premise {})", rep.eps_over_r, if imp.premise_holds { "holds" } else { "fails" }),
                        paper_anchor: anchor::EQUIVALENCE.into(),
                        hypothesis_ok: hyp && imp.premise_holds,
                        margin: imp.conclusion_margin,
                        pass: imp.holds(),
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    for r in rungs {
        rep.rows.extend(r?);
    }
    // contraction on a solved 2D field
    let eps = cfg.eps[0];
    let r = cfg.scalar("r")?;
    let theta0 = cfg.scalar("theta0")?;
    let grid = rung_grid(cfg, eps)?;
    let data = Data::new(pot, eps, cfg.boundary)?;
    let u = solve_with_data(pot, eps, &grid, &data, cfg.seed, 0.0)?;
    let z = nearest_band_node(&u, pot, eps)?;
    let u = u.translated(z);
    let bars = Barriers::new(pot, eps)?;
    let (nu, _) = best_direction(&u, pot, r, eps)?;
    let c = contraction_ratio(&u, pot, &bars, nu, r)?;
    // improvement-of-oscillation constants: delta < 1/32, eps/R < delta / (16 c)
    let delta_trap = c.outer.width() / r;
    let c0 = 1.0 / (16.0 * frozen_diameter_constant(pot));
    let trap_hyp = delta_trap < 1.0 / 32.0 && eps / r < c0 * delta_trap;
    rep.rows.push(Row::margin(
        format!(
            "trap width ratio (a' + |b'|) / (a + |b|) over B_R -> B_(R/4), R={r}, eps={eps:e}: <= theta0 = {theta0} (measured {:.4}, delta = {delta_trap:.4})",
            c.ratio
        ),
        anchor::TRAP,
        trap_hyp,
        theta0 - c.ratio,
    ));
    let mut tc = Curve::new("trap", &["r", "a", "b", "width"]);
    let mut rr = r;
    while rr >= r / 16.0 {
        let t = trap_shifts(&u, pot, &bars, nu, rr)?;
        tc.push(vec![rr, t.a, t.b, t.width()]);
        rr *= 0.5;
    }
    rep.curves.push(tc);
    let rho0 = cfg.scalar("rho0")?;
    let curve = improvement_curve(&u, pot, eps, r, rho0, cfg.count("levels")?, delta0, cfg.scalar("drift_c")?)?;
    let mut ic = Curve::new("improvement", &["k", "r", "delta", "nu_x", "nu_y", "in_hypothesis"]);
    for (i, l) in curve.levels.iter().enumerate() {
        ic.push(vec![l.k as f64, l.r, l.delta, l.nu[0], l.nu[1], f64::from(u8::from(l.in_hypothesis))]);
        if i == 0 {
            continue;
        }
        let prev = &curve.levels[i - 1];
        let reason = match (&curve.truncated_at, prev.in_hypothesis) {
            (Some((_, why)), false) => format!(" [out of hypothesis: {why}]"),
            _ => String::new(),
        };
        rep.rows.push(Row::margin(
            format!("level {}: delta_k = {:.4e} <= rho0^(1/2) delta_(k-1) = {:.4e}{reason}", l.k, l.delta, rho0.sqrt() * prev.delta),
            anchor::IMPROVEMENT,
            prev.in_hypothesis,
            rho0.sqrt() * prev.delta - l.delta,
        ));
        if let (Some(d), Some(b)) = (l.drift, l.drift_bound) {
            rep.rows.push(Row::margin(
                format!("level {}: |nu_k - nu_(k-1)| = {d:.4e} <= sqrt(2) N delta_(k-1) + C h / R_k = {b:.4e}", l.k),
                anchor::DRIFT,
                prev.in_hypothesis,
                b - d,
            ));
        }
    }
    rep.curves.push(ic);
    let (rows, pt) = regularity_rows(&u, pot, eps, [0.0, 0.0])?;
    rep.rows.extend(rows);
    let mut lc = Curve::new("regularity", &["eps", "lipschitz", "nondegeneracy"]);
    lc.push(pt);
    rep.curves.push(lc);
    Ok(rep)
}

/// Largest admissible `|grad_h u|` on `B_(10 eps)(z)`.
pub const LIPSCHITZ_BOUND: f64 = 2.0;

/// Lipschitz and non-degeneracy rows at a band point `z`, with radius `10 eps`.
fn regularity_rows(u: &GridField, pot: &PotentialSpec, eps: f64, z: Point) -> HResult<(Vec<Row>, Vec<f64>)> {
    let r = 10.0 * eps;
    let lip = lipschitz_sup(u, Some((z, r)));
    let nd = nondegeneracy(u, pot, eps, z, r, 10.0)?;
    let rows = vec![
        Row::margin(
            format!("eps={eps:e}: sup_(B_r(z)) u / r at a band point z, r = 10 eps: >= c_kappa = {NONDEGENERACY_C} (measured {nd:.4})"),
            anchor::NONDEGENERACY,
            true,
            nd - NONDEGENERACY_C,
        ),
        Row::margin(
            format!("eps={eps:e}: max |grad_h u| on B_(10 eps)(z) <= {LIPSCHITZ_BOUND} (measured {lip:.4})"),
            anchor::LIPSCHITZ,
            true,
            LIPSCHITZ_BOUND - lip,
        ),
    ];
    Ok((rows, vec![eps, lip, nd]))
}

pub fn blowdown_probe(cfg: &ExperimentConfig, pot: &PotentialSpec) -> HResult<SuiteReport> {
    let mut rep = SuiteReport::new("blowdown");
    let eps = cfg.eps[0];
    let grid = rung_grid(cfg, eps)?;
    let data = Data::new(pot, eps, cfg.boundary)?;
    let u = solve_with_data(pot, eps, &grid, &data, cfg.seed, 0.0)?;
    if u.max_abs() == 0.0 {
        rep.rows.push(Row::margin(
            "zero field: degenerate, no blow-down limit",
            anchor::BLOWDOWN,
            false,
            f64::NAN,
        ));
        return Ok(rep);
    }
    let u0 = u.interpolate([0.0, 0.0]).unwrap_or(f64::NAN);
    let band_ok = u0 >= pot.theta1 * eps && u0 <= pot.theta2 * eps;
    let tilt = cfg.boundary.normal();
    let factors = cfg.list("factors")?;
    let levels: Vec<HResult<(f64, Point, f64, f64, f64, f64)>> = factors
        .par_iter()
        .map(|&f| {
            let ub = blowdown(&u, f)?;
            let e = ub.eps;
            let (nu, _) = best_direction(&ub, pot, 1.0, e)?;
            let nodes = ub.ball_nodes([0.0, 0.0], 1.0);
            let plane = |p: Point| nu[0] * p[0] + nu[1] * p[1];
            let delta = nodes
                .iter()
                .map(|&k| (ub.values[k] - plane(ub.point(k)).max(0.0)).abs())
                .fold(0.0, f64::max);
            // {dist(x, {u0 > 0}) >= delta} inside {u <= theta1 eps}
            let lower = nodes
                .iter()
                .filter(|&&k| plane(ub.point(k)) <= -delta)
                .map(|&k| pot.theta1 * e - ub.values[k])
                .fold(f64::INFINITY, f64::min);
            // {u <= theta2 eps} inside {dist(x, {u0 = 0}) <= delta}
            let upper = nodes
                .iter()
                .filter(|&&k| ub.values[k] <= pot.theta2 * e)
                .map(|&k| delta - plane(ub.point(k)))
                .fold(f64::INFINITY, f64::min);
            let pos: Vec<Point> = nodes.iter().filter(|&&k| ub.values[k] >= pot.theta1 * e).map(|&k| ub.point(k)).collect();
            let half: Vec<Point> = nodes.iter().filter(|&&k| plane(ub.point(k)) >= 0.0).map(|&k| ub.point(k)).collect();
            let haus = hausdorff_distance(&pos, &half)?;
            Ok((e, nu, delta, lower, upper, haus))
        })
        .collect();
    let levels: Vec<_> = levels.into_iter().collect::<HResult<_>>()?;
    let mut c = Curve::new("levels", &["eps", "nu_x", "nu_y", "delta", "hausdorff_band_halfplane"]);
    for (i, &(e, nu, delta, lower, upper, haus)) in levels.iter().enumerate() {
        c.push(vec![e, nu[0], nu[1], delta, haus]);
        let drift = (nu[0] - tilt[0]).hypot(nu[1] - tilt[1]);
        rep.rows.push(Row::margin(
            format!("eps={e:e}: blow-down direction within 1e-2 of the data normal (|nu - nu_data| = {drift:.3e})"),
            anchor::BLOWDOWN,
            band_ok,
            1e-2 - drift,
        ));
        rep.rows.push(Row::margin(
            format!("eps={e:e}: {{dist(x, {{u0 > 0}}) >= delta}} inside {{u_eps <= theta1 eps}} in B_1, delta = {delta:.4e}"),
            anchor::INCLUSION,
            band_ok,
            lower,
        ));
        rep.rows.push(Row::margin(
            format!("eps={e:e}: {{u_eps <= theta2 eps}} inside {{dist(x, {{u0 = 0}}) <= delta}} in B_1, delta = {delta:.4e}"),
            anchor::INCLUSION,
            band_ok,
            upper,
        ));
        if i > 0 {
            let prev = levels[i - 1].2;
            rep.rows.push(Row::strict(
                format!("sup_(B_1) |u_eps - (nu.x)_+| strictly decreasing: {delta:.4e} < {prev:.4e} at eps={e:e}"),
                anchor::BLOWDOWN,
                band_ok,
                prev - delta,
            ));
        }
    }
    rep.curves.push(c);
    Ok(rep)
}
