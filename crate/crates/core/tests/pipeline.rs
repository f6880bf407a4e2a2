//! Profiles, solver and analysis chained together on the bump potential.

use onephase_core::analysis::{best_direction, weiss};
use onephase_core::elliptic::{residual_sup, solve_critical, DirichletData, SolveConfig};
use onephase_core::potential::certification_margins;
use onephase_core::profiles1d::{frozen_diameter_constant, make_profile, ProfileKind};
use onephase_core::{GridField, PotentialSpec};

fn bump() -> PotentialSpec {
    PotentialSpec::by_name("bump").unwrap()
}

#[test]
fn bump_potential_certifies() {
    assert!(certification_margins(&bump(), 100_000).unwrap().passed());
}

#[test]
fn solver_recovers_the_bump_profile_in_1d() {
    let pot = bump();
    let eps = 0.05;
    let prof = make_profile(&pot, eps, ProfileKind::Monotone, 1e-12).unwrap();
    let h = eps / 16.0;
    let n = (1.0 / h).round() as usize + 1;
    let exact = GridField::from_fn(&[n], h, &[-0.5], eps, |p| prof.eval(p[0])).unwrap();
    let init = GridField::from_fn(&[n], h, &[-0.5], eps, |p| p[0].max(0.0)).unwrap();
    let bc = DirichletData::from_field(&exact);
    let u = solve_critical(&pot, &bc, eps, &bc.impose(&init).unwrap(), &SolveConfig::for_dim(1)).unwrap();
    assert!(u.sup_distance(&exact).unwrap() <= 10.0 * h * h);
    assert!(residual_sup(&pot, &u, eps).unwrap() <= 1e-6);
}

#[test]
fn planar_solution_is_flat_with_the_right_normal() {
    let pot = bump();
    let eps = 0.1;
    let n = 81;
    let prof = make_profile(&pot, eps, ProfileKind::Monotone, 1e-12).unwrap();
    let g = GridField::centered_box(2, 0.5, n, eps).unwrap();
    let bc = DirichletData::from_fn(&g, |p| prof.eval(p[1]));
    let init = GridField::from_fn(&[n, n], g.h, &[-0.5, -0.5], eps, |p| p[1].max(0.0)).unwrap();
    let u = solve_critical(&pot, &bc, eps, &bc.impose(&init).unwrap(), &SolveConfig::for_dim(2)).unwrap();

    let r = 0.4;
    let (nu, delta) = best_direction(&u, &pot, r, eps).unwrap();
    assert!(nu[0].abs() < 1e-3 && (nu[1] - 1.0).abs() < 1e-6, "{nu:?}");
    // only the transition band itself is left
    assert!(delta <= frozen_diameter_constant(&pot) * eps / r, "{delta}");

    // Weiss monotonicity on a solution
    let w_small = weiss(&u, &pot, [0.0, 0.0], 0.1).unwrap();
    let w_large = weiss(&u, &pot, [0.0, 0.0], 0.4).unwrap();
    assert!(w_small <= w_large + 1e-3, "{w_small} {w_large}");
}
