//! Dirichlet data, grids and solved fields for the suites.

use onephase_core::elliptic::{solve_critical, DirichletData, SolveConfig};
use onephase_core::profiles1d::{make_profile, Profile1D, ProfileKind};
use onephase_core::{GridField, Point, PotentialSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Boundary;
use crate::error::{HResult, HarnessError};

pub const PROFILE_TOL: f64 = 1e-12;

/// Monotone profile composed with the boundary's distance function, shifted
/// so that the origin sits mid-band: `u(0) = (theta1 + theta2) eps / 2`.
pub struct Data {
    profile: Option<Profile1D>,
    boundary: Boundary,
    offset: f64,
}

impl Data {
    pub fn new(pot: &PotentialSpec, eps: f64, boundary: Boundary) -> HResult<Self> {
        let profile = match boundary {
            Boundary::Zero => None,
            _ => Some(make_profile(pot, eps, ProfileKind::Monotone, PROFILE_TOL)?),
        };
        let offset = profile
            .as_ref()
            .map_or(0.0, |v| v.inverse(0.5 * (pot.theta1 + pot.theta2) * eps));
        Ok(Self {
            profile,
            boundary,
            offset,
        })
    }

    /// Signed distance to the data's interface (positive side `u > 0`).
    pub fn distance(&self, p: Point) -> f64 {
        let nu = self.boundary.normal();
        let s = nu[0] * p[0] + nu[1] * p[1];
        match self.boundary {
            Boundary::Curved { kappa, .. } if kappa > 0.0 => {
                let c = [-nu[0] / kappa, -nu[1] / kappa];
                (p[0] - c[0]).hypot(p[1] - c[1]) - 1.0 / kappa
            }
            _ => s,
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        match &self.profile {
            Some(v) => v.eval(self.distance(p) + self.offset),
            None => 0.0,
        }
    }
}

/// Square `n x n` grid centered at the origin.
pub fn square(n: usize, h: f64, eps: f64) -> HResult<GridField> {
    let half = h * (n as f64 - 1.0) / 2.0;
    Ok(GridField::zeros(&[n, n], h, &[-half, -half], eps)?)
}

/// Node count of `[-half, half]` at spacing `h` (odd, so the origin is a node).
pub fn nodes_for(half: f64, h: f64) -> usize {
    let n = (2.0 * half / h).round() as usize + 1;
    n | 1
}

/// Interior perturbation `amp * U(-1, 1)`, kept nonnegative.
pub fn perturb(u: &mut GridField, seed: u64, amp: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..u.len() {
        let noise: f64 = rng.gen_range(-1.0..1.0);
        if !u.is_boundary(k) {
            u.values[k] = (u.values[k] + amp * noise).max(0.0);
        }
    }
}

/// Solves on `grid` with the data's Dirichlet values, starting from the data
/// (perturbed by `amp` if positive).
pub fn solve_with_data(
    pot: &PotentialSpec,
    eps: f64,
    grid: &GridField,
    data: &Data,
    seed: u64,
    amp: f64,
) -> HResult<GridField> {
    let mut init = grid.clone();
    for k in 0..init.len() {
        init.values[k] = data.eval(init.point(k));
    }
    let bc = DirichletData::from_field(&init);
    if amp > 0.0 {
        perturb(&mut init, seed, amp);
    }
    Ok(solve_critical(pot, &bc, eps, &init, &SolveConfig::for_dim(grid.dim))?)
}

/// Band node `theta1 eps <= u <= theta2 eps` closest to the origin.
pub fn nearest_band_node(u: &GridField, pot: &PotentialSpec, eps: f64) -> HResult<Point> {
    let mut best: Option<(f64, Point)> = None;
    for k in 0..u.len() {
        let v = u.values[k];
        if v >= pot.theta1 * eps && v <= pot.theta2 * eps {
            let p = u.point(k);
            let d = p[0].hypot(p[1]);
            if best.map_or(true, |(b, _)| d < b) {
                best = Some((d, p));
            }
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| HarnessError::Invalid("field has no transition-band node".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curved_distance_is_tangent_at_origin() {
        let pot = PotentialSpec::polynomial();
        let d = Data::new(&pot, 0.1, Boundary::Curved { angle: 0.3, kappa: 2.0 }).unwrap();
        let nu = Boundary::Tilted(0.3).normal();
        assert!(d.distance([0.0, 0.0]).abs() < 1e-15);
        let s = 0.2;
        assert!((d.distance([s * nu[0], s * nu[1]]) - s).abs() < 1e-12);
        // tangent direction bends toward the positive side
        assert!(d.distance([0.3 * nu[1], -0.3 * nu[0]]) > 0.0);
        assert!((d.eval([0.0, 0.0]) - 0.075).abs() < 1e-12);
    }

    #[test]
    fn perturbation_is_reproducible() {
        let mut a = square(9, 0.1, 1.0).unwrap();
        let mut b = a.clone();
        perturb(&mut a, 5, 0.1);
        perturb(&mut b, 5, 0.1);
        assert_eq!(a.values, b.values);
        assert!(a.values.iter().any(|&v| v > 0.0));
        assert_eq!(a.values[0], 0.0);
    }

    #[test]
    fn odd_node_counts() {
        assert_eq!(nodes_for(1.0, 0.125), 17);
        assert_eq!(nodes_for(20.0, 0.125), 321);
    }
}
