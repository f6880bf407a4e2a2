//! Independent reference for the 1D profiles: classical RK4 on
//! `W'' = beta(W) / 2` from the normalization point, with the initial slope
//! taken from the conserved Hamiltonian.

use onephase_core::profiles1d::ProfileKind;
use onephase_core::PotentialSpec;

/// Unit-scale trajectory sampled at `s_k = s0 + k ds`.
#[derive(Debug, Clone)]
pub struct Shot {
    pub s0: f64,
    pub ds: f64,
    pub w: Vec<f64>,
}

fn rk4_step(pot: &PotentialSpec, (w, p): (f64, f64), ds: f64) -> (f64, f64) {
    let f = |w: f64| 0.5 * pot.beta(w);
    let (k1w, k1p) = (p, f(w));
    let (k2w, k2p) = (p + 0.5 * ds * k1p, f(w + 0.5 * ds * k1w));
    let (k3w, k3p) = (p + 0.5 * ds * k2p, f(w + 0.5 * ds * k2w));
    let (k4w, k4p) = (p + ds * k3p, f(w + ds * k3w));
    (
        w + ds / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
        p + ds / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

/// Shoots from `W(0) = theta1`, `W'(0) = sqrt(Phi(theta1) + A^2 - 1)` over
/// `[-window, window]` with `2 steps` RK4 steps.
pub fn shoot(pot: &PotentialSpec, kind: ProfileKind, window: f64, steps: usize) -> Shot {
    let slope2 = pot.phi(pot.theta1) + kind.hamiltonian();
    let p0 = slope2.max(0.0).sqrt();
    let ds = window / steps as f64;
    let mut right = Vec::with_capacity(steps + 1);
    let mut state = (pot.theta1, p0);
    right.push(state.0);
    for _ in 0..steps {
        state = rk4_step(pot, state, ds);
        right.push(state.0);
    }
    let mut left = Vec::with_capacity(steps);
    let mut state = (pot.theta1, p0);
    for _ in 0..steps {
        state = rk4_step(pot, state, -ds);
        left.push(state.0);
    }
    left.reverse();
    left.extend(right);
    Shot {
        s0: -window,
        ds,
        w: left,
    }
}

impl Shot {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.w
            .iter()
            .enumerate()
            .map(move |(k, &w)| (self.s0 + k as f64 * self.ds, w))
    }
}
