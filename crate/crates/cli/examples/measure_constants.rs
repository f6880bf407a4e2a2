//! Threshold scans behind the frozen regression constants.
//!
//! `cargo run --release -p onephase --example measure_constants [potential]`

use onephase::config::{ExperimentConfig, Suite};
use onephase::fields::{nearest_band_node, solve_with_data, square, Data};
use onephase_core::analysis::{best_direction, contraction_ratio, nondegeneracy, Barriers};
use onephase_core::profiles1d::{
    frozen_diameter_constant, make_barrier, measure_shift_eps0, super_barrier_eps_limit,
    Side, TruncatedBarrier,
};
use onephase_core::supersolutions::decay_eps0;
use onephase_core::PotentialSpec;

fn diameter(b: &TruncatedBarrier, pot: &PotentialSpec) -> f64 {
    let eps = b.eps();
    b.base.inverse(pot.theta2 * eps) - b.base.inverse(pot.theta1 * eps)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "polynomial".into());
    let pot = PotentialSpec::by_name(&name)?;
    println!("potential {}", pot.fingerprint());

    // diameter constant c: sup of diam / eps over (0, theta1^2 / (8 c1))
    let limit = super_barrier_eps_limit(&pot);
    let mut worst: f64 = 0.0;
    for k in 1..=200 {
        let eps = limit * k as f64 / 201.0;
        for side in [Side::Sub, Side::Super] {
            worst = worst.max(diameter(&make_barrier(&pot, eps, side)?, &pot) / eps);
        }
    }
    println!(
        "diameter: max diam / eps = {worst:.4} (frozen c = {})",
        frozen_diameter_constant(&pot)
    );

    let ladder: Vec<f64> = (0..41).map(|k| 10f64.powf(-1.0 - k as f64 / 8.0)).collect();
    println!(
        "shift eps0 (sigma = 1/2, delta in {{0, 0.5}}): {:e}",
        measure_shift_eps0(&pot, 0.5, &[0.0, 0.5], &ladder)?
    );
    println!("decay eps0 (N = 2): {:e}", decay_eps0(2, pot.c1, &ladder)?);

    // theta0 on the flatness suite's field
    let cfg = ExperimentConfig::default_for(Suite::Flatness)?;
    let eps = cfg.eps[0];
    let grid = square(cfg.count("nodes")?, cfg.h, eps)?;
    let data = Data::new(&pot, eps, cfg.boundary)?;
    let u = solve_with_data(&pot, eps, &grid, &data, cfg.seed, 0.0)?;
    let u = u.translated(nearest_band_node(&u, &pot, eps)?);
    let bars = Barriers::new(&pot, eps)?;
    let r0 = cfg.scalar("r")?;
    let (nu, _) = best_direction(&u, &pot, r0, eps)?;
    for r in [r0, r0 / 2.0, r0 / 4.0] {
        let c = contraction_ratio(&u, &pot, &bars, nu, r)?;
        println!("contraction R = {r}: (a' + |b'|) / (a + |b|) = {:.4}", c.ratio);
    }
    println!("theta0 frozen at {}", cfg.scalar("theta0")?);

    // c_kappa on the decay suite's fields
    let dcfg = ExperimentConfig::default_for(Suite::Decay)?;
    for &eps in &dcfg.eps {
        let grid = square(dcfg.count("nodes")?, dcfg.h_for(eps), eps)?;
        let data = Data::new(&pot, eps, dcfg.boundary)?;
        let u = solve_with_data(&pot, eps, &grid, &data, dcfg.seed, 0.0)?;
        let z = nearest_band_node(&u, &pot, eps)?;
        let nd = nondegeneracy(&u, &pot, eps, z, 10.0 * eps, 10.0)?;
        println!("nondegeneracy eps = {eps:e}: sup u / r = {nd:.4}");
    }
    println!("c_kappa frozen at {}", onephase::suites::NONDEGENERACY_C);
    Ok(())
}
