//! Measurements on field and node-set files.

use std::path::Path;

use onephase_core::analysis::{best_direction, flatness_report, improvement_curve, weiss_series, Barriers};
use onephase_core::grid::parse_point_set;
use onephase_core::{GridField, Point, PotentialSpec};
use serde::Serialize;

use crate::config::{ExperimentConfig, Suite};
use crate::error::{io_err, HResult, HarnessError};

pub fn load_field(path: &Path) -> HResult<GridField> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    GridField::from_csv(&text).map_err(|source| HarnessError::Field {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_points(path: &Path) -> HResult<Vec<Point>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_point_set(&text).map_err(|source| HarnessError::Field {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize)]
pub struct FlatnessMeasurement {
    pub eps: f64,
    pub r: f64,
    pub nu: Point,
    /// Smallest `delta` with Flat1 at the best direction.
    pub flat1_delta: f64,
    /// Flat2 margin at `flat1_delta`.
    pub flat2_margin: f64,
    pub band_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<onephase_core::analysis::ImprovementCurve>,
}

/// Ladder options `(rho0, levels)`; `delta0` and the drift constant use the
/// flatness suite defaults.
pub fn flatness_tool(
    u: &GridField,
    pot: &PotentialSpec,
    eps: f64,
    r: f64,
    ladder: Option<(f64, usize)>,
) -> HResult<FlatnessMeasurement> {
    let bars = Barriers::new(pot, eps)?;
    let (nu, delta) = best_direction(u, pot, r, eps)?;
    let rep = flatness_report(u, pot, &bars, nu, delta, r)?;
    let ladder = match ladder {
        Some((rho0, levels)) => {
            let d = ExperimentConfig::default_for(Suite::Flatness)?;
            let (delta0, c_h) = (d.scalar("delta0")?, d.scalar("drift_c")?);
            Some(improvement_curve(u, pot, eps, r, rho0, levels, delta0, c_h)?)
        }
        None => None,
    };
    Ok(FlatnessMeasurement {
        eps,
        r,
        nu,
        flat1_delta: delta,
        flat2_margin: rep.flat2_margin,
        band_nodes: rep.band.len(),
        ladder,
    })
}

/// `a:b:n`, `n >= 2` evenly spaced radii from `a` to `b`.
pub fn parse_radii(s: &str) -> HResult<Vec<f64>> {
    let bad = || HarnessError::Invalid(format!("radii must be `a:b:n` with 0 < a < b and n >= 2, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(a > 0.0 && b > a && n >= 2) {
        return Err(bad());
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

/// `x,y` (or `x` for 1D fields).
pub fn parse_center(s: &str) -> HResult<Point> {
    let v: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match v.as_deref() {
        Ok([x]) => Ok([*x, 0.0]),
        Ok([x, y]) => Ok([*x, *y]),
        _ => Err(HarnessError::Invalid(format!("center must be `x,y`, got `{s}`"))),
    }
}

pub fn weiss_tool(u: &GridField, pot: &PotentialSpec, center: Point, radii: &[f64]) -> HResult<onephase_core::analysis::WeissSeries> {
    Ok(weiss_series(u, pot, center, radii)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_ranges() {
        assert_eq!(parse_radii("0.1:0.4:4").unwrap().len(), 4);
        let r = parse_radii("1:2:3").unwrap();
        assert_eq!(r, vec![1.0, 1.5, 2.0]);
        assert!(parse_radii("0.4:0.1:4").is_err());
        assert!(parse_radii("0.1:0.4").is_err());
    }

    #[test]
    fn centers() {
        assert_eq!(parse_center("0.5, -1").unwrap(), [0.5, -1.0]);
        assert!(parse_center("a,b").is_err());
    }

    #[test]
    fn corrupted_field_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let u = GridField::from_fn(&[3, 3], 0.5, &[-0.5, -0.5], 0.1, |p| p[0].max(0.0)).unwrap();
        let mut lines: Vec<String> = u.to_csv().lines().map(String::from).collect();
        let n = lines.len();
        lines[n - 2] = "0.0,zzz".into();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, lines.join("\n")).unwrap();
        let err = load_field(&path).unwrap_err().to_string();
        assert!(err.contains("row"), "{err}");
    }
}
