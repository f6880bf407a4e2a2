//! Scalar fields on uniform one- and two-dimensional grids.
//!
//! Storage is x-fastest: node `(i, j)` lives at `j * nx + i`. The outer
//! layer of nodes carries the Dirichlet data and is never touched by the
//! solvers. Points are always `[f64; 2]`; one-dimensional fields ignore the
//! second component.

use std::fmt::Write as _;

use crate::error::{domain, Error, Result};

pub type Point = [f64; 2];

/// Bookkeeping attached by the solvers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveInfo {
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub h: f64,
    pub origin: Vec<f64>,
    pub values: Vec<f64>,
    /// The `eps` the field was produced at; zero marks a sharp-interface field.
    pub eps: f64,
    pub info: Option<SolveInfo>,
}

impl GridField {
    /// Zero field. `shape` and `origin` must have length 1 or 2 and agree.
    pub fn zeros(shape: &[usize], h: f64, origin: &[f64], eps: f64) -> Result<Self> {
        let dim = shape.len();
        if !(dim == 1 || dim == 2) || origin.len() != dim {
            return Err(domain(format!(
                "grid dimension must be 1 or 2 with matching origin, got shape {shape:?} origin {origin:?}"
            )));
        }
        if shape.iter().any(|&n| n < 3) {
            return Err(domain(format!(
                "each axis needs at least 3 nodes, got {shape:?}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(domain(format!("spacing must be positive, got {h}")));
        }
        if !(eps >= 0.0) {
            return Err(domain(format!("eps must be nonnegative, got {eps}")));
        }
        let n = shape.iter().product();
        Ok(Self {
            dim,
            shape: shape.to_vec(),
            h,
            origin: origin.to_vec(),
            values: vec![0.0; n],
            eps,
            info: None,
        })
    }

    /// Field sampled from `f` at every node.
    pub fn from_fn<F: Fn(Point) -> f64>(
        shape: &[usize],
        h: f64,
        origin: &[f64],
        eps: f64,
        f: F,
    ) -> Result<Self> {
        let mut g = Self::zeros(shape, h, origin, eps)?;
        for k in 0..g.values.len() {
            g.values[k] = f(g.point(k));
        }
        Ok(g)
    }

    /// Square (or segment) grid `[-half, half]^dim` with `h = 2 half / (n - 1)`.
    pub fn centered_box(dim: usize, half: f64, n: usize, eps: f64) -> Result<Self> {
        let h = 2.0 * half / (n as f64 - 1.0);
        let shape = vec![n; dim];
        let origin = vec![-half; dim];
        Self::zeros(&shape, h, &origin, eps)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.shape[0]
    }

    #[inline]
    pub fn ny(&self) -> usize {
        if self.dim == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx(), k / self.nx())
    }

    #[inline]
    pub fn point(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        let x = self.origin[0] + i as f64 * self.h;
        let y = if self.dim == 2 {
            self.origin[1] + j as f64 * self.h
        } else {
            0.0
        };
        [x, y]
    }

    #[inline]
    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        let nx = self.nx();
        if i == 0 || i + 1 == nx {
            return true;
        }
        self.dim == 2 && (j == 0 || j + 1 == self.ny())
    }

    /// Lower and upper corners of the grid box.
    pub fn bounds(&self) -> (Point, Point) {
        let lo = [
            self.origin[0],
            if self.dim == 2 { self.origin[1] } else { 0.0 },
        ];
        let hi = [
            lo[0] + (self.nx() - 1) as f64 * self.h,
            if self.dim == 2 {
                lo[1] + (self.ny() - 1) as f64 * self.h
            } else {
                0.0
            },
        ];
        (lo, hi)
    }

    /// Whether the closed ball `B_r(c)` lies in the grid box.
    pub fn contains_ball(&self, c: Point, r: f64) -> bool {
        let (lo, hi) = self.bounds();
        let slack = 1e-9 * self.h;
        let ok_x = c[0] - r >= lo[0] - slack && c[0] + r <= hi[0] + slack;
        let ok_y = self.dim == 1 || (c[1] - r >= lo[1] - slack && c[1] + r <= hi[1] + slack);
        ok_x && ok_y
    }

    /// Node indices of the closed ball `B_r(c)`.
    pub fn ball_nodes(&self, c: Point, r: f64) -> Vec<usize> {
        let (lo, _) = self.bounds();
        let h = self.h;
        let i0 = (((c[0] - r - lo[0]) / h).floor().max(0.0)) as usize;
        let i1 = ((((c[0] + r - lo[0]) / h).ceil()) as usize).min(self.nx() - 1);
        let (j0, j1) = if self.dim == 2 {
            (
                (((c[1] - r - lo[1]) / h).floor().max(0.0)) as usize,
                ((((c[1] + r - lo[1]) / h).ceil()) as usize).min(self.ny() - 1),
            )
        } else {
            (0, 0)
        };
        let r2 = r * r * (1.0 + 1e-12);
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = self.index(i, j);
                let p = self.point(k);
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                if d2 <= r2 {
                    out.push(k);
                }
            }
        }
        out
    }

    /// Linear (1D) or bilinear (2D) interpolation; `None` outside the box.
    pub fn interpolate(&self, p: Point) -> Option<f64> {
        let (lo, hi) = self.bounds();
        let tol = 1e-12 * self.h.max(1.0);
        if p[0] < lo[0] - tol || p[0] > hi[0] + tol {
            return None;
        }
        let fx = ((p[0] - lo[0]) / self.h).clamp(0.0, (self.nx() - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx() - 2);
        let sx = fx - i as f64;
        if self.dim == 1 {
            return Some((1.0 - sx) * self.values[i] + sx * self.values[i + 1]);
        }
        if p[1] < lo[1] - tol || p[1] > hi[1] + tol {
            return None;
        }
        let fy = ((p[1] - lo[1]) / self.h).clamp(0.0, (self.ny() - 1) as f64);
        let j = (fy.floor() as usize).min(self.ny() - 2);
        let sy = fy - j as f64;
        let v = |ii: usize, jj: usize| self.values[self.index(ii, jj)];
        Some(
            (1.0 - sx) * (1.0 - sy) * v(i, j)
                + sx * (1.0 - sy) * v(i + 1, j)
                + (1.0 - sx) * sy * v(i, j + 1)
                + sx * sy * v(i + 1, j + 1),
        )
    }

    /// Same values with coordinates shifted so that `z` becomes the origin.
    pub fn translated(&self, z: Point) -> GridField {
        let mut out = self.clone();
        for (o, zc) in out.origin.iter_mut().zip(z) {
            *o -= zc;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn sup_distance(&self, other: &GridField) -> Result<f64> {
        if self.shape != other.shape {
            return Err(domain("fields live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Serializes to the field CSV format.
    pub fn to_csv(&self) -> String {
        let join = |v: &[String]| v.join(";");
        let mut s = String::with_capacity(self.len() * 24 + 64);
        s.push_str("dim,shape,h,origin,eps\n");
        let shape: Vec<String> = self.shape.iter().map(|n| n.to_string()).collect();
        let origin: Vec<String> = self.origin.iter().map(|o| format!("{o:?}")).collect();
        let _ = writeln!(
            s,
            "{},{},{:?},{},{:?}",
            self.dim,
            join(&shape),
            self.h,
            join(&origin),
            self.eps
        );
        if self.dim == 2 {
            s.push_str("i,j,value\n");
            for k in 0..self.len() {
                let (i, j) = self.ij(k);
                let _ = writeln!(s, "{i},{j},{:?}", self.values[k]);
            }
        } else {
            s.push_str("i,value\n");
            for (i, v) in self.values.iter().enumerate() {
                let _ = writeln!(s, "{i},{v:?}");
            }
        }
        s
    }

    /// Parses the field CSV format; errors carry the 1-based line number.
    pub fn from_csv(text: &str) -> Result<Self> {
        let perr = |row: usize, message: String| Error::Parse { row, message };
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
        let (r, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        if header != "dim,shape,h,origin,eps" {
            return Err(perr(
                r,
                format!("expected header `dim,shape,h,origin,eps`, got `{header}`"),
            ));
        }
        let (r, meta) = lines
            .next()
            .ok_or_else(|| perr(2, "missing metadata row".into()))?;
        let cols: Vec<&str> = meta.split(',').collect();
        if cols.len() != 5 {
            return Err(perr(
                r,
                format!("metadata row needs 5 columns, got {}", cols.len()),
            ));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| perr(r, format!("bad number `{s}`: {e}")))
        };
        let dim: usize = cols[0]
            .trim()
            .parse()
            .map_err(|e| perr(r, format!("bad dim: {e}")))?;
        let shape = cols[1]
            .split(';')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| perr(r, format!("bad shape `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let h = num(cols[2])?;
        let origin = cols[3].split(';').map(num).collect::<Result<Vec<_>>>()?;
        let eps = num(cols[4])?;
        if shape.len() != dim {
            return Err(perr(
                r,
                format!("shape has {} axes but dim is {dim}", shape.len()),
            ));
        }
        let mut g = Self::zeros(&shape, h, &origin, eps).map_err(|e| perr(r, e.to_string()))?;
        let (r, colhead) = lines
            .next()
            .ok_or_else(|| perr(3, "missing column header".into()))?;
        let expected = if dim == 2 { "i,j,value" } else { "i,value" };
        if colhead != expected {
            return Err(perr(r, format!("expected `{expected}`, got `{colhead}`")));
        }
        let mut seen = vec![false; g.len()];
        let mut count = 0usize;
        for (r, line) in lines {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != dim + 1 {
                return Err(perr(
                    r,
                    format!("expected {} columns, got {}", dim + 1, cols.len()),
                ));
            }
            let idx = |s: &str, n: usize| -> Result<usize> {
                let v: usize = s
                    .trim()
                    .parse()
                    .map_err(|e| perr(r, format!("bad index `{s}`: {e}")))?;
                if v >= n {
                    return Err(perr(r, format!("index {v} out of range 0..{n}")));
                }
                Ok(v)
            };
            let i = idx(cols[0], g.nx())?;
            let j = if dim == 2 { idx(cols[1], g.ny())? } else { 0 };
            let v: f64 = cols[dim]
                .trim()
                .parse()
                .map_err(|e| perr(r, format!("bad value `{}`: {e}", cols[dim])))?;
            if !v.is_finite() {
                return Err(perr(r, format!("non-finite value {v}")));
            }
            let k = g.index(i, j);
            if seen[k] {
                return Err(perr(r, format!("duplicate node ({i}, {j})")));
            }
            seen[k] = true;
            g.values[k] = v;
            count += 1;
        }
        if count != g.len() {
            return Err(perr(
                text.lines().count(),
                format!("expected {} nodes, found {count}", g.len()),
            ));
        }
        Ok(g)
    }
}

/// Parses a node-set CSV (`x,y` per row, optional header) into points.
pub fn parse_point_set(text: &str) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.chars().any(|c| c.is_ascii_alphabetic())) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.is_empty() || cols.len() > 2 {
            return Err(Error::Parse {
                row: n + 1,
                message: format!("expected 1 or 2 columns, got {}", cols.len()),
            });
        }
        let mut p = [0.0; 2];
        for (c, s) in cols.iter().enumerate() {
            p[c] = s.trim().parse().map_err(|e| Error::Parse {
                row: n + 1,
                message: format!("bad number `{s}`: {e}"),
            })?;
        }
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let g = GridField::from_fn(&[5, 4], 0.1, &[-0.2, 0.3], 0.05, |p| {
            (p[0] * 7.0).sin() + p[1] / 3.0
        })
        .unwrap();
        let back = GridField::from_csv(&g.to_csv()).unwrap();
        assert_eq!(g, back);
        let g1 = GridField::from_fn(&[7], 1.0 / 3.0, &[0.0], 0.0, |p| p[0] * p[0]).unwrap();
        assert_eq!(g1, GridField::from_csv(&g1.to_csv()).unwrap());
    }

    #[test]
    fn corrupted_rows_report_line() {
        let g = GridField::from_fn(&[3, 3], 0.5, &[0.0, 0.0], 0.1, |p| p[0]).unwrap();
        let mut text = g.to_csv();
        text = text.replacen("1,1,0.5", "1,1,zero", 1);
        match GridField::from_csv(&text) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 8),
            other => panic!("{other:?}"),
        }
        let truncated: String = g
            .to_csv()
            .lines()
            .take(6)
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            GridField::from_csv(&truncated),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let f = |p: Point| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let g = GridField::from_fn(&[11, 9], 0.1, &[0.0, 0.0], 0.0, f).unwrap();
        for p in [[0.33, 0.41], [0.0, 0.0], [1.0, 0.8], [0.95, 0.05]] {
            assert!((g.interpolate(p).unwrap() - f(p)).abs() < 1e-12);
        }
        assert!(g.interpolate([1.2, 0.1]).is_none());
    }

    #[test]
    fn ball_nodes_are_inside() {
        let g = GridField::centered_box(2, 1.0, 41, 0.0).unwrap();
        let nodes = g.ball_nodes([0.1, -0.2], 0.3);
        assert!(!nodes.is_empty());
        for k in nodes {
            let p = g.point(k);
            assert!(((p[0] - 0.1).powi(2) + (p[1] + 0.2).powi(2)).sqrt() <= 0.3 + 1e-12);
        }
        assert!(g.contains_ball([0.0, 0.0], 1.0));
        assert!(!g.contains_ball([0.5, 0.0], 0.6));
    }
}
