//! Flat `key = value` experiment configuration.
//!
//! Global keys apply to every suite; a key written `suite.key` applies to
//! that suite only and wins over the global one. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{io_err, HResult, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Certify,
    Profile,
    Barriers,
    Decay,
    Solve,
    Weiss,
    Flatness,
    Blowdown,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Certify,
        Suite::Profile,
        Suite::Barriers,
        Suite::Decay,
        Suite::Solve,
        Suite::Weiss,
        Suite::Flatness,
        Suite::Blowdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Certify => "certify",
            Suite::Profile => "profile",
            Suite::Barriers => "barriers",
            Suite::Decay => "decay",
            Suite::Solve => "solve",
            Suite::Weiss => "weiss",
            Suite::Flatness => "flatness",
            Suite::Blowdown => "blowdown",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Desk-scale defaults for the polynomial potential.
    fn defaults(self) -> Vec<(&'static str, &'static str)> {
        match self {
            Suite::Certify => vec![("eps", "1"), ("grid_points", "1000000")],
            Suite::Profile => vec![
                ("eps", "1, 0.1, 0.01"),
                ("t", "0.1, 0.01"),
                ("bound_eps", "0.1, 0.01, 0.001"),
                ("window", "5"),
            ],
            Suite::Barriers => vec![
                ("eps", "0.01, 0.001, 0.0001, 0.00001"),
                ("deltas", "0, 0.5"),
                ("sigma", "0.5"),
                ("eps0", "0.1"),
                ("radial", "0.1, 0.05, 0.3"),
                ("h_ratios", "10, 20, 40"),
            ],
            Suite::Decay => vec![
                ("eps", "0.01, 0.001"),
                ("h", "0.000125"),
                ("nodes", "321"),
                ("boundary", "tilted:0.05"),
                ("centers", "3"),
            ],
            Suite::Solve => vec![
                ("eps", "0.05"),
                ("h", "0.00625"),
                ("nodes", "256"),
                ("boundary", "curved:0.1:1"),
                ("order_h", "0.003125, 0.0015625, 0.00078125, 0.000390625"),
            ],
            Suite::Weiss => vec![
                ("eps", "0.05"),
                ("h", "0.00625"),
                ("nodes", "161"),
                ("boundary", "curved:0.1:1"),
                ("radii", "0.15, 0.2, 0.25, 0.3, 0.35, 0.4"),
                ("sharp_h", "0.00390625"),
                ("sharp_r", "0.5"),
                ("scaling_factors", "0.5, 0.25"),
                ("scaling_radii", "0.5, 1"),
            ],
            Suite::Flatness => vec![
                ("eps", "0.001"),
                ("h", "0.000125"),
                ("nodes", "241"),
                ("boundary", "curved:0.1:16"),
                ("r", "0.012"),
                ("rho0", "0.2"),
                ("levels", "3"),
                ("delta0", "0.125"),
                ("theta0", "0.5"),
                ("drift_c", "1"),
                ("planar_eps", "0.0001, 0.00001"),
                ("planar_r", "1"),
                ("deltas", "0.01, 0.05"),
                ("eps0", "0.1"),
            ],
            Suite::Blowdown => vec![
                ("eps", "1"),
                ("h", "0.125"),
                ("box", "20"),
                ("boundary", "tilted:0.05"),
                ("factors", "0.2, 0.1, 0.05"),
            ],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dirichlet data built from the monotone 1D profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// `v(x_2)`.
    Planar,
    /// `v(nu . x)` with `nu = (sin a, cos a)`.
    Tilted(f64),
    /// `v(d(x))`, `d` the signed distance to the circle of curvature
    /// `kappa` tangent at the origin to the line `nu . x = 0`.
    Curved { angle: f64, kappa: f64 },
    Zero,
}

impl Boundary {
    fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number `{t}` in boundary `{s}`"));
        match parts.as_slice() {
            ["planar"] => Ok(Boundary::Planar),
            ["zero"] => Ok(Boundary::Zero),
            ["tilted", a] => Ok(Boundary::Tilted(num(a)?)),
            ["curved", a, k] => {
                let kappa = num(k)?;
                if !(kappa >= 0.0) {
                    return Err(format!("curvature must be nonnegative in `{s}`"));
                }
                Ok(Boundary::Curved { angle: num(a)?, kappa })
            }
            _ => Err(format!(
                "unknown boundary `{s}` (expected planar, zero, tilted:<angle> or curved:<angle>:<kappa>)"
            )),
        }
    }

    /// Unit normal of the data's interface at the origin.
    pub fn normal(&self) -> [f64; 2] {
        let a = match *self {
            Boundary::Tilted(a) | Boundary::Curved { angle: a, .. } => a,
            Boundary::Planar | Boundary::Zero => 0.0,
        };
        [a.sin(), a.cos()]
    }
}

/// Keys a config may set besides the structural ones.
const PARAM_KEYS: &[&str] = &[
    "grid_points",
    "t",
    "bound_eps",
    "window",
    "deltas",
    "sigma",
    "eps0",
    "radial",
    "h_ratios",
    "nodes",
    "centers",
    "order_h",
    "radii",
    "sharp_h",
    "sharp_r",
    "scaling_factors",
    "scaling_radii",
    "r",
    "rho0",
    "levels",
    "delta0",
    "theta0",
    "drift_c",
    "planar_eps",
    "planar_r",
    "factors",
];

const STRUCTURAL_KEYS: &[&str] = &[
    "experiment",
    "potential",
    "eps",
    "box",
    "h",
    "boundary",
    "out",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Suite,
    pub potential: String,
    /// Strictly decreasing eps ladder.
    pub eps: Vec<f64>,
    /// Half-width `L` of the box `[-L, L]^N`; `None` lets the suite size it from `nodes`.
    pub box_half: Option<f64>,
    /// Grid spacing at the smallest eps; rungs scale it with eps.
    pub h: f64,
    pub boundary: Boundary,
    pub out: PathBuf,
    pub seed: u64,
    pub params: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    scope: Option<Suite>,
    key: String,
    value: String,
}

/// Parsed but unresolved config text.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: Vec<Entry>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> HResult<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(HarnessError::Config {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            let (scope, key) = match k.split_once('.') {
                Some((s, key)) => match Suite::from_name(s) {
                    Some(suite) => (Some(suite), key),
                    None => {
                        return Err(HarnessError::Config {
                            line,
                            message: format!("unknown suite `{s}` in key `{k}`"),
                        })
                    }
                },
                None => (None, k),
            };
            if !STRUCTURAL_KEYS.contains(&key) && !PARAM_KEYS.contains(&key) {
                return Err(HarnessError::Config {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if v.is_empty() {
                return Err(HarnessError::Config {
                    line,
                    message: format!("empty value for `{k}`"),
                });
            }
            entries.push(Entry {
                line,
                scope,
                key: key.to_string(),
                value: v.to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> HResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    /// The suite named by `experiment`, if any.
    pub fn experiment(&self) -> HResult<Option<Suite>> {
        let mut out = None;
        for e in self.entries.iter().filter(|e| e.key == "experiment" && e.scope.is_none()) {
            if e.value == "all" {
                out = None;
                continue;
            }
            out = Some(Suite::from_name(&e.value).ok_or_else(|| HarnessError::Config {
                line: e.line,
                message: format!("unknown experiment `{}`", e.value),
            })?);
        }
        Ok(out)
    }

    /// Suite defaults, then global keys, then `suite.`-scoped keys.
    pub fn resolve(&self, suite: Suite) -> HResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig {
            experiment: suite,
            potential: "polynomial".into(),
            eps: Vec::new(),
            box_half: None,
            h: 0.0,
            boundary: Boundary::Planar,
            out: PathBuf::from("out"),
            seed: 7,
            params: BTreeMap::new(),
        };
        let mut h_set = false;
        let defaults = suite.defaults();
        let default_entries = defaults.iter().map(|(k, v)| Entry {
            line: 0,
            scope: None,
            key: k.to_string(),
            value: v.to_string(),
        });
        let global = self.entries.iter().filter(|e| e.scope.is_none()).cloned();
        let scoped = self.entries.iter().filter(|e| e.scope == Some(suite)).cloned();
        for e in default_entries.chain(global).chain(scoped) {
            let err = |message: String| HarnessError::Config { line: e.line, message };
            match e.key.as_str() {
                "experiment" => {}
                "potential" => cfg.potential = e.value.clone(),
                "eps" => cfg.eps = parse_list(&e.value).map_err(err)?,
                "box" => cfg.box_half = Some(parse_scalar(&e.value).map_err(err)?),
                "h" => {
                    cfg.h = parse_scalar(&e.value).map_err(err)?;
                    h_set = true;
                }
                "boundary" => cfg.boundary = Boundary::parse(&e.value).map_err(err)?,
                "out" => cfg.out = PathBuf::from(&e.value),
                "seed" => {
                    cfg.seed = e
                        .value
                        .parse()
                        .map_err(|_| err(format!("seed must be a nonnegative integer, got `{}`", e.value)))?
                }
                key => {
                    let v = parse_list(&e.value).map_err(err)?;
                    cfg.params.insert(key.to_string(), v);
                }
            }
        }
        if !h_set {
            cfg.h = cfg.eps.iter().copied().fold(f64::INFINITY, f64::min) / 8.0;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_scalar(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_scalar).collect()
}

impl ExperimentConfig {
    /// Default configuration of one suite.
    pub fn default_for(suite: Suite) -> HResult<Self> {
        ConfigFile::default().resolve(suite)
    }

    pub fn validate(&self) -> HResult<()> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.eps.is_empty() {
            return bad("eps ladder is empty".into());
        }
        if self.eps.iter().any(|&e| !(e > 0.0)) {
            return bad(format!("eps values must be positive, got {:?}", self.eps));
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return bad(format!("eps ladder must be strictly decreasing, got {:?}", self.eps));
        }
        let min_eps = self.eps[self.eps.len() - 1];
        if !(self.h > 0.0) || self.h > min_eps / 8.0 * (1.0 + 1e-12) {
            return bad(format!(
                "h = {} must be positive and at most min(eps) / 8 = {}",
                self.h,
                min_eps / 8.0
            ));
        }
        if let Some(l) = self.box_half {
            if !(l > 0.0) {
                return bad(format!("box half-width must be positive, got {l}"));
            }
        }
        Ok(())
    }

    /// Grid spacing for rung `eps`: `h` scaled so that `eps / h` stays fixed.
    pub fn h_for(&self, eps: f64) -> f64 {
        self.h * eps / self.eps[self.eps.len() - 1]
    }

    pub fn list(&self, key: &str) -> HResult<&[f64]> {
        self.params
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| HarnessError::Invalid(format!("{} needs parameter `{key}`", self.experiment)))
    }

    pub fn scalar(&self, key: &str) -> HResult<f64> {
        match self.list(key)? {
            [v] => Ok(*v),
            v => Err(HarnessError::Invalid(format!("`{key}` must be a single value, got {v:?}"))),
        }
    }

    pub fn count(&self, key: &str) -> HResult<usize> {
        let v = self.scalar(key)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(HarnessError::Invalid(format!("`{key}` must be a positive integer, got {v}")));
        }
        Ok(v as usize)
    }
}
