//! Run configuration files.
//!
//! A configuration is a list of `key = value` lines. Blank lines and
//! everything after `#` are ignored, keys are case sensitive, and numbers use
//! `.` as the decimal separator. Relative paths are resolved against the
//! directory of the configuration file.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `family` | `cubic`, `double_well`, `alpha_bistable` or `table` | required |
//! | `s0` | sign change of `cubic` and `alpha_bistable` | required there |
//! | `alpha` | exponent of `double_well` and `alpha_bistable` | required there |
//! | `table` | CSV file with columns `s,g` for `table` | required there |
//! | `p` | power of the diffusion operator, `p > 1` | `2` |
//! | `d0`, `d2` | diffusion `d(s) = d0 + d2 s²` | `1`, `0` |
//! | `tol_c`, `tol_ode`, `tol_quad` | solver tolerances | `1e-10`, `1e-10`, `1e-12` |
//! | `gamma_minus`, `gamma0_minus`, `gamma_plus`, `gamma0_plus` | endpoint exponents, all four or none | family value or fit |
//! | `x0` | anchor with `U(x0) = 0` | `0` |
//! | `samples` | number of profile samples | `2048` |
//! | `out` | output directory | `out` |
//! | `sweep_p` | comma-separated grid of `p` | none |
//! | `sweep_param` | comma-separated grid of the family parameter (`s0` for `cubic`, `alpha` otherwise) | none |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fkpp_core::problem::TabulatedReaction;
use fkpp_core::{AsymptoticExponents, BuiltinFamily, Diffusion, ExponentSource};

use crate::CliError;

/// Reaction family named in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Cubic { s0: f64 },
    DoubleWell { alpha: f64 },
    AlphaBistable { alpha: f64, s0: f64 },
    Table { path: PathBuf },
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Cubic { .. } => "cubic",
            Problem::DoubleWell { .. } => "double_well",
            Problem::AlphaBistable { .. } => "alpha_bistable",
            Problem::Table { .. } => "table",
        }
    }

    /// Name of the parameter swept by `sweep_param`.
    pub fn param_name(&self) -> Option<&'static str> {
        match self {
            Problem::Cubic { .. } => Some("s0"),
            Problem::DoubleWell { .. } | Problem::AlphaBistable { .. } => Some("alpha"),
            Problem::Table { .. } => None,
        }
    }

    pub fn with_param(&self, v: f64) -> Problem {
        match self {
            Problem::Cubic { .. } => Problem::Cubic { s0: v },
            Problem::DoubleWell { .. } => Problem::DoubleWell { alpha: v },
            Problem::AlphaBistable { s0, .. } => Problem::AlphaBistable { alpha: v, s0: *s0 },
            Problem::Table { .. } => self.clone(),
        }
    }

    pub fn family(&self) -> Result<BuiltinFamily, CliError> {
        Ok(match self {
            Problem::Cubic { s0 } => BuiltinFamily::CubicBistable { s0: *s0 },
            Problem::DoubleWell { alpha } => BuiltinFamily::DoubleWellAlpha { alpha: *alpha },
            Problem::AlphaBistable { alpha, s0 } => BuiltinFamily::AlphaBistable { alpha: *alpha, s0: *s0 },
            Problem::Table { path } => BuiltinFamily::Tabulated(
                TabulatedReaction::from_csv(path)
                    .map_err(|e| CliError::Config(format!("table {}: {e}", path.display())))?,
            ),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Problem::Cubic { s0 } => serde_json::json!({ "family": "cubic", "s0": s0 }),
            Problem::DoubleWell { alpha } => serde_json::json!({ "family": "double_well", "alpha": alpha }),
            Problem::AlphaBistable { alpha, s0 } => {
                serde_json::json!({ "family": "alpha_bistable", "alpha": alpha, "s0": s0 })
            }
            Problem::Table { path } => serde_json::json!({
                "family": "table",
                "table": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            }),
        }
    }
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub tol_c: f64,
    pub tol_ode: f64,
    pub tol_quad: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_c: 1e-10,
            tol_ode: 1e-10,
            tol_quad: 1e-12,
        }
    }
}

/// Grid swept by the `sweep` subcommand; a missing axis keeps the base value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sweep {
    pub p: Vec<f64>,
    pub param: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub p: f64,
    pub diffusion: Diffusion,
    pub tolerances: Tolerances,
    pub exponents: Option<AsymptoticExponents>,
    pub sweep: Option<Sweep>,
    pub output_dir: PathBuf,
    pub anchor_x0: f64,
    pub samples: usize,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses configuration text; relative paths are joined to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut kv = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if kv.insert(k.clone(), v).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        let mut take = Keys { kv, base };
        let family = take.string("family")?.ok_or_else(|| CliError::Config("missing key `family`".into()))?;
        let problem = match family.as_str() {
            "cubic" => Problem::Cubic { s0: take.required("s0")? },
            "double_well" => Problem::DoubleWell { alpha: take.required("alpha")? },
            "alpha_bistable" => Problem::AlphaBistable {
                alpha: take.required("alpha")?,
                s0: take.required("s0")?,
            },
            "table" => Problem::Table {
                path: take.path("table")?.ok_or_else(|| CliError::Config("missing key `table`".into()))?,
            },
            other => return Err(CliError::Config(format!("unknown family `{other}`"))),
        };
        let p = take.number("p")?.unwrap_or(2.0);
        let d0 = take.number("d0")?.unwrap_or(1.0);
        let diffusion = match take.number("d2")? {
            Some(d2) if d2 != 0.0 => Diffusion::Quadratic { d0, d2 },
            _ => Diffusion::Constant { d0 },
        };
        let defaults = Tolerances::default();
        let tolerances = Tolerances {
            tol_c: take.number("tol_c")?.unwrap_or(defaults.tol_c),
            tol_ode: take.number("tol_ode")?.unwrap_or(defaults.tol_ode),
            tol_quad: take.number("tol_quad")?.unwrap_or(defaults.tol_quad),
        };
        let gammas = [
            take.number("gamma_minus")?,
            take.number("gamma0_minus")?,
            take.number("gamma_plus")?,
            take.number("gamma0_plus")?,
        ];
        let exponents = match gammas {
            [Some(gm), Some(g0m), Some(gp), Some(g0p)] => Some(
                AsymptoticExponents::new(gm, g0m, gp, g0p, ExponentSource::UserSupplied)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            ),
            [None, None, None, None] => None,
            _ => return Err(CliError::Config("give all four exponent keys or none".into())),
        };
        let sweep_p = take.list("sweep_p")?;
        let sweep_param = take.list("sweep_param")?;
        let sweep = if sweep_p.is_none() && sweep_param.is_none() {
            None
        } else {
            Some(Sweep {
                p: sweep_p.unwrap_or_default(),
                param: sweep_param.unwrap_or_default(),
            })
        };
        let output_dir = take.path("out")?.unwrap_or_else(|| base.join("out"));
        let anchor_x0 = take.number("x0")?.unwrap_or(0.0);
        let samples = match take.string("samples")? {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Config(format!("`samples`: `{s}` is not a count")))?,
            None => 2048,
        };
        if let Some(k) = take.kv.keys().next() {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        let config = RunConfig {
            problem,
            p,
            diffusion,
            tolerances,
            exponents,
            sweep,
            output_dir,
            anchor_x0,
            samples,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [("tol_c", t.tol_c), ("tol_ode", t.tol_ode), ("tol_quad", t.tol_quad)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("`{name}` must be positive, got {v}")));
            }
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(CliError::Config(format!("`p` must exceed 1, got {}", self.p)));
        }
        if !self.anchor_x0.is_finite() {
            return Err(CliError::Config("`x0` must be finite".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.p.is_empty() && sweep.param.is_empty() {
                return Err(CliError::Config("sweep grids must be non-empty".into()));
            }
            if !sweep.param.is_empty() && self.problem.param_name().is_none() {
                return Err(CliError::Config("`sweep_param` needs a parametric family".into()));
            }
        }
        Ok(())
    }

    /// Instances of the sweep grid in row-major order (`p` outer), or the
    /// base instance when no sweep is configured.
    pub fn instances(&self) -> Vec<(String, RunConfig)> {
        let Some(sweep) = &self.sweep else {
            return vec![(self.problem.name().to_string(), self.clone())];
        };
        let ps = if sweep.p.is_empty() { vec![self.p] } else { sweep.p.clone() };
        let params: Vec<Option<f64>> = if sweep.param.is_empty() {
            vec![None]
        } else {
            sweep.param.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &p in &ps {
            for &v in &params {
                let mut inst = self.clone();
                inst.sweep = None;
                inst.p = p;
                let mut name = format!("p={p}");
                if let Some(v) = v {
                    inst.problem = self.problem.with_param(v);
                    name.push_str(&format!("_{}={v}", self.problem.param_name().unwrap_or("param")));
                }
                out.push((name, inst));
            }
        }
        out
    }
}

struct Keys<'a> {
    kv: BTreeMap<String, String>,
    base: &'a Path,
}

impl Keys<'_> {
    fn string(&mut self, key: &str) -> Result<Option<String>, CliError> {
        Ok(self.kv.remove(key))
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        self.kv.remove(key).map(|v| parse_number(key, &v)).transpose()
    }

    fn required(&mut self, key: &str) -> Result<f64, CliError> {
        self.number(key)?
            .ok_or_else(|| CliError::Config(format!("missing key `{key}`")))
    }

    fn path(&mut self, key: &str) -> Result<Option<PathBuf>, CliError> {
        Ok(self.kv.remove(key).map(|v| self.base.join(v)))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.kv.remove(key) else {
            return Ok(None);
        };
        let items: Vec<f64> = v
            .split(',')
            .map(|s| parse_number(key, s.trim()))
            .collect::<Result<_, _>>()?;
        Ok(Some(items))
    }
}

fn parse_number(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Config(format!("`{key}`: `{v}` is not a finite number")))
}
