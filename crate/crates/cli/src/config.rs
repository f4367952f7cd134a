//! Run configuration: a sectioned `key = value` file.
//!
//! ```ini
//! [plant]
//! a1_re = 1
//! a2_re = 12
//! boundary = dirichlet
//! [target]
//! c = 5
//! [grid]
//! n_x = 101
//! dt = 1e-3
//! t_end = 0.8
//! ```
//!
//! Expressions are kept as source text and parsed during validation. Every
//! key is optional except where noted on the field; unknown keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use cgle_core::expr::Expr;
use cgle_core::grid::TriangleTimeGrid;
use cgle_core::problem::{gauge_transform, normalize};
use cgle_core::{BoundaryKind, CoefficientFn, NormalizedPlant, PlantSpec, Scheme, TargetSpec};
use cgle_core::problem::ComplexValue;
use ini::Ini;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Read(#[from] ini::Error),
    #[error("cannot parse config: {0}")]
    Syntax(#[from] ini::ParseError),
    #[error("[{section}] {key}: {message}")]
    Value {
        section: &'static str,
        key: String,
        message: String,
    },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error(transparent)]
    Model(#[from] cgle_core::Error),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSection {
    pub a1_re: f64,
    pub a1_im: f64,
    pub length: f64,
    pub horizon: f64,
    pub a2_re: String,
    pub a2_im: String,
    pub a3_re: String,
    pub a3_im: String,
    pub boundary: BoundaryKind,
    pub analytic_in_t: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSection {
    pub c: f64,
    /// Overrides the default `f = -c` when either part is given.
    pub f_re: Option<String>,
    pub f_im: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub n_x: usize,
    pub n_t: usize,
    pub t0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSection {
    pub rho: String,
    pub iota: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSection {
    pub closed_loop: bool,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Every `snapshot_stride`-th simulation step is kept for the oracles.
    pub snapshot_stride: usize,
}

/// Thresholds; a check is enabled when its threshold is present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChecksSection {
    pub min_decay_rate: Option<f64>,
    pub max_kernel_residual: Option<f64>,
    pub max_target_residual: Option<f64>,
    pub max_composition: Option<f64>,
    pub max_boundary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub plant: PlantSection,
    pub target: TargetSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    pub control: ControlSection,
    pub output: OutputSection,
    pub checks: ChecksSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            plant: PlantSection {
                a1_re: 1.0,
                a1_im: 0.0,
                length: 1.0,
                horizon: 1.0,
                a2_re: "0".into(),
                a2_im: "0".into(),
                a3_re: "0".into(),
                a3_im: "0".into(),
                boundary: BoundaryKind::Dirichlet,
                analytic_in_t: true,
            },
            target: TargetSection {
                c: 0.0,
                f_re: None,
                f_im: None,
            },
            grid: GridSection {
                n_x: 101,
                n_t: 1,
                t0: 0.8,
                dt: 1e-3,
                t_end: 0.8,
                scheme: Scheme::CrankNicolson,
            },
            initial: InitialSection {
                rho: "sin(pi*x)".into(),
                iota: "0".into(),
            },
            control: ControlSection {
                closed_loop: true,
                tol: 1e-10,
                max_iter: 40,
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
                snapshot_stride: 10,
            },
            checks: ChecksSection {
                max_boundary: Some(1e-10),
                ..ChecksSection::default()
            },
        }
    }
}

/// Reads the keys of one section, remembering which were consumed.
struct Reader<'a> {
    section: &'static str,
    props: Option<&'a ini::Properties>,
    seen: Vec<&'static str>,
}

impl<'a> Reader<'a> {
    fn new(ini: &'a Ini, section: &'static str) -> Self {
        Self {
            section,
            props: ini.section(Some(section)),
            seen: Vec::new(),
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.seen.push(key);
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn err(&self, key: &str, message: impl ToString) -> ConfigError {
        ConfigError::Value {
            section: self.section,
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    fn parse<T: FromStr>(&mut self, key: &'static str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| self.err(key, format!("`{v}`: {e}"))),
        }
    }

    fn optional<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| self.err(key, format!("`{v}`: {e}"))),
        }
    }

    fn expr(&mut self, key: &'static str, default: &str) -> Result<String> {
        let src = self.raw(key).unwrap_or(default).to_string();
        Expr::parse(&src).map_err(|e| self.err(key, e))?;
        Ok(src)
    }

    fn optional_expr(&mut self, key: &'static str) -> Result<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(src) => {
                Expr::parse(src).map_err(|e| self.err(key, e))?;
                Ok(Some(src.to_string()))
            }
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(props) = self.props {
            if let Some((key, _)) = props.iter().find(|(k, _)| !self.seen.contains(k)) {
                return Err(self.err(key, "unknown key"));
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 7] = ["plant", "target", "grid", "initial", "control", "output", "checks"];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_ini(&Ini::load_from_file_noescape(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_ini(&Ini::load_from_str_noescape(text)?)
    }

    fn from_ini(ini: &Ini) -> Result<Self> {
        for name in ini.sections().flatten() {
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection(name.to_string()));
            }
        }
        let d = Self::default();

        let mut r = Reader::new(ini, "plant");
        let plant = PlantSection {
            a1_re: r.parse("a1_re", d.plant.a1_re)?,
            a1_im: r.parse("a1_im", d.plant.a1_im)?,
            length: r.parse("length", d.plant.length)?,
            horizon: r.parse("horizon", d.plant.horizon)?,
            a2_re: r.expr("a2_re", &d.plant.a2_re)?,
            a2_im: r.expr("a2_im", &d.plant.a2_im)?,
            a3_re: r.expr("a3_re", &d.plant.a3_re)?,
            a3_im: r.expr("a3_im", &d.plant.a3_im)?,
            boundary: r.parse("boundary", d.plant.boundary)?,
            analytic_in_t: r.parse("analytic_in_t", d.plant.analytic_in_t)?,
        };
        r.finish()?;

        let mut r = Reader::new(ini, "target");
        let target = TargetSection {
            c: r.parse("c", d.target.c)?,
            f_re: r.optional_expr("f_re")?,
            f_im: r.optional_expr("f_im")?,
        };
        r.finish()?;

        let mut r = Reader::new(ini, "grid");
        let grid = GridSection {
            n_x: r.parse("n_x", d.grid.n_x)?,
            n_t: r.parse("n_t", d.grid.n_t)?,
            t0: r.parse("t0", d.grid.t0)?,
            dt: r.parse("dt", d.grid.dt)?,
            t_end: r.parse("t_end", d.grid.t_end)?,
            scheme: r.parse("scheme", d.grid.scheme)?,
        };
        // the characteristic grid is tied to n_x; accept consistent values
        let n_xi: Option<usize> = r.optional("n_xi")?;
        let n_eta: Option<usize> = r.optional("n_eta")?;
        if n_xi.is_some_and(|v| v != 2 * grid.n_x - 1) {
            return Err(r.err("n_xi", format!("must equal 2 n_x - 1 = {}", 2 * grid.n_x - 1)));
        }
        if n_eta.is_some_and(|v| v != grid.n_x) {
            return Err(r.err("n_eta", format!("must equal n_x = {}", grid.n_x)));
        }
        r.finish()?;

        let mut r = Reader::new(ini, "initial");
        let initial = InitialSection {
            rho: r.expr("rho", &d.initial.rho)?,
            iota: r.expr("iota", &d.initial.iota)?,
        };
        r.finish()?;

        let mut r = Reader::new(ini, "control");
        let control = ControlSection {
            closed_loop: r.parse("closed_loop", d.control.closed_loop)?,
            tol: r.parse("tol", d.control.tol)?,
            max_iter: r.parse("max_iter", d.control.max_iter)?,
        };
        r.finish()?;

        let mut r = Reader::new(ini, "output");
        let output = OutputSection {
            dir: r.raw("dir").map(PathBuf::from).unwrap_or(d.output.dir),
            snapshot_stride: r.parse("snapshot_stride", d.output.snapshot_stride)?,
        };
        r.finish()?;

        let mut r = Reader::new(ini, "checks");
        let checks = ChecksSection {
            min_decay_rate: r.optional("min_decay_rate")?,
            max_kernel_residual: r.optional("max_kernel_residual")?,
            max_target_residual: r.optional("max_target_residual")?,
            max_composition: r.optional("max_composition")?,
            max_boundary: match r.raw("max_boundary") {
                Some("none") => None,
                Some(v) => Some(v.parse().map_err(|e| r.err("max_boundary", format!("`{v}`: {e}")))?),
                None => d.checks.max_boundary,
            },
        };
        r.finish()?;

        let cfg = Self {
            plant,
            target,
            grid,
            initial,
            control,
            output,
            checks,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks the constraints of every model type built from the config.
    pub fn validate(&self) -> Result<()> {
        self.plant_spec()?;
        self.target_spec()?;
        TriangleTimeGrid::new(self.grid.n_x, self.grid.n_t, self.grid.t0)?;
        let grid_err = |key: &str, message: String| ConfigError::Value {
            section: "grid",
            key: key.into(),
            message,
        };
        if !(self.grid.dt > 0.0) {
            return Err(grid_err("dt", format!("must be positive, got {}", self.grid.dt)));
        }
        if !(self.grid.t_end > 0.0 && self.grid.t_end <= self.grid.t0) {
            return Err(grid_err("t_end", format!("must lie in (0, t0], got {}", self.grid.t_end)));
        }
        if !(self.control.tol > 0.0) {
            return Err(ConfigError::Value {
                section: "control",
                key: "tol".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn plant_spec(&self) -> Result<PlantSpec> {
        let p = &self.plant;
        Ok(PlantSpec::new(
            ComplexValue::new(p.a1_re, p.a1_im),
            CoefficientFn::parse(&p.a2_re, &p.a2_im, p.analytic_in_t)?,
            CoefficientFn::parse(&p.a3_re, &p.a3_im, true)?,
            p.length,
            p.horizon,
            p.boundary,
            self.grid.t0,
        )?)
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        let t = &self.target;
        if t.f_re.is_none() && t.f_im.is_none() {
            return Ok(TargetSpec::damped(t.c)?);
        }
        let f = CoefficientFn::parse(
            t.f_re.as_deref().unwrap_or("0"),
            t.f_im.as_deref().unwrap_or("0"),
            true,
        )?;
        Ok(TargetSpec::custom(f, t.c)?)
    }

    /// Gauge transform followed by normalization.
    pub fn normalized_plant(&self) -> Result<NormalizedPlant> {
        Ok(normalize(&gauge_transform(&self.plant_spec()?)?)?)
    }

    pub fn grid(&self) -> Result<TriangleTimeGrid> {
        Ok(TriangleTimeGrid::new(self.grid.n_x, self.grid.n_t, self.grid.t0)?)
    }

    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        let p = &self.plant;
        ini.with_section(Some("plant"))
            .set("a1_re", p.a1_re.to_string())
            .set("a1_im", p.a1_im.to_string())
            .set("length", p.length.to_string())
            .set("horizon", p.horizon.to_string())
            .set("a2_re", p.a2_re.clone())
            .set("a2_im", p.a2_im.clone())
            .set("a3_re", p.a3_re.clone())
            .set("a3_im", p.a3_im.clone())
            .set("boundary", p.boundary.to_string())
            .set("analytic_in_t", p.analytic_in_t.to_string());
        let mut target = ini.with_section(Some("target"));
        target.set("c", self.target.c.to_string());
        if let Some(f) = &self.target.f_re {
            target.set("f_re", f.clone());
        }
        if let Some(f) = &self.target.f_im {
            target.set("f_im", f.clone());
        }
        let g = &self.grid;
        ini.with_section(Some("grid"))
            .set("n_x", g.n_x.to_string())
            .set("n_t", g.n_t.to_string())
            .set("t0", g.t0.to_string())
            .set("dt", g.dt.to_string())
            .set("t_end", g.t_end.to_string())
            .set("scheme", g.scheme.to_string());
        ini.with_section(Some("initial"))
            .set("rho", self.initial.rho.clone())
            .set("iota", self.initial.iota.clone());
        ini.with_section(Some("control"))
            .set("closed_loop", self.control.closed_loop.to_string())
            .set("tol", self.control.tol.to_string())
            .set("max_iter", self.control.max_iter.to_string());
        ini.with_section(Some("output"))
            .set("dir", self.output.dir.display().to_string())
            .set("snapshot_stride", self.output.snapshot_stride.to_string());
        let c = &self.checks;
        let mut checks = ini.with_section(Some("checks"));
        let entries = [
            ("min_decay_rate", c.min_decay_rate),
            ("max_kernel_residual", c.max_kernel_residual),
            ("max_target_residual", c.max_target_residual),
            ("max_composition", c.max_composition),
        ];
        for (key, value) in entries {
            if let Some(v) = value {
                checks.set(key, v.to_string());
            }
        }
        checks.set(
            "max_boundary",
            c.max_boundary.map_or_else(|| "none".to_string(), |v| v.to_string()),
        );
        let mut out = Vec::new();
        ini.write_to_policy(&mut out, ini::EscapePolicy::Nothing)
            .expect("writing to memory cannot fail");
        String::from_utf8(out).expect("ini output is utf-8")
    }
}
