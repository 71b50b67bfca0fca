//! Run configuration: TOML-style `key = value` lines grouped in `[sections]`.
//!
//! Only `[physics]` is mandatory. Every other key has a default; unknown keys
//! and sections are rejected with the offending line number.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_step::{StepOptions, TimeScheme};
use crate::outflow::{BernoulliOptions, OutflowInit, PressureSpec, PressureTable};
use crate::picard::PicardConfig;
use crate::state::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub y_max: f64,
    /// x-period.
    pub lx: f64,
    /// Rows of the physical output grid.
    pub ny_phys: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nx: 64,
            ny: 129,
            y_max: 20.0,
            lx: 2.0 * PI,
            ny_phys: 129,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Highest derivative order in the Sobolev and energy diagnostics.
    pub k_order: usize,
    pub t_window: f64,
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub taylor_order: usize,
    pub cfl_safety: f64,
    pub dissipation: f64,
    pub time_scheme: TimeScheme,
    /// Store every n-th level in the written series.
    pub snapshot_every: usize,
    pub bernoulli_filter: f64,
    /// Largest accepted `E(T)/E(0)`.
    pub envelope_ceiling: f64,
    pub ladder_floor: f64,
    pub ladder_target: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            k_order: 4,
            t_window: 0.5,
            dt: 0.01,
            picard_tol: 1e-8,
            picard_max_iters: 50,
            taylor_order: 1,
            cfl_safety: 0.4,
            dissipation: 0.0625,
            time_scheme: TimeScheme::ImexEuler,
            snapshot_every: 10,
            bernoulli_filter: 0.01,
            envelope_ceiling: 10.0,
            ladder_floor: 1e-3,
            ladder_target: 0.5,
            seed: 7,
        }
    }
}

impl SolverConfig {
    pub fn picard(&self) -> PicardConfig {
        PicardConfig {
            t_window: self.t_window,
            dt: self.dt,
            picard_tol: self.picard_tol,
            max_iters: self.picard_max_iters,
            taylor_order: self.taylor_order,
            step: self.step_options(),
        }
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            scheme: self.time_scheme,
            cfl_safety: self.cfl_safety,
            dissipation: self.dissipation,
        }
    }

    pub fn bernoulli_options(&self) -> BernoulliOptions {
        BernoulliOptions {
            filter: self.bernoulli_filter,
            cfl_safety: self.cfl_safety,
        }
    }
}

/// Initial outflow trace `U = u_mean + u_amp sin(kx)`, likewise `I`, and
/// `H = h_mean + h_amp cos(kx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutflowConfig {
    pub u_mean: f64,
    pub u_amp: f64,
    pub i_mean: f64,
    pub i_amp: f64,
    pub h_mean: f64,
    pub h_amp: f64,
    pub wavenumber: f64,
}

impl Default for OutflowConfig {
    fn default() -> Self {
        OutflowConfig {
            u_mean: 0.0,
            u_amp: 0.1,
            i_mean: 0.0,
            i_amp: 0.0,
            h_mean: 1.0,
            h_amp: 0.0,
            wavenumber: 1.0,
        }
    }
}

impl OutflowConfig {
    pub fn init(&self, nx: usize, lx: f64) -> OutflowInit {
        OutflowInit::harmonic(
            nx,
            lx,
            self.wavenumber,
            (self.u_mean, self.u_amp),
            (self.i_mean, self.i_amp),
            (self.h_mean, self.h_amp),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PressureKind {
    Constant,
    Cosine,
    Table,
}

/// Total pressure at the boundary-layer edge. Which keys apply depends on
/// `kind`: `value` for constant; `base`, `amplitude`, `wavenumber`, `ramp` for
/// cosine; `path` for table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureConfig {
    pub kind: PressureKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for PressureConfig {
    fn default() -> Self {
        PressureConfig {
            kind: PressureKind::Constant,
            value: Some(2.0),
            base: None,
            amplitude: None,
            wavenumber: None,
            ramp: None,
            path: None,
        }
    }
}

impl PressureConfig {
    fn present(&self) -> [(&'static str, bool); 6] {
        [
            ("value", self.value.is_some()),
            ("base", self.base.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("wavenumber", self.wavenumber.is_some()),
            ("ramp", self.ramp.is_some()),
            ("path", self.path.is_some()),
        ]
    }

    fn allowed(kind: PressureKind) -> &'static [&'static str] {
        match kind {
            PressureKind::Constant => &["value"],
            PressureKind::Cosine => &["base", "amplitude", "wavenumber", "ramp"],
            PressureKind::Table => &["path"],
        }
    }

    /// Fill defaults for the keys of `kind`; returns the first key that does
    /// not belong to it.
    fn resolve(&mut self) -> std::result::Result<(), &'static str> {
        let allowed = Self::allowed(self.kind);
        if let Some((key, _)) = self
            .present()
            .into_iter()
            .find(|(k, set)| *set && !allowed.contains(k))
        {
            return Err(key);
        }
        match self.kind {
            PressureKind::Constant => {
                self.value.get_or_insert(2.0);
            }
            PressureKind::Cosine => {
                self.base.get_or_insert(2.0);
                self.amplitude.get_or_insert(0.0);
                self.wavenumber.get_or_insert(1.0);
                self.ramp.get_or_insert(0.0);
            }
            PressureKind::Table => {}
        }
        Ok(())
    }

    /// Build the pressure; table paths are relative to `base_dir`.
    pub fn spec(&self, lx: f64, base_dir: &Path) -> Result<PressureSpec> {
        Ok(match self.kind {
            PressureKind::Constant => PressureSpec::Constant {
                value: self.value.unwrap_or(2.0),
            },
            PressureKind::Cosine => PressureSpec::Cosine {
                base: self.base.unwrap_or(2.0),
                amplitude: self.amplitude.unwrap_or(0.0),
                wavenumber: self.wavenumber.unwrap_or(1.0),
                ramp: self.ramp.unwrap_or(0.0),
            },
            PressureKind::Table => {
                let rel = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("pressure kind \"table\" needs a path".into()))?;
                PressureSpec::Table(PressureTable::read(&base_dir.join(rel), lx)?)
            }
        })
    }
}

/// Layer profiles of the initial data in transformed coordinates:
/// `u1 = U(1 − e^{−r ȳ})`, `w1 = I(1 − e^{−r ȳ}) + w_bump·ȳ e^{−ȳ}`,
/// `q1 = H²/2 + q_bump·e^{−ȳ²}(1 + q_mod·cos x)` with `r = layer_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub w_bump: f64,
    pub q_bump: f64,
    pub q_mod: f64,
    pub layer_rate: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            w_bump: 0.05,
            q_bump: 0.2,
            q_mod: 0.5,
            layer_rate: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub physics: PhysicalParams,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outflow: OutflowConfig,
    #[serde(default)]
    pub pressure: PressureConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    /// Directory that relative paths resolve against.
    #[serde(skip, default = "current_dir")]
    pub base_dir: PathBuf,
}

impl Config {
    /// All defaults with the canonical physical constants.
    pub fn canonical() -> Self {
        Config {
            physics: PhysicalParams::canonical(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            outflow: OutflowConfig::default(),
            pressure: PressureConfig::default(),
            initial: InitialConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::ConfigNotFound(path.to_path_buf()))
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(cfg)
    }

    /// Parse and validate; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let at = |line: usize, message: String| Error::ConfigAt {
            path: origin.to_string(),
            line,
            message,
        };
        let mut cfg: Config = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            at(line, e.message().trim().to_string())
        })?;
        cfg.base_dir = PathBuf::from(".");
        if let Err(key) = cfg.pressure.resolve() {
            let line = key_line(text, "pressure", key).unwrap_or(1);
            return Err(at(
                line,
                format!(
                    "key `{key}` does not apply to pressure kind \"{}\"",
                    kind_name(cfg.pressure.kind)
                ),
            ));
        }
        if let Some((section, key, msg)) = cfg.violation() {
            let line = key_line(text, section, key)
                .or_else(|| section_line(text, section))
                .unwrap_or(1);
            return Err(at(line, msg));
        }
        Ok(cfg)
    }

    /// First violated constraint as `(section, key, message)`.
    pub fn violation(&self) -> Option<(&'static str, &'static str, String)> {
        if let Some((key, msg)) = self.physics.violation() {
            return Some(("physics", key, msg.to_string()));
        }
        let g = &self.grid;
        let s = &self.solver;
        let checks: [(&str, &str, bool, &str); 17] = [
            ("grid", "nx", g.nx >= 8, "nx must be at least 8"),
            ("grid", "ny", g.ny >= 9, "ny must be at least 9"),
            ("grid", "y_max", g.y_max >= 3.0, "y_max must be at least 3"),
            ("grid", "lx", g.lx > 0.0, "lx must be positive"),
            ("grid", "ny_phys", g.ny_phys >= 9, "ny_phys must be at least 9"),
            ("solver", "t_window", s.t_window > 0.0, "t_window must be positive"),
            ("solver", "dt", s.dt > 0.0, "dt must be positive"),
            ("solver", "picard_tol", s.picard_tol > 0.0, "picard_tol must be positive"),
            ("solver", "picard_max_iters", s.picard_max_iters >= 1, "picard_max_iters must be at least 1"),
            ("solver", "taylor_order", s.taylor_order <= 2, "taylor_order must be at most 2"),
            ("solver", "cfl_safety", s.cfl_safety > 0.0 && s.cfl_safety <= 1.0, "cfl_safety must lie in (0, 1]"),
            ("solver", "dissipation", s.dissipation >= 0.0, "dissipation must be nonnegative"),
            ("solver", "snapshot_every", s.snapshot_every >= 1, "snapshot_every must be at least 1"),
            ("solver", "envelope_ceiling", s.envelope_ceiling > 1.0, "envelope_ceiling must exceed 1"),
            ("solver", "ladder_floor", s.ladder_floor > 0.0, "ladder_floor must be positive"),
            ("solver", "ladder_target", s.ladder_target > 0.0 && s.ladder_target < 1.0, "ladder_target must lie in (0, 1)"),
            ("initial", "layer_rate", self.initial.layer_rate > 0.0, "layer_rate must be positive"),
        ];
        if let Some((sec, key, _, msg)) = checks.into_iter().find(|c| !c.2) {
            return Some((sec, key, msg.to_string()));
        }
        if crate::outflow::step_count(s.t_window, s.dt).is_err() {
            return Some(("solver", "dt", "t_window must be a whole multiple of dt".into()));
        }
        None
    }

    /// Fully resolved configuration as text, every default spelled out.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn pressure_spec(&self) -> Result<PressureSpec> {
        self.pressure.spec(self.grid.lx, &self.base_dir)
    }
}

fn current_dir() -> PathBuf {
    PathBuf::from(".")
}

fn kind_name(k: PressureKind) -> &'static str {
    match k {
        PressureKind::Constant => "constant",
        PressureKind::Cosine => "cosine",
        PressureKind::Table => "table",
    }
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].matches('\n').count() + 1
}

fn section_line(text: &str, section: &str) -> Option<usize> {
    let header = format!("[{section}]");
    text.lines()
        .position(|l| l.trim() == header)
        .map(|n| n + 1)
}

/// Line of `key = …` inside `[section]`.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('[') {
            current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}
