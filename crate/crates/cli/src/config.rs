//! Scenario files: flat `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! # comment
//! name = funnel_flow
//! kind = flow
//!
//! [surface]
//! type = funnel
//! n_s = 256
//! ```
//!
//! Keys before the first header belong to the top level. Unknown sections,
//! unknown keys and repeated keys are errors. Every field has a default
//! except `name` and `kind`; [`Scenario::to_config_string`] writes all of them
//! out, and parsing that text gives back the same scenario.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::LabError;

pub const MIN_GRID: usize = 32;
pub const MAX_GRID: usize = 1024;
pub const MAX_HORIZON: f64 = 50.0;
pub const MAX_AMPLITUDE: f64 = 1.0;
pub const MAX_SERIES_ORDER: usize = 10;
pub const MAX_MODE_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Flow,
    GreenSweep,
    Potential,
    CollarOrder,
    PoissonCheck,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Flow => "flow",
            Kind::GreenSweep => "green_sweep",
            Kind::Potential => "potential",
            Kind::CollarOrder => "collar_order",
            Kind::PoissonCheck => "poisson_check",
        }
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "flow" => Kind::Flow,
            "green_sweep" => Kind::GreenSweep,
            "potential" => Kind::Potential,
            "collar_order" => Kind::CollarOrder,
            "poisson_check" => Kind::PoissonCheck,
            _ => return Err(format!("unknown experiment kind {s:?}")),
        })
    }
}

/// Warp `A(r, θ)` of a collar background.
#[derive(Clone, Debug, PartialEq)]
pub enum Background {
    Flat,
    DiscExterior,
    SineSquared,
    /// `A = Σ cᵢ rⁱ`.
    Radial(Vec<f64>),
    /// Seeded random θ-dependent warp (seed from `[run] seed`).
    Random { modes: usize, amplitude: f64 },
}

impl Background {
    pub fn is_radial(&self) -> bool {
        matches!(self, Background::Flat | Background::DiscExterior | Background::Radial(_))
    }
}

impl fmt::Display for Background {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Background::Flat => f.write_str("flat"),
            Background::DiscExterior => f.write_str("disc_exterior"),
            Background::SineSquared => f.write_str("sine_squared"),
            Background::Radial(c) => {
                f.write_str("radial:")?;
                f.write_str(&join(c))
            }
            Background::Random { modes, amplitude } => write!(f, "random:{modes}:{amplitude}"),
        }
    }
}

impl FromStr for Background {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (head, tail) = s.split_once(':').unwrap_or((s, ""));
        let tail = tail.trim();
        match (head.trim(), tail.is_empty()) {
            ("flat", true) => Ok(Background::Flat),
            ("disc_exterior", true) => Ok(Background::DiscExterior),
            ("sine_squared", true) => Ok(Background::SineSquared),
            ("radial", false) => Ok(Background::Radial(parse_list(tail)?)),
            ("random", _) => {
                let mut parts = tail.split(':').filter(|p| !p.trim().is_empty());
                let modes = parts.next().map_or(Ok(1), |p| parse_num::<usize>(p))?;
                let amplitude = parts.next().map_or(Ok(0.5), |p| parse_num::<f64>(p))?;
                if parts.next().is_some() {
                    return Err(format!("background {s:?}: expected random[:modes[:amplitude]]"));
                }
                Ok(Background::Random { modes, amplitude })
            }
            _ => Err(format!(
                "unknown background {s:?} (flat, disc_exterior, sine_squared, radial:c0,c1,..., random[:modes[:amplitude]])"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceSpec {
    /// `f(r) = cosh(r/√2)` (R = −1), or `waist·cosh r` (R = −2) when a waist
    /// is given.
    Funnel { r_max: f64, waist: Option<f64> },
    CuspFunnel { r_max: f64 },
    FlatTorus { curvature: f64, period_s: f64, period_theta: f64 },
    Collar { background: Background, order: usize, modes: usize, r_range: (f64, f64) },
    Cusp { rho_range: (f64, f64) },
    /// Chart header JSON, and optionally a field header for Φ.
    Chart { path: PathBuf, phi: Option<PathBuf> },
}

impl SurfaceSpec {
    pub fn type_name(&self) -> &'static str {
        match self {
            SurfaceSpec::Funnel { .. } => "funnel",
            SurfaceSpec::CuspFunnel { .. } => "cusp_funnel",
            SurfaceSpec::FlatTorus { .. } => "flat_torus",
            SurfaceSpec::Collar { .. } => "collar",
            SurfaceSpec::Cusp { .. } => "cusp",
            SurfaceSpec::Chart { .. } => "chart",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surface {
    pub spec: SurfaceSpec,
    pub n_s: usize,
    pub n_theta: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSpec {
    pub t_end: f64,
    /// `None` keeps only the initial snapshot group.
    pub snapshot_every: Option<f64>,
    pub cfl: f64,
    pub dt: Option<f64>,
    pub stencil_steps: usize,
    pub blowup_threshold: f64,
    pub expect_blowup: bool,
    pub seed: u64,
}

/// Pass/fail thresholds reported in the manifest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub stationarity: f64,
    pub consistency: f64,
    pub decay_rate: f64,
    pub envelope: f64,
    pub envelope_from: f64,
    pub monitor_factor: f64,
    pub exhaustion: f64,
    pub green_relative: f64,
    pub monotone: f64,
    pub ball_ratio: f64,
    pub max_rate: f64,
    pub slope_n4: f64,
    pub slope_n6: f64,
    pub curvature_factor: f64,
    pub poisson: f64,
    pub gauss_bonnet: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stationarity: 1e-5,
            consistency: 1e-2,
            decay_rate: 0.8,
            envelope: 1.2,
            envelope_from: 0.5,
            monitor_factor: 5.0,
            exhaustion: 1e-4,
            green_relative: 0.02,
            monotone: 1e-12,
            ball_ratio: 2.0,
            max_rate: 4.0,
            slope_n4: 4.5,
            slope_n6: 6.5,
            curvature_factor: 5.0,
            poisson: 1e-6,
            gauss_bonnet: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Radial coordinate of the base point x₀.
    pub x0: f64,
    pub poles: Vec<f64>,
    /// θ grid column shared by x₀ and the poles.
    pub column: usize,
    /// Factor applied to `r_max` for the stability rerun; 1 skips it.
    pub extend: f64,
    /// Largest distance written to the Green profile.
    pub profile_max_distance: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            x0: -2.5,
            poles: vec![-1.5, -0.5, 0.5, 1.5, 2.5],
            column: 0,
            extend: 1.0,
            profile_max_distance: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollarSpec {
    pub orders: Vec<usize>,
    pub window: (f64, f64),
    /// Radial range of the curvature-excess quadrature.
    pub excess_range: (f64, f64),
}

impl Default for CollarSpec {
    fn default() -> Self {
        Self {
            orders: vec![4, 6],
            window: (1e-3, 1e-1),
            excess_range: (1e-2, 0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub surface: Surface,
    pub perturbation: Perturbation,
    pub run: RunSpec,
    pub tolerances: Tolerances,
    pub sweep: SweepSpec,
    pub collar: CollarSpec,
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("{:?}: {e}", s.trim()))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',').map(parse_num).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("{other:?} is not a boolean")),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list::<f64>(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        other => Err(format!("expected two numbers, got {}", other.len())),
    }
}

fn parse_optional<T: FromStr>(s: &str) -> Result<Option<T>, String>
where
    T::Err: fmt::Display,
{
    if s.trim() == "none" {
        Ok(None)
    } else {
        parse_num(s).map(Some)
    }
}

fn show_optional<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), ToString::to_string)
}

struct Entry {
    value: String,
    line: usize,
}

const SECTIONS: [&str; 7] = ["", "surface", "perturbation", "run", "tolerances", "sweep", "collar"];

/// Raw key/value table with consumption tracking.
struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn parse(text: &str) -> Result<Self, LabError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| invalid(line, format!("malformed section header {content:?}")))?
                    .trim();
                if name.is_empty() || !SECTIONS.contains(&name) {
                    return Err(invalid(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| invalid(line, format!("expected key = value, got {content:?}")))?;
            let key = key.trim().to_string();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(invalid(line, format!("malformed key {key:?}")));
            }
            let value = value.trim().to_string();
            if let Some(prev) = entries.insert((section.clone(), key.clone()), Entry { value, line }) {
                return Err(invalid(line, format!("{} repeats line {}", qualified(&section, &key), prev.line)));
            }
        }
        Ok(Self { entries })
    }

    fn take<T>(&mut self, section: &str, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, LabError> {
        match self.entries.remove(&(section.to_string(), key.to_string())) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|msg| invalid(e.line, format!("{}: {msg}", qualified(section, key)))),
        }
    }

    fn get<T>(&mut self, section: &str, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, LabError> {
        Ok(self.take(section, key, parse)?.unwrap_or(default))
    }

    fn require<T>(&mut self, section: &str, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, LabError> {
        self.take(section, key, parse)?
            .ok_or_else(|| LabError::Validation(format!("missing required key {}", qualified(section, key))))
    }

    fn finish(self) -> Result<(), LabError> {
        match self.entries.iter().next() {
            None => Ok(()),
            Some(((s, k), e)) => Err(invalid(e.line, format!("unknown key {}", qualified(s, k)))),
        }
    }
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("[{section}] {key}")
    }
}

fn invalid(line: usize, msg: String) -> LabError {
    LabError::Validation(format!("line {line}: {msg}"))
}

fn text(s: &str) -> Result<String, String> {
    Ok(s.to_string())
}

fn resolve(base: Option<&Path>, s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    let p = match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    };
    match std::env::current_dir() {
        Ok(cwd) if p.is_relative() => Ok(cwd.join(p)),
        _ => Ok(p),
    }
}

impl Scenario {
    /// Parses and validates a scenario. Relative chart paths are resolved
    /// against `base` (the directory of the config file).
    pub fn parse(text_in: &str, base: Option<&Path>) -> Result<Self, LabError> {
        let mut t = Table::parse(text_in)?;
        let name = t.require("", "name", text)?;
        let kind = t.require("", "kind", |s| s.parse::<Kind>())?;

        let ty = t.get("surface", "type", "funnel".to_string(), text)?;
        let n_s = t.get("surface", "n_s", 128, parse_num)?;
        let n_theta = t.get("surface", "n_theta", 32, parse_num)?;
        let spec = match ty.as_str() {
            "funnel" => SurfaceSpec::Funnel {
                r_max: t.get("surface", "r_max", 6.0, parse_num)?,
                waist: t.get("surface", "waist", None, parse_optional)?,
            },
            "cusp_funnel" => SurfaceSpec::CuspFunnel {
                r_max: t.get("surface", "r_max", 6.0, parse_num)?,
            },
            "flat_torus" => SurfaceSpec::FlatTorus {
                curvature: t.get("surface", "curvature", 0.0, parse_num)?,
                period_s: t.get("surface", "period_s", 1.0, parse_num)?,
                period_theta: t.get("surface", "period_theta", 1.0, parse_num)?,
            },
            "collar" => SurfaceSpec::Collar {
                background: t.get("surface", "background", Background::DiscExterior, |s| s.parse())?,
                order: t.get("surface", "order", 6, parse_num)?,
                modes: t.get("surface", "modes", 8, parse_num)?,
                r_range: t.get("surface", "r_range", (1e-2, 0.5), parse_pair)?,
            },
            "cusp" => SurfaceSpec::Cusp {
                rho_range: t.get("surface", "rho_range", (1e-4, 1e-1), parse_pair)?,
            },
            "chart" => SurfaceSpec::Chart {
                path: t.require("surface", "path", |s| resolve(base, s))?,
                phi: t.get("surface", "phi", None, |s| {
                    if s.trim() == "none" {
                        Ok(None)
                    } else {
                        resolve(base, s).map(Some)
                    }
                })?,
            },
            other => {
                return Err(LabError::Validation(format!(
                    "unknown surface type {other:?} (funnel, cusp_funnel, flat_torus, collar, cusp, chart)"
                )))
            }
        };

        let perturbation = Perturbation {
            amplitude: t.get("perturbation", "amplitude", 0.0, parse_num)?,
            center: t.get("perturbation", "center", 0.0, parse_num)?,
            width: t.get("perturbation", "width", 0.35, parse_num)?,
        };

        let run = RunSpec {
            t_end: t.get("run", "T", 1.0, parse_num)?,
            snapshot_every: t.get("run", "snapshot_every", None, parse_optional)?,
            cfl: t.get("run", "cfl", ricci_core::flow::DEFAULT_CFL, parse_num)?,
            dt: t.get("run", "dt", None, parse_optional)?,
            stencil_steps: t.get("run", "stencil_steps", 8, parse_num)?,
            blowup_threshold: t.get("run", "blowup_threshold", ricci_core::flow::BLOWUP_THRESHOLD, parse_num)?,
            expect_blowup: t.get("run", "expect_blowup", false, parse_bool)?,
            seed: t.get("run", "seed", 0, parse_num)?,
        };

        let d = Tolerances::default();
        let tolerances = Tolerances {
            stationarity: t.get("tolerances", "stationarity", d.stationarity, parse_num)?,
            consistency: t.get("tolerances", "consistency", d.consistency, parse_num)?,
            decay_rate: t.get("tolerances", "decay_rate", d.decay_rate, parse_num)?,
            envelope: t.get("tolerances", "envelope", d.envelope, parse_num)?,
            envelope_from: t.get("tolerances", "envelope_from", d.envelope_from, parse_num)?,
            monitor_factor: t.get("tolerances", "monitor_factor", d.monitor_factor, parse_num)?,
            exhaustion: t.get("tolerances", "exhaustion", d.exhaustion, parse_num)?,
            green_relative: t.get("tolerances", "green_relative", d.green_relative, parse_num)?,
            monotone: t.get("tolerances", "monotone", d.monotone, parse_num)?,
            ball_ratio: t.get("tolerances", "ball_ratio", d.ball_ratio, parse_num)?,
            max_rate: t.get("tolerances", "max_rate", d.max_rate, parse_num)?,
            slope_n4: t.get("tolerances", "slope_n4", d.slope_n4, parse_num)?,
            slope_n6: t.get("tolerances", "slope_n6", d.slope_n6, parse_num)?,
            curvature_factor: t.get("tolerances", "curvature_factor", d.curvature_factor, parse_num)?,
            poisson: t.get("tolerances", "poisson", d.poisson, parse_num)?,
            gauss_bonnet: t.get("tolerances", "gauss_bonnet", d.gauss_bonnet, parse_num)?,
        };

        let ds = SweepSpec::default();
        let sweep = SweepSpec {
            x0: t.get("sweep", "x0", ds.x0, parse_num)?,
            poles: t.get("sweep", "poles", ds.poles, parse_list)?,
            column: t.get("sweep", "column", ds.column, parse_num)?,
            extend: t.get("sweep", "extend", ds.extend, parse_num)?,
            profile_max_distance: t.get("sweep", "profile_max_distance", ds.profile_max_distance, parse_num)?,
        };

        let dc = CollarSpec::default();
        let collar = CollarSpec {
            orders: t.get("collar", "orders", dc.orders, parse_list)?,
            window: t.get("collar", "window", dc.window, parse_pair)?,
            excess_range: t.get("collar", "excess_range", dc.excess_range, parse_pair)?,
        };
        t.finish()?;

        let s = Scenario {
            name,
            kind,
            surface: Surface { spec, n_s, n_theta },
            perturbation,
            run,
            tolerances,
            sweep,
            collar,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Scenario::parse(&text, path.parent())
    }

    /// Rejects every field outside its admissible range.
    pub fn validate(&self) -> Result<(), LabError> {
        let fail = |msg: String| Err(LabError::Validation(msg));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return fail(format!("name {:?} must be non-empty and use only [A-Za-z0-9._-]", self.name));
        }
        for (key, n) in [("n_s", self.surface.n_s), ("n_theta", self.surface.n_theta)] {
            if !n.is_power_of_two() || !(MIN_GRID..=MAX_GRID).contains(&n) {
                return fail(format!("[surface] {key} = {n} must be a power of two in {MIN_GRID}..={MAX_GRID}"));
            }
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match &self.surface.spec {
            SurfaceSpec::Funnel { r_max, waist } => {
                if !positive(*r_max) || r_max > &40.0 {
                    return fail(format!("[surface] r_max = {r_max} must lie in (0, 40]"));
                }
                if let Some(w) = waist {
                    if !positive(*w) {
                        return fail(format!("[surface] waist = {w} must be positive"));
                    }
                }
            }
            SurfaceSpec::CuspFunnel { r_max } => {
                if !positive(*r_max) || r_max > &40.0 {
                    return fail(format!("[surface] r_max = {r_max} must lie in (0, 40]"));
                }
            }
            SurfaceSpec::FlatTorus { curvature, period_s, period_theta } => {
                if !curvature.is_finite() || !positive(*period_s) || !positive(*period_theta) {
                    return fail("[surface] flat_torus needs a finite curvature and positive periods".into());
                }
            }
            SurfaceSpec::Collar { background, order, modes, r_range } => {
                if !(1..=MAX_SERIES_ORDER).contains(order) {
                    return fail(format!("[surface] order = {order} must lie in 1..={MAX_SERIES_ORDER}"));
                }
                if !(1..=MAX_MODE_CAP).contains(modes) {
                    return fail(format!("[surface] modes = {modes} must lie in 1..={MAX_MODE_CAP}"));
                }
                if !(r_range.0 > 0.0 && r_range.1 > r_range.0 && r_range.1 <= 1.0) {
                    return fail(format!("[surface] r_range = {r_range:?} must satisfy 0 < r_min < r_max ≤ 1"));
                }
                match background {
                    Background::Radial(c) if c.is_empty() || !c.iter().all(|x| x.is_finite()) => {
                        return fail("[surface] radial background needs finite coefficients".into())
                    }
                    Background::Random { modes: m, amplitude } if m > modes || !amplitude.is_finite() => {
                        return fail(format!("[surface] random background uses {m} modes, the cap is {modes}"))
                    }
                    _ => {}
                }
                if self.kind != Kind::CollarOrder && !background.is_radial() {
                    return fail(format!(
                        "collar charts need a θ-independent background; {background} is only usable with kind = collar_order"
                    ));
                }
            }
            SurfaceSpec::Cusp { rho_range } => {
                if !(rho_range.0 > 0.0 && rho_range.1 > rho_range.0 && rho_range.1 < 1.0) {
                    return fail(format!("[surface] rho_range = {rho_range:?} must satisfy 0 < ρ₁ < ρ₂ < 1"));
                }
            }
            SurfaceSpec::Chart { path, phi } => {
                for p in std::iter::once(path).chain(phi) {
                    if !p.is_file() {
                        return fail(format!("[surface] chart file {} does not exist", p.display()));
                    }
                }
            }
        }

        let p = &self.perturbation;
        if !(p.amplitude.abs() <= MAX_AMPLITUDE) {
            return fail(format!("[perturbation] amplitude = {} must satisfy |ε| ≤ {MAX_AMPLITUDE}", p.amplitude));
        }
        if !positive(p.width) || !p.center.is_finite() {
            return fail("[perturbation] width must be positive and center finite".into());
        }

        let r = &self.run;
        if !(r.t_end > 0.0 && r.t_end <= MAX_HORIZON) {
            return fail(format!("[run] T = {} must lie in (0, {MAX_HORIZON}]", r.t_end));
        }
        if let Some(e) = r.snapshot_every {
            if !positive(e) {
                return fail(format!("[run] snapshot_every = {e} must be positive"));
            }
        }
        if !(r.cfl > 0.0 && r.cfl <= 1.0) {
            return fail(format!("[run] cfl = {} must lie in (0, 1]", r.cfl));
        }
        if let Some(dt) = r.dt {
            if !positive(dt) {
                return fail(format!("[run] dt = {dt} must be positive"));
            }
        }
        if r.stencil_steps == 0 || !positive(r.blowup_threshold) {
            return fail("[run] stencil_steps and blowup_threshold must be positive".into());
        }

        let tol = &self.tolerances;
        for (k, v) in [
            ("stationarity", tol.stationarity),
            ("consistency", tol.consistency),
            ("decay_rate", tol.decay_rate),
            ("envelope", tol.envelope),
            ("monitor_factor", tol.monitor_factor),
            ("exhaustion", tol.exhaustion),
            ("green_relative", tol.green_relative),
            ("monotone", tol.monotone),
            ("ball_ratio", tol.ball_ratio),
            ("max_rate", tol.max_rate),
            ("slope_n4", tol.slope_n4),
            ("slope_n6", tol.slope_n6),
            ("curvature_factor", tol.curvature_factor),
            ("poisson", tol.poisson),
            ("gauss_bonnet", tol.gauss_bonnet),
        ] {
            if !positive(v) {
                return fail(format!("[tolerances] {k} = {v} must be positive"));
            }
        }
        if tol.envelope_from < 0.0 || (self.kind == Kind::Potential && tol.envelope_from >= r.t_end) {
            return fail(format!("[tolerances] envelope_from = {} must lie in [0, T)", tol.envelope_from));
        }

        let closed = matches!(self.surface.spec, SurfaceSpec::FlatTorus { .. });
        match self.kind {
            Kind::Potential if closed => {
                return fail("kind = potential needs a surface with boundary".into());
            }
            Kind::Flow | Kind::Potential if p.amplitude != 0.0 && closed => {
                return fail("bump perturbations are placed along a bounded s range".into());
            }
            Kind::GreenSweep => {
                if !matches!(self.surface.spec, SurfaceSpec::Funnel { .. } | SurfaceSpec::CuspFunnel { .. }) {
                    return fail("kind = green_sweep needs a funnel or cusp_funnel surface".into());
                }
                let s = &self.sweep;
                if s.poles.len() < 2 || !s.poles.iter().chain([&s.x0]).all(|x| x.is_finite()) {
                    return fail("[sweep] needs at least two finite pole radii and a finite x0".into());
                }
                if !(s.extend >= 1.0 && s.extend <= 4.0) {
                    return fail(format!("[sweep] extend = {} must lie in [1, 4]", s.extend));
                }
                if s.column >= self.surface.n_theta {
                    return fail(format!("[sweep] column = {} is outside the θ grid", s.column));
                }
                if !positive(s.profile_max_distance) {
                    return fail("[sweep] profile_max_distance must be positive".into());
                }
            }
            Kind::CollarOrder => {
                let SurfaceSpec::Collar { .. } = &self.surface.spec else {
                    return fail("kind = collar_order needs a collar surface".into());
                };
                let c = &self.collar;
                if c.orders.is_empty() || c.orders.iter().any(|n| !(1..=MAX_SERIES_ORDER).contains(n)) {
                    return fail(format!("[collar] orders must be non-empty and within 1..={MAX_SERIES_ORDER}"));
                }
                if c.orders.windows(2).any(|w| w[0] >= w[1]) {
                    return fail("[collar] orders must be strictly increasing".into());
                }
                for (k, (a, b)) in [("window", c.window), ("excess_range", c.excess_range)] {
                    if !(a > 0.0 && b > a && b <= 1.0) {
                        return fail(format!("[collar] {k} = ({a}, {b}) must satisfy 0 < lo < hi ≤ 1"));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Full canonical text, every field spelled out.
    pub fn to_config_string(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        kv("name", self.name.clone());
        kv("kind", self.kind.as_str().into());
        let mut sections = String::new();
        let mut section = |title: &str, pairs: Vec<(&str, String)>| {
            let _ = writeln!(sections, "\n[{title}]");
            for (k, v) in pairs {
                let _ = writeln!(sections, "{k} = {v}");
            }
        };
        let sf = &self.surface;
        let mut pairs = vec![
            ("type", sf.spec.type_name().to_string()),
            ("n_s", sf.n_s.to_string()),
            ("n_theta", sf.n_theta.to_string()),
        ];
        match &sf.spec {
            SurfaceSpec::Funnel { r_max, waist } => {
                pairs.push(("r_max", r_max.to_string()));
                pairs.push(("waist", show_optional(waist)));
            }
            SurfaceSpec::CuspFunnel { r_max } => pairs.push(("r_max", r_max.to_string())),
            SurfaceSpec::FlatTorus { curvature, period_s, period_theta } => {
                pairs.push(("curvature", curvature.to_string()));
                pairs.push(("period_s", period_s.to_string()));
                pairs.push(("period_theta", period_theta.to_string()));
            }
            SurfaceSpec::Collar { background, order, modes, r_range } => {
                pairs.push(("background", background.to_string()));
                pairs.push(("order", order.to_string()));
                pairs.push(("modes", modes.to_string()));
                pairs.push(("r_range", format!("{}, {}", r_range.0, r_range.1)));
            }
            SurfaceSpec::Cusp { rho_range } => pairs.push(("rho_range", format!("{}, {}", rho_range.0, rho_range.1))),
            SurfaceSpec::Chart { path, phi } => {
                pairs.push(("path", path.display().to_string()));
                pairs.push(("phi", phi.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())));
            }
        }
        section("surface", pairs);
        let p = &self.perturbation;
        section(
            "perturbation",
            vec![
                ("amplitude", p.amplitude.to_string()),
                ("center", p.center.to_string()),
                ("width", p.width.to_string()),
            ],
        );
        let r = &self.run;
        section(
            "run",
            vec![
                ("T", r.t_end.to_string()),
                ("snapshot_every", show_optional(&r.snapshot_every)),
                ("cfl", r.cfl.to_string()),
                ("dt", show_optional(&r.dt)),
                ("stencil_steps", r.stencil_steps.to_string()),
                ("blowup_threshold", r.blowup_threshold.to_string()),
                ("expect_blowup", r.expect_blowup.to_string()),
                ("seed", r.seed.to_string()),
            ],
        );
        let t = &self.tolerances;
        section(
            "tolerances",
            vec![
                ("stationarity", t.stationarity.to_string()),
                ("consistency", t.consistency.to_string()),
                ("decay_rate", t.decay_rate.to_string()),
                ("envelope", t.envelope.to_string()),
                ("envelope_from", t.envelope_from.to_string()),
                ("monitor_factor", t.monitor_factor.to_string()),
                ("exhaustion", t.exhaustion.to_string()),
                ("green_relative", t.green_relative.to_string()),
                ("monotone", t.monotone.to_string()),
                ("ball_ratio", t.ball_ratio.to_string()),
                ("max_rate", t.max_rate.to_string()),
                ("slope_n4", t.slope_n4.to_string()),
                ("slope_n6", t.slope_n6.to_string()),
                ("curvature_factor", t.curvature_factor.to_string()),
                ("poisson", t.poisson.to_string()),
                ("gauss_bonnet", t.gauss_bonnet.to_string()),
            ],
        );
        let s = &self.sweep;
        section(
            "sweep",
            vec![
                ("x0", s.x0.to_string()),
                ("poles", join(&s.poles)),
                ("column", s.column.to_string()),
                ("extend", s.extend.to_string()),
                ("profile_max_distance", s.profile_max_distance.to_string()),
            ],
        );
        let c = &self.collar;
        section(
            "collar",
            vec![
                ("orders", join(&c.orders)),
                ("window", format!("{}, {}", c.window.0, c.window.1)),
                ("excess_range", format!("{}, {}", c.excess_range.0, c.excess_range.1)),
            ],
        );
        o + &sections
    }

    /// Applies `--grid` and `--seed` overrides and revalidates.
    pub fn with_overrides(mut self, grid: Option<usize>, seed: Option<u64>) -> Result<Self, LabError> {
        if let Some(n) = grid {
            self.surface.n_s = n;
        }
        if let Some(s) = seed {
            self.run.seed = s;
        }
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = demo\nkind = flow\n";

    fn parse(text: &str) -> Result<Scenario, LabError> {
        Scenario::parse(text, None)
    }

    #[test]
    fn defaults_round_trip() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.surface.n_s, 128);
        assert_eq!(s.tolerances.stationarity, 1e-5);
        let again = parse(&s.to_config_string()).unwrap();
        assert_eq!(s, again);
        assert_eq!(again.to_config_string(), s.to_config_string());
    }

    #[test]
    fn sections_comments_and_lists() {
        let s = parse(
            "# header\nname = sweep  # trailing\nkind = green_sweep\n[surface]\ntype = funnel\nr_max = 8\nn_s = 256\n\
             [sweep]\npoles = -1, 0,1\nextend = 1.5\n",
        )
        .unwrap();
        assert_eq!(s.sweep.poles, vec![-1.0, 0.0, 1.0]);
        assert_eq!(s.surface.spec, SurfaceSpec::Funnel { r_max: 8.0, waist: None });
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let cases = [
            "[surface]\nn_s = 100\n",
            "[surface]\nn_s = 2048\n",
            "[surface]\nn_theta = 16\n",
            "[run]\nT = 50.5\n",
            "[run]\nT = 0\n",
            "[perturbation]\namplitude = 1.5\n",
            "[perturbation]\namplitude = -1.01\n",
            "[surface]\nbogus = 1\n",
            "[nowhere]\n",
            "[run]\nT = 1\nT = 2\n",
            "[run]\nT = fast\n",
        ];
        for c in cases {
            let err = parse(&format!("{MINIMAL}{c}")).unwrap_err();
            assert!(matches!(err, LabError::Validation(_)), "{c}: {err}");
        }
        assert!(parse("kind = flow\n").is_err());
        assert!(parse("name = x\nkind = dance\n").is_err());
        assert!(parse(&format!("{MINIMAL}[surface]\nn_s = 1024\n[run]\nT = 50\n")).is_ok());
    }

    #[test]
    fn kind_surface_compatibility() {
        assert!(parse("name = a\nkind = potential\n[surface]\ntype = flat_torus\n").is_err());
        assert!(parse("name = a\nkind = green_sweep\n[surface]\ntype = cusp\n").is_err());
        assert!(parse("name = a\nkind = collar_order\n").is_err());
        assert!(parse("name = a\nkind = flow\n[surface]\ntype = collar\nbackground = random\n").is_err());
        let ok = parse("name = a\nkind = collar_order\n[surface]\ntype = collar\nbackground = random:1:0.5\n").unwrap();
        assert_eq!(
            ok.surface.spec,
            SurfaceSpec::Collar {
                background: Background::Random { modes: 1, amplitude: 0.5 },
                order: 6,
                modes: 8,
                r_range: (1e-2, 0.5)
            }
        );
    }

    #[test]
    fn backgrounds_parse_and_print() {
        for s in ["flat", "disc_exterior", "sine_squared", "radial:1, 1, 0, 0.5", "random:2:0.25"] {
            let b: Background = s.parse().unwrap();
            assert_eq!(b.to_string().parse::<Background>().unwrap(), b);
        }
        assert!("radial".parse::<Background>().is_err());
        assert!("hyperbolic".parse::<Background>().is_err());
    }

    #[test]
    fn overrides_revalidate() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.clone().with_overrides(Some(256), Some(9)).unwrap().surface.n_s, 256);
        assert!(s.with_overrides(Some(300), None).is_err());
    }

    #[test]
    fn relative_chart_paths_resolve_against_the_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("c.json"), "{}").unwrap();
        let s = Scenario::parse(
            "name = c\nkind = poisson_check\n[surface]\ntype = chart\npath = c.json\n",
            Some(dir.path()),
        )
        .unwrap();
        let SurfaceSpec::Chart { path, phi } = &s.surface.spec else { panic!() };
        assert!(path.is_absolute() && phi.is_none());
        assert!(Scenario::parse("name = c\nkind = flow\n[surface]\ntype = chart\npath = missing.json\n", None).is_err());
    }
}
