//! Sectioned plain-text run configuration.
//!
//! ```text
//! # comment
//! [grid]
//! r_max = 400
//! n_cells = 8000
//! [data]
//! amplitude = 0.01
//! phi0_re = gaussian width=1
//! ```
//!
//! Unknown sections or keys and repeated keys are errors. Every constraint
//! violation is reported, not only the first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ComplexProfile, FreeData, Profile};
use crate::error::{MkgError, Result};
use crate::evolution::Boundary;
use crate::field::{RadialGrid, Weights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub r_max: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Multiplies every profile.
    pub amplitude: f64,
    pub phi0_re: Profile,
    pub phi0_im: Profile,
    pub phi0_dot_re: Profile,
    pub phi0_dot_im: Profile,
    pub ar0: Profile,
    pub ar0_dot: Profile,
    /// Assumed power-law decay of the charge density beyond `r_max`.
    pub decay: f64,
    /// Admissible tail of the `a₀` solve relative to `max |a₀|`.
    pub tail_tol: f64,
}

impl DataConfig {
    pub fn free_data(&self) -> FreeData {
        let k = self.amplitude;
        FreeData {
            phi0: ComplexProfile {
                re: self.phi0_re.scaled(k),
                im: self.phi0_im.scaled(k),
            },
            phi0_dot: ComplexProfile {
                re: self.phi0_dot_re.scaled(k),
                im: self.phi0_dot_im.scaled(k),
            },
            ar0: self.ar0.scaled(k),
            ar0_dot: self.ar0_dot.scaled(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsConfig {
    pub s: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    pub monitor_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Rays for the `r A_L` limit.
    pub rays: Vec<f64>,
    /// Rays for the radiation field and its phase.
    pub phi_rays: Vec<f64>,
    /// Ray for the logarithmic growth of `r A_L̄`.
    pub lbar_ray: f64,
    /// Record a ray sample every this many steps.
    pub ray_stride: usize,
    pub r_min: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Spacing of the radiation `q` grid; 0 means `2h`.
    pub q_spacing: f64,
    /// Check times as fractions of `t_end`.
    pub check_fractions: Vec<f64>,
    /// Log fits use `r ∈ [r_last / fit_window, r_last]`.
    pub fit_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorConfig {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub lorenz_factor: f64,
    pub order_min: f64,
    pub charge_drift: f64,
    pub al_rel: f64,
    pub cauchy_ratio: f64,
    pub phase_rel: f64,
    pub lbar_corr: f64,
    pub interior_rel: f64,
    pub envelope_change: f64,
    pub free_wave_order: f64,
    pub free_wave_order_tol: f64,
    pub cross_module_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub checkpoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudiesConfig {
    /// Refinement studies (free wave, constraint and charge orders).
    pub refinement: bool,
    /// `r_max`, `n_cells` and `t_end` of the base refinement level relative
    /// to the main run.
    pub refinement_scale: f64,
    pub refinement_levels: usize,
    /// Repeat the run with `r_max`, `n_cells` and `t_end` doubled.
    pub doubled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub data: DataConfig,
    pub weights: WeightsConfig,
    pub scheme: SchemeConfig,
    pub extraction: ExtractionConfig,
    pub interior: InteriorConfig,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
    pub studies: StudiesConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = Profile::Gaussian { width: 1.0, scale: 1.0 };
        RunConfig {
            grid: GridConfig {
                r_max: 400.0,
                n_cells: 8000,
            },
            data: DataConfig {
                amplitude: 0.01,
                phi0_re: g.clone(),
                phi0_im: Profile::Zero,
                phi0_dot_re: Profile::Zero,
                phi0_dot_im: g,
                ar0: Profile::Zero,
                ar0_dot: Profile::Zero,
                decay: 6.0,
                tail_tol: 1e-8,
            },
            weights: WeightsConfig { s: 0.9, gamma: 0.4 },
            scheme: SchemeConfig {
                cfl: 0.5,
                t_end: 320.0,
                boundary: Boundary::None,
                monitor_stride: 40,
            },
            extraction: ExtractionConfig {
                rays: vec![-20.0, 0.0, 20.0],
                phi_rays: vec![-1.0, 0.0, 1.0],
                lbar_ray: -20.0,
                ray_stride: 4,
                r_min: 1.0,
                q_min: -25.0,
                q_max: 25.0,
                q_spacing: 0.0,
                check_fractions: vec![0.125, 0.25, 0.5, 1.0],
                fit_window: 10.0,
            },
            interior: InteriorConfig {
                y: vec![0.1, 0.3, 0.5],
                t: vec![100.0, 200.0, 300.0],
            },
            tolerances: Tolerances {
                lorenz_factor: 10.0,
                order_min: 1.8,
                charge_drift: 1e-3,
                al_rel: 0.05,
                cauchy_ratio: 0.2,
                phase_rel: 0.1,
                lbar_corr: 0.99,
                interior_rel: 0.1,
                envelope_change: 0.1,
                free_wave_order: 2.0,
                free_wave_order_tol: 0.2,
                cross_module_rel: 0.15,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                checkpoint: true,
            },
            studies: StudiesConfig {
                refinement: false,
                refinement_scale: 0.25,
                refinement_levels: 3,
                doubled: false,
            },
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grid.r_max, self.grid.n_cells)
    }

    pub fn weights(&self) -> Result<Weights> {
        Weights::new(self.weights.s, self.weights.gamma)
    }

    pub fn check_times(&self) -> Vec<f64> {
        self.extraction
            .check_fractions
            .iter()
            .map(|f| f * self.scheme.t_end)
            .collect()
    }

    /// Hex SHA-256 of the canonical JSON form; formatting and comments of
    /// the source text do not enter.
    /// sha256 of the canonical JSON form. The output directory is left out
    /// so that the same run in two places carries the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Every violated constraint, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let g = &self.grid;
        if !(g.r_max > 0.0 && g.r_max.is_finite()) {
            v.push(format!("grid.r_max = {} must be positive", g.r_max));
        }
        if g.n_cells < 16 {
            v.push(format!("grid.n_cells = {} must be at least 16", g.n_cells));
        }
        let d = &self.data;
        if !d.amplitude.is_finite() {
            v.push("data.amplitude must be finite".into());
        }
        if !(d.decay > 3.0) {
            v.push(format!("data.decay = {} must exceed 3 for a finite charge", d.decay));
        }
        if !(d.tail_tol > 0.0) {
            v.push(format!("data.tail_tol = {} must be positive", d.tail_tol));
        }
        if let Err(e) = self.weights() {
            v.push(format!("weights: {e}"));
        }
        let s = &self.scheme;
        if !(s.cfl > 0.0 && s.cfl <= 0.9) {
            v.push(format!("scheme.cfl = {} must lie in (0, 0.9]", s.cfl));
        }
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            v.push(format!("scheme.t_end = {} must be positive", s.t_end));
        }
        if s.boundary == Boundary::None && s.t_end > 0.9 * g.r_max {
            v.push(format!(
                "scheme.t_end = {} exceeds the causality shield 0.9 r_max = {} for boundary = none",
                s.t_end,
                0.9 * g.r_max
            ));
        }
        if s.monitor_stride == 0 {
            v.push("scheme.monitor_stride must be at least 1".into());
        }
        let e = &self.extraction;
        let reach = 0.95 * g.r_max;
        for &q in e.rays.iter().chain(&e.phi_rays).chain(std::iter::once(&e.lbar_ray)) {
            if s.t_end + q > reach {
                v.push(format!(
                    "ray q = {q} leaves the sampled domain: t_end + q = {} > 0.95 r_max = {reach}",
                    s.t_end + q
                ));
            }
        }
        if e.rays.is_empty() {
            v.push("extraction.rays must not be empty".into());
        }
        if e.phi_rays.is_empty() {
            v.push("extraction.phi_rays must not be empty".into());
        }
        if e.ray_stride == 0 {
            v.push("extraction.ray_stride must be at least 1".into());
        }
        if !(e.r_min > 0.0) {
            v.push(format!("extraction.r_min = {} must be positive", e.r_min));
        }
        if !(e.q_min < e.q_max) {
            v.push(format!("extraction.q_min = {} must be below q_max = {}", e.q_min, e.q_max));
        }
        if s.t_end + e.q_max > g.r_max {
            v.push(format!(
                "radiation grid reaches r = t_end + q_max = {} beyond r_max = {}",
                s.t_end + e.q_max,
                g.r_max
            ));
        }
        // the radiation table reads the last two check slices
        let k = e.check_fractions.len().saturating_sub(2);
        let t_prev = s.t_end * e.check_fractions.get(k).copied().unwrap_or(1.0);
        if t_prev + e.q_min < 0.0 {
            v.push(format!(
                "extraction.q_min = {} lies behind the origin at t = {t_prev}",
                e.q_min
            ));
        }
        if e.q_spacing < 0.0 {
            v.push(format!("extraction.q_spacing = {} must be nonnegative", e.q_spacing));
        }
        if e.check_fractions.len() < 3 {
            v.push("extraction.check_fractions needs at least three entries".into());
        }
        if !e.check_fractions.windows(2).all(|w| w[1] > w[0]) || e.check_fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            v.push("extraction.check_fractions must increase within (0, 1]".into());
        }
        if !(e.fit_window > 1.0) {
            v.push(format!("extraction.fit_window = {} must exceed 1", e.fit_window));
        }
        let i = &self.interior;
        for &y in &i.y {
            if !(y > 0.0 && y < 1.0) {
                v.push(format!("interior.y = {y} must lie in (0, 1)"));
            }
        }
        if !i.t.windows(2).all(|w| w[1] > w[0]) {
            v.push("interior.t must increase".into());
        }
        for &t in &i.t {
            if !(t > 0.0 && t <= s.t_end) {
                v.push(format!("interior.t = {t} must lie in (0, t_end]"));
            }
        }
        let tol = &self.tolerances;
        for (name, val) in [
            ("lorenz_factor", tol.lorenz_factor),
            ("order_min", tol.order_min),
            ("charge_drift", tol.charge_drift),
            ("al_rel", tol.al_rel),
            ("cauchy_ratio", tol.cauchy_ratio),
            ("phase_rel", tol.phase_rel),
            ("lbar_corr", tol.lbar_corr),
            ("interior_rel", tol.interior_rel),
            ("envelope_change", tol.envelope_change),
            ("free_wave_order", tol.free_wave_order),
            ("free_wave_order_tol", tol.free_wave_order_tol),
            ("cross_module_rel", tol.cross_module_rel),
        ] {
            if !(val > 0.0 && val.is_finite()) {
                v.push(format!("tolerances.{name} = {val} must be positive"));
            }
        }
        let st = &self.studies;
        if !(st.refinement_scale > 0.0 && st.refinement_scale <= 1.0) {
            v.push(format!(
                "studies.refinement_scale = {} must lie in (0, 1]",
                st.refinement_scale
            ));
        }
        if st.refinement_levels < 3 {
            v.push(format!(
                "studies.refinement_levels = {} must be at least 3",
                st.refinement_levels
            ));
        }
        if (g.n_cells as f64 * st.refinement_scale) < 16.0 {
            v.push("studies.refinement_scale leaves fewer than 16 cells".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(MkgError::Config(format!("invalid configuration:\n  {}", v.join("\n  "))))
        }
    }
}

fn perr(line: usize, msg: impl std::fmt::Display) -> MkgError {
    MkgError::Config(format!("line {line}: {msg}"))
}

struct Entry {
    line: usize,
    value: String,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

fn tokenize(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    let mut seen_sections: BTreeMap<String, usize> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = match raw.find(['#', ';']) {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| perr(line, "section header lacks ']'"))?
                .trim()
                .to_string();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(perr(line, format!("unknown section [{name}]")));
            }
            if let Some(prev) = seen_sections.insert(name.clone(), line) {
                return Err(perr(line, format!("section [{name}] repeated (first at line {prev})")));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| perr(line, format!("expected 'key = value', got {body:?}")))?;
        let key = key.trim().to_string();
        let sec = current.clone().ok_or_else(|| perr(line, "key outside of any section"))?;
        let allowed = SCHEMA.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key.as_str()) {
            return Err(perr(
                line,
                format!("unknown key '{key}' in [{sec}]; allowed: {}", allowed.join(", ")),
            ));
        }
        let map = sections.entry(sec.clone()).or_default();
        if let Some(prev) = map.get(&key) {
            return Err(perr(
                line,
                format!("duplicate key '{key}' in [{sec}] (first at line {})", prev.line),
            ));
        }
        map.insert(
            key,
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    Ok(sections)
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("grid", &["r_max", "n_cells"]),
    (
        "data",
        &[
            "amplitude",
            "phi0_re",
            "phi0_im",
            "phi0_dot_re",
            "phi0_dot_im",
            "ar0",
            "ar0_dot",
            "decay",
            "tail_tol",
        ],
    ),
    ("weights", &["s", "gamma"]),
    ("scheme", &["cfl", "t_end", "boundary", "monitor_stride"]),
    (
        "extraction",
        &[
            "rays",
            "phi_rays",
            "lbar_ray",
            "ray_stride",
            "r_min",
            "q_min",
            "q_max",
            "q_spacing",
            "check_fractions",
            "fit_window",
        ],
    ),
    ("interior", &["y", "t"]),
    (
        "tolerances",
        &[
            "lorenz_factor",
            "order_min",
            "charge_drift",
            "al_rel",
            "cauchy_ratio",
            "phase_rel",
            "lbar_corr",
            "interior_rel",
            "envelope_change",
            "free_wave_order",
            "free_wave_order_tol",
            "cross_module_rel",
        ],
    ),
    ("output", &["dir", "checkpoint"]),
    ("studies", &["refinement", "refinement_scale", "refinement_levels", "doubled"]),
    ("seed", &["value"]),
];

fn num(e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .map_err(|_| perr(e.line, format!("expected a number, got {:?}", e.value)))
}

fn uint(e: &Entry) -> Result<usize> {
    e.value
        .parse::<usize>()
        .map_err(|_| perr(e.line, format!("expected a nonnegative integer, got {:?}", e.value)))
}

fn boolean(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        v => Err(perr(e.line, format!("expected true or false, got {v:?}"))),
    }
}

fn list(e: &Entry) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| perr(e.line, format!("bad list entry {s:?}"))))
        .collect()
}

/// `zero`, `gaussian width=.. scale=..`, `bump radius=.. scale=..`,
/// `polygaussian power=.. width=.. scale=..`, `table path=.. scale=..`.
fn profile(e: &Entry, base: Option<&Path>) -> Result<Profile> {
    let mut words = e.value.split_whitespace();
    let kind = words.next().ok_or_else(|| perr(e.line, "empty profile"))?;
    let mut params: BTreeMap<&str, &str> = BTreeMap::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| perr(e.line, format!("profile parameter {w:?} is not key=value")))?;
        if params.insert(k, v).is_some() {
            return Err(perr(e.line, format!("profile parameter '{k}' repeated")));
        }
    }
    let allowed: &[&str] = match kind {
        "zero" => &[],
        "gaussian" => &["width", "scale"],
        "bump" => &["radius", "scale"],
        "polygaussian" => &["power", "width", "scale"],
        "table" => &["path", "scale"],
        other => {
            return Err(perr(
                e.line,
                format!("unknown profile family '{other}' (zero, gaussian, bump, polygaussian, table)"),
            ))
        }
    };
    for k in params.keys() {
        if !allowed.contains(k) {
            return Err(perr(e.line, format!("unknown parameter '{k}' for profile '{kind}'")));
        }
    }
    let get = |k: &str, default: f64| -> Result<f64> {
        match params.get(k) {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| perr(e.line, format!("bad value for '{k}': {v:?}"))),
            None => Ok(default),
        }
    };
    let scale = get("scale", 1.0)?;
    let positive = |k: &str, v: f64| -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(perr(e.line, format!("profile parameter '{k}' must be positive, got {v}")))
        }
    };
    Ok(match kind {
        "zero" => Profile::Zero,
        "gaussian" => Profile::Gaussian {
            width: positive("width", get("width", 1.0)?)?,
            scale,
        },
        "bump" => Profile::Bump {
            radius: positive("radius", get("radius", 1.0)?)?,
            scale,
        },
        "polygaussian" => {
            let p = get("power", 2.0)?;
            if p < 0.0 || p.fract() != 0.0 || p % 2.0 != 0.0 {
                return Err(perr(e.line, format!("polygaussian power must be an even integer, got {p}")));
            }
            Profile::PolyGaussian {
                power: p as u32,
                width: positive("width", get("width", 1.0)?)?,
                scale,
            }
        }
        _ => {
            let p = params
                .get("path")
                .ok_or_else(|| perr(e.line, "table profile needs path=..."))?;
            let mut path = PathBuf::from(p);
            if path.is_relative() {
                if let Some(b) = base {
                    path = b.join(path);
                }
            }
            Profile::from_file(&path, scale).map_err(|err| perr(e.line, err))?
        }
    })
}

/// Parses and validates a configuration; relative table paths resolve
/// against `base`.
pub fn parse_config_with_base(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let c = parse_unvalidated(text, base)?;
    c.validate()?;
    Ok(c)
}

/// Syntax and key checks only; constraints are left to the caller.
pub fn parse_unvalidated(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let sections = tokenize(text)?;
    let mut c = RunConfig::default();
    let get = |sec: &str, key: &str| sections.get(sec).and_then(|m| m.get(key));
    macro_rules! set {
        ($sec:literal, $key:literal, $conv:expr, $slot:expr) => {
            if let Some(e) = get($sec, $key) {
                $slot = $conv(e)?;
            }
        };
    }
    set!("grid", "r_max", num, c.grid.r_max);
    set!("grid", "n_cells", uint, c.grid.n_cells);
    set!("data", "amplitude", num, c.data.amplitude);
    set!("data", "phi0_re", |e| profile(e, base), c.data.phi0_re);
    set!("data", "phi0_im", |e| profile(e, base), c.data.phi0_im);
    set!("data", "phi0_dot_re", |e| profile(e, base), c.data.phi0_dot_re);
    set!("data", "phi0_dot_im", |e| profile(e, base), c.data.phi0_dot_im);
    set!("data", "ar0", |e| profile(e, base), c.data.ar0);
    set!("data", "ar0_dot", |e| profile(e, base), c.data.ar0_dot);
    set!("data", "decay", num, c.data.decay);
    set!("data", "tail_tol", num, c.data.tail_tol);
    set!("weights", "s", num, c.weights.s);
    set!("weights", "gamma", num, c.weights.gamma);
    set!("scheme", "cfl", num, c.scheme.cfl);
    set!("scheme", "t_end", num, c.scheme.t_end);
    set!(
        "scheme",
        "boundary",
        |e: &Entry| e.value.parse::<Boundary>().map_err(|err| perr(e.line, err)),
        c.scheme.boundary
    );
    set!("scheme", "monitor_stride", uint, c.scheme.monitor_stride);
    set!("extraction", "rays", list, c.extraction.rays);
    set!("extraction", "phi_rays", list, c.extraction.phi_rays);
    set!("extraction", "lbar_ray", num, c.extraction.lbar_ray);
    set!("extraction", "ray_stride", uint, c.extraction.ray_stride);
    set!("extraction", "r_min", num, c.extraction.r_min);
    set!("extraction", "q_min", num, c.extraction.q_min);
    set!("extraction", "q_max", num, c.extraction.q_max);
    set!("extraction", "q_spacing", num, c.extraction.q_spacing);
    set!("extraction", "check_fractions", list, c.extraction.check_fractions);
    set!("extraction", "fit_window", num, c.extraction.fit_window);
    set!("interior", "y", list, c.interior.y);
    set!("interior", "t", list, c.interior.t);
    set!("tolerances", "lorenz_factor", num, c.tolerances.lorenz_factor);
    set!("tolerances", "order_min", num, c.tolerances.order_min);
    set!("tolerances", "charge_drift", num, c.tolerances.charge_drift);
    set!("tolerances", "al_rel", num, c.tolerances.al_rel);
    set!("tolerances", "cauchy_ratio", num, c.tolerances.cauchy_ratio);
    set!("tolerances", "phase_rel", num, c.tolerances.phase_rel);
    set!("tolerances", "lbar_corr", num, c.tolerances.lbar_corr);
    set!("tolerances", "interior_rel", num, c.tolerances.interior_rel);
    set!("tolerances", "envelope_change", num, c.tolerances.envelope_change);
    set!("tolerances", "free_wave_order", num, c.tolerances.free_wave_order);
    set!("tolerances", "free_wave_order_tol", num, c.tolerances.free_wave_order_tol);
    set!("tolerances", "cross_module_rel", num, c.tolerances.cross_module_rel);
    set!(
        "output",
        "dir",
        |e: &Entry| Ok::<_, MkgError>(PathBuf::from(&e.value)),
        c.output.dir
    );
    set!("output", "checkpoint", boolean, c.output.checkpoint);
    set!("studies", "refinement", boolean, c.studies.refinement);
    set!("studies", "refinement_scale", num, c.studies.refinement_scale);
    set!("studies", "refinement_levels", uint, c.studies.refinement_levels);
    set!("studies", "doubled", boolean, c.studies.doubled);
    if let Some(e) = get("seed", "value") {
        c.seed = e
            .value
            .parse::<u64>()
            .map_err(|_| perr(e.line, format!("seed must be a nonnegative integer, got {:?}", e.value)))?;
    }
    if c.output.dir.is_relative() {
        if let Some(b) = base {
            c.output.dir = b.join(&c.output.dir);
        }
    }
    Ok(c)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with_base(text, None)
}

/// Reads a configuration file; relative paths in it resolve against its
/// directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let c = load_unvalidated(path)?;
    c.validate()?;
    Ok(c)
}

pub fn load_unvalidated(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| MkgError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_unvalidated(&text, path.parent())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn s_out_of_range() {
        let e = parse_config("[weights]\ns = 1.2\n").unwrap_err().to_string();
        assert!(e.contains("1/2 < s < 1"), "{e}");
    }

    #[test]
    fn duplicate_key_named_with_line() {
        let e = parse_config("[grid]\nr_max = 100\n\nr_max = 200\n").unwrap_err().to_string();
        assert!(e.contains("line 4") && e.contains("r_max"), "{e}");
    }

    #[test]
    fn unknown_key_and_section() {
        assert!(parse_config("[grid]\nrmax = 1\n").unwrap_err().to_string().contains("line 2"));
        assert!(parse_config("[gird]\n").unwrap_err().to_string().contains("unknown section"));
    }

    #[test]
    fn all_violations_listed() {
        let e = parse_config("[scheme]\ncfl = 1.5\nt_end = 1000\n[weights]\ngamma = 2\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("cfl") && e.contains("causality") && e.contains("gamma"), "{e}");
    }

    #[test]
    fn profiles_parse() {
        let c = parse_config("[data]\nphi0_re = bump radius=2 scale=3 # c\nphi0_dot_im = zero\n").unwrap();
        assert_eq!(c.data.phi0_re, Profile::Bump { radius: 2.0, scale: 3.0 });
        assert_eq!(c.data.phi0_dot_im, Profile::Zero);
        assert!(parse_config("[data]\nphi0_re = gaussian wdth=1\n").is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = parse_config("[grid]\nr_max = 400\n").unwrap();
        let b = parse_config("# x\n[grid]\n  r_max=400.0   \n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse_config("[grid]\nr_max = 401\n").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
