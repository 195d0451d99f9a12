//! Scenario configuration: a sectioned `key = value` text format parsed line
//! by line so every diagnostic names its line, plus the built-in catalog.
//!
//! Grammar:
//!   - `[section]` opens a section; the known sections are `grid`,
//!     `velocity`, `surface`, `run`, `moc`, `grid_solver`, `nmm`, `checks`.
//!   - `key = value` assigns inside the current section. Vector values are
//!     space separated numbers with as many entries as active dimensions.
//!   - `#` starts a comment; blank lines are skipped.
//!
//! Keys by section (defaults in parentheses):
//!   - `[grid]` `origin`, `h`, `n`: node counts per axis; their number fixes
//!     the dimension, 2 or 3.
//!   - `[velocity]` `kind` one of `rotation` (`omega`), `translation` (`c`),
//!     `shear` (`sigma`), `vortex` (`period`), `expression` (`vx`, `vy`,
//!     `vz`, each in `t x y z`); optional `taper`, a boundary band width
//!     over which the field is blended to zero.
//!   - `[surface]` `kind` one of `circle`/`sphere` (`center`, `radius`),
//!     `ellipse` (`center`, `radii`), `expression` (`value` in `x y z`);
//!     `profile` (`sdf`) one of `sdf`, `scaled_sdf` (with `factor`),
//!     `custom`. `sdf` and `scaled_sdf` assert the data is a signed
//!     distance, possibly scaled, which holds for circles and spheres and is
//!     taken on faith for expressions; ellipses must use `custom`.
//!   - `[run]` `horizon`, `solvers` (any of `moc grid linear_transport nmm
//!     nmm_beta reinit`), `record` (extra output times, defaults to half the
//!     horizon), `seed` (7), `out` (`out`).
//!   - `[moc]` `dt` (`auto` = horizon/500), `record_every` (10), `band`
//!     (10): tube half width in multiples of the seed spacing.
//!   - `[grid_solver]` `cfl` (0.5), `r_star` (`auto`), `clamp` (`auto` =
//!     a quarter of the expected gradient magnitude; `none` disables).
//!   - `[nmm]` `beta` (1.0), `reinit_s` (`auto` = 8h).
//!   - `[checks]` `grad_dev` (1e-6), `interface` (`auto` = 2h), `sandwich`
//!     (`auto` = 2h times the expected gradient magnitude).

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use levext_core::interface::extract_interface;
use levext_core::{AnalyticSurface, FieldKind, FieldSpec, Grid, LevelSetData, ScalarField, Vec3};

const SECTIONS: [&str; 8] =
    ["grid", "velocity", "surface", "run", "moc", "grid_solver", "nmm", "checks"];

/// Built-in scenarios: `(name, summary, config text)`.
pub const CATALOG: [(&str, &str, &str); 4] = [
    ("rotation", "rigid rotation of an off-center circle", ROTATION),
    ("translation", "uniform drift of a circle", TRANSLATION),
    ("shear", "simple shear stretching a centered circle", SHEAR),
    ("vortex", "single vortex over a quarter period", VORTEX),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    CATALOG.iter().find(|(n, _, _)| *n == name).map(|(_, _, text)| *text)
}

const ROTATION: &str = "\
[grid]
origin = -2 -2
h = 0.03125
n = 129 129

[velocity]
kind = rotation
omega = 1.0
taper = 0.5

[surface]
kind = circle
center = 0.5 0
radius = 0.6

[run]
horizon = 0.5
solvers = moc grid linear_transport
record = 0.25
out = out/rotation
";

const TRANSLATION: &str = "\
[grid]
origin = -1.5 -1.5
h = 0.03125
n = 97 97

[velocity]
kind = translation
c = 0.4 0.2
taper = 0.3

[surface]
kind = circle
center = -0.3 -0.2
radius = 0.5

[run]
horizon = 0.5
solvers = moc grid linear_transport
record = 0.25
out = out/translation
";

const SHEAR: &str = "\
[grid]
origin = -1.5 -1.5
h = 0.03125
n = 97 97

[velocity]
kind = shear
sigma = 1.0
taper = 0.3

[surface]
kind = circle
center = 0 0
radius = 0.5

[run]
horizon = 0.5
solvers = moc grid linear_transport nmm
record = 0.25
out = out/shear
";

const VORTEX: &str = "\
[grid]
origin = 0 0
h = 0.015625
n = 65 65

[velocity]
kind = vortex
period = 1.0

[surface]
kind = circle
center = 0.5 0.75
radius = 0.15

[run]
horizon = 0.25
solvers = moc grid
record = 0.125
out = out/vortex

[moc]
band = 6
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Moc,
    Grid,
    LinearTransport,
    Nmm,
    NmmBeta,
    Reinit,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Moc => "moc",
            Solver::Grid => "grid",
            Solver::LinearTransport => "linear_transport",
            Solver::Nmm => "nmm",
            Solver::NmmBeta => "nmm_beta",
            Solver::Reinit => "reinit",
        }
    }

    fn parse(word: &str) -> Option<Self> {
        Some(match word {
            "moc" => Solver::Moc,
            "grid" => Solver::Grid,
            "linear_transport" => Solver::LinearTransport,
            "nmm" => Solver::Nmm,
            "nmm_beta" => Solver::NmmBeta,
            "reinit" => Solver::Reinit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Profile {
    Sdf,
    ScaledSdf(f64),
    Custom,
}

#[derive(Debug, Clone, Copy)]
pub enum Setting {
    Auto,
    At(f64),
}

impl Setting {
    pub fn or(self, auto: f64) -> f64 {
        match self {
            Setting::Auto => auto,
            Setting::At(v) => v,
        }
    }
}

#[derive(Debug)]
pub struct MocConfig {
    pub dt: f64,
    pub record_every: usize,
    pub band: usize,
}

#[derive(Debug)]
pub struct GridSolverConfig {
    pub cfl: f64,
    pub r_star: Setting,
    /// `None` disables clamping entirely.
    pub clamp: Option<Setting>,
}

#[derive(Debug)]
pub struct CheckTols {
    pub grad_dev: f64,
    pub interface: Setting,
    pub sandwich: Setting,
}

pub struct ScenarioConfig {
    pub grid: Grid,
    pub field: FieldSpec,
    pub surface: AnalyticSurface,
    pub profile: Profile,
    pub horizon: f64,
    pub solvers: Vec<Solver>,
    pub record: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub moc: MocConfig,
    pub gsolve: GridSolverConfig,
    pub beta: f64,
    pub reinit_s: Setting,
    pub checks: CheckTols,
    /// Expected gradient magnitude of the initial data: 1 for `sdf`, the
    /// factor for `scaled_sdf`, a sampled estimate for `custom`.
    pub maxgrad: f64,
    /// Whether `maxgrad` is exact (`sdf`, `scaled_sdf`) or estimated.
    pub maxgrad_exact: bool,
    /// Canonical `key = value` echo of the effective configuration.
    pub echo: String,
}

impl ScenarioConfig {
    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Initial data scale factor applied on top of the surface values.
    pub fn factor(&self) -> f64 {
        match self.profile {
            Profile::ScaledSdf(k) => k,
            _ => 1.0,
        }
    }
}

#[derive(Debug)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let line = match raw.find('#') {
            Some(cut) => &raw[..cut],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                bail!("line {no}: section header misses the closing bracket");
            };
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                bail!("line {no}: unknown section [{name}]");
            }
            section = Some(name.to_string());
            continue;
        }
        let Some(eq) = line.find('=') else {
            bail!("line {no}: expected 'key = value' or a [section] header");
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() {
            bail!("line {no}: empty key");
        }
        let Some(sec) = section.clone() else {
            bail!("line {no}: key '{key}' appears before any [section]");
        };
        let clash = entries
            .insert((sec.clone(), key.to_string()), Entry { line: no, value: value.to_string() });
        if clash.is_some() {
            bail!("line {no}: duplicate key '{sec}.{key}'");
        }
    }
    Ok(RawConfig { entries })
}

/// Apply a `section.key=value` override on top of a parsed configuration.
pub fn apply_override(raw: &mut RawConfig, spec: &str) -> Result<()> {
    let Some((lhs, value)) = spec.split_once('=') else {
        bail!("override '{spec}': expected section.key=value");
    };
    let Some((sec, key)) = lhs.trim().split_once('.') else {
        bail!("override '{spec}': expected section.key=value");
    };
    let (sec, key) = (sec.trim(), key.trim());
    if !SECTIONS.contains(&sec) {
        bail!("override '{spec}': unknown section '{sec}'");
    }
    if key.is_empty() {
        bail!("override '{spec}': empty key");
    }
    raw.entries.insert(
        (sec.to_string(), key.to_string()),
        Entry { line: 0, value: value.trim().to_string() },
    );
    Ok(())
}

/// Typed accessors over the raw entries; every read marks its key as used so
/// leftovers can be reported as unknown keys.
struct Reader<'a> {
    raw: &'a RawConfig,
    used: BTreeSet<(String, String)>,
}

impl<'a> Reader<'a> {
    fn get(&mut self, sec: &str, key: &str) -> Option<(usize, &'a str)> {
        let id = (sec.to_string(), key.to_string());
        let entry = self.raw.entries.get(&id)?;
        self.used.insert(id);
        Some((entry.line, entry.value.as_str()))
    }

    fn require(&mut self, sec: &str, key: &str) -> Result<(usize, &'a str)> {
        self.get(sec, key).ok_or_else(|| anyhow!("missing required key '{sec}.{key}'"))
    }

    fn f64_req(&mut self, sec: &str, key: &str) -> Result<f64> {
        let (line, value) = self.require(sec, key)?;
        parse_f64(value).map_err(|e| anyhow!("line {line}: {sec}.{key}: {e}"))
    }

    fn f64_opt(&mut self, sec: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some((line, value)) => {
                parse_f64(value).map_err(|e| anyhow!("line {line}: {sec}.{key}: {e}"))
            }
        }
    }

    fn usize_opt(&mut self, sec: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(sec, key) {
            None => Ok(default),
            Some((line, value)) => value
                .parse::<usize>()
                .map_err(|_| anyhow!("line {line}: {sec}.{key}: expected a nonnegative integer")),
        }
    }

    fn u64_opt(&mut self, sec: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some((line, value)) => value
                .parse::<u64>()
                .map_err(|_| anyhow!("line {line}: {sec}.{key}: expected a nonnegative integer")),
        }
    }

    fn numbers_req(&mut self, sec: &str, key: &str) -> Result<(usize, Vec<f64>)> {
        let (line, value) = self.require(sec, key)?;
        let nums = value
            .split_whitespace()
            .map(parse_f64)
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| anyhow!("line {line}: {sec}.{key}: {e}"))?;
        Ok((line, nums))
    }

    fn numbers_opt(&mut self, sec: &str, key: &str) -> Result<Option<(usize, Vec<f64>)>> {
        match self.get(sec, key) {
            None => Ok(None),
            Some((line, value)) => {
                let nums = value
                    .split_whitespace()
                    .map(parse_f64)
                    .collect::<std::result::Result<Vec<f64>, _>>()
                    .map_err(|e| anyhow!("line {line}: {sec}.{key}: {e}"))?;
                Ok(Some((line, nums)))
            }
        }
    }

    fn setting_opt(&mut self, sec: &str, key: &str) -> Result<Setting> {
        match self.get(sec, key) {
            None => Ok(Setting::Auto),
            Some((_, "auto")) => Ok(Setting::Auto),
            Some((line, value)) => parse_f64(value)
                .map(Setting::At)
                .map_err(|e| anyhow!("line {line}: {sec}.{key}: {e}")),
        }
    }
}

fn parse_f64(word: &str) -> std::result::Result<f64, String> {
    word.parse::<f64>().map_err(|_| format!("'{word}' is not a number"))
}

fn vec3_from(dim: usize, nums: &[f64], line: usize, what: &str) -> Result<Vec3> {
    if nums.len() != dim {
        bail!("line {line}: {what}: expected {dim} numbers, got {}", nums.len());
    }
    let mut v = Vec3::zeros();
    for (ax, value) in nums.iter().enumerate() {
        v[ax] = *value;
    }
    Ok(v)
}

/// Build, type check, and validate a configuration. The geometric margin
/// invariant samples the initial surface on the grid, so a returned config
/// is known to have a nonempty interface well inside the domain.
pub fn parse_config(raw: &RawConfig) -> Result<ScenarioConfig> {
    let mut r = Reader { raw, used: BTreeSet::new() };

    // [grid]
    let (n_line, n_nums) = r.numbers_req("grid", "n")?;
    let dim = n_nums.len();
    if dim != 2 && dim != 3 {
        bail!("line {n_line}: grid.n: expected 2 or 3 node counts, got {dim}");
    }
    let mut n = [1usize; 3];
    for (ax, value) in n_nums.iter().enumerate() {
        if *value < 2.0 || value.fract() != 0.0 {
            bail!("line {n_line}: grid.n: node counts must be integers of at least 2");
        }
        n[ax] = *value as usize;
    }
    let h = r.f64_req("grid", "h")?;
    let (o_line, o_nums) = r.numbers_req("grid", "origin")?;
    let origin = vec3_from(dim, &o_nums, o_line, "grid.origin")?;
    let grid = if dim == 2 {
        Grid::new_2d([origin.x, origin.y], h, n[0], n[1])
    } else {
        Grid::new_3d([origin.x, origin.y, origin.z], h, n)
    }
    .map_err(|e| anyhow!("grid: {e}"))?;

    // [velocity]
    let (k_line, kind_word) = r.require("velocity", "kind")?;
    let kind = match kind_word {
        "rotation" => FieldKind::RigidRotation { omega: r.f64_req("velocity", "omega")? },
        "translation" => {
            let (c_line, c_nums) = r.numbers_req("velocity", "c")?;
            let c = vec3_from(dim, &c_nums, c_line, "velocity.c")?;
            FieldKind::Translation { c: [c.x, c.y, c.z] }
        }
        "shear" => FieldKind::Shear { sigma: r.f64_req("velocity", "sigma")? },
        "vortex" => FieldKind::SingleVortex { period: r.f64_req("velocity", "period")? },
        "expression" => {
            let vx = r.require("velocity", "vx")?.1.to_string();
            let vy = r.require("velocity", "vy")?.1.to_string();
            let vz = match r.get("velocity", "vz") {
                Some((_, value)) => value.to_string(),
                None => "0".to_string(),
            };
            FieldKind::Expression { vx, vy, vz }
        }
        other => bail!("line {k_line}: velocity.kind: unknown kind '{other}'"),
    };
    let taper = match r.get("velocity", "taper") {
        None => None,
        Some((line, value)) => {
            let width =
                parse_f64(value).map_err(|e| anyhow!("line {line}: velocity.taper: {e}"))?;
            if !(width > 0.0) {
                bail!("line {line}: velocity.taper: the band width must be positive");
            }
            Some(width)
        }
    };
    let field = FieldSpec { kind, taper_margin: taper };

    // [surface]
    let (s_line, surf_word) = r.require("surface", "kind")?;
    let surface = match surf_word {
        "circle" | "sphere" => {
            let (c_line, c_nums) = r.numbers_req("surface", "center")?;
            let center = vec3_from(dim, &c_nums, c_line, "surface.center")?;
            let radius = r.f64_req("surface", "radius")?;
            if !(radius > 0.0) {
                bail!("surface.radius: the radius must be positive");
            }
            AnalyticSurface::Sphere { center, radius }
        }
        "ellipse" => {
            let (c_line, c_nums) = r.numbers_req("surface", "center")?;
            let center = vec3_from(dim, &c_nums, c_line, "surface.center")?;
            let (radii_line, radii_nums) = r.numbers_req("surface", "radii")?;
            if radii_nums.len() != dim {
                bail!("line {radii_line}: surface.radii: expected {dim} numbers");
            }
            let mut radii = [0.0; 3];
            for (ax, value) in radii_nums.iter().enumerate() {
                if !(*value > 0.0) {
                    bail!("line {radii_line}: surface.radii: radii must be positive");
                }
                radii[ax] = *value;
            }
            AnalyticSurface::Ellipse { center, radii }
        }
        "expression" => {
            let (v_line, src) = r.require("surface", "value")?;
            AnalyticSurface::expression(src)
                .map_err(|e| anyhow!("line {v_line}: surface.value: {e}"))?
        }
        other => bail!("line {s_line}: surface.kind: unknown kind '{other}'"),
    };
    let profile = match r.get("surface", "profile") {
        None => Profile::Sdf,
        Some((_, "sdf")) => Profile::Sdf,
        Some((line, "scaled_sdf")) => {
            let factor = r.f64_req("surface", "factor")?;
            if !(factor > 0.0) {
                bail!("line {line}: surface.factor: the factor must be positive");
            }
            Profile::ScaledSdf(factor)
        }
        Some((_, "custom")) => Profile::Custom,
        Some((line, other)) => {
            bail!("line {line}: surface.profile: unknown profile '{other}'")
        }
    };
    if matches!(surface, AnalyticSurface::Ellipse { .. }) && !matches!(profile, Profile::Custom) {
        bail!("surface.profile: ellipse data is not a signed distance; use profile = custom");
    }

    // [run]
    let horizon = r.f64_req("run", "horizon")?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        bail!("run.horizon: the horizon must satisfy horizon > 0");
    }
    let (sol_line, sol_words) = r.require("run", "solvers")?;
    let mut solvers = Vec::new();
    for word in sol_words.split_whitespace() {
        let Some(solver) = Solver::parse(word) else {
            bail!("line {sol_line}: run.solvers: unknown solver '{word}'");
        };
        if solvers.contains(&solver) {
            bail!("line {sol_line}: run.solvers: solver '{word}' listed twice");
        }
        solvers.push(solver);
    }
    if solvers.is_empty() {
        bail!("line {sol_line}: run.solvers: need at least one solver");
    }
    let record = match r.numbers_opt("run", "record")? {
        None => vec![0.5 * horizon],
        Some((line, times)) => {
            for t in &times {
                if !(*t > 0.0 && *t < horizon) {
                    bail!(
                        "line {line}: run.record: output times must lie strictly \
                         between 0 and the horizon"
                    );
                }
            }
            times
        }
    };
    let seed = r.u64_opt("run", "seed", 7)?;
    let out = PathBuf::from(r.get("run", "out").map(|(_, v)| v).unwrap_or("out"));

    // [moc]
    let moc_dt = match r.setting_opt("moc", "dt")? {
        Setting::Auto => horizon / 500.0,
        Setting::At(dt) => {
            if !(dt > 0.0) {
                bail!("moc.dt: the step must be positive");
            }
            dt
        }
    };
    let record_every = r.usize_opt("moc", "record_every", 10)?.max(1);
    let band = r.usize_opt("moc", "band", 10)?.max(1);
    let moc = MocConfig { dt: moc_dt, record_every, band };

    // [grid_solver]
    let cfl = r.f64_opt("grid_solver", "cfl", 0.5)?;
    if !(cfl > 0.0 && cfl <= 1.0) {
        bail!("grid_solver.cfl: need 0 < cfl <= 1");
    }
    let r_star = r.setting_opt("grid_solver", "r_star")?;
    if let Setting::At(value) = r_star {
        if !(value > 0.0 && value < 1.0) {
            bail!("grid_solver.r_star: need 0 < r_star < 1");
        }
    }
    let clamp = match r.get("grid_solver", "clamp") {
        None => Some(Setting::Auto),
        Some((_, "auto")) => Some(Setting::Auto),
        Some((_, "none")) => None,
        Some((line, value)) => {
            let cap =
                parse_f64(value).map_err(|e| anyhow!("line {line}: grid_solver.clamp: {e}"))?;
            if !(cap > 0.0) {
                bail!("line {line}: grid_solver.clamp: the cap must be positive");
            }
            Some(Setting::At(cap))
        }
    };
    let gsolve = GridSolverConfig { cfl, r_star, clamp };

    // [nmm]
    let beta = r.f64_opt("nmm", "beta", 1.0)?;
    let reinit_s = r.setting_opt("nmm", "reinit_s")?;
    if let Setting::At(value) = reinit_s {
        if !(value > 0.0) {
            bail!("nmm.reinit_s: the pseudo time span must be positive");
        }
    }

    // [checks]
    let grad_dev = r.f64_opt("checks", "grad_dev", 1e-6)?;
    let interface = r.setting_opt("checks", "interface")?;
    let sandwich = r.setting_opt("checks", "sandwich")?;
    let checks = CheckTols { grad_dev, interface, sandwich };

    for (id, entry) in &raw.entries {
        if !r.used.contains(id) {
            bail!("line {}: unknown key '{}.{}'", entry.line, id.0, id.1);
        }
    }

    let mut cfg = ScenarioConfig {
        grid,
        field,
        surface,
        profile,
        horizon,
        solvers,
        record,
        seed,
        out,
        moc,
        gsolve,
        beta,
        reinit_s,
        checks,
        maxgrad: 1.0,
        maxgrad_exact: true,
        echo: echo_of(raw),
    };
    validate_geometry(&mut cfg)?;
    Ok(cfg)
}

/// Canonical echo: sections in declaration order, keys sorted within each.
/// The output location is left out so identical physics produces identical
/// manifests wherever the artifacts land.
fn echo_of(raw: &RawConfig) -> String {
    let mut out = String::new();
    for sec in SECTIONS {
        let in_sec: Vec<_> = raw
            .entries
            .iter()
            .filter(|((s, k), _)| s == sec && !(s == "run" && k == "out"))
            .collect();
        if in_sec.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("[{sec}]\n"));
        for ((_, key), entry) in in_sec {
            out.push_str(&format!("{key} = {}\n", entry.value));
        }
    }
    out
}

/// The initial surface must cross the domain interior and keep a margin of
/// at least five cells from the boundary, this is what lets the tube seed
/// whole normal segments and keeps tapered velocities exact on the tube.
/// Also resolves the expected gradient magnitude for `custom` profiles.
fn validate_geometry(cfg: &mut ScenarioConfig) -> Result<()> {
    let factor = cfg.factor();
    let phi0 = ScalarField::from_fn(cfg.grid.clone(), 0.0, |x| cfg.surface.value(&x) * factor);
    let mesh = extract_interface(&phi0)
        .map_err(|_| anyhow!("surface: the initial surface does not cross the domain interior"))?;
    let bounds = cfg.grid.bounds();
    let margin = 5.0 * cfg.grid.h;
    let mut worst = f64::INFINITY;
    for pt in &mesh.points {
        for ax in 0..cfg.dim() {
            worst = worst.min((pt[ax] - bounds.min[ax]).min(bounds.max[ax] - pt[ax]));
        }
    }
    if worst < margin {
        bail!(
            "surface: the initial surface must keep a margin of at least 5h = {margin:.4} \
             from the boundary; its closest point sits at distance {worst:.4}"
        );
    }
    match cfg.profile {
        Profile::Sdf => {
            cfg.maxgrad = 1.0;
            cfg.maxgrad_exact = true;
        }
        Profile::ScaledSdf(k) => {
            cfg.maxgrad = k;
            cfg.maxgrad_exact = true;
        }
        Profile::Custom => {
            // estimate from central differences over the interior nodes
            let g = &phi0.grid;
            let mut est = 0.0f64;
            let k_range = if cfg.dim() == 3 { 1..g.n[2] - 1 } else { 0..1 };
            for k in k_range {
                for j in 1..g.n[1] - 1 {
                    for i in 1..g.n[0] - 1 {
                        let mut sq = 0.0;
                        for ax in 0..cfg.dim() {
                            let mut up = [i, j, k];
                            let mut dn = [i, j, k];
                            up[ax] += 1;
                            dn[ax] -= 1;
                            let d = phi0.data[g.idx(up[0], up[1], up[2])]
                                - phi0.data[g.idx(dn[0], dn[1], dn[2])];
                            sq += (d / (2.0 * g.h)).powi(2);
                        }
                        est = est.max(sq.sqrt());
                    }
                }
            }
            cfg.maxgrad = est.max(1e-6);
            cfg.maxgrad_exact = false;
        }
    }
    Ok(())
}
