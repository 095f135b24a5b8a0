//! Run configuration: a TOML document with a unit tag on every physical
//! quantity ("8 mm", "746.6 cm^-1", "7 nm"). Bare numbers are accepted only
//! for dimensionless settings (grid sizes, tolerances, Fresnel numbers).
//!
//! ```toml
//! [medium]
//! dispersion = "sapphire-ordinary"
//! length = "8 mm"
//! raman_shift = "746.6 cm^-1"
//! linewidth = "11.0 cm^-1"
//!
//! [pump]
//! wavelength = "775 nm"
//! fwhm = "7 nm"
//!
//! [geometry]
//! mode = "forward"
//!
//! [sweep]
//! kind = "bandwidth"
//! range = { from = "1 nm", to = "30 nm", points = 30 }
//! ```
//!
//! Parsing resolves everything into a [`RunConfig`] in SI units; that is what
//! manifests store and what `--manifest-from` reruns.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::dispersion::{MediumSpec, Sellmeier};
use crate::exec::Execution;
use crate::experiments::{Focusing, JiGridSpec, Scenario, SweepKind, SweepSpec};
use crate::fields::PumpSpec;
use crate::jointamp::GeometryMode;
use crate::quadrature::LineWeighting;
use crate::schmidt::{GridSpec, Mechanism, PurityOptions, RefineSpec, ZMethod};
use crate::units::{wavelength_width_to_angular, Dimension, Quantity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("cannot read {file}: {message}")]
    Io { file: String, message: String },
    #[error("not valid TOML: {0}")]
    Syntax(String),
}

impl ConfigError {
    fn field(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Field {
            path: path.to_string(),
            message: message.into(),
        }
    }

    /// Dotted path of the offending field, if the error is about one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Field { path, .. } => Some(path),
            _ => None,
        }
    }
}

/// Fully resolved run settings, SI throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub mechanism: Mechanism,
    pub grid: GridSpec,
    pub refine: RefineSpec,
    pub execution: Execution,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub axis: Vec<f64>,
    pub isolated: bool,
    pub ji_grid: JiGridSpec,
}

impl RunConfig {
    pub fn purity_options(&self) -> PurityOptions {
        PurityOptions {
            grid: self.grid.clone(),
            refine: self.refine.clone(),
            execution: self.execution,
        }
    }

    /// The sweep, if the config declares one.
    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| SweepSpec {
            kind: s.kind,
            axis: s.axis.clone(),
            scenario: self.scenario.clone(),
            options: self.purity_options(),
            isolated: s.isolated,
            ji_grid: s.ji_grid,
        })
    }
}

/// Read and resolve a config file; relative paths inside it (Sellmeier
/// files) are taken relative to the file.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_with(&text, &[], &base)
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with(text, &[], Path::new("."))
}

/// Parse with `key.path=value` overrides applied on top of the document.
/// Override values are read as TOML when they parse as such, else as strings
/// (so `geometry.mode=backward` and `pump.fwhm=3 nm` both work).
pub fn parse_with(text: &str, overrides: &[String], base: &Path) -> Result<RunConfig, ConfigError> {
    let mut doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    resolve(&doc, base)
}

fn apply_override(doc: &mut Table, o: &str) -> Result<(), ConfigError> {
    let (key, raw) = o
        .split_once('=')
        .ok_or_else(|| ConfigError::field(o, "override must look like section.key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigError::field(key, "empty key"))?;
    let mut t = doc;
    for p in parts {
        t = t
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::field(key, format!("`{p}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// A table being read, remembering its path and which keys were consumed.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
    seen: BTreeSet<&'static str>,
}

impl<'a> Section<'a> {
    fn of(doc: &'a Table, name: &str) -> Result<Self, ConfigError> {
        let table = match doc.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(ConfigError::field(name, "expected a table")),
        };
        Ok(Section {
            path: name.to_string(),
            table,
            seen: BTreeSet::new(),
        })
    }

    fn at(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.insert(key);
        self.table.and_then(|t| t.get(key))
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    /// Reject keys nobody asked for (typos would otherwise be ignored).
    fn finish(self) -> Result<(), ConfigError> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.seen.contains(k.as_str()) {
                    return Err(ConfigError::field(&self.at(k), "unknown key"));
                }
            }
        }
        Ok(())
    }

    fn quantity(
        &mut self,
        key: &'static str,
        dims: &[Dimension],
    ) -> Result<Option<Quantity>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => quantity_value(&self.at(key), v, dims).map(Some),
        }
    }

    fn required_quantity(
        &mut self,
        key: &'static str,
        dims: &[Dimension],
    ) -> Result<Quantity, ConfigError> {
        self.quantity(key, dims)?
            .ok_or_else(|| ConfigError::field(&self.at(key), "missing required field"))
    }

    fn float(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(ConfigError::field(&self.at(key), "expected a number")),
        }
    }

    fn count(&mut self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(ConfigError::field(
                &self.at(key),
                "expected a non-negative integer",
            )),
        }
    }

    fn flag(&mut self, key: &'static str) -> Result<Option<bool>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(ConfigError::field(&self.at(key), "expected true or false")),
        }
    }

    fn string(&mut self, key: &'static str) -> Result<Option<&'a str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(ConfigError::field(&self.at(key), "expected a string")),
        }
    }

    fn choice<T: Copy>(
        &mut self,
        key: &'static str,
        options: &[(&str, T)],
    ) -> Result<Option<T>, ConfigError> {
        let path = self.at(key);
        match self.string(key)? {
            None => Ok(None),
            Some(s) => options
                .iter()
                .find(|(n, _)| *n == s)
                .map(|(_, v)| Some(*v))
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    ConfigError::field(&path, format!("`{s}` is not one of {}", names.join(", ")))
                }),
        }
    }
}

fn quantity_value(path: &str, v: &Value, dims: &[Dimension]) -> Result<Quantity, ConfigError> {
    let s = match v {
        Value::String(s) => s,
        Value::Integer(_) | Value::Float(_) => {
            return Err(ConfigError::field(
                path,
                format!("untagged number {v}; physical quantities need a unit, e.g. \"{v} nm\""),
            ))
        }
        _ => return Err(ConfigError::field(path, "expected a unit-tagged string")),
    };
    let q: Quantity = s
        .parse()
        .map_err(|e| ConfigError::field(path, format!("{e}")))?;
    if !dims.contains(&q.dimension()) {
        let want: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
        return Err(ConfigError::field(
            path,
            format!(
                "`{s}` is a {}, expected a {}",
                q.dimension(),
                want.join(" or ")
            ),
        ));
    }
    Ok(q)
}

/// A pump bandwidth: a wavelength width at the pump centre, or a frequency.
fn bandwidth_si(q: Quantity, center_wavelength: f64) -> f64 {
    match q.dimension() {
        Dimension::Length => wavelength_width_to_angular(q.si(), center_wavelength),
        _ => q.si(),
    }
}

const BANDWIDTH: &[Dimension] = &[Dimension::Length, Dimension::AngularFrequency];

fn positive(path: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::field(
            path,
            format!("must be positive, got {x}"),
        ))
    }
}

fn resolve(doc: &Table, base: &Path) -> Result<RunConfig, ConfigError> {
    const SECTIONS: &[&str] = &[
        "medium", "pump", "geometry", "grid", "refine", "run", "sweep",
    ];
    for k in doc.keys() {
        if !SECTIONS.contains(&k.as_str()) {
            return Err(ConfigError::field(k, "unknown section"));
        }
    }

    // [medium]
    let mut m = Section::of(doc, "medium")?;
    let sellmeier = match (m.string("dispersion")?, m.float("constant_index")?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::field(
                &m.at("constant_index"),
                "give either dispersion or constant_index",
            ))
        }
        (_, Some(n)) => {
            if !(n >= 1.0) {
                return Err(ConfigError::field(
                    &m.at("constant_index"),
                    "index must be ≥ 1",
                ));
            }
            Sellmeier::constant_index(n)
        }
        (None | Some("sapphire-ordinary"), None) => Sellmeier::sapphire_ordinary(),
        (Some("vacuum"), None) => Sellmeier::vacuum(),
        (Some(file), None) => {
            let p: PathBuf = base.join(file);
            let text = std::fs::read_to_string(&p).map_err(|e| ConfigError::Io {
                file: p.display().to_string(),
                message: e.to_string(),
            })?;
            Sellmeier::from_toml(&text)
                .map_err(|e| ConfigError::field(&m.at("dispersion"), e.to_string()))?
        }
    };
    let reference = MediumSpec::sapphire_reference();
    let length = match m.quantity("length", &[Dimension::Length])? {
        Some(q) => positive(&m.at("length"), q.si())?,
        None => reference.length,
    };
    let raman_shift = match m.quantity("raman_shift", &[Dimension::AngularFrequency])? {
        Some(q) => positive(&m.at("raman_shift"), q.si())?,
        None => reference.raman_shift,
    };
    let linewidth = match m.quantity("linewidth", &[Dimension::AngularFrequency])? {
        Some(q) => positive(&m.at("linewidth"), q.si())?,
        None => reference.linewidth,
    };
    m.finish()?;
    let medium = MediumSpec::new(sellmeier, length, raman_shift, linewidth)
        .map_err(|e| ConfigError::field("medium", e.to_string()))?;

    // [pump]
    let mut p = Section::of(doc, "pump")?;
    let wavelength = match p.quantity("wavelength", &[Dimension::Length])? {
        Some(q) => positive(&p.at("wavelength"), q.si())?,
        None => 775e-9,
    };
    let fwhm_path = p.at("fwhm");
    let fwhm = positive(
        &fwhm_path,
        bandwidth_si(p.required_quantity("fwhm", BANDWIDTH)?, wavelength),
    )?;
    p.finish()?;
    let pump = PumpSpec::new(wavelength, fwhm);

    // [geometry]
    let mut g = Section::of(doc, "geometry")?;
    let mode = g
        .choice(
            "mode",
            &[
                ("forward", GeometryMode::Forward),
                ("backward", GeometryMode::Backward),
                ("collinear-3d", GeometryMode::Collinear3d),
                ("off-axis-3d", GeometryMode::OffAxis3d),
            ],
        )?
        .unwrap_or(GeometryMode::Forward);
    let angle = g
        .quantity("angle", &[Dimension::Angle])?
        .map(|q| q.si())
        .unwrap_or(0.0);
    if !(0.0..=std::f64::consts::PI).contains(&angle) {
        return Err(ConfigError::field(
            &g.at("angle"),
            "must lie in [0 deg, 180 deg]",
        ));
    }
    let wp = g.quantity("pump_waist", &[Dimension::Length])?;
    let wf = g.quantity("collection_waist", &[Dimension::Length])?;
    let fp = g.float("fresnel_pump")?;
    let ff = g.float("fresnel_collection")?;
    let focusing = match (wp, wf, fp, ff) {
        (None, None, None, None) => Focusing::None,
        (Some(a), Some(b), None, None) => Focusing::Waists {
            pump: positive(&g.at("pump_waist"), a.si())?,
            collection: positive(&g.at("collection_waist"), b.si())?,
        },
        (None, None, Some(a), Some(b)) => Focusing::Fresnel {
            pump: positive(&g.at("fresnel_pump"), a)?,
            collection: positive(&g.at("fresnel_collection"), b)?,
        },
        (Some(_), None, None, None) => {
            return Err(ConfigError::field(
                &g.at("collection_waist"),
                "missing required field",
            ))
        }
        (None, Some(_), None, None) => {
            return Err(ConfigError::field(
                &g.at("pump_waist"),
                "missing required field",
            ))
        }
        (None, None, Some(_), None) => {
            return Err(ConfigError::field(
                &g.at("fresnel_collection"),
                "missing required field",
            ))
        }
        (None, None, None, Some(_)) => {
            return Err(ConfigError::field(
                &g.at("fresnel_pump"),
                "missing required field",
            ))
        }
        _ => {
            return Err(ConfigError::field(
                &g.path,
                "give either pump_waist/collection_waist or fresnel_pump/fresnel_collection",
            ))
        }
    };
    if mode.is_3d() && focusing == Focusing::None {
        return Err(ConfigError::field(
            &g.at("pump_waist"),
            format!("missing required field ({} needs pump_waist and collection_waist, or Fresnel numbers)", mode.name()),
        ));
    }
    g.finish()?;
    let scenario = Scenario {
        medium,
        pump,
        mode,
        angle,
        focusing,
    };

    // [grid]
    let mut gr = Section::of(doc, "grid")?;
    let mut grid = GridSpec::default();
    if let Some(n) = gr.count("n_nu")? {
        grid.n_nu = n;
    }
    if let Some(n) = gr.count("n_delta")? {
        grid.n_delta = n;
    }
    if let Some(n) = gr.count("n_z")? {
        grid.n_z = n;
    }
    if let Some(b) = gr.flag("adaptive")? {
        grid.adaptive = b;
    }
    if let Some(n) = gr.count("dense_limit")? {
        grid.dense_limit = n;
    }
    if let Some(q) = gr.quantity("nu_half_width", &[Dimension::AngularFrequency])? {
        grid.nu_half_width = Some(positive(&gr.at("nu_half_width"), q.si())?);
    }
    if let Some(q) = gr.quantity("delta_half_width", &[Dimension::AngularFrequency])? {
        grid.delta_half_width = Some(positive(&gr.at("delta_half_width"), q.si())?);
    }
    grid.line_weighting = gr.choice(
        "line_weighting",
        &[
            ("trapezoid", LineWeighting::Trapezoid),
            ("lorentzian-product", LineWeighting::LorentzianProduct),
        ],
    )?;
    if let Some(z) = gr.choice(
        "z_method",
        &[
            ("analytic", ZMethod::Analytic),
            ("quadrature", ZMethod::Quadrature),
        ],
    )? {
        grid.z_method = z;
    }
    for (key, n, min) in [
        ("n_nu", grid.n_nu, 2),
        ("n_delta", grid.n_delta, 2),
        ("n_z", grid.n_z, 1),
    ] {
        if n < min {
            return Err(ConfigError::field(
                &gr.at(key),
                format!("must be at least {min}"),
            ));
        }
    }
    gr.finish()?;

    // [refine]
    let mut r = Section::of(doc, "refine")?;
    let mut refine = RefineSpec::default();
    if let Some(t) = r.float("tolerance")? {
        refine.tolerance = positive(&r.at("tolerance"), t)?;
    }
    if let Some(n) = r.count("max_steps")? {
        refine.max_steps = n;
    }
    if let Some(n) = r.count("max_n_nu")? {
        refine.max_n_nu = n;
    }
    if let Some(n) = r.count("max_n_delta")? {
        refine.max_n_delta = n;
    }
    if let Some(n) = r.count("max_n_z")? {
        refine.max_n_z = n;
    }
    if let Some(b) = r.flag("check_window")? {
        refine.check_window = b;
    }
    r.finish()?;

    // [run]
    let mut run = Section::of(doc, "run")?;
    let mechanism = run
        .choice(
            "mechanism",
            &[
                ("total", Mechanism::Total),
                ("energy", Mechanism::Energy),
                ("momentum", Mechanism::Momentum),
            ],
        )?
        .unwrap_or(Mechanism::Total);
    let execution = run
        .choice(
            "execution",
            &[
                ("parallel", Execution::Parallel),
                ("sequential", Execution::Sequential),
            ],
        )?
        .unwrap_or_default();
    run.finish()?;

    // [sweep]
    let sweep = resolve_sweep(doc, &scenario)?;

    Ok(RunConfig {
        scenario,
        mechanism,
        grid,
        refine,
        execution,
        sweep,
    })
}

fn resolve_sweep(doc: &Table, scenario: &Scenario) -> Result<Option<SweepSection>, ConfigError> {
    let mut s = Section::of(doc, "sweep")?;
    if !s.present() {
        return Ok(None);
    }
    let kind = s
        .choice(
            "kind",
            &[
                ("bandwidth", SweepKind::Bandwidth),
                ("length", SweepKind::Length),
                ("angle", SweepKind::Angle),
                ("fresnel", SweepKind::Fresnel),
                ("apodization-fwhm", SweepKind::ApodizationFwhm),
                ("joint-intensity-grid", SweepKind::JointIntensityGrid),
            ],
        )?
        .ok_or_else(|| ConfigError::field("sweep.kind", "missing required field"))?;
    let dims: &[Dimension] = match kind {
        SweepKind::Bandwidth | SweepKind::JointIntensityGrid => BANDWIDTH,
        SweepKind::Length => &[Dimension::Length],
        SweepKind::Angle | SweepKind::ApodizationFwhm => &[Dimension::Angle],
        SweepKind::Fresnel => &[],
    };
    let lambda0 = scenario.pump.center_wavelength;
    let to_si = |path: &str, v: &Value| -> Result<f64, ConfigError> {
        if dims.is_empty() {
            return match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(ConfigError::field(
                    path,
                    "expected a number (Fresnel numbers are dimensionless)",
                )),
            };
        }
        let q = quantity_value(path, v, dims)?;
        Ok(match kind {
            SweepKind::Bandwidth | SweepKind::JointIntensityGrid => bandwidth_si(q, lambda0),
            _ => q.si(),
        })
    };
    let values_path = s.at("values");
    let range_path = s.at("range");
    let axis = match (s.get("values"), s.get("range")) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::field(
                &range_path,
                "give either values or range",
            ))
        }
        (None, None) => {
            return Err(ConfigError::field(
                &values_path,
                "missing required field (or give range)",
            ))
        }
        (Some(Value::Array(a)), None) => a
            .iter()
            .enumerate()
            .map(|(i, v)| to_si(&format!("{values_path}[{i}]"), v))
            .collect::<Result<Vec<f64>, _>>()?,
        (Some(_), None) => return Err(ConfigError::field(&values_path, "expected an array")),
        (None, Some(Value::Table(t))) => {
            for k in t.keys() {
                if !["from", "to", "points", "spacing"].contains(&k.as_str()) {
                    return Err(ConfigError::field(
                        &format!("{range_path}.{k}"),
                        "unknown key",
                    ));
                }
            }
            let need = |k: &str| {
                t.get(k).ok_or_else(|| {
                    ConfigError::field(&format!("{range_path}.{k}"), "missing required field")
                })
            };
            let from = to_si(&format!("{range_path}.from"), need("from")?)?;
            let to = to_si(&format!("{range_path}.to"), need("to")?)?;
            let n = match need("points")? {
                Value::Integer(n) if *n >= 1 => *n as usize,
                _ => {
                    return Err(ConfigError::field(
                        &format!("{range_path}.points"),
                        "expected a positive integer",
                    ))
                }
            };
            let log = match t.get("spacing") {
                None => false,
                Some(Value::String(x)) if x == "linear" => false,
                Some(Value::String(x)) if x == "log" => true,
                Some(_) => {
                    return Err(ConfigError::field(
                        &format!("{range_path}.spacing"),
                        "expected \"linear\" or \"log\"",
                    ))
                }
            };
            if log && !(from > 0.0 && to > 0.0) {
                return Err(ConfigError::field(
                    &range_path,
                    "log spacing needs positive end points",
                ));
            }
            spaced(from, to, n, log)
        }
        (None, Some(_)) => {
            return Err(ConfigError::field(
                &range_path,
                "expected a table {from, to, points}",
            ))
        }
    };
    let isolated = s.flag("isolated")?.unwrap_or(true);
    let mut ji_grid = JiGridSpec::default();
    if let Some(n) = s.count("ji_n_stokes")? {
        ji_grid.n_stokes = n;
    }
    if let Some(n) = s.count("ji_n_env")? {
        ji_grid.n_env = n;
    }
    s.finish()?;

    let probe = SweepSpec::new(kind, axis.clone(), scenario.clone());
    probe.validate().map_err(|e| {
        ConfigError::field(
            "sweep",
            e.to_string()
                .trim_start_matches("invalid sweep: ")
                .to_string(),
        )
    })?;
    Ok(Some(SweepSection {
        kind,
        axis,
        isolated,
        ji_grid,
    }))
}

/// `n` points from `from` to `to` inclusive, linear or geometric; end points
/// are exact.
pub fn spaced(from: f64, to: f64, n: usize, log: bool) -> Vec<f64> {
    if n == 1 {
        return vec![from];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                return to;
            }
            let t = i as f64 / (n - 1) as f64;
            if log {
                from * (to / from).powf(t)
            } else {
                from + (to - from) * t
            }
        })
        .collect()
}
