//! Output formats: CSV tables, JSON documents, the `.rpgrid` binary grid
//! format, content hashes and run manifests.
//!
//! ## `.rpgrid` layout
//!
//! ```text
//! offset  size  content
//! 0       8     magic  b"RPGRID\0" followed by format version byte (1)
//! 8       4     u32 LE: length H of the JSON header
//! 12      H     UTF-8 JSON header (GridHeader): title, axes (name, unit,
//!               length), value name/unit, components (1 real, 2 re/im)
//! 12+H    ...   f64 LE: axis 0 values, axis 1 values, then the data,
//!               row-major over (axis 0, axis 1), components interleaved
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunConfig;
use crate::experiments::{
    CoincidenceRecord, JiKind, JiPanel, JointIntensityGrid, PurityPoint, SweepOutput,
};

pub const GRID_MAGIC: &[u8; 7] = b"RPGRID\0";
pub const GRID_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed grid file: {0}")]
    Grid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, IoError> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Shortest round-trip text for a float; exponent form outside 1e-4..1e15
/// so that tails of a Gaussian don't print hundreds of zeros.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

fn opt(p: Option<PurityPoint>) -> (String, String) {
    match p {
        Some(p) => (num(p.purity), flag(p.converged).to_string()),
        None => (String::new(), String::new()),
    }
}

/// Sweep table as CSV; the header names carry units in brackets. Joint
/// intensity sweeps write a panel summary here (the maps go to
/// [`ji_csv`] / `.rpgrid`).
pub fn sweep_csv(out: &SweepOutput) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match out {
        SweepOutput::Purity { kind, rows } => {
            let axis = kind.axis_name();
            w.write_record([
                format!("{axis} [{}]", kind.display_unit()),
                format!("{axis} [SI]"),
                "purity [1]".into(),
                "mode_number [1]".into(),
                "g2 [1]".into(),
                "converged".into(),
                "energy_only_purity [1]".into(),
                "energy_only_converged".into(),
                "momentum_only_purity [1]".into(),
                "momentum_only_converged".into(),
            ])?;
            for r in rows {
                let (e, ec) = opt(r.energy_only);
                let (m, mc) = opt(r.momentum_only);
                w.write_record([
                    num(r.display),
                    num(r.value),
                    num(r.total.purity),
                    num(r.total.mode_number),
                    num(r.total.g2),
                    flag(r.total.converged).into(),
                    e,
                    ec,
                    m,
                    mc,
                ])?;
            }
        }
        SweepOutput::Apodization { rows } => {
            w.write_record(["angle [deg]", "angle [rad]", "apodization_fwhm [m]"])?;
            for r in rows {
                w.write_record([num(r.angle_deg), num(r.angle), num(r.fwhm)])?;
            }
        }
        SweepOutput::JointIntensity { panels } => {
            w.write_record([
                "pump_fwhm [nm]",
                "pump_fwhm [rad/s]",
                "purity_energy [1]",
                "energy_converged",
                "purity_momentum [1]",
                "momentum_converged",
            ])?;
            for p in panels {
                w.write_record([
                    num(p.pump_fwhm_nm),
                    num(p.pump_fwhm),
                    num(p.purity_energy.purity),
                    flag(p.purity_energy.converged).into(),
                    num(p.purity_momentum.purity),
                    flag(p.purity_momentum.converged).into(),
                ])?;
            }
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// All panels' maps of one kind, long format.
pub fn ji_csv(panels: &[JiPanel], kind: JiKind) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let env = match kind {
        JiKind::Energy => "ce_shift [cm^-1]",
        JiKind::Momentum => "ce_wavelength [um]",
    };
    w.write_record([
        "pump_fwhm [nm]",
        "stokes_wavelength [nm]",
        env,
        "intensity [1]",
    ])?;
    for p in panels {
        let g = match kind {
            JiKind::Energy => &p.energy,
            JiKind::Momentum => &p.momentum,
        };
        write_ji_rows(&mut w, Some(p.pump_fwhm_nm), g)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// One map as CSV (display axes plus the SI offsets).
pub fn grid_csv(g: &JointIntensityGrid) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "stokes_wavelength [nm]".to_string(),
        format!("ce_axis [{}]", g.env_display_unit),
        "intensity [1]".to_string(),
    ])?;
    write_ji_rows(&mut w, None, g)?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn write_ji_rows(
    w: &mut csv::Writer<Vec<u8>>,
    lead: Option<f64>,
    g: &JointIntensityGrid,
) -> Result<(), IoError> {
    for (i, lam) in g.stokes_wavelength_nm.iter().enumerate() {
        for (j, e) in g.env_display.iter().enumerate() {
            let mut rec: Vec<String> = lead.iter().map(|&x| num(x)).collect();
            rec.extend([num(*lam), num(*e), num(g.at(i, j))]);
            w.write_record(&rec)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub unit: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub title: String,
    pub axes: [GridAxis; 2],
    pub value: String,
    pub value_unit: String,
    /// 1: real values; 2: interleaved (re, im).
    pub components: usize,
}

/// A decoded `.rpgrid` file.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryGrid {
    pub header: GridHeader,
    pub axis0: Vec<f64>,
    pub axis1: Vec<f64>,
    pub data: Vec<f64>,
}

impl BinaryGrid {
    /// A joint intensity with its SI axes (ν in rad/s; δ in rad/s or κ in 1/m).
    pub fn from_ji(g: &JointIntensityGrid, title: &str) -> Self {
        let env_unit = match g.kind {
            JiKind::Energy => "rad/s",
            JiKind::Momentum => "1/m",
        };
        let env_name = match g.kind {
            JiKind::Energy => "ce_detuning",
            JiKind::Momentum => "ce_wavevector_offset",
        };
        BinaryGrid {
            header: GridHeader {
                title: title.to_string(),
                axes: [
                    GridAxis {
                        name: "stokes_detuning".into(),
                        unit: "rad/s".into(),
                        len: g.stokes.len(),
                    },
                    GridAxis {
                        name: env_name.into(),
                        unit: env_unit.into(),
                        len: g.env.len(),
                    },
                ],
                value: "joint_intensity".into(),
                value_unit: "1".into(),
                components: 1,
            },
            axis0: g.stokes.clone(),
            axis1: g.env.clone(),
            data: g.intensity.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, IoError> {
        let n = self.header.axes[0].len * self.header.axes[1].len * self.header.components;
        if self.axis0.len() != self.header.axes[0].len
            || self.axis1.len() != self.header.axes[1].len
            || self.data.len() != n
        {
            return Err(IoError::Grid(
                "header dimensions disagree with the arrays".into(),
            ));
        }
        let head = serde_json::to_vec(&self.header)?;
        let mut out =
            Vec::with_capacity(12 + head.len() + 8 * (self.axis0.len() + self.axis1.len() + n));
        out.extend_from_slice(GRID_MAGIC);
        out.push(GRID_VERSION);
        out.extend_from_slice(&(head.len() as u32).to_le_bytes());
        out.extend_from_slice(&head);
        for x in self.axis0.iter().chain(&self.axis1).chain(&self.data) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, IoError> {
        let mut magic = [0u8; 8];
        bytes
            .read_exact(&mut magic)
            .map_err(|_| IoError::Grid("truncated magic".into()))?;
        if &magic[..7] != GRID_MAGIC {
            return Err(IoError::Grid("bad magic".into()));
        }
        if magic[7] != GRID_VERSION {
            return Err(IoError::Grid(format!("unsupported version {}", magic[7])));
        }
        let mut len = [0u8; 4];
        bytes
            .read_exact(&mut len)
            .map_err(|_| IoError::Grid("truncated header length".into()))?;
        let h = u32::from_le_bytes(len) as usize;
        if bytes.len() < h {
            return Err(IoError::Grid("truncated header".into()));
        }
        let header: GridHeader = serde_json::from_slice(&bytes[..h])?;
        bytes = &bytes[h..];
        let (n0, n1) = (header.axes[0].len, header.axes[1].len);
        let n = n0 * n1 * header.components;
        if bytes.len() != 8 * (n0 + n1 + n) {
            return Err(IoError::Grid(format!(
                "payload is {} bytes, header implies {}",
                bytes.len(),
                8 * (n0 + n1 + n)
            )));
        }
        let mut vals = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let axis0 = vals.by_ref().take(n0).collect();
        let axis1 = vals.by_ref().take(n1).collect();
        let data = vals.collect();
        Ok(BinaryGrid {
            header,
            axis0,
            axis1,
            data,
        })
    }
}

/// Coincidence records, one per CSV row: `N1,N2,N12,R`. A header row is
/// optional; blank lines and `#` comments are skipped.
pub fn parse_coincidences(text: &str) -> Result<Vec<CoincidenceRecord>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 4 {
            return Err(format!(
                "line {line}: expected 4 columns N1,N2,N12,R, found {}",
                rec.len()
            ));
        }
        let nums: Result<Vec<u64>, _> = rec.iter().map(str::parse::<u64>).collect();
        match nums {
            Ok(n) => out.push(CoincidenceRecord::new(n[0], n[1], n[2], n[3])),
            Err(_) if out.is_empty() && i == 0 => continue, // header
            Err(e) => return Err(format!("line {line}: {e}")),
        }
    }
    if out.is_empty() {
        return Err("no coincidence records".into());
    }
    Ok(out)
}

/// One file written by a run, with its content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// RFC 3339, informational only.
    pub created: String,
    /// Subcommand that produced the outputs.
    pub command: String,
    /// Output stem the files are named after.
    pub stem: String,
    pub config: RunConfig,
    /// sha256 of the canonical (compact JSON) resolved config.
    pub input_sha256: String,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        stem: &str,
        config: RunConfig,
        created: String,
    ) -> Result<Self, IoError> {
        let input_sha256 = config_hash(&config)?;
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created,
            command: command.to_string(),
            stem: stem.to_string(),
            config,
            input_sha256,
            outputs: Vec::new(),
        })
    }

    pub fn record(&mut self, file: &str, bytes: &[u8]) {
        self.outputs.push(OutputEntry {
            file: file.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Ok(serde_json::from_slice(&read_file(path)?)?)
    }

    /// Whether the stored config still hashes to `input_sha256`.
    pub fn verify_input(&self) -> Result<bool, IoError> {
        Ok(config_hash(&self.config)? == self.input_sha256)
    }
}

pub fn config_hash(config: &RunConfig) -> Result<String, IoError> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

/// Copy `bytes` to a writer; small helper for stdout output.
pub fn emit(mut w: impl Write, bytes: &[u8]) -> Result<(), IoError> {
    w.write_all(bytes)?;
    Ok(())
}
