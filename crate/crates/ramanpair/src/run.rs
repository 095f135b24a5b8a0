//! Config-driven runs rendered to named output files.
//!
//! [`execute`] is deterministic: the same resolved [`RunConfig`] gives the
//! same bytes in every file, whatever the execution mode or thread count.
//! That is what makes a [`RunManifest`] sufficient to reproduce a run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::experiments::{
    run_sweep, JiKind, JiPanel, PurityPoint, SweepError, SweepKind, SweepOutput, SweepSpec,
};
use crate::io::{self, BinaryGrid, IoError, RunManifest};
use crate::schmidt::{self, Mechanism, SchmidtError, SchmidtReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Purity,
    Sweep,
    JiGrid,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Purity => "purity",
            Command::Sweep => "sweep",
            Command::JiGrid => "ji-grid",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        [Command::Purity, Command::Sweep, Command::JiGrid]
            .into_iter()
            .find(|c| c.name() == s)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    /// The config cannot drive this command (bad scenario, missing sweep...).
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl From<SweepError> for RunError {
    fn from(e: SweepError) -> Self {
        RunError::Input(e.to_string())
    }
}

impl From<SchmidtError> for RunError {
    fn from(e: SchmidtError) -> Self {
        RunError::Input(e.to_string())
    }
}

/// Files produced by one run, in write order.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub files: Vec<(String, Vec<u8>)>,
    pub converged: bool,
    /// One-line human summary.
    pub summary: String,
}

impl RunOutputs {
    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }
}

/// Summary of a single-scenario joint-intensity run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JiSummary {
    pub pump_fwhm: f64,
    pub pump_fwhm_nm: f64,
    pub purity_energy: PurityPoint,
    pub purity_momentum: PurityPoint,
    pub energy_peak: (usize, usize),
    pub momentum_peak: (usize, usize),
}

pub fn execute(command: Command, config: &RunConfig, stem: &str) -> Result<RunOutputs, RunError> {
    match command {
        Command::Purity => purity(config, stem),
        Command::Sweep => {
            let spec = config.sweep_spec().ok_or_else(|| {
                RunError::Input("sweep: the config has no [sweep] section".into())
            })?;
            sweep(&spec, stem)
        }
        Command::JiGrid => ji_grid(config, stem),
    }
}

/// Re-run the command recorded in a manifest.
pub fn reproduce(manifest: &RunManifest) -> Result<RunOutputs, RunError> {
    let command = Command::parse(&manifest.command).ok_or_else(|| {
        RunError::Input(format!(
            "unknown command `{}` in manifest",
            manifest.command
        ))
    })?;
    execute(command, &manifest.config, &manifest.stem)
}

fn purity(config: &RunConfig, stem: &str) -> Result<RunOutputs, RunError> {
    let ctx = config
        .scenario
        .context()
        .map_err(|e| RunError::Input(e.to_string()))?;
    let opts = config.purity_options();
    let report = match config.mechanism {
        Mechanism::Energy => schmidt::purity_energy(&ctx, &opts)?,
        Mechanism::Momentum => schmidt::purity_momentum(&ctx, &opts)?,
        Mechanism::Total => schmidt::purity_total(&ctx, &opts)?,
    };
    let summary = format!(
        "purity {} (K = {}, g2 = {}), {} after {} step(s)",
        report.purity,
        report.mode_number,
        report.g2_predicted,
        if report.converged {
            "converged"
        } else {
            "NOT converged"
        },
        report.refinement_history.len()
    );
    Ok(RunOutputs {
        files: vec![
            (format!("{stem}.csv"), report_csv(&report)?),
            (format!("{stem}.json"), io::to_json(&report)?),
        ],
        converged: report.converged,
        summary,
    })
}

fn report_csv(r: &SchmidtReport) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "mechanism",
        "geometry",
        "purity [1]",
        "mode_number [1]",
        "g2 [1]",
        "tail [1]",
        "n_nu",
        "n_env",
        "n_z",
        "converged",
    ])?;
    w.write_record([
        tag(&r.mechanism),
        tag(&r.geometry),
        io::num(r.purity),
        io::num(r.mode_number),
        io::num(r.g2_predicted),
        io::num(r.tail),
        r.grid.n_nu.to_string(),
        r.grid.n_env.to_string(),
        r.grid.n_z.to_string(),
        r.converged.to_string(),
    ])?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Serde enum tag as plain text (`Mechanism::Total` → `total`).
fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Table + JSON for any sweep; joint-intensity sweeps add long-format map
/// CSVs and one `.rpgrid` per panel and kind.
pub fn sweep(spec: &SweepSpec, stem: &str) -> Result<RunOutputs, RunError> {
    let out = run_sweep(spec)?;
    let mut files = vec![
        (format!("{stem}.csv"), io::sweep_csv(&out)?),
        (format!("{stem}.json"), io::to_json(&out)?),
    ];
    if let SweepOutput::JointIntensity { panels } = &out {
        files.push((
            format!("{stem}_energy.csv"),
            io::ji_csv(panels, JiKind::Energy)?,
        ));
        files.push((
            format!("{stem}_momentum.csv"),
            io::ji_csv(panels, JiKind::Momentum)?,
        ));
        for (i, p) in panels.iter().enumerate() {
            files.extend(panel_grids(p, &format!("{stem}_{i}"))?);
        }
    }
    let points = match &out {
        SweepOutput::Purity { rows, .. } => rows.len(),
        SweepOutput::Apodization { rows } => rows.len(),
        SweepOutput::JointIntensity { panels } => panels.len(),
    };
    let converged = out.all_converged();
    Ok(RunOutputs {
        files,
        converged,
        summary: format!(
            "{} sweep, {points} point(s), {}",
            spec.kind.axis_name(),
            if converged {
                "all converged"
            } else {
                "some points NOT converged"
            }
        ),
    })
}

fn panel_grids(p: &JiPanel, stem: &str) -> Result<Vec<(String, Vec<u8>)>, IoError> {
    let title = format!("pump FWHM {} nm", p.pump_fwhm_nm);
    Ok(vec![
        (
            format!("{stem}_energy.rpgrid"),
            BinaryGrid::from_ji(&p.energy, &format!("energy joint intensity, {title}"))
                .to_bytes()?,
        ),
        (
            format!("{stem}_momentum.rpgrid"),
            BinaryGrid::from_ji(&p.momentum, &format!("momentum joint intensity, {title}"))
                .to_bytes()?,
        ),
    ])
}

fn ji_grid(config: &RunConfig, stem: &str) -> Result<RunOutputs, RunError> {
    let scenario = &config.scenario;
    let mut spec = SweepSpec::new(
        SweepKind::JointIntensityGrid,
        vec![scenario.pump.intensity_fwhm],
        scenario.clone(),
    );
    spec.options = config.purity_options();
    if let Some(s) = &config.sweep {
        spec.ji_grid = s.ji_grid;
    }
    let SweepOutput::JointIntensity { panels } = run_sweep(&spec)? else {
        unreachable!("joint-intensity sweep returns panels")
    };
    let p = &panels[0];
    let summary = JiSummary {
        pump_fwhm: p.pump_fwhm,
        pump_fwhm_nm: p.pump_fwhm_nm,
        purity_energy: p.purity_energy,
        purity_momentum: p.purity_momentum,
        energy_peak: p.energy.argmax(),
        momentum_peak: p.momentum.argmax(),
    };
    let mut files = vec![
        (format!("{stem}_energy.csv"), io::grid_csv(&p.energy)?),
        (format!("{stem}_momentum.csv"), io::grid_csv(&p.momentum)?),
        (format!("{stem}.json"), io::to_json(&summary)?),
    ];
    files.extend(panel_grids(p, stem)?);
    let converged = p.purity_energy.converged && p.purity_momentum.converged;
    Ok(RunOutputs {
        files,
        converged,
        summary: format!(
            "joint intensity at {} nm: P_E = {}, P_M = {}",
            p.pump_fwhm_nm, p.purity_energy.purity, p.purity_momentum.purity
        ),
    })
}
