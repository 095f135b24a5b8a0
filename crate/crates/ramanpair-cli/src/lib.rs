//! `ramanpair` command line.
//!
//! Exit codes: 0 success, 1 bad input (config, counts, spectrum, I/O),
//! 2 a computation finished without converging (outputs are still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ramanpair::config;
use ramanpair::exec::with_threads;
use ramanpair::experiments::{
    g2_estimate, purity_from_g2, thermal_coincidences, CoincidenceRecord, G2Estimate,
    PurityEstimate,
};
use ramanpair::fields::{fit_lorentzian, parse_spectrum, FitError, LorentzianFit};
use ramanpair::io::{self, RunManifest};
use ramanpair::run::{self, Command, RunOutputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNCONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ramanpair",
    version,
    about = "Photon–collective-excitation pair purity in spontaneous Raman scattering"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration (unit-tagged quantities).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    /// Worker threads for parallel execution (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Relative purity change at which grid refinement stops.
    #[arg(long, global = true, value_name = "REL")]
    pub tolerance: Option<f64>,
    /// Re-run from a manifest and check the outputs against its hashes.
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest_from: Option<PathBuf>,
    /// Config override, `section.key=value` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Base name of the output files (default: the config file's stem).
    #[arg(long, global = true)]
    pub stem: Option<String>,
    /// No summary on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Purity of the Stokes photon for one scenario.
    Purity {
        /// Override the collection geometry.
        #[arg(long, value_enum)]
        geometry: Option<GeometryArg>,
        /// Override which correlations are included.
        #[arg(long, value_enum)]
        mechanism: Option<MechanismArg>,
    },
    /// Parameter sweep declared in the config's [sweep] section.
    Sweep,
    /// Energy and momentum joint-intensity maps for one scenario.
    JiGrid,
    /// g⁽²⁾ and purity from HBT counts.
    G2 {
        /// Counts on detector 1
        #[arg(long, requires_all = ["n2", "n12", "pulses"], conflicts_with = "counts")]
        n1: Option<u64>,
        /// Counts on detector 2
        #[arg(long)]
        n2: Option<u64>,
        /// Coincidences between the two detectors
        #[arg(long)]
        n12: Option<u64>,
        /// Number of pulses R.
        #[arg(long)]
        pulses: Option<u64>,
        /// CSV of records `N1,N2,N12,R` (optional header row).
        #[arg(long, value_name = "FILE")]
        counts: Option<PathBuf>,
        /// Simulate a single-mode thermal source with this seed instead
        /// (uses --pulses, default 10⁶, and --mean).
        #[arg(long, value_name = "SEED", conflicts_with_all = ["counts", "n1"])]
        thermal: Option<u64>,
        /// Mean photon number per pulse of the simulated source.
        #[arg(long, default_value_t = 1e-2, requires = "thermal")]
        mean: f64,
    },
    /// Lorentzian fit of a Raman gain spectrum (shift in cm⁻¹, intensity).
    Fit { spectrum: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeometryArg {
    Forward,
    Backward,
    Collinear3d,
    OffAxis3d,
}

impl GeometryArg {
    fn key(self) -> &'static str {
        match self {
            GeometryArg::Forward => "forward",
            GeometryArg::Backward => "backward",
            GeometryArg::Collinear3d => "collinear-3d",
            GeometryArg::OffAxis3d => "off-axis-3d",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MechanismArg {
    Total,
    Energy,
    Momentum,
}

impl MechanismArg {
    fn key(self) -> &'static str {
        match self {
            MechanismArg::Total => "total",
            MechanismArg::Energy => "energy",
            MechanismArg::Momentum => "momentum",
        }
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, String> {
    let g = &cli.global;
    match &cli.command {
        Cmd::Purity {
            geometry,
            mechanism,
        } => {
            let mut extra = Vec::new();
            if let Some(m) = geometry {
                extra.push(format!("geometry.mode={}", m.key()));
            }
            if let Some(m) = mechanism {
                extra.push(format!("run.mechanism={}", m.key()));
            }
            config_command(g, Command::Purity, &extra, out)
        }
        Cmd::Sweep => config_command(g, Command::Sweep, &[], out),
        Cmd::JiGrid => config_command(g, Command::JiGrid, &[], out),
        Cmd::G2 {
            n1,
            n2,
            n12,
            pulses,
            counts,
            thermal,
            mean,
        } => {
            if let Some(seed) = thermal {
                if !(*mean > 0.0 && mean.is_finite()) {
                    return Err(format!("g2: --mean must be positive, got {mean}"));
                }
                let rec = thermal_coincidences(*seed, pulses.unwrap_or(1_000_000), *mean);
                return g2_command(g, &[rec], out);
            }
            let records = match (counts, n1) {
                (Some(path), _) => io::parse_coincidences(&read_text(path)?)
                    .map_err(|e| format!("{}: {e}", path.display()))?,
                (None, Some(n1)) => vec![CoincidenceRecord::new(
                    *n1,
                    n2.unwrap_or(0),
                    n12.unwrap_or(0),
                    pulses.unwrap_or(0),
                )],
                (None, None) => {
                    return Err("g2: give --counts FILE or --n1/--n2/--n12/--pulses".into())
                }
            };
            g2_command(g, &records, out)
        }
        Cmd::Fit { spectrum } => fit_command(g, spectrum, out),
    }
}

fn read_text(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn output_dir(g: &Global) -> Result<PathBuf, String> {
    let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    Ok(dir)
}

fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), String> {
    for (name, bytes) in files {
        io::write_file(&dir.join(name), bytes).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn config_command(
    g: &Global,
    command: Command,
    extra: &[String],
    out: &mut dyn Write,
) -> Result<i32, String> {
    if let Some(path) = &g.manifest_from {
        if g.config.is_some()
            || g.tolerance.is_some()
            || !g.overrides.is_empty()
            || !extra.is_empty()
        {
            return Err("--manifest-from reproduces a run as recorded; it cannot be combined with --config, --tolerance, --set or overrides".into());
        }
        return reproduce(g, command, path, out);
    }
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| format!("{}: --config FILE is required", command.name()))?;
    let text = read_text(path)?;
    let mut overrides = g.overrides.clone();
    overrides.extend_from_slice(extra);
    if let Some(t) = g.tolerance {
        overrides.push(format!("refine.tolerance={t:e}"));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = config::parse_with(&text, &overrides, &base).map_err(|e| e.to_string())?;
    let stem = match &g.stem {
        Some(s) => s.clone(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| command.name().to_string()),
    };
    let outputs = threaded(g, || run::execute(command, &cfg, &stem))?;
    let dir = output_dir(g)?;
    let mut manifest =
        RunManifest::new(command.name(), &stem, cfg, now()).map_err(|e| e.to_string())?;
    finish(g, &dir, &mut manifest, &outputs, out)?;
    Ok(if outputs.converged {
        EXIT_OK
    } else {
        EXIT_UNCONVERGED
    })
}

fn reproduce(
    g: &Global,
    command: Command,
    path: &Path,
    out: &mut dyn Write,
) -> Result<i32, String> {
    let recorded = RunManifest::load(path).map_err(|e| e.to_string())?;
    if recorded.command != command.name() {
        return Err(format!(
            "{} records a `{}` run, not `{}`",
            path.display(),
            recorded.command,
            command.name()
        ));
    }
    if !recorded.verify_input().map_err(|e| e.to_string())? {
        return Err(format!(
            "{}: config does not match its recorded hash",
            path.display()
        ));
    }
    let outputs = threaded(g, || run::reproduce(&recorded))?;
    let dir = output_dir(g)?;
    let mut manifest = RunManifest::new(
        command.name(),
        &recorded.stem,
        recorded.config.clone(),
        now(),
    )
    .map_err(|e| e.to_string())?;
    finish(g, &dir, &mut manifest, &outputs, out)?;
    let mismatched: Vec<&str> = recorded
        .outputs
        .iter()
        .filter(|o| manifest.outputs.iter().all(|n| n != *o))
        .map(|o| o.file.as_str())
        .collect();
    if !mismatched.is_empty() || recorded.outputs.len() != manifest.outputs.len() {
        return Err(format!(
            "reproduction differs from {}: {}",
            path.display(),
            mismatched.join(", ")
        ));
    }
    if !g.quiet {
        let _ = writeln!(
            out,
            "reproduced {} file(s) bit-identically",
            manifest.outputs.len()
        );
    }
    Ok(if outputs.converged {
        EXIT_OK
    } else {
        EXIT_UNCONVERGED
    })
}

fn threaded<R: Send>(
    g: &Global,
    f: impl FnOnce() -> Result<R, run::RunError> + Send,
) -> Result<R, String> {
    if g.threads == Some(0) {
        return Err("--threads must be at least 1".into());
    }
    with_threads(g.threads, f)?.map_err(|e| e.to_string())
}

fn finish(
    g: &Global,
    dir: &Path,
    manifest: &mut RunManifest,
    outputs: &RunOutputs,
    out: &mut dyn Write,
) -> Result<(), String> {
    write_all(dir, &outputs.files)?;
    for (name, bytes) in &outputs.files {
        manifest.record(name, bytes);
    }
    let name = format!("{}.manifest.json", manifest.stem);
    let bytes = io::to_json(manifest).map_err(|e| e.to_string())?;
    io::write_file(&dir.join(&name), &bytes).map_err(|e| e.to_string())?;
    if !g.quiet {
        let _ = writeln!(out, "{}", outputs.summary);
        for (f, _) in &outputs.files {
            let _ = writeln!(out, "  wrote {}", dir.join(f).display());
        }
        let _ = writeln!(out, "  wrote {}", dir.join(&name).display());
    }
    Ok(())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Serialize)]
struct G2Row {
    #[serde(flatten)]
    record: CoincidenceRecord,
    #[serde(flatten)]
    g2: G2Estimate,
    purity: PurityEstimate,
}

fn g2_command(
    g: &Global,
    records: &[CoincidenceRecord],
    out: &mut dyn Write,
) -> Result<i32, String> {
    let mut rows = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let est = g2_estimate(r).map_err(|e| format!("record {}: {e}", i + 1))?;
        rows.push(G2Row {
            record: r.clone(),
            g2: est,
            purity: purity_from_g2(est.g2, est.stderr),
        });
    }
    if !g.quiet {
        for r in &rows {
            let mut line = format!(
                "N1 = {} N2 = {} N12 = {} R = {}   g2 = {:.6} ± {:.6}   P = {:.6} ± {:.6}",
                r.record.n1,
                r.record.n2,
                r.record.n12,
                r.record.pulses,
                r.g2.g2,
                r.g2.stderr,
                r.purity.purity,
                r.purity.stderr
            );
            if r.g2.flagged {
                line.push_str("   [no coincidences: error bar indicative]");
            }
            if r.purity.out_of_range {
                line.push_str("   [P outside 0..1]");
            }
            let _ = writeln!(out, "{line}");
        }
    }
    if g.output.is_some() {
        let dir = output_dir(g)?;
        let name = format!("{}.json", g.stem.as_deref().unwrap_or("g2"));
        io::write_file(
            &dir.join(name),
            &io::to_json(&rows).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(EXIT_OK)
}

fn fit_command(g: &Global, path: &Path, out: &mut dyn Write) -> Result<i32, String> {
    let spectrum =
        parse_spectrum(&read_text(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    let (fit, code): (LorentzianFit, i32) = match fit_lorentzian(&spectrum) {
        Ok(f) => (f, EXIT_OK),
        Err(FitError::NotConverged {
            best,
            residual,
            iterations,
        }) => {
            let _ = writeln!(out, "fit did not converge; best parameters so far:");
            let fit = LorentzianFit {
                params: best,
                residual,
                iterations,
                omega0: ramanpair::units::wavenumber_to_angular(best.center),
                gamma: ramanpair::units::wavenumber_to_angular(best.fwhm),
            };
            (fit, EXIT_UNCONVERGED)
        }
        Err(e) => return Err(format!("{}: {e}", path.display())),
    };
    if !g.quiet {
        let p = &fit.params;
        let _ = writeln!(
            out,
            "shift     {:.6} cm^-1  ({:.6e} rad/s)",
            p.center, fit.omega0
        );
        let _ = writeln!(
            out,
            "linewidth {:.6} cm^-1  ({:.6e} rad/s)",
            p.fwhm, fit.gamma
        );
        let _ = writeln!(out, "amplitude {:.6e}", p.amplitude);
        let _ = writeln!(out, "baseline  {:.6e}", p.baseline);
        let _ = writeln!(
            out,
            "residual  {:.3e} (RMS / peak), {} iterations",
            fit.residual, fit.iterations
        );
    }
    if g.output.is_some() {
        let dir = output_dir(g)?;
        let stem = g.stem.clone().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| format!("{}_fit", s.to_string_lossy()))
                .unwrap_or_else(|| "fit".into())
        });
        io::write_file(
            &dir.join(format!("{stem}.json")),
            &io::to_json(&fit).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(code)
}
