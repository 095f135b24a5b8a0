//! Parameter sweeps (bandwidth, length, angle, focusing, apodization width,
//! joint-intensity maps) and Hanbury-Brown–Twiss count analysis.
//!
//! Axis values are SI inside; each output row also carries the value in the
//! display unit of its sweep (nm of FWHM, mm, degrees).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{MediumSpec, Sellmeier};
use crate::exec::Execution;
use crate::fields::PumpSpec;
use crate::jointamp::{waist_for_fresnel, ContextError, GeometryMode, GeometrySpec, PairContext};
use crate::quadrature::Axis;
use crate::schmidt::{self, PurityOptions, SchmidtError, SchmidtReport};
use crate::units::{angular_to_wavelength, angular_to_wavenumber, angular_width_to_wavelength};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Schmidt(#[from] SchmidtError),
}

/// How the beam waists of a 3D geometry are specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "kebab-case")]
pub enum Focusing {
    /// 1D geometries: no transverse structure.
    None,
    /// Fixed waists w_p, w_f in metres.
    Waists { pump: f64, collection: f64 },
    /// Waists derived from Fresnel numbers 𝓕 = 2z_R/L at the current length.
    Fresnel { pump: f64, collection: f64 },
}

/// Medium, pump and collection geometry: the fixed context of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub medium: MediumSpec,
    pub pump: PumpSpec,
    pub mode: GeometryMode,
    /// Collection angle φ, rad (off-axis only).
    pub angle: f64,
    pub focusing: Focusing,
}

impl Scenario {
    /// 8 mm sapphire, 775 nm pump, forward 1D collection.
    pub fn reference(pump_fwhm: f64) -> Self {
        Scenario {
            medium: MediumSpec::sapphire_reference(),
            pump: PumpSpec::new(775e-9, pump_fwhm),
            mode: GeometryMode::Forward,
            angle: 0.0,
            focusing: Focusing::None,
        }
    }

    pub fn context(&self) -> Result<PairContext, ContextError> {
        let (waist_pump, waist_collection) = match self.focusing {
            Focusing::None => (None, None),
            Focusing::Waists { pump, collection } => (Some(pump), Some(collection)),
            Focusing::Fresnel { pump, collection } => {
                let wp = self.pump.omega0();
                let k_p = self.medium.wavevector(wp)?;
                let k_s = self.medium.wavevector(wp - self.medium.raman_shift)?;
                (
                    Some(waist_for_fresnel(pump, self.medium.length, k_p)),
                    Some(waist_for_fresnel(collection, self.medium.length, k_s)),
                )
            }
        };
        if self.mode.is_3d() && waist_pump.is_none() {
            return Err(ContextError::Invalid(format!(
                "{} geometry needs focusing (waists or Fresnel numbers)",
                self.mode.name()
            )));
        }
        let geometry = GeometrySpec {
            mode: self.mode,
            angle: if self.mode == GeometryMode::OffAxis3d {
                self.angle
            } else {
                0.0
            },
            waist_pump,
            waist_collection,
        };
        PairContext::new(self.medium.clone(), self.pump.clone(), geometry)
    }

    fn with_fwhm(&self, fwhm: f64) -> Self {
        let mut s = self.clone();
        s.pump.intensity_fwhm = fwhm;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Pump intensity FWHM (rad/s); shown in nm at the pump centre.
    Bandwidth,
    /// Interaction length L (m); shown in mm.
    Length,
    /// Collection angle φ (rad); shown in degrees.
    Angle,
    /// 𝓕_p = 𝓕_f (dimensionless).
    Fresnel,
    /// Apodization FWHM of α(z, φ) over φ (rad); no purity evaluation.
    ApodizationFwhm,
    /// Energy and momentum joint intensities over pump FWHM (rad/s).
    JointIntensityGrid,
}

impl SweepKind {
    pub fn axis_name(self) -> &'static str {
        match self {
            SweepKind::Bandwidth | SweepKind::JointIntensityGrid => "pump_fwhm",
            SweepKind::Length => "length",
            SweepKind::Angle | SweepKind::ApodizationFwhm => "angle",
            SweepKind::Fresnel => "fresnel",
        }
    }

    pub fn display_unit(self) -> &'static str {
        match self {
            SweepKind::Bandwidth | SweepKind::JointIntensityGrid => "nm",
            SweepKind::Length => "mm",
            SweepKind::Angle | SweepKind::ApodizationFwhm => "deg",
            SweepKind::Fresnel => "1",
        }
    }

    fn to_display(self, si: f64, scenario: &Scenario) -> f64 {
        match self {
            SweepKind::Bandwidth | SweepKind::JointIntensityGrid => {
                angular_width_to_wavelength(si, scenario.pump.center_wavelength) * 1e9
            }
            SweepKind::Length => si * 1e3,
            SweepKind::Angle | SweepKind::ApodizationFwhm => si.to_degrees(),
            SweepKind::Fresnel => si,
        }
    }
}

/// Size of the joint-intensity maps (Stokes × environment samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JiGridSpec {
    pub n_stokes: usize,
    pub n_env: usize,
}

impl Default for JiGridSpec {
    fn default() -> Self {
        JiGridSpec {
            n_stokes: 121,
            n_env: 121,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Axis values in SI units, strictly monotone.
    pub axis: Vec<f64>,
    pub scenario: Scenario,
    pub options: PurityOptions,
    /// Bandwidth sweeps: also compute the energy-only and momentum-only curves.
    #[serde(default = "yes")]
    pub isolated: bool,
    #[serde(default)]
    pub ji_grid: JiGridSpec,
}

fn yes() -> bool {
    true
}

impl SweepSpec {
    pub fn new(kind: SweepKind, axis: Vec<f64>, scenario: Scenario) -> Self {
        SweepSpec {
            kind,
            axis,
            scenario,
            options: PurityOptions::default(),
            isolated: true,
            ji_grid: JiGridSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.axis.is_empty() {
            return Err(SweepError::Invalid("axis is empty".into()));
        }
        if self.axis.iter().any(|v| !v.is_finite()) {
            return Err(SweepError::Invalid(
                "axis contains a non-finite value".into(),
            ));
        }
        let up = self.axis.windows(2).all(|w| w[1] > w[0]);
        let down = self.axis.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(SweepError::Invalid("axis must be strictly monotone".into()));
        }
        let positive = !matches!(self.kind, SweepKind::Angle | SweepKind::ApodizationFwhm);
        if positive && self.axis.iter().any(|&v| v <= 0.0) {
            return Err(SweepError::Invalid(format!(
                "{} values must be positive",
                self.kind.axis_name()
            )));
        }
        if matches!(self.kind, SweepKind::Angle | SweepKind::ApodizationFwhm) {
            if self.scenario.mode != GeometryMode::OffAxis3d {
                return Err(SweepError::Invalid(
                    "angle sweeps need the off-axis-3d geometry".into(),
                ));
            }
            if self
                .axis
                .iter()
                .any(|v| !(0.0..=std::f64::consts::PI).contains(v))
            {
                return Err(SweepError::Invalid("angles must lie in [0°, 180°]".into()));
            }
        }
        if self.kind == SweepKind::Fresnel && !self.scenario.mode.is_3d() {
            return Err(SweepError::Invalid(
                "Fresnel sweeps need a 3D geometry".into(),
            ));
        }
        if self.kind == SweepKind::ApodizationFwhm && self.scenario.focusing == Focusing::None {
            return Err(SweepError::Invalid(
                "apodization sweeps need focusing".into(),
            ));
        }
        Ok(())
    }

    /// The scenario at one axis value.
    pub fn scenario_at(&self, value: f64) -> Scenario {
        let mut s = self.scenario.clone();
        match self.kind {
            SweepKind::Bandwidth | SweepKind::JointIntensityGrid => s.pump.intensity_fwhm = value,
            SweepKind::Length => s.medium.length = value,
            SweepKind::Angle | SweepKind::ApodizationFwhm => s.angle = value,
            SweepKind::Fresnel => {
                s.focusing = Focusing::Fresnel {
                    pump: value,
                    collection: value,
                }
            }
        }
        s
    }
}

/// Purity result of one mechanism at one axis point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityPoint {
    pub purity: f64,
    pub mode_number: f64,
    pub g2: f64,
    pub converged: bool,
}

impl From<&SchmidtReport> for PurityPoint {
    fn from(r: &SchmidtReport) -> Self {
        PurityPoint {
            purity: r.purity,
            mode_number: r.mode_number,
            g2: r.g2_predicted,
            converged: r.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Axis value, SI.
    pub value: f64,
    /// Axis value in the sweep's display unit.
    pub display: f64,
    pub total: PurityPoint,
    /// Dispersionless medium (linewidth effect only); bandwidth sweeps.
    pub energy_only: Option<PurityPoint>,
    /// Linewidth Γ/10³ (dispersion effect only); bandwidth sweeps.
    pub momentum_only: Option<PurityPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApodizationRow {
    pub angle: f64,
    pub angle_deg: f64,
    /// FWHM of α(·, φ) in z, m.
    pub fwhm: f64,
}

/// One Fig.-2-style panel: both joint intensities and their purities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JiPanel {
    pub pump_fwhm: f64,
    pub pump_fwhm_nm: f64,
    pub energy: JointIntensityGrid,
    pub momentum: JointIntensityGrid,
    pub purity_energy: PurityPoint,
    pub purity_momentum: PurityPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "table", rename_all = "kebab-case")]
pub enum SweepOutput {
    Purity {
        kind: SweepKind,
        rows: Vec<SweepRow>,
    },
    Apodization {
        rows: Vec<ApodizationRow>,
    },
    JointIntensity {
        panels: Vec<JiPanel>,
    },
}

impl SweepOutput {
    /// Every purity point converged (trivially true for tables without purities).
    pub fn all_converged(&self) -> bool {
        let ok = |p: &Option<PurityPoint>| p.map_or(true, |p| p.converged);
        match self {
            SweepOutput::Purity { rows, .. } => rows
                .iter()
                .all(|r| r.total.converged && ok(&r.energy_only) && ok(&r.momentum_only)),
            SweepOutput::Apodization { .. } => true,
            SweepOutput::JointIntensity { panels } => panels
                .iter()
                .all(|p| p.purity_energy.converged && p.purity_momentum.converged),
        }
    }
}

/// Run a sweep. Points are evaluated concurrently through the options'
/// `Execution`; rows come back in axis order. A point that fails to converge
/// is flagged in its row and the sweep carries on.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput, SweepError> {
    spec.validate()?;
    let exec = spec.options.execution;
    match spec.kind {
        SweepKind::ApodizationFwhm => {
            let ctx = spec.scenario.context()?;
            let rows = apodization_fwhm_curve(&ctx, &spec.axis)
                .into_iter()
                .map(|(angle, fwhm)| ApodizationRow {
                    angle,
                    angle_deg: angle.to_degrees(),
                    fwhm,
                })
                .collect();
            Ok(SweepOutput::Apodization { rows })
        }
        SweepKind::JointIntensityGrid => {
            let panels: Result<Vec<JiPanel>, SweepError> = exec
                .map(&spec.axis, |&v| {
                    let ctx = spec.scenario_at(v).context()?;
                    let inner = spec.options.clone().with_execution(Execution::Sequential);
                    Ok(JiPanel {
                        pump_fwhm: v,
                        pump_fwhm_nm: spec.kind.to_display(v, &spec.scenario),
                        energy: joint_intensity_grid(&ctx, JiKind::Energy, spec.ji_grid)?,
                        momentum: joint_intensity_grid(&ctx, JiKind::Momentum, spec.ji_grid)?,
                        purity_energy: (&schmidt::purity_energy(&ctx, &inner)?).into(),
                        purity_momentum: (&schmidt::purity_momentum(&ctx, &inner)?).into(),
                    })
                })
                .into_iter()
                .collect();
            Ok(SweepOutput::JointIntensity { panels: panels? })
        }
        kind => {
            let isolated = spec.isolated && kind == SweepKind::Bandwidth;
            let rows: Result<Vec<SweepRow>, SweepError> = exec
                .map(&spec.axis, |&v| {
                    let scenario = spec.scenario_at(v);
                    // the inner engine stays sequential: the sweep already
                    // spreads points over the pool
                    let inner = spec.options.clone().with_execution(Execution::Sequential);
                    let total = schmidt::purity_total(&scenario.context()?, &inner)?;
                    let (energy_only, momentum_only) = if isolated {
                        let (e, m) = isolated_curves(&scenario, &inner)?;
                        (Some(e), Some(m))
                    } else {
                        (None, None)
                    };
                    Ok(SweepRow {
                        value: v,
                        display: kind.to_display(v, &spec.scenario),
                        total: (&total).into(),
                        energy_only,
                        momentum_only,
                    })
                })
                .into_iter()
                .collect();
            Ok(SweepOutput::Purity { kind, rows: rows? })
        }
    }
}

/// Limit surrogates for the single-mechanism curves, both through the total
/// purity engine: a dispersionless medium (n fixed at its pump-centre value)
/// leaves only the linewidth effect; Γ → Γ/10³ leaves only dispersion.
pub fn isolated_curves(
    scenario: &Scenario,
    opts: &PurityOptions,
) -> Result<(PurityPoint, PurityPoint), SweepError> {
    let n = scenario
        .medium
        .refractive_index(scenario.pump.omega0())
        .map_err(ContextError::from)?;
    let mut flat = scenario.clone();
    flat.medium = flat.medium.with_sellmeier(Sellmeier::constant_index(n));
    let energy = schmidt::purity_total(&flat.context()?, opts)?;
    let mut narrow = scenario.clone();
    narrow.medium.linewidth *= 1e-3;
    let momentum = schmidt::purity_total(&narrow.context()?, opts)?;
    Ok(((&energy).into(), (&momentum).into()))
}

/// Bandwidth sweep at fixed scenario; a convenience over [`run_sweep`].
pub fn bandwidth_sweep(
    scenario: &Scenario,
    fwhms: &[f64],
    opts: &PurityOptions,
) -> Result<Vec<SweepRow>, SweepError> {
    let mut spec = SweepSpec::new(
        SweepKind::Bandwidth,
        fwhms.to_vec(),
        scenario.with_fwhm(fwhms[0]),
    );
    spec.options = opts.clone();
    spec.isolated = false;
    match run_sweep(&spec)? {
        SweepOutput::Purity { rows, .. } => Ok(rows),
        _ => unreachable!("bandwidth sweeps produce purity rows"),
    }
}

/// FWHM in z of α(z, φ) at each φ.
pub fn apodization_fwhm_curve(ctx: &PairContext, phis: &[f64]) -> Vec<(f64, f64)> {
    phis.iter()
        .map(|&phi| (phi, ctx.apodization_fwhm(phi)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JiKind {
    Energy,
    Momentum,
}

/// A joint intensity on a uniform (ν, env) grid, unit peak.
///
/// `stokes` are Stokes detunings ν (rad/s) and `env` the environment offsets
/// (δ in rad/s for energy, κ in 1/m for momentum); the display axes are λ_s
/// in nm and either ν̃_CE in cm⁻¹ or 2π/k_CE in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointIntensityGrid {
    pub kind: JiKind,
    pub stokes: Vec<f64>,
    pub env: Vec<f64>,
    pub stokes_wavelength_nm: Vec<f64>,
    pub env_display: Vec<f64>,
    pub env_display_unit: String,
    /// Row-major, `stokes.len()` rows of `env.len()` values.
    pub intensity: Vec<f64>,
}

impl JointIntensityGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.intensity[i * self.env.len() + j]
    }

    /// Index of the largest entry as (row, column).
    pub fn argmax(&self) -> (usize, usize) {
        let k =
            self.intensity
                .iter()
                .enumerate()
                .fold(0, |b, (k, &v)| if v > self.intensity[b] { k } else { b });
        (k / self.env.len(), k % self.env.len())
    }
}

/// |f_energy|² over (λ_s, ν̃_CE) or |f_momentum|² over (λ_s, 2π/k_CE).
///
/// Windows: ν over ±(Γ + 2σ)·2.5 for energy maps; momentum maps span the
/// Stokes band ±3σ and the κ band the dispersion ridge sweeps plus 6π/L.
pub fn joint_intensity_grid(
    ctx: &PairContext,
    kind: JiKind,
    grid: JiGridSpec,
) -> Result<JointIntensityGrid, SweepError> {
    if grid.n_stokes < 2 || grid.n_env < 2 {
        return Err(SweepError::Invalid(
            "joint-intensity grids need at least 2×2 samples".into(),
        ));
    }
    let sigma = ctx.pump.sigma();
    let gamma = ctx.medium.linewidth;
    let l = ctx.length();
    let (w_nu, w_env) = match kind {
        JiKind::Energy => {
            let w = 2.5 * (gamma + 2.0 * sigma);
            (w, w)
        }
        JiKind::Momentum => {
            let w = 3.0 * sigma;
            (
                w,
                (ctx.beta_p - ctx.beta_s).abs() * w + 6.0 * std::f64::consts::PI / l,
            )
        }
    };
    let nu = Axis::trapezoid(grid.n_stokes, w_nu).values;
    let env = Axis::trapezoid(grid.n_env, w_env).values;
    let w0 = ctx.medium.raman_shift;
    let mut intensity = Vec::with_capacity(nu.len() * env.len());
    for &v in &nu {
        let ws = ctx.omega_s0 + v;
        for &e in &env {
            let f = match kind {
                JiKind::Energy => ctx.f_energy(ws, w0 + e),
                JiKind::Momentum => ctx.f_momentum(ws, ctx.k_ce0 + e)?,
            };
            intensity.push(f * f);
        }
    }
    let peak = intensity.iter().fold(0.0f64, |m, &x| m.max(x));
    if !(peak > 0.0) {
        return Err(SweepError::Invalid(
            "joint intensity vanishes on the grid".into(),
        ));
    }
    intensity.iter_mut().for_each(|x| *x /= peak);
    let (env_display, unit) = match kind {
        JiKind::Energy => (
            env.iter().map(|&e| angular_to_wavenumber(w0 + e)).collect(),
            "cm^-1",
        ),
        JiKind::Momentum => (
            env.iter()
                .map(|&k| 2.0 * std::f64::consts::PI / (ctx.k_ce0 + k) * 1e6)
                .collect(),
            "um",
        ),
    };
    Ok(JointIntensityGrid {
        kind,
        stokes_wavelength_nm: nu
            .iter()
            .map(|&v| angular_to_wavelength(ctx.omega_s0 + v) * 1e9)
            .collect(),
        stokes: nu,
        env,
        env_display,
        env_display_unit: unit.into(),
        intensity,
    })
}

/// Raw HBT counts: singles on each detector, coincidences, pulses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub n1: u64,
    pub n2: u64,
    pub n12: u64,
    pub pulses: u64,
    /// Free-form integration metadata (duration, run label, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CoincidenceRecord {
    pub fn new(n1: u64, n2: u64, n12: u64, pulses: u64) -> Self {
        CoincidenceRecord {
            n1,
            n2,
            n12,
            pulses,
            note: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountingError {
    #[error("g² undefined: no singles on detector {0}")]
    NoSingles(u8),
    #[error("inconsistent counts: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub g2: f64,
    pub stderr: f64,
    /// N₁₂ = 0: the error bar is that of a single coincidence
    /// (R/(N₁N₂)·√(1 + 1/N₁ + 1/N₂)) and only indicative.
    pub flagged: bool,
}

/// g² = N₁₂R/(N₁N₂) with first-order Poisson error g²·√(1/N₁₂ + 1/N₁ + 1/N₂).
///
/// The ratio is reduced exactly in integers before the one division, so a
/// common rescaling of all four counts gives the same bits.
pub fn g2_estimate(rec: &CoincidenceRecord) -> Result<G2Estimate, CountingError> {
    if rec.n1 == 0 {
        return Err(CountingError::NoSingles(1));
    }
    if rec.n2 == 0 {
        return Err(CountingError::NoSingles(2));
    }
    if rec.pulses == 0 {
        return Err(CountingError::Inconsistent(
            "pulse count R must be at least 1".into(),
        ));
    }
    let num = rec.n12 as u128 * rec.pulses as u128;
    let den = rec.n1 as u128 * rec.n2 as u128;
    let g = gcd(num, den).max(1);
    let g2 = (num / g) as f64 / (den / g) as f64;
    let flagged = rec.n12 == 0;
    let inv12 = if flagged { 1.0 } else { 1.0 / rec.n12 as f64 };
    let rel = (inv12 + 1.0 / rec.n1 as f64 + 1.0 / rec.n2 as f64).sqrt();
    // with no coincidences g² = 0 would zero the bar; scale it by the
    // one-coincidence value R/(N₁N₂) instead
    let scale = if flagged {
        rec.pulses as f64 / den as f64
    } else {
        g2
    };
    Ok(G2Estimate {
        g2,
        stderr: scale * rel,
        flagged,
    })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimate {
    pub purity: f64,
    pub stderr: f64,
    /// P outside [0, 1]; kept as measured (noise can do this).
    pub out_of_range: bool,
}

/// P = g² − 1 with the same error bar.
pub fn purity_from_g2(g2: f64, stderr: f64) -> PurityEstimate {
    let purity = g2 - 1.0;
    PurityEstimate {
        purity,
        stderr,
        out_of_range: !(0.0..=1.0).contains(&purity),
    }
}

/// Seeded single-mode thermal source: geometric photon number per pulse with
/// mean `mean_photons`, split 50/50 binomially onto two unit-efficiency
/// photon-counting detectors. N₁, N₂ are photon counts and N₁₂ the sum over
/// pulses of n₁n₂, so E[N₁₂]R/(E[N₁]E[N₂]) = 2 exactly.
pub fn thermal_coincidences(seed: u64, pulses: u64, mean_photons: f64) -> CoincidenceRecord {
    assert!(mean_photons > 0.0, "mean photon number must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // failures before the first success: P(n) = μⁿ/(1+μ)ⁿ⁺¹
    let photons = Geometric::new(1.0 / (1.0 + mean_photons)).expect("0 < p ≤ 1");
    let (mut n1, mut n2, mut n12) = (0u64, 0u64, 0u64);
    for _ in 0..pulses {
        let n = photons.sample(&mut rng);
        if n == 0 {
            continue;
        }
        let a = Binomial::new(n, 0.5)
            .expect("valid binomial")
            .sample(&mut rng);
        let b = n - a;
        n1 += a;
        n2 += b;
        n12 += a * b;
    }
    CoincidenceRecord {
        n1,
        n2,
        n12,
        pulses,
        note: Some(format!(
            "thermal Monte Carlo, seed {seed}, mean {mean_photons}"
        )),
    }
}
