//! Discretized Schmidt decomposition and Stokes-photon purity.
//!
//! Three routes, all normalized against the exact continuum norm of the joint
//! amplitude (so a truncated Lorentzian tail shows up as `tail = 1 − Σλ`
//! instead of being renormalized into the kept modes):
//!
//! - energy / momentum kernels: singular values of the weighted kernel matrix;
//! - total purity, 1D: the z-integral of every reduced-density-matrix element
//!   is done in closed form, ∫e^{iXz}dz = 2 sin(XL/2)/X, so the backward
//!   geometry's ~10⁴-rad phase swing costs nothing;
//! - total purity, 3D: the same with χ(X) = ∫α(z)cos(Xz)dz tabulated by
//!   Filon quadrature and interpolated.
//!
//! ρ is diagonalized densely up to `dense_limit` rows; beyond that only
//! P = Tr ρ² is accumulated (row by row, without storing ρ).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::DispersionError;
use crate::exec::Execution;
use crate::jointamp::{ContextError, GeometryMode, PairContext};
use crate::quadrature::{filon_cos, gauss_legendre_on, lineshape_weights, Axis, LineWeighting};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchmidtError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("grid: {0}")]
    Grid(String),
    #[error("kernel matrix has no weight (all entries vanish)")]
    Degenerate,
}

impl From<DispersionError> for SchmidtError {
    fn from(e: DispersionError) -> Self {
        SchmidtError::Context(ContextError::Dispersion(e))
    }
}

/// Which purity is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    /// Energy correlations only: ℰ(ω_s+Ω)·g(Ω).
    Energy,
    /// Momentum correlations only, at fixed Ω₀.
    Momentum,
    /// Full kernel of the context's geometry.
    Total,
}

/// How the z-integral of the total kernel is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZMethod {
    /// Closed form (1D) or Filon-tabulated χ(X) (3D), per matrix element.
    #[default]
    Analytic,
    /// Explicit Gauss–Legendre nodes in z; the environment index is (δ, z).
    /// Only practical for small grids and slowly varying phases.
    Quadrature,
}

/// What was actually used for the z-integral (recorded in reports).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZIntegration {
    NotApplicable,
    ClosedFormSinc,
    FilonTable,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    SingularValues,
    DenseEigen,
    /// Only Tr ρ² was accumulated; the λ spectrum is not available.
    TraceOnly,
}

/// Requested grid. Windows default to 5·(Γ + 2σ_pump).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub n_nu: usize,
    pub n_delta: usize,
    pub n_z: usize,
    pub nu_half_width: Option<f64>,
    pub delta_half_width: Option<f64>,
    /// Raise N_ν (phase Nyquist) and N_δ (h_δ ≤ Γ/4) above the counts given.
    pub adaptive: bool,
    /// Force a δ rule; `None` picks trapezoid when h_δ ≤ Γ/4 is affordable.
    pub line_weighting: Option<LineWeighting>,
    pub z_method: ZMethod,
    pub dense_limit: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_nu: 256,
            n_delta: 256,
            n_z: 48,
            nu_half_width: None,
            delta_half_width: None,
            adaptive: true,
            line_weighting: None,
            z_method: ZMethod::Analytic,
            dense_limit: 1024,
        }
    }
}

/// Refinement budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineSpec {
    /// Relative change in P accepted between successive grids.
    pub tolerance: f64,
    /// Maximum number of refinement steps after the initial grid.
    pub max_steps: usize,
    pub max_n_nu: usize,
    pub max_n_delta: usize,
    pub max_n_z: usize,
    /// Also require a window step below tolerance, not just the latest step.
    pub check_window: bool,
}

impl Default for RefineSpec {
    fn default() -> Self {
        RefineSpec {
            tolerance: 1e-3,
            max_steps: 6,
            max_n_nu: 16_384,
            max_n_delta: 4096,
            max_n_z: 65_537,
            check_window: false,
        }
    }
}

/// The grid a purity was actually computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub n_nu: usize,
    /// δ points (energy/total); 1 for momentum, whose κ-integral is exact.
    pub n_env: usize,
    pub n_z: usize,
    pub nu_half_width: f64,
    pub env_half_width: f64,
    pub z_half_width: f64,
    pub line_weighting: LineWeighting,
    pub z_integration: ZIntegration,
    pub spectrum_method: SpectrumMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Initial,
    Resolution,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStep {
    pub kind: StepKind,
    pub n_nu: usize,
    pub n_env: usize,
    pub n_z: usize,
    pub nu_half_width: f64,
    pub purity: f64,
    /// |ΔP|/P against the previous step.
    pub relative_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtReport {
    pub mechanism: Mechanism,
    pub geometry: GeometryMode,
    /// λ_i, descending, relative to the exact norm; `None` when only Tr ρ²
    /// was computed.
    pub schmidt_coefficients: Option<Vec<f64>>,
    /// 1 − Σλ: norm outside the windows (mostly Lorentzian tail).
    pub tail: f64,
    pub purity: f64,
    pub mode_number: f64,
    pub g2_predicted: f64,
    pub grid: QuadratureGrid,
    pub converged: bool,
    pub refinement_history: Vec<RefinementStep>,
}

/// Grid, refinement and execution settings for one purity computation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PurityOptions {
    pub grid: GridSpec,
    pub refine: RefineSpec,
    pub execution: Execution,
}

impl PurityOptions {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.refine.tolerance = tol;
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.execution = exec;
        self
    }
}

pub fn purity_energy(
    ctx: &PairContext,
    opts: &PurityOptions,
) -> Result<SchmidtReport, SchmidtError> {
    refine_until_converged(ctx, Mechanism::Energy, opts)
}

pub fn purity_momentum(
    ctx: &PairContext,
    opts: &PurityOptions,
) -> Result<SchmidtReport, SchmidtError> {
    refine_until_converged(ctx, Mechanism::Momentum, opts)
}

pub fn purity_total(
    ctx: &PairContext,
    opts: &PurityOptions,
) -> Result<SchmidtReport, SchmidtError> {
    refine_until_converged(ctx, Mechanism::Total, opts)
}

/// Alternate resolution steps (N_ν, N_δ ×2, N_z ×1.5) and window steps
/// (W ×1.5). Converged once successive P values differ by less than the
/// tolerance (with `check_window`, once the latest step of each kind did);
/// stops unconverged when the budget runs out.
pub fn refine_until_converged(
    ctx: &PairContext,
    mechanism: Mechanism,
    opts: &PurityOptions,
) -> Result<SchmidtReport, SchmidtError> {
    let tol = opts.refine.tolerance;
    if !(tol > 0.0) {
        return Err(SchmidtError::Grid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut level = Level::default();
    let grid = resolve(ctx, mechanism, &opts.grid, level)?;
    let mut eval = evaluate(ctx, mechanism, &grid, opts.execution)?;
    let mut history = vec![step(StepKind::Initial, &grid, eval.purity, None)];
    let mut last_res: Option<f64> = None;
    let mut last_win: Option<f64> = None;
    let mut current = grid;
    let mut converged = false;
    for k in 0..opts.refine.max_steps {
        let kind = if k % 2 == 0 {
            StepKind::Resolution
        } else {
            StepKind::Window
        };
        let mut next = level;
        match kind {
            StepKind::Resolution => next.resolution += 1,
            _ => next.window += 1,
        }
        let g = resolve(ctx, mechanism, &opts.grid, next)?;
        if g.n_nu > opts.refine.max_n_nu
            || g.n_env > opts.refine.max_n_delta
            || g.n_z > opts.refine.max_n_z
        {
            break;
        }
        let e = evaluate(ctx, mechanism, &g, opts.execution)?;
        let change = (e.purity - eval.purity).abs() / e.purity;
        match kind {
            StepKind::Resolution => last_res = Some(change),
            _ => last_win = Some(change),
        }
        history.push(step(kind, &g, e.purity, Some(change)));
        level = next;
        eval = e;
        current = g;
        let done = if opts.refine.check_window {
            last_res.is_some_and(|c| c < tol) && last_win.is_some_and(|c| c < tol)
        } else {
            change < tol
        };
        if done {
            converged = true;
            break;
        }
    }
    Ok(report(ctx, mechanism, current, eval, converged, history))
}

/// One purity evaluation on one resolved grid (no refinement).
pub fn evaluate_once(
    ctx: &PairContext,
    mechanism: Mechanism,
    grid: &GridSpec,
    exec: Execution,
) -> Result<SchmidtReport, SchmidtError> {
    let g = resolve(ctx, mechanism, grid, Level::default())?;
    let e = evaluate(ctx, mechanism, &g, exec)?;
    let h = vec![step(StepKind::Initial, &g, e.purity, None)];
    Ok(report(ctx, mechanism, g, e, false, h))
}

fn step(
    kind: StepKind,
    g: &QuadratureGrid,
    purity: f64,
    relative_change: Option<f64>,
) -> RefinementStep {
    RefinementStep {
        kind,
        n_nu: g.n_nu,
        n_env: g.n_env,
        n_z: g.n_z,
        nu_half_width: g.nu_half_width,
        purity,
        relative_change,
    }
}

fn report(
    ctx: &PairContext,
    mechanism: Mechanism,
    grid: QuadratureGrid,
    e: Eval,
    converged: bool,
    refinement_history: Vec<RefinementStep>,
) -> SchmidtReport {
    SchmidtReport {
        mechanism,
        geometry: ctx.geometry.mode,
        schmidt_coefficients: e.spectrum,
        tail: e.tail,
        purity: e.purity,
        mode_number: 1.0 / e.purity,
        g2_predicted: 1.0 + e.purity,
        grid,
        converged,
        refinement_history,
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Level {
    resolution: u32,
    window: u32,
}

/// Default half-width 5·(Γ + 2σ).
pub fn default_window(ctx: &PairContext) -> f64 {
    5.0 * (ctx.medium.linewidth + 2.0 * ctx.pump.sigma())
}

/// |dΦ/dν| for the geometry: the ν-rate of the z-phase.
fn phase_slope(ctx: &PairContext) -> f64 {
    match ctx.geometry.mode {
        GeometryMode::Forward | GeometryMode::Collinear3d => (ctx.beta_p - ctx.beta_s).abs(),
        GeometryMode::Backward => ctx.beta_p + ctx.beta_s,
        GeometryMode::OffAxis3d => (ctx.beta_p - ctx.geometry.angle.cos() * ctx.beta_s).abs(),
    }
}

/// Half-extent in z over which the apodization matters: L/2, or less where
/// α has fallen below 10⁻¹⁵ of its peak.
pub fn z_half_width(ctx: &PairContext) -> f64 {
    let half = 0.5 * ctx.length();
    if ctx.geometry.mode != GeometryMode::OffAxis3d {
        return half;
    }
    let phi = ctx.geometry.angle;
    let floor = ctx.log_alpha_offaxis(0.0, phi) + (1e-15f64).ln();
    if ctx.log_alpha_offaxis(half, phi) >= floor {
        return half;
    }
    let (mut lo, mut hi) = (0.0, half);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ctx.log_alpha_offaxis(mid, phi) >= floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn odd(n: usize) -> usize {
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

fn resolve(
    ctx: &PairContext,
    mechanism: Mechanism,
    spec: &GridSpec,
    level: Level,
) -> Result<QuadratureGrid, SchmidtError> {
    if spec.n_nu < 2 || spec.n_delta < 2 || spec.n_z < 1 {
        return Err(SchmidtError::Grid(format!(
            "need at least 2 ν and δ points and one z node (got {}×{}×{})",
            spec.n_nu, spec.n_delta, spec.n_z
        )));
    }
    let scale = 2usize.pow(level.resolution);
    let zscale = 1.5f64.powi(level.resolution as i32);
    let wscale = 1.5f64.powi(level.window as i32);
    let w_nu = spec.nu_half_width.unwrap_or_else(|| default_window(ctx)) * wscale;
    let w_delta = spec.delta_half_width.unwrap_or_else(|| default_window(ctx)) * wscale;
    if !(w_nu > 0.0 && w_delta > 0.0) {
        return Err(SchmidtError::Grid(
            "window half-widths must be positive".into(),
        ));
    }
    let l = ctx.length();
    let is_3d = ctx.geometry.mode.is_3d();
    let zh = match mechanism {
        Mechanism::Total if is_3d => z_half_width(ctx),
        _ => 0.5 * l,
    };

    let mut n_nu = spec.n_nu;
    if spec.adaptive && mechanism == Mechanism::Total {
        let d = phase_slope(ctx);
        if d > 0.0 {
            // 1.25× the Nyquist rate of the z-phase; the trapezoid rule is
            // spectrally accurate beyond it
            let h_max = 0.8 * PI / (d * zh);
            n_nu = n_nu.max((2.0 * w_nu / h_max).ceil() as usize + 1);
        }
    }
    if spec.adaptive && mechanism == Mechanism::Momentum {
        // the sinc ridge moves by (β_p−β_s)·h_ν per ν step; keep that below π/L
        let d = (ctx.beta_p - ctx.beta_s).abs();
        if d > 0.0 {
            let h_max = PI / (d * l);
            n_nu = n_nu.max((2.0 * w_nu / h_max).ceil() as usize + 1);
        }
    }
    n_nu *= scale;

    let (n_env, env_half, weighting) = match mechanism {
        // the κ-integral is exact; one environment column per ν row
        Mechanism::Momentum => (1, 0.0, LineWeighting::Trapezoid),
        _ => {
            let gamma = ctx.medium.linewidth;
            let trap_n = if spec.adaptive {
                spec.n_delta
                    .max((2.0 * w_delta / (0.25 * gamma)).ceil() as usize + 1)
            } else {
                spec.n_delta
            };
            match spec.line_weighting {
                Some(LineWeighting::Trapezoid) => {
                    (trap_n * scale, w_delta, LineWeighting::Trapezoid)
                }
                Some(LineWeighting::LorentzianProduct) => (
                    spec.n_delta * scale,
                    w_delta,
                    LineWeighting::LorentzianProduct,
                ),
                None => {
                    if trap_n * scale <= RefineSpec::default().max_n_delta {
                        (trap_n * scale, w_delta, LineWeighting::Trapezoid)
                    } else {
                        (
                            spec.n_delta * scale,
                            w_delta,
                            LineWeighting::LorentzianProduct,
                        )
                    }
                }
            }
        }
    };

    let (n_z, z_integration) = match mechanism {
        Mechanism::Total => match (spec.z_method, is_3d) {
            (ZMethod::Analytic, false) => (0, ZIntegration::ClosedFormSinc),
            (ZMethod::Analytic, true) => {
                let fwhm = ctx.apodization_fwhm(ctx.geometry.angle);
                let resolve_shape = (32.0 * zh / fwhm).ceil() as usize;
                let n = ((spec.n_z.max(resolve_shape) as f64) * zscale).ceil() as usize;
                (odd(n.max(3)), ZIntegration::FilonTable)
            }
            (ZMethod::Quadrature, _) => (
                ((spec.n_z as f64) * zscale).ceil() as usize,
                ZIntegration::GaussLegendre,
            ),
        },
        Mechanism::Momentum => (0, ZIntegration::ClosedFormSinc),
        Mechanism::Energy => (0, ZIntegration::NotApplicable),
    };

    let spectrum_method = match (mechanism, z_integration) {
        (
            Mechanism::Total | Mechanism::Momentum,
            ZIntegration::ClosedFormSinc | ZIntegration::FilonTable,
        ) => {
            if n_nu <= spec.dense_limit {
                SpectrumMethod::DenseEigen
            } else {
                SpectrumMethod::TraceOnly
            }
        }
        _ => SpectrumMethod::SingularValues,
    };

    Ok(QuadratureGrid {
        n_nu,
        n_env,
        n_z,
        nu_half_width: w_nu,
        env_half_width: env_half,
        z_half_width: zh,
        line_weighting: weighting,
        z_integration,
        spectrum_method,
    })
}

struct Eval {
    purity: f64,
    spectrum: Option<Vec<f64>>,
    tail: f64,
}

fn evaluate(
    ctx: &PairContext,
    mechanism: Mechanism,
    g: &QuadratureGrid,
    exec: Execution,
) -> Result<Eval, SchmidtError> {
    match mechanism {
        Mechanism::Energy => eval_energy(ctx, g),
        Mechanism::Momentum => eval_momentum(ctx, g, exec),
        Mechanism::Total => match g.z_integration {
            ZIntegration::GaussLegendre => eval_total_quadrature(ctx, g),
            _ => eval_total_gram(ctx, g, exec),
        },
    }
}

/// λ from squared singular values of a real matrix, divided by `norm`.
fn spectrum_from_real(m: DMatrix<f64>, norm: f64) -> Result<Eval, SchmidtError> {
    let sv = m.singular_values();
    let lambdas: Vec<f64> = sv.iter().map(|s| s * s / norm).collect();
    finish_spectrum(lambdas)
}

fn finish_spectrum(mut lambdas: Vec<f64>) -> Result<Eval, SchmidtError> {
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let top = lambdas.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(SchmidtError::Degenerate);
    }
    lambdas.retain(|&l| l >= 1e-14 * top);
    let total: f64 = lambdas.iter().sum();
    let purity = lambdas.iter().map(|l| l * l).sum();
    Ok(Eval {
        purity,
        spectrum: Some(lambdas),
        tail: 1.0 - total,
    })
}

fn axes(ctx: &PairContext, g: &QuadratureGrid) -> (Axis, Axis, Vec<f64>) {
    let nu = Axis::trapezoid(g.n_nu, g.nu_half_width);
    let delta = Axis::trapezoid(g.n_env, g.env_half_width);
    let ls = crate::fields::Lineshape::new(0.0, ctx.medium.linewidth);
    let wd = lineshape_weights(&delta, &ls, g.line_weighting);
    (nu, delta, wd)
}

/// c_ij = √(w_i W_j)·ℰ(ν_i+δ_j), row-major (i over ν).
fn amplitudes(ctx: &PairContext, nu: &Axis, delta: &Axis, wd: &[f64]) -> Vec<f64> {
    let nd = delta.len();
    let mut c = vec![0.0; nu.len() * nd];
    for (i, (&v, &wv)) in nu.values.iter().zip(&nu.weights).enumerate() {
        for j in 0..nd {
            c[i * nd + j] =
                (wv * wd[j]).sqrt() * ctx.pump.amplitude_at_detuning(v + delta.values[j]);
        }
    }
    c
}

fn eval_energy(ctx: &PairContext, g: &QuadratureGrid) -> Result<Eval, SchmidtError> {
    let (nu, delta, wd) = axes(ctx, g);
    let c = amplitudes(ctx, &nu, &delta, &wd);
    let m = DMatrix::from_row_slice(nu.len(), delta.len(), &c);
    spectrum_from_real(m, 1.0)
}

/// Momentum kernel with the κ-integral done exactly:
/// ∫sinc((L/2)(a−κ))·sinc((L/2)(b−κ))dκ = (2π/L)·sinc((L/2)(a−b)),
/// i.e. the uniform-χ Gram with a single environment column per ν row.
fn eval_momentum(
    ctx: &PairContext,
    g: &QuadratureGrid,
    exec: Execution,
) -> Result<Eval, SchmidtError> {
    let nu = Axis::trapezoid(g.n_nu, g.nu_half_width);
    let w0 = ctx.medium.raman_shift;
    let mut c = Vec::with_capacity(nu.len());
    let mut p = Vec::with_capacity(nu.len());
    for (&v, &wv) in nu.values.iter().zip(&nu.weights) {
        let ws = ctx.omega_s0 + v;
        c.push(wv.sqrt() * ctx.pump.amplitude_at_detuning(v));
        p.push(ctx.medium.wavevector(ws + w0)? - ctx.medium.wavevector(ws)? - ctx.k_ce0);
    }
    gram_purity(
        &c,
        &p,
        1,
        &Chi::Uniform { l: ctx.length() },
        g.spectrum_method,
        exec,
    )
}

/// κ-grid route: singular values of M[i,j] = √(w_i w_j)·f_momentum(ν_i, κ_j),
/// normalized to unit trace. Kept as an independent check of [`eval_momentum`].
pub fn momentum_purity_on_kappa_grid(
    ctx: &PairContext,
    n_nu: usize,
    nu_half_width: f64,
    n_kappa: usize,
    kappa_half_width: f64,
) -> Result<f64, SchmidtError> {
    let nu = Axis::trapezoid(n_nu, nu_half_width);
    let kappa = Axis::trapezoid(n_kappa, kappa_half_width);
    let mut m = DMatrix::zeros(nu.len(), kappa.len());
    for (i, (&v, &wv)) in nu.values.iter().zip(&nu.weights).enumerate() {
        for (j, (&k, &wk)) in kappa.values.iter().zip(&kappa.weights).enumerate() {
            m[(i, j)] = Complex64::new(
                (wv * wk).sqrt() * ctx.f_momentum(ctx.omega_s0 + v, ctx.k_ce0 + k)?,
                0.0,
            );
        }
    }
    Ok(purity_from_matrix(&m))
}

/// Φ_ij: the z-phase rate of the total kernel, minus the mid-row value per column.
fn phases(ctx: &PairContext, nu: &Axis, delta: &Axis) -> Result<Vec<f64>, SchmidtError> {
    let (nn, nd) = (nu.len(), delta.len());
    let sign = match ctx.geometry.mode {
        GeometryMode::Forward | GeometryMode::Collinear3d => -1.0,
        GeometryMode::Backward => 1.0,
        GeometryMode::OffAxis3d => -ctx.geometry.angle.cos(),
    };
    let mut ks = Vec::with_capacity(nn);
    for &v in &nu.values {
        ks.push(ctx.medium.wavevector(ctx.omega_s0 + v)?);
    }
    let mut p = vec![0.0; nn * nd];
    for i in 0..nn {
        for j in 0..nd {
            let kp = ctx
                .medium
                .wavevector(ctx.omega_p0 + nu.values[i] + delta.values[j])?;
            p[i * nd + j] = kp + sign * ks[i];
        }
    }
    let mid = nn / 2;
    let reference: Vec<f64> = p[mid * nd..(mid + 1) * nd].to_vec();
    for i in 0..nn {
        for j in 0..nd {
            p[i * nd + j] -= reference[j];
        }
    }
    Ok(p)
}

/// The z-transform χ(X) = ∫a(z)e^{iXz}dz of the apodization (real, even).
enum Chi {
    /// a ≡ 1 on [−L/2, L/2]: χ = 2 sin(XL/2)/X.
    Uniform { l: f64 },
    /// Tabulated on X = k·h; cell k holds the cubic (in the fractional
    /// offset) through the four samples k−1..k+2, mirrored at X = 0.
    Table {
        inv_h: f64,
        at_zero: f64,
        cells: Vec<[f64; 4]>,
    },
}

impl Chi {
    fn at_zero(&self) -> f64 {
        match self {
            Chi::Uniform { l } => *l,
            Chi::Table { at_zero, .. } => *at_zero,
        }
    }
}

fn build_chi_table(ctx: &PairContext, g: &QuadratureGrid, x_max: f64) -> Chi {
    let zh = g.z_half_width;
    let n = g.n_z;
    let samples: Vec<f64> = (0..n)
        .map(|k| ctx.apodization(zh * k as f64 / (n - 1) as f64))
        .collect();
    let h = PI / (64.0 * zh);
    let n_tab = (x_max / h).ceil() as usize + 4;
    let mut values = Vec::with_capacity(n_tab + 1);
    for k in 0..n_tab {
        values.push(2.0 * filon_cos(&samples, 0.0, zh, k as f64 * h));
    }
    values.insert(0, values[1]);
    // Lagrange cubic on nodes −1, 0, 1, 2 rewritten as a polynomial in f
    let cells = values
        .windows(4)
        .map(|v| {
            let (m, a, b, c) = (v[0], v[1], v[2], v[3]);
            [
                a,
                -m / 3.0 - a / 2.0 + b - c / 6.0,
                m / 2.0 - a + b / 2.0,
                -m / 6.0 + a / 2.0 - b / 2.0 + c / 6.0,
            ]
        })
        .collect();
    Chi::Table {
        inv_h: 1.0 / h,
        at_zero: values[1],
        cells,
    }
}

/// Σ_j c_aj c_bj χ(Φ_aj − Φ_bj) for the uniform (1D) χ, using sin/cos of
/// Φ·L/2 so the inner loop has no transcendental calls. Branch-free so it
/// vectorizes.
#[inline(always)]
fn row_pair_uniform_body(l: f64, a: RowView, b: RowView) -> f64 {
    let half = 0.5 * l;
    let mut acc = 0.0;
    let it =
        a.c.iter()
            .zip(a.p)
            .zip(a.s)
            .zip(a.o)
            .zip(b.c.iter().zip(b.p).zip(b.s).zip(b.o));
    for ((((&ca, &pa), &sa), &oa), (((&cb, &pb), &sb), &ob)) in it {
        let x = pa - pb;
        let y = half * x;
        let y2 = y * y;
        let small = y.abs() < 1e-3;
        let series = l * (1.0 - y2 / 6.0 * (1.0 - y2 / 20.0));
        let exact = 2.0 * (sa * ob - oa * sb) / if small { 1.0 } else { x };
        acc += ca * cb * if small { series } else { exact };
    }
    acc
}

#[inline(always)]
fn row_pair_table_body(inv_h: f64, cells: &[[f64; 4]], a: RowView, b: RowView) -> f64 {
    let mut acc = 0.0;
    for ((&ca, &pa), (&cb, &pb)) in a.c.iter().zip(a.p).zip(b.c.iter().zip(b.p)) {
        let t = (pa - pb).abs() * inv_h;
        let k = t as usize;
        let f = t - k as f64;
        let q = &cells[k];
        let chi = ((q[3] * f + q[2]) * f + q[1]) * f + q[0];
        acc += ca * cb * chi;
    }
    acc
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn row_pair_uniform_avx2(l: f64, a: RowView, b: RowView) -> f64 {
    row_pair_uniform_body(l, a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn row_pair_table_avx2(inv_h: f64, cells: &[[f64; 4]], a: RowView, b: RowView) -> f64 {
    row_pair_table_body(inv_h, cells, a, b)
}

fn has_avx2() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// One row's slices restricted to a column range.
#[derive(Clone, Copy)]
struct RowView<'a> {
    c: &'a [f64],
    p: &'a [f64],
    s: &'a [f64],
    o: &'a [f64],
}

fn eval_total_gram(
    ctx: &PairContext,
    g: &QuadratureGrid,
    exec: Execution,
) -> Result<Eval, SchmidtError> {
    let (nu, delta, wd) = axes(ctx, g);
    let c = amplitudes(ctx, &nu, &delta, &wd);
    let p = phases(ctx, &nu, &delta)?;
    let (nn, nd) = (nu.len(), delta.len());
    let chi = match g.z_integration {
        ZIntegration::FilonTable => {
            let mut x_max: f64 = 0.0;
            for j in 0..nd {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..nn {
                    lo = lo.min(p[i * nd + j]);
                    hi = hi.max(p[i * nd + j]);
                }
                x_max = x_max.max(hi - lo);
            }
            build_chi_table(ctx, g, x_max)
        }
        _ => Chi::Uniform { l: ctx.length() },
    };
    gram_purity(&c, &p, nd, &chi, g.spectrum_method, exec)
}

/// ρ_ab = Σ_j c_aj c_bj χ(Φ_aj − Φ_bj)/χ(0) for rows of length `nd`; returns
/// the dense spectrum or just Tr ρ². Rows are computed independently and
/// summed in order, so every `Execution` gives the same bits.
fn gram_purity(
    c: &[f64],
    p: &[f64],
    nd: usize,
    chi: &Chi,
    method: SpectrumMethod,
    exec: Execution,
) -> Result<Eval, SchmidtError> {
    let nn = c.len() / nd;
    let norm = chi.at_zero();
    let (s, o): (Vec<f64>, Vec<f64>) = match chi {
        Chi::Uniform { l } => p.iter().map(|&x| (0.5 * l * x).sin_cos()).unzip(),
        _ => (Vec::new(), Vec::new()),
    };
    // columns where a row's amplitude is below 1e-9 of the peak contribute
    // at the 1e-18 level to ρ; each row keeps only its significant span
    let floor = 1e-9 * c.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let span: Vec<(usize, usize)> = (0..nn)
        .map(|a| {
            let r = &c[a * nd..(a + 1) * nd];
            match r.iter().position(|x| x.abs() > floor) {
                Some(lo) => (
                    lo,
                    nd - r.iter().rev().position(|x| x.abs() > floor).unwrap(),
                ),
                None => (0, 0),
            }
        })
        .collect();
    let simd = has_avx2();
    let view = |a: usize, lo: usize, hi: usize| -> RowView {
        let r = a * nd + lo..a * nd + hi;
        match chi {
            Chi::Uniform { .. } => RowView {
                c: &c[r.clone()],
                p: &p[r.clone()],
                s: &s[r.clone()],
                o: &o[r],
            },
            _ => RowView {
                c: &c[r.clone()],
                p: &p[r],
                s: &[],
                o: &[],
            },
        }
    };
    let row = |a: usize, b: usize| -> f64 {
        let lo = span[a].0.max(span[b].0);
        let hi = span[a].1.min(span[b].1);
        if lo >= hi {
            return 0.0;
        }
        let (va, vb) = (view(a, lo, hi), view(b, lo, hi));
        let v = match chi {
            Chi::Uniform { l } => {
                #[cfg(target_arch = "x86_64")]
                if simd {
                    // SAFETY: the CPU supports AVX2 and FMA (checked above)
                    return unsafe { row_pair_uniform_avx2(*l, va, vb) } / norm;
                }
                row_pair_uniform_body(*l, va, vb)
            }
            Chi::Table { inv_h, cells, .. } => {
                #[cfg(target_arch = "x86_64")]
                if simd {
                    // SAFETY: as above
                    return unsafe { row_pair_table_avx2(*inv_h, cells, va, vb) } / norm;
                }
                row_pair_table_body(*inv_h, cells, va, vb)
            }
        };
        v / norm
    };

    match method {
        SpectrumMethod::TraceOnly => {
            let parts: Vec<(f64, f64)> = exec.map_range(nn, |a| {
                let d = row(a, a);
                let mut sq = d * d;
                for b in a + 1..nn {
                    let v = row(a, b);
                    sq += 2.0 * v * v;
                }
                (d, sq)
            });
            let trace: f64 = parts.iter().map(|x| x.0).sum();
            let purity: f64 = parts.iter().map(|x| x.1).sum();
            if !(trace > 0.0) {
                return Err(SchmidtError::Degenerate);
            }
            Ok(Eval {
                purity,
                spectrum: None,
                tail: 1.0 - trace,
            })
        }
        _ => {
            let rows: Vec<Vec<f64>> = exec.map_range(nn, |a| (a..nn).map(|b| row(a, b)).collect());
            let mut m = DMatrix::zeros(nn, nn);
            for (a, r) in rows.iter().enumerate() {
                for (off, &v) in r.iter().enumerate() {
                    m[(a, a + off)] = v;
                    m[(a + off, a)] = v;
                }
            }
            let ev = m.symmetric_eigenvalues();
            finish_spectrum(ev.iter().copied().collect())
        }
    }
}

/// Explicit complex kernel matrix with Gauss–Legendre z nodes, then SVD.
fn eval_total_quadrature(ctx: &PairContext, g: &QuadratureGrid) -> Result<Eval, SchmidtError> {
    let (nu, delta, wd) = axes(ctx, g);
    let c = amplitudes(ctx, &nu, &delta, &wd);
    let p = phases(ctx, &nu, &delta)?;
    let (nn, nd) = (nu.len(), delta.len());
    let zh = g.z_half_width;
    let (zs, wz) = gauss_legendre_on(g.n_z, -zh, zh);
    let za: Vec<f64> = zs
        .iter()
        .zip(&wz)
        .map(|(&z, &w)| w * ctx.apodization(z))
        .collect();
    let norm: f64 = za.iter().sum();
    let ne = nd * zs.len();
    let mut m = DMatrix::<Complex64>::zeros(nn, ne);
    for i in 0..nn {
        for j in 0..nd {
            let cij = c[i * nd + j];
            if cij == 0.0 {
                continue;
            }
            for (k, (&z, &a)) in zs.iter().zip(&za).enumerate() {
                m[(i, j * zs.len() + k)] =
                    Complex64::from_polar(cij * (a / norm).sqrt(), p[i * nd + j] * z);
            }
        }
    }
    let sv = m.singular_values();
    finish_spectrum(sv.iter().map(|s| s * s).collect())
}

/// Normalized Schmidt coefficients (unit sum, descending, noise-truncated)
/// from the singular values of an arbitrary kernel matrix.
pub fn spectrum_from_matrix(m: &DMatrix<Complex64>) -> Vec<f64> {
    let sv = m.singular_values();
    let mut l: Vec<f64> = sv.iter().map(|s| s * s).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    let top = l.first().copied().unwrap_or(0.0);
    l.retain(|&x| x >= 1e-14 * top && x > 0.0);
    let total: f64 = l.iter().sum();
    l.iter().map(|x| x / total).collect()
}

/// P = Σλ² from the singular values of `m`.
pub fn purity_from_matrix(m: &DMatrix<Complex64>) -> f64 {
    spectrum_from_matrix(m).iter().map(|l| l * l).sum()
}

/// Oracle: form ρ = M·M† explicitly and return Tr ρ²/(Tr ρ)².
pub fn purity_via_density_matrix(m: &DMatrix<Complex64>) -> f64 {
    let rho = m * m.adjoint();
    let tr: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
    let sq: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
    sq / (tr * tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{MediumSpec, Sellmeier};
    use crate::fields::PumpSpec;
    use crate::jointamp::GeometrySpec;
    use crate::units::{wavelength_width_to_angular, wavenumber_to_angular};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gamma() -> f64 {
        wavenumber_to_angular(11.0)
    }

    fn ctx(medium: MediumSpec, fwhm: f64, geometry: GeometrySpec) -> PairContext {
        PairContext::new(medium, PumpSpec::new(775e-9, fwhm), geometry).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(r, c, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn singular_values_match_density_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (r, c) in [(8, 8), (16, 64), (64, 16), (33, 17)] {
            let m = random_matrix(&mut rng, r, c);
            assert!((purity_from_matrix(&m) - purity_via_density_matrix(&m)).abs() < 1e-12);
        }
    }

    #[test]
    fn factorable_and_scaled_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_matrix(&mut rng, 40, 1);
        let v = random_matrix(&mut rng, 1, 30);
        let m = &u * &v;
        let l = spectrum_from_matrix(&m);
        assert_eq!(l.len(), 1);
        assert!((purity_from_matrix(&m) - 1.0).abs() < 1e-10);

        let k = random_matrix(&mut rng, 20, 50);
        let scaled = &k * Complex64::new(-3.7, 2.2);
        assert!((purity_from_matrix(&k) - purity_from_matrix(&scaled)).abs() < 1e-12);
        assert!((purity_from_matrix(&k) - purity_from_matrix(&k.transpose())).abs() < 1e-12);
    }

    #[test]
    fn delta_like_lineshape_is_pure_in_energy() {
        let sigma_fwhm = wavelength_width_to_angular(2e-9, 775e-9);
        let sigma = crate::fields::fwhm_to_sigma(sigma_fwhm);
        let m = MediumSpec::sapphire_reference().with_linewidth(sigma / 1e3);
        let c = ctx(m, sigma_fwhm, GeometrySpec::forward());
        let r = purity_energy(&c, &PurityOptions::default()).unwrap();
        assert!(r.purity > 0.999, "{}", r.purity);
        assert!(r.converged);
    }

    #[test]
    fn monochromatic_pump_energy_purity_matches_density_matrix_oracle() {
        let c = ctx(
            MediumSpec::sapphire_reference(),
            gamma() / 1e3,
            GeometrySpec::forward(),
        );
        let grid = GridSpec {
            n_nu: 48,
            n_delta: 48,
            adaptive: false,
            line_weighting: Some(LineWeighting::LorentzianProduct),
            ..GridSpec::default()
        };
        let g = resolve(&c, Mechanism::Energy, &grid, Level::default()).unwrap();
        let e = eval_energy(&c, &g).unwrap();
        let (nu, delta, wd) = axes(&c, &g);
        let amp = amplitudes(&c, &nu, &delta, &wd);
        let m =
            DMatrix::from_row_slice(nu.len(), delta.len(), &amp).map(|x| Complex64::new(x, 0.0));
        let rho = &m * m.adjoint();
        let oracle: f64 = rho.iter().map(|z| z.norm_sqr()).sum();
        assert!((e.purity - oracle).abs() < 1e-8);
    }

    #[test]
    fn energy_purity_rises_with_bandwidth() {
        let g = gamma();
        let mut last = 0.0;
        for f in [0.5 * g, g, 2.0 * g] {
            let c = ctx(MediumSpec::sapphire_reference(), f, GeometrySpec::forward());
            let p = purity_energy(&c, &PurityOptions::default()).unwrap().purity;
            assert!(p > last, "{p} after {last}");
            last = p;
        }
    }

    #[test]
    fn momentum_purity_dispersionless_and_trend() {
        let flat = MediumSpec::sapphire_reference().with_sellmeier(Sellmeier::constant_index(1.76));
        let f = wavelength_width_to_angular(7e-9, 775e-9);
        let r = purity_momentum(
            &ctx(flat, f, GeometrySpec::forward()),
            &PurityOptions::default(),
        )
        .unwrap();
        assert!(r.purity > 0.999, "{}", r.purity);
        let g = gamma();
        let mut last = 2.0;
        for f in [0.5 * g, g, 2.0 * g] {
            let c = ctx(MediumSpec::sapphire_reference(), f, GeometrySpec::forward());
            let p = purity_momentum(&c, &PurityOptions::default())
                .unwrap()
                .purity;
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn momentum_gram_matches_kappa_grid_svd() {
        let c = ctx(
            MediumSpec::sapphire_reference(),
            wavelength_width_to_angular(10e-9, 775e-9),
            GeometrySpec::forward(),
        );
        let grid = GridSpec {
            n_nu: 96,
            adaptive: false,
            ..GridSpec::default()
        };
        let g = resolve(&c, Mechanism::Momentum, &grid, Level::default()).unwrap();
        let gram = eval_momentum(&c, &g, Execution::Sequential).unwrap();
        // the κ route truncates sinc² tails; unit-trace normalization absorbs
        // them to first order, leaving an error ~ 1/(window in lobes)²
        let lobe = 2.0 * PI / c.length();
        let spread = (c.beta_p - c.beta_s) * g.nu_half_width;
        let kappa =
            momentum_purity_on_kappa_grid(&c, 96, g.nu_half_width, 1601, spread + 100.0 * lobe)
                .unwrap();
        let renormalized = gram.purity / (1.0 - gram.tail).powi(2);
        assert!(
            (renormalized - kappa).abs() < 1e-3 * kappa,
            "{renormalized} vs {kappa}"
        );
        assert!(gram.tail.abs() < 1e-9);
    }

    #[test]
    fn single_z_node_reduces_total_to_energy() {
        let c = ctx(
            MediumSpec::sapphire_reference(),
            gamma(),
            GeometrySpec::forward(),
        );
        let grid = GridSpec {
            n_nu: 48,
            n_delta: 48,
            n_z: 1,
            adaptive: false,
            line_weighting: Some(LineWeighting::Trapezoid),
            z_method: ZMethod::Quadrature,
            ..GridSpec::default()
        };
        let t = evaluate_once(&c, Mechanism::Total, &grid, Execution::Sequential).unwrap();
        let e = evaluate_once(&c, Mechanism::Energy, &grid, Execution::Sequential).unwrap();
        assert!((t.purity - e.purity).abs() < 1e-6);
    }

    #[test]
    fn closed_form_z_matches_gauss_legendre() {
        for geometry in [GeometrySpec::forward(), GeometrySpec::backward()] {
            let medium = MediumSpec::sapphire_reference().with_length(
                if geometry.mode == GeometryMode::Backward {
                    4e-5
                } else {
                    8e-3
                },
            );
            let c = ctx(medium, wavelength_width_to_angular(3e-9, 775e-9), geometry);
            let grid = GridSpec {
                n_nu: 40,
                n_delta: 40,
                n_z: 64,
                adaptive: false,
                line_weighting: Some(LineWeighting::Trapezoid),
                ..GridSpec::default()
            };
            let a = evaluate_once(&c, Mechanism::Total, &grid, Execution::Sequential).unwrap();
            let q = evaluate_once(
                &c,
                Mechanism::Total,
                &GridSpec {
                    z_method: ZMethod::Quadrature,
                    ..grid.clone()
                },
                Execution::Sequential,
            )
            .unwrap();
            assert!(
                (a.purity - q.purity).abs() < 1e-9,
                "{:?}: {} vs {}",
                c.geometry.mode,
                a.purity,
                q.purity
            );
        }
    }

    #[test]
    fn filon_table_matches_gauss_legendre_in_3d() {
        let c = PairContext::with_fresnel(
            MediumSpec::sapphire_reference(),
            PumpSpec::new(775e-9, wavelength_width_to_angular(7e-9, 775e-9)),
            GeometryMode::Collinear3d,
            0.0,
            0.3,
            0.3,
        )
        .unwrap();
        let grid = GridSpec {
            n_nu: 40,
            n_delta: 40,
            n_z: 401,
            adaptive: false,
            line_weighting: Some(LineWeighting::Trapezoid),
            ..GridSpec::default()
        };
        let a = evaluate_once(&c, Mechanism::Total, &grid, Execution::Sequential).unwrap();
        let q = evaluate_once(
            &c,
            Mechanism::Total,
            &GridSpec {
                z_method: ZMethod::Quadrature,
                n_z: 160,
                ..grid.clone()
            },
            Execution::Sequential,
        )
        .unwrap();
        assert!(
            (a.purity - q.purity).abs() < 1e-6 * q.purity,
            "{} vs {}",
            a.purity,
            q.purity
        );
    }

    #[test]
    fn dense_and_trace_only_agree() {
        let c = ctx(
            MediumSpec::sapphire_reference(),
            gamma(),
            GeometrySpec::forward(),
        );
        let dense = GridSpec {
            n_nu: 96,
            n_delta: 64,
            adaptive: false,
            ..GridSpec::default()
        };
        let a = evaluate_once(&c, Mechanism::Total, &dense, Execution::Sequential).unwrap();
        let t = evaluate_once(
            &c,
            Mechanism::Total,
            &GridSpec {
                dense_limit: 10,
                ..dense.clone()
            },
            Execution::Sequential,
        )
        .unwrap();
        assert!(a.schmidt_coefficients.is_some());
        assert!(t.schmidt_coefficients.is_none());
        assert!((a.purity - t.purity).abs() < 1e-10);
        assert!((a.tail - t.tail).abs() < 1e-10);
    }

    #[test]
    fn sequential_and_parallel_are_bit_identical() {
        let c = ctx(
            MediumSpec::sapphire_reference(),
            gamma(),
            GeometrySpec::forward(),
        );
        let grid = GridSpec {
            n_nu: 64,
            n_delta: 64,
            adaptive: false,
            dense_limit: 8,
            ..GridSpec::default()
        };
        let a = evaluate_once(&c, Mechanism::Total, &grid, Execution::Sequential).unwrap();
        let b = evaluate_once(&c, Mechanism::Total, &grid, Execution::Parallel).unwrap();
        assert_eq!(a.purity.to_bits(), b.purity.to_bits());
    }

    #[test]
    fn baseline_refinement_converges() {
        let c = ctx(
            MediumSpec::sapphire_reference(),
            gamma(),
            GeometrySpec::forward(),
        );
        let r = purity_total(&c, &PurityOptions::default()).unwrap();
        assert!(r.converged, "{:?}", r.refinement_history);
        assert!(r.refinement_history.len() <= 3);
        let n = r.refinement_history.len();
        let a = r.refinement_history[n - 1].purity;
        let b = r.refinement_history[n - 2].purity;
        assert!((a - b).abs() < 1e-3 * a);
        let sum: f64 = r.schmidt_coefficients.as_ref().unwrap().iter().sum();
        assert!((sum + r.tail - 1.0).abs() < 1e-12);
        assert!(r.tail > 0.0 && r.tail < 0.1);
    }

    #[test]
    fn report_identities() {
        let c = ctx(
            MediumSpec::sapphire_reference(),
            2.0 * gamma(),
            GeometrySpec::forward(),
        );
        let r = purity_total(&c, &PurityOptions::default()).unwrap();
        assert!(r.purity > 0.0 && r.purity <= 1.0);
        assert_eq!(r.mode_number, 1.0 / r.purity);
        assert_eq!(r.g2_predicted, 1.0 + r.purity);
        let l = r.schmidt_coefficients.unwrap();
        assert!(l.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn global_phase_leaves_purity_unchanged() {
        // a constant phase per matrix element pattern that is global: ×e^{iθ}
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 30, 90);
        let rot = m.map(|z| z * Complex64::from_polar(1.0, 1.234));
        assert!((purity_from_matrix(&m) - purity_from_matrix(&rot)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn purity_in_unit_interval(seed in 0u64..1000, r in 2usize..24, c in 2usize..24) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, r, c);
            let p = purity_from_matrix(&m);
            prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
            prop_assert!(p >= 1.0 / (r.min(c) as f64) - 1e-12);
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[test]
    fn avx2_row_pairs_match_scalar_bitwise() {
        if !has_avx2() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut vec =
            |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
        let n = 1037;
        let (ca, pa, cb, pb) = (vec(n, 1.0), vec(n, 40.0), vec(n, 1.0), vec(n, 40.0));
        let (l, inv_h) = (0.3, 2.5);
        let trig = |p: &[f64]| -> (Vec<f64>, Vec<f64>) {
            p.iter().map(|x| (0.5 * l * x).sin_cos()).unzip()
        };
        let ((sa, oa), (sb, ob)) = (trig(&pa), trig(&pb));
        let a = || RowView {
            c: &ca,
            p: &pa,
            s: &sa,
            o: &oa,
        };
        let b = || RowView {
            c: &cb,
            p: &pb,
            s: &sb,
            o: &ob,
        };
        let cells: Vec<[f64; 4]> = (0..300)
            .map(|k| [1.0 / (1.0 + k as f64), 0.1, -0.01, 0.001])
            .collect();
        // SAFETY: AVX2 and FMA support checked above
        let (u, t) = unsafe {
            (
                row_pair_uniform_avx2(l, a(), b()),
                row_pair_table_avx2(inv_h, &cells, a(), b()),
            )
        };
        assert_eq!(u.to_bits(), row_pair_uniform_body(l, a(), b()).to_bits());
        assert_eq!(
            t.to_bits(),
            row_pair_table_body(inv_h, &cells, a(), b()).to_bits()
        );
    }
}
