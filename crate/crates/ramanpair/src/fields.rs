//! Spectral envelopes: the Gaussian pump amplitude ℰ(ω), the square-root
//! Lorentzian CE lineshape g(Ω), and Lorentzian fitting of measured Raman spectra.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{wavelength_to_angular, wavenumber_to_angular};

/// FWHM of a Gaussian intensity → its standard deviation.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * LN_2).sqrt())
}

/// Transform-limited Gaussian pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    /// Centre wavelength, m.
    pub center_wavelength: f64,
    /// FWHM of |ℰ(ω)|², rad/s.
    pub intensity_fwhm: f64,
    /// Beam waist w_p, m (3D geometries only).
    pub waist: Option<f64>,
}

impl PumpSpec {
    pub fn new(center_wavelength: f64, intensity_fwhm: f64) -> Self {
        PumpSpec {
            center_wavelength,
            intensity_fwhm,
            waist: None,
        }
    }

    pub fn with_waist(mut self, waist: f64) -> Self {
        self.waist = Some(waist);
        self
    }

    pub fn with_fwhm(mut self, fwhm: f64) -> Self {
        self.intensity_fwhm = fwhm;
        self
    }

    pub fn omega0(&self) -> f64 {
        wavelength_to_angular(self.center_wavelength)
    }

    /// Standard deviation of |ℰ(ω)|² in ω.
    pub fn sigma(&self) -> f64 {
        fwhm_to_sigma(self.intensity_fwhm)
    }

    /// ℰ at detuning x = ω − ω_p⁰ (flat spectral phase, unit L² norm).
    #[inline]
    pub fn amplitude_at_detuning(&self, x: f64) -> f64 {
        let s = self.sigma();
        (2.0 * PI * s * s).powf(-0.25) * (-(x * x) / (4.0 * s * s)).exp()
    }

    /// ℰ(ω) = (2πσ²)^(−1/4)·exp[−(ω−ω_p⁰)²/(4σ²)].
    pub fn amplitude(&self, omega: f64) -> f64 {
        self.amplitude_at_detuning(omega - self.omega0())
    }
}

/// Lorentzian CE line: |g(Ω)|² has centre Ω₀ and FWHM Γ, unit area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lineshape {
    pub omega0: f64,
    pub gamma: f64,
}

impl Lineshape {
    pub fn new(omega0: f64, gamma: f64) -> Self {
        Lineshape { omega0, gamma }
    }

    /// |g|² at detuning δ = Ω − Ω₀.
    #[inline]
    pub fn intensity_at_detuning(&self, d: f64) -> f64 {
        let h = 0.5 * self.gamma;
        (self.gamma / (2.0 * PI)) / (d * d + h * h)
    }

    /// g(Ω) = √[(Γ/2π)/((Ω−Ω₀)² + (Γ/2)²)].
    pub fn g(&self, omega: f64) -> f64 {
        self.intensity_at_detuning(omega - self.omega0).sqrt()
    }

    /// ∫_a^b |g|² dδ in detuning coordinates, exactly.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let h = 0.5 * self.gamma;
        ((b / h).atan() - (a / h).atan()) / PI
    }
}

pub fn pump_amplitude(pump: &PumpSpec, omega: f64) -> f64 {
    pump.amplitude(omega)
}

pub fn lineshape_g(ls: &Lineshape, omega: f64) -> f64 {
    ls.g(omega)
}

/// A·(Γ/2)²/((ν̃−ν̃₀)² + (Γ/2)²) + baseline, in the spectrum's own units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

impl LorentzianParams {
    pub fn eval(&self, x: f64) -> f64 {
        let h = 0.5 * self.fwhm;
        self.amplitude * h * h / ((x - self.center).powi(2) + h * h) + self.baseline
    }

    fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.center, self.fwhm, self.amplitude, self.baseline)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        LorentzianParams {
            center: v[0],
            fwhm: v[1],
            amplitude: v[2],
            baseline: v[3],
        }
    }
}

/// Sample a Lorentzian line on the given shifts.
pub fn synthesize_lorentzian(params: &LorentzianParams, shifts: &[f64]) -> Vec<(f64, f64)> {
    shifts.iter().map(|&x| (x, params.eval(x))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub params: LorentzianParams,
    /// RMS residual relative to the fitted peak height.
    pub residual: f64,
    pub iterations: usize,
    /// Ω₀ in rad/s (input shifts taken as cm⁻¹).
    pub omega0: f64,
    /// Γ in rad/s.
    pub gamma: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 8 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0} has a negative or non-finite intensity")]
    BadIntensity(usize),
    #[error("spectrum has no peak (max − min = {0:e})")]
    NoPeak(f64),
    #[error("fitted width {fwhm} exceeds the sampled window {window}: degenerate line")]
    Degenerate { fwhm: f64, window: f64 },
    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NotConverged {
        best: LorentzianParams,
        residual: f64,
        iterations: usize,
    },
}

const FIT_MAX_ITER: usize = 500;

/// Damped least-squares (Levenberg–Marquardt) fit of a Lorentzian plus baseline.
///
/// Starts from the peak sample, the half-maximum crossings and the spectrum
/// minimum, so the result is deterministic.
pub fn fit_lorentzian(spectrum: &[(f64, f64)]) -> Result<LorentzianFit, FitError> {
    if spectrum.len() < 8 {
        return Err(FitError::TooFewSamples(spectrum.len()));
    }
    for (i, &(x, y)) in spectrum.iter().enumerate() {
        if !(y >= 0.0 && y.is_finite() && x.is_finite()) {
            return Err(FitError::BadIntensity(i));
        }
    }
    let xs: Vec<f64> = spectrum.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = spectrum.iter().map(|p| p.1).collect();
    let (xmin, xmax) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let window = xmax - xmin;
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    if ymax - ymin <= 1e-12 * ymax.abs().max(f64::MIN_POSITIVE) {
        return Err(FitError::NoPeak(ymax - ymin));
    }

    let start = LorentzianParams {
        center: xs[imax],
        fwhm: half_max_width(&xs, &ys, imax, ymin).unwrap_or(window / 10.0),
        amplitude: ymax - ymin,
        baseline: ymin,
    };

    let mut p = start.as_vector();
    let mut cost = sum_sq(&xs, &ys, &p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=FIT_MAX_ITER {
        iterations = it;
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(&ys) {
            let (f, grad) = model_and_gradient(x, &p);
            let r = y - f;
            jtj += grad * grad.transpose();
            jtr += grad * r;
        }
        if jtr.amax() <= 1e-15 * (cost.sqrt() + ymax) * ymax {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj;
            for d in 0..4 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let trial_cost = sum_sq(&xs, &ys, &trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel = step.component_div(&p.map(|v| v.abs().max(1e-300))).amax();
                p = trial;
                let dc = cost - trial_cost;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel < 1e-13 || dc <= 1e-15 * cost {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if converged || !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = converged || !accepted;
            break;
        }
    }

    let params = LorentzianParams::from_vector(&p);
    let residual = (cost / xs.len() as f64).sqrt() / params.amplitude.abs().max(f64::MIN_POSITIVE);
    if !converged {
        return Err(FitError::NotConverged {
            best: params,
            residual,
            iterations,
        });
    }
    let params = LorentzianParams {
        fwhm: params.fwhm.abs(),
        ..params
    };
    if params.fwhm > window {
        return Err(FitError::Degenerate {
            fwhm: params.fwhm,
            window,
        });
    }
    Ok(LorentzianFit {
        params,
        residual,
        iterations,
        omega0: wavenumber_to_angular(params.center),
        gamma: wavenumber_to_angular(params.fwhm),
    })
}

fn model_and_gradient(x: f64, p: &Vector4<f64>) -> (f64, Vector4<f64>) {
    let (x0, g, a, b) = (p[0], p[1], p[2], p[3]);
    let h2 = 0.25 * g * g;
    let d = x - x0;
    let den = d * d + h2;
    let shape = h2 / den;
    let f = a * shape + b;
    let d_x0 = a * h2 * 2.0 * d / (den * den);
    // ∂/∂Γ of h²/(d²+h²) with h² = Γ²/4
    let d_g = a * (0.5 * g) * d * d / (den * den);
    (f, Vector4::new(d_x0, d_g, shape, 1.0))
}

fn sum_sq(xs: &[f64], ys: &[f64], p: &Vector4<f64>) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - model_and_gradient(x, p).0;
            r * r
        })
        .sum()
}

fn half_max_width(xs: &[f64], ys: &[f64], imax: usize, base: f64) -> Option<f64> {
    let half = base + 0.5 * (ys[imax] - base);
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if ys[i] <= half {
                let t = (ys[prev] - half) / (ys[prev] - ys[i]);
                return Some(xs[prev] + t * (xs[i] - xs[prev]));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..imax).rev())?;
    let right = cross(&mut (imax + 1..xs.len()))?;
    let w = (right - left).abs();
    (w > 0.0).then_some(w)
}

/// Two-column spectrum text: shift (cm⁻¹) and intensity, separated by
/// whitespace, comma or semicolon; `#` starts a comment line.
pub fn parse_spectrum(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() < 2 {
            return Err(format!("line {}: expected two columns", lineno + 1));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| format!("line {}: `{s}` is not a number", lineno + 1))
        };
        out.push((parse(cols[0])?, parse(cols[1])?));
    }
    Ok(out)
}
