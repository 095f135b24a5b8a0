//! Joint amplitudes of the photon–CE pair.
//!
//! One-dimensional kernels (forward, backward, k-space, energy-only,
//! momentum-only) use the full Sellmeier k(ω). The 3D transverse factors β and
//! apodization functions α use centre wavevectors only.
//!
//! Phase convention: the 1D kernels carry e^{+i[k(ω_s+Ω) ∓ k(ω_s)]z}. The
//! transverse factors β are written in the matching convention, i.e. they are
//! what the fiber-mode projection of the paraxial kernel μ produces when μ is
//! built with that same sign (see [`fiber_projection_log`]). Purity never sees
//! this choice: only |β|² (through α) and the longitudinal phase enter ρ.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispersion::{DispersionError, MediumSpec};
use crate::fields::{Lineshape, PumpSpec};
use crate::quadrature::{gauss_legendre, sinc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContextError {
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryMode {
    #[serde(alias = "forward-1d")]
    Forward,
    #[serde(alias = "backward-1d")]
    Backward,
    #[serde(rename = "collinear-3d")]
    Collinear3d,
    #[serde(rename = "off-axis-3d")]
    OffAxis3d,
}

impl GeometryMode {
    pub fn is_3d(self) -> bool {
        matches!(self, GeometryMode::Collinear3d | GeometryMode::OffAxis3d)
    }

    pub fn name(self) -> &'static str {
        match self {
            GeometryMode::Forward => "forward",
            GeometryMode::Backward => "backward",
            GeometryMode::Collinear3d => "collinear-3d",
            GeometryMode::OffAxis3d => "off-axis-3d",
        }
    }
}

/// Collection geometry. `angle` is φ between pump axis and collection axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub mode: GeometryMode,
    pub angle: f64,
    /// Pump waist w_p, m.
    pub waist_pump: Option<f64>,
    /// Collection (fiber) mode waist w_f, m.
    pub waist_collection: Option<f64>,
}

impl GeometrySpec {
    pub fn forward() -> Self {
        GeometrySpec {
            mode: GeometryMode::Forward,
            angle: 0.0,
            waist_pump: None,
            waist_collection: None,
        }
    }

    pub fn backward() -> Self {
        GeometrySpec {
            mode: GeometryMode::Backward,
            ..Self::forward()
        }
    }

    pub fn collinear(waist_pump: f64, waist_collection: f64) -> Self {
        GeometrySpec {
            mode: GeometryMode::Collinear3d,
            angle: 0.0,
            waist_pump: Some(waist_pump),
            waist_collection: Some(waist_collection),
        }
    }

    pub fn off_axis(angle: f64, waist_pump: f64, waist_collection: f64) -> Self {
        GeometrySpec {
            mode: GeometryMode::OffAxis3d,
            angle,
            waist_pump: Some(waist_pump),
            waist_collection: Some(waist_collection),
        }
    }
}

/// Waist that gives Fresnel number 𝓕 = 2z_R/L for wavevector k: w = √(𝓕L/k).
pub fn waist_for_fresnel(fresnel: f64, length: f64, k: f64) -> f64 {
    (fresnel * length / k).sqrt()
}

/// Derived Gaussian-beam parameters (centre wavevectors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beams {
    pub w_p: f64,
    pub w_f: f64,
    pub z_rp: f64,
    pub z_rf: f64,
    pub fresnel_p: f64,
    pub fresnel_f: f64,
}

/// Everything a kernel needs: medium, pump, geometry and the derived centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairContext {
    pub medium: MediumSpec,
    pub pump: PumpSpec,
    pub geometry: GeometrySpec,
    pub lineshape: Lineshape,
    pub omega_p0: f64,
    pub omega_s0: f64,
    pub k_p0: f64,
    pub k_s0: f64,
    /// k_CE⁰ = k(ω_p⁰) − k(ω_s⁰).
    pub k_ce0: f64,
    pub beta_p: f64,
    pub beta_s: f64,
    pub beams: Option<Beams>,
}

impl PairContext {
    pub fn new(
        medium: MediumSpec,
        pump: PumpSpec,
        geometry: GeometrySpec,
    ) -> Result<Self, ContextError> {
        medium.validate()?;
        if !(pump.intensity_fwhm > 0.0 && pump.intensity_fwhm.is_finite()) {
            return Err(ContextError::Invalid(format!(
                "pump FWHM must be positive, got {}",
                pump.intensity_fwhm
            )));
        }
        if !(pump.center_wavelength > 0.0) {
            return Err(ContextError::Invalid(
                "pump centre wavelength must be positive".into(),
            ));
        }
        if !(0.0..=PI).contains(&geometry.angle) {
            return Err(ContextError::Invalid(format!(
                "collection angle must lie in [0, π], got {} rad",
                geometry.angle
            )));
        }
        let omega_p0 = pump.omega0();
        let omega_s0 = omega_p0 - medium.raman_shift;
        if !(omega_s0 > 0.0) {
            return Err(ContextError::Invalid(format!(
                "Raman shift {:.4e} rad/s exceeds the pump frequency {:.4e} rad/s",
                medium.raman_shift, omega_p0
            )));
        }
        let k_p0 = medium.wavevector(omega_p0)?;
        let k_s0 = medium.wavevector(omega_s0)?;
        let beta_p = medium.inverse_group_velocity(omega_p0)?;
        let beta_s = medium.inverse_group_velocity(omega_s0)?;
        let beams = if geometry.mode.is_3d() {
            let w_p = geometry.waist_pump.ok_or_else(|| {
                ContextError::Invalid("3D geometry requires the pump waist".into())
            })?;
            let w_f = geometry.waist_collection.ok_or_else(|| {
                ContextError::Invalid("3D geometry requires the collection waist".into())
            })?;
            if !(w_p > 0.0 && w_f > 0.0) {
                return Err(ContextError::Invalid("beam waists must be positive".into()));
            }
            let z_rp = k_p0 * w_p * w_p / 2.0;
            let z_rf = k_s0 * w_f * w_f / 2.0;
            Some(Beams {
                w_p,
                w_f,
                z_rp,
                z_rf,
                fresnel_p: 2.0 * z_rp / medium.length,
                fresnel_f: 2.0 * z_rf / medium.length,
            })
        } else {
            None
        };
        let lineshape = Lineshape::new(medium.raman_shift, medium.linewidth);
        Ok(PairContext {
            medium,
            pump,
            geometry,
            lineshape,
            omega_p0,
            omega_s0,
            k_p0,
            k_s0,
            k_ce0: k_p0 - k_s0,
            beta_p,
            beta_s,
            beams,
        })
    }

    /// Geometry with both beams set to the given Fresnel numbers.
    pub fn with_fresnel(
        medium: MediumSpec,
        pump: PumpSpec,
        mode: GeometryMode,
        angle: f64,
        fresnel_p: f64,
        fresnel_f: f64,
    ) -> Result<Self, ContextError> {
        let omega_p0 = pump.omega0();
        let k_p = medium.wavevector(omega_p0)?;
        let k_s = medium.wavevector(omega_p0 - medium.raman_shift)?;
        let geometry = GeometrySpec {
            mode,
            angle,
            waist_pump: Some(waist_for_fresnel(fresnel_p, medium.length, k_p)),
            waist_collection: Some(waist_for_fresnel(fresnel_f, medium.length, k_s)),
        };
        PairContext::new(medium, pump, geometry)
    }

    pub fn length(&self) -> f64 {
        self.medium.length
    }

    fn beams(&self) -> &Beams {
        self.beams
            .as_ref()
            .expect("3D kernel evaluated on a context without beam waists")
    }

    pub fn group_delay_forward(&self) -> f64 {
        (self.beta_p - self.beta_s) * self.medium.length
    }

    pub fn group_delay_backward(&self) -> f64 {
        (self.beta_p + self.beta_s) * self.medium.length
    }

    #[inline]
    fn envelopes(&self, omega_s: f64, omega: f64) -> f64 {
        self.pump.amplitude(omega_s + omega) * self.lineshape.g(omega)
    }

    /// f(ω_s, Ω, z) = ℰ(ω_s+Ω)·g(Ω)·e^{i[k(ω_s+Ω) − k(ω_s)]z}.
    pub fn f1d_forward(&self, omega_s: f64, omega: f64, z: f64) -> Result<Complex64, ContextError> {
        let phase =
            (self.medium.wavevector(omega_s + omega)? - self.medium.wavevector(omega_s)?) * z;
        Ok(Complex64::from_polar(self.envelopes(omega_s, omega), phase))
    }

    /// Backward emission: phase e^{i[k(ω_s+Ω) + k(ω_s)]z}.
    pub fn f1d_backward(
        &self,
        omega_s: f64,
        omega: f64,
        z: f64,
    ) -> Result<Complex64, ContextError> {
        let phase =
            (self.medium.wavevector(omega_s + omega)? + self.medium.wavevector(omega_s)?) * z;
        Ok(Complex64::from_polar(self.envelopes(omega_s, omega), phase))
    }

    /// Linearized forward kernel: phase [k_CE⁰ + (β_p−β_s)ν + β_p δ]z.
    pub fn f1d_forward_linearized(&self, omega_s: f64, omega: f64, z: f64) -> Complex64 {
        let nu = omega_s - self.omega_s0;
        let delta = omega - self.medium.raman_shift;
        let phase = (self.k_ce0 + (self.beta_p - self.beta_s) * nu + self.beta_p * delta) * z;
        Complex64::from_polar(self.envelopes(omega_s, omega), phase)
    }

    /// k-space kernel ℰ·g·sinc[(L/2)(k(ω_s+Ω) − k(ω_s) − k_CE)].
    pub fn f1d_kspace(&self, omega_s: f64, omega: f64, k_ce: f64) -> Result<f64, ContextError> {
        let dk = self.medium.wavevector(omega_s + omega)? - self.medium.wavevector(omega_s)? - k_ce;
        Ok(self.envelopes(omega_s, omega) * sinc(0.5 * self.medium.length * dk))
    }

    /// Linearized k-space kernel: sinc[Δτ·ν/2 + (L/2)(β_p δ − κ)].
    pub fn f1d_kspace_linearized(&self, omega_s: f64, omega: f64, k_ce: f64) -> f64 {
        let nu = omega_s - self.omega_s0;
        let delta = omega - self.medium.raman_shift;
        let kappa = k_ce - self.k_ce0;
        let l = self.medium.length;
        let arg = 0.5 * self.group_delay_forward() * nu + 0.5 * l * (self.beta_p * delta - kappa);
        self.envelopes(omega_s, omega) * sinc(arg)
    }

    /// Energy-correlation kernel ℰ(ω_s+Ω)·g(Ω).
    pub fn f_energy(&self, omega_s: f64, omega: f64) -> f64 {
        self.envelopes(omega_s, omega)
    }

    /// Momentum-correlation kernel at fixed Ω₀.
    pub fn f_momentum(&self, omega_s: f64, k_ce: f64) -> Result<f64, ContextError> {
        let w0 = self.medium.raman_shift;
        let dk = self.medium.wavevector(omega_s + w0)? - self.medium.wavevector(omega_s)? - k_ce;
        Ok(self.pump.amplitude(omega_s + w0) * sinc(0.5 * self.medium.length * dk))
    }

    fn c_p(&self, z: f64) -> Complex64 {
        Complex64::new(z, self.beams().z_rp) / self.k_p0
    }

    fn c_s(&self, z: f64, cos_phi: f64) -> Complex64 {
        Complex64::new(z * cos_phi, self.beams().z_rf) / self.k_s0
    }

    /// Collinear transverse factor β(q, z) = e^{i C̄_p C_s |q|²/(2(C̄_p−C_s))}/(C̄_p−C_s).
    pub fn beta_collinear(&self, q: (f64, f64), z: f64) -> Complex64 {
        let cp = self.c_p(z).conj();
        let cs = self.c_s(z, 1.0);
        let d = cp - cs;
        let q2 = q.0 * q.0 + q.1 * q.1;
        (Complex64::i() * cp * cs * q2 / (2.0 * d)).exp() / d
    }

    /// log β(q, z, φ) for off-axis collection; see [`PairContext::beta_offaxis`].
    pub fn log_beta_offaxis(&self, q: (f64, f64), z: f64, phi: f64) -> Complex64 {
        let (s, c) = phi.sin_cos();
        let i = Complex64::i();
        let cp = self.c_p(z).conj();
        let cs = self.c_s(z, c);
        let a = cs - cp * c * c;
        let b = cs - cp;
        let (qx, qy) = q;
        let dy = qy - self.k_s0 * s;
        let t1 = -0.5 * i * cp * (qx * qx + dy * dy);
        let u = cp * c * dy + z * s;
        let t2 = -i * u * u / (2.0 * a);
        let v = cp * qx;
        let t3 = -i * v * v / (2.0 * b);
        t1 + t2 + t3 - 0.5 * a.ln() - 0.5 * b.ln()
    }

    /// Off-axis transverse factor. Both denominators C'_s − C̄_p cos²φ and
    /// C'_s − C̄_p have strictly positive imaginary part, so the principal
    /// square-root branch is continuous over z and φ.
    pub fn beta_offaxis(&self, q: (f64, f64), z: f64, phi: f64) -> Complex64 {
        self.log_beta_offaxis(q, z, phi).exp()
    }

    /// α(z) = ∫|β|²d²q for collinear collection (a Lorentzian in z).
    pub fn alpha_collinear(&self, z: f64) -> f64 {
        let b = self.beams();
        let t_f = (z * z + b.z_rf * b.z_rf) / (b.w_f * self.k_s0).powi(2);
        let t_p = (z * z + b.z_rp * b.z_rp) / (b.w_p * self.k_p0).powi(2);
        2.0 * PI / (b.w_p * b.w_p * b.w_f * b.w_f) / (t_f + t_p)
    }

    /// ln α(z, φ), to stay finite where the Gaussian factor underflows.
    pub fn log_alpha_offaxis(&self, z: f64, phi: f64) -> f64 {
        let b = self.beams();
        let (s, c) = phi.sin_cos();
        let c2 = c * c;
        let vf2 = (b.w_f * z / b.z_rf).powi(2);
        let vp2 = (b.w_p * z / b.z_rp).powi(2);
        let wp2 = b.w_p * b.w_p;
        let wf2 = b.w_f * b.w_f;
        let d1 = (vf2 + vp2 + wp2) * c2 + wf2;
        let d2 = vf2 * c2 + vp2 + wp2 + wf2;
        (8.0 * PI / (wp2 * wf2)).ln() - 2.0 * z * z * s * s / d1 - 0.5 * (d1 * d2).ln()
    }

    /// Generalized apodization α(z, φ) = ∫|β(q, z, φ)|²d²q.
    pub fn alpha_offaxis(&self, z: f64, phi: f64) -> f64 {
        self.log_alpha_offaxis(z, phi).exp()
    }

    /// Full width at half maximum in z of α(·, φ) (unbounded by the crystal).
    /// α is even and non-increasing in |z|, so the half-width is found by
    /// bisection on ln α(z) − ln α(0) = −ln 2.
    pub fn apodization_fwhm(&self, phi: f64) -> f64 {
        let target = self.log_alpha_offaxis(0.0, phi) - std::f64::consts::LN_2;
        let below = |z: f64| self.log_alpha_offaxis(z, phi) < target;
        let mut hi = self.beams().w_f.min(self.beams().w_p);
        while !below(hi) {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if below(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        lo + hi
    }

    /// e^{i k(ω_s)(1−cos φ) z}.
    pub fn offaxis_longitudinal_phase(
        &self,
        omega_s: f64,
        z: f64,
        phi: f64,
    ) -> Result<Complex64, ContextError> {
        let k = self.medium.wavevector(omega_s)?;
        Ok(Complex64::from_polar(1.0, k * (1.0 - phi.cos()) * z))
    }

    /// The apodization weight a(z) used by this context's geometry (1 in 1D).
    pub fn apodization(&self, z: f64) -> f64 {
        match self.geometry.mode {
            GeometryMode::Forward | GeometryMode::Backward => 1.0,
            GeometryMode::Collinear3d => self.alpha_collinear(z),
            GeometryMode::OffAxis3d => self.alpha_offaxis(z, self.geometry.angle),
        }
    }

    /// log of the paraxial kernel μ (transverse part only; the 1D spectral
    /// factor multiplies both sides of the projection identity and is omitted).
    pub fn log_mu_paraxial(
        &self,
        omega_s: f64,
        q_s: (f64, f64),
        omega: f64,
        q_ce: (f64, f64),
        z: f64,
        phi: f64,
        expansion: MuExpansion,
    ) -> Result<Complex64, ContextError> {
        let b = self.beams();
        let k_s = self.medium.wavevector(omega_s)?;
        let k_p = self.medium.wavevector(omega_s + omega)?;
        Ok(log_mu(b.w_p, k_s, k_p, q_s, q_ce, z, phi, expansion))
    }

    pub fn mu_paraxial_oracle(
        &self,
        omega_s: f64,
        q_s: (f64, f64),
        omega: f64,
        q_ce: (f64, f64),
        z: f64,
        phi: f64,
        expansion: MuExpansion,
    ) -> Result<Complex64, ContextError> {
        Ok(self
            .log_mu_paraxial(omega_s, q_s, omega, q_ce, z, phi, expansion)?
            .exp())
    }
}

/// Which second-order expansion of the off-axis pump envelope to use in μ.
///
/// `FullLongitudinal` keeps the |q_s|²·sin²φ pieces of the pump's transverse
/// wavevector in the longitudinal term; `Consistent` drops them, as the
/// paraxial ordering requires. Only the consistent expansion
/// projects onto a β whose |β|² integrates to the generalized apodization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuExpansion {
    Consistent,
    FullLongitudinal,
}

#[allow(clippy::too_many_arguments)]
fn log_mu(
    w_p: f64,
    k_s: f64,
    k_p: f64,
    q_s: (f64, f64),
    q_ce: (f64, f64),
    z: f64,
    phi: f64,
    expansion: MuExpansion,
) -> Complex64 {
    let (s, c) = phi.sin_cos();
    let (qx, qy) = q_s;
    let q2 = qx * qx + qy * qy;
    let px = qx + q_ce.0;
    let py = qy * c + q_ce.1;
    let longitudinal = match expansion {
        MuExpansion::Consistent => k_s * k_s,
        MuExpansion::FullLongitudinal => k_s * k_s - q2,
    };
    let wp2 = w_p * w_p;
    let re = -0.25 * wp2 * (px * px + py * py) - 0.25 * wp2 * longitudinal * s * s
        + 0.5 * wp2 * k_s * py * s;
    let im = -(px * px + py * py) * z / (2.0 * k_p) - longitudinal * s * s * z / (2.0 * k_p)
        + k_s * py * s * z / k_p
        + (q2 * c / (2.0 * k_s) - qy * s) * z
        + k_s * (1.0 - c) * z;
    Complex64::new(re, im)
}

/// log of ∫d²q_s μ(q_s, q_CE, z)·e^{−w_f²|q_s|²/4}, by tensor Gauss–Legendre
/// quadrature centred on the envelope maximum.
///
/// This is the independent numerical route to β·e^{ik(1−cosφ)z}: it never
/// uses the closed forms. Returns `None` when the envelope does not decay
/// (possible for the full-longitudinal expansion at large angles).
pub fn fiber_projection_log(
    ctx: &PairContext,
    q_ce: (f64, f64),
    z: f64,
    phi: f64,
    expansion: MuExpansion,
    nodes: usize,
) -> Option<Complex64> {
    let b = ctx.beams();
    let (w_p, w_f) = (b.w_p, b.w_f);
    let (k_s, k_p) = (ctx.k_s0, ctx.k_p0);
    let f = |x: f64, y: f64| {
        log_mu(w_p, k_s, k_p, (x, y), q_ce, z, phi, expansion) - 0.25 * w_f * w_f * (x * x + y * y)
    };
    // the real part is an axis-separable quadratic: recover centre and curvature
    let h = 1.0 / w_f;
    let axis = |along_x: bool| -> Option<(f64, f64)> {
        let at = |t: f64| if along_x { f(t, 0.0).re } else { f(0.0, t).re };
        let (fm, f0, fp) = (at(-h), at(0.0), at(h));
        let a = -(fp - 2.0 * f0 + fm) / (2.0 * h * h);
        if !(a > 0.0) {
            return None;
        }
        let slope = (fp - fm) / (2.0 * h);
        Some((slope / (2.0 * a), 1.0 / (2.0 * a).sqrt()))
    };
    let (cx, sx) = axis(true)?;
    let (cy, sy) = axis(false)?;
    let (t, w) = gauss_legendre(nodes);
    let span = 9.0;
    let mut vals = Vec::with_capacity(nodes * nodes);
    let mut m = f64::NEG_INFINITY;
    for (&tx, &wx) in t.iter().zip(&w) {
        let x = cx + span * sx * tx;
        for (&ty, &wy) in t.iter().zip(&w) {
            let y = cy + span * sy * ty;
            let v = f(x, y);
            m = m.max(v.re);
            vals.push((v, wx * wy));
        }
    }
    let sum: Complex64 = vals.iter().map(|&(v, wt)| (v - m).exp() * wt).sum();
    let jac = span * sx * span * sy;
    Some(Complex64::new(m, 0.0) + (sum * jac).ln())
}
