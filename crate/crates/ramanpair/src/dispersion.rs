//! Sellmeier dispersion of the Raman medium: n(ω), k(ω), dk/dω and group delays.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{angular_to_wavelength, Dimension, Quantity, QuantityError, C_LIGHT};

const SAPPHIRE_ORDINARY: &str = include_str!("../data/media/sapphire_ordinary.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("{label}: wavelength {wavelength_nm:.2} nm outside the Sellmeier validity window [{min_nm:.1}, {max_nm:.1}] nm")]
    OutOfWindow {
        label: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    #[error("{label}: Sellmeier gives n² = {n2} ≤ 1 at {wavelength_nm:.2} nm")]
    NonPhysical {
        label: String,
        wavelength_nm: f64,
        n2: f64,
    },
    #[error("invalid medium: {0}")]
    Invalid(String),
}

/// One resonance term B·λ²/(λ² − C), with C in µm².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierTerm {
    pub b: f64,
    pub c_um2: f64,
}

/// Sellmeier coefficients plus the wavelength range over which they may be used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sellmeier {
    pub label: String,
    pub terms: Vec<SellmeierTerm>,
    /// Validity window in metres; `None` means unrestricted (vacuum, constant n).
    pub window: Option<(f64, f64)>,
}

#[derive(Deserialize)]
struct SellmeierFile {
    label: String,
    window: Option<[String; 2]>,
    #[serde(default)]
    sellmeier: Vec<TermFile>,
}

#[derive(Deserialize)]
struct TermFile {
    b: f64,
    resonance: String,
}

impl Sellmeier {
    pub fn vacuum() -> Self {
        Sellmeier {
            label: "vacuum".into(),
            terms: Vec::new(),
            window: None,
        }
    }

    /// Constant index n: a single term with C = 0 and B = n² − 1.
    pub fn constant_index(n: f64) -> Self {
        Sellmeier {
            label: format!("dispersionless (n = {n})"),
            terms: vec![SellmeierTerm {
                b: n * n - 1.0,
                c_um2: 0.0,
            }],
            window: None,
        }
    }

    /// The bundled ordinary-ray sapphire coefficients.
    pub fn sapphire_ordinary() -> Self {
        Self::from_toml(SAPPHIRE_ORDINARY).expect("bundled sapphire data is valid")
    }

    /// Parse the medium-data format used by `data/media/*.toml`.
    pub fn from_toml(text: &str) -> Result<Self, DispersionError> {
        let raw: SellmeierFile =
            toml::from_str(text).map_err(|e| DispersionError::Invalid(e.to_string()))?;
        let length = |s: &str| -> Result<f64, DispersionError> {
            let q: Quantity = s
                .parse()
                .map_err(|e: QuantityError| DispersionError::Invalid(e.to_string()))?;
            q.si_as(Dimension::Length, s)
                .map_err(|e| DispersionError::Invalid(e.to_string()))
        };
        let mut terms = Vec::with_capacity(raw.sellmeier.len());
        for t in &raw.sellmeier {
            let lam_um = length(&t.resonance)? * 1e6;
            terms.push(SellmeierTerm {
                b: t.b,
                c_um2: lam_um * lam_um,
            });
        }
        let window = match raw.window {
            Some([lo, hi]) => {
                let (lo, hi) = (length(&lo)?, length(&hi)?);
                if !(lo > 0.0 && hi > lo) {
                    return Err(DispersionError::Invalid(format!(
                        "window must satisfy 0 < min < max, got [{lo}, {hi}] m"
                    )));
                }
                Some((lo, hi))
            }
            None => None,
        };
        Ok(Sellmeier {
            label: raw.label,
            terms,
            window,
        })
    }

    fn check_window(&self, lambda: f64) -> Result<(), DispersionError> {
        if let Some((lo, hi)) = self.window {
            if !(lambda >= lo && lambda <= hi) {
                return Err(DispersionError::OutOfWindow {
                    label: self.label.clone(),
                    wavelength_nm: lambda * 1e9,
                    min_nm: lo * 1e9,
                    max_nm: hi * 1e9,
                });
            }
        }
        Ok(())
    }

    /// n(ω) and (λ²/n)·Σ B·C/(λ²−C)², the latter being ω·dn/dω.
    fn index_and_slope(&self, omega: f64) -> Result<(f64, f64), DispersionError> {
        let lambda = angular_to_wavelength(omega);
        self.check_window(lambda)?;
        let l2 = (lambda * 1e6).powi(2);
        let mut n2 = 1.0;
        let mut s = 0.0;
        for t in &self.terms {
            let d = l2 - t.c_um2;
            n2 += t.b * l2 / d;
            s += t.b * t.c_um2 / (d * d);
        }
        if !(n2 > 1.0) && !self.terms.is_empty() {
            return Err(DispersionError::NonPhysical {
                label: self.label.clone(),
                wavelength_nm: lambda * 1e9,
                n2,
            });
        }
        let n = n2.sqrt();
        Ok((n, l2 * s / n))
    }

    pub fn refractive_index(&self, omega: f64) -> Result<f64, DispersionError> {
        self.index_and_slope(omega).map(|(n, _)| n)
    }

    /// k = n(ω)·ω/c.
    pub fn wavevector(&self, omega: f64) -> Result<f64, DispersionError> {
        Ok(self.refractive_index(omega)? * omega / C_LIGHT)
    }

    /// β = dk/dω = (n + ω·dn/dω)/c, differentiated analytically.
    pub fn inverse_group_velocity(&self, omega: f64) -> Result<f64, DispersionError> {
        let (n, w_dn) = self.index_and_slope(omega)?;
        Ok((n + w_dn) / C_LIGHT)
    }
}

/// The Raman medium: dispersion, interaction length and the Raman line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub label: String,
    pub sellmeier: Sellmeier,
    /// Interaction length L, m.
    pub length: f64,
    /// Raman shift Ω₀, rad/s.
    pub raman_shift: f64,
    /// Linewidth Γ (FWHM of the spectral intensity), rad/s.
    pub linewidth: f64,
}

impl MediumSpec {
    pub fn new(
        sellmeier: Sellmeier,
        length: f64,
        raman_shift: f64,
        linewidth: f64,
    ) -> Result<Self, DispersionError> {
        let m = MediumSpec {
            label: sellmeier.label.clone(),
            sellmeier,
            length,
            raman_shift,
            linewidth,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DispersionError> {
        let bad = |what: &str, v: f64| {
            Err(DispersionError::Invalid(format!(
                "{what} must be positive and finite, got {v}"
            )))
        };
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad("length", self.length);
        }
        if !(self.raman_shift > 0.0 && self.raman_shift.is_finite()) {
            return bad("raman shift", self.raman_shift);
        }
        if !(self.linewidth > 0.0 && self.linewidth.is_finite()) {
            return bad("linewidth", self.linewidth);
        }
        Ok(())
    }

    /// Reference medium: 8 mm sapphire, 746.6 cm⁻¹ shift, Γ = 11.0 cm⁻¹.
    pub fn sapphire_reference() -> Self {
        use crate::units::wavenumber_to_angular;
        MediumSpec::new(
            Sellmeier::sapphire_ordinary(),
            8e-3,
            wavenumber_to_angular(746.6),
            wavenumber_to_angular(11.0),
        )
        .expect("reference medium is valid")
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn with_linewidth(mut self, linewidth: f64) -> Self {
        self.linewidth = linewidth;
        self
    }

    pub fn with_sellmeier(mut self, sellmeier: Sellmeier) -> Self {
        self.label = sellmeier.label.clone();
        self.sellmeier = sellmeier;
        self
    }

    pub fn refractive_index(&self, omega: f64) -> Result<f64, DispersionError> {
        self.sellmeier.refractive_index(omega)
    }

    pub fn wavevector(&self, omega: f64) -> Result<f64, DispersionError> {
        self.sellmeier.wavevector(omega)
    }

    pub fn inverse_group_velocity(&self, omega: f64) -> Result<f64, DispersionError> {
        self.sellmeier.inverse_group_velocity(omega)
    }

    /// Forward pump–Stokes walk-off Δτ = (β_p − β_s)·L.
    pub fn group_delay_forward(
        &self,
        omega_p0: f64,
        omega_s0: f64,
    ) -> Result<f64, DispersionError> {
        Ok(
            (self.inverse_group_velocity(omega_p0)? - self.inverse_group_velocity(omega_s0)?)
                * self.length,
        )
    }

    /// Delay between backward Stokes photons born at the output and input faces,
    /// Δτ^← = (β_p + β_s)·L.
    pub fn group_delay_backward(
        &self,
        omega_p0: f64,
        omega_s0: f64,
    ) -> Result<f64, DispersionError> {
        Ok(
            (self.inverse_group_velocity(omega_p0)? + self.inverse_group_velocity(omega_s0)?)
                * self.length,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{wavelength_to_angular, wavenumber_to_angular};
    use proptest::prelude::*;

    // Frozen from an independent 50-digit evaluation of the same Sellmeier
    // formula (mpmath), λ = 775 nm.
    const N_775: f64 = 1.760_823_024_239_198_6;
    const K_775: f64 = 14_275_583.683_152_591;

    fn pump() -> f64 {
        wavelength_to_angular(775e-9)
    }

    fn stokes() -> f64 {
        pump() - wavenumber_to_angular(746.6)
    }

    #[test]
    fn vacuum_is_free_space() {
        let v = Sellmeier::vacuum();
        let w = 2.0e15;
        assert_eq!(v.refractive_index(w).unwrap(), 1.0);
        assert_eq!(v.wavevector(w).unwrap(), w / C_LIGHT);
        assert_eq!(v.inverse_group_velocity(w).unwrap(), 1.0 / C_LIGHT);
    }

    #[test]
    fn sapphire_golden_values() {
        let s = Sellmeier::sapphire_ordinary();
        let n = s.refractive_index(pump()).unwrap();
        assert!((n - N_775).abs() < 1e-14, "n = {n:.17}");
        let k = s.wavevector(pump()).unwrap();
        assert!(((k - K_775) / K_775).abs() < 1e-14, "k = {k:.8}");
    }

    #[test]
    fn sapphire_is_normally_dispersive() {
        let s = Sellmeier::sapphire_ordinary();
        let n_p = s.refractive_index(pump()).unwrap();
        let n_s = s.refractive_index(wavelength_to_angular(822e-9)).unwrap();
        assert!(n_p > n_s);
        assert!(
            s.inverse_group_velocity(pump()).unwrap() > s.inverse_group_velocity(stokes()).unwrap()
        );
    }

    #[test]
    fn out_of_window_is_an_error() {
        let s = Sellmeier::sapphire_ordinary();
        let err = s
            .refractive_index(wavelength_to_angular(150e-9))
            .unwrap_err();
        assert!(matches!(err, DispersionError::OutOfWindow { .. }));
        assert!(err.to_string().contains("200.0"));
        assert!(s.refractive_index(wavelength_to_angular(6e-6)).is_err());
    }

    #[test]
    fn k_increases_with_omega() {
        let s = Sellmeier::sapphire_ordinary();
        let (lo, hi) = (
            wavelength_to_angular(5.4e-6),
            wavelength_to_angular(0.21e-6),
        );
        let mut prev = 0.0;
        for i in 0..=2000 {
            let w = lo + (hi - lo) * i as f64 / 2000.0;
            let k = s.wavevector(w).unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn group_delays() {
        let m = MediumSpec::sapphire_reference();
        let fwd = m.group_delay_forward(pump(), stokes()).unwrap();
        let bwd = m.group_delay_backward(pump(), stokes()).unwrap();
        assert!(fwd > 0.0 && bwd > fwd);
        // 8 mm reference crystal: ≈65.55 fs forward walk-off, ≈95.09 ps
        // backward spread
        assert!((fwd / 6.555026817249478e-14 - 1.0).abs() < 1e-9, "{fwd:e}");
        assert!((bwd / 9.508888995485376e-11 - 1.0).abs() < 1e-9, "{bwd:e}");
        let half = m.clone().with_length(4e-3);
        assert_eq!(
            half.group_delay_forward(pump(), stokes()).unwrap(),
            fwd / 2.0
        );
        // antisymmetric / symmetric under exchange of the two centres
        assert_eq!(m.group_delay_forward(stokes(), pump()).unwrap(), -fwd);
        assert_eq!(m.group_delay_backward(stokes(), pump()).unwrap(), bwd);

        let vac = m.clone().with_sellmeier(Sellmeier::vacuum());
        assert_eq!(vac.group_delay_forward(pump(), stokes()).unwrap(), 0.0);
        let two_l_over_c = 2.0 * m.length / C_LIGHT;
        assert!((vac.group_delay_backward(pump(), stokes()).unwrap() - two_l_over_c).abs() < 1e-25);
    }

    #[test]
    fn constant_index_has_no_walkoff() {
        let m = MediumSpec::sapphire_reference().with_sellmeier(Sellmeier::constant_index(1.76));
        assert!(m.group_delay_forward(pump(), stokes()).unwrap().abs() < 1e-28);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn analytic_beta_matches_finite_difference(lambda_nm in 210.0f64..5400.0) {
            let s = Sellmeier::sapphire_ordinary();
            let w = wavelength_to_angular(lambda_nm * 1e-9);
            let h = 1e-6 * w;
            let fd = (s.wavevector(w + h).unwrap() - s.wavevector(w - h).unwrap()) / (2.0 * h);
            let an = s.inverse_group_velocity(w).unwrap();
            prop_assert!(((an - fd) / an).abs() < 1e-6);
        }

        #[test]
        fn outputs_finite(lambda_nm in 200.0f64..5500.0) {
            let s = Sellmeier::sapphire_ordinary();
            let w = wavelength_to_angular(lambda_nm * 1e-9);
            let n = s.refractive_index(w).unwrap();
            prop_assert!(n.is_finite() && n > 1.0);
            prop_assert!(s.inverse_group_velocity(w).unwrap().is_finite());
        }
    }
}
