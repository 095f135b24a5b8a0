//! Oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use num_complex::Complex64;
use ramanpair::experiments::{Focusing, Scenario};
use ramanpair::quadrature::gauss_legendre;
use ramanpair::units::wavelength_width_to_angular;
use ramanpair::{GeometryMode, PairContext};

pub fn fwhm_nm(nm: f64) -> f64 {
    wavelength_width_to_angular(nm * 1e-9, 775e-9)
}

pub fn off_axis(fresnel: f64, phi: f64, nm: f64) -> Scenario {
    let mut s = Scenario::reference(fwhm_nm(nm));
    s.mode = GeometryMode::OffAxis3d;
    s.angle = phi;
    s.focusing = Focusing::Fresnel {
        pump: fresnel,
        collection: fresnel,
    };
    s
}

pub fn collinear(fresnel: f64, nm: f64) -> Scenario {
    let mut s = off_axis(fresnel, 0.0, nm);
    s.mode = GeometryMode::Collinear3d;
    s
}

/// ln ∫|β(q, z, φ)|² d²q by tensor Gauss–Legendre around the (numerically
/// located) Gaussian centre, independent of the closed-form α.
pub fn log_beta_norm(ctx: &PairContext, z: f64, phi: f64, nodes: usize) -> f64 {
    let f = |x: f64, y: f64| 2.0 * ctx.log_beta_offaxis((x, y), z, phi).re;
    let b = ctx.beams.expect("3D context");
    let h = 1.0 / b.w_p.min(b.w_f);
    let y0 = ctx.k_s0 * phi.sin();
    let axis = |along_x: bool| {
        let at = |t: f64| if along_x { f(t, y0) } else { f(0.0, y0 + t) };
        let (fm, f0, fp) = (at(-h), at(0.0), at(h));
        let a = -(fp - 2.0 * f0 + fm) / (2.0 * h * h);
        assert!(a > 0.0, "|β|² must decay in q");
        ((fp - fm) / (2.0 * h) / (2.0 * a), 1.0 / (2.0 * a).sqrt())
    };
    let (cx, sx) = axis(true);
    let (cy, sy) = axis(false);
    let cy = y0 + cy;
    let (t, w) = gauss_legendre(nodes);
    let span = 10.0;
    let mut vals = Vec::with_capacity(nodes * nodes);
    let mut m = f64::NEG_INFINITY;
    for (&tx, &wx) in t.iter().zip(&w) {
        for (&ty, &wy) in t.iter().zip(&w) {
            let v = f(cx + span * sx * tx, cy + span * sy * ty);
            m = m.max(v);
            vals.push((v, wx * wy));
        }
    }
    let sum: f64 = vals.iter().map(|&(v, wt)| (v - m).exp() * wt).sum();
    m + (sum * span * sx * span * sy).ln()
}

/// ln of the fiber projection minus ln(β · e^{ik(1−cosφ)z}) at one sample.
pub fn projection_mismatch(
    ctx: &PairContext,
    q: (f64, f64),
    z: f64,
    phi: f64,
    nodes: usize,
) -> Option<Complex64> {
    let proj = ramanpair::jointamp::fiber_projection_log(
        ctx,
        q,
        z,
        phi,
        ramanpair::jointamp::MuExpansion::Consistent,
        nodes,
    )?;
    let closed =
        ctx.log_beta_offaxis(q, z, phi) + Complex64::new(0.0, ctx.k_s0 * (1.0 - phi.cos()) * z);
    Some(proj - closed)
}
