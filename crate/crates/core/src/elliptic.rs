//! Incomplete elliptic integral of the first kind, parameter convention:
//!
//! ```text
//! F(φ | m) = ∫₀^φ dθ / √(1 − m sin²θ)
//! ```
//!
//! Note `m` multiplies `sin²θ` directly (the *parameter*, not the
//! modulus `k`; `m = k²`). The primary evaluation goes through Carlson's
//! symmetric form R_F by the duplication theorem; [`elliptic_f_oracle`]
//! evaluates the defining integral by adaptive Simpson quadrature on a
//! fully independent code path and exists to cross-check the primary.

use thiserror::Error;

/// Domain violations of `F(φ|m)`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipticError {
    #[error("parameter m = {0} outside [0, 1)")]
    ParameterOutOfRange(f64),
    #[error("amplitude phi = {0} outside [-pi/2, pi/2]")]
    AmplitudeOutOfRange(f64),
    #[error("m sin^2(phi) = {0} reaches the singularity")]
    Singular(f64),
}

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

fn check_domain(phi: f64, m: f64) -> Result<(), EllipticError> {
    if !m.is_finite() || !(0.0..1.0).contains(&m) {
        return Err(EllipticError::ParameterOutOfRange(m));
    }
    if !phi.is_finite() || phi.abs() > HALF_PI + 1e-12 {
        return Err(EllipticError::AmplitudeOutOfRange(phi));
    }
    let s = phi.sin();
    if m * s * s >= 1.0 {
        return Err(EllipticError::Singular(m * s * s));
    }
    Ok(())
}

/// Incomplete elliptic integral of the first kind `F(φ|m)`.
///
/// Valid for `|φ| ≤ π/2` and `0 ≤ m < 1`; odd in `φ`, and `F(φ|0) = φ`.
pub fn elliptic_f(phi: f64, m: f64) -> Result<f64, EllipticError> {
    check_domain(phi, m)?;
    if phi == 0.0 {
        return Ok(0.0);
    }
    if m == 0.0 {
        return Ok(phi);
    }
    let s = phi.sin();
    let c2 = phi.cos().powi(2);
    Ok(s * carlson_rf(c2, 1.0 - m * s * s, 1.0))
}

/// Carlson's symmetric integral R_F(x, y, z) by the duplication theorem.
///
/// Arguments must be nonnegative with at most one zero. The error
/// tolerance 2.5e-3 on the relative argument spread bounds the series
/// truncation error near 1e-16.
fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    const ERR_TOL: f64 = 2.5e-3;
    const THIRD: f64 = 1.0 / 3.0;
    const C1: f64 = 1.0 / 24.0;
    const C2: f64 = 0.1;
    const C3: f64 = 3.0 / 44.0;
    const C4: f64 = 1.0 / 14.0;
    debug_assert!(x >= 0.0 && y >= 0.0 && z >= 0.0);

    let (mut xt, mut yt, mut zt) = (x, y, z);
    let (mut dx, mut dy, mut dz);
    let mut ave;
    loop {
        let sx = xt.sqrt();
        let sy = yt.sqrt();
        let sz = zt.sqrt();
        let lam = sx * (sy + sz) + sy * sz;
        xt = 0.25 * (xt + lam);
        yt = 0.25 * (yt + lam);
        zt = 0.25 * (zt + lam);
        ave = THIRD * (xt + yt + zt);
        dx = (ave - xt) / ave;
        dy = (ave - yt) / ave;
        dz = (ave - zt) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERR_TOL {
            break;
        }
    }
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    (1.0 + (C1 * e2 - C2 - C3 * e3) * e2 + C4 * e3) / ave.sqrt()
}

/// Quadrature oracle for `F(φ|m)`: adaptive Simpson on the defining
/// integral, sharing no code with [`elliptic_f`].
pub fn elliptic_f_oracle(phi: f64, m: f64) -> Result<f64, EllipticError> {
    check_domain(phi, m)?;
    if phi == 0.0 {
        return Ok(0.0);
    }
    let f = |theta: f64| {
        let s = theta.sin();
        1.0 / (1.0 - m * s * s).sqrt()
    };
    Ok(adaptive_simpson(&f, 0.0, phi, 1e-13, 60))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(mid);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let lm = 0.5 * (a + mid);
    let rm = 0.5 * (mid + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, mid, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, mid, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
