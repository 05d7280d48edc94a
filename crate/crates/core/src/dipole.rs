//! The finite-dipole reduced system on the catenoid.
//!
//! A dipole is a counter-rotating pair `Γ_± = ±μ` held at fixed geodesic
//! separation `ℓ` along the tangent `t̂ = cos α ê_u + sin α ê_v`. To first
//! order in `ℓ` the pair sits at
//!
//! ```text
//! u_± = u ± (ℓ/(2 a h)) cos α,    v_± = v ± (ℓ/(2 h)) sin α,    h = cosh(v/a)
//! ```
//!
//! The center moves by the mutual advection of its own pair (self
//! propulsion, including each vortex's curvature self term) plus the
//! advection induced by every other dipole. The orientation turns by the
//! frame-projected differential velocity of the pair, external torques,
//! and the parallel-transport rate `tanh(v/a) u̇`:
//!
//! ```text
//! α̇ = α̇_self + α̇_ext + tanh(v/a) u̇
//! ```
//!
//! Two propulsion routes are kept deliberately distinct: the exact closed
//! forms (equal to the averaged pair velocities to rounding) and the
//! leading-order truncation `|V| = μ sech(v/a)/(2πℓ)` orthogonal to the
//! dipole axis. Their difference is O(ℓ²) relative, which the tests pin.

use crate::geometry::{CatenoidGeometry, SurfacePoint, COLLISION_KERNEL_FLOOR};
use crate::geodesics::{azimuthal_momentum, two_energy, GeodesicState};
use crate::integrator::{OdeSystem, RhsError};
use std::f64::consts::PI;
use thiserror::Error;

/// Above this `ℓ/a` the first-order placement is suspect; a warning
/// diagnostic is attached.
pub const SEPARATION_RATIO_WARN: f64 = 0.3;
/// Above this `ℓ/a` the model is not meaningful; construction fails.
pub const SEPARATION_RATIO_ERROR: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DipoleError {
    #[error("placed vortices of dipoles {n} and {m} are coincident (kernel {kernel:.3e})")]
    CoincidentVortices { n: usize, m: usize, kernel: f64 },
    #[error("dipole {index}: separation ratio l/a = {ratio:.3} exceeds {SEPARATION_RATIO_ERROR}")]
    SeparationTooLarge { index: usize, ratio: f64 },
    #[error("dipole {index}: {reason}")]
    InvalidDipole { index: usize, reason: String },
    #[error("dipole system is empty")]
    Empty,
}

/// Which self-propulsion expressions drive the center and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropulsionMode {
    /// Leading order in ℓ.
    Truncated,
    /// Exact closed forms for the placed pair.
    Full,
}

/// Center, orientation (unwrapped), separation and strength of one
/// finite dipole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleState {
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
    pub ell: f64,
    pub mu: f64,
}

impl DipoleState {
    pub fn new(u: f64, v: f64, alpha: f64, ell: f64, mu: f64) -> Self {
        Self { u, v, alpha, ell, mu }
    }

    fn validate(&self, index: usize, geom: &CatenoidGeometry) -> Result<(), DipoleError> {
        let finite = self.u.is_finite()
            && self.v.is_finite()
            && self.alpha.is_finite()
            && self.ell.is_finite()
            && self.mu.is_finite();
        if !finite {
            return Err(DipoleError::InvalidDipole {
                index,
                reason: "non-finite field".into(),
            });
        }
        if !(self.ell > 0.0) {
            return Err(DipoleError::InvalidDipole {
                index,
                reason: format!("separation l = {} must be positive", self.ell),
            });
        }
        if self.mu == 0.0 {
            return Err(DipoleError::InvalidDipole {
                index,
                reason: "strength mu must be nonzero".into(),
            });
        }
        let ratio = self.ell / geom.throat_radius();
        if ratio > SEPARATION_RATIO_ERROR {
            return Err(DipoleError::SeparationTooLarge { index, ratio });
        }
        Ok(())
    }
}

/// Ordered collection of dipoles, validated against a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleSystemState {
    dipoles: Vec<DipoleState>,
}

impl DipoleSystemState {
    pub fn new(geom: &CatenoidGeometry, dipoles: Vec<DipoleState>) -> Result<Self, DipoleError> {
        if dipoles.is_empty() {
            return Err(DipoleError::Empty);
        }
        for (i, d) in dipoles.iter().enumerate() {
            d.validate(i, geom)?;
        }
        Ok(Self { dipoles })
    }

    pub fn len(&self) -> usize {
        self.dipoles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dipoles.is_empty()
    }

    pub fn dipoles(&self) -> &[DipoleState] {
        &self.dipoles
    }

    /// Indices whose separation ratio is in the warn band.
    pub fn separation_warnings(&self, geom: &CatenoidGeometry) -> Vec<usize> {
        self.dipoles
            .iter()
            .enumerate()
            .filter(|(_, d)| d.ell / geom.throat_radius() > SEPARATION_RATIO_WARN)
            .map(|(i, _)| i)
            .collect()
    }

    /// Diagnostic flag: pairs of centers closer (chordally) than twice
    /// the largest separation, where the reduced model degrades.
    pub fn close_encounters(&self, geom: &CatenoidGeometry) -> Vec<(usize, usize)> {
        let max_ell = self
            .dipoles
            .iter()
            .map(|d| d.ell)
            .fold(0.0f64, f64::max);
        let mut pairs = Vec::new();
        for n in 0..self.dipoles.len() {
            for m in (n + 1)..self.dipoles.len() {
                let dn = &self.dipoles[n];
                let dm = &self.dipoles[m];
                let dist = geom.chordal_distance(
                    SurfacePoint::new(dn.u, dn.v),
                    SurfacePoint::new(dm.u, dm.v),
                );
                if dist < 2.0 * max_ell {
                    pairs.push((n, m));
                }
            }
        }
        pairs
    }

    /// Flat state `[u1, v1, a1, u2, v2, a2, ...]`; `ℓ` and `μ` are
    /// parameters, not dynamical variables (`ℓ̇ = 0` by construction).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(3 * self.dipoles.len());
        for d in &self.dipoles {
            y.extend_from_slice(&[d.u, d.v, d.alpha]);
        }
        y
    }

    pub fn from_flat(y: &[f64], ells: &[f64], mus: &[f64]) -> Self {
        assert_eq!(y.len(), 3 * ells.len());
        Self {
            dipoles: ells
                .iter()
                .zip(mus)
                .enumerate()
                .map(|(i, (&ell, &mu))| {
                    DipoleState::new(y[3 * i], y[3 * i + 1], y[3 * i + 2], ell, mu)
                })
                .collect(),
        }
    }
}

/// First-order placement of the ± vortices of a dipole.
pub fn place_vortices(geom: &CatenoidGeometry, d: &DipoleState) -> (SurfacePoint, SurfacePoint) {
    let a = geom.throat_radius();
    let h = geom.metric_factor(d.v);
    let du = d.ell / (2.0 * a * h) * d.alpha.cos();
    let dv = d.ell / (2.0 * h) * d.alpha.sin();
    (
        SurfacePoint::new(d.u + du, d.v + dv),
        SurfacePoint::new(d.u - du, d.v - dv),
    )
}

/// Velocities of the placed ± vortices under their mutual advection and
/// own curvature self terms (the two-vortex equations specialized to the
/// pair `Γ_± = ±μ`). Returned as `(plus, minus)` with entries `(u̇, v̇)`.
pub fn partner_velocities(
    geom: &CatenoidGeometry,
    d: &DipoleState,
) -> Result<((f64, f64), (f64, f64)), DipoleError> {
    let a = geom.throat_radius();
    let (p, m) = place_vortices(geom, d);
    let kernel = geom.pair_kernel(p, m);
    if kernel < COLLISION_KERNEL_FLOOR {
        return Err(DipoleError::CoincidentVortices { n: 0, m: 0, kernel });
    }
    let du = p.u - m.u;
    let dv = p.v - m.v;
    let hp2 = geom.metric_factor(p.v).powi(2);
    let hm2 = geom.metric_factor(m.v).powi(2);
    let mu = d.mu;
    let u_dot_p = mu / (4.0 * PI * a * a * hp2) * ((dv / a).sinh() / kernel + (p.v / a).tanh());
    let v_dot_p = -mu / (4.0 * PI * a * hp2) * du.sin() / kernel;
    let u_dot_m = mu / (4.0 * PI * a * a * hm2) * ((dv / a).sinh() / kernel - (m.v / a).tanh());
    let v_dot_m = -mu / (4.0 * PI * a * hm2) * du.sin() / kernel;
    Ok(((u_dot_p, v_dot_p), (u_dot_m, v_dot_m)))
}

/// Exact self-propulsion of the dipole center: the closed form of the
/// averaged pair velocities, valid at any admissible ℓ.
pub fn self_propulsion_full(
    geom: &CatenoidGeometry,
    d: &DipoleState,
) -> Result<(f64, f64), DipoleError> {
    let a = geom.throat_radius();
    let (p, m) = place_vortices(geom, d);
    let du = p.u - m.u;
    let dv = p.v - m.v;
    // denominator cos(Δu) − cosh(Δv/a) = −F
    let denom = du.cos() - (dv / a).cosh();
    if -denom < COLLISION_KERNEL_FLOOR {
        return Err(DipoleError::CoincidentVortices {
            n: 0,
            m: 0,
            kernel: -denom,
        });
    }
    let sech_p2 = 1.0 / geom.metric_factor(p.v).powi(2);
    let sech_m2 = 1.0 / geom.metric_factor(m.v).powi(2);
    let sinh = (dv / a).sinh();
    let u_dot = -d.mu / (8.0 * a * a * PI * denom)
        * (sech_m2 * (sinh + denom * (m.v / a).tanh())
            + sech_p2 * (sinh - denom * (p.v / a).tanh()));
    let v_dot = d.mu * (sech_m2 + sech_p2) * du.sin() / (8.0 * a * PI * denom);
    Ok((u_dot, v_dot))
}

/// Leading-order self propulsion, orthogonal to the dipole axis with
/// frame speed `μ sech(v/a)/(2πℓ)`:
///
/// ```text
/// u̇ =  μ sech(v/a) sin α / (2 a π ℓ)
/// v̇ = −μ sech(v/a) cos α / (2 π ℓ)
/// ```
pub fn self_propulsion_truncated(geom: &CatenoidGeometry, d: &DipoleState) -> (f64, f64) {
    let a = geom.throat_radius();
    let sech = 1.0 / geom.metric_factor(d.v);
    (
        d.mu * sech * d.alpha.sin() / (2.0 * a * PI * d.ell),
        -d.mu * d.alpha.cos() * sech / (2.0 * PI * d.ell),
    )
}

/// Frame-projected rotation rate of the pair under its own advection:
/// `α̇_self = (1/ℓ) ê_⊥ · (V_+ − V_−)` with frame components
/// `A = a[h(v_+) u̇_+ − h(v_−) u̇_−]`, `B = h(v_+) v̇_+ − h(v_−) v̇_−`.
pub fn orientation_self_rate(
    geom: &CatenoidGeometry,
    d: &DipoleState,
) -> Result<f64, DipoleError> {
    let (p, m) = place_vortices(geom, d);
    let ((up, vp), (um, vm)) = partner_velocities(geom, d)?;
    let a = geom.throat_radius();
    let big_a = a * (geom.metric_factor(p.v) * up - geom.metric_factor(m.v) * um);
    let big_b = geom.metric_factor(p.v) * vp - geom.metric_factor(m.v) * vm;
    Ok((-d.alpha.sin() * big_a + d.alpha.cos() * big_b) / d.ell)
}

/// Closed-form counterpart of [`orientation_self_rate`], kept as an
/// algebraically independent cross-check route.
pub fn orientation_self_rate_closed_form(
    geom: &CatenoidGeometry,
    d: &DipoleState,
) -> Result<f64, DipoleError> {
    let a = geom.throat_radius();
    let (p, m) = place_vortices(geom, d);
    let du = p.u - m.u;
    let dv = p.v - m.v;
    let denom = du.cos() - (dv / a).cosh();
    if -denom < COLLISION_KERNEL_FLOOR {
        return Err(DipoleError::CoincidentVortices {
            n: 0,
            m: 0,
            kernel: -denom,
        });
    }
    let core = d.alpha.cos() * du.sin() + d.alpha.sin() * (dv / a).sinh();
    let sech_p = 1.0 / geom.metric_factor(p.v);
    let sech_m = 1.0 / geom.metric_factor(m.v);
    let braces = -sech_m * (core + denom * d.alpha.sin() * (m.v / a).tanh())
        + sech_p * (core - denom * d.alpha.sin() * (p.v / a).tanh());
    Ok(d.mu * braces / (4.0 * a * d.ell * PI * denom))
}

/// Leading-order orientation self rate (the subleading term of the
/// expansion in ℓ; the O(1/ℓ) piece cancels identically):
///
/// ```text
/// α̇_self ≈ −μ sech³(v/a) sin α tanh(v/a) ℓ
///           (cos²α − 6 sin²α + 6 sin²α tanh²(v/a)) / (24 a³ π)
/// ```
pub fn orientation_self_rate_truncated(geom: &CatenoidGeometry, d: &DipoleState) -> f64 {
    let a = geom.throat_radius();
    let sech = 1.0 / geom.metric_factor(d.v);
    let tanh = (d.v / a).tanh();
    let s = d.alpha.sin();
    let c = d.alpha.cos();
    -d.mu * sech.powi(3) * s * tanh * d.ell * (c * c - 6.0 * s * s + 6.0 * s * s * tanh * tanh)
        / (24.0 * a.powi(3) * PI)
}

/// External advection felt by dipole `n`: the velocities of its placed
/// vortices induced by all vortices of all *other* dipoles (the pair's
/// own contribution lives in the self propulsion and is excluded here),
/// plus their mean, which advects the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalAdvection {
    /// Mean of the two raw velocities: the center advection.
    pub mean: (f64, f64),
    /// Raw velocity of the + vortex.
    pub plus: (f64, f64),
    /// Raw velocity of the − vortex.
    pub minus: (f64, f64),
}

impl ExternalAdvection {
    pub fn zero() -> Self {
        Self {
            mean: (0.0, 0.0),
            plus: (0.0, 0.0),
            minus: (0.0, 0.0),
        }
    }
}

pub fn external_advection(
    geom: &CatenoidGeometry,
    sys: &DipoleSystemState,
    n: usize,
) -> Result<ExternalAdvection, DipoleError> {
    let a = geom.throat_radius();
    let (pn, mn) = place_vortices(geom, &sys.dipoles()[n]);
    let mut raw = [(0.0f64, 0.0f64); 2];
    for (slot, point) in [pn, mn].into_iter().enumerate() {
        let h2 = geom.metric_factor(point.v).powi(2);
        let mut u_dot = 0.0;
        let mut v_dot = 0.0;
        for (m_idx, other) in sys.dipoles().iter().enumerate() {
            if m_idx == n {
                continue;
            }
            let (op, om) = place_vortices(geom, other);
            for (source, gamma) in [(op, other.mu), (om, -other.mu)] {
                let kernel = geom.pair_kernel(point, source);
                if kernel < COLLISION_KERNEL_FLOOR {
                    return Err(DipoleError::CoincidentVortices {
                        n,
                        m: m_idx,
                        kernel,
                    });
                }
                v_dot += gamma * (point.u - source.u).sin() / kernel;
                u_dot -= gamma * ((point.v - source.v) / a).sinh() / kernel;
            }
        }
        raw[slot] = (
            u_dot / (4.0 * PI * a * a * h2),
            v_dot / (4.0 * PI * a * h2),
        );
    }
    Ok(ExternalAdvection {
        mean: (
            0.5 * (raw[0].0 + raw[1].0),
            0.5 * (raw[0].1 + raw[1].1),
        ),
        plus: raw[0],
        minus: raw[1],
    })
}

/// Total orientation rate of dipole `n`: frame-projected self and
/// external differential velocities plus the parallel-transport term
/// `tanh(v/a) u̇` with `u̇` the total center rate.
pub fn orientation_rate(
    geom: &CatenoidGeometry,
    sys: &DipoleSystemState,
    n: usize,
) -> Result<f64, DipoleError> {
    let d = &sys.dipoles()[n];
    let ext = external_advection(geom, sys, n)?;
    let (u_self, _) = self_propulsion_full(geom, d)?;
    let alpha_self = orientation_self_rate(geom, d)?;
    let alpha_ext = external_torque_rate(geom, d, &ext);
    let u_total = u_self + ext.mean.0;
    Ok(alpha_self + alpha_ext + geom.transport_rotation_rate(d.v, u_total))
}

/// Frame projection of the external differential velocity, with the
/// metric factors taken at the placed vortex positions.
fn external_torque_rate(geom: &CatenoidGeometry, d: &DipoleState, ext: &ExternalAdvection) -> f64 {
    let a = geom.throat_radius();
    let (p, m) = place_vortices(geom, d);
    let big_a = a * (geom.metric_factor(p.v) * ext.plus.0 - geom.metric_factor(m.v) * ext.minus.0);
    let big_b = geom.metric_factor(p.v) * ext.plus.1 - geom.metric_factor(m.v) * ext.minus.1;
    (-d.alpha.sin() * big_a + d.alpha.cos() * big_b) / d.ell
}

/// Full right-hand side for every dipole: `(u̇, v̇, α̇)` per dipole.
pub fn dipole_system_rhs(
    geom: &CatenoidGeometry,
    sys: &DipoleSystemState,
    mode: PropulsionMode,
) -> Result<Vec<(f64, f64, f64)>, DipoleError> {
    let mut out = Vec::with_capacity(sys.len());
    for (n, d) in sys.dipoles().iter().enumerate() {
        let ext = if sys.len() == 1 {
            ExternalAdvection::zero()
        } else {
            external_advection(geom, sys, n)?
        };
        let (u_self, v_self) = match mode {
            PropulsionMode::Full => self_propulsion_full(geom, d)?,
            PropulsionMode::Truncated => self_propulsion_truncated(geom, d),
        };
        let alpha_self = match mode {
            PropulsionMode::Full => orientation_self_rate(geom, d)?,
            PropulsionMode::Truncated => orientation_self_rate_truncated(geom, d),
        };
        let u_dot = u_self + ext.mean.0;
        let v_dot = v_self + ext.mean.1;
        let alpha_dot = alpha_self
            + external_torque_rate(geom, d, &ext)
            + geom.transport_rotation_rate(d.v, u_dot);
        out.push((u_dot, v_dot, alpha_dot));
    }
    Ok(out)
}

/// ODE adapter: flat state `[u1, v1, α1, ...]` with fixed `ℓ_n`, `μ_n`.
/// Diagnostics are the geodesic invariants `(L, E)` of each center,
/// the quantities a tight dipole is expected to conserve.
pub struct DipoleOde {
    geom: CatenoidGeometry,
    ells: Vec<f64>,
    mus: Vec<f64>,
    mode: PropulsionMode,
}

impl DipoleOde {
    pub fn new(geom: CatenoidGeometry, sys: &DipoleSystemState, mode: PropulsionMode) -> Self {
        Self {
            geom,
            ells: sys.dipoles().iter().map(|d| d.ell).collect(),
            mus: sys.dipoles().iter().map(|d| d.mu).collect(),
            mode,
        }
    }

    pub fn state_at(&self, y: &[f64]) -> DipoleSystemState {
        DipoleSystemState::from_flat(y, &self.ells, &self.mus)
    }

    pub fn mode(&self) -> PropulsionMode {
        self.mode
    }
}

impl OdeSystem for DipoleOde {
    fn dim(&self) -> usize {
        3 * self.ells.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), RhsError> {
        let sys = self.state_at(y);
        match dipole_system_rhs(&self.geom, &sys, self.mode) {
            Ok(rates) => {
                for (i, (u_dot, v_dot, alpha_dot)) in rates.into_iter().enumerate() {
                    dydt[3 * i] = u_dot;
                    dydt[3 * i + 1] = v_dot;
                    dydt[3 * i + 2] = alpha_dot;
                }
                Ok(())
            }
            Err(DipoleError::CoincidentVortices { n, m, kernel }) => {
                Err(RhsError::Collision { i: n, j: m, kernel })
            }
            Err(_) => Err(RhsError::NonFinite),
        }
    }

    fn diagnostics(&self, _t: f64, y: &[f64]) -> Vec<f64> {
        let sys = self.state_at(y);
        match dipole_system_rhs(&self.geom, &sys, self.mode) {
            Ok(rates) => sys
                .dipoles()
                .iter()
                .zip(rates)
                .flat_map(|(d, (u_dot, v_dot, _))| {
                    let center = GeodesicState::new(d.u, d.v, u_dot, v_dot);
                    [
                        azimuthal_momentum(&self.geom, &center),
                        0.5 * two_energy(&self.geom, &center),
                    ]
                })
                .collect(),
            Err(_) => vec![f64::NAN; 2 * self.ells.len()],
        }
    }

    fn diagnostic_names(&self) -> Vec<String> {
        if self.ells.len() == 1 {
            vec!["L".into(), "E".into()]
        } else {
            (0..self.ells.len())
                .flat_map(|i| [format!("L{}", i + 1), format!("E{}", i + 1)])
                .collect()
        }
    }
}
