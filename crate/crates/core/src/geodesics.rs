//! Geodesics of the catenoid metric: classification, closed-form orbits,
//! and direct numerical integration for cross-validation.
//!
//! The geodesic equations
//!
//! ```text
//! v̈ + (1/a) tanh(v/a) v̇² − a tanh(v/a) u̇² = 0
//! ü + (2/a) tanh(v/a) u̇ v̇ = 0
//! ```
//!
//! conserve the azimuthal momentum `p_u = a² cosh²(v/a) u̇` and the
//! normalization `2E = cosh²(v/a)(v̇² + a² u̇²)`. The dimensionless ratio
//! `Λ = p_u / (a √(2E))` classifies every orbit:
//!
//! * `Λ = 0` — meridional (u constant),
//! * `0 < |Λ| < 1` — trans-throat spiral, passes the neck,
//! * `|Λ| = 1` — the circular neck geodesic at v = 0,
//! * `|Λ| > 1` — trapped one-sided orbit with turning point
//!   `cosh(v_turn/a) = |Λ|`.
//!
//! In the spiralling regimes the orbit integrates in closed form through
//! the incomplete elliptic integral `F(φ|m)` with `m = Λ²` (subcritical)
//! or `m = 1/Λ²` (supercritical), from
//! `du/dv = ± Λ / (a √(cosh²(v/a) − Λ²))`.

use crate::elliptic::{elliptic_f, EllipticError};
use crate::geometry::CatenoidGeometry;
use crate::integrator::{
    integrate, IntegratorConfig, IntegratorError, OdeSystem, RhsError, TrajectoryRecord,
};
use thiserror::Error;

/// Band for classifying Λ against 0 and ±1 from floating-point data.
pub const LAMBDA_TOLERANCE: f64 = 1e-9;

/// Half-width of the near-turning-point window in which the orbit is
/// evaluated by a local square-root expansion instead of the elliptic
/// closed form (whose arcsin argument degenerates to 0/0 there).
pub const TURNING_POINT_WINDOW: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error("degenerate velocity: 2E = {0} is not positive")]
    DegenerateVelocity(f64),
    #[error("orbit form not defined in the {0:?} regime")]
    WrongRegime(Regime),
    #[error("v = {v} is inside the forbidden band |v| < v_turn = {v_turn}")]
    OutsideDomain { v: f64, v_turn: f64 },
    #[error("elliptic evaluation failed: {0}")]
    Elliptic(#[from] EllipticError),
    #[error("integration setup failed: {0}")]
    Integrator(#[from] IntegratorError),
}

/// Orbit family of a geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Meridional,
    Subcritical,
    Critical,
    Supercritical,
}

/// Conserved data of one geodesic: momenta, class parameter, regime,
/// turning point (trapped orbits only), and the ± branch of the orbit
/// equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSpec {
    pub p_u: f64,
    pub energy: f64,
    pub lambda: f64,
    pub regime: Regime,
    pub v_turn: Option<f64>,
    pub sign: f64,
}

/// Position and coordinate velocity along a geodesic (per unit affine
/// parameter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicState {
    pub u: f64,
    pub v: f64,
    pub u_dot: f64,
    pub v_dot: f64,
}

impl GeodesicState {
    pub fn new(u: f64, v: f64, u_dot: f64, v_dot: f64) -> Self {
        Self { u, v, u_dot, v_dot }
    }

    /// Builds a state realizing the invariants `(Λ, 2E)` at height `v0`,
    /// with `v̇` taking the requested sign. Fails if `cosh²(v0/a) < Λ²`
    /// (below the turning point, where no real velocity exists).
    pub fn from_invariants(
        geom: &CatenoidGeometry,
        lambda: f64,
        two_e: f64,
        u0: f64,
        v0: f64,
        v_dot_sign: f64,
    ) -> Result<Self, GeodesicError> {
        if !(two_e > 0.0) {
            return Err(GeodesicError::DegenerateVelocity(two_e));
        }
        let a = geom.throat_radius();
        let h = geom.metric_factor(v0);
        let radicand = 1.0 - lambda * lambda / (h * h);
        if radicand < 0.0 {
            return Err(GeodesicError::OutsideDomain {
                v: v0,
                v_turn: a * lambda.abs().acosh(),
            });
        }
        let u_dot = lambda * two_e.sqrt() / (a * h * h);
        let v_dot = v_dot_sign.signum() * two_e.sqrt() / h * radicand.sqrt();
        Ok(Self::new(u0, v0, u_dot, v_dot))
    }

    pub fn to_flat(&self) -> [f64; 4] {
        [self.u, self.v, self.u_dot, self.v_dot]
    }

    pub fn from_flat(y: &[f64]) -> Self {
        Self::new(y[0], y[1], y[2], y[3])
    }
}

/// Azimuthal momentum `p_u = a² cosh²(v/a) u̇` of a state.
pub fn azimuthal_momentum(geom: &CatenoidGeometry, state: &GeodesicState) -> f64 {
    let a = geom.throat_radius();
    a * a * geom.metric_factor(state.v).powi(2) * state.u_dot
}

/// Normalization `2E = cosh²(v/a)(v̇² + a² u̇²)` of a state.
pub fn two_energy(geom: &CatenoidGeometry, state: &GeodesicState) -> f64 {
    let a = geom.throat_radius();
    geom.metric_factor(state.v).powi(2)
        * (state.v_dot * state.v_dot + a * a * state.u_dot * state.u_dot)
}

/// Computes the conserved pair, Λ, the regime tag and (for trapped
/// orbits) the turning point from one phase-space point.
pub fn classify(
    geom: &CatenoidGeometry,
    state: &GeodesicState,
) -> Result<GeodesicSpec, GeodesicError> {
    let a = geom.throat_radius();
    let p_u = azimuthal_momentum(geom, state);
    let two_e = two_energy(geom, state);
    if !(two_e > 0.0) || !two_e.is_finite() {
        return Err(GeodesicError::DegenerateVelocity(two_e));
    }
    let lambda = p_u / (a * two_e.sqrt());
    let abs = lambda.abs();
    let (regime, v_turn) = if abs <= LAMBDA_TOLERANCE {
        (Regime::Meridional, None)
    } else if (abs - 1.0).abs() <= LAMBDA_TOLERANCE {
        (Regime::Critical, None)
    } else if abs < 1.0 {
        (Regime::Subcritical, None)
    } else {
        (Regime::Supercritical, Some(a * abs.acosh()))
    };
    let sign = if state.v_dot != 0.0 {
        state.v_dot.signum()
    } else if regime == Regime::Supercritical && state.v != 0.0 {
        // starting exactly at a turning point; |v| can only grow
        state.v.signum()
    } else {
        1.0
    };
    Ok(GeodesicSpec {
        p_u,
        energy: 0.5 * two_e,
        lambda,
        regime,
        v_turn,
        sign,
    })
}

/// Λ of the effective geodesic followed by a tight dipole, from the mean
/// position and mean velocity of the pair.
pub fn lambda_from_dipole(
    geom: &CatenoidGeometry,
    mean_state: &GeodesicState,
) -> Result<f64, GeodesicError> {
    Ok(classify(geom, mean_state)?.lambda)
}

/// Closed-form orbit `u(v)` on the chosen branch.
///
/// Subcritical: `u − u₀ = ± Λ F(arcsin(sinh(v/a)/√(cosh²(v/a) − Λ²)) | Λ²)`.
/// Supercritical: `u − u₀ = ± F(arcsin(√(cosh²(v/a) − Λ²)/sinh(v/a)) | 1/Λ²)`,
/// defined for `|v| ≥ v_turn`; within [`TURNING_POINT_WINDOW`] of the
/// turning point a square-root expansion of the orbit equation is used.
pub fn orbit_u_of_v(
    spec: &GeodesicSpec,
    geom: &CatenoidGeometry,
    v: f64,
    u0: f64,
) -> Result<f64, GeodesicError> {
    let a = geom.throat_radius();
    let lambda = spec.lambda;
    let x = v / a;
    match spec.regime {
        Regime::Meridional | Regime::Critical => Err(GeodesicError::WrongRegime(spec.regime)),
        Regime::Subcritical => {
            let denom = (x.cosh().powi(2) - lambda * lambda).sqrt();
            let phi = (x.sinh() / denom).clamp(-1.0, 1.0).asin();
            Ok(u0 + spec.sign * lambda * elliptic_f(phi, lambda * lambda)?)
        }
        Regime::Supercritical => {
            let v_turn = spec.v_turn.expect("supercritical spec carries v_turn");
            let slack = v.abs() - v_turn;
            if slack < -TURNING_POINT_WINDOW {
                return Err(GeodesicError::OutsideDomain { v, v_turn });
            }
            if slack < TURNING_POINT_WINDOW {
                // Local expansion of du/dv = ±Λ/(a √(cosh²(v/a) − Λ²)):
                // the radicand vanishes linearly, so u − u₀ grows like a
                // square root of the distance to the turning point.
                let delta = slack.max(0.0);
                let rate = (2.0 * v_turn / a).sinh();
                return Ok(u0
                    + spec.sign * lambda * v.signum() * 2.0 * (delta / (a * rate)).sqrt());
            }
            let denom = (x.cosh().powi(2) - lambda * lambda).max(0.0).sqrt();
            let phi = (denom / x.sinh()).clamp(-1.0, 1.0).asin();
            Ok(u0 + spec.sign * lambda.signum() * elliptic_f(phi, 1.0 / (lambda * lambda))?)
        }
    }
}

/// The geodesic equations as a first-order system over
/// `[u, v, u̇, v̇]`, with diagnostics `p_u` and `E`.
pub struct GeodesicOde {
    geom: CatenoidGeometry,
}

impl GeodesicOde {
    pub fn new(geom: CatenoidGeometry) -> Self {
        Self { geom }
    }
}

impl OdeSystem for GeodesicOde {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), RhsError> {
        let a = self.geom.throat_radius();
        let (u_dot, v, v_dot) = (y[2], y[1], y[3]);
        let tanh = (v / a).tanh();
        dydt[0] = u_dot;
        dydt[1] = v_dot;
        dydt[2] = -2.0 / a * tanh * u_dot * v_dot;
        dydt[3] = -tanh / a * v_dot * v_dot + a * tanh * u_dot * u_dot;
        if dydt.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(RhsError::NonFinite)
        }
    }

    fn diagnostics(&self, _t: f64, y: &[f64]) -> Vec<f64> {
        let state = GeodesicState::from_flat(y);
        vec![
            azimuthal_momentum(&self.geom, &state),
            0.5 * two_energy(&self.geom, &state),
        ]
    }

    fn diagnostic_names(&self) -> Vec<String> {
        vec!["p_u".into(), "E".into()]
    }
}

/// Integrates the geodesic equations from `state0` to `t_final` at the
/// requested tolerance, sampling densely. The returned record carries
/// per-sample `p_u` and `E` for drift monitoring.
pub fn integrate_geodesic(
    geom: &CatenoidGeometry,
    state0: &GeodesicState,
    t_final: f64,
    tol: f64,
) -> Result<TrajectoryRecord, GeodesicError> {
    let config = IntegratorConfig {
        rel_tol: tol,
        abs_tol: tol,
        sample_interval: (t_final / 1000.0).max(1e-6),
        ..IntegratorConfig::default()
    };
    let system = GeodesicOde::new(*geom);
    Ok(integrate(&system, &state0.to_flat(), 0.0, t_final, &config)?)
}
