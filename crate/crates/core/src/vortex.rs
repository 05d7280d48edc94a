//! The N-point-vortex phase space on the catenoid.
//!
//! With `F_ij = cosh((v_i−v_j)/a) − cos(u_i−u_j)` and `h_i = cosh(v_i/a)`,
//! the Hamiltonian is
//!
//! ```text
//! H = Σ_{i<j} Γ_i Γ_j log(F_ij)/4π − (1/4π) Σ_i Γ_i² log h_i
//! ```
//!
//! and Hamilton's equations with symplectic weight `Γ_i a h_i²` give
//!
//! ```text
//! v̇_i = (1/(4π a h_i²)) Σ_{j≠i} Γ_j sin(u_i−u_j)/F_ij
//! u̇_i = −(1/(4π a² h_i²)) Σ_{j≠i} Γ_j sinh((v_i−v_j)/a)/F_ij
//!       + (1/(4π a² h_i²)) Γ_i tanh(v_i/a)
//! ```
//!
//! The last term is the curvature-induced self interaction, attributed
//! per vortex inside `u̇_i`. The azimuthal momentum map
//! `J = Σ_i Γ_i S(v_i)` is conserved exactly at the vector-field level:
//! `Σ_i Γ_i a h_i² v̇_i` is an antisymmetric pair sum.

use crate::geometry::{CatenoidGeometry, SurfacePoint, COLLISION_KERNEL_FLOOR};
use crate::integrator::{OdeSystem, RhsError};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VortexError {
    #[error("vortices {i} and {j} are coincident (kernel {kernel:.3e})")]
    CoincidentVortices { i: usize, j: usize, kernel: f64 },
    #[error("vortex {0} has zero circulation")]
    ZeroCirculation(usize),
    #[error("vortex {0} has a non-finite coordinate or circulation")]
    NonFinite(usize),
    #[error("state needs at least one vortex")]
    Empty,
}

/// One point vortex: unwrapped azimuthal angle, height, circulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vortex {
    pub u: f64,
    pub v: f64,
    pub gamma: f64,
}

impl Vortex {
    pub fn new(u: f64, v: f64, gamma: f64) -> Self {
        Self { u, v, gamma }
    }

    pub fn position(&self) -> SurfacePoint {
        SurfacePoint::new(self.u, self.v)
    }
}

/// The phase-space point of N vortices.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexSystemState {
    vortices: Vec<Vortex>,
}

impl VortexSystemState {
    /// Validates finiteness, nonzero circulations, and pairwise
    /// separation above the collision cutoff.
    pub fn new(geom: &CatenoidGeometry, vortices: Vec<Vortex>) -> Result<Self, VortexError> {
        if vortices.is_empty() {
            return Err(VortexError::Empty);
        }
        for (i, w) in vortices.iter().enumerate() {
            if !(w.u.is_finite() && w.v.is_finite() && w.gamma.is_finite()) {
                return Err(VortexError::NonFinite(i));
            }
            if w.gamma == 0.0 {
                return Err(VortexError::ZeroCirculation(i));
            }
        }
        for i in 0..vortices.len() {
            for j in (i + 1)..vortices.len() {
                let kernel = geom.pair_kernel(vortices[i].position(), vortices[j].position());
                if kernel < COLLISION_KERNEL_FLOOR {
                    return Err(VortexError::CoincidentVortices { i, j, kernel });
                }
            }
        }
        Ok(Self { vortices })
    }

    pub fn len(&self) -> usize {
        self.vortices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vortices.is_empty()
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    pub fn circulations(&self) -> Vec<f64> {
        self.vortices.iter().map(|w| w.gamma).collect()
    }

    /// Flat phase-space vector `[u1, v1, u2, v2, ...]` (circulations are
    /// parameters, not dynamical variables).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.vortices.len());
        for w in &self.vortices {
            y.push(w.u);
            y.push(w.v);
        }
        y
    }

    pub fn from_flat(y: &[f64], gammas: &[f64]) -> Self {
        assert_eq!(y.len(), 2 * gammas.len());
        Self {
            vortices: gammas
                .iter()
                .enumerate()
                .map(|(i, &g)| Vortex::new(y[2 * i], y[2 * i + 1], g))
                .collect(),
        }
    }
}

/// Hamiltonian of Eq.-(1) form: pair Green's functions plus the
/// curvature self term. Invariant under a global rotation of all `u_i`.
pub fn hamiltonian(geom: &CatenoidGeometry, state: &VortexSystemState) -> Result<f64, VortexError> {
    let ws = state.vortices();
    let mut h = 0.0;
    for i in 0..ws.len() {
        for j in (i + 1)..ws.len() {
            let g = geom
                .greens_function(ws[i].position(), ws[j].position())
                .map_err(|_| VortexError::CoincidentVortices {
                    i,
                    j,
                    kernel: geom.pair_kernel(ws[i].position(), ws[j].position()),
                })?;
            h += ws[i].gamma * ws[j].gamma * g;
        }
        h -= ws[i].gamma * ws[i].gamma * geom.metric_factor(ws[i].v).ln() / (4.0 * PI);
    }
    Ok(h)
}

/// Momentum map `J = Σ Γ_i S(v_i)` of the azimuthal U(1) symmetry.
pub fn momentum_map(geom: &CatenoidGeometry, state: &VortexSystemState) -> f64 {
    state
        .vortices()
        .iter()
        .map(|w| w.gamma * geom.momentum_potential(w.v))
        .sum()
}

/// Coordinate velocities `(u̇_i, v̇_i)` for every vortex, mutual terms
/// plus the per-vortex self term.
pub fn rhs(
    geom: &CatenoidGeometry,
    state: &VortexSystemState,
) -> Result<Vec<(f64, f64)>, VortexError> {
    let ws = state.vortices();
    let a = geom.throat_radius();
    let mut out = Vec::with_capacity(ws.len());
    for i in 0..ws.len() {
        let h2 = geom.metric_factor(ws[i].v).powi(2);
        let mut u_dot = 0.0;
        let mut v_dot = 0.0;
        for j in 0..ws.len() {
            if j == i {
                continue;
            }
            let kernel = geom.pair_kernel(ws[i].position(), ws[j].position());
            if kernel < COLLISION_KERNEL_FLOOR {
                return Err(VortexError::CoincidentVortices { i, j, kernel });
            }
            v_dot += ws[j].gamma * (ws[i].u - ws[j].u).sin() / kernel;
            u_dot -= ws[j].gamma * ((ws[i].v - ws[j].v) / a).sinh() / kernel;
        }
        v_dot /= 4.0 * PI * a * h2;
        u_dot /= 4.0 * PI * a * a * h2;
        u_dot += ws[i].gamma * (ws[i].v / a).tanh() / (4.0 * PI * a * a * h2);
        out.push((u_dot, v_dot));
    }
    Ok(out)
}

/// Compares the analytic velocities against central finite differences
/// of the Hamiltonian through the symplectic weight `Γ_i a h_i²`:
///
/// ```text
/// Γ_i a h² v̇_i − ∂H/∂u_i   and   Γ_i a h² u̇_i + ∂H/∂v_i
/// ```
///
/// Returns the maximum absolute residual over all vortices.
pub fn hamiltonian_consistency_check(
    geom: &CatenoidGeometry,
    state: &VortexSystemState,
    h_step: f64,
) -> Result<f64, VortexError> {
    assert!(h_step > 0.0, "finite-difference step must be positive");
    let velocities = rhs(geom, state)?;
    let a = geom.throat_radius();
    let gammas = state.circulations();
    let y0 = state.to_flat();
    let h_of = |y: &[f64]| -> Result<f64, VortexError> {
        hamiltonian(geom, &VortexSystemState::from_flat(y, &gammas))
    };
    let mut max_residual = 0.0f64;
    for i in 0..state.len() {
        let weight = gammas[i] * a * geom.metric_factor(state.vortices()[i].v).powi(2);
        for (coord, expected) in [(2 * i, weight * velocities[i].1), (2 * i + 1, -weight * velocities[i].0)] {
            let mut yp = y0.clone();
            let mut ym = y0.clone();
            yp[coord] += h_step;
            ym[coord] -= h_step;
            let grad = (h_of(&yp)? - h_of(&ym)?) / (2.0 * h_step);
            max_residual = max_residual.max((grad - expected).abs());
        }
    }
    Ok(max_residual)
}

/// ODE-system adapter for the integrator. Circulations are fixed;
/// the flat state is `[u1, v1, u2, v2, ...]` and the per-sample
/// diagnostics are `H` and `J`.
pub struct VortexOde {
    geom: CatenoidGeometry,
    gammas: Vec<f64>,
}

impl VortexOde {
    pub fn new(geom: CatenoidGeometry, state: &VortexSystemState) -> Self {
        Self {
            geom,
            gammas: state.circulations(),
        }
    }

    pub fn geometry(&self) -> &CatenoidGeometry {
        &self.geom
    }

    pub fn circulations(&self) -> &[f64] {
        &self.gammas
    }

    pub fn state_at(&self, y: &[f64]) -> VortexSystemState {
        VortexSystemState::from_flat(y, &self.gammas)
    }
}

impl OdeSystem for VortexOde {
    fn dim(&self) -> usize {
        2 * self.gammas.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), RhsError> {
        let state = VortexSystemState::from_flat(y, &self.gammas);
        match rhs(&self.geom, &state) {
            Ok(vel) => {
                for (i, (u_dot, v_dot)) in vel.into_iter().enumerate() {
                    dydt[2 * i] = u_dot;
                    dydt[2 * i + 1] = v_dot;
                }
                Ok(())
            }
            Err(VortexError::CoincidentVortices { i, j, kernel }) => {
                Err(RhsError::Collision { i, j, kernel })
            }
            Err(_) => Err(RhsError::NonFinite),
        }
    }

    fn diagnostics(&self, _t: f64, y: &[f64]) -> Vec<f64> {
        let state = VortexSystemState::from_flat(y, &self.gammas);
        let h = hamiltonian(&self.geom, &state).unwrap_or(f64::NAN);
        let j = momentum_map(&self.geom, &state);
        vec![h, j]
    }

    fn diagnostic_names(&self) -> Vec<String> {
        vec!["H".into(), "J".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn geom(a: f64) -> CatenoidGeometry {
        CatenoidGeometry::new(a).unwrap()
    }

    fn state(geom: &CatenoidGeometry, data: &[(f64, f64, f64)]) -> VortexSystemState {
        VortexSystemState::new(
            geom,
            data.iter().map(|&(u, v, g)| Vortex::new(u, v, g)).collect(),
        )
        .unwrap()
    }

    /// Random state with all pair kernels comfortably above the cutoff.
    fn random_state(rng: &mut StdRng, geom: &CatenoidGeometry, n: usize) -> VortexSystemState {
        loop {
            let data: Vec<Vortex> = (0..n)
                .map(|_| {
                    let mut g: f64 = rng.gen_range(-2.0..2.0);
                    if g.abs() < 0.5 {
                        g = 0.5f64.copysign(g + f64::MIN_POSITIVE);
                    }
                    Vortex::new(rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5), g)
                })
                .collect();
            let min_kernel = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| geom.pair_kernel(data[i].position(), data[j].position()))
                .fold(f64::INFINITY, f64::min);
            if n == 1 || min_kernel > 1e-2 {
                return VortexSystemState::new(geom, data).unwrap();
            }
        }
    }

    #[test]
    fn state_validation() {
        let g = geom(1.0);
        assert!(matches!(
            VortexSystemState::new(&g, vec![]),
            Err(VortexError::Empty)
        ));
        assert!(matches!(
            VortexSystemState::new(&g, vec![Vortex::new(0.0, 0.0, 0.0)]),
            Err(VortexError::ZeroCirculation(0))
        ));
        assert!(matches!(
            VortexSystemState::new(
                &g,
                vec![Vortex::new(0.1, 0.2, 1.0), Vortex::new(0.1, 0.2, -1.0)]
            ),
            Err(VortexError::CoincidentVortices { i: 0, j: 1, .. })
        ));
    }

    #[test]
    fn hamiltonian_single_vortex_at_neck_is_zero() {
        let g = geom(1.0);
        let s = state(&g, &[(0.3, 0.0, 1.0)]);
        assert_eq!(hamiltonian(&g, &s).unwrap(), 0.0);
    }

    #[test]
    fn hamiltonian_neck_dipole_reference() {
        // Two opposite unit vortices at (0, ±0.05), a = 1.
        let g = geom(1.0);
        let s = state(&g, &[(0.0, 0.05, 1.0), (0.0, -0.05, -1.0)]);
        assert_relative_eq!(
            hamiltonian(&g, &s).unwrap(),
            0.42136152960270587,
            max_relative = 1e-13
        );
    }

    #[test]
    fn hamiltonian_rotation_invariance() {
        let g = geom(0.8);
        let mut rng = StdRng::seed_from_u64(7);
        let s = random_state(&mut rng, &g, 4);
        let h0 = hamiltonian(&g, &s).unwrap();
        let rotated: Vec<Vortex> = s
            .vortices()
            .iter()
            .map(|w| Vortex::new(w.u + 0.7, w.v, w.gamma))
            .collect();
        let h1 = hamiltonian(&g, &VortexSystemState::new(&g, rotated).unwrap()).unwrap();
        assert_abs_diff_eq!(h0, h1, epsilon = 1e-14 * h0.abs().max(1.0));
    }

    #[test]
    fn momentum_map_values() {
        let g = geom(1.0);
        // symmetric opposite pair at equal height: J = 0 exactly
        let s = state(&g, &[(0.05, -2.0, 1.0), (-0.05, -2.0, -1.0)]);
        assert_eq!(momentum_map(&g, &s), 0.0);
        // neck dipole: J = 2 S(0.05)
        let s = state(&g, &[(0.0, 0.05, 1.0), (0.0, -0.05, -1.0)]);
        assert_relative_eq!(momentum_map(&g, &s), 0.10008337500992201, max_relative = 1e-14);
        // linear in the circulations
        let doubled = state(&g, &[(0.0, 0.05, 2.0), (0.0, -0.05, -2.0)]);
        assert_relative_eq!(
            momentum_map(&g, &doubled),
            2.0 * momentum_map(&g, &s),
            max_relative = 1e-15
        );
    }

    #[test]
    fn rhs_single_vortex() {
        let g = geom(1.0);
        // at the neck the self term vanishes
        let vel = rhs(&g, &state(&g, &[(0.2, 0.0, 1.0)])).unwrap();
        assert_eq!(vel[0], (0.0, 0.0));
        // off the neck only the azimuthal self drift remains
        let vel = rhs(&g, &state(&g, &[(0.0, 1.0, 1.0)])).unwrap();
        assert_eq!(vel[0].1, 0.0);
        assert_relative_eq!(vel[0].0, 0.025452854610155323, max_relative = 1e-14);
    }

    #[test]
    fn rhs_equal_azimuth_pair_has_no_radial_velocity() {
        let g = geom(1.0);
        let vel = rhs(&g, &state(&g, &[(0.4, 0.3, 1.0), (0.4, -0.2, -1.0)])).unwrap();
        assert_eq!(vel[0].1, 0.0);
        assert_eq!(vel[1].1, 0.0);
    }

    #[test]
    fn rhs_rotation_equivariance_and_gamma_reversal() {
        let g = geom(1.3);
        let mut rng = StdRng::seed_from_u64(21);
        for n in [2, 3, 5] {
            let s = random_state(&mut rng, &g, n);
            let vel = rhs(&g, &s).unwrap();
            let rotated = VortexSystemState::new(
                &g,
                s.vortices()
                    .iter()
                    .map(|w| Vortex::new(w.u + 1.1, w.v, w.gamma))
                    .collect(),
            )
            .unwrap();
            for (a, b) in vel.iter().zip(rhs(&g, &rotated).unwrap()) {
                assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-15);
                assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-15);
            }
            let negated = VortexSystemState::new(
                &g,
                s.vortices()
                    .iter()
                    .map(|w| Vortex::new(w.u, w.v, -w.gamma))
                    .collect(),
            )
            .unwrap();
            for (a, b) in vel.iter().zip(rhs(&g, &negated).unwrap()) {
                assert_eq!(a.0, -b.0);
                assert_eq!(a.1, -b.1);
            }
        }
    }

    #[test]
    fn momentum_map_conserved_at_vector_field_level() {
        let g = geom(1.0);
        let mut rng = StdRng::seed_from_u64(3);
        for n in [2, 3, 4, 6] {
            for _ in 0..20 {
                let s = random_state(&mut rng, &g, n);
                let vel = rhs(&g, &s).unwrap();
                let sum: f64 = s
                    .vortices()
                    .iter()
                    .zip(vel.iter())
                    .map(|(w, (_, v_dot))| {
                        w.gamma * g.throat_radius() * g.metric_factor(w.v).powi(2) * v_dot
                    })
                    .sum();
                assert!(sum.abs() <= 1e-13, "J generator residual {sum:.3e}");
            }
        }
    }

    #[test]
    fn consistency_check_random_states() {
        let g = geom(1.0);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..5 {
            let s = random_state(&mut rng, &g, 3);
            let res = hamiltonian_consistency_check(&g, &s, 1e-6).unwrap();
            assert!(res <= 1e-7, "residual {res:.3e}");
        }
    }

    #[test]
    fn consistency_check_fig4_initial_state() {
        let g = geom(1.0);
        let s = state(
            &g,
            &[
                (0.0, 0.07, -1.0),
                (0.07, 0.0, 1.0),
                (0.97, 1.0, 1.0),
                (1.0, 0.97, -1.0),
            ],
        );
        let res = hamiltonian_consistency_check(&g, &s, 1e-6).unwrap();
        assert!(res <= 1e-7, "residual {res:.3e}");
    }

    #[test]
    fn consistency_check_single_vortex_exercises_self_term() {
        let g = geom(1.0);
        for v in [-1.0, 0.3, 2.0] {
            let s = state(&g, &[(0.0, v, 1.4)]);
            let res = hamiltonian_consistency_check(&g, &s, 1e-6).unwrap();
            assert!(res <= 1e-9, "residual {res:.3e} at v={v}");
        }
    }
}
