//! Intrinsic geometry of the catenoid.
//!
//! The surface is the catenoid of throat radius `a`, embedded as
//!
//! ```text
//! X(v, u) = (a cosh(v/a) cos u, a cosh(v/a) sin u, v)
//! ```
//!
//! with metric `ds² = cosh²(v/a) (dv² + a² du²)` and area element
//! `dA = a cosh²(v/a) dv du`. Everything the dynamics needs lives here:
//! the metric factor `h(v) = cosh(v/a)`, the pairwise interaction kernel
//! `F = cosh(Δv/a) − cos(Δu)`, the hydrodynamic Green's function
//! `G = log(F)/4π`, the azimuthal momentum potential
//! `S(v) = (a/2)v + (a²/4) sinh(2v/a)` with `S'(v) = a cosh²(v/a)`,
//! the nonvanishing Christoffel symbols, and the rotation rate of a
//! parallel-transported tangent vector, `tanh(v/a) u̇`.

use thiserror::Error;

/// Kernel floor below which two vortices count as coincident.
///
/// The Green's function and the velocity field are singular where
/// `F = 0`; rather than regularize we abort with a structured error.
pub const COLLISION_KERNEL_FLOOR: f64 = 1e-12;

/// Errors raised by geometric kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// Two points are closer than the collision cutoff allows.
    #[error("coincident points: pair kernel {kernel:.3e} below cutoff {cutoff:.3e}")]
    CoincidentPoints { kernel: f64, cutoff: f64 },
    /// Throat radius must be strictly positive and finite.
    #[error("invalid throat radius {0}: must be finite and > 0")]
    InvalidThroatRadius(f64),
}

/// The catenoid of throat radius `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatenoidGeometry {
    a: f64,
}

impl CatenoidGeometry {
    /// Builds the geometry, rejecting `a ≤ 0` and non-finite radii.
    pub fn new(a: f64) -> Result<Self, GeometryError> {
        if !a.is_finite() || a <= 0.0 {
            return Err(GeometryError::InvalidThroatRadius(a));
        }
        Ok(Self { a })
    }

    /// Throat radius `a`.
    #[inline]
    pub fn throat_radius(&self) -> f64 {
        self.a
    }

    /// Metric factor `h(v) = cosh(v/a)`, always ≥ 1.
    #[inline]
    pub fn metric_factor(&self, v: f64) -> f64 {
        (v / self.a).cosh()
    }

    /// Pairwise interaction kernel `F = cosh((v_p − v_q)/a) − cos(u_p − u_q)`.
    ///
    /// Symmetric in its arguments, 2π-periodic in each `u`, and zero iff
    /// the points coincide modulo a full turn in `u`.
    #[inline]
    pub fn pair_kernel(&self, p: SurfacePoint, q: SurfacePoint) -> f64 {
        ((p.v - q.v) / self.a).cosh() - (p.u - q.u).cos()
    }

    /// Hydrodynamic Green's function `G(p, q) = log(F(p, q)) / 4π`.
    ///
    /// Fails with [`GeometryError::CoincidentPoints`] when the kernel is
    /// below [`COLLISION_KERNEL_FLOOR`].
    pub fn greens_function(&self, p: SurfacePoint, q: SurfacePoint) -> Result<f64, GeometryError> {
        let kernel = self.pair_kernel(p, q);
        if kernel < COLLISION_KERNEL_FLOOR {
            return Err(GeometryError::CoincidentPoints {
                kernel,
                cutoff: COLLISION_KERNEL_FLOOR,
            });
        }
        Ok(kernel.ln() / (4.0 * std::f64::consts::PI))
    }

    /// Momentum potential `S(v) = (a/2) v + (a²/4) sinh(2v/a)`.
    ///
    /// Odd in `v`; its derivative is the area weight `a cosh²(v/a)`.
    #[inline]
    pub fn momentum_potential(&self, v: f64) -> f64 {
        0.5 * self.a * v + 0.25 * self.a * self.a * (2.0 * v / self.a).sinh()
    }

    /// The three nonvanishing Christoffel symbols at height `v`:
    /// `(Γ^v_vv, Γ^v_uu, Γ^u_uv) = ((1/a) tanh(v/a), −a tanh(v/a), (1/a) tanh(v/a))`.
    #[inline]
    pub fn christoffel(&self, v: f64) -> ChristoffelSymbols {
        let t = (v / self.a).tanh();
        ChristoffelSymbols {
            v_vv: t / self.a,
            v_uu: -self.a * t,
            u_uv: t / self.a,
        }
    }

    /// Rotation rate `tanh(v/a) u̇` of a parallel-transported tangent vector
    /// carried along a path with azimuthal coordinate velocity `u_dot`.
    #[inline]
    pub fn transport_rotation_rate(&self, v: f64, u_dot: f64) -> f64 {
        (v / self.a).tanh() * u_dot
    }

    /// 3D embedding of a surface point.
    #[inline]
    pub fn embed(&self, p: SurfacePoint) -> [f64; 3] {
        let r = self.a * self.metric_factor(p.v);
        [r * p.u.cos(), r * p.u.sin(), p.v]
    }

    /// Chordal distance between the embedded images of two points.
    ///
    /// Monotone with geodesic distance at small separations; used as the
    /// partner metric when classifying scattering outcomes.
    pub fn chordal_distance(&self, p: SurfacePoint, q: SurfacePoint) -> f64 {
        let xp = self.embed(p);
        let xq = self.embed(q);
        ((xp[0] - xq[0]).powi(2) + (xp[1] - xq[1]).powi(2) + (xp[2] - xq[2]).powi(2)).sqrt()
    }
}

/// The nonvanishing Christoffel symbols of the catenoid metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChristoffelSymbols {
    /// `Γ^v_vv = (1/a) tanh(v/a)`
    pub v_vv: f64,
    /// `Γ^v_uu = −a tanh(v/a)`
    pub v_uu: f64,
    /// `Γ^u_uv = Γ^u_vu = (1/a) tanh(v/a)`
    pub u_uv: f64,
}

/// A point on the catenoid in intrinsic coordinates.
///
/// `u` is the azimuthal angle stored *unwrapped* (it accumulates full
/// revolutions so trajectories stay smooth); reduction mod 2π happens
/// only inside the cosine of the pair kernel and at rendering time.
/// `v` is the axial coordinate in length units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub u: f64,
    pub v: f64,
}

impl SurfacePoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}
