//! The 2-D building blocks of the cusp-closing construction: the cusp
//! cylinder (quotient of the hyperbolic plane by a parabolic translation),
//! the cone plane of order i (quotient by a finite rotation group), and the
//! singular surface obtained by splicing the flaring part of the cylinder
//! onto the cone disc along leaves of common length `a`.
//!
//! Everything is a radial profile. The cusp cylinder has `f(t) = (a/2pi) e^t`
//! with the length-`a` leaf at t = 0; the cone plane has `f(rho) = sinh(rho)/i`
//! with cone angle `2pi/i` at the tip; the splice puts the cone disc on
//! `[0, R_i]` and the cylinder on `[R_i, inf)` in outward arc length, with a
//! corner (a positive jump of the log-slope `f'/f`) on the common leaf.

use crate::error::{GeomError, Result};
use crate::profile::{Jet2, ProfileForm, RadialProfile};

use std::f64::consts::PI;

/// Profiles backed by a cone piece are sampled from this offset instead of
/// the cone tip itself, where the revolution chart degenerates.
pub const CONE_TIP_EPS: f64 = 1e-9;

/// Distance `R_i = arcsinh(a*i/(2*pi))` from the cone point of the order-i
/// cone plane to its leaf of length `a`. Strictly increasing in both
/// arguments.
pub fn cone_radius(a: f64, order: u32) -> Result<f64> {
    if !(a > 0.0) {
        return Err(GeomError::Usage(format!("leaf length must be > 0, got {a}")));
    }
    if order < 1 {
        return Err(GeomError::Usage("cone order must be >= 1".into()));
    }
    Ok((a * f64::from(order) / (2.0 * PI)).asinh())
}

/// The cusp cylinder of leaf length `a`: quotient of the hyperbolic plane by
/// a unipotent translation, with the unique length-`a` leaf at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuspCylinder {
    a: f64,
}

impl CuspCylinder {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(GeomError::Usage(format!("leaf length must be > 0, got {a}")));
        }
        Ok(Self { a })
    }

    pub fn leaf_a(&self) -> f64 {
        self.a
    }

    /// Warp coefficient `a/(2*pi)`.
    pub fn coeff(&self) -> f64 {
        self.a / (2.0 * PI)
    }

    /// Length `a * e^t` of the leaf through `t`.
    pub fn leaf_length(&self, t: f64) -> f64 {
        self.a * t.exp()
    }

    /// Profile restricted to a finite window of the (naturally infinite)
    /// cylinder.
    pub fn profile_on(&self, window: (f64, f64)) -> Result<RadialProfile> {
        RadialProfile::new(
            ProfileForm::Exp {
                coeff: self.coeff(),
                shift: 0.0,
            },
            window,
            true,
        )
    }

    pub fn jet(&self, t: f64) -> Jet2 {
        let f = self.coeff() * t.exp();
        Jet2 { f, fp: f, fpp: f }
    }
}

/// The cone plane of order i >= 2: hyperbolic plane modulo a rotation of
/// order i, a smooth surface away from the single cone point of angle
/// `2*pi/i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePlane {
    order: u32,
}

impl ConePlane {
    pub fn new(order: u32) -> Result<Self> {
        if order < 2 {
            return Err(GeomError::Usage(format!(
                "cone plane needs order >= 2, got {order}"
            )));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn cone_angle(&self) -> f64 {
        2.0 * PI / f64::from(self.order)
    }

    /// Length `2*pi*sinh(rho)/i` of the leaf at distance `rho` from the tip.
    pub fn circle_length(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(GeomError::Domain(format!(
                "leaf distance must be > 0, got {rho}"
            )));
        }
        Ok(2.0 * PI * rho.sinh() / f64::from(self.order))
    }

    pub fn profile_on(&self, s_hi: f64) -> Result<RadialProfile> {
        RadialProfile::new(
            ProfileForm::Sinh {
                scale: 1.0 / f64::from(self.order),
            },
            (CONE_TIP_EPS, s_hi),
            true,
        )
    }

    pub fn jet(&self, rho: f64) -> Jet2 {
        let scale = 1.0 / f64::from(self.order);
        Jet2 {
            f: scale * rho.sinh(),
            fp: scale * rho.cosh(),
            fpp: scale * rho.sinh(),
        }
    }
}

/// Result of the collar-width constraint `r < arcsinh(a/pi) / 2`. Passing
/// guarantees `2r < R_i` for every order i >= 2, so the double annulus
/// around the splice leaf stays clear of the cone point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollarCheck {
    pub pass: bool,
    /// The bound `arcsinh(a/pi) / 2`.
    pub bound: f64,
    /// `bound - r`; positive exactly on pass.
    pub margin: f64,
}

pub fn validate_collar(a: f64, r: f64) -> Result<CollarCheck> {
    if !(a > 0.0) || !(r > 0.0) {
        return Err(GeomError::Usage(format!(
            "collar check needs a > 0 and r > 0, got a = {a}, r = {r}"
        )));
    }
    let bound = 0.5 * (a / PI).asinh();
    Ok(CollarCheck {
        pass: r < bound,
        bound,
        margin: bound - r,
    })
}

/// The singular spliced surface S_i: cone disc of order i on `[0, R_i]`,
/// flaring cusp-cylinder piece on `[R_i, inf)`, glued along the common
/// length-`a` leaf with the identity rotation. Carries the collar width `r`
/// used by the smoothing and gluing stages.
#[derive(Debug, Clone, PartialEq)]
pub struct SplicedSurface {
    a: f64,
    order: u32,
    r: f64,
    corner: f64,
    profile: RadialProfile,
}

/// Build the splice. Requires `validate_collar(a, r)` to pass and i >= 2.
pub fn build_splice(a: f64, order: u32, r: f64) -> Result<SplicedSurface> {
    let check = validate_collar(a, r)?;
    if !check.pass {
        return Err(GeomError::Precondition(format!(
            "collar constraint fails: r = {r} >= bound {}",
            check.bound
        )));
    }
    if order < 2 {
        return Err(GeomError::Precondition(format!(
            "splice needs cone order >= 2, got {order}"
        )));
    }
    let corner = cone_radius(a, order)?;
    let coeff = a / (2.0 * PI);
    let profile = RadialProfile::new(
        ProfileForm::Splice {
            scale: 1.0 / f64::from(order),
            corner,
            coeff,
        },
        (CONE_TIP_EPS, corner + 4.0 * r),
        true,
    )?;
    Ok(SplicedSurface {
        a,
        order,
        r,
        corner,
        profile,
    })
}

impl SplicedSurface {
    pub fn leaf_a(&self) -> f64 {
        self.a
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn collar_r(&self) -> f64 {
        self.r
    }

    /// Corner location `R_i`.
    pub fn corner(&self) -> f64 {
        self.corner
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    /// The annulus `{|s - R_i| <= mult * r}` around the splice leaf.
    pub fn annulus(&self, mult: f64) -> (f64, f64) {
        (self.corner - mult * self.r, self.corner + mult * self.r)
    }

    /// Interval `[s1, s2] = [R_i - r, R_i + r]` the smoothing stage replaces.
    pub fn smoothing_interval(&self) -> (f64, f64) {
        self.annulus(1.0)
    }

    /// Exact-curvature band `[R_i + r, R_i + 2r]` along which the cap is
    /// glued to a cusp collar.
    pub fn collar_band(&self) -> (f64, f64) {
        (self.corner + self.r, self.corner + 2.0 * self.r)
    }

    /// Outer radius `R_i + 2r` of the cap piece.
    pub fn cap_extent(&self) -> f64 {
        self.corner + 2.0 * self.r
    }

    /// Boundary length `a * e^{2r}` of the cap piece.
    pub fn cap_boundary_length(&self) -> f64 {
        self.a * (2.0 * self.r).exp()
    }

    /// Jump `f'(R_i^-) - f'(R_i^+) = cosh(R_i)/i - a/(2*pi)` of the slope at
    /// the corner; positive for every finite order.
    pub fn slope_jump(&self) -> f64 {
        self.corner.cosh() / f64::from(self.order) - self.a / (2.0 * PI)
    }

    /// Jump `coth(R_i) - 1` of the log-slope `f'/f` at the corner.
    pub fn log_slope_jump(&self) -> f64 {
        1.0 / self.corner.tanh() - 1.0
    }
}
