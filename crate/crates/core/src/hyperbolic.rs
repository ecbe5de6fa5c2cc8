//! Exact-formula geometry of the upper half-space model of hyperbolic
//! n-space: distances, Busemann functions for the ideal point at infinity,
//! horoballs, orthogonal projections onto vertical totally geodesic
//! subspaces, and canonical isometry extensions to higher dimension.
//!
//! The model is `{x in R^n : x_n > 0}` with metric `(dx_1^2 + ... + dx_n^2) / x_n^2`.
//! All formulas here are closed-form; numerically differentiated quantities
//! live in tests, not in this module.

use crate::error::{GeomError, Result};

/// A point of the upper half-space model. The last coordinate is the height
/// and must be strictly positive; the dimension must be at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UhsPoint {
    coords: Vec<f64>,
}

impl UhsPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(GeomError::InvalidPoint(format!(
                "need dimension >= 2, got {}",
                coords.len()
            )));
        }
        let height = coords[coords.len() - 1];
        if !(height > 0.0) || !height.is_finite() {
            return Err(GeomError::InvalidPoint(format!(
                "height coordinate must be positive and finite, got {height}"
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeomError::InvalidPoint("non-finite coordinate".into()));
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The height coordinate `x_n`.
    pub fn height(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// The vertical totally geodesic subspace of dimension `dim` inside the
/// model of dimension `ambient_dim`: the span of `e_1, ..., e_{dim-1}, e_n`
/// intersected with the upper half-space. `dim == ambient_dim` is the whole
/// space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerticalSubspace {
    ambient_dim: usize,
    dim: usize,
}

impl VerticalSubspace {
    pub fn new(ambient_dim: usize, dim: usize) -> Result<Self> {
        if dim < 2 || dim > ambient_dim {
            return Err(GeomError::Usage(format!(
                "vertical subspace needs 2 <= dim <= ambient_dim, got dim {dim} in ambient {ambient_dim}"
            )));
        }
        Ok(Self { ambient_dim, dim })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &UhsPoint) -> bool {
        x.dim() == self.ambient_dim
            && x.coords()[self.dim - 1..x.dim() - 1]
                .iter()
                .all(|&c| c == 0.0)
    }
}

/// A closed horoball centered at the ideal point at infinity, stored as a
/// sublevel set `{busemann <= level}` of the Busemann function normalized to
/// vanish on the height-1 horosphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horoball {
    level: f64,
}

impl Horoball {
    pub fn at_level(level: f64) -> Self {
        Self { level }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Membership test; monotone in the level by construction.
    pub fn contains(&self, x: &UhsPoint) -> bool {
        busemann(x) <= self.level
    }
}

/// Hyperbolic distance, `arccosh(1 + |x-y|^2 / (2 x_n y_n))`.
pub fn dist(x: &UhsPoint, y: &UhsPoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(GeomError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let sq: f64 = x
        .coords()
        .iter()
        .zip(y.coords())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((1.0 + sq / (2.0 * x.height() * y.height())).acosh())
}

/// Busemann function for the ideal point at infinity, normalized so that it
/// vanishes on the height-1 horosphere: `-log x_n`.
pub fn busemann(x: &UhsPoint) -> f64 {
    -x.height().ln()
}

/// Orthogonal projection of `x` onto a vertical subspace: keep the first
/// `dim - 1` coordinates, zero the rest, and set the height to the Euclidean
/// norm of the dropped block together with the old height. The image is the
/// unique distance minimizer over the subspace.
pub fn project(x: &UhsPoint, s: &VerticalSubspace) -> Result<UhsPoint> {
    if x.dim() != s.ambient_dim() {
        return Err(GeomError::DimensionMismatch {
            left: x.dim(),
            right: s.ambient_dim(),
        });
    }
    let n = x.dim();
    let k = s.dim();
    let mut out = vec![0.0; n];
    out[..k - 1].copy_from_slice(&x.coords()[..k - 1]);
    let tail_norm = x.coords()[k - 1..n]
        .iter()
        .map(|c| c * c)
        .sum::<f64>()
        .sqrt();
    out[n - 1] = tail_norm;
    UhsPoint::new(out)
}

/// Isometries of the model used by the construction: unipotent translations
/// along `e_1`, finite-order elliptic rotations of the `(x_1, x_2)` boundary
/// plane (fixing the vertical subspace spanned by the remaining directions),
/// and explicit composition lists. No general matrix model is kept.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelIsometry {
    UnipotentTranslation { dim: usize, offset: f64 },
    EllipticRotation { dim: usize, order: u32 },
    Composition { dim: usize, parts: Vec<ModelIsometry> },
}

impl ModelIsometry {
    pub fn translation(dim: usize, offset: f64) -> Result<Self> {
        if dim < 2 {
            return Err(GeomError::Usage("translation needs dim >= 2".into()));
        }
        if !(offset >= 0.0) {
            return Err(GeomError::Usage(format!(
                "translation offset must be >= 0, got {offset}"
            )));
        }
        Ok(Self::UnipotentTranslation { dim, offset })
    }

    /// Rotation by `2*pi/order` in the `(x_1, x_2)` plane. Needs an ambient
    /// dimension of at least 3 so that two boundary coordinates exist.
    pub fn rotation(dim: usize, order: u32) -> Result<Self> {
        if dim < 3 {
            return Err(GeomError::Usage(
                "elliptic rotation needs ambient dim >= 3".into(),
            ));
        }
        if order == 0 {
            return Err(GeomError::Usage("rotation order must be positive".into()));
        }
        Ok(Self::EllipticRotation { dim, order })
    }

    pub fn identity(dim: usize) -> Self {
        Self::UnipotentTranslation { dim, offset: 0.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UnipotentTranslation { dim, .. }
            | Self::EllipticRotation { dim, .. }
            | Self::Composition { dim, .. } => *dim,
        }
    }

    pub fn compose(self, other: ModelIsometry) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(GeomError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        let dim = self.dim();
        Ok(Self::Composition {
            dim,
            parts: vec![self, other],
        })
    }

    /// Apply to a point of matching dimension. Composition lists apply left
    /// to right.
    pub fn apply(&self, x: &UhsPoint) -> Result<UhsPoint> {
        if x.dim() != self.dim() {
            return Err(GeomError::DimensionMismatch {
                left: self.dim(),
                right: x.dim(),
            });
        }
        match self {
            Self::UnipotentTranslation { offset, .. } => {
                let mut c = x.coords().to_vec();
                c[0] += offset;
                UhsPoint::new(c)
            }
            Self::EllipticRotation { order, .. } => {
                let angle = 2.0 * std::f64::consts::PI / f64::from(*order);
                let (sin, cos) = angle.sin_cos();
                let mut c = x.coords().to_vec();
                let (a, b) = (c[0], c[1]);
                c[0] = cos * a - sin * b;
                c[1] = sin * a + cos * b;
                UhsPoint::new(c)
            }
            Self::Composition { parts, .. } => {
                let mut p = x.clone();
                for part in parts {
                    p = part.apply(&p)?;
                }
                Ok(p)
            }
        }
    }

    /// Iterated application, used to check rotation orders.
    pub fn apply_n(&self, x: &UhsPoint, n: u32) -> Result<UhsPoint> {
        let mut p = x.clone();
        for _ in 0..n {
            p = self.apply(&p)?;
        }
        Ok(p)
    }
}

/// Extend an isometry of the vertical copy of a lower-dimensional model to
/// the ambient model, acting by the same formula on the first `m - 1`
/// coordinates and the height and fixing the new coordinates. The extension
/// commutes with projection onto the vertical subspace it came from.
pub fn extend_isometry(phi: &ModelIsometry, target_dim: usize) -> Result<ModelIsometry> {
    if target_dim < phi.dim() {
        return Err(GeomError::Usage(format!(
            "extension target dim {target_dim} is below source dim {}",
            phi.dim()
        )));
    }
    let out = match phi {
        ModelIsometry::UnipotentTranslation { offset, .. } => {
            ModelIsometry::UnipotentTranslation {
                dim: target_dim,
                offset: *offset,
            }
        }
        ModelIsometry::EllipticRotation { order, .. } => ModelIsometry::EllipticRotation {
            dim: target_dim,
            order: *order,
        },
        ModelIsometry::Composition { parts, .. } => ModelIsometry::Composition {
            dim: target_dim,
            parts: parts
                .iter()
                .map(|p| extend_isometry(p, target_dim))
                .collect::<Result<Vec<_>>>()?,
        },
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(coords: &[f64]) -> UhsPoint {
        UhsPoint::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn dist_vertical_geodesic_is_log_height_ratio() {
        let x = pt(&[0.0, 0.0, 1.0]);
        let y = pt(&[0.0, 0.0, std::f64::consts::E]);
        assert!((dist(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dist_of_point_to_itself_is_zero() {
        let x = pt(&[0.3, -1.2, 0.7]);
        assert_eq!(dist(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn dist_unit_horizontal_offset() {
        // |x - y|^2 = 1 at height 1 forces arccosh(1.5).
        let x = pt(&[1.0, 0.0, 0.0, 1.0]);
        let y = pt(&[0.0, 0.0, 0.0, 1.0]);
        let expected = 1.5f64.acosh();
        assert!((dist(&x, &y).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.9624236501192069).abs() < 1e-12);
    }

    #[test]
    fn dist_is_symmetric() {
        let x = pt(&[0.4, 2.0, 0.9]);
        let y = pt(&[-1.0, 0.5, 3.0]);
        assert_eq!(dist(&x, &y).unwrap(), dist(&y, &x).unwrap());
    }

    #[test]
    fn dist_rejects_dimension_mismatch() {
        let x = pt(&[0.0, 1.0]);
        let y = pt(&[0.0, 0.0, 1.0]);
        assert!(matches!(
            dist(&x, &y),
            Err(GeomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_height_is_rejected() {
        assert!(UhsPoint::new(vec![0.0, 0.0]).is_err());
        assert!(UhsPoint::new(vec![0.0, -1.0]).is_err());
        assert!(UhsPoint::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn busemann_normalization() {
        assert_eq!(busemann(&pt(&[0.0, 1.0])), 0.0);
        assert!((busemann(&pt(&[0.0, std::f64::consts::E])) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn busemann_unit_rate_along_vertical_geodesic() {
        // Numerical differencing along t -> (0, e^t): slope must be -1.
        let h = 1e-6f64;
        for &t in &[-1.0, 0.0, 0.4, 2.0] {
            let up = busemann(&pt(&[0.0, (t + h).exp()]));
            let dn = busemann(&pt(&[0.0, (t - h).exp()]));
            let slope = (up - dn) / (2.0 * h);
            assert!((slope + 1.0).abs() < 1e-9, "slope {slope} at t={t}");
        }
    }

    #[test]
    fn horoball_membership_matches_busemann_and_is_monotone() {
        let x = pt(&[0.2, 0.5]);
        let b = busemann(&x);
        assert!(Horoball::at_level(b).contains(&x));
        assert!(Horoball::at_level(b + 0.1).contains(&x));
        assert!(!Horoball::at_level(b - 0.1).contains(&x));
    }

    #[test]
    fn project_fixes_subspace_points() {
        let s = VerticalSubspace::new(4, 3).unwrap();
        let x = pt(&[1.0, 2.0, 0.0, 3.0]);
        assert!(s.contains(&x));
        assert_eq!(project(&x, &s).unwrap(), x);
    }

    #[test]
    fn project_closed_form_example() {
        let s = VerticalSubspace::new(3, 2).unwrap();
        let x = pt(&[1.0, 3.0, 4.0]);
        let p = project(&x, &s).unwrap();
        assert_eq!(p.coords(), &[1.0, 0.0, 5.0]);
    }

    #[test]
    fn project_minimizes_distance_against_grid_oracle() {
        // Independent oracle: coarse-to-fine search over the subspace.
        let s = VerticalSubspace::new(3, 2).unwrap();
        let x = pt(&[1.0, 3.0, 4.0]);
        let p = project(&x, &s).unwrap();

        let mut best = (f64::INFINITY, 0.0, 0.0);
        let (mut c1, mut ch, mut span) = (1.0, 5.0, 4.0);
        for _ in 0..40 {
            for i in -8..=8 {
                for j in -8..=8 {
                    let cand1 = c1 + span * (i as f64) / 8.0;
                    let candh = ch + span * (j as f64) / 8.0;
                    if candh <= 0.0 {
                        continue;
                    }
                    let d = dist(&x, &pt(&[cand1, 0.0, candh])).unwrap();
                    if d < best.0 {
                        best = (d, cand1, candh);
                    }
                }
            }
            c1 = best.1;
            ch = best.2;
            span *= 0.5;
        }
        assert!((best.1 - p.coords()[0]).abs() < 1e-6);
        assert!((best.2 - p.coords()[2]).abs() < 1e-6);
    }

    #[test]
    fn translation_zero_is_identity_and_rotation_has_exact_order() {
        let x = pt(&[0.4, -0.3, 1.7, 2.2]);
        let id = ModelIsometry::identity(4);
        assert_eq!(id.apply(&x).unwrap(), x);

        for order in [2u32, 3, 7, 12] {
            let rot = ModelIsometry::rotation(4, order).unwrap();
            let cycled = rot.apply_n(&x, order).unwrap();
            let moved = dist(&x, &cycled).unwrap();
            assert!(moved <= 1e-10, "order {order} moved by {moved}");
            // A proper subcycle must move the point.
            let part = rot.apply_n(&x, 1).unwrap();
            assert!(dist(&x, &part).unwrap() > 1e-3);
        }
    }

    #[test]
    fn translation_extension_formula_is_dimension_blind() {
        let phi = ModelIsometry::translation(3, 0.7).unwrap();
        let ext = extend_isometry(&phi, 6).unwrap();
        let x = pt(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = ext.apply(&x).unwrap();
        assert_eq!(y.coords(), &[1.7, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn extension_of_identity_is_identity() {
        let id = ModelIsometry::identity(3);
        let ext = extend_isometry(&id, 8).unwrap();
        let x = pt(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        assert_eq!(ext.apply(&x).unwrap(), x);
    }

    #[test]
    fn extension_rejects_shrinking() {
        let phi = ModelIsometry::translation(5, 1.0).unwrap();
        assert!(extend_isometry(&phi, 4).is_err());
    }

    #[test]
    fn isometries_preserve_distance() {
        let rot = ModelIsometry::rotation(4, 5).unwrap();
        let tr = ModelIsometry::translation(4, 1.3).unwrap();
        let comp = rot.compose(tr).unwrap();
        let x = pt(&[0.2, 0.8, -0.5, 1.1]);
        let y = pt(&[-1.0, 0.1, 0.7, 0.4]);
        let d0 = dist(&x, &y).unwrap();
        let d1 = dist(&comp.apply(&x).unwrap(), &comp.apply(&y).unwrap()).unwrap();
        assert!((d0 - d1).abs() < 1e-12);
    }
}
