//! Radial profile metrics `ds^2 + f(s)^2 dtheta^2` on surfaces of revolution,
//! the shared representation for cusp cylinders, cone planes, spliced
//! surfaces and smoothing outputs. Profiles carry a closed-form tag when one
//! exists; smoothing bands are dense sample grids with quintic Hermite
//! evaluation between nodes. Gauss curvature is `-f''/f`.

use std::io::Write;

use crate::error::{GeomError, Result};

/// Default sampling density for exported tables, in points per unit of arc
/// length.
pub const DEFAULT_SAMPLES_PER_UNIT: f64 = 4096.0;

/// Value, first and second derivative of a profile at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
}

impl Jet2 {
    /// Gauss curvature of the surface of revolution at this jet.
    pub fn gauss(&self) -> f64 {
        -self.fpp / self.f
    }

    /// Logarithmic slope `f'/f`.
    pub fn log_slope(&self) -> f64 {
        self.fp / self.f
    }
}

/// A uniformly sampled band with stored value and two derivatives per node.
/// Evaluation between nodes uses two-point quintic Hermite interpolation, so
/// the interpolant reproduces the stored jets exactly at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBand {
    s0: f64,
    h: f64,
    f: Vec<f64>,
    fp: Vec<f64>,
    fpp: Vec<f64>,
}

impl GridBand {
    pub fn new(s0: f64, h: f64, f: Vec<f64>, fp: Vec<f64>, fpp: Vec<f64>) -> Result<Self> {
        if f.len() < 2 || f.len() != fp.len() || f.len() != fpp.len() {
            return Err(GeomError::Usage(
                "grid band needs >= 2 nodes with matching value/derivative lengths".into(),
            ));
        }
        if !(h > 0.0) {
            return Err(GeomError::Usage("grid band step must be positive".into()));
        }
        Ok(Self { s0, h, f, fp, fpp })
    }

    pub fn s_lo(&self) -> f64 {
        self.s0
    }

    pub fn s_hi(&self) -> f64 {
        self.s0 + self.h * (self.f.len() - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn node_s(&self, j: usize) -> f64 {
        self.s0 + self.h * j as f64
    }

    pub fn node(&self, j: usize) -> Jet2 {
        Jet2 {
            f: self.f[j],
            fp: self.fp[j],
            fpp: self.fpp[j],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn eval(&self, s: f64) -> Jet2 {
        let n = self.f.len();
        let mut cell = ((s - self.s0) / self.h).floor() as isize;
        cell = cell.clamp(0, n as isize - 2);
        let j = cell as usize;
        let x = s - self.node_s(j);
        quintic_hermite(
            self.h,
            x,
            self.node(j),
            Jet2 {
                f: self.f[j + 1],
                fp: self.fp[j + 1],
                fpp: self.fpp[j + 1],
            },
        )
    }
}

/// Two-point quintic Hermite: matches value, first and second derivative at
/// both cell ends and is evaluated at offset `x` from the left end.
fn quintic_hermite(h: f64, x: f64, left: Jet2, right: Jet2) -> Jet2 {
    let t = x / h;
    let (t2, t3) = (t * t, t * t * t);
    let (t4, t5) = (t3 * t, t3 * t * t);

    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * t3 - t4 + 0.5 * t5;

    let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let d2 = t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
    let d3 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let d5 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;

    let e0 = -60.0 * t + 180.0 * t2 - 120.0 * t3;
    let e1 = -36.0 * t + 96.0 * t2 - 60.0 * t3;
    let e2 = 1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3;
    let e3 = 60.0 * t - 180.0 * t2 + 120.0 * t3;
    let e4 = -24.0 * t + 84.0 * t2 - 60.0 * t3;
    let e5 = 3.0 * t - 12.0 * t2 + 10.0 * t3;

    let (h2s, hsq) = (h, h * h);
    let f = left.f * h0
        + left.fp * h2s * h1
        + left.fpp * hsq * h2
        + right.f * h3
        + right.fp * h2s * h4
        + right.fpp * hsq * h5;
    let fp = (left.f * d0
        + left.fp * h2s * d1
        + left.fpp * hsq * d2
        + right.f * d3
        + right.fp * h2s * d4
        + right.fpp * hsq * d5)
        / h;
    let fpp = (left.f * e0
        + left.fp * h2s * e1
        + left.fpp * hsq * e2
        + right.f * e3
        + right.fp * h2s * e4
        + right.fpp * hsq * e5)
        / (h * h);
    Jet2 { f, fp, fpp }
}

/// Closed-form tag (or sampled band) backing a profile.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileForm {
    /// `f(s) = coeff * exp(s - shift)`; curvature -1 exactly.
    Exp { coeff: f64, shift: f64 },
    /// `f(s) = scale * sinh(s)`; curvature -1 away from s = 0.
    Sinh { scale: f64 },
    /// Cone piece below the corner, cusp piece above; the corner carries the
    /// slope jump of the singular splice.
    Splice { scale: f64, corner: f64, coeff: f64 },
    /// Splice whose corner band has been replaced by a smoothing band. The
    /// band endpoints agree with the outer pieces in value and slope.
    SmoothedSplice {
        scale: f64,
        corner: f64,
        coeff: f64,
        band: GridBand,
    },
    /// Pure sample band with no closed form.
    Grid(GridBand),
}

/// A surface-of-revolution metric `ds^2 + f(s)^2 dtheta^2` with
/// `theta in [0, 2*pi)`, so the leaf through `s` has circumference
/// `2*pi*f(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    form: ProfileForm,
    window: (f64, f64),
    complete: bool,
}

impl RadialProfile {
    /// `window` is the parameter range this profile will be sampled and
    /// scanned over; constructors of the concrete surface pieces choose it.
    /// `complete` records that the window covers the piece's full stated
    /// domain (up to truncation of an infinite end for sampling purposes).
    pub fn new(form: ProfileForm, window: (f64, f64), complete: bool) -> Result<Self> {
        if !(window.0 < window.1) {
            return Err(GeomError::Usage(format!(
                "profile window must be a nonempty interval, got [{}, {}]",
                window.0, window.1
            )));
        }
        if let ProfileForm::Sinh { .. } | ProfileForm::Splice { .. } = form {
            if window.0 < 0.0 {
                return Err(GeomError::Domain(
                    "cone-backed profiles are defined for s >= 0".into(),
                ));
            }
        }
        let profile = Self {
            form,
            window,
            complete,
        };
        // f must stay positive on the window; probe coarsely plus endpoints.
        let (lo, hi) = window;
        for k in 0..=64 {
            let s = lo + (hi - lo) * k as f64 / 64.0;
            if profile.jet(s).f <= 0.0 {
                return Err(GeomError::Domain(format!(
                    "profile is nonpositive at s = {s}"
                )));
            }
        }
        Ok(profile)
    }

    pub fn form(&self) -> &ProfileForm {
        &self.form
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn jet(&self, s: f64) -> Jet2 {
        match &self.form {
            ProfileForm::Exp { coeff, shift } => {
                let f = coeff * (s - shift).exp();
                Jet2 { f, fp: f, fpp: f }
            }
            ProfileForm::Sinh { scale } => Jet2 {
                f: scale * s.sinh(),
                fp: scale * s.cosh(),
                fpp: scale * s.sinh(),
            },
            ProfileForm::Splice {
                scale,
                corner,
                coeff,
            } => {
                if s <= *corner {
                    Jet2 {
                        f: scale * s.sinh(),
                        fp: scale * s.cosh(),
                        fpp: scale * s.sinh(),
                    }
                } else {
                    let f = coeff * (s - corner).exp();
                    Jet2 { f, fp: f, fpp: f }
                }
            }
            ProfileForm::SmoothedSplice {
                scale,
                corner,
                coeff,
                band,
            } => {
                if s < band.s_lo() {
                    Jet2 {
                        f: scale * s.sinh(),
                        fp: scale * s.cosh(),
                        fpp: scale * s.sinh(),
                    }
                } else if s > band.s_hi() {
                    let f = coeff * (s - corner).exp();
                    Jet2 { f, fp: f, fpp: f }
                } else {
                    band.eval(s)
                }
            }
            ProfileForm::Grid(band) => band.eval(s),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        self.jet(s).f
    }

    /// Gauss curvature `-f''/f` at `s`.
    pub fn gauss(&self, s: f64) -> f64 {
        self.jet(s).gauss()
    }

    /// Circumference `2*pi*f(s)` of the leaf through `s`.
    pub fn circumference(&self, s: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.f(s)
    }

    /// Uniform sample table over the window at the given density.
    pub fn table(&self, samples_per_unit: f64) -> ProfileTable {
        let (lo, hi) = self.window;
        let n = ((hi - lo) * samples_per_unit).ceil().max(2.0) as usize;
        let rows = (0..=n)
            .map(|k| {
                let s = lo + (hi - lo) * k as f64 / n as f64;
                let jet = self.jet(s);
                ProfileRow {
                    s,
                    f: jet.f,
                    fp: jet.fp,
                    fpp: jet.fpp,
                    k: jet.gauss(),
                }
            })
            .collect();
        ProfileTable { rows }
    }
}

/// One exported sample row.
#[derive(Debug, Clone, Copy)]
pub struct ProfileRow {
    pub s: f64,
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
    pub k: f64,
}

/// Plot-ready sample table; serializes to the `s,f,fp,fpp,K` CSV schema.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    pub rows: Vec<ProfileRow>,
}

impl ProfileTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,f,fp,fpp,K")?;
        for row in &self.rows {
            writeln!(out, "{},{},{},{},{}", row.s, row.f, row.fp, row.fpp, row.k)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_hermite_reproduces_exponential() {
        // Interpolation error of the two-point quintic is O(h^6) in value;
        // at h = 0.01 that is far below the asserted bounds.
        let h = 0.01f64;
        let left = Jet2 {
            f: 1.0,
            fp: 1.0,
            fpp: 1.0,
        };
        let e = h.exp();
        let right = Jet2 {
            f: e,
            fp: e,
            fpp: e,
        };
        for k in 0..=10 {
            let x = h * k as f64 / 10.0;
            let jet = quintic_hermite(h, x, left, right);
            let exact = x.exp();
            assert!((jet.f - exact).abs() < 1e-14);
            assert!((jet.fp - exact).abs() < 1e-12);
            assert!((jet.fpp - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_band_matches_nodes_exactly() {
        let n = 33;
        let h = 0.01;
        let s0 = 2.0;
        let mut f = Vec::new();
        let mut fp = Vec::new();
        let mut fpp = Vec::new();
        for j in 0..n {
            let s: f64 = s0 + h * j as f64;
            f.push(s.sin() + 2.0);
            fp.push(s.cos());
            fpp.push(-s.sin());
        }
        let band = GridBand::new(s0, h, f.clone(), fp, fpp).unwrap();
        for j in 0..n {
            let jet = band.eval(s0 + h * j as f64);
            assert!((jet.f - f[j]).abs() < 1e-13);
        }
        // Mid-cell accuracy of the quintic interpolant.
        let jet = band.eval(s0 + 5.5 * h);
        let s = s0 + 5.5 * h;
        assert!((jet.f - (s.sin() + 2.0)).abs() < 1e-12);
        assert!((jet.fpp + s.sin()).abs() < 1e-8);
    }

    #[test]
    fn exp_profile_has_curvature_minus_one() {
        let p = RadialProfile::new(
            ProfileForm::Exp {
                coeff: 0.5,
                shift: 0.0,
            },
            (-2.0, 2.0),
            true,
        )
        .unwrap();
        for k in 0..=20 {
            let s = -2.0 + 4.0 * k as f64 / 20.0;
            assert!((p.gauss(s) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_profile_is_rejected() {
        let err = RadialProfile::new(ProfileForm::Sinh { scale: 1.0 }, (0.0, 1.0), true);
        assert!(err.is_err(), "sinh vanishes at the left endpoint");
    }

    #[test]
    fn csv_schema_header() {
        let p = RadialProfile::new(
            ProfileForm::Exp {
                coeff: 1.0,
                shift: 0.0,
            },
            (0.0, 1.0),
            true,
        )
        .unwrap();
        let mut buf = Vec::new();
        p.table(16.0).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,f,fp,fpp,K\n"));
        assert_eq!(text.lines().count(), 18);
    }
}
