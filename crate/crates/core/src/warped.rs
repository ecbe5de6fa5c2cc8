//! Iterated warped products `R x_cosh (R x_cosh ( ... x_cosh F))` over a
//! radial-profile fiber surface, with three curvature evaluators:
//!
//! * the closed-form special-plane formula
//!   `K = -(f''/f)|x|^2 + (L - f'^2)/f^2 |v|^2` with `f = cosh`, applied
//!   level by level (a pure-fiber plane transforms as
//!   `K -> (K - sinh^2 t)/cosh^2 t` per level, a contraction toward -1);
//! * a finite-difference Riemann tensor built from central differences of
//!   the metric, the independent oracle for arbitrary planes;
//! * deterministic pinching scans over random points and random planes.
//!
//! With the exact constant-curvature fiber the stack is a chart of
//! hyperbolic n-space; `uhs_chart` maps stack coordinates into the upper
//! half-space model, where the vertical projection of the stack matches the
//! orthogonal projection onto the vertical 2-plane.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::hyperbolic::{UhsPoint, VerticalSubspace};
use crate::profile::{ProfileForm, RadialProfile};

/// A radial-profile-backed fiber surface with Gauss curvature `-f''/f`.
#[derive(Debug, Clone)]
pub struct FiberSurface {
    profile: RadialProfile,
}

impl FiberSurface {
    pub fn new(profile: RadialProfile) -> Self {
        Self { profile }
    }

    /// Exact hyperbolic-plane chart (cusp-cylinder profile, curvature -1).
    pub fn exact_hyperbolic(coeff: f64, window: (f64, f64)) -> Result<Self> {
        Ok(Self::new(RadialProfile::new(
            ProfileForm::Exp { coeff, shift: 0.0 },
            window,
            true,
        )?))
    }

    /// Flat cylinder chart (constant profile is not expressible; the
    /// Euclidean plane in polar-like coordinates uses `f(s) = s`), used only
    /// as a zero-curvature cross-check target.
    pub fn flat(window: (f64, f64)) -> Result<Self> {
        if window.0 <= 0.0 {
            return Err(GeomError::Domain(
                "flat chart needs a positive radial window".into(),
            ));
        }
        // f(s) = s has f'' = 0, so -f''/f = 0. Encode via a grid band.
        let n = 4096;
        let h = (window.1 - window.0) / n as f64;
        let mut f = Vec::new();
        let mut fp = Vec::new();
        let mut fpp = Vec::new();
        for j in 0..=n {
            f.push(window.0 + h * j as f64);
            fp.push(1.0);
            fpp.push(0.0);
        }
        let band = crate::profile::GridBand::new(window.0, h, f, fp, fpp)?;
        Ok(Self::new(RadialProfile::new(
            ProfileForm::Grid(band),
            window,
            true,
        )?))
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn gauss(&self, s: f64) -> f64 {
        self.profile.gauss(s)
    }

    pub fn s_window(&self) -> (f64, f64) {
        self.profile.window()
    }
}

/// Iterated warped product of depth `d` over a fiber surface; coordinates
/// are `(t_1, ..., t_d, s, theta)` with `t_1` outermost. Depth 0 is the
/// fiber itself.
#[derive(Debug, Clone)]
pub struct WarpedStack {
    depth: usize,
    fiber: FiberSurface,
}

/// A point of the stack in its global chart.
#[derive(Debug, Clone, PartialEq)]
pub struct StackPoint {
    pub t: Vec<f64>,
    pub s: f64,
    pub theta: f64,
}

impl StackPoint {
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.t.clone();
        c.push(self.s);
        c.push(self.theta);
        c
    }

    fn from_coords(depth: usize, coords: &[f64]) -> Self {
        Self {
            t: coords[..depth].to_vec(),
            s: coords[depth],
            theta: coords[depth + 1],
        }
    }
}

impl WarpedStack {
    pub fn new(depth: usize, fiber: FiberSurface) -> Self {
        Self { depth, fiber }
    }

    /// Chart of exact hyperbolic n-space as an iterated warped product over
    /// the exact fiber.
    pub fn exact_hyperbolic(dim: usize, coeff: f64, s_window: (f64, f64)) -> Result<Self> {
        if dim < 2 {
            return Err(GeomError::Usage("stack dimension must be >= 2".into()));
        }
        Ok(Self::new(
            dim - 2,
            FiberSurface::exact_hyperbolic(coeff, s_window)?,
        ))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.depth + 2
    }

    pub fn fiber(&self) -> &FiberSurface {
        &self.fiber
    }

    /// Metric completeness surrogate: real lines are complete, so the stack
    /// is complete exactly when the fiber profile covers its full domain.
    pub fn is_complete(&self) -> bool {
        self.fiber.profile().is_complete()
    }

    fn check_point(&self, p: &StackPoint) -> Result<()> {
        if p.t.len() != self.depth {
            return Err(GeomError::DimensionMismatch {
                left: p.t.len(),
                right: self.depth,
            });
        }
        let (lo, hi) = self.fiber.s_window();
        if p.s < lo || p.s > hi {
            return Err(GeomError::Domain(format!(
                "fiber coordinate s = {} outside window [{lo}, {hi}]",
                p.s
            )));
        }
        Ok(())
    }

    /// Metric tensor at `p`, diagonal in the iterated coordinates: the
    /// level-j entry carries the product of `cosh^2(t_k)` over the outer
    /// levels `k < j`, and the fiber block additionally carries the fiber
    /// metric `diag(1, f(s)^2)`.
    pub fn metric_tensor(&self, p: &StackPoint) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let n = self.dim();
        let mut diag = vec![0.0; n];
        let mut outer = 1.0;
        for (j, &t) in p.t.iter().enumerate() {
            diag[j] = outer;
            outer *= t.cosh() * t.cosh();
        }
        let f = self.fiber.profile().f(p.s);
        diag[self.depth] = outer;
        diag[self.depth + 1] = outer * f * f;
        Ok(DMatrix::from_diagonal(&DVector::from_vec(diag)))
    }

    fn metric_at_coords(&self, coords: &[f64]) -> Result<DMatrix<f64>> {
        self.metric_tensor(&StackPoint::from_coords(self.depth, coords))
    }

    /// Vertical projection onto the fiber: drop the outer coordinates.
    pub fn vertical_projection(&self, p: &StackPoint) -> Result<(f64, f64)> {
        self.check_point(p)?;
        Ok((p.s, p.theta))
    }
}

/// A tangent 2-plane in the special form the closed-form curvature formula
/// covers: one horizontal component at a single level plus two fiber
/// components, with `{x + v, w}` orthonormal in the stack metric.
#[derive(Debug, Clone)]
pub struct PlaneSection {
    pub base: StackPoint,
    /// Level (0-based, outermost first) carrying the horizontal component.
    pub x_level: usize,
    /// Magnitude of the horizontal component in the stack metric.
    pub x: f64,
    /// Fiber components of the first basis vector, coordinates `(ds, dtheta)`.
    pub v: [f64; 2],
    /// Fiber components of the second basis vector.
    pub w: [f64; 2],
}

impl PlaneSection {
    /// Squared fiber norms in the stack metric at the base point.
    fn fiber_norms(&self, stack: &WarpedStack) -> Result<(f64, f64, f64)> {
        let g = stack.metric_tensor(&self.base)?;
        let d = stack.depth();
        let (gss, gtt) = (g[(d, d)], g[(d + 1, d + 1)]);
        let nv = self.v[0] * self.v[0] * gss + self.v[1] * self.v[1] * gtt;
        let nw = self.w[0] * self.w[0] * gss + self.w[1] * self.w[1] * gtt;
        let vw = self.v[0] * self.w[0] * gss + self.v[1] * self.w[1] * gtt;
        Ok((nv, nw, vw))
    }

    pub fn validate(&self, stack: &WarpedStack, tol: f64) -> Result<()> {
        if stack.depth() > 0 && self.x_level >= stack.depth() {
            return Err(GeomError::Usage(format!(
                "x level {} out of range for depth {}",
                self.x_level,
                stack.depth()
            )));
        }
        if stack.depth() == 0 && self.x != 0.0 {
            return Err(GeomError::Usage(
                "depth-0 stacks have no horizontal direction".into(),
            ));
        }
        let (nv, nw, vw) = self.fiber_norms(stack)?;
        let first = self.x * self.x + nv;
        if (first - 1.0).abs() > tol || (nw - 1.0).abs() > tol || vw.abs() > tol {
            return Err(GeomError::Usage(format!(
                "plane basis not orthonormal: |x|^2+|v|^2 = {first}, |w|^2 = {nw}, <v,w> = {vw}"
            )));
        }
        Ok(())
    }

    /// Full-coordinate basis vectors of the plane, for handing to the
    /// finite-difference evaluator.
    pub fn basis_vectors(&self, stack: &WarpedStack) -> (Vec<f64>, Vec<f64>) {
        let n = stack.dim();
        let d = stack.depth();
        let mut u = vec![0.0; n];
        let mut w = vec![0.0; n];
        if d > 0 {
            // Coordinate component from the metric-normalized magnitude.
            let g = stack
                .metric_tensor(&self.base)
                .expect("validated plane has a metric");
            u[self.x_level] = self.x / g[(self.x_level, self.x_level)].sqrt();
        }
        u[d] += self.v[0];
        u[d + 1] += self.v[1];
        w[d] = self.w[0];
        w[d + 1] = self.w[1];
        (u, w)
    }
}

/// Closed-form sectional curvature of a special plane, evaluated level by
/// level: the horizontal level contributes the single-level warped-product
/// formula, and every outer level applies the pure-fiber transform
/// `K -> (K - sinh^2 t) / cosh^2 t`.
pub fn sectional_curvature_special(stack: &WarpedStack, plane: &PlaneSection) -> Result<f64> {
    plane.validate(stack, 1e-9)?;
    let base = &plane.base;
    let mut k = stack.fiber.gauss(base.s);
    if stack.depth() == 0 {
        return Ok(k);
    }
    // Fold the levels inside the horizontal one (pure-fiber planes).
    for level in (plane.x_level + 1..stack.depth()).rev() {
        let t = base.t[level];
        k = (k - t.sinh() * t.sinh()) / (t.cosh() * t.cosh());
    }
    // The single-level formula at the horizontal level.
    let t = base.t[plane.x_level];
    let (f, fp, fpp) = (t.cosh(), t.sinh(), t.cosh());
    let (nv, _, _) = plane.fiber_norms(stack)?;
    // |v|^2 as seen from the horizontal level: outer warps rescale x and v
    // identically, so the normalized components are unchanged.
    k = -(fpp / f) * plane.x * plane.x + (k - fp * fp) / (f * f) * nv;
    // Fold the outer levels.
    for level in (0..plane.x_level).rev() {
        let t = base.t[level];
        k = (k - t.sinh() * t.sinh()) / (t.cosh() * t.cosh());
    }
    Ok(k)
}

/// Finite-difference curvature tensor at a point: Christoffel symbols from
/// central differences of the metric, curvature from central differences of
/// the Christoffel symbols, O(h^2) overall.
pub struct CurvatureTensor {
    n: usize,
    g: DMatrix<f64>,
    /// Fully lowered R_{a b c d}, flattened.
    riem: Vec<f64>,
}

impl CurvatureTensor {
    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.n + b) * self.n + c) * self.n + d
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Sectional curvature of the plane spanned by coordinate vectors `u`, `v`.
    pub fn k_plane(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let n = self.n;
        if u.len() != n || v.len() != n {
            return Err(GeomError::DimensionMismatch {
                left: u.len().max(v.len()),
                right: n,
            });
        }
        let ip = |a: &[f64], b: &[f64]| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += self.g[(i, j)] * a[i] * b[j];
                }
            }
            acc
        };
        let gram = ip(u, u) * ip(v, v) - ip(u, v) * ip(u, v);
        if gram < 1e-12 {
            return Err(GeomError::Usage(format!(
                "near-degenerate plane: gram determinant {gram}"
            )));
        }
        // <R(u, v) v, u> with R_{a b c d} = g_{a r} R^r_{b c d}.
        let mut num = 0.0;
        for a in 0..n {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if v[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    if u[c] == 0.0 {
                        continue;
                    }
                    for d in 0..n {
                        num += self.riem[self.idx(a, b, c, d)] * u[a] * v[b] * u[c] * v[d];
                    }
                }
            }
        }
        Ok(num / gram)
    }
}

fn christoffel(stack: &WarpedStack, coords: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = coords.len();
    let g = stack.metric_at_coords(coords)?;
    let g_inv = g.clone().try_inverse().ok_or_else(|| {
        GeomError::Domain("metric tensor is numerically singular".into())
    })?;
    // dg[l][i][j] = d g_ij / d x_l
    let mut dg = vec![0.0; n * n * n];
    for l in 0..n {
        let mut up = coords.to_vec();
        let mut dn = coords.to_vec();
        up[l] += h;
        dn[l] -= h;
        let gp = stack.metric_at_coords(&up)?;
        let gm = stack.metric_at_coords(&dn)?;
        for i in 0..n {
            for j in 0..n {
                dg[(l * n + i) * n + j] = (gp[(i, j)] - gm[(i, j)]) / (2.0 * h);
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += g_inv[(k, l)]
                        * (dg[(i * n + j) * n + l] + dg[(j * n + i) * n + l]
                            - dg[(l * n + i) * n + j]);
                }
                gamma[(k * n + i) * n + j] = 0.5 * acc;
            }
        }
    }
    Ok(gamma)
}

/// Build the finite-difference curvature tensor at `p` with step `h`.
///
/// The point must sit at least `2h` inside the fiber window so every probe
/// stays in the chart; steps above `1e-2` are rejected as too coarse for the
/// O(h^2) truncation to be meaningful.
pub fn fd_riemann(stack: &WarpedStack, p: &StackPoint, h: f64) -> Result<CurvatureTensor> {
    if !(h > 0.0) || h > 1e-2 {
        return Err(GeomError::Usage(format!(
            "finite-difference step must be in (0, 1e-2], got {h}"
        )));
    }
    stack.check_point(p)?;
    let (lo, hi) = stack.fiber.s_window();
    if p.s - 2.0 * h < lo || p.s + 2.0 * h > hi {
        return Err(GeomError::Domain(format!(
            "point s = {} within 2h of the chart boundary [{lo}, {hi}]",
            p.s
        )));
    }
    let coords = p.coords();
    let n = coords.len();
    let gamma0 = christoffel(stack, &coords, h)?;
    // dGamma[m][k][i][j] = d Gamma^k_ij / d x_m
    let mut dgamma = vec![0.0; n * n * n * n];
    for m in 0..n {
        let mut up = coords.clone();
        let mut dn = coords.clone();
        up[m] += h;
        dn[m] -= h;
        let gp = christoffel(stack, &up, h)?;
        let gm = christoffel(stack, &dn, h)?;
        for k in 0..n * n * n {
            dgamma[m * n * n * n + k] = (gp[k] - gm[k]) / (2.0 * h);
        }
    }
    let gam = |k: usize, i: usize, j: usize| gamma0[(k * n + i) * n + j];
    let dgam = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
    let g = stack.metric_tensor(p)?;
    // R^r_{s m v} = d_m Gamma^r_{v s} - d_v Gamma^r_{m s}
    //              + Gamma^r_{m l} Gamma^l_{v s} - Gamma^r_{v l} Gamma^l_{m s}
    let mut riem = vec![0.0; n * n * n * n];
    for r in 0..n {
        for s in 0..n {
            for m in 0..n {
                for v in 0..n {
                    let mut val = dgam(m, r, v, s) - dgam(v, r, m, s);
                    for l in 0..n {
                        val += gam(r, m, l) * gam(l, v, s) - gam(r, v, l) * gam(l, m, s);
                    }
                    riem[((r * n + s) * n + m) * n + v] = val;
                }
            }
        }
    }
    // Lower the first index.
    let mut low = vec![0.0; n * n * n * n];
    for a in 0..n {
        for s in 0..n {
            for m in 0..n {
                for v in 0..n {
                    let mut val = 0.0;
                    for r in 0..n {
                        val += g[(a, r)] * riem[((r * n + s) * n + m) * n + v];
                    }
                    low[((a * n + s) * n + m) * n + v] = val;
                }
            }
        }
    }
    Ok(CurvatureTensor { n, g, riem: low })
}

/// Sampling region for pinching scans: a symmetric box in the outer
/// coordinates and a sub-interval of the fiber window; the angle is sampled
/// over a full turn.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRegion {
    pub t_half_width: f64,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl ScanRegion {
    pub fn new(t_half_width: f64, s_lo: f64, s_hi: f64) -> Self {
        Self {
            t_half_width,
            s_lo,
            s_hi,
        }
    }
}

/// Location of a sampled extreme: point coordinates and the two plane basis
/// vectors.
#[derive(Debug, Clone, Serialize)]
pub struct ScanLocation {
    pub k: f64,
    pub point: Vec<f64>,
    pub plane_u: Vec<f64>,
    pub plane_v: Vec<f64>,
}

/// Window the scan is expected to stay inside; excursions are recorded as
/// violations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpectedWindow {
    pub k_lo: f64,
    pub k_hi: f64,
    pub tol: f64,
}

/// Report of one pinching scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub region: ScanRegion,
    pub n: usize,
    pub seed: u64,
    pub h: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub argmin: ScanLocation,
    pub argmax: ScanLocation,
    pub violations: Vec<ScanLocation>,
}

struct ChunkScan {
    min: Option<ScanLocation>,
    max: Option<ScanLocation>,
    violations: Vec<ScanLocation>,
}

/// Deterministic pinching scan: `n` random (point, plane) samples evaluated
/// through the finite-difference tensor. Samples are partitioned into fixed
/// blocks, each with its own seed split from the caller's, so thread
/// scheduling cannot change the result.
pub fn pinch_scan(
    stack: &WarpedStack,
    region: &ScanRegion,
    n: usize,
    seed: u64,
    h: f64,
    expected: Option<ExpectedWindow>,
) -> Result<ScanReport> {
    if n == 0 {
        return Err(GeomError::Usage("scan needs at least one sample".into()));
    }
    let (w_lo, w_hi) = stack.fiber.s_window();
    let s_lo = region.s_lo.max(w_lo + 2.5 * h);
    let s_hi = region.s_hi.min(w_hi - 2.5 * h);
    if !(s_lo < s_hi) {
        return Err(GeomError::Domain(format!(
            "scan region [{}, {}] leaves no room inside the fiber window",
            region.s_lo, region.s_hi
        )));
    }
    const BLOCK: usize = 64;
    let blocks = n.div_ceil(BLOCK);
    let results: Vec<ChunkScan> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let count = BLOCK.min(n - b * BLOCK);
            let mut chunk = ChunkScan {
                min: None,
                max: None,
                violations: Vec::new(),
            };
            for _ in 0..count {
                let point = StackPoint {
                    t: (0..stack.depth())
                        .map(|_| rng.gen_range(-region.t_half_width..=region.t_half_width))
                        .collect(),
                    s: rng.gen_range(s_lo..=s_hi),
                    theta: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                };
                let tensor = match fd_riemann(stack, &point, h) {
                    Ok(t) => t,
                    Err(_) => continue,
                };
                let (u, v) = match random_plane(&tensor, &mut rng) {
                    Some(pair) => pair,
                    None => continue,
                };
                let k = match tensor.k_plane(&u, &v) {
                    Ok(k) => k,
                    Err(_) => continue,
                };
                let loc = ScanLocation {
                    k,
                    point: point.coords(),
                    plane_u: u,
                    plane_v: v,
                };
                if chunk.min.as_ref().map_or(true, |m| k < m.k) {
                    chunk.min = Some(loc.clone());
                }
                if chunk.max.as_ref().map_or(true, |m| k > m.k) {
                    chunk.max = Some(loc.clone());
                }
                if let Some(win) = expected {
                    if k < win.k_lo - win.tol || k > win.k_hi + win.tol {
                        chunk.violations.push(loc);
                    }
                }
            }
            chunk
        })
        .collect();

    let mut min: Option<ScanLocation> = None;
    let mut max: Option<ScanLocation> = None;
    let mut violations = Vec::new();
    for chunk in results {
        if let Some(m) = chunk.min {
            if min.as_ref().map_or(true, |cur| m.k < cur.k) {
                min = Some(m);
            }
        }
        if let Some(m) = chunk.max {
            if max.as_ref().map_or(true, |cur| m.k > cur.k) {
                max = Some(m);
            }
        }
        violations.extend(chunk.violations);
    }
    let argmin = min.ok_or_else(|| GeomError::Internal("scan produced no samples".into()))?;
    let argmax = max.ok_or_else(|| GeomError::Internal("scan produced no samples".into()))?;
    Ok(ScanReport {
        region: region.clone(),
        n,
        seed,
        h,
        k_min: argmin.k,
        k_max: argmax.k,
        argmin,
        argmax,
        violations,
    })
}

/// Two metric-orthonormal vectors from standard Gaussian coordinate draws.
fn random_plane(tensor: &CurvatureTensor, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = tensor.g.nrows();
    let g = &tensor.g;
    let ip = |a: &[f64], b: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += g[(i, j)] * a[i] * b[j];
            }
        }
        acc
    };
    for _ in 0..16 {
        let a: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let na = ip(&a, &a).sqrt();
        if na < 1e-9 {
            continue;
        }
        let u: Vec<f64> = a.iter().map(|x| x / na).collect();
        let proj = ip(&b, &u);
        let mut v: Vec<f64> = b.iter().zip(&u).map(|(x, y)| x - proj * y).collect();
        let nv = ip(&v, &v).sqrt();
        if nv < 1e-6 {
            continue;
        }
        for x in &mut v {
            *x /= nv;
        }
        return Some((u, v));
    }
    None
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream deterministic.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Chart of an exact-fiber stack into the upper half-space model: the fiber
/// maps to the vertical 2-plane via `(s, theta) -> (coeff * theta, e^{-(s-shift)})`
/// and each level inserts its coordinate through normal Fermi coordinates
/// `(t, y) -> (..., height * tanh t, height * sech t)`.
pub fn uhs_chart(stack: &WarpedStack, p: &StackPoint) -> Result<UhsPoint> {
    stack.check_point(p)?;
    let (coeff, shift) = match stack.fiber.profile().form() {
        ProfileForm::Exp { coeff, shift } => (*coeff, *shift),
        _ => {
            return Err(GeomError::Usage(
                "the model chart exists only over the exact exponential fiber".into(),
            ))
        }
    };
    let mut coords = vec![coeff * p.theta, (-(p.s - shift)).exp()];
    // Innermost level first.
    for &t in p.t.iter().rev() {
        let height = *coords.last().unwrap();
        let idx = coords.len() - 1;
        coords[idx] = height * t.tanh();
        coords.push(height / t.cosh());
    }
    UhsPoint::new(coords)
}

/// The vertical 2-plane of the model, the image of the fiber under the chart.
pub fn chart_fiber_subspace(stack: &WarpedStack) -> Result<VerticalSubspace> {
    VerticalSubspace::new(stack.dim(), 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_stack(dim: usize) -> WarpedStack {
        WarpedStack::exact_hyperbolic(dim, 0.5, (-1.5, 1.5)).unwrap()
    }

    fn demo_rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn metric_is_fiber_metric_at_depth_zero() {
        let stack = exact_stack(2);
        let p = StackPoint {
            t: vec![],
            s: 0.3,
            theta: 1.0,
        };
        let g = stack.metric_tensor(&p).unwrap();
        let f = stack.fiber().profile().f(0.3);
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(1, 1)] - f * f).abs() < 1e-15);
    }

    #[test]
    fn metric_blocks_at_zero_outer_coordinates() {
        let stack = exact_stack(3);
        let p = StackPoint {
            t: vec![0.0],
            s: 0.2,
            theta: 0.4,
        };
        let g = stack.metric_tensor(&p).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(1, 1)], 1.0);
        let f = stack.fiber().profile().f(0.2);
        assert!((g[(2, 2)] - f * f).abs() < 1e-15);
    }

    #[test]
    fn metric_positive_definite_on_random_points() {
        let stack = exact_stack(5);
        let mut rng = demo_rng(7);
        for _ in 0..1000 {
            let p = StackPoint {
                t: (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                s: rng.gen_range(-1.4..1.4),
                theta: rng.gen_range(0.0..6.28),
            };
            let g = stack.metric_tensor(&p).unwrap();
            let eig = g.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > 0.0));
        }
    }

    #[test]
    fn special_formula_on_exact_fiber_is_minus_one() {
        let stack = exact_stack(5);
        let mut rng = demo_rng(11);
        for _ in 0..200 {
            let base = StackPoint {
                t: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                s: rng.gen_range(-1.0..1.0),
                theta: rng.gen_range(0.0..6.0),
            };
            let g = stack.metric_tensor(&base).unwrap();
            let (gss, gtt) = (g[(3, 3)], g[(4, 4)]);
            let x: f64 = rng.gen_range(-1.0..1.0);
            let rest = (1.0 - x * x).sqrt();
            let angle: f64 = rng.gen_range(0.0..6.28);
            let v = [
                rest * angle.cos() / gss.sqrt(),
                rest * angle.sin() / gtt.sqrt(),
            ];
            let w = [
                -angle.sin() / gss.sqrt(),
                angle.cos() / gtt.sqrt(),
            ];
            let plane = PlaneSection {
                base,
                x_level: rng.gen_range(0..3),
                x,
                v,
                w,
            };
            let k = sectional_curvature_special(&stack, &plane).unwrap();
            assert!((k + 1.0).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn special_formula_rejects_bad_basis() {
        let stack = exact_stack(3);
        let plane = PlaneSection {
            base: StackPoint {
                t: vec![0.1],
                s: 0.0,
                theta: 0.0,
            },
            x_level: 0,
            x: 1.0,
            v: [0.5, 0.0],
            w: [0.0, 1.0],
        };
        assert!(matches!(
            sectional_curvature_special(&stack, &plane),
            Err(GeomError::Usage(_))
        ));
    }

    #[test]
    fn fd_riemann_recovers_constant_curvature_h3() {
        let stack = exact_stack(3);
        let mut rng = demo_rng(3);
        for _ in 0..100 {
            let p = StackPoint {
                t: vec![rng.gen_range(-0.8..0.8)],
                s: rng.gen_range(-1.0..1.0),
                theta: rng.gen_range(0.0..6.0),
            };
            let tensor = fd_riemann(&stack, &p, 1e-3).unwrap();
            let (u, v) = random_plane(&tensor, &mut rng).unwrap();
            let k = tensor.k_plane(&u, &v).unwrap();
            assert!((k + 1.0).abs() < 1e-4, "k = {k}");
        }
    }

    #[test]
    fn fd_riemann_flat_fiber_is_zero() {
        let fiber = FiberSurface::flat((1.0, 3.0)).unwrap();
        let stack = WarpedStack::new(0, fiber);
        let mut rng = demo_rng(5);
        for _ in 0..50 {
            let p = StackPoint {
                t: vec![],
                s: rng.gen_range(1.2..2.8),
                theta: rng.gen_range(0.0..6.0),
            };
            let tensor = fd_riemann(&stack, &p, 1e-3).unwrap();
            let (u, v) = random_plane(&tensor, &mut rng).unwrap();
            let k = tensor.k_plane(&u, &v).unwrap();
            assert!(k.abs() < 1e-6, "k = {k}");
        }
    }

    #[test]
    fn fd_riemann_rejects_bad_inputs() {
        let stack = exact_stack(3);
        let p = StackPoint {
            t: vec![0.0],
            s: 0.0,
            theta: 0.0,
        };
        assert!(fd_riemann(&stack, &p, 0.5).is_err());
        let edge = StackPoint {
            t: vec![0.0],
            s: 1.4995,
            theta: 0.0,
        };
        assert!(fd_riemann(&stack, &edge, 1e-3).is_err());
        let tensor = fd_riemann(&stack, &p, 1e-3).unwrap();
        let u = vec![1.0, 0.0, 0.0];
        assert!(tensor.k_plane(&u, &u).is_err());
    }

    #[test]
    fn fd_riemann_converges_at_second_order() {
        let stack = exact_stack(4);
        let p = StackPoint {
            t: vec![0.3, -0.2],
            s: 0.4,
            theta: 1.0,
        };
        let mut errs = Vec::new();
        for &h in &[1e-2, 5e-3, 2.5e-3] {
            let tensor = fd_riemann(&stack, &p, h).unwrap();
            let mut rng = demo_rng(17);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let (u, v) = random_plane(&tensor, &mut rng).unwrap();
                let k = tensor.k_plane(&u, &v).unwrap();
                worst = worst.max((k + 1.0).abs());
            }
            errs.push(worst);
        }
        assert!(errs[0] / errs[1] >= 3.0, "{errs:?}");
        assert!(errs[1] / errs[2] >= 3.0, "{errs:?}");
    }

    #[test]
    fn vertical_projection_and_chart_commute_with_model_projection() {
        let stack = exact_stack(5);
        let sub = chart_fiber_subspace(&stack).unwrap();
        let mut rng = demo_rng(23);
        for _ in 0..100 {
            let p = StackPoint {
                t: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                s: rng.gen_range(-1.0..1.0),
                theta: rng.gen_range(0.0..6.0),
            };
            let ambient = uhs_chart(stack_ref(&stack), &p).unwrap();
            let projected = crate::hyperbolic::project(&ambient, &sub).unwrap();
            let (s, theta) = stack.vertical_projection(&p).unwrap();
            let fiber_point = uhs_chart(
                &WarpedStack::new(0, stack.fiber().clone()),
                &StackPoint {
                    t: vec![],
                    s,
                    theta,
                },
            )
            .unwrap();
            // Embed the fiber image in the ambient model.
            let mut want = vec![0.0; 5];
            want[0] = fiber_point.coords()[0];
            want[4] = fiber_point.coords()[1];
            for (got, want) in projected.coords().iter().zip(&want) {
                assert!((got - want).abs() < 1e-9, "{projected:?} vs {want:?}");
            }
        }
    }

    fn stack_ref(stack: &WarpedStack) -> &WarpedStack {
        stack
    }

    #[test]
    fn chart_pulls_back_the_model_metric() {
        // J^T G_model J against the stack metric, by finite differences of
        // the chart map.
        let stack = exact_stack(4);
        let p = StackPoint {
            t: vec![0.4, -0.3],
            s: 0.2,
            theta: 2.0,
        };
        let h = 1e-6;
        let n = 4;
        let coords = p.coords();
        let mut jac = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut up = coords.clone();
            let mut dn = coords.clone();
            up[c] += h;
            dn[c] -= h;
            let fp = uhs_chart(&stack, &StackPoint::from_coords(2, &up)).unwrap();
            let fm = uhs_chart(&stack, &StackPoint::from_coords(2, &dn)).unwrap();
            for r in 0..n {
                jac[(r, c)] = (fp.coords()[r] - fm.coords()[r]) / (2.0 * h);
            }
        }
        let image = uhs_chart(&stack, &p).unwrap();
        let height = image.height();
        let g_model = DMatrix::identity(n, n) / (height * height);
        let pulled = jac.transpose() * g_model * jac;
        let g_stack = stack.metric_tensor(&p).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!(
                    (pulled[(i, j)] - g_stack[(i, j)]).abs() < 1e-6,
                    "entry ({i}, {j}): {} vs {}",
                    pulled[(i, j)],
                    g_stack[(i, j)]
                );
            }
        }
    }

    #[test]
    fn pinch_scan_exact_chart_stays_at_minus_one() {
        let stack = exact_stack(4);
        let region = ScanRegion::new(1.0, -1.0, 1.0);
        let report = pinch_scan(&stack, &region, 300, 42, 1e-3, None).unwrap();
        assert!(report.k_min >= -1.0 - 1e-3, "{}", report.k_min);
        assert!(report.k_max <= -1.0 + 1e-3, "{}", report.k_max);
    }

    #[test]
    fn pinch_scan_is_deterministic() {
        let stack = exact_stack(3);
        let region = ScanRegion::new(1.0, -1.0, 1.0);
        let a = pinch_scan(&stack, &region, 128, 9, 1e-3, None).unwrap();
        let b = pinch_scan(&stack, &region, 128, 9, 1e-3, None).unwrap();
        assert_eq!(a.k_min.to_bits(), b.k_min.to_bits());
        assert_eq!(a.k_max.to_bits(), b.k_max.to_bits());
        assert_eq!(a.argmin.point, b.argmin.point);
    }

    #[test]
    fn completeness_surrogate_follows_the_fiber() {
        let stack = exact_stack(4);
        assert!(stack.is_complete());
    }
}
