//! Numerical smoothing of the spliced-surface corner: replace the singular
//! profile on the annulus `[R_i - r, R_i + r]` by a profile whose curvature
//! stays in a prescribed pinching window while matching the outer cone and
//! cusp profiles in value and slope at both ends.
//!
//! In log-slope form `u = f'/f` the problem is a steering problem for the
//! Riccati flow `u' = K_mag - u^2` with the control `K_mag = f''/f` confined
//! to the window magnitudes: carry `u` from `coth(R_i - r)` to `1` over
//! length `2r` while `\int u ds` meets the log of the boundary value ratio.
//! The solver searches piecewise-constant controls with at most three arcs
//! (two switch times), mollifies the switches, and refines the switch times
//! until both right-end constraints are met to machine accuracy. Bang-bang
//! controls suffice: with state `(u, \int u)` the adjoint equation gives the
//! switching function at most one sign change on extremal arcs, so the
//! two-switch family already covers the reachable set.
//!
//! A one-sided window (curvature in `[-1-eps, -1]`, so `K_mag >= 1`) makes
//! the exact matching problem infeasible for every order: comparison with
//! `v' = 1 - v^2` pins `u(s) >= coth(s)`, hence `u(s2) > 1`. The solver
//! returns that certificate instead of a solution.

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::profile::{GridBand, Jet2, ProfileForm, RadialProfile};
use crate::surfaces::{build_splice, validate_collar, SplicedSurface};

/// Which curvature window the smoothing problem is posed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    OneSided,
    TwoSided,
}

impl std::fmt::Display for WindowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WindowMode::OneSided => write!(f, "one-sided"),
            WindowMode::TwoSided => write!(f, "two-sided"),
        }
    }
}

/// Curvature window `[k_lo, k_hi]` around -1. One-sided keeps `k_hi = -1`;
/// two-sided opens the upper bound to `-1 + eps_hi` with `eps_hi < 1` so the
/// control magnitude `-k_hi` stays positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinchWindow {
    pub k_lo: f64,
    pub k_hi: f64,
    pub mode: WindowMode,
}

impl PinchWindow {
    pub fn one_sided(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(GeomError::Usage(format!("eps must be > 0, got {eps}")));
        }
        Ok(Self {
            k_lo: -1.0 - eps,
            k_hi: -1.0,
            mode: WindowMode::OneSided,
        })
    }

    pub fn two_sided(eps: f64, eps_hi: f64) -> Result<Self> {
        if !(eps > 0.0) || !(eps_hi > 0.0) {
            return Err(GeomError::Usage(
                "two-sided window needs positive widths".into(),
            ));
        }
        if eps_hi >= 1.0 {
            return Err(GeomError::Usage(
                "upper width must stay below 1 to keep the control magnitude positive".into(),
            ));
        }
        Ok(Self {
            k_lo: -1.0 - eps,
            k_hi: -1.0 + eps_hi,
            mode: WindowMode::TwoSided,
        })
    }

    /// Default reading of a single pinching constant: symmetric two-sided
    /// window.
    pub fn symmetric(eps: f64) -> Result<Self> {
        Self::two_sided(eps, eps)
    }

    pub fn for_mode(mode: WindowMode, eps: f64) -> Result<Self> {
        match mode {
            WindowMode::OneSided => Self::one_sided(eps),
            WindowMode::TwoSided => Self::symmetric(eps),
        }
    }

    pub fn eps(&self) -> f64 {
        -1.0 - self.k_lo
    }

    /// Smallest admissible control magnitude `-k_hi`.
    pub fn mag_lo(&self) -> f64 {
        -self.k_hi
    }

    /// Largest admissible control magnitude `-k_lo`.
    pub fn mag_hi(&self) -> f64 {
        -self.k_lo
    }

    pub fn contains(&self, k: f64, tol: f64) -> bool {
        k >= self.k_lo - tol && k <= self.k_hi + tol
    }

    fn validate(&self) -> Result<()> {
        if self.k_lo > self.k_hi {
            return Err(GeomError::Usage(format!(
                "window is empty: [{}, {}]",
                self.k_lo, self.k_hi
            )));
        }
        if !(self.mag_lo() > 0.0) {
            return Err(GeomError::Usage(
                "window upper bound must stay strictly negative".into(),
            ));
        }
        Ok(())
    }
}

/// Solver knobs. Defaults implement the shipped search schedule: switch-time
/// grid at resolution `1e-3 * r` (i.e. `5e-4 * length`) and a switch
/// mollifier of total width `1e-2 * r`. The output grid step is chosen
/// against the two error floors of the sample-only curvature check: central
/// differencing amplifies sample roundoff as `4 eps / h^2` while the
/// mollifier band contributes `O(h^2 K'')` truncation, and the defaults keep
/// both near `1e-5`.
#[derive(Debug, Clone)]
pub struct SteerParams {
    /// Switch-time grid steps across the interval (resolution = length / steps).
    pub grid_steps: usize,
    /// RK4 steps for mollified integration and the output grid.
    pub rk_steps: usize,
    /// Mollifier half-width as a fraction of the interval length.
    pub mollifier_halfwidth_frac: f64,
    /// Scaled residual acceptance for the refined switch times.
    pub tol: f64,
    /// Newton iterations for the refinement stage.
    pub newton_iters: usize,
    /// Number of best grid cells used as refinement starts.
    pub refine_starts: usize,
    /// Switch-time grid steps for the one-sided witness sweep.
    pub sweep_steps: usize,
    /// Sample points per candidate in the witness sweep.
    pub sweep_samples: usize,
}

impl Default for SteerParams {
    fn default() -> Self {
        Self {
            grid_steps: 2000,
            rk_steps: 16_384,
            mollifier_halfwidth_frac: 2.5e-3,
            tol: 1e-10,
            newton_iters: 40,
            refine_starts: 12,
            sweep_steps: 48,
            sweep_samples: 128,
        }
    }
}

impl SteerParams {
    /// Cheaper schedule for threshold searches; the definitive answer at the
    /// threshold itself is re-verified with the full schedule.
    pub fn coarse() -> Self {
        Self {
            grid_steps: 600,
            rk_steps: 8_192,
            ..Self::default()
        }
    }
}

/// The boundary-value data of one smoothing instance: jets of the outer
/// profiles at the annulus ends plus the target window.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothingProblem {
    /// Cone order; zero for synthetic instances not tied to a splice.
    pub order: u32,
    pub a: f64,
    pub r: f64,
    pub s1: f64,
    pub s2: f64,
    pub left: Jet2Data,
    pub right: Jet2Data,
    pub window: PinchWindow,
}

/// Serializable jet (profile value and slope; the second derivative at the
/// ends is pinned by the outer metrics' curvature -1).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Jet2Data {
    pub f: f64,
    pub fp: f64,
}

impl From<Jet2> for Jet2Data {
    fn from(j: Jet2) -> Self {
        Self { f: j.f, fp: j.fp }
    }
}

impl SmoothingProblem {
    /// The canonical cusp-closing instance on the annulus of the splice
    /// `S_i`: left data from the cone profile, right data from the cusp
    /// profile.
    pub fn for_splice(splice: &SplicedSurface, window: PinchWindow) -> Result<Self> {
        window.validate()?;
        let (s1, s2) = splice.smoothing_interval();
        let left = splice.profile().jet(s1);
        let right = splice.profile().jet(s2);
        Self::from_jets(
            splice.order(),
            splice.leaf_a(),
            splice.collar_r(),
            s1,
            s2,
            left,
            right,
            window,
        )
    }

    pub fn new(a: f64, order: u32, r: f64, window: PinchWindow) -> Result<Self> {
        let splice = build_splice(a, order, r)?;
        Self::for_splice(&splice, window)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_jets(
        order: u32,
        a: f64,
        r: f64,
        s1: f64,
        s2: f64,
        left: Jet2,
        right: Jet2,
        window: PinchWindow,
    ) -> Result<Self> {
        window.validate()?;
        if !(s1 < s2) {
            return Err(GeomError::Usage(format!(
                "need s1 < s2, got [{s1}, {s2}]"
            )));
        }
        if !(left.f > 0.0) || !(right.f > 0.0) {
            return Err(GeomError::Usage(
                "boundary profile values must be positive".into(),
            ));
        }
        if !(left.fp / left.f > 0.0) {
            return Err(GeomError::Usage(
                "left boundary log-slope must be positive".into(),
            ));
        }
        Ok(Self {
            order,
            a,
            r,
            s1,
            s2,
            left: left.into(),
            right: right.into(),
            window,
        })
    }

    pub fn length(&self) -> f64 {
        self.s2 - self.s1
    }

    pub fn u1(&self) -> f64 {
        self.left.fp / self.left.f
    }

    pub fn u2(&self) -> f64 {
        self.right.fp / self.right.f
    }

    pub fn log_area(&self) -> f64 {
        (self.right.f / self.left.f).ln()
    }
}

/// A steered control: up to three constant arcs in switch order, mollified
/// at the interior switches.
#[derive(Debug, Clone, Serialize)]
pub struct ControlPath {
    /// Arc magnitudes `K_mag = f''/f`, in order.
    pub magnitudes: Vec<f64>,
    /// Switch offsets from the left end, one fewer than `magnitudes`.
    pub switch_offsets: Vec<f64>,
    /// Mollifier half-width.
    pub halfwidth: f64,
    /// Achieved right-end residuals in `u` and in `log f`.
    pub residual_u: f64,
    pub residual_log_area: f64,
}

impl ControlPath {
    /// Control magnitude at offset `x` from the left end: telescoping sum of
    /// mollified transitions between consecutive arcs.
    pub fn magnitude_at(&self, x: f64) -> f64 {
        let mut k = self.magnitudes[0];
        for (j, &tau) in self.switch_offsets.iter().enumerate() {
            k += (self.magnitudes[j + 1] - self.magnitudes[j])
                * smooth_step((x - tau) / (2.0 * self.halfwidth) + 0.5);
        }
        k
    }
}

/// `C^\infty` transition from 0 to 1 on `[0, 1]`, flat at both ends.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let b = |y: f64| (-1.0 / y).exp();
        let num = b(x);
        num / (num + b(1.0 - x))
    }
}

/// Mollified control evaluator built from arc magnitudes and switch offsets.
#[derive(Debug, Clone)]
struct MollifiedControl {
    mags: [f64; 3],
    tau1: f64,
    tau2: f64,
    halfwidth: f64,
}

impl MollifiedControl {
    fn eval(&self, x: f64) -> f64 {
        let w2 = 2.0 * self.halfwidth;
        self.mags[0]
            + (self.mags[1] - self.mags[0]) * smooth_step((x - self.tau1) / w2 + 0.5)
            + (self.mags[2] - self.mags[1]) * smooth_step((x - self.tau2) / w2 + 0.5)
    }
}

/// Certified reasons a steering instance has no solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// Even the lowest admissible control cannot bring `u` down to the
    /// required right-end value: the comparison solution of
    /// `v' = mag_lo - v^2` stays above it.
    EndpointBelowLowerEnvelope,
    /// The exhaustive two-switch bang-bang family (which covers the
    /// reachable set) leaves a residual above tolerance.
    FamilyExhausted,
}

/// Infeasibility certificate. For one-sided windows on splice data the
/// binding comparison is `u(s) >= coth(s)`: the report carries the terminal
/// gap and a sweep witness over the bang-bang candidate family.
#[derive(Debug, Clone, Serialize)]
pub struct InfeasibilityCertificate {
    pub reason: InfeasibleReason,
    /// Terminal value of the lower comparison solution.
    pub lower_envelope_end: f64,
    /// Required terminal log-slope.
    pub required_end: f64,
    /// `lower_envelope_end - required_end`; positive iff the endpoint is
    /// unreachable outright.
    pub endpoint_gap: f64,
    /// Candidates examined by the witness sweep (0 when the sweep was
    /// skipped).
    pub candidates_checked: usize,
    /// Min over candidates and samples of `u(s) - v_low(s)`; the comparison
    /// principle makes this nonnegative up to roundoff.
    pub comparison_margin: Option<f64>,
    /// Min over candidates of the terminal log-slope.
    pub min_candidate_end: Option<f64>,
    /// Best scaled residual seen by the search (family-exhausted case).
    pub best_residual: Option<f64>,
}

/// Result of a steering attempt.
#[derive(Debug, Clone)]
pub enum SteerOutcome {
    Feasible(ControlPath),
    Infeasible(InfeasibilityCertificate),
}

impl SteerOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SteerOutcome::Feasible(_))
    }
}

/// Transfer step for `phi'' = c * phi` over length `len`, applied to
/// `(phi, phi')`.
fn propagate(c: f64, len: f64, state: (f64, f64)) -> (f64, f64) {
    let (phi, dphi) = state;
    if c > 0.0 {
        let s = c.sqrt();
        let (sh, ch) = ((s * len).sinh(), (s * len).cosh());
        (ch * phi + sh / s * dphi, s * sh * phi + ch * dphi)
    } else if c == 0.0 {
        (phi + len * dphi, dphi)
    } else {
        let w = (-c).sqrt();
        let (sn, cs) = (w * len).sin_cos();
        (cs * phi + sn / w * dphi, -w * sn * phi + cs * dphi)
    }
}

/// Exact flow of `v' = c - v^2` from `v(0) = v0 > 0`, `c > 0`.
fn riccati_flow_exact(c: f64, v0: f64, x: f64) -> f64 {
    let s = c.sqrt();
    let ratio = v0 / s;
    if (ratio - 1.0).abs() < 1e-15 {
        s
    } else if ratio > 1.0 {
        // arccoth branch, decaying toward sqrt(c) from above.
        let delta = 0.5 * ((ratio + 1.0) / (ratio - 1.0)).ln();
        s / (s * x + delta).tanh()
    } else {
        let delta = ratio.atanh();
        s * (s * x + delta).tanh()
    }
}

struct GridCandidate {
    pattern: [f64; 3],
    j: usize,
    k: usize,
    norm: f64,
}

/// Steer the Riccati flow from `u1` to `u2` over `length` with
/// `\int u = log_area`, keeping the control inside the window magnitudes.
///
/// The search is deterministic: a dense grid over the two switch times with
/// per-arc closed-form propagation, followed by Newton refinement of the
/// mollified control. Infeasible instances return a certificate.
pub fn riccati_steer(
    u1: f64,
    u2: f64,
    length: f64,
    log_area: f64,
    window: &PinchWindow,
    params: &SteerParams,
) -> Result<SteerOutcome> {
    window.validate()?;
    if !(length > 0.0) {
        return Err(GeomError::Usage(format!(
            "steering length must be > 0, got {length}"
        )));
    }
    if !(u1 > 0.0) || !(u2 > 0.0) {
        return Err(GeomError::Usage(
            "steering expects positive log-slopes at both ends".into(),
        ));
    }
    let (lo, hi) = (window.mag_lo(), window.mag_hi());

    // Constant-control shortcut: boundary data already on a common
    // geodesic-curvature leaf family (the exact cusp profile when u = 1).
    if (u1 - u2).abs() <= 1e-12 * u1.max(1.0)
        && (log_area - u1 * length).abs() <= 1e-12 * log_area.abs().max(1.0)
    {
        let c = (u1 * u1).clamp(lo, hi);
        if (c - u1 * u1).abs() <= 1e-9 {
            return Ok(SteerOutcome::Feasible(ControlPath {
                magnitudes: vec![c],
                switch_offsets: vec![],
                halfwidth: params.mollifier_halfwidth_frac * length,
                residual_u: 0.0,
                residual_log_area: log_area - u1 * length,
            }));
        }
    }

    // Endpoint reachability by comparison: every admissible flow stays at or
    // above the all-low solution.
    let envelope_end = riccati_flow_exact(lo, u1, length);
    if envelope_end > u2 {
        let (checked, margin, min_end) = if params.sweep_steps > 0 {
            let (c, m, e) = comparison_sweep(u1, length, lo, hi, params);
            (c, Some(m), Some(e))
        } else {
            (0, None, None)
        };
        return Ok(SteerOutcome::Infeasible(InfeasibilityCertificate {
            reason: InfeasibleReason::EndpointBelowLowerEnvelope,
            lower_envelope_end: envelope_end,
            required_end: u2,
            endpoint_gap: envelope_end - u2,
            candidates_checked: checked,
            comparison_margin: margin,
            min_candidate_end: min_end,
            best_residual: None,
        }));
    }

    // Dense grid over the two switch times, both bang patterns.
    let m = params.grid_steps;
    let step = length / m as f64;
    let mut best: Vec<GridCandidate> = Vec::new();
    for pattern in [[lo, hi, lo], [hi, lo, hi]] {
        // Transfer matrices for every multiple of the grid step and both
        // magnitudes, reused across candidates.
        let tables: Vec<Vec<(f64, f64, f64, f64)>> = pattern[..2]
            .iter()
            .map(|&c| {
                (0..=m)
                    .map(|j| {
                        let (p0, d0) = propagate(c, step * j as f64, (1.0, 0.0));
                        let (p1, d1) = propagate(c, step * j as f64, (0.0, 1.0));
                        (p0, p1, d0, d1)
                    })
                    .collect()
            })
            .collect();
        let idx = |c: f64| usize::from(c != pattern[0]);
        for j in 0..=m {
            let t0 = &tables[idx(pattern[0])][j];
            let s0 = (t0.0 + t0.1 * u1, t0.2 + t0.3 * u1);
            for k in j..=m {
                let t1 = &tables[idx(pattern[1])][k - j];
                let s1 = (t1.0 * s0.0 + t1.1 * s0.1, t1.2 * s0.0 + t1.3 * s0.1);
                let t2 = &tables[idx(pattern[2])][m - k];
                let s2 = (t2.0 * s1.0 + t2.1 * s1.1, t2.2 * s1.0 + t2.3 * s1.1);
                if s2.0 <= 0.0 {
                    continue;
                }
                let ru = s2.1 / s2.0 - u2;
                let ra = s2.0.ln() - log_area;
                let norm = ru.abs() + ra.abs();
                push_candidate(&mut best, params.refine_starts, pattern, j, k, norm);
            }
        }
    }

    // Newton refinement of the mollified control from the best starts.
    let halfwidth = params.mollifier_halfwidth_frac * length;
    let mut best_resid = f64::INFINITY;
    for cand in &best {
        best_resid = best_resid.min(cand.norm);
        let tau = (step * cand.j as f64, step * cand.k as f64);
        if let Some(path) = refine(
            cand.pattern,
            tau,
            u1,
            u2,
            length,
            log_area,
            halfwidth,
            params,
        ) {
            return Ok(SteerOutcome::Feasible(path));
        }
    }

    Ok(SteerOutcome::Infeasible(InfeasibilityCertificate {
        reason: InfeasibleReason::FamilyExhausted,
        lower_envelope_end: envelope_end,
        required_end: u2,
        endpoint_gap: envelope_end - u2,
        candidates_checked: best.len(),
        comparison_margin: None,
        min_candidate_end: None,
        best_residual: Some(best_resid),
    }))
}

fn push_candidate(
    best: &mut Vec<GridCandidate>,
    cap: usize,
    pattern: [f64; 3],
    j: usize,
    k: usize,
    norm: f64,
) {
    if best.len() < cap {
        best.push(GridCandidate {
            pattern,
            j,
            k,
            norm,
        });
        best.sort_by(|a, b| a.norm.total_cmp(&b.norm));
        return;
    }
    if norm < best.last().map_or(f64::INFINITY, |c| c.norm) {
        *best.last_mut().unwrap() = GridCandidate {
            pattern,
            j,
            k,
            norm,
        };
        best.sort_by(|a, b| a.norm.total_cmp(&b.norm));
    }
}

/// Witness sweep for infeasible instances: every candidate in a coarse
/// bang-bang family stays above the all-low comparison solution.
fn comparison_sweep(
    u1: f64,
    length: f64,
    lo: f64,
    hi: f64,
    params: &SteerParams,
) -> (usize, f64, f64) {
    let m = params.sweep_steps;
    let samples = params.sweep_samples;
    let dx = length / samples as f64;
    let mut checked = 0usize;
    let mut margin = f64::INFINITY;
    let mut min_end = f64::INFINITY;
    for pattern in [[lo, hi, lo], [hi, lo, hi]] {
        for j in 0..=m {
            for k in j..=m {
                let (tau1, tau2) = (
                    length * j as f64 / m as f64,
                    length * k as f64 / m as f64,
                );
                let mut state = (1.0, u1);
                for step in 0..samples {
                    let x0 = dx * step as f64;
                    let c = if x0 < tau1 {
                        pattern[0]
                    } else if x0 < tau2 {
                        pattern[1]
                    } else {
                        pattern[2]
                    };
                    state = propagate(c, dx, state);
                    let x1 = dx * (step + 1) as f64;
                    let u = state.1 / state.0;
                    margin = margin.min(u - riccati_flow_exact(lo, u1, x1));
                }
                min_end = min_end.min(state.1 / state.0);
                checked += 1;
            }
        }
    }
    (checked, margin, min_end)
}

/// Mollified residual `(u(L) - u2, ln phi(L) - log_area)` by RK4.
fn mollified_residual(
    control: &MollifiedControl,
    u1: f64,
    u2: f64,
    length: f64,
    log_area: f64,
    steps: usize,
) -> (f64, f64) {
    let h = length / steps as f64;
    let mut phi = 1.0f64;
    let mut dphi = u1;
    for j in 0..steps {
        let x = h * j as f64;
        let (k1p, k1d) = (dphi, control.eval(x) * phi);
        let (k2p, k2d) = (
            dphi + 0.5 * h * k1d,
            control.eval(x + 0.5 * h) * (phi + 0.5 * h * k1p),
        );
        let (k3p, k3d) = (
            dphi + 0.5 * h * k2d,
            control.eval(x + 0.5 * h) * (phi + 0.5 * h * k2p),
        );
        let (k4p, k4d) = (dphi + h * k3d, control.eval(x + h) * (phi + h * k3p));
        phi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        dphi += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    }
    (dphi / phi - u2, phi.ln() - log_area)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    pattern: [f64; 3],
    start: (f64, f64),
    u1: f64,
    u2: f64,
    length: f64,
    log_area: f64,
    halfwidth: f64,
    params: &SteerParams,
) -> Option<ControlPath> {
    let bound = 4.0 * halfwidth;
    let clamp = |t: f64| t.clamp(-bound, length + bound);
    let mut tau = start;
    let eval = |tau: (f64, f64)| {
        let control = MollifiedControl {
            mags: pattern,
            tau1: tau.0,
            tau2: tau.1,
            halfwidth,
        };
        mollified_residual(&control, u1, u2, length, log_area, params.rk_steps)
    };
    let mut res = eval(tau);
    let dt = 1e-7 * length;
    for _ in 0..params.newton_iters {
        if res.0.abs() + res.1.abs() <= params.tol {
            break;
        }
        let r1 = eval((clamp(tau.0 + dt), tau.1));
        let r2 = eval((tau.0, clamp(tau.1 + dt)));
        let j11 = (r1.0 - res.0) / (clamp(tau.0 + dt) - tau.0);
        let j21 = (r1.1 - res.1) / (clamp(tau.0 + dt) - tau.0);
        let j12 = (r2.0 - res.0) / (clamp(tau.1 + dt) - tau.1);
        let j22 = (r2.1 - res.1) / (clamp(tau.1 + dt) - tau.1);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return None;
        }
        let step = (
            -(j22 * res.0 - j12 * res.1) / det,
            -(-j21 * res.0 + j11 * res.1) / det,
        );
        // Damped update with backtracking.
        let mut lambda = 1.0;
        let norm0 = res.0.abs() + res.1.abs();
        loop {
            let trial = (clamp(tau.0 + lambda * step.0), clamp(tau.1 + lambda * step.1));
            let trial_res = eval(trial);
            if trial_res.0.abs() + trial_res.1.abs() < norm0 {
                tau = trial;
                res = trial_res;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return None;
            }
        }
    }
    if res.0.abs() + res.1.abs() > params.tol {
        return None;
    }
    Some(ControlPath {
        magnitudes: pattern.to_vec(),
        switch_offsets: vec![tau.0, tau.1],
        halfwidth,
        residual_u: res.0,
        residual_log_area: res.1,
    })
}

/// A certified smoothing solution on `[s1, s2]`.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub problem: SmoothingProblem,
    /// Dense sample band of the smoothed profile.
    pub band: GridBand,
    /// The control record that produced it.
    pub control: ControlPath,
    /// Achieved curvature range from the control record.
    pub k_min: f64,
    pub k_max: f64,
    /// Max boundary mismatch over both ends, value and slope.
    pub boundary_mismatch: f64,
    /// Absolute switch locations.
    pub switch_locations: Vec<f64>,
}

impl ProfileSolution {
    /// Curvature at a band node from the control record.
    pub fn control_curvature(&self, x_from_left: f64) -> f64 {
        -control_of(&self.control).eval(x_from_left)
    }

    /// Embed the solution band into the full smoothed splice profile.
    pub fn smoothed_splice_profile(&self) -> Result<RadialProfile> {
        let p = &self.problem;
        if p.order < 2 {
            return Err(GeomError::Usage(
                "only splice-backed solutions embed into a smoothed splice".into(),
            ));
        }
        let splice = build_splice(p.a, p.order, p.r)?;
        let corner = splice.corner();
        RadialProfile::new(
            ProfileForm::SmoothedSplice {
                scale: 1.0 / f64::from(p.order),
                corner,
                coeff: p.a / (2.0 * std::f64::consts::PI),
                band: self.band.clone(),
            },
            (crate::surfaces::CONE_TIP_EPS, splice.cap_extent()),
            true,
        )
    }

    /// Sidecar metadata for exports.
    pub fn sidecar(&self) -> SolutionSidecar {
        SolutionSidecar {
            i: self.problem.order,
            a: self.problem.a,
            r: self.problem.r,
            epsilon: self.problem.window.eps(),
            mode: self.problem.window.mode,
            k_min: self.k_min,
            k_max: self.k_max,
            boundary_mismatch: self.boundary_mismatch,
            switch_times: self.switch_locations.clone(),
        }
    }
}

/// JSON sidecar schema for exported solutions.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSidecar {
    pub i: u32,
    pub a: f64,
    pub r: f64,
    pub epsilon: f64,
    pub mode: WindowMode,
    pub k_min: f64,
    pub k_max: f64,
    pub boundary_mismatch: f64,
    pub switch_times: Vec<f64>,
}

fn control_of(path: &ControlPath) -> MollifiedControl {
    match path.magnitudes.len() {
        1 => MollifiedControl {
            mags: [path.magnitudes[0]; 3],
            tau1: 0.0,
            tau2: 0.0,
            halfwidth: path.halfwidth,
        },
        3 => MollifiedControl {
            mags: [
                path.magnitudes[0],
                path.magnitudes[1],
                path.magnitudes[2],
            ],
            tau1: path.switch_offsets[0],
            tau2: path.switch_offsets[1],
            halfwidth: path.halfwidth,
        },
        _ => unreachable!("control paths have 1 or 3 arcs"),
    }
}

/// Result of a synthesis attempt.
#[derive(Debug, Clone)]
pub enum SynthesisOutcome {
    Solved(Box<ProfileSolution>),
    Infeasible(InfeasibilityCertificate),
}

impl SynthesisOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SynthesisOutcome::Solved(_))
    }

    pub fn solution(&self) -> Option<&ProfileSolution> {
        match self {
            SynthesisOutcome::Solved(s) => Some(s),
            SynthesisOutcome::Infeasible(_) => None,
        }
    }
}

/// Solve one smoothing instance: steer the log-slope, then integrate the
/// profile over a dense grid and record boundary mismatches and the achieved
/// curvature range.
pub fn synthesize_profile(p: &SmoothingProblem, params: &SteerParams) -> Result<SynthesisOutcome> {
    let outcome = riccati_steer(
        p.u1(),
        p.u2(),
        p.length(),
        p.log_area(),
        &p.window,
        params,
    )?;
    let path = match outcome {
        SteerOutcome::Infeasible(cert) => return Ok(SynthesisOutcome::Infeasible(cert)),
        SteerOutcome::Feasible(path) => path,
    };
    let control = control_of(&path);
    let n = params.rk_steps;
    let h = p.length() / n as f64;
    let mut f = Vec::with_capacity(n + 1);
    let mut fp = Vec::with_capacity(n + 1);
    let mut fpp = Vec::with_capacity(n + 1);
    let mut y = (p.left.f, p.left.fp);
    let mut k_mag_min = f64::INFINITY;
    let mut k_mag_max = f64::NEG_INFINITY;
    for j in 0..=n {
        let x = h * j as f64;
        let c = control.eval(x);
        k_mag_min = k_mag_min.min(c);
        k_mag_max = k_mag_max.max(c);
        f.push(y.0);
        fp.push(y.1);
        fpp.push(c * y.0);
        if j < n {
            let (k1p, k1d) = (y.1, c * y.0);
            let cm = control.eval(x + 0.5 * h);
            let (k2p, k2d) = (y.1 + 0.5 * h * k1d, cm * (y.0 + 0.5 * h * k1p));
            let (k3p, k3d) = (y.1 + 0.5 * h * k2d, cm * (y.0 + 0.5 * h * k2p));
            let ce = control.eval(x + h);
            let (k4p, k4d) = (y.1 + h * k3d, ce * (y.0 + h * k3p));
            y = (
                y.0 + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
                y.1 + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
            );
        }
    }
    let band = GridBand::new(p.s1, h, f, fp, fpp)?;
    let end = band.node(n);
    let boundary_mismatch = (end.f - p.right.f)
        .abs()
        .max((end.fp - p.right.fp).abs());
    let switch_locations = path.switch_offsets.iter().map(|t| p.s1 + t).collect();
    Ok(SynthesisOutcome::Solved(Box::new(ProfileSolution {
        problem: p.clone(),
        band,
        control: path,
        k_min: -k_mag_max,
        k_max: -k_mag_min,
        boundary_mismatch,
        switch_locations,
    })))
}

/// Outcome of the threshold search over cone orders.
#[derive(Debug, Clone)]
pub enum MinOrderOutcome {
    /// Smallest feasible order, with upward-closure probes at `2i` and `10i`.
    Found {
        i_eps: u32,
        upward_probes: Vec<u32>,
    },
    /// No feasible order up to the bound; carries the certificate from the
    /// largest order examined.
    NoneUpToBound {
        bound: u32,
        certificate: Box<InfeasibilityCertificate>,
        orders_checked: Vec<u32>,
    },
}

fn feasible_at(a: f64, r: f64, window: PinchWindow, order: u32, params: &SteerParams) -> Result<bool> {
    let p = SmoothingProblem::new(a, order, r, window)?;
    Ok(synthesize_profile(&p, params)?.is_feasible())
}

/// Smallest order `i >= 2` whose smoothing instance is feasible for the given
/// window mode, by exponential bracketing plus bisection. One-sided mode
/// instead sweeps orders logarithmically up to `bound` and returns the
/// infeasibility certificate.
pub fn min_order(
    eps: f64,
    a: f64,
    r: f64,
    mode: WindowMode,
    bound: u32,
    params: &SteerParams,
) -> Result<MinOrderOutcome> {
    let check = validate_collar(a, r)?;
    if !check.pass {
        return Err(GeomError::Precondition(format!(
            "collar constraint fails: r = {r} >= bound {}",
            check.bound
        )));
    }
    if !(eps > 0.0) {
        return Err(GeomError::Usage(format!("eps must be > 0, got {eps}")));
    }
    let window = PinchWindow::for_mode(mode, eps)?;

    if mode == WindowMode::OneSided {
        let mut orders = Vec::new();
        let mut i = 2u32;
        let mut last_cert = None;
        while i <= bound {
            let p = SmoothingProblem::new(a, i, r, window)?;
            match synthesize_profile(&p, params)? {
                SynthesisOutcome::Solved(_) => {
                    return Err(GeomError::Internal(format!(
                        "one-sided instance reported feasible at order {i}; the comparison principle rules this out"
                    )));
                }
                SynthesisOutcome::Infeasible(cert) => last_cert = Some(cert),
            }
            orders.push(i);
            // Logarithmic sampling, roughly 10 orders per decade.
            let next = ((f64::from(i)) * 1.26).ceil() as u32;
            i = next.max(i + 1);
        }
        let certificate = Box::new(last_cert.ok_or_else(|| {
            GeomError::Usage(format!("order bound {bound} admits no orders >= 2"))
        })?);
        return Ok(MinOrderOutcome::NoneUpToBound {
            bound,
            certificate,
            orders_checked: orders,
        });
    }

    // Exponential bracketing in the coarse schedule, then bisection.
    let coarse = SteerParams {
        grid_steps: params.grid_steps.min(800),
        rk_steps: params.rk_steps.min(16_384),
        ..params.clone()
    };
    let mut hi = 2u32;
    let mut lo = 1u32;
    loop {
        if feasible_at(a, r, window, hi, &coarse)? {
            break;
        }
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > bound {
            let p = SmoothingProblem::new(a, bound.max(2), r, window)?;
            let cert = match synthesize_profile(&p, params)? {
                SynthesisOutcome::Infeasible(cert) => cert,
                SynthesisOutcome::Solved(_) => {
                    return Err(GeomError::Internal(
                        "bracketing missed a feasible bound order".into(),
                    ))
                }
            };
            return Ok(MinOrderOutcome::NoneUpToBound {
                bound,
                certificate: Box::new(cert),
                orders_checked: vec![bound.max(2)],
            });
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if mid < 2 {
            break;
        }
        if feasible_at(a, r, window, mid, &coarse)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Definitive verification at full resolution; walk if the coarse and
    // full schedules disagree at the edge.
    let mut i_eps = hi.max(2);
    while i_eps > 2 && feasible_at(a, r, window, i_eps - 1, params)? {
        i_eps -= 1;
    }
    while !feasible_at(a, r, window, i_eps, params)? {
        i_eps += 1;
        if i_eps > bound {
            return Err(GeomError::Capacity {
                required: i_eps,
                limit: bound,
            });
        }
    }

    // Upward closure probes.
    let mut upward_probes = vec![i_eps];
    for mult in [2u32, 10] {
        let probe = i_eps.saturating_mul(mult);
        if !feasible_at(a, r, window, probe, params)? {
            return Err(GeomError::Internal(format!(
                "feasibility is not upward closed at probe order {probe}"
            )));
        }
        upward_probes.push(probe);
    }
    Ok(MinOrderOutcome::Found {
        i_eps,
        upward_probes,
    })
}

/// Report of an after-the-fact window check that ignores the control record.
#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    /// Curvature extremes recomputed from the samples by central differences.
    pub k_min: f64,
    pub k_max: f64,
    pub max_boundary_mismatch: f64,
    pub pass: bool,
    /// Sample indices where the recomputed curvature leaves the window
    /// (plus tolerance).
    pub violations: Vec<usize>,
}

/// Recompute the curvature of a solution band by second-order central
/// differences of the stored values alone and check it against the window.
pub fn verify_window(sol: &ProfileSolution, tol: f64) -> Result<WindowReport> {
    verify_band(
        &sol.band,
        &sol.problem.window,
        tol,
        Some((sol.problem.left, sol.problem.right)),
    )
}

pub(crate) fn verify_band(
    band: &GridBand,
    window: &PinchWindow,
    tol: f64,
    boundary: Option<(Jet2Data, Jet2Data)>,
) -> Result<WindowReport> {
    let n = band.len();
    if n < 3 {
        return Err(GeomError::Usage(
            "window verification needs at least 3 samples".into(),
        ));
    }
    let h = band.step();
    let f = band.values();
    let mut k_min = f64::INFINITY;
    let mut k_max = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for j in 1..n - 1 {
        let k = -(f[j + 1] - 2.0 * f[j] + f[j - 1]) / (h * h * f[j]);
        k_min = k_min.min(k);
        k_max = k_max.max(k);
        if !window.contains(k, tol) {
            violations.push(j);
        }
    }
    let max_boundary_mismatch = match boundary {
        Some((left, right)) => {
            let first = band.node(0);
            let last = band.node(n - 1);
            (first.f - left.f)
                .abs()
                .max((first.fp - left.fp).abs())
                .max((last.f - right.f).abs())
                .max((last.fp - right.fp).abs())
        }
        None => 0.0,
    };
    Ok(WindowReport {
        k_min,
        k_max,
        max_boundary_mismatch,
        pass: violations.is_empty() && max_boundary_mismatch <= 1e-9,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn splice_problem(eps: f64, a: f64, r: f64, order: u32, mode: WindowMode) -> SmoothingProblem {
        let window = PinchWindow::for_mode(mode, eps).unwrap();
        SmoothingProblem::new(a, order, r, window).unwrap()
    }

    #[test]
    fn window_construction_and_magnitudes() {
        let one = PinchWindow::one_sided(0.1).unwrap();
        assert_eq!(one.k_hi, -1.0);
        assert!((one.mag_lo() - 1.0).abs() < 1e-15);
        assert!((one.mag_hi() - 1.1).abs() < 1e-15);
        let two = PinchWindow::symmetric(0.1).unwrap();
        assert!((two.mag_lo() - 0.9).abs() < 1e-15);
        assert!(PinchWindow::two_sided(0.1, 1.0).is_err());
        assert!(PinchWindow::one_sided(0.0).is_err());
    }

    #[test]
    fn constant_control_shortcut_is_the_cusp_profile() {
        let window = PinchWindow::symmetric(0.1).unwrap();
        let out = riccati_steer(1.0, 1.0, 0.3, 0.3, &window, &SteerParams::coarse()).unwrap();
        match out {
            SteerOutcome::Feasible(path) => {
                assert_eq!(path.magnitudes, vec![1.0]);
                assert!(path.switch_offsets.is_empty());
            }
            SteerOutcome::Infeasible(_) => panic!("constant instance must be feasible"),
        }
    }

    #[test]
    fn near_trivial_two_sided_instance_is_feasible() {
        // Small drop near u = 1 with the symmetric window: the available
        // decrease rate (about eps) dominates the required drop 1e-3.
        let window = PinchWindow::symmetric(0.1).unwrap();
        let u1 = 1.0 + 1e-3;
        let length = 0.1;
        let log_area = 1.0005 * length;
        let out = riccati_steer(u1, 1.0, length, log_area, &window, &SteerParams::coarse()).unwrap();
        assert!(out.is_feasible(), "{out:?}");
    }

    #[test]
    fn one_sided_steering_is_certified_infeasible() {
        let p = splice_problem(0.1, 1.0, 0.05, 50, WindowMode::OneSided);
        let mut params = SteerParams::coarse();
        params.sweep_steps = 24;
        params.sweep_samples = 64;
        let out = riccati_steer(
            p.u1(),
            p.u2(),
            p.length(),
            p.log_area(),
            &p.window,
            &params,
        )
        .unwrap();
        match out {
            SteerOutcome::Infeasible(cert) => {
                assert_eq!(cert.reason, InfeasibleReason::EndpointBelowLowerEnvelope);
                assert!(cert.endpoint_gap > 0.0);
                // Lower envelope from the cone boundary data is coth(s).
                assert!((cert.lower_envelope_end - 1.0 / p.s2.tanh()).abs() < 1e-12);
                assert!(cert.comparison_margin.unwrap() >= -1e-6);
                assert!(cert.min_candidate_end.unwrap() > 1.0);
                assert!(cert.candidates_checked > 0);
            }
            SteerOutcome::Feasible(_) => panic!("one-sided splice instance cannot be feasible"),
        }
    }

    #[test]
    fn synthesized_profile_matches_boundary_and_window() {
        let p = splice_problem(0.1, 1.0, 0.05, 64, WindowMode::TwoSided);
        let mut params = SteerParams::default();
        params.rk_steps = 32_768;
        params.grid_steps = 800;
        let out = synthesize_profile(&p, &params).unwrap();
        let sol = out.solution().expect("order 64 should be feasible");
        assert!(sol.boundary_mismatch <= 1e-9, "{}", sol.boundary_mismatch);
        assert!(sol.k_min >= p.window.k_lo - 1e-12);
        assert!(sol.k_max <= p.window.k_hi + 1e-12);
        let report = verify_window(sol, 1e-3).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.k_min >= p.window.k_lo - 1e-3);
        assert!(report.k_max <= p.window.k_hi + 1e-3);
    }

    #[test]
    fn degenerate_gap_reproduces_the_cusp_profile() {
        // Boundary data from the same cusp profile at both ends.
        let coeff = 1.0 / (2.0 * std::f64::consts::PI);
        let window = PinchWindow::symmetric(0.1).unwrap();
        let (s1, s2) = (0.3, 0.5);
        let jet = |s: f64| {
            let f = coeff * (s - 0.3f64).exp();
            Jet2 { f, fp: f, fpp: f }
        };
        let p = SmoothingProblem::from_jets(0, 1.0, 0.1, s1, s2, jet(s1), jet(s2), window).unwrap();
        let mut params = SteerParams::coarse();
        params.rk_steps = 8192;
        let out = synthesize_profile(&p, &params).unwrap();
        let sol = out.solution().unwrap();
        for j in (0..sol.band.len()).step_by(512) {
            let s = sol.band.node_s(j);
            let expect = coeff * (s - 0.3f64).exp();
            assert!((sol.band.node(j).f - expect).abs() < 1e-11);
        }
        // The control record is the exact constant; the sample-only check
        // sits on the central-difference roundoff floor.
        assert_eq!(sol.control.magnitudes, vec![1.0]);
        assert_eq!(sol.k_min, -1.0);
        assert_eq!(sol.k_max, -1.0);
        let report = verify_window(sol, 1e-5).unwrap();
        assert!((report.k_min + 1.0).abs() < 1e-5 && (report.k_max + 1.0).abs() < 1e-5);
    }

    #[test]
    fn verify_window_passes_exact_profiles() {
        // Exact cusp and cone bands sampled straight into solution shape.
        let n = 4096usize;
        let exact = |f: &dyn Fn(f64) -> (f64, f64, f64), s1: f64, s2: f64| {
            let h = (s2 - s1) / n as f64;
            let mut fv = Vec::new();
            let mut fpv = Vec::new();
            let mut fppv = Vec::new();
            for j in 0..=n {
                let (a, b, c) = f(s1 + h * j as f64);
                fv.push(a);
                fpv.push(b);
                fppv.push(c);
            }
            GridBand::new(s1, h, fv, fpv, fppv).unwrap()
        };
        // Tolerance sits above the central-difference roundoff floor
        // (about 4 eps / h^2 relative to f).
        let window = PinchWindow::symmetric(1e-6).unwrap();
        let cusp = exact(&|s| (s.exp(), s.exp(), s.exp()), 0.0, 0.5);
        let rep = verify_band(&cusp, &window, 1e-6, None).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.k_min + 1.0).abs() < 2e-6 && (rep.k_max + 1.0).abs() < 2e-6);
        let cone = exact(
            &|s| (s.sinh() / 9.0, s.cosh() / 9.0, s.sinh() / 9.0),
            1.0,
            1.5,
        );
        let rep = verify_band(&cone, &window, 1e-6, None).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn verify_window_localizes_an_injected_corruption() {
        let p = splice_problem(0.1, 1.0, 0.05, 64, WindowMode::TwoSided);
        let mut params = SteerParams::coarse();
        params.rk_steps = 8192;
        let out = synthesize_profile(&p, &params).unwrap();
        let sol = out.solution().unwrap();
        let mid = sol.band.len() / 2;
        let mut f = sol.band.values().to_vec();
        f[mid] += 1e-2;
        let corrupted = GridBand::new(
            sol.band.s_lo(),
            sol.band.step(),
            f,
            (0..sol.band.len()).map(|j| sol.band.node(j).fp).collect(),
            (0..sol.band.len()).map(|j| sol.band.node(j).fpp).collect(),
        )
        .unwrap();
        let rep = verify_band(&corrupted, &p.window, 1e-3, None).unwrap();
        assert!(!rep.pass);
        assert!(rep.violations.contains(&mid));
    }

    #[test]
    fn min_order_requires_a_valid_collar() {
        let params = SteerParams::coarse();
        assert!(matches!(
            min_order(0.1, 1.0, 0.2, WindowMode::TwoSided, 1 << 20, &params),
            Err(GeomError::Precondition(_))
        ));
    }

    #[test]
    fn min_order_finds_a_sharp_threshold() {
        let mut params = SteerParams::coarse();
        params.rk_steps = 8192;
        let out = min_order(0.1, 1.0, 0.05, WindowMode::TwoSided, 1 << 20, &params).unwrap();
        let i_eps = match out {
            MinOrderOutcome::Found { i_eps, .. } => i_eps,
            MinOrderOutcome::NoneUpToBound { .. } => panic!("two-sided threshold must exist"),
        };
        assert!(i_eps >= 2);
        let window = PinchWindow::symmetric(0.1).unwrap();
        assert!(feasible_at(1.0, 0.05, window, i_eps, &params).unwrap());
        if i_eps > 2 {
            assert!(!feasible_at(1.0, 0.05, window, i_eps - 1, &params).unwrap());
        }
    }

    #[test]
    fn min_order_monotone_in_window_width() {
        let mut params = SteerParams::coarse();
        params.rk_steps = 8192;
        let at = |eps: f64| {
            match min_order(eps, 1.0, 0.05, WindowMode::TwoSided, 1 << 20, &params).unwrap() {
                MinOrderOutcome::Found { i_eps, .. } => i_eps,
                MinOrderOutcome::NoneUpToBound { .. } => panic!("threshold must exist"),
            }
        };
        assert!(at(0.05) >= at(0.2));
    }

    #[test]
    fn riccati_comparison_invariant_on_admissible_grids() {
        // Any f > 0 with f''/f >= 1 and cone boundary data keeps
        // u(s) >= coth(s). Sample a few admissible controls directly.
        let order = 40u32;
        let a = 1.0;
        let r = 0.05;
        let splice = build_splice(a, order, r).unwrap();
        let (s1, s2) = splice.smoothing_interval();
        let u1 = 1.0 / s1.tanh();
        for shape in 0..5 {
            let mut state = (1.0f64, u1);
            let n = 2000;
            let h = (s2 - s1) / n as f64;
            for j in 0..n {
                let x = j as f64 / n as f64;
                // Controls in [1, 1.1] of assorted shapes.
                let c = 1.0
                    + 0.1 * match shape {
                        0 => 0.0,
                        1 => 1.0,
                        2 => x,
                        3 => 1.0 - x,
                        _ => (4.0 * std::f64::consts::PI * x).sin().abs(),
                    };
                state = propagate(c, h, state);
                let s = s1 + h * (j + 1) as f64;
                let u = state.1 / state.0;
                assert!(u >= 1.0 / s.tanh() - 1e-6, "u = {u} below coth at s = {s}");
            }
            assert!(state.1 / state.0 > 1.0);
        }
    }
}
