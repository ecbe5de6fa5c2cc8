//! Closing the cusps: plan the parameters `(epsilon, a, r, i_eps, i_max)`,
//! check the collar isometries between cusp collars and cap collars in
//! dimension n, assemble the resulting orbifold as a gluing graph with
//! per-piece metrics, and audit curvature, completeness and torsion.
//!
//! The input manifold enters only through its abstract data: dimension,
//! free rank of the fundamental group, the common core length of its rank
//! one unipotent cusps, and optionally the cusp generator words. Cusps with
//! id below the feasibility threshold stay cusps; each id `i` in
//! `[i_eps, i_max]` is replaced by a cap whose local group is cyclic of
//! order `i`, so the assembled fundamental group presentation reads
//! `<s_1, ..., s_k | w_i^i, i_eps <= i <= i_max>` and the torsion orders
//! grow without bound as `i_max` does.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::profile::RadialProfile;
use crate::smoothing::{
    min_order, synthesize_profile, InfeasibilityCertificate, MinOrderOutcome, PinchWindow,
    ProfileSolution, SmoothingProblem, SteerParams, SynthesisOutcome, WindowMode,
};
use crate::surfaces::{build_splice, validate_collar, CuspCylinder};
use crate::warped::{pinch_scan, ExpectedWindow, FiberSurface, ScanRegion, WarpedStack};

/// Abstract data of the cusped input manifold.
#[derive(Debug, Clone, Serialize)]
pub struct CuspedManifoldSpec {
    /// Ambient dimension, at least 4.
    pub dim: usize,
    /// Free rank of the fundamental group.
    pub rank: u32,
    /// Common core length of the rank one unipotent cusps.
    pub core_length: f64,
    /// Optional cusp generator words, keyed by cusp id.
    pub relator_words: BTreeMap<u32, String>,
}

impl CuspedManifoldSpec {
    pub fn new(dim: usize, rank: u32, core_length: f64) -> Result<Self> {
        if dim < 4 {
            return Err(GeomError::Usage(format!(
                "cusped manifold spec needs dim >= 4, got {dim}"
            )));
        }
        if rank < 1 {
            return Err(GeomError::Usage("free rank must be >= 1".into()));
        }
        if !(core_length > 0.0) {
            return Err(GeomError::Usage(format!(
                "core length must be > 0, got {core_length}"
            )));
        }
        Ok(Self {
            dim,
            rank,
            core_length,
            relator_words: BTreeMap::new(),
        })
    }

    pub fn with_relators(mut self, words: BTreeMap<u32, String>) -> Self {
        self.relator_words = words;
        self
    }
}

/// A rank one unipotent cusp is determined up to isometry by its dimension
/// and core length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CuspDescriptor {
    pub dim: usize,
    pub core_length: f64,
}

impl CuspDescriptor {
    pub const RANK: u32 = 1;

    pub fn new(dim: usize, core_length: f64) -> Result<Self> {
        if dim < 2 || !(core_length > 0.0) {
            return Err(GeomError::Usage(
                "cusp descriptor needs dim >= 2 and positive core length".into(),
            ));
        }
        Ok(Self { dim, core_length })
    }
}

/// The resolved closing parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ClosingPlan {
    pub spec: CuspedManifoldSpec,
    pub eps: f64,
    pub mode: WindowMode,
    /// Common leaf length of the splices; `core_length = a * e^{2r}`.
    pub a: f64,
    /// Collar width.
    pub r: f64,
    /// Feasibility threshold; `None` when the mode admits no caps.
    pub i_eps: Option<u32>,
    pub i_max: u32,
    /// Infeasibility certificate carried by capless plans.
    pub certificate: Option<InfeasibilityCertificate>,
}

impl ClosingPlan {
    pub fn window(&self) -> Result<PinchWindow> {
        PinchWindow::for_mode(self.mode, self.eps)
    }

    /// Cap orders in ascending order; empty for capless plans.
    pub fn cap_orders(&self) -> Vec<u32> {
        match self.i_eps {
            Some(i0) => (i0..=self.i_max).collect(),
            None => Vec::new(),
        }
    }

    /// Cusp ids (among `1..=i_max`) that remain cusps.
    pub fn kept_cusps(&self) -> Vec<u32> {
        match self.i_eps {
            Some(i0) => (1..i0.min(self.i_max + 1)).collect(),
            None => (1..=self.i_max).collect(),
        }
    }
}

/// Deterministic parameter selection: iterate
/// `r <- arcsinh(L e^{-2r} / pi) / 4` three times from `r = 0`, then set
/// `a = L e^{-2r}`. This lands `r` at half the collar bound with the collar
/// constraint satisfied by a comfortable margin, and makes
/// `a e^{2r} = L` hold to roundoff.
pub fn collar_parameters(core_length: f64) -> Result<(f64, f64)> {
    if !(core_length > 0.0) {
        return Err(GeomError::Usage(format!(
            "core length must be > 0, got {core_length}"
        )));
    }
    let mut r = 0.0f64;
    for _ in 0..3 {
        r = 0.25 * (core_length * (-2.0 * r).exp() / std::f64::consts::PI).asinh();
    }
    let a = core_length * (-2.0 * r).exp();
    if (a * (2.0 * r).exp() - core_length).abs() > 1e-12 * core_length.max(1.0) {
        return Err(GeomError::Internal(
            "parameter rule failed to reproduce the core length".into(),
        ));
    }
    let check = validate_collar(a, r)?;
    if !check.pass {
        return Err(GeomError::Internal(format!(
            "parameter rule violated the collar constraint: r = {r}, bound = {}",
            check.bound
        )));
    }
    Ok((a, r))
}

pub fn plan_closing(
    spec: &CuspedManifoldSpec,
    eps: f64,
    i_max: u32,
    mode: WindowMode,
    params: &SteerParams,
) -> Result<ClosingPlan> {
    if !(eps > 0.0) {
        return Err(GeomError::Usage(format!("eps must be > 0, got {eps}")));
    }
    if i_max < 2 {
        return Err(GeomError::Usage(format!("i_max must be >= 2, got {i_max}")));
    }
    let (a, r) = collar_parameters(spec.core_length)?;

    match mode {
        WindowMode::TwoSided => {
            let search_bound = i_max.saturating_mul(2).max(1024);
            match min_order(eps, a, r, mode, search_bound, params)? {
                MinOrderOutcome::Found { i_eps, .. } => {
                    if i_eps > i_max {
                        return Err(GeomError::Capacity {
                            required: i_eps,
                            limit: i_max,
                        });
                    }
                    Ok(ClosingPlan {
                        spec: spec.clone(),
                        eps,
                        mode,
                        a,
                        r,
                        i_eps: Some(i_eps),
                        i_max,
                        certificate: None,
                    })
                }
                MinOrderOutcome::NoneUpToBound { bound, .. } => Err(GeomError::Capacity {
                    required: bound,
                    limit: i_max,
                }),
            }
        }
        WindowMode::OneSided => {
            let cert = match min_order(eps, a, r, mode, i_max, params)? {
                MinOrderOutcome::NoneUpToBound { certificate, .. } => *certificate,
                MinOrderOutcome::Found { i_eps, .. } => {
                    return Err(GeomError::Internal(format!(
                        "one-sided mode reported a feasible order {i_eps}"
                    )))
                }
            };
            Ok(ClosingPlan {
                spec: spec.clone(),
                eps,
                mode,
                a,
                r,
                i_eps: None,
                i_max,
                certificate: Some(cert),
            })
        }
    }
}

/// Which side of a collar a model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CollarSide {
    Cusp,
    Cap,
}

/// An n-dimensional collar: the warped stack over a width-r band of exact
/// curvature -1, together with the offset identifying the band coordinate
/// with the canonical collar coordinate `u in [r, 2r]`.
#[derive(Debug, Clone)]
pub struct CollarModel {
    pub side: CollarSide,
    pub order: Option<u32>,
    pub stack: WarpedStack,
    /// Band in the side's own arc-length coordinate.
    pub band: (f64, f64),
    /// Subtract this to land in the canonical coordinate.
    pub offset: f64,
}

impl CollarModel {
    /// Boundary leaf lengths `(a e^r, a e^{2r})` of the band.
    pub fn boundary_lengths(&self) -> (f64, f64) {
        let p = self.stack.fiber().profile();
        (
            2.0 * std::f64::consts::PI * p.f(self.band.0),
            2.0 * std::f64::consts::PI * p.f(self.band.1),
        )
    }

    fn cusp_side(plan: &ClosingPlan) -> Result<Self> {
        let cyl = CuspCylinder::new(plan.a)?;
        let band = (plan.r, 2.0 * plan.r);
        let profile = cyl.profile_on(band)?;
        Ok(Self {
            side: CollarSide::Cusp,
            order: None,
            stack: WarpedStack::new(plan.spec.dim - 2, FiberSurface::new(profile)),
            band,
            offset: 0.0,
        })
    }

    fn cap_side(plan: &ClosingPlan, order: u32, scale: f64) -> Result<Self> {
        let splice = build_splice(plan.a, order, plan.r)?;
        let band = splice.collar_band();
        let profile = splice.profile().clone();
        let profile = if scale == 1.0 {
            RadialProfile::new(profile.form().clone(), band, true)?
        } else {
            // Fault-injection path: scale the band samples.
            let n = 2048;
            let h = (band.1 - band.0) / n as f64;
            let mut f = Vec::new();
            let mut fp = Vec::new();
            let mut fpp = Vec::new();
            for j in 0..=n {
                let jet = profile.jet(band.0 + h * j as f64);
                f.push(jet.f * scale);
                fp.push(jet.fp * scale);
                fpp.push(jet.fpp * scale);
            }
            RadialProfile::new(
                crate::profile::ProfileForm::Grid(crate::profile::GridBand::new(
                    band.0, h, f, fp, fpp,
                )?),
                band,
                true,
            )?
        };
        Ok(Self {
            side: CollarSide::Cap,
            order: Some(order),
            stack: WarpedStack::new(plan.spec.dim - 2, FiberSurface::new(profile)),
            band,
            offset: splice.corner(),
        })
    }
}

/// Residual report of one collar isometry check.
#[derive(Debug, Clone, Serialize)]
pub struct CollarResidual {
    pub order: u32,
    pub samples: usize,
    /// Max pointwise metric-tensor disagreement over the sampled band.
    pub residual: f64,
    pub pass: bool,
}

/// Compare the cusp-side and cap-side collar stacks under the arc-length
/// plus angle correspondence `t = s - R_i`, lifted to dimension n. Both
/// bands are the same closed-form leaf family, so the residual is roundoff.
///
/// Fiber sample positions come from a stream independent of the outer
/// coordinates, so residuals are comparable across ambient dimensions.
pub fn collar_isometry_check(plan: &ClosingPlan, order: u32, samples: usize) -> Result<CollarResidual> {
    collar_isometry_check_scaled(plan, order, samples, 0x5EED, 1.0)
}

pub fn collar_isometry_check_scaled(
    plan: &ClosingPlan,
    order: u32,
    samples: usize,
    seed: u64,
    cap_scale: f64,
) -> Result<CollarResidual> {
    if !plan.cap_orders().contains(&order) {
        return Err(GeomError::Usage(format!(
            "order {order} is outside the plan's cap range"
        )));
    }
    let cusp = CollarModel::cusp_side(plan)?;
    let cap = CollarModel::cap_side(plan, order, cap_scale)?;
    let (l1, l2) = cusp.boundary_lengths();
    let exp = (plan.a * plan.r.exp(), plan.a * (2.0 * plan.r).exp());
    if (l1 - exp.0).abs() > 1e-9 || (l2 - exp.1).abs() > 1e-9 {
        return Err(GeomError::Internal(
            "cusp collar boundary lengths drifted from the plan".into(),
        ));
    }

    let mut fiber_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outer_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_DEAD_BEEF);
    let depth = plan.spec.dim - 2;
    let mut residual = 0.0f64;
    for _ in 0..samples {
        let u: f64 = fiber_rng.gen_range(plan.r..2.0 * plan.r);
        let theta: f64 = fiber_rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let t: Vec<f64> = (0..depth).map(|_| outer_rng.gen_range(-1.5..1.5)).collect();
        let p_cusp = crate::warped::StackPoint {
            t: t.clone(),
            s: u + cusp.offset,
            theta,
        };
        let p_cap = crate::warped::StackPoint {
            t,
            s: u + cap.offset,
            theta,
        };
        let g_cusp = cusp.stack.metric_tensor(&p_cusp)?;
        let g_cap = cap.stack.metric_tensor(&p_cap)?;
        for idx in 0..g_cusp.nrows() {
            residual = residual.max((g_cusp[(idx, idx)] - g_cap[(idx, idx)]).abs());
        }
    }
    Ok(CollarResidual {
        order,
        samples,
        residual,
        pass: residual <= 1e-9,
    })
}

/// One cap piece with its solved metric.
#[derive(Debug, Clone)]
pub struct CapPiece {
    pub order: u32,
    pub solution: ProfileSolution,
    /// Smoothed splice profile over the full cap extent.
    pub profile: RadialProfile,
    /// Structural flag: the glued end of the domain is closed.
    pub closed_glued_end: bool,
}

/// One glued interface of the assembly.
#[derive(Debug, Clone, Serialize)]
pub struct Interface {
    pub order: u32,
    pub width: f64,
    pub residual: f64,
}

/// A relator `w^exponent` of the assembled presentation.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Relator {
    pub word: String,
    pub exponent: u32,
    pub placeholder: bool,
}

/// Presentation `<s_1, ..., s_k | w_i^i>` of the assembled fundamental group.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Presentation {
    pub generators: Vec<String>,
    pub relators: Vec<Relator>,
}

impl std::fmt::Display for Presentation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<{} | ", self.generators.join(", "))?;
        let rel: Vec<String> = self
            .relators
            .iter()
            .map(|r| format!("{}^{}", r.word, r.exponent))
            .collect();
        write!(f, "{}>", rel.join(", "))
    }
}

/// The assembled orbifold: the truncated manifold plus one cap per order in
/// the plan's range, with certified interfaces and the presentation.
#[derive(Debug, Clone)]
pub struct OrbifoldAssembly {
    pub plan: ClosingPlan,
    pub caps: Vec<CapPiece>,
    /// Core piece structural flag.
    pub core_closed_ends: bool,
    pub interfaces: Vec<Interface>,
    pub presentation: Presentation,
}

/// How to fill relator words the spec does not supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelatorPolicy {
    /// Fresh formal symbols `w_i`, flagged as input-required.
    Placeholders,
    /// Every cap must have a supplied word.
    RequireWords,
}

/// Assemble the orbifold: solve the smoothing instance of every cap, run the
/// collar checks, and emit the gluing data and presentation.
pub fn assemble(
    plan: &ClosingPlan,
    policy: RelatorPolicy,
    collar_samples: usize,
    params: &SteerParams,
) -> Result<OrbifoldAssembly> {
    let window = plan.window()?;
    let mut caps = Vec::new();
    let mut interfaces = Vec::new();
    for order in plan.cap_orders() {
        let problem = SmoothingProblem::new(plan.a, order, plan.r, window)?;
        let solution = match synthesize_profile(&problem, params)? {
            SynthesisOutcome::Solved(sol) => *sol,
            SynthesisOutcome::Infeasible(cert) => {
                return Err(GeomError::Internal(format!(
                    "cap order {order} in the plan range is infeasible ({:?})",
                    cert.reason
                )))
            }
        };
        let profile = solution.smoothed_splice_profile()?;
        let collar = collar_isometry_check(plan, order, collar_samples)?;
        interfaces.push(Interface {
            order,
            width: plan.r,
            residual: collar.residual,
        });
        caps.push(CapPiece {
            order,
            solution,
            profile,
            closed_glued_end: true,
        });
    }

    let generators: Vec<String> = (1..=plan.spec.rank).map(|j| format!("s_{j}")).collect();
    let mut relators = Vec::new();
    for order in plan.cap_orders() {
        match plan.spec.relator_words.get(&order) {
            Some(word) => relators.push(Relator {
                word: word.clone(),
                exponent: order,
                placeholder: false,
            }),
            None => match policy {
                RelatorPolicy::Placeholders => relators.push(Relator {
                    word: format!("w_{order}"),
                    exponent: order,
                    placeholder: true,
                }),
                RelatorPolicy::RequireWords => {
                    return Err(GeomError::Usage(format!(
                        "no relator word supplied for cap order {order}"
                    )))
                }
            },
        }
    }

    Ok(OrbifoldAssembly {
        plan: plan.clone(),
        caps,
        core_closed_ends: true,
        interfaces,
        presentation: Presentation {
            generators,
            relators,
        },
    })
}

impl OrbifoldAssembly {
    /// Vertex and edge counts of the gluing graph: the core plus one vertex
    /// per cap, one edge per interface.
    pub fn gluing_graph(&self) -> (usize, usize) {
        (1 + self.caps.len(), self.interfaces.len())
    }

    /// Local group orders, cap by cap.
    pub fn local_groups(&self) -> Vec<(u32, u32)> {
        self.caps.iter().map(|c| (c.order, c.order)).collect()
    }

    /// Fault injection for CI drills: override one interface width.
    pub fn inject_interface_width(&mut self, index: usize, width: f64) {
        if let Some(i) = self.interfaces.get_mut(index) {
            i.width = width;
        }
    }

    /// Fault injection for CI drills: bump one sample of a cap's profile.
    pub fn corrupt_cap_curvature(&mut self, index: usize, bump: f64) -> Result<()> {
        let cap = self
            .caps
            .get_mut(index)
            .ok_or_else(|| GeomError::Usage(format!("no cap at index {index}")))?;
        let band = &cap.solution.band;
        let mid = band.len() / 2;
        let mut f: Vec<f64> = band.values().to_vec();
        f[mid] += bump;
        let fp = (0..band.len()).map(|j| band.node(j).fp).collect();
        let fpp = (0..band.len()).map(|j| band.node(j).fpp).collect();
        cap.solution.band =
            crate::profile::GridBand::new(band.s_lo(), band.step(), f, fp, fpp)?;
        cap.profile = cap.solution.smoothed_splice_profile()?;
        Ok(())
    }
}

/// Sorted local-group orders plus the unboundedness verdict.
#[derive(Debug, Clone, Serialize)]
pub struct TorsionReport {
    pub orders: Vec<u32>,
    /// True iff the orders exhaust a full integer interval ending at
    /// `i_max`, so the construction extends monotonically with `i_max`.
    pub unbounded_at_scale: bool,
    /// Set when the verdict is negative because the plan carried an
    /// infeasibility certificate instead of caps.
    pub certificate_reference: Option<String>,
}

pub fn torsion_report(asm: &OrbifoldAssembly) -> TorsionReport {
    let mut orders: Vec<u32> = asm.caps.iter().map(|c| c.order).collect();
    orders.sort_unstable();
    let full_interval = orders
        .windows(2)
        .all(|w| w[1] == w[0] + 1);
    let unbounded = !orders.is_empty()
        && full_interval
        && orders.last() == Some(&asm.plan.i_max);
    TorsionReport {
        orders,
        unbounded_at_scale: unbounded,
        certificate_reference: asm
            .plan
            .certificate
            .as_ref()
            .map(|c| format!("{:?}", c.reason)),
    }
}

/// Completeness audit: minimum collar width across interfaces and the
/// structural closed-ends flags.
#[derive(Debug, Clone, Serialize)]
pub struct CompletenessReport {
    pub min_width: f64,
    pub pass: bool,
}

pub fn completeness_audit(asm: &OrbifoldAssembly) -> CompletenessReport {
    let min_width = asm
        .interfaces
        .iter()
        .map(|i| i.width)
        .fold(f64::INFINITY, f64::min);
    let ends_closed =
        asm.core_closed_ends && asm.caps.iter().all(|c| c.closed_glued_end);
    let complete_fibers = asm.caps.iter().all(|c| c.profile.is_complete());
    let pass = if asm.interfaces.is_empty() {
        ends_closed
    } else {
        min_width >= asm.plan.r - 1e-12 && ends_closed && complete_fibers
    };
    CompletenessReport {
        min_width: if min_width.is_finite() { min_width } else { 0.0 },
        pass,
    }
}

/// Curvature audit over the assembled pieces: pinching scans of the stack
/// over each cap's smoothing band and over a sampled core region.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureAuditReport {
    pub k_min: f64,
    pub k_max: f64,
    pub violations: usize,
    pub pass: bool,
}

pub fn curvature_audit(
    asm: &OrbifoldAssembly,
    samples_per_cap: usize,
    seed: u64,
    fd_step: f64,
) -> Result<CurvatureAuditReport> {
    let window = asm.plan.window()?;
    let expected = ExpectedWindow {
        k_lo: window.k_lo,
        k_hi: window.k_hi,
        tol: 1e-2,
    };
    let depth = asm.plan.spec.dim - 2;
    let mut k_min = f64::INFINITY;
    let mut k_max = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for cap in &asm.caps {
        let stack = WarpedStack::new(depth, FiberSurface::new(cap.profile.clone()));
        let (s1, s2) = (cap.solution.problem.s1, cap.solution.problem.s2);
        let region = ScanRegion::new(1.0, s1, s2);
        let report = pinch_scan(&stack, &region, samples_per_cap, seed ^ u64::from(cap.order), fd_step, Some(expected))?;
        k_min = k_min.min(report.k_min);
        k_max = k_max.max(report.k_max);
        violations += report.violations.len();
    }
    // Core region: exact hyperbolic stack sampled over a cusp-cylinder band.
    let cyl = CuspCylinder::new(asm.plan.a)?;
    let core_profile = cyl.profile_on((-1.0, 1.0))?;
    let core_stack = WarpedStack::new(depth, FiberSurface::new(core_profile));
    let core_region = ScanRegion::new(1.0, -1.0, 1.0);
    let n_core = samples_per_cap.max(asm.caps.len() * samples_per_cap / 4).max(64);
    let report = pinch_scan(&core_stack, &core_region, n_core, seed ^ 0xC0DE, fd_step, Some(expected))?;
    k_min = k_min.min(report.k_min);
    k_max = k_max.max(report.k_max);
    violations += report.violations.len();
    Ok(CurvatureAuditReport {
        k_min,
        k_max,
        violations,
        pass: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_plan(i_eps: u32, i_max: u32) -> ClosingPlan {
        let spec = CuspedManifoldSpec::new(4, 2, 1.0).unwrap();
        let big_l = spec.core_length;
        let mut r = 0.0f64;
        for _ in 0..3 {
            r = 0.25 * (big_l * (-2.0 * r).exp() / std::f64::consts::PI).asinh();
        }
        let a = big_l * (-2.0 * r).exp();
        ClosingPlan {
            spec,
            eps: 0.1,
            mode: WindowMode::TwoSided,
            a,
            r,
            i_eps: Some(i_eps),
            i_max,
            certificate: None,
        }
    }

    #[test]
    fn cusp_descriptor_is_determined_by_dim_and_length() {
        let a = CuspDescriptor::new(4, 1.0).unwrap();
        let b = CuspDescriptor::new(4, 1.0).unwrap();
        let c = CuspDescriptor::new(7, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(CuspDescriptor::RANK, 1);
    }

    #[test]
    fn parameter_rule_meets_both_constraints() {
        let spec = CuspedManifoldSpec::new(4, 2, 1.0).unwrap();
        let plan = synthetic_plan(5, 7);
        assert!((plan.a * (2.0 * plan.r).exp() - spec.core_length).abs() < 1e-12);
        let check = validate_collar(plan.a, plan.r).unwrap();
        assert!(check.pass && check.margin > 0.0);
    }

    #[test]
    fn collar_residual_is_roundoff_and_dimension_independent() {
        let mut plan = synthetic_plan(5, 30);
        let r4 = collar_isometry_check(&plan, 12, 64).unwrap();
        assert!(r4.pass, "residual {}", r4.residual);
        plan.spec.dim = 7;
        let r7 = collar_isometry_check(&plan, 12, 64).unwrap();
        assert!((r4.residual - r7.residual).abs() <= 1e-12);
    }

    #[test]
    fn collar_check_rejects_out_of_range_orders() {
        let plan = synthetic_plan(5, 7);
        assert!(collar_isometry_check(&plan, 4, 16).is_err());
        assert!(collar_isometry_check(&plan, 8, 16).is_err());
    }

    #[test]
    fn perturbed_cap_band_fails_the_collar_check() {
        let plan = synthetic_plan(5, 7);
        let res =
            collar_isometry_check_scaled(&plan, 6, 64, 0x5EED, 1.0 + 1e-6).unwrap();
        assert!(!res.pass);
        assert!(res.residual > 1e-7 && res.residual < 1e-4, "{}", res.residual);
    }

    #[test]
    fn assembled_presentation_and_graph_shape() {
        let plan = synthetic_plan(60, 62);
        let params = SteerParams::coarse();
        let asm = assemble(&plan, RelatorPolicy::Placeholders, 16, &params).unwrap();
        assert_eq!(asm.presentation.generators, vec!["s_1", "s_2"]);
        let exps: Vec<u32> = asm.presentation.relators.iter().map(|r| r.exponent).collect();
        assert_eq!(exps, vec![60, 61, 62]);
        assert!(asm.presentation.relators.iter().all(|r| r.placeholder));
        assert_eq!(asm.gluing_graph(), (4, 3));
        assert_eq!(
            asm.local_groups(),
            vec![(60, 60), (61, 61), (62, 62)]
        );
        let shown = asm.presentation.to_string();
        assert_eq!(shown, "<s_1, s_2 | w_60^60, w_61^61, w_62^62>");
    }

    #[test]
    fn assemble_requires_words_when_asked() {
        let plan = synthetic_plan(60, 61);
        let params = SteerParams::coarse();
        assert!(matches!(
            assemble(&plan, RelatorPolicy::RequireWords, 8, &params),
            Err(GeomError::Usage(_))
        ));
    }

    #[test]
    fn torsion_report_full_interval() {
        let plan = synthetic_plan(60, 64);
        let params = SteerParams::coarse();
        let asm = assemble(&plan, RelatorPolicy::Placeholders, 8, &params).unwrap();
        let report = torsion_report(&asm);
        assert_eq!(report.orders, vec![60, 61, 62, 63, 64]);
        assert!(report.unbounded_at_scale);
    }

    #[test]
    fn torsion_report_empty_for_capless_plans() {
        let mut plan = synthetic_plan(5, 7);
        plan.i_eps = None;
        plan.mode = WindowMode::OneSided;
        plan.certificate = None;
        let params = SteerParams::coarse();
        let asm = assemble(&plan, RelatorPolicy::Placeholders, 8, &params).unwrap();
        let report = torsion_report(&asm);
        assert!(report.orders.is_empty());
        assert!(!report.unbounded_at_scale);
    }

    #[test]
    fn completeness_audit_passes_and_detects_injected_defect() {
        let plan = synthetic_plan(60, 62);
        let params = SteerParams::coarse();
        let mut asm = assemble(&plan, RelatorPolicy::Placeholders, 8, &params).unwrap();
        let ok = completeness_audit(&asm);
        assert!(ok.pass);
        assert!((ok.min_width - plan.r).abs() < 1e-15);
        asm.inject_interface_width(1, 0.0);
        let bad = completeness_audit(&asm);
        assert!(!bad.pass);
    }

    #[test]
    fn completeness_is_invariant_under_interface_permutation() {
        let plan = synthetic_plan(60, 62);
        let params = SteerParams::coarse();
        let mut asm = assemble(&plan, RelatorPolicy::Placeholders, 8, &params).unwrap();
        let before = completeness_audit(&asm);
        asm.interfaces.reverse();
        let after = completeness_audit(&asm);
        assert_eq!(before.pass, after.pass);
        assert_eq!(before.min_width, after.min_width);
    }
}
