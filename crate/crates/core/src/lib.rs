//! Numerical workbench for closing rank one cusps of hyperbolic manifolds
//! at desk scale: exact upper half-space geometry, the 2-D spliced surfaces
//! and their curvature-pinched smoothings, iterated warped products with
//! finite-difference curvature cross-checks, and the assembly of the
//! resulting orbifold with its audits.

pub mod assembly;
pub mod error;
pub mod hyperbolic;
pub mod profile;
pub mod smoothing;
pub mod surfaces;
pub mod warped;

pub use error::{GeomError, Result};
pub use hyperbolic::{busemann, dist, extend_isometry, project, Horoball, ModelIsometry, UhsPoint, VerticalSubspace};
pub use profile::{GridBand, Jet2, ProfileForm, ProfileTable, RadialProfile};
pub use smoothing::{
    min_order, riccati_steer, synthesize_profile, verify_window, MinOrderOutcome, PinchWindow,
    ProfileSolution, SmoothingProblem, SteerOutcome, SteerParams, SynthesisOutcome, WindowMode,
};
pub use surfaces::{build_splice, cone_radius, validate_collar, ConePlane, CuspCylinder, SplicedSurface};
pub use warped::{
    fd_riemann, pinch_scan, sectional_curvature_special, uhs_chart, CurvatureTensor,
    ExpectedWindow, FiberSurface, PlaneSection, ScanRegion, ScanReport, StackPoint, WarpedStack,
};
pub use assembly::{
    assemble, collar_isometry_check, completeness_audit, curvature_audit, plan_closing,
    torsion_report, ClosingPlan, CuspDescriptor, CuspedManifoldSpec, OrbifoldAssembly,
    Presentation, RelatorPolicy, TorsionReport,
};
