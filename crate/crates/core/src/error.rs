use thiserror::Error;

/// Errors reported by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("regions `{0}` and `{1}` overlap")]
    OverlappingRegions(String, String),
    #[error("regions do not tile the simulation box (covered volume {covered}, box volume {total})")]
    RegionsDoNotTile { covered: f64, total: f64 },
    #[error("gate `{0}` does not lie on region boundary planes")]
    DanglingGate(String),
    #[error("`{0}` has a non-positive dimension")]
    NegativeDimension(String),
    #[error("unknown material `{0}`")]
    UnknownMaterial(String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("target spacing {target} nm along axis {axis} cannot resolve the geometry (limit {limit} nm)")]
    SpacingTooCoarse { axis: usize, target: f64, limit: f64 },
    #[error("no uniform spacing within 25% of {target} nm fits the planes along axis {axis}")]
    IncommensurateSpacing { axis: usize, target: f64 },
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("eigensolver converged {converged} of {requested} states after {iterations} iterations")]
    NotConverged { iterations: usize, converged: usize, requested: usize },
    #[error("requested subspace cuts through a degenerate level at {energy} meV")]
    DegenerateSubspaceUnresolved { energy: f64 },
    #[error("state {index} has no Kramers partner (splitting {splitting:e} meV, overlap {overlap})")]
    UnpairedState { index: usize, splitting: f64, overlap: f64 },
    #[error("doublet overlap too small (alpha = {alpha})")]
    OverlapTooSmall { alpha: f64 },
    #[error("effective g-factor vanishes along the field direction")]
    ZeroLarmor,
    #[error("excited doublet {index} is degenerate with the ground doublet")]
    DegenerateExcitedState { index: usize },
    #[error("principal g-factor {index} is too small ({value:e}) to invert")]
    SingularPrincipalFactor { index: usize, value: f64 },
    #[error("domain is not symmetric under the `{0}` mirror")]
    MisalignedMirror(String),
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),
    #[error("dense problem dimension {dim} exceeds cap {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },
    #[error("denominator 3 gamma1 + 10 gamma2 vanishes")]
    DegenerateDenominator,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
