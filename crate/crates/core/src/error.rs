use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mesh needs at least 2 subdivisions per side, got {0}")]
    TooCoarse(usize),
    #[error("facet {facet} is not a side of cell {cell}")]
    FacetCellMismatch { facet: usize, cell: usize },
    #[error("point ({x}, {y}) lies outside the unit square")]
    PointOutside { x: f64, y: f64 },
    #[error("cell {0} has a degenerate (zero-area) geometry")]
    DegenerateCell(usize),
    #[error("active mesh is empty: the level set is positive at every vertex")]
    EmptyActiveMesh,
    #[error("facet {0} of the active boundary lies on the outer wall; the interface touches the wall")]
    InterfaceTouchesWall(usize),
    #[error("cut-off outer radius {r1} is not smaller than the wall distance {wall_distance}")]
    CutoffTooWide { r1: f64, wall_distance: f64 },
    #[error("invalid cut-off radii r0={r0}, r1={r1}")]
    InvalidCutoff { r0: f64, r1: f64 },
    #[error("no triangle quadrature rule for degree {0} (supported: 1..=10)")]
    UnsupportedDegree(usize),
    #[error("the discrete interface crosses no cell; nothing to stabilize")]
    NoCutCells,
    #[error("non-finite data evaluated at ({x}, {y})")]
    NonFiniteData { x: f64, y: f64 },
    #[error("entry ({row}, {col}) is out of range for a {dim}x{dim} matrix")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("facet {0} is not a ghost-penalty facet")]
    NotGhostFacet(usize),
    #[error("facet {0} is not on the internal boundary of the active mesh")]
    NotInternalBoundaryFacet(usize),
    #[error("cell {0} is not active")]
    InactiveCell(usize),
    #[error("convergence rates need at least two rows")]
    TooFewRows,
    #[error("error values must be positive, got {0}")]
    NonPositiveError(f64),
    #[error("mesh with n={coarse} does not nest into n={fine}")]
    NotNested { coarse: usize, fine: usize },
    #[error("the error measurement domain is empty")]
    EmptyMeasurementDomain,
    #[error("invalid physical parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}
