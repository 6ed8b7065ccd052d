use alloc::string::String;
use core::fmt;

/// Everything that can go wrong while building, encoding, evolving or
/// measuring a discretized wave system.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Degenerate bounds, too few nodes or an unsupported dimension.
    InvalidGrid(String),
    /// A material coefficient (and hence a diagonal entry of `B`) is not strictly positive.
    NonPositiveMaterial { index: usize, value: f64 },
    DimensionMismatch { expected: usize, found: usize },
    IndexOutOfRange { index: usize, len: usize },
    /// Triplet list contains the same `(row, col)` twice.
    DuplicateEntry { row: usize, col: usize },
    NonFinite(String),
    /// `R_c` could not be inverted.
    SingularConstraint,
    /// The reduced operators lost their (anti-)symmetry.
    IncompatibleConstraints { defect: f64 },
    /// `B` is not a positive diagonal, or the state cannot be encoded.
    Encoding(String),
    NotHermitian { defect: f64 },
    InvalidSchedule(String),
    NotPowerOfTwo(usize),
    /// Register would exceed the supported qubit count.
    DimensionOverflow { qubits: u32, limit: u32 },
    /// Shot-mode estimation requested without an explicit seed.
    MissingSeed,
    OverlappingPartitions { index: usize },
    /// A pre-simulated wave would leave the region it is allowed to occupy.
    Causality { required_radius: f64, available_radius: f64 },
    /// A source slice is longer than the homogeneous travel time.
    WindowTooLong { duration: f64, limit: f64 },
    ZeroNorm,
    /// Time step violates the stability bound.
    Cfl { dt: f64, max_dt: f64 },
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::NonPositiveMaterial { index, value } => {
                write!(f, "material coefficient {value} at DOF {index} is not strictly positive")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::DuplicateEntry { row, col } => write!(f, "duplicate entry at ({row}, {col})"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::SingularConstraint => write!(f, "constraint block R_c is singular"),
            Error::IncompatibleConstraints { defect } => write!(
                f,
                "constraints break the operator symmetry (defect {defect:e} > 1e-12)"
            ),
            Error::Encoding(msg) => write!(f, "encoding error: {msg}"),
            Error::NotHermitian { defect } => {
                write!(f, "operator is not Hermitian (max |H - H^dagger| = {defect:e})")
            }
            Error::InvalidSchedule(msg) => write!(f, "invalid schedule: {msg}"),
            Error::NotPowerOfTwo(n) => write!(f, "{n} is not a power of two"),
            Error::DimensionOverflow { qubits, limit } => {
                write!(f, "register needs {qubits} qubits, limit is {limit}")
            }
            Error::MissingSeed => write!(f, "shot-mode estimation requires an explicit seed"),
            Error::OverlappingPartitions { index } => {
                write!(f, "partitions overlap at DOF {index}")
            }
            Error::Causality { required_radius, available_radius } => write!(
                f,
                "causal radius {required_radius} exceeds the available radius {available_radius}"
            ),
            Error::WindowTooLong { duration, limit } => write!(
                f,
                "source slice lasts {duration}, longer than the homogeneous travel time {limit}"
            ),
            Error::ZeroNorm => write!(f, "vector has zero norm"),
            Error::Cfl { dt, max_dt } => {
                write!(f, "time step {dt} violates the stability bound; use dt <= {max_dt}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
