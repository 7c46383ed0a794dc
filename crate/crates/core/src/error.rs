use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("frame mismatch: expected {{{expected}}}, found {{{found}}}")]
    FrameMismatch { expected: String, found: String },
    #[error("approach and orientation vectors are (anti)parallel")]
    DegenerateOrientation,
    #[error("matrix is not a proper rotation (residual {residual:e})")]
    NotARotation { residual: f64 },
    #[error("expected a unit vector, norm is {norm}")]
    NotUnit { norm: f64 },
    #[error("object dimensions must be strictly positive")]
    NonPositiveDims,
    #[error("non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("axis {axis} is selected for both velocity and force control")]
    AxisConflict { axis: usize },
    #[error("gain matrix is not symmetric positive definite")]
    GainNotPositiveDefinite,
    #[error("scaling entry {index} = {value} is outside [-1, 1]")]
    ScalingOutOfRange { index: usize, value: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("no cell of the pressure image is loaded")]
    NoContact,
    #[error("pressure image needs at least one cell and {expected} values, got {found}")]
    BadShape { expected: usize, found: usize },
    #[error("pressures must be finite and non-negative")]
    NegativePressure,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("fingers closed without grasping anything")]
    NothingGrasped,
    #[error("operation needs gripper kind {expected}, mounted is {found}")]
    WrongGripper { expected: String, found: String },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Field { path: String, field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("illegal transition: event {event} in state {state}")]
    IllegalTransition { state: String, event: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("no strategy applies to this object description")]
    NoApplicableStrategy,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Record { path: String, line: usize, message: String },
    #[error("campaign: {0}")]
    Campaign(String),
}
