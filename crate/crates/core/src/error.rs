use thiserror::Error;

/// Errors produced by the simulation, rendering and dataset layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("joint {joint} value {value} outside limits [{min}, {max}]")]
    JointLimit {
        joint: usize,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("expected {expected} joint values, got {got}")]
    JointCount { expected: usize, got: usize },

    #[error("no joint with index {0}")]
    NoSuchJoint(usize),

    #[error("point is not on the surface of part {part_id}")]
    NotOnSurface { part_id: i32 },

    #[error("pixel ({x}, {y}) does not hit any surface")]
    NoSurface { x: u32, y: u32 },

    #[error("target part has no visible valid pixels")]
    EmptyPart,

    #[error("no pixel qualifies as a positive affordance sample")]
    NoAffordance,

    #[error("no pixel qualifies as a negative affordance sample")]
    NoNegatives,

    #[error("target part is not visible in the view")]
    NotVisible,

    #[error("contact is not attached")]
    Detached,

    #[error("all probed directions produced zero displacement")]
    Stalled,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
