use thiserror::Error;

use crate::model::SceneViolation;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene: {}", join_violations(.0))]
    InvalidScene(Vec<SceneViolation>),

    #[error("unknown drone id {0}")]
    UnknownDrone(u32),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("drone id sets differ between the compared action sequences")]
    DroneSetMismatch,

    #[error("snapshot taken at t={snapshot} cannot update a twin at t={twin}")]
    TimeMismatch { snapshot: u64, twin: u64 },

    #[error("knowledge graphs disagree on edge {{{a}, {b}}}: {left} vs {right}")]
    AsymmetricKnowledge { a: u32, b: u32, left: f64, right: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scene json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_violations(v: &[SceneViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
