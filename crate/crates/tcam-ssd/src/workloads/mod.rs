//! Evaluation drivers: OLTP trace replay, OLAP scan with a
//! selectivity/locality sweep, and graph traversal over a compressed index,
//! each against its conventional-SSD baseline.
//!
//! Drivers at full evaluation scale are analytical: costs and byte counts are
//! computed with the same per-component model the scheduler uses, without
//! materializing cell grids. Functional (cell-accurate) execution is reserved
//! for small geometries in tests.

pub mod graph;
pub mod olap;
pub mod oltp;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("vertex id {0} does not fit in a 32-bit tuple field")]
    VertexIdOverflow(u64),
    #[error("unknown vertex {0}")]
    UnknownVertex(u64),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

/// Aggregate movement and op counts of one driver run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub cpu_fe_bytes: u64,
    pub fe_be_bytes: u64,
    pub srch_count: u64,
    pub read_count: u64,
}
