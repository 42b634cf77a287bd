//! Behavioral simulator and analytical performance model of a
//! search-enabled NAND flash SSD: blocks double as ternary CAMs via a
//! transposed data layout, and the firmware exposes search as NVMe commands.
//!
//! - [`flash_array`]: one flash block with conventional page ops and the
//!   block-parallel ternary search primitive.
//! - [`backend`]: drive geometry, the latency / data-movement model, and the
//!   occupancy scheduler.
//! - [`ftl`]: firmware search manager — regions, link table, append buffer,
//!   match decode with early termination, delete/update, compaction.
//! - [`nvme`]: structural command surface with host-buffer pagination.
//! - [`workloads`]: OLTP, OLAP and graph-traversal evaluation drivers with
//!   conventional-SSD baselines.

pub mod backend;
pub mod bitmap;
pub mod flash_array;
pub mod ftl;
pub mod nvme;
pub mod report;
pub mod workloads;

pub use backend::{Backend, LatencyReport, MovementCounters, PhysicalAddress, SsdConfig};
pub use flash_array::{BlockMode, FlashBlock, MatchVector, SearchKey, TernaryBit};
pub use ftl::{Reduction, RegionId, SearchManager};
pub use nvme::{Command, CompletionEntry, HostBuffer, NvmeDevice};
