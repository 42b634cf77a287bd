//! SSD geometry, the analytical latency / data-movement model, and the
//! occupancy-based scheduler.
//!
//! All times are seconds (f64); all sizes are bytes. The model is fully
//! deterministic: a given op list always produces the same report and the
//! same counter deltas.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const KIB: u64 = 1024;
pub const MIB: u64 = 1024 * 1024;
pub const GIB: u64 = 1024 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("address {0:?} out of range for the configured geometry")]
    AddressOutOfRange(PhysicalAddress),
    #[error("superblock offset {offset} out of range (max {max})")]
    OffsetOutOfRange { offset: u64, max: u64 },
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Drive-level configuration. Geometry and timing defaults follow a 3D NAND
/// configuration with 8 channels x 8 dies; bus and decode rates are knobs
/// because chip datasheet bus speeds vary.
#[derive(Clone, Debug, PartialEq)]
pub struct SsdConfig {
    pub channels: u64,
    pub packages_per_channel: u64,
    pub dies_per_package: u64,
    pub planes_per_die: u64,
    pub blocks_per_plane: u64,
    pub pages_per_block: u64,
    /// Bytes per page.
    pub page_size: u64,
    /// Seconds.
    pub t_read: f64,
    pub t_search: f64,
    pub t_write_slc: f64,
    pub t_write_mlc: f64,
    pub t_write_tlc: f64,
    pub t_nvme_init: f64,
    /// Seconds per 64 B DRAM access (address translation, link-table probes).
    pub dram_access: f64,
    /// Seconds per DRAM row miss (cold index probes).
    pub dram_row_miss: f64,
    /// Bytes per second on one flash channel.
    pub channel_bandwidth: f64,
    /// Bytes per second on the host link.
    pub host_bandwidth: f64,
    /// Bytes per second of buffered match-vector data the firmware decodes.
    pub decode_rate: f64,
}

impl Default for SsdConfig {
    fn default() -> Self {
        SsdConfig {
            channels: 8,
            packages_per_channel: 1,
            dies_per_package: 8,
            planes_per_die: 2,
            blocks_per_plane: 2048,
            pages_per_block: 196,
            page_size: 16 * KIB,
            t_read: 22.5e-6,
            t_search: 25.0e-6,
            t_write_slc: 200.0e-6,
            t_write_mlc: 500.0e-6,
            t_write_tlc: 700.0e-6,
            t_nvme_init: 4.0e-6,
            dram_access: 15.0e-9,
            dram_row_miss: 50.0e-9,
            channel_bandwidth: 1.2e9,
            host_bandwidth: 3.5e9,
            decode_rate: 1.6e9,
        }
    }
}

impl SsdConfig {
    /// Dies reachable per channel (way pipelining x die interleaving).
    pub fn dies_per_channel(&self) -> u64 {
        self.packages_per_channel * self.dies_per_package
    }

    /// Independently schedulable (channel, die) pairs.
    pub fn parallel_units(&self) -> u64 {
        self.channels * self.dies_per_channel()
    }

    pub fn total_blocks(&self) -> u64 {
        self.parallel_units() * self.planes_per_die * self.blocks_per_plane
    }

    /// Bitlines of one block, which is also the element capacity of a search
    /// block.
    pub fn bitlines(&self) -> u64 {
        self.page_size * 8
    }

    /// Maximum searchable element width of one block.
    pub fn native_element_size(&self) -> u64 {
        (self.pages_per_block / 2).saturating_sub(1)
    }

    /// Block offsets addressable within one die (superblock offsets).
    pub fn block_offsets_per_die(&self) -> u64 {
        self.planes_per_die * self.blocks_per_plane
    }

    /// One block per (channel, die) at the same offset; a single search wave
    /// can cover the whole set.
    pub fn superblock_of(&self, block_offset: u64) -> Result<Vec<PhysicalAddress>, ModelError> {
        if block_offset >= self.block_offsets_per_die() {
            return Err(ModelError::OffsetOutOfRange {
                offset: block_offset,
                max: self.block_offsets_per_die() - 1,
            });
        }
        let plane = block_offset / self.blocks_per_plane;
        let block = block_offset % self.blocks_per_plane;
        let mut out = Vec::with_capacity(self.parallel_units() as usize);
        for channel in 0..self.channels {
            for die in 0..self.dies_per_channel() {
                out.push(PhysicalAddress {
                    channel,
                    die,
                    plane,
                    block,
                    page: 0,
                });
            }
        }
        Ok(out)
    }

    pub fn contains(&self, addr: &PhysicalAddress) -> bool {
        addr.channel < self.channels
            && addr.die < self.dies_per_channel()
            && addr.plane < self.planes_per_die
            && addr.block < self.blocks_per_plane
            && addr.page < self.pages_per_block
    }

    /// Load from a flat `key = value` file. Times are given in microseconds
    /// except `dram_access` / `dram_row_miss` (nanoseconds); bandwidths in
    /// bytes per second; sizes in bytes. Unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self, ModelError> {
        let mut cfg = SsdConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ModelError::Config {
                line: line_no,
                msg: format!("expected `key = value`, got {raw:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let parse_u64 = |v: &str| -> Result<u64, ModelError> {
                v.replace('_', "").parse().map_err(|_| ModelError::Config {
                    line: line_no,
                    msg: format!("invalid integer {v:?} for {key}"),
                })
            };
            let parse_f64 = |v: &str| -> Result<f64, ModelError> {
                v.parse().map_err(|_| ModelError::Config {
                    line: line_no,
                    msg: format!("invalid number {v:?} for {key}"),
                })
            };
            match key {
                "channels" => cfg.channels = parse_u64(value)?,
                "packages_per_channel" => cfg.packages_per_channel = parse_u64(value)?,
                "dies_per_package" => cfg.dies_per_package = parse_u64(value)?,
                "planes_per_die" => cfg.planes_per_die = parse_u64(value)?,
                "blocks_per_plane" => cfg.blocks_per_plane = parse_u64(value)?,
                "pages_per_block" => cfg.pages_per_block = parse_u64(value)?,
                "page_size" => cfg.page_size = parse_u64(value)?,
                "t_read" => cfg.t_read = parse_f64(value)? * 1e-6,
                "t_search" => cfg.t_search = parse_f64(value)? * 1e-6,
                "t_write_slc" => cfg.t_write_slc = parse_f64(value)? * 1e-6,
                "t_write_mlc" => cfg.t_write_mlc = parse_f64(value)? * 1e-6,
                "t_write_tlc" => cfg.t_write_tlc = parse_f64(value)? * 1e-6,
                "t_nvme_init" => cfg.t_nvme_init = parse_f64(value)? * 1e-6,
                "dram_access" => cfg.dram_access = parse_f64(value)? * 1e-9,
                "dram_row_miss" => cfg.dram_row_miss = parse_f64(value)? * 1e-9,
                "channel_bandwidth" => cfg.channel_bandwidth = parse_f64(value)?,
                "host_bandwidth" => cfg.host_bandwidth = parse_f64(value)?,
                "decode_rate" => cfg.decode_rate = parse_f64(value)?,
                other => {
                    return Err(ModelError::Config {
                        line: line_no,
                        msg: format!("unknown config key {other:?}"),
                    })
                }
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PhysicalAddress {
    pub channel: u64,
    pub die: u64,
    pub plane: u64,
    pub block: u64,
    pub page: u64,
}

impl PhysicalAddress {
    pub fn unit(&self) -> (u64, u64) {
        (self.channel, self.die)
    }
}

/// Byte totals crossing the two movement boundaries: host to controller
/// (CPU-FE) and controller to flash (FE-BE). Monotone counters.
#[derive(Clone, Copy, Default, Debug, PartialEq, Eq)]
pub struct MovementCounters {
    pub cpu_fe_bytes: u64,
    pub fe_be_bytes: u64,
}

impl MovementCounters {
    pub fn add_cpu_fe(&mut self, bytes: u64) {
        self.cpu_fe_bytes += bytes;
    }

    pub fn add_fe_be(&mut self, bytes: u64) {
        self.fe_be_bytes += bytes;
    }
}

/// Per-operation time breakdown. `total` is the serial sum of the components;
/// component overlap is already folded into each component (e.g. flash time
/// is the per-group critical path, not the op-time sum).
#[derive(Clone, Copy, Default, Debug, PartialEq)]
pub struct LatencyReport {
    pub nvme: f64,
    pub translation: f64,
    pub flash_array_time: f64,
    pub fe_be_transfer: f64,
    pub decode: f64,
    pub cpu_fe_transfer: f64,
    /// Busiest (channel, die) pair: a lower bound on any feasible schedule.
    pub max_unit_busy: f64,
}

impl LatencyReport {
    pub fn total(&self) -> f64 {
        self.nvme
            + self.translation
            + self.flash_array_time
            + self.fe_be_transfer
            + self.decode
            + self.cpu_fe_transfer
    }

    pub fn components(&self) -> [(&'static str, f64); 6] {
        [
            ("nvme", self.nvme),
            ("translation", self.translation),
            ("flash_array_time", self.flash_array_time),
            ("fe_be_transfer", self.fe_be_transfer),
            ("decode", self.decode),
            ("cpu_fe_transfer", self.cpu_fe_transfer),
        ]
    }

    pub fn accumulate(&mut self, other: &LatencyReport) {
        self.nvme += other.nvme;
        self.translation += other.translation;
        self.flash_array_time += other.flash_array_time;
        self.fe_be_transfer += other.fe_be_transfer;
        self.decode += other.decode;
        self.cpu_fe_transfer += other.cpu_fe_transfer;
        self.max_unit_busy = self.max_unit_busy.max(other.max_unit_busy);
    }
}

impl fmt::Display for LatencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "total {:.3} us [", self.total() * 1e6)?;
        for (i, (name, v)) in self.components().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name} {:.3}", v * 1e6)?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CellMode {
    Slc,
    Mlc,
    Tlc,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OpKind {
    Read,
    Program(CellMode),
    Erase,
    Search,
}

/// One flash operation handed to the scheduler. `payload_bytes` is the FE-BE
/// transfer attached to the op (page data or match vector); `to_host` marks
/// payloads that continue over the host link.
#[derive(Clone, Copy, Debug)]
pub struct FlashOp {
    pub kind: OpKind,
    pub addr: PhysicalAddress,
    pub payload_bytes: u64,
    pub to_host: bool,
    pub parallel_group: u32,
}

/// Scheduler plus movement-counter sink for one simulated drive.
pub struct Backend {
    pub config: SsdConfig,
    pub counters: MovementCounters,
}

impl Backend {
    pub fn new(config: SsdConfig) -> Self {
        Backend {
            config,
            counters: MovementCounters::default(),
        }
    }

    fn op_time(&self, kind: OpKind) -> f64 {
        match kind {
            OpKind::Read => self.config.t_read,
            OpKind::Search => self.config.t_search,
            OpKind::Erase => self.config.t_write_slc, // erase modeled at SLC write cost
            OpKind::Program(CellMode::Slc) => self.config.t_write_slc,
            OpKind::Program(CellMode::Mlc) => self.config.t_write_mlc,
            OpKind::Program(CellMode::Tlc) => self.config.t_write_tlc,
        }
    }

    /// Completion-time model for an op list.
    ///
    /// Groups run in submission order. Within a group, ops on distinct
    /// (channel, die) pairs overlap and ops on the same pair serialize; a
    /// group containing a search occupies every pair it touches for the whole
    /// group duration. Channel transfers overlap across channels and
    /// serialize within one; the host link is shared. `decode_bytes` is
    /// firmware decode work, `extra_host_bytes` host traffic not attached to
    /// an op (e.g. compacted result blocks).
    pub fn schedule_detail(
        &mut self,
        nvme_commands: u64,
        ops: &[FlashOp],
        decode_bytes: u64,
        extra_host_bytes: u64,
    ) -> Result<LatencyReport, ModelError> {
        let mut report = LatencyReport {
            nvme: nvme_commands as f64 * self.config.t_nvme_init,
            translation: ops.len() as f64 * self.config.dram_access,
            decode: decode_bytes as f64 / self.config.decode_rate,
            ..LatencyReport::default()
        };

        // Group ops preserving first-appearance order.
        let mut group_order: Vec<u32> = Vec::new();
        let mut groups: HashMap<u32, Vec<&FlashOp>> = HashMap::new();
        for op in ops {
            if !self.config.contains(&op.addr) {
                return Err(ModelError::AddressOutOfRange(op.addr));
            }
            groups.entry(op.parallel_group).or_insert_with(|| {
                group_order.push(op.parallel_group);
                Vec::new()
            });
            groups.get_mut(&op.parallel_group).unwrap().push(op);
        }

        let mut total_unit_busy: HashMap<(u64, u64), f64> = HashMap::new();
        let mut host_bytes = extra_host_bytes;
        for gid in &group_order {
            let group = &groups[gid];
            let mut unit_busy: HashMap<(u64, u64), f64> = HashMap::new();
            let mut channel_bytes: HashMap<u64, u64> = HashMap::new();
            let mut has_search = false;
            for op in group {
                has_search |= matches!(op.kind, OpKind::Search);
                *unit_busy.entry(op.addr.unit()).or_default() += self.op_time(op.kind);
                *channel_bytes.entry(op.addr.channel).or_default() += op.payload_bytes;
                self.counters.add_fe_be(op.payload_bytes);
                if op.to_host {
                    host_bytes += op.payload_bytes;
                }
            }
            let group_flash = unit_busy.values().cloned().fold(0.0, f64::max);
            report.flash_array_time += group_flash;
            for (unit, busy) in unit_busy {
                // A search wave blocks every pair it needs for the whole wave,
                // even when only one result read follows.
                let effective = if has_search { group_flash } else { busy };
                *total_unit_busy.entry(unit).or_default() += effective;
            }
            let group_transfer = channel_bytes
                .values()
                .map(|&b| b as f64 / self.config.channel_bandwidth)
                .fold(0.0, f64::max);
            report.fe_be_transfer += group_transfer;
        }
        self.counters.add_cpu_fe(host_bytes);
        report.cpu_fe_transfer = host_bytes as f64 / self.config.host_bandwidth;
        report.max_unit_busy = total_unit_busy.values().cloned().fold(0.0, f64::max);
        Ok(report)
    }

    pub fn schedule(&mut self, ops: &[FlashOp]) -> Result<LatencyReport, ModelError> {
        self.schedule_detail(1, ops, 0, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(channel: u64, die: u64) -> PhysicalAddress {
        PhysicalAddress {
            channel,
            die,
            plane: 0,
            block: 0,
            page: 0,
        }
    }

    fn read_op(channel: u64, die: u64, group: u32) -> FlashOp {
        FlashOp {
            kind: OpKind::Read,
            addr: addr(channel, die),
            payload_bytes: 16 * KIB,
            to_host: true,
            parallel_group: group,
        }
    }

    #[test]
    fn default_geometry_totals() {
        let cfg = SsdConfig::default();
        assert_eq!(cfg.total_blocks(), 262_144);
        assert_eq!(cfg.bitlines(), 131_072);
        assert_eq!(cfg.native_element_size(), 97);
        // Paper-scale overhead ratios.
        assert!(23.0 / (cfg.total_blocks() as f64) < 0.0001);
        let pct = 4578.0 / cfg.total_blocks() as f64 * 100.0;
        assert!((pct - 1.7).abs() < 0.05, "got {pct}");
    }

    #[test]
    fn superblock_spans_all_units() {
        let cfg = SsdConfig::default();
        let sb = cfg.superblock_of(0).unwrap();
        assert_eq!(sb.len(), 64);
        assert!(sb.iter().all(|a| a.block == 0 && a.plane == 0));
        // 128K keys per block x 64 blocks.
        assert_eq!(cfg.bitlines() * sb.len() as u64, 8_388_608);
        assert!(cfg.superblock_of(cfg.block_offsets_per_die()).is_err());
    }

    #[test]
    fn single_read_is_a_serial_component_sum() {
        let cfg = SsdConfig::default();
        let mut be = Backend::new(cfg.clone());
        let r = be.schedule(&[read_op(0, 0, 0)]).unwrap();
        let expect = cfg.t_nvme_init
            + cfg.dram_access
            + cfg.t_read
            + 16384.0 / cfg.channel_bandwidth
            + 16384.0 / cfg.host_bandwidth;
        assert!((r.total() - expect).abs() < 1e-12);
        assert_eq!(be.counters.fe_be_bytes, 16384);
        assert_eq!(be.counters.cpu_fe_bytes, 16384);
        // Dropping the NVMe component removes exactly its cost.
        let mut be2 = Backend::new(cfg.clone());
        let r2 = be2.schedule_detail(0, &[read_op(0, 0, 0)], 0, 0).unwrap();
        assert!((r.total() - r2.total() - cfg.t_nvme_init).abs() < 1e-12);
    }

    #[test]
    fn reads_across_channels_overlap() {
        let mut be = Backend::new(SsdConfig::default());
        let ops: Vec<FlashOp> = (0..8).map(|c| read_op(c, 0, 0)).collect();
        let r = be.schedule(&ops).unwrap();
        assert!((r.flash_array_time - 22.5e-6).abs() < 1e-12);
    }

    #[test]
    fn reads_on_one_die_serialize() {
        let mut be = Backend::new(SsdConfig::default());
        let r = be.schedule(&[read_op(0, 0, 0), read_op(0, 0, 0)]).unwrap();
        assert!((r.flash_array_time - 45.0e-6).abs() < 1e-12);
    }

    #[test]
    fn serial_groups_cost_at_least_parallel() {
        let mut be = Backend::new(SsdConfig::default());
        let parallel: Vec<FlashOp> = (0..8).map(|c| read_op(c, 0, 0)).collect();
        let serial: Vec<FlashOp> = (0..8).map(|c| read_op(c, 0, c as u32)).collect();
        let rp = be.schedule(&parallel).unwrap();
        let rs = be.schedule(&serial).unwrap();
        assert!(rs.total() >= rp.total());
        assert!(rp.total() >= rp.max_unit_busy);
    }

    #[test]
    fn address_bounds_checked() {
        let mut be = Backend::new(SsdConfig::default());
        let mut op = read_op(0, 0, 0);
        op.addr.channel = 9;
        assert!(matches!(
            be.schedule(&[op]),
            Err(ModelError::AddressOutOfRange(_))
        ));
    }

    #[test]
    fn config_file_roundtrip_and_unknown_key() {
        let text = "\
# comment
channels = 4
t_read = 30.0
channel_bandwidth = 1.0e9
";
        let cfg = SsdConfig::from_str_contents(text).unwrap();
        assert_eq!(cfg.channels, 4);
        assert!((cfg.t_read - 30.0e-6).abs() < 1e-15);
        assert!((cfg.channel_bandwidth - 1.0e9).abs() < 1.0);
        assert!(SsdConfig::from_str_contents("bogus_key = 1").is_err());
        assert!(SsdConfig::from_str_contents("channels").is_err());
    }

    #[test]
    fn search_default_ten_percent_over_read() {
        let cfg = SsdConfig::default();
        let ratio = cfg.t_search / cfg.t_read;
        assert!((ratio - 1.111).abs() < 0.02);
    }
}
