//! OLAP scan driver: full-table baseline scan versus in-flash search, plus
//! the selectivity/locality speedup sweep.
//!
//! Everything here is closed-form arithmetic over the drive config; the op
//! counts and byte totals are exact and bandwidth-independent, while times
//! follow the serial-component model.

use crate::backend::SsdConfig;
use crate::ftl::BURST_BYTES;
use crate::workloads::RunCounters;

/// One analytical query over a row-store table.
#[derive(Clone, Copy, Debug)]
pub struct OlapQuerySpec {
    pub row_count: u64,
    pub row_bytes: u64,
    /// Fraction of rows matching, in (0, 1].
    pub selectivity: f64,
    /// 0 = one read per match, 1 = matches maximally share pages.
    pub locality: f64,
    /// 1 for a single-predicate query, 4 for a fused four-filter query.
    pub sub_key_count: u64,
}

impl OlapQuerySpec {
    /// The evaluated 600 M-row table; 132-byte rows put the heap at ~74 GiB.
    pub fn table_default() -> Self {
        OlapQuerySpec {
            row_count: 600_037_902,
            row_bytes: 132,
            selectivity: 0.0004,
            locality: 0.0,
            sub_key_count: 1,
        }
    }

    pub fn matches(&self) -> u64 {
        (self.selectivity * self.row_count as f64).round() as u64
    }

    /// Table heap pages the baseline must scan.
    pub fn baseline_pages(&self, config: &SsdConfig) -> u64 {
        (self.row_count * self.row_bytes).div_ceil(config.page_size)
    }

    /// Search blocks holding one element per row.
    pub fn region_blocks(&self, config: &SsdConfig) -> u64 {
        self.row_count.div_ceil(config.bitlines())
    }

    /// Data-page reads after the search: linear interpolation between one
    /// read per match (locality 0) and minimal contiguous reads (locality 1).
    pub fn tcam_reads(&self, config: &SsdConfig) -> u64 {
        let m = self.matches();
        let dense = (m * self.row_bytes).div_ceil(config.page_size);
        let r0 = m as f64;
        let r1 = dense as f64;
        (r0 + self.locality * (r1 - r0)).round() as u64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OlapOutcome {
    pub time_s: f64,
    pub counters: RunCounters,
    /// Search-region blocks in use (tcam mode only).
    pub region_blocks: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OlapMode {
    BaselineScan,
    Tcam,
}

/// Bulk page-read cost: flash in waves over all (channel, die) pairs,
/// per-channel transfer, full pages over the host link, one translation
/// probe per page.
fn bulk_read_time(config: &SsdConfig, pages: u64) -> f64 {
    if pages == 0 {
        return 0.0;
    }
    let waves = pages.div_ceil(config.parallel_units());
    let bytes = pages * config.page_size;
    waves as f64 * config.t_read
        + pages.div_ceil(config.channels) as f64 * config.page_size as f64
            / config.channel_bandwidth
        + bytes as f64 / config.host_bandwidth
        + pages as f64 * config.dram_access
}

pub fn olap_run(config: &SsdConfig, spec: &OlapQuerySpec, mode: OlapMode) -> OlapOutcome {
    match mode {
        OlapMode::BaselineScan => {
            let pages = spec.baseline_pages(config);
            let bytes = pages * config.page_size;
            OlapOutcome {
                time_s: config.t_nvme_init + bulk_read_time(config, pages),
                counters: RunCounters {
                    cpu_fe_bytes: bytes,
                    fe_be_bytes: bytes,
                    srch_count: 0,
                    read_count: pages,
                },
                region_blocks: 0,
            }
        }
        OlapMode::Tcam => {
            let blocks = spec.region_blocks(config);
            let srch_count = spec.sub_key_count * blocks;
            let vector_bytes = srch_count * config.page_size;
            // All vectors cross the channels; early termination trims what
            // the firmware buffers and decodes, not the bus transfer.
            let srch_waves = blocks.div_ceil(config.parallel_units()) * spec.sub_key_count;
            let srch_time = srch_waves as f64 * config.t_search
                + vector_bytes as f64 / (config.channels as f64 * config.channel_bandwidth);
            let bursts_per_vector = config.page_size / BURST_BYTES as u64;
            let buffered_bursts = spec.matches().min(blocks * bursts_per_vector);
            let decode_bytes = spec.sub_key_count * buffered_bursts * BURST_BYTES as u64;
            let decode_time = decode_bytes as f64 / config.decode_rate;

            let reads = spec.tcam_reads(config);
            let read_bytes = reads * config.page_size;
            OlapOutcome {
                time_s: config.t_nvme_init
                    + srch_count as f64 * config.dram_access
                    + srch_time
                    + decode_time
                    + bulk_read_time(config, reads),
                counters: RunCounters {
                    cpu_fe_bytes: read_bytes,
                    fe_be_bytes: vector_bytes + read_bytes,
                    srch_count,
                    read_count: reads,
                },
                region_blocks: blocks,
            }
        }
    }
}

/// Baseline-over-tcam speedup for every (selectivity, locality) cell.
pub fn olap_sweep(
    config: &SsdConfig,
    spec: &OlapQuerySpec,
    selectivities: &[f64],
    localities: &[f64],
) -> Vec<Vec<f64>> {
    selectivities
        .iter()
        .map(|&s| {
            localities
                .iter()
                .map(|&l| {
                    let cell = OlapQuerySpec {
                        selectivity: s,
                        locality: l,
                        ..*spec
                    };
                    let base = olap_run(config, &cell, OlapMode::BaselineScan);
                    let tcam = olap_run(config, &cell, OlapMode::Tcam);
                    base.time_s / tcam.time_s
                })
                .collect()
        })
        .collect()
}

/// Sweep axes used in the reported matrix.
pub const SWEEP_SELECTIVITIES: [f64; 5] = [0.0001, 0.0004, 0.001, 0.004, 0.01];
pub const SWEEP_LOCALITIES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Channel bandwidth used when reproducing the published speedup numbers;
/// see the calibration note in the README.
pub fn calibrated_config() -> SsdConfig {
    SsdConfig {
        channel_bandwidth: 0.8e9,
        ..SsdConfig::default()
    }
}
