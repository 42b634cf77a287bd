//! OLTP driver: replay a point-query trace against a page-fetch baseline and
//! the in-flash search path, per-warehouse search regions included.
//!
//! The trace carries the baseline page-fetch count per query directly (the
//! original engine's hash-index collision behavior is not reimplemented); a
//! bundled generator produces a calibrated synthetic trace in which 73.5% of
//! queries fetch more than 3 pages.

use crate::backend::SsdConfig;
use crate::ftl::{AllocateRequest, FtlError, RegionId, SearchManager, BURST_BYTES};
use crate::workloads::{RunCounters, WorkloadError};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Rows in the evaluated database and its per-warehouse partitioning.
pub const OLTP_ROWS: u64 = 3_000_000;
pub const OLTP_WAREHOUSES: u64 = 23;

/// Fraction of generated queries fetching more than 3 baseline pages.
pub const HEAVY_QUERY_FRACTION: f64 = 0.735;
pub const MAX_BASELINE_PAGES: u64 = 11;

#[derive(Clone, Debug, PartialEq)]
pub struct OltpQuery {
    pub query_id: u64,
    pub index: String,
    pub key: u64,
    pub baseline_pages: u64,
}

/// Baseline cost of one point query: one command, a host-side index probe,
/// then the chained page fetches. Flash reads overlap across channels;
/// transfers serialize conservatively.
pub fn baseline_query_latency(config: &SsdConfig, pages: u64) -> f64 {
    let page = config.page_size as f64;
    config.t_nvme_init
        + (1 + pages) as f64 * config.dram_access
        + pages.div_ceil(config.channels) as f64 * config.t_read
        + pages as f64 * (page / config.channel_bandwidth + page / config.host_bandwidth)
}

/// In-flash cost of one point query: search the warehouse's single block,
/// move and decode the match vector (early-terminated to one burst), read
/// the matched row's data page, and return it.
pub fn tcam_query_latency(config: &SsdConfig) -> f64 {
    let page = config.page_size as f64;
    config.t_nvme_init
        + 2.0 * config.dram_access
        + config.t_search
        + page / config.channel_bandwidth
        + BURST_BYTES as f64 / config.decode_rate
        + config.t_read
        + page / config.channel_bandwidth
        + page / config.host_bandwidth
}

/// Largest page count at which the baseline still wins; the in-flash path is
/// strictly faster for every fetch size above it.
pub fn crossover_pages(config: &SsdConfig, max_pages: u64) -> Option<u64> {
    let tcam = tcam_query_latency(config);
    (1..=max_pages)
        .take_while(|&p| baseline_query_latency(config, p) <= tcam)
        .last()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OltpMode {
    Baseline,
    Tcam,
}

#[derive(Clone, Debug)]
pub struct OltpOutcome {
    pub query_count: u64,
    pub total_time_s: f64,
    pub counters: RunCounters,
    /// Queries per baseline page-fetch count, index = pages (0 unused).
    pub page_histogram: Vec<u64>,
    /// Per-query latencies, sorted ascending (for CDF reporting).
    pub sorted_latencies_s: Vec<f64>,
}

pub fn oltp_replay(
    config: &SsdConfig,
    trace: &[OltpQuery],
    mode: OltpMode,
) -> Result<OltpOutcome, WorkloadError> {
    let mut histogram = vec![0u64; MAX_BASELINE_PAGES as usize + 1];
    let mut counters = RunCounters::default();
    let mut latencies = Vec::with_capacity(trace.len());
    let mut total = 0.0;
    let tcam_latency = tcam_query_latency(config);
    for q in trace {
        if q.baseline_pages == 0 {
            return Err(WorkloadError::MalformedTrace(format!(
                "query {} fetches 0 baseline pages",
                q.query_id
            )));
        }
        if q.baseline_pages as usize >= histogram.len() {
            histogram.resize(q.baseline_pages as usize + 1, 0);
        }
        histogram[q.baseline_pages as usize] += 1;
        let (t, c) = match mode {
            OltpMode::Baseline => (
                baseline_query_latency(config, q.baseline_pages),
                RunCounters {
                    cpu_fe_bytes: q.baseline_pages * config.page_size,
                    fe_be_bytes: q.baseline_pages * config.page_size,
                    srch_count: 0,
                    read_count: q.baseline_pages,
                },
            ),
            OltpMode::Tcam => (
                tcam_latency,
                RunCounters {
                    // One full page up to the host; vector + data page down
                    // the channel.
                    cpu_fe_bytes: config.page_size,
                    fe_be_bytes: 2 * config.page_size,
                    srch_count: 1,
                    read_count: 1,
                },
            ),
        };
        total += t;
        latencies.push(t);
        counters.cpu_fe_bytes += c.cpu_fe_bytes;
        counters.fe_be_bytes += c.fe_be_bytes;
        counters.srch_count += c.srch_count;
        counters.read_count += c.read_count;
    }
    latencies.sort_by(|a, b| a.total_cmp(b));
    Ok(OltpOutcome {
        query_count: trace.len() as u64,
        total_time_s: total,
        counters,
        page_histogram: histogram,
        sorted_latencies_s: latencies,
    })
}

/// Allocate one single-block search region per warehouse, splitting the rows
/// as evenly as possible. Returns the region ids.
pub fn build_warehouse_regions(
    manager: &mut SearchManager,
    rows: u64,
    warehouses: u64,
) -> Result<Vec<RegionId>, FtlError> {
    let base = rows / warehouses;
    let extra = rows % warehouses;
    (0..warehouses)
        .map(|w| {
            manager.allocate_region(AllocateRequest {
                element_bits: manager.config().native_element_size(),
                entry_bytes: 64,
                numeric: false,
                element_count: base + u64::from(w < extra),
                initial: None,
            })
        })
        .collect()
}

/// Write a calibrated synthetic trace: 26.5% of queries fetch 1-3 pages,
/// 73.5% fetch 4-11, uniform within each band.
pub fn generate_trace(path: &Path, queries: u64, seed: u64) -> Result<(), WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let light = Uniform::new_inclusive(1u64, 3);
    let heavy = Uniform::new_inclusive(4u64, MAX_BASELINE_PAGES);
    let warehouse = Uniform::new(0u64, OLTP_WAREHOUSES);
    let coin = Uniform::new(0.0f64, 1.0);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "query_id,index,key,baseline_pages")?;
    for id in 0..queries {
        let pages = if coin.sample(&mut rng) < HEAVY_QUERY_FRACTION {
            heavy.sample(&mut rng)
        } else {
            light.sample(&mut rng)
        };
        let w = warehouse.sample(&mut rng);
        let key = rng.next_u64_key();
        writeln!(out, "{id},warehouse_{w},{key},{pages}")?;
    }
    Ok(())
}

trait KeyRng {
    fn next_u64_key(&mut self) -> u64;
}

impl KeyRng for ChaCha8Rng {
    fn next_u64_key(&mut self) -> u64 {
        use rand::RngCore;
        self.next_u64() >> 16 // keep keys comfortably inside one element
    }
}

/// Stream a trace CSV (`query_id,index,key,baseline_pages`, header required).
pub fn read_trace(path: &Path) -> Result<Vec<OltpQuery>, WorkloadError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut queries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if idx == 0 {
            if line.trim() != "query_id,index,key,baseline_pages" {
                return Err(WorkloadError::Parse {
                    path: name,
                    line: line_no,
                    msg: "missing `query_id,index,key,baseline_pages` header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(WorkloadError::Parse {
                path: name,
                line: line_no,
                msg: format!("expected 4 comma-separated fields, got {}", fields.len()),
            });
        }
        let parse = |field: &str, what: &str| -> Result<u64, WorkloadError> {
            field.trim().parse().map_err(|_| WorkloadError::Parse {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("invalid {what} {field:?}"),
            })
        };
        queries.push(OltpQuery {
            query_id: parse(fields[0], "query_id")?,
            index: fields[1].trim().to_string(),
            key: parse(fields[2], "key")?,
            baseline_pages: parse(fields[3], "baseline_pages")?,
        });
    }
    Ok(queries)
}
