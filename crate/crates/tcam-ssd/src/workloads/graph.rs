//! Graph storage driver: compressed searchable index construction plus
//! traversal-trace cost replay against in-memory and on-disk baselines.
//!
//! Edges of low-degree vertices are packed, in id order, into single-block
//! search regions holding (src, dst) tuples one per bitline; high-degree
//! vertices get direct edge-list entries (or, in the no-spill variant,
//! multi-block regions). The index is a sorted max-id table probed by binary
//! search.

use crate::backend::SsdConfig;
use crate::ftl::{BURST_BYTES, LINK_TABLE_ENTRY_BYTES};
use crate::workloads::{RunCounters, WorkloadError};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug)]
pub struct GraphConfig {
    /// Degree above which a vertex gets a direct edge list; `None` = never
    /// (the no-spill variant).
    pub big_vertex_threshold: Option<u64>,
    /// 4 B pointer + 4 B metadata per vertex in the baseline index.
    pub baseline_index_bytes_per_vertex: u64,
    /// Bytes per compressed-index entry (max id, edge count, handle).
    pub tcam_index_entry_bytes: u64,
    /// Bytes per stored edge record in data-region edge lists.
    pub edge_bytes: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            big_vertex_threshold: Some(256),
            baseline_index_bytes_per_vertex: 8,
            tcam_index_entry_bytes: 12,
            edge_bytes: 8,
        }
    }
}

impl GraphConfig {
    pub fn no_spill() -> Self {
        GraphConfig {
            big_vertex_threshold: None,
            ..GraphConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Handle {
    /// Search region of `blocks` flash blocks (edge_count = 0 in the entry).
    Region { blocks: u64 },
    /// Direct data-region edge list.
    EdgeList { bytes: u64 },
}

#[derive(Clone, Copy, Debug)]
pub struct IndexEntry {
    /// Largest vertex id covered by this entry; entries are sorted on it.
    pub max_id: u64,
    /// 0 for search-region entries, the vertex degree for direct entries.
    pub edge_count: u64,
    pub handle: Handle,
}

#[derive(Clone, Debug)]
pub struct CompressedGraphIndex {
    pub entries: Vec<IndexEntry>,
    pub vertex_count: u64,
    pub total_edges: u64,
    /// Blocks across all search regions.
    pub region_blocks: u64,
    /// Blocks consumed by direct edge lists at search-block edge density
    /// (for capacity reporting on one common scale).
    pub spill_blocks: u64,
    /// Out-degree per vertex, id-indexed (drives traversal costs).
    pub degrees: Vec<u64>,
}

impl CompressedGraphIndex {
    /// Entry covering vertex `v` via binary search on max_id.
    pub fn lookup(&self, v: u64) -> Result<&IndexEntry, WorkloadError> {
        if v >= self.vertex_count {
            return Err(WorkloadError::UnknownVertex(v));
        }
        let idx = self.entries.partition_point(|e| e.max_id < v);
        Ok(&self.entries[idx])
    }

    pub fn binary_search_probes(&self) -> u64 {
        (self.entries.len().max(2) as f64).log2().ceil() as u64
    }

    /// In-memory footprint: index entries plus the link-table entries behind
    /// every search-region block group.
    pub fn index_bytes(&self, cfg: &GraphConfig) -> u64 {
        self.entries.len() as u64 * cfg.tcam_index_entry_bytes
            + self.region_blocks * LINK_TABLE_ENTRY_BYTES
    }

    pub fn baseline_index_bytes(&self, cfg: &GraphConfig) -> u64 {
        self.vertex_count * cfg.baseline_index_bytes_per_vertex
    }

    pub fn reported_blocks(&self) -> u64 {
        self.region_blocks + self.spill_blocks
    }
}

/// Build the index from edges sorted by source id.
pub fn build_graph_index(
    edges: &[(u64, u64)],
    config: &SsdConfig,
    graph_cfg: &GraphConfig,
) -> Result<CompressedGraphIndex, WorkloadError> {
    let mut vertex_count = 0u64;
    for &(src, dst) in edges {
        if src >= 1 << 32 {
            return Err(WorkloadError::VertexIdOverflow(src));
        }
        if dst >= 1 << 32 {
            return Err(WorkloadError::VertexIdOverflow(dst));
        }
        vertex_count = vertex_count.max(src + 1).max(dst + 1);
    }
    let mut degrees = vec![0u64; vertex_count as usize];
    for &(src, _) in edges {
        degrees[src as usize] += 1;
    }
    build_index_from_degrees(&degrees, config, graph_cfg)
}

/// Greedy packer over an id-ordered degree sequence.
pub fn build_index_from_degrees(
    degrees: &[u64],
    config: &SsdConfig,
    graph_cfg: &GraphConfig,
) -> Result<CompressedGraphIndex, WorkloadError> {
    let capacity = config.bitlines();
    let mut packer = StreamingPacker::new(capacity, graph_cfg.big_vertex_threshold);
    for (v, &deg) in degrees.iter().enumerate() {
        packer.push(v as u64, deg);
    }
    let (entries, region_blocks, spill_blocks, total_edges) =
        packer.finish(graph_cfg, config);
    Ok(CompressedGraphIndex {
        entries,
        vertex_count: degrees.len() as u64,
        total_edges,
        region_blocks,
        spill_blocks,
        degrees: degrees.to_vec(),
    })
}

/// Incremental run packer shared by index construction and the large-scale
/// block estimator.
struct StreamingPacker {
    capacity: u64,
    threshold: Option<u64>,
    run_start: Option<u64>,
    run_edges: u64,
    run_blocks: u64,
    last_id: u64,
    entries: Vec<IndexEntry>,
    region_blocks: u64,
    big_edges: Vec<(u64, u64)>,
    total_edges: u64,
}

impl StreamingPacker {
    fn new(capacity: u64, threshold: Option<u64>) -> Self {
        StreamingPacker {
            capacity,
            threshold,
            run_start: None,
            run_edges: 0,
            run_blocks: 0,
            last_id: 0,
            entries: Vec::new(),
            region_blocks: 0,
            big_edges: Vec::new(),
            total_edges: 0,
        }
    }

    fn flush_run(&mut self) {
        if self.run_start.is_some() {
            let blocks = self.run_blocks + u64::from(self.run_edges > 0);
            // An all-zero-degree run still needs an entry (and a block slot)
            // so every vertex resolves.
            let blocks = blocks.max(1);
            self.entries.push(IndexEntry {
                max_id: self.last_id,
                edge_count: 0,
                handle: Handle::Region { blocks },
            });
            self.region_blocks += blocks;
        }
        self.run_start = None;
        self.run_edges = 0;
        self.run_blocks = 0;
    }

    fn push(&mut self, v: u64, deg: u64) {
        self.total_edges += deg;
        let is_big = self.threshold.is_some_and(|t| deg > t);
        if is_big {
            self.flush_run();
            self.big_edges.push((v, deg));
            return;
        }
        if self.run_start.is_none() {
            self.run_start = Some(v);
        }
        // No-spill variant: a huge vertex spans whole blocks inside its own
        // run.
        if self.run_edges + deg > self.capacity {
            self.run_blocks += 1;
            let mut remaining = deg - (self.capacity - self.run_edges);
            while remaining > self.capacity {
                self.run_blocks += 1;
                remaining -= self.capacity;
            }
            self.run_edges = remaining;
        } else {
            self.run_edges += deg;
        }
        self.last_id = v;
    }

    fn finish(
        mut self,
        graph_cfg: &GraphConfig,
        config: &SsdConfig,
    ) -> (Vec<IndexEntry>, u64, u64, u64) {
        self.flush_run();
        let mut spill_blocks = 0;
        for (v, deg) in std::mem::take(&mut self.big_edges) {
            self.entries.push(IndexEntry {
                max_id: v,
                edge_count: deg,
                handle: Handle::EdgeList {
                    bytes: deg * graph_cfg.edge_bytes,
                },
            });
            spill_blocks += deg.div_ceil(config.bitlines());
        }
        self.entries.sort_by_key(|e| e.max_id);
        (self.entries, self.region_blocks, spill_blocks, self.total_edges)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraversalMode {
    /// In-memory index.
    Im,
    /// On-disk index: one extra flash read per access.
    Oom,
    /// Searchable index, no big-vertex spill (threshold = infinity).
    TcamNp,
    /// Searchable index with the 256-edge direct-list threshold.
    Tcam,
}

#[derive(Clone, Debug, Default)]
pub struct TraversalOutcome {
    pub time_s: f64,
    pub counters: RunCounters,
    pub accesses: u64,
}

fn edge_pages(config: &SsdConfig, graph_cfg: &GraphConfig, deg: u64) -> u64 {
    (deg * graph_cfg.edge_bytes).div_ceil(config.page_size)
}

/// Same bulk page-read model as the scan driver.
fn bulk_read(config: &SsdConfig, pages: u64, counters: &mut RunCounters) -> f64 {
    if pages == 0 {
        return 0.0;
    }
    let bytes = pages * config.page_size;
    counters.fe_be_bytes += bytes;
    counters.cpu_fe_bytes += bytes;
    counters.read_count += pages;
    pages.div_ceil(config.parallel_units()) as f64 * config.t_read
        + pages.div_ceil(config.channels) as f64 * config.page_size as f64
            / config.channel_bandwidth
        + bytes as f64 / config.host_bandwidth
        + pages as f64 * config.dram_access
}

/// Cost of one vertex access in the given mode.
pub fn access_cost(
    config: &SsdConfig,
    graph_cfg: &GraphConfig,
    index: &CompressedGraphIndex,
    v: u64,
    mode: TraversalMode,
    counters: &mut RunCounters,
) -> Result<f64, WorkloadError> {
    let deg = *index
        .degrees
        .get(v as usize)
        .ok_or(WorkloadError::UnknownVertex(v))?;
    let pages = edge_pages(config, graph_cfg, deg);
    let t = match mode {
        TraversalMode::Im => {
            config.t_nvme_init + config.dram_access + bulk_read(config, pages, counters)
        }
        TraversalMode::Oom => {
            // The index page itself comes off flash and crosses to the host.
            counters.read_count += 1;
            counters.fe_be_bytes += config.page_size;
            counters.cpu_fe_bytes += config.page_size;
            config.t_nvme_init
                + config.dram_access
                + config.t_read
                + config.page_size as f64 / config.channel_bandwidth
                + config.page_size as f64 / config.host_bandwidth
                + bulk_read(config, pages, counters)
        }
        TraversalMode::TcamNp | TraversalMode::Tcam => {
            // Every binary-search probe is conservatively a DRAM row miss.
            let probe_time = index.binary_search_probes() as f64 * config.dram_row_miss;
            let entry = index.lookup(v)?;
            let search_time = match entry.handle {
                Handle::EdgeList { .. } => 0.0,
                Handle::Region { blocks } => {
                    counters.srch_count += blocks;
                    counters.fe_be_bytes += blocks * config.page_size;
                    let bursts_per_vector = config.page_size / BURST_BYTES as u64;
                    let buffered = deg.min(blocks * bursts_per_vector);
                    blocks.div_ceil(config.parallel_units()) as f64 * config.t_search
                        + blocks.div_ceil(config.channels) as f64 * config.page_size as f64
                            / config.channel_bandwidth
                        + (buffered.max(1) * BURST_BYTES as u64) as f64 / config.decode_rate
                }
            };
            config.t_nvme_init + probe_time + search_time + bulk_read(config, pages, counters)
        }
    };
    Ok(t)
}

pub fn graph_traverse(
    config: &SsdConfig,
    graph_cfg: &GraphConfig,
    index: &CompressedGraphIndex,
    trace: &[u64],
    mode: TraversalMode,
) -> Result<TraversalOutcome, WorkloadError> {
    let mut out = TraversalOutcome::default();
    for &v in trace {
        out.time_s += access_cost(config, graph_cfg, index, v, mode, &mut out.counters)?;
        out.accesses += 1;
    }
    Ok(out)
}

/// Synthetic power-law graph: `vertices` low-degree vertices (degrees 1-10)
/// plus `hub_count` evenly spaced hubs of `hub_degree` edges each. Edges come
/// out sorted by source.
pub fn generate_power_law_graph(
    vertices: u64,
    hub_count: u64,
    hub_degree: u64,
    seed: u64,
) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_vertices = vertices + hub_count;
    let hub_stride = total_vertices / (hub_count + 1);
    let hubs: Vec<u64> = (1..=hub_count).map(|i| i * hub_stride).collect();
    let small_deg = Uniform::new_inclusive(1u64, 10);
    let dst = Uniform::new(0u64, total_vertices);
    let mut edges = Vec::new();
    for v in 0..total_vertices {
        let deg = if hubs.binary_search(&v).is_ok() {
            hub_degree
        } else {
            small_deg.sample(&mut rng)
        };
        for _ in 0..deg {
            edges.push((v, dst.sample(&mut rng)));
        }
    }
    edges
}

/// Seed-fixed uniform vertex access trace over a graph's id space.
pub fn generate_access_trace(vertex_count: u64, accesses: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Uniform::new(0u64, vertex_count);
    (0..accesses).map(|_| d.sample(&mut rng)).collect()
}

/// Vertices and edges of the Kron25-scale check: 2^25 vertices, 2^30 edges.
pub const KRON25_VERTICES: u64 = 1 << 25;
pub const KRON25_EDGES: u64 = 1 << 30;

/// Streaming block estimate for a Kron25-scale degree sequence: a short
/// heavy tail (128 hubs) plus a low-degree body, count-sorted so the packer
/// sees hubs first and then a dense run of small vertices. Never
/// materializes edges; returns reported blocks (region + spill).
pub fn kron25_block_estimate(config: &SsdConfig, seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph_cfg = GraphConfig::default();
    let mut packer = StreamingPacker::new(config.bitlines(), graph_cfg.big_vertex_threshold);

    // Heavy tail: 128 hubs totaling ~6% of all edges.
    let hub_count = 128u64;
    let mut remaining = KRON25_EDGES;
    let mut next_id = 0u64;
    for i in 0..hub_count {
        let deg = 500_000 + rng.gen_range(0..100_000) + (hub_count - i) * 1_000;
        packer.push(next_id, deg);
        next_id += 1;
        remaining -= deg;
    }
    // Low-degree body over the remaining vertices, mean tuned to land on the
    // exact edge total; the final vertex absorbs the remainder.
    let body = KRON25_VERTICES - hub_count;
    for i in 0..body {
        let left = body - i;
        let mean = remaining / left;
        let deg = if left == 1 {
            remaining
        } else {
            let spread = (mean / 2).max(1);
            let d = mean + rng.gen_range(0..=2 * spread) - spread;
            d.min(remaining - (left - 1)) // keep at least 1 edge per vertex
                .min(graph_cfg.big_vertex_threshold.unwrap())
                .max(1)
        };
        packer.push(next_id, deg);
        next_id += 1;
        remaining -= deg;
    }
    let (_, region_blocks, spill_blocks, total) = packer.finish(&graph_cfg, config);
    debug_assert_eq!(total, KRON25_EDGES);
    region_blocks + spill_blocks
}

/// Write an edge list as whitespace-separated `src dst` lines.
pub fn write_edge_list(path: &Path, edges: &[(u64, u64)]) -> Result<(), WorkloadError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for &(s, d) in edges {
        writeln!(out, "{s} {d}")?;
    }
    Ok(())
}

/// Stream an edge list of whitespace-separated `src dst` lines.
pub fn read_edge_list(path: &Path) -> Result<Vec<(u64, u64)>, WorkloadError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut edges = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64, WorkloadError> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| WorkloadError::Parse {
                    path: name.clone(),
                    line: idx + 1,
                    msg: format!("expected `src dst`, got {trimmed:?}"),
                })
        };
        let s = parse(it.next())?;
        let d = parse(it.next())?;
        if it.next().is_some() {
            return Err(WorkloadError::Parse {
                path: name,
                line: idx + 1,
                msg: format!("trailing tokens in {trimmed:?}"),
            });
        }
        edges.push((s, d));
    }
    Ok(edges)
}

/// Stream a vertex access trace, one id per line.
pub fn read_vertex_trace(path: &Path) -> Result<Vec<u64>, WorkloadError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut trace = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        trace.push(trimmed.parse().map_err(|_| WorkloadError::Parse {
            path: name.clone(),
            line: idx + 1,
            msg: format!("invalid vertex id {trimmed:?}"),
        })?);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SsdConfig {
        SsdConfig::default()
    }

    /// The worked example: vertices 0-3 small, vertex 4 big, 5-7 small.
    #[test]
    fn worked_example_packs_three_entries() {
        let degrees = [2u64, 3, 1, 2, 1000, 2, 2, 1];
        let index = build_index_from_degrees(&degrees, &cfg(), &GraphConfig::default()).unwrap();
        assert_eq!(index.entries.len(), 3);
        assert_eq!(index.entries[0].max_id, 3);
        assert_eq!(index.entries[0].edge_count, 0);
        assert!(matches!(index.entries[0].handle, Handle::Region { blocks: 1 }));
        assert_eq!(index.entries[1].max_id, 4);
        assert_eq!(index.entries[1].edge_count, 1000);
        assert_eq!(index.entries[2].max_id, 7);
        for v in 0..8 {
            let e = index.lookup(v).unwrap();
            let expect = match v {
                0..=3 => 3,
                4 => 4,
                _ => 7,
            };
            assert_eq!(e.max_id, expect, "vertex {v}");
        }
        assert!(index.lookup(8).is_err());
    }

    #[test]
    fn all_big_vertices_mirror_baseline_shape() {
        let degrees = [300u64, 400, 500];
        let index = build_index_from_degrees(&degrees, &cfg(), &GraphConfig::default()).unwrap();
        assert_eq!(index.entries.len(), 3);
        assert!(index.entries.iter().all(|e| e.edge_count > 0));
        assert_eq!(index.region_blocks, 0);
    }

    #[test]
    fn lookup_matches_linear_scan_on_random_indexes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(1..200usize);
            let degrees: Vec<u64> = (0..n).map(|_| rng.gen_range(0..400)).collect();
            let index = build_index_from_degrees(&degrees, &cfg(), &GraphConfig::default()).unwrap();
            for v in 0..n as u64 {
                let by_search = index.lookup(v).unwrap().max_id;
                let by_scan = index
                    .entries
                    .iter()
                    .find(|e| e.max_id >= v)
                    .unwrap()
                    .max_id;
                assert_eq!(by_search, by_scan);
            }
        }
    }

    #[test]
    fn id_overflow_rejected() {
        let edges = [(1u64 << 32, 0u64)];
        assert!(matches!(
            build_graph_index(&edges, &cfg(), &GraphConfig::default()),
            Err(WorkloadError::VertexIdOverflow(_))
        ));
    }

    #[test]
    fn footprint_ordering_on_synthetic_graph() {
        let edges = generate_power_law_graph(20_000, 3, 300_000, 11);
        assert!(edges.len() > 1_000_000);
        let c = cfg();
        let t256 = build_graph_index(&edges, &c, &GraphConfig::default()).unwrap();
        let np = build_graph_index(&edges, &c, &GraphConfig::no_spill()).unwrap();
        let gc = GraphConfig::default();
        let b = t256.baseline_index_bytes(&gc);
        assert_eq!(b, 8 * t256.vertex_count);
        let t256_bytes = t256.index_bytes(&gc);
        let np_bytes = np.index_bytes(&gc);
        assert!(t256_bytes < np_bytes, "{t256_bytes} vs {np_bytes}");
        assert!(np_bytes < b);
        assert!((t256_bytes as f64) < 0.7 * b as f64);
    }

    #[test]
    fn oom_roughly_doubles_im_on_low_degree_accesses() {
        let degrees = vec![5u64; 1000];
        let index = build_index_from_degrees(&degrees, &cfg(), &GraphConfig::default()).unwrap();
        let trace: Vec<u64> = (0..1000).collect();
        let gc = GraphConfig::default();
        let im = graph_traverse(&cfg(), &gc, &index, &trace, TraversalMode::Im).unwrap();
        let oom = graph_traverse(&cfg(), &gc, &index, &trace, TraversalMode::Oom).unwrap();
        let overhead = oom.time_s / im.time_s - 1.0;
        assert!((0.8..=1.2).contains(&overhead), "got {overhead}");
    }

    #[test]
    fn spill_strictly_beats_no_spill_on_hub_access() {
        let c = cfg();
        let gc = GraphConfig::default();
        // One hub whose edges span 6 blocks amid small vertices.
        let mut degrees = vec![4u64; 10_000];
        degrees[5_000] = 700_000;
        let t256 = build_index_from_degrees(&degrees, &c, &gc).unwrap();
        let np = build_index_from_degrees(&degrees, &c, &GraphConfig::no_spill()).unwrap();
        let mut c1 = RunCounters::default();
        let mut c2 = RunCounters::default();
        let t_spill =
            access_cost(&c, &gc, &t256, 5_000, TraversalMode::Tcam, &mut c1).unwrap();
        let t_np =
            access_cost(&c, &gc, &np, 5_000, TraversalMode::TcamNp, &mut c2).unwrap();
        assert!(t_spill < t_np, "{t_spill} vs {t_np}");
        assert_eq!(c1.srch_count, 0);
        assert!(c2.srch_count >= 6);
    }

    #[test]
    fn kron25_reported_blocks_in_band() {
        let blocks = kron25_block_estimate(&cfg(), 1);
        assert!((8192..=8400).contains(&blocks), "got {blocks}");
        // Pigeonhole floor: 2^30 edges at 131,072 per block.
        assert!(blocks >= KRON25_EDGES / 131_072);
    }

    #[test]
    fn edge_list_io_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        let edges = vec![(0u64, 1u64), (0, 2), (1, 0)];
        write_edge_list(&p, &edges).unwrap();
        assert_eq!(read_edge_list(&p).unwrap(), edges);
        std::fs::write(&p, "0 1\n2\n").unwrap();
        assert!(matches!(
            read_edge_list(&p),
            Err(WorkloadError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn vertex_trace_io() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        std::fs::write(&p, "3\n1\n# comment\n2\n").unwrap();
        assert_eq!(read_vertex_trace(&p).unwrap(), vec![3, 1, 2]);
        std::fs::write(&p, "3\nxyz\n").unwrap();
        assert!(matches!(
            read_vertex_trace(&p),
            Err(WorkloadError::Parse { line: 2, .. })
        ));
    }
}
