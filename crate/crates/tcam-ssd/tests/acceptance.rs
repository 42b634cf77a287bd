//! Acceptance gate: one test per criterion, each printing a single PASS/FAIL
//! line (run with `--nocapture` to see them on success).

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::time::Instant;
use tcam_ssd::backend::{Backend, FlashOp, GIB, MIB, OpKind, PhysicalAddress, SsdConfig};
use tcam_ssd::bitmap::Bitmap;
use tcam_ssd::flash_array::{BlockMode, FlashBlock, MatchVector, SearchKey, TernaryBit};
use tcam_ssd::ftl::{
    decode_match_vector, AllocateRequest, InitialData, Reduction, SearchManager, BURST_BYTES,
};
use tcam_ssd::nvme::{Command, HostBuffer, NvmeDevice};
use tcam_ssd::workloads::graph::{
    self, GraphConfig, TraversalMode, KRON25_EDGES,
};
use tcam_ssd::workloads::olap::{
    calibrated_config, olap_run, olap_sweep, OlapMode, OlapQuerySpec, SWEEP_LOCALITIES,
    SWEEP_SELECTIVITIES,
};
use tcam_ssd::workloads::oltp;

struct Criterion {
    number: u32,
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: u32, name: &'static str) -> Self {
        Criterion {
            number,
            name,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl std::fmt::Display) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("ACCEPTANCE {} ({}): {}", self.number, self.name, verdict);
        assert!(
            self.failures.is_empty(),
            "criterion {} failed: {:?}",
            self.number,
            self.failures
        );
    }
}

fn random_key(rng: &mut StdRng, width: usize) -> SearchKey {
    SearchKey::new(
        (0..width)
            .map(|_| match rng.gen_range(0..3) {
                0 => TernaryBit::Zero,
                1 => TernaryBit::One,
                _ => TernaryBit::DontCare,
            })
            .collect(),
    )
}

/// Small geometry with full-width (97-bit) native elements.
fn small_config() -> SsdConfig {
    SsdConfig {
        page_size: 32, // 256 bitlines
        pages_per_block: 196,
        blocks_per_plane: 64,
        ..SsdConfig::default()
    }
}

#[test]
fn criterion_1_search_correctness_oracle() {
    let start = Instant::now();
    let mut c = Criterion::new(1, "search-correctness oracle");
    let mut rng = StdRng::seed_from_u64(0x5ea4c4);

    // 900 raw blocks through the chip-level primitive.
    for case in 0..900 {
        let width = rng.gen_range(4..=97usize);
        let count = rng.gen_range(0..=256usize);
        let elements: Vec<Vec<bool>> = (0..count)
            .map(|_| (0..width).map(|_| rng.gen()).collect())
            .collect();
        let mut block = FlashBlock::new(196, 256, BlockMode::SearchSlc);
        block.program_transposed(&elements, 0).unwrap();
        let key = random_key(&mut rng, width);
        let expected: Vec<usize> = elements
            .iter()
            .enumerate()
            .filter(|(_, el)| key.matches(el))
            .map(|(i, _)| i)
            .collect();
        let got = block.srch(&key).unwrap().positions();
        c.check(got == expected, format!("raw block case {case}"));
    }

    // 100 cases through the firmware path.
    for case in 0..100 {
        let width = rng.gen_range(4..=97u64);
        let count = rng.gen_range(1..=256usize);
        let elements: Vec<Vec<bool>> = (0..count)
            .map(|_| (0..width).map(|_| rng.gen()).collect())
            .collect();
        let entries: Vec<Vec<u8>> = (0..count as u32).map(|i| i.to_le_bytes().to_vec()).collect();
        let mut mgr = SearchManager::new(small_config());
        let rid = mgr
            .allocate_region(AllocateRequest {
                element_bits: width,
                entry_bytes: 4,
                numeric: false,
                element_count: 0,
                initial: Some(InitialData {
                    elements: elements.clone(),
                    entries,
                }),
            })
            .unwrap();
        let key = random_key(&mut rng, width as usize);
        let expected: Vec<u64> = elements
            .iter()
            .enumerate()
            .filter(|(_, el)| key.matches(el))
            .map(|(i, _)| i as u64)
            .collect();
        let out = mgr
            .execute_search(rid, &Reduction::Single(key), count)
            .unwrap();
        c.check(out.matches.ordinals == expected, format!("firmware case {case}"));
    }

    c.check(start.elapsed().as_secs() < 60, "runtime must stay under 1 minute");
    c.finish();
}

#[test]
fn criterion_2_exhaustive_tiny_case() {
    let mut c = Criterion::new(2, "exhaustive ternary key check");
    let mut rng = StdRng::seed_from_u64(0xE0);
    let mut mgr = SearchManager::new(small_config());

    // Mirror: (value, valid) in ordinal order.
    let mut mirror: Vec<(u8, bool)> = (0..16).map(|_| (rng.gen(), true)).collect();
    let bits_of = |v: u8| (0..8).map(|i| v >> i & 1 == 1).collect::<Vec<bool>>();
    let rid = mgr
        .allocate_region(AllocateRequest {
            element_bits: 8,
            entry_bytes: 1,
            numeric: false,
            element_count: 0,
            initial: Some(InitialData {
                elements: mirror.iter().map(|&(v, _)| bits_of(v)).collect(),
                entries: mirror.iter().map(|&(v, _)| vec![v]).collect(),
            }),
        })
        .unwrap();

    let mut mismatches = 0u32;
    for key_index in 0..3u32.pow(8) {
        let mut digits = key_index;
        let key = SearchKey::new(
            (0..8)
                .map(|_| {
                    let d = digits % 3;
                    digits /= 3;
                    match d {
                        0 => TernaryBit::Zero,
                        1 => TernaryBit::One,
                        _ => TernaryBit::DontCare,
                    }
                })
                .collect(),
        );
        let expected: Vec<u64> = mirror
            .iter()
            .enumerate()
            .filter(|(_, (v, valid))| *valid && key.matches(&bits_of(*v)))
            .map(|(i, _)| i as u64)
            .collect();
        let out = mgr
            .execute_search(rid, &Reduction::Single(key.clone()), mirror.len())
            .unwrap();
        if out.matches.ordinals != expected {
            mismatches += 1;
        }

        if key_index % 100 == 0 && key_index > 0 {
            // Delete everything matching an exact key for one live value,
            // then append a fresh element to keep the population moving.
            if let Some(&(v, _)) = mirror.iter().find(|(_, valid)| *valid) {
                let del_key = SearchKey::exact(&bits_of(v));
                let deleted = mgr.delete(rid, &del_key).unwrap();
                let mut expected_deleted = 0;
                for entry in mirror.iter_mut().filter(|(mv, valid)| *valid && *mv == v) {
                    entry.1 = false;
                    expected_deleted += 1;
                }
                c.check(
                    deleted == expected_deleted,
                    format!("delete count at key {key_index}"),
                );
            }
            let v: u8 = rng.gen();
            mgr.append(rid, vec![bits_of(v)], vec![vec![v]]).unwrap();
            mirror.push((v, true));
        }
    }
    c.check(mismatches == 0, format!("{mismatches} keys disagreed with the oracle"));
    c.finish();
}

#[test]
fn criterion_3_olap_exact_arithmetic() {
    let mut c = Criterion::new(3, "OLAP exact arithmetic");
    let cfg = SsdConfig::default();
    let spec = OlapQuerySpec::table_default();

    c.check(spec.region_blocks(&cfg) == 4578, "search blocks must be 4578");
    let pct = 4578.0 / cfg.total_blocks() as f64 * 100.0;
    c.check((pct - 1.7).abs() < 0.1, format!("block share {pct:.2}% vs 1.7%"));

    let q1 = olap_run(&cfg, &spec, OlapMode::Tcam);
    c.check(q1.counters.srch_count == 4578, "query 1 srch count");
    let q1_vec = (q1.counters.srch_count * cfg.page_size) as f64 / MIB as f64;
    c.check(
        (q1_vec - 71.5).abs() / 71.5 < 0.001,
        format!("query 1 vector traffic {q1_vec:.3} MiB vs 71.5"),
    );

    let spec2 = OlapQuerySpec { sub_key_count: 4, ..spec };
    let q2 = olap_run(&cfg, &spec2, OlapMode::Tcam);
    c.check(q2.counters.srch_count == 18_312, "query 2 srch count");
    let q2_vec = (q2.counters.srch_count * cfg.page_size) as f64 / MIB as f64;
    c.check(
        (q2_vec - 286.1).abs() / 286.1 < 0.001,
        format!("query 2 vector traffic {q2_vec:.3} MiB vs 286.1"),
    );

    c.check(q1.counters.read_count == 240_015, "read count at 0.04%/0%");
    let cpu_fe = q1.counters.cpu_fe_bytes as f64 / GIB as f64;
    c.check(
        (cpu_fe - 3.7).abs() / 3.7 < 0.02,
        format!("CPU-FE {cpu_fe:.3} GiB vs 3.7"),
    );
    c.finish();
}

#[test]
fn criterion_4_olap_calibrated_speedups() {
    let mut c = Criterion::new(4, "OLAP calibrated speedups");
    let cfg = calibrated_config();
    let spec = OlapQuerySpec::table_default();

    let speedup = |spec: &OlapQuerySpec| {
        olap_run(&cfg, spec, OlapMode::BaselineScan).time_s
            / olap_run(&cfg, spec, OlapMode::Tcam).time_s
    };
    let q1 = speedup(&spec);
    c.check((q1 - 18.3).abs() / 18.3 < 0.15, format!("query 1 speedup {q1:.2} vs 18.3"));
    let q2 = speedup(&OlapQuerySpec { sub_key_count: 4, ..spec });
    c.check((q2 - 17.1).abs() / 17.1 < 0.15, format!("query 2 speedup {q2:.2} vs 17.1"));

    let low = speedup(&OlapQuerySpec { selectivity: 0.01, locality: 0.0, ..spec });
    c.check((low - 0.74).abs() / 0.74 < 0.20, format!("corner (1%, 0%) {low:.3} vs 0.74"));
    let high = speedup(&OlapQuerySpec { selectivity: 0.0001, locality: 1.0, ..spec });
    c.check((high - 1637.0).abs() / 1637.0 < 0.20, format!("corner (0.01%, 100%) {high:.1} vs 1637"));

    let m = olap_sweep(&cfg, &spec, &SWEEP_SELECTIVITIES, &SWEEP_LOCALITIES);
    for i in 0..m.len() {
        for j in 0..m[i].len() {
            if i + 1 < m.len() {
                c.check(m[i + 1][j] <= m[i][j] + 1e-9, "monotone in selectivity");
            }
            if j + 1 < m[i].len() {
                c.check(m[i][j + 1] >= m[i][j] - 1e-9, "monotone in locality");
            }
        }
    }
    c.finish();
}

fn synthetic_trace(queries: u64, seed: u64) -> Vec<oltp::OltpQuery> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    oltp::generate_trace(&path, queries, seed).unwrap();
    oltp::read_trace(&path).unwrap()
}

#[test]
fn criterion_5_oltp_crossover() {
    let mut c = Criterion::new(5, "OLTP crossover");
    let cfg = SsdConfig::default();
    let crossover = oltp::crossover_pages(&cfg, 16);
    c.check(
        matches!(crossover, Some(3) | Some(4)),
        format!("crossover {crossover:?} not in {{3, 4}}"),
    );
    // Strictly faster above the crossover, never below it.
    let tcam = oltp::tcam_query_latency(&cfg);
    let x = crossover.unwrap();
    for p in 1..=16 {
        let b = oltp::baseline_query_latency(&cfg, p);
        if p <= x {
            c.check(b <= tcam, format!("baseline must win at {p} pages"));
        } else {
            c.check(tcam < b, format!("tcam must win at {p} pages"));
        }
    }

    let trace = synthetic_trace(100_000, 9);
    let heavy = trace.iter().filter(|q| q.baseline_pages > 3).count() as f64
        / trace.len() as f64;
    c.check((heavy - 0.735).abs() < 0.01, format!("heavy-query share {heavy:.3}"));
    let base = oltp::oltp_replay(&cfg, &trace, oltp::OltpMode::Baseline).unwrap();
    let tcam_run = oltp::oltp_replay(&cfg, &trace, oltp::OltpMode::Tcam).unwrap();
    let speedup = (base.total_time_s / tcam_run.total_time_s - 1.0) * 100.0;
    c.check(
        (40.0..=80.0).contains(&speedup),
        format!("aggregate speedup {speedup:.1}% outside 40-80%"),
    );
    c.finish();
}

#[test]
fn criterion_6_oltp_data_movement() {
    let mut c = Criterion::new(6, "OLTP data-movement reductions");
    let cfg = SsdConfig::default();
    let trace = synthetic_trace(100_000, 11);
    let base = oltp::oltp_replay(&cfg, &trace, oltp::OltpMode::Baseline).unwrap();
    let tcam = oltp::oltp_replay(&cfg, &trace, oltp::OltpMode::Tcam).unwrap();

    let cpu_red = 1.0 - tcam.counters.cpu_fe_bytes as f64 / base.counters.cpu_fe_bytes as f64;
    c.check(cpu_red >= 0.80, format!("CPU-FE reduction {:.1}% < 80%", cpu_red * 100.0));
    let febe_red = 1.0 - tcam.counters.fe_be_bytes as f64 / base.counters.fe_be_bytes as f64;
    c.check(febe_red >= 0.60, format!("FE-BE reduction {:.1}% < 60%", febe_red * 100.0));

    let mut mgr = SearchManager::new(cfg);
    oltp::build_warehouse_regions(&mut mgr, oltp::OLTP_ROWS, oltp::OLTP_WAREHOUSES).unwrap();
    c.check(
        mgr.search_blocks_in_use() == 23,
        format!("warehouse regions use {} blocks, want 23", mgr.search_blocks_in_use()),
    );
    c.finish();
}

#[test]
fn criterion_7_graph_properties() {
    let mut c = Criterion::new(7, "graph properties");
    let cfg = SsdConfig::default();
    let gc = GraphConfig::default();
    let np_cfg = GraphConfig::no_spill();

    let edges = graph::generate_power_law_graph(200_000, 5, 700_000, 13);
    c.check(edges.len() >= 1_000_000, "graph must have at least 1 M edges");
    let t256 = graph::build_graph_index(&edges, &cfg, &gc).unwrap();
    let np = graph::build_graph_index(&edges, &cfg, &np_cfg).unwrap();

    let baseline = t256.baseline_index_bytes(&gc);
    let t256_bytes = t256.index_bytes(&gc);
    let np_bytes = np.index_bytes(&np_cfg);
    c.check(
        t256_bytes < np_bytes && np_bytes < baseline,
        format!("footprint ordering {t256_bytes} < {np_bytes} < {baseline} violated"),
    );
    c.check(
        (t256_bytes as f64) <= 0.7 * baseline as f64,
        "TCAM-256 footprint must be at least 30% below baseline",
    );

    // Traversal: uniform trace plus a few guaranteed hub visits.
    let mut trace = graph::generate_access_trace(t256.vertex_count, 100_000, 17);
    let hub = (0..t256.vertex_count)
        .find(|&v| t256.degrees[v as usize] == 700_000)
        .unwrap();
    trace.extend(std::iter::repeat(hub).take(10));
    let im = graph::graph_traverse(&cfg, &gc, &t256, &trace, TraversalMode::Im).unwrap();
    let oom = graph::graph_traverse(&cfg, &gc, &t256, &trace, TraversalMode::Oom).unwrap();
    let overhead = (oom.time_s / im.time_s - 1.0) * 100.0;
    c.check(
        (80.0..=120.0).contains(&overhead),
        format!("OOM overhead {overhead:.1}% outside 80-120%"),
    );

    // The hub's edges span >4 blocks; spill must win strictly on each access.
    let blocks_spanned = (700_000u64 * gc.edge_bytes).div_ceil(cfg.bitlines() * 8 / 8);
    c.check(blocks_spanned > 4, "hub must span more than 4 blocks");
    let mut c1 = Default::default();
    let mut c2 = Default::default();
    let t_spill =
        graph::access_cost(&cfg, &gc, &t256, hub, TraversalMode::Tcam, &mut c1).unwrap();
    let t_np =
        graph::access_cost(&cfg, &np_cfg, &np, hub, TraversalMode::TcamNp, &mut c2).unwrap();
    c.check(t_spill < t_np, format!("per-access {t_spill} !< {t_np}"));

    let blocks = graph::kron25_block_estimate(&cfg, 1);
    c.check(
        (8192..=8400).contains(&blocks),
        format!("Kron25-scale reported blocks {blocks} outside [8192, 8400]"),
    );
    c.check(blocks >= KRON25_EDGES / cfg.bitlines(), "pigeonhole floor");
    let pct = blocks as f64 / cfg.total_blocks() as f64 * 100.0;
    c.check((pct - 3.1).abs() < 0.2, format!("block share {pct:.2}% vs 3.1%"));
    c.finish();
}

#[test]
fn criterion_8_model_invariants() {
    let mut c = Criterion::new(8, "model invariants");
    let cfg = SsdConfig::default();

    // Latency component sum and occupancy lower bound on random op lists.
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..200 {
        let ops: Vec<FlashOp> = (0..rng.gen_range(1..40))
            .map(|_| FlashOp {
                kind: match rng.gen_range(0..4) {
                    0 => OpKind::Read,
                    1 => OpKind::Search,
                    2 => OpKind::Program(tcam_ssd::backend::CellMode::Slc),
                    _ => OpKind::Erase,
                },
                addr: PhysicalAddress {
                    channel: rng.gen_range(0..cfg.channels),
                    die: rng.gen_range(0..cfg.dies_per_channel()),
                    plane: rng.gen_range(0..cfg.planes_per_die),
                    block: rng.gen_range(0..cfg.blocks_per_plane),
                    page: rng.gen_range(0..cfg.pages_per_block),
                },
                payload_bytes: cfg.page_size,
                to_host: rng.gen(),
                parallel_group: rng.gen_range(0..4),
            })
            .collect();
        let mut be = Backend::new(cfg.clone());
        let before = be.counters;
        let r = be.schedule(&ops).unwrap();
        let component_sum: f64 = r.components().iter().map(|(_, v)| v).sum();
        c.check((r.total() - component_sum).abs() < 1e-12, "total = component sum");
        c.check(
            r.flash_array_time + 1e-12 >= r.max_unit_busy / ops.len().max(1) as f64,
            "occupancy sanity",
        );
        c.check(r.flash_array_time + 1e-12 >= 0.0 && r.total() >= r.max_unit_busy - 1e-12,
            "total bounded below by busiest unit");
        // Counter closure: FE-BE counter equals the payload sum.
        let payload: u64 = ops.iter().map(|o| o.payload_bytes).sum();
        c.check(
            be.counters.fe_be_bytes - before.fe_be_bytes == payload,
            "FE-BE counter closure",
        );
        let host: u64 = ops.iter().filter(|o| o.to_host).map(|o| o.payload_bytes).sum();
        c.check(
            be.counters.cpu_fe_bytes - before.cpu_fe_bytes == host,
            "CPU-FE counter closure",
        );
    }

    // Early-termination losslessness on random match vectors (proptest).
    let mut runner = proptest::test_runner::TestRunner::default();
    let strategy = proptest::collection::vec(proptest::bool::weighted(0.03), 1..4096);
    runner
        .run(&strategy, |bits| {
            let mut bm = Bitmap::zeros(bits.len());
            for (i, &b) in bits.iter().enumerate() {
                bm.set(i, b);
            }
            let decoded = decode_match_vector(&MatchVector(bm.clone()), BURST_BYTES);
            // Decoded ordinals must equal the set bits.
            let expect: Vec<u64> = bm.iter_ones().map(|i| i as u64).collect();
            assert_eq!(decoded.ordinals, expect);
            // Tags reconstruct burst offsets: buffered burst j sits at index
            // tag_j + j.
            let bits_per_burst = (BURST_BYTES * 8) as u64;
            let mut bursts: Vec<u64> = decoded.ordinals.iter().map(|o| o / bits_per_burst).collect();
            bursts.dedup();
            let reconstructed: Vec<u64> = decoded
                .burst_counter_tags
                .iter()
                .enumerate()
                .map(|(j, t)| t + j as u64)
                .collect();
            assert_eq!(bursts, reconstructed);
            // Burst accounting closes; only buffered bursts carry bytes.
            assert_eq!(
                decoded.burst_counter_tags.len() as u64 + decoded.bursts_discarded,
                decoded.total_bytes.div_ceil(BURST_BYTES as u64)
            );
            assert!(decoded.buffered_bytes <= decoded.burst_counter_tags.len() as u64 * BURST_BYTES as u64);
            Ok(())
        })
        .unwrap();

    // Pagination completeness: chained continuations equal the one-shot set.
    let mut dev = NvmeDevice::new(SearchManager::new(small_config()));
    let values: Vec<u8> = (0..200).map(|i| (i % 7) as u8).collect();
    let bits_of = |v: u8| (0..8).map(|i| v >> i & 1 == 1).collect::<Vec<bool>>();
    let rid = dev
        .submit(Command::Allocate {
            element_bits: 8,
            entry_bytes: 1,
            numeric: false,
            element_count: 0,
            elements: values.iter().map(|&v| bits_of(v)).collect(),
            entries: values.iter().map(|&v| vec![v]).collect(),
        })
        .unwrap()
        .region
        .unwrap();
    let key = SearchKey::exact(&bits_of(3));
    let (paged, _, _) = dev
        .tcam_search(rid, key.clone(), HostBuffer { capacity_entries: 7 })
        .unwrap();
    let (oneshot, _, _) = dev
        .tcam_search(rid, key, HostBuffer { capacity_entries: 1000 })
        .unwrap();
    c.check(paged == oneshot, "pagination completeness");
    c.check(
        paged.len() == values.iter().filter(|&&v| v == 3).count(),
        "pagination match count",
    );

    // Determinism: identical seeds give identical synthetic inputs and runs.
    let t1 = synthetic_trace(2_000, 21);
    let t2 = synthetic_trace(2_000, 21);
    c.check(t1 == t2, "trace generation determinism");
    let g1 = graph::generate_power_law_graph(5_000, 2, 50_000, 5);
    let g2 = graph::generate_power_law_graph(5_000, 2, 50_000, 5);
    c.check(g1 == g2, "graph generation determinism");
    let r1 = oltp::oltp_replay(&cfg, &t1, oltp::OltpMode::Tcam).unwrap();
    let r2 = oltp::oltp_replay(&cfg, &t2, oltp::OltpMode::Tcam).unwrap();
    c.check(
        r1.total_time_s == r2.total_time_s && r1.counters == r2.counters,
        "replay determinism",
    );
    c.finish();
}
