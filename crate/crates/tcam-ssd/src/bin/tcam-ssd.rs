//! Experiment runner: loads a drive config and workload inputs, runs a named
//! experiment, and writes CSV reports.
//!
//! Exit codes: 0 success, 1 validation error (arguments, config, input
//! files), 2 runtime error while executing or writing reports.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tcam_ssd::backend::{Backend, CellMode, FlashOp, OpKind, PhysicalAddress, SsdConfig};
use tcam_ssd::ftl::{AllocateRequest, SearchManager};
use tcam_ssd::report::{latency_row, summary_row, write_csv, LATENCY_HEADER, SUMMARY_HEADER};
use tcam_ssd::workloads::{graph, olap, oltp};

#[derive(Parser)]
#[command(name = "tcam-ssd", about = "Search-enabled SSD simulator and performance model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write CSV reports.
    Run {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Check a config and optional input files without running anything.
    Validate {
        /// Drive config file (flat `key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// OLTP trace CSV to check.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Edge list to check.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Vertex access trace to check.
        #[arg(long)]
        vertex_trace: Option<PathBuf>,
    },
    /// Generate synthetic inputs.
    Gen {
        #[command(subcommand)]
        what: GenWhat,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Drive config file; defaults to the built-in drive.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report CSVs.
    #[arg(long)]
    out: PathBuf,
    /// Seed for any synthetic input.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Experiment {
    /// Point-query trace replay, baseline vs in-flash search.
    Oltp {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace CSV; omitted = generate a synthetic trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Queries to generate when no trace is given.
        #[arg(long, default_value_t = 100_000)]
        queries: u64,
    },
    /// Single analytical scan query.
    Olap {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 600_037_902)]
        rows: u64,
        #[arg(long, default_value_t = 132)]
        row_bytes: u64,
        #[arg(long, default_value_t = 0.0004)]
        selectivity: f64,
        #[arg(long, default_value_t = 0.0)]
        locality: f64,
        #[arg(long, default_value_t = 1)]
        sub_keys: u64,
    },
    /// Selectivity x locality speedup matrix (bandwidth-calibrated config by
    /// default).
    OlapSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 600_037_902)]
        rows: u64,
        #[arg(long, default_value_t = 132)]
        row_bytes: u64,
        #[arg(long, default_value_t = 1)]
        sub_keys: u64,
    },
    /// Compressed-index build plus traversal replay in all four modes.
    Graph {
        #[command(flatten)]
        common: CommonArgs,
        /// Edge list file; omitted = synthetic power-law graph.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Vertex access trace; omitted = synthetic uniform trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        vertices: u64,
        #[arg(long, default_value_t = 5)]
        hubs: u64,
        #[arg(long, default_value_t = 700_000)]
        hub_degree: u64,
        #[arg(long, default_value_t = 100_000)]
        accesses: u64,
    },
    /// Single-operation latency breakdowns.
    Microbench {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Subcommand)]
enum GenWhat {
    /// Synthetic OLTP trace CSV.
    OltpTrace {
        #[arg(long, default_value_t = 100_000)]
        queries: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic power-law edge list.
    Graph {
        #[arg(long, default_value_t = 200_000)]
        vertices: u64,
        #[arg(long, default_value_t = 5)]
        hubs: u64,
        #[arg(long, default_value_t = 700_000)]
        hub_degree: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniform vertex access trace.
    GraphTrace {
        #[arg(long, default_value_t = 200_005)]
        vertices: u64,
        #[arg(long, default_value_t = 100_000)]
        accesses: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn load_config(path: &Option<PathBuf>) -> Result<SsdConfig, CliError> {
    match path {
        Some(p) => SsdConfig::from_file(p).map_err(validation),
        None => Ok(SsdConfig::default()),
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Run { experiment } => run_experiment(experiment),
        Cmd::Validate {
            config,
            trace,
            edges,
            vertex_trace,
        } => {
            let _ = load_config(&config)?;
            if let Some(p) = trace {
                oltp::read_trace(&p).map_err(validation)?;
            }
            if let Some(p) = edges {
                graph::read_edge_list(&p).map_err(validation)?;
            }
            if let Some(p) = vertex_trace {
                graph::read_vertex_trace(&p).map_err(validation)?;
            }
            println!("ok");
            Ok(())
        }
        Cmd::Gen { what } => run_gen(what),
    }
}

fn run_gen(what: GenWhat) -> Result<(), CliError> {
    match what {
        GenWhat::OltpTrace { queries, seed, out } => {
            oltp::generate_trace(&out, queries, seed).map_err(runtime)
        }
        GenWhat::Graph {
            vertices,
            hubs,
            hub_degree,
            seed,
            out,
        } => {
            let edges = graph::generate_power_law_graph(vertices, hubs, hub_degree, seed);
            graph::write_edge_list(&out, &edges).map_err(runtime)
        }
        GenWhat::GraphTrace {
            vertices,
            accesses,
            seed,
            out,
        } => {
            let trace = graph::generate_access_trace(vertices, accesses, seed);
            let body: String = trace.iter().map(|v| format!("{v}\n")).collect();
            std::fs::write(&out, body).map_err(runtime)
        }
    }
}

fn run_experiment(experiment: Experiment) -> Result<(), CliError> {
    match experiment {
        Experiment::Oltp {
            common,
            trace,
            queries,
        } => run_oltp(common, trace, queries),
        Experiment::Olap {
            common,
            rows,
            row_bytes,
            selectivity,
            locality,
            sub_keys,
        } => {
            if !(0.0..=1.0).contains(&locality) || selectivity <= 0.0 || selectivity > 1.0 {
                return Err(CliError::Validation(
                    "selectivity must be in (0,1], locality in [0,1]".into(),
                ));
            }
            run_olap(
                common,
                olap::OlapQuerySpec {
                    row_count: rows,
                    row_bytes,
                    selectivity,
                    locality,
                    sub_key_count: sub_keys,
                },
            )
        }
        Experiment::OlapSweep {
            common,
            rows,
            row_bytes,
            sub_keys,
        } => run_olap_sweep(common, rows, row_bytes, sub_keys),
        Experiment::Graph {
            common,
            edges,
            trace,
            vertices,
            hubs,
            hub_degree,
            accesses,
        } => run_graph(common, edges, trace, vertices, hubs, hub_degree, accesses),
        Experiment::Microbench { common } => run_microbench(common),
    }
}

fn run_oltp(common: CommonArgs, trace: Option<PathBuf>, queries: u64) -> Result<(), CliError> {
    let config = load_config(&common.config)?;
    prepare_out(&common.out)?;
    let trace = match trace {
        Some(p) => oltp::read_trace(&p).map_err(validation)?,
        None => {
            let path = common.out.join("oltp_trace.csv");
            oltp::generate_trace(&path, queries, common.seed).map_err(runtime)?;
            oltp::read_trace(&path).map_err(runtime)?
        }
    };
    let base = oltp::oltp_replay(&config, &trace, oltp::OltpMode::Baseline).map_err(validation)?;
    let tcam = oltp::oltp_replay(&config, &trace, oltp::OltpMode::Tcam).map_err(validation)?;

    let mut manager = SearchManager::new(config.clone());
    oltp::build_warehouse_regions(&mut manager, oltp::OLTP_ROWS, oltp::OLTP_WAREHOUSES)
        .map_err(runtime)?;

    // CDF by baseline page count, with the per-query latency of each mode.
    let total: u64 = base.page_histogram.iter().sum();
    let mut cum = 0u64;
    let tcam_us = oltp::tcam_query_latency(&config) * 1e6;
    let cdf_rows: Vec<Vec<String>> = base
        .page_histogram
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &n)| n > 0)
        .map(|(pages, &n)| {
            cum += n;
            vec![
                pages.to_string(),
                n.to_string(),
                format!("{:.6}", cum as f64 / total as f64),
                format!("{:.4}", oltp::baseline_query_latency(&config, pages as u64) * 1e6),
                format!("{tcam_us:.4}"),
            ]
        })
        .collect();
    write_csv(
        &common.out.join("oltp_cdf.csv"),
        &["baseline_pages", "queries", "cum_fraction", "baseline_us", "tcam_us"],
        &cdf_rows,
    )
    .map_err(runtime)?;

    let speedup_pct = (base.total_time_s / tcam.total_time_s - 1.0) * 100.0;
    let crossover = oltp::crossover_pages(&config, 16).unwrap_or(0);
    let blocks = manager.search_blocks_in_use();
    let rows = vec![
        summary_row("queries", trace.len(), "count"),
        summary_row("baseline_total_time", format!("{:.6}", base.total_time_s), "s"),
        summary_row("tcam_total_time", format!("{:.6}", tcam.total_time_s), "s"),
        summary_row("tcam_speedup", format!("{speedup_pct:.2}"), "percent"),
        summary_row("crossover_pages", crossover, "pages"),
        summary_row("baseline_cpu_fe_bytes", base.counters.cpu_fe_bytes, "bytes"),
        summary_row("baseline_fe_be_bytes", base.counters.fe_be_bytes, "bytes"),
        summary_row("cpu_fe_bytes", tcam.counters.cpu_fe_bytes, "bytes"),
        summary_row("fe_be_bytes", tcam.counters.fe_be_bytes, "bytes"),
        summary_row("srch_count", tcam.counters.srch_count, "count"),
        summary_row("read_count", tcam.counters.read_count, "count"),
        summary_row("search_blocks", blocks, "blocks"),
        summary_row(
            "search_block_pct",
            format!("{:.4}", blocks as f64 / config.total_blocks() as f64 * 100.0),
            "percent",
        ),
        summary_row("link_table_bytes", manager.link_table_bytes(), "bytes"),
    ];
    write_csv(&common.out.join("summary.csv"), &SUMMARY_HEADER, &rows).map_err(runtime)
}

fn run_olap(common: CommonArgs, spec: olap::OlapQuerySpec) -> Result<(), CliError> {
    let config = load_config(&common.config)?;
    prepare_out(&common.out)?;
    let base = olap::olap_run(&config, &spec, olap::OlapMode::BaselineScan);
    let tcam = olap::olap_run(&config, &spec, olap::OlapMode::Tcam);

    let mut manager = SearchManager::new(config.clone());
    manager
        .allocate_region(AllocateRequest {
            element_bits: config.native_element_size(),
            entry_bytes: spec.row_bytes,
            numeric: false,
            element_count: spec.row_count,
            initial: None,
        })
        .map_err(validation)?;

    let rows = vec![
        summary_row("rows", spec.row_count, "count"),
        summary_row("selectivity", spec.selectivity, "fraction"),
        summary_row("locality", spec.locality, "fraction"),
        summary_row("sub_keys", spec.sub_key_count, "count"),
        summary_row("baseline_time", format!("{:.6}", base.time_s), "s"),
        summary_row("tcam_time", format!("{:.6}", tcam.time_s), "s"),
        summary_row("speedup", format!("{:.4}", base.time_s / tcam.time_s), "ratio"),
        summary_row("baseline_read_count", base.counters.read_count, "count"),
        summary_row("baseline_cpu_fe_bytes", base.counters.cpu_fe_bytes, "bytes"),
        summary_row("srch_count", tcam.counters.srch_count, "count"),
        summary_row("read_count", tcam.counters.read_count, "count"),
        summary_row("cpu_fe_bytes", tcam.counters.cpu_fe_bytes, "bytes"),
        summary_row("fe_be_bytes", tcam.counters.fe_be_bytes, "bytes"),
        summary_row("search_blocks", manager.search_blocks_in_use(), "blocks"),
        summary_row(
            "search_block_pct",
            format!(
                "{:.4}",
                manager.search_blocks_in_use() as f64 / config.total_blocks() as f64 * 100.0
            ),
            "percent",
        ),
        summary_row("link_table_bytes", manager.link_table_bytes(), "bytes"),
    ];
    write_csv(&common.out.join("summary.csv"), &SUMMARY_HEADER, &rows).map_err(runtime)
}

fn run_olap_sweep(
    common: CommonArgs,
    rows: u64,
    row_bytes: u64,
    sub_keys: u64,
) -> Result<(), CliError> {
    let config = match &common.config {
        Some(p) => SsdConfig::from_file(p).map_err(validation)?,
        None => olap::calibrated_config(),
    };
    prepare_out(&common.out)?;
    let spec = olap::OlapQuerySpec {
        row_count: rows,
        row_bytes,
        selectivity: 1.0,
        locality: 0.0,
        sub_key_count: sub_keys,
    };
    let matrix = olap::olap_sweep(
        &config,
        &spec,
        &olap::SWEEP_SELECTIVITIES,
        &olap::SWEEP_LOCALITIES,
    );
    let mut header: Vec<String> = vec!["selectivity".into()];
    header.extend(
        olap::SWEEP_LOCALITIES
            .iter()
            .map(|l| format!("speedup_at_locality_{l}")),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv_rows: Vec<Vec<String>> = olap::SWEEP_SELECTIVITIES
        .iter()
        .zip(&matrix)
        .map(|(s, row)| {
            let mut r = vec![s.to_string()];
            r.extend(row.iter().map(|v| format!("{v:.4}")));
            r
        })
        .collect();
    write_csv(&common.out.join("olap_sweep.csv"), &header_refs, &csv_rows).map_err(runtime)
}

#[allow(clippy::too_many_arguments)]
fn run_graph(
    common: CommonArgs,
    edges_path: Option<PathBuf>,
    trace_path: Option<PathBuf>,
    vertices: u64,
    hubs: u64,
    hub_degree: u64,
    accesses: u64,
) -> Result<(), CliError> {
    let config = load_config(&common.config)?;
    prepare_out(&common.out)?;
    let edges = match edges_path {
        Some(p) => graph::read_edge_list(&p).map_err(validation)?,
        None => graph::generate_power_law_graph(vertices, hubs, hub_degree, common.seed),
    };
    let gc = graph::GraphConfig::default();
    let index = graph::build_graph_index(&edges, &config, &gc).map_err(validation)?;
    let np_index =
        graph::build_graph_index(&edges, &config, &graph::GraphConfig::no_spill())
            .map_err(validation)?;
    let trace = match trace_path {
        Some(p) => graph::read_vertex_trace(&p).map_err(validation)?,
        None => graph::generate_access_trace(index.vertex_count, accesses, common.seed),
    };

    let modes = [
        ("im", graph::TraversalMode::Im, &index),
        ("oom", graph::TraversalMode::Oom, &index),
        ("tcam_np", graph::TraversalMode::TcamNp, &np_index),
        ("tcam_256", graph::TraversalMode::Tcam, &index),
    ];
    let mut mode_rows = Vec::new();
    for (name, mode, idx) in modes {
        let gcfg = if matches!(mode, graph::TraversalMode::TcamNp) {
            graph::GraphConfig::no_spill()
        } else {
            gc
        };
        let out = graph::graph_traverse(&config, &gcfg, idx, &trace, mode).map_err(validation)?;
        mode_rows.push(vec![
            name.to_string(),
            format!("{:.6}", out.time_s),
            out.counters.cpu_fe_bytes.to_string(),
            out.counters.fe_be_bytes.to_string(),
            out.counters.srch_count.to_string(),
            out.counters.read_count.to_string(),
        ]);
    }
    write_csv(
        &common.out.join("graph_modes.csv"),
        &["mode", "time_s", "cpu_fe_bytes", "fe_be_bytes", "srch_count", "read_count"],
        &mode_rows,
    )
    .map_err(runtime)?;

    let rows = vec![
        summary_row("vertices", index.vertex_count, "count"),
        summary_row("edges", index.total_edges, "count"),
        summary_row("index_entries", index.entries.len(), "count"),
        summary_row("index_bytes_tcam_256", index.index_bytes(&gc), "bytes"),
        summary_row(
            "index_bytes_tcam_np",
            np_index.index_bytes(&graph::GraphConfig::no_spill()),
            "bytes",
        ),
        summary_row("index_bytes_baseline", index.baseline_index_bytes(&gc), "bytes"),
        summary_row("search_blocks", index.reported_blocks(), "blocks"),
        summary_row(
            "search_block_pct",
            format!(
                "{:.4}",
                index.reported_blocks() as f64 / config.total_blocks() as f64 * 100.0
            ),
            "percent",
        ),
        summary_row(
            "link_table_bytes",
            index.region_blocks * tcam_ssd::ftl::LINK_TABLE_ENTRY_BYTES,
            "bytes",
        ),
    ];
    write_csv(&common.out.join("summary.csv"), &SUMMARY_HEADER, &rows).map_err(runtime)
}

fn run_microbench(common: CommonArgs) -> Result<(), CliError> {
    let config = load_config(&common.config)?;
    prepare_out(&common.out)?;
    let addr = PhysicalAddress {
        channel: 0,
        die: 0,
        plane: 0,
        block: 0,
        page: 0,
    };
    let single = |kind: OpKind, payload: u64, to_host: bool| FlashOp {
        kind,
        addr,
        payload_bytes: payload,
        to_host,
        parallel_group: 0,
    };
    let page = config.page_size;
    let cases: Vec<(&str, FlashOp, u64)> = vec![
        ("page_read", single(OpKind::Read, page, true), 0),
        ("block_search", single(OpKind::Search, page, false), 64),
        ("slc_program", single(OpKind::Program(CellMode::Slc), page, false), 0),
        ("mlc_program", single(OpKind::Program(CellMode::Mlc), page, false), 0),
        ("tlc_program", single(OpKind::Program(CellMode::Tlc), page, false), 0),
        ("block_erase", single(OpKind::Erase, 0, false), 0),
    ];
    let mut rows = Vec::new();
    for (name, op, decode_bytes) in cases {
        let mut backend = Backend::new(config.clone());
        let report = backend
            .schedule_detail(1, &[op], decode_bytes, 0)
            .map_err(runtime)?;
        rows.push(latency_row(name, &report));
    }
    write_csv(&common.out.join("microbench.csv"), &LATENCY_HEADER, &rows).map_err(runtime)
}
