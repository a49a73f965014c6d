//! Digraphwave command line: embedding extraction, synthetic benchmarks,
//! alignment evaluation and the diffusion-theory utilities.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 I/O or configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use digraphwave::align::{
    add_noise_edges, greedy_match, permuted_self_alignment, standardize_jointly, topk_accuracy,
    AlignmentTask, WeightMode,
};
use digraphwave::embed::set_hyperparameters;
use digraphwave::error::DgwError;
use digraphwave::graph::write_edge_list;
use digraphwave::matexp::{expm_batch, taylor_coefficients, ColumnEngine};
use digraphwave::output::{
    load_graph_file, manifest_path, run_embed, EmbedParams, EmbeddingFormat, RunManifest,
};
use digraphwave::pipeline::digraphwave as run_digraphwave;
use digraphwave::synth::{barabasi_albert, compose, load_catalog, CompositionSpec};
use digraphwave::theory::{
    ball_decomposition, heat_containment_bound, make_source_star, SourceStarSpec,
};

#[derive(Parser)]
#[command(name = "digraphwave", version, about = "Structural node embeddings for directed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract Digraphwave embeddings from an edge list or DGWG cache.
    Embed(EmbedArgs),
    /// Compose catalog components onto a circular backbone with noise edges.
    Synth(SynthArgs),
    /// Generate a Barabási–Albert preferential attachment graph.
    Ba(BaArgs),
    /// Network-alignment evaluation between two graphs or via self-permutation.
    Align(AlignArgs),
    /// Print the heat-containment bound Q(R+1, τ) as a CSV table.
    Bound(BoundArgs),
    /// Emit a source-star graph as an edge list.
    Sstar(SstarArgs),
    /// Run the invariant suite on a graph, or check manifest output hashes.
    Verify(VerifyArgs),
    /// Time `embed` over a sweep of Barabási–Albert graph sizes.
    Bench(BenchArgs),
    /// Dump raw Ψ columns for a few nodes as CSV (debugging aid).
    Psi(PsiArgs),
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    input: PathBuf,
    /// Parse the third TSV column as edge weights.
    #[arg(long)]
    weighted: bool,
    /// Override the node count (allows trailing isolated nodes).
    #[arg(long)]
    num_nodes: Option<usize>,
    /// Largest neighbourhood radius R; timescales span [1, R].
    #[arg(long, default_value_t = 3)]
    radius: u32,
    /// Requested embedding dimension.
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long)]
    no_transpose: bool,
    #[arg(long)]
    no_aggregate: bool,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Taylor order K (bare default 40, matching the reference experiments).
    #[arg(long)]
    order: Option<usize>,
    /// Pick the smallest K meeting this reachability error target instead of
    /// using the fixed default order.
    #[arg(long)]
    error_target: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[arg(long)]
    no_standardize: bool,
    /// Reuse normal-orientation thresholds verbatim on the transposed pass.
    #[arg(long)]
    paper_exact_thresholds: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory of `<name>.edges` + `<name>.labels` fixture pairs.
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    noise_edges: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    segment_len: usize,
    /// Use both edge directions on the backbone cycle.
    #[arg(long)]
    undirected_backbone: bool,
    /// Output prefix; writes `<prefix>.edges`, `<prefix>.labels` and a manifest.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct BaArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 1)]
    edges_per_node: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    g1: PathBuf,
    /// Second graph; omit together with --truth to self-align a permutation.
    #[arg(long)]
    g2: Option<PathBuf>,
    /// Ground-truth TSV `g2_node<TAB>g1_node`; required with --g2.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    weighted: bool,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Noise fractions, e.g. `0,0.05,0.1`.
    #[arg(long, default_value = "0", value_delimiter = ',')]
    noise: Vec<f64>,
    #[arg(long, default_value = "0", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 2)]
    radius: u32,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value = "1,2,3,4,5,8", value_delimiter = ',')]
    radii: Vec<u32>,
    #[arg(long, default_value_t = 10.0)]
    tau_max: f64,
    #[arg(long, default_value_t = 0.1)]
    tau_step: f64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SstarArgs {
    #[arg(long, default_value_t = 6)]
    degree: u64,
    #[arg(long, default_value_t = 2)]
    branching: u64,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    #[arg(long, default_value_t = 0)]
    isolated: u64,
    /// Output edge-list path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Graph to check (runs the invariant suite).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    weighted: bool,
    /// Manifest whose recorded output hashes should be re-checked.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    radius: u32,
    #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
    taus: Vec<f64>,
    /// Number of diffusion sources sampled for the column checks.
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "1000,10000", value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    edges_per_node: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 3)]
    radius: u32,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Abort the sweep once this many seconds have elapsed.
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PsiArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    weighted: bool,
    #[arg(long, value_delimiter = ',')]
    nodes: Vec<u32>,
    #[arg(long, default_value = "1", value_delimiter = ',')]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 40)]
    order: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DgwError::Invariant(_) => 1,
                _ => 2,
            }
        }
    };
    std::process::exit(code);
}

fn run(command: Command) -> Result<i32, DgwError> {
    match command {
        Command::Embed(a) => {
            // --order wins; --error-target switches K to automatic selection;
            // a bare invocation uses K = 40 like the reference experiments
            let order = match (a.order, a.error_target) {
                (Some(k), _) => Some(k),
                (None, Some(_)) => None,
                (None, None) => Some(digraphwave::matexp::DEFAULT_ORDER),
            };
            let params = EmbedParams {
                input: a.input,
                weighted: a.weighted,
                num_nodes: a.num_nodes,
                radius: a.radius,
                k_emb: a.dim,
                transposition: !a.no_transpose,
                aggregation: !a.no_aggregate,
                batch_size: a.batch_size,
                order,
                error_target: a.error_target.unwrap_or(digraphwave::matexp::DEFAULT_ERROR_TARGET),
                threads: a.threads,
                out: a.out,
                format: match a.format {
                    FormatArg::Csv => EmbeddingFormat::Csv,
                    FormatArg::Bin => EmbeddingFormat::Binary,
                },
                standardize: !a.no_standardize,
                paper_exact_thresholds: a.paper_exact_thresholds,
            };
            let manifest = run_embed(&params)?;
            eprintln!(
                "embedded in {:.2}s (order {}, batch {})",
                manifest.wall_time_s, manifest.flags["order"], manifest.flags["batch_size"]
            );
            Ok(0)
        }
        Command::Synth(a) => cmd_synth(a),
        Command::Ba(a) => cmd_ba(a),
        Command::Align(a) => cmd_align(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Sstar(a) => cmd_sstar(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Psi(a) => cmd_psi(a),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<i32, DgwError> {
    let t0 = Instant::now();
    let catalog = load_catalog(&a.catalog)?;
    let spec = CompositionSpec {
        repeats: a.repeats,
        noise_edges_per_graph: a.noise_edges,
        seed: a.seed,
        segment_len: a.segment_len,
        undirected_backbone: a.undirected_backbone,
    };
    let lg = compose(&catalog, &spec)?;
    let edges_path = with_ext(&a.out_prefix, "edges");
    let labels_path = with_ext(&a.out_prefix, "labels");
    write_edge_list(&lg.graph, buf_writer(&edges_path)?)?;
    let mut w = buf_writer(&labels_path)?;
    for (i, l) in lg.identity.iter().enumerate() {
        writeln!(w, "{i}\t{l}")?;
    }
    w.flush()?;

    let mut manifest = RunManifest::new("synth");
    manifest
        .flag("catalog", a.catalog.display())
        .flag("spec", serde_json::to_string(&spec)?)
        .flag("nodes", lg.graph.n())
        .flag("edges", lg.graph.m());
    manifest.seeds.push(a.seed);
    manifest.hash_output(&edges_path)?;
    manifest.hash_output(&labels_path)?;
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    manifest.write(&manifest_path(&edges_path))?;
    eprintln!("composed {} nodes, {} edges", lg.graph.n(), lg.graph.m());
    Ok(0)
}

fn cmd_ba(a: BaArgs) -> Result<i32, DgwError> {
    let t0 = Instant::now();
    let g = barabasi_albert(a.nodes, a.edges_per_node, a.seed)?;
    write_edge_list(&g, buf_writer(&a.out)?)?;
    let mut manifest = RunManifest::new("ba");
    manifest
        .flag("nodes", a.nodes)
        .flag("edges_per_node", a.edges_per_node)
        .flag("seed", a.seed);
    manifest.seeds.push(a.seed);
    manifest.hash_output(&a.out)?;
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    manifest.write(&manifest_path(&a.out))?;
    Ok(0)
}

fn cmd_align(a: AlignArgs) -> Result<i32, DgwError> {
    let t0 = Instant::now();
    let mut w = buf_writer(&a.out)?;
    match (&a.g2, &a.truth) {
        (Some(g2_path), Some(truth_path)) => {
            let g1 = load_graph_file(&a.g1, a.weighted, None)?;
            let g2 = load_graph_file(g2_path, a.weighted, None)?;
            let truth = read_truth(truth_path, g2.n(), g1.n())?;
            write!(w, "seed,noise")?;
            for k in 1..=a.k {
                write!(w, ",top{k}")?;
            }
            writeln!(w)?;
            let mode = if a.weighted { WeightMode::Empirical } else { WeightMode::Unit };
            for &p in &a.noise {
                for &seed in &a.seeds {
                    let n1 = add_noise_edges(&g1, p, seed.wrapping_mul(2).wrapping_add(1), mode)?;
                    let n2 = add_noise_edges(&g2, p, seed.wrapping_mul(2).wrapping_add(2), mode)?;
                    let c1 = set_hyperparameters(&n1, a.radius, a.dim, true, true)?;
                    let e1 = run_digraphwave(&n1, &c1)?;
                    let c2 = set_hyperparameters(&n2, a.radius, a.dim, true, true)?;
                    let e2 = run_digraphwave(&n2, &c2)?;
                    let (s1, s2) = standardize_jointly(&e1, &e2);
                    let task = AlignmentTask {
                        emb1: s1.data.view(),
                        emb2: s2.data.view(),
                        ground_truth: &truth,
                        k: a.k,
                    };
                    let cands = greedy_match(&task)?;
                    write!(w, "{seed},{p}")?;
                    for k in 1..=a.k {
                        write!(w, ",{}", topk_accuracy(&cands, &truth, k))?;
                    }
                    writeln!(w)?;
                }
            }
        }
        (None, None) => {
            let g1 = load_graph_file(&a.g1, a.weighted, None)?;
            writeln!(w, "seed,noise,top1,top10")?;
            for &p in &a.noise {
                for &seed in &a.seeds {
                    let pt = permuted_self_alignment(&g1, a.radius, a.dim, p, seed)?;
                    writeln!(w, "{},{},{},{}", pt.seed, pt.noise, pt.top1, pt.top10)?;
                }
            }
        }
        _ => {
            return Err(DgwError::Config(
                "--g2 and --truth must be given together; omit both for self-permutation".into(),
            ))
        }
    }
    w.flush()?;
    let mut manifest = RunManifest::new("align");
    manifest
        .flag("g1", a.g1.display())
        .flag("k", a.k)
        .flag("radius", a.radius)
        .flag("dim", a.dim)
        .flag("noise", format!("{:?}", a.noise));
    manifest.seeds = a.seeds.clone();
    manifest.hash_input(&a.g1)?;
    manifest.hash_output(&a.out)?;
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    manifest.write(&manifest_path(&a.out))?;
    Ok(0)
}

fn read_truth(path: &Path, n2: usize, n1: usize) -> Result<Vec<u32>, DgwError> {
    let text = std::fs::read_to_string(path)?;
    let mut truth = vec![u32::MAX; n2];
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut f = t.split_whitespace();
        let v2: usize = f
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| DgwError::Parse { line: idx + 1, msg: "bad g2 node".into() })?;
        let v1: u32 = f
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| DgwError::Parse { line: idx + 1, msg: "bad g1 node".into() })?;
        if v2 >= n2 || v1 as usize >= n1 {
            return Err(DgwError::Validation(format!(
                "truth pair ({v2}, {v1}) out of range"
            )));
        }
        if truth[v2] != u32::MAX {
            return Err(DgwError::Validation(format!("duplicate truth for node {v2}")));
        }
        truth[v2] = v1;
    }
    if truth.iter().any(|&v| v == u32::MAX) {
        return Err(DgwError::Validation("truth file does not cover all g2 nodes".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if !truth.iter().all(|v| seen.insert(*v)) {
        return Err(DgwError::Validation("ground truth must be injective".into()));
    }
    Ok(truth)
}

fn cmd_bound(a: BoundArgs) -> Result<i32, DgwError> {
    let steps = (a.tau_max / a.tau_step).round() as usize;
    let mut w = out_or_stdout(a.out.as_deref())?;
    writeln!(w, "radius,tau,q")?;
    for &r in &a.radii {
        for i in 0..=steps {
            let tau = i as f64 * a.tau_step;
            writeln!(w, "{r},{tau},{}", heat_containment_bound(r, tau))?;
        }
    }
    w.flush()?;
    if let Some(out) = &a.out {
        let mut manifest = RunManifest::new("bound");
        manifest.flag("radii", format!("{:?}", a.radii));
        manifest.hash_output(out)?;
        manifest.write(&manifest_path(out))?;
    }
    Ok(0)
}

fn cmd_sstar(a: SstarArgs) -> Result<i32, DgwError> {
    let spec = SourceStarSpec::new(a.degree, a.branching, a.depth, a.isolated)?;
    let g = make_source_star(&spec);
    let mut w = out_or_stdout(a.out.as_deref())?;
    write_edge_list(&g, &mut w)?;
    w.flush()?;
    if let Some(out) = &a.out {
        let mut manifest = RunManifest::new("sstar");
        manifest
            .flag("degree", a.degree)
            .flag("branching", a.branching)
            .flag("depth", a.depth)
            .flag("isolated", a.isolated)
            .flag("nodes", g.n());
        manifest.hash_output(out)?;
        manifest.write(&manifest_path(out))?;
    }
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> Result<i32, DgwError> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        if ok {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            failures += 1;
        }
    };

    if let Some(manifest_file) = &a.manifest {
        let manifest = RunManifest::read(manifest_file)?;
        let bad = manifest.verify_outputs()?;
        check(
            "output-checksums",
            bad.is_empty(),
            if bad.is_empty() {
                format!("{} files match", manifest.output_hashes.len())
            } else {
                format!("changed: {}", bad.join(", "))
            },
        );
    }

    if let Some(input) = &a.input {
        let g = load_graph_file(input, a.weighted, None)?;
        let op = g.build_operator();

        let mut worst_col_sum = 0.0f64;
        for j in 0..g.n() {
            if !op.is_sink(j) {
                let (_, vals) = op.alpha_column(j);
                worst_col_sum = worst_col_sum.max((vals.iter().sum::<f64>() - 1.0).abs());
            }
        }
        check(
            "operator-column-stochastic",
            worst_col_sum <= 1e-12,
            format!("max |col sum - 1| = {worst_col_sum:.2e}"),
        );

        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
        let mut sources: Vec<u32> = (0..g.n() as u32).collect();
        sources.shuffle(&mut rng);
        sources.truncate(a.samples.max(1));
        sources.sort_unstable();

        let coeffs = taylor_coefficients(&a.taus, 40);
        let mut engine = ColumnEngine::new(&op, &coeffs);
        let mut worst_sum = 0.0f64;
        let mut worst_min = 0.0f64;
        let mut worst_gap = f64::INFINITY;
        for &j in &sources {
            let col = engine.compute(j)?;
            worst_min = worst_min.min(col.raw_min);
            for (s, vals) in col.values.iter().enumerate() {
                let sum: f64 = col.indices.iter().map(|&i| vals[i as usize]).sum();
                worst_sum = worst_sum.max((sum - 1.0).abs());
                let tau = a.taus[s];
                let ball = ball_decomposition(&g, j, a.radius)?.ball(a.radius);
                let heat: f64 = ball.iter().map(|&i| vals[i as usize]).sum();
                worst_gap = worst_gap.min(heat - heat_containment_bound(a.radius, tau));
            }
        }
        check(
            "heat-conservation",
            worst_sum <= 1e-10,
            format!("max |col sum - 1| = {worst_sum:.2e} over {} columns", sources.len()),
        );
        check(
            "nonnegativity",
            worst_min >= -1e-10,
            format!("min raw entry = {worst_min:.2e}"),
        );
        check(
            "containment-bound",
            worst_gap >= -1e-9,
            format!("min(ball heat - Q(R+1,τ)) = {worst_gap:.2e}"),
        );
    }

    if a.input.is_none() && a.manifest.is_none() {
        return Err(DgwError::Config("nothing to verify: pass --input and/or --manifest".into()));
    }
    if failures > 0 {
        Err(DgwError::Invariant(format!("{failures} check(s) failed")))
    } else {
        Ok(0)
    }
}

fn cmd_bench(a: BenchArgs) -> Result<i32, DgwError> {
    let t0 = Instant::now();
    let dir = std::env::temp_dir().join(format!("dgw-bench-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut w = buf_writer(&a.out)?;
    writeln!(w, "n,m,seconds,peak_mem_estimate_bytes")?;
    'sweep: for &n in &a.sizes {
        for rep in 0..a.repeats {
            if let Some(limit) = a.timeout_secs {
                if t0.elapsed().as_secs() >= limit {
                    eprintln!("bench: timeout reached, aborting sweep");
                    break 'sweep;
                }
            }
            let g = barabasi_albert(n, a.edges_per_node, a.seed + rep as u64)?;
            let graph_path = dir.join(format!("ba_{n}_{rep}.tsv"));
            write_edge_list(&g, buf_writer(&graph_path)?)?;
            let out_path = dir.join(format!("emb_{n}_{rep}.dgwe"));
            let mut params = EmbedParams::new(&graph_path, &out_path);
            params.radius = a.radius;
            params.k_emb = a.dim;
            params.format = EmbeddingFormat::Binary;
            let manifest = run_embed(&params)?;
            writeln!(
                w,
                "{n},{},{},{}",
                g.m(),
                manifest.wall_time_s,
                manifest.peak_mem_estimate_bytes
            )?;
        }
    }
    w.flush()?;
    std::fs::remove_dir_all(&dir).ok();
    let mut manifest = RunManifest::new("bench");
    manifest
        .flag("sizes", format!("{:?}", a.sizes))
        .flag("edges_per_node", a.edges_per_node)
        .flag("repeats", a.repeats);
    manifest.seeds.push(a.seed);
    manifest.hash_output(&a.out)?;
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    manifest.write(&manifest_path(&a.out))?;
    Ok(0)
}

fn cmd_psi(a: PsiArgs) -> Result<i32, DgwError> {
    let g = load_graph_file(&a.input, a.weighted, None)?;
    let op = g.build_operator();
    let coeffs = taylor_coefficients(&a.taus, a.order);
    let batch = expm_batch(&op, &a.nodes, &coeffs)?;
    let mut w = out_or_stdout(a.out.as_deref())?;
    writeln!(w, "tau,source,node,psi")?;
    for (s, &tau) in batch.taus.iter().enumerate() {
        for (b, &src) in batch.node_ids.iter().enumerate() {
            for i in 0..g.n() {
                let v = batch.data[s][(i, b)];
                if v != 0.0 {
                    writeln!(w, "{tau},{src},{i},{v}")?;
                }
            }
        }
    }
    w.flush()?;
    Ok(0)
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut p = prefix.as_os_str().to_os_string();
    p.push(".");
    p.push(ext);
    PathBuf::from(p)
}

fn buf_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, DgwError> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn out_or_stdout(path: Option<&Path>) -> Result<Box<dyn Write>, DgwError> {
    Ok(match path {
        Some(p) => Box::new(buf_writer(p)?),
        None => Box::new(std::io::BufWriter::new(std::io::stdout())),
    })
}
