//! Synthetic benchmark generators: the automorphic-identity catalog
//! composition and Barabási–Albert scalability graphs.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{DgwError, Result};
use crate::graph::{load_edge_list, write_edge_list, Graph};

/// A graph plus ground-truth automorphic identity labels. Backbone and other
/// unlabeled nodes carry `-1`.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub identity: Vec<i64>,
    /// Which catalog instance the node came from; `-1` for the backbone.
    pub component_tag: Vec<i64>,
}

/// One named catalog component with per-node identity labels.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub graph: Graph,
    pub labels: Vec<i64>,
}

pub type Catalog = Vec<CatalogEntry>;

/// Load every `<name>.edges` + `<name>.labels` pair from a directory,
/// sorted by name.
pub fn load_catalog(dir: &Path) -> Result<Catalog> {
    let mut names: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("edges") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(DgwError::Config(format!(
            "no catalog fixtures (*.edges) found in {}",
            dir.display()
        )));
    }
    let mut catalog = Vec::new();
    for name in names {
        let labels = read_labels(&dir.join(format!("{name}.labels")))?;
        let file = std::fs::File::open(dir.join(format!("{name}.edges")))?;
        let (graph, _) = load_edge_list(
            std::io::BufReader::new(file),
            true,
            Some(labels.len()),
        )?;
        if graph.n() != labels.len() {
            return Err(DgwError::Format(format!(
                "catalog graph {name}: {} labels for {} nodes",
                labels.len(),
                graph.n()
            )));
        }
        catalog.push(CatalogEntry { name, graph, labels });
    }
    Ok(catalog)
}

fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let file = std::fs::File::open(path)?;
    let mut pairs: Vec<(usize, i64)> = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut f = trimmed.split_whitespace();
        let node: usize = f
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| DgwError::Parse { line: idx + 1, msg: "bad node id".into() })?;
        let label: i64 = f
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| DgwError::Parse { line: idx + 1, msg: "bad label".into() })?;
        pairs.push((node, label));
    }
    let n = pairs.len();
    let mut labels = vec![i64::MIN; n];
    for (node, label) in pairs {
        if node >= n || labels[node] != i64::MIN {
            return Err(DgwError::Format(
                "label file must cover node ids 0..n exactly once".into(),
            ));
        }
        labels[node] = label;
    }
    Ok(labels)
}

/// Write one catalog entry back out as a `.edges`/`.labels` pair.
pub fn write_catalog_entry(dir: &Path, entry: &CatalogEntry) -> Result<()> {
    let f = std::fs::File::create(dir.join(format!("{}.edges", entry.name)))?;
    write_edge_list(&entry.graph, std::io::BufWriter::new(f))?;
    let mut f = std::io::BufWriter::new(
        std::fs::File::create(dir.join(format!("{}.labels", entry.name)))?,
    );
    for (i, l) in entry.labels.iter().enumerate() {
        writeln!(f, "{i}\t{l}")?;
    }
    Ok(())
}

/// Parameters for composing catalog components onto a circular backbone.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CompositionSpec {
    pub repeats: usize,
    /// Noise edges attaching each instance to its own backbone segment.
    pub noise_edges_per_graph: usize,
    pub seed: u64,
    /// Backbone nodes reserved per instance.
    pub segment_len: usize,
    /// Add both directions on the backbone cycle.
    pub undirected_backbone: bool,
}

impl Default for CompositionSpec {
    fn default() -> Self {
        CompositionSpec {
            repeats: 1,
            noise_edges_per_graph: 0,
            seed: 0,
            segment_len: 5,
            undirected_backbone: false,
        }
    }
}

/// Compose `repeats` copies of every catalog component onto a directed
/// circular backbone, each instance attached to its own segment by
/// `noise_edges_per_graph` uniformly sampled edges (random direction and
/// endpoints, resampled on collision). Deterministic under the seed.
///
/// Layout: backbone nodes first, then instances in catalog order repeated;
/// identity labels are globally unique per catalog component and shared by
/// its repeats; backbone labels are `-1`.
pub fn compose(catalog: &Catalog, spec: &CompositionSpec) -> Result<LabeledGraph> {
    if spec.repeats == 0 || catalog.is_empty() {
        return Err(DgwError::Config("empty composition".into()));
    }
    if spec.noise_edges_per_graph > spec.segment_len {
        return Err(DgwError::Config(format!(
            "{} noise edges exceed the segment length {}",
            spec.noise_edges_per_graph, spec.segment_len
        )));
    }
    let n_instances = catalog.len() * spec.repeats;
    let n_backbone = spec.segment_len * n_instances;

    let mut label_offset = Vec::with_capacity(catalog.len());
    let mut acc = 0i64;
    for entry in catalog {
        label_offset.push(acc);
        acc += entry.labels.iter().copied().max().unwrap_or(0) + 1;
    }

    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for i in 0..n_backbone as u32 {
        let j = (i + 1) % n_backbone as u32;
        edges.push((i, j, 1.0));
        if spec.undirected_backbone {
            edges.push((j, i, 1.0));
        }
    }

    let mut identity = vec![-1i64; n_backbone];
    let mut component_tag = vec![-1i64; n_backbone];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut existing: HashSet<(u32, u32)> = edges.iter().map(|&(s, t, _)| (s, t)).collect();

    let mut offset = n_backbone as u32;
    let mut instance = 0usize;
    for (e_idx, entry) in catalog.iter().enumerate() {
        for _ in 0..spec.repeats {
            for (s, t, w) in entry.graph.edge_triples() {
                edges.push((offset + s, offset + t, w));
                existing.insert((offset + s, offset + t));
            }
            for &l in &entry.labels {
                identity.push(if l < 0 { -1 } else { label_offset[e_idx] + l });
                component_tag.push(instance as i64);
            }
            let seg_lo = (instance * spec.segment_len) as u32;
            let comp_n = entry.graph.n() as u32;
            for _ in 0..spec.noise_edges_per_graph {
                loop {
                    let comp_node = offset + rng.gen_range(0..comp_n);
                    let bb_node = seg_lo + rng.gen_range(0..spec.segment_len as u32);
                    let (s, t) = if rng.gen_bool(0.5) {
                        (comp_node, bb_node)
                    } else {
                        (bb_node, comp_node)
                    };
                    if existing.insert((s, t)) {
                        edges.push((s, t, 1.0));
                        break;
                    }
                }
            }
            offset += comp_n;
            instance += 1;
        }
    }

    let (graph, _) = Graph::from_edges(Some(offset as usize), &edges)?;
    Ok(LabeledGraph { graph, identity, component_tag })
}

/// Barabási–Albert preferential attachment. Each new node draws
/// `edges_per_node` distinct targets weighted by current degree and points
/// its new edges at them. Deterministic under the seed.
pub fn barabasi_albert(n: usize, edges_per_node: usize, seed: u64) -> Result<Graph> {
    if edges_per_node < 1 || n <= edges_per_node {
        return Err(DgwError::Config(format!(
            "need 1 ≤ edges_per_node < n, got m={edges_per_node}, n={n}"
        )));
    }
    let m = edges_per_node;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u32, u32, f64)> = Vec::with_capacity((n - m) * m);
    // degree-proportional sampling via the repeated-endpoints trick
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * (n - m) * m);
    for v in m..n {
        let mut targets: Vec<u32> = Vec::with_capacity(m);
        if v == m {
            targets.extend(0..m as u32);
        } else {
            let mut seen = HashSet::with_capacity(m);
            while targets.len() < m {
                let t = endpoints[rng.gen_range(0..endpoints.len())];
                if seen.insert(t) {
                    targets.push(t);
                }
            }
        }
        for &t in &targets {
            edges.push((v as u32, t, 1.0));
            endpoints.push(v as u32);
            endpoints.push(t);
        }
    }
    Ok(Graph::from_edges(Some(n), &edges)?.0)
}
