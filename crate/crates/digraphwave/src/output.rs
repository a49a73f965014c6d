//! Embedding output formats (CSV and the DGWE binary), run manifests, and the
//! end-to-end `embed` runner shared by the CLI and the test suites.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::embed::{
    set_hyperparameters, standardize, ColumnTag, DigraphwaveConfig, EmbeddingMatrix, Part,
    TagOrientation,
};
use crate::error::{DgwError, Result};
use crate::graph::{load_edge_list, read_graph_cache, Graph};
use crate::matexp::{select_order, Precision};
use crate::pipeline::digraphwave;

/// `node_id,c0,...,ck` rows. Values print in Rust's shortest round-trip form,
/// so equal bit patterns produce byte-identical files.
pub fn write_embedding_csv<W: Write>(emb: &EmbeddingMatrix, mut w: W) -> Result<()> {
    write!(w, "node_id")?;
    for c in 0..emb.cols() {
        write!(w, ",c{c}")?;
    }
    writeln!(w)?;
    for (i, row) in emb.data.rows().into_iter().enumerate() {
        write!(w, "{i}")?;
        for v in row.iter() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

const EMB_MAGIC: &[u8; 4] = b"DGWE";
const EMB_VERSION: u16 = 1;

/// Binary embedding format: magic "DGWE", version u16, n u64, cols u32,
/// precision u8, column-tag table, then row-major values little-endian.
pub fn write_embedding_binary<W: Write>(
    emb: &EmbeddingMatrix,
    precision: Precision,
    mut w: W,
) -> Result<()> {
    w.write_all(EMB_MAGIC)?;
    w.write_all(&EMB_VERSION.to_le_bytes())?;
    w.write_all(&(emb.rows() as u64).to_le_bytes())?;
    w.write_all(&(emb.cols() as u32).to_le_bytes())?;
    w.write_all(&[match precision {
        Precision::Double => 0u8,
        Precision::Single => 1u8,
    }])?;
    for tag in &emb.tags {
        w.write_all(&[
            match tag.orientation {
                TagOrientation::Normal => 0u8,
                TagOrientation::Transposed => 1,
                TagOrientation::Aggregated => 2,
            },
        ])?;
        w.write_all(&tag.tau_index.to_le_bytes())?;
        w.write_all(&tag.t_index.to_le_bytes())?;
        w.write_all(&[match tag.part {
            Part::Re => 0u8,
            Part::Im => 1,
        }])?;
    }
    for v in emb.data.iter() {
        match precision {
            Precision::Double => w.write_all(&v.to_le_bytes())?,
            Precision::Single => w.write_all(&(*v as f32).to_le_bytes())?,
        }
    }
    Ok(())
}

pub fn read_embedding_binary<R: Read>(mut r: R) -> Result<(EmbeddingMatrix, Precision)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != EMB_MAGIC {
        return Err(DgwError::Format("bad magic, not a DGWE file".into()));
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    if u16::from_le_bytes(b2) != EMB_VERSION {
        return Err(DgwError::Format("unsupported DGWE version".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let cols = u32::from_le_bytes(b4) as usize;
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b1)?;
    let precision = match b1[0] {
        0 => Precision::Double,
        1 => Precision::Single,
        x => return Err(DgwError::Format(format!("bad precision byte {x}"))),
    };
    let mut tags = Vec::with_capacity(cols);
    for _ in 0..cols {
        let mut t = [0u8; 6];
        r.read_exact(&mut t)?;
        tags.push(ColumnTag {
            orientation: match t[0] {
                0 => TagOrientation::Normal,
                1 => TagOrientation::Transposed,
                2 => TagOrientation::Aggregated,
                x => return Err(DgwError::Format(format!("bad orientation byte {x}"))),
            },
            tau_index: u16::from_le_bytes([t[1], t[2]]),
            t_index: u16::from_le_bytes([t[3], t[4]]),
            part: match t[5] {
                0 => Part::Re,
                1 => Part::Im,
                x => return Err(DgwError::Format(format!("bad part byte {x}"))),
            },
        });
    }
    let mut data = ndarray::Array2::<f64>::zeros((n, cols));
    for v in data.iter_mut() {
        *v = match precision {
            Precision::Double => {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                f64::from_le_bytes(b)
            }
            Precision::Single => {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                f32::from_le_bytes(b) as f64
            }
        };
    }
    Ok((EmbeddingMatrix { data, tags }, precision))
}

/// Reproducibility record written next to every command output.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub input_hashes: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub version: String,
    pub wall_time_s: f64,
    pub peak_mem_estimate_bytes: u64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            flags: BTreeMap::new(),
            seeds: Vec::new(),
            input_hashes: BTreeMap::new(),
            output_hashes: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            peak_mem_estimate_bytes: 0,
        }
    }

    pub fn flag(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn hash_input(&mut self, path: &Path) -> Result<()> {
        self.input_hashes
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn hash_output(&mut self, path: &Path) -> Result<()> {
        self.output_hashes
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }

    /// Recompute output hashes and report files whose contents changed.
    pub fn verify_outputs(&self) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for (path, recorded) in &self.output_hashes {
            let actual = sha256_file(Path::new(path))?;
            if &actual != recorded {
                bad.push(path.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut f, &mut hasher)?;
    Ok(hex_string(&hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex_string(&Sha256::digest(bytes))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Output format for embedding files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Csv,
    Binary,
}

/// Everything the `embed` command needs.
#[derive(Debug, Clone)]
pub struct EmbedParams {
    pub input: PathBuf,
    pub weighted: bool,
    pub num_nodes: Option<usize>,
    pub radius: u32,
    pub k_emb: usize,
    pub transposition: bool,
    pub aggregation: bool,
    pub batch_size: Option<usize>,
    pub order: Option<usize>,
    pub error_target: f64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub format: EmbeddingFormat,
    pub standardize: bool,
    pub paper_exact_thresholds: bool,
}

impl EmbedParams {
    pub fn new(input: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        EmbedParams {
            input: input.into(),
            weighted: false,
            num_nodes: None,
            radius: 3,
            k_emb: 128,
            transposition: true,
            aggregation: true,
            batch_size: None,
            order: None,
            error_target: crate::matexp::DEFAULT_ERROR_TARGET,
            threads: None,
            out: out.into(),
            format: EmbeddingFormat::Csv,
            standardize: true,
            paper_exact_thresholds: false,
        }
    }
}

/// Load a graph file; DGWG caches are recognized by their magic bytes.
pub fn load_graph_file(path: &Path, weighted: bool, num_nodes: Option<usize>) -> Result<Graph> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    let is_cache = match f.read(&mut magic) {
        Ok(4) => &magic == b"DGWG",
        _ => false,
    };
    drop(f);
    if is_cache {
        let f = std::fs::File::open(path)?;
        read_graph_cache(std::io::BufReader::new(f))
    } else {
        let f = std::fs::File::open(path)?;
        Ok(load_edge_list(std::io::BufReader::new(f), weighted, num_nodes)?.0)
    }
}

fn build_config(g: &Graph, p: &EmbedParams) -> Result<DigraphwaveConfig> {
    let mut config = set_hyperparameters(g, p.radius, p.k_emb, p.transposition, p.aggregation)?;
    config.order = match p.order {
        Some(k) => k,
        None => select_order(p.radius as f64, g.n(), Precision::Double, p.error_target).order,
    };
    if let Some(nb) = p.batch_size {
        config.n_batch = nb.max(1);
    }
    config.paper_exact_thresholds = p.paper_exact_thresholds;
    Ok(config)
}

/// Run the full embed pipeline on an input graph file and write the
/// embedding, a config-echo sidecar and a run manifest.
pub fn run_embed(p: &EmbedParams) -> Result<RunManifest> {
    let t0 = Instant::now();
    let g = load_graph_file(&p.input, p.weighted, p.num_nodes)?;
    let config = build_config(&g, p)?;

    let emb = match p.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| DgwError::Config(format!("thread pool: {e}")))?;
            pool.install(|| digraphwave(&g, &config))?
        }
        None => digraphwave(&g, &config)?,
    };
    let (emb, std_sidecar) = if p.standardize {
        let (e, s) = standardize(&emb);
        (e, Some(s))
    } else {
        (emb, None)
    };

    let out_file = std::fs::File::create(&p.out)?;
    let mut w = std::io::BufWriter::new(out_file);
    match p.format {
        EmbeddingFormat::Csv => write_embedding_csv(&emb, &mut w)?,
        EmbeddingFormat::Binary => write_embedding_binary(&emb, config.precision, &mut w)?,
    }
    w.flush()?;

    let thresholds_bytes: Vec<u8> = config
        .thresholds
        .iter()
        .flat_map(|t| t.to_le_bytes())
        .collect();
    let sidecar = serde_json::json!({
        "radius": config.radius,
        "k_emb": config.k_emb,
        "transposition": config.transposition,
        "aggregation": config.aggregation,
        "k_tau": config.k_tau,
        "k_phi": config.k_phi,
        "dims": config.dims(),
        "order": config.order,
        "n_batch": config.n_batch,
        "taus": config.taus,
        "thresholds_sha256": sha256_bytes(&thresholds_bytes),
        "paper_exact_thresholds": config.paper_exact_thresholds,
        "standardized": p.standardize,
        "standardize_sidecar": std_sidecar,
        "seed": 0u64,
    });
    let sidecar_path = sidecar_path(&p.out);
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)?;

    let mut manifest = RunManifest::new("embed");
    manifest
        .flag("input", p.input.display())
        .flag("weighted", p.weighted)
        .flag("radius", p.radius)
        .flag("dim", p.k_emb)
        .flag("transposition", p.transposition)
        .flag("aggregation", p.aggregation)
        .flag("order", config.order)
        .flag("batch_size", config.n_batch)
        .flag(
            "threads",
            p.threads
                .map(|t| t.to_string())
                .unwrap_or_else(|| "default".into()),
        )
        .flag(
            "format",
            match p.format {
                EmbeddingFormat::Csv => "csv",
                EmbeddingFormat::Binary => "bin",
            },
        )
        .flag("standardize", p.standardize)
        .flag("paper_exact_thresholds", p.paper_exact_thresholds)
        .flag("out", p.out.display());
    manifest.hash_input(&p.input)?;
    manifest.hash_output(&p.out)?;
    manifest.hash_output(&sidecar_path)?;
    let workers = p.threads.unwrap_or_else(rayon::current_num_threads);
    manifest.peak_mem_estimate_bytes = estimate_peak_memory(
        g.n(),
        g.m(),
        config.k_tau,
        config.dims(),
        config.n_batch,
        workers,
    );
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    manifest.write(&manifest_path(&p.out))?;
    Ok(manifest)
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    with_suffix(out, ".sidecar.json")
}

pub fn manifest_path(out: &Path) -> PathBuf {
    with_suffix(out, ".manifest.json")
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Rough upper estimate of resident memory for a run.
pub fn estimate_peak_memory(
    n: usize,
    m: usize,
    k_tau: usize,
    dims: usize,
    _n_batch: usize,
    workers: usize,
) -> u64 {
    let graph = (m * 12 + (n + 1) * 8) as u64 * 2; // graph + operator, both orientations
    let engines = (workers * (k_tau + 2) * 8 * n) as u64;
    let output = (n * dims * 8) as u64 * 2; // embedding + aggregation scratch
    graph + engines + output
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::core_tags;

    fn small_emb() -> EmbeddingMatrix {
        EmbeddingMatrix {
            data: ndarray::arr2(&[[0.125, -1.5], [3.0, 0.0625]]),
            tags: core_tags(TagOrientation::Normal, 1, 1),
        }
    }

    #[test]
    fn csv_shape_and_header() {
        let mut buf = Vec::new();
        write_embedding_csv(&small_emb(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("node_id,c0,c1"));
        assert_eq!(lines.next(), Some("0,0.125,-1.5"));
        assert_eq!(lines.next(), Some("1,3,0.0625"));
    }

    #[test]
    fn binary_round_trip_double() {
        let emb = small_emb();
        let mut buf = Vec::new();
        write_embedding_binary(&emb, Precision::Double, &mut buf).unwrap();
        let (back, prec) = read_embedding_binary(buf.as_slice()).unwrap();
        assert_eq!(prec, Precision::Double);
        assert_eq!(back.data, emb.data);
        assert_eq!(back.tags, emb.tags);
    }

    #[test]
    fn binary_single_precision_storage() {
        let emb = small_emb();
        let mut buf = Vec::new();
        write_embedding_binary(&emb, Precision::Single, &mut buf).unwrap();
        let (back, prec) = read_embedding_binary(buf.as_slice()).unwrap();
        assert_eq!(prec, Precision::Single);
        for (a, b) in emb.data.iter().zip(back.data.iter()) {
            assert!((a - b).abs() <= a.abs() * 1e-6);
        }
    }

    #[test]
    fn manifest_round_trip_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        std::fs::write(&out, "hello").unwrap();
        let mut m = RunManifest::new("embed");
        m.flag("radius", 3);
        m.hash_output(&out).unwrap();
        let mpath = dir.path().join("x.manifest.json");
        m.write(&mpath).unwrap();
        let m2 = RunManifest::read(&mpath).unwrap();
        assert_eq!(m2.command, "embed");
        assert!(m2.verify_outputs().unwrap().is_empty());

        std::fs::write(&out, "corrupted").unwrap();
        assert_eq!(m2.verify_outputs().unwrap().len(), 1);
    }
}
