//! Graph ingestion, validation, degrees and diffusion-operator construction.
//!
//! Graphs are stored immutably in a compressed column layout keyed on the
//! diffusion source: all out-edges of a node are contiguous and sorted by
//! target. This is exactly the column layout of the normalized adjacency
//! `α = A D*⁻¹`, so the operator's sparse-dense products stream contiguously.

use std::io::{BufRead, Read, Write};

use crate::error::{DgwError, Result};

/// Direction tag. `Transposed` marks a graph produced by [`Graph::transpose`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Orientation {
    Normal,
    Transposed,
}

impl Orientation {
    fn flipped(self) -> Self {
        match self {
            Orientation::Normal => Orientation::Transposed,
            Orientation::Transposed => Orientation::Normal,
        }
    }
}

/// Immutable sparse directed weighted graph.
///
/// `col_ptr[j]..col_ptr[j+1]` indexes the out-edges of node `j` in `targets`
/// and `weights`, with targets sorted ascending within each node.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    m: usize,
    col_ptr: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    orientation: Orientation,
}

/// Counters reported by [`load_edge_list`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_merged: usize,
}

impl Graph {
    /// Build a graph from an edge triple list. Self-loops are dropped and
    /// duplicate edges merged by weight summation; counts go to the report.
    pub fn from_edges(
        explicit_n: Option<usize>,
        edges: &[(u32, u32, f64)],
    ) -> Result<(Self, LoadReport)> {
        let mut report = LoadReport::default();
        let mut max_idx: u64 = 0;
        for &(s, t, w) in edges {
            if w <= 0.0 || !w.is_finite() {
                return Err(DgwError::Validation(format!(
                    "edge {s}->{t} has nonpositive or nonfinite weight {w}"
                )));
            }
            max_idx = max_idx.max(s as u64).max(t as u64);
        }
        let n_min = if edges.is_empty() { 0 } else { max_idx as usize + 1 };
        let n = match explicit_n {
            Some(n) => {
                if n < n_min {
                    return Err(DgwError::Validation(format!(
                        "explicit node count {n} smaller than max index + 1 = {n_min}"
                    )));
                }
                n
            }
            None => n_min,
        };

        let mut kept: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len());
        for &(s, t, w) in edges {
            if s == t {
                report.self_loops_dropped += 1;
            } else {
                kept.push((s, t, w));
            }
        }
        kept.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(kept.len());
        for (s, t, w) in kept {
            match merged.last_mut() {
                Some((ls, lt, lw)) if *ls == s && *lt == t => {
                    *lw += w;
                    report.duplicate_edges_merged += 1;
                }
                _ => merged.push((s, t, w)),
            }
        }

        let mut col_ptr = vec![0usize; n + 1];
        for &(s, _, _) in &merged {
            col_ptr[s as usize + 1] += 1;
        }
        for j in 0..n {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut targets = Vec::with_capacity(merged.len());
        let mut weights = Vec::with_capacity(merged.len());
        for (_, t, w) in &merged {
            targets.push(*t);
            weights.push(*w);
        }
        let m = targets.len();
        Ok((
            Graph { n, m, col_ptr, targets, weights, orientation: Orientation::Normal },
            report,
        ))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Out-edges of `j` as parallel (targets, weights) slices.
    pub fn out_edges(&self, j: usize) -> (&[u32], &[f64]) {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        (&self.targets[lo..hi], &self.weights[lo..hi])
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// All edges as (src, dst, weight) triples in storage order.
    pub fn edge_triples(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::with_capacity(self.m);
        for j in 0..self.n {
            let (ts, ws) = self.out_edges(j);
            for (t, w) in ts.iter().zip(ws) {
                out.push((j as u32, *t, *w));
            }
        }
        out
    }

    /// Reverse every edge. The orientation tag flips; applying transpose twice
    /// returns a graph structurally equal to the original.
    pub fn transpose(&self) -> Graph {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &t in &self.targets {
            counts[t as usize + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let mut col_ptr = counts.clone();
        let mut targets = vec![0u32; self.m];
        let mut weights = vec![0f64; self.m];
        // source-ascending scan keeps targets sorted within each new column
        for j in 0..n {
            let (ts, ws) = self.out_edges(j);
            for (t, w) in ts.iter().zip(ws) {
                let pos = col_ptr[*t as usize];
                col_ptr[*t as usize] += 1;
                targets[pos] = j as u32;
                weights[pos] = *w;
            }
        }
        Graph {
            n,
            m: self.m,
            col_ptr: counts,
            targets,
            weights,
            orientation: self.orientation.flipped(),
        }
    }

    /// Relabel nodes by `perm` (old index -> new index). Used by the
    /// alignment harness and permutation-equivariance tests.
    pub fn relabel(&self, perm: &[u32]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(DgwError::Validation("permutation length mismatch".into()));
        }
        let edges: Vec<(u32, u32, f64)> = self
            .edge_triples()
            .into_iter()
            .map(|(s, t, w)| (perm[s as usize], perm[t as usize], w))
            .collect();
        let (g, _) = Graph::from_edges(Some(self.n), &edges)?;
        Ok(g)
    }

    /// Per-node weighted/unweighted out- and in-degrees.
    pub fn degrees(&self) -> DegreeVectors {
        let n = self.n;
        let mut out_weighted = vec![0f64; n];
        let mut out_unweighted = vec![0u64; n];
        let mut in_weighted = vec![0f64; n];
        let mut in_unweighted = vec![0u64; n];
        for j in 0..n {
            let (ts, ws) = self.out_edges(j);
            out_unweighted[j] = ts.len() as u64;
            for (t, w) in ts.iter().zip(ws) {
                out_weighted[j] += w;
                in_weighted[*t as usize] += w;
                in_unweighted[*t as usize] += 1;
            }
        }
        DegreeVectors { out_weighted, out_unweighted, in_weighted, in_unweighted }
    }

    /// Normalized adjacency `α = A D*⁻¹` plus the sink mask (zero diagonal of I*).
    pub fn build_operator(&self) -> DiffusionOperator {
        let n = self.n;
        let mut values = Vec::with_capacity(self.m);
        let mut sink_mask = vec![false; n];
        for j in 0..n {
            let (_, ws) = self.out_edges(j);
            let d: f64 = ws.iter().sum();
            if ws.is_empty() {
                sink_mask[j] = true;
            } else {
                for w in ws {
                    values.push(w / d);
                }
            }
        }
        DiffusionOperator {
            n,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.targets.clone(),
            values,
            sink_mask,
        }
    }

    /// Joint neighbourhoods `N(j) = N_out(j) ∪ N_in(j)`, each sorted ascending.
    pub fn joint_neighborhoods(&self) -> Vec<Vec<u32>> {
        let mut nbr: Vec<Vec<u32>> = vec![Vec::new(); self.n];
        for j in 0..self.n {
            let (ts, _) = self.out_edges(j);
            for &t in ts {
                nbr[j].push(t);
                nbr[t as usize].push(j as u32);
            }
        }
        for l in nbr.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        nbr
    }
}

/// Per-node degree sums. `out_weighted` is the diagonal of the weighted
/// out-degree matrix; `out_unweighted` the plain out-edge counts used by the
/// threshold heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVectors {
    pub out_weighted: Vec<f64>,
    pub out_unweighted: Vec<u64>,
    pub in_weighted: Vec<f64>,
    pub in_unweighted: Vec<u64>,
}

/// The out-degree normalized Laplacian `𝓛 = I* − α` as a sparse linear map.
///
/// Only `α` is materialized (column-compressed); the sink mask carries the
/// zero diagonal of `I*`. Columns of `α` over non-sink nodes are stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
    sink_mask: Vec<bool>,
}

impl DiffusionOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn sink_mask(&self) -> &[bool] {
        &self.sink_mask
    }

    pub fn is_sink(&self, j: usize) -> bool {
        self.sink_mask[j]
    }

    /// Entries of column `j` of `α` as (row, value) pairs, rows ascending.
    pub fn alpha_column(&self, j: usize) -> (&[u32], &[f64]) {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    /// `y = α x`.
    pub fn apply_alpha(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.alpha_column(j);
            for (r, v) in rows.iter().zip(vals) {
                y[*r as usize] += v * xj;
            }
        }
    }

    /// `y = (𝓛 − I) x = −α x − s ⊙ x` where `s` is the sink mask.
    pub fn apply_l_minus_i(&self, x: &[f64], y: &mut [f64]) {
        self.apply_alpha(x, y);
        for i in 0..self.n {
            y[i] = -y[i];
            if self.sink_mask[i] {
                y[i] -= x[i];
            }
        }
    }

    /// Dense `𝓛` for small-graph oracles and debugging.
    pub fn dense_laplacian(&self) -> ndarray::Array2<f64> {
        let mut l = ndarray::Array2::<f64>::zeros((self.n, self.n));
        for j in 0..self.n {
            if !self.sink_mask[j] {
                l[(j, j)] = 1.0;
            }
            let (rows, vals) = self.alpha_column(j);
            for (r, v) in rows.iter().zip(vals) {
                l[(*r as usize, j)] -= v;
            }
        }
        l
    }
}

/// Parse a TSV edge list: `src<TAB>dst[<TAB>weight]`, `#` comments skipped.
///
/// Node count is `max index + 1` unless `explicit_n` says otherwise; duplicate
/// edges are merged by weight summation; self-loops dropped with a count.
pub fn load_edge_list<R: BufRead>(
    reader: R,
    weighted: bool,
    explicit_n: Option<usize>,
) -> Result<(Graph, LoadReport)> {
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let src = parse_index(fields.next(), line_no, "source")?;
        let dst = parse_index(fields.next(), line_no, "target")?;
        let w = if weighted {
            match fields.next() {
                Some(f) => f.parse::<f64>().map_err(|_| DgwError::Parse {
                    line: line_no,
                    msg: format!("bad weight '{f}'"),
                })?,
                None => 1.0,
            }
        } else {
            1.0
        };
        if w <= 0.0 || !w.is_finite() {
            return Err(DgwError::Validation(format!(
                "line {line_no}: nonpositive weight {w}"
            )));
        }
        edges.push((src, dst, w));
    }
    Graph::from_edges(explicit_n, &edges)
}

fn parse_index(field: Option<&str>, line: usize, what: &str) -> Result<u32> {
    let f = field.ok_or_else(|| DgwError::Parse {
        line,
        msg: format!("missing {what} field"),
    })?;
    f.parse::<u32>().map_err(|_| DgwError::Parse {
        line,
        msg: format!("bad {what} index '{f}'"),
    })
}

/// Write an edge-list TSV (weights included when any differ from 1).
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    let weighted = g.weights.iter().any(|&x| x != 1.0);
    for (s, t, wt) in g.edge_triples() {
        if weighted {
            writeln!(w, "{s}\t{t}\t{wt}")?;
        } else {
            writeln!(w, "{s}\t{t}")?;
        }
    }
    Ok(())
}

const GRAPH_MAGIC: &[u8; 4] = b"DGWG";
const GRAPH_VERSION: u16 = 1;

/// Binary graph cache: magic "DGWG", version u16, n u64, m u64, then the
/// compressed index and weight arrays, little-endian. The cache stores the
/// adjacency as-is; the runtime orientation tag is not persisted.
pub fn write_graph_cache<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&GRAPH_VERSION.to_le_bytes())?;
    w.write_all(&(g.n as u64).to_le_bytes())?;
    w.write_all(&(g.m as u64).to_le_bytes())?;
    for p in &g.col_ptr {
        w.write_all(&(*p as u64).to_le_bytes())?;
    }
    for t in &g.targets {
        w.write_all(&t.to_le_bytes())?;
    }
    for wt in &g.weights {
        w.write_all(&wt.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_graph_cache<R: Read>(mut r: R) -> Result<Graph> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GRAPH_MAGIC {
        return Err(DgwError::Format("bad magic, not a DGWG file".into()));
    }
    let version = read_u16(&mut r)?;
    if version != GRAPH_VERSION {
        return Err(DgwError::Format(format!("unsupported DGWG version {version}")));
    }
    let n = read_u64(&mut r)? as usize;
    let m = read_u64(&mut r)? as usize;
    let mut col_ptr = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        col_ptr.push(read_u64(&mut r)? as usize);
    }
    let mut targets = Vec::with_capacity(m);
    for _ in 0..m {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        targets.push(u32::from_le_bytes(b));
    }
    let mut weights = Vec::with_capacity(m);
    for _ in 0..m {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        weights.push(f64::from_le_bytes(b));
    }
    if col_ptr.len() != n + 1 || *col_ptr.last().unwrap_or(&0) != m {
        return Err(DgwError::Format("inconsistent DGWG index arrays".into()));
    }
    for j in 0..n {
        if col_ptr[j] > col_ptr[j + 1] {
            return Err(DgwError::Format("non-monotone DGWG column pointers".into()));
        }
    }
    Ok(Graph { n, m, col_ptr, targets, weights, orientation: Orientation::Normal })
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
