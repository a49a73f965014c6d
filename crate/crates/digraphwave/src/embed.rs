//! Hyperparameter derivation, per-node thresholding, ECF compression and
//! embedding post-processing.

use ndarray::Array2;

use crate::error::{DgwError, Result};
use crate::graph::Graph;
use crate::matexp::{self, Precision, ReachabilityBatch};

pub const THRESHOLD_FLOOR: f64 = 1e-6;
const DEFAULT_MEMORY_BUDGET: u64 = 1 << 30;

/// Full parameter set for one Digraphwave run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DigraphwaveConfig {
    /// Largest neighbourhood radius `R`; the timescale interval is `[1, R]`.
    pub radius: u32,
    /// Requested embedding dimension; the realized dimension is
    /// `k_f · k_tau · k_phi ≤ k_emb`.
    pub k_emb: usize,
    pub transposition: bool,
    pub aggregation: bool,
    pub k_tau: usize,
    pub k_phi: usize,
    pub taus: Vec<f64>,
    /// ECF sample points `(π, 2π, …, k_phi·π)`.
    pub t_samples: Vec<f64>,
    /// Per-node reachability thresholds `θ_j` for the normal orientation.
    pub thresholds: Vec<f64>,
    /// Taylor order `K`.
    pub order: usize,
    pub n_batch: usize,
    pub precision: Precision,
    /// Reuse the normal-orientation thresholds verbatim on the transposed
    /// pass instead of recomputing them from the transposed degrees.
    pub paper_exact_thresholds: bool,
}

impl DigraphwaveConfig {
    /// Enhancement factor `k_f = 2 · 2^{f_T} · 2^{f_A}`.
    pub fn k_f(&self) -> usize {
        2 * if self.transposition { 2 } else { 1 } * if self.aggregation { 2 } else { 1 }
    }

    /// Realized output dimension.
    pub fn dims(&self) -> usize {
        self.k_f() * self.k_tau * self.k_phi
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_batch_size(mut self, n_batch: usize) -> Self {
        self.n_batch = n_batch.max(1);
        self
    }

    pub fn with_paper_exact_thresholds(mut self, yes: bool) -> Self {
        self.paper_exact_thresholds = yes;
        self
    }
}

/// Derive `k_tau`, `k_phi`, timescales, ECF sample points, per-node
/// thresholds, Taylor order and batch size from `R`, `k_emb` and the
/// enhancement flags.
pub fn set_hyperparameters(
    g: &Graph,
    radius: u32,
    k_emb: usize,
    transposition: bool,
    aggregation: bool,
) -> Result<DigraphwaveConfig> {
    if radius < 1 {
        return Err(DgwError::Config("radius R must be at least 1".into()));
    }
    let k_f = 2 * if transposition { 2 } else { 1 } * if aggregation { 2 } else { 1 };
    if k_emb < k_f {
        return Err(DgwError::Config(format!(
            "k_emb = {k_emb} is smaller than the enhancement factor k_f = {k_f}"
        )));
    }
    let per_block = k_emb as f64 / k_f as f64;
    let k_tau = floor_cbrt(per_block).max(1);
    let k_phi = ((per_block / k_tau as f64).floor() as usize).max(1);
    let taus = linspace(1.0, radius as f64, k_tau);
    let t_samples: Vec<f64> =
        (1..=k_phi).map(|k| k as f64 * std::f64::consts::PI).collect();
    let degrees = g.degrees();
    let thresholds = node_thresholds(&degrees.out_unweighted, radius);
    let order = matexp::select_order(
        radius as f64,
        g.n(),
        Precision::Double,
        matexp::DEFAULT_ERROR_TARGET,
    )
    .order;
    let n_batch = batch_size_for_budget(DEFAULT_MEMORY_BUDGET, g.n(), k_tau);
    Ok(DigraphwaveConfig {
        radius,
        k_emb,
        transposition,
        aggregation,
        k_tau,
        k_phi,
        taus,
        t_samples,
        thresholds,
        order,
        n_batch,
        precision: Precision::Double,
        paper_exact_thresholds: false,
    })
}

/// Integer-corrected `⌊x^{1/3}⌋` (plain cbrt can land one below at exact cubes).
fn floor_cbrt(x: f64) -> usize {
    let mut t = x.cbrt().floor() as usize;
    while ((t + 1) * (t + 1) * (t + 1)) as f64 <= x {
        t += 1;
    }
    while t > 0 && (t * t * t) as f64 > x {
        t -= 1;
    }
    t
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|i| lo + step * i as f64).collect()
}

/// Columns per batch under a bytes budget: each in-flight column costs about
/// `(k_tau + 2)` dense f64 buffers. Batches are also kept small enough to
/// give every worker several chunks.
pub fn batch_size_for_budget(budget_bytes: u64, n: usize, k_tau: usize) -> usize {
    let per_column = ((k_tau + 2) * 8 * n.max(1)) as u64;
    let by_budget = ((budget_bytes / per_column.max(1)) as usize).clamp(1, 512);
    let by_parallelism = n.div_ceil(8 * rayon::current_num_threads().max(1)).max(1);
    by_budget.min(by_parallelism)
}

/// Per-node thresholds
/// `θ_j = max(min(e^{-R}, R e^{-R}/d_j, e^{-1}/(d_j β_j^{R-1} R!)), 10^{-6})`
/// with `β_j` the mean unweighted out-degree of all other nodes. Nodes with
/// `d_j = 0` keep only the degree-free term.
pub fn node_thresholds(out_degrees_unweighted: &[u64], radius: u32) -> Vec<f64> {
    let n = out_degrees_unweighted.len();
    let total: f64 = out_degrees_unweighted.iter().map(|&d| d as f64).sum();
    let r = radius as f64;
    let mut r_fact = 1.0f64;
    for i in 1..=radius as u64 {
        r_fact *= i as f64;
    }
    out_degrees_unweighted
        .iter()
        .map(|&du| {
            let d = du as f64;
            let beta = if n > 1 { (total - d) / (n as f64 - 1.0) } else { 1.0 };
            let mut theta = (-r).exp();
            if d > 0.0 {
                theta = theta.min(r * (-r).exp() / d);
                theta = theta.min((-1.0f64).exp() / (d * beta.powi(radius as i32 - 1) * r_fact));
            }
            theta.max(THRESHOLD_FLOOR)
        })
        .collect()
}

/// A thresholded reachability batch: entries strictly above the source
/// column's `θ_j`, everything else dropped to zero.
#[derive(Debug, Clone)]
pub struct ThresholdedBatch {
    pub node_ids: Vec<u32>,
    pub taus: Vec<f64>,
    pub n: usize,
    /// `columns[s][b]` lists the retained (row, value) pairs, rows ascending.
    pub columns: Vec<Vec<Vec<(u32, f64)>>>,
    /// Fraction of entries retained over the dense batch.
    pub retained_fraction: f64,
}

/// Apply per-source thresholds to a dense batch (strictly-greater comparison).
pub fn apply_threshold(batch: &ReachabilityBatch, thresholds: &[f64]) -> ThresholdedBatch {
    let n = batch.data[0].nrows();
    let mut retained = 0usize;
    let mut total = 0usize;
    let columns: Vec<Vec<Vec<(u32, f64)>>> = batch
        .data
        .iter()
        .map(|mat| {
            batch
                .node_ids
                .iter()
                .enumerate()
                .map(|(b, &j)| {
                    let theta = thresholds[j as usize];
                    let mut col = Vec::new();
                    for (i, &v) in mat.column(b).iter().enumerate() {
                        total += 1;
                        if v > theta {
                            retained += 1;
                            col.push((i as u32, v));
                        }
                    }
                    col
                })
                .collect()
        })
        .collect();
    ThresholdedBatch {
        node_ids: batch.node_ids.clone(),
        taus: batch.taus.clone(),
        n,
        columns,
        retained_fraction: if total == 0 { 0.0 } else { retained as f64 / total as f64 },
    }
}

/// ECF samples of one thresholded column at the configured `t` values:
/// `Re = (z_j + Σ cos(t·Ψ))/n`, `Im = (Σ sin(t·Ψ))/n`, where `z_j` counts the
/// zeroed entries (each contributing `cos 0 = 1`, `sin 0 = 0`).
///
/// Output layout is timescale-major, then `t`, with `Re`/`Im` interleaved.
pub fn ecf_compress(batch: &ThresholdedBatch, t_samples: &[f64]) -> Array2<f64> {
    let n_batch = batch.node_ids.len();
    let k_tau = batch.taus.len();
    let width = 2 * t_samples.len() * k_tau;
    let mut out = Array2::zeros((n_batch, width));
    for (s, per_tau) in batch.columns.iter().enumerate() {
        for (b, col) in per_tau.iter().enumerate() {
            ecf_row(
                col.iter().map(|&(_, v)| v),
                col.len(),
                batch.n,
                t_samples,
                out.row_mut(b)
                    .slice_mut(ndarray::s![2 * t_samples.len() * s..])
                    .as_slice_mut()
                    .expect("row slice is contiguous"),
            );
        }
    }
    out
}

/// Shared ECF kernel: writes `2·len(t_samples)` values into `dst`.
pub(crate) fn ecf_row(
    values: impl Iterator<Item = f64> + Clone,
    nnz: usize,
    n: usize,
    t_samples: &[f64],
    dst: &mut [f64],
) {
    let zeros = (n - nnz) as f64;
    let inv_n = 1.0 / n as f64;
    for (k, &t) in t_samples.iter().enumerate() {
        let mut re = zeros;
        let mut im = 0.0;
        for v in values.clone() {
            let (s, c) = (t * v).sin_cos();
            re += c;
            im += s;
        }
        dst[2 * k] = re * inv_n;
        dst[2 * k + 1] = im * inv_n;
    }
}

/// Which pass a column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TagOrientation {
    Normal,
    Transposed,
    Aggregated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Part {
    Re,
    Im,
}

/// Provenance of one embedding column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ColumnTag {
    pub orientation: TagOrientation,
    pub tau_index: u16,
    pub t_index: u16,
    pub part: Part,
}

/// Core tag layout for one pass: τ-major, t inner, Re/Im interleaved.
pub fn core_tags(orientation: TagOrientation, k_tau: usize, k_phi: usize) -> Vec<ColumnTag> {
    let mut tags = Vec::with_capacity(2 * k_tau * k_phi);
    for s in 0..k_tau {
        for k in 0..k_phi {
            for part in [Part::Re, Part::Im] {
                tags.push(ColumnTag {
                    orientation,
                    tau_index: s as u16,
                    t_index: k as u16,
                    part,
                });
            }
        }
    }
    tags
}

/// Final embedding matrix with per-column provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub data: Array2<f64>,
    pub tags: Vec<ColumnTag>,
}

impl EmbeddingMatrix {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }
}

/// Per-column mean/std pair recorded by [`standardize`].
pub type StandardizeSidecar = Vec<(f64, f64)>;

// Relative scale below which a column counts as constant; standardizing by a
// roundoff-sized std would amplify noise into O(1) garbage.
const STD_EPS: f64 = 1e-12;

/// Shift/scale every column to zero mean and unit (population) standard
/// deviation. Zero-variance columns map to all-zero; the returned sidecar
/// holds the original (mean, std) pairs.
pub fn standardize(emb: &EmbeddingMatrix) -> (EmbeddingMatrix, StandardizeSidecar) {
    let mut data = emb.data.clone();
    let n = data.nrows() as f64;
    let mut sidecar = Vec::with_capacity(data.ncols());
    for mut col in data.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std <= STD_EPS * mean.abs().max(1.0) {
            col.fill(0.0);
            sidecar.push((mean, 0.0));
        } else {
            col.mapv_inplace(|v| (v - mean) / std);
            sidecar.push((mean, std));
        }
    }
    (EmbeddingMatrix { data, tags: emb.tags.clone() }, sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::matexp::{expm_batch, taylor_coefficients};

    fn line_graph(n: usize) -> Graph {
        let edges: Vec<(u32, u32, f64)> =
            (0..n - 1).map(|i| (i as u32, i as u32 + 1, 1.0)).collect();
        Graph::from_edges(None, &edges).unwrap().0
    }

    #[test]
    fn table_rows_both_enhancements() {
        let g = line_graph(10);
        for &(k_emb, k_tau, k_phi, total) in &[
            (32usize, 1usize, 4usize, 32usize),
            (64, 2, 4, 64),
            (128, 2, 8, 128),
            (256, 3, 10, 240),
            (512, 4, 16, 512),
        ] {
            let c = set_hyperparameters(&g, 3, k_emb, true, true).unwrap();
            assert_eq!((c.k_tau, c.k_phi), (k_tau, k_phi), "k_emb={k_emb}");
            assert_eq!(c.dims(), total, "k_emb={k_emb}");
        }
    }

    #[test]
    fn dims_without_enhancements() {
        let g = line_graph(10);
        let c = set_hyperparameters(&g, 3, 32, false, false).unwrap();
        assert_eq!(c.k_f(), 2);
        assert_eq!((c.k_tau, c.k_phi), (2, 8));
        assert_eq!(c.dims(), 32);
    }

    #[test]
    fn k_emb_below_k_f_is_an_error() {
        let g = line_graph(4);
        assert!(set_hyperparameters(&g, 3, 4, true, true).is_err());
    }

    #[test]
    fn timescales_and_samples() {
        let g = line_graph(10);
        let c = set_hyperparameters(&g, 3, 128, true, true).unwrap();
        assert_eq!(c.taus, vec![1.0, 3.0]);
        let pi = std::f64::consts::PI;
        assert_eq!(c.t_samples.len(), 8);
        for (k, &t) in c.t_samples.iter().enumerate() {
            assert!((t - (k + 1) as f64 * pi).abs() < 1e-15);
        }
    }

    #[test]
    fn threshold_formula_cases() {
        // R=2, d=3, β=2 via a 4-node setting: degrees [3, 2, 2, 2]
        let theta = node_thresholds(&[3, 2, 2, 2], 2);
        let expect = (-1.0f64).exp() / (3.0 * 2.0 * 2.0);
        assert!((theta[0] - expect).abs() < 1e-15, "{}", theta[0]);

        // huge degree hits the floor
        let theta = node_thresholds(&[1_000_000, 10, 10, 10], 3);
        assert_eq!(theta[0], THRESHOLD_FLOOR);

        // R=1, d=1, β=1 degenerates to e^{-1}
        let theta = node_thresholds(&[1, 1], 1);
        assert!((theta[0] - (-1.0f64).exp()).abs() < 1e-15);

        // sinks keep only the degree-free term
        let theta = node_thresholds(&[0, 5], 2);
        assert!((theta[0] - (-2.0f64).exp()).abs() < 1e-15);

        // single node: β defaults to 1
        let theta = node_thresholds(&[0], 2);
        assert!((theta[0] - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn threshold_filters_strictly() {
        let g = line_graph(4);
        let op = g.build_operator();
        let coeffs = taylor_coefficients(&[1e-9], 20);
        let batch = expm_batch(&op, &[1], &coeffs).unwrap();
        // identity-like column keeps only the 1.0 self entry
        let t = apply_threshold(&batch, &[0.5; 4]);
        assert_eq!(t.columns[0][0].len(), 1);
        assert_eq!(t.columns[0][0][0].0, 1);

        // all-below threshold empties the column
        let t = apply_threshold(&batch, &[2.0; 4]);
        assert!(t.columns[0][0].is_empty());
    }

    #[test]
    fn threshold_matches_dense_filter_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 100;
        let mut edges = Vec::new();
        for _ in 0..400 {
            let s = rng.gen_range(0..n as u32);
            let t = rng.gen_range(0..n as u32);
            if s != t {
                edges.push((s, t, rng.gen_range(0.1..2.0)));
            }
        }
        let (g, _) = Graph::from_edges(Some(n), &edges).unwrap();
        let op = g.build_operator();
        let coeffs = taylor_coefficients(&[1.0, 2.0], 40);
        let ids: Vec<u32> = (0..20).map(|_| rng.gen_range(0..n as u32)).collect();
        let ids: Vec<u32> = {
            let mut s = ids;
            s.sort_unstable();
            s.dedup();
            s
        };
        let batch = expm_batch(&op, &ids, &coeffs).unwrap();
        let thetas = node_thresholds(&g.degrees().out_unweighted, 3);
        let t = apply_threshold(&batch, &thetas);
        for (s, mat) in batch.data.iter().enumerate() {
            for (b, &j) in ids.iter().enumerate() {
                let expect: Vec<(u32, f64)> = mat
                    .column(b)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v > thetas[j as usize])
                    .map(|(i, &v)| (i as u32, v))
                    .collect();
                assert_eq!(t.columns[s][b], expect);
            }
        }
    }

    #[test]
    fn ecf_one_hot_closed_form() {
        let batch = ThresholdedBatch {
            node_ids: vec![0],
            taus: vec![1.0],
            n: 3,
            columns: vec![vec![vec![(0, 1.0)]]],
            retained_fraction: 1.0 / 3.0,
        };
        let pi = std::f64::consts::PI;
        let block = ecf_compress(&batch, &[pi]);
        // Re = (2 + cos π)/3 = 1/3, Im = sin π / 3 = 0
        assert!((block[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!(block[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn ecf_at_t_zero_is_one() {
        // hypothetical t = 0 gives φ = 1, the reason t starts at π
        let batch = ThresholdedBatch {
            node_ids: vec![0],
            taus: vec![1.0],
            n: 5,
            columns: vec![vec![vec![(0, 0.3), (2, 0.7)]]],
            retained_fraction: 0.4,
        };
        let block = ecf_compress(&batch, &[0.0]);
        assert!((block[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(block[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn ecf_magnitude_bounded() {
        let batch = ThresholdedBatch {
            node_ids: vec![0],
            taus: vec![1.0],
            n: 4,
            columns: vec![vec![vec![(0, 0.9), (1, 0.4), (3, 0.1)]]],
            retained_fraction: 0.75,
        };
        let pi = std::f64::consts::PI;
        let block = ecf_compress(&batch, &[pi, 2.0 * pi, 3.0 * pi]);
        for k in 0..3 {
            let (re, im) = (block[(0, 2 * k)], block[(0, 2 * k + 1)]);
            assert!((re * re + im * im).sqrt() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn standardize_cases() {
        let data = ndarray::arr2(&[[0.0, 5.0], [2.0, 5.0]]);
        let emb = EmbeddingMatrix {
            data,
            tags: core_tags(TagOrientation::Normal, 1, 1),
        };
        let (s, sidecar) = standardize(&emb);
        assert!((s.data[(0, 0)] + 1.0).abs() < 1e-15);
        assert!((s.data[(1, 0)] - 1.0).abs() < 1e-15);
        // constant column becomes zeros with std recorded as 0
        assert_eq!(s.data.column(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(sidecar[1], (5.0, 0.0));

        // idempotent up to roundoff
        let (s2, _) = standardize(&s);
        for (a, b) in s.data.iter().zip(s2.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
