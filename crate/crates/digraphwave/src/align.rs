//! Network-alignment evaluation: greedy nearest-neighbour matching between
//! two embedding matrices, top-k accuracy, and noise-edge injection.

use ndarray::ArrayView2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embed::{set_hyperparameters, standardize, EmbeddingMatrix};
use crate::error::{DgwError, Result};
use crate::graph::Graph;
use crate::pipeline::digraphwave;

/// A matching problem between two consistently standardized embedding sets.
/// `emb1` belongs to the larger graph; `ground_truth[v2]` is the true node in
/// graph 1 for each row of `emb2`.
pub struct AlignmentTask<'a> {
    pub emb1: ArrayView2<'a, f64>,
    pub emb2: ArrayView2<'a, f64>,
    pub ground_truth: &'a [u32],
    pub k: usize,
}

/// Exact k-nearest-neighbour candidates (Euclidean) for every row of `emb2`,
/// ties broken by lower node id. Uses a KD-tree whose results are identical
/// to exhaustive search.
pub fn greedy_match(task: &AlignmentTask) -> Result<Vec<Vec<u32>>> {
    check_dims(task)?;
    let tree = KdTree::build(task.emb1);
    let k = task.k.min(task.emb1.nrows());
    Ok((0..task.emb2.nrows())
        .into_par_iter()
        .map(|q| {
            let row = task.emb2.row(q);
            let query = row.as_slice().expect("contiguous row");
            tree.nearest(query, k)
        })
        .collect())
}

/// Brute-force reference path; candidate lists must equal [`greedy_match`].
pub fn greedy_match_exhaustive(task: &AlignmentTask) -> Result<Vec<Vec<u32>>> {
    check_dims(task)?;
    let k = task.k.min(task.emb1.nrows());
    Ok((0..task.emb2.nrows())
        .into_par_iter()
        .map(|q| {
            let qrow = task.emb2.row(q);
            let mut dists: Vec<(f64, u32)> = (0..task.emb1.nrows())
                .map(|i| {
                    let d = qrow
                        .iter()
                        .zip(task.emb1.row(i).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    (d, i as u32)
                })
                .collect();
            dists.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN distances"));
            dists.into_iter().take(k).map(|(_, i)| i).collect()
        })
        .collect())
}

fn check_dims(task: &AlignmentTask) -> Result<()> {
    if task.emb1.ncols() != task.emb2.ncols() {
        return Err(DgwError::Validation(format!(
            "embedding dimension mismatch: {} vs {}",
            task.emb1.ncols(),
            task.emb2.ncols()
        )));
    }
    if task.emb1.nrows() < task.emb2.nrows() {
        return Err(DgwError::Validation(
            "emb1 must belong to the graph with at least as many nodes".into(),
        ));
    }
    if task.ground_truth.len() != task.emb2.nrows() {
        return Err(DgwError::Validation("ground truth length mismatch".into()));
    }
    Ok(())
}

/// Fraction of graph-2 nodes whose true correspondence appears among their
/// first `k` candidates.
pub fn topk_accuracy(candidates: &[Vec<u32>], ground_truth: &[u32], k: usize) -> f64 {
    if candidates.is_empty() {
        return 0.0;
    }
    let hits = candidates
        .iter()
        .zip(ground_truth)
        .filter(|(cands, truth)| cands.iter().take(k).any(|c| c == *truth))
        .count();
    hits as f64 / candidates.len() as f64
}

/// How inserted noise edges get their weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Unit,
    /// Sample uniformly from the multiset of existing weights.
    Empirical,
}

/// Insert `⌊p·m⌋` random directed edges avoiding self-loops and duplicates.
pub fn add_noise_edges(g: &Graph, p: f64, seed: u64, mode: WeightMode) -> Result<Graph> {
    if !(0.0..=10.0).contains(&p) {
        return Err(DgwError::Config(format!("bad noise fraction {p}")));
    }
    let count = (p * g.m() as f64).floor() as usize;
    let mut edges = g.edge_triples();
    if count == 0 {
        return Ok(g.clone());
    }
    let capacity = g.n() * (g.n() - 1) - g.m();
    if count > capacity {
        return Err(DgwError::Config(format!(
            "cannot place {count} noise edges, only {capacity} slots free"
        )));
    }
    let weights: Vec<f64> = edges.iter().map(|&(_, _, w)| w).collect();
    let mut existing: std::collections::HashSet<(u32, u32)> =
        edges.iter().map(|&(s, t, _)| (s, t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.n() as u32;
    let mut added = 0;
    while added < count {
        let s = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        if s == t || !existing.insert((s, t)) {
            continue;
        }
        let w = match mode {
            WeightMode::Unit => 1.0,
            WeightMode::Empirical => weights[rng.gen_range(0..weights.len())],
        };
        edges.push((s, t, w));
        added += 1;
    }
    Ok(Graph::from_edges(Some(g.n()), &edges)?.0)
}

/// One row of an alignment accuracy curve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AlignmentPoint {
    pub seed: u64,
    pub noise: f64,
    pub top1: f64,
    pub top10: f64,
}

/// End-to-end self-alignment harness: permute the node ids, add noise to both
/// sides independently, embed both graphs, standardize them in one shared
/// frame, match and score.
pub fn permuted_self_alignment(
    g: &Graph,
    radius: u32,
    k_emb: usize,
    noise: f64,
    seed: u64,
) -> Result<AlignmentPoint> {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut rng);
    let g2 = g.relabel(&perm)?;

    let weighted = g.edge_triples().iter().any(|&(_, _, w)| w != 1.0);
    let mode = if weighted { WeightMode::Empirical } else { WeightMode::Unit };
    let g1 = add_noise_edges(g, noise, seed.wrapping_mul(2).wrapping_add(1), mode)?;
    let g2 = add_noise_edges(&g2, noise, seed.wrapping_mul(2).wrapping_add(2), mode)?;

    let config1 = set_hyperparameters(&g1, radius, k_emb, true, true)?;
    let emb1 = digraphwave(&g1, &config1)?;
    let config2 = set_hyperparameters(&g2, radius, k_emb, true, true)?;
    let emb2 = digraphwave(&g2, &config2)?;

    let (s1, s2) = standardize_jointly(&emb1, &emb2);

    // ground truth: row i of g2 corresponds to the original node with perm = i
    let mut truth = vec![0u32; n];
    for (old, &new) in perm.iter().enumerate() {
        truth[new as usize] = old as u32;
    }
    let task = AlignmentTask {
        emb1: s1.data.view(),
        emb2: s2.data.view(),
        ground_truth: &truth,
        k: 10,
    };
    let candidates = greedy_match(&task)?;
    Ok(AlignmentPoint {
        seed,
        noise,
        top1: topk_accuracy(&candidates, &truth, 1),
        top10: topk_accuracy(&candidates, &truth, 10),
    })
}

/// Standardize two embedding sets with the statistics of their concatenation,
/// so both share one affine frame.
pub fn standardize_jointly(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
) -> (EmbeddingMatrix, EmbeddingMatrix) {
    let stacked = ndarray::concatenate(ndarray::Axis(0), &[a.data.view(), b.data.view()])
        .expect("column counts match");
    let joint = EmbeddingMatrix { data: stacked, tags: a.tags.clone() };
    let (s, _) = standardize(&joint);
    let (top, bottom) = s.data.view().split_at(ndarray::Axis(0), a.data.nrows());
    (
        EmbeddingMatrix { data: top.to_owned(), tags: a.tags.clone() },
        EmbeddingMatrix { data: bottom.to_owned(), tags: b.tags.clone() },
    )
}

// ---------------------------------------------------------------------------
// KD-tree with exhaustive-equal semantics

struct KdTree<'a> {
    data: ArrayView2<'a, f64>,
    // flattened nodes: (split_dim, split_val, left, right) or leaf point range
    nodes: Vec<KdNode>,
    order: Vec<u32>,
}

enum KdNode {
    Leaf { lo: usize, hi: usize },
    Split { dim: usize, val: f64, left: usize, right: usize },
}

const LEAF_SIZE: usize = 16;

impl<'a> KdTree<'a> {
    fn build(data: ArrayView2<'a, f64>) -> Self {
        let mut order: Vec<u32> = (0..data.nrows() as u32).collect();
        let mut nodes = Vec::new();
        if data.nrows() > 0 {
            let hi = order.len();
            build_node(data, &mut order, 0, hi, &mut nodes);
        }
        KdTree { data, nodes, order }
    }

    fn nearest(&self, query: &[f64], k: usize) -> Vec<u32> {
        let mut best: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        if !self.nodes.is_empty() {
            self.search(0, query, k, 0.0, &mut best);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    fn search(&self, node: usize, query: &[f64], k: usize, min_d2: f64, best: &mut Vec<(f64, u32)>) {
        // prune only when the box cannot strictly beat the current worst
        if best.len() == k && min_d2 > best[k - 1].0 {
            return;
        }
        match &self.nodes[node] {
            KdNode::Leaf { lo, hi } => {
                for &idx in &self.order[*lo..*hi] {
                    let d2: f64 = query
                        .iter()
                        .zip(self.data.row(idx as usize).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    let cand = (d2, idx);
                    let pos = best.partition_point(|x| *x < cand);
                    if pos < k {
                        best.insert(pos, cand);
                        best.truncate(k);
                    }
                }
            }
            KdNode::Split { dim, val, left, right } => {
                let delta = query[*dim] - val;
                let (near, far) = if delta <= 0.0 { (*left, *right) } else { (*right, *left) };
                self.search(near, query, k, min_d2, best);
                let far_d2 = min_d2.max(delta * delta);
                self.search(far, query, k, far_d2, best);
            }
        }
    }
}

fn build_node(
    data: ArrayView2<f64>,
    order: &mut [u32],
    lo: usize,
    hi: usize,
    nodes: &mut Vec<KdNode>,
) -> usize {
    let id = nodes.len();
    if hi - lo <= LEAF_SIZE {
        nodes.push(KdNode::Leaf { lo, hi });
        return id;
    }
    // split on the dimension with the largest spread
    let dims = data.ncols();
    let mut best_dim = 0;
    let mut best_spread = -1.0;
    for d in 0..dims {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &i in &order[lo..hi] {
            let v = data[(i as usize, d)];
            min = min.min(v);
            max = max.max(v);
        }
        if max - min > best_spread {
            best_spread = max - min;
            best_dim = d;
        }
    }
    if best_spread <= 0.0 {
        nodes.push(KdNode::Leaf { lo, hi });
        return id;
    }
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        data[(a as usize, best_dim)]
            .partial_cmp(&data[(b as usize, best_dim)])
            .expect("no NaN coordinates")
            .then(a.cmp(&b))
    });
    let val = data[(order[mid] as usize, best_dim)];
    nodes.push(KdNode::Split { dim: best_dim, val, left: 0, right: 0 });
    let left = build_node(data, order, lo, mid, nodes);
    let right = build_node(data, order, mid, hi, nodes);
    if let KdNode::Split { left: l, right: r, .. } = &mut nodes[id] {
        *l = left;
        *r = right;
    }
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn task<'a>(
        emb1: &'a Array2<f64>,
        emb2: &'a Array2<f64>,
        truth: &'a [u32],
        k: usize,
    ) -> AlignmentTask<'a> {
        AlignmentTask { emb1: emb1.view(), emb2: emb2.view(), ground_truth: truth, k }
    }

    #[test]
    fn self_copy_matches_itself() {
        let emb = ndarray::arr2(&[[0.0, 0.0], [1.0, 0.5], [2.0, 2.0], [3.0, 1.0]]);
        let truth: Vec<u32> = (0..4).collect();
        let cands = greedy_match(&task(&emb, &emb, &truth, 1)).unwrap();
        for (i, c) in cands.iter().enumerate() {
            assert_eq!(c[0], i as u32);
        }
        assert_eq!(topk_accuracy(&cands, &truth, 1), 1.0);
    }

    #[test]
    fn duplicate_rows_tie_break_to_lower_id() {
        let emb1 = ndarray::arr2(&[[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]]);
        let emb2 = ndarray::arr2(&[[1.0, 1.0]]);
        let cands = greedy_match(&task(&emb1, &emb2, &[0], 2)).unwrap();
        assert_eq!(cands[0], vec![0, 1]);
    }

    #[test]
    fn k_at_least_n_gives_full_ordering() {
        let emb1 = ndarray::arr2(&[[0.0], [2.0], [1.0]]);
        let emb2 = ndarray::arr2(&[[0.9]]);
        let cands = greedy_match(&task(&emb1, &emb2, &[0], 10)).unwrap();
        assert_eq!(cands[0], vec![2, 0, 1]);
    }

    #[test]
    fn kd_tree_equals_exhaustive_on_random_tasks() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..200 {
            let n1 = rng.gen_range(5..60);
            let n2 = rng.gen_range(1..=n1);
            let dims = rng.gen_range(1..10);
            let quantize = rng.gen_bool(0.5);
            let mut gen = |(): ()| -> f64 {
                let v: f64 = rng.gen_range(-2.0..2.0);
                if quantize { (v * 2.0).round() / 2.0 } else { v }
            };
            let emb1 = Array2::from_shape_fn((n1, dims), |_| gen(()));
            let emb2 = Array2::from_shape_fn((n2, dims), |_| gen(()));
            let truth = vec![0u32; n2];
            let k = rng.gen_range(1..8);
            let t = task(&emb1, &emb2, &truth, k);
            let a = greedy_match(&t).unwrap();
            let b = greedy_match_exhaustive(&t).unwrap();
            assert_eq!(a, b, "trial {trial}");
        }
    }

    #[test]
    fn accuracy_counts() {
        let cands = vec![vec![3, 1, 2], vec![0, 4, 5], vec![9, 9, 9]];
        let truth = vec![1, 4, 2];
        assert!((topk_accuracy(&cands, &truth, 1) - 0.0).abs() < 1e-15);
        assert!((topk_accuracy(&cands, &truth, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((topk_accuracy(&cands, &truth, 3) - 2.0 / 3.0).abs() < 1e-15);
        // accuracy is nondecreasing in k
        for k in 1..3 {
            assert!(topk_accuracy(&cands, &truth, k) <= topk_accuracy(&cands, &truth, k + 1));
        }
    }

    #[test]
    fn empty_intersection_scores_zero() {
        let cands = vec![vec![1], vec![2]];
        assert_eq!(topk_accuracy(&cands, &[0, 0], 1), 0.0);
    }

    #[test]
    fn distance_symmetry() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let dab: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            let dba: f64 = b.iter().zip(&a).map(|(x, y)| (x - y) * (x - y)).sum();
            assert!((dab - dba).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_edges_count_and_determinism() {
        let edges: Vec<(u32, u32, f64)> =
            (0..9).map(|i| (i as u32, i as u32 + 1, 1.0)).collect();
        let g = Graph::from_edges(Some(10), &edges).unwrap().0;
        assert_eq!(add_noise_edges(&g, 0.0, 1, WeightMode::Unit).unwrap(), g);

        // p chosen so the count is exactly 3
        let noisy = add_noise_edges(&g, 3.0 / 9.0 + 1e-12, 1, WeightMode::Unit).unwrap();
        assert_eq!(noisy.m(), 12);

        let again = add_noise_edges(&g, 3.0 / 9.0 + 1e-12, 1, WeightMode::Unit).unwrap();
        assert_eq!(noisy, again);
    }

    #[test]
    fn empirical_weights_come_from_observed_multiset() {
        let edges = vec![(0u32, 1u32, 2.0), (1, 2, 4.0), (2, 3, 2.0)];
        let g = Graph::from_edges(Some(20), &edges).unwrap().0;
        let noisy = add_noise_edges(&g, 1.0, 3, WeightMode::Empirical).unwrap();
        for (_, _, w) in noisy.edge_triples() {
            assert!(w == 2.0 || w == 4.0);
        }
    }

    #[test]
    fn self_alignment_perfect_on_distinct_path() {
        // a path of distinct-degree structure: every node structurally unique
        let edges: Vec<(u32, u32, f64)> =
            (0..7).map(|i| (i as u32, i as u32 + 1, 1.0)).collect();
        let g = Graph::from_edges(None, &edges).unwrap().0;
        let pt = permuted_self_alignment(&g, 2, 32, 0.0, 11).unwrap();
        assert_eq!(pt.top1, 1.0);
    }
}
