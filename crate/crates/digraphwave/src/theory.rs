//! Closed-form diffusion theory: regularized incomplete gamma functions, the
//! heat-containment lower bound, source-star graphs and their analytic heat
//! values, and directed ball decompositions.
//!
//! These double as user-facing utilities (timescale justification tables) and
//! as the main analytic oracle for the matrix-exponential kernel.

use crate::error::{DgwError, Result};
use crate::graph::Graph;

/// `Q(a, τ) = e^{-τ} Σ_{l<a} τ^l / l!` — the regularized upper incomplete
/// gamma function at integer order, evaluated by the Poisson-term recurrence
/// (every term is a Poisson pmf value in `[0, 1]`, so the sum is stable).
pub fn regularized_upper_gamma_q(a: u32, tau: f64) -> f64 {
    assert!(a >= 1, "order must be a positive integer");
    assert!(tau >= 0.0, "tau must be nonnegative");
    let mut term = (-tau).exp();
    let mut sum = term;
    for l in 1..a {
        term *= tau / l as f64;
        sum += term;
    }
    sum.min(1.0)
}

/// `P(a, τ) = 1 − Q(a, τ)`, computed independently as the Poisson tail sum
/// `Σ_{l ≥ a} e^{-τ} τ^l / l!` so that `P + Q = 1` is a real cross-check.
pub fn regularized_lower_gamma_p(a: u32, tau: f64) -> f64 {
    assert!(a >= 1, "order must be a positive integer");
    assert!(tau >= 0.0, "tau must be nonnegative");
    if tau == 0.0 {
        return 0.0;
    }
    // first tail term: e^{-τ} τ^a / a!
    let mut term = (-tau).exp();
    for l in 1..=a {
        term *= tau / l as f64;
    }
    let mut sum = term;
    let mut l = a as f64;
    while term > sum * 1e-18 + 1e-300 {
        l += 1.0;
        term *= tau / l;
        sum += term;
    }
    sum.min(1.0)
}

/// Universal lower bound on the heat contained in the `(j, R)`-ball at
/// time `τ`, valid for any directed graph: `Q(R+1, τ)`.
pub fn heat_containment_bound(radius: u32, tau: f64) -> f64 {
    regularized_upper_gamma_q(radius + 1, tau)
}

/// Parameters of a source-star graph: centre out-degree `d`, branch factor
/// `beta`, depth `ell`, plus optional isolated nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SourceStarSpec {
    pub d: u64,
    pub beta: u64,
    pub ell: u32,
    pub n_isolated: u64,
}

impl SourceStarSpec {
    pub fn new(d: u64, beta: u64, ell: u32, n_isolated: u64) -> Result<Self> {
        if d < 1 || beta < 1 {
            return Err(DgwError::Config(
                "source-star requires d ≥ 1 and beta ≥ 1".into(),
            ));
        }
        Ok(SourceStarSpec { d, beta, ell, n_isolated })
    }

    /// Number of nodes in layer `l` (`d·β^{l-1}` for `l ≥ 1`, one centre at 0).
    pub fn layer_size(&self, l: u32) -> u64 {
        if l == 0 {
            1
        } else {
            self.d * self.beta.pow(l - 1)
        }
    }

    /// Total tree nodes: `1 + d Σ_{k<ℓ} β^k`.
    pub fn tree_nodes(&self) -> u64 {
        (0..=self.ell).map(|l| self.layer_size(l)).sum()
    }

    pub fn n(&self) -> u64 {
        self.tree_nodes() + self.n_isolated
    }

    /// Node index of layer `l`, within-layer position `nu ∈ {1..d β^{l-1}}`.
    pub fn index_of(&self, l: u32, nu: u64) -> u64 {
        debug_assert!(l >= 1 && nu >= 1 && nu <= self.layer_size(l));
        let below: u64 = (1..l).map(|k| self.layer_size(k)).sum();
        nu + below
    }

    /// Invert a node index into `(layer, nu, branch)`; the inverse of
    /// [`Self::index_of`] computed with exact integer arithmetic.
    pub fn locate(&self, i: u64) -> Option<(u32, u64, u64)> {
        if i == 0 {
            return Some((0, 0, 0));
        }
        if i >= self.tree_nodes() {
            return None;
        }
        let mut consumed = 0u64;
        for l in 1..=self.ell {
            let size = self.layer_size(l);
            if i <= consumed + size {
                let nu = i - consumed;
                let branch = nu.div_ceil(self.beta.pow(l - 1));
                return Some((l, nu, branch));
            }
            consumed += size;
        }
        None
    }
}

/// Build the source-star graph: all edges point away from centre node 0,
/// nodes indexed layer by layer, isolated nodes at the tail.
pub fn make_source_star(spec: &SourceStarSpec) -> Graph {
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for l in 1..=spec.ell {
        let size = spec.layer_size(l);
        for nu in 1..=size {
            let child = spec.index_of(l, nu);
            let parent = if l == 1 {
                0
            } else {
                spec.index_of(l - 1, nu.div_ceil(spec.beta))
            };
            edges.push((parent as u32, child as u32, 1.0));
        }
    }
    let n = spec.n() as usize;
    Graph::from_edges(Some(n), &edges)
        .expect("source-star construction is valid by definition")
        .0
}

/// Analytic heat values for a source-star diffusion initialized at the
/// centre, one value per layer (all nodes in a layer share it by symmetry):
/// centre `e^{-τ}`, interior layer `l` `(d^{-1}/β^{l-1}) τ^l e^{-τ}/l!`, leaf
/// layer `(d^{-1}/β^{ℓ-1}) P(ℓ, τ)`.
pub fn source_star_heat(spec: &SourceStarSpec, tau: f64) -> Vec<f64> {
    assert!(spec.ell >= 1, "analytic expression requires depth ≥ 1");
    let d = spec.d as f64;
    let beta = spec.beta as f64;
    let mut out = Vec::with_capacity(spec.ell as usize + 1);
    out.push((-tau).exp());
    // e^{-τ} τ^l / l! by recurrence
    let mut pois = (-tau).exp();
    for l in 1..spec.ell {
        pois *= tau / l as f64;
        out.push(pois / (d * beta.powi(l as i32 - 1)));
    }
    let leaf = regularized_lower_gamma_p(spec.ell, tau)
        / (d * beta.powi(spec.ell as i32 - 1));
    out.push(leaf);
    out
}

/// Hop-shell decomposition of the directed ball around `root`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallDecomposition {
    pub root: u32,
    pub radius: u32,
    /// `shells[r]` lists nodes at directed distance exactly `r`, ascending.
    pub shells: Vec<Vec<u32>>,
}

impl BallDecomposition {
    /// All nodes within distance `r` (ascending).
    pub fn ball(&self, r: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self
            .shells
            .iter()
            .take(r as usize + 1)
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out
    }

    /// Nodes unreachable within the full radius.
    pub fn periphery(&self, n: usize) -> Vec<u32> {
        let inside: std::collections::HashSet<u32> =
            self.shells.iter().flatten().copied().collect();
        (0..n as u32).filter(|v| !inside.contains(v)).collect()
    }
}

/// Directed BFS shells out to distance `radius`.
pub fn ball_decomposition(g: &Graph, root: u32, radius: u32) -> Result<BallDecomposition> {
    if root as usize >= g.n() {
        return Err(DgwError::Validation(format!(
            "root {root} out of range for graph with {} nodes",
            g.n()
        )));
    }
    let mut dist = vec![u32::MAX; g.n()];
    dist[root as usize] = 0;
    let mut shells = vec![vec![root]];
    let mut frontier = vec![root];
    for r in 1..=radius {
        let mut next = Vec::new();
        for &v in &frontier {
            let (ts, _) = g.out_edges(v as usize);
            for &t in ts {
                if dist[t as usize] == u32::MAX {
                    dist[t as usize] = r;
                    next.push(t);
                }
            }
        }
        next.sort_unstable();
        if next.is_empty() {
            shells.push(Vec::new());
            frontier = Vec::new();
        } else {
            frontier = next.clone();
            shells.push(next);
        }
    }
    Ok(BallDecomposition { root, radius, shells })
}

/// Outcome of a heat-containment check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainmentReport {
    pub ball_heat: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Sum the provided `Ψ` column over the `(root, R)`-ball and compare against
/// `Q(R+1, τ) − 1e-9`.
pub fn verify_containment(
    g: &Graph,
    root: u32,
    radius: u32,
    tau: f64,
    psi_column: &[f64],
) -> Result<ContainmentReport> {
    if psi_column.len() != g.n() {
        return Err(DgwError::Validation(format!(
            "psi column has {} entries for graph with {} nodes",
            psi_column.len(),
            g.n()
        )));
    }
    let decomp = ball_decomposition(g, root, radius)?;
    let ball_heat: f64 = decomp
        .ball(radius)
        .iter()
        .map(|&i| psi_column[i as usize])
        .sum();
    let bound = heat_containment_bound(radius, tau);
    Ok(ContainmentReport { ball_heat, bound, holds: ball_heat >= bound - 1e-9 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matexp::{expm_batch, taylor_coefficients};

    #[test]
    fn q_closed_forms() {
        for &tau in &[0.0, 1.0, 2.0] {
            assert!((regularized_upper_gamma_q(1, tau) - (-tau).exp()).abs() < 1e-15);
        }
        for a in 1..=9 {
            assert_eq!(regularized_upper_gamma_q(a, 0.0), 1.0);
        }
        // at τ = R at least half the heat stays within R hops
        for r in 1..=8 {
            assert!(regularized_upper_gamma_q(r + 1, r as f64) > 0.5);
        }
    }

    #[test]
    fn p_values() {
        for &tau in &[0.3, 1.0, 4.0] {
            assert!(
                (regularized_lower_gamma_p(1, tau) - (1.0 - (-tau).exp())).abs() < 1e-14
            );
        }
        for a in 1..=9 {
            assert_eq!(regularized_lower_gamma_p(a, 0.0), 0.0);
        }
        assert!((regularized_lower_gamma_p(3, 1.0) - 0.080301397071394).abs() < 1e-12);
    }

    #[test]
    fn p_plus_q_is_one() {
        for a in 1..=16 {
            for i in 0..=40 {
                let tau = i as f64 * 0.5;
                let p = regularized_lower_gamma_p(a, tau);
                let q = regularized_upper_gamma_q(a, tau);
                assert!((p + q - 1.0).abs() < 1e-14, "a={a} tau={tau}: {}", p + q);
            }
        }
    }

    #[test]
    fn q_monotone() {
        for a in 1..=8u32 {
            let mut prev = f64::INFINITY;
            for i in 1..=30 {
                let q = regularized_upper_gamma_q(a, i as f64 * 0.3);
                assert!(q < prev);
                prev = q;
            }
        }
        for i in 0..=20 {
            let tau = i as f64 * 0.5;
            let mut prev = -1.0;
            for a in 1..=8u32 {
                let q = regularized_upper_gamma_q(a, tau);
                assert!(q >= prev);
                prev = q;
            }
        }
    }

    #[test]
    fn containment_bound_examples() {
        let v = heat_containment_bound(3, 3.0);
        assert!(v > 0.5 && v < 1.0);
        assert_eq!(heat_containment_bound(2, 0.0), 1.0);
        assert!(heat_containment_bound(2, 10.0) < 0.01);
    }

    #[test]
    fn source_star_shapes() {
        let spec = SourceStarSpec::new(6, 2, 3, 0).unwrap();
        let g = make_source_star(&spec);
        assert_eq!(g.n(), 43); // 1 + 6(1+2+4)
        assert_eq!(g.m(), 42);

        let spec = SourceStarSpec::new(1, 1, 1, 0).unwrap();
        let g = make_source_star(&spec);
        assert_eq!(g.edge_triples(), vec![(0, 1, 1.0)]);

        let spec = SourceStarSpec::new(3, 2, 2, 5).unwrap();
        assert_eq!(spec.n(), 15); // 5 + 1 + 3 + 6
        let g = make_source_star(&spec);
        assert_eq!(g.n(), 15);
        let d = g.degrees();
        for iso in 10..15 {
            assert_eq!(d.out_unweighted[iso], 0);
            assert_eq!(d.in_unweighted[iso], 0);
        }
    }

    #[test]
    fn index_inversion_round_trips() {
        for &(d, beta, ell) in &[(1u64, 1u64, 1u32), (3, 1, 4), (2, 2, 5), (6, 3, 3), (4, 2, 8)] {
            let spec = SourceStarSpec::new(d, beta, ell, 0).unwrap();
            for l in 1..=ell {
                for nu in 1..=spec.layer_size(l) {
                    let i = spec.index_of(l, nu);
                    let (l2, nu2, branch) = spec.locate(i).unwrap();
                    assert_eq!((l, nu), (l2, nu2), "d={d} beta={beta} i={i}");
                    assert!(branch >= 1 && branch <= d);
                }
            }
        }
    }

    #[test]
    fn heat_layers_conserve_and_match_engine() {
        let spec = SourceStarSpec::new(2, 2, 3, 0).unwrap();
        let vals = source_star_heat(&spec, 1.0);
        assert!((vals[0] - 0.36787944117144233).abs() < 1e-12);
        assert!((vals[1] - 0.18393972058572117).abs() < 1e-12);
        assert!((vals[2] - 0.04598493014643029).abs() < 1e-12);
        assert!((vals[3] - 0.010037674633924265).abs() < 1e-10);
        let total: f64 = vals
            .iter()
            .enumerate()
            .map(|(l, v)| v * spec.layer_size(l as u32) as f64)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);

        // engine agreement per layer
        let g = make_source_star(&spec);
        let op = g.build_operator();
        for &tau in &[1.0, 2.0, 3.0] {
            let coeffs = taylor_coefficients(&[tau], 40);
            let batch = expm_batch(&op, &[0], &coeffs).unwrap();
            let col = batch.data[0].column(0);
            let truth = source_star_heat(&spec, tau);
            for i in 0..g.n() {
                let (l, _, _) = spec.locate(i as u64).unwrap();
                assert!(
                    (col[i] - truth[l as usize]).abs() < 1e-10,
                    "tau={tau} node={i} layer={l}"
                );
            }
        }
    }

    #[test]
    fn single_edge_star_heat() {
        let spec = SourceStarSpec::new(1, 1, 1, 0).unwrap();
        for &tau in &[0.5, 1.0, 2.0] {
            let vals = source_star_heat(&spec, tau);
            assert!((vals[0] - (-tau).exp()).abs() < 1e-15);
            assert!((vals[1] - (1.0 - (-tau).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn ball_decomposition_source_star_layers() {
        let spec = SourceStarSpec::new(2, 2, 3, 0).unwrap();
        let g = make_source_star(&spec);
        let d = ball_decomposition(&g, 0, 3).unwrap();
        for l in 0..=3u32 {
            assert_eq!(d.shells[l as usize].len() as u64, spec.layer_size(l));
        }
    }

    #[test]
    fn ball_decomposition_isolated_root() {
        let (g, _) = Graph::from_edges(Some(4), &[(1, 2, 1.0)]).unwrap();
        let d = ball_decomposition(&g, 0, 3).unwrap();
        assert_eq!(d.ball(3), vec![0]);
        assert_eq!(d.periphery(4), vec![1, 2, 3]);
    }

    #[test]
    fn containment_on_source_star_is_tight() {
        // R < ℓ gives equality with Q(R+1, τ)
        let spec = SourceStarSpec::new(3, 2, 4, 0).unwrap();
        let g = make_source_star(&spec);
        let op = g.build_operator();
        for &tau in &[1.0, 2.0] {
            let coeffs = taylor_coefficients(&[tau], 40);
            let batch = expm_batch(&op, &[0], &coeffs).unwrap();
            let col: Vec<f64> = batch.data[0].column(0).to_vec();
            for radius in 1..=3u32 {
                let rep = verify_containment(&g, 0, radius, tau, &col).unwrap();
                assert!(rep.holds);
                assert!(
                    (rep.ball_heat - rep.bound).abs() < 1e-10,
                    "R={radius} tau={tau}: {} vs {}",
                    rep.ball_heat,
                    rep.bound
                );
            }
        }
    }

    #[test]
    fn containment_sink_root() {
        let (g, _) = Graph::from_edges(None, &[(1, 0, 1.0)]).unwrap();
        let mut col = vec![0.0; 2];
        col[0] = 1.0; // sink keeps all heat
        let rep = verify_containment(&g, 0, 2, 5.0, &col).unwrap();
        assert!(rep.holds && rep.ball_heat == 1.0);
    }
}
