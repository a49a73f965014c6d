//! Shared oracles for the integration and acceptance suites. Everything here
//! is an independent computation path: dense matrices built straight from
//! edge triples, classic textbook algorithms, no reuse of the library kernels.

#![allow(dead_code)]

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Dense out-degree normalized Laplacian assembled directly from triples.
pub fn dense_laplacian(n: usize, edges: &[(u32, u32, f64)]) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((n, n));
    for &(s, t, w) in edges {
        a[(t as usize, s as usize)] += w;
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let d: f64 = (0..n).map(|i| a[(i, j)]).sum();
        if d > 0.0 {
            l[(j, j)] = 1.0;
            for i in 0..n {
                l[(i, j)] -= a[(i, j)] / d;
            }
        }
    }
    l
}

/// Dense matrix exponential by scaling and squaring with a long Taylor tail.
pub fn dense_expm(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| x[(i, j)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let squarings = if norm1 <= 0.25 {
        0
    } else {
        (norm1 / 0.25).log2().ceil() as u32
    };
    let scaled = x.mapv(|v| v / 2f64.powi(squarings as i32));
    let mut result = Array2::<f64>::eye(n);
    let mut term = Array2::<f64>::eye(n);
    for k in 1..=24 {
        term = term.dot(&scaled) / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Oracle `Ψ(τ)` columns: dense `exp(-τ𝓛)`.
pub fn psi_oracle(n: usize, edges: &[(u32, u32, f64)], tau: f64) -> Array2<f64> {
    let l = dense_laplacian(n, edges);
    dense_expm(&l.mapv(|v| -tau * v))
}

/// Truncated Poisson mixture of random-walk powers:
/// `Σ_{k=0}^{terms} Pois(τ)(k) P^k b` with `P = I − 𝓛`.
pub fn poisson_mixture_column(
    n: usize,
    edges: &[(u32, u32, f64)],
    tau: f64,
    source: usize,
    terms: usize,
) -> Vec<f64> {
    let l = dense_laplacian(n, edges);
    let mut p = Array2::<f64>::eye(n);
    p -= &l;
    let mut v = ndarray::Array1::<f64>::zeros(n);
    v[source] = 1.0;
    let mut out = ndarray::Array1::<f64>::zeros(n);
    let mut pois = (-tau).exp();
    out.scaled_add(pois, &v);
    for k in 1..=terms {
        v = p.dot(&v);
        pois *= tau / k as f64;
        out.scaled_add(pois, &v);
    }
    out.to_vec()
}

/// All-pairs hop distances by Floyd–Warshall (u32::MAX = unreachable).
pub fn floyd_warshall_hops(n: usize, edges: &[(u32, u32, f64)]) -> Vec<Vec<u32>> {
    const INF: u32 = u32::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(s, t, _) in edges {
        d[s as usize][t as usize] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k].saturating_add(d[k][j]);
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// A reproducible random directed weighted graph with guaranteed sinks and a
/// possible disconnected node.
pub fn random_graph(seed: u64, n_lo: usize, n_hi: usize) -> (usize, Vec<(u32, u32, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(n_lo..=n_hi);
    let density = rng.gen_range(0.05..0.5);
    let m_target = ((n * (n - 1)) as f64 * density).ceil() as usize;
    // force a couple of sinks by banning their out-edges
    let n_sinks = rng.gen_range(1..=2.min(n - 1));
    let sinks: Vec<u32> = (0..n_sinks).map(|_| rng.gen_range(0..n as u32)).collect();
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0;
    while edges.len() < m_target && attempts < 20 * m_target {
        attempts += 1;
        let s = rng.gen_range(0..n as u32);
        let t = rng.gen_range(0..n as u32);
        if s == t || sinks.contains(&s) || !seen.insert((s, t)) {
            continue;
        }
        edges.push((s, t, rng.gen_range(0.1..3.0)));
    }
    (n, edges)
}

/// Orbits of the automorphism group by exhaustive permutation search
/// (weight-preserving). Only viable for tiny n.
pub fn automorphism_orbits(n: usize, edges: &[(u32, u32, f64)]) -> Vec<Vec<u32>> {
    assert!(n <= 8, "exhaustive orbit search is factorial in n");
    let mut adj = std::collections::HashMap::new();
    for &(s, t, w) in edges {
        adj.insert((s, t), w);
    }
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut Vec<u32>, x: u32) -> u32 {
        if parent[x as usize] != x {
            let r = find(parent, parent[x as usize]);
            parent[x as usize] = r;
        }
        parent[x as usize]
    }
    let mut perm: Vec<u32> = (0..n as u32).collect();
    permute(&mut perm, 0, &mut |p| {
        let ok = adj.iter().all(|(&(s, t), &w)| {
            adj.get(&(p[s as usize], p[t as usize])) == Some(&w)
        }) && adj.len()
            == adj
                .keys()
                .map(|&(s, t)| (p[s as usize], p[t as usize]))
                .collect::<std::collections::HashSet<_>>()
                .len();
        if ok {
            for v in 0..n as u32 {
                let a = find(&mut parent, v);
                let b = find(&mut parent, p[v as usize]);
                if a != b {
                    parent[a as usize] = b;
                }
            }
        }
    });
    let mut groups: std::collections::HashMap<u32, Vec<u32>> = Default::default();
    for v in 0..n as u32 {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().push(v);
    }
    let mut orbits: Vec<Vec<u32>> = groups.into_values().collect();
    orbits.sort();
    orbits
}

fn permute(arr: &mut Vec<u32>, k: usize, visit: &mut impl FnMut(&[u32])) {
    if k == arr.len() {
        visit(arr);
        return;
    }
    for i in k..arr.len() {
        arr.swap(k, i);
        permute(arr, k + 1, visit);
        arr.swap(k, i);
    }
}

/// Path to a shipped fixture directory.
pub fn fixture(path: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(path)
}
