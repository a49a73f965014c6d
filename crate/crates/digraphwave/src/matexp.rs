//! Batched truncated-Taylor approximation of `Ψ(τ) = exp(-τ𝓛)` columns.
//!
//! Each column is built from the monomial recurrence `F ← (𝓛 − I)F` with the
//! Taylor coefficients `a_k(τ) = (-τ)^k e^{-τ} / k!` obtained through a
//! discrete Fourier transform of boundary samples of `exp(-τz)`. Monomials are
//! reused across timescales; each column's support is tracked explicitly so
//! that graphs whose heat stays local cost far less than `O(n)` per column.

use ndarray::Array2;

use crate::error::{DgwError, Result};
use crate::graph::DiffusionOperator;

/// Floating-point flavour used for error modelling and output encoding.
/// Accumulation always happens in double precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    Double,
    Single,
}

impl Precision {
    /// Unit roundoff `u`.
    pub fn unit_roundoff(self) -> f64 {
        match self {
            Precision::Double => (2f64).powi(-53),
            Precision::Single => (2f64).powi(-24),
        }
    }
}

/// Taylor coefficients `a_k(τ)` for a set of timescales, order `K`.
#[derive(Debug, Clone)]
pub struct TaylorCoefficients {
    taus: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    order: usize,
}

impl TaylorCoefficients {
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_taus(&self) -> usize {
        self.taus.len()
    }

    /// Coefficients `a_0..a_K` for timescale index `s`.
    pub fn for_tau(&self, s: usize) -> &[f64] {
        &self.coeffs[s]
    }
}

/// Compute `a_k(τ) = (-τ)^k e^{-τ}/k!` for `k ≤ order` via the discrete
/// Fourier transform of `exp(-τ(1 + e^{2πiκ/M}))` samples with `M = order+1`.
///
/// The imaginary residue of the transform (≤ 1e-12) is discarded. Tail
/// coefficients below the quadrature's ~1e-14 absolute noise floor are only
/// absolutely, not relatively, accurate; they are negligible in the Taylor sum.
pub fn taylor_coefficients(taus: &[f64], order: usize) -> TaylorCoefficients {
    assert!(order >= 1, "Taylor order must be at least 1");
    let m = order + 1;
    let mut coeffs = Vec::with_capacity(taus.len());
    for &tau in taus {
        assert!(tau > 0.0, "timescales must be positive, got {tau}");
        // boundary samples f(1 + e^{2πiκ/M}) of f(z) = exp(-τ z)
        let mut sample_re = vec![0f64; m];
        let mut sample_im = vec![0f64; m];
        for (kappa, (sr, si)) in sample_re.iter_mut().zip(sample_im.iter_mut()).enumerate() {
            let theta = 2.0 * std::f64::consts::PI * kappa as f64 / m as f64;
            let re = -tau * (1.0 + theta.cos());
            let im = -tau * theta.sin();
            let mag = re.exp();
            *sr = mag * im.cos();
            *si = mag * im.sin();
        }
        let mut a = vec![0f64; m];
        for (k, ak) in a.iter_mut().enumerate() {
            let mut acc_re = 0f64;
            let mut acc_im = 0f64;
            for kappa in 0..m {
                let theta = -2.0 * std::f64::consts::PI * (k * kappa % m) as f64 / m as f64;
                let (c, s) = (theta.cos(), theta.sin());
                acc_re += sample_re[kappa] * c - sample_im[kappa] * s;
                acc_im += sample_re[kappa] * s + sample_im[kappa] * c;
            }
            debug_assert!(acc_im.abs() / m as f64 <= 1e-12);
            *ak = acc_re / m as f64;
        }
        coeffs.push(a);
    }
    TaylorCoefficients { taus: taus.to_vec(), coeffs, order }
}

/// Dense heat-coefficient columns for a batch of source nodes.
#[derive(Debug, Clone)]
pub struct ReachabilityBatch {
    pub node_ids: Vec<u32>,
    pub taus: Vec<f64>,
    /// One `n × n_batch` matrix per timescale, entries clamped to `[0, 1]`.
    pub data: Vec<Array2<f64>>,
    /// Smallest entry observed before clamping, over all timescales.
    pub raw_min: f64,
}

impl ReachabilityBatch {
    /// Column sums per timescale and batch column (heat conservation check).
    pub fn column_sums(&self) -> Vec<Vec<f64>> {
        self.data
            .iter()
            .map(|mat| {
                (0..mat.ncols())
                    .map(|b| mat.column(b).sum())
                    .collect()
            })
            .collect()
    }
}

/// Per-column reachability values in sparse form, shared across timescales.
pub struct SparseColumn<'e> {
    /// Sorted union support of all monomials for this column.
    pub indices: &'e [u32],
    /// Dense per-timescale buffers, valid at `indices` (zero elsewhere).
    pub values: &'e [Vec<f64>],
    /// Smallest entry before clamping.
    pub raw_min: f64,
}

// Switch to dense iteration once the support covers this fraction of nodes.
const DENSE_SWITCH_FRACTION: f64 = 0.25;

/// Reusable workspace that evaluates one `Ψ` column at a time.
///
/// Buffers are allocated once and reused, so a long batch run does not touch
/// the allocator. The per-column arithmetic order is fixed (sources ascending),
/// making results independent of batching and scheduling.
pub struct ColumnEngine<'a> {
    op: &'a DiffusionOperator,
    coeffs: &'a TaylorCoefficients,
    cur: Vec<f64>,
    next: Vec<f64>,
    psi: Vec<Vec<f64>>,
    cur_active: Vec<u32>,
    next_active: Vec<u32>,
    touched: Vec<bool>,
    psi_active: Vec<u32>,
    in_psi: Vec<bool>,
    identity: Vec<u32>,
    dense: bool,
}

impl<'a> ColumnEngine<'a> {
    pub fn new(op: &'a DiffusionOperator, coeffs: &'a TaylorCoefficients) -> Self {
        let n = op.n();
        ColumnEngine {
            op,
            coeffs,
            cur: vec![0.0; n],
            next: vec![0.0; n],
            psi: vec![vec![0.0; n]; coeffs.n_taus()],
            cur_active: Vec::new(),
            next_active: Vec::new(),
            touched: vec![false; n],
            psi_active: Vec::new(),
            in_psi: vec![false; n],
            identity: Vec::new(),
            dense: false,
        }
    }

    fn reset(&mut self) {
        if self.dense {
            self.cur.fill(0.0);
            self.next.fill(0.0);
            for p in self.psi.iter_mut() {
                p.fill(0.0);
            }
            self.touched.fill(false);
            self.in_psi.fill(false);
        } else {
            for &i in self.cur_active.iter().chain(self.next_active.iter()) {
                self.cur[i as usize] = 0.0;
                self.next[i as usize] = 0.0;
                self.touched[i as usize] = false;
            }
            for &i in &self.psi_active {
                for p in self.psi.iter_mut() {
                    p[i as usize] = 0.0;
                }
                self.in_psi[i as usize] = false;
                self.cur[i as usize] = 0.0;
                self.next[i as usize] = 0.0;
            }
        }
        self.cur_active.clear();
        self.next_active.clear();
        self.psi_active.clear();
        self.dense = false;
    }

    /// Compute the `Ψ` column for source `j` at every configured timescale.
    pub fn compute(&mut self, j: u32) -> Result<SparseColumn<'_>> {
        let n = self.op.n();
        if (j as usize) >= n {
            return Err(DgwError::Validation(format!(
                "node id {j} out of range for graph with {n} nodes"
            )));
        }
        self.reset();

        let order = self.coeffs.order();
        self.cur[j as usize] = 1.0;
        self.cur_active.push(j);
        self.psi_active.push(j);
        self.in_psi[j as usize] = true;
        for (s, p) in self.psi.iter_mut().enumerate() {
            p[j as usize] = self.coeffs.for_tau(s)[0];
        }

        for k in 1..=order {
            if self.dense {
                self.step_dense(k);
            } else {
                self.step_sparse(k);
                if self.cur_active.len() as f64 > DENSE_SWITCH_FRACTION * n as f64 {
                    self.dense = true;
                }
            }
        }

        let mut raw_min = 0.0f64;
        if self.dense {
            for p in self.psi.iter_mut() {
                for v in p.iter_mut() {
                    if *v < raw_min {
                        raw_min = *v;
                    }
                    *v = v.clamp(0.0, 1.0);
                }
            }
            if self.identity.is_empty() {
                self.identity = (0..n as u32).collect();
            }
            Ok(SparseColumn { indices: &self.identity, values: &self.psi, raw_min })
        } else {
            self.psi_active.sort_unstable();
            for p in self.psi.iter_mut() {
                for &i in &self.psi_active {
                    let v = &mut p[i as usize];
                    if *v < raw_min {
                        raw_min = *v;
                    }
                    *v = v.clamp(0.0, 1.0);
                }
            }
            Ok(SparseColumn { indices: &self.psi_active, values: &self.psi, raw_min })
        }
    }

    // One monomial step with explicit support tracking. `cur_active` is
    // sorted on entry, keeping the scatter order source-ascending.
    fn step_sparse(&mut self, k: usize) {
        self.next_active.clear();
        for &src in &self.cur_active {
            let xv = self.cur[src as usize];
            let (rows, vals) = self.op.alpha_column(src as usize);
            for (r, v) in rows.iter().zip(vals) {
                let ri = *r as usize;
                if !self.touched[ri] {
                    self.touched[ri] = true;
                    self.next_active.push(*r);
                }
                self.next[ri] -= v * xv;
            }
            if self.op.is_sink(src as usize) {
                let si = src as usize;
                if !self.touched[si] {
                    self.touched[si] = true;
                    self.next_active.push(src);
                }
                self.next[si] -= xv;
            }
        }
        // clear the previous monomial and swap in the new one
        for &i in &self.cur_active {
            self.cur[i as usize] = 0.0;
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        std::mem::swap(&mut self.cur_active, &mut self.next_active);
        for &i in &self.cur_active {
            self.touched[i as usize] = false;
        }
        self.cur_active.sort_unstable();
        for &i in &self.cur_active {
            if !self.in_psi[i as usize] {
                self.in_psi[i as usize] = true;
                self.psi_active.push(i);
            }
        }
        for (s, p) in self.psi.iter_mut().enumerate() {
            let a = self.coeffs.for_tau(s)[k];
            for &i in &self.cur_active {
                p[i as usize] += a * self.cur[i as usize];
            }
        }
    }

    // Same arithmetic order as the sparse step, iterating every source.
    fn step_dense(&mut self, k: usize) {
        let n = self.op.n();
        self.next.fill(0.0);
        for src in 0..n {
            let xv = self.cur[src];
            if xv == 0.0 {
                continue;
            }
            let (rows, vals) = self.op.alpha_column(src);
            for (r, v) in rows.iter().zip(vals) {
                self.next[*r as usize] -= v * xv;
            }
            if self.op.is_sink(src) {
                self.next[src] -= xv;
            }
        }
        std::mem::swap(&mut self.cur, &mut self.next);
        for (s, p) in self.psi.iter_mut().enumerate() {
            let a = self.coeffs.for_tau(s)[k];
            for (pi, xi) in p.iter_mut().zip(self.cur.iter()) {
                *pi += a * xi;
            }
        }
    }
}

/// Evaluate `Ψ` columns for `batch` at every timescale in `coeffs`.
///
/// Entries are clamped to `[0, 1]` after recording the raw minimum; the raw
/// minimum must stay above `-error_bound` for a healthy run.
pub fn expm_batch(
    op: &DiffusionOperator,
    batch: &[u32],
    coeffs: &TaylorCoefficients,
) -> Result<ReachabilityBatch> {
    if coeffs.n_taus() == 0 {
        return Err(DgwError::Config("no timescales in coefficient table".into()));
    }
    let n = op.n();
    let mut seen = std::collections::HashSet::new();
    for &b in batch {
        if (b as usize) >= n {
            return Err(DgwError::Validation(format!(
                "batch node id {b} out of range for graph with {n} nodes"
            )));
        }
        if !seen.insert(b) {
            return Err(DgwError::Validation(format!("duplicate batch node id {b}")));
        }
    }

    let mut data: Vec<Array2<f64>> =
        (0..coeffs.n_taus()).map(|_| Array2::zeros((n, batch.len()))).collect();
    let mut engine = ColumnEngine::new(op, coeffs);
    let mut raw_min = 0.0f64;
    for (b, &j) in batch.iter().enumerate() {
        let col = engine.compute(j)?;
        raw_min = raw_min.min(col.raw_min);
        for (s, vals) in col.values.iter().enumerate() {
            for &i in col.indices {
                data[s][(i as usize, b)] = vals[i as usize];
            }
        }
    }
    Ok(ReachabilityBatch {
        node_ids: batch.to_vec(),
        taus: coeffs.taus().to_vec(),
        data,
        raw_min,
    })
}

/// Inputs to the combined truncation + rounding error bound.
#[derive(Debug, Clone, Copy)]
pub struct ErrorModel {
    pub order: usize,
    pub n: usize,
    pub tau: f64,
    pub precision: Precision,
    /// Small integer constant in the rounding term; its precise value does
    /// not matter.
    pub c: f64,
}

impl ErrorModel {
    pub fn new(order: usize, n: usize, tau: f64, precision: Precision) -> Self {
        ErrorModel { order, n, tau, precision, c: 4.0 }
    }
}

/// The 1-norm error bound `(e^τ τ^{K+1}/(K+1)! + γ̃_{Kn}) e^τ`.
///
/// Returns `+∞` when `cKnu ≥ 1`, signalling that the requested precision is
/// infeasible at this matrix size.
pub fn error_bound(model: &ErrorModel) -> f64 {
    let u = model.precision.unit_roundoff();
    let cknu = model.c * model.order as f64 * model.n as f64 * u;
    if cknu >= 1.0 {
        return f64::INFINITY;
    }
    let gamma = cknu / (1.0 - cknu);
    let kp1 = model.order + 1;
    let mut fact = 1.0f64;
    for i in 1..=kp1 {
        fact *= i as f64;
    }
    let taylor = model.tau.exp() * model.tau.powi(kp1 as i32) / fact;
    (taylor + gamma) * model.tau.exp()
}

/// Outcome of [`select_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectedOrder {
    pub order: usize,
    /// False when no order ≤ 64 met the target and the default 40 was used.
    pub met_target: bool,
}

/// Smallest `K ≤ 64` whose [`error_bound`] at `taumax` meets `target`, falling
/// back to `K = 40` when none does.
pub fn select_order(taumax: f64, n: usize, precision: Precision, target: f64) -> SelectedOrder {
    assert!(target > 0.0);
    for order in 1..=64 {
        let b = error_bound(&ErrorModel::new(order, n, taumax, precision));
        if b <= target {
            return SelectedOrder { order, met_target: true };
        }
    }
    SelectedOrder { order: 40, met_target: false }
}

pub const DEFAULT_ORDER: usize = 40;
pub const DEFAULT_ERROR_TARGET: f64 = 1e-6;
