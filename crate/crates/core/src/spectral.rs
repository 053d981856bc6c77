//! Spectral embeddings of the normalized adjacency, computed two ways: a
//! dense eigendecomposition, and gradient descent on the low-rank
//! factorization loss `‖Ã − FFᵀ‖²`.

use std::cmp::Ordering;

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphBundle;
use crate::linalg::{check_symmetric, column_projector, frobenius, frobenius_sq, symmetric_eigen};
use crate::report::fmt_f64;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Eigenvalues closer than this (relative to the spectral radius) are
/// treated as one degenerate value when ordering eigenvectors.
const TIE_TOLERANCE: f64 = 1e-12;

const MAX_HALVINGS: usize = 60;

/// Full descending spectrum of a symmetric matrix plus the chosen rank.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub eigenvalues: Array1<f64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Array2<f64>,
    pub k: usize,
}

impl SpectralEmbedding {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn v_k(&self) -> Array2<f64> {
        self.eigenvectors.slice(s![.., ..self.k]).to_owned()
    }

    /// Top-k eigenvalues clamped at zero.
    pub fn sigma_k(&self) -> Array1<f64> {
        self.eigenvalues.slice(s![..self.k]).mapv(|x| x.max(0.0))
    }

    /// `Σ_{i>k} λ_i²`, the smallest reachable factorization loss at rank k.
    pub fn tail_energy(&self) -> f64 {
        self.eigenvalues.slice(s![self.k..]).iter().map(|x| x * x).sum()
    }

    /// `V_k √Σ_k`, a minimizer of the factorization loss at rank k.
    pub fn optimal_factor(&self) -> Array2<f64> {
        let root = self.sigma_k().mapv(f64::sqrt);
        let mut f = self.v_k();
        for (mut col, r) in f.columns_mut().into_iter().zip(root.iter()) {
            col *= *r;
        }
        f
    }

    /// Orthogonal projector onto the span of the top `m` eigenvectors.
    pub fn projector(&self, m: usize) -> Array2<f64> {
        let v = self.eigenvectors.slice(s![.., ..m]);
        v.dot(&v.t())
    }
}

fn fix_sign(col: &mut [f64]) {
    let mut best = 0;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        for x in col.iter_mut() {
            *x = -*x;
        }
    }
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Eigenpairs sorted by descending eigenvalue with deterministic signs: each
/// vector's largest-magnitude entry is positive (first such entry on ties).
/// Within a degenerate group the sign-fixed vectors are ordered
/// lexicographically, largest first.
pub fn eigendecompose(a_tilde: ArrayView2<'_, f64>, k: usize) -> Result<SpectralEmbedding> {
    let n = a_tilde.nrows();
    check_symmetric(a_tilde, SYMMETRY_TOLERANCE)?;
    if k == 0 || k > n {
        return Err(Error::InvalidRank { k, n });
    }
    let eig = symmetric_eigen(a_tilde)?;
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut v = eig.vectors.column(i).to_vec();
            fix_sign(&mut v);
            (eig.values[i], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let radius = pairs.iter().fold(0.0_f64, |m, p| m.max(p.0.abs()));
    let tie = TIE_TOLERANCE * radius.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end - 1].0 - pairs[end].0 <= tie {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic_desc(&a.1, &b.1));
        start = end;
    }

    let eigenvalues = Array1::from_iter(pairs.iter().map(|p| p.0));
    let eigenvectors = Array2::from_shape_fn((n, n), |(r, c)| pairs[c].1[r]);
    Ok(SpectralEmbedding { eigenvalues, eigenvectors, k })
}

#[derive(Debug, Clone)]
pub struct ClosedFormEmbedding {
    /// Rows are the features `f(x) = V_k[x,:] √Σ_k / √D[x]`.
    pub z: Array2<f64>,
    /// Indices of top-k eigenvalues that were negative and clamped to zero.
    pub clamped: Vec<usize>,
}

/// `Z = D^{-1/2} V_k √Σ_k`.
pub fn closed_form_embedding(bundle: &GraphBundle, spec: &SpectralEmbedding) -> Result<ClosedFormEmbedding> {
    let n = bundle.len();
    if spec.n() != n {
        return Err(Error::DimensionMismatch(format!("embedding has {} rows, graph has {n} vertices", spec.n())));
    }
    let clamped: Vec<usize> = (0..spec.k).filter(|&i| spec.eigenvalues[i] < 0.0).collect();
    if !clamped.is_empty() {
        log::warn!("clamping negative top-k eigenvalues at indices {clamped:?} to zero");
    }
    let mut z = spec.optimal_factor();
    for (mut row, d) in z.rows_mut().into_iter().zip(bundle.degrees.iter()) {
        row /= d.sqrt();
    }
    Ok(ClosedFormEmbedding { z, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizeOptions {
    /// Initial (and largest) step size of the backtracking search.
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the relative loss decrease of an accepted step falls below
    /// this value.
    pub tol: f64,
    pub seed: u64,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        Self { step: 0.1, max_iters: 10_000, tol: 1e-14, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct FactorizationState {
    pub f: Array2<f64>,
    /// `(iteration, loss)` for the initial point and every accepted step.
    pub loss_trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub iterations: usize,
}

impl FactorizationState {
    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().map_or(f64::NAN, |p| p.1)
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,loss\n");
        for (it, loss) in &self.loss_trace {
            out.push_str(&format!("{it},{}\n", fmt_f64(*loss)));
        }
        out
    }
}

fn residual(f: &Array2<f64>, a_tilde: ArrayView2<'_, f64>) -> Array2<f64> {
    f.dot(&f.t()) - a_tilde
}

/// Gradient descent on `‖Ã − FFᵀ‖²` with gradient `4(FFᵀ − Ã)F`.
///
/// Each iteration tries twice the previously accepted step (capped at
/// `opts.step`) and halves it until the loss decreases. The run stops when
/// the relative decrease drops below `opts.tol`, when the gradient vanishes
/// to rounding level, or when no decreasing step exists (both count as
/// converged), or after `opts.max_iters` iterations (not converged).
pub fn lowrank_factorize(a_tilde: ArrayView2<'_, f64>, k: usize, opts: &FactorizeOptions) -> Result<FactorizationState> {
    check_symmetric(a_tilde, SYMMETRY_TOLERANCE)?;
    let n = a_tilde.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidRank { k, n });
    }
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {}", opts.step)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = 1.0 / ((n * k) as f64).sqrt();
    let mut f = Array2::from_shape_simple_fn((n, k), || {
        let x: f64 = StandardNormal.sample(&mut rng);
        x * scale
    });

    let target_norm = frobenius(a_tilde);
    let mut r = residual(&f, a_tilde);
    let mut loss = frobenius_sq(r.view());
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(0));
    }
    let mut trace = vec![(0, loss)];
    let mut step = opts.step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let grad = r.dot(&f) * 4.0;
        let grad_norm = frobenius(grad.view());
        if loss == 0.0 || grad_norm <= f64::EPSILON * f64::EPSILON * (1.0 + target_norm) {
            converged = true;
            break;
        }
        step = (2.0 * step).min(opts.step);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &f - &(&grad * step);
            let cand_r = residual(&candidate, a_tilde);
            let cand_loss = frobenius_sq(cand_r.view());
            if !cand_loss.is_finite() {
                step *= 0.5;
                continue;
            }
            if cand_loss < loss {
                accepted = Some((candidate, cand_r, cand_loss));
                break;
            }
            step *= 0.5;
        }
        let Some((nf, nr, new_loss)) = accepted else {
            converged = true;
            break;
        };
        if !new_loss.is_finite() {
            return Err(Error::NonFiniteLoss(iterations));
        }
        let rel = (loss - new_loss) / loss.max(f64::MIN_POSITIVE);
        f = nf;
        r = nr;
        loss = new_loss;
        trace.push((iterations, loss));
        if rel < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FactorizationState { f, loss_trace: trace, converged, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionGap {
    pub loss_gap: f64,
    pub subspace_gap: f64,
}

/// Distance of a factorization from the rank-k spectral optimum, in loss and
/// in column-span projectors.
pub fn reconstruction_gap(state: &FactorizationState, spec: &SpectralEmbedding) -> Result<ReconstructionGap> {
    if state.f.ncols() != spec.k || state.f.nrows() != spec.n() {
        return Err(Error::DimensionMismatch(format!(
            "factor is {:?} but the embedding has n={}, k={}",
            state.f.dim(),
            spec.n(),
            spec.k
        )));
    }
    let loss_gap = state.final_loss() - spec.tail_energy();
    let p_f = column_projector(state.f.view())?;
    let p_v = spec.projector(spec.k);
    let subspace_gap = frobenius((&p_f - &p_v).view());
    Ok(ReconstructionGap { loss_gap, subspace_gap })
}
