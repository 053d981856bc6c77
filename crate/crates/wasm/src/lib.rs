//! Browser bindings: toy explorer, regime sweep and factorizer trace.
//! Every export returns a JSON string; errors surface as JS exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use spectral_ood::graph::build_graph;
use spectral_ood::population::build_toy_population;
use spectral_ood::spectral::{eigendecompose, lowrank_factorize, FactorizeOptions};
use spectral_ood::theory::{closed_form, numeric_pipeline, sweep, ReducedParams, TheoryCase, TOY_RANK};
use spectral_ood::{Error, Result};

/// Grid points per axis accepted by [`sweep_map`].
pub const MAX_RESOLUTION: usize = 80;

pub const MAX_ITERS: usize = 5_000;

#[derive(Serialize)]
struct ToyView {
    case: TheoryCase,
    alpha_prime: f64,
    beta_prime: f64,
    eigenvalues_closed: Vec<f64>,
    eigenvalues_numeric: Vec<f64>,
    /// Closed-form embedding rows, one per toy example.
    z_closed: Vec<Vec<f64>>,
    z_numeric: Vec<Vec<f64>>,
    probing_error_closed: usize,
    probing_error_numeric: usize,
    separability_closed: f64,
    separability_numeric: f64,
}

fn rows(a: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)?)
}

pub fn explore_toy_json(variant: &str, alpha_prime: f64, beta_prime: f64) -> Result<String> {
    let case: TheoryCase = variant.parse()?;
    let p = ReducedParams::new(alpha_prime, beta_prime, 1e-6)?;
    let closed = closed_form(case, &p)?;
    let numeric = numeric_pipeline(case, &p, 1.0)?;
    to_json(&ToyView {
        case,
        alpha_prime,
        beta_prime,
        eigenvalues_closed: closed.eigenvalues.clone(),
        eigenvalues_numeric: numeric.eigenvalues.clone(),
        z_closed: rows(&closed.z_hat),
        z_numeric: rows(&numeric.z),
        probing_error_closed: closed.probing_error_count,
        probing_error_numeric: numeric.probing_error_count,
        separability_closed: closed.separability,
        separability_numeric: numeric.separability,
    })
}

#[derive(Serialize)]
struct SweepCell {
    a: f64,
    b: f64,
    /// Numeric probing error count.
    err: usize,
    /// Closed-form label gap, `null` on a regime boundary.
    gap_label: Option<f64>,
    gap_ab: Option<f64>,
}

pub fn sweep_map_json(variant: &str, lo: f64, hi: f64, resolution: usize) -> Result<String> {
    let case: TheoryCase = variant.parse()?;
    if resolution == 0 || resolution > MAX_RESOLUTION {
        return Err(Error::InvalidParameter(format!("resolution must lie in 1..={MAX_RESOLUTION}")));
    }
    if !(lo > 0.0 && lo <= hi && hi <= 0.25) {
        return Err(Error::InvalidParameter(format!("bounds must satisfy 0 < lo <= hi <= 0.25, got {lo}, {hi}")));
    }
    let cells: Vec<SweepCell> = sweep(case, lo, hi, resolution, 1.0, 1e-6)?
        .into_iter()
        .map(|r| SweepCell {
            a: r.alpha_prime,
            b: r.beta_prime,
            err: r.probing_error_count_numeric,
            gap_label: r.gap_label,
            gap_ab: r.gap_ab,
        })
        .collect();
    to_json(&cells)
}

#[derive(Serialize)]
struct TraceView {
    iterations: usize,
    converged: bool,
    optimum: f64,
    trace: Vec<(usize, f64)>,
}

pub fn factorize_trace_json(variant: &str, alpha_prime: f64, beta_prime: f64, k: usize, seed: u64) -> Result<String> {
    let case: TheoryCase = variant.parse()?;
    let p = ReducedParams::new(alpha_prime, beta_prime, 1e-6)?;
    let (pop, model) = build_toy_population(case.toy_variant(), p.augmentation(1.0))?;
    let bundle = build_graph(&model, &pop, case.weights())?;
    let spec = eigendecompose(bundle.a_tilde.view(), k)?;
    let opts = FactorizeOptions { max_iters: MAX_ITERS, seed, ..FactorizeOptions::default() };
    let state = lowrank_factorize(bundle.a_tilde.view(), k, &opts)?;
    to_json(&TraceView {
        iterations: state.iterations,
        converged: state.converged,
        optimum: spec.tail_energy(),
        trace: state.loss_trace,
    })
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Closed-form and numeric quantities for one toy setting.
#[wasm_bindgen(js_name = exploreToy)]
pub fn explore_toy(variant: &str, alpha_prime: f64, beta_prime: f64) -> std::result::Result<String, JsError> {
    js(explore_toy_json(variant, alpha_prime, beta_prime))
}

/// Probing error and separability gaps over a square grid.
#[wasm_bindgen(js_name = sweepMap)]
pub fn sweep_map(variant: &str, lo: f64, hi: f64, resolution: usize) -> std::result::Result<String, JsError> {
    js(sweep_map_json(variant, lo, hi, resolution))
}

/// Loss trace of the gradient factorizer next to the spectral optimum.
#[wasm_bindgen(js_name = factorizeTrace)]
pub fn factorize_trace(variant: &str, alpha_prime: f64, beta_prime: f64, k: usize, seed: u32) -> std::result::Result<String, JsError> {
    js(factorize_trace_json(variant, alpha_prime, beta_prime, k, u64::from(seed)))
}

#[wasm_bindgen(js_name = toyRank)]
pub fn toy_rank() -> usize {
    TOY_RANK
}
