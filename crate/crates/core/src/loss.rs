//! The five-term surrogate contrastive loss, evaluated as exact finite sums,
//! and its constant-offset equivalence with the factorization loss.
//!
//! With `f(x) = F[x,:]/√w_x`, every term is an inner-product statistic of
//! the rows of `f`:
//!
//! * `L1`: labeled positive pairs, `(1/C) Σ_i ‖fᵀ s_i‖²` where `s_i` is the
//!   mean transition row of the labeled examples of class `i`;
//! * `L2`: unlabeled positive pairs, `(1/C) (1/N̄) Σ_x̄ ‖Σ_x T[x̄,x] f(x)‖²`;
//! * `L3`, `L4`, `L5`: negative pairs `(f(x)ᵀf(x'))²` weighted by the
//!   labeled/labeled, labeled/unlabeled and unlabeled/unlabeled degree
//!   products, each over `C²`.
//!
//! The weights are `-2η_l, -2η_u, η_l², 2η_lη_u, η_u²`: labeled terms carry
//! `η_l`, unlabeled terms carry `η_u`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{labeled_class_profiles, GraphBundle, GraphWeights};
use crate::linalg::{frobenius_sq, row_sums};
use crate::population::{AugmentationModel, Population};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "L5")]
    pub l5: f64,
    pub total: f64,
    pub eta: GraphWeights,
}

impl LossBreakdown {
    fn assemble(l: [f64; 5], eta: GraphWeights) -> Self {
        let (eu, el) = (eta.eta_u, eta.eta_l);
        let total = -2.0 * el * l[0] - 2.0 * eu * l[1] + el * el * l[2] + 2.0 * el * eu * l[3] + eu * eu * l[4];
        Self { l1: l[0], l2: l[1], l3: l[2], l4: l[3], l5: l[4], total, eta }
    }
}

fn quad_form(h: &Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.dot(&h.dot(b))
}

/// Exact surrogate loss of the feature rows `f` (one row per augmented view).
pub fn surrogate_loss(
    f: ArrayView2<'_, f64>,
    model: &AugmentationModel,
    population: &Population,
    weights: GraphWeights,
) -> Result<LossBreakdown> {
    weights.validate()?;
    let t = model.transition_matrix(population)?;
    let (n_bar, n) = t.dim();
    if f.nrows() != n {
        return Err(Error::DimensionMismatch(format!("f has {} rows but there are {n} augmented views", f.nrows())));
    }
    if n_bar == 0 {
        return Err(Error::Empty("population"));
    }

    let profiles = labeled_class_profiles(t.view(), population);
    // unnormalized connectivity: degrees and total masses of A_u and A_l
    let row_mass = row_sums(t.view());
    let d_u = t.t().dot(&row_mass) / n_bar as f64;
    let mut d_l = Array1::zeros(n);
    for s in &profiles {
        d_l.scaled_add(s.sum(), s);
    }
    let c = weights.eta_u * d_u.sum() + weights.eta_l * d_l.sum();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::ZeroDegree(0));
    }

    let l1 = profiles.iter().map(|s| s.dot(&f).mapv(|x| x * x).sum()).sum::<f64>() / c;
    let pooled = t.dot(&f);
    let l2 = pooled.mapv(|x| x * x).sum() / (n_bar as f64 * c);

    let gram = f.dot(&f.t());
    let h = gram.mapv(|x| x * x);
    let c2 = c * c;
    let l3 = quad_form(&h, &d_l, &d_l) / c2;
    let l4 = quad_form(&h, &d_l, &d_u) / c2;
    let l5 = quad_form(&h, &d_u, &d_u) / c2;
    Ok(LossBreakdown::assemble([l1, l2, l3, l4, l5], weights))
}

/// `‖Ã − FFᵀ‖²_F`.
pub fn matrix_loss(f: ArrayView2<'_, f64>, a_tilde: ArrayView2<'_, f64>) -> Result<f64> {
    let n = a_tilde.nrows();
    if a_tilde.ncols() != n || f.nrows() != n {
        return Err(Error::DimensionMismatch(format!("F is {:?}, Ã is {:?}", f.dim(), a_tilde.dim())));
    }
    Ok(frobenius_sq((f.dot(&f.t()) - a_tilde).view()))
}

/// Rows of `F` divided by the square roots of the degrees.
pub fn features_from_factor(f: ArrayView2<'_, f64>, degrees: &Array1<f64>) -> Array2<f64> {
    let mut out = f.to_owned();
    for (mut row, d) in out.axis_iter_mut(Axis(0)).zip(degrees.iter()) {
        row /= d.sqrt();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceGap {
    /// `matrix_loss(F_t) − surrogate_loss(f_t).total` per trial.
    pub gaps: Vec<f64>,
    pub spread: f64,
    /// `Σ Ã²`, the offset the gap should equal.
    pub constant: f64,
    /// Surrogate breakdown of the first trial.
    pub first: LossBreakdown,
}

impl EquivalenceGap {
    /// Spread relative to `1 + |g_1|`.
    pub fn relative_spread(&self) -> f64 {
        self.spread / (1.0 + self.gaps[0].abs())
    }

    /// Largest deviation of a gap from the constant, relative to the constant.
    pub fn relative_offset_error(&self) -> f64 {
        self.gaps.iter().map(|g| (g - self.constant).abs()).fold(0.0, f64::max) / self.constant.abs().max(f64::MIN_POSITIVE)
    }
}

/// Draws `trials` seeded random factors and reports how far the gap between
/// the factorization loss and the surrogate loss moves.
pub fn equivalence_gap(
    trials: usize,
    seed: u64,
    model: &AugmentationModel,
    population: &Population,
    bundle: &GraphBundle,
    k: usize,
) -> Result<EquivalenceGap> {
    if trials < 2 {
        return Err(Error::InvalidParameter(format!("trials must be at least 2, got {trials}")));
    }
    let n = bundle.len();
    if k == 0 {
        return Err(Error::InvalidRank { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<Array2<f64>> = (0..trials)
        .map(|_| {
            Array2::from_shape_simple_fn((n, k), || {
                let x: f64 = StandardNormal.sample(&mut rng);
                x
            })
        })
        .collect();
    gap_for_factors(&factors, model, population, bundle)
}

/// The same report for caller-supplied factors.
pub fn gap_for_factors(
    factors: &[Array2<f64>],
    model: &AugmentationModel,
    population: &Population,
    bundle: &GraphBundle,
) -> Result<EquivalenceGap> {
    if factors.is_empty() {
        return Err(Error::Empty("factors"));
    }
    let mut gaps = Vec::with_capacity(factors.len());
    let mut first = None;
    for f in factors {
        let l_mf = matrix_loss(f.view(), bundle.a_tilde.view())?;
        let feats = features_from_factor(f.view(), &bundle.degrees);
        let sur = surrogate_loss(feats.view(), model, population, bundle.weights)?;
        gaps.push(l_mf - sur.total);
        first.get_or_insert(sur);
    }
    let max = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(EquivalenceGap {
        gaps,
        spread: max - min,
        constant: frobenius_sq(bundle.a_tilde.view()),
        first: first.expect("nonempty"),
    })
}

/// Loss report with the key order used in JSON output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    #[serde(rename = "L3")]
    pub l3: f64,
    #[serde(rename = "L4")]
    pub l4: f64,
    #[serde(rename = "L5")]
    pub l5: f64,
    pub total: f64,
    pub gap_spread: f64,
    pub constant: f64,
}

impl From<&EquivalenceGap> for LossReport {
    fn from(g: &EquivalenceGap) -> Self {
        let b = &g.first;
        Self { l1: b.l1, l2: b.l2, l3: b.l3, l4: b.l4, l5: b.l5, total: b.total, gap_spread: g.spread, constant: g.constant }
    }
}
