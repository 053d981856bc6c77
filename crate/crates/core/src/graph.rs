//! Augmentation graphs: self-supervised and supervised connectivity, their
//! weighted combination and the symmetric degree normalization.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, row_sums, total_sum};
use crate::population::{AugmentationModel, Population};
use crate::report::matrix_csv;

const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphWeights {
    pub eta_u: f64,
    pub eta_l: f64,
}

impl GraphWeights {
    pub fn new(eta_u: f64, eta_l: f64) -> Result<Self> {
        let w = Self { eta_u, eta_l };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_u.is_finite()
            && self.eta_l.is_finite()
            && self.eta_u >= 0.0
            && self.eta_l >= 0.0
            && self.eta_u + self.eta_l > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidWeights { eta_u: self.eta_u, eta_l: self.eta_l })
        }
    }
}

impl Default for GraphWeights {
    /// The weighting used throughout the toy analysis.
    fn default() -> Self {
        Self { eta_u: 5.0, eta_l: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjacencyKind {
    SelfSupervised,
    Supervised,
    Combined,
    Normalized,
}

impl AdjacencyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AdjacencyKind::SelfSupervised => "a_u",
            AdjacencyKind::Supervised => "a_l",
            AdjacencyKind::Combined => "a",
            AdjacencyKind::Normalized => "a_tilde",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphBundle {
    pub a_u: Array2<f64>,
    pub a_l: Array2<f64>,
    /// Combined adjacency; its entries sum to one.
    pub a: Array2<f64>,
    /// Normalization constant: `a = (eta_u a_u + eta_l a_l) / c`.
    pub c: f64,
    pub degrees: Array1<f64>,
    pub a_tilde: Array2<f64>,
    pub weights: GraphWeights,
}

impl GraphBundle {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn matrix(&self, kind: AdjacencyKind) -> &Array2<f64> {
        match kind {
            AdjacencyKind::SelfSupervised => &self.a_u,
            AdjacencyKind::Supervised => &self.a_l,
            AdjacencyKind::Combined => &self.a,
            AdjacencyKind::Normalized => &self.a_tilde,
        }
    }

    /// CSV dump with a one-line `# adjacency` header.
    pub fn to_csv(&self, kind: AdjacencyKind) -> String {
        format!("# adjacency N={} kind={}\n{}", self.len(), kind.as_str(), matrix_csv(self.matrix(kind).view()))
    }
}

/// `A_u[x, x'] = (1/N̄) Σ_x̄ T[x̄, x] T[x̄, x']`: the probability that two views
/// come from the same natural example under a uniform marginal.
pub fn self_supervised_adjacency(model: &AugmentationModel, population: &Population) -> Result<Array2<f64>> {
    let t = model.transition_matrix(population)?;
    if t.nrows() == 0 {
        return Err(Error::Empty("population"));
    }
    Ok(t.t().dot(&t) / t.nrows() as f64)
}

/// Mean transition row of the labeled examples of each known class; classes
/// without labeled examples are skipped.
pub fn labeled_class_profiles(t: ArrayView2<'_, f64>, population: &Population) -> Vec<Array1<f64>> {
    population
        .labeled_by_class()
        .into_iter()
        .filter(|rows| !rows.is_empty())
        .map(|rows| t.select(Axis(0), &rows).mean_axis(Axis(0)).expect("nonempty"))
        .collect()
}

/// `A_l = Σ_i s_i s_iᵀ` where `s_i` is the mean transition row of the labeled
/// examples of class `i`. Zero when nothing is labeled.
pub fn supervised_adjacency(model: &AugmentationModel, population: &Population) -> Result<Array2<f64>> {
    let t = model.transition_matrix(population)?;
    let n = t.ncols();
    let mut a_l = Array2::zeros((n, n));
    for s in labeled_class_profiles(t.view(), population) {
        for i in 0..n {
            for j in 0..n {
                a_l[[i, j]] += s[i] * s[j];
            }
        }
    }
    Ok(a_l)
}

/// Weights, normalizes to unit total mass and forms `D^{-1/2} A D^{-1/2}`.
pub fn combine_and_normalize(a_u: &Array2<f64>, a_l: &Array2<f64>, weights: GraphWeights) -> Result<GraphBundle> {
    weights.validate()?;
    if a_u.dim() != a_l.dim() {
        return Err(Error::DimensionMismatch(format!("A_u is {:?} but A_l is {:?}", a_u.dim(), a_l.dim())));
    }
    check_symmetric(a_u.view(), SYMMETRY_TOLERANCE)?;
    check_symmetric(a_l.view(), SYMMETRY_TOLERANCE)?;
    let n = a_u.nrows();
    if n == 0 {
        return Err(Error::Empty("adjacency"));
    }

    let raw = a_u * weights.eta_u + a_l * weights.eta_l;
    let c = total_sum(raw.view());
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::ZeroDegree(0));
    }
    let a = raw / c;
    let degrees = row_sums(a.view());
    if let Some(x) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree(x));
    }
    let inv_sqrt = degrees.mapv(|d| 1.0 / d.sqrt());
    let a_tilde = Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] * inv_sqrt[i] * inv_sqrt[j]);
    Ok(GraphBundle { a_u: a_u.clone(), a_l: a_l.clone(), a, c, degrees, a_tilde, weights })
}

/// Full graph construction for a population.
pub fn build_graph(model: &AugmentationModel, population: &Population, weights: GraphWeights) -> Result<GraphBundle> {
    let a_u = self_supervised_adjacency(model, population)?;
    let a_l = supervised_adjacency(model, population)?;
    combine_and_normalize(&a_u, &a_l, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{build_toy_population, AugmentationParams, ToyVariant};

    fn toy(variant: ToyVariant, p: AugmentationParams) -> (Population, AugmentationModel) {
        build_toy_population(variant, p).unwrap()
    }

    #[test]
    fn toy_self_supervised_diagonal() {
        let p = AugmentationParams::new(1.0, 0.3, 0.2, 0.05);
        let (pop, model) = toy(ToyVariant::CaseA, p);
        let a_u = self_supervised_adjacency(&model, &pop).unwrap();
        let expected = p.rho * p.rho + p.beta * p.beta + p.alpha * p.alpha + 2.0 * p.gamma * p.gamma;
        for i in 0..4 {
            assert!((5.0 * a_u[[i, i]] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_transition_gives_scaled_identity() {
        let (pop, _) = toy(ToyVariant::CaseA, AugmentationParams::new(1.0, 0.0, 0.0, 0.0));
        let model = AugmentationModel::Explicit(Array2::eye(5));
        assert_eq!(self_supervised_adjacency(&model, &pop).unwrap(), Array2::<f64>::eye(5) / 5.0);
    }

    #[test]
    fn toy_supervised_off_diagonal() {
        let p = AugmentationParams::new(0.9, 0.3, 0.2, 0.05);
        let (pop, model) = toy(ToyVariant::CaseA, p);
        let a_l = supervised_adjacency(&model, &pop).unwrap();
        assert!((a_l[[0, 1]] - 2.0 * p.rho * p.beta).abs() < 1e-15);
    }

    #[test]
    fn no_labeled_examples_gives_zero() {
        use crate::population::{Membership, NaturalExample};
        let ex = (0..3)
            .map(|i| NaturalExample { index: i, class_label: 0, domain_label: 0, membership: Membership::WildId })
            .collect();
        let pop = Population::new(ex, vec![0], vec![0]).unwrap();
        let model = AugmentationModel::Parametric(AugmentationParams::new(1.0, 0.5, 0.5, 0.1));
        assert_eq!(supervised_adjacency(&model, &pop).unwrap(), Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn combined_mass_is_one_and_c_invariance() {
        let (pop, model) = toy(ToyVariant::CaseB, AugmentationParams::new(1.0, 0.04, 0.03, 1e-3));
        let g1 = build_graph(&model, &pop, GraphWeights::new(5.0, 1.0).unwrap()).unwrap();
        let g2 = build_graph(&model, &pop, GraphWeights::new(50.0, 10.0).unwrap()).unwrap();
        assert!((g1.a.sum() - 1.0).abs() < 1e-12);
        for (x, y) in g1.a_tilde.iter().zip(g2.a_tilde.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn toy_case_a_scaled_first_row() {
        let (ap, bp) = (0.01, 0.02);
        let (pop, model) = toy(ToyVariant::CaseA, AugmentationParams::new(1.0, ap, bp, 0.0));
        let g = build_graph(&model, &pop, GraphWeights::default()).unwrap();
        let c_hat = 7.0 + 12.0 * bp + 12.0 * ap;
        let expected = [2.0, 4.0 * bp, 3.0 * ap, 0.0, 0.0];
        for (j, e) in expected.iter().enumerate() {
            // dropped terms are second order in the reduced parameters
            assert!((c_hat * g.a[[0, j]] - e).abs() < 1e-3, "entry {j}");
        }
    }

    #[test]
    fn isolated_vertex_is_named() {
        let (pop, model) = toy(ToyVariant::CaseA, AugmentationParams::new(1.0, 0.0, 0.0, 0.0));
        let mut t = model.transition_matrix(&pop).unwrap();
        t.column_mut(3).fill(0.0);
        let err = build_graph(&AugmentationModel::Explicit(t), &pop, GraphWeights::default());
        assert!(matches!(err, Err(Error::ZeroDegree(3))));
    }

    #[test]
    fn weights_must_be_positive_somewhere() {
        assert!(GraphWeights::new(0.0, 0.0).is_err());
        assert!(GraphWeights::new(-1.0, 2.0).is_err());
        assert!(GraphWeights::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn csv_header() {
        let (pop, model) = toy(ToyVariant::CaseA, AugmentationParams::new(1.0, 0.1, 0.1, 0.01));
        let g = build_graph(&model, &pop, GraphWeights::default()).unwrap();
        let csv = g.to_csv(AdjacencyKind::Normalized);
        assert!(csv.starts_with("# adjacency N=5 kind=a_tilde\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
