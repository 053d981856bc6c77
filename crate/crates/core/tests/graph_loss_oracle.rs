//! Adjacency construction and the surrogate loss against brute-force loops.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spectral_ood::graph::{build_graph, self_supervised_adjacency, supervised_adjacency, GraphBundle, GraphWeights};
use spectral_ood::loss::{equivalence_gap, features_from_factor, matrix_loss, surrogate_loss};
use spectral_ood::population::{
    build_parametric_population, build_toy_population, AugmentationModel, AugmentationParams, CellSpec, Membership,
    NaturalExample, Population, PopulationSpec, ToyVariant, NOVEL_CLASS,
};
use spectral_ood::spectral::{closed_form_embedding, eigendecompose};

fn cell(class: Option<u32>, domain: u32, membership: Membership, count: usize) -> CellSpec {
    CellSpec { class, domain, membership, count }
}

/// 2 classes × 2 domains × 3 examples, plus one semantic example.
fn thirteen_spec() -> PopulationSpec {
    PopulationSpec {
        classes: vec![0, 1],
        domains: vec![0, 1, 2],
        cells: vec![
            cell(Some(0), 0, Membership::LabeledId, 2),
            cell(Some(0), 0, Membership::WildId, 1),
            cell(Some(1), 0, Membership::LabeledId, 2),
            cell(Some(1), 0, Membership::WildId, 1),
            cell(Some(0), 1, Membership::WildCovariate, 3),
            cell(Some(1), 1, Membership::WildCovariate, 3),
            cell(None, 2, Membership::WildSemantic, 1),
        ],
        pi_c: None,
        pi_s: None,
    }
}

fn explicit(model: &AugmentationModel) -> &Array2<f64> {
    match model {
        AugmentationModel::Explicit(t) => t,
        AugmentationModel::Parametric(_) => panic!("expected an explicit model"),
    }
}

#[test]
fn parametric_transition_matches_rule_loop() {
    let p = AugmentationParams::new(1.0, 0.3, 0.2, 0.05);
    let (pop, model) = build_parametric_population(&thirteen_spec(), &AugmentationModel::Parametric(p)).unwrap();
    let t = explicit(&model);
    assert_eq!(t.dim(), (13, 13));
    let ex = pop.examples();
    for i in 0..13 {
        for j in 0..13 {
            let same_class = ex[i].class_label == ex[j].class_label;
            let same_domain = ex[i].domain_label == ex[j].domain_label;
            let want = if same_class && same_domain {
                p.rho
            } else if same_class {
                p.alpha
            } else if same_domain {
                p.beta
            } else {
                p.gamma
            };
            assert_eq!(t[[i, j]], want, "entry ({i}, {j})");
        }
    }
}

fn random_population(n: usize, rng: &mut ChaCha8Rng) -> Population {
    let examples = (0..n)
        .map(|index| {
            let membership = match index % 4 {
                0 | 1 => Membership::LabeledId,
                2 => Membership::WildCovariate,
                _ => Membership::WildSemantic,
            };
            let (class_label, domain_label) = match membership {
                Membership::LabeledId => (rng.random_range(0..2), 0),
                Membership::WildCovariate => (rng.random_range(0..2), 1),
                _ => (NOVEL_CLASS, 2),
            };
            NaturalExample { index, class_label, domain_label, membership }
        })
        .collect();
    Population::new(examples, vec![0, 1], vec![0, 1, 2]).unwrap()
}

fn random_transition(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, n), || rng.random_range(0.0..1.0))
}

#[test]
fn self_supervised_adjacency_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pop = random_population(7, &mut rng);
    let t = random_transition(7, &mut rng);
    let a_u = self_supervised_adjacency(&AugmentationModel::Explicit(t.clone()), &pop).unwrap();
    for x in 0..7 {
        for y in 0..7 {
            let mut want = 0.0;
            for nat in 0..7 {
                want += t[[nat, x]] * t[[nat, y]];
            }
            want /= 7.0;
            assert!((a_u[[x, y]] - want).abs() <= 1e-15, "({x}, {y})");
        }
    }
}

#[test]
fn supervised_adjacency_matches_labeled_pair_expectation() {
    let p = AugmentationParams::new(1.0, 0.3, 0.2, 0.05);
    let (pop, model) = build_parametric_population(&thirteen_spec(), &AugmentationModel::Parametric(p)).unwrap();
    let t = explicit(&model);
    let a_l = supervised_adjacency(&model, &pop).unwrap();
    let labeled: Vec<&NaturalExample> = pop.examples().iter().filter(|e| e.membership == Membership::LabeledId).collect();
    for x in 0..13 {
        for y in 0..13 {
            let mut want = 0.0;
            for class in [0, 1] {
                let rows: Vec<usize> = labeled.iter().filter(|e| e.class_label == class).map(|e| e.index).collect();
                let mut sum = 0.0;
                for &a in &rows {
                    for &b in &rows {
                        sum += t[[a, x]] * t[[b, y]];
                    }
                }
                want += sum / (rows.len() * rows.len()) as f64;
            }
            assert!((a_l[[x, y]] - want).abs() <= 1e-15, "({x}, {y})");
        }
    }
}

fn random_factor(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, k), || {
        let x: f64 = StandardNormal.sample(rng);
        x
    })
}

#[test]
fn matrix_loss_matches_entrywise_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = random_factor(6, 3, &mut rng);
    let a = random_transition(6, &mut rng);
    let a = &a + &a.t();
    let mut want = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            let ff: f64 = (0..3).map(|c| f[[i, c]] * f[[j, c]]).sum();
            want += (a[[i, j]] - ff).powi(2);
        }
    }
    let got = matrix_loss(f.view(), a.view()).unwrap();
    assert!((got - want).abs() <= 1e-12 * want);
}

/// `Σ_{x,x'} (−2 w_{xx'} fᵀf' + w_x w_{x'} (fᵀf')²)` with `w = A` and
/// `w_x` the degrees.
fn pairwise_expansion(f: &Array2<f64>, bundle: &GraphBundle) -> f64 {
    let n = bundle.len();
    let mut total = 0.0;
    for x in 0..n {
        for y in 0..n {
            let dot: f64 = f.row(x).dot(&f.row(y));
            total += -2.0 * bundle.a[[x, y]] * dot + bundle.degrees[x] * bundle.degrees[y] * dot * dot;
        }
    }
    total
}

#[test]
fn surrogate_matches_pairwise_expansion_on_random_populations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let n = 8 + rng.random_range(0..5);
        let pop = random_population(n, &mut rng);
        let model = AugmentationModel::Explicit(random_transition(n, &mut rng));
        let w = GraphWeights::new(rng.random_range(0.5..5.0), rng.random_range(0.0..2.0)).unwrap();
        let bundle = build_graph(&model, &pop, w).unwrap();
        let f = random_factor(n, 3, &mut rng);
        let got = surrogate_loss(f.view(), &model, &pop, w).unwrap().total;
        let want = pairwise_expansion(&f, &bundle);
        assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn surrogate_terms_match_their_definitions() {
    let (pop, model) = build_toy_population(ToyVariant::CaseB, AugmentationParams::new(1.0, 0.2, 0.1, 0.02)).unwrap();
    let t = explicit(&model).clone();
    let w = GraphWeights::new(5.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_factor(5, 2, &mut rng);
    let got = surrogate_loss(f.view(), &model, &pop, w).unwrap();

    // profiles of the two labeled examples (one per class)
    let s = [t.row(0).to_owned(), t.row(1).to_owned()];
    let d_u: Vec<f64> = (0..5).map(|x| (0..5).map(|nat| t[[nat, x]] * t.row(nat).sum()).sum::<f64>() / 5.0).collect();
    let d_l: Vec<f64> = (0..5).map(|x| s.iter().map(|si| si[x] * si.sum()).sum()).collect();
    let c = 5.0 * d_u.iter().sum::<f64>() + d_l.iter().sum::<f64>();
    let dot = |x: usize, y: usize| f.row(x).dot(&f.row(y));

    let mut l1 = 0.0;
    for si in &s {
        for x in 0..5 {
            for y in 0..5 {
                l1 += si[x] * si[y] * dot(x, y);
            }
        }
    }
    l1 /= c;
    let mut l2 = 0.0;
    for nat in 0..5 {
        for x in 0..5 {
            for y in 0..5 {
                l2 += t[[nat, x]] * t[[nat, y]] * dot(x, y);
            }
        }
    }
    l2 /= 5.0 * c;
    let neg = |a: &[f64], b: &[f64]| {
        let mut sum = 0.0;
        for x in 0..5 {
            for y in 0..5 {
                sum += a[x] * b[y] * dot(x, y).powi(2);
            }
        }
        sum / (c * c)
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    assert!(close(got.l1, l1));
    assert!(close(got.l2, l2));
    assert!(close(got.l3, neg(&d_l, &d_l)));
    assert!(close(got.l4, neg(&d_l, &d_u)));
    assert!(close(got.l5, neg(&d_u, &d_u)));
}

#[test]
fn toy_embedding_total_equals_factor_loss_minus_energy() {
    let (pop, model) = build_toy_population(ToyVariant::CaseA, AugmentationParams::new(1.0, 0.03, 0.01, 1e-6)).unwrap();
    let bundle = build_graph(&model, &pop, GraphWeights::default()).unwrap();
    let spec = eigendecompose(bundle.a_tilde.view(), 3).unwrap();
    let z = closed_form_embedding(&bundle, &spec).unwrap().z;
    let total = surrogate_loss(z.view(), &model, &pop, bundle.weights).unwrap().total;
    let f = spec.optimal_factor();
    let rebuilt = features_from_factor(f.view(), &bundle.degrees);
    assert!(rebuilt.iter().zip(z.iter()).all(|(a, b)| (a - b).abs() <= 1e-14));
    let energy: f64 = bundle.a_tilde.iter().map(|x| x * x).sum();
    let want = matrix_loss(f.view(), bundle.a_tilde.view()).unwrap() - energy;
    assert!((total - want).abs() <= 1e-12, "{total} vs {want}");
}

#[test]
fn equivalence_on_mixed_bundles() {
    let p = AugmentationParams::new(1.0, 0.3, 0.2, 0.05);
    let (pop, model) = build_parametric_population(&thirteen_spec(), &AugmentationModel::Parametric(p)).unwrap();
    for w in [GraphWeights::new(5.0, 1.0).unwrap(), GraphWeights::new(1.0, 3.0).unwrap(), GraphWeights::new(2.0, 0.0).unwrap()] {
        let bundle = build_graph(&model, &pop, w).unwrap();
        let g = equivalence_gap(10, 11, &model, &pop, &bundle, 4).unwrap();
        assert!(g.relative_spread() <= 1e-9, "{w:?}: {}", g.relative_spread());
        assert!(g.relative_offset_error() <= 1e-9, "{w:?}: {}", g.relative_offset_error());
    }
}

#[test]
fn augmented_space_larger_than_natural_set() {
    // 5 natural examples, 8 augmented views
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (pop, _) = build_toy_population(ToyVariant::CaseA, AugmentationParams::new(1.0, 0.1, 0.1, 0.01)).unwrap();
    let t = Array2::from_shape_simple_fn((5, 8), || rng.random_range(0.05..1.0));
    let model = AugmentationModel::Explicit(t);
    let bundle = build_graph(&model, &pop, GraphWeights::default()).unwrap();
    assert_eq!(bundle.len(), 8);
    let g = equivalence_gap(6, 3, &model, &pop, &bundle, 3).unwrap();
    assert!(g.relative_spread() <= 1e-9);
    assert!(g.relative_offset_error() <= 1e-9);
}
