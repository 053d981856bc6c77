//! Closed forms for the toy populations, checked against literal
//! formula values and the exact numeric pipeline.

use spectral_ood::graph::{build_graph, GraphWeights};
use spectral_ood::population::{build_toy_population, AugmentationParams, ToyVariant};
use spectral_ood::theory::{
    closed_form, numeric_pipeline, separability_gap, sweep, verify_against_pipeline, ReducedParams, TheoryCase,
};

fn params(a: f64, b: f64) -> ReducedParams {
    ReducedParams::new(a, b, 1e-6).unwrap()
}

#[test]
fn case_a_separability_formula_and_pipeline() {
    let p = params(0.04, 0.02);
    let literal = (7.0 + 0.24 + 0.48) * ((1.0 - 0.04) / 3.0 * (1.0_f64 - 0.02 - 0.03).powi(2) + 1.0);
    let closed = closed_form(TheoryCase::A, &p).unwrap();
    assert!((closed.separability - literal).abs() <= 1e-12);
    assert!((closed.separability - 9.949536).abs() <= 1e-6);
    let numeric = numeric_pipeline(TheoryCase::A, &p, 1.0).unwrap().separability;
    assert!((numeric - literal).abs() / literal <= 0.05, "{numeric} vs {literal}");
}

#[test]
fn case_a_probing_error_branches_through_pipeline() {
    assert_eq!(numeric_pipeline(TheoryCase::A, &params(0.04, 0.02), 1.0).unwrap().probing_error_count, 0);
    assert_eq!(numeric_pipeline(TheoryCase::A, &params(0.01, 0.04), 1.0).unwrap().probing_error_count, 2);
}

#[test]
fn unsupervised_branches() {
    for (a, b, want) in [(0.03, 0.02, 0), (0.02, 0.03, 2)] {
        let p = params(a, b);
        assert_eq!(closed_form(TheoryCase::Unsup, &p).unwrap().probing_error_count, want);
        assert_eq!(numeric_pipeline(TheoryCase::Unsup, &p, 1.0).unwrap().probing_error_count, want);
    }
}

#[test]
fn case_b_has_no_probing_error() {
    for (a, b) in [(0.05, 0.05), (0.01, 0.09), (0.09, 0.01)] {
        let p = params(a, b);
        assert_eq!(closed_form(TheoryCase::B, &p).unwrap().probing_error_count, 0);
        assert_eq!(numeric_pipeline(TheoryCase::B, &p, 1.0).unwrap().probing_error_count, 0);
    }
}

#[test]
fn case_a_id_rows_follow_closed_form_direction() {
    let p = params(0.04, 0.02);
    let z = closed_form(TheoryCase::A, &p).unwrap().z_hat;
    let s = (1.0_f64 - 4.0 * 0.02).sqrt();
    for r in 0..2 {
        assert!(z[[r, 1]].abs() <= 1e-14);
        assert!((z[[r, 2]].abs() / z[[r, 0]].abs() - s).abs() <= 1e-12);
    }
    assert!(z[[0, 2]] * z[[1, 2]] < 0.0, "ID rows differ in the sign of the class coordinate");
    assert!((z[[0, 0]] - z[[1, 0]]).abs() <= 1e-14);
}

#[test]
fn case_a_adjacency_first_row_with_closed_form_normalization() {
    // small parameters and vanishing gamma: Ĉ·A[0,:] ≈ (2, 4β', 3α', 0, 0)
    let (a, b) = (1e-3, 2e-3);
    let (pop, model) = build_toy_population(ToyVariant::CaseA, AugmentationParams::new(1.0, a, b, 1e-9)).unwrap();
    let bundle = build_graph(&model, &pop, GraphWeights::new(5.0, 1.0).unwrap()).unwrap();
    let c_hat = 7.0 + 12.0 * b + 12.0 * a;
    let want = [2.0, 4.0 * b, 3.0 * a, 0.0, 0.0];
    for (j, w) in want.iter().enumerate() {
        let got = c_hat * bundle.a[[0, j]];
        assert!((got - w).abs() <= 20.0 * b * b, "entry {j}: {got} vs {w}");
    }
}

/// `max |λ_numeric − λ_closed|` over all five eigenvalues.
fn eig_dev(case: TheoryCase, a: f64, b: f64) -> f64 {
    verify_against_pipeline(case, &ReducedParams::new(a, b, 0.0).unwrap(), 1.0).unwrap().eig_dev_max
}

#[test]
fn closed_form_eigenvalues_are_exact_to_first_order() {
    // halving the parameters should shrink the deviation about fourfold
    for (case, a, b) in [(TheoryCase::A, 0.03, 0.01), (TheoryCase::B, 0.02, 0.02), (TheoryCase::Unsup, 0.02, 0.03)] {
        let mut prev = eig_dev(case, a, b);
        for step in 1..5 {
            let t = 0.5_f64.powi(step);
            let dev = eig_dev(case, a * t, b * t);
            let ratio = prev / dev;
            assert!((3.0..=5.0).contains(&ratio), "{case:?} step {step}: ratio {ratio}");
            prev = dev;
        }
    }
}

#[test]
fn case_b_eigenvalues_track_pipeline_at_second_order() {
    let r = verify_against_pipeline(TheoryCase::B, &params(0.02, 0.02), 1.0).unwrap();
    // measured second-order coefficient is about 54; the limit as the
    // parameters vanish is about 60
    assert!(r.eig_dev_max <= 60.0 * (0.02 * 0.02 + 1e-6), "{}", r.eig_dev_max);
}

#[test]
fn case_a_default_point_tracks_pipeline() {
    let r = verify_against_pipeline(TheoryCase::A, &params(0.03, 0.01), 1.0).unwrap();
    assert_eq!(r.probing_error_count_closed, r.probing_error_count_numeric);
    assert!(r.separability.rel_dev <= 0.05);
    // 0.0153 measured; second-order coefficient about 17 at this point
    assert!(r.eig_dev_max <= 20.0 * (0.03 * 0.03 + 1e-6), "{}", r.eig_dev_max);
}

#[test]
fn label_gap_positive_over_wide_grid() {
    for row in sweep(TheoryCase::A, 0.01, 0.2, 25, 1.0, 1e-6).unwrap() {
        if let Some(g) = row.gap_label {
            assert!(g > 0.0, "{row:?}");
        }
    }
}

#[test]
fn gap_ab_sign_matches_difference_of_closed_forms() {
    for row in sweep(TheoryCase::A, 0.01, 0.2, 12, 1.0, 1e-6).unwrap() {
        let Some(gap) = row.gap_ab else { continue };
        let p = params(row.alpha_prime, row.beta_prime);
        let s_a = closed_form(TheoryCase::A, &p).unwrap().separability;
        let s_b = closed_form(TheoryCase::B, &p).unwrap().separability;
        assert_eq!(gap > 0.0, s_a > s_b);
        assert!((gap - (s_a - s_b)).abs() <= 1e-12 * s_a);
    }
}

#[test]
fn vanishing_parameters_approach_formula_limits() {
    // alpha' = beta' is the unsupervised boundary, so approach the origin just beside it
    let g = separability_gap(&params(2e-6, 1e-6)).unwrap();
    let limit_a = 7.0 * (1.0 / 3.0 + 1.0);
    assert!((g.s_case_a - limit_a).abs() <= 1e-4, "{}", g.s_case_a);
    assert!(g.s_case_b.is_finite() && g.s_unsup.is_finite());
}

#[test]
fn zero_parameters_are_rejected() {
    assert!(ReducedParams::new(0.0, 0.0, 0.0).is_err());
}
