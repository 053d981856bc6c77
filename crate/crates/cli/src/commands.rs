use ndarray::Axis;
use serde::Serialize;
use serde_json::{json, Value};

use spectral_ood::eval::{
    classification_accuracy, detection_metrics, fit_knn_detector, fit_linear_probe, probing_error, separability,
    MetricsReport,
};
use spectral_ood::graph::{build_graph, GraphBundle, GraphWeights};
use spectral_ood::loss::{equivalence_gap, LossReport};
use spectral_ood::population::{
    build_toy_population, AugmentationModel, Membership, Population, PopulationConfig,
};
use spectral_ood::spectral::{
    closed_form_embedding, eigendecompose, lowrank_factorize, reconstruction_gap, FactorizeOptions,
};
use spectral_ood::theory::{
    sweep, verify_against_pipeline, ReducedParams, TheoryCase, VerificationReport, SWEEP_HEADER,
};

use crate::args::{Cli, Command, DetectArgs, FactorizeArgs, LossCheckArgs, SweepArgs, ToyArgs, ToyVerifyArgs, WeightArgs};
use crate::output::OutputDir;
use crate::CliError;

/// Half-width of the excluded band around a regime boundary.
pub const REGIME_BAND: f64 = 0.005;

/// Second-order coefficient of the eigenvalue gate: deviation must stay below
/// `EIGEN_COEFF · (max(α', β')² + γ')`.
pub const EIGEN_COEFF: f64 = 75.0;

pub const SEPARABILITY_REL_TOL: f64 = 0.05;
pub const LOSS_GAP_TOL: f64 = 1e-4;
pub const EQUIVALENCE_REL_TOL: f64 = 1e-9;

pub const SWEEP_BOUND_MAX: f64 = 0.25;
pub const SWEEP_MAX_RESOLUTION: usize = 200;

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let scale = cli.global.tolerance_scale;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Config(format!("--tolerance-scale must be positive, got {scale}")));
    }
    match &cli.command {
        Command::ToyVerify(a) => toy_verify(cli, a),
        Command::Sweep(a) => run_sweep(cli, a),
        Command::Factorize(a) => factorize(cli, a),
        Command::Detect(a) => detect(cli, a),
        Command::LossCheck(a) => loss_check(cli, a),
    }
}

fn resolved_config<A: Serialize>(cli: &Cli, args: &A, population: Option<&PopulationConfig>) -> Value {
    json!({
        "command": cli.command.name(),
        "seed": cli.global.seed,
        "tolerance_scale": cli.global.tolerance_scale,
        "config": cli.global.config.as_ref().map(|p| p.display().to_string()),
        "args": serde_json::to_value(args).expect("arguments serialize"),
        "population": population.map(|p| serde_json::to_value(p).expect("population serializes")),
    })
}

fn reduced(toy: &ToyArgs) -> Result<(TheoryCase, ReducedParams), CliError> {
    let case = TheoryCase::from(toy.variant);
    let p = ReducedParams::new(toy.alpha_prime, toy.beta_prime, toy.gamma_ratio)?;
    if !(toy.rho > 0.0 && toy.rho.is_finite()) {
        return Err(CliError::Config(format!("--rho must be positive, got {}", toy.rho)));
    }
    Ok((case, p))
}

struct Problem {
    population: Population,
    model: AugmentationModel,
    bundle: GraphBundle,
    config: Option<PopulationConfig>,
}

fn load_config(cli: &Cli) -> Result<Option<PopulationConfig>, CliError> {
    let Some(path) = &cli.global.config else { return Ok(None) };
    PopulationConfig::load(path)
        .map(Some)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn weights(defaults: GraphWeights, over: &WeightArgs) -> Result<GraphWeights, CliError> {
    Ok(GraphWeights::new(over.eta_u.unwrap_or(defaults.eta_u), over.eta_l.unwrap_or(defaults.eta_l))?)
}

/// Population from `--config` when given, else the toy described by `toy`.
fn load_problem(cli: &Cli, toy: Option<&ToyArgs>, over: &WeightArgs) -> Result<Problem, CliError> {
    if let Some(cfg) = load_config(cli)? {
        let (population, _) = cfg.build(cli.global.seed)?;
        let model = cfg.model()?;
        let w = weights(GraphWeights::default(), over)?;
        let bundle = build_graph(&model, &population, w)?;
        return Ok(Problem { population, model, bundle, config: Some(cfg) });
    }
    let toy = toy.ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let (case, p) = reduced(toy)?;
    let (population, model) = build_toy_population(case.toy_variant(), p.augmentation(toy.rho))?;
    let w = weights(case.weights(), over)?;
    let bundle = build_graph(&model, &population, w)?;
    Ok(Problem { population, model, bundle, config: None })
}

#[derive(Serialize)]
struct ToyVerifyBody<'a> {
    report: &'a VerificationReport,
    eigen_tolerance: f64,
    separability_tolerance: f64,
    passed: bool,
}

fn toy_verify(cli: &Cli, a: &ToyVerifyArgs) -> Result<(), CliError> {
    let (case, p) = reduced(&a.toy)?;
    if let Some(m) = p.margin(case) {
        if m.abs() <= REGIME_BAND {
            return Err(CliError::Config(format!(
                "degenerate regime: boundary margin {m:.6} lies within ±{REGIME_BAND} for variant {}",
                case.as_str()
            )));
        }
    }
    let report = verify_against_pipeline(case, &p, a.toy.rho)?;
    let scale = cli.global.tolerance_scale;
    let m = p.alpha_prime.max(p.beta_prime);
    let eigen_tolerance = EIGEN_COEFF * (m * m + p.gamma_ratio) * scale;
    let separability_tolerance = SEPARABILITY_REL_TOL * scale;

    let eig_ok = report.eig_dev_max <= eigen_tolerance;
    let sep_ok = report.separability.rel_dev <= separability_tolerance;
    let count_ok = report.probing_error_count_closed == report.probing_error_count_numeric;
    let passed = eig_ok && sep_ok && count_ok;

    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    println!("variant {}  alpha'={}  beta'={}  rho={}  gamma'={}", case.as_str(), p.alpha_prime, p.beta_prime, a.toy.rho, p.gamma_ratio);
    println!("{:<24} {:>14} {:>14} {:>12} {:>6}", "quantity", "closed", "numeric", "deviation", "");
    for (i, q) in report.eigenvalues.iter().enumerate() {
        println!("{:<24} {:>14.8} {:>14.8} {:>12.3e}", format!("eigenvalue[{i}]"), q.closed, q.numeric, q.abs_dev);
    }
    println!("{:<24} {:>14} {:>14} {:>12.3e} {:>6}", "eig_dev_max", "", format!("tol {eigen_tolerance:.2e}"), report.eig_dev_max, mark(eig_ok));
    println!(
        "{:<24} {:>14.8} {:>14.8} {:>12.3e} {:>6}",
        "separability (rel)", report.separability.closed, report.separability.numeric, report.separability.rel_dev, mark(sep_ok)
    );
    println!(
        "{:<24} {:>14} {:>14} {:>12} {:>6}",
        "probing_error_count", report.probing_error_count_closed, report.probing_error_count_numeric, "", mark(count_ok)
    );
    println!("{:<24} {:>14} {:>14} {:>12.3e}", "projector_dev", "", "", report.projector_dev);

    let out = OutputDir::create(&cli.global.out, resolved_config(cli, a, None))?;
    out.write_json("toy_verify.json", &ToyVerifyBody { report: &report, eigen_tolerance, separability_tolerance, passed })?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Check("closed form and numeric pipeline disagree beyond tolerance".into()))
    }
}

fn run_sweep(cli: &Cli, a: &SweepArgs) -> Result<(), CliError> {
    let in_range = |x: f64| x > 0.0 && x <= SWEEP_BOUND_MAX;
    if !in_range(a.lo) || !in_range(a.hi) || a.lo > a.hi {
        return Err(CliError::Config(format!(
            "grid bounds must satisfy 0 < lo <= hi <= {SWEEP_BOUND_MAX}, got lo={}, hi={}",
            a.lo, a.hi
        )));
    }
    if a.resolution == 0 || a.resolution > SWEEP_MAX_RESOLUTION {
        return Err(CliError::Config(format!(
            "resolution must lie in 1..={SWEEP_MAX_RESOLUTION}, got {}",
            a.resolution
        )));
    }
    if !(a.rho > 0.0 && a.rho.is_finite()) {
        return Err(CliError::Config(format!("--rho must be positive, got {}", a.rho)));
    }
    let rows = sweep(a.variant.into(), a.lo, a.hi, a.resolution, a.rho, a.gamma_ratio)?;
    let mut body = String::from(SWEEP_HEADER);
    body.push('\n');
    for r in &rows {
        body.push_str(&r.to_csv());
        body.push('\n');
    }
    let out = OutputDir::create(&cli.global.out, resolved_config(cli, a, None))?;
    let path = out.write_csv("sweep.csv", &body)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct FactorizeBody {
    n: usize,
    k: usize,
    converged: bool,
    iterations: usize,
    final_loss: f64,
    tail_energy: f64,
    loss_gap: f64,
    subspace_gap: f64,
    equivalence_relative_spread: f64,
    equivalence_relative_offset_error: f64,
    eigenvalues: Vec<f64>,
    loss_gap_tolerance: f64,
    equivalence_tolerance: f64,
    passed: bool,
}

fn factorize(cli: &Cli, a: &FactorizeArgs) -> Result<(), CliError> {
    let prob = load_problem(cli, Some(&a.toy), &a.weights)?;
    let spec = eigendecompose(prob.bundle.a_tilde.view(), a.k)?;
    let opts = FactorizeOptions { step: a.step, max_iters: a.max_iters, tol: a.tol, seed: cli.global.seed };
    let state = lowrank_factorize(prob.bundle.a_tilde.view(), a.k, &opts)?;
    let gap = reconstruction_gap(&state, &spec)?;
    let eq = equivalence_gap(a.trials, cli.global.seed, &prob.model, &prob.population, &prob.bundle, a.k)?;

    let scale = cli.global.tolerance_scale;
    let loss_gap_tolerance = LOSS_GAP_TOL * scale;
    let equivalence_tolerance = EQUIVALENCE_REL_TOL * scale;
    let passed = state.converged && gap.loss_gap.abs() <= loss_gap_tolerance && eq.relative_spread() <= equivalence_tolerance;

    let body = FactorizeBody {
        n: prob.bundle.len(),
        k: a.k,
        converged: state.converged,
        iterations: state.iterations,
        final_loss: state.final_loss(),
        tail_energy: spec.tail_energy(),
        loss_gap: gap.loss_gap,
        subspace_gap: gap.subspace_gap,
        equivalence_relative_spread: eq.relative_spread(),
        equivalence_relative_offset_error: eq.relative_offset_error(),
        eigenvalues: spec.eigenvalues.to_vec(),
        loss_gap_tolerance,
        equivalence_tolerance,
        passed,
    };
    println!(
        "converged={} iterations={} final_loss={:.6e} loss_gap={:.3e} subspace_gap={:.3e} spread={:.3e}",
        body.converged, body.iterations, body.final_loss, body.loss_gap, body.subspace_gap, body.equivalence_relative_spread
    );

    let out = OutputDir::create(&cli.global.out, resolved_config(cli, a, prob.config.as_ref()))?;
    out.write_csv("trace.csv", &state.trace_csv())?;
    out.write_json("factorize.json", &body)?;
    if a.dump_adjacency {
        out.write_adjacency(&prob.bundle)?;
    }
    if passed {
        Ok(())
    } else if !state.converged {
        Err(CliError::Check(format!("factorizer did not converge within {} iterations", a.max_iters)))
    } else {
        Err(CliError::Check("reconstruction or equivalence gap above tolerance".into()))
    }
}

#[derive(Serialize)]
struct DetectBody {
    n: usize,
    counts: Value,
    threshold: f64,
    #[serde(flatten)]
    metrics: MetricsReport,
}

fn detect(cli: &Cli, a: &DetectArgs) -> Result<(), CliError> {
    let prob = load_problem(cli, None, &a.weights)?;
    let pop = &prob.population;
    for kind in [Membership::LabeledId, Membership::WildCovariate, Membership::WildSemantic] {
        if pop.count(kind) == 0 {
            return Err(CliError::Config(format!("population has no `{}` examples", kind.as_str())));
        }
    }
    let spec = eigendecompose(prob.bundle.a_tilde.view(), a.k)?;
    let z = closed_form_embedding(&prob.bundle, &spec)?.z;
    let rows = |kind| pop.indices_of(kind);
    let labeled = rows(Membership::LabeledId);
    let wild_id = rows(Membership::WildId);
    let covariate = rows(Membership::WildCovariate);
    let semantic = rows(Membership::WildSemantic);

    let n_classes = pop.classes().len();
    let z_lab = z.select(Axis(0), &labeled);
    let probe = fit_linear_probe(z_lab.view(), &pop.class_indices(&labeled)?, n_classes)?;

    let id_acc = if wild_id.is_empty() {
        classification_accuracy(z_lab.view(), &pop.class_indices(&labeled)?, &probe)?
    } else {
        classification_accuracy(z.select(Axis(0), &wild_id).view(), &pop.class_indices(&wild_id)?, &probe)?
    };
    let z_cov = z.select(Axis(0), &covariate);
    let cov_labels = pop.class_indices(&covariate)?;
    let ood_acc = classification_accuracy(z_cov.view(), &cov_labels, &probe)?;
    let pe = probing_error(z_cov.view(), &cov_labels, &probe)?;

    let all_id: Vec<usize> = labeled.iter().chain(wild_id.iter()).copied().collect();
    let z_sem = z.select(Axis(0), &semantic);
    let sep = separability(z.select(Axis(0), &all_id).view(), z_sem.view())?;

    let det = fit_knn_detector(z_lab.view(), a.k_neighbors, a.percentile)?;
    let scores_id = if wild_id.is_empty() {
        det.reference_scores.clone()
    } else {
        det.score_all(z.select(Axis(0), &wild_id).view())
    };
    let scores_ood = det.score_all(z_sem.view());
    let dm = detection_metrics(&scores_id, &scores_ood, &det)?;

    let metrics = MetricsReport {
        id_acc,
        ood_acc,
        probing_error_rate: pe.rate,
        probing_error_count: pe.count,
        separability: sep,
        fpr95: dm.fpr95,
        auroc: dm.auroc,
        fpr_at_threshold: dm.fpr_at_threshold,
    };
    println!(
        "id_acc={:.4} ood_acc={:.4} probing_error={} separability={:.6e} fpr95={:.4} auroc={:.6}",
        metrics.id_acc, metrics.ood_acc, metrics.probing_error_count, metrics.separability, metrics.fpr95, metrics.auroc
    );
    let body = DetectBody {
        n: pop.len(),
        counts: json!({
            "labeled_id": labeled.len(),
            "wild_id": wild_id.len(),
            "wild_covariate": covariate.len(),
            "wild_semantic": semantic.len(),
        }),
        threshold: det.threshold,
        metrics,
    };
    let out = OutputDir::create(&cli.global.out, resolved_config(cli, a, prob.config.as_ref()))?;
    out.write_json("metrics.json", &body)?;
    if a.dump_adjacency {
        out.write_adjacency(&prob.bundle)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LossBody {
    n: usize,
    k: usize,
    eta_u: f64,
    eta_l: f64,
    #[serde(flatten)]
    loss: LossReport,
    gaps: Vec<f64>,
    relative_spread: f64,
    relative_offset_error: f64,
    tolerance: f64,
    passed: bool,
}

fn loss_check(cli: &Cli, a: &LossCheckArgs) -> Result<(), CliError> {
    let prob = load_problem(cli, Some(&a.toy), &a.weights)?;
    let eq = equivalence_gap(a.trials, cli.global.seed, &prob.model, &prob.population, &prob.bundle, a.k)?;
    let tolerance = EQUIVALENCE_REL_TOL * cli.global.tolerance_scale;
    let passed = eq.relative_spread() <= tolerance && eq.relative_offset_error() <= tolerance;
    let body = LossBody {
        n: prob.bundle.len(),
        k: a.k,
        eta_u: prob.bundle.weights.eta_u,
        eta_l: prob.bundle.weights.eta_l,
        loss: LossReport::from(&eq),
        gaps: eq.gaps.clone(),
        relative_spread: eq.relative_spread(),
        relative_offset_error: eq.relative_offset_error(),
        tolerance,
        passed,
    };
    println!(
        "total={:.6e} constant={:.6e} relative_spread={:.3e} relative_offset_error={:.3e}",
        body.loss.total, body.loss.constant, body.relative_spread, body.relative_offset_error
    );
    let out = OutputDir::create(&cli.global.out, resolved_config(cli, a, prob.config.as_ref()))?;
    out.write_json("loss.json", &body)?;
    if a.dump_adjacency {
        out.write_adjacency(&prob.bundle)?;
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Check("loss gap is not a constant offset within tolerance".into()))
    }
}
