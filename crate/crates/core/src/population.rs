//! Finite populations of natural examples and their augmentation models.
//!
//! A population is a list of natural examples, each carrying a class label, a
//! domain label and a membership tag (labeled ID, wild ID, wild covariate
//! shift, wild semantic shift). Semantic-shift examples all share the
//! [`NOVEL_CLASS`] sentinel, which lies outside every known label space, so
//! the class/domain agreement rule of the augmentation model treats them like
//! any other class.
//!
//! The augmentation model is the transition probability `T[x̄, x]` from a
//! natural example `x̄` to an augmented view `x`. It is either the
//! four-parameter rule (`rho` for same class and domain, `alpha` for same
//! class only, `beta` for same domain only, `gamma` otherwise) or an explicit
//! nonnegative matrix. Rows are raw probabilities and are never normalized.

use std::path::Path;

use ndarray::{array, Array2};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class id shared by every semantic-shift example.
pub const NOVEL_CLASS: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    LabeledId,
    WildId,
    WildCovariate,
    WildSemantic,
}

impl Membership {
    pub const ALL: [Membership; 4] = [
        Membership::LabeledId,
        Membership::WildId,
        Membership::WildCovariate,
        Membership::WildSemantic,
    ];

    pub fn is_wild(self) -> bool {
        !matches!(self, Membership::LabeledId)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Membership::LabeledId => "labeled_id",
            Membership::WildId => "wild_id",
            Membership::WildCovariate => "wild_covariate",
            Membership::WildSemantic => "wild_semantic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NaturalExample {
    pub index: usize,
    pub class_label: u32,
    pub domain_label: u32,
    pub membership: Membership,
}

impl NaturalExample {
    pub fn is_novel(&self) -> bool {
        self.class_label == NOVEL_CLASS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    examples: Vec<NaturalExample>,
    classes: Vec<u32>,
    domains: Vec<u32>,
}

impl Population {
    /// Builds a population and checks the membership invariants. The first
    /// entry of `domains` is the ID domain.
    pub fn new(examples: Vec<NaturalExample>, classes: Vec<u32>, domains: Vec<u32>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidPopulation("class list is empty".into()));
        }
        if domains.is_empty() {
            return Err(Error::InvalidPopulation("domain list is empty".into()));
        }
        if classes.contains(&NOVEL_CLASS) {
            return Err(Error::InvalidPopulation(format!("class id {NOVEL_CLASS} is reserved")));
        }
        let id_domain = domains[0];
        for (i, ex) in examples.iter().enumerate() {
            if ex.index != i {
                return Err(Error::InvalidPopulation(format!("example at position {i} has index {}", ex.index)));
            }
            let semantic = ex.membership == Membership::WildSemantic;
            if semantic != ex.is_novel() {
                return Err(Error::InvalidPopulation(format!(
                    "example {i}: semantic membership and the novel class must coincide"
                )));
            }
            if !semantic && !classes.contains(&ex.class_label) {
                return Err(Error::InvalidPopulation(format!("example {i}: unknown class {}", ex.class_label)));
            }
            if !domains.contains(&ex.domain_label) {
                return Err(Error::InvalidPopulation(format!("example {i}: unknown domain {}", ex.domain_label)));
            }
            if matches!(ex.membership, Membership::LabeledId | Membership::WildId) && ex.domain_label != id_domain {
                return Err(Error::InvalidPopulation(format!(
                    "example {i}: ID examples must sit in the ID domain {id_domain}"
                )));
            }
        }
        Ok(Self { examples, classes, domains })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[NaturalExample] {
        &self.examples
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn domains(&self) -> &[u32] {
        &self.domains
    }

    pub fn id_domain(&self) -> u32 {
        self.domains[0]
    }

    /// Position of a known class in the label space, `None` for the novel
    /// sentinel.
    pub fn class_index(&self, class_label: u32) -> Option<usize> {
        self.classes.iter().position(|&c| c == class_label)
    }

    pub fn indices_of(&self, membership: Membership) -> Vec<usize> {
        self.examples.iter().filter(|e| e.membership == membership).map(|e| e.index).collect()
    }

    pub fn count(&self, membership: Membership) -> usize {
        self.examples.iter().filter(|e| e.membership == membership).count()
    }

    /// Class indices (into [`Population::classes`]) for the given examples.
    /// Semantic examples have no class index and are rejected.
    pub fn class_indices(&self, rows: &[usize]) -> Result<Vec<usize>> {
        rows.iter()
            .map(|&r| {
                let ex = &self.examples[r];
                self.class_index(ex.class_label).ok_or_else(|| {
                    Error::InvalidPopulation(format!("example {r} has no known class"))
                })
            })
            .collect()
    }

    /// Labeled examples grouped by class index.
    pub fn labeled_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.classes.len()];
        for ex in &self.examples {
            if ex.membership == Membership::LabeledId {
                if let Some(ci) = self.class_index(ex.class_label) {
                    groups[ci].push(ex.index);
                }
            }
        }
        groups
    }
}

/// The four-parameter augmentation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl AugmentationParams {
    pub fn new(rho: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { rho, alpha, beta, gamma }
    }

    /// Checks nonnegativity and, when `strict`, the ordering
    /// `rho > max(alpha, beta) >= min(alpha, beta) > gamma >= 0`.
    pub fn validate(&self, strict: bool) -> Result<()> {
        let all = [self.rho, self.alpha, self.beta, self.gamma];
        if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidAugmentation(format!("parameters must be finite and nonnegative: {self:?}")));
        }
        if strict {
            let hi = self.alpha.max(self.beta);
            let lo = self.alpha.min(self.beta);
            if !(self.rho > hi && lo > self.gamma) {
                return Err(Error::InvalidAugmentation(format!(
                    "strict regime requires rho > max(alpha, beta) >= min(alpha, beta) > gamma: {self:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn rate(&self, same_class: bool, same_domain: bool) -> f64 {
        match (same_class, same_domain) {
            (true, true) => self.rho,
            (true, false) => self.alpha,
            (false, true) => self.beta,
            (false, false) => self.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentationModel {
    Parametric(AugmentationParams),
    /// Rows index natural examples, columns index augmented views.
    Explicit(Array2<f64>),
}

impl AugmentationModel {
    pub fn validate(&self, strict: bool) -> Result<()> {
        match self {
            AugmentationModel::Parametric(p) => p.validate(strict),
            AugmentationModel::Explicit(t) => {
                if let Some(bad) = t.iter().find(|x| !x.is_finite() || **x < 0.0) {
                    return Err(Error::InvalidAugmentation(format!("entry {bad} is negative or not finite")));
                }
                Ok(())
            }
        }
    }

    /// The transition matrix for `population`. Parametric models are expanded
    /// with augmented views identified with the natural examples.
    pub fn transition_matrix(&self, population: &Population) -> Result<Array2<f64>> {
        match self {
            AugmentationModel::Parametric(p) => Ok(rule_matrix(p, population)),
            AugmentationModel::Explicit(t) => {
                if t.nrows() != population.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "transition matrix has {} rows but the population has {} examples",
                        t.nrows(),
                        population.len()
                    )));
                }
                Ok(t.clone())
            }
        }
    }
}

fn rule_matrix(p: &AugmentationParams, population: &Population) -> Array2<f64> {
    let ex = population.examples();
    Array2::from_shape_fn((ex.len(), ex.len()), |(i, j)| {
        p.rate(ex[i].class_label == ex[j].class_label, ex[i].domain_label == ex[j].domain_label)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyVariant {
    /// The semantic example has a domain of its own.
    CaseA,
    /// The semantic example shares the covariate domain.
    CaseB,
}

/// The five-example toy population: angel-sketch, tiger-sketch,
/// angel-painting, tiger-painting, panda. Angels are class 0, tigers class 1;
/// sketch is domain 0, painting domain 1 and, in case A, the panda sits in
/// domain 2.
pub fn build_toy_population(variant: ToyVariant, params: AugmentationParams) -> Result<(Population, AugmentationModel)> {
    params.validate(false)?;
    let panda_domain = match variant {
        ToyVariant::CaseA => 2,
        ToyVariant::CaseB => 1,
    };
    let rows = [
        (0, 0, Membership::LabeledId),
        (1, 0, Membership::LabeledId),
        (0, 1, Membership::WildCovariate),
        (1, 1, Membership::WildCovariate),
        (NOVEL_CLASS, panda_domain, Membership::WildSemantic),
    ];
    let examples = rows
        .iter()
        .enumerate()
        .map(|(index, &(class_label, domain_label, membership))| NaturalExample {
            index,
            class_label,
            domain_label,
            membership,
        })
        .collect();
    let population = Population::new(examples, vec![0, 1], vec![0, 1, 2])?;

    let AugmentationParams { rho: r, alpha: a, beta: b, gamma: g } = params;
    let t = match variant {
        ToyVariant::CaseA => array![
            [r, b, a, g, g],
            [b, r, g, a, g],
            [a, g, r, b, g],
            [g, a, b, r, g],
            [g, g, g, g, r],
        ],
        ToyVariant::CaseB => array![
            [r, b, a, g, g],
            [b, r, g, a, g],
            [a, g, r, b, b],
            [g, a, b, r, b],
            [g, g, b, b, r],
        ],
    };
    Ok((population, AugmentationModel::Explicit(t)))
}

/// One block of identical examples in a population description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    /// Ignored (and may be omitted) for semantic cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<u32>,
    pub domain: u32,
    pub membership: Membership,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub classes: Vec<u32>,
    pub domains: Vec<u32>,
    pub cells: Vec<CellSpec>,
    /// Covariate share of the wild split, used only by [`sample_wild_mixture`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_c: Option<f64>,
    /// Semantic share of the wild split, used only by [`sample_wild_mixture`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_s: Option<f64>,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidPopulation("class list is empty".into()));
        }
        if self.domains.is_empty() {
            return Err(Error::InvalidPopulation("domain list is empty".into()));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.count == 0 {
                return Err(Error::InvalidPopulation(format!("cell {i} has a zero count")));
            }
            if cell.membership != Membership::WildSemantic {
                match cell.class {
                    Some(c) if self.classes.contains(&c) => {}
                    Some(c) => return Err(Error::InvalidPopulation(format!("cell {i}: unknown class {c}"))),
                    None => return Err(Error::InvalidPopulation(format!("cell {i}: missing class"))),
                }
            } else if let Some(c) = cell.class {
                if self.classes.contains(&c) {
                    return Err(Error::InvalidPopulation(format!(
                        "cell {i}: semantic cell uses known class {c}"
                    )));
                }
            }
        }
        let (pc, ps) = (self.pi_c.unwrap_or(0.0), self.pi_s.unwrap_or(0.0));
        if !(0.0..=1.0).contains(&pc) || !(0.0..=1.0).contains(&ps) {
            return Err(Error::InvalidPopulation(format!("mixture ratios must lie in [0, 1]: pi_c={pc}, pi_s={ps}")));
        }
        if pc + ps > 1.0 + 1e-12 {
            return Err(Error::InvalidPopulation(format!("pi_c + pi_s = {} exceeds 1", pc + ps)));
        }
        Ok(())
    }

    /// Total number of wild examples described by the cells.
    pub fn wild_count(&self) -> usize {
        self.cells.iter().filter(|c| c.membership.is_wild()).map(|c| c.count).sum()
    }

    /// The 2 classes x 2 domains toy layout (one example per cell plus one
    /// semantic example in a third domain).
    pub fn toy_case_a() -> Self {
        let cell = |class, domain, membership| CellSpec { class, domain, membership, count: 1 };
        Self {
            classes: vec![0, 1],
            domains: vec![0, 1, 2],
            cells: vec![
                cell(Some(0), 0, Membership::LabeledId),
                cell(Some(1), 0, Membership::LabeledId),
                cell(Some(0), 1, Membership::WildCovariate),
                cell(Some(1), 1, Membership::WildCovariate),
                cell(None, 2, Membership::WildSemantic),
            ],
            pi_c: None,
            pi_s: None,
        }
    }
}

fn examples_from_cells(spec: &PopulationSpec) -> Vec<NaturalExample> {
    let mut examples = Vec::new();
    for cell in &spec.cells {
        let class_label = match cell.membership {
            Membership::WildSemantic => NOVEL_CLASS,
            _ => cell.class.expect("validated"),
        };
        for _ in 0..cell.count {
            examples.push(NaturalExample {
                index: examples.len(),
                class_label,
                domain_label: cell.domain,
                membership: cell.membership,
            });
        }
    }
    examples
}

/// Expands a population description cell by cell and applies the
/// class/domain agreement rule to every ordered pair of examples.
pub fn build_parametric_population(
    spec: &PopulationSpec,
    model: &AugmentationModel,
) -> Result<(Population, AugmentationModel)> {
    spec.validate()?;
    let params = match model {
        AugmentationModel::Parametric(p) => *p,
        AugmentationModel::Explicit(_) => {
            return Err(Error::InvalidAugmentation("a parametric model is required".into()))
        }
    };
    params.validate(false)?;
    let population = Population::new(examples_from_cells(spec), spec.classes.clone(), spec.domains.clone())?;
    let t = rule_matrix(&params, &population);
    Ok((population, AugmentationModel::Explicit(t)))
}

/// Split of `m` wild examples into (wild ID, covariate, semantic) counts.
/// Covariate rounds half up, semantic rounds half down, so ties favour the
/// covariate share.
pub fn mixture_counts(m: usize, pi_c: f64, pi_s: f64) -> (usize, usize, usize) {
    let mf = m as f64;
    let n_c = ((pi_c * mf + 0.5).floor() as usize).min(m);
    let n_s = (((pi_s * mf - 0.5).ceil().max(0.0)) as usize).min(m - n_c);
    (m - n_c - n_s, n_c, n_s)
}

/// Draws a population whose wild split follows the mixture ratios. Labeled
/// cells are copied verbatim; the wild size is the total wild count of the
/// cells. Wild ID examples get a uniform known class in the ID domain,
/// covariate examples a uniform known class in a uniform covariate domain,
/// semantic examples the novel class in a uniform semantic domain. Covariate
/// and semantic domains come from the matching cells when present, otherwise
/// from every non-ID domain (every domain for semantic examples).
pub fn sample_wild_mixture(spec: &PopulationSpec, seed: u64) -> Result<Population> {
    spec.validate()?;
    let pi_c = spec.pi_c.unwrap_or(0.0);
    let pi_s = spec.pi_s.unwrap_or(0.0);
    let id_domain = spec.domains[0];
    let domains_of = |membership: Membership| -> Vec<u32> {
        let mut d: Vec<u32> = spec.cells.iter().filter(|c| c.membership == membership).map(|c| c.domain).collect();
        d.sort_unstable();
        d.dedup();
        d
    };
    let non_id: Vec<u32> = spec.domains.iter().copied().filter(|&d| d != id_domain).collect();
    let mut covariate_domains = domains_of(Membership::WildCovariate);
    if covariate_domains.is_empty() {
        covariate_domains = non_id.clone();
    }
    let mut semantic_domains = domains_of(Membership::WildSemantic);
    if semantic_domains.is_empty() {
        semantic_domains = if non_id.is_empty() { spec.domains.clone() } else { non_id };
    }

    let (n_id, n_c, n_s) = mixture_counts(spec.wild_count(), pi_c, pi_s);
    if n_c > 0 && covariate_domains.is_empty() {
        return Err(Error::InvalidPopulation("covariate examples need a non-ID domain".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples: Vec<NaturalExample> = Vec::new();
    let push = |examples: &mut Vec<NaturalExample>, class_label, domain_label, membership| {
        examples.push(NaturalExample { index: examples.len(), class_label, domain_label, membership });
    };
    for cell in spec.cells.iter().filter(|c| c.membership == Membership::LabeledId) {
        for _ in 0..cell.count {
            push(&mut examples, cell.class.expect("validated"), cell.domain, Membership::LabeledId);
        }
    }
    for _ in 0..n_id {
        let class = *spec.classes.choose(&mut rng).expect("nonempty");
        push(&mut examples, class, id_domain, Membership::WildId);
    }
    for _ in 0..n_c {
        let class = *spec.classes.choose(&mut rng).expect("nonempty");
        let domain = *covariate_domains.choose(&mut rng).expect("nonempty");
        push(&mut examples, class, domain, Membership::WildCovariate);
    }
    for _ in 0..n_s {
        let domain = *semantic_domains.choose(&mut rng).expect("nonempty");
        push(&mut examples, NOVEL_CLASS, domain, Membership::WildSemantic);
    }
    Population::new(examples, spec.classes.clone(), spec.domains.clone())
}

/// JSON population configuration: a [`PopulationSpec`] plus either the
/// four augmentation parameters or an explicit transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    #[serde(flatten)]
    pub spec: PopulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation_matrix: Option<Vec<Vec<f64>>>,
}

impl PopulationConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.spec.validate()?;
        if cfg.augmentation.is_some() == cfg.augmentation_matrix.is_some() {
            return Err(Error::InvalidAugmentation(
                "exactly one of `augmentation` and `augmentation_matrix` must be given".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn model(&self) -> Result<AugmentationModel> {
        let model = match (&self.augmentation, &self.augmentation_matrix) {
            (Some(p), _) => AugmentationModel::Parametric(*p),
            (None, Some(rows)) => {
                let n = rows.len();
                let m = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != m) {
                    return Err(Error::InvalidAugmentation("ragged augmentation_matrix".into()));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                AugmentationModel::Explicit(
                    Array2::from_shape_vec((n, m), flat).map_err(|e| Error::InvalidAugmentation(e.to_string()))?,
                )
            }
            (None, None) => unreachable!("checked in from_json"),
        };
        model.validate(false)?;
        Ok(model)
    }

    /// Materializes the population. When either mixture ratio is present the
    /// wild split is resampled with `seed`; otherwise the cells are expanded
    /// verbatim.
    pub fn build(&self, seed: u64) -> Result<(Population, Array2<f64>)> {
        let model = self.model()?;
        let population = if self.spec.pi_c.is_some() || self.spec.pi_s.is_some() {
            sample_wild_mixture(&self.spec, seed)?
        } else {
            Population::new(examples_from_cells(&self.spec), self.spec.classes.clone(), self.spec.domains.clone())?
        };
        let t = model.transition_matrix(&population)?;
        Ok((population, t))
    }
}
