//! Linear probing, separability, the KNN-distance detector and the
//! detection metrics.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pinv_symmetric;

pub const DEFAULT_PINV_TOLERANCE: f64 = 1e-10;

/// Class scores closer than this (relative to the largest score magnitude)
/// are an ambiguous prediction.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Least-squares linear head `M = (ZᵀZ)^† Zᵀ Y` on one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    /// k × classes.
    pub m: Array2<f64>,
    pub pinv_tolerance: f64,
}

/// Prediction of a probe for one embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    /// Arg-max class, lowest index among exact ties.
    pub class: usize,
    /// True when another class scores within [`TIE_TOLERANCE`] of the best.
    pub ambiguous: bool,
}

impl LinearProbe {
    pub fn n_classes(&self) -> usize {
        self.m.ncols()
    }

    pub fn scores(&self, z: ArrayView1<'_, f64>) -> Array1<f64> {
        z.dot(&self.m)
    }

    pub fn predict(&self, z: ArrayView1<'_, f64>) -> Prediction {
        let s = self.scores(z);
        let mut best = 0;
        for (i, &x) in s.iter().enumerate() {
            if x > s[best] {
                best = i;
            }
        }
        let scale = s.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let ambiguous = s
            .iter()
            .enumerate()
            .any(|(i, &x)| i != best && (s[best] - x).abs() <= TIE_TOLERANCE * scale);
        Prediction { class: best, ambiguous }
    }

    /// A prediction counts as correct only if it is unambiguous and matches.
    pub fn is_correct(&self, z: ArrayView1<'_, f64>, label: usize) -> bool {
        let p = self.predict(z);
        !p.ambiguous && p.class == label
    }
}

fn check_rows(z: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
    if z.nrows() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} embeddings but {} labels", z.nrows(), labels.len())));
    }
    Ok(())
}

pub fn fit_linear_probe(z_id: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize) -> Result<LinearProbe> {
    fit_linear_probe_with(z_id, labels, n_classes, DEFAULT_PINV_TOLERANCE)
}

pub fn fit_linear_probe_with(
    z_id: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    pinv_tolerance: f64,
) -> Result<LinearProbe> {
    check_rows(z_id, labels)?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {bad} out of range for {n_classes} classes")));
    }
    for c in 0..n_classes {
        if !labels.contains(&c) {
            return Err(Error::EmptyClass(c));
        }
    }
    let mut y = Array2::zeros((labels.len(), n_classes));
    for (i, &l) in labels.iter().enumerate() {
        y[[i, l]] = 1.0;
    }
    let gram = z_id.t().dot(&z_id);
    let m = pinv_symmetric(gram.view(), pinv_tolerance)?.dot(&z_id.t()).dot(&y);
    Ok(LinearProbe { m, pinv_tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbingError {
    pub rate: f64,
    pub count: usize,
}

/// Misclassifications of the probe on (typically covariate-shifted) examples.
/// Ambiguous predictions count as misclassified.
pub fn probing_error(z: ArrayView2<'_, f64>, labels: &[usize], probe: &LinearProbe) -> Result<ProbingError> {
    check_rows(z, labels)?;
    if labels.is_empty() {
        return Err(Error::Empty("probing split"));
    }
    let count = z.rows().into_iter().zip(labels).filter(|(row, &l)| !probe.is_correct(*row, l)).count();
    Ok(ProbingError { rate: count as f64 / labels.len() as f64, count })
}

pub fn classification_accuracy(z: ArrayView2<'_, f64>, labels: &[usize], probe: &LinearProbe) -> Result<f64> {
    Ok(1.0 - probing_error(z, labels, probe)?.rate)
}

/// Mean squared distance over all ID × semantic pairs.
pub fn separability(z_id: ArrayView2<'_, f64>, z_sem: ArrayView2<'_, f64>) -> Result<f64> {
    if z_id.nrows() == 0 {
        return Err(Error::Empty("ID embeddings"));
    }
    if z_sem.nrows() == 0 {
        return Err(Error::Empty("semantic embeddings"));
    }
    if z_id.ncols() != z_sem.ncols() {
        return Err(Error::DimensionMismatch(format!("embedding widths {} and {}", z_id.ncols(), z_sem.ncols())));
    }
    let mut total = 0.0;
    for a in z_id.rows() {
        for b in z_sem.rows() {
            total += a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
    }
    Ok(total / (z_id.nrows() * z_sem.nrows()) as f64)
}

/// Linear interpolation between order statistics at rank `(n−1)·p`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile input"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("percentile {p} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

fn distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn kth_smallest(mut d: Vec<f64>, k: usize) -> f64 {
    d.sort_by(f64::total_cmp);
    d[k - 1]
}

/// Flags a point as OOD when its distance to the k-th nearest reference
/// embedding exceeds a percentile of the reference scores.
#[derive(Debug, Clone)]
pub struct KnnDetector {
    pub reference: Array2<f64>,
    pub k_neighbors: usize,
    pub threshold: f64,
    pub percentile: f64,
    /// Leave-one-out scores of the reference points.
    pub reference_scores: Vec<f64>,
}

pub fn fit_knn_detector(z_ref: ArrayView2<'_, f64>, k_neighbors: usize, pct: f64) -> Result<KnnDetector> {
    let n = z_ref.nrows();
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::TooFewReferences { k: k_neighbors, n });
    }
    if !(pct > 0.0 && pct < 1.0) {
        return Err(Error::InvalidParameter(format!("percentile must lie in (0, 1), got {pct}")));
    }
    let reference_scores: Vec<f64> = (0..n)
        .map(|i| {
            let d = (0..n).filter(|&j| j != i).map(|j| distance(z_ref.row(i), z_ref.row(j))).collect();
            kth_smallest(d, k_neighbors)
        })
        .collect();
    let threshold = percentile(&reference_scores, pct)?;
    Ok(KnnDetector { reference: z_ref.to_owned(), k_neighbors, threshold, percentile: pct, reference_scores })
}

impl KnnDetector {
    pub fn score(&self, z: ArrayView1<'_, f64>) -> f64 {
        let d = self.reference.rows().into_iter().map(|r| distance(r, z)).collect();
        kth_smallest(d, self.k_neighbors)
    }

    pub fn score_all(&self, z: ArrayView2<'_, f64>) -> Vec<f64> {
        z.rows().into_iter().map(|r| self.score(r)).collect()
    }

    pub fn is_out(&self, score: f64) -> bool {
        score > self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// Fraction of OOD scores at or below the detector threshold.
    pub fpr_at_threshold: f64,
    /// Fraction of OOD scores at or below the 95th percentile of ID scores.
    pub fpr95: f64,
    pub auroc: f64,
}

fn fraction_at_or_below(scores: &[f64], threshold: f64) -> f64 {
    scores.iter().filter(|&&s| s <= threshold).count() as f64 / scores.len() as f64
}

/// AUROC with ID as the positive class and higher scores meaning more OOD,
/// via the Mann–Whitney statistic with midranks.
pub fn auroc(scores_id: &[f64], scores_ood: &[f64]) -> Result<f64> {
    if scores_id.is_empty() || scores_ood.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let mut all: Vec<(f64, bool)> = scores_id.iter().map(|&s| (s, false)).chain(scores_ood.iter().map(|&s| (s, true))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_ood = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0.total_cmp(&all[i].0) == Ordering::Equal {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        rank_sum_ood += midrank * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let n_ood = scores_ood.len() as f64;
    let n_id = scores_id.len() as f64;
    Ok((rank_sum_ood - n_ood * (n_ood + 1.0) / 2.0) / (n_ood * n_id))
}

pub fn detection_metrics(scores_id: &[f64], scores_ood: &[f64], detector: &KnnDetector) -> Result<DetectionMetrics> {
    if scores_id.is_empty() || scores_ood.is_empty() {
        return Err(Error::Empty("score list"));
    }
    Ok(DetectionMetrics {
        fpr_at_threshold: fraction_at_or_below(scores_ood, detector.threshold),
        fpr95: fraction_at_or_below(scores_ood, percentile(scores_id, 0.95)?),
        auroc: auroc(scores_id, scores_ood)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub id_acc: f64,
    pub ood_acc: f64,
    pub probing_error_rate: f64,
    pub probing_error_count: usize,
    pub separability: f64,
    pub fpr95: f64,
    pub auroc: f64,
    pub fpr_at_threshold: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_hot_embeddings_are_reproduced() {
        let z = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let labels = [0, 1, 2, 0];
        let probe = fit_linear_probe(z.view(), &labels, 3).unwrap();
        assert_eq!(classification_accuracy(z.view(), &labels, &probe).unwrap(), 1.0);
    }

    #[test]
    fn missing_class_rejected() {
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(fit_linear_probe(z.view(), &[0, 0], 2), Err(Error::EmptyClass(1))));
    }

    #[test]
    fn identical_embeddings_are_all_ambiguous() {
        // one embedding shared by both classes: every class score ties
        let z = array![[1.0, 2.0], [1.0, 2.0]];
        let probe = fit_linear_probe(z.view(), &[0, 1], 2).unwrap();
        let p = probe.predict(z.row(0));
        assert_eq!(p.class, 0);
        assert!(p.ambiguous);
        let err = probing_error(z.view(), &[0, 1], &probe).unwrap();
        assert_eq!(err.count, 2);
        assert_eq!(err.rate, 1.0);
    }

    #[test]
    fn separability_basics() {
        let a = array![[1.0, 2.0]];
        assert_eq!(separability(a.view(), a.view()).unwrap(), 0.0);
        let id = array![[0.0, 0.0], [2.0, 0.0]];
        let sem = array![[0.0, 1.0]];
        assert_eq!(separability(id.view(), sem.view()).unwrap(), 3.0);
        let scaled = separability((&id * 3.0).view(), (&sem * 3.0).view()).unwrap();
        assert!((scaled - 27.0).abs() < 1e-12);
        assert!(separability(Array2::<f64>::zeros((0, 2)).view(), sem.view()).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 4.0);
        assert!((percentile(&v, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((percentile(&v, 0.95).unwrap() - 3.85).abs() < 1e-12);
    }

    #[test]
    fn knn_needs_more_references_than_neighbors() {
        let z = array![[0.0], [1.0], [2.0]];
        assert!(matches!(fit_knn_detector(z.view(), 3, 0.95), Err(Error::TooFewReferences { k: 3, n: 3 })));
        assert!(fit_knn_detector(z.view(), 2, 0.95).is_ok());
    }

    #[test]
    fn knn_reference_scores_exclude_self() {
        let z = array![[0.0], [1.0], [3.0]];
        let det = fit_knn_detector(z.view(), 1, 0.5).unwrap();
        assert_eq!(det.reference_scores, vec![1.0, 1.0, 2.0]);
        assert_eq!(det.threshold, 1.0);
        assert_eq!(det.score(array![10.0].view()), 7.0);
    }

    #[test]
    fn auroc_extremes() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(auroc(&a, &a).unwrap(), 0.5);
        assert_eq!(auroc(&a, &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0, 2.0], &a).unwrap(), 0.0);
    }

    #[test]
    fn metrics_json_keys() {
        let m = MetricsReport {
            id_acc: 1.0,
            ood_acc: 1.0,
            probing_error_rate: 0.0,
            probing_error_count: 0,
            separability: 2.0,
            fpr95: 0.0,
            auroc: 1.0,
            fpr_at_threshold: 0.0,
        };
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.starts_with(r#"{"id_acc":1.0,"ood_acc":1.0,"probing_error_rate":0.0,"probing_error_count":0,"#));
    }
}
