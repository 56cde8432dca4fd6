//! Desk-scale quadratic-kernel SVM: one-vs-rest multiclass on standardized
//! features, trained by a sequential minimal optimization solver, with
//! stratified k-fold evaluation and confusion-matrix metrics.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("feature rows ({rows}) and labels ({labels}) disagree")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("dataset must contain at least two classes")]
    SingleClass,
    #[error("label {label} outside the {classes} declared classes")]
    BadLabel { label: usize, classes: usize },
    #[error("non-finite feature value at row {row}")]
    NonFinite { row: usize },
    #[error("feature width {got} does not match training width {want}")]
    WidthMismatch { got: usize, want: usize },
    #[error("regularization c must be positive, got {0}")]
    BadC(f64),
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("class {class} has {count} samples, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("solver failed to converge within {sweeps} sweeps")]
    Convergence { sweeps: usize },
    #[error("confusion matrix must be square and non-empty")]
    NonSquare,
}

/// Labeled feature matrix; labels index into `class_names`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, ClassifyError> {
        if features.nrows() != labels.len() {
            return Err(ClassifyError::ShapeMismatch {
                rows: features.nrows(),
                labels: labels.len(),
            });
        }
        for (row, r) in features.rows().into_iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(ClassifyError::NonFinite { row });
            }
        }
        for &l in &labels {
            if l >= class_names.len() {
                return Err(ClassifyError::BadLabel { label: l, classes: class_names.len() });
            }
        }
        let mut present: Vec<usize> = labels.clone();
        present.sort_unstable();
        present.dedup();
        if present.len() < 2 {
            return Err(ClassifyError::SingleClass);
        }
        Ok(Dataset { features, labels, class_names })
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    Linear,
    #[default]
    Quadratic,
}

impl Kernel {
    fn apply(&self, dot: f64) -> f64 {
        match self {
            Kernel::Linear => dot,
            Kernel::Quadratic => {
                let v = dot + 1.0;
                v * v
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: Kernel,
    /// KKT tolerance of the dual solver.
    pub tol: f64,
    /// Sweep budget; exceeding it is a convergence error, not a silent cut.
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, kernel: Kernel::Quadratic, tol: 1e-3, max_sweeps: 20_000, seed: 0 }
    }
}

/// One-vs-rest binary machine over standardized features.
#[derive(Debug, Clone)]
pub struct BinarySvm {
    /// alpha_i * y_i for each support vector.
    pub coeffs: Vec<f64>,
    /// Support vectors (standardized feature rows).
    pub support: Array2<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub binaries: Vec<BinarySvm>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub class_names: Vec<String>,
}

impl SvmModel {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    fn standardize_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(self.std.iter()))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Per-class decision values for each input row.
    pub fn decision_values(&self, features: &Array2<f64>) -> Result<Array2<f64>, ClassifyError> {
        if features.ncols() != self.width() {
            return Err(ClassifyError::WidthMismatch { got: features.ncols(), want: self.width() });
        }
        let n = features.nrows();
        let mut out = Array2::zeros((n, self.binaries.len()));
        for i in 0..n {
            let x = self.standardize_row(features.row(i).as_slice().expect("contiguous row"));
            for (c, bin) in self.binaries.iter().enumerate() {
                let mut acc = bin.bias;
                for (coeff, sv) in bin.coeffs.iter().zip(bin.support.rows()) {
                    let dot: f64 = sv.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                    acc += coeff * self.kernel.apply(dot);
                }
                out[[i, c]] = acc;
            }
        }
        Ok(out)
    }
}

/// Train one-vs-rest soft-margin SVMs with the configured kernel.
/// Deterministic for a fixed seed.
pub fn svm_train(data: &Dataset, params: &SvmParams) -> Result<SvmModel, ClassifyError> {
    if !(params.c > 0.0) {
        return Err(ClassifyError::BadC(params.c));
    }
    let n = data.features.nrows();
    let d = data.features.ncols();

    // Column standardization; constant columns pass through unscaled.
    let mut mean = vec![0.0; d];
    for row in data.features.rows() {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut std = vec![0.0; d];
    for row in data.features.rows() {
        for ((s, m), v) in std.iter_mut().zip(mean.iter()).zip(row.iter()) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let mut xs = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            xs[[i, j]] = (data.features[[i, j]] - mean[j]) / std[j];
        }
    }

    // Kernel matrix shared across the one-vs-rest binaries.
    let gram = xs.dot(&xs.t());
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            k[[i, j]] = params.kernel.apply(gram[[i, j]]);
        }
    }

    let mut binaries = Vec::with_capacity(data.n_classes());
    for class in 0..data.n_classes() {
        let y: Vec<f64> = data
            .labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ (class as u64).wrapping_mul(0x9e37));
        let (alpha, bias) = smo(&k, &y, params.c, params.tol, params.max_sweeps, &mut rng)?;

        let mut coeffs = Vec::new();
        let mut rows = Vec::new();
        for i in 0..n {
            if alpha[i] > 1e-12 {
                coeffs.push(alpha[i] * y[i]);
                rows.push(i);
            }
        }
        let mut support = Array2::zeros((rows.len(), d));
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..d {
                support[[r, j]] = xs[[i, j]];
            }
        }
        binaries.push(BinarySvm { coeffs, support, bias });
    }

    Ok(SvmModel {
        kernel: params.kernel,
        binaries,
        mean,
        std,
        class_names: data.class_names.clone(),
    })
}

/// Sequential minimal optimization over a precomputed kernel matrix.
fn smo(
    k: &Array2<f64>,
    y: &[f64],
    c: f64,
    tol: f64,
    max_sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64), ClassifyError> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut b = 0.0;
    let decision = |alpha: &[f64], b: f64, i: usize| -> f64 {
        let mut acc = b;
        for j in 0..n {
            if alpha[j] != 0.0 {
                acc += alpha[j] * y[j] * k[[j, i]];
            }
        }
        acc
    };

    let mut quiet_sweeps = 0;
    let mut sweeps = 0;
    while quiet_sweeps < 3 {
        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(ClassifyError::Convergence { sweeps: max_sweeps });
        }
        let mut changed = 0;
        for i in 0..n {
            let e_i = decision(&alpha, b, i) - y[i];
            let r = y[i] * e_i;
            if !((r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0)) {
                continue;
            }
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let e_j = decision(&alpha, b, j) - y[j];
            let (a_i_old, a_j_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if (y[i] - y[j]).abs() > f64::EPSILON {
                ((a_j_old - a_i_old).max(0.0), (c + a_j_old - a_i_old).min(c))
            } else {
                ((a_i_old + a_j_old - c).max(0.0), (a_i_old + a_j_old).min(c))
            };
            if hi - lo < 1e-12 {
                continue;
            }
            let eta = 2.0 * k[[i, j]] - k[[i, i]] - k[[j, j]];
            if eta >= 0.0 {
                continue;
            }
            let mut a_j = a_j_old - y[j] * (e_i - e_j) / eta;
            a_j = a_j.clamp(lo, hi);
            if (a_j - a_j_old).abs() < 1e-7 {
                continue;
            }
            let a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j);
            alpha[i] = a_i;
            alpha[j] = a_j;
            let b1 = b - e_i
                - y[i] * (a_i - a_i_old) * k[[i, i]]
                - y[j] * (a_j - a_j_old) * k[[i, j]];
            let b2 = b - e_j
                - y[i] * (a_i - a_i_old) * k[[i, j]]
                - y[j] * (a_j - a_j_old) * k[[j, j]];
            b = if a_i > 0.0 && a_i < c {
                b1
            } else if a_j > 0.0 && a_j < c {
                b2
            } else {
                0.5 * (b1 + b2)
            };
            changed += 1;
        }
        if changed == 0 {
            quiet_sweeps += 1;
        } else {
            quiet_sweeps = 0;
        }
    }
    Ok((alpha, b))
}

/// Argmax class per row; ties resolve to the lowest class index.
pub fn svm_predict(model: &SvmModel, features: &Array2<f64>) -> Result<Vec<usize>, ClassifyError> {
    let values = model.decision_values(features)?;
    Ok(values
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
}

/// Accuracy, macro-F1 and per-class precision/recall from a confusion
/// matrix (rows = truth, columns = prediction).
pub fn metrics(confusion: &[Vec<u64>]) -> Result<MetricsSummary, ClassifyError> {
    let n = confusion.len();
    if n == 0 || confusion.iter().any(|r| r.len() != n) {
        return Err(ClassifyError::NonSquare);
    }
    let total: u64 = confusion.iter().flat_map(|r| r.iter()).sum();
    let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
    let accuracy = if total > 0 { trace as f64 / total as f64 } else { 0.0 };
    let mut per_class = Vec::with_capacity(n);
    let mut f1_sum = 0.0;
    for i in 0..n {
        let row: u64 = confusion[i].iter().sum();
        let col: u64 = (0..n).map(|r| confusion[r][i]).sum();
        let tp = confusion[i][i] as f64;
        let precision = if col > 0 { tp / col as f64 } else { 0.0 };
        let recall = if row > 0 { tp / row as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
        per_class.push(ClassScores { precision, recall, f1 });
    }
    Ok(MetricsSummary { accuracy, macro_f1: f1_sum / n as f64, per_class })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub folds: Vec<FoldMetrics>,
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
    /// Confusion matrix summed over folds (rows = truth).
    pub confusion: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

/// Stratified k-fold cross-validation with a seeded shuffle; returns mean
/// accuracy, mean macro-F1 and the summed confusion matrix.
pub fn kfold_evaluate(
    data: &Dataset,
    k: usize,
    c: f64,
    seed: u64,
) -> Result<EvalReport, ClassifyError> {
    if k < 2 {
        return Err(ClassifyError::BadK(k));
    }
    let classes = data.n_classes();
    let mut per_class_indices: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in data.labels.iter().enumerate() {
        per_class_indices[l].push(i);
    }
    for (class, idxs) in per_class_indices.iter().enumerate() {
        if !idxs.is_empty() && idxs.len() < k {
            return Err(ClassifyError::ClassTooSmall { class, count: idxs.len(), k });
        }
    }

    // Seeded shuffle per class, then deal round-robin into folds.
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class, idxs) in per_class_indices.iter().enumerate() {
        let mut idxs = idxs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class as u64).wrapping_mul(0x51_7c_c1));
        for i in (1..idxs.len()).rev() {
            let j = rng.gen_range(0..=i);
            idxs.swap(i, j);
        }
        for (pos, idx) in idxs.into_iter().enumerate() {
            folds[pos % k].push(idx);
        }
    }

    let d = data.features.ncols();
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut fold_metrics = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> =
            folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.clone()).collect();
        let take = |idxs: &[usize]| -> (Array2<f64>, Vec<usize>) {
            let mut m = Array2::zeros((idxs.len(), d));
            let mut l = Vec::with_capacity(idxs.len());
            for (r, &i) in idxs.iter().enumerate() {
                for j in 0..d {
                    m[[r, j]] = data.features[[i, j]];
                }
                l.push(data.labels[i]);
            }
            (m, l)
        };
        let (train_x, train_y) = take(&train_idx);
        let (test_x, test_y) = take(test_idx);
        let train = Dataset::new(train_x, train_y, data.class_names.clone())?;
        let params = SvmParams {
            c,
            seed: seed.wrapping_add(31 * f as u64),
            ..SvmParams::default()
        };
        let model = svm_train(&train, &params)?;
        let pred = svm_predict(&model, &test_x)?;
        let mut fold_conf = vec![vec![0u64; classes]; classes];
        for (t, p) in test_y.iter().zip(pred.iter()) {
            fold_conf[*t][*p] += 1;
            confusion[*t][*p] += 1;
        }
        let m = metrics(&fold_conf)?;
        fold_metrics.push(FoldMetrics { accuracy: m.accuracy, macro_f1: m.macro_f1 });
    }
    let mean_accuracy = fold_metrics.iter().map(|m| m.accuracy).sum::<f64>() / k as f64;
    let mean_macro_f1 = fold_metrics.iter().map(|m| m.macro_f1).sum::<f64>() / k as f64;
    Ok(EvalReport {
        folds: fold_metrics,
        mean_accuracy,
        mean_macro_f1,
        confusion,
        class_names: data.class_names.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn xor_dataset() -> Dataset {
        let features = Array2::from_shape_vec(
            (4, 2),
            vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        Dataset::new(features, vec![0, 0, 1, 1], vec!["even".into(), "odd".into()]).unwrap()
    }

    fn blobs(n_per: usize, centers: &[(f64, f64)], spread: f64, seed: u64) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, (cx, cy)) in centers.iter().enumerate() {
            for _ in 0..n_per {
                rows.push(cx + rng.gen_range(-spread..spread));
                rows.push(cy + rng.gen_range(-spread..spread));
                labels.push(c);
            }
        }
        let features = Array2::from_shape_vec((labels.len(), 2), rows).unwrap();
        let names = (0..centers.len()).map(|c| format!("c{c}")).collect();
        Dataset::new(features, labels, names).unwrap()
    }

    #[test]
    fn separable_clusters_reach_full_training_accuracy() {
        let data = blobs(20, &[(-2.0, -2.0), (2.0, 2.0)], 0.5, 3);
        let model = svm_train(&data, &SvmParams::default()).unwrap();
        let pred = svm_predict(&model, &data.features).unwrap();
        let correct = pred.iter().zip(&data.labels).filter(|(a, b)| a == b).count();
        assert_eq!(correct, data.labels.len());
    }

    #[test]
    fn quadratic_kernel_separates_xor_linear_does_not() {
        let data = xor_dataset();
        let quad = svm_train(
            &data,
            &SvmParams { c: 10.0, kernel: Kernel::Quadratic, ..SvmParams::default() },
        )
        .unwrap();
        let pred = svm_predict(&quad, &data.features).unwrap();
        assert_eq!(pred, data.labels, "quadratic kernel must separate xor");

        let lin = svm_train(
            &data,
            &SvmParams { c: 10.0, kernel: Kernel::Linear, ..SvmParams::default() },
        )
        .unwrap();
        let pred = svm_predict(&lin, &data.features).unwrap();
        let correct = pred.iter().zip(&data.labels).filter(|(a, b)| a == b).count();
        assert!(correct < 4, "a linear kernel cannot separate xor");
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(15, &[(-1.5, 0.0), (1.5, 0.0), (0.0, 2.0)], 0.6, 9);
        let a = svm_train(&data, &SvmParams::default()).unwrap();
        let b = svm_train(&data, &SvmParams::default()).unwrap();
        let va = a.decision_values(&data.features).unwrap();
        let vb = b.decision_values(&data.features).unwrap();
        for (x, y) in va.iter().zip(vb.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-6);
        }
    }

    #[test]
    fn prediction_matches_kernel_expansion_oracle() {
        use rand::{Rng, SeedableRng};
        let data = blobs(15, &[(-2.0, 1.0), (2.0, 1.0)], 0.8, 21);
        let model = svm_train(&data, &SvmParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut rows = Vec::new();
        for _ in 0..40 {
            rows.push(rng.gen_range(-3.0..3.0));
            rows.push(rng.gen_range(-3.0..3.0));
        }
        let test = Array2::from_shape_vec((40, 2), rows).unwrap();
        let vals = model.decision_values(&test).unwrap();
        // Oracle: direct kernel expansion over support vectors.
        for i in 0..test.nrows() {
            let x: Vec<f64> = (0..2)
                .map(|j| (test[[i, j]] - model.mean[j]) / model.std[j])
                .collect();
            for (c, bin) in model.binaries.iter().enumerate() {
                let mut acc = bin.bias;
                for (coeff, sv) in bin.coeffs.iter().zip(bin.support.rows()) {
                    let dot: f64 = sv.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                    acc += coeff * (dot + 1.0).powi(2);
                }
                assert_abs_diff_eq!(vals[[i, c]], acc, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn prediction_invariant_under_training_row_permutation() {
        let data = blobs(12, &[(-2.0, -1.0), (2.0, -1.0), (0.0, 2.5)], 0.5, 5);
        let model = svm_train(&data, &SvmParams::default()).unwrap();

        let n = data.features.nrows();
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut feats = Array2::zeros((n, 2));
        let mut labels = Vec::new();
        for (r, &i) in perm.iter().enumerate() {
            feats[[r, 0]] = data.features[[i, 0]];
            feats[[r, 1]] = data.features[[i, 1]];
            labels.push(data.labels[i]);
        }
        let permuted =
            Dataset::new(feats, labels, data.class_names.clone()).unwrap();
        let model2 = svm_train(&permuted, &SvmParams::default()).unwrap();
        assert_eq!(
            svm_predict(&model, &data.features).unwrap(),
            svm_predict(&model2, &data.features).unwrap()
        );
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let features = Array2::zeros((3, 2));
        let err = Dataset::new(features, vec![0, 0, 0], vec!["a".into(), "b".into()]).unwrap_err();
        assert!(matches!(err, ClassifyError::SingleClass));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let data = blobs(10, &[(-2.0, 0.0), (2.0, 0.0)], 0.4, 1);
        let model = svm_train(&data, &SvmParams::default()).unwrap();
        let bad = Array2::zeros((2, 5));
        assert!(matches!(
            model.decision_values(&bad),
            Err(ClassifyError::WidthMismatch { got: 5, want: 2 })
        ));
    }

    #[test]
    fn metrics_identity_confusion() {
        let m = metrics(&[vec![5, 0], vec![0, 7]]).unwrap();
        assert_abs_diff_eq!(m.accuracy, 1.0);
        assert_abs_diff_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn metrics_agree_with_bruteforce_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let classes = 4;
        let truth: Vec<usize> = (0..200).map(|_| rng.gen_range(0..classes)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.gen_bool(0.7) { t } else { rng.gen_range(0..classes) })
            .collect();
        let mut conf = vec![vec![0u64; classes]; classes];
        for (t, p) in truth.iter().zip(pred.iter()) {
            conf[*t][*p] += 1;
        }
        let m = metrics(&conf).unwrap();

        // Brute-force recomputation from raw pairs.
        let acc = truth.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / 200.0;
        assert_abs_diff_eq!(m.accuracy, acc, epsilon = 1e-12);
        let mut f1s = Vec::new();
        for c in 0..classes {
            let tp = truth
                .iter()
                .zip(&pred)
                .filter(|(t, p)| **t == c && **p == c)
                .count() as f64;
            let fp = truth.iter().zip(&pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
            let fneg = truth.iter().zip(&pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
            f1s.push(if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 });
        }
        let macro_f1 = f1s.iter().sum::<f64>() / classes as f64;
        assert_abs_diff_eq!(m.macro_f1, macro_f1, epsilon = 1e-12);
    }

    #[test]
    fn kfold_separable_data_is_perfect() {
        let data = blobs(15, &[(-3.0, -3.0), (3.0, -3.0), (-3.0, 3.0), (3.0, 3.0)], 0.5, 8);
        let report = kfold_evaluate(&data, 5, 1.0, 42).unwrap();
        assert_abs_diff_eq!(report.mean_accuracy, 1.0);
        assert_abs_diff_eq!(report.mean_macro_f1, 1.0);
        // Fold sizes differ by at most one per class.
        let total: u64 = report.confusion.iter().flat_map(|r| r.iter()).sum();
        assert_eq!(total, 60);
    }

    #[test]
    fn kfold_fold_sizes_balanced_per_class() {
        let data = blobs(13, &[(-3.0, 0.0), (3.0, 0.0)], 0.5, 2);
        // Reach into the stratification by checking a run completes and the
        // confusion totals match; 13 samples into 5 folds -> sizes 3/2.
        let report = kfold_evaluate(&data, 5, 1.0, 0).unwrap();
        let total: u64 = report.confusion.iter().flat_map(|r| r.iter()).sum();
        assert_eq!(total, 26);
    }

    #[test]
    fn kfold_rejects_small_classes() {
        let data = blobs(3, &[(-3.0, 0.0), (3.0, 0.0)], 0.3, 2);
        assert!(matches!(
            kfold_evaluate(&data, 5, 1.0, 0),
            Err(ClassifyError::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn shuffled_labels_score_near_chance() {
        use rand::{Rng, SeedableRng};
        // Features carry no class signal once labels are shuffled; accuracy
        // should hover around 1/classes across seeds.
        let classes = 4;
        let mut accs = Vec::new();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let data = blobs(
                10,
                &[(-3.0, -3.0), (3.0, -3.0), (-3.0, 3.0), (3.0, 3.0)],
                0.5,
                100 + seed,
            );
            let labels: Vec<usize> = (0..data.labels.len()).map(|_| rng.gen_range(0..classes)).collect();
            let shuffled = Dataset::new(data.features.clone(), labels, data.class_names.clone());
            let Ok(shuffled) = shuffled else { continue };
            if let Ok(report) = kfold_evaluate(&shuffled, 4, 1.0, seed) {
                accs.push(report.mean_accuracy);
            }
        }
        assert!(!accs.is_empty());
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        // Binomial noise bound: 20 runs x 40 samples, sd ~ 0.015; allow 6 sd.
        assert!(
            (mean - 0.25).abs() < 0.1,
            "chance-level accuracy expected, got {mean}"
        );
    }
}
