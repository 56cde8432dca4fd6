//! Classifier-ready feature vectors: per-landmark displacement features
//! (distance to nose, neutral vs peak), fixed-length crease-pattern
//! descriptors, PCA plumbing, and the feature CSV interchange format.

use std::io::{Read, Write};

use ndarray::Array2;
use thiserror::Error;

use crate::crease::CreasePattern;
use crate::landmarks::{NormalizedFrame, Region};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescriptorId {
    Dtnnp,
    Origami { n_max: usize, e_max: usize },
    Combined,
}

impl std::fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DescriptorId::Dtnnp => write!(f, "dtnnp"),
            DescriptorId::Origami { n_max, e_max } => write!(f, "origami{n_max}x{e_max}"),
            DescriptorId::Combined => write!(f, "combined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub descriptor: DescriptorId,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Slot capacities of the fixed-length crease descriptor; the vector length
/// is `2*n_max + 2*e_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DescriptorLayout {
    pub n_max: usize,
    pub e_max: usize,
}

impl Default for DescriptorLayout {
    fn default() -> Self {
        DescriptorLayout { n_max: 128, e_max: 256 }
    }
}

impl DescriptorLayout {
    pub fn vector_len(&self) -> usize {
        2 * self.n_max + 2 * self.e_max
    }
}

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("frames carry different landmark id sets")]
    MismatchedIds,
    #[error("pattern exceeds layout capacity: {nodes} nodes / {edges} edges vs {n_max}/{e_max}")]
    CapacityExceeded { nodes: usize, edges: usize, n_max: usize, e_max: usize },
    #[error("combine needs at least one feature vector")]
    EmptyCombine,
    #[error("pca dims {dims} out of range for {rows}x{cols} data")]
    BadDims { dims: usize, rows: usize, cols: usize },
    #[error("feature CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("feature CSV: {0}")]
    BadTable(String),
}

/// How the per-landmark displacement is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisplacementMode {
    /// Euclidean distance (sum of squared coordinate differences).
    #[default]
    Euclidean,
    /// The difference of squared coordinate terms as printed in the source
    /// formula, odd-extended through zero so the output stays finite.
    /// Kept for archaeology; not used by the pipeline.
    PrintedDifference,
}

/// Displacement of every landmark between the nose-normalized neutral and
/// peak frames, ordered by ascending landmark id; the nose reference is
/// excluded, so the canonical 37-point layout yields 36 elements.
pub fn dtnnp(
    neutral: &NormalizedFrame,
    peak: &NormalizedFrame,
) -> Result<FeatureVector, DescriptorError> {
    dtnnp_with_mode(neutral, peak, DisplacementMode::Euclidean)
}

pub fn dtnnp_with_mode(
    neutral: &NormalizedFrame,
    peak: &NormalizedFrame,
    mode: DisplacementMode,
) -> Result<FeatureVector, DescriptorError> {
    let n = neutral.frame();
    let p = peak.frame();
    if n.points.len() != p.points.len() || n.ids().ne(p.ids()) {
        return Err(DescriptorError::MismatchedIds);
    }
    let nose_id = n
        .points
        .iter()
        .find(|q| q.region == Region::Nose)
        .map(|q| q.id);
    let mut values = Vec::with_capacity(n.points.len().saturating_sub(1));
    for (a, b) in n.points.iter().zip(p.points.iter()) {
        if Some(a.id) == nose_id {
            continue;
        }
        let dx = b.pos[0] - a.pos[0];
        let dy = b.pos[1] - a.pos[1];
        let dz = b.pos[2] - a.pos[2];
        let v = match mode {
            DisplacementMode::Euclidean => (dx * dx + dy * dy + dz * dz).sqrt(),
            DisplacementMode::PrintedDifference => {
                let r = dx * dx - dy * dy;
                r.signum() * r.abs().sqrt()
            }
        };
        values.push(v);
    }
    Ok(FeatureVector { descriptor: DescriptorId::Dtnnp, values })
}

/// Flatten a crease pattern into a fixed-length vector: node coordinates in
/// id order, then edge id pairs (normalized by `n_max`) in lexicographic
/// order, zero-padded to the layout capacity.
pub fn origami_descriptor(
    pattern: &CreasePattern,
    layout: &DescriptorLayout,
) -> Result<FeatureVector, DescriptorError> {
    let mut p = pattern.clone();
    p.normalize();
    if p.nodes.len() > layout.n_max || p.edges.len() > layout.e_max {
        return Err(DescriptorError::CapacityExceeded {
            nodes: p.nodes.len(),
            edges: p.edges.len(),
            n_max: layout.n_max,
            e_max: layout.e_max,
        });
    }
    let mut values = vec![0.0; layout.vector_len()];
    for (i, node) in p.nodes.iter().enumerate() {
        values[2 * i] = node.x;
        values[2 * i + 1] = node.y;
    }
    let base = 2 * layout.n_max;
    let scale = layout.n_max as f64;
    for (j, edge) in p.edges.iter().enumerate() {
        values[base + 2 * j] = f64::from(edge.a) / scale;
        values[base + 2 * j + 1] = f64::from(edge.b) / scale;
    }
    Ok(FeatureVector {
        descriptor: DescriptorId::Origami { n_max: layout.n_max, e_max: layout.e_max },
        values,
    })
}

/// Concatenate feature vectors in argument order.
pub fn combine(features: &[FeatureVector]) -> Result<FeatureVector, DescriptorError> {
    if features.is_empty() {
        return Err(DescriptorError::EmptyCombine);
    }
    let mut values = Vec::with_capacity(features.iter().map(FeatureVector::len).sum());
    for f in features {
        values.extend_from_slice(&f.values);
    }
    Ok(FeatureVector { descriptor: DescriptorId::Combined, values })
}

/// Fitted principal-component basis.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// One row per component, original-space loadings.
    pub components: Array2<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    /// Project rows onto the component basis.
    pub fn transform(&self, data: &Array2<f64>) -> Array2<f64> {
        let n = data.nrows();
        let k = self.components.nrows();
        let d = self.components.ncols();
        let mut out = Array2::zeros((n, k));
        for i in 0..n {
            for c in 0..k {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += (data[[i, j]] - self.mean[j]) * self.components[[c, j]];
                }
                out[[i, c]] = acc;
            }
        }
        out
    }

    /// Map projected rows back into the original space.
    pub fn inverse(&self, proj: &Array2<f64>) -> Array2<f64> {
        let n = proj.nrows();
        let k = self.components.nrows();
        let d = self.components.ncols();
        let mut out = Array2::zeros((n, d));
        for i in 0..n {
            for j in 0..d {
                let mut acc = self.mean[j];
                for c in 0..k {
                    acc += proj[[i, c]] * self.components[[c, j]];
                }
                out[[i, j]] = acc;
            }
        }
        out
    }
}

/// Mean-centered projection onto the leading principal components, with a
/// deterministic sign convention (the largest-magnitude loading of each
/// component is positive). Returns the projection and the fitted basis.
pub fn reduce_pca(data: &Array2<f64>, dims: usize) -> Result<(Array2<f64>, Pca), DescriptorError> {
    let n = data.nrows();
    let d = data.ncols();
    if dims == 0 || dims > n.min(d) {
        return Err(DescriptorError::BadDims { dims, rows: n, cols: d });
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += data[[i, j]];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let denom = (n.max(2) - 1) as f64;
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..n {
        for j in 0..d {
            let xj = data[[i, j]] - mean[j];
            for k in j..d {
                cov[j][k] += xj * (data[[i, k]] - mean[k]) / denom;
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            cov[j][k] = cov[k][j];
        }
    }
    let total_variance: f64 = (0..d).map(|j| cov[j][j]).sum();

    let (eigvals, eigvecs) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigvals[b].total_cmp(&eigvals[a]));

    let mut components = Array2::zeros((dims, d));
    let mut ratios = Vec::with_capacity(dims);
    for (c, &idx) in order.iter().take(dims).enumerate() {
        let mut col: Vec<f64> = (0..d).map(|j| eigvecs[j][idx]).collect();
        // Sign convention: largest-magnitude loading positive.
        let lead = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if col[lead] < 0.0 {
            for v in &mut col {
                *v = -*v;
            }
        }
        for j in 0..d {
            components[[c, j]] = col[j];
        }
        ratios.push(if total_variance > 0.0 { eigvals[idx].max(0.0) / total_variance } else { 0.0 });
    }
    let pca = Pca { mean, components, explained_variance_ratio: ratios };
    Ok((pca.transform(data), pca))
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues
/// and the eigenvector matrix (columns). Desk-scale: fine into the
/// high hundreds of dimensions.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let frob: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= 1e-14 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i][i]).collect();
    (vals, v)
}

// Feature CSV ----------------------------------------------------------------

/// Write labeled feature rows as CSV. The header carries the descriptor id
/// and layout constants in the column names; every row must share the same
/// descriptor and length.
pub fn write_feature_csv<W: Write>(
    mut w: W,
    rows: &[(FeatureVector, u32)],
) -> Result<(), DescriptorError> {
    let Some(first) = rows.first() else {
        return Err(DescriptorError::BadTable("no rows to write".into()));
    };
    let width = first.0.len();
    let tag = first.0.descriptor.to_string();
    for (fv, _) in rows {
        if fv.len() != width || fv.descriptor != first.0.descriptor {
            return Err(DescriptorError::BadTable(
                "rows disagree on descriptor or length".into(),
            ));
        }
    }
    let mut wtr = csv::Writer::from_writer(&mut w);
    let mut header = vec!["label".to_string()];
    header.extend((0..width).map(|i| format!("{tag}_{i:04}")));
    wtr.write_record(&header)?;
    for (fv, label) in rows {
        let mut record = vec![label.to_string()];
        record.extend(fv.values.iter().map(|v| format!("{v:.12e}")));
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read a feature CSV back: (features, labels, descriptor tag).
pub fn read_feature_csv<R: Read>(
    r: R,
) -> Result<(Array2<f64>, Vec<u32>, String), DescriptorError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.is_empty() || &header[0] != "label" {
        return Err(DescriptorError::BadTable("first column must be `label`".into()));
    }
    let width = header.len() - 1;
    let tag = if width > 0 {
        header[1].rsplit_once('_').map(|(t, _)| t.to_string()).unwrap_or_default()
    } else {
        String::new()
    };
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width + 1 {
            return Err(DescriptorError::BadTable(format!(
                "row {i}: expected {} fields, got {}",
                width + 1,
                record.len()
            )));
        }
        let label: u32 = record[0]
            .parse()
            .map_err(|_| DescriptorError::BadTable(format!("row {i}: bad label {:?}", &record[0])))?;
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| DescriptorError::BadTable(format!("row {i}: bad value {field:?}")))?;
            values.push(v);
        }
    }
    let rows = labels.len();
    let features = Array2::from_shape_vec((rows, width), values)
        .map_err(|e| DescriptorError::BadTable(e.to_string()))?;
    Ok((features, labels, tag))
}
