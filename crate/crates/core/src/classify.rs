//! Classification schemes on top of trained factorizations.
//!
//! * basis angle ([`classify_bonmf`]): `k` cosines against the columns of
//!   `W`, argmax, then the cluster's majority training label;
//! * coefficient argmax ([`classify_coefficient_argmax`]): encode the sample,
//!   take the largest coefficient as its cluster, and return the label of the
//!   Euclidean-nearest training member of that cluster;
//! * angle-nearest ([`classify_angle_nearest`]): either cluster by angle to
//!   `W` and return the label of the member with the smallest angle, or
//!   compare the encoded coefficients against every training coefficient
//!   column and return the best match's label.
//!
//! All ties go to the lowest index.

use serde::{Deserialize, Serialize};

use crate::bonmf::{nearest_column_by_angle, nearest_column_counted, BonmfModel};
use crate::data::{majority, LabeledDataset};
use crate::error::{Error, Result};
use crate::matrix::{argmax, dot, norm, BasisMatrix, BinaryAssignment, DenseCoefficients};
use crate::nmf::NmfModel;
use crate::onmf::{Encoder, OnmfModel};

/// Class id assigned to each cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabelMap(Vec<usize>);

impl ClusterLabelMap {
    pub fn new(map: Vec<usize>) -> Self {
        ClusterLabelMap(map)
    }

    pub fn label(&self, cluster: usize) -> usize {
        self.0[cluster]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Majority training label per cluster; empty clusters get the overall
/// majority label.
pub fn build_label_map(
    assignments: &BinaryAssignment,
    labels: &[usize],
) -> Result<ClusterLabelMap> {
    if assignments.len() != labels.len() {
        return Err(Error::dimension(
            "build_label_map",
            assignments.len(),
            labels.len(),
        ));
    }
    let class_count = labels.iter().max().map_or(1, |&l| l + 1);
    let fallback = majority(labels, class_count).unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); assignments.k()];
    for (&c, &l) in assignments.clusters().iter().zip(labels) {
        members[c].push(l);
    }
    Ok(ClusterLabelMap(
        members
            .iter()
            .map(|m| majority(m, class_count).unwrap_or(fallback))
            .collect(),
    ))
}

/// A predicted label plus how it was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub label: usize,
    /// Cluster the sample fell into, for the cluster-based schemes.
    pub cluster: Option<usize>,
    /// Cosine similarities evaluated to reach the decision.
    pub similarity_evaluations: usize,
    /// The sample (or its encoding) had zero norm and a fallback was used.
    pub degenerate: bool,
}

pub trait Classifier: Sync {
    fn classify(&self, x: &[f64]) -> Prediction;
}

/// Basis-angle scheme for BONMF and the semi-binary baseline.
#[derive(Debug, Clone)]
pub struct BasisLabelClassifier<'a> {
    basis: &'a BasisMatrix,
    labels: &'a ClusterLabelMap,
}

impl<'a> BasisLabelClassifier<'a> {
    pub fn new(basis: &'a BasisMatrix, labels: &'a ClusterLabelMap) -> Result<Self> {
        if labels.len() != basis.rank() {
            return Err(Error::dimension(
                "BasisLabelClassifier",
                basis.rank(),
                labels.len(),
            ));
        }
        Ok(BasisLabelClassifier { basis, labels })
    }
}

impl Classifier for BasisLabelClassifier<'_> {
    fn classify(&self, x: &[f64]) -> Prediction {
        match nearest_column_counted(x, norm(x), self.basis) {
            (Some(c), evaluations) => Prediction {
                label: self.labels.label(c),
                cluster: Some(c),
                similarity_evaluations: evaluations,
                degenerate: false,
            },
            (None, _) => Prediction {
                label: self.labels.label(0),
                cluster: None,
                similarity_evaluations: 0,
                degenerate: true,
            },
        }
    }
}

pub fn classify_bonmf(x: &[f64], model: &BonmfModel) -> Result<Prediction> {
    let labels = model
        .cluster_labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("model has no cluster label map".into()))?;
    if x.len() != model.basis.rows() {
        return Err(Error::dimension(
            "classify_bonmf",
            model.basis.rows(),
            x.len(),
        ));
    }
    Ok(BasisLabelClassifier::new(&model.basis, labels)?.classify(x))
}

/// A factorization with a real coefficient matrix for its training samples.
pub trait CoefficientModel {
    fn basis(&self) -> &BasisMatrix;
    fn coefficients(&self) -> &DenseCoefficients;
}

impl CoefficientModel for NmfModel {
    fn basis(&self) -> &BasisMatrix {
        &self.basis
    }
    fn coefficients(&self) -> &DenseCoefficients {
        &self.coefficients
    }
}

impl CoefficientModel for OnmfModel {
    fn basis(&self) -> &BasisMatrix {
        &self.basis
    }
    fn coefficients(&self) -> &DenseCoefficients {
        &self.coefficients
    }
}

fn check_training(model: &dyn CoefficientModel, train: &LabeledDataset) -> Result<()> {
    if model.coefficients().cols() != train.samples() {
        return Err(Error::dimension(
            "classifier training coefficients",
            train.samples(),
            model.coefficients().cols(),
        ));
    }
    if model.basis().rows() != train.features() {
        return Err(Error::dimension(
            "classifier basis",
            train.features(),
            model.basis().rows(),
        ));
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Coefficient-argmax scheme (the default ONMF protocol).
pub struct CoefficientArgmaxClassifier<'a> {
    encoder: Encoder<'a>,
    train: &'a LabeledDataset,
    members: Vec<Vec<usize>>,
}

impl<'a> CoefficientArgmaxClassifier<'a> {
    pub fn new(
        model: &'a dyn CoefficientModel,
        train: &'a LabeledDataset,
        encode_iterations: usize,
    ) -> Result<Self> {
        check_training(model, train)?;
        let h = model.coefficients();
        let mut members = vec![Vec::new(); h.rows()];
        for (j, col) in h.columns().enumerate() {
            if let Some(c) = argmax(col.iter().copied()) {
                members[c].push(j);
            }
        }
        Ok(CoefficientArgmaxClassifier {
            encoder: Encoder::new(model.basis(), encode_iterations),
            train,
            members,
        })
    }

    fn nearest<'i>(&self, x: &[f64], candidates: impl Iterator<Item = &'i usize>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in candidates {
            let d = squared_distance(x, self.train.data.col(j));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    }
}

impl Classifier for CoefficientArgmaxClassifier<'_> {
    fn classify(&self, x: &[f64]) -> Prediction {
        let h = self.encoder.encode(x);
        let cluster = argmax(h.iter().copied()).unwrap_or(0);
        let members = &self.members[cluster];
        let nearest = if members.is_empty() {
            self.nearest(x, (0..self.train.samples()).collect::<Vec<_>>().iter())
        } else {
            self.nearest(x, members.iter())
        };
        Prediction {
            label: nearest.map_or_else(|| self.train.majority_label(), |j| self.train.labels[j]),
            cluster: Some(cluster),
            similarity_evaluations: 0,
            degenerate: norm(&h) == 0.0,
        }
    }
}

pub fn classify_coefficient_argmax(
    x: &[f64],
    model: &dyn CoefficientModel,
    train: &LabeledDataset,
    encode_iterations: usize,
) -> Result<Prediction> {
    Ok(CoefficientArgmaxClassifier::new(model, train, encode_iterations)?.classify(x))
}

/// Which variant of the angle-nearest scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleScheme {
    /// Cluster by angle to the basis columns, then the member forming the
    /// smallest angle with the sample (ONMF+cos).
    BasisThenMember,
    /// Encode the sample and compare against every training coefficient
    /// column (the NMF protocol; keeps all `k × n` training coefficients).
    CoefficientNearest,
}

/// ONMF+cos scheme.
pub struct BasisMemberClassifier<'a> {
    basis: &'a BasisMatrix,
    train: &'a LabeledDataset,
    members: Vec<Vec<usize>>,
}

impl<'a> BasisMemberClassifier<'a> {
    pub fn new(basis: &'a BasisMatrix, train: &'a LabeledDataset) -> Result<Self> {
        if basis.rows() != train.features() {
            return Err(Error::dimension(
                "BasisMemberClassifier",
                train.features(),
                basis.rows(),
            ));
        }
        let mut members = vec![Vec::new(); basis.rank()];
        for j in 0..train.samples() {
            let c = nearest_column_by_angle(train.data.col(j), train.data.col_norm(j), basis)
                .unwrap_or(0);
            members[c].push(j);
        }
        Ok(BasisMemberClassifier {
            basis,
            train,
            members,
        })
    }
}

impl Classifier for BasisMemberClassifier<'_> {
    fn classify(&self, x: &[f64]) -> Prediction {
        let x_norm = norm(x);
        let (Some(cluster), mut evaluations) = nearest_column_counted(x, x_norm, self.basis) else {
            return Prediction {
                label: self.train.majority_label(),
                cluster: None,
                similarity_evaluations: 0,
                degenerate: true,
            };
        };
        let all: Vec<usize>;
        let candidates = if self.members[cluster].is_empty() {
            all = (0..self.train.samples()).collect();
            &all
        } else {
            &self.members[cluster]
        };
        let mut best: Option<(usize, f64)> = None;
        for &j in candidates {
            let nj = self.train.data.col_norm(j);
            let score = if nj == 0.0 {
                f64::NEG_INFINITY
            } else {
                evaluations += 1;
                dot(x, self.train.data.col(j)) / (x_norm * nj)
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        Prediction {
            label: best.map_or_else(
                || self.train.majority_label(),
                |(j, _)| self.train.labels[j],
            ),
            cluster: Some(cluster),
            similarity_evaluations: evaluations,
            degenerate: false,
        }
    }
}

/// NMF scheme: nearest training coefficient column by angle.
pub struct CoefficientAngleClassifier<'a> {
    encoder: Encoder<'a>,
    coefficients: &'a DenseCoefficients,
    coefficient_norms: Vec<f64>,
    train: &'a LabeledDataset,
}

impl<'a> CoefficientAngleClassifier<'a> {
    pub fn new(
        model: &'a dyn CoefficientModel,
        train: &'a LabeledDataset,
        encode_iterations: usize,
    ) -> Result<Self> {
        check_training(model, train)?;
        let coefficients = model.coefficients();
        Ok(CoefficientAngleClassifier {
            encoder: Encoder::new(model.basis(), encode_iterations),
            coefficient_norms: coefficients.columns().map(norm).collect(),
            coefficients,
            train,
        })
    }
}

impl Classifier for CoefficientAngleClassifier<'_> {
    fn classify(&self, x: &[f64]) -> Prediction {
        let h = self.encoder.encode(x);
        let h_norm = norm(&h);
        if h_norm == 0.0 {
            return Prediction {
                label: self.train.majority_label(),
                cluster: None,
                similarity_evaluations: 0,
                degenerate: true,
            };
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, col) in self.coefficients.columns().enumerate() {
            let nj = self.coefficient_norms[j];
            let score = if nj == 0.0 {
                f64::NEG_INFINITY
            } else {
                dot(&h, col) / (h_norm * nj)
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        Prediction {
            label: best.map_or_else(
                || self.train.majority_label(),
                |(j, _)| self.train.labels[j],
            ),
            cluster: None,
            similarity_evaluations: self.coefficients.cols(),
            degenerate: false,
        }
    }
}

pub fn classify_angle_nearest(
    x: &[f64],
    model: &dyn CoefficientModel,
    train: &LabeledDataset,
    scheme: AngleScheme,
    encode_iterations: usize,
) -> Result<Prediction> {
    match scheme {
        AngleScheme::BasisThenMember => {
            check_training(model, train)?;
            Ok(BasisMemberClassifier::new(model.basis(), train)?.classify(x))
        }
        AngleScheme::CoefficientNearest => {
            Ok(CoefficientAngleClassifier::new(model, train, encode_iterations)?.classify(x))
        }
    }
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::dimension("accuracy", truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy of an empty sequence".into(),
        ));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
