//! Labeled column-per-sample data matrices.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, Matrix, Vector};

/// A `d x K` matrix with one sample per column, each labeled with a class
/// index in `0..num_classes` and an optional condition tag (illumination,
/// pose, synthetic domain, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    samples: Matrix,
    labels: Vec<usize>,
    conditions: Vec<String>,
    class_names: Vec<String>,
}

impl DataMatrix {
    /// Builds a data matrix with generated class names `"0", "1", ...` and
    /// empty condition tags.
    pub fn new(samples: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let k = samples.ncols();
        Self::with_metadata(
            samples,
            labels,
            vec![String::new(); k],
            (0..num_classes).map(|i| i.to_string()).collect(),
        )
    }

    pub fn with_metadata(
        samples: Matrix,
        labels: Vec<usize>,
        conditions: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::EmptyMatrix {
                rows: 0,
                cols: samples.ncols(),
            });
        }
        if samples.ncols() > 0 {
            ensure_finite(&samples)?;
        }
        if labels.len() != samples.ncols() {
            return Err(Error::DimensionMismatch {
                context: "labels per column",
                expected: samples.ncols(),
                found: labels.len(),
            });
        }
        if conditions.len() != samples.ncols() {
            return Err(Error::DimensionMismatch {
                context: "condition tags per column",
                expected: samples.ncols(),
                found: conditions.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            samples,
            labels,
            conditions,
            class_names,
        })
    }

    pub fn dim(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn column(&self, j: usize) -> Vector {
        self.samples.column(j).into_owned()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn class_columns(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(j, &l)| (l == class).then_some(j))
            .collect()
    }

    /// `Y_i`: the columns of class `class`, in original order.
    pub fn class_submatrix(&self, class: usize) -> Matrix {
        self.samples.select_columns(&self.class_columns(class))
    }

    /// `Y_{not i}`: every column not in class `class`. May have zero columns.
    pub fn complement(&self, class: usize) -> Matrix {
        let idx: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter_map(|(j, &l)| (l != class).then_some(j))
            .collect();
        self.samples.select_columns(&idx)
    }

    /// Sub-dataset over the given columns; the class table is kept whole.
    pub fn select(&self, columns: &[usize]) -> DataMatrix {
        DataMatrix {
            samples: self.samples.select_columns(columns),
            labels: columns.iter().map(|&j| self.labels[j]).collect(),
            conditions: columns.iter().map(|&j| self.conditions[j].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Columns of `self` followed by the columns of `other`. Both must share
    /// the dimension and the class table.
    pub fn concat(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "concatenated data dimension",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if other.class_names != self.class_names {
            return Err(Error::InvalidConfig("concatenated data disagree on class names".into()));
        }
        let mut samples = Matrix::zeros(self.dim(), self.len() + other.len());
        samples.columns_mut(0, self.len()).copy_from(&self.samples);
        samples.columns_mut(self.len(), other.len()).copy_from(&other.samples);
        Ok(DataMatrix {
            samples,
            labels: self.labels.iter().chain(&other.labels).copied().collect(),
            conditions: self.conditions.iter().chain(&other.conditions).cloned().collect(),
            class_names: self.class_names.clone(),
        })
    }

    /// Same labels and tags with samples replaced by `T * Y`.
    pub fn transformed(&self, t: &Matrix) -> Result<DataMatrix> {
        if t.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "transform columns vs data dimension",
                expected: self.dim(),
                found: t.ncols(),
            });
        }
        Ok(DataMatrix {
            samples: t * &self.samples,
            labels: self.labels.clone(),
            conditions: self.conditions.clone(),
            class_names: self.class_names.clone(),
        })
    }

    /// Scales every non-zero column to unit Euclidean norm.
    pub fn normalize_columns(&mut self) {
        for mut col in self.samples.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= n;
            }
        }
    }

    /// Errors if any class has no columns.
    pub fn ensure_classes_populated(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(i) => Err(Error::EmptyClass(i)),
            None => Ok(()),
        }
    }

    /// SHA-256 over the serialized dataset container.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(crate::container::encode_dataset(self));
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> DataMatrix {
        let y = Matrix::from_fn(3, 5, |i, j| (i * 5 + j) as f64);
        DataMatrix::new(y, vec![0, 1, 0, 2, 1], 3).unwrap()
    }

    #[test]
    fn concat_then_select_recovers_parts() {
        let d = toy();
        let joined = d.select(&[0, 1]).concat(&d.select(&[2, 3, 4])).unwrap();
        assert_eq!(joined, d);
        let other = DataMatrix::new(Matrix::zeros(2, 1), vec![0], 3).unwrap();
        assert!(d.concat(&other).is_err());
    }

    #[test]
    fn class_and_complement_partition_columns() {
        let d = toy();
        for c in 0..3 {
            assert_eq!(d.class_submatrix(c).ncols() + d.complement(c).ncols(), d.len());
        }
        assert_eq!(d.class_submatrix(0).column(1), d.samples().column(2));
        assert_eq!(d.class_counts(), vec![2, 2, 1]);
    }

    #[test]
    fn label_out_of_range_rejected() {
        let y = Matrix::zeros(2, 2);
        assert!(DataMatrix::new(y, vec![0, 2], 2).is_err());
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            DataMatrix::new(Matrix::zeros(2, 3), vec![0, 1], 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_class_detected() {
        let d = DataMatrix::new(Matrix::zeros(2, 2), vec![0, 0], 2).unwrap();
        assert!(matches!(d.ensure_classes_populated(), Err(Error::EmptyClass(1))));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = toy();
        let mut b = toy();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.normalize_columns();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
