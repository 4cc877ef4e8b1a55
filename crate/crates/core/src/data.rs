//! Seen training pairs and unseen class prototypes.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub type ClassId = u32;

/// Labeled visual features with their class attributes, one sample per column.
#[derive(Clone, Debug)]
pub struct SeenDataset {
    features: DenseMatrix,
    attributes: DenseMatrix,
    labels: Vec<ClassId>,
}

impl SeenDataset {
    pub fn new(features: DenseMatrix, attributes: DenseMatrix, labels: Vec<ClassId>) -> Result<Self> {
        if features.cols() != attributes.cols() {
            return Err(Error::InvalidData(format!(
                "features have {} columns but attributes have {}",
                features.cols(),
                attributes.cols()
            )));
        }
        if labels.len() != features.cols() {
            return Err(Error::InvalidData(format!(
                "features have {} columns but there are {} labels",
                features.cols(),
                labels.len()
            )));
        }
        let mut first: BTreeMap<ClassId, usize> = BTreeMap::new();
        for (j, &c) in labels.iter().enumerate() {
            match first.get(&c) {
                None => {
                    first.insert(c, j);
                }
                Some(&j0) => {
                    if (0..attributes.rows()).any(|i| attributes.get(i, j) != attributes.get(i, j0)) {
                        return Err(Error::InvalidData(format!(
                            "samples {j0} and {j} of class {c} have different attributes"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            features,
            attributes,
            labels,
        })
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn attributes(&self) -> &DenseMatrix {
        &self.attributes
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.rows()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.rows()
    }

    pub fn classes(&self) -> BTreeSet<ClassId> {
        self.labels.iter().copied().collect()
    }
}

/// One attribute column per unseen class.
#[derive(Clone, Debug)]
pub struct UnseenPrototypes {
    attributes: DenseMatrix,
    labels: Vec<ClassId>,
}

impl UnseenPrototypes {
    pub fn new(attributes: DenseMatrix, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != attributes.cols() {
            return Err(Error::InvalidData(format!(
                "prototypes have {} columns but there are {} labels",
                attributes.cols(),
                labels.len()
            )));
        }
        let unique: BTreeSet<_> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::InvalidData("prototype labels are not distinct".into()));
        }
        let cols = attributes.columns();
        for a in 0..cols.len() {
            for b in a + 1..cols.len() {
                if cols[a] == cols[b] {
                    return Err(Error::InvalidData(format!(
                        "prototypes {a} and {b} have identical attributes"
                    )));
                }
            }
        }
        Ok(Self { attributes, labels })
    }

    pub fn attributes(&self) -> &DenseMatrix {
        &self.attributes
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.attributes.rows()
    }

    /// Position of a class among the prototypes.
    pub fn index_of(&self, label: ClassId) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Fails when any prototype class also appears among the seen classes.
    pub fn check_disjoint(&self, seen: &SeenDataset) -> Result<()> {
        let seen_classes = seen.classes();
        if let Some(c) = self.labels.iter().find(|c| seen_classes.contains(c)) {
            return Err(Error::InvalidData(format!(
                "class {c} is both seen and unseen"
            )));
        }
        Ok(())
    }
}

/// Scales every nonzero column to unit ℓ2 norm.
pub fn normalize_columns(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for j in 0..m.cols() {
        let n = m.col_norm(j);
        if n > 0.0 {
            let c: Vec<f64> = m.col(j).iter().map(|v| v / n).collect();
            out.set_col(j, &c);
        }
    }
    out
}

/// Builds the seen set, prototypes, and unseen test split from a labeled
/// dataset, a per-class attribute table, and the list of unseen classes.
///
/// Column `c` of `class_attributes` holds the attributes of class id `c`.
pub fn split_by_classes(
    features: &DenseMatrix,
    labels: &[ClassId],
    class_attributes: &DenseMatrix,
    unseen: &[ClassId],
) -> Result<(SeenDataset, UnseenPrototypes, DenseMatrix, Vec<ClassId>)> {
    if labels.len() != features.cols() {
        return Err(Error::InvalidData(format!(
            "features have {} columns but there are {} labels",
            features.cols(),
            labels.len()
        )));
    }
    let n_classes = class_attributes.cols();
    if let Some(&c) = labels.iter().chain(unseen).find(|&&c| c as usize >= n_classes) {
        return Err(Error::InvalidData(format!(
            "class id {c} has no attribute column ({n_classes} classes)"
        )));
    }
    let unseen_set: BTreeSet<ClassId> = unseen.iter().copied().collect();
    let (test_idx, seen_idx): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&j| unseen_set.contains(&labels[j]));
    let seen_labels: Vec<ClassId> = seen_idx.iter().map(|&j| labels[j]).collect();
    let seen_attr_idx: Vec<usize> = seen_labels.iter().map(|&c| c as usize).collect();
    let seen = SeenDataset::new(
        features.select_columns(&seen_idx),
        class_attributes.select_columns(&seen_attr_idx),
        seen_labels,
    )?;
    let proto_labels: Vec<ClassId> = unseen_set.iter().copied().collect();
    let proto_idx: Vec<usize> = proto_labels.iter().map(|&c| c as usize).collect();
    let protos = UnseenPrototypes::new(class_attributes.select_columns(&proto_idx), proto_labels)?;
    let test_labels = test_idx.iter().map(|&j| labels[j]).collect();
    Ok((seen, protos, features.select_columns(&test_idx), test_labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn seen_dataset_shape_checks() {
        let x = m(2, 3, &[1., 2., 3., 4., 5., 6.]);
        let z = m(1, 2, &[1., 1.]);
        let err = SeenDataset::new(x.clone(), z, vec![0, 0, 1]).unwrap_err();
        assert!(err.to_string().contains('3') && err.to_string().contains('2'));
        let z = m(1, 3, &[1., 1., 2.]);
        assert!(SeenDataset::new(x.clone(), z.clone(), vec![0, 0]).is_err());
        assert!(SeenDataset::new(x.clone(), z.clone(), vec![0, 0, 1]).is_ok());
        // same class, different attributes
        assert!(SeenDataset::new(x, z, vec![0, 1, 1]).is_err());
    }

    #[test]
    fn prototypes_validation() {
        let z = m(2, 2, &[1., 1., 0., 0.]);
        assert!(UnseenPrototypes::new(z.clone(), vec![3, 4]).is_err());
        let z = m(2, 2, &[1., 0., 0., 1.]);
        assert!(UnseenPrototypes::new(z.clone(), vec![3, 3]).is_err());
        let p = UnseenPrototypes::new(z, vec![3, 4]).unwrap();
        assert_eq!(p.index_of(4), Some(1));
        let seen = SeenDataset::new(m(1, 1, &[1.]), m(1, 1, &[1.]), vec![3]).unwrap();
        assert!(p.check_disjoint(&seen).is_err());
    }

    #[test]
    fn split_by_class_ids() {
        let x = m(1, 4, &[10., 11., 12., 13.]);
        let attrs = m(2, 3, &[0., 1., 2., 5., 6., 7.]);
        let (seen, protos, test, truth) = split_by_classes(&x, &[0, 2, 1, 2], &attrs, &[2]).unwrap();
        assert_eq!(seen.labels(), &[0, 1]);
        assert_eq!(seen.attributes().col(1), vec![1., 6.]);
        assert_eq!(protos.labels(), &[2]);
        assert_eq!(protos.attributes().col(0), vec![2., 7.]);
        assert_eq!(test.row(0), &[11., 13.]);
        assert_eq!(truth, vec![2, 2]);
    }

    #[test]
    fn normalization_keeps_zero_columns() {
        let n = normalize_columns(&m(2, 2, &[3., 0., 4., 0.]));
        assert_eq!(n.col(0), vec![0.6, 0.8]);
        assert_eq!(n.col(1), vec![0., 0.]);
    }
}
