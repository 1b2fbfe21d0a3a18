use ndarray::Array2;

use super::{FeaturePolicy, GraphError};
use crate::Scalar;

/// Builds one graph's feature matrix.
///
/// `labels` holds contiguous node-label indices below `num_labels`;
/// `attributes` has one row per node. `degrees` is only read by
/// [`FeaturePolicy::ScalarDegree`], which stores the raw degree.
pub fn build_features<T: Scalar>(
    labels: Option<&[usize]>,
    num_labels: usize,
    attributes: Option<&Array2<T>>,
    degrees: &[usize],
    policy: FeaturePolicy,
) -> Result<Array2<T>, GraphError> {
    let n = degrees.len();
    let one_hot = |labels: &[usize]| -> Result<Array2<T>, GraphError> {
        if labels.len() != n {
            return Err(GraphError::CountMismatch(format!("{} node labels for {n} nodes", labels.len())));
        }
        let mut x = Array2::zeros((n, num_labels));
        for (i, &l) in labels.iter().enumerate() {
            if l >= num_labels {
                return Err(GraphError::UnseenLabel(l));
            }
            x[[i, l]] = T::one();
        }
        Ok(x)
    };
    match policy {
        FeaturePolicy::OneHotLabel => {
            let labels = labels.ok_or(GraphError::PolicyUnsatisfied { policy, what: "node labels" })?;
            one_hot(labels)
        }
        FeaturePolicy::LabelPlusAttributes => {
            let labels = labels.ok_or(GraphError::PolicyUnsatisfied { policy, what: "node labels" })?;
            let attrs = attributes.ok_or(GraphError::PolicyUnsatisfied { policy, what: "node attributes" })?;
            if attrs.nrows() != n {
                return Err(GraphError::CountMismatch(format!("{} attribute rows for {n} nodes", attrs.nrows())));
            }
            let hot = one_hot(labels)?;
            Ok(ndarray::concatenate(ndarray::Axis(1), &[hot.view(), attrs.view()]).unwrap())
        }
        FeaturePolicy::ScalarDegree => {
            Ok(Array2::from_shape_fn((n, 1), |(i, _)| T::from_usize(degrees[i]).unwrap()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_hot_rows() {
        let x: Array2<f64> = build_features(Some(&[1, 0, 2]), 3, None, &[0, 0, 0], FeaturePolicy::OneHotLabel).unwrap();
        assert_eq!(x.row(0).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(x.row(2).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn degree_and_attribute_policies() {
        let x: Array2<f64> = build_features(None, 0, None, &[3, 1], FeaturePolicy::ScalarDegree).unwrap();
        assert_eq!(x, array![[3.0], [1.0]]);
        let attrs = array![[0.5, -1.0], [2.0, 0.25]];
        let x = build_features(Some(&[0, 1]), 2, Some(&attrs), &[1, 1], FeaturePolicy::LabelPlusAttributes).unwrap();
        assert_eq!(x, array![[1.0, 0.0, 0.5, -1.0], [0.0, 1.0, 2.0, 0.25]]);
    }

    #[test]
    fn errors() {
        let r = build_features::<f64>(Some(&[4]), 3, None, &[0], FeaturePolicy::OneHotLabel);
        assert!(matches!(r, Err(GraphError::UnseenLabel(4))));
        let r = build_features::<f64>(None, 3, None, &[0], FeaturePolicy::OneHotLabel);
        assert!(matches!(r, Err(GraphError::PolicyUnsatisfied { .. })));
        let r = build_features::<f64>(Some(&[0]), 3, None, &[0], FeaturePolicy::LabelPlusAttributes);
        assert!(matches!(r, Err(GraphError::PolicyUnsatisfied { .. })));
    }
}
