use ndarray::Array2;

use super::forward::{forward_with_param_vars, relaxed_propagation, Propagation, Readout};
use super::{GnnError, ModelParams};
use crate::autodiff::gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
use crate::autodiff::AutodiffError;

/// Finite-difference check of the cross-entropy loss of one graph.
///
/// Report entries are, in order: features, adjacency, then every parameter
/// tensor in [`ModelParams::tensors`] order. `adjacency` may be real-valued.
pub fn check_model_gradients(
    params: &ModelParams<f64>,
    features: &Array2<f64>,
    adjacency: &Array2<f64>,
    label: usize,
    config: GradCheckConfig,
) -> Result<GradCheckReport, GnnError> {
    params.validate()?;
    let n = features.nrows();
    if features.ncols() != params.input_dim || adjacency.dim() != (n, n) {
        return Err(GnnError::Dimension(format!(
            "features {:?} and adjacency {:?} for input dim {}",
            features.dim(),
            adjacency.dim(),
            params.input_dim
        )));
    }
    if label >= params.num_classes {
        return Err(AutodiffError::LabelOutOfRange { classes: params.num_classes }.into());
    }
    let mut inputs = vec![features.clone(), adjacency.clone()];
    inputs.extend(params.tensors().into_iter().cloned());
    let report = check_gradients(&inputs, config, |tape, vars| {
        let op = relaxed_propagation(tape, params.arch, vars[1]).map_err(into_autodiff)?;
        let out = forward_with_param_vars(params, tape, vars[0], &Propagation::Dense(op), &Readout::Sum, vars[2..].to_vec())
            .map_err(into_autodiff)?;
        tape.softmax_cross_entropy(out.logits, &[label])
    })?;
    Ok(report)
}

fn into_autodiff(e: GnnError) -> AutodiffError {
    match e {
        GnnError::Autodiff(inner) => inner,
        // dimensions were validated above
        other => unreachable!("unexpected forward error during gradient check: {other}"),
    }
}
