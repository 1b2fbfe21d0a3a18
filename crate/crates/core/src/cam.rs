//! Class activation maps over nodes and the ranked CAM matrix built from
//! them.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::gnn::{forward, ForwardTrace, GnnError, ModelParams};
use crate::graph::Graph;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum CamError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("grad-cam needs equal hidden widths, got {0:?}")]
    UnequalHiddenDims(Vec<usize>),
    #[error("heat-map entries must be finite and non-negative (row {row}, column {col})")]
    Negative { row: usize, col: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CamKind {
    Cam,
    GradCam,
}

/// Node-by-class importance, `n × C`, all entries non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap<T> {
    values: Array2<T>,
}

impl<T: Scalar> HeatMap<T> {
    pub fn new(values: Array2<T>) -> Result<Self, CamError> {
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !(v.is_finite() && **v >= T::zero())) {
            return Err(CamError::Negative { row, col });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    /// Writes `node_id,class_0,..,class_{C-1}` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CamError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["node_id".to_string()];
        header.extend((0..self.num_classes()).map(|c| format!("class_{c}")));
        w.write_record(&header)?;
        for (v, row) in self.values.rows().into_iter().enumerate() {
            let mut record = vec![v.to_string()];
            record.extend(row.iter().map(|x| x.as_f64().to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `ReLU(h^(L) Wᵀ)` from the last hidden layer of `trace`.
pub fn cam_heatmap<T: Scalar>(trace: &ForwardTrace<T>, params: &ModelParams<T>) -> Result<HeatMap<T>, CamError> {
    let h = trace.last_hidden();
    if h.ncols() != params.out_weight.ncols() {
        return Err(CamError::Shape(format!(
            "last hidden layer has {} columns, output weight has {}",
            h.ncols(),
            params.out_weight.ncols()
        )));
    }
    HeatMap::new(h.dot(&params.out_weight.t()).mapv(|x| x.max(T::zero())))
}

/// Grad-CAM: for each class `c` and layer `l`, `α^l[:, c]` is the node-mean
/// of `∂z_c/∂h^(l)`; the map is the layer mean of `ReLU(h^(l) α^l)`.
///
/// Runs one reverse pass per class on the trace's tape, resetting stored
/// gradients before each.
pub fn grad_cam_heatmap<T: Scalar>(trace: &mut ForwardTrace<T>) -> Result<HeatMap<T>, CamError> {
    let hidden = trace.out.hidden.clone();
    let widths: Vec<usize> = hidden.iter().map(|&h| trace.tape.value(h).ncols()).collect();
    if widths.is_empty() || widths.iter().any(|&w| w != widths[0]) {
        return Err(CamError::UnequalHiddenDims(widths));
    }
    let n = trace.tape.value(hidden[0]).nrows();
    let classes = trace.tape.value(trace.out.logits).ncols();
    let width = widths[0];
    let mut alphas = vec![Array2::<T>::zeros((width, classes)); hidden.len()];
    for c in 0..classes {
        trace.tape.reset_grads();
        let zc = trace.tape.pick(trace.out.logits, 0, c)?;
        trace.tape.backward(zc)?;
        for (l, &h) in hidden.iter().enumerate() {
            let grad = match trace.tape.grad_of(h) {
                Ok(g) => g,
                // a layer cut off from the logits contributes nothing
                Err(AutodiffError::NoGradient(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let mean = grad.sum_axis(ndarray::Axis(0)) / T::from_usize(n).unwrap();
            alphas[l].column_mut(c).assign(&mean);
        }
    }
    trace.tape.reset_grads();
    let mut total = Array2::<T>::zeros((n, classes));
    for (l, &h) in hidden.iter().enumerate() {
        total += &trace.tape.value(h).dot(&alphas[l]).mapv(|x| x.max(T::zero()));
    }
    HeatMap::new(total / T::from_usize(hidden.len()).unwrap())
}

/// Runs the model on `graph` and returns the requested map.
pub fn heatmap<T: Scalar>(kind: CamKind, params: &ModelParams<T>, graph: &Graph<T>) -> Result<HeatMap<T>, CamError> {
    let mut trace = forward(params, graph)?;
    match kind {
        CamKind::Cam => cam_heatmap(&trace, params),
        CamKind::GradCam => grad_cam_heatmap(&mut trace),
    }
}

/// Per class, node ids by descending heat; ties go to the smaller id.
pub fn column_rank<T: Scalar>(heat: &HeatMap<T>) -> Array2<usize> {
    let (n, classes) = heat.values.dim();
    let mut out = Array2::zeros((n, classes));
    for c in 0..classes {
        let col = heat.values.column(c);
        let mut ids: Vec<usize> = (0..n).collect();
        // stable sort keeps ascending ids among equal heats
        ids.sort_by(|&a, &b| col[b].partial_cmp(&col[a]).expect("heat values are finite"));
        out.column_mut(c).assign(&ndarray::Array1::from(ids));
    }
    out
}

/// Merges the class columns position by position, left to right, keeping
/// the first occurrence of each node.
pub fn global_rank_from_columns(columns: &Array2<usize>) -> Vec<usize> {
    let n = columns.nrows();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for row in columns.rows() {
        for &v in row {
            if !seen[v] {
                seen[v] = true;
                out.push(v);
            }
        }
        if out.len() == n {
            break;
        }
    }
    out
}

pub fn global_rank<T: Scalar>(heat: &HeatMap<T>) -> Vec<usize> {
    global_rank_from_columns(&column_rank(heat))
}

/// `n × (C+1)` node rankings: one column per class, then the global one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedCamMatrix {
    columns: Vec<Vec<usize>>,
}

impl RankedCamMatrix {
    pub fn num_nodes(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// Class columns plus the global column.
    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, c: usize) -> &[usize] {
        &self.columns[c]
    }

    pub fn global(&self) -> &[usize] {
        self.columns.last().expect("at least one column")
    }

    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    pub fn to_array(&self) -> Array2<usize> {
        Array2::from_shape_fn((self.num_nodes(), self.num_columns()), |(i, c)| self.columns[c][i])
    }
}

pub fn ranked_cam_matrix<T: Scalar>(heat: &HeatMap<T>) -> RankedCamMatrix {
    let ranks = column_rank(heat);
    let mut columns: Vec<Vec<usize>> = ranks.columns().into_iter().map(|c| c.to_vec()).collect();
    columns.push(global_rank_from_columns(&ranks));
    RankedCamMatrix { columns }
}
