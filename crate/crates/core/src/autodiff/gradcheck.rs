//! Central finite-difference checks against the analytic reverse pass.

use std::rc::Rc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AutodiffError, SparseMatrix, Tape, Var};

/// Worst disagreement found for one input of a checked function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputReport {
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub inputs: Vec<InputReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.inputs.iter().all(|r| r.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.inputs.iter().map(|r| r.max_rel_error).fold(0.0, f64::max)
    }
}

/// Tolerances: a coordinate passes when its relative error is below
/// `rel_tol` or its absolute error is below `abs_tol`.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-4, rel_tol: 1e-4, abs_tol: 1e-6 }
    }
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences over every coordinate of every input.
///
/// `build` records the function on a fresh tape given one leaf per input and
/// returns the `1×1` output.
pub fn check_gradients<F>(
    inputs: &[Array2<f64>],
    config: GradCheckConfig,
    build: F,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, AutodiffError>,
{
    let evaluate = |values: &[Array2<f64>]| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone(), false)).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.scalar(out))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| tape.leaf(v.clone(), true)).collect();
    let out = build(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut reports = Vec::with_capacity(inputs.len());
    let mut probe: Vec<Array2<f64>> = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let analytic = tape.grad_of(*var).unwrap_or_else(|_| Array2::zeros(inputs[k].dim()));
        let mut report = InputReport { max_abs_error: 0.0, max_rel_error: 0.0, passed: true };
        for idx in 0..inputs[k].len() {
            let (r, c) = (idx / inputs[k].ncols(), idx % inputs[k].ncols());
            let x0 = inputs[k][[r, c]];
            probe[k][[r, c]] = x0 + config.step;
            let plus = evaluate(&probe)?;
            probe[k][[r, c]] = x0 - config.step;
            let minus = evaluate(&probe)?;
            probe[k][[r, c]] = x0;
            let numeric = (plus - minus) / (2.0 * config.step);
            let a = analytic[[r, c]];
            let abs = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            let rel = if scale > 0.0 { abs / scale } else { 0.0 };
            report.max_abs_error = report.max_abs_error.max(abs);
            if abs > config.abs_tol {
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel >= config.rel_tol {
                    report.passed = false;
                }
            }
        }
        reports.push(report);
    }
    Ok(GradCheckReport { inputs: reports })
}

fn uniform_away_from_zero(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let m: f64 = rng.random_range(0.2..1.5);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// Contracts any matrix to a scalar through fixed random weights, so every
/// output coordinate gets a distinct upstream gradient.
fn contract(tape: &mut Tape<f64>, v: Var, weights: &Array2<f64>) -> Result<Var, AutodiffError> {
    let w = tape.constant(weights.clone());
    let prod = tape.hadamard(v, w)?;
    let rows = tape.sum_rows(prod)?;
    tape.sum_cols(rows)
}

type Builder = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var, AutodiffError>>;

/// Finite-difference check of every primitive on fixed random inputs.
pub fn primitive_suite(seed: u64, config: GradCheckConfig) -> Result<Vec<(&'static str, GradCheckReport)>, AutodiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = |r: usize, c: usize| uniform_away_from_zero(r, c, &mut rng);
    let a34 = m(3, 4);
    let b34 = m(3, 4);
    let b42 = m(4, 2);
    let row4 = m(1, 4);
    let w34 = m(3, 4);
    let w32 = m(3, 2);
    let w43 = m(4, 3);
    let w31 = m(3, 1);
    let w14 = m(1, 4);
    let w11 = m(1, 1);
    let w36 = m(3, 6);
    let w24 = m(2, 4);
    let w44 = m(4, 4);
    let w54 = m(5, 4);
    let x54 = m(5, 4);
    let positive = a34.mapv(|x| x.abs() + 0.5);
    let logits = m(3, 4);
    let mask = m(6, 1);
    let sparse = Rc::new(SparseMatrix::from_triplets(
        5,
        5,
        vec![(0, 0, 0.5), (0, 3, 1.25), (1, 1, -0.75), (2, 4, 2.0), (3, 0, 1.0), (4, 2, -0.5), (4, 4, 0.3)],
    ));
    let offsets = Rc::new(vec![0, 2, 5]);
    let pairs = Rc::new(vec![(0, 1), (0, 3), (1, 2), (2, 3)]);

    let mut cases: Vec<(&'static str, Vec<Array2<f64>>, Builder)> = Vec::new();
    macro_rules! case {
        ($name:expr, [$($input:expr),*], $body:expr) => {
            cases.push(($name, vec![$($input.clone()),*], Box::new($body)));
        };
    }
    let w = w32.clone();
    case!("matmul", [a34, b42], move |t, v| {
        let o = t.matmul(v[0], v[1])?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("add", [a34, b34], move |t, v| {
        let o = t.add(v[0], v[1])?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("sub", [a34, b34], move |t, v| {
        let o = t.sub(v[0], v[1])?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("hadamard", [a34, b34], move |t, v| {
        let o = t.hadamard(v[0], v[1])?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("scalar_mul", [a34], move |t, v| {
        let o = t.scalar_mul(v[0], -1.75)?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("add_row", [a34, row4], move |t, v| {
        let o = t.add_row(v[0], v[1])?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("relu", [a34], move |t, v| {
        let o = t.relu(v[0])?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("sigmoid", [a34], move |t, v| {
        let o = t.sigmoid(v[0])?;
        contract(t, o, &w)
    });
    let w = w34.clone();
    case!("powf", [positive], move |t, v| {
        let o = t.powf(v[0], -0.5)?;
        contract(t, o, &w)
    });
    let w = w43.clone();
    case!("transpose", [a34], move |t, v| {
        let o = t.transpose(v[0])?;
        contract(t, o, &w)
    });
    let w = w14.clone();
    case!("sum_rows", [a34], move |t, v| {
        let o = t.sum_rows(v[0])?;
        contract(t, o, &w)
    });
    let w = w31.clone();
    case!("sum_cols", [a34], move |t, v| {
        let o = t.sum_cols(v[0])?;
        contract(t, o, &w)
    });
    let w = w11.clone();
    case!("mean_all", [a34], move |t, v| {
        let o = t.mean_all(v[0])?;
        contract(t, o, &w)
    });
    let w = w36.clone();
    case!("concat_cols", [a34, w32], move |t, v| {
        let o = t.concat_cols(v[0], v[1])?;
        contract(t, o, &w)
    });
    let w = w24.clone();
    case!("slice_rows", [a34], move |t, v| {
        let o = t.slice_rows(v[0], 1..3)?;
        contract(t, o, &w)
    });
    case!("pick", [a34], move |t, v| t.pick(v[0], 2, 1));
    let (w, sp) = (w54.clone(), sparse.clone());
    case!("sparse_matmul", [x54], move |t, v| {
        let o = t.sparse_matmul(sp.clone(), v[0])?;
        contract(t, o, &w)
    });
    let (w, off) = (w24.clone(), offsets.clone());
    case!("segment_sum", [x54], move |t, v| {
        let o = t.segment_sum(v[0], off.clone())?;
        contract(t, o, &w)
    });
    let (w, pr) = (w44.clone(), pairs.clone());
    let col4 = w14.t().to_owned();
    case!("scatter_sym", [col4], move |t, v| {
        let o = t.scatter_sym(v[0], pr.clone(), 4)?;
        contract(t, o, &w)
    });
    case!("softmax_cross_entropy", [logits], move |t, v| t.softmax_cross_entropy(v[0], &[2, 0, 3]));
    let winning = Array2::from_shape_vec((1, 3), vec![0.3, 1.9, -0.4]).unwrap();
    case!("cw_margin", [winning], move |t, v| t.cw_margin(v[0], 1));
    case!("entropy_mean", [mask], move |t, v| t.entropy_mean(v[0]));

    cases
        .into_iter()
        .map(|(name, inputs, build)| Ok((name, check_gradients(&inputs, config, build)?)))
        .collect()
}
