use ndarray::{Array2, Zip};

use crate::Scalar;

/// Adam with bias correction. Moment buffers are created on the first step
/// from the shapes of the gradients it receives.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr: T::lit(lr), beta1: T::lit(beta1), beta2: T::lit(beta2), eps: T::lit(eps), step: 0, m: vec![], v: vec![] }
    }

    pub fn steps_taken(&self) -> usize {
        self.step as usize
    }

    /// One update of `params` in place. Panics if the number or shape of
    /// tensors changes between calls.
    pub fn step(&mut self, params: &mut [&mut Array2<T>], grads: &[Array2<T>]) {
        assert_eq!(params.len(), grads.len(), "adam: params and grads differ in count");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), grads.len(), "adam: tensor count changed");
        self.step += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut **p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = array![[1.0, -2.0, 0.5]];
        let g = array![[3.0, -0.001, 0.0]];
        let mut adam = Adam::<f64>::new(0.1);
        adam.step(&mut [&mut p], &[g]);
        assert_abs_diff_eq!(p[[0, 0]], 0.9, epsilon = 1e-6);
        assert_abs_diff_eq!(p[[0, 1]], -1.9, epsilon = 1e-4);
        assert_eq!(p[[0, 2]], 0.5);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn hand_two_steps() {
        // f(p) = p^2 from p = 1, lr 0.01
        let mut p = array![[1.0f64]];
        let mut adam = Adam::new(0.01);
        let mut expected = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            let g = 2.0 * p[[0, 0]];
            adam.step(&mut [&mut p], &[array![[g]]]);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            expected -= 0.01 * mh / (vh.sqrt() + 1e-8);
            assert_abs_diff_eq!(p[[0, 0]], expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = array![[3.0f64, -4.0]];
        let mut adam = Adam::new(0.05);
        for _ in 0..2000 {
            let g = p.mapv(|x| 2.0 * x);
            adam.step(&mut [&mut p], &[g]);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2));
    }
}
