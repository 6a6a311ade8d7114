use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates `params` in place. Fails without touching anything if a
    /// gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Usage(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::shape("adam", p.shape(), g.shape()));
            }
            if let Some(at) = g.first_non_finite() {
                return Err(Error::NumericFault {
                    location: format!("gradient of parameter {i} at flat index {at}"),
                });
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((w, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *w -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = Tensor::from_fn([2, 2], |i| i as f64);
        let before = w.clone();
        let mut adam = Adam::new(1e-3);
        adam.step(&mut [&mut w], &[Tensor::zeros([2, 2])]).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn first_step_is_sign_sized() {
        let mut w = Tensor::zeros([4]);
        let g = Tensor::new([4], vec![3.0, -0.02, 100.0, -7.0]).unwrap();
        let mut adam = Adam::new(1e-4);
        adam.step(&mut [&mut w], &[g.clone()]).unwrap();
        for (w, g) in w.data().iter().zip(g.data()) {
            assert!((w + 1e-4 * g.signum()).abs() < 1e-9, "{w} for gradient {g}");
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        // Independent scalar recurrence for f(w) = w², grad 2w, lr 0.05.
        let (mut w_ref, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut w = Tensor::new([1], vec![1.0]).unwrap();
        let mut adam = Adam::new(0.05);
        for t in 1..=200 {
            let g = 2.0 * w.data()[0];
            adam.step(&mut [&mut w], &[Tensor::new([1], vec![g]).unwrap()]).unwrap();
            let g_ref = 2.0 * w_ref;
            m = 0.9 * m + 0.1 * g_ref;
            v = 0.999 * v + 0.001 * g_ref * g_ref;
            w_ref -= 0.05 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
        }
        assert!(w.data()[0].abs() < 1e-2);
        assert!((w.data()[0] - w_ref).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut w = Tensor::zeros([2]);
        let mut adam = Adam::new(1e-4);
        let bad = Tensor::new([2], vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(adam.step(&mut [&mut w], &[bad]), Err(Error::NumericFault { .. })));
        assert_eq!(adam.steps_taken(), 0);
    }
}
