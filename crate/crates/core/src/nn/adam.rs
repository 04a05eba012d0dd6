use serde::{Deserialize, Serialize};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias-corrected moment estimates. Moment buffers are matched to
/// parameter tensors by visiting order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `visit` must present the same tensors in the same
    /// order on every call.
    pub fn step<F>(&mut self, visit: F)
    where
        F: FnOnce(&mut dyn FnMut(&mut [f64], &[f64])),
    {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let lr = self.learning_rate;
        let first = &mut self.first;
        let second = &mut self.second;
        let mut index = 0usize;
        visit(&mut |params: &mut [f64], grads: &[f64]| {
            if first.len() <= index {
                first.push(vec![0.0; params.len()]);
                second.push(vec![0.0; params.len()]);
            }
            let m = &mut first[index];
            let v = &mut second[index];
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                params[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
            index += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = vec![0.3, -1.2, 4.0];
        let before = params.clone();
        let grads = vec![0.0; 3];
        let mut adam = Adam::new(1e-3);
        for _ in 0..5 {
            adam.step(|f| f(&mut params, &grads));
        }
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![1.0, 1.0];
        let grads = vec![0.5, -2.0];
        let mut adam = Adam::new(0.01);
        adam.step(|f| f(&mut params, &grads));
        assert!((params[0] - 0.99).abs() < 1e-9);
        assert!((params[1] - 1.01).abs() < 1e-9);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut x = vec![5.0];
        let mut adam = Adam::new(0.1);
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 1.5)];
            adam.step(|f| f(&mut x, &g));
        }
        assert!((x[0] - 1.5).abs() < 1e-3);
    }
}
