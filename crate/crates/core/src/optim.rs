//! First-order update rules shared by surrogate training (descent on a loss)
//! and design search (ascent on an objective).

use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `x ← x ± λ·g`.
    #[serde(alias = "plain")]
    PlainAscent,
    Adam,
}

#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    step: u32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Self {
            lr,
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    /// Moves `x` along `sign · m̂ / (√v̂ + ε)`.
    fn update(&mut self, x: &mut [f64], grad: &[f64], sign: f64) {
        debug_assert_eq!(x.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        for (((xi, &g), m), v) in x.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *xi += sign * self.lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
}

/// Stateful stepper for one optimization run.
#[derive(Clone, Debug)]
pub enum Stepper {
    Plain { lr: f64 },
    Adam(Adam),
}

impl Stepper {
    pub fn new(kind: OptimizerKind, lr: f64, dim: usize) -> Self {
        match kind {
            OptimizerKind::PlainAscent => Stepper::Plain { lr },
            OptimizerKind::Adam => Stepper::Adam(Adam::new(lr, dim)),
        }
    }

    pub fn ascend(&mut self, x: &mut [f64], grad: &[f64]) {
        self.update(x, grad, 1.0)
    }

    pub fn descend(&mut self, x: &mut [f64], grad: &[f64]) {
        self.update(x, grad, -1.0)
    }

    fn update(&mut self, x: &mut [f64], grad: &[f64], sign: f64) {
        match self {
            Stepper::Plain { lr } => {
                for (xi, g) in x.iter_mut().zip(grad) {
                    *xi += sign * *lr * g;
                }
            }
            Stepper::Adam(adam) => adam.update(x, grad, sign),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_step_is_exact() {
        let mut s = Stepper::new(OptimizerKind::PlainAscent, 0.1, 2);
        let mut x = [1.0, 0.0];
        s.ascend(&mut x, &[-1.0, 0.0]);
        assert_eq!(x, [0.9, 0.0]);
    }

    #[test]
    fn first_adam_step_has_learning_rate_magnitude() {
        let mut s = Stepper::new(OptimizerKind::Adam, 0.01, 3);
        let mut x = [0.0; 3];
        s.descend(&mut x, &[2.0, -0.5, 1e3]);
        for (xi, sign) in x.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((xi - sign * 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut s = Stepper::new(OptimizerKind::Adam, 0.05, 2);
        let mut x = [3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * (x[0] - 1.0), 2.0 * (x[1] + 0.5)];
            s.descend(&mut x, &g);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3);
    }
}
