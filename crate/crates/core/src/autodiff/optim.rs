//! First-order optimizers over a [`ParamSet`].

use nalgebra::DMatrix;

use super::params::ParamSet;

/// Adam with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<DMatrix<f64>>,
    second: Vec<DMatrix<f64>>,
    steps: i32,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64, weight_decay: f64) -> Self {
        let zeros: Vec<_> = params
            .values()
            .iter()
            .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
            .collect();
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[DMatrix<f64>]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps);
        let c2 = 1.0 - self.beta2.powi(self.steps);
        for ((p, g), (m, v)) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            *m = &*m * self.beta1 + g * (1.0 - self.beta1);
            *v = &*v * self.beta2 + g.component_mul(g) * (1.0 - self.beta2);
            for i in 0..p.len() {
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                p[i] -= self.lr * (update + self.weight_decay * p[i]);
            }
        }
    }
}

/// RMSProp with a running average of squared gradients.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    square_avg: Vec<DMatrix<f64>>,
}

impl RmsProp {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        Self {
            lr,
            decay: 0.99,
            eps: 1e-8,
            square_avg: params
                .values()
                .iter()
                .map(|m| DMatrix::zeros(m.nrows(), m.ncols()))
                .collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[DMatrix<f64>]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        for ((p, g), s) in params
            .values_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.square_avg.iter_mut())
        {
            *s = &*s * self.decay + g.component_mul(g) * (1.0 - self.decay);
            for i in 0..p.len() {
                p[i] -= self.lr * g[i] / (s[i].sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.add("x", DMatrix::from_element(1, 1, v));
        p
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = scalar_params(0.7);
        let mut adam = Adam::new(&p, 1e-3, 0.0);
        for _ in 0..5 {
            adam.step(&mut p, &[DMatrix::zeros(1, 1)]);
        }
        assert_eq!(p.get(0)[(0, 0)], 0.7);
    }

    #[test]
    fn positive_gradient_decreases_parameter() {
        let mut p = scalar_params(1.0);
        let mut adam = Adam::new(&p, 1e-3, 0.0);
        adam.step(&mut p, &[DMatrix::from_element(1, 1, 1.0)]);
        let x = p.get(0)[(0, 0)];
        assert!(x < 1.0);
        // first bias-corrected step has magnitude lr
        assert!((1.0 - x - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut p = scalar_params(0.3);
            let mut adam = Adam::new(&p, 1e-2, 1e-5);
            for k in 0..50 {
                let g = DMatrix::from_element(1, 1, (k as f64).sin());
                adam.step(&mut p, &[g]);
            }
            p.get(0)[(0, 0)].to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = scalar_params(3.0);
        let mut adam = Adam::new(&p, 0.1, 0.0);
        for _ in 0..500 {
            let g = p.get(0) * 2.0;
            adam.step(&mut p, &[g]);
        }
        assert!(p.get(0)[(0, 0)].abs() < 1e-2);
    }

    #[test]
    fn rmsprop_minimizes_a_quadratic() {
        let mut p = scalar_params(-2.0);
        let mut opt = RmsProp::new(&p, 0.01);
        for _ in 0..1000 {
            let g = p.get(0) * 2.0;
            opt.step(&mut p, &[g]);
        }
        assert!(p.get(0)[(0, 0)].abs() < 0.05);
    }
}
