use crate::model::ModelParams;
use crate::Scalar;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, num_params: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![T::zero(); num_params], v: vec![T::zero(); num_params] }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut ModelParams<T>, grad: &ModelParams<T>) {
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let one = T::one();
        let c1 = one - T::of(self.beta1.powi(self.t));
        let c2 = one - T::of(self.beta2.powi(self.t));
        let lr = T::of(self.lr);
        let eps = T::of(self.eps);
        let mut i = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grad.tensors()) {
            for (x, &d) in p.iter_mut().zip(g.2) {
                let m = b1 * self.m[i] + (one - b1) * d;
                let v = b2 * self.v[i] + (one - b2) * d * d;
                self.m[i] = m;
                self.v[i] = v;
                *x -= lr * (m / c1) / ((v / c2).sqrt() + eps);
                i += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn first_step_moves_each_weight_by_lr_against_the_gradient_sign() {
        let cfg = ModelConfig { hidden: 2, mlp_hidden: vec![2], ..Default::default() };
        let mut p = ModelParams::<f64>::init(cfg, 0).unwrap();
        let before = p.flatten();
        let mut g = p.zeros_like();
        let n = before.len();
        g.assign_flat(&(0..n).map(|i| if i % 2 == 0 { 3.0 } else { -0.5 }).collect::<Vec<_>>()).unwrap();
        let mut adam = Adam::new(0.01, n);
        adam.step(&mut p, &g);
        for (i, (a, b)) in p.flatten().iter().zip(&before).enumerate() {
            let expect = if i % 2 == 0 { -0.01 } else { 0.01 };
            assert!((a - b - expect).abs() < 1e-9);
        }
    }
}
