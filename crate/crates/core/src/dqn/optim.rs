/// RMSprop: `v <- rho v + (1 - rho) g^2`, `theta <- theta - lr g / (sqrt(v) + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    accum: Vec<f64>,
}

impl RmsProp {
    pub fn new(n_params: usize, lr: f64, rho: f64, eps: f64) -> Self {
        Self {
            lr,
            rho,
            eps,
            accum: vec![0.0; n_params],
        }
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.accum
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.accum.len(), "parameter count mismatch");
        assert_eq!(grad.len(), self.accum.len(), "gradient length mismatch");
        for ((p, v), &g) in params.iter_mut().zip(&mut self.accum).zip(grad) {
            *v = self.rho * *v + (1.0 - self.rho) * g * g;
            *p -= self.lr * g / (v.sqrt() + self.eps);
        }
    }
}
