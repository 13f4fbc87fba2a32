use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment accumulators over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step_count: 0,
            config,
        }
    }

    /// One bias-corrected update over parameter segments taken in order
    /// as a single flat vector.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        let total: usize = params.iter().map(|p| p.len()).sum();
        let grad_total: usize = grads.iter().map(|g| g.len()).sum();
        if params.len() != grads.len() || total != self.m.len() || grad_total != total {
            return Err(Error::shape(format!(
                "Adam state holds {} parameters, got {total} parameters and {grad_total} gradients",
                self.m.len()
            )));
        }
        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - beta2.powi(self.step_count as i32);
        let mut k = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::shape("parameter and gradient segments differ"));
            }
            for (theta, &gi) in p.iter_mut().zip(g.iter()) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = beta1 * *m + (1.0 - beta1) * gi;
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
                k += 1;
            }
        }
        Ok(())
    }
}

/// Flat-vector convenience wrapper around [`AdamState::step`].
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    state.step(&mut [params], &[grads])
}
