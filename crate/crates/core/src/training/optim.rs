use crate::autodiff::{Gradients, Matrix, ParamStore};

/// Adam with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<Option<Matrix>>,
    second: Vec<Option<Matrix>>,
}

impl AdamW {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            eps,
            weight_decay,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates every parameter that has a gradient; others are left alone.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        if self.first.len() < store.len() {
            self.first.resize(store.len(), None);
            self.second.resize(store.len(), None);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (id, grad) in grads.iter() {
            let Some(g) = grad else { continue };
            let (rows, cols) = g.shape();
            let m = self.first[id.0].get_or_insert_with(|| Matrix::zeros(rows, cols));
            let v = self.second[id.0].get_or_insert_with(|| Matrix::zeros(rows, cols));
            let theta = store.get_mut(id).as_mut_slice();
            let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
            for (k, &gk) in g.as_slice().iter().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                theta[k] -= self.learning_rate * self.weight_decay * theta[k];
                theta[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
