use ndarray::ArrayD;

use crate::net::ParamSet;

/// Adaptive-moment optimizer state for one parameter group. Moments are
/// stored per tensor, aligned with the group's entry order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<ArrayD<f32>>,
    pub v: Vec<ArrayD<f32>>,
    pub t: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn zeros_for(sets: &[&ParamSet<f32>]) -> Self {
        let mut m = Vec::new();
        for set in sets {
            for (_, value) in set.iter() {
                m.push(ArrayD::zeros(value.raw_dim()));
            }
        }
        AdamState {
            v: m.clone(),
            m,
            t: 0,
        }
    }

    /// One update over the group. `entries` and `grads` are aligned with
    /// the moment vectors; a missing gradient leaves that tensor and its
    /// moments untouched.
    pub fn step(
        &mut self,
        entries: Vec<&mut ArrayD<f32>>,
        grads: &[Option<&ArrayD<f32>>],
        hp: &AdamHyper,
    ) {
        assert_eq!(entries.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let b1 = hp.beta1 as f32;
        let b2 = hp.beta2 as f32;
        let lr = hp.learning_rate as f32;
        let eps = hp.eps as f32;
        let bias1 = 1.0 - (hp.beta1 as f32).powi(self.t as i32);
        let bias2 = 1.0 - (hp.beta2 as f32).powi(self.t as i32);
        for (idx, param) in entries.into_iter().enumerate() {
            let Some(grad) = grads[idx] else { continue };
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            ndarray::Zip::from(param)
                .and(m)
                .and(v)
                .and(grad)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let mhat = *m / bias1;
                    let vhat = *v / bias2;
                    *p -= lr * mhat / (vhat.sqrt() + eps);
                });
        }
    }
}
