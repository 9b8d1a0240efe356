//! Loss, RAdam, learning-rate schedule and gradient clipping.

use serde::{Deserialize, Serialize};

use crate::params::{global_norm, Grads, ParamSet};
use crate::scalar::Scalar;
use crate::NeuralError;

/// Mean binary cross-entropy of logits against smoothed targets.
pub fn bce_loss(logits: &[f64], labels: &[bool], smoothing: f64) -> f64 {
    assert_eq!(logits.len(), labels.len());
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let t = crate::model::smoothed_target(y, smoothing);
            z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z
        })
        .sum();
    total / logits.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RAdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for RAdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl RAdamConfig {
    /// Maximum length of the approximated simple moving average.
    pub fn rho_inf(&self) -> f64 {
        2.0 / (1.0 - self.beta2) - 1.0
    }

    pub fn rho(&self, t: u64) -> f64 {
        let b2t = self.beta2.powf(t as f64);
        self.rho_inf() - 2.0 * t as f64 * b2t / (1.0 - b2t)
    }
}

/// Rectified Adam without weight decay.
#[derive(Clone, Debug, PartialEq)]
pub struct RAdam<T> {
    pub config: RAdamConfig,
    pub step: u64,
    pub m: Grads<T>,
    pub v: Grads<T>,
}

impl<T: Scalar> RAdam<T> {
    pub fn new(config: RAdamConfig, params: &ParamSet<T>) -> Self {
        Self {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    /// One update with learning rate `lr`.
    pub fn update(&mut self, params: &mut ParamSet<T>, grads: &Grads<T>, lr: f64) -> Result<(), NeuralError> {
        if grads.len() != params.len() || grads.iter().zip(params.tensors()).any(|(g, p)| g.len() != p.data.len()) {
            return Err(NeuralError::ParamMismatch("gradients not aligned with parameters".into()));
        }
        if let Some(i) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(NeuralError::NonFinite(format!("gradient of {}", params.names()[i])));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as f64;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let bias1 = 1.0 - c.beta1.powf(t);
        let bias2 = 1.0 - c.beta2.powf(t);
        let rho_inf = c.rho_inf();
        let rho = c.rho(self.step);
        // The variance term is used only once its estimate is tractable.
        let rect = (rho > 4.0).then(|| {
            ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)).sqrt()
        });
        let step_size = T::of(lr / bias1 * rect.unwrap_or(1.0));
        let sqrt_bias2 = T::of(bias2.sqrt());
        let eps = T::of(c.eps);
        for ((p, g), (m, v)) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..g.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                let delta = match rect {
                    Some(_) => step_size * m[i] * sqrt_bias2 / (v[i].sqrt() + eps),
                    None => step_size * m[i],
                };
                p.data[i] -= delta;
            }
        }
        Ok(())
    }
}

/// Scales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_gradients<T: Scalar>(grads: &mut Grads<T>, max_norm: f64) -> f64 {
    let norm = global_norm(grads).to_f64().unwrap_or(f64::NAN);
    if norm > max_norm {
        let s = T::of(max_norm / norm);
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}

/// Linear warmup followed by repeating cosine cycles, keyed on samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub peak: f64,
    pub floor: f64,
    pub warmup_samples: u64,
    pub cycle_samples: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            peak: 5e-4,
            floor: 5e-5,
            warmup_samples: 500_000,
            cycle_samples: 2_500_000,
        }
    }
}

impl Schedule {
    /// Jumps back to `peak` at every cycle boundary; continuous elsewhere.
    pub fn lr_at(&self, samples: u64) -> f64 {
        if samples < self.warmup_samples {
            return self.peak * samples as f64 / self.warmup_samples as f64;
        }
        let cycle = self.cycle_samples.max(1);
        let phase = ((samples - self.warmup_samples) % cycle) as f64 / cycle as f64;
        self.floor + (self.peak - self.floor) * 0.5 * (1.0 + (std::f64::consts::PI * phase).cos())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tensor;

    fn params(v: &[f64]) -> ParamSet<f64> {
        ParamSet::new(vec!["p".into()], vec![Tensor::new(vec![v.len()], v.to_vec())])
    }

    #[test]
    fn rho_constants() {
        let c = RAdamConfig::default();
        assert!((c.rho_inf() - 1999.0).abs() < 1e-9);
        assert!((c.rho(1) - 1.0).abs() < 1e-6);
        assert!(c.rho(4) < 4.0 && c.rho(5) > 4.0);
    }

    #[test]
    fn first_step_is_plain_momentum() {
        let mut p = params(&[1.0, -2.0]);
        let mut opt = RAdam::new(RAdamConfig::default(), &p);
        opt.update(&mut p, &vec![vec![0.5, -4.0]], 0.1).unwrap();
        // m_hat equals the gradient at t = 1.
        assert!((p.tensors()[0].data[0] - 0.95).abs() < 1e-12);
        assert!((p.tensors()[0].data[1] + 1.6).abs() < 1e-12);
    }

    #[test]
    fn zero_gradients_leave_params() {
        let mut p = params(&[0.3, 0.7]);
        let before = p.clone();
        let mut opt = RAdam::new(RAdamConfig::default(), &p);
        for _ in 0..20 {
            opt.update(&mut p, &vec![vec![0.0, 0.0]], 1e-2).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(opt.step, 20);
    }

    #[test]
    fn rejects_non_finite() {
        let mut p = params(&[0.0]);
        let mut opt = RAdam::new(RAdamConfig::default(), &p);
        assert!(opt.update(&mut p, &vec![vec![f64::NAN]], 1.0).is_err());
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn clipping() {
        let mut g: Grads<f64> = vec![vec![0.3, 0.4]];
        assert!((clip_gradients(&mut g, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(g, vec![vec![0.3, 0.4]]);
        let mut g: Grads<f64> = vec![vec![2.4], vec![3.2]];
        assert!((clip_gradients(&mut g, 1.0) - 4.0).abs() < 1e-12);
        assert!((global_norm(&g) - 1.0).abs() < 1e-6);
        assert!((g[0][0] / g[1][0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn schedule_landmarks() {
        let s = Schedule::default();
        assert_eq!(s.lr_at(0), 0.0);
        assert!((s.lr_at(500_000) - 5e-4).abs() < 1e-15);
        assert!((s.lr_at(500_000 + 1_250_000) - 2.75e-4).abs() < 1e-12);
        assert!((s.lr_at(500_000 + 2_500_000 - 1) - 5e-5).abs() < 1e-9);
        assert!((s.lr_at(500_000 + 2_500_000) - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn loss_values() {
        assert!((bce_loss(&[0.0], &[true], 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(bce_loss(&[60.0], &[true], 0.0) < 1e-20);
        let t: f64 = 0.995;
        let entropy = -(t * t.ln() + (1.0 - t) * (1.0 - t).ln());
        let best = (t / (1.0 - t)).ln();
        assert!((bce_loss(&[best], &[true], 0.01) - entropy).abs() < 1e-12);
        assert!(bce_loss(&[30.0], &[true], 0.01) > entropy);
    }
}
