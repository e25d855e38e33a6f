//! ADAM optimizer with bias-corrected moment estimates.

use super::net::Gradients;
use super::scalar::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || self.beta1 <= 0.0 {
            return Err(Error::Parameter(format!("beta1 must be in (0,1), got {}", self.beta1)));
        }
        if !(0.0..1.0).contains(&self.beta2) || self.beta2 <= 0.0 {
            return Err(Error::Parameter(format!("beta2 must be in (0,1), got {}", self.beta2)));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Parameter(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// First/second moment estimates plus the step counter, matching a parameter
/// layout array-for-array.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn zeros(layout: &[usize]) -> Self {
        AdamState {
            t: 0,
            m: layout.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: layout.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }
}

/// One ADAM update over all parameter arrays. The step counter is
/// incremented before the bias corrections are applied.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Vec<T>],
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    cfg.validate()?;
    if params.len() != grads.arrays.len() || params.len() != state.m.len() {
        return Err(Error::Dimension(
            "parameter, gradient, and moment array counts differ".into(),
        ));
    }
    state.t += 1;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let corr1 = T::from_f64(1.0 - cfg.beta1.powi(state.t as i32));
    let corr2 = T::from_f64(1.0 - cfg.beta2.powi(state.t as i32));
    let lr = T::from_f64(cfg.learning_rate);
    let eps = T::from_f64(cfg.epsilon);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(&grads.arrays)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.len() != g.len() {
            return Err(Error::Dimension("gradient shape does not match parameters".into()));
        }
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            p[i] = p[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_scalar(mut w: f64, lr: f64, steps: usize, grad_fn: impl Fn(f64) -> f64) -> f64 {
        let mut state = AdamState::<f64>::zeros(&[1]);
        let cfg = AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        };
        for _ in 0..steps {
            let g = Gradients {
                arrays: vec![vec![grad_fn(w)]],
            };
            let mut holder = vec![w];
            adam_step(&mut [&mut holder], &g, &mut state, &cfg).unwrap();
            w = holder[0];
        }
        w
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let w = run_scalar(1.5, 0.1, 10, |_| 0.0);
        assert_eq!(w, 1.5);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // With zero prior moments and constant gradient g, the first update is
        // lr * g / (|g| + eps') which tends to lr as eps -> 0.
        let w0 = 0.7;
        let w1 = run_scalar(w0, 0.01, 1, |_| 3.0);
        assert!(((w0 - w1) - 0.01).abs() < 1e-6, "step {}", w0 - w1);
    }

    #[test]
    fn quadratic_converges() {
        // f(w) = w^2, w0 = 1, lr = 0.1: |w| < 0.05 within 200 steps.
        let w = run_scalar(1.0, 0.1, 200, |w| 2.0 * w);
        assert!(w.abs() < 0.05, "w = {w}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut state = AdamState::<f64>::zeros(&[2]);
        let g = Gradients {
            arrays: vec![vec![1.0]],
        };
        let mut holder = vec![0.0, 0.0];
        let err = adam_step(&mut [&mut holder], &g, &mut state, &AdamConfig::default());
        assert!(err.is_err());
    }
}
