//! Adam optimizer on flat parameter vectors.

use super::TrainError;

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update, in place:
/// `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::Argument(format!(
            "adam size mismatch: {} params, {} grads, state for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if !(lr > 0.0) {
        return Err(TrainError::Argument(format!("learning rate must be positive, got {lr}")));
    }
    if let Some(g) = grads.iter().find(|g| !g.is_finite()) {
        return Err(TrainError::NonFinite(format!("gradient contains {g}")));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = state.beta1 * *m + (1.0 - state.beta1) * g;
        *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Bias correction makes the first update lr * g / (|g| + eps),
        // so magnitude is ~lr regardless of gradient scale.
        for &g in &[1.0, 1e-3, 250.0] {
            let mut params = vec![0.0];
            let mut state = AdamState::new(1);
            adam_step(&mut params, &[g], &mut state, 0.01).unwrap();
            assert!(
                (params[0] + 0.01).abs() < 1e-6,
                "gradient {g} moved param to {}",
                params[0]
            );
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = vec![1.5, -2.0, 0.25];
        let before = params.clone();
        let mut state = AdamState::new(3);
        for _ in 0..5 {
            adam_step(&mut params, &[0.0, 0.0, 0.0], &mut state, 0.1).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.steps_taken(), 5);
    }

    #[test]
    fn descends_a_quadratic() {
        // f(x) = (x - 3)^2 from x = 0 reaches the minimum comfortably.
        let mut x = vec![0.0];
        let mut state = AdamState::new(1);
        for _ in 0..400 {
            let g = 2.0 * (x[0] - 3.0);
            adam_step(&mut x, &[g], &mut state, 0.05).unwrap();
        }
        assert!((x[0] - 3.0).abs() < 1e-2, "ended at {}", x[0]);
    }

    #[test]
    fn sign_of_update_opposes_gradient() {
        let mut params = vec![0.0, 0.0];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[2.5, -0.5], &mut state, 0.01).unwrap();
        assert!(params[0] < 0.0 && params[1] > 0.0);
    }

    #[test]
    fn rejects_mismatch_and_nonfinite() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        assert!(adam_step(&mut params, &[0.0, 0.0], &mut state, 0.01).is_err());
        assert!(adam_step(&mut params, &[f64::NAN], &mut state, 0.01).is_err());
        assert!(adam_step(&mut params, &[0.0], &mut state, 0.0).is_err());
    }
}
