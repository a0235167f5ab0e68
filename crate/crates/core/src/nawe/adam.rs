use super::params::EncoderParams;
use super::TrainConfig;
use crate::error::{Error, Result};

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &EncoderParams) -> Self {
        Self {
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut EncoderParams, grads: &EncoderParams, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    if !params.same_shape(grads) || state.m.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            actual: if params.same_shape(grads) { state.m.len() } else { grads.len() },
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let it = params
        .as_mut_slice()
        .iter_mut()
        .zip(grads.as_slice())
        .zip(state.m.iter_mut().zip(state.v.iter_mut()));
    for ((p, &g), (m, v)) in it {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrainConfig {
        TrainConfig::default()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = EncoderParams::init(1, 2, 2, 0).unwrap();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &cfg()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_matches_hand_rolled() {
        let mut p = EncoderParams::zeros(1, 1, 1).unwrap();
        let mut g = p.zeros_like();
        let gs = [0.3, -2.0, 1e-9, 5.0, 0.0, -1e-4];
        for (i, v) in g.as_mut_slice().iter_mut().enumerate() {
            *v = gs[i % gs.len()];
        }
        let mut s = AdamState::new(&p);
        let c = cfg();
        adam_step(&mut p, &g, &mut s, &c).unwrap();
        for (&pv, &gv) in p.as_slice().iter().zip(g.as_slice()) {
            // m̂ = g, v̂ = g² after bias correction.
            let m = (1.0 - c.beta1) * gv;
            let v = (1.0 - c.beta2) * gv * gv;
            let expected = -c.learning_rate * (m / (1.0 - c.beta1)) / ((v / (1.0 - c.beta2)).sqrt() + c.epsilon);
            assert!((pv - expected).abs() <= 1e-15 * expected.abs().max(1e-300), "{pv} vs {expected}");
            if gv.abs() > 1e-3 {
                assert!((pv.abs() - c.learning_rate).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut p = EncoderParams::zeros(1, 1, 1).unwrap();
        let mut g = p.zeros_like();
        g.as_mut_slice().fill(0.25);
        let mut s = AdamState::new(&p);
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut s, &cfg()).unwrap();
        }
        let first = p.as_slice()[0];
        assert!(p.as_slice().iter().all(|&v| v == first));
    }

    #[test]
    fn shape_mismatch() {
        let mut p = EncoderParams::zeros(1, 1, 1).unwrap();
        let g = EncoderParams::zeros(1, 2, 1).unwrap();
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &g, &mut s, &cfg()).is_err());
    }
}
