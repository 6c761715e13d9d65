use std::collections::BTreeMap;

use super::{TrainConfig, TrainError};
use crate::model::{Model, Param};

/// First and second moment estimates, aligned with the parameter map.
#[derive(Clone, Debug)]
pub struct AdamState {
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new(model: &Model) -> AdamState {
        let moments = model
            .params
            .iter()
            .map(|(name, p)| (name.clone(), (vec![0.0; p.len()], vec![0.0; p.len()])))
            .collect();
        AdamState { moments }
    }
}

/// Inverse-square-root schedule with linear warmup:
/// `scale * min(step^-1/2, step * warmup^-3/2)`.
pub fn lr_at(step: usize, warmup: usize, scale: f64) -> f64 {
    assert!(step >= 1, "schedule starts at step 1");
    assert!(warmup >= 1, "warmup must be at least 1");
    let s = step as f64;
    let w = warmup as f64;
    scale * (s.powf(-0.5)).min(s * w.powf(-1.5))
}

/// One Adam update with bias correction over every parameter.
pub fn adam_step(
    params: &mut BTreeMap<String, Param>,
    grads: &BTreeMap<String, Vec<f64>>,
    state: &mut AdamState,
    step: usize,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    assert!(step >= 1, "Adam steps are 1-based");
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for (name, p) in params.iter_mut() {
        let g = grads
            .get(name)
            .unwrap_or_else(|| panic!("missing gradient for {name}"));
        assert_eq!(g.len(), p.data.len(), "gradient shape mismatch for {name}");
        if let Some(bad) = g.iter().find(|x| !x.is_finite()) {
            return Err(TrainError::NonFiniteGradient { param: name.clone(), value: *bad });
        }
        let (m, v) = state.moments.get_mut(name).expect("state covers every parameter");
        for i in 0..g.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p.data[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Scales all gradients so their global Euclidean norm is at most `clip`.
/// Returns the pre-clip norm.
pub fn clip_gradients(grads: &mut BTreeMap<String, Vec<f64>>, clip: f64) -> f64 {
    let norm = grads
        .values()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if clip > 0.0 && norm > clip {
        let s = clip / norm;
        for g in grads.values_mut() {
            for x in g.iter_mut() {
                *x *= s;
            }
        }
    }
    norm
}
