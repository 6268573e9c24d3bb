use rand::seq::index::sample;
use rand::Rng;

use super::params::{ParamId, ParameterStore};
use super::{NeuralError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub worst: Option<CoordinateCheck>,
}

/// Compares the gradients currently accumulated in `params` against central
/// differences of `loss`.
///
/// At most `coords_per_param` coordinates of each tensor are sampled (all of
/// them when `None`). The error of one coordinate is
/// `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(
    params: &mut ParameterStore,
    mut loss: F,
    epsilon: f64,
    coords_per_param: Option<usize>,
    rng: &mut impl Rng,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParameterStore) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: None,
    };
    for pid in 0..params.len() {
        let id = ParamId(pid);
        let n = params.value(id).len();
        let coords: Vec<usize> = match coords_per_param {
            Some(k) if k < n => {
                let mut v = sample(rng, n, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        for idx in coords {
            let analytic = params.grad(id).data()[idx];
            let orig = params.value(id).data()[idx];
            params.value_mut(id).data_mut()[idx] = orig + epsilon;
            let plus = loss(params);
            params.value_mut(id).data_mut()[idx] = orig - epsilon;
            let minus = loss(params);
            params.value_mut(id).data_mut()[idx] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NeuralError::NonFiniteLoss);
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel_error = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if rel_error > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel_error);
                report.worst = Some(CoordinateCheck {
                    param: params.name(id).to_string(),
                    index: idx,
                    analytic,
                    numeric,
                    rel_error,
                });
            }
        }
    }
    Ok(report)
}
