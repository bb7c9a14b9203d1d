use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Real;
use crate::error::CoreError;
use crate::nn::params::{GradMap, ModelParams};

/// Settings for [`grad_check`]. Central differences with step `epsilon`;
/// tensors larger than `max_checked_per_tensor` are checked on a seeded
/// random subsample of elements.
#[derive(Debug, Clone)]
pub struct GradCheckSettings {
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_checked_per_tensor: usize,
    pub subsample_seed: u64,
    /// Floor for the relative-error denominator, guarding near-zero
    /// gradients against roundoff noise in the difference quotient.
    pub denom_floor: f64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            epsilon: 1e-5,
            tolerance: 1e-4,
            max_checked_per_tensor: 256,
            subsample_seed: 0,
            denom_floor: 1e-8,
        }
    }
}

/// Per-parameter-tensor comparison of analytic and numeric gradients.
#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: String,
    pub elements_checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_err: f64,
    pub all_pass: bool,
    pub loss: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn require_pass(&self) -> Result<(), CoreError> {
        if self.all_pass {
            Ok(())
        } else {
            Err(CoreError::GradCheckFailed {
                max_rel_err: self.max_rel_err,
                tolerance: self.tolerance,
            })
        }
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tensors {
            writeln!(
                f,
                "{}  checked={} max_rel_err={:.3e} (analytic {:.6e} vs numeric {:.6e} at [{}])  {}",
                t.name,
                t.elements_checked,
                t.max_rel_err,
                t.worst_analytic,
                t.worst_numeric,
                t.worst_index,
                if t.pass { "ok" } else { "FAIL" }
            )?;
        }
        writeln!(
            f,
            "overall max_rel_err={:.3e} tolerance={:.1e} loss={:.6e}  {}",
            self.max_rel_err,
            self.tolerance,
            self.loss,
            if self.all_pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Checks the analytic gradient of a loss function against central finite
/// differences `(f(t + e) - f(t - e)) / 2e`, element by element.
///
/// `loss_fn(params, want_grads)` must be deterministic: any sampling noise
/// has to be drawn up front and captured, so that perturbed evaluations
/// see the same noise. Non-determinism is detected by evaluating the
/// unperturbed loss twice and invalidates the check.
pub fn grad_check<T, F>(
    params: &ModelParams<T>,
    settings: &GradCheckSettings,
    loss_fn: F,
) -> Result<GradCheckReport, CoreError>
where
    T: Real,
    F: Fn(&ModelParams<T>, bool) -> Result<(T, Option<GradMap<T>>), CoreError>,
{
    let (f0, grads) = loss_fn(params, true)?;
    let grads = grads.ok_or_else(|| {
        CoreError::Config("grad_check loss_fn returned no gradients".to_string())
    })?;
    if !f0.is_finite() {
        return Err(CoreError::NanLoss { epoch: 0, step: 0 });
    }
    let (f0_again, _) = loss_fn(params, false)?;
    if f0.to_f64() != f0_again.to_f64() {
        return Err(CoreError::NonDeterministicLoss {
            first: f0.to_f64(),
            second: f0_again.to_f64(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.subsample_seed);
    let mut work = params.clone();
    let eps = settings.epsilon;
    let mut tensors = Vec::new();
    let mut global_max = 0.0f64;

    for (name, tensor) in params.iter() {
        let analytic = grads
            .get(name)
            .ok_or_else(|| CoreError::MissingGradient(name.clone()))?;
        let numel = tensor.numel();
        let indices: Vec<usize> = if numel <= settings.max_checked_per_tensor {
            (0..numel).collect()
        } else {
            rand::seq::index::sample(&mut rng, numel, settings.max_checked_per_tensor).into_vec()
        };

        let mut check = TensorCheck {
            name: name.clone(),
            elements_checked: indices.len(),
            max_rel_err: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            pass: true,
        };

        for idx in indices {
            let orig = tensor.data()[idx];
            work.data_mut(name)?[idx] = orig + T::from_f64(eps);
            let (fp, _) = loss_fn(&work, false)?;
            work.data_mut(name)?[idx] = orig - T::from_f64(eps);
            let (fm, _) = loss_fn(&work, false)?;
            work.data_mut(name)?[idx] = orig;

            let numeric = (fp.to_f64() - fm.to_f64()) / (2.0 * eps);
            let a = analytic.data()[idx].to_f64();
            let denom = a.abs().max(numeric.abs()).max(settings.denom_floor);
            let rel = (a - numeric).abs() / denom;
            if rel > check.max_rel_err {
                check.max_rel_err = rel;
                check.worst_index = idx;
                check.worst_analytic = a;
                check.worst_numeric = numeric;
            }
        }

        check.pass = check.max_rel_err < settings.tolerance;
        global_max = global_max.max(check.max_rel_err);
        tensors.push(check);
    }

    let all_pass = tensors.iter().all(|t| t.pass);
    Ok(GradCheckReport {
        tensors,
        max_rel_err: global_max,
        all_pass,
        loss: f0.to_f64(),
        tolerance: settings.tolerance,
    })
}
