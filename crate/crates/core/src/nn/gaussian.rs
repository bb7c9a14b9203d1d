//! Diagonal Gaussian latent variables: the mean/log-variance pair, the
//! reparameterization trick, and the closed-form KL divergence. Networks
//! emit log-variance for numerical stability; the covariance is diagonal
//! throughout.

use crate::autodiff::{AutodiffError, Graph, NodeId, Real};
use crate::error::CoreError;

use super::layers::{mlp_forward, MlpNodes};

/// Mean and log-variance vectors of a diagonal Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams<T> {
    pub mean: Vec<T>,
    pub logvar: Vec<T>,
}

impl<T: Real> GaussianParams<T> {
    pub fn new(mean: Vec<T>, logvar: Vec<T>) -> Result<Self, CoreError> {
        if mean.len() != logvar.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "gaussian_params",
                shapes: vec![vec![mean.len()], vec![logvar.len()]],
            }
            .into());
        }
        Ok(GaussianParams { mean, logvar })
    }

    /// Standard normal of the given dimension.
    pub fn standard(dim: usize) -> Self {
        GaussianParams {
            mean: vec![T::ZERO; dim],
            logvar: vec![T::ZERO; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `z = mean + exp(0.5 * logvar) * noise`, with `noise` drawn from a
/// standard normal by the caller's seeded RNG stream.
pub fn reparameterize<T: Real>(
    gp: &GaussianParams<T>,
    noise: &[T],
) -> Result<Vec<T>, CoreError> {
    if noise.len() != gp.dim() {
        return Err(AutodiffError::ShapeMismatch {
            op: "reparameterize",
            shapes: vec![vec![gp.dim()], vec![noise.len()]],
        }
        .into());
    }
    Ok(gp
        .mean
        .iter()
        .zip(&gp.logvar)
        .zip(noise)
        .map(|((&m, &lv), &e)| m + (lv * T::from_f64(0.5)).exp() * e)
        .collect())
}

/// Closed-form KL divergence between diagonal Gaussians, summed over
/// dimensions:
/// `0.5 * sum_i [ lp_i - lq_i + (exp(lq_i) + (mq_i - mp_i)^2) / exp(lp_i) - 1 ]`.
/// Non-negative up to roundoff.
pub fn gaussian_kl<T: Real>(
    q: &GaussianParams<T>,
    p: &GaussianParams<T>,
) -> Result<T, CoreError> {
    if q.dim() != p.dim() {
        return Err(AutodiffError::ShapeMismatch {
            op: "gaussian_kl",
            shapes: vec![vec![q.dim()], vec![p.dim()]],
        }
        .into());
    }
    let half = T::from_f64(0.5);
    let mut total = T::ZERO;
    for i in 0..q.dim() {
        let (mq, lq) = (q.mean[i], q.logvar[i]);
        let (mp, lp) = (p.mean[i], p.logvar[i]);
        let diff = mq - mp;
        total += half * (lp - lq + (lq.exp() + diff * diff) / lp.exp() - T::ONE);
    }
    Ok(total)
}

/// Graph-side Gaussian head: mean and log-variance columns of one MLP
/// output, each `[batch, latent]`.
#[derive(Clone, Copy)]
pub struct GaussianHead {
    pub mean: NodeId,
    pub logvar: NodeId,
}

/// Runs `mlp` on `input` and splits its `[batch, 2*latent]` output into
/// the mean (first half) and log-variance (second half).
pub fn gaussian_head_forward<T: Real>(
    g: &mut Graph<T>,
    mlp: &MlpNodes,
    input: NodeId,
    latent: usize,
) -> Result<GaussianHead, CoreError> {
    let out = mlp_forward(g, mlp, input)?;
    let mean = g.slice_cols(out, 0, latent)?;
    let logvar = g.slice_cols(out, latent, 2 * latent)?;
    Ok(GaussianHead { mean, logvar })
}

/// Differentiable sample: `mean + exp(0.5 * logvar) * noise` with `noise`
/// a constant leaf of matching shape.
pub fn reparameterize_node<T: Real>(
    g: &mut Graph<T>,
    head: &GaussianHead,
    noise: NodeId,
) -> Result<NodeId, CoreError> {
    let half_lv = g.scale(head.logvar, T::from_f64(0.5))?;
    let std = g.exp(half_lv)?;
    let scaled = g.mul(std, noise)?;
    Ok(g.add(head.mean, scaled)?)
}

/// KL divergence between two batched Gaussian heads, summed over latent
/// dimensions and averaged over the batch; returns a scalar node.
pub fn gaussian_kl_node<T: Real>(
    g: &mut Graph<T>,
    q: &GaussianHead,
    p: &GaussianHead,
) -> Result<NodeId, CoreError> {
    let (batch, _) = g.value(q.mean).dims2("gaussian_kl")?;
    let diff = g.sub(q.mean, p.mean)?;
    let diff2 = g.mul(diff, diff)?;
    let var_q = g.exp(q.logvar)?;
    let num = g.add(var_q, diff2)?;
    let neg_lp = g.scale(p.logvar, -T::ONE)?;
    let inv_var_p = g.exp(neg_lp)?;
    let frac = g.mul(num, inv_var_p)?;
    let ldiff = g.sub(p.logvar, q.logvar)?;
    let frac_m1 = g.add_scalar(frac, -T::ONE)?;
    let terms = g.add(ldiff, frac_m1)?;
    let halved = g.scale(terms, T::from_f64(0.5))?;
    let total = g.sum_all(halved)?;
    Ok(g.scale(total, T::from_f64(1.0 / batch as f64))?)
}
