//! Discriminative conditional VAE over the group label.
//!
//! Training: the posterior network (Bi-LSTM `f` + MLP `s`) sees the
//! group one-hot concatenated with the encoded text and emits the latent
//! Gaussian; the prior network (`f'` + `s'`) sees the text alone. One
//! latent sample from the posterior feeds the likelihood MLP `w`, and the
//! loss is the BCE reconstruction plus the posterior-prior KL.
//!
//! Testing substitutes the prior for the posterior, so no label is ever
//! consulted: the likelihood consumes `z'` (sampled, or the prior mean in
//! `mean` mode).

use crate::autodiff::{Graph, Real, Tensor};
use crate::data::vocab::PAD_ID;
use crate::error::CoreError;
use crate::nn::{
    bce_node, bilstm_encode, embed_steps, gaussian_head_forward, gaussian_kl_node, mlp_forward,
    reparameterize_node, BilstmNodes, MlpNodes, ParamNodes,
};

use super::common::{one_hot_rows, Batch, ModelDims, TestMode};
use super::{LossNodes, ScoreNodes};

pub(crate) fn train_loss<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    batch: &Batch,
    noise: &[Tensor<T>],
) -> Result<LossNodes, CoreError> {
    let emb = pn.node("embedding")?;
    let steps = embed_steps(g, emb, &batch.seqs, PAD_ID)?;

    let post_enc = BilstmNodes::from_params(g, pn, "posterior.bilstm")?;
    let e = bilstm_encode(g, &post_enc, &steps)?;
    let y_g = g.leaf(one_hot_rows::<T>(&batch.groups, dims.groups)?);
    let post_in = g.concat(&[y_g, e])?;
    let post_mlp = MlpNodes::from_params(pn, "posterior.mlp")?;
    let q = gaussian_head_forward(g, &post_mlp, post_in, dims.latent)?;

    let prior_enc = BilstmNodes::from_params(g, pn, "prior.bilstm")?;
    let e_prior = bilstm_encode(g, &prior_enc, &steps)?;
    let prior_mlp = MlpNodes::from_params(pn, "prior.mlp")?;
    let p = gaussian_head_forward(g, &prior_mlp, e_prior, dims.latent)?;

    let eps = g.leaf(noise[0].clone());
    let z = reparameterize_node(g, &q, eps)?;
    let lik_mlp = MlpNodes::from_params(pn, "likelihood.mlp")?;
    let logits = mlp_forward(g, &lik_mlp, z)?;
    let probs = g.sigmoid(logits)?;

    let rec = bce_node(g, probs, y_g)?;
    let kl = gaussian_kl_node(g, &q, &p)?;
    let total = g.add(rec, kl)?;
    Ok(LossNodes {
        total,
        rec_c: None,
        rec_g: rec,
        kl_c: None,
        kl_g: Some(kl),
    })
}

pub(crate) fn predict_scores<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    seqs: &[Vec<usize>],
    mode: TestMode,
    noise: &[Tensor<T>],
) -> Result<ScoreNodes, CoreError> {
    let emb = pn.node("embedding")?;
    let steps = embed_steps(g, emb, seqs, PAD_ID)?;

    let prior_enc = BilstmNodes::from_params(g, pn, "prior.bilstm")?;
    let e_prior = bilstm_encode(g, &prior_enc, &steps)?;
    let prior_mlp = MlpNodes::from_params(pn, "prior.mlp")?;
    let p = gaussian_head_forward(g, &prior_mlp, e_prior, dims.latent)?;

    let z = match mode {
        TestMode::Mean => p.mean,
        TestMode::Sample => {
            let eps = g.leaf(noise[0].clone());
            reparameterize_node(g, &p, eps)?
        }
    };
    let lik_mlp = MlpNodes::from_params(pn, "likelihood.mlp")?;
    let logits = mlp_forward(g, &lik_mlp, z)?;
    let probs = g.sigmoid(logits)?;
    Ok(ScoreNodes {
        group: probs,
        category: None,
    })
}
