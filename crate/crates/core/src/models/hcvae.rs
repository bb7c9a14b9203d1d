//! Hierarchical CVAE with chained latents.
//!
//! A shared Bi-LSTM `f` encodes the text into `e`. The basic head `s_x`
//! emits a text-only Gaussian whose sample `z_x` is added to both the
//! posterior-side and prior-side category latents, so every other head
//! only models residual signal. Posterior heads see the labels
//! (`s_c`: category one-hot, `s_g`: category and group one-hots); the
//! prior branches own their Bi-LSTMs `f'_c`, `f'_g` and see text only,
//! with the group prior additionally conditioned on `u' = z_x + z'_c` as
//! a learned stand-in for the category.
//!
//! Training: `u = z_x + z_c`, `v = u + z_g`, predictions
//! `w_c(e (+) u)`, `w_g(e (+) v)`; the loss adds the two BCE terms and
//! the two posterior-prior KL terms. Testing swaps in the prior branches:
//! `u'` replaces `u` and `v' = u' + z'_g` replaces `v`.

use crate::autodiff::{Graph, NodeId, Real, Tensor};
use crate::data::vocab::PAD_ID;
use crate::error::CoreError;
use crate::nn::{
    bce_node, bilstm_encode, embed_steps, gaussian_head_forward, gaussian_kl_node, mlp_forward,
    reparameterize_node, BilstmNodes, GaussianHead, MlpNodes, ParamNodes, SeqSteps,
};

use super::common::{one_hot_rows, Batch, ModelDims, ModelVariant, TestMode};
use super::{LossNodes, ScoreNodes};

struct SharedEncoding {
    steps: SeqSteps,
    e: NodeId,
}

fn encode_shared<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    seqs: &[Vec<usize>],
) -> Result<SharedEncoding, CoreError> {
    let emb = pn.node("embedding")?;
    let steps = embed_steps(g, emb, seqs, PAD_ID)?;
    let enc = BilstmNodes::from_params(g, pn, "encoder.bilstm")?;
    let e = bilstm_encode(g, &enc, &steps)?;
    Ok(SharedEncoding { steps, e })
}

fn basic_head<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    e: NodeId,
) -> Result<GaussianHead, CoreError> {
    let mlp = MlpNodes::from_params(pn, "basic.mlp")?;
    gaussian_head_forward(g, &mlp, e, dims.latent)
}

/// Prior branch for categories: its own Bi-LSTM over the same embedded
/// steps, then the category prior head.
fn prior_cat<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    steps: &SeqSteps,
) -> Result<GaussianHead, CoreError> {
    let enc = BilstmNodes::from_params(g, pn, "prior_cat.bilstm")?;
    let e = bilstm_encode(g, &enc, steps)?;
    let mlp = MlpNodes::from_params(pn, "prior_cat.mlp")?;
    gaussian_head_forward(g, &mlp, e, dims.latent)
}

/// Prior branch for groups, conditioned on `u'` and its own encoding of
/// the text.
fn prior_grp<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    steps: &SeqSteps,
    u_prime: NodeId,
) -> Result<GaussianHead, CoreError> {
    let enc = BilstmNodes::from_params(g, pn, "prior_grp.bilstm")?;
    let e = bilstm_encode(g, &enc, steps)?;
    let input = g.concat(&[u_prime, e])?;
    let mlp = MlpNodes::from_params(pn, "prior_grp.mlp")?;
    gaussian_head_forward(g, &mlp, input, dims.latent)
}

fn likelihood<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    prefix: &str,
    e: NodeId,
    latent: NodeId,
) -> Result<NodeId, CoreError> {
    let input = g.concat(&[e, latent])?;
    let mlp = MlpNodes::from_params(pn, prefix)?;
    let logits = mlp_forward(g, &mlp, input)?;
    Ok(g.sigmoid(logits)?)
}

pub(crate) fn train_loss<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    batch: &Batch,
    noise: &[Tensor<T>],
) -> Result<LossNodes, CoreError> {
    let cats = batch.categories_required(ModelVariant::Hcvae)?;
    let enc = encode_shared(g, pn, &batch.seqs)?;
    let e = enc.e;

    let y_c = g.leaf(one_hot_rows::<T>(&cats, dims.categories)?);
    let y_g = g.leaf(one_hot_rows::<T>(&batch.groups, dims.groups)?);

    // Posterior side.
    let x_head = basic_head(g, pn, dims, e)?;
    let cat_in = g.concat(&[y_c, e])?;
    let post_cat_mlp = MlpNodes::from_params(pn, "posterior_cat.mlp")?;
    let c_head = gaussian_head_forward(g, &post_cat_mlp, cat_in, dims.latent)?;
    let grp_in = g.concat(&[y_c, y_g, e])?;
    let post_grp_mlp = MlpNodes::from_params(pn, "posterior_grp.mlp")?;
    let g_head = gaussian_head_forward(g, &post_grp_mlp, grp_in, dims.latent)?;

    let eps_x = g.leaf(noise[0].clone());
    let z_x = reparameterize_node(g, &x_head, eps_x)?;
    let eps_c = g.leaf(noise[1].clone());
    let z_c = reparameterize_node(g, &c_head, eps_c)?;
    let eps_g = g.leaf(noise[2].clone());
    let z_g = reparameterize_node(g, &g_head, eps_g)?;

    let u = g.add(z_x, z_c)?;
    let v = g.add(u, z_g)?;

    let probs_c = likelihood(g, pn, "likelihood_cat.mlp", e, u)?;
    let probs_g = likelihood(g, pn, "likelihood_grp.mlp", e, v)?;
    let rec_c = bce_node(g, probs_c, y_c)?;
    let rec_g = bce_node(g, probs_g, y_g)?;

    // Prior side. The prior-side category latent is sampled exactly as
    // the procedure specifies even though only the group prior's
    // parameters consume it during training.
    let pc_head = prior_cat(g, pn, dims, &enc.steps)?;
    let eps_pc = g.leaf(noise[3].clone());
    let z_c_prime = reparameterize_node(g, &pc_head, eps_pc)?;
    let u_prime = g.add(z_x, z_c_prime)?;
    let pg_head = prior_grp(g, pn, dims, &enc.steps, u_prime)?;

    let kl_c = gaussian_kl_node(g, &c_head, &pc_head)?;
    let kl_g = gaussian_kl_node(g, &g_head, &pg_head)?;

    let rec = g.add(rec_c, rec_g)?;
    let kl = g.add(kl_c, kl_g)?;
    let total = g.add(rec, kl)?;
    Ok(LossNodes {
        total,
        rec_c: Some(rec_c),
        rec_g,
        kl_c: Some(kl_c),
        kl_g: Some(kl_g),
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
    let enc = encode_shared(g, pn, seqs)?;
    let e = enc.e;

    let x_head = basic_head(g, pn, dims, e)?;
    let pc_head = prior_cat(g, pn, dims, &enc.steps)?;

    let (z_x, z_c_prime) = match mode {
        TestMode::Mean => (x_head.mean, pc_head.mean),
        TestMode::Sample => {
            let eps_x = g.leaf(noise[0].clone());
            let z_x = reparameterize_node(g, &x_head, eps_x)?;
            let eps_c = g.leaf(noise[1].clone());
            let z_c = reparameterize_node(g, &pc_head, eps_c)?;
            (z_x, z_c)
        }
    };
    let u_prime = g.add(z_x, z_c_prime)?;
    let pg_head = prior_grp(g, pn, dims, &enc.steps, u_prime)?;
    let z_g_prime = match mode {
        TestMode::Mean => pg_head.mean,
        TestMode::Sample => {
            let eps_g = g.leaf(noise[2].clone());
            reparameterize_node(g, &pg_head, eps_g)?
        }
    };
    let v_prime = g.add(u_prime, z_g_prime)?;

    let probs_c = likelihood(g, pn, "likelihood_cat.mlp", e, u_prime)?;
    let probs_g = likelihood(g, pn, "likelihood_grp.mlp", e, v_prime)?;
    Ok(ScoreNodes {
        group: probs_g,
        category: Some(probs_c),
    })
}
