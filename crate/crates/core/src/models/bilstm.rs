//! The two non-variational baselines: a Bi-LSTM encoder followed by a
//! linear layer over the group classes, and the upper-bound variant whose
//! linear layer additionally consumes the ground-truth category one-hot
//! at both training and testing time. Both train with BCE on sigmoid
//! outputs for head parity with the CVAE models.

use crate::autodiff::{Graph, Real, Tensor};
use crate::data::vocab::PAD_ID;
use crate::error::CoreError;
use crate::nn::{
    affine_forward, bce_node, bilstm_encode, embed_steps, AffineNodes, BilstmNodes, ParamNodes,
};

use super::common::{one_hot_rows, Batch, ModelDims, ModelVariant, TestMode};
use super::{LossNodes, ScoreNodes};

pub(crate) fn train_loss<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    batch: &Batch,
    with_category: bool,
) -> Result<LossNodes, CoreError> {
    let emb = pn.node("embedding")?;
    let steps = embed_steps(g, emb, &batch.seqs, PAD_ID)?;
    let enc = BilstmNodes::from_params(g, pn, "encoder.bilstm")?;
    let e = bilstm_encode(g, &enc, &steps)?;

    let features = if with_category {
        let cats = batch.categories_required(ModelVariant::UpperBound)?;
        let y_c = g.leaf(one_hot_rows::<T>(&cats, dims.categories)?);
        g.concat(&[e, y_c])?
    } else {
        e
    };

    let out = AffineNodes::from_params(pn, "output")?;
    let logits = affine_forward(g, &out, features)?;
    let probs = g.sigmoid(logits)?;
    let y_g = g.leaf(one_hot_rows::<T>(&batch.groups, dims.groups)?);
    let rec = bce_node(g, probs, y_g)?;
    Ok(LossNodes {
        total: rec,
        rec_c: None,
        rec_g: rec,
        kl_c: None,
        kl_g: None,
    })
}

pub(crate) fn predict_scores<T: Real>(
    g: &mut Graph<T>,
    pn: &ParamNodes,
    dims: &ModelDims,
    seqs: &[Vec<usize>],
    cats: Option<&[usize]>,
    _mode: TestMode,
    _noise: &[Tensor<T>],
) -> Result<ScoreNodes, CoreError> {
    let emb = pn.node("embedding")?;
    let steps = embed_steps(g, emb, seqs, PAD_ID)?;
    let enc = BilstmNodes::from_params(g, pn, "encoder.bilstm")?;
    let e = bilstm_encode(g, &enc, &steps)?;

    let features = match cats {
        Some(cats) => {
            let y_c = g.leaf(one_hot_rows::<T>(cats, dims.categories)?);
            g.concat(&[e, y_c])?
        }
        None => e,
    };
    let out = AffineNodes::from_params(pn, "output")?;
    let logits = affine_forward(g, &out, features)?;
    let probs = g.sigmoid(logits)?;
    Ok(ScoreNodes {
        group: probs,
        category: None,
    })
}
