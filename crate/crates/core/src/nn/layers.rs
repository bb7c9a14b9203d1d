//! Graph-side forward passes for the shared building blocks: embedding
//! lookup, LSTM / Bi-LSTM over padded batches, and the three-layer MLP.
//!
//! Tensors flowing through these functions are `[batch, features]`
//! matrices; sequences are lists of per-time-step matrices. Variable
//! lengths are handled by right-padding plus a row mask that freezes the
//! recurrent state once an example's sequence has ended, so the final
//! state equals the state at each example's own last token.

use indexmap::IndexMap;

use crate::autodiff::{AutodiffError, Graph, NodeId, Real, Tensor};
use crate::error::CoreError;

use super::params::ModelParams;

/// Parameter tensors bound into a graph as leaves, keyed by name.
pub struct ParamNodes {
    map: IndexMap<String, NodeId>,
}

impl ParamNodes {
    pub fn bind<T: Real>(g: &mut Graph<T>, params: &ModelParams<T>) -> ParamNodes {
        let mut map = IndexMap::with_capacity(params.len());
        for (name, tensor) in params.iter() {
            map.insert(name.clone(), g.leaf(tensor.clone()));
        }
        ParamNodes { map }
    }

    pub fn node(&self, name: &str) -> Result<NodeId, CoreError> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| CoreError::UnknownParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, NodeId)> {
        self.map.iter().map(|(n, &id)| (n, id))
    }
}

/// Embedding lookup for one token-id sequence: `[len, embed]`.
/// Gradients flow only to the looked-up rows; duplicate ids sum.
pub fn embed<T: Real>(
    g: &mut Graph<T>,
    table: NodeId,
    ids: &[usize],
) -> Result<NodeId, CoreError> {
    if ids.is_empty() {
        return Err(AutodiffError::EmptyInput { op: "embed" }.into());
    }
    Ok(g.lookup_rows(table, ids)?)
}

#[derive(Clone, Copy)]
pub struct LstmNodes {
    pub w_ih: NodeId,
    pub w_hh: NodeId,
    pub bias: NodeId,
    pub hidden: usize,
}

impl LstmNodes {
    pub fn from_params<T: Real>(
        g: &Graph<T>,
        pn: &ParamNodes,
        prefix: &str,
    ) -> Result<Self, CoreError> {
        let w_ih = pn.node(&format!("{prefix}.w_ih"))?;
        let w_hh = pn.node(&format!("{prefix}.w_hh"))?;
        let bias = pn.node(&format!("{prefix}.bias"))?;
        let hidden = g.value(w_hh).shape()[0];
        Ok(LstmNodes {
            w_ih,
            w_hh,
            bias,
            hidden,
        })
    }
}

/// One LSTM recurrence step over a `[batch, input]` slice.
pub fn lstm_step<T: Real>(
    g: &mut Graph<T>,
    w: &LstmNodes,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId), CoreError> {
    let hid = w.hidden;
    let xg = g.matmul(x, w.w_ih)?;
    let hg = g.matmul(h_prev, w.w_hh)?;
    let pre = g.add(xg, hg)?;
    let gates = g.add_bias(pre, w.bias)?;

    let i_raw = g.slice_cols(gates, 0, hid)?;
    let i_gate = g.sigmoid(i_raw)?;
    let f_raw = g.slice_cols(gates, hid, 2 * hid)?;
    let f_gate = g.sigmoid(f_raw)?;
    let c_raw = g.slice_cols(gates, 2 * hid, 3 * hid)?;
    let c_cand = g.tanh(c_raw)?;
    let o_raw = g.slice_cols(gates, 3 * hid, 4 * hid)?;
    let o_gate = g.sigmoid(o_raw)?;

    let keep = g.mul(f_gate, c_prev)?;
    let write = g.mul(i_gate, c_cand)?;
    let c_new = g.add(keep, write)?;
    let c_act = g.tanh(c_new)?;
    let h_new = g.mul(o_gate, c_act)?;
    Ok((h_new, c_new))
}

#[derive(Clone, Copy)]
pub struct BilstmNodes {
    pub fwd: LstmNodes,
    pub bwd: LstmNodes,
}

impl BilstmNodes {
    pub fn from_params<T: Real>(
        g: &Graph<T>,
        pn: &ParamNodes,
        prefix: &str,
    ) -> Result<Self, CoreError> {
        Ok(BilstmNodes {
            fwd: LstmNodes::from_params(g, pn, &format!("{prefix}.fwd"))?,
            bwd: LstmNodes::from_params(g, pn, &format!("{prefix}.bwd"))?,
        })
    }
}

/// Embedded per-time-step inputs for a padded batch of sequences.
pub struct SeqSteps {
    /// `[batch, embed]` per step, natural token order, right-padded.
    pub fwd: Vec<NodeId>,
    /// Same, with each example's tokens reversed.
    pub bwd: Vec<NodeId>,
    /// `masks[t][b]` is true while step `t` is inside example `b`.
    pub masks: Vec<Vec<bool>>,
    pub batch: usize,
}

/// Looks up embeddings for every (padded) time step of a batch, shared by
/// all Bi-LSTMs consuming the same input text.
pub fn embed_steps<T: Real>(
    g: &mut Graph<T>,
    table: NodeId,
    seqs: &[Vec<usize>],
    pad_id: usize,
) -> Result<SeqSteps, CoreError> {
    if seqs.is_empty() {
        return Err(AutodiffError::EmptyInput { op: "embed_steps" }.into());
    }
    if seqs.iter().any(|s| s.is_empty()) {
        return Err(AutodiffError::EmptyInput { op: "embed" }.into());
    }
    let batch = seqs.len();
    let max_len = seqs.iter().map(|s| s.len()).max().unwrap();

    let mut fwd = Vec::with_capacity(max_len);
    let mut bwd = Vec::with_capacity(max_len);
    let mut masks = Vec::with_capacity(max_len);
    for t in 0..max_len {
        let mut ids_f = Vec::with_capacity(batch);
        let mut ids_b = Vec::with_capacity(batch);
        let mut mask = Vec::with_capacity(batch);
        for seq in seqs {
            let inside = t < seq.len();
            mask.push(inside);
            ids_f.push(if inside { seq[t] } else { pad_id });
            ids_b.push(if inside { seq[seq.len() - 1 - t] } else { pad_id });
        }
        fwd.push(g.lookup_rows(table, &ids_f)?);
        bwd.push(g.lookup_rows(table, &ids_b)?);
        masks.push(mask);
    }
    Ok(SeqSteps {
        fwd,
        bwd,
        masks,
        batch,
    })
}

fn run_direction<T: Real>(
    g: &mut Graph<T>,
    w: &LstmNodes,
    steps: &[NodeId],
    masks: &[Vec<bool>],
    batch: usize,
) -> Result<NodeId, CoreError> {
    let zero = Tensor::zeros(&[batch, w.hidden]);
    let mut h = g.leaf(zero.clone());
    let mut c = g.leaf(zero);
    for (t, &x) in steps.iter().enumerate() {
        let (h_new, c_new) = lstm_step(g, w, x, h, c)?;
        if masks[t].iter().all(|&m| m) {
            h = h_new;
            c = c_new;
        } else {
            h = g.blend_rows(h_new, h, &masks[t])?;
            c = g.blend_rows(c_new, c, &masks[t])?;
        }
    }
    Ok(h)
}

/// Runs both directions over the sequence batch and concatenates the
/// forward direction's final state with the backward direction's final
/// state (its state at original position 0): `[batch, 2*hidden]`.
pub fn bilstm_encode<T: Real>(
    g: &mut Graph<T>,
    w: &BilstmNodes,
    steps: &SeqSteps,
) -> Result<NodeId, CoreError> {
    let h_fwd = run_direction(g, &w.fwd, &steps.fwd, &steps.masks, steps.batch)?;
    let h_bwd = run_direction(g, &w.bwd, &steps.bwd, &steps.masks, steps.batch)?;
    Ok(g.concat(&[h_fwd, h_bwd])?)
}

#[derive(Clone, Copy)]
pub struct AffineNodes {
    pub weight: NodeId,
    pub bias: NodeId,
}

impl AffineNodes {
    pub fn from_params(pn: &ParamNodes, prefix: &str) -> Result<Self, CoreError> {
        Ok(AffineNodes {
            weight: pn.node(&format!("{prefix}.weight"))?,
            bias: pn.node(&format!("{prefix}.bias"))?,
        })
    }
}

pub fn affine_forward<T: Real>(
    g: &mut Graph<T>,
    w: &AffineNodes,
    x: NodeId,
) -> Result<NodeId, CoreError> {
    let xw = g.matmul(x, w.weight)?;
    Ok(g.add_bias(xw, w.bias)?)
}

#[derive(Clone, Copy)]
pub struct MlpNodes {
    pub l1: AffineNodes,
    pub l2: AffineNodes,
    pub l3: AffineNodes,
}

impl MlpNodes {
    pub fn from_params(pn: &ParamNodes, prefix: &str) -> Result<Self, CoreError> {
        Ok(MlpNodes {
            l1: AffineNodes::from_params(pn, &format!("{prefix}.l1"))?,
            l2: AffineNodes::from_params(pn, &format!("{prefix}.l2"))?,
            l3: AffineNodes::from_params(pn, &format!("{prefix}.l3"))?,
        })
    }
}

/// Three affine layers with Tanh after the first two; the last layer's
/// output is raw so each head can apply its own nonlinearity.
pub fn mlp_forward<T: Real>(
    g: &mut Graph<T>,
    w: &MlpNodes,
    x: NodeId,
) -> Result<NodeId, CoreError> {
    let a1 = affine_forward(g, &w.l1, x)?;
    let t1 = g.tanh(a1)?;
    let a2 = affine_forward(g, &w.l2, t1)?;
    let t2 = g.tanh(a2)?;
    affine_forward(g, &w.l3, t2)
}
