//! The four model variants with a shared dispatch type: training-mode
//! forward passes (posterior paths) producing per-head losses and
//! gradients, and testing-mode forward passes (prior-substitution paths)
//! producing label scores without ever reading ground-truth labels
//! (except the upper-bound variant, which consumes the category by
//! design).

mod bilstm;
pub mod common;
mod cvae;
mod hcvae;

pub use common::{
    argmax_tie_low, draw_predict_noise, draw_train_noise, one_hot_rows, Batch, LossBreakdown,
    ModelDims, ModelVariant, Prediction, TestMode,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AutodiffError, Graph, NodeId, Real, Tensor};
use crate::error::CoreError;
use crate::nn::{GradMap, ModelParams, ParamInit, ParamNodes};

/// Scalar loss nodes of one training step.
pub(crate) struct LossNodes {
    pub total: NodeId,
    pub rec_c: Option<NodeId>,
    pub rec_g: NodeId,
    pub kl_c: Option<NodeId>,
    pub kl_g: Option<NodeId>,
}

/// Score matrices of one prediction pass.
pub(crate) struct ScoreNodes {
    pub group: NodeId,
    pub category: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Model<T: Real> {
    pub variant: ModelVariant,
    pub dims: ModelDims,
    pub params: ModelParams<T>,
}

impl<T: Real> Model<T> {
    /// Initializes a model with the standard recipe on a dedicated RNG
    /// stream of `seed`.
    pub fn new(variant: ModelVariant, dims: ModelDims, seed: u64) -> Result<Self, CoreError> {
        dims.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = ParamInit::new(&mut rng);
        let (e, h, l, m, c, gr) = (
            dims.embed,
            dims.hidden,
            dims.latent,
            dims.mlp_hidden,
            dims.categories,
            dims.groups,
        );
        init.embedding("embedding", dims.vocab, e)?;
        match variant {
            ModelVariant::Cvae => {
                init.bilstm("posterior.bilstm", e, h)?;
                init.mlp("posterior.mlp", gr + 2 * h, m, 2 * l)?;
                init.bilstm("prior.bilstm", e, h)?;
                init.mlp("prior.mlp", 2 * h, m, 2 * l)?;
                init.mlp("likelihood.mlp", l, m, gr)?;
            }
            ModelVariant::Hcvae => {
                init.bilstm("encoder.bilstm", e, h)?;
                init.mlp("basic.mlp", 2 * h, m, 2 * l)?;
                init.mlp("posterior_cat.mlp", c + 2 * h, m, 2 * l)?;
                init.mlp("posterior_grp.mlp", c + gr + 2 * h, m, 2 * l)?;
                init.bilstm("prior_cat.bilstm", e, h)?;
                init.mlp("prior_cat.mlp", 2 * h, m, 2 * l)?;
                init.bilstm("prior_grp.bilstm", e, h)?;
                init.mlp("prior_grp.mlp", l + 2 * h, m, 2 * l)?;
                init.mlp("likelihood_cat.mlp", 2 * h + l, m, c)?;
                init.mlp("likelihood_grp.mlp", 2 * h + l, m, gr)?;
            }
            ModelVariant::Bilstm => {
                init.bilstm("encoder.bilstm", e, h)?;
                init.affine("output", 2 * h, gr)?;
            }
            ModelVariant::UpperBound => {
                init.bilstm("encoder.bilstm", e, h)?;
                init.affine("output", 2 * h + c, gr)?;
            }
        }
        Ok(Model {
            variant,
            dims,
            params: init.finish(),
        })
    }

    /// Wraps already-built parameters (checkpoint loading).
    pub fn from_params(
        variant: ModelVariant,
        dims: ModelDims,
        params: ModelParams<T>,
    ) -> Result<Self, CoreError> {
        dims.validate()?;
        Ok(Model {
            variant,
            dims,
            params,
        })
    }

    fn check_noise(
        &self,
        batch_len: usize,
        noise: &[Tensor<T>],
        expected: usize,
    ) -> Result<(), CoreError> {
        if noise.len() != expected {
            return Err(CoreError::Config(format!(
                "{} expects {expected} noise tensors, got {}",
                self.variant,
                noise.len()
            )));
        }
        for n in noise {
            if n.shape() != [batch_len, self.dims.latent] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "train_noise",
                    shapes: vec![n.shape().to_vec(), vec![batch_len, self.dims.latent]],
                }
                .into());
            }
        }
        Ok(())
    }

    fn loss_impl(
        &self,
        params: &ModelParams<T>,
        batch: &Batch,
        noise: &[Tensor<T>],
        want_grads: bool,
    ) -> Result<(LossBreakdown, T, Option<GradMap<T>>), CoreError> {
        if batch.is_empty() {
            return Err(AutodiffError::EmptyInput { op: "train_step" }.into());
        }
        self.check_noise(batch.len(), noise, self.variant.train_noise_count())?;

        let mut g: Graph<T> = Graph::new();
        let pn = ParamNodes::bind(&mut g, params);
        let nodes = match self.variant {
            ModelVariant::Cvae => cvae::train_loss(&mut g, &pn, &self.dims, batch, noise)?,
            ModelVariant::Hcvae => hcvae::train_loss(&mut g, &pn, &self.dims, batch, noise)?,
            ModelVariant::Bilstm => bilstm::train_loss(&mut g, &pn, &self.dims, batch, false)?,
            ModelVariant::UpperBound => bilstm::train_loss(&mut g, &pn, &self.dims, batch, true)?,
        };

        let scalar = |g: &Graph<T>, id: NodeId| g.value(id).item().to_f64();
        let breakdown = LossBreakdown {
            total: scalar(&g, nodes.total),
            rec_c: nodes.rec_c.map(|n| scalar(&g, n)),
            rec_g: scalar(&g, nodes.rec_g),
            kl_c: nodes.kl_c.map(|n| scalar(&g, n)),
            kl_g: nodes.kl_g.map(|n| scalar(&g, n)),
        };
        let total_t = g.value(nodes.total).item();

        let grads = if want_grads {
            let mut raw = g.backward(nodes.total)?;
            let mut map = GradMap::new();
            for (name, id) in pn.iter() {
                let grad = raw
                    .take(id)
                    .ok_or_else(|| CoreError::MissingGradient(name.clone()))?;
                map.insert(name.clone(), grad);
            }
            Some(map)
        } else {
            None
        };
        Ok((breakdown, total_t, grads))
    }

    /// One training-mode forward/backward pass over a batch with the
    /// given reparameterization noise. Returns per-head losses and the
    /// gradient of the total loss for every parameter.
    pub fn train_loss(
        &self,
        batch: &Batch,
        noise: &[Tensor<T>],
    ) -> Result<(LossBreakdown, GradMap<T>), CoreError> {
        let (breakdown, _, grads) = self.loss_impl(&self.params, batch, noise, true)?;
        Ok((breakdown, grads.expect("requested gradients")))
    }

    /// Loss evaluation against explicit parameters, for the gradient
    /// checker: the batch and noise stay fixed while parameters are
    /// perturbed.
    pub fn loss_with_params(
        &self,
        params: &ModelParams<T>,
        batch: &Batch,
        noise: &[Tensor<T>],
        want_grads: bool,
    ) -> Result<(T, Option<GradMap<T>>), CoreError> {
        let (_, total, grads) = self.loss_impl(params, batch, noise, want_grads)?;
        Ok((total, grads))
    }

    /// Prediction over a batch of sequences. `cats` is consumed only by
    /// the upper-bound variant (which requires it); other variants never
    /// see label information. In `sample` mode each example's noise comes
    /// from its own `(seed, example_offset + i)` stream.
    pub fn predict(
        &self,
        seqs: &[Vec<usize>],
        cats: Option<&[usize]>,
        mode: TestMode,
        noise_seed: u64,
        example_offset: usize,
    ) -> Result<Vec<Prediction>, CoreError> {
        if seqs.is_empty() {
            return Err(AutodiffError::EmptyInput { op: "predict" }.into());
        }
        let draws = match mode {
            TestMode::Mean => 0,
            TestMode::Sample => self.variant.predict_noise_count(),
        };
        let noise: Vec<Tensor<T>> = draw_predict_noise(
            noise_seed,
            example_offset,
            seqs.len(),
            self.dims.latent,
            draws,
        );

        let mut g: Graph<T> = Graph::new();
        let pn = ParamNodes::bind(&mut g, &self.params);
        let scores = match self.variant {
            ModelVariant::Cvae => cvae::predict_scores(&mut g, &pn, &self.dims, seqs, mode, &noise)?,
            ModelVariant::Hcvae => {
                hcvae::predict_scores(&mut g, &pn, &self.dims, seqs, mode, &noise)?
            }
            ModelVariant::Bilstm => {
                bilstm::predict_scores(&mut g, &pn, &self.dims, seqs, None, mode, &noise)?
            }
            ModelVariant::UpperBound => {
                let cats = cats.ok_or_else(|| CoreError::MissingCategory {
                    index: example_offset,
                    variant: self.variant.name().to_string(),
                })?;
                if cats.len() != seqs.len() {
                    return Err(CoreError::Config(format!(
                        "{} category labels for {} sequences",
                        cats.len(),
                        seqs.len()
                    )));
                }
                bilstm::predict_scores(&mut g, &pn, &self.dims, seqs, Some(cats), mode, &noise)?
            }
        };

        let group_rows = g.value(scores.group);
        let n_groups = self.dims.groups;
        let mut out = Vec::with_capacity(seqs.len());
        for b in 0..seqs.len() {
            let group_scores: Vec<f64> = group_rows.data()[b * n_groups..(b + 1) * n_groups]
                .iter()
                .map(|v| v.to_f64())
                .collect();
            let (category_scores, category) = match scores.category {
                None => (None, None),
                Some(id) => {
                    let c = self.dims.categories;
                    let row: Vec<f64> = g.value(id).data()[b * c..(b + 1) * c]
                        .iter()
                        .map(|v| v.to_f64())
                        .collect();
                    let arg = argmax_tie_low(&row);
                    (Some(row), Some(arg))
                }
            };
            out.push(Prediction {
                group: argmax_tie_low(&group_scores),
                group_scores,
                category_scores,
                category,
            });
        }
        Ok(out)
    }
}
