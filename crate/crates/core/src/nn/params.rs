use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Real, Tensor};
use crate::error::CoreError;

/// Gradients keyed by parameter path, in parameter insertion order.
pub type GradMap<T> = IndexMap<String, Tensor<T>>;

/// Gate layout of LSTM weight matrices: input, forget, cell candidate,
/// output. The forget block of the bias is initialized to 1.
pub const LSTM_GATES: usize = 4;

/// Named parameter collection for one model variant. Names are unique and
/// tensor shapes are fixed after insertion (only the data is mutable).
#[derive(Debug, Clone)]
pub struct ModelParams<T: Real> {
    tensors: IndexMap<String, Tensor<T>>,
}

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ModelParams<T> {
    pub fn new() -> Self {
        ModelParams {
            tensors: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) -> Result<(), CoreError> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(CoreError::DuplicateParam(name));
        }
        self.tensors.insert(name, t);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, CoreError> {
        self.tensors
            .get(name)
            .ok_or_else(|| CoreError::UnknownParam(name.to_string()))
    }

    /// Mutable access to a tensor's elements. The shape stays fixed.
    pub fn data_mut(&mut self, name: &str) -> Result<&mut [T], CoreError> {
        self.tensors
            .get_mut(name)
            .map(|t| t.data_mut())
            .ok_or_else(|| CoreError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.tensors.iter()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.values().map(|t| t.numel()).sum()
    }

    pub fn zero_all(&mut self) {
        for t in self.tensors.values_mut() {
            t.data_mut().fill(T::ZERO);
        }
    }

    pub fn assert_finite(&self) -> Result<(), CoreError> {
        for (name, t) in &self.tensors {
            t.assert_finite(name)?;
        }
        Ok(())
    }
}

/// Builds a parameter collection with the standard init recipe:
/// embeddings `U(-0.1, 0.1)`, affine weights `U(+/- 1/sqrt(fan_in))`,
/// biases zero except the LSTM forget-gate block at 1.
pub struct ParamInit<'r, T: Real> {
    params: ModelParams<T>,
    rng: &'r mut ChaCha8Rng,
}

impl<'r, T: Real> ParamInit<'r, T> {
    pub fn new(rng: &'r mut ChaCha8Rng) -> Self {
        ParamInit {
            params: ModelParams::new(),
            rng,
        }
    }

    pub fn finish(self) -> ModelParams<T> {
        self.params
    }

    fn uniform(&mut self, shape: &[usize], bound: f64) -> Tensor<T> {
        let numel: usize = shape.iter().product();
        let data: Vec<T> = (0..numel)
            .map(|_| T::from_f64(self.rng.gen_range(-bound..=bound)))
            .collect();
        Tensor::from_vec(shape.to_vec(), data).expect("init shape")
    }

    pub fn embedding(&mut self, name: &str, vocab: usize, dim: usize) -> Result<(), CoreError> {
        let t = self.uniform(&[vocab, dim], 0.1);
        self.params.insert(name, t)
    }

    /// One affine layer: `{prefix}.weight` of shape `[input, output]` and
    /// `{prefix}.bias` of shape `[output]`.
    pub fn affine(&mut self, prefix: &str, input: usize, output: usize) -> Result<(), CoreError> {
        let bound = 1.0 / (input as f64).sqrt();
        let w = self.uniform(&[input, output], bound);
        self.params.insert(format!("{prefix}.weight"), w)?;
        self.params
            .insert(format!("{prefix}.bias"), Tensor::zeros(&[output]))
    }

    /// Three affine layers `{prefix}.l1 / .l2 / .l3` sized
    /// `input -> hidden -> hidden -> output`.
    pub fn mlp(
        &mut self,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
    ) -> Result<(), CoreError> {
        self.affine(&format!("{prefix}.l1"), input, hidden)?;
        self.affine(&format!("{prefix}.l2"), hidden, hidden)?;
        self.affine(&format!("{prefix}.l3"), hidden, output)
    }

    /// One LSTM direction: `{prefix}.w_ih` `[input, 4*hidden]`,
    /// `{prefix}.w_hh` `[hidden, 4*hidden]`, `{prefix}.bias` `[4*hidden]`
    /// with the forget-gate block set to 1.
    pub fn lstm(&mut self, prefix: &str, input: usize, hidden: usize) -> Result<(), CoreError> {
        let w_ih = self.uniform(&[input, LSTM_GATES * hidden], 1.0 / (input as f64).sqrt());
        let w_hh = self.uniform(&[hidden, LSTM_GATES * hidden], 1.0 / (hidden as f64).sqrt());
        self.params.insert(format!("{prefix}.w_ih"), w_ih)?;
        self.params.insert(format!("{prefix}.w_hh"), w_hh)?;
        let mut bias = Tensor::zeros(&[LSTM_GATES * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(T::ONE);
        self.params.insert(format!("{prefix}.bias"), bias)
    }

    /// Forward and backward LSTM directions under `{prefix}.fwd` and
    /// `{prefix}.bwd`.
    pub fn bilstm(&mut self, prefix: &str, input: usize, hidden: usize) -> Result<(), CoreError> {
        self.lstm(&format!("{prefix}.fwd"), input, hidden)?;
        self.lstm(&format!("{prefix}.bwd"), input, hidden)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ModelParams::<f64>::new();
        p.insert("w", Tensor::zeros(&[2])).unwrap();
        let err = p.insert("w", Tensor::zeros(&[2])).unwrap_err();
        assert!(matches!(err, CoreError::DuplicateParam(_)));
    }

    #[test]
    fn forget_gate_bias_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut init = ParamInit::<f32>::new(&mut rng);
        init.lstm("enc", 3, 5).unwrap();
        let p = init.finish();
        let bias = p.get("enc.bias").unwrap();
        assert_eq!(bias.shape(), &[20]);
        for (i, &b) in bias.data().iter().enumerate() {
            let expected = if (5..10).contains(&i) { 1.0 } else { 0.0 };
            assert_eq!(b, expected, "gate bias at {i}");
        }
    }

    #[test]
    fn same_seed_reproduces_init() {
        let build = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut init = ParamInit::<f32>::new(&mut rng);
            init.embedding("emb", 11, 4).unwrap();
            init.mlp("head", 4, 6, 2).unwrap();
            init.finish()
        };
        let a = build(3);
        let b = build(3);
        let c = build(4);
        for (name, t) in a.iter() {
            assert_eq!(t.data(), b.get(name).unwrap().data(), "{name}");
        }
        let differs = a
            .iter()
            .any(|(name, t)| t.data() != c.get(name).unwrap().data());
        assert!(differs, "different seeds must differ somewhere");
    }

    #[test]
    fn init_bounds_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut init = ParamInit::<f64>::new(&mut rng);
        init.embedding("emb", 50, 16).unwrap();
        init.affine("lin", 9, 4).unwrap();
        init.lstm("rnn", 25, 4).unwrap();
        let p = init.finish();
        for &v in p.get("emb").unwrap().data() {
            assert!(v.abs() <= 0.1);
        }
        for &v in p.get("lin.weight").unwrap().data() {
            assert!(v.abs() <= 1.0 / 3.0);
        }
        for &v in p.get("rnn.w_ih").unwrap().data() {
            assert!(v.abs() <= 1.0 / 5.0);
        }
        assert!(p.get("lin.bias").unwrap().data().iter().all(|&v| v == 0.0));
    }
}
