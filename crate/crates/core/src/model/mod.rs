//! The GRU session encoder and its three scoring heads.
//!
//! All heads share the same input embedding and GRU cell; they differ in
//! how the final hidden state `h` becomes a session representation and how
//! that representation scores an item:
//!
//! | head   | session          | item row          | score            |
//! |--------|------------------|-------------------|------------------|
//! | vector | `(h, 1)`         | `(W_i, b_i)`      | inner product    |
//! | fc     | `Dᵀh + c`        | `(W_i, b_i)`      | inner product    |
//! | matrix | `A = reshape(h)` | `y = embed(W_i)`  | `yᵀAy`           |

mod gru;
mod head;
mod shape;
mod tensor;

pub use gru::{gru_step, GruParams};
pub use head::{half_plane_embed, score_row, SessionEmbedding, HALF_PLANE_CLAMP};
pub use shape::{format_parameter_table, HeadKind, ModelShape, ParamRow};
pub use tensor::Tensor;

pub(crate) use gru::{gru_backward, gru_forward, sigmoid};
pub(crate) use head::{dot, embed_last_derivative, embed_last_in_place, extended_dot};
pub(crate) use tensor::{affine, affine_backward};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_shape, Error, Result};
use crate::index::ItemMatrix;
use crate::real::Real;
use crate::symmat::packed_quadratic_form;

const EMBEDDING_INIT_RANGE: f64 = 0.05;

/// Trigger (input) and item (output) embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<T> {
    /// `V × d_in`.
    pub trigger: Tensor<T>,
    /// `V × d_out`.
    pub output: Tensor<T>,
    /// Length `V`; absent for the matrix head.
    pub output_bias: Option<Tensor<T>>,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn vocab_size(&self) -> usize {
        self.trigger.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    /// `h × order(order+1)/2`.
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Every trainable tensor of a session model.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub embeddings: EmbeddingTable<T>,
    pub dense: Option<DenseLayer<T>>,
    pub gru: GruParams<T>,
}

impl<T: Real> Params<T> {
    pub fn zeros(shape: &ModelShape) -> Self {
        let tensors = shape.tensor_shapes();
        let get = |name: &str| tensors.iter().find(|(n, _)| *n == name).map(|(_, s)| Tensor::zeros(s));
        Params {
            embeddings: EmbeddingTable {
                trigger: get("input_embedding").unwrap(),
                output: get("softmax_W").unwrap(),
                output_bias: get("softmax_b"),
            },
            dense: get("gru_cell/dense/kernel")
                .map(|kernel| DenseLayer { kernel, bias: get("gru_cell/dense/bias").unwrap() }),
            gru: GruParams::zeros(shape.input_dim, shape.hidden_dim),
        }
    }

    /// Named tensors in the same order as [`ModelShape::tensor_shapes`].
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
        let mut out = vec![("input_embedding", &self.embeddings.trigger), ("softmax_W", &self.embeddings.output)];
        if let Some(b) = &self.embeddings.output_bias {
            out.push(("softmax_b", b));
        }
        if let Some(d) = &self.dense {
            out.push(("gru_cell/dense/kernel", &d.kernel));
            out.push(("gru_cell/dense/bias", &d.bias));
        }
        out.extend([
            ("gru_cell/gates/kernel", &self.gru.gates_kernel),
            ("gru_cell/gates/bias", &self.gru.gates_bias),
            ("gru_cell/candidate/kernel", &self.gru.candidate_kernel),
            ("gru_cell/candidate/bias", &self.gru.candidate_bias),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        let mut out: Vec<(&'static str, &mut Tensor<T>)> =
            vec![("input_embedding", &mut self.embeddings.trigger), ("softmax_W", &mut self.embeddings.output)];
        if let Some(b) = &mut self.embeddings.output_bias {
            out.push(("softmax_b", b));
        }
        if let Some(d) = &mut self.dense {
            out.push(("gru_cell/dense/kernel", &mut d.kernel));
            out.push(("gru_cell/dense/bias", &mut d.bias));
        }
        out.extend([
            ("gru_cell/gates/kernel", &mut self.gru.gates_kernel),
            ("gru_cell/gates/bias", &mut self.gru.gates_bias),
            ("gru_cell/candidate/kernel", &mut self.gru.candidate_kernel),
            ("gru_cell/candidate/bias", &mut self.gru.candidate_bias),
        ]);
        out
    }

    pub fn fill_zero(&mut self) {
        self.tensors_mut().into_iter().for_each(|(_, t)| t.fill_zero());
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            embeddings: EmbeddingTable {
                trigger: self.embeddings.trigger.cast(),
                output: self.embeddings.output.cast(),
                output_bias: self.embeddings.output_bias.as_ref().map(Tensor::cast),
            },
            dense: self.dense.as_ref().map(|d| DenseLayer { kernel: d.kernel.cast(), bias: d.bias.cast() }),
            gru: GruParams {
                gates_kernel: self.gru.gates_kernel.cast(),
                gates_bias: self.gru.gates_bias.cast(),
                candidate_kernel: self.gru.candidate_kernel.cast(),
                candidate_bias: self.gru.candidate_bias.cast(),
            },
        }
    }
}

/// A session model: shape plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    shape: ModelShape,
    params: Params<T>,
}

fn uniform_fill<T: Real>(t: &mut Tensor<T>, range: f64, rng: &mut ChaCha8Rng) {
    t.data_mut().iter_mut().for_each(|x| *x = T::of(rng.gen_range(-range..range)));
}

fn glorot_range(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl<T: Real> Model<T> {
    /// Seeded initialization: embeddings `U(±0.05)`, kernels Glorot-uniform, biases zero.
    pub fn new(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut params = Params::zeros(&shape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        uniform_fill(&mut params.embeddings.trigger, EMBEDDING_INIT_RANGE, &mut rng);
        uniform_fill(&mut params.embeddings.output, EMBEDDING_INIT_RANGE, &mut rng);
        if let Some(d) = &mut params.dense {
            let r = glorot_range(d.kernel.rows(), d.kernel.cols());
            uniform_fill(&mut d.kernel, r, &mut rng);
        }
        for k in [&mut params.gru.gates_kernel, &mut params.gru.candidate_kernel] {
            let r = glorot_range(k.rows(), k.cols());
            uniform_fill(k, r, &mut rng);
        }
        Ok(Model { shape, params })
    }

    /// Wraps existing parameters after checking every tensor shape.
    pub fn from_params(shape: ModelShape, params: Params<T>) -> Result<Self> {
        shape.validate()?;
        let want = shape.tensor_shapes();
        let got = params.tensors();
        ensure_shape!(want.len() == got.len(), "expected {} tensors, got {}", want.len(), got.len());
        for ((wn, ws), (gn, gt)) in want.iter().zip(&got) {
            ensure_shape!(wn == gn && ws.as_slice() == gt.shape(), "tensor {gn} {:?} where {wn} {ws:?} expected", gt.shape());
        }
        Ok(Model { shape, params })
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.shape.vocab_size
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model { shape: self.shape, params: self.params.cast() }
    }

    fn check_item(&self, item: u32) -> Result<usize> {
        let i = item as usize;
        if i >= self.shape.vocab_size {
            return Err(Error::Index(format!("item {item} outside vocabulary of {}", self.shape.vocab_size)));
        }
        Ok(i)
    }

    pub fn initial_hidden(&self) -> Vec<T> {
        vec![T::zero(); self.shape.hidden_dim]
    }

    /// Feeds one clicked item through the GRU.
    pub fn step(&self, item: u32, hidden: &[T]) -> Result<Vec<T>> {
        let i = self.check_item(item)?;
        gru_step(&self.params.gru, self.params.embeddings.trigger.row(i), hidden)
    }

    /// Hidden state after reading `items` from a fresh session.
    pub fn encode(&self, items: &[u32]) -> Result<Vec<T>> {
        items.iter().try_fold(self.initial_hidden(), |h, &item| self.step(item, &h))
    }

    pub fn session_embedding(&self, hidden: &[T]) -> Result<SessionEmbedding<T>> {
        ensure_shape!(hidden.len() == self.shape.hidden_dim, "hidden {} vs {}", hidden.len(), self.shape.hidden_dim);
        Ok(match self.shape.head {
            HeadKind::Vector => {
                let mut ext = hidden.to_vec();
                ext.push(T::one());
                SessionEmbedding::Vector(ext)
            }
            HeadKind::Fc { .. } => {
                let dense = self.params.dense.as_ref().expect("fc head has a dense layer");
                let mut out = vec![T::zero(); dense.bias.len()];
                affine(hidden, &dense.kernel, dense.bias.data(), &mut out);
                SessionEmbedding::Fc(out)
            }
            HeadKind::Matrix { .. } => SessionEmbedding::Matrix(hidden.to_vec()),
        })
    }

    fn bias(&self, i: usize) -> Option<T> {
        self.params.embeddings.output_bias.as_ref().map(|b| b.data()[i])
    }

    pub fn score(&self, session: &SessionEmbedding<T>, item: u32) -> Result<T> {
        let i = self.check_item(item)?;
        score_row(session, self.params.embeddings.output.row(i), self.bias(i))
    }

    /// Scores of every item, in item order.
    pub fn score_all(&self, session: &SessionEmbedding<T>) -> Result<Vec<T>> {
        let table = &self.params.embeddings;
        let v = self.shape.vocab_size;
        match session {
            SessionEmbedding::Matrix(packed) => {
                ensure_shape!(packed.len() == self.shape.hidden_dim, "session matrix width {}", packed.len());
                let mut y = vec![T::zero(); self.shape.output_dim()];
                Ok((0..v)
                    .map(|i| {
                        y.copy_from_slice(table.output.row(i));
                        embed_last_in_place(&mut y);
                        packed_quadratic_form(packed, &y)
                    })
                    .collect())
            }
            _ => (0..v).map(|i| score_row(session, table.output.row(i), self.bias(i))).collect(),
        }
    }

    /// The item vector the head scores against: half-plane embedded for the matrix head.
    pub fn embedded_item(&self, item: u32) -> Result<Vec<T>> {
        let i = self.check_item(item)?;
        let row = self.params.embeddings.output.row(i);
        match self.shape.head {
            HeadKind::Matrix { .. } => half_plane_embed(row),
            _ => Ok(row.to_vec()),
        }
    }

    /// 64-bit scoring table over all items.
    pub fn scorer(&self) -> ItemScorer {
        let table = &self.params.embeddings;
        let width = self.shape.output_dim();
        let mut rows: Vec<f64> = table.output.data().iter().map(|x| x.f64()).collect();
        if let HeadKind::Matrix { .. } = self.shape.head {
            let mut y = vec![T::zero(); width];
            for (i, chunk) in rows.chunks_mut(width).enumerate() {
                y.copy_from_slice(table.output.row(i));
                embed_last_in_place(&mut y);
                chunk.iter_mut().zip(&y).for_each(|(c, v)| *c = v.f64());
            }
        }
        ItemScorer {
            width,
            rows,
            bias: table.output_bias.as_ref().map(|b| b.data().iter().map(|x| x.f64()).collect()),
        }
    }

    /// Embedded item vectors for building a match index (matrix head only).
    pub fn item_matrix(&self) -> Result<ItemMatrix> {
        let HeadKind::Matrix { order } = self.shape.head else {
            return Err(Error::Input(format!("{} head has no quadratic-form index", self.shape.head.name())));
        };
        let scorer = self.scorer();
        ItemMatrix::new(order, scorer.rows, (0..self.shape.vocab_size as u32).collect())
    }
}

/// Item rows held in 64-bit for evaluation, with the half-plane map already applied.
#[derive(Clone, Debug)]
pub struct ItemScorer {
    width: usize,
    rows: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl ItemScorer {
    pub fn len(&self) -> usize {
        self.rows.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    pub fn scores_into(&self, session: &SessionEmbedding<f64>, out: &mut Vec<f64>) {
        out.clear();
        let rows = self.rows.chunks(self.width);
        match session {
            SessionEmbedding::Vector(ext) => {
                let bias = self.bias.as_deref().unwrap_or(&[]);
                out.extend(rows.enumerate().map(|(i, r)| extended_dot(ext, r, bias.get(i).copied().unwrap_or(0.0))))
            }
            SessionEmbedding::Fc(e) => {
                let bias = self.bias.as_deref().unwrap_or(&[]);
                out.extend(rows.enumerate().map(|(i, r)| dot(e, r) + bias.get(i).copied().unwrap_or(0.0)))
            }
            SessionEmbedding::Matrix(packed) => out.extend(rows.map(|r| packed_quadratic_form(packed, r))),
        }
    }

    pub fn scores(&self, session: &SessionEmbedding<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.scores_into(session, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::{gamma1, gamma2};

    #[test]
    fn published_parameter_totals() {
        assert_eq!(ModelShape::vector(37958, 32, 64).parameter_count(), 3_700_550);
        assert_eq!(ModelShape::fc(37958, 32, 10, 10).parameter_count(), 3_342_199);
        assert_eq!(ModelShape::matrix(37958, 32, 32).parameter_count(), 3_317_936);
        assert_eq!(ModelShape::vector(200668, 32, 64).parameter_count(), 19_483_420);
        assert_eq!(ModelShape::fc(200668, 32, 10, 10).parameter_count(), 17_660_679);
        assert_eq!(ModelShape::matrix(200668, 32, 32).parameter_count(), 13_731_376);
    }

    #[test]
    fn tensors_follow_shape_order() {
        for shape in [ModelShape::vector(7, 3, 4), ModelShape::fc(7, 3, 4, 3), ModelShape::matrix(7, 3, 3)] {
            let p = Params::<f32>::zeros(&shape);
            let names: Vec<_> = p.tensors().iter().map(|(n, t)| (*n, t.shape().to_vec())).collect();
            assert_eq!(names, shape.tensor_shapes());
        }
    }

    #[test]
    fn session_embedding_per_head() {
        let v = Model::<f64>::new(ModelShape::vector(3, 2, 2), 0).unwrap();
        assert_eq!(v.session_embedding(&[2.0, 3.0]).unwrap(), SessionEmbedding::Vector(vec![2.0, 3.0, 1.0]));

        let m = Model::<f64>::new(ModelShape::matrix(3, 2, 2), 0).unwrap();
        let s = m.session_embedding(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.to_sym_matrix().unwrap().to_dense(), vec![1.0, 2.0, 2.0, 3.0]);

        let mut f = Model::<f64>::new(ModelShape::fc(3, 2, 2, 2), 0).unwrap();
        let dense = f.params_mut().dense.as_mut().unwrap();
        dense.kernel.fill_zero();
        dense.bias.data_mut().copy_from_slice(&[0.5, -1.0, 2.0]);
        assert_eq!(f.session_embedding(&[9.0, -4.0]).unwrap(), SessionEmbedding::Fc(vec![0.5, -1.0, 2.0]));
    }

    #[test]
    fn vector_head_matches_fc_softmax_layer() {
        // Scoring through (h,1)·(W_i,b_i) equals the affine layer W·h + b row by row.
        let m = Model::<f64>::new(ModelShape::vector(9, 3, 4), 11).unwrap();
        let mut p = m.params().clone();
        p.embeddings.output_bias.as_mut().unwrap().data_mut().iter_mut().enumerate().for_each(|(i, b)| *b = i as f64 * 0.1);
        let m = Model::from_params(*m.shape(), p).unwrap();
        let h = m.encode(&[1, 4, 2]).unwrap();
        let s = m.session_embedding(&h).unwrap();
        let scores = m.score_all(&s).unwrap();
        let w = &m.params().embeddings.output;
        let b = m.params().embeddings.output_bias.as_ref().unwrap();
        for i in 0..9 {
            let fc: f64 = w.row(i).iter().zip(&h).map(|(a, x)| a * x).sum::<f64>() + b.data()[i];
            assert_eq!(scores[i].to_bits(), fc.to_bits());
        }
    }

    #[test]
    fn score_all_matches_pointwise_and_flatten() {
        let m = Model::<f64>::new(ModelShape::matrix(5, 3, 3), 2).unwrap();
        let h = m.encode(&[0, 3, 1]).unwrap();
        let s = m.session_embedding(&h).unwrap();
        let all = m.score_all(&s).unwrap();
        let a = s.to_sym_matrix().unwrap();
        for i in 0..5u32 {
            let one = m.score(&s, i).unwrap();
            assert!((all[i as usize] - one).abs() <= 1e-12);
            let y = m.embedded_item(i).unwrap();
            assert!(*y.last().unwrap() > 0.0);
            let flat: f64 = gamma1(&a).iter().zip(gamma2(&y)).map(|(p, q)| p * q).sum();
            assert_eq!(flat.to_bits(), all[i as usize].to_bits());
        }
        let scorer = m.scorer();
        assert_eq!(scorer.scores(&s), all);
    }

    #[test]
    fn vocab_size_one_reduces_to_score() {
        let m = Model::<f32>::new(ModelShape::fc(1, 2, 3, 2), 4).unwrap();
        let s = m.session_embedding(&m.encode(&[0, 0]).unwrap()).unwrap();
        assert_eq!(m.score_all(&s).unwrap(), vec![m.score(&s, 0).unwrap()]);
    }

    #[test]
    fn out_of_vocab_item_is_rejected() {
        let m = Model::<f32>::new(ModelShape::vector(3, 2, 2), 0).unwrap();
        assert!(matches!(m.step(3, &m.initial_hidden()), Err(Error::Index(_))));
    }

    #[test]
    fn init_is_deterministic() {
        let a = Model::<f32>::new(ModelShape::matrix(10, 4, 3), 99).unwrap();
        let b = Model::<f32>::new(ModelShape::matrix(10, 4, 3), 99).unwrap();
        assert_eq!(a, b);
        assert!(a.params().embeddings.output_bias.is_none());
    }
}
