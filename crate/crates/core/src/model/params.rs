use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{Matrix, Real};
use crate::error::{Error, Result};
use crate::rng::{stream, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// `h' = tanh(W x + U h + b)`
    #[default]
    Elman,
    /// GRU-style cell with reset and update gates.
    Gated,
}

impl CellKind {
    /// Stacked gate blocks per recurrent weight matrix.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Elman => 1,
            CellKind::Gated => 3,
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elman" => Ok(CellKind::Elman),
            "gated" => Ok(CellKind::Gated),
            _ => Err(Error::config(format!("unknown cell {s:?}"))),
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellKind::Elman => "elman",
            CellKind::Gated => "gated",
        })
    }
}

/// Encoder sizes: vocabulary, word embedding, hidden state, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub vocab: usize,
    pub word_dim: usize,
    pub hidden: usize,
    pub out: usize,
}

pub const TENSOR_NAMES: [&str; 6] = [
    "word_embeddings",
    "rnn_input_weights",
    "rnn_recurrent_weights",
    "rnn_bias",
    "proj_weights",
    "proj_bias",
];

/// Trainable encoder tensors.
///
/// Token ids at or above `dims.vocab` are not trainable; each resolves to a
/// frozen embedding derived from `unk_seed` and the id.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub dims: Dims,
    pub cell: CellKind,
    pub unk_seed: u64,
    pub word_embeddings: Matrix<T>,
    /// `(gates * hidden) x word_dim`; gate blocks ordered reset, update, candidate.
    pub rnn_input_weights: Matrix<T>,
    /// `(gates * hidden) x hidden`
    pub rnn_recurrent_weights: Matrix<T>,
    pub rnn_bias: Vec<T>,
    pub proj_weights: Matrix<T>,
    pub proj_bias: Vec<T>,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f32> {
    let a = 1.0 / (cols as f32).sqrt();
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect())
}

/// Uniform `(-a, a)` weights with `a = 1/sqrt(fan_in)`, zero biases.
pub fn init_params(dims: Dims, cell: CellKind, seed: u64) -> Result<EncoderParams<f32>> {
    if dims.vocab == 0 || dims.word_dim == 0 || dims.hidden == 0 || dims.out == 0 {
        return Err(Error::config(format!("all encoder dims must be >= 1, got {dims:?}")));
    }
    let g = cell.gates();
    let mut rng = stream(seed, streams::INIT);
    Ok(EncoderParams {
        dims,
        cell,
        unk_seed: 0,
        word_embeddings: uniform_matrix(&mut rng, dims.vocab, dims.word_dim),
        rnn_input_weights: uniform_matrix(&mut rng, g * dims.hidden, dims.word_dim),
        rnn_recurrent_weights: uniform_matrix(&mut rng, g * dims.hidden, dims.hidden),
        rnn_bias: vec![0.0; g * dims.hidden],
        proj_weights: uniform_matrix(&mut rng, dims.out, dims.hidden),
        proj_bias: vec![0.0; dims.out],
    })
}

impl<T: Real> EncoderParams<T> {
    pub fn shapes(&self) -> [Vec<usize>; 6] {
        let g = self.cell.gates();
        let Dims {
            vocab,
            word_dim,
            hidden,
            out,
        } = self.dims;
        [
            vec![vocab, word_dim],
            vec![g * hidden, word_dim],
            vec![g * hidden, hidden],
            vec![g * hidden],
            vec![out, hidden],
            vec![out],
        ]
    }

    /// Flat views in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[T]; 6] {
        [
            self.word_embeddings.as_slice(),
            self.rnn_input_weights.as_slice(),
            self.rnn_recurrent_weights.as_slice(),
            &self.rnn_bias,
            self.proj_weights.as_slice(),
            &self.proj_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [T]; 6] {
        [
            self.word_embeddings.as_mut_slice(),
            self.rnn_input_weights.as_mut_slice(),
            self.rnn_recurrent_weights.as_mut_slice(),
            &mut self.rnn_bias,
            self.proj_weights.as_mut_slice(),
            &mut self.proj_bias,
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Rebuilds parameters from flat tensors in [`TENSOR_NAMES`] order.
    pub fn from_tensors(dims: Dims, cell: CellKind, unk_seed: u64, tensors: [Vec<T>; 6]) -> Result<Self> {
        let g = cell.gates();
        let [emb, wih, whh, b, wp, bp] = tensors;
        let expect = |t: &Vec<T>, n: usize, name: &str| -> Result<()> {
            if t.len() != n {
                return Err(Error::data(format!("tensor {name} has {} values, expected {n}", t.len())));
            }
            Ok(())
        };
        expect(&emb, dims.vocab * dims.word_dim, TENSOR_NAMES[0])?;
        expect(&wih, g * dims.hidden * dims.word_dim, TENSOR_NAMES[1])?;
        expect(&whh, g * dims.hidden * dims.hidden, TENSOR_NAMES[2])?;
        expect(&b, g * dims.hidden, TENSOR_NAMES[3])?;
        expect(&wp, dims.out * dims.hidden, TENSOR_NAMES[4])?;
        expect(&bp, dims.out, TENSOR_NAMES[5])?;
        Ok(EncoderParams {
            dims,
            cell,
            unk_seed,
            word_embeddings: Matrix::from_vec(dims.vocab, dims.word_dim, emb),
            rnn_input_weights: Matrix::from_vec(g * dims.hidden, dims.word_dim, wih),
            rnn_recurrent_weights: Matrix::from_vec(g * dims.hidden, dims.hidden, whh),
            rnn_bias: b,
            proj_weights: Matrix::from_vec(dims.out, dims.hidden, wp),
            proj_bias: bp,
        })
    }

    pub fn cast<U: Real>(&self) -> EncoderParams<U> {
        let conv = |x: T| U::from(x).expect("finite parameter");
        EncoderParams {
            dims: self.dims,
            cell: self.cell,
            unk_seed: self.unk_seed,
            word_embeddings: self.word_embeddings.map(conv),
            rnn_input_weights: self.rnn_input_weights.map(conv),
            rnn_recurrent_weights: self.rnn_recurrent_weights.map(conv),
            rnn_bias: self.rnn_bias.iter().map(|&x| conv(x)).collect(),
            proj_weights: self.proj_weights.map(conv),
            proj_bias: self.proj_bias.iter().map(|&x| conv(x)).collect(),
        }
    }

    /// Embedding for `id`: a trainable row, or the frozen row of an out-of-vocabulary id.
    pub fn embedding(&self, id: usize) -> Cow<'_, [T]> {
        if id < self.dims.vocab {
            return Cow::Borrowed(self.word_embeddings.row(id));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.unk_seed ^ (id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.set_stream(streams::INIT);
        let a = 1.0 / (self.dims.word_dim as f32).sqrt();
        Cow::Owned(
            (0..self.dims.word_dim)
                .map(|_| T::from(rng.random_range(-a..=a)).expect("finite"))
                .collect(),
        )
    }

    /// Frobenius norm of each tensor, by name.
    pub fn layer_norms(&self) -> BTreeMap<&'static str, f64> {
        TENSOR_NAMES
            .iter()
            .zip(self.tensors())
            .map(|(&name, t)| {
                let ss: f64 = t.iter().map(|x| x.to_f64().unwrap().powi(2)).sum();
                (name, ss.sqrt())
            })
            .collect()
    }
}

/// Gradients shaped like [`EncoderParams`]; embedding rows are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub embedding_rows: BTreeMap<usize, Vec<T>>,
    pub rnn_input_weights: Matrix<T>,
    pub rnn_recurrent_weights: Matrix<T>,
    pub rnn_bias: Vec<T>,
    pub proj_weights: Matrix<T>,
    pub proj_bias: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(p: &EncoderParams<T>) -> Self {
        Gradients {
            embedding_rows: BTreeMap::new(),
            rnn_input_weights: Matrix::zeros(p.rnn_input_weights.rows(), p.rnn_input_weights.cols()),
            rnn_recurrent_weights: Matrix::zeros(p.rnn_recurrent_weights.rows(), p.rnn_recurrent_weights.cols()),
            rnn_bias: vec![T::zero(); p.rnn_bias.len()],
            proj_weights: Matrix::zeros(p.proj_weights.rows(), p.proj_weights.cols()),
            proj_bias: vec![T::zero(); p.proj_bias.len()],
        }
    }

    fn dense(&self) -> [&[T]; 5] {
        [
            self.rnn_input_weights.as_slice(),
            self.rnn_recurrent_weights.as_slice(),
            &self.rnn_bias,
            self.proj_weights.as_slice(),
            &self.proj_bias,
        ]
    }

    fn dense_mut(&mut self) -> [&mut [T]; 5] {
        [
            self.rnn_input_weights.as_mut_slice(),
            self.rnn_recurrent_weights.as_mut_slice(),
            &mut self.rnn_bias,
            self.proj_weights.as_mut_slice(),
            &mut self.proj_bias,
        ]
    }

    /// Dense views of the non-embedding tensors, in [`TENSOR_NAMES`] order from index 1.
    pub fn dense_tensors(&self) -> [&[T]; 5] {
        self.dense()
    }

    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (row, g) in &other.embedding_rows {
            let dst = self
                .embedding_rows
                .entry(*row)
                .or_insert_with(|| vec![T::zero(); g.len()]);
            super::tensor::add_assign(dst, g);
        }
        for (dst, src) in self.dense_mut().into_iter().zip(other.dense()) {
            super::tensor::add_assign(dst, src);
        }
    }

    pub fn scale(&mut self, s: T) {
        for row in self.embedding_rows.values_mut() {
            row.iter_mut().for_each(|x| *x = *x * s);
        }
        for t in self.dense_mut() {
            t.iter_mut().for_each(|x| *x = *x * s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.embedding_rows.values().all(|r| r.iter().all(|x| x.is_finite()))
            && self.dense().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.embedding_rows.values().all(|r| r.iter().all(|x| x.is_zero()))
            && self.dense().iter().all(|t| t.iter().all(|x| x.is_zero()))
    }

    /// Gradient of one flat coordinate of tensor `tensor` (index into [`TENSOR_NAMES`]).
    pub fn coordinate(&self, tensor: usize, index: usize, word_dim: usize) -> T {
        if tensor == 0 {
            let (row, col) = (index / word_dim, index % word_dim);
            return self.embedding_rows.get(&row).map_or(T::zero(), |r| r[col]);
        }
        self.dense()[tensor - 1][index]
    }
}
