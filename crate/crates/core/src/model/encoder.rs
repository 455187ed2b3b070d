//! Command encoder: embedding lookup, recurrent cell, linear projection.
//! Backward is exact backpropagation through time.

use super::params::{CellKind, EncoderParams, Gradients};
use super::tensor::{add_assign, sigmoid, Real};
use crate::error::{Error, Result};

/// Per-step gate activations of the gated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCache<T> {
    pub reset: Vec<T>,
    pub update: Vec<T>,
    pub candidate: Vec<T>,
    /// `reset * h_prev`
    pub reset_hidden: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache<T> {
    pub token_ids: Vec<usize>,
    pub inputs: Vec<Vec<T>>,
    /// `h_0 .. h_T`; `h_0` is zero.
    pub hidden: Vec<Vec<T>>,
    /// Elman: the pre-activations. Gated: empty.
    pub preactivations: Vec<Vec<T>>,
    /// Gated cell only.
    pub gates: Vec<GateCache<T>>,
    pub output: Vec<T>,
}

/// Encodes `token_ids` into a `dims.out` vector.
pub fn encoder_forward<T: Real>(params: &EncoderParams<T>, token_ids: &[usize]) -> Result<(Vec<T>, ForwardCache<T>)> {
    if token_ids.is_empty() {
        return Err(Error::data("cannot encode an empty token sequence"));
    }
    let h = params.dims.hidden;
    let mut cache = ForwardCache {
        token_ids: token_ids.to_vec(),
        inputs: Vec::with_capacity(token_ids.len()),
        hidden: vec![vec![T::zero(); h]],
        preactivations: Vec::new(),
        gates: Vec::new(),
        output: Vec::new(),
    };
    for &id in token_ids {
        let x = params.embedding(id).into_owned();
        let prev = cache.hidden.last().expect("h_0 present");
        let next = match params.cell {
            CellKind::Elman => {
                let mut a = params.rnn_bias.clone();
                params.rnn_input_weights.matvec_acc(0, &x, &mut a);
                params.rnn_recurrent_weights.matvec_acc(0, prev, &mut a);
                let next = a.iter().map(|v| v.tanh()).collect();
                cache.preactivations.push(a);
                next
            }
            CellKind::Gated => {
                let (gates, next) = gated_step(params, &x, prev);
                cache.gates.push(gates);
                next
            }
        };
        cache.inputs.push(x);
        cache.hidden.push(next);
    }
    let mut out = params.proj_bias.clone();
    params
        .proj_weights
        .matvec_acc(0, cache.hidden.last().expect("non-empty"), &mut out);
    cache.output = out.clone();
    Ok((out, cache))
}

fn gated_step<T: Real>(p: &EncoderParams<T>, x: &[T], prev: &[T]) -> (GateCache<T>, Vec<T>) {
    let h = p.dims.hidden;
    let block = |k: usize, hidden_in: &[T], act: fn(T) -> T| -> Vec<T> {
        let mut a = p.rnn_bias[k * h..(k + 1) * h].to_vec();
        p.rnn_input_weights.matvec_acc(k * h, x, &mut a);
        p.rnn_recurrent_weights.matvec_acc(k * h, hidden_in, &mut a);
        a.into_iter().map(act).collect()
    };
    let reset = block(0, prev, sigmoid);
    let update = block(1, prev, sigmoid);
    let reset_hidden: Vec<T> = reset.iter().zip(prev).map(|(&r, &hp)| r * hp).collect();
    let candidate = block(2, &reset_hidden, |v| v.tanh());
    let next = (0..h)
        .map(|i| (T::one() - update[i]) * candidate[i] + update[i] * prev[i])
        .collect();
    (
        GateCache {
            reset,
            update,
            candidate,
            reset_hidden,
        },
        next,
    )
}

/// Gradients of a scalar loss given its gradient `grad_output` w.r.t. the encoder output.
pub fn encoder_backward<T: Real>(params: &EncoderParams<T>, cache: &ForwardCache<T>, grad_output: &[T]) -> Gradients<T> {
    let h = params.dims.hidden;
    let mut grads = Gradients::zeros_like(params);
    let steps = cache.token_ids.len();

    add_assign(&mut grads.proj_bias, grad_output);
    grads.proj_weights.add_outer(0, grad_output, &cache.hidden[steps]);
    let mut dh = vec![T::zero(); h];
    params.proj_weights.matvec_t_acc(0, grad_output, &mut dh);

    for t in (0..steps).rev() {
        let x = &cache.inputs[t];
        let prev = &cache.hidden[t];
        let mut dx = vec![T::zero(); params.dims.word_dim];
        let mut dprev = vec![T::zero(); h];
        match params.cell {
            CellKind::Elman => {
                let da: Vec<T> = dh
                    .iter()
                    .zip(&cache.hidden[t + 1])
                    .map(|(&g, &ht)| g * (T::one() - ht * ht))
                    .collect();
                grads.rnn_input_weights.add_outer(0, &da, x);
                grads.rnn_recurrent_weights.add_outer(0, &da, prev);
                add_assign(&mut grads.rnn_bias, &da);
                params.rnn_input_weights.matvec_t_acc(0, &da, &mut dx);
                params.rnn_recurrent_weights.matvec_t_acc(0, &da, &mut dprev);
            }
            CellKind::Gated => {
                let g = &cache.gates[t];
                let mut d_update = vec![T::zero(); h];
                let mut d_cand_pre = vec![T::zero(); h];
                for i in 0..h {
                    let z = g.update[i];
                    let n = g.candidate[i];
                    dprev[i] = dh[i] * z;
                    d_update[i] = dh[i] * (prev[i] - n) * z * (T::one() - z);
                    d_cand_pre[i] = dh[i] * (T::one() - z) * (T::one() - n * n);
                }
                // candidate block (rows 2h..3h) sees reset * h_prev
                let mut d_reset_hidden = vec![T::zero(); h];
                grads.rnn_input_weights.add_outer(2 * h, &d_cand_pre, x);
                grads.rnn_recurrent_weights.add_outer(2 * h, &d_cand_pre, &g.reset_hidden);
                add_assign(&mut grads.rnn_bias[2 * h..], &d_cand_pre);
                params.rnn_input_weights.matvec_t_acc(2 * h, &d_cand_pre, &mut dx);
                params.rnn_recurrent_weights.matvec_t_acc(2 * h, &d_cand_pre, &mut d_reset_hidden);
                let mut d_reset_pre = vec![T::zero(); h];
                for i in 0..h {
                    let r = g.reset[i];
                    dprev[i] = dprev[i] + d_reset_hidden[i] * r;
                    d_reset_pre[i] = d_reset_hidden[i] * prev[i] * r * (T::one() - r);
                }
                for (k, d) in [(0, &d_reset_pre), (1, &d_update)] {
                    grads.rnn_input_weights.add_outer(k * h, d, x);
                    grads.rnn_recurrent_weights.add_outer(k * h, d, prev);
                    add_assign(&mut grads.rnn_bias[k * h..(k + 1) * h], d);
                    params.rnn_input_weights.matvec_t_acc(k * h, d, &mut dx);
                    params.rnn_recurrent_weights.matvec_t_acc(k * h, d, &mut dprev);
                }
            }
        }
        let id = cache.token_ids[t];
        if id < params.dims.vocab {
            let row = grads
                .embedding_rows
                .entry(id)
                .or_insert_with(|| vec![T::zero(); params.dims.word_dim]);
            add_assign(row, &dx);
        }
        dh = dprev;
    }
    grads
}
