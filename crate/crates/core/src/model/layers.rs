use rand::RngCore;

use super::{GruIds, LstmIds};
use crate::tensor::{Graph, Real, TensorError, Var};

/// Training mode samples dropout masks from the given generator; evaluation
/// mode disables dropout.
pub enum Mode<'r> {
    Train(&'r mut dyn RngCore),
    Eval,
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    pub(crate) fn dropout<T: Real>(&mut self, g: &mut Graph<'_, T>, x: Var, rate: f64) -> Result<Var, TensorError> {
        match self {
            Mode::Train(rng) => g.dropout_sampled(x, rate, rng),
            Mode::Eval => Ok(x),
        }
    }
}

/// One LSTM step with gates ordered input, forget, candidate, output.
/// Returns the new hidden and cell states.
pub fn lstm_step<T: Real>(
    g: &mut Graph<'_, T>,
    ids: &LstmIds,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var), TensorError> {
    let hidden = g.shape(h).1;
    let (w_input, w_hidden, bias) = (g.param(ids.w_input), g.param(ids.w_hidden), g.param(ids.bias));
    let from_input = g.linear(x, w_input, bias)?;
    let from_hidden = g.matmul_nt(h, w_hidden)?;
    let gates = g.add(from_input, from_hidden)?;

    let i = g.slice_cols(gates, 0, hidden)?;
    let i = g.sigmoid(i)?;
    let f = g.slice_cols(gates, hidden, 2 * hidden)?;
    let f = g.sigmoid(f)?;
    let cand = g.slice_cols(gates, 2 * hidden, 3 * hidden)?;
    let cand = g.tanh(cand)?;
    let o = g.slice_cols(gates, 3 * hidden, 4 * hidden)?;
    let o = g.sigmoid(o)?;

    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c_next = g.add(keep, write)?;
    let squashed = g.tanh(c_next)?;
    let h_next = g.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// One GRU step: `s' = (1 - z) * n + z * s` with
/// `n = tanh(W_n x + U_n (r * s) + b_n)`.
pub fn gru_step<T: Real>(g: &mut Graph<'_, T>, ids: &GruIds, x: Var, s: Var) -> Result<Var, TensorError> {
    let hidden = g.shape(s).1;
    let (w_input, w_gates, w_cand, bias) = (
        g.param(ids.w_input),
        g.param(ids.w_gates_hidden),
        g.param(ids.w_candidate_hidden),
        g.param(ids.bias),
    );
    let from_input = g.linear(x, w_input, bias)?;
    let from_state = g.matmul_nt(s, w_gates)?;

    let zi = g.slice_cols(from_input, 0, hidden)?;
    let zh = g.slice_cols(from_state, 0, hidden)?;
    let z = g.add(zi, zh)?;
    let z = g.sigmoid(z)?;
    let ri = g.slice_cols(from_input, hidden, 2 * hidden)?;
    let rh = g.slice_cols(from_state, hidden, 2 * hidden)?;
    let r = g.add(ri, rh)?;
    let r = g.sigmoid(r)?;

    let reset = g.mul(r, s)?;
    let ni = g.slice_cols(from_input, 2 * hidden, 3 * hidden)?;
    let nh = g.matmul_nt(reset, w_cand)?;
    let n = g.add(ni, nh)?;
    let n = g.tanh(n)?;

    let diff = g.sub(s, n)?;
    let gated = g.mul(z, diff)?;
    g.add(n, gated)
}
