//! Layers assembled from tape primitives.

use rand::Rng;

use super::{ParamId, ParameterStore, Tape, Var};
use crate::error::Result;

/// Affine map `x W + b` with `W: [input, output]`.
#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Dense {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Dense {
            weight: store.add_uniform(format!("{name}.weight"), input, output, rng)?,
            bias: store.add_zeros(format!("{name}.bias"), &[output])?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParameterStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        tape.linear(x, w, b)
    }

    pub fn output_width(&self, store: &ParameterStore) -> usize {
        store.get(self.bias).len()
    }
}

/// Dense layers with `tanh` between them. The last layer is left linear unless
/// `activate_last` is set.
#[derive(Clone, Debug, Default)]
pub struct DenseStack {
    pub layers: Vec<Dense>,
}

impl DenseStack {
    /// Builds `input -> widths[0] -> widths[1] -> ...`.
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input: usize,
        widths: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            layers.push(Dense::new(store, &format!("{name}.{i}"), prev, w, rng)?);
            prev = w;
        }
        Ok(DenseStack { layers })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        mut x: Var,
        activate_last: bool,
    ) -> Result<Var> {
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, store, x)?;
            if i < last || activate_last {
                x = tape.tanh(x);
            }
        }
        Ok(x)
    }
}

/// Gated recurrent unit weights. Input matrices are `[input, hidden]`,
/// recurrent matrices `[hidden, hidden]`.
#[derive(Clone, Copy, Debug)]
pub struct GruParams {
    pub w_reset: ParamId,
    pub u_reset: ParamId,
    pub b_reset: ParamId,
    pub w_update: ParamId,
    pub u_update: ParamId,
    pub b_update: ParamId,
    pub w_cand: ParamId,
    pub u_cand: ParamId,
    pub b_cand: ParamId,
}

impl GruParams {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut gate =
            |g: &str, store: &mut ParameterStore| -> Result<(ParamId, ParamId, ParamId)> {
                Ok((
                    store.add_uniform(format!("{name}.w_{g}"), input, hidden, rng)?,
                    store.add_uniform(format!("{name}.u_{g}"), hidden, hidden, rng)?,
                    store.add_zeros(format!("{name}.b_{g}"), &[hidden])?,
                ))
            };
        let (w_reset, u_reset, b_reset) = gate("reset", store)?;
        let (w_update, u_update, b_update) = gate("update", store)?;
        let (w_cand, u_cand, b_cand) = gate("cand", store)?;
        Ok(GruParams {
            w_reset,
            u_reset,
            b_reset,
            w_update,
            u_update,
            b_update,
            w_cand,
            u_cand,
            b_cand,
        })
    }

    pub fn hidden(&self, store: &ParameterStore) -> usize {
        store.get(self.b_update).len()
    }
}

/// One GRU step:
///
/// ```text
/// r  = σ(x W_r + h U_r + b_r)
/// u  = σ(x W_u + h U_u + b_u)
/// c  = tanh(x W_c + (r ⊙ h) U_c + b_c)
/// h' = u ⊙ h + (1 − u) ⊙ c
/// ```
pub fn gru_cell(
    tape: &mut Tape,
    store: &ParameterStore,
    params: &GruParams,
    x: Var,
    h_prev: Var,
) -> Result<Var> {
    let mut p = |id| tape.param(store, id);
    let (wr, ur, br) = (p(params.w_reset), p(params.u_reset), p(params.b_reset));
    let (wu, uu, bu) = (p(params.w_update), p(params.u_update), p(params.b_update));
    let (wc, uc, bc) = (p(params.w_cand), p(params.u_cand), p(params.b_cand));

    let gate = |tape: &mut Tape, w, u, b, h| -> Result<Var> {
        let xw = tape.linear(x, w, b)?;
        let hu = tape.matmul(h, u)?;
        tape.add(xw, hu)
    };

    let r_pre = gate(tape, wr, ur, br, h_prev)?;
    let r = tape.sigmoid(r_pre);
    let u_pre = gate(tape, wu, uu, bu, h_prev)?;
    let u = tape.sigmoid(u_pre);
    let rh = tape.mul(r, h_prev)?;
    let c_pre = gate(tape, wc, uc, bc, rh)?;
    let c = tape.tanh(c_pre);

    let keep = tape.mul(u, h_prev)?;
    let one_minus_u = tape.one_minus(u);
    let fresh = tape.mul(one_minus_u, c)?;
    tape.add(keep, fresh)
}
