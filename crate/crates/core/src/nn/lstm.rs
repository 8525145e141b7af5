//! Long short-term memory cell.
//!
//! Gate pre-activations are `z = x·Wx + h·Wh + b`, laid out in four column
//! blocks `[i | f | g | o]` of width `H`:
//!
//! ```text
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use super::layers::sigmoid;
use super::params::{glorot, ParameterSet};

/// Borrowed weights of one cell, resolved from a [`ParameterSet`] by prefix.
#[derive(Clone, Copy)]
pub struct LstmWeights<'a> {
    pub wx: &'a Array2<f64>,
    pub wh: &'a Array2<f64>,
    pub b: &'a Array2<f64>,
}

impl<'a> LstmWeights<'a> {
    pub fn from_params(params: &'a ParameterSet, prefix: &str) -> Self {
        LstmWeights {
            wx: params.get(&format!("{prefix}.wx")),
            wh: params.get(&format!("{prefix}.wh")),
            b: params.get(&format!("{prefix}.b")),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.nrows()
    }

    pub fn input(&self) -> usize {
        self.wx.nrows()
    }
}

/// Gradient accumulators matching [`LstmWeights`].
pub struct LstmGrads<'a> {
    pub wx: &'a mut Array2<f64>,
    pub wh: &'a mut Array2<f64>,
    pub b: &'a mut Array2<f64>,
}

/// Adds `{prefix}.wx`, `{prefix}.wh`, `{prefix}.b` with forget-gate bias 1.
pub fn init_lstm(
    params: &mut ParameterSet,
    rng: &mut impl Rng,
    prefix: &str,
    input: usize,
    hidden: usize,
) {
    params.insert(format!("{prefix}.wx"), glorot(rng, input, 4 * hidden));
    params.insert(format!("{prefix}.wh"), glorot(rng, hidden, 4 * hidden));
    let mut b = Array2::zeros((1, 4 * hidden));
    b.slice_mut(s![.., hidden..2 * hidden]).fill(1.0);
    params.insert(format!("{prefix}.b"), b);
}

pub fn lstm_grads<'a>(grads: &'a mut ParameterSet, prefix: &str) -> LstmGrads<'a> {
    let [wx, wh, b] = grads.get_many_mut([
        &format!("{prefix}.wx"),
        &format!("{prefix}.wh"),
        &format!("{prefix}.b"),
    ]);
    LstmGrads { wx, wh, b }
}

#[derive(Clone, Debug)]
pub struct LstmState {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LstmState {
            h: Array2::zeros((batch, hidden)),
            c: Array2::zeros((batch, hidden)),
        }
    }

    /// Rows of the state for the given batch indices.
    pub fn select(&self, rows: &[usize]) -> LstmState {
        LstmState {
            h: self.h.select(ndarray::Axis(0), rows),
            c: self.c.select(ndarray::Axis(0), rows),
        }
    }
}

/// Everything the backward pass needs from one forward step.
pub struct LstmStepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

pub fn lstm_step(w: LstmWeights, x: &ArrayView2<f64>, state: &LstmState) -> (LstmState, LstmStepCache) {
    let hd = w.hidden();
    let z = x.dot(w.wx) + state.h.dot(w.wh) + w.b;
    let i = z.slice(s![.., 0..hd]).mapv(sigmoid);
    let f = z.slice(s![.., hd..2 * hd]).mapv(sigmoid);
    let g = z.slice(s![.., 2 * hd..3 * hd]).mapv(f64::tanh);
    let o = z.slice(s![.., 3 * hd..4 * hd]).mapv(sigmoid);
    let c = &f * &state.c + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    let cache = LstmStepCache {
        x: x.to_owned(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    (LstmState { h, c }, cache)
}

/// Forward step without keeping a cache (inference).
pub fn lstm_step_infer(w: LstmWeights, x: &ArrayView2<f64>, state: &LstmState) -> LstmState {
    lstm_step(w, x, state).0
}

/// Backpropagates `dh`, `dc` (gradients w.r.t. this step's outputs) through one
/// step. Returns `(dx, dh_prev, dc_prev)` and accumulates weight gradients.
pub fn lstm_step_backward(
    w: LstmWeights,
    cache: &LstmStepCache,
    dh: &Array2<f64>,
    dc: &Array2<f64>,
    grads: &mut LstmGrads,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let hd = w.hidden();
    let d_o = dh * &cache.tanh_c;
    let dc_total = dc + &(dh * &cache.o * &cache.tanh_c.mapv(|t| 1.0 - t * t));
    let d_i = &dc_total * &cache.g;
    let d_g = &dc_total * &cache.i;
    let d_f = &dc_total * &cache.c_prev;
    let dc_prev = &dc_total * &cache.f;

    let batch = dh.nrows();
    let mut dz = Array2::zeros((batch, 4 * hd));
    dz.slice_mut(s![.., 0..hd])
        .assign(&(&d_i * &cache.i.mapv(|v| v * (1.0 - v))));
    dz.slice_mut(s![.., hd..2 * hd])
        .assign(&(&d_f * &cache.f.mapv(|v| v * (1.0 - v))));
    dz.slice_mut(s![.., 2 * hd..3 * hd])
        .assign(&(&d_g * &cache.g.mapv(|v| 1.0 - v * v)));
    dz.slice_mut(s![.., 3 * hd..4 * hd])
        .assign(&(&d_o * &cache.o.mapv(|v| v * (1.0 - v))));

    *grads.wx += &cache.x.t().dot(&dz);
    *grads.wh += &cache.h_prev.t().dot(&dz);
    *grads.b += &dz.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0));
    let dx = dz.dot(&w.wx.t());
    let dh_prev = dz.dot(&w.wh.t());
    (dx, dh_prev, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_step_matches_closed_form() {
        // input 1, hidden 1: z = [zi, zf, zg, zo]
        let wx = array![[0.5, -0.3, 0.8, 0.1]];
        let wh = array![[0.2, 0.4, -0.6, 0.7]];
        let b = array![[0.1, 1.0, 0.0, -0.2]];
        let w = LstmWeights {
            wx: &wx,
            wh: &wh,
            b: &b,
        };
        let state = LstmState {
            h: array![[0.3]],
            c: array![[-0.5]],
        };
        let x = array![[2.0]];
        let (next, _) = lstm_step(w, &x.view(), &state);

        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let zi = 0.5 * 2.0 + 0.2 * 0.3 + 0.1;
        let zf = -0.3 * 2.0 + 0.4 * 0.3 + 1.0;
        let zg: f64 = 0.8 * 2.0 - 0.6 * 0.3 + 0.0;
        let zo = 0.1 * 2.0 + 0.7 * 0.3 - 0.2;
        let c: f64 = s(zf) * -0.5 + s(zi) * zg.tanh();
        let h = s(zo) * c.tanh();
        assert!((next.c[[0, 0]] - c).abs() < 1e-15);
        assert!((next.h[[0, 0]] - h).abs() < 1e-15);
    }
}
