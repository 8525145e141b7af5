//! Forward/backward kernels over `batch x features` matrices.

use ndarray::{Array2, ArrayView2, Axis};

pub fn linear(x: &ArrayView2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

/// Returns `dx`; accumulates into `dw` and `db`.
pub fn linear_backward(
    x: &ArrayView2<f64>,
    w: &Array2<f64>,
    dy: &Array2<f64>,
    dw: &mut Array2<f64>,
    db: &mut Array2<f64>,
) -> Array2<f64> {
    *dw += &x.t().dot(dy);
    *db += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    dy.dot(&w.t())
}

pub fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

/// Gradient through ReLU given the pre-activation.
pub fn relu_backward(z: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dz = dy.clone();
    dz.zip_mut_with(z, |d, &v| {
        if v <= 0.0 {
            *d = 0.0
        }
    });
    dz
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise log-softmax, stabilised by subtracting the row maximum.
pub fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    log_softmax_rows(logits).mapv(f64::exp)
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Saved quantities for the batch-norm backward pass.
pub struct BatchNormCache {
    x_hat: Array2<f64>,
    inv_std: Array2<f64>,
}

/// Training-mode batch normalisation over the batch axis.
/// Returns `(y, cache, batch_mean, batch_var)`.
pub fn batch_norm_train(
    x: &Array2<f64>,
    gamma: &Array2<f64>,
    beta: &Array2<f64>,
) -> (Array2<f64>, BatchNormCache, Array2<f64>, Array2<f64>) {
    let n = x.nrows() as f64;
    let mean = x.sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
    let centered = x - &mean;
    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    let x_hat = &centered * &inv_std;
    let y = &x_hat * gamma + beta;
    (y, BatchNormCache { x_hat, inv_std }, mean, var)
}

pub fn batch_norm_eval(
    x: &Array2<f64>,
    gamma: &Array2<f64>,
    beta: &Array2<f64>,
    running_mean: &Array2<f64>,
    running_var: &Array2<f64>,
) -> Array2<f64> {
    let inv_std = running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
    (x - running_mean) * &inv_std * gamma + beta
}

pub fn batch_norm_backward(
    cache: &BatchNormCache,
    gamma: &Array2<f64>,
    dy: &Array2<f64>,
    dgamma: &mut Array2<f64>,
    dbeta: &mut Array2<f64>,
) -> Array2<f64> {
    let n = dy.nrows() as f64;
    *dgamma += &(dy * &cache.x_hat).sum_axis(Axis(0)).insert_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx_hat = dy * gamma;
    let sum_dx_hat = dx_hat.sum_axis(Axis(0)).insert_axis(Axis(0));
    let sum_dx_hat_xhat = (&dx_hat * &cache.x_hat)
        .sum_axis(Axis(0))
        .insert_axis(Axis(0));
    let inner = &dx_hat * n - &sum_dx_hat - &cache.x_hat * &sum_dx_hat_xhat;
    inner * &cache.inv_std / n
}

/// Gathers embedding rows for `ids`.
pub fn embed(table: &Array2<f64>, ids: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), table.ncols()));
    for (r, &id) in ids.iter().enumerate() {
        out.row_mut(r).assign(&table.row(id));
    }
    out
}

pub fn embed_backward(d_table: &mut Array2<f64>, ids: &[usize], dy: &Array2<f64>) {
    for (r, &id) in ids.iter().enumerate() {
        let mut row = d_table.row_mut(id);
        row += &dy.row(r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_rows_sum_to_one_and_uniform() {
        let p = softmax_rows(&array![[0.0, 0.0, 0.0, 0.0], [1000.0, -1000.0, 3.0, 2.0]]);
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        for &v in p.row(0) {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn relu_backward_masks() {
        let z = array![[-1.0, 2.0]];
        let d = relu_backward(&z, &array![[5.0, 7.0]]);
        assert_eq!(d, array![[0.0, 7.0]]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
