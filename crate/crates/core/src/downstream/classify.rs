use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Penalty `l2/2 * |W|^2` added to the mean cross-entropy.
    pub l2: f64,
    pub lr: f64,
    pub iterations: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-4,
            lr: 0.05,
            iterations: 500,
        }
    }
}

/// Multinomial logistic regression over z-scored inputs.
#[derive(Clone, Debug)]
pub struct LinearClassifier {
    pub classes: Vec<usize>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearClassifier {
    fn standardize(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.to_owned();
        for mut row in z.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        z
    }

    pub fn logits(&self, x: &ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects {} inputs, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        Ok(self.standardize(x).dot(&self.weights) + &self.bias)
    }

    /// Arg-max class per row; the lower class index wins ties.
    pub fn predict(&self, x: &ArrayView2<f64>) -> Result<Vec<usize>> {
        let z = self.logits(x)?;
        Ok(z.rows()
            .into_iter()
            .map(|r| {
                let mut best = 0;
                for (k, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = k;
                    }
                }
                self.classes[best]
            })
            .collect())
    }

    pub fn accuracy(&self, x: &ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Ok(0.0);
        }
        let pred = self.predict(x)?;
        let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Fits on `(train_x, train_y)` with full-batch Adam and reports accuracy on
/// the held-out rows.
pub fn classify(
    train_x: &ArrayView2<f64>,
    train_y: &[usize],
    test_x: &ArrayView2<f64>,
    test_y: &[usize],
    config: &ClassifierConfig,
) -> Result<(LinearClassifier, f64)> {
    if train_x.nrows() != train_y.len() || test_x.nrows() != test_y.len() {
        return Err(Error::ShapeMismatch("rows and labels differ".into()));
    }
    let mut per_class: BTreeMap<usize, usize> = BTreeMap::new();
    for &y in train_y {
        *per_class.entry(y).or_default() += 1;
    }
    if per_class.len() < 2 {
        return Err(Error::DegenerateLabels(format!("{} class in training data", per_class.len())));
    }
    if let Some((c, n)) = per_class.iter().find(|(_, n)| **n < 2) {
        return Err(Error::DegenerateLabels(format!("class {c} has {n} training example")));
    }
    let classes: Vec<usize> = per_class.keys().copied().collect();
    let index: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    let n = train_x.nrows() as f64;
    let d = train_x.ncols();
    let mean = train_x.mean_axis(Axis(0)).unwrap();
    let var = train_x.var_axis(Axis(0), 0.0);
    let scale: Vec<f64> = var.iter().map(|v| if *v > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    let mut model = LinearClassifier {
        classes,
        mean: mean.to_vec(),
        scale,
        weights: Array2::zeros((d, per_class.len())),
        bias: Array1::zeros(per_class.len()),
    };
    let z = model.standardize(train_x);
    let mut onehot = Array2::<f64>::zeros((train_y.len(), per_class.len()));
    for (i, y) in train_y.iter().enumerate() {
        onehot[[i, index[y]]] = 1.0;
    }

    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut mw = Array2::<f64>::zeros(model.weights.raw_dim());
    let mut vw = mw.clone();
    let mut mb = Array1::<f64>::zeros(model.bias.raw_dim());
    let mut vb = mb.clone();
    for t in 1..=config.iterations {
        let mut p = z.dot(&model.weights) + &model.bias;
        softmax_rows(&mut p);
        let delta = (p - &onehot) / n;
        let gw = z.t().dot(&delta) + &model.weights * config.l2;
        let gb = delta.sum_axis(Axis(0));
        let c1 = 1.0 - f64::powi(b1, t as i32);
        let c2 = 1.0 - f64::powi(b2, t as i32);
        mw = mw * b1 + &gw * (1.0 - b1);
        vw = vw * b2 + &gw.mapv(|g| g * g) * (1.0 - b2);
        mb = mb * b1 + &gb * (1.0 - b1);
        vb = vb * b2 + &gb.mapv(|g| g * g) * (1.0 - b2);
        let lr = config.lr;
        ndarray::Zip::from(&mut model.weights)
            .and(&mw)
            .and(&vw)
            .for_each(|w, &m, &v| *w -= lr * (m / c1) / ((v / c2).sqrt() + eps));
        ndarray::Zip::from(&mut model.bias)
            .and(&mb)
            .and(&vb)
            .for_each(|w, &m, &v| *w -= lr * (m / c1) / ((v / c2).sqrt() + eps));
    }
    let acc = model.accuracy(test_x, test_y)?;
    Ok((model, acc))
}
