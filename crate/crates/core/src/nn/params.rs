use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named shape of one tensor, as recorded in architecture manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Named 2-d tensors. Vectors are stored as `1 x n` rows.
///
/// The same type doubles as a gradient accumulator; [`zeros_like`](Self::zeros_like)
/// produces one with identical names and shapes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet {
    tensors: BTreeMap<String, Array2<f64>>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Array2<f64>) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    /// Simultaneous mutable access to distinct tensors.
    pub fn get_many_mut<const N: usize>(&mut self, names: [&str; N]) -> [&mut Array2<f64>; N] {
        let mut found: [Option<&mut Array2<f64>>; N] = std::array::from_fn(|_| None);
        for (name, t) in self.tensors.iter_mut() {
            if let Some(k) = names.iter().position(|n| *n == name.as_str()) {
                found[k] = Some(t);
            }
        }
        found.map(|t| t.expect("parameter present and names distinct"))
    }

    pub fn try_get(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array2<f64>)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array2<f64>)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    pub fn shapes(&self) -> Vec<TensorShape> {
        self.tensors
            .iter()
            .map(|(n, t)| TensorShape {
                name: n.clone(),
                shape: t.shape().to_vec(),
            })
            .collect()
    }

    pub fn zeros_like(&self) -> ParameterSet {
        ParameterSet {
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), Array2::zeros(t.raw_dim())))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors.values_mut() {
            t.fill(0.0);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// First tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n.as_str())
    }

    pub fn check_same_shapes(&self, other: &ParameterSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} tensors vs {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (n, t) in &self.tensors {
            match other.tensors.get(n) {
                Some(o) if o.shape() == t.shape() => {}
                Some(o) => {
                    return Err(Error::ShapeMismatch(format!(
                        "{n}: {:?} vs {:?}",
                        t.shape(),
                        o.shape()
                    )))
                }
                None => return Err(Error::ShapeMismatch(format!("{n} missing"))),
            }
        }
        Ok(())
    }

    /// `self += scale * other`, tensor-wise.
    pub fn add_scaled(&mut self, other: &ParameterSet, scale: f64) {
        for (n, t) in self.tensors.iter_mut() {
            if let Some(o) = other.tensors.get(n) {
                t.scaled_add(scale, o);
            }
        }
    }

    /// Rounds every value to the nearest `f32`, so checkpoints (stored as
    /// `f32`) reproduce the parameters exactly.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors.values_mut() {
            t.mapv_inplace(|x| x as f32 as f64);
        }
    }
}

/// Glorot-uniform initialisation for a `fan_in x fan_out` weight.
pub fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-a..a))
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..scale))
}
