//! Named parameter matrices shared between a model and its optimizer.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use crate::error::{GistError, Result};

/// Ordered list of named parameter matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<DMatrix<f64>>,
}

/// Serialized form of one parameter: row-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatParam {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter and returns its slot.
    pub fn add(&mut self, name: impl Into<String>, value: DMatrix<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    /// Glorot-uniform `fan_in × fan_out` matrix.
    pub fn add_glorot(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> usize {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let m = DMatrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-limit..limit));
        self.add(name, m)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> usize {
        self.add(name, DMatrix::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, slot: usize) -> &DMatrix<f64> {
        &self.values[slot]
    }

    pub fn get_mut(&mut self, slot: usize) -> &mut DMatrix<f64> {
        &mut self.values[slot]
    }

    pub fn name(&self, slot: usize) -> &str {
        &self.names[slot]
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [DMatrix<f64>] {
        &mut self.values
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(DMatrix::len).sum()
    }

    /// Places every parameter on the tape as a leaf, in slot order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|m| tape.leaf(m.clone())).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn set_all(&mut self, value: f64) {
        for m in &mut self.values {
            m.fill(value);
        }
    }

    pub fn to_flat(&self) -> Vec<FlatParam> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(name, m)| FlatParam {
                name: name.clone(),
                shape: [m.nrows(), m.ncols()],
                data: m.transpose().as_slice().to_vec(),
            })
            .collect()
    }

    /// Overwrites the values from `flat`, which must match names and shapes
    /// slot by slot.
    pub fn load_flat(&mut self, flat: &[FlatParam]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(GistError::Checkpoint(format!(
                "{} parameters in checkpoint, model has {}",
                flat.len(),
                self.len()
            )));
        }
        for (slot, p) in flat.iter().enumerate() {
            let expected = [self.values[slot].nrows(), self.values[slot].ncols()];
            if p.name != self.names[slot] || p.shape != expected {
                return Err(GistError::Checkpoint(format!(
                    "parameter {slot}: found `{}` {:?}, expected `{}` {:?}",
                    p.name, p.shape, self.names[slot], expected
                )));
            }
            if p.data.len() != expected[0] * expected[1] {
                return Err(GistError::Checkpoint(format!(
                    "parameter `{}` has {} values for shape {:?}",
                    p.name,
                    p.data.len(),
                    expected
                )));
            }
            self.values[slot] = DMatrix::from_row_slice(expected[0], expected[1], &p.data);
        }
        Ok(())
    }
}
