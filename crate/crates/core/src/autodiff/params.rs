use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a parameter block inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// A named, matrix-shaped slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat storage of every trainable value of a model. Gradients produced by
/// [`Tape::gradient`](super::Tape::gradient) are indexed the same way.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    values: Vec<f64>,
    blocks: Vec<ParamBlock>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, values: Vec<f64>) -> ParamId {
        assert_eq!(values.len(), rows * cols);
        let offset = self.values.len();
        self.values.extend(values);
        self.blocks.push(ParamBlock {
            name: name.to_string(),
            offset,
            rows,
            cols,
        });
        ParamId(self.blocks.len() - 1)
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        let b = &self.blocks[id.0];
        &self.values[b.offset..b.offset + b.len()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rebuilds a store from its flat values and block layout.
    pub fn from_parts(values: Vec<f64>, blocks: Vec<ParamBlock>) -> Result<Self> {
        let mut offset = 0;
        for b in &blocks {
            if b.offset != offset {
                return Err(Error::Checkpoint(format!("block {} starts at {}, expected {offset}", b.name, b.offset)));
            }
            offset += b.len();
        }
        if offset != values.len() {
            return Err(Error::ShapeMismatch {
                expected: offset,
                got: values.len(),
            });
        }
        Ok(Self { values, blocks })
    }
}
