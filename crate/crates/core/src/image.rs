//! Plain row-major image containers.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Real-valued image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_len("image pixels", height, width, data.len())?;
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// Per-pixel integer segment ids, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelImage {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
}

impl LabelImage {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        check_len("label pixels", height, width, labels.len())?;
        Ok(Self { height, width, labels })
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct segment ids in increasing order.
    pub fn segment_ids(&self) -> Vec<u32> {
        self.labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn same_shape(&self, other: &LabelImage) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::ShapeMismatch {
                what: "label image pixels",
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }
}

fn check_len(what: &'static str, height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimensions { height, width });
    }
    if len != height * width {
        return Err(Error::ShapeMismatch {
            what,
            expected: height * width,
            found: len,
        });
    }
    Ok(())
}
