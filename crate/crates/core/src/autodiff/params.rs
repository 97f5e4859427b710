use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// A named, contiguous slice of the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub length: usize,
    pub shape: Vec<usize>,
}

/// Every trainable parameter of a model as one flat vector.
///
/// Segments are contiguous, non-overlapping and cover `[0, len)`. The flat
/// index is the coordinate system shared by Fisher scores, sparsity masks
/// and the optimizer state.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    segments: Vec<Segment>,
    by_name: HashMap<String, usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a segment initialised with `values`. Returns its offset.
    pub fn push(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) -> Result<usize> {
        let length: usize = shape.iter().product();
        if length == 0 {
            return contract(format!("segment {name} has zero length"));
        }
        if values.len() != length {
            return Err(Error::Shape {
                op: "param",
                shapes: format!("{name}: shape {shape:?} vs {} values", values.len()),
            });
        }
        if self.by_name.contains_key(name) {
            return contract(format!("duplicate segment name {name}"));
        }
        let offset = self.data.len();
        self.by_name.insert(name.to_string(), self.segments.len());
        self.segments.push(Segment {
            name: name.to_string(),
            offset,
            length,
            shape,
        });
        self.data.extend_from_slice(&values);
        self.grad.resize(self.data.len(), 0.0);
        Ok(offset)
    }

    /// Rebuilds a store from serialized segments and a flat vector.
    pub fn from_segments(segments: Vec<Segment>, data: Vec<f64>) -> Result<Self> {
        let mut store = Self::new();
        for seg in segments {
            if seg.offset != store.data.len() || seg.offset + seg.length > data.len() {
                return contract(format!("segment {} is not contiguous", seg.name));
            }
            let values = data[seg.offset..seg.offset + seg.length].to_vec();
            store.push(&seg.name, seg.shape, values)?;
        }
        if store.data.len() != data.len() {
            return contract("segments do not cover the parameter vector");
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.by_name.get(name).map(|&i| &self.segments[i])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        &mut self.grad
    }

    /// Simultaneous mutable access to values and gradients.
    pub fn data_and_grad_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.data, &mut self.grad)
    }

    pub fn values_of(&self, name: &str) -> Option<&[f64]> {
        self.segment(name)
            .map(|s| &self.data[s.offset..s.offset + s.length])
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn grad_is_zero(&self) -> bool {
        self.grad.iter().all(|&g| g == 0.0)
    }

    /// Maps a flat index to `(segment index, local index)`.
    pub fn locate(&self, flat: usize) -> Option<(usize, usize)> {
        if flat >= self.data.len() {
            return None;
        }
        let seg = self.segments.partition_point(|s| s.offset <= flat) - 1;
        Some((seg, flat - self.segments[seg].offset))
    }

    /// Inverse of [`ParamStore::locate`].
    pub fn flat_index(&self, segment: usize, local: usize) -> Option<usize> {
        let seg = self.segments.get(segment)?;
        (local < seg.length).then_some(seg.offset + local)
    }
}
