//! Flat learnable-parameter vector with named slices.
//!
//! All model weights live in one `Vec<f64>` so checkpoints are a plain
//! value dump and the optimizer never needs to know the model layout.
//! Slices are appended at registration and never move, which keeps the
//! disjoint-and-covering invariant true by construction.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("parameter slice {0:?} is already registered")]
    DuplicateSlice(String),
    #[error("unknown parameter slice {0:?}")]
    UnknownSlice(String),
    #[error("slice {name:?} has zero extent ({rows}x{cols})")]
    EmptySlice { name: String, rows: usize, cols: usize },
    #[error("slice table is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceInfo {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl SliceInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// How a freshly registered slice is filled.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Const(f64),
    /// N(0, std^2), drawn from the store's seeded stream.
    Normal(f64),
    /// N(0, 1/fan_in), the usual choice for weight matrices here.
    ScaledNormal,
}

#[derive(Debug, Clone)]
pub struct ParamStore {
    values: Vec<f64>,
    slices: IndexMap<String, SliceInfo>,
    rng_seed: u64,
    rng: ChaCha8Rng,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
            && self.slices == other.slices
            && self.rng_seed == other.rng_seed
    }
}

impl ParamStore {
    pub fn new(rng_seed: u64) -> Self {
        ParamStore {
            values: Vec::new(),
            slices: IndexMap::new(),
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Appends a named slice. Initialization draws come from the store's
    /// seeded stream, so a fixed registration order gives fixed values.
    pub fn register(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: Init,
    ) -> Result<SliceInfo, StoreError> {
        if self.slices.contains_key(name) {
            return Err(StoreError::DuplicateSlice(name.to_string()));
        }
        if rows == 0 || cols == 0 {
            return Err(StoreError::EmptySlice { name: name.to_string(), rows, cols });
        }
        let info = SliceInfo { offset: self.values.len(), rows, cols };
        let n = rows * cols;
        match init {
            Init::Zeros => self.values.extend(std::iter::repeat(0.0).take(n)),
            Init::Const(c) => self.values.extend(std::iter::repeat(c).take(n)),
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("finite std");
                self.values.extend((0..n).map(|_| dist.sample(&mut self.rng)));
            }
            Init::ScaledNormal => {
                let std = (1.0 / cols as f64).sqrt();
                let dist = Normal::new(0.0, std).expect("finite std");
                self.values.extend((0..n).map(|_| dist.sample(&mut self.rng)));
            }
        }
        self.slices.insert(name.to_string(), info);
        Ok(info)
    }

    pub fn slice(&self, name: &str) -> Result<SliceInfo, StoreError> {
        self.slices
            .get(name)
            .copied()
            .ok_or_else(|| StoreError::UnknownSlice(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&[f64], StoreError> {
        let info = self.slice(name)?;
        Ok(&self.values[info.range()])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut [f64], StoreError> {
        let info = self.slice(name)?;
        Ok(&mut self.values[info.range()])
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

    /// Slice names in registration order.
    pub fn names(&self) -> impl Iterator<Item = (&str, SliceInfo)> {
        self.slices.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Rebuilds a store from a checkpoint's slice table and value dump.
    pub fn from_parts(
        rng_seed: u64,
        slices: Vec<(String, SliceInfo)>,
        values: Vec<f64>,
    ) -> Result<Self, StoreError> {
        let mut cursor = 0usize;
        let mut map = IndexMap::new();
        for (name, info) in slices {
            if info.offset != cursor {
                return Err(StoreError::Inconsistent(format!(
                    "slice {name:?} starts at {} but {} values precede it",
                    info.offset, cursor
                )));
            }
            cursor += info.len();
            if map.insert(name.clone(), info).is_some() {
                return Err(StoreError::DuplicateSlice(name));
            }
        }
        if cursor != values.len() {
            return Err(StoreError::Inconsistent(format!(
                "slice table covers {cursor} values, dump has {}",
                values.len()
            )));
        }
        Ok(ParamStore {
            values,
            slices: map,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        })
    }

    /// Draws from the store's stream after registration (for callers that
    /// need auxiliary randomness tied to the same seed).
    pub fn aux_rng(&mut self) -> &mut impl Rng {
        &mut self.rng
    }
}
