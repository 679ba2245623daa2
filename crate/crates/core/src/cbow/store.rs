//! Parameter storage the per-sample update kernel runs against.
//!
//! The single-worker path views a `&mut [f64]` as `&[Cell<f64>]` (zero cost);
//! the parallel path uses relaxed atomics so unsynchronized workers can race
//! on the same rows without ever observing a torn value.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

pub(crate) trait Store {
    fn get(&self, i: usize) -> f64;
    fn set(&self, i: usize, v: f64);
}

impl Store for [Cell<f64>] {
    #[inline(always)]
    fn get(&self, i: usize) -> f64 {
        self[i].get()
    }

    #[inline(always)]
    fn set(&self, i: usize, v: f64) {
        self[i].set(v)
    }
}

#[repr(transparent)]
pub(crate) struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub(crate) fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    pub(crate) fn into_inner(self) -> f64 {
        f64::from_bits(self.0.into_inner())
    }
}

impl Store for [AtomicF64] {
    #[inline(always)]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self[i].0.load(Ordering::Relaxed))
    }

    #[inline(always)]
    fn set(&self, i: usize, v: f64) {
        self[i].0.store(v.to_bits(), Ordering::Relaxed)
    }
}

pub(crate) fn cells(values: &mut [f64]) -> &[Cell<f64>] {
    Cell::from_mut(values).as_slice_of_cells()
}

pub(crate) fn to_atomic(values: &[f64]) -> Vec<AtomicF64> {
    values.iter().map(|&v| AtomicF64::new(v)).collect()
}

pub(crate) fn from_atomic(values: Vec<AtomicF64>) -> Vec<f64> {
    values.into_iter().map(AtomicF64::into_inner).collect()
}
