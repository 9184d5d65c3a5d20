//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use nalgebra::DVector;
use yamabe_core::{
    assemble_operators, build_grid, make_model, DiscreteOperators, ModelSpec, NormalizedState,
};

pub fn frank(r: f64, n: usize) -> Arc<DiscreteOperators> {
    let m = Arc::new(make_model(&ModelSpec::FrankProduct { d: 5, r }).unwrap());
    let g = build_grid(&m, n).unwrap();
    assemble_operators(m, g).unwrap()
}

pub fn constant_state(ops: &Arc<DiscreteOperators>) -> NormalizedState {
    yamabe_core::normalize(ops, &DVector::from_element(ops.len(), 1.0)).unwrap()
}

pub const CRITICAL_RADIUS: f64 = 0.577_350_269_189_625_8;
