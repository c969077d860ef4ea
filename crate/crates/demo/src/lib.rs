//! WebAssembly bindings behind `www/index.html`.
//!
//! Every exported function takes and returns flat numeric arrays so the page
//! can draw straight onto a canvas. The plain Rust functions in [`api`] hold
//! the logic and are what the tests exercise.

use wasm_bindgen::prelude::*;

pub mod api;

/// `[t_secs, bytes, direction]` per packet of synthetic session `index`;
/// direction is 0 forward, 1 backward.
#[wasm_bindgen]
pub fn sample_trace(seed: u32, index: u32) -> Vec<f64> {
    api::sample_trace(u64::from(seed), index as usize)
}

/// `[start, end, packets, bytes, throughput]` per burst.
#[wasm_bindgen]
pub fn bursts(times: &[f64], sizes: &[f64], silence_gap: f64, min_packets: u32) -> Vec<f64> {
    api::bursts(times, sizes, silence_gap, min_packets as usize)
}

/// `[d, sim, map]` for `steps + 1` distances spread over `[0, max_d]`.
#[wasm_bindgen]
pub fn similarity_curves(threshold: f64, gamma: f64, max_d: f64, steps: u32) -> Vec<f64> {
    api::similarity_curves(threshold, gamma, max_d, steps as usize)
}

/// Winning class of every cell of a `resolution²` grid over the unit
/// square, row-major from the top-left, for training points `[x, y, ...]`.
#[wasm_bindgen]
pub fn knn_regions(
    points: &[f64],
    labels: &[u32],
    k: u32,
    weighting: &str,
    metric: &str,
    resolution: u32,
) -> Result<Vec<u8>, JsError> {
    api::knn_regions(points, labels, k as usize, weighting, metric, resolution as usize).map_err(|e| JsError::new(&e))
}
