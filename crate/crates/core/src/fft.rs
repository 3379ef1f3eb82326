//! Axis-wise unitary FFTs over flat row-major arrays.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(len),
            Direction::Inverse => p.plan_fft_inverse(len),
        }
    })
}

/// Lines per parallel task when transforming contiguous rows.
const LINES_PER_TASK: usize = 16;

/// Transform along the middle axis of an array viewed as `[outer][len][inner]`,
/// scaling by `1/sqrt(len)`.
pub fn fft_axis(data: &mut [Complex64], outer: usize, len: usize, inner: usize, dir: Direction) {
    assert_eq!(data.len(), outer * len * inner, "fft_axis: shape mismatch");
    if len <= 1 {
        return;
    }
    let scale = 1.0 / (len as f64).sqrt();
    if inner == 1 {
        transform_rows(data, len, dir, scale);
        return;
    }
    let block = len * inner;
    let mut scratch = vec![Complex64::new(0.0, 0.0); block];
    for o in 0..outer {
        let chunk = &mut data[o * block..(o + 1) * block];
        transpose_into(chunk, len, inner, &mut scratch);
        transform_rows(&mut scratch, len, dir, scale);
        transpose_into(&scratch, inner, len, chunk);
    }
}

/// Unitary transform of consecutive rows of length `len`.
pub fn fft_rows(rows: &mut [Complex64], len: usize, dir: Direction) {
    assert_eq!(rows.len() % len.max(1), 0, "fft_rows: shape mismatch");
    if len > 1 {
        transform_rows(rows, len, dir, 1.0 / (len as f64).sqrt());
    }
}

fn transform_rows(rows: &mut [Complex64], len: usize, dir: Direction, scale: f64) {
    let fft = plan(len, dir);
    par::for_each_chunk_mut(rows, len * LINES_PER_TASK, |_, chunk| {
        let mut work = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut work);
        for z in chunk.iter_mut() {
            *z *= scale;
        }
    });
}

/// Write the transpose of the `rows x cols` matrix `src` into `dst`.
pub fn transpose_into(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    const TILE: usize = 32;
    for rb in (0..rows).step_by(TILE) {
        for cb in (0..cols).step_by(TILE) {
            for r in rb..(rb + TILE).min(rows) {
                for c in cb..(cb + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Unitary transform over all `d` axes of an `n^d` array repeated `batch` times.
pub fn fft_spatial(data: &mut [Complex64], batch: usize, n: usize, d: usize, dir: Direction) {
    let total = n.pow(d as u32);
    assert_eq!(data.len(), batch * total);
    for axis in 0..d {
        let inner = n.pow((d - 1 - axis) as u32);
        let outer = batch * n.pow(axis as u32);
        fft_axis(data, outer, n, inner, dir);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_transform_matches_naive_dft() {
        let (outer, len, inner) = (2, 8, 3);
        let data: Vec<Complex64> = (0..outer * len * inner)
            .map(|i| Complex64::new((i as f64).sin(), (0.3 * i as f64).cos()))
            .collect();
        let mut fast = data.clone();
        fft_axis(&mut fast, outer, len, inner, Direction::Forward);
        for o in 0..outer {
            for i in 0..inner {
                for k in 0..len {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..len {
                        let ang = -2.0 * std::f64::consts::PI * (j * k) as f64 / len as f64;
                        acc += data[(o * len + j) * inner + i] * Complex64::from_polar(1.0, ang);
                    }
                    acc /= (len as f64).sqrt();
                    let got = fast[(o * len + k) * inner + i];
                    assert!((got - acc).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transpose_round_trip() {
        let src: Vec<Complex64> = (0..35).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let mut t = vec![Complex64::new(0.0, 0.0); 35];
        let mut back = t.clone();
        transpose_into(&src, 5, 7, &mut t);
        transpose_into(&t, 7, 5, &mut back);
        assert_eq!(src, back);
        assert_eq!(t[1], src[7]);
    }
}
