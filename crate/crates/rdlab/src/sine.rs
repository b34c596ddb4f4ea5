//! Fast sine transform (DST-I) on the interior collocation grid.
//!
//! With nodes `x_i = i l / (n+1)`, `i = 1..n`, the synthesis matrix
//! `S[i][j] = sin(i j pi / (n+1))` satisfies `S^2 = (n+1)/2 * I`, so the
//! analysis step is the same transform scaled by `2/(n+1)`. The DST-I of
//! length `n` is computed through a complex FFT of length `2(n+1)` on the
//! odd extension of the data.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

static PLAN_CACHE: Lazy<Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(len: usize) -> Arc<dyn Fft<f64>> {
    let mut cache = PLAN_CACHE.lock().expect("fft plan cache poisoned");
    cache
        .entry(len)
        .or_insert_with(|| FftPlanner::new().plan_fft_forward(len))
        .clone()
}

/// Unnormalized DST-I: `out[k] = sum_{j=1}^{n} x[j] sin(pi j k / (n+1))`,
/// `k = 1..n` (both arrays zero-based).
pub fn dst1(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = 2 * (n + 1);
    let fft = plan(m);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (j, &v) in x.iter().enumerate() {
        buf[j + 1].re = v;
        buf[m - 1 - j].re = -v;
    }
    fft.process(&mut buf);
    // Odd extension gives Z[k] = -2i * DST(x)[k].
    (1..=n).map(|k| -0.5 * buf[k].im).collect()
}

/// Nodal values from sine coefficients (synthesis, `u = S c`).
pub fn coeffs_to_nodal_1d(coeffs: &[f64]) -> Vec<f64> {
    dst1(coeffs)
}

/// Sine coefficients from nodal values (analysis, `c = 2/(n+1) S u`).
pub fn nodal_to_coeffs_1d(nodal: &[f64]) -> Vec<f64> {
    let scale = 2.0 / (nodal.len() + 1) as f64;
    let mut c = dst1(nodal);
    for v in &mut c {
        *v *= scale;
    }
    c
}

/// Apply the 1-D transform `f` along every axis of a row-major array with
/// shape `[n1]` or `[n1, n2]`.
fn apply_separable(data: &[f64], shape: &[usize], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    match shape {
        [_] => f(data),
        [n1, n2] => {
            let (n1, n2) = (*n1, *n2);
            let mut out = vec![0.0; n1 * n2];
            // Rows (second axis is contiguous).
            for r in 0..n1 {
                let t = f(&data[r * n2..(r + 1) * n2]);
                out[r * n2..(r + 1) * n2].copy_from_slice(&t);
            }
            // Columns.
            let mut col = vec![0.0; n1];
            for c in 0..n2 {
                for r in 0..n1 {
                    col[r] = out[r * n2 + c];
                }
                let t = f(&col);
                for r in 0..n1 {
                    out[r * n2 + c] = t[r];
                }
            }
            out
        }
        _ => panic!("sine transform supports 1-D and 2-D shapes only"),
    }
}

/// Multi-dimensional synthesis: nodal values from coefficients.
pub fn coeffs_to_nodal(coeffs: &[f64], shape: &[usize]) -> Vec<f64> {
    apply_separable(coeffs, shape, coeffs_to_nodal_1d)
}

/// Multi-dimensional analysis: coefficients from nodal values.
pub fn nodal_to_coeffs(nodal: &[f64], shape: &[usize]) -> Vec<f64> {
    apply_separable(nodal, shape, nodal_to_coeffs_1d)
}

/// Zero-pad a row-major coefficient array from `shape` to `padded`.
pub fn pad_coeffs(coeffs: &[f64], shape: &[usize], padded: &[usize]) -> Vec<f64> {
    match (shape, padded) {
        ([n], [p]) => {
            assert!(p >= n);
            let mut out = vec![0.0; *p];
            out[..*n].copy_from_slice(coeffs);
            out
        }
        ([n1, n2], [p1, p2]) => {
            assert!(p1 >= n1 && p2 >= n2);
            let mut out = vec![0.0; p1 * p2];
            for r in 0..*n1 {
                out[r * p2..r * p2 + n2].copy_from_slice(&coeffs[r * n2..(r + 1) * n2]);
            }
            out
        }
        _ => panic!("pad_coeffs supports 1-D and 2-D shapes only"),
    }
}

/// Truncate a row-major coefficient array from `padded` back to `shape`.
pub fn truncate_coeffs(coeffs: &[f64], padded: &[usize], shape: &[usize]) -> Vec<f64> {
    match (padded, shape) {
        ([p], [n]) => {
            assert!(p >= n);
            coeffs[..*n].to_vec()
        }
        ([p1, p2], [n1, n2]) => {
            assert!(p1 >= n1 && p2 >= n2);
            let mut out = vec![0.0; n1 * n2];
            for r in 0..*n1 {
                out[r * n2..(r + 1) * n2].copy_from_slice(&coeffs[r * p2..r * p2 + n2]);
            }
            out
        }
        _ => panic!("truncate_coeffs supports 1-D and 2-D shapes only"),
    }
}

/// Padded grid size for 3/2-rule dealiasing of one axis.
pub fn dealias_len(n: usize) -> usize {
    // Keep `n+1` growing by 3/2 so the FFT length scales cleanly.
    (3 * (n + 1)).div_ceil(2) - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dst(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (1..=n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * ((j + 1) as f64 * k as f64 * std::f64::consts::PI
                        / (n + 1) as f64)
                        .sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_transform() {
        let x: Vec<f64> = (0..13).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
        let fast = dst1(&x);
        let slow = naive_dst(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let x: Vec<f64> = (0..31).map(|i| ((i * i) as f64).sin()).collect();
        let back = coeffs_to_nodal_1d(&nodal_to_coeffs_1d(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_round_trip() {
        let shape = [9, 12];
        let x: Vec<f64> = (0..shape[0] * shape[1])
            .map(|i| (i as f64 * 0.13).cos())
            .collect();
        let back = coeffs_to_nodal(&nodal_to_coeffs(&x, &shape), &shape);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pad_and_truncate_are_inverse() {
        let shape = [3, 4];
        let padded = [5, 6];
        let c: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let p = pad_coeffs(&c, &shape, &padded);
        assert_eq!(truncate_coeffs(&p, &padded, &shape), c);
    }

    #[test]
    fn dealias_len_grows_by_three_halves() {
        assert_eq!(dealias_len(15), 23); // 16 -> 24
        assert_eq!(dealias_len(127), 191); // 128 -> 192
    }
}
