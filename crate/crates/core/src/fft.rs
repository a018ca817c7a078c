//! Row-major N-dimensional complex FFT built from 1-D `rustfft` plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct NdFft {
    dims: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = dims.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            dims: dims.to_vec(),
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    /// Inverse transform in place, normalized by the total length.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, false);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    fn apply(&self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.len(), "fft buffer length mismatch");
        let ndim = self.dims.len();
        for axis in 0..ndim {
            let n = self.dims[axis];
            if n == 1 {
                continue;
            }
            let plan = if forward {
                &self.forward[axis]
            } else {
                &self.inverse[axis]
            };
            let inner: usize = self.dims[axis + 1..].iter().product();
            let outer: usize = self.dims[..axis].iter().product();
            if inner == 1 {
                plan.process(data);
                continue;
            }
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for o in 0..outer {
                let base = o * n * inner;
                for i in 0..inner {
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * inner + i];
                    }
                    plan.process(&mut line);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * inner + i] = *v;
                    }
                }
            }
        }
    }
}

/// Signed integer wavenumber for index `i` of an axis of length `n`.
/// The Nyquist index `n/2` maps to `+n/2`.
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

pub fn is_nyquist(i: usize, n: usize) -> bool {
    n % 2 == 0 && i == n / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_3d() {
        let fft = NdFft::new(&[4, 6, 8]);
        let data: Vec<f64> = (0..fft.len()).map(|i| ((i * 7919) % 97) as f64 / 97.0).collect();
        let spec = fft.forward_real(&data);
        let back = fft.inverse_real(spec);
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_in_one_bin() {
        let n = 16;
        let fft = NdFft::new(&[n]);
        let data: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 3.0 * i as f64 / n as f64).cos())
            .collect();
        let spec = fft.forward_real(&data);
        assert!((spec[3].re - n as f64 / 2.0).abs() < 1e-12);
        assert!((spec[n - 3].re - n as f64 / 2.0).abs() < 1e-12);
        assert!(spec[5].norm() < 1e-12);
    }
}
