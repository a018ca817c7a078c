//! Evaluation of cell fields at arbitrary `(y, s)`: Fourier upsampling of the
//! stored samples followed by periodic tensor-product cubic Lagrange
//! interpolation.

use num_complex::Complex64;

use crate::error::{HomogError, Result};
use crate::fft::{is_nyquist, wavenumber, NdFft};
use crate::grid::SpaceTimeTorusGrid;

#[derive(Debug, Clone)]
pub struct PeriodicInterpolator {
    d: usize,
    /// Storage dims `[n_time, n_space, ...]` of the upsampled table.
    dims: Vec<usize>,
    table: Vec<f64>,
}

/// Target `(index, weight)` pairs for one source wavenumber.
fn targets(i: usize, n: usize, big: usize) -> Vec<(usize, f64)> {
    if is_nyquist(i, n) && big != n {
        vec![(n / 2, 0.5), (big - n / 2, 0.5)]
    } else {
        let k = wavenumber(i, n);
        vec![(k.rem_euclid(big as i64) as usize, 1.0)]
    }
}

impl PeriodicInterpolator {
    /// `values` holds one scalar component on `grid`; `upsample ≥ 1`.
    pub fn new(grid: &SpaceTimeTorusGrid, values: &[f64], upsample: usize) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(HomogError::LatticeMismatch(format!(
                "interpolator got {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if upsample == 0 {
            return Err(HomogError::InvalidParameter("upsample factor must be ≥ 1".into()));
        }
        let dims = grid.storage_dims();
        if upsample == 1 {
            return Ok(Self {
                d: grid.d(),
                dims,
                table: values.to_vec(),
            });
        }
        let big: Vec<usize> = dims.iter().map(|n| n * upsample).collect();
        let fft = NdFft::new(&dims);
        let spec = fft.forward_real(values);
        let big_len: usize = big.iter().product();
        let mut out = vec![Complex64::new(0.0, 0.0); big_len];
        let scale = big_len as f64 / spec.len() as f64;
        let nd = dims.len();
        let mut idx = vec![0usize; nd];
        for (flat, c) in spec.iter().enumerate() {
            let mut rest = flat;
            for a in (0..nd).rev() {
                idx[a] = rest % dims[a];
                rest /= dims[a];
            }
            let per_axis: Vec<Vec<(usize, f64)>> =
                (0..nd).map(|a| targets(idx[a], dims[a], big[a])).collect();
            // cartesian product over the (at most two) targets per axis
            let mut combos: Vec<(usize, f64)> = vec![(0, 1.0)];
            for (a, list) in per_axis.iter().enumerate() {
                let mut next = Vec::with_capacity(combos.len() * list.len());
                for &(base, w) in &combos {
                    for &(t, tw) in list {
                        next.push((base * big[a] + t, w * tw));
                    }
                }
                combos = next;
            }
            for (target, w) in combos {
                out[target] += c * (w * scale);
            }
        }
        let table = NdFft::new(&big).inverse_real(out);
        Ok(Self {
            d: grid.d(),
            dims: big,
            table,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Interpolated value at cell coordinates `(y, s)` (any real values).
    pub fn eval(&self, y: &[f64], s: f64) -> f64 {
        debug_assert_eq!(y.len(), self.d);
        let nd = self.d + 1;
        let mut base = [0usize; 3];
        let mut weights = [[0.0f64; 4]; 3];
        for a in 0..nd {
            let coord = if a == 0 { s } else { y[a - 1] };
            let n = self.dims[a];
            let pos = coord.rem_euclid(1.0) * n as f64;
            let i0 = pos.floor();
            let t = pos - i0;
            base[a] = (i0 as i64 - 1).rem_euclid(n as i64) as usize;
            // cubic Lagrange weights on nodes −1, 0, 1, 2
            weights[a] = [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ];
        }
        let mut acc = 0.0;
        match nd {
            2 => {
                let (nt, nx) = (self.dims[0], self.dims[1]);
                for p in 0..4 {
                    let ti = (base[0] + p) % nt;
                    let row = &self.table[ti * nx..(ti + 1) * nx];
                    let mut inner = 0.0;
                    for q in 0..4 {
                        inner += weights[1][q] * row[(base[1] + q) % nx];
                    }
                    acc += weights[0][p] * inner;
                }
            }
            _ => {
                let (nt, n1, n2) = (self.dims[0], self.dims[1], self.dims[2]);
                for p in 0..4 {
                    let ti = (base[0] + p) % nt;
                    for q in 0..4 {
                        let yi = (base[1] + q) % n1;
                        let row = &self.table[(ti * n1 + yi) * n2..(ti * n1 + yi + 1) * n2];
                        let mut inner = 0.0;
                        for r in 0..4 {
                            inner += weights[2][r] * row[(base[2] + r) % n2];
                        }
                        acc += weights[0][p] * weights[1][q] * inner;
                    }
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    const TAU: f64 = 2.0 * PI;

    #[test]
    fn reproduces_nodes_without_upsampling() {
        let g = SpaceTimeTorusGrid::new(1, 8, 8).unwrap();
        let vals: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let it = PeriodicInterpolator::new(&g, &vals, 1).unwrap();
        for node in 0..64 {
            let (y, s) = g.node_coords(node);
            assert!((it.eval(&y, s) - vals[node]).abs() < 1e-14);
        }
    }

    #[test]
    fn upsampled_smooth_field_is_accurate() {
        let g = SpaceTimeTorusGrid::new(1, 16, 16).unwrap();
        let f = |y: f64, s: f64| (TAU * y).sin() * (TAU * s).cos() + 0.3 * (2.0 * TAU * (y - s)).cos();
        let vals: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let (y, s) = g.node_coords(n);
                f(y[0], s)
            })
            .collect();
        let it = PeriodicInterpolator::new(&g, &vals, 8).unwrap();
        for k in 0..50 {
            let y = 0.0137 * k as f64 - 0.2;
            let s = 0.031 * k as f64 + 3.0;
            assert!((it.eval(&[y], s) - f(y, s)).abs() < 2e-6);
        }
    }

    #[test]
    fn two_dimensional_interpolation() {
        let g = SpaceTimeTorusGrid::new(2, 8, 8).unwrap();
        let f = |y: &[f64], s: f64| (TAU * y[0]).cos() * (TAU * y[1]).sin() + (TAU * s).sin();
        let vals: Vec<f64> = (0..g.node_count())
            .map(|n| {
                let (y, s) = g.node_coords(n);
                f(&y, s)
            })
            .collect();
        let it = PeriodicInterpolator::new(&g, &vals, 8).unwrap();
        let y = [0.123, 0.771];
        assert!((it.eval(&y, 0.4) - f(&y, 0.4)).abs() < 1e-5);
    }
}
