//! Uniform periodic grids on the unit space-time cell `[0,1)^{d+1}` and the
//! discrete calculus every other module builds on.
//!
//! Nodes are stored time-major, then lexicographically in space: the flat
//! index of `(s_n, y_{i1}, y_{i2})` is `(n * n_space + i1) * n_space + i2`.
//! Derivative axes are numbered `0..d` for `y_1..y_d` and `d` for `s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};
use crate::fft::{is_nyquist, wavenumber, NdFft};

/// Relative tolerance on cell means accepted by the Poisson inversion.
pub const MEAN_ZERO_TOL: f64 = 1e-8;

/// Discretization used for derivatives and Poisson inversion on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Fourier collocation (default).
    #[default]
    Spectral,
    /// Second-order central differences.
    #[serde(rename = "fd")]
    FiniteDifference,
}

impl std::str::FromStr for Scheme {
    type Err = HomogError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Scheme::Spectral),
            "fd" | "finite-difference" => Ok(Scheme::FiniteDifference),
            other => Err(HomogError::Unknown {
                kind: "scheme",
                name: other.to_string(),
            }),
        }
    }
}

/// Which axes a gradient runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisSet {
    Spatial,
    SpaceTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceTimeTorusGrid {
    d: usize,
    n_space: usize,
    n_time: usize,
}

impl SpaceTimeTorusGrid {
    pub fn new(d: usize, n_space: usize, n_time: usize) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(HomogError::UnsupportedDimension(d));
        }
        if n_space < 4 {
            return Err(HomogError::GridTooSmall {
                axis: "n_space",
                n: n_space,
                min: 4,
            });
        }
        if n_time < 4 {
            return Err(HomogError::GridTooSmall {
                axis: "n_time",
                n: n_time,
                min: 4,
            });
        }
        Ok(Self { d, n_space, n_time })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn h_space(&self) -> f64 {
        1.0 / self.n_space as f64
    }

    pub fn h_time(&self) -> f64 {
        1.0 / self.n_time as f64
    }

    /// Spatial nodes in one time slice.
    pub fn slice_len(&self) -> usize {
        self.n_space.pow(self.d as u32)
    }

    pub fn node_count(&self) -> usize {
        self.n_time * self.slice_len()
    }

    /// Storage dimensions, slowest first: `[n_time, n_space, ...]`.
    pub fn storage_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.n_time];
        dims.extend(std::iter::repeat(self.n_space).take(self.d));
        dims
    }

    pub fn node_index(&self, t_idx: usize, space_idx: &[usize]) -> usize {
        debug_assert_eq!(space_idx.len(), self.d);
        space_idx
            .iter()
            .fold(t_idx, |acc, &i| acc * self.n_space + i)
    }

    /// Cell coordinates `(y, s)` of a flat node index.
    pub fn node_coords(&self, node: usize) -> (Vec<f64>, f64) {
        let mut rest = node;
        let mut y = vec![0.0; self.d];
        for k in (0..self.d).rev() {
            y[k] = (rest % self.n_space) as f64 * self.h_space();
            rest /= self.n_space;
        }
        (y, rest as f64 * self.h_time())
    }

    /// Number of derivative axes in an axis set.
    pub fn axis_count(&self, axes: AxisSet) -> usize {
        match axes {
            AxisSet::Spatial => self.d,
            AxisSet::SpaceTime => self.d + 1,
        }
    }

    /// Storage axis of derivative axis `axis` (`d` is time).
    pub(crate) fn storage_axis(&self, axis: usize) -> usize {
        if axis == self.d {
            0
        } else {
            axis + 1
        }
    }

    pub(crate) fn storage_stride(&self, storage_axis: usize) -> usize {
        self.storage_dims()[storage_axis + 1..].iter().product()
    }

    fn axis_len_and_step(&self, axis: usize) -> (usize, f64) {
        if axis == self.d {
            (self.n_time, self.h_time())
        } else {
            (self.n_space, self.h_space())
        }
    }
}

/// Discrete operators on one grid with cached FFT plans.
pub struct GridOps {
    grid: SpaceTimeTorusGrid,
    scheme: Scheme,
    fft: NdFft,
    dims: Vec<usize>,
}

impl GridOps {
    pub fn new(grid: SpaceTimeTorusGrid, scheme: Scheme) -> Self {
        let dims = grid.storage_dims();
        Self {
            grid,
            scheme,
            fft: NdFft::new(&dims),
            dims,
        }
    }

    pub fn grid(&self) -> &SpaceTimeTorusGrid {
        &self.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn storage_index(&self, flat: usize, storage_axis: usize) -> usize {
        let stride: usize = self.dims[storage_axis + 1..].iter().product();
        (flat / stride) % self.dims[storage_axis]
    }

    /// First derivative along `axis`.
    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        match self.scheme {
            Scheme::Spectral => {
                let spec = self.fft.forward_real(f);
                self.spectral_derivative_from(&spec, axis)
            }
            Scheme::FiniteDifference => self.central_difference(f, axis),
        }
    }

    /// Derivatives along each axis in `axes`, sharing one forward transform.
    pub fn derivatives(&self, f: &[f64], axes: &[usize]) -> Vec<Vec<f64>> {
        match self.scheme {
            Scheme::Spectral => {
                let spec = self.fft.forward_real(f);
                axes.iter()
                    .map(|&a| self.spectral_derivative_from(&spec, a))
                    .collect()
            }
            Scheme::FiniteDifference => axes
                .iter()
                .map(|&a| self.central_difference(f, a))
                .collect(),
        }
    }

    fn spectral_derivative_from(&self, spec: &[Complex64], axis: usize) -> Vec<f64> {
        let sa = self.grid.storage_axis(axis);
        let n = self.dims[sa];
        let mut out = spec.to_vec();
        for (flat, v) in out.iter_mut().enumerate() {
            let i = self.storage_index(flat, sa);
            if is_nyquist(i, n) {
                *v = Complex64::new(0.0, 0.0);
            } else {
                let k = 2.0 * PI * wavenumber(i, n) as f64;
                *v *= Complex64::new(0.0, k);
            }
        }
        self.fft.inverse_real(out)
    }

    fn central_difference(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let sa = self.grid.storage_axis(axis);
        let n = self.dims[sa];
        let stride = self.grid.storage_stride(sa);
        let (_, h) = self.grid.axis_len_and_step(axis);
        let inv = 0.5 / h;
        let mut out = vec![0.0; f.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            let i = (flat / stride) % n;
            let base = flat - i * stride;
            let ip = base + ((i + 1) % n) * stride;
            let im = base + ((i + n - 1) % n) * stride;
            *o = (f[ip] - f[im]) * inv;
        }
        out
    }

    /// Symbol of the discrete Laplacian for the multi-index at `flat`.
    fn laplacian_symbol(&self, flat: usize) -> f64 {
        let mut sym = 0.0;
        for axis in 0..=self.grid.d {
            let sa = self.grid.storage_axis(axis);
            let n = self.dims[sa];
            let (_, h) = self.grid.axis_len_and_step(axis);
            let k = wavenumber(self.storage_index(flat, sa), n) as f64;
            sym -= match self.scheme {
                Scheme::Spectral => (2.0 * PI * k).powi(2),
                Scheme::FiniteDifference => ((2.0 * PI * k * h).sin() / h).powi(2),
            };
        }
        sym
    }

    /// Laplacian in all `d+1` variables. The spectral symbol is exact,
    /// Nyquist modes included; the finite-difference one is central∘central.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut spec = self.fft.forward_real(f);
        for (flat, v) in spec.iter_mut().enumerate() {
            *v *= self.laplacian_symbol(flat);
        }
        self.fft.inverse_real(spec)
    }

    /// Mean-zero solution of `Δ_{d+1} f = b`. Modes where the symbol vanishes
    /// are set to zero.
    pub fn poisson_invert(&self, b: &[f64]) -> Result<Vec<f64>> {
        let sup = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.poisson_invert_scaled(b, sup)
    }

    /// As [`GridOps::poisson_invert`], with the mean-zero tolerance taken
    /// relative to `scale` (for a component of a larger tensor, its sup norm).
    pub fn poisson_invert_scaled(&self, b: &[f64], scale: f64) -> Result<Vec<f64>> {
        let sup = scale;
        let mean = b.iter().sum::<f64>() / b.len() as f64;
        let tol = MEAN_ZERO_TOL * sup;
        if mean.abs() > tol && sup > 0.0 {
            return Err(HomogError::MeanZeroViolation {
                component: 0,
                mean,
                tol,
            });
        }
        let mut spec = self.fft.forward_real(b);
        for (flat, v) in spec.iter_mut().enumerate() {
            let sym = self.laplacian_symbol(flat);
            if sym.abs() < 1e-12 {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v /= sym;
            }
        }
        Ok(self.fft.inverse_real(spec))
    }
}

/// Real samples of a tensor-valued function at every grid node.
///
/// Storage is component-major: component `c` occupies
/// `values[c * nodes .. (c + 1) * nodes]`, components flattened row-major
/// over `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpaceTimeTorusGrid,
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpaceTimeTorusGrid, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let comps: usize = shape.iter().product();
        let expected = comps * grid.node_count();
        if values.len() != expected {
            return Err(HomogError::InvalidGridFunction(format!(
                "expected {expected} values for shape {shape:?}, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HomogError::InvalidGridFunction(format!(
                "non-finite value at position {i}"
            )));
        }
        Ok(Self {
            grid,
            shape,
            values,
        })
    }

    pub fn zeros(grid: SpaceTimeTorusGrid, shape: Vec<usize>) -> Self {
        let comps: usize = shape.iter().product();
        Self {
            grid,
            values: vec![0.0; comps * grid.node_count()],
            shape,
        }
    }

    /// Sample `f(y, s, out)` at every node; `out` has one slot per component.
    pub fn from_fn<F>(grid: SpaceTimeTorusGrid, shape: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], f64, &mut [f64]),
    {
        let comps: usize = shape.iter().product();
        let nodes = grid.node_count();
        let mut values = vec![0.0; comps * nodes];
        let mut buf = vec![0.0; comps];
        for node in 0..nodes {
            let (y, s) = grid.node_coords(node);
            f(&y, s, &mut buf);
            for (c, v) in buf.iter().enumerate() {
                values[c * nodes + node] = *v;
            }
        }
        Self::new(grid, shape, values)
    }

    pub fn scalar_from_fn<F>(grid: SpaceTimeTorusGrid, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], f64) -> f64,
    {
        Self::from_fn(grid, vec![], |y, s, out| out[0] = f(y, s))
    }

    /// Assemble from per-component sample vectors.
    pub fn from_components(
        grid: SpaceTimeTorusGrid,
        shape: Vec<usize>,
        components: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let values = components.into_iter().flatten().collect();
        Self::new(grid, shape, values)
    }

    pub fn grid(&self) -> &SpaceTimeTorusGrid {
        &self.grid
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_components(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.values[c * n..(c + 1) * n]
    }

    /// Flat component index of a multi-index over `shape`.
    pub fn component_index(&self, idx: &[usize]) -> usize {
        flat_index(&self.shape, idx)
    }

    pub fn at(&self, idx: &[usize]) -> &[f64] {
        self.component(self.component_index(idx))
    }

    /// Gradient with a new trailing index of size `d` or `d+1`.
    pub fn gradient(&self, scheme: Scheme, axes: AxisSet) -> GridFunction {
        let ops = GridOps::new(self.grid, scheme);
        self.gradient_with(&ops, axes)
    }

    pub fn gradient_with(&self, ops: &GridOps, axes: AxisSet) -> GridFunction {
        let na = self.grid.axis_count(axes);
        let axis_list: Vec<usize> = (0..na).collect();
        let mut comps = Vec::with_capacity(self.n_components() * na);
        for c in 0..self.n_components() {
            comps.extend(ops.derivatives(self.component(c), &axis_list));
        }
        let mut shape = self.shape.clone();
        shape.push(na);
        GridFunction::from_components(self.grid, shape, comps)
            .expect("gradient preserves layout")
    }

    /// Arithmetic mean of each component over all nodes.
    pub fn cell_mean(&self) -> Vec<f64> {
        let n = self.grid.node_count() as f64;
        (0..self.n_components())
            .map(|c| self.component(c).iter().sum::<f64>() / n)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Root-mean-square over all values.
    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn laplacian(&self, scheme: Scheme) -> GridFunction {
        let ops = GridOps::new(self.grid, scheme);
        let comps = (0..self.n_components())
            .map(|c| ops.laplacian(self.component(c)))
            .collect();
        GridFunction::from_components(self.grid, self.shape.clone(), comps)
            .expect("laplacian preserves layout")
    }

    /// Mean-zero solution of `Δ_{d+1} f = b`, component by component.
    ///
    /// Rejects components whose cell mean exceeds `MEAN_ZERO_TOL * ‖b‖_∞`.
    pub fn poisson_invert(&self, scheme: Scheme) -> Result<GridFunction> {
        let ops = GridOps::new(self.grid, scheme);
        self.poisson_invert_with(&ops)
    }

    pub fn poisson_invert_with(&self, ops: &GridOps) -> Result<GridFunction> {
        let mut comps = Vec::with_capacity(self.n_components());
        for c in 0..self.n_components() {
            let f = ops.poisson_invert(self.component(c)).map_err(|e| match e {
                HomogError::MeanZeroViolation { mean, tol, .. } => HomogError::MeanZeroViolation {
                    component: c,
                    mean,
                    tol,
                },
                other => other,
            })?;
            comps.push(f);
        }
        GridFunction::from_components(self.grid, self.shape.clone(), comps)
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.grid != other.grid || self.shape != other.shape {
            return Err(HomogError::LatticeMismatch(
                "grid functions differ in grid or shape".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        GridFunction::new(self.grid, self.shape.clone(), values)
    }

    /// Subtract the cell mean from every component.
    pub fn remove_mean(&mut self) {
        let means = self.cell_mean();
        let n = self.grid.node_count();
        for (c, m) in means.iter().enumerate() {
            for v in &mut self.values[c * n..(c + 1) * n] {
                *v -= m;
            }
        }
    }
}

pub(crate) fn flat_index(shape: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), idx.len());
    shape
        .iter()
        .zip(idx)
        .fold(0, |acc, (&n, &i)| {
            debug_assert!(i < n);
            acc * n + i
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 2.0 * PI;

    #[test]
    fn build_grid_examples() {
        let g = SpaceTimeTorusGrid::new(1, 64, 64).unwrap();
        assert_eq!(g.node_count(), 64 * 64);
        assert_eq!(g.h_space(), 1.0 / 64.0);
        let g2 = SpaceTimeTorusGrid::new(2, 16, 16).unwrap();
        assert_eq!(g2.node_count(), 16 * 16 * 16);
        let err = SpaceTimeTorusGrid::new(3, 16, 16).unwrap_err();
        assert!(err.to_string().contains("unsupported dimension"));
        assert!(SpaceTimeTorusGrid::new(1, 3, 16).is_err());
        assert!(SpaceTimeTorusGrid::new(1, 16, 2).is_err());
    }

    #[test]
    fn node_ordering_is_time_major() {
        let g = SpaceTimeTorusGrid::new(2, 4, 5).unwrap();
        let node = g.node_index(3, &[1, 2]);
        assert_eq!(node, (3 * 4 + 1) * 4 + 2);
        let (y, s) = g.node_coords(node);
        assert_eq!(y, vec![0.25, 0.5]);
        assert!((s - 0.6).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_sine() {
        for scheme in [Scheme::Spectral, Scheme::FiniteDifference] {
            let g = SpaceTimeTorusGrid::new(1, 64, 16).unwrap();
            let f = GridFunction::scalar_from_fn(g, |y, _| (TAU * y[0]).sin()).unwrap();
            let grad = f.gradient(scheme, AxisSet::Spatial);
            let at0 = grad.component(0)[0];
            let tol = match scheme {
                Scheme::Spectral => 1e-11,
                Scheme::FiniteDifference => TAU * (TAU / 64.0).powi(2),
            };
            assert!((at0 - TAU).abs() < tol, "{scheme:?}: {at0}");
        }
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = SpaceTimeTorusGrid::new(2, 8, 8).unwrap();
        let f = GridFunction::scalar_from_fn(g, |_, _| 3.5).unwrap();
        for scheme in [Scheme::Spectral, Scheme::FiniteDifference] {
            let grad = f.gradient(scheme, AxisSet::SpaceTime);
            assert_eq!(grad.shape(), &[3]);
            assert!(grad.max_abs() < 1e-13);
        }
    }

    #[test]
    fn time_derivative_at_critical_point() {
        let g = SpaceTimeTorusGrid::new(1, 8, 32).unwrap();
        let f = GridFunction::scalar_from_fn(g, |_, s| (TAU * s).cos()).unwrap();
        let grad = f.gradient(Scheme::Spectral, AxisSet::SpaceTime);
        // component [1] is d/ds; node 0 is s = 0
        assert!(grad.at(&[1])[0].abs() < 1e-12);
    }

    #[test]
    fn cell_mean_examples() {
        let g = SpaceTimeTorusGrid::new(1, 32, 8).unwrap();
        let c = GridFunction::scalar_from_fn(g, |_, _| 3.0).unwrap();
        assert!((c.cell_mean()[0] - 3.0).abs() < 1e-15);
        let s = GridFunction::scalar_from_fn(g, |y, _| (TAU * y[0]).sin()).unwrap();
        assert!(s.cell_mean()[0].abs() < 1e-15);
        let s2 = GridFunction::scalar_from_fn(g, |y, _| (TAU * y[0]).sin().powi(2)).unwrap();
        assert!((s2.cell_mean()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn poisson_examples() {
        let g = SpaceTimeTorusGrid::new(1, 32, 32).unwrap();
        let b = GridFunction::scalar_from_fn(g, |y, _| (TAU * y[0]).sin()).unwrap();
        let f = b.poisson_invert(Scheme::Spectral).unwrap();
        let expect = GridFunction::scalar_from_fn(g, |y, _| -(TAU * y[0]).sin() / (TAU * TAU)).unwrap();
        assert!(f.sub(&expect).unwrap().max_abs() < 1e-15);

        let zero = GridFunction::zeros(g, vec![]);
        assert_eq!(zero.poisson_invert(Scheme::Spectral).unwrap().max_abs(), 0.0);

        let b2 = GridFunction::scalar_from_fn(g, |y, s| (TAU * y[0]).cos() * (TAU * s).cos()).unwrap();
        let f2 = b2.poisson_invert(Scheme::Spectral).unwrap();
        for (fv, bv) in f2.values().iter().zip(b2.values()) {
            assert!((fv + bv / (2.0 * TAU * TAU)).abs() < 1e-15);
        }
    }

    #[test]
    fn poisson_rejects_nonzero_mean() {
        let g = SpaceTimeTorusGrid::new(1, 16, 16).unwrap();
        let b = GridFunction::scalar_from_fn(g, |y, _| 1.0 + (TAU * y[0]).sin()).unwrap();
        assert!(matches!(
            b.poisson_invert(Scheme::Spectral),
            Err(HomogError::MeanZeroViolation { .. })
        ));
    }

    #[test]
    fn fd_poisson_inverts_fd_laplacian_on_smooth_data() {
        let g = SpaceTimeTorusGrid::new(1, 32, 32).unwrap();
        let b = GridFunction::scalar_from_fn(g, |y, s| (TAU * y[0]).sin() * (TAU * 2.0 * s).cos()).unwrap();
        let f = b.poisson_invert(Scheme::FiniteDifference).unwrap();
        let back = f.laplacian(Scheme::FiniteDifference);
        assert!(back.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_value_count() {
        let g = SpaceTimeTorusGrid::new(1, 4, 4).unwrap();
        assert!(GridFunction::new(g, vec![2], vec![0.0; 16]).is_err());
        assert!(GridFunction::new(g, vec![], vec![f64::NAN; 16]).is_err());
    }
}
