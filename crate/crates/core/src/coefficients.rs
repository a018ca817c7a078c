//! 1-periodic coefficient fields `A(y, s)` given by closed-form rules, and
//! sampled regularity reporting (ellipticity, sup norm, VMO_x modulus,
//! parabolic Hölder seminorm).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};

const TAU: f64 = 2.0 * PI;

/// Value of `a_{ij}^{αβ}` at one point, stored with index
/// `((i * d + j) * m + α) * m + β`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefTensor {
    d: usize,
    m: usize,
    data: Vec<f64>,
}

impl CoefTensor {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            d,
            m,
            data: vec![0.0; d * d * m * m],
        }
    }

    /// Tensor from its flat storage (see the type docs for the index order).
    pub fn from_data(d: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != d * d * m * m {
            return Err(HomogError::InvalidParameter(format!(
                "coefficient tensor with d = {d}, m = {m} needs {} entries, got {}",
                d * d * m * m,
                data.len()
            )));
        }
        Ok(Self { d, m, data })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, alpha: usize, beta: usize) -> f64 {
        self.data[((i * self.d + j) * self.m + alpha) * self.m + beta]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, alpha: usize, beta: usize, v: f64) {
        let idx = ((i * self.d + j) * self.m + alpha) * self.m + beta;
        self.data[idx] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The `(md) × (md)` matrix with row `(i, α)` and column `(j, β)`.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        let n = self.d * self.m;
        DMatrix::from_fn(n, n, |r, c| {
            let (i, alpha) = (r / self.m, r % self.m);
            let (j, beta) = (c / self.m, c % self.m);
            self.get(i, j, alpha, beta)
        })
    }

    /// `min_ξ a ξ·ξ / |ξ|²`: smallest eigenvalue of the symmetric part.
    pub fn ellipticity(&self) -> f64 {
        let a = self.as_matrix();
        let sym = (&a + a.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    /// Operator 2-norm.
    pub fn operator_norm(&self) -> f64 {
        let a = self.as_matrix();
        a.singular_values().max()
    }

    pub fn frobenius_distance(&self, other: &CoefTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Built-in coefficient families, serialized as
/// `{"family": "...", "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum CoefficientFamily {
    /// `a·I`, or an explicit `d×d` matrix (scalar `m = 1`).
    Constant {
        #[serde(default = "one_usize")]
        d: usize,
        #[serde(default = "one_f64")]
        a: f64,
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
    },
    /// `(1 + b sin 2πy₁) I`.
    SeparableSpace {
        b: f64,
        #[serde(default = "one_usize")]
        d: usize,
    },
    /// `(1 + b sin 2πy₁ cos 2πs) I`.
    SpaceTime {
        b: f64,
        #[serde(default = "one_usize")]
        d: usize,
    },
    /// `(1 + b sin 2πy₁ sin 2πy₂) I` in two dimensions.
    CheckerboardSmooth2d { b: f64 },
    /// `(1 + b sin 2πy₁ cos 2πs) I + c J` with `J = [[0, 1], [-1, 0]]`.
    NonSymmetric2d { b: f64, c: f64 },
    /// `1 + b sin 2π(y − s)` in one dimension; not invariant under `s ↦ −s`.
    TravelingWave { b: f64 },
    /// Two-component system in one dimension:
    /// `[[1 + b sin 2πy, c], [−c, 1 + b cos 2π(y + s)]]`.
    CoupledSystem { b: f64, c: f64 },
}

/// `name`, `name:p` or `name:p,q` with the family's parameters in
/// declaration order (`b` then `c`; `a` for `constant`), or a JSON object.
impl std::str::FromStr for CoefficientFamily {
    type Err = HomogError;
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let params: Vec<f64> = args
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| HomogError::InvalidParameter(format!("bad coefficient parameter '{p}'")))
            })
            .collect::<Result<_>>()?;
        let arg = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let family = match name {
            "constant" => CoefficientFamily::Constant {
                d: 1,
                a: arg(0, 1.0),
                matrix: None,
            },
            "separable_space" | "separable" => CoefficientFamily::SeparableSpace { b: arg(0, 0.5), d: 1 },
            "space_time" => CoefficientFamily::SpaceTime { b: arg(0, 0.5), d: 1 },
            "checkerboard_smooth_2d" | "checkerboard" => CoefficientFamily::CheckerboardSmooth2d { b: arg(0, 0.5) },
            "non_symmetric_2d" => CoefficientFamily::NonSymmetric2d {
                b: arg(0, 0.5),
                c: arg(1, 0.3),
            },
            "traveling_wave" => CoefficientFamily::TravelingWave { b: arg(0, 0.5) },
            "coupled_system" => CoefficientFamily::CoupledSystem {
                b: arg(0, 0.5),
                c: arg(1, 0.2),
            },
            other => {
                return Err(HomogError::Unknown {
                    kind: "coefficient family",
                    name: other.to_string(),
                })
            }
        };
        Ok(family)
    }
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

/// Spatial/temporal factor in a separable scalar term.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Basis {
    One,
    Sin,
    Cos,
}

impl Basis {
    #[inline]
    fn eval(self, z: f64) -> f64 {
        match self {
            Basis::One => 1.0,
            Basis::Sin => (TAU * z).sin(),
            Basis::Cos => (TAU * z).cos(),
        }
    }
}

/// `a(y, s) = constant + Σ amp · φ(y) ψ(s)` for scalar one-dimensional fields.
#[derive(Debug, Clone)]
struct SeparableScalar {
    constant: f64,
    terms: Vec<(f64, Basis, Basis)>,
}

/// A coefficient field together with its declared structural constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    family: CoefficientFamily,
    d: usize,
    m: usize,
    declared_mu: f64,
    declared_holder: Option<(f64, f64)>,
    /// Evaluate at `(y, −s)` with transposed indices (adjoint field).
    #[serde(default)]
    adjoint: bool,
}

impl CoefficientField {
    /// Validate a built-in family and compute its declared constants.
    pub fn make_builtin(family: CoefficientFamily) -> Result<Self> {
        let check_b = |b: f64| -> Result<()> {
            if !b.is_finite() || b.abs() >= 1.0 {
                Err(HomogError::EllipticityViolated(format!(
                    "|b| = {} must be < 1",
                    b.abs()
                )))
            } else {
                Ok(())
            }
        };
        let (d, m) = match &family {
            CoefficientFamily::Constant { d, a, matrix } => {
                if !(1..=2).contains(d) {
                    return Err(HomogError::UnsupportedDimension(*d));
                }
                if let Some(mat) = matrix {
                    if mat.len() != *d || mat.iter().any(|r| r.len() != *d) {
                        return Err(HomogError::InvalidParameter(format!(
                            "constant matrix must be {d}x{d}"
                        )));
                    }
                } else if !(*a > 0.0) {
                    return Err(HomogError::EllipticityViolated(format!("a = {a} must be > 0")));
                }
                (*d, 1)
            }
            CoefficientFamily::SeparableSpace { b, d } | CoefficientFamily::SpaceTime { b, d } => {
                check_b(*b)?;
                if !(1..=2).contains(d) {
                    return Err(HomogError::UnsupportedDimension(*d));
                }
                (*d, 1)
            }
            CoefficientFamily::CheckerboardSmooth2d { b } => {
                check_b(*b)?;
                (2, 1)
            }
            CoefficientFamily::NonSymmetric2d { b, c } => {
                check_b(*b)?;
                if !c.is_finite() {
                    return Err(HomogError::InvalidParameter("c must be finite".into()));
                }
                (2, 1)
            }
            CoefficientFamily::TravelingWave { b } => {
                check_b(*b)?;
                (1, 1)
            }
            CoefficientFamily::CoupledSystem { b, c } => {
                check_b(*b)?;
                if !c.is_finite() {
                    return Err(HomogError::InvalidParameter("c must be finite".into()));
                }
                (1, 2)
            }
        };
        let mut field = Self {
            family,
            d,
            m,
            declared_mu: 0.0,
            declared_holder: None,
            adjoint: false,
        };
        let (mu, holder) = field.structural_constants()?;
        field.declared_mu = mu;
        field.declared_holder = holder;
        Ok(field)
    }

    /// Parse the JSON family description used by the command line.
    pub fn from_json(text: &str) -> Result<Self> {
        let family: CoefficientFamily = serde_json::from_str(text)?;
        Self::make_builtin(family)
    }

    pub fn family(&self) -> &CoefficientFamily {
        &self.family
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn declared_mu(&self) -> f64 {
        self.declared_mu
    }

    /// `(λ, τ)` of the parabolic Hölder bound, if the family is smooth.
    pub fn declared_holder(&self) -> Option<(f64, f64)> {
        self.declared_holder
    }

    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    pub fn is_constant(&self) -> bool {
        match &self.family {
            CoefficientFamily::Constant { .. } => true,
            CoefficientFamily::SeparableSpace { b, .. }
            | CoefficientFamily::SpaceTime { b, .. }
            | CoefficientFamily::CheckerboardSmooth2d { b }
            | CoefficientFamily::NonSymmetric2d { b, .. }
            | CoefficientFamily::TravelingWave { b }
            | CoefficientFamily::CoupledSystem { b, .. } => *b == 0.0,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        match &self.family {
            CoefficientFamily::Constant { .. }
            | CoefficientFamily::SeparableSpace { .. }
            | CoefficientFamily::CheckerboardSmooth2d { .. } => true,
            CoefficientFamily::SpaceTime { b, .. }
            | CoefficientFamily::NonSymmetric2d { b, .. }
            | CoefficientFamily::TravelingWave { b } => *b == 0.0,
            CoefficientFamily::CoupledSystem { .. } => false,
        }
    }

    /// The adjoint field `ã_{ij}^{αβ}(y, s) = a_{ji}^{βα}(y, −s)`.
    pub fn adjoint_coefficient(&self) -> CoefficientField {
        let mut out = self.clone();
        out.adjoint = !self.adjoint;
        out
    }

    fn eval_base(&self, y: &[f64], s: f64, out: &mut CoefTensor) {
        let d = self.d;
        let id = |out: &mut CoefTensor, v: f64| {
            for i in 0..d {
                out.set(i, i, 0, 0, v);
            }
        };
        match &self.family {
            CoefficientFamily::Constant { a, matrix, .. } => match matrix {
                Some(mat) => {
                    for i in 0..d {
                        for j in 0..d {
                            out.set(i, j, 0, 0, mat[i][j]);
                        }
                    }
                }
                None => id(out, *a),
            },
            CoefficientFamily::SeparableSpace { b, .. } => id(out, 1.0 + b * (TAU * y[0]).sin()),
            CoefficientFamily::SpaceTime { b, .. } => {
                id(out, 1.0 + b * (TAU * y[0]).sin() * (TAU * s).cos())
            }
            CoefficientFamily::CheckerboardSmooth2d { b } => {
                id(out, 1.0 + b * (TAU * y[0]).sin() * (TAU * y[1]).sin())
            }
            CoefficientFamily::NonSymmetric2d { b, c } => {
                let v = 1.0 + b * (TAU * y[0]).sin() * (TAU * s).cos();
                out.set(0, 0, 0, 0, v);
                out.set(1, 1, 0, 0, v);
                out.set(0, 1, 0, 0, *c);
                out.set(1, 0, 0, 0, -c);
            }
            CoefficientFamily::TravelingWave { b } => {
                out.set(0, 0, 0, 0, 1.0 + b * (TAU * (y[0] - s)).sin())
            }
            CoefficientFamily::CoupledSystem { b, c } => {
                out.set(0, 0, 0, 0, 1.0 + b * (TAU * y[0]).sin());
                out.set(0, 0, 0, 1, *c);
                out.set(0, 0, 1, 0, -c);
                out.set(0, 0, 1, 1, 1.0 + b * (TAU * (y[0] + s)).cos());
            }
        }
    }

    /// `a_{ij}^{αβ}(y, s)`; arguments are reduced mod 1 first.
    pub fn evaluate(&self, y: &[f64], s: f64) -> CoefTensor {
        let mut out = CoefTensor::zeros(self.d, self.m);
        self.evaluate_into(y, s, &mut out);
        out
    }

    pub fn evaluate_into(&self, y: &[f64], s: f64, out: &mut CoefTensor) {
        debug_assert_eq!(y.len(), self.d);
        let mut yr = [0.0; 2];
        for (k, v) in y.iter().enumerate() {
            yr[k] = v.rem_euclid(1.0);
        }
        let yr = &yr[..self.d];
        out.data.iter_mut().for_each(|v| *v = 0.0);
        if self.adjoint {
            let mut base = CoefTensor::zeros(self.d, self.m);
            self.eval_base(yr, (-s).rem_euclid(1.0), &mut base);
            for i in 0..self.d {
                for j in 0..self.d {
                    for a in 0..self.m {
                        for b in 0..self.m {
                            out.set(i, j, a, b, base.get(j, i, b, a));
                        }
                    }
                }
            }
        } else {
            self.eval_base(yr, s.rem_euclid(1.0), out);
        }
    }

    /// Scalar value for `d = m = 1` fields.
    pub fn evaluate_scalar(&self, y: f64, s: f64) -> f64 {
        debug_assert!(self.d == 1 && self.m == 1);
        let mut out = CoefTensor::zeros(1, 1);
        self.evaluate_into(&[y], s, &mut out);
        out.data[0]
    }

    fn separable_scalar(&self) -> Option<SeparableScalar> {
        if self.d != 1 || self.m != 1 {
            return None;
        }
        // time reversal flips the sign of every odd temporal factor
        let tsign = |basis: Basis| -> f64 {
            if self.adjoint && basis == Basis::Sin {
                -1.0
            } else {
                1.0
            }
        };
        let sep = match &self.family {
            CoefficientFamily::Constant { a, matrix, .. } => SeparableScalar {
                constant: matrix.as_ref().map_or(*a, |m| m[0][0]),
                terms: vec![],
            },
            CoefficientFamily::SeparableSpace { b, .. } => SeparableScalar {
                constant: 1.0,
                terms: vec![(*b, Basis::Sin, Basis::One)],
            },
            CoefficientFamily::SpaceTime { b, .. } => SeparableScalar {
                constant: 1.0,
                terms: vec![(*b, Basis::Sin, Basis::Cos)],
            },
            // sin 2π(y − s) = sin 2πy cos 2πs − cos 2πy sin 2πs
            CoefficientFamily::TravelingWave { b } => SeparableScalar {
                constant: 1.0,
                terms: vec![
                    (*b, Basis::Sin, Basis::Cos),
                    (-b * tsign(Basis::Sin), Basis::Cos, Basis::Sin),
                ],
            },
            _ => return None,
        };
        Some(sep)
    }

    /// Fast evaluator of a scalar one-dimensional field at fixed cell
    /// positions `ys` for many times.
    pub fn scalar_profile(&self, ys: &[f64]) -> Result<ScalarProfile> {
        let sep = self.separable_scalar().ok_or_else(|| {
            HomogError::Unsupported("fast profiles need a scalar one-dimensional field".into())
        })?;
        let spatial = sep
            .terms
            .iter()
            .map(|&(amp, phi, _)| ys.iter().map(|&y| amp * phi.eval(y)).collect())
            .collect();
        Ok(ScalarProfile {
            constant: sep.constant,
            spatial,
            temporal: sep.terms.iter().map(|t| t.2).collect(),
            len: ys.len(),
        })
    }

    /// `(μ, (λ, τ))` from the closed form of each family. The Hölder bound
    /// uses `|ΔA| ≤ min(G_x ρ + G_t ρ², osc)` with `ρ = |Δy| + |Δs|^{1/2}`.
    fn structural_constants(&self) -> Result<(f64, Option<(f64, f64)>)> {
        let (ellip, sup, gx, gt, osc) = match &self.family {
            CoefficientFamily::Constant { a, matrix, .. } => {
                let t = self.evaluate(&vec![0.0; self.d], 0.0);
                let e = t.ellipticity();
                if !(e > 0.0) {
                    return Err(HomogError::EllipticityViolated(format!(
                        "constant matrix has ellipticity {e}"
                    )));
                }
                let _ = (a, matrix);
                (e, t.operator_norm(), 0.0, 0.0, 0.0)
            }
            CoefficientFamily::SeparableSpace { b, .. } => {
                let b = b.abs();
                (1.0 - b, 1.0 + b, TAU * b, 0.0, 2.0 * b)
            }
            CoefficientFamily::SpaceTime { b, .. } | CoefficientFamily::TravelingWave { b } => {
                let b = b.abs();
                (1.0 - b, 1.0 + b, TAU * b, TAU * b, 2.0 * b)
            }
            CoefficientFamily::CheckerboardSmooth2d { b } => {
                let b = b.abs();
                (1.0 - b, 1.0 + b, TAU * b * 2f64.sqrt(), 0.0, 2.0 * b)
            }
            CoefficientFamily::NonSymmetric2d { b, c } => {
                let b = b.abs();
                let diag = 2f64.sqrt();
                (
                    1.0 - b,
                    ((1.0 + b).powi(2) + c * c).sqrt(),
                    TAU * b * diag,
                    TAU * b * diag,
                    2.0 * b * diag,
                )
            }
            CoefficientFamily::CoupledSystem { b, c } => {
                let b = b.abs();
                let diag = 2f64.sqrt();
                // the skew coupling drops out of the quadratic form
                (1.0 - b, 1.0 + b + c.abs(), TAU * b * diag, TAU * b, 2.0 * b * diag)
            }
        };
        if !(ellip > 0.0) {
            return Err(HomogError::EllipticityViolated(format!(
                "ellipticity bound {ellip} is not positive"
            )));
        }
        let mu = ellip.min(1.0 / sup);
        let lambda = 0.5;
        let holder = if osc == 0.0 {
            (lambda, 0.0)
        } else {
            // sup over ρ of min(gx ρ + gt ρ², osc) / ρ^λ on a fine log grid,
            // plus the crossover point where the min switches branch
            let mut tau: f64 = 0.0;
            let mut rho: f64 = 1e-6;
            while rho < 4.0 {
                let val = (gx * rho + gt * rho * rho).min(osc) / rho.powf(lambda);
                tau = tau.max(val);
                rho *= 1.001;
            }
            (lambda, tau * 1.01)
        };
        Ok((mu, Some(holder)))
    }

    /// Sampled regularity estimates. Every sup is taken over a deterministic
    /// tensor grid, so the values are lower bounds of the true suprema.
    pub fn regularity_report(
        &self,
        radii: &[f64],
        lambda: f64,
        sample_density: usize,
    ) -> Result<RegularityReport> {
        if radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(HomogError::InvalidParameter("radii must lie in (0, 1]".into()));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(HomogError::InvalidParameter("λ must lie in (0, 1)".into()));
        }
        let n = sample_density.max(2);
        let d = self.d;

        // ellipticity and sup norm on the node lattice
        let mut mu_est = f64::INFINITY;
        let mut sup: f64 = 0.0;
        let total = n.pow(d as u32 + 1);
        let mut y = vec![0.0; d];
        let mut tensor = CoefTensor::zeros(d, self.m);
        for idx in 0..total {
            let s = lattice_point(idx, n, d, &mut y);
            self.evaluate_into(&y, s, &mut tensor);
            mu_est = mu_est.min(tensor.ellipticity());
            sup = sup.max(tensor.operator_norm());
        }

        // VMO_x modulus: A#(r) = max over sampled ρ ≤ r
        let rho_levels = 8;
        let mut rhos: Vec<f64> = radii
            .iter()
            .flat_map(|&r| (1..=rho_levels).map(move |k| r * k as f64 / rho_levels as f64))
            .collect();
        rhos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rhos.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let rho_values: Vec<(f64, f64)> = rhos
            .iter()
            .map(|&rho| (rho, self.mean_oscillation(rho, n)))
            .collect();
        let vmo_values = radii
            .iter()
            .map(|&r| {
                let v = rho_values
                    .iter()
                    .filter(|(rho, _)| *rho <= r + 1e-14)
                    .fold(0.0f64, |m, (_, v)| m.max(*v));
                (r, v)
            })
            .collect();

        let holder = self.holder_estimate(lambda, n);
        Ok(RegularityReport {
            mu_estimate: mu_est,
            sup_norm: sup,
            vmo_values,
            lambda,
            holder_seminorm_estimate: holder,
        })
    }

    /// `sup_{(x,t)} ⨍_{t−ρ²}^t ⨍_B ⨍_B |A(y,s) − A(z,s)|` over `n^{d+1}`
    /// centers, with a 6-point midpoint rule per ball axis and in time.
    fn mean_oscillation(&self, rho: f64, n: usize) -> f64 {
        const Q: usize = 6;
        let d = self.d;
        let offsets: Vec<f64> = (0..Q)
            .map(|k| -rho + (2.0 * k as f64 + 1.0) * rho / Q as f64)
            .collect();
        // ball quadrature nodes (tensor points inside the ball)
        let ball: Vec<Vec<f64>> = if d == 1 {
            offsets.iter().map(|&o| vec![o]).collect()
        } else {
            let mut pts = Vec::new();
            for &a in &offsets {
                for &b in &offsets {
                    if a * a + b * b <= rho * rho {
                        pts.push(vec![a, b]);
                    }
                }
            }
            pts
        };
        let times: Vec<f64> = (0..Q).map(|k| -(k as f64 + 0.5) * rho * rho / Q as f64).collect();
        let mut best: f64 = 0.0;
        let mut center = vec![0.0; d];
        let mut vals: Vec<CoefTensor> = Vec::with_capacity(ball.len());
        for idx in 0..n.pow(d as u32 + 1) {
            let t0 = lattice_point(idx, n, d, &mut center);
            let mut acc = 0.0;
            for &dt in &times {
                vals.clear();
                for p in &ball {
                    let y: Vec<f64> = center.iter().zip(p).map(|(c, o)| c + o).collect();
                    vals.push(self.evaluate(&y, t0 + dt));
                }
                let mut pair = 0.0;
                for a in &vals {
                    for b in &vals {
                        pair += a.frobenius_distance(b);
                    }
                }
                acc += pair / (vals.len() * vals.len()) as f64;
            }
            best = best.max(acc / times.len() as f64);
        }
        best
    }

    /// `sup |A(P) − A(Q)| / (|Δy| + |Δs|^{1/2})^λ` over lattice points and
    /// dyadic displacements along each axis.
    fn holder_estimate(&self, lambda: f64, n: usize) -> f64 {
        let d = self.d;
        let mut shifts: Vec<(Vec<f64>, f64)> = Vec::new();
        for k in 1..=10 {
            let r = 0.5f64.powi(k);
            for axis in 0..d {
                let mut dy = vec![0.0; d];
                dy[axis] = r;
                shifts.push((dy, 0.0));
            }
            shifts.push((vec![0.0; d], r * r));
            let mut dy = vec![0.0; d];
            dy[0] = r;
            shifts.push((dy, r * r));
        }
        let mut best: f64 = 0.0;
        let mut p = vec![0.0; d];
        for idx in 0..n.pow(d as u32 + 1) {
            let s = lattice_point(idx, n, d, &mut p);
            let a0 = self.evaluate(&p, s);
            for (dy, ds) in &shifts {
                let q: Vec<f64> = p.iter().zip(dy).map(|(a, b)| a + b).collect();
                let a1 = self.evaluate(&q, s + ds);
                let dist = dy.iter().map(|v| v * v).sum::<f64>().sqrt() + ds.sqrt();
                best = best.max(a0.frobenius_distance(&a1) / dist.powf(lambda));
            }
        }
        best
    }
}

/// Node `idx` of the uniform `n^{d+1}` lattice on the unit cell, time-major.
fn lattice_point(idx: usize, n: usize, d: usize, y: &mut [f64]) -> f64 {
    let mut rest = idx;
    for k in (0..d).rev() {
        y[k] = (rest % n) as f64 / n as f64;
        rest /= n;
    }
    rest as f64 / n as f64
}

/// Precomputed spatial factors of a scalar separable field.
#[derive(Debug, Clone)]
pub struct ScalarProfile {
    constant: f64,
    spatial: Vec<Vec<f64>>,
    temporal: Vec<Basis>,
    len: usize,
}

impl ScalarProfile {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Write `a(y_i, s)` for every stored position.
    pub fn fill(&self, s: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = self.constant);
        let s = s.rem_euclid(1.0);
        for (sp, basis) in self.spatial.iter().zip(&self.temporal) {
            let factor = basis.eval(s);
            for (o, v) in out.iter_mut().zip(sp) {
                *o += v * factor;
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub mu_estimate: f64,
    pub sup_norm: f64,
    /// `(r, A#(r))` pairs.
    pub vmo_values: Vec<(f64, f64)>,
    pub lambda: f64,
    pub holder_seminorm_estimate: f64,
}

impl RegularityReport {
    /// Whether the sampled constants are consistent with ellipticity `mu`.
    pub fn accepts(&self, mu: f64) -> bool {
        self.mu_estimate > 0.0 && self.mu_estimate >= mu * (1.0 - 1e-12) && self.sup_norm <= (1.0 / mu) * (1.0 + 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sep(b: f64) -> CoefficientField {
        CoefficientField::make_builtin(CoefficientFamily::SeparableSpace { b, d: 1 }).unwrap()
    }

    fn st(b: f64) -> CoefficientField {
        CoefficientField::make_builtin(CoefficientFamily::SpaceTime { b, d: 1 }).unwrap()
    }

    #[test]
    fn families_parse_from_names() {
        let f: CoefficientFamily = "space_time:0.3".parse().unwrap();
        assert_eq!(f, CoefficientFamily::SpaceTime { b: 0.3, d: 1 });
        let f: CoefficientFamily = "constant".parse().unwrap();
        assert!(matches!(f, CoefficientFamily::Constant { a, .. } if a == 1.0));
        let f: CoefficientFamily = r#"{"family": "traveling_wave", "params": {"b": 0.2}}"#.parse().unwrap();
        assert_eq!(f, CoefficientFamily::TravelingWave { b: 0.2 });
        assert!("spacetime".parse::<CoefficientFamily>().is_err());
        assert!("space_time:x".parse::<CoefficientFamily>().is_err());
    }

    #[test]
    fn builtin_examples() {
        let c = CoefficientField::make_builtin(CoefficientFamily::Constant {
            d: 1,
            a: 1.0,
            matrix: None,
        })
        .unwrap();
        assert_eq!(c.declared_mu(), 1.0);
        assert_eq!(c.evaluate_scalar(0.3, 0.7), 1.0);

        let s = sep(0.5);
        assert!((s.declared_mu() - 0.5).abs() < 1e-15);

        let err = CoefficientField::make_builtin(CoefficientFamily::SeparableSpace { b: 1.0, d: 1 })
            .unwrap_err();
        assert!(err.to_string().contains("ellipticity violated"));
    }

    #[test]
    fn evaluate_examples() {
        assert!((sep(0.5).evaluate_scalar(0.25, 0.0) - 1.5).abs() < 1e-15);
        assert!((st(0.5).evaluate_scalar(0.25, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn periodic_under_unit_shifts() {
        let f = CoefficientField::make_builtin(CoefficientFamily::NonSymmetric2d { b: 0.4, c: 0.3 }).unwrap();
        let a = f.evaluate(&[0.25, 0.5], 0.125);
        let b = f.evaluate(&[1.25, -0.5], 2.125);
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip() {
        let f = CoefficientField::from_json(r#"{"family": "space_time", "params": {"b": 0.5}}"#).unwrap();
        assert_eq!(f.family(), &CoefficientFamily::SpaceTime { b: 0.5, d: 1 });
        let text = serde_json::to_string(f.family()).unwrap();
        assert_eq!(CoefficientField::from_json(&text).unwrap(), f);
    }

    #[test]
    fn adjoint_transposes_and_reverses_time() {
        let f = CoefficientField::make_builtin(CoefficientFamily::NonSymmetric2d { b: 0.0, c: 0.3 }).unwrap();
        let a = f.evaluate(&[0.1, 0.2], 0.3);
        let t = f.adjoint_coefficient().evaluate(&[0.1, 0.2], 0.3);
        assert_eq!(t.get(0, 1, 0, 0), a.get(1, 0, 0, 0));
        assert_eq!(t.get(1, 0, 0, 0), a.get(0, 1, 0, 0));

        let tw = CoefficientField::make_builtin(CoefficientFamily::TravelingWave { b: 0.5 }).unwrap();
        let adj = tw.adjoint_coefficient();
        assert!((adj.evaluate_scalar(0.1, 0.3) - tw.evaluate_scalar(0.1, -0.3)).abs() < 1e-15);
        let twice = adj.adjoint_coefficient();
        assert_eq!(twice.evaluate_scalar(0.37, 0.81), tw.evaluate_scalar(0.37, 0.81));
    }

    #[test]
    fn profile_matches_pointwise_evaluation() {
        let ys: Vec<f64> = (0..37).map(|i| i as f64 * 0.113 - 1.7).collect();
        for field in [
            st(0.5),
            sep(0.3),
            CoefficientField::make_builtin(CoefficientFamily::TravelingWave { b: 0.5 }).unwrap(),
            CoefficientField::make_builtin(CoefficientFamily::TravelingWave { b: 0.5 })
                .unwrap()
                .adjoint_coefficient(),
        ] {
            let prof = field.scalar_profile(&ys).unwrap();
            let mut out = vec![0.0; ys.len()];
            for s in [0.0, 0.3, -1.27, 5.9] {
                prof.fill(s, &mut out);
                for (y, v) in ys.iter().zip(&out) {
                    assert!((v - field.evaluate_scalar(*y, s)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn ellipticity_holds_on_samples() {
        let fields = [
            st(0.5),
            sep(0.9),
            CoefficientField::make_builtin(CoefficientFamily::CheckerboardSmooth2d { b: 0.6 }).unwrap(),
            CoefficientField::make_builtin(CoefficientFamily::NonSymmetric2d { b: 0.3, c: 0.4 }).unwrap(),
            CoefficientField::make_builtin(CoefficientFamily::CoupledSystem { b: 0.3, c: 0.5 }).unwrap(),
        ];
        for f in &fields {
            let rep = f.regularity_report(&[0.5], 0.5, 8).unwrap();
            assert!(rep.accepts(f.declared_mu()), "{:?}: {:?}", f.family(), rep);
        }
    }

    #[test]
    fn constant_family_has_no_oscillation() {
        let c = CoefficientField::make_builtin(CoefficientFamily::Constant { d: 1, a: 2.0, matrix: None }).unwrap();
        let rep = c.regularity_report(&[0.1, 0.5, 1.0], 0.5, 4).unwrap();
        assert!(rep.vmo_values.iter().all(|(_, v)| *v == 0.0));
        assert_eq!(rep.holder_seminorm_estimate, 0.0);
    }

    #[test]
    fn vmo_modulus_decreases_to_zero() {
        let rep = sep(0.5).regularity_report(&[0.01, 0.05, 0.2, 0.8], 0.5, 6).unwrap();
        let vals: Vec<f64> = rep.vmo_values.iter().map(|p| p.1).collect();
        for w in vals.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(vals[0] < 0.05 * vals[3]);
    }

    #[test]
    fn holder_estimate_is_deterministic_and_bounded() {
        let f = st(0.5);
        let r1 = f.regularity_report(&[0.5], 0.5, 12).unwrap();
        let r2 = f.regularity_report(&[0.5], 0.5, 12).unwrap();
        assert_eq!(r1.holder_seminorm_estimate, r2.holder_seminorm_estimate);
        let (_, tau) = f.declared_holder().unwrap();
        assert!(r1.holder_seminorm_estimate > 0.0);
        assert!(r1.holder_seminorm_estimate <= tau);
    }
}
