//! Scalar and two-component fields on a [`Grid`] with spectral calculus.
//!
//! A field keeps its Fourier coefficients and its real samples lazily: it is
//! built from one representation and the other is computed on first use and
//! cached. Spectral operators consume coefficients, products consume samples.
//!
//! Coefficients are normalized Fourier-series coefficients, so the L² inner
//! product over the domain is `area * Σ_k Re(f̂(k) conj(ĝ(k)))`.

use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex64;

use crate::error::{MhdError, Result};
use crate::grid::Grid;
use crate::par;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Real scalar field on a periodic grid.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    coeffs: OnceLock<Vec<Complex64>>,
    samples: OnceLock<Vec<f64>>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("has_coeffs", &self.coeffs.get().is_some())
            .field("has_samples", &self.samples.get().is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_samples(grid: &Arc<Grid>, samples: Vec<f64>) -> Self {
        assert_eq!(samples.len(), grid.len(), "sample count does not match grid");
        ScalarField {
            grid: grid.clone(),
            coeffs: OnceLock::new(),
            samples: OnceLock::from(samples),
        }
    }

    /// Build from coefficients. The caller is responsible for conjugate
    /// symmetry; without it the field is not real-valued.
    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len(), "coefficient count does not match grid");
        ScalarField {
            grid: grid.clone(),
            coeffs: OnceLock::from(coeffs),
            samples: OnceLock::new(),
        }
    }

    /// Sample a closed-form function at the grid points.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Self {
        let n = grid.n();
        let samples = par::build_rows(n, n, |iy, row| {
            for (ix, v) in row.iter_mut().enumerate() {
                let (x, y) = grid.point(ix, iy);
                *v = f(x, y);
            }
        });
        Self::from_samples(grid, samples)
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField {
            grid: grid.clone(),
            coeffs: OnceLock::from(vec![Complex64::default(); grid.len()]),
            samples: OnceLock::from(vec![0.0; grid.len()]),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let s = self.samples.get().expect("field has no representation");
            self.grid.forward(s)
        })
    }

    pub fn samples(&self) -> &[f64] {
        self.samples.get_or_init(|| {
            let c = self.coeffs.get().expect("field has no representation");
            self.grid.inverse(c)
        })
    }

    /// Largest imaginary part of the inverse transform, relative to the
    /// largest real part. Zero for conjugate-symmetric data.
    pub fn imaginary_residual(&self) -> f64 {
        let z = self.grid.inverse_complex(self.coeffs());
        let re = z.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
        let im = z.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
        if re == 0.0 { im } else { im / re }
    }

    /// New field from a per-mode map over the coefficients.
    fn map_modes(&self, f: impl Fn(usize, usize, Complex64) -> Complex64 + Sync + Send) -> Self {
        let n = self.grid.n();
        let src = self.coeffs();
        let out = par::build_rows(n, n, |iy, row| {
            for (ix, c) in row.iter_mut().enumerate() {
                *c = f(ix, iy, src[iy * n + ix]);
            }
        });
        Self::from_coeffs(&self.grid, out)
    }

    /// Derivative along x (`axis = 0`) or y (`axis = 1`).
    pub fn partial(&self, axis: usize) -> Self {
        let k = self.grid.deriv_wavenumbers();
        self.map_modes(|ix, iy, c| {
            let kk = if axis == 0 { k[ix] } else { k[iy] };
            I * kk * c
        })
    }

    pub fn laplacian(&self) -> Self {
        let k = self.grid.deriv_wavenumbers();
        self.map_modes(|ix, iy, c| -(k[ix] * k[ix] + k[iy] * k[iy]) * c)
    }

    pub fn gradient(&self) -> VectorField2 {
        VectorField2::new_unchecked(self.partial(0), self.partial(1))
    }

    /// Zero every mode outside the two-thirds dealiasing region.
    pub fn truncate(&self) -> Self {
        let g = self.grid.clone();
        self.map_modes(move |ix, iy, c| if g.is_retained(ix, iy) { c } else { Complex64::default() })
    }

    /// Per-mode multiplier depending on `|k|²` (derivative wavenumbers).
    pub fn apply_symbol(&self, symbol: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        let k = self.grid.deriv_wavenumbers();
        self.map_modes(|ix, iy, c| symbol(k[ix] * k[ix] + k[iy] * k[iy]) * c)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map_modes(|_, _, c| a * c)
    }

    /// Spectral linear combination `Σ a_i f_i`.
    pub fn lincomb(terms: &[(f64, &ScalarField)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or_else(|| {
            MhdError::InvalidParams("empty linear combination".into())
        })?;
        let grid = first.grid.clone();
        for (_, f) in &terms[1..] {
            grid.ensure_same(&f.grid)?;
        }
        let parts: Vec<(f64, &[Complex64])> = terms.iter().map(|(a, f)| (*a, f.coeffs())).collect();
        let n = grid.n();
        let out = par::build_rows(n, n, |iy, row| {
            for (ix, c) in row.iter_mut().enumerate() {
                let idx = iy * n + ix;
                *c = parts.iter().map(|(a, v)| *a * v[idx]).sum();
            }
        });
        Ok(Self::from_coeffs(&grid, out))
    }

    /// Apply a real-linear three-level stencil coefficient-wise.
    pub fn stencil3(
        &self,
        b: &ScalarField,
        c: &ScalarField,
        f: impl Fn(f64, f64, f64) -> f64 + Sync + Send,
    ) -> Result<Self> {
        self.grid.ensure_same(&b.grid)?;
        self.grid.ensure_same(&c.grid)?;
        let (x, y, z) = (self.coeffs(), b.coeffs(), c.coeffs());
        let n = self.grid.n();
        let out = par::build_rows(n, n, |iy, row| {
            for (ix, v) in row.iter_mut().enumerate() {
                let i = iy * n + ix;
                *v = Complex64::new(f(x[i].re, y[i].re, z[i].re), f(x[i].im, y[i].im, z[i].im));
            }
        });
        Ok(Self::from_coeffs(&self.grid, out))
    }

    /// Sum over modes of `weight(|k|²) * Re(a conj b)`, scaled by the area.
    fn weighted_inner(&self, other: &ScalarField, weight: impl Fn(f64) -> f64 + Sync + Send) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let (a, b) = (self.coeffs(), other.coeffs());
        let n = self.grid.n();
        let k = self.grid.deriv_wavenumbers();
        let s = par::sum_rows(n, |iy| {
            let mut acc = 0.0;
            for ix in 0..n {
                let i = iy * n + ix;
                acc += weight(k[ix] * k[ix] + k[iy] * k[iy]) * (a[i] * b[i].conj()).re;
            }
            acc
        });
        Ok(self.grid.area() * s)
    }

    /// L² inner product over the domain, computed from coefficients.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.weighted_inner(other, |_| 1.0)
    }

    /// L² inner product computed from samples (midpoint rule); agrees with
    /// [`ScalarField::inner`] by Parseval.
    pub fn inner_samples(&self, other: &ScalarField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let (a, b) = (self.samples(), other.samples());
        let n = self.grid.n();
        let s = par::sum_rows(n, |iy| (0..n).map(|ix| a[iy * n + ix] * b[iy * n + ix]).sum());
        let h = self.grid.spacing();
        Ok(s * h * h)
    }

    /// `(∇f, ∇g)`.
    pub fn grad_inner(&self, other: &ScalarField) -> Result<f64> {
        self.weighted_inner(other, |k2| k2)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        self.weighted_inner(self, |k2| 1.0 + k2).unwrap_or(0.0).max(0.0).sqrt()
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        let c = self.coeffs();
        let n = self.grid.n();
        par::sum_rows(n, |iy| c[iy * n..(iy + 1) * n].iter().map(|v| v.norm_sqr()).sum()).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.coeffs()[0].re
    }
}

/// Inner product of two scalar fields.
pub fn inner_product(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.inner(g)
}

/// Pointwise product with two-thirds dealiasing: inputs and output are
/// truncated to the retained modes.
pub fn dealiased_product(f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    f.grid.ensure_same(&g.grid)?;
    let a = f.truncate();
    let b = g.truncate();
    let (sa, sb) = (a.samples(), b.samples());
    let prod: Vec<f64> = sa.iter().zip(sb).map(|(x, y)| x * y).collect();
    Ok(ScalarField::from_samples(&f.grid, prod).truncate())
}

/// Two-component vector field.
#[derive(Clone, Debug)]
pub struct VectorField2 {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField2 {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.grid.ensure_same(&y.grid)?;
        Ok(Self { x, y })
    }

    pub(crate) fn new_unchecked(x: ScalarField, y: ScalarField) -> Self {
        Self { x, y }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::new_unchecked(ScalarField::zeros(grid), ScalarField::zeros(grid))
    }

    pub fn from_fn(
        grid: &Arc<Grid>,
        fx: impl Fn(f64, f64) -> f64 + Sync + Send,
        fy: impl Fn(f64, f64) -> f64 + Sync + Send,
    ) -> Self {
        Self::new_unchecked(ScalarField::from_fn(grid, fx), ScalarField::from_fn(grid, fy))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.x.grid()
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.x, &self.y]
    }

    fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::new_unchecked(f(&self.x), f(&self.y))
    }

    /// `∂x w_x + ∂y w_y`.
    pub fn divergence(&self) -> ScalarField {
        let k = self.grid().deriv_wavenumbers();
        let n = self.grid().n();
        let (a, b) = (self.x.coeffs(), self.y.coeffs());
        let out = par::build_rows(n, n, |iy, row| {
            for (ix, c) in row.iter_mut().enumerate() {
                let i = iy * n + ix;
                *c = I * (k[ix] * a[i] + k[iy] * b[i]);
            }
        });
        ScalarField::from_coeffs(self.grid(), out)
    }

    /// Scalar curl `∂x w_y − ∂y w_x`.
    pub fn curl2d(&self) -> ScalarField {
        let k = self.grid().deriv_wavenumbers();
        let n = self.grid().n();
        let (a, b) = (self.x.coeffs(), self.y.coeffs());
        let out = par::build_rows(n, n, |iy, row| {
            for (ix, c) in row.iter_mut().enumerate() {
                let i = iy * n + ix;
                *c = I * (k[ix] * b[i] - k[iy] * a[i]);
            }
        });
        ScalarField::from_coeffs(self.grid(), out)
    }

    pub fn laplacian(&self) -> Self {
        self.map(ScalarField::laplacian)
    }

    /// Orthogonal projection onto divergence-free fields:
    /// `ŵ − k (k·ŵ)/|k|²` for `k ≠ 0`; the mean mode passes through.
    pub fn leray_project(&self) -> Self {
        let k = self.grid().deriv_wavenumbers();
        let n = self.grid().n();
        let (a, b) = (self.x.coeffs(), self.y.coeffs());
        let mut px = vec![Complex64::default(); n * n];
        let mut py = vec![Complex64::default(); n * n];
        // Two outputs, so rows are zipped by hand rather than via build_rows.
        let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = par::map_indices(n, |iy| {
            let mut rx = Vec::with_capacity(n);
            let mut ry = Vec::with_capacity(n);
            for ix in 0..n {
                let i = iy * n + ix;
                let (kx, ky) = (k[ix], k[iy]);
                let k2 = kx * kx + ky * ky;
                if k2 == 0.0 {
                    rx.push(a[i]);
                    ry.push(b[i]);
                } else {
                    let kw = (kx * a[i] + ky * b[i]) / k2;
                    rx.push(a[i] - kx * kw);
                    ry.push(b[i] - ky * kw);
                }
            }
            (rx, ry)
        });
        for (iy, (rx, ry)) in rows.into_iter().enumerate() {
            px[iy * n..(iy + 1) * n].copy_from_slice(&rx);
            py[iy * n..(iy + 1) * n].copy_from_slice(&ry);
        }
        Self::new_unchecked(
            ScalarField::from_coeffs(self.grid(), px),
            ScalarField::from_coeffs(self.grid(), py),
        )
    }

    pub fn truncate(&self) -> Self {
        self.map(ScalarField::truncate)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|f| f.scale(a))
    }

    pub fn apply_symbol(&self, symbol: impl Fn(f64) -> f64 + Sync + Send + Copy) -> Self {
        self.map(|f| f.apply_symbol(symbol))
    }

    pub fn lincomb(terms: &[(f64, &VectorField2)]) -> Result<Self> {
        let xs: Vec<(f64, &ScalarField)> = terms.iter().map(|(a, w)| (*a, &w.x)).collect();
        let ys: Vec<(f64, &ScalarField)> = terms.iter().map(|(a, w)| (*a, &w.y)).collect();
        Ok(Self::new_unchecked(ScalarField::lincomb(&xs)?, ScalarField::lincomb(&ys)?))
    }

    pub fn stencil3(
        &self,
        b: &VectorField2,
        c: &VectorField2,
        f: impl Fn(f64, f64, f64) -> f64 + Sync + Send + Copy,
    ) -> Result<Self> {
        Ok(Self::new_unchecked(
            self.x.stencil3(&b.x, &c.x, f)?,
            self.y.stencil3(&b.y, &c.y, f)?,
        ))
    }

    pub fn inner(&self, other: &VectorField2) -> Result<f64> {
        Ok(self.x.inner(&other.x)? + self.y.inner(&other.y)?)
    }

    /// `(∇w, ∇z)` summed over components.
    pub fn grad_inner(&self, other: &VectorField2) -> Result<f64> {
        Ok(self.x.grad_inner(&other.x)? + self.y.grad_inner(&other.y)?)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        (self.x.h1_norm().powi(2) + self.y.h1_norm().powi(2)).sqrt()
    }

    pub fn coeff_norm(&self) -> f64 {
        (self.x.coeff_norm().powi(2) + self.y.coeff_norm().powi(2)).sqrt()
    }

    /// `‖∇·w‖ / ‖w‖_{H¹}`, or 0 for the zero field. Scale-free because
    /// `‖∇·w‖ ≤ √2 ‖∇w‖`.
    pub fn divergence_norm(&self) -> f64 {
        let h1 = self.h1_norm();
        if h1 == 0.0 {
            0.0
        } else {
            self.divergence().l2_norm() / h1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        Grid::periodic_2pi(16).unwrap()
    }

    fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    #[test]
    fn gradient_of_sin_x() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x, _| x.sin());
        let grad = f.gradient();
        assert!(max_diff(&grad.x, &ScalarField::from_fn(&g, |x, _| x.cos())) < 1e-12);
        assert!(max_diff(&grad.y, &ScalarField::zeros(&g)) < 1e-12);
    }

    #[test]
    fn divergence_of_cross_dependent_field_vanishes() {
        let g = grid();
        let w = VectorField2::from_fn(&g, |_, y| y.sin(), |x, _| x.sin());
        assert!(max_diff(&w.divergence(), &ScalarField::zeros(&g)) < 1e-12);
    }

    #[test]
    fn laplacian_eigenfunction() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |_, y| (2.0 * y).sin());
        let expect = ScalarField::from_fn(&g, |_, y| -4.0 * (2.0 * y).sin());
        assert!(max_diff(&f.laplacian(), &expect) < 1e-12);
    }

    #[test]
    fn curl_of_rotation() {
        let g = grid();
        // w = (-sin y, sin x): curl = cos x + cos y
        let w = VectorField2::from_fn(&g, |_, y| -y.sin(), |x, _| x.sin());
        let expect = ScalarField::from_fn(&g, |x, y| x.cos() + y.cos());
        assert!(max_diff(&w.curl2d(), &expect) < 1e-12);
    }

    #[test]
    fn leray_keeps_solenoidal_and_kills_gradients() {
        let g = grid();
        let w = VectorField2::from_fn(&g, |_, y| y.sin(), |_, _| 0.0);
        let p = w.leray_project();
        assert!(max_diff(&p.x, &w.x) < 1e-12 && max_diff(&p.y, &w.y) < 1e-12);

        let grad = ScalarField::from_fn(&g, |x, _| x.sin()).gradient();
        let p = grad.leray_project();
        assert!(p.l2_norm() < 1e-12);
    }

    #[test]
    fn leray_passes_mean_through() {
        let g = grid();
        let w = VectorField2::from_fn(&g, |_, _| 1.5, |_, _| -0.5);
        let p = w.leray_project();
        assert!((p.x.mean() - 1.5).abs() < 1e-14 && (p.y.mean() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn product_annihilator_and_closed_form() {
        let g = grid();
        let s = ScalarField::from_fn(&g, |x, _| x.sin());
        let z = dealiased_product(&s, &ScalarField::zeros(&g)).unwrap();
        assert!(z.coeff_norm() == 0.0);
        let sq = dealiased_product(&s, &s).unwrap();
        let expect = ScalarField::from_fn(&g, |x, _| 0.5 * (1.0 - (2.0 * x).cos()));
        for (a, b) in sq.coeffs().iter().zip(expect.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn norms_and_inner_products() {
        let g = grid();
        let s = ScalarField::from_fn(&g, |_, y| y.sin());
        assert!((s.l2_norm().powi(2) - 2.0 * PI * PI).abs() < 1e-12);
        let a = ScalarField::from_fn(&g, |x, _| x.sin());
        let b = ScalarField::from_fn(&g, |x, _| x.cos());
        assert!(inner_product(&a, &b).unwrap().abs() < 1e-12);
        let a = ScalarField::from_fn(&g, |_, y| (y + 2.0).sin());
        let b = ScalarField::from_fn(&g, |_, y| (y + 6.2).sin());
        let expect = 2.0 * PI * PI * (4.2f64).cos();
        assert!((a.inner(&b).unwrap() - expect).abs() < 1e-11);
        assert!((expect + 9.6774).abs() < 1e-4);
    }

    #[test]
    fn h1_norm_of_single_mode() {
        let g = grid();
        // ‖sin 2y‖² = 2π², ‖∂y sin 2y‖² = 4·2π²
        let s = ScalarField::from_fn(&g, |_, y| (2.0 * y).sin());
        assert!((s.h1_norm().powi(2) - 5.0 * 2.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = ScalarField::zeros(&Grid::periodic_2pi(8).unwrap());
        let b = ScalarField::zeros(&Grid::periodic_2pi(16).unwrap());
        assert!(matches!(a.inner(&b), Err(MhdError::GridMismatch { .. })));
        assert!(dealiased_product(&a, &b).is_err());
        assert!(VectorField2::new(a, b).is_err());
    }
}
