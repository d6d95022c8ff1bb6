//! Right-hand-side terms of the incompressible MHD system
//!
//! ```text
//! u_t − Re⁻¹Δu + u·∇u − s B·∇B + ∇P = f,      ∇·u = 0
//! B_t − Re_m⁻¹ΔB + u·∇B − B·∇u        = ∇×g,   ∇·B = 0
//! ```
//!
//! plus the forcings used by the experiments.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{MhdError, Result};
use crate::field::{ScalarField, VectorField2};
use crate::grid::Grid;

/// Physical and numerical parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// 1/Re; zero is the ideal (inviscid) case.
    pub re_inv: f64,
    /// 1/Re_m; zero is the ideal (non-resistive) case.
    pub rem_inv: f64,
    /// Coupling number.
    pub s: f64,
    pub dt: f64,
    pub t_end: f64,
    pub filter_enabled: bool,
    /// Filter the recovered pressure as well (it never feeds back into u, B).
    pub filter_pressure: bool,
    /// Carry the modified pressure in the state history.
    pub track_pressure: bool,
    /// Relative fixed-point tolerance on the combined (u, B) coefficients.
    pub picard_tol: f64,
    pub picard_max_iters: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            re_inv: 0.0,
            rem_inv: 0.0,
            s: 1.0,
            dt: 0.01,
            t_end: 2.7,
            filter_enabled: true,
            filter_pressure: true,
            track_pressure: true,
            picard_tol: 1e-10,
            picard_max_iters: 100,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MhdError::InvalidParams(msg));
        for (name, v) in [("re_inv", self.re_inv), ("rem_inv", self.rem_inv), ("s", self.s)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.picard_tol.is_finite() && self.picard_tol > 0.0) {
            return bad(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.picard_max_iters == 0 {
            return bad("picard_max_iters must be at least 1".into());
        }
        Ok(())
    }

    /// Number of uniform steps to reach `t_end`. A `t_end` that is not a
    /// multiple of `dt` is snapped to the nearest one.
    pub fn num_steps(&self) -> usize {
        let steps = (self.t_end / self.dt).round().max(0.0) as usize;
        let snapped = steps as f64 * self.dt;
        if (snapped - self.t_end).abs() > 1e-12 {
            log::warn!(
                "t_end = {} is not a multiple of dt = {}; snapping to {}",
                self.t_end,
                self.dt,
                snapped
            );
        }
        steps
    }
}

/// `a·∇b`, every product dealiased; no projection.
pub fn advect(a: &VectorField2, b: &VectorField2) -> Result<VectorField2> {
    a.grid().ensure_same(b.grid())?;
    let grid = a.grid();
    let at = a.truncate();
    let (ax, ay) = (at.x.samples(), at.y.samples());
    let mut out = Vec::with_capacity(2);
    for comp in b.components() {
        let c = comp.truncate();
        let dx = c.partial(0);
        let dy = c.partial(1);
        let (dx, dy) = (dx.samples(), dy.samples());
        let prod: Vec<f64> = (0..grid.len()).map(|i| ax[i] * dx[i] + ay[i] * dy[i]).collect();
        out.push(ScalarField::from_samples(grid, prod).truncate());
    }
    let y = out.pop().unwrap();
    let x = out.pop().unwrap();
    VectorField2::new(x, y)
}

/// `u·∇u − s B·∇B`.
pub fn momentum_nonlinear(u: &VectorField2, b: &VectorField2, s: f64) -> Result<VectorField2> {
    let uu = advect(u, u)?;
    if s == 0.0 {
        return Ok(uu);
    }
    let bb = advect(b, b)?;
    VectorField2::lincomb(&[(1.0, &uu), (-s, &bb)])
}

/// `u·∇B − B·∇u`.
pub fn induction_nonlinear(u: &VectorField2, b: &VectorField2) -> Result<VectorField2> {
    let ub = advect(u, b)?;
    let bu = advect(b, u)?;
    VectorField2::lincomb(&[(1.0, &ub), (-1.0, &bu)])
}

/// Both nonlinear terms from a single set of transforms.
///
/// Equal to `(momentum_nonlinear(u, b, s), induction_nonlinear(u, b))` up to
/// rounding; this is the path the stepper uses.
pub fn nonlinear_terms(u: &VectorField2, b: &VectorField2, s: f64) -> Result<(VectorField2, VectorField2)> {
    u.grid().ensure_same(b.grid())?;
    let grid = u.grid();
    let ut = u.truncate();
    let bt = b.truncate();
    // values and gradients of each component, in physical space
    let phys = |f: &ScalarField| -> [Vec<f64>; 3] {
        [
            f.samples().to_vec(),
            f.partial(0).samples().to_vec(),
            f.partial(1).samples().to_vec(),
        ]
    };
    let [ux, uxx, uxy] = phys(&ut.x);
    let [uy, uyx, uyy] = phys(&ut.y);
    let [bx, bxx, bxy] = phys(&bt.x);
    let [by, byx, byy] = phys(&bt.y);

    let len = grid.len();
    let mut mx = vec![0.0; len];
    let mut my = vec![0.0; len];
    let mut ix = vec![0.0; len];
    let mut iy = vec![0.0; len];
    for i in 0..len {
        mx[i] = ux[i] * uxx[i] + uy[i] * uxy[i] - s * (bx[i] * bxx[i] + by[i] * bxy[i]);
        my[i] = ux[i] * uyx[i] + uy[i] * uyy[i] - s * (bx[i] * byx[i] + by[i] * byy[i]);
        ix[i] = ux[i] * bxx[i] + uy[i] * bxy[i] - (bx[i] * uxx[i] + by[i] * uxy[i]);
        iy[i] = ux[i] * byx[i] + uy[i] * byy[i] - (bx[i] * uyx[i] + by[i] * uyy[i]);
    }
    let wrap = |v: Vec<f64>| ScalarField::from_samples(grid, v).truncate();
    Ok((
        VectorField2::new(wrap(mx), wrap(my))?,
        VectorField2::new(wrap(ix), wrap(iy))?,
    ))
}

/// Body forcing `f` and magnetic forcing `G = ∇×g` as functions of time.
pub trait Forcing: Send + Sync {
    /// Both forcings sampled on `grid` at time `t`.
    fn forcing_at(&self, grid: &Arc<Grid>, t: f64) -> (VectorField2, VectorField2);

    /// True if the forcing is identically zero (lets callers skip work).
    fn is_zero(&self) -> bool {
        false
    }
}

/// `f = ∇×g = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn forcing_at(&self, grid: &Arc<Grid>, _t: f64) -> (VectorField2, VectorField2) {
        (VectorField2::zeros(grid), VectorField2::zeros(grid))
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Periodic manufactured solution on `[0, 2π)²`:
///
/// ```text
/// u = (1+t²) (sin y, sin x)
/// B = (1+t²) (sin 2y / 3, 2 sin 2x / 3)
/// P = 0.1 (1+t²) sin(x+y)
/// ```
///
/// The forcings are derived by hand from the equations; the residual tests
/// in this module check the derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedSolution {
    pub re_inv: f64,
    pub rem_inv: f64,
    pub s: f64,
}

const B1: f64 = 1.0 / 3.0;
const B2: f64 = 2.0 / 3.0;
const P_AMP: f64 = 0.1;

impl ManufacturedSolution {
    pub fn new(params: &SolverParams) -> Self {
        ManufacturedSolution {
            re_inv: params.re_inv,
            rem_inv: params.rem_inv,
            s: params.s,
        }
    }

    /// Domain edge length the closed forms are periodic on.
    pub const LENGTH: f64 = 2.0 * PI;

    fn amp(t: f64) -> f64 {
        1.0 + t * t
    }

    pub fn u_exact(&self, grid: &Arc<Grid>, t: f64) -> VectorField2 {
        let a = Self::amp(t);
        VectorField2::from_fn(grid, move |_, y| a * y.sin(), move |x, _| a * x.sin())
    }

    pub fn b_exact(&self, grid: &Arc<Grid>, t: f64) -> VectorField2 {
        let a = Self::amp(t);
        VectorField2::from_fn(
            grid,
            move |_, y| a * B1 * (2.0 * y).sin(),
            move |x, _| a * B2 * (2.0 * x).sin(),
        )
    }

    pub fn p_exact(&self, grid: &Arc<Grid>, t: f64) -> ScalarField {
        let a = Self::amp(t);
        ScalarField::from_fn(grid, move |x, y| P_AMP * a * (x + y).sin())
    }

    /// Time derivatives of the exact fields.
    pub fn u_t_exact(&self, grid: &Arc<Grid>, t: f64) -> VectorField2 {
        VectorField2::from_fn(grid, move |_, y| 2.0 * t * y.sin(), move |x, _| 2.0 * t * x.sin())
    }

    pub fn b_t_exact(&self, grid: &Arc<Grid>, t: f64) -> VectorField2 {
        VectorField2::from_fn(
            grid,
            move |_, y| 2.0 * t * B1 * (2.0 * y).sin(),
            move |x, _| 2.0 * t * B2 * (2.0 * x).sin(),
        )
    }
}

impl Forcing for ManufacturedSolution {
    fn forcing_at(&self, grid: &Arc<Grid>, t: f64) -> (VectorField2, VectorField2) {
        let a = Self::amp(t);
        let dadt = 2.0 * t;
        let (nu, eta, s) = (self.re_inv, self.rem_inv, self.s);
        let a2 = a * a;
        let lorentz = 2.0 * B1 * B2 * s * a2;
        let f = VectorField2::from_fn(
            grid,
            move |x, y| {
                (dadt + nu * a) * y.sin() + a2 * x.sin() * y.cos()
                    - lorentz * (2.0 * x).sin() * (2.0 * y).cos()
                    + P_AMP * a * (x + y).cos()
            },
            move |x, y| {
                (dadt + nu * a) * x.sin() + a2 * y.sin() * x.cos()
                    - lorentz * (2.0 * y).sin() * (2.0 * x).cos()
                    + P_AMP * a * (x + y).cos()
            },
        );
        let g = VectorField2::from_fn(
            grid,
            move |x, y| {
                (dadt + 4.0 * eta * a) * B1 * (2.0 * y).sin()
                    + a2 * (2.0 * B1 * x.sin() * (2.0 * y).cos() - B2 * (2.0 * x).sin() * y.cos())
            },
            move |x, y| {
                (dadt + 4.0 * eta * a) * B2 * (2.0 * x).sin()
                    + a2 * (2.0 * B2 * y.sin() * (2.0 * x).cos() - B1 * (2.0 * y).sin() * x.cos())
            },
        );
        (f, g)
    }
}

/// Orszag–Tang initial velocity and magnetic field on `[0, 2π)²`.
pub fn orszag_tang_initial(grid: &Arc<Grid>) -> (VectorField2, VectorField2) {
    let u = VectorField2::from_fn(grid, |_, y| -(y + 2.0).sin(), |x, _| (x + 1.4).sin());
    let b = VectorField2::from_fn(
        grid,
        |_, y| -(y + 6.2).sin() / 3.0,
        |x, _| 2.0 * (2.0 * x + 2.3).sin() / 3.0,
    );
    (u, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::{random_field, random_solenoidal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Arc<Grid> {
        Grid::periodic_2pi(32).unwrap()
    }

    fn rel(a: &VectorField2, b: &VectorField2) -> f64 {
        let d = VectorField2::lincomb(&[(1.0, a), (-1.0, b)]).unwrap();
        d.l2_norm() / b.l2_norm().max(1e-300)
    }

    #[test]
    fn advect_examples() {
        let g = grid();
        let w = VectorField2::from_fn(&g, |_, y| y.sin(), |_, _| 0.0);
        assert!(advect(&w, &w).unwrap().l2_norm() < 1e-12);

        let c = VectorField2::from_fn(&g, |_, _| 1.0, |_, _| 0.0);
        let v = VectorField2::from_fn(&g, |x, _| x.sin(), |_, _| 0.0);
        let expect = VectorField2::from_fn(&g, |x, _| x.cos(), |_, _| 0.0);
        assert!(rel(&advect(&c, &v).unwrap(), &expect) < 1e-12);
    }

    #[test]
    fn advection_is_skew_for_solenoidal_transport() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = random_solenoidal(&g, &mut rng);
            let v = random_field(&g, &mut rng);
            let a = advect(&u, &v).unwrap();
            let val = a.inner(&v.truncate()).unwrap();
            let scale = a.l2_norm() * v.l2_norm();
            assert!(val.abs() <= 1e-11 * scale, "{val} vs {scale}");
        }
    }

    #[test]
    fn coupling_identity() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let b = random_solenoidal(&g, &mut rng);
            let v = random_field(&g, &mut rng).truncate();
            let w = random_field(&g, &mut rng).truncate();
            let lhs = advect(&b, &v).unwrap().inner(&w).unwrap();
            let rhs = -advect(&b, &w).unwrap().inner(&v).unwrap();
            let scale = advect(&b, &v).unwrap().l2_norm() * w.l2_norm();
            assert!((lhs - rhs).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn momentum_and_induction_special_cases() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_solenoidal(&g, &mut rng);
        let b = random_solenoidal(&g, &mut rng);
        let z = VectorField2::zeros(&g);
        assert!(momentum_nonlinear(&u, &u, 1.0).unwrap().l2_norm() < 1e-12 * advect(&u, &u).unwrap().l2_norm());
        let uu = advect(&u, &u).unwrap();
        assert!(rel(&momentum_nonlinear(&u, &z, 0.7).unwrap(), &uu) < 1e-14);
        assert!(rel(&momentum_nonlinear(&u, &b, 0.0).unwrap(), &uu) < 1e-14);
        assert!(induction_nonlinear(&u, &u).unwrap().l2_norm() == 0.0);
        assert!(induction_nonlinear(&u, &z).unwrap().l2_norm() == 0.0);
    }

    #[test]
    fn fused_terms_match_separate_ones() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = random_field(&g, &mut rng);
        let b = random_field(&g, &mut rng);
        let (m, i) = nonlinear_terms(&u, &b, 0.6).unwrap();
        assert!(rel(&m, &momentum_nonlinear(&u, &b, 0.6).unwrap()) < 1e-13);
        assert!(rel(&i, &induction_nonlinear(&u, &b).unwrap()) < 1e-13);
    }

    #[test]
    fn nonlinear_terms_are_bilinear() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u1 = random_field(&g, &mut rng);
        let u2 = random_field(&g, &mut rng);
        let b = random_field(&g, &mut rng);
        let (a, c) = (0.7, -1.3);
        let comb = VectorField2::lincomb(&[(a, &u1), (c, &u2)]).unwrap();
        let lhs = induction_nonlinear(&comb, &b).unwrap();
        let rhs = VectorField2::lincomb(&[
            (a, &induction_nonlinear(&u1, &b).unwrap()),
            (c, &induction_nonlinear(&u2, &b).unwrap()),
        ])
        .unwrap();
        assert!(rel(&lhs, &rhs) < 1e-12);
        // momentum is quadratic in u, so check the polarization form through B with u = 0
        let z = VectorField2::zeros(&g);
        let lhs = momentum_nonlinear(&z, &comb, 1.0).unwrap().scale(-1.0);
        let bb = |p: &VectorField2, q: &VectorField2| advect(p, q).unwrap();
        let rhs = VectorField2::lincomb(&[
            (a * a, &bb(&u1, &u1)),
            (a * c, &bb(&u1, &u2)),
            (a * c, &bb(&u2, &u1)),
            (c * c, &bb(&u2, &u2)),
        ])
        .unwrap();
        assert!(rel(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn outputs_are_real() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_field(&g, &mut rng);
        let b = random_field(&g, &mut rng);
        let (m, i) = nonlinear_terms(&u, &b, 1.0).unwrap();
        for f in [&m.x, &m.y, &i.x, &i.y] {
            assert!(f.imaginary_residual() < 1e-12);
        }
    }

    fn manufactured_residuals(t: f64) -> (f64, f64) {
        let g = grid();
        let params = SolverParams { re_inv: 0.3, rem_inv: 0.7, s: 0.9, ..Default::default() };
        let ms = ManufacturedSolution::new(&params);
        let u = ms.u_exact(&g, t);
        let b = ms.b_exact(&g, t);
        let (f, gf) = ms.forcing_at(&g, t);
        let (mom, ind) = nonlinear_terms(&u, &b, params.s).unwrap();
        let r_mom = VectorField2::lincomb(&[
            (1.0, &ms.u_t_exact(&g, t)),
            (-params.re_inv, &u.laplacian()),
            (1.0, &mom),
            (-1.0, &f),
        ])
        .unwrap()
        .leray_project();
        let r_ind = VectorField2::lincomb(&[
            (1.0, &ms.b_t_exact(&g, t)),
            (-params.rem_inv, &b.laplacian()),
            (1.0, &ind),
            (-1.0, &gf),
        ])
        .unwrap();
        (r_mom.l2_norm(), r_ind.l2_norm())
    }

    #[test]
    fn manufactured_forcing_satisfies_equations() {
        for t in [0.0, 0.137, 0.5, 0.93] {
            let (rm, ri) = manufactured_residuals(t);
            assert!(rm < 1e-10 && ri < 1e-10, "t={t}: {rm:e} {ri:e}");
        }
    }

    #[test]
    fn manufactured_fields_are_solenoidal() {
        let g = grid();
        let ms = ManufacturedSolution::new(&SolverParams::default());
        for t in [0.0, 0.4, 1.0] {
            assert!(ms.u_exact(&g, t).divergence().l2_norm() < 1e-11);
            assert!(ms.b_exact(&g, t).divergence().l2_norm() < 1e-11);
            assert!(ms.forcing_at(&g, t).1.divergence().l2_norm() < 1e-11);
        }
    }

    #[test]
    fn orszag_tang_has_no_forcing_and_is_solenoidal() {
        let g = grid();
        let (f, gf) = NoForcing.forcing_at(&g, 1.0);
        assert_eq!(f.l2_norm(), 0.0);
        assert_eq!(gf.l2_norm(), 0.0);
        let (u, b) = orszag_tang_initial(&g);
        assert!(u.divergence().l2_norm() < 1e-13);
        assert!(b.divergence().l2_norm() < 1e-13);
    }

    #[test]
    fn params_validation() {
        assert!(SolverParams::default().validate().is_ok());
        let p = SolverParams { dt: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = SolverParams { re_inv: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = SolverParams { dt: 0.1, t_end: 1.0, ..Default::default() };
        assert_eq!(p.num_steps(), 10);
        let p = SolverParams { dt: 0.01, t_end: 2.7, ..Default::default() };
        assert_eq!(p.num_steps(), 270);
    }
}
