//! Energy, cross-helicity and the G/F-norm bookkeeping of the filtered scheme.
//!
//! G-norm of a pair of levels, with `G = [[3/2, −3/4], [−3/4, 1/2]]`:
//! `‖[a; b]‖²_G = (3/2)‖a‖² − (3/2)(a, b) + (1/2)‖b‖²` (may be negative).
//! F-norm: `‖w‖²_F = 3‖w‖²`.
//!
//! For any triple of levels,
//!
//! ```text
//! (((3/2)wⁿ⁺¹ − 2wⁿ + (1/2)wⁿ⁻¹)/Δt, 𝓕[wⁿ⁺¹])
//!     = (‖[wⁿ⁺¹; wⁿ]‖²_G − ‖[wⁿ; wⁿ⁻¹]‖²_G)/Δt + ‖wⁿ⁺¹ − 2wⁿ + wⁿ⁻¹‖²_F/(4Δt)
//! ```
//!
//! which turns the discrete energy and cross-helicity balances into exact
//! telescoping sums.

use crate::error::Result;
use crate::field::{ScalarField, VectorField2};
use crate::mhd::SolverParams;
use crate::stepper::{bdf2_numerator, interp_f, second_difference, ForcingFields, StateHistory, StepReport, TimeLevel};

/// Spaces with an L² inner product.
pub trait InnerSpace {
    fn inner_with(&self, other: &Self) -> Result<f64>;

    fn norm_sq(&self) -> f64 {
        self.inner_with(self).unwrap_or(0.0)
    }
}

impl InnerSpace for f64 {
    fn inner_with(&self, other: &Self) -> Result<f64> {
        Ok(self * other)
    }
}

impl InnerSpace for ScalarField {
    fn inner_with(&self, other: &Self) -> Result<f64> {
        self.inner(other)
    }
}

impl InnerSpace for VectorField2 {
    fn inner_with(&self, other: &Self) -> Result<f64> {
        self.inner(other)
    }
}

/// `E = (1/2)(‖u‖² + s‖B‖²)`.
pub fn energy(u: &VectorField2, b: &VectorField2, s: f64) -> f64 {
    0.5 * (u.norm_sq() + s * b.norm_sq())
}

/// `H = (1/2)(u, B)`.
pub fn cross_helicity(u: &VectorField2, b: &VectorField2) -> Result<f64> {
    Ok(0.5 * u.inner(b)?)
}

/// `‖[new; old]‖²_G`.
pub fn g_pair_norm_sq<T: InnerSpace>(new: &T, old: &T) -> Result<f64> {
    Ok(1.5 * new.norm_sq() - 1.5 * new.inner_with(old)? + 0.5 * old.norm_sq())
}

/// Bilinear G-pairing `([a_new; a_old], G [b_new; b_old])`.
pub fn g_pair_mixed<T: InnerSpace>(a_new: &T, a_old: &T, b_new: &T, b_old: &T) -> Result<f64> {
    Ok(1.5 * a_new.inner_with(b_new)? - 0.75 * a_new.inner_with(b_old)? - 0.75 * a_old.inner_with(b_new)?
        + 0.5 * a_old.inner_with(b_old)?)
}

/// `‖w‖²_F = 3‖w‖²`.
pub fn f_norm_sq<T: InnerSpace>(w: &T) -> f64 {
    3.0 * w.norm_sq()
}

/// `|Σ terms| / max |term|`, zero when every term is zero.
pub fn balance_residual(terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if scale == 0.0 {
        0.0
    } else {
        terms.iter().sum::<f64>().abs() / scale
    }
}

/// Relative residual of the G/F inner-product identity for one triple.
pub fn g_identity_residual<T: InnerSpace + TimeLevel>(next: &T, curr: &T, prev: &T, dt: f64) -> Result<f64> {
    let lhs = bdf2_numerator(next, curr, prev)?.inner_with(&interp_f(next, curr, prev)?)? / dt;
    let g_new = g_pair_norm_sq(next, curr)? / dt;
    let g_old = g_pair_norm_sq(curr, prev)? / dt;
    let damp = f_norm_sq(&second_difference(next, curr, prev)?) / (4.0 * dt);
    Ok(balance_residual(&[lhs, -g_new, g_old, -damp]))
}

/// Check `(3/4)‖new‖² − (1/4)‖old‖² ≤ ‖[new; old]‖²_G ≤ (3/2)‖new‖² + (3/4)‖old‖²`,
/// with slack for rounding relative to the largest term.
pub fn g_bounds_check<T: InnerSpace>(new: &T, old: &T) -> Result<(bool, bool)> {
    let g = g_pair_norm_sq(new, old)?;
    let (a, b) = (new.norm_sq(), old.norm_sq());
    let tol = 1e-13 * (a + b);
    Ok((0.75 * a - 0.25 * b <= g + tol, g <= 1.5 * a + 0.75 * b + tol))
}

/// Three consecutive levels of one field.
#[derive(Debug, Clone, Copy)]
pub struct Triple<'a> {
    pub next: &'a VectorField2,
    pub curr: &'a VectorField2,
    pub prev: &'a VectorField2,
}

/// Signed terms of the per-step energy and cross-helicity balances (both
/// multiplied through by Δt). Each balance sums to zero for the filtered
/// scheme.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepBalance {
    pub g_u_new: f64,
    pub g_u_old: f64,
    pub g_b_new: f64,
    pub g_b_old: f64,
    /// `Δt Re⁻¹ ‖∇𝓕[u]‖²`
    pub diss_u: f64,
    /// `Δt Re_m⁻¹ ‖∇𝓕[B]‖²` (not yet multiplied by s)
    pub diss_b: f64,
    /// `‖Iu‖²_F`
    pub f_damp_u: f64,
    /// `‖IB‖²_F`
    pub f_damp_b: f64,
    /// `Δt (f, 𝓕[u])`
    pub work_u: f64,
    /// `Δt (G, 𝓕[B])`
    pub work_b: f64,
    /// `2 ([uⁿ⁺¹; uⁿ], G [Bⁿ⁺¹; Bⁿ])`
    pub cross_g_new: f64,
    pub cross_g_old: f64,
    /// `(3/2)(Iu, IB)`
    pub cross_damp: f64,
    /// `Δt (Re⁻¹ + Re_m⁻¹)(∇𝓕[u], ∇𝓕[B])`
    pub cross_diss: f64,
    /// `Δt (f, 𝓕[B]) + Δt (G, 𝓕[u])`
    pub cross_work: f64,
    s: f64,
}

impl StepBalance {
    pub fn new(u: Triple<'_>, b: Triple<'_>, params: &SolverParams, forcing: &ForcingFields) -> Result<Self> {
        let dt = params.dt;
        let s = params.s;
        let fu = interp_f(u.next, u.curr, u.prev)?;
        let fb = interp_f(b.next, b.curr, b.prev)?;
        let iu = second_difference(u.next, u.curr, u.prev)?;
        let ib = second_difference(b.next, b.curr, b.prev)?;
        Ok(StepBalance {
            g_u_new: g_pair_norm_sq(u.next, u.curr)?,
            g_u_old: g_pair_norm_sq(u.curr, u.prev)?,
            g_b_new: g_pair_norm_sq(b.next, b.curr)?,
            g_b_old: g_pair_norm_sq(b.curr, b.prev)?,
            diss_u: dt * params.re_inv * fu.grad_inner(&fu)?,
            diss_b: dt * params.rem_inv * fb.grad_inner(&fb)?,
            f_damp_u: f_norm_sq(&iu),
            f_damp_b: f_norm_sq(&ib),
            work_u: dt * forcing.f.inner(&fu)?,
            work_b: dt * forcing.g.inner(&fb)?,
            cross_g_new: 2.0 * g_pair_mixed(u.next, u.curr, b.next, b.curr)?,
            cross_g_old: 2.0 * g_pair_mixed(u.curr, u.prev, b.curr, b.prev)?,
            cross_damp: 1.5 * iu.inner(&ib)?,
            cross_diss: dt * (params.re_inv + params.rem_inv) * fu.grad_inner(&fb)?,
            cross_work: dt * (forcing.f.inner(&fb)? + forcing.g.inner(&fu)?),
            s,
        })
    }

    fn energy_terms(&self) -> [f64; 10] {
        let s = self.s;
        [
            self.g_u_new,
            -self.g_u_old,
            s * self.g_b_new,
            -s * self.g_b_old,
            self.diss_u,
            s * self.diss_b,
            0.25 * self.f_damp_u,
            0.25 * s * self.f_damp_b,
            -self.work_u,
            -s * self.work_b,
        ]
    }

    fn helicity_terms(&self) -> [f64; 5] {
        [
            self.cross_g_new,
            -self.cross_g_old,
            self.cross_damp,
            self.cross_diss,
            -self.cross_work,
        ]
    }

    pub fn energy_residual(&self) -> f64 {
        balance_residual(&self.energy_terms())
    }

    pub fn helicity_residual(&self) -> f64 {
        balance_residual(&self.helicity_terms())
    }

    /// Everything except the new G-norms; added to the running composite.
    fn energy_increment(&self) -> f64 {
        let s = self.s;
        self.diss_u + s * self.diss_b + 0.25 * (self.f_damp_u + s * self.f_damp_b) - self.work_u - s * self.work_b
    }

    fn helicity_increment(&self) -> f64 {
        self.cross_damp + self.cross_diss - self.cross_work
    }
}

/// Relative residual of the per-step energy balance.
pub fn energy_identity_residual(u: Triple<'_>, b: Triple<'_>, params: &SolverParams, forcing: &ForcingFields) -> Result<f64> {
    Ok(StepBalance::new(u, b, params, forcing)?.energy_residual())
}

/// Relative residual of the per-step cross-helicity balance.
pub fn helicity_identity_residual(u: Triple<'_>, b: Triple<'_>, params: &SolverParams, forcing: &ForcingFields) -> Result<f64> {
    Ok(StepBalance::new(u, b, params, forcing)?.helicity_residual())
}

/// One diagnostics row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub cross_helicity: f64,
    /// `‖[uⁿ; uⁿ⁻¹]‖²_G`
    pub g_energy_u: f64,
    pub g_energy_b: f64,
    /// `‖uⁿ − 2uⁿ⁻¹ + uⁿ⁻²‖²_F`
    pub f_damp_u: f64,
    pub f_damp_b: f64,
    pub energy_identity_residual: f64,
    pub helicity_identity_residual: f64,
    pub div_u: f64,
    pub div_b: f64,
    pub picard_iters: usize,
    /// `2 ([uⁿ; uⁿ⁻¹], G [Bⁿ; Bⁿ⁻¹])`
    pub g_cross: f64,
    /// Running telescoped energy quantity; constant from step 1 on.
    pub energy_composite: f64,
    /// Running telescoped cross-helicity quantity; constant from step 1 on.
    pub helicity_composite: f64,
}

/// Builds [`DiagRecord`]s along a run and keeps the telescoped sums.
#[derive(Debug, Clone, Default)]
pub struct DiagTracker {
    energy_acc: f64,
    helicity_acc: f64,
}

impl DiagTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record for level 0. The G quantities use the pair `(w⁰, w⁰)`.
    pub fn record_initial(&mut self, u0: &VectorField2, b0: &VectorField2, params: &SolverParams) -> Result<DiagRecord> {
        self.pair_record(0, 0.0, u0, u0, b0, b0, params, 0)
    }

    /// Record for the state produced by startup (levels 1 and 0).
    pub fn record_start(&mut self, state: &StateHistory, params: &SolverParams, report: Option<&StepReport>) -> Result<DiagRecord> {
        let iters = report.map_or(0, |r| r.picard_iters);
        let rec = self.pair_record(state.step, state.t, &state.u_curr, &state.u_prev, &state.b_curr, &state.b_prev, params, iters)?;
        self.energy_acc = 0.0;
        self.helicity_acc = 0.0;
        Ok(rec)
    }

    #[allow(clippy::too_many_arguments)]
    fn pair_record(
        &mut self,
        step: usize,
        t: f64,
        u: &VectorField2,
        u_old: &VectorField2,
        b: &VectorField2,
        b_old: &VectorField2,
        params: &SolverParams,
        picard_iters: usize,
    ) -> Result<DiagRecord> {
        let g_energy_u = g_pair_norm_sq(u, u_old)?;
        let g_energy_b = g_pair_norm_sq(b, b_old)?;
        let g_cross = 2.0 * g_pair_mixed(u, u_old, b, b_old)?;
        Ok(DiagRecord {
            step,
            t,
            energy: energy(u, b, params.s),
            cross_helicity: cross_helicity(u, b)?,
            g_energy_u,
            g_energy_b,
            div_u: u.divergence_norm(),
            div_b: b.divergence_norm(),
            picard_iters,
            g_cross,
            energy_composite: g_energy_u + params.s * g_energy_b,
            helicity_composite: g_cross,
            ..Default::default()
        })
    }

    /// Record for `new` (levels n+1, n) given the state before the step
    /// (levels n, n−1) and the forcing the step used.
    pub fn record(
        &mut self,
        old: &StateHistory,
        new: &StateHistory,
        params: &SolverParams,
        forcing: &ForcingFields,
        report: &StepReport,
    ) -> Result<DiagRecord> {
        let u = Triple { next: &new.u_curr, curr: &old.u_curr, prev: &old.u_prev };
        let b = Triple { next: &new.b_curr, curr: &old.b_curr, prev: &old.b_prev };
        let bal = StepBalance::new(u, b, params, forcing)?;
        self.energy_acc += bal.energy_increment();
        self.helicity_acc += bal.helicity_increment();
        Ok(DiagRecord {
            step: new.step,
            t: new.t,
            energy: energy(&new.u_curr, &new.b_curr, params.s),
            cross_helicity: cross_helicity(&new.u_curr, &new.b_curr)?,
            g_energy_u: bal.g_u_new,
            g_energy_b: bal.g_b_new,
            f_damp_u: bal.f_damp_u,
            f_damp_b: bal.f_damp_b,
            energy_identity_residual: bal.energy_residual(),
            helicity_identity_residual: bal.helicity_residual(),
            div_u: new.u_curr.divergence_norm(),
            div_b: new.b_curr.divergence_norm(),
            picard_iters: report.picard_iters,
            g_cross: bal.cross_g_new,
            energy_composite: bal.g_u_new + params.s * bal.g_b_new + self.energy_acc,
            helicity_composite: bal.cross_g_new + self.helicity_acc,
        })
    }
}

/// Largest relative deviation of `values` from the first one.
pub fn max_relative_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    let scale = first.abs().max(f64::MIN_POSITIVE);
    it.fold(0.0, |m, v| m.max((v - first).abs() / scale))
}
