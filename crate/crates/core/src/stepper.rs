//! Time integrators: the backward Euler solve, the modular time filter, the
//! equivalent combined one-step form, and startup.
//!
//! One filtered step is
//!
//! ```text
//! Step 1:  (w̃ − wⁿ)/Δt + A(w̃) = F(tⁿ⁺¹)                 (backward Euler)
//! Step 2:  wⁿ⁺¹ = w̃ − (w̃ − 2wⁿ + wⁿ⁻¹)/3                  (filter)
//! ```
//!
//! and is algebraically the same as the two-step method
//! `((3/2)wⁿ⁺¹ − 2wⁿ + (1/2)wⁿ⁻¹)/Δt + A(𝓕[wⁿ⁺¹]) = F(tⁿ⁺¹)` with
//! `𝓕[wⁿ⁺¹] = (3/2)wⁿ⁺¹ − wⁿ + (1/2)wⁿ⁻¹`. Both routes are implemented
//! independently so they can be checked against each other.

use std::str::FromStr;
use std::sync::Arc;

use crate::error::{MhdError, Result};
use crate::field::{ScalarField, VectorField2};
use crate::grid::Grid;
use crate::mhd::{nonlinear_terms, Forcing, ManufacturedSolution, SolverParams};

/// A quantity that can be combined across three time levels.
pub trait TimeLevel: Sized {
    /// Apply a real-linear stencil `f(next, curr, prev)` elementwise.
    fn stencil(&self, curr: &Self, prev: &Self, f: impl Fn(f64, f64, f64) -> f64 + Sync + Send + Copy) -> Result<Self>;
}

impl TimeLevel for f64 {
    fn stencil(&self, curr: &Self, prev: &Self, f: impl Fn(f64, f64, f64) -> f64 + Sync + Send + Copy) -> Result<Self> {
        Ok(f(*self, *curr, *prev))
    }
}

impl TimeLevel for ScalarField {
    fn stencil(&self, curr: &Self, prev: &Self, f: impl Fn(f64, f64, f64) -> f64 + Sync + Send + Copy) -> Result<Self> {
        self.stencil3(curr, prev, f)
    }
}

impl TimeLevel for VectorField2 {
    fn stencil(&self, curr: &Self, prev: &Self, f: impl Fn(f64, f64, f64) -> f64 + Sync + Send + Copy) -> Result<Self> {
        self.stencil3(curr, prev, f)
    }
}

/// Time filter: `w̃ − (w̃ − 2wⁿ + wⁿ⁻¹)/3`.
pub fn apply_filter<T: TimeLevel>(tilde: &T, curr: &T, prev: &T) -> Result<T> {
    tilde.stencil(curr, prev, |a, b, c| a - (a - 2.0 * b + c) / 3.0)
}

/// Interpolation operator `𝓕[wⁿ⁺¹] = (3/2)wⁿ⁺¹ − wⁿ + (1/2)wⁿ⁻¹`; inverse of
/// [`apply_filter`] in its first argument.
pub fn interp_f<T: TimeLevel>(next: &T, curr: &T, prev: &T) -> Result<T> {
    next.stencil(curr, prev, |a, b, c| 1.5 * a - b + 0.5 * c)
}

/// `wⁿ⁺¹ − 2wⁿ + wⁿ⁻¹`.
pub fn second_difference<T: TimeLevel>(next: &T, curr: &T, prev: &T) -> Result<T> {
    next.stencil(curr, prev, |a, b, c| a - 2.0 * b + c)
}

/// BDF2 numerator `(3/2)wⁿ⁺¹ − 2wⁿ + (1/2)wⁿ⁻¹` (divide by Δt for a derivative).
pub fn bdf2_numerator<T: TimeLevel>(next: &T, curr: &T, prev: &T) -> Result<T> {
    next.stencil(curr, prev, |a, b, c| 1.5 * a - 2.0 * b + 0.5 * c)
}

/// Which equivalent form of the filtered scheme advances the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Backward Euler solve followed by the filter.
    #[default]
    TwoStep,
    /// Direct solve of the BDF2-like form on the 𝓕-arguments.
    Combined,
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "two_step" => Ok(Formulation::TwoStep),
            "combined" => Ok(Formulation::Combined),
            other => Err(format!("unknown formulation '{other}' (expected two_step or combined)")),
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::TwoStep => "two_step",
            Formulation::Combined => "combined",
        })
    }
}

/// The two retained time levels.
#[derive(Debug, Clone)]
pub struct StateHistory {
    /// Index of the current level (`n`).
    pub step: usize,
    /// Time of the current level (`tⁿ`).
    pub t: f64,
    pub u_prev: VectorField2,
    pub u_curr: VectorField2,
    pub b_prev: VectorField2,
    pub b_curr: VectorField2,
    pub p_prev: Option<ScalarField>,
    pub p_curr: Option<ScalarField>,
}

impl StateHistory {
    pub fn grid(&self) -> &Arc<Grid> {
        self.u_curr.grid()
    }

    /// Largest relative divergence over the four stored vector levels.
    pub fn max_divergence(&self) -> f64 {
        [&self.u_prev, &self.u_curr, &self.b_prev, &self.b_curr]
            .iter()
            .map(|w| w.divergence_norm())
            .fold(0.0, f64::max)
    }

    fn advance(&self, u: VectorField2, b: VectorField2, p: Option<ScalarField>, dt: f64) -> StateHistory {
        StateHistory {
            step: self.step + 1,
            t: self.t + dt,
            u_prev: self.u_curr.clone(),
            u_curr: u,
            b_prev: self.b_curr.clone(),
            b_curr: b,
            p_prev: self.p_curr.clone(),
            p_curr: p,
        }
    }
}

/// Per-step solver statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub picard_iters: usize,
    pub picard_residual: f64,
    pub dt_used: f64,
}

/// Forcings sampled at the new time level.
#[derive(Debug, Clone)]
pub struct ForcingFields {
    pub f: VectorField2,
    pub g: VectorField2,
}

impl ForcingFields {
    pub fn sample(forcing: &dyn Forcing, grid: &Arc<Grid>, t: f64) -> Self {
        let (f, g) = forcing.forcing_at(grid, t);
        ForcingFields { f, g }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ForcingFields {
            f: VectorField2::zeros(grid),
            g: VectorField2::zeros(grid),
        }
    }
}

/// Output of the backward Euler stage.
#[derive(Debug, Clone)]
pub struct BeSolution {
    pub u: VectorField2,
    pub b: VectorField2,
    pub p: Option<ScalarField>,
    pub report: StepReport,
}

/// Projection onto the retained divergence-free space.
fn project(w: &VectorField2) -> VectorField2 {
    w.leray_project().truncate()
}

/// Per-mode solve of `(c − ν Δ) w = r`.
fn helmholtz_solve(rhs: &VectorField2, c: f64, nu: f64) -> VectorField2 {
    rhs.apply_symbol(move |k2| 1.0 / (c + nu * k2))
}

fn picard<F>(params: &SolverParams, init: (VectorField2, VectorField2), mut update: F) -> Result<(VectorField2, VectorField2, StepReport)>
where
    F: FnMut(&VectorField2, &VectorField2) -> Result<(VectorField2, VectorField2)>,
{
    let (mut u, mut b) = init;
    let mut residual = f64::INFINITY;
    for iter in 1..=params.picard_max_iters {
        let (un, bn) = update(&u, &b)?;
        let du = VectorField2::lincomb(&[(1.0, &un), (-1.0, &u)])?;
        let db = VectorField2::lincomb(&[(1.0, &bn), (-1.0, &b)])?;
        let change = (du.coeff_norm().powi(2) + db.coeff_norm().powi(2)).sqrt();
        let size = (un.coeff_norm().powi(2) + bn.coeff_norm().powi(2)).sqrt();
        residual = if size > 0.0 { change / size } else { change };
        u = un;
        b = bn;
        if residual <= params.picard_tol {
            return Ok((
                u,
                b,
                StepReport {
                    picard_iters: iter,
                    picard_residual: residual,
                    dt_used: params.dt,
                },
            ));
        }
        if !residual.is_finite() {
            break;
        }
    }
    Err(MhdError::NonConvergence {
        iters: params.picard_max_iters,
        residual,
        step: None,
    })
}

/// Modified pressure whose gradient balances the non-solenoidal part of the
/// converged momentum equation: `ΔP = ∇·[f − (u·∇u − s B·∇B)]`, zero mean.
pub fn recover_pressure(u_star: &VectorField2, b_star: &VectorField2, s: f64, f: &VectorField2) -> Result<ScalarField> {
    let (mom, _) = nonlinear_terms(u_star, b_star, s)?;
    let r = VectorField2::lincomb(&[(1.0, &f.truncate()), (-1.0, &mom)])?;
    let div = r.divergence();
    Ok(div.apply_symbol(|k2| if k2 > 0.0 { -1.0 / k2 } else { 0.0 }))
}

/// Backward Euler stage: Picard iteration for
///
/// ```text
/// ũ = (1/Δt − Re⁻¹Δ)⁻¹ P[f + uⁿ/Δt − (ũ·∇ũ − s B̃·∇B̃)]
/// B̃ = (1/Δt − Re_m⁻¹Δ)⁻¹ P[G + Bⁿ/Δt − (ũ·∇B̃ − B̃·∇ũ)]
/// ```
///
/// started from `(uⁿ, Bⁿ)`. The pressure is recovered when the state carries it.
pub fn be_step(state: &StateHistory, params: &SolverParams, forcing: &ForcingFields) -> Result<BeSolution> {
    let dt = params.dt;
    let base_u = VectorField2::lincomb(&[(1.0, &project(&forcing.f)), (1.0 / dt, &state.u_curr)])?;
    let base_b = VectorField2::lincomb(&[(1.0, &project(&forcing.g)), (1.0 / dt, &state.b_curr)])?;
    let (u, b, report) = picard(params, (state.u_curr.clone(), state.b_curr.clone()), |u, b| {
        let (mom, ind) = nonlinear_terms(u, b, params.s)?;
        let ru = VectorField2::lincomb(&[(1.0, &base_u), (-1.0, &project(&mom))])?;
        let rb = VectorField2::lincomb(&[(1.0, &base_b), (-1.0, &project(&ind))])?;
        Ok((
            helmholtz_solve(&ru, 1.0 / dt, params.re_inv),
            helmholtz_solve(&rb, 1.0 / dt, params.rem_inv),
        ))
    })?;
    let p = match state.p_curr {
        Some(_) => Some(recover_pressure(&u, &b, params.s, &forcing.f)?),
        None => None,
    };
    Ok(BeSolution { u, b, p, report })
}

/// One step of the modular scheme: backward Euler, then the filter on u, B
/// (and P when enabled). With the filter off this is plain backward Euler.
pub fn filtered_step(state: &StateHistory, params: &SolverParams, forcing: &ForcingFields) -> Result<(StateHistory, StepReport)> {
    let be = be_step(state, params, forcing)?;
    if !params.filter_enabled {
        return Ok((state.advance(be.u, be.b, be.p, params.dt), be.report));
    }
    let u = apply_filter(&be.u, &state.u_curr, &state.u_prev)?;
    let b = apply_filter(&be.b, &state.b_curr, &state.b_prev)?;
    let p = filter_pressure(params, be.p, state)?;
    Ok((state.advance(u, b, p, params.dt), be.report))
}

fn filter_pressure(params: &SolverParams, p_tilde: Option<ScalarField>, state: &StateHistory) -> Result<Option<ScalarField>> {
    match (p_tilde, &state.p_curr, &state.p_prev) {
        (Some(pt), Some(pc), Some(pp)) if params.filter_pressure => Ok(Some(apply_filter(&pt, pc, pp)?)),
        (pt, _, _) => Ok(pt),
    }
}

/// One step of the combined formulation, solving for `wⁿ⁺¹` directly:
///
/// ```text
/// (3/(2Δt) − (3/2)νΔ) wⁿ⁺¹ = P[f − N(𝓕[w])] + (2wⁿ − wⁿ⁻¹/2)/Δt + νΔ(−wⁿ + wⁿ⁻¹/2)
/// ```
///
/// with the nonlinear terms `N` evaluated at the 𝓕-combination of the
/// current Picard iterate.
pub fn combined_step(state: &StateHistory, params: &SolverParams, forcing: &ForcingFields) -> Result<(StateHistory, StepReport)> {
    if !params.filter_enabled {
        return Err(MhdError::InvalidParams(
            "the combined formulation is the filtered scheme; it cannot run with the filter off".into(),
        ));
    }
    let dt = params.dt;
    let known = |w_curr: &VectorField2, w_prev: &VectorField2, g: &VectorField2, nu: f64| -> Result<VectorField2> {
        let hist = VectorField2::lincomb(&[(-1.0, w_curr), (0.5, w_prev)])?;
        VectorField2::lincomb(&[
            (1.0, &project(g)),
            (2.0 / dt, w_curr),
            (-0.5 / dt, w_prev),
            (nu, &hist.laplacian()),
        ])
    };
    let base_u = known(&state.u_curr, &state.u_prev, &forcing.f, params.re_inv)?;
    let base_b = known(&state.b_curr, &state.b_prev, &forcing.g, params.rem_inv)?;
    let (u, b, report) = picard(params, (state.u_curr.clone(), state.b_curr.clone()), |u, b| {
        let fu = interp_f(u, &state.u_curr, &state.u_prev)?;
        let fb = interp_f(b, &state.b_curr, &state.b_prev)?;
        let (mom, ind) = nonlinear_terms(&fu, &fb, params.s)?;
        let ru = VectorField2::lincomb(&[(1.0, &base_u), (-1.0, &project(&mom))])?;
        let rb = VectorField2::lincomb(&[(1.0, &base_b), (-1.0, &project(&ind))])?;
        Ok((
            ru.apply_symbol(|k2| 1.0 / (1.5 / dt + 1.5 * params.re_inv * k2)),
            rb.apply_symbol(|k2| 1.0 / (1.5 / dt + 1.5 * params.rem_inv * k2)),
        ))
    })?;
    let p = match state.p_curr {
        Some(_) => {
            let fu = interp_f(&u, &state.u_curr, &state.u_prev)?;
            let fb = interp_f(&b, &state.b_curr, &state.b_prev)?;
            let p_interp = recover_pressure(&fu, &fb, params.s, &forcing.f)?;
            filter_pressure(params, Some(p_interp), state)?
        }
        None => None,
    };
    Ok((state.advance(u, b, p, dt), report))
}

/// Advance one step with the chosen formulation. The combined form is only
/// used when the filter is on.
pub fn advance(
    state: &StateHistory,
    params: &SolverParams,
    formulation: Formulation,
    forcing: &ForcingFields,
) -> Result<(StateHistory, StepReport)> {
    match formulation {
        Formulation::Combined if params.filter_enabled => combined_step(state, params, forcing),
        _ => filtered_step(state, params, forcing),
    }
}

/// Build the two starting levels at `t = 0` and `t = Δt`.
///
/// With an exact solution both levels are its projected samples; otherwise
/// level 1 comes from one unfiltered backward Euler step off level 0.
pub fn startup(
    u0: &VectorField2,
    b0: &VectorField2,
    params: &SolverParams,
    forcing: &dyn Forcing,
    exact: Option<&ManufacturedSolution>,
) -> Result<(StateHistory, Option<StepReport>)> {
    params.validate()?;
    u0.grid().ensure_same(b0.grid())?;
    let grid = u0.grid().clone();
    let dt = params.dt;
    let pressure_at = |u: &VectorField2, b: &VectorField2, t: f64| -> Result<Option<ScalarField>> {
        if params.track_pressure {
            let (f, _) = forcing.forcing_at(&grid, t);
            Ok(Some(recover_pressure(u, b, params.s, &f)?))
        } else {
            Ok(None)
        }
    };
    match exact {
        Some(ms) => {
            let u_prev = project(&ms.u_exact(&grid, 0.0));
            let b_prev = project(&ms.b_exact(&grid, 0.0));
            let u_curr = project(&ms.u_exact(&grid, dt));
            let b_curr = project(&ms.b_exact(&grid, dt));
            let p_prev = pressure_at(&u_prev, &b_prev, 0.0)?;
            let p_curr = pressure_at(&u_curr, &b_curr, dt)?;
            Ok((
                StateHistory { step: 1, t: dt, u_prev, u_curr, b_prev, b_curr, p_prev, p_curr },
                None,
            ))
        }
        None => {
            let u = project(u0);
            let b = project(b0);
            let p = pressure_at(&u, &b, 0.0)?;
            let seed = StateHistory {
                step: 0,
                t: 0.0,
                u_prev: u.clone(),
                u_curr: u,
                b_prev: b.clone(),
                b_curr: b,
                p_prev: p.clone(),
                p_curr: p,
            };
            let be = be_step(&seed, params, &ForcingFields::sample(forcing, &grid, dt)).map_err(|e| e.at_step(1))?;
            Ok((seed.advance(be.u, be.b, be.p, dt), Some(be.report)))
        }
    }
}

/// Initial level 0 as a state (both slots hold the same data); used for the
/// step-0 diagnostics record.
pub fn initial_level(u0: &VectorField2, b0: &VectorField2) -> (VectorField2, VectorField2) {
    (project(u0), project(b0))
}
