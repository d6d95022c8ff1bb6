//! Experiment drivers: manufactured-solution convergence studies, the
//! Orszag–Tang conservation run and the consistency-rate study of the
//! filter and BDF2 stencils.

use std::str::FromStr;
use std::sync::Arc;

use crate::diagnostics::{DiagRecord, DiagTracker};
use crate::error::{MhdError, Result};
use crate::field::VectorField2;
use crate::grid::Grid;
use crate::mhd::{orszag_tang_initial, Forcing, ManufacturedSolution, NoForcing, SolverParams};
use crate::par;
use crate::stepper::{advance, bdf2_numerator, interp_f, startup, ForcingFields, Formulation, StateHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Manufactured,
    OrszagTang,
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "manufactured" => Ok(ExperimentKind::Manufactured),
            "orszag_tang" => Ok(ExperimentKind::OrszagTang),
            other => Err(format!("unknown run kind '{other}' (expected manufactured or orszag_tang)")),
        }
    }
}

/// How the second starting level is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Startup {
    /// Both starting levels sampled from the exact solution.
    Exact,
    /// One unfiltered backward Euler step from the initial data.
    BackwardEuler,
}

impl FromStr for Startup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Startup::Exact),
            "be" => Ok(Startup::BackwardEuler),
            other => Err(format!("unknown startup '{other}' (expected exact or be)")),
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub length: f64,
    pub params: SolverParams,
    pub kind: ExperimentKind,
    /// Time steps for a convergence study (largest first).
    pub dts: Vec<f64>,
    pub formulation: Formulation,
    pub startup: Startup,
}

impl RunConfig {
    /// Ideal Orszag–Tang setup: `n = 64`, `Δt = 0.01`, `T = 2.7`, `s = 1`.
    pub fn orszag_tang() -> Self {
        RunConfig {
            n: 64,
            length: 2.0 * std::f64::consts::PI,
            params: SolverParams { picard_tol: 1e-12, ..SolverParams::default() },
            kind: ExperimentKind::OrszagTang,
            dts: vec![],
            formulation: Formulation::TwoStep,
            startup: Startup::BackwardEuler,
        }
    }

    /// Manufactured-solution study with `Re = Re_m = s = 1` on `[0, 1]`.
    pub fn manufactured() -> Self {
        RunConfig {
            n: 64,
            length: 2.0 * std::f64::consts::PI,
            params: SolverParams {
                re_inv: 1.0,
                rem_inv: 1.0,
                s: 1.0,
                dt: 0.1,
                t_end: 1.0,
                ..SolverParams::default()
            },
            kind: ExperimentKind::Manufactured,
            dts: vec![0.1, 0.05, 0.025, 0.0125],
            formulation: Formulation::TwoStep,
            startup: Startup::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        Grid::new(self.n, self.length)?;
        if self.kind == ExperimentKind::Manufactured && (self.length - ManufacturedSolution::LENGTH).abs() > 1e-12 {
            return Err(MhdError::InvalidParams("the manufactured solution is 2π-periodic; set length = 2π".into()));
        }
        if self.kind == ExperimentKind::OrszagTang && self.startup == Startup::Exact {
            return Err(MhdError::InvalidParams("Orszag–Tang has no exact solution; use startup = be".into()));
        }
        if self.formulation == Formulation::Combined && !self.params.filter_enabled {
            return Err(MhdError::InvalidParams("formulation = combined requires the filter".into()));
        }
        for w in self.dts.windows(2) {
            if w[1] >= w[0] {
                return Err(MhdError::InvalidParams("dts must be strictly decreasing".into()));
            }
        }
        if self.dts.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(MhdError::InvalidParams("dts must be positive".into()));
        }
        Ok(())
    }
}

struct Problem {
    grid: Arc<Grid>,
    u0: VectorField2,
    b0: VectorField2,
    forcing: Box<dyn Forcing>,
    exact: Option<ManufacturedSolution>,
}

fn problem(cfg: &RunConfig) -> Result<Problem> {
    let grid = Grid::new(cfg.n, cfg.length)?;
    Ok(match cfg.kind {
        ExperimentKind::Manufactured => {
            let ms = ManufacturedSolution::new(&cfg.params);
            Problem {
                u0: ms.u_exact(&grid, 0.0),
                b0: ms.b_exact(&grid, 0.0),
                exact: Some(ms.clone()),
                forcing: Box::new(ms),
                grid,
            }
        }
        ExperimentKind::OrszagTang => {
            let (u0, b0) = orszag_tang_initial(&grid);
            Problem { u0, b0, forcing: Box::new(NoForcing), exact: None, grid }
        }
    })
}

/// Run `cfg` at its `params.dt` to `params.t_end`, handing every record (and
/// the state, when one exists) to `on_record` as soon as it is produced.
/// Level 0 has no state.
pub fn simulate(
    cfg: &RunConfig,
    mut on_record: impl FnMut(&DiagRecord, Option<&StateHistory>) -> Result<()>,
) -> Result<StateHistory> {
    cfg.validate()?;
    let pb = problem(cfg)?;
    let params = &cfg.params;
    let steps = params.num_steps();
    let exact = match cfg.startup {
        Startup::Exact => pb.exact.as_ref(),
        Startup::BackwardEuler => None,
    };

    let mut tracker = DiagTracker::new();
    let (u0, b0) = match exact {
        Some(ms) => (ms.u_exact(&pb.grid, 0.0), ms.b_exact(&pb.grid, 0.0)),
        None => (pb.u0.clone(), pb.b0.clone()),
    };
    let (u0, b0) = crate::stepper::initial_level(&u0, &b0);
    on_record(&tracker.record_initial(&u0, &b0, params)?, None)?;

    let (mut state, report) = startup(&pb.u0, &pb.b0, params, pb.forcing.as_ref(), exact)?;
    on_record(&tracker.record_start(&state, params, report.as_ref())?, Some(&state))?;

    for _ in 1..steps {
        let t_next = state.t + params.dt;
        let forcing = if pb.forcing.is_zero() {
            ForcingFields::zeros(&pb.grid)
        } else {
            ForcingFields::sample(pb.forcing.as_ref(), &pb.grid, t_next)
        };
        let (next, rep) = advance(&state, params, cfg.formulation, &forcing).map_err(|e| e.at_step(state.step + 1))?;
        let rec = tracker.record(&state, &next, params, &forcing, &rep)?;
        on_record(&rec, Some(&next))?;
        state = next;
    }
    Ok(state)
}

/// Collect all records of an Orszag–Tang (or any) run.
pub fn orszag_tang_run(cfg: &RunConfig) -> Result<Vec<DiagRecord>> {
    let mut out = Vec::new();
    simulate(cfg, |r, _| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

/// `(Δt Σₙ e(tⁿ)²)^{1/2}` from per-level error norms.
pub fn discrete_time_norm(norms: impl IntoIterator<Item = f64>, dt: f64) -> f64 {
    (dt * norms.into_iter().map(|e| e * e).sum::<f64>()).sqrt()
}

/// Discrete `L²(0,T; H¹)` error `(Δt Σ_{n≥1} ‖u_ex(tⁿ) − u_hⁿ‖²_{H¹})^{1/2}`.
/// `trajectory` holds `(tⁿ, u_hⁿ)` for `n = 1..N`.
pub fn error_norm_2_1(
    trajectory: &[(f64, VectorField2)],
    exact: impl Fn(f64) -> VectorField2,
    dt: f64,
) -> Result<f64> {
    let mut norms = Vec::with_capacity(trajectory.len());
    for (t, uh) in trajectory {
        let e = VectorField2::lincomb(&[(1.0, &exact(*t)), (-1.0, uh)])?;
        norms.push(e.h1_norm());
    }
    Ok(discrete_time_norm(norms, dt))
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub err_u_h1: f64,
    pub rate_u_h1: Option<f64>,
    pub err_b_h1: f64,
    pub rate_b_h1: Option<f64>,
    pub err_u_l2: f64,
    pub rate_u_l2: Option<f64>,
    pub err_b_l2: f64,
    pub rate_b_l2: Option<f64>,
    /// Largest relative divergence seen during the run (not part of the CSV).
    pub max_div: f64,
}

/// Observed order between two successive rows.
pub fn observed_rate(err_coarse: f64, err_fine: f64, dt_coarse: f64, dt_fine: f64) -> f64 {
    (err_coarse / err_fine).ln() / (dt_coarse / dt_fine).ln()
}

struct RunErrors {
    dt: f64,
    u_h1: f64,
    b_h1: f64,
    u_l2: f64,
    b_l2: f64,
    max_div: f64,
}

fn manufactured_errors(cfg: &RunConfig, dt: f64) -> Result<RunErrors> {
    let mut run = cfg.clone();
    run.params.dt = dt;
    let grid = Grid::new(cfg.n, cfg.length)?;
    let ms = ManufacturedSolution::new(&cfg.params);
    let mut norms = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    let mut max_div = 0.0f64;
    simulate(&run, |rec, state| {
        max_div = max_div.max(rec.div_u).max(rec.div_b);
        let Some(st) = state else { return Ok(()) };
        let eu = VectorField2::lincomb(&[(1.0, &ms.u_exact(&grid, st.t).leray_project()), (-1.0, &st.u_curr)])?;
        let eb = VectorField2::lincomb(&[(1.0, &ms.b_exact(&grid, st.t).leray_project()), (-1.0, &st.b_curr)])?;
        norms[0].push(eu.h1_norm());
        norms[1].push(eb.h1_norm());
        norms[2].push(eu.l2_norm());
        norms[3].push(eb.l2_norm());
        Ok(())
    })?;
    let [nu1, nb1, nu0, nb0] = norms;
    Ok(RunErrors {
        dt,
        u_h1: discrete_time_norm(nu1, dt),
        b_h1: discrete_time_norm(nb1, dt),
        u_l2: discrete_time_norm(nu0, dt),
        b_l2: discrete_time_norm(nb0, dt),
        max_div,
    })
}

/// Manufactured-solution convergence study over `cfg.dts` on a fixed grid.
/// Runs for different `dt` execute in parallel; rows come back in `dts` order.
pub fn convergence_study(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.kind != ExperimentKind::Manufactured {
        return Err(MhdError::InvalidParams("convergence studies need the manufactured solution".into()));
    }
    cfg.validate()?;
    if cfg.dts.is_empty() {
        return Err(MhdError::InvalidParams("convergence study needs at least one dt".into()));
    }
    let runs: Vec<Result<RunErrors>> = par::map_indices(cfg.dts.len(), |i| manufactured_errors(cfg, cfg.dts[i]));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(runs.len());
    for (i, r) in runs.iter().enumerate() {
        let rate = |pick: fn(&RunErrors) -> f64| {
            (i > 0).then(|| observed_rate(pick(&runs[i - 1]), pick(r), runs[i - 1].dt, r.dt))
        };
        let row = ConvergenceRow {
            dt: r.dt,
            err_u_h1: r.u_h1,
            rate_u_h1: rate(|e| e.u_h1),
            err_b_h1: r.b_h1,
            rate_b_h1: rate(|e| e.b_h1),
            err_u_l2: r.u_l2,
            rate_u_l2: rate(|e| e.u_l2),
            err_b_l2: r.b_l2,
            rate_b_l2: rate(|e| e.b_l2),
            max_div: r.max_div,
        };
        if i > 0 && (row.err_u_h1 >= runs[i - 1].u_h1 || row.err_b_h1 >= runs[i - 1].b_h1) {
            log::warn!("errors did not decrease from dt = {} to dt = {}", runs[i - 1].dt, r.dt);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Which consistency quantity to sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaKind {
    /// `Δt Σ |𝓕[wⁿ⁺¹] − wⁿ⁺¹|²`
    FilterConsistency,
    /// `Δt Σ |(3wⁿ⁺¹ − 4wⁿ + wⁿ⁻¹)/(2Δt) − w_t(tⁿ⁺¹)|²`
    Bdf2Consistency,
}

impl LemmaKind {
    pub fn name(&self) -> &'static str {
        match self {
            LemmaKind::FilterConsistency => "filter_consistency",
            LemmaKind::Bdf2Consistency => "bdf2_consistency",
        }
    }
}

impl FromStr for LemmaKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "filter_consistency" => Ok(LemmaKind::FilterConsistency),
            "bdf2_consistency" => Ok(LemmaKind::Bdf2Consistency),
            other => Err(format!("unknown lemma kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRateRow {
    pub kind: LemmaKind,
    pub dt: f64,
    pub quantity: f64,
    pub slope: Option<f64>,
}

/// Summed consistency quantity for `w` on `[0, t_end]` with `N = t_end/dt`
/// steps, summing over `n = 1..N−1`.
pub fn lemma_quantity(kind: LemmaKind, dt: f64, t_end: f64, w: impl Fn(f64) -> f64, w_t: impl Fn(f64) -> f64) -> f64 {
    let steps = (t_end / dt).round() as usize;
    let mut sum = 0.0;
    for n in 1..steps {
        let (tp, tc, tn) = ((n - 1) as f64 * dt, n as f64 * dt, (n + 1) as f64 * dt);
        let (wp, wc, wn) = (w(tp), w(tc), w(tn));
        let e = match kind {
            LemmaKind::FilterConsistency => interp_f(&wn, &wc, &wp).expect("scalar") - wn,
            LemmaKind::Bdf2Consistency => bdf2_numerator(&wn, &wc, &wp).expect("scalar") / dt - w_t(tn),
        };
        sum += e * e;
    }
    dt * sum
}

/// Consistency-rate study for `w(t) = sin t` on `[0, 1]`.
pub fn lemma_rate_study(kind: LemmaKind, dts: &[f64]) -> Vec<LemmaRateRow> {
    let q: Vec<f64> = dts.iter().map(|&dt| lemma_quantity(kind, dt, 1.0, f64::sin, f64::cos)).collect();
    dts.iter()
        .enumerate()
        .map(|(i, &dt)| LemmaRateRow {
            kind,
            dt,
            quantity: q[i],
            slope: (i > 0).then(|| observed_rate(q[i - 1], q[i], dts[i - 1], dt)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_norm_examples() {
        let g = Grid::periodic_2pi(16).unwrap();
        let ms = ManufacturedSolution::new(&SolverParams::default());
        let traj: Vec<(f64, VectorField2)> = (1..4).map(|n| (0.1 * n as f64, ms.u_exact(&g, 0.1 * n as f64))).collect();
        assert!(error_norm_2_1(&traj, |t| ms.u_exact(&g, t), 0.1).unwrap() < 1e-13);

        // constant error field with unit H¹ norm: e = c (sin y, 0), ‖e‖²_{H¹} = 2·2π² c²
        let c = 1.0 / (4.0 * std::f64::consts::PI.powi(2)).sqrt();
        let e = VectorField2::from_fn(&g, move |_, y| c * y.sin(), |_, _| 0.0);
        assert!((e.h1_norm() - 1.0).abs() < 1e-13);
        let z = VectorField2::zeros(&g);
        let val = error_norm_2_1(&[(0.25, z)], |_| e.clone(), 0.25).unwrap();
        assert!((val - 0.5).abs() < 1e-13);
    }

    #[test]
    fn rate_arithmetic_on_reference_table() {
        // rows h = 1/8 and 1/16 of the published table
        let r = observed_rate(0.02239, 0.00559, 1.0 / 8.0, 1.0 / 16.0);
        assert!((r - 2.00).abs() < 0.01, "{r}");
    }

    #[test]
    fn lemma_closed_forms_for_quadratics() {
        for dt in [0.1, 0.05, 0.025] {
            let steps = (1.0f64 / dt).round();
            let q = lemma_quantity(LemmaKind::FilterConsistency, dt, 1.0, |t| t * t, |t| 2.0 * t);
            let expect = (steps - 1.0) * dt * dt.powi(4);
            assert!((q - expect).abs() <= 1e-12 * expect.max(1e-300), "{q} {expect}");
            let q = lemma_quantity(LemmaKind::Bdf2Consistency, dt, 1.0, |t| t * t, |t| 2.0 * t);
            assert!(q < 1e-24);
        }
    }

    #[test]
    fn lemma_slopes_near_four() {
        let dts = [0.1, 0.05, 0.025, 0.0125];
        for kind in [LemmaKind::FilterConsistency, LemmaKind::Bdf2Consistency] {
            let rows = lemma_rate_study(kind, &dts);
            let s = rows.last().unwrap().slope.unwrap();
            assert!((s - 4.0).abs() < 0.2, "{kind:?}: {s}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::orszag_tang().validate().is_ok());
        assert!(RunConfig::manufactured().validate().is_ok());
        let mut c = RunConfig::orszag_tang();
        c.startup = Startup::Exact;
        assert!(c.validate().is_err());
        let mut c = RunConfig::manufactured();
        c.dts = vec![0.1, 0.2];
        assert!(c.validate().is_err());
        let mut c = RunConfig::manufactured();
        c.params.filter_enabled = false;
        c.formulation = Formulation::Combined;
        assert!(c.validate().is_err());
    }

    #[test]
    fn short_orszag_tang_run_records() {
        let mut cfg = RunConfig::orszag_tang();
        cfg.n = 16;
        cfg.params.t_end = 0.05;
        let recs = orszag_tang_run(&cfg).unwrap();
        assert_eq!(recs.len(), 6);
        assert_eq!(recs[0].step, 0);
        assert_eq!(recs[5].step, 5);
        assert!((recs[5].t - 0.05).abs() < 1e-14);
        let e0 = 23.0 * std::f64::consts::PI.powi(2) / 9.0;
        assert!((recs[0].energy - e0).abs() < 1e-10);
    }
}
