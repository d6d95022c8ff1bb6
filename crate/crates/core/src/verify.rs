//! Random field generators and the algebraic identity suite behind the
//! `verify` subcommand.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{g_bounds_check, g_identity_residual, g_pair_norm_sq, InnerSpace};
use crate::error::Result;
use crate::field::{ScalarField, VectorField2};
use crate::grid::Grid;
use crate::mhd::advect;
use crate::stepper::{apply_filter, interp_f};

/// Real scalar field with uniform random samples, truncated to the retained modes.
pub fn random_scalar<R: Rng + ?Sized>(grid: &Arc<Grid>, rng: &mut R) -> ScalarField {
    let samples = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_samples(grid, samples).truncate()
}

pub fn random_field<R: Rng + ?Sized>(grid: &Arc<Grid>, rng: &mut R) -> VectorField2 {
    let x = random_scalar(grid, rng);
    let y = random_scalar(grid, rng);
    VectorField2::new(x, y).expect("same grid")
}

/// Random divergence-free field on the retained modes.
pub fn random_solenoidal<R: Rng + ?Sized>(grid: &Arc<Grid>, rng: &mut R) -> VectorField2 {
    random_field(grid, rng).leray_project()
}

/// Largest eigenvalue of the G matrix, `1 + √13/4`.
pub const G_EIG_MAX: f64 = 1.901_387_818_865_997_4;

/// Outcome of one identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub trials: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: &'static str, trials: usize, worst: f64, threshold: f64) -> Self {
        CheckOutcome { name, trials, worst, threshold, passed: worst <= threshold }
    }
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:<34} trials={:<5} worst={:.3e} threshold={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.worst,
            self.threshold
        )
    }
}

fn rel_diff(a: &VectorField2, b: &VectorField2) -> Result<f64> {
    let d = VectorField2::lincomb(&[(1.0, a), (-1.0, b)])?;
    let s = a.l2_norm().max(b.l2_norm());
    Ok(if s == 0.0 { d.l2_norm() } else { d.l2_norm() / s })
}

/// Run every algebraic identity check with `trials` random samples each on
/// an `n × n` grid.
pub fn identity_suite(seed: u64, trials: usize, n: usize) -> Result<Vec<CheckOutcome>> {
    let grid = Grid::periodic_2pi(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (a, b, c) = (random_field(&grid, &mut rng), random_field(&grid, &mut rng), random_field(&grid, &mut rng));
        let dt = 10f64.powf(rng.gen_range(-3.0..0.0));
        worst = worst.max(g_identity_residual(&a, &b, &c, dt)?);
    }
    out.push(CheckOutcome::new("G/F inner-product identity", trials, worst, 1e-11));

    let (mut low_bad, mut high_bad, mut sharp_bad) = (0usize, 0usize, 0usize);
    let mut eq_worst = 0.0f64;
    for _ in 0..trials {
        let (a, b) = (random_field(&grid, &mut rng), random_field(&grid, &mut rng));
        let (lo, hi) = g_bounds_check(&a, &b)?;
        low_bad += usize::from(!lo);
        high_bad += usize::from(!hi);
        let (a2, b2) = (a.norm_sq(), b.norm_sq());
        sharp_bad += usize::from(g_pair_norm_sq(&a, &b)? > G_EIG_MAX * (a2 + b2) * (1.0 + 1e-13));
        let g = g_pair_norm_sq(&a, &a)?;
        eq_worst = eq_worst.max((g - 0.5 * a2).abs() / a2);
    }
    out.push(CheckOutcome::new("G-norm lower bound (violations)", trials, low_bad as f64, 0.0));
    out.push(CheckOutcome::new("G-norm upper bound (violations)", trials, high_bad as f64, 0.0));
    out.push(CheckOutcome::new("G-norm eigenvalue bound (violations)", trials, sharp_bad as f64, 0.0));
    out.push(CheckOutcome::new("G-norm bound equality (w, w)", trials, eq_worst, 1e-13));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let u = random_solenoidal(&grid, &mut rng);
        let v = random_field(&grid, &mut rng);
        let a = advect(&u, &v)?;
        let scale = a.l2_norm() * v.l2_norm();
        worst = worst.max(a.inner(&v)?.abs() / scale);
    }
    out.push(CheckOutcome::new("trilinear skew-symmetry", trials, worst, 1e-11));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (a, b, c) = (random_field(&grid, &mut rng), random_field(&grid, &mut rng), random_field(&grid, &mut rng));
        let back = interp_f(&apply_filter(&a, &b, &c)?, &b, &c)?;
        worst = worst.max(rel_diff(&back, &a)?);
    }
    out.push(CheckOutcome::new("filter/interpolation inverse", trials, worst, 1e-14));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (w, z) = (random_field(&grid, &mut rng), random_field(&grid, &mut rng));
        let pw = w.leray_project();
        worst = worst.max(rel_diff(&pw.leray_project(), &pw)?);
        let lhs = pw.inner(&z)?;
        let rhs = w.inner(&z.leray_project())?;
        worst = worst.max((lhs - rhs).abs() / (w.l2_norm() * z.l2_norm()));
        worst = worst.max(pw.divergence().l2_norm() / pw.h1_norm());
    }
    out.push(CheckOutcome::new("Leray projector", trials, worst, 1e-12));

    Ok(out)
}
