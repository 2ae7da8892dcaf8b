//! Picard recursion on the Euler grid, the grid-level fixed point, and the
//! inversion of an iterate back to its driving noise.
//!
//! On a grid with `N` steps the recursion is a causal (Volterra) map: the
//! iterate of order `k` is already exact at knots `0..=k`. Hence every
//! iterate of order `≥ N` coincides with the Euler solution driven by the
//! same message and noise, which is what [`solve_limit`] computes directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Diffusion, Drift, MessageLaw, Path, TimeGrid};
use crate::path::sample_brownian_into;
use crate::rng::RngStream;

/// Extra iterations past `n_max` used for the reference solution.
pub const DEFAULT_REFERENCE_EXTRA: usize = 10;

/// Which law a path or density refers to: a finite Picard iterate or the
/// limit solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Iterate(usize),
    Limit,
}

impl Order {
    /// Finite iterate orders at or above the step count are the fixed point.
    pub fn effective(self, grid: &TimeGrid) -> Order {
        match self {
            Order::Iterate(n) if n > grid.steps() => Order::Limit,
            o => o,
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Iterate(n) => write!(f, "{n}"),
            Order::Limit => f.write_str("limit"),
        }
    }
}

fn same_grid(a: &Path, b: &Path) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::InvalidGrid(format!(
            "paths live on different grids ({:?} vs {:?})",
            a.grid(),
            b.grid()
        )));
    }
    Ok(())
}

/// Scratch buffers for repeated Picard steps on one grid.
pub(crate) struct StepBuffers {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
}

impl StepBuffers {
    pub(crate) fn new(grid: &TimeGrid) -> Self {
        Self {
            drift: vec![0.0; grid.steps()],
            diffusion: vec![1.0; grid.steps()],
        }
    }
}

/// `out = Y_next` from `y_prev`; all slices hold `grid.knots()` values.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_into(
    f: &dyn Drift,
    g: &dyn Diffusion,
    grid: &TimeGrid,
    x: &[f64],
    y_prev: &[f64],
    w: &[f64],
    buf: &mut StepBuffers,
    out: &mut [f64],
) -> Result<()> {
    let dt = grid.dt();
    f.eval_path(grid, x, y_prev, &mut buf.drift);
    let unit = g.is_unit();
    if !unit {
        g.eval_path(grid, y_prev, &mut buf.diffusion);
    }
    out[0] = 0.0;
    for i in 0..grid.steps() {
        let dw = w[i + 1] - w[i];
        let vol = if unit { dw } else { buf.diffusion[i] * dw };
        let next = out[i] + buf.drift[i] * dt + vol;
        if !next.is_finite() {
            return Err(Error::Divergence {
                knot: i + 1,
                value: next,
            });
        }
        out[i + 1] = next;
    }
    Ok(())
}

/// One Picard step: `Y_next(t_{i+1}) = Y_next(t_i) + f(t_i, x, y_prev)Δt + g(t_i, y_prev)ΔW_i`.
pub fn picard_step(f: &dyn Drift, g: &dyn Diffusion, x: &Path, y_prev: &Path, w: &Path) -> Result<Path> {
    same_grid(x, y_prev)?;
    same_grid(x, w)?;
    let grid = *x.grid();
    let mut out = Path::zeros(grid);
    let mut buf = StepBuffers::new(&grid);
    step_into(
        f,
        g,
        &grid,
        x.values(),
        y_prev.values(),
        w.values(),
        &mut buf,
        out.values_mut(),
    )?;
    Ok(out)
}

/// Iterate of order `n` driven by `(x, w)`, starting from `Y⁽⁰⁾ ≡ 0`.
pub fn iterate(f: &dyn Drift, g: &dyn Diffusion, x: &Path, w: &Path, n: usize) -> Result<Path> {
    same_grid(x, w)?;
    let grid = *x.grid();
    let mut cur = Path::zeros(grid);
    let mut next = Path::zeros(grid);
    let mut buf = StepBuffers::new(&grid);
    for _ in 0..n {
        step_into(
            f,
            g,
            &grid,
            x.values(),
            cur.values(),
            w.values(),
            &mut buf,
            next.values_mut(),
        )?;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Euler solution with the drift read along the path being built; the
/// fixed point of the grid-level Picard map.
pub fn solve_limit(f: &dyn Drift, g: &dyn Diffusion, x: &Path, w: &Path) -> Result<Path> {
    same_grid(x, w)?;
    let grid = *x.grid();
    let mut y = Path::zeros(grid);
    solve_limit_into(f, g, &grid, x.values(), w.values(), y.values_mut())?;
    Ok(y)
}

pub(crate) fn solve_limit_into(
    f: &dyn Drift,
    g: &dyn Diffusion,
    grid: &TimeGrid,
    x: &[f64],
    w: &[f64],
    y: &mut [f64],
) -> Result<()> {
    let dt = grid.dt();
    let unit = g.is_unit();
    y[0] = 0.0;
    for i in 0..grid.steps() {
        let drift = f.eval(i, grid, &x[..=i], &y[..=i]);
        let dw = w[i + 1] - w[i];
        let vol = if unit { dw } else { g.eval(i, grid, &y[..=i]) * dw };
        let next = y[i] + drift * dt + vol;
        if !next.is_finite() {
            return Err(Error::Divergence {
                knot: i + 1,
                value: next,
            });
        }
        y[i + 1] = next;
    }
    Ok(())
}

/// Message draw followed by noise draw, both from one stream. Every
/// estimator uses this so that outer draw `i` is the same `(ξ, W)` pair
/// everywhere.
pub fn draw_message_and_noise(law: &dyn MessageLaw, grid: &TimeGrid, stream: &RngStream) -> (Path, Path) {
    let mut rng = stream.rng();
    let x = law.sample(grid, &mut rng);
    let mut w = Path::zeros(*grid);
    sample_brownian_into(grid, &mut rng, w.values_mut());
    (x, w)
}

/// One coupled run of the recursion: a message, a noise path, the iterates
/// `Y⁽⁰⁾..Y⁽ⁿᵐᵃˣ⁾` and a reference solution, all driven by the same noise.
#[derive(Debug, Clone)]
pub struct IterationBundle {
    pub message: Path,
    pub noise: Path,
    pub iterates: Vec<Path>,
    pub reference: Path,
    pub reference_order: usize,
}

impl IterationBundle {
    pub fn n_max(&self) -> usize {
        self.iterates.len() - 1
    }

    /// `‖Y⁽ⁿ⁺¹⁾ − Y⁽ⁿ⁾‖²_T` on the grid.
    pub fn increment_sq(&self, n: usize) -> f64 {
        self.iterates[n + 1].sup_distance(&self.iterates[n]).powi(2)
    }

    /// `‖Y⁽ⁿ⁾ − Y_ref‖²_T` on the grid.
    pub fn reference_gap_sq(&self, n: usize) -> f64 {
        self.iterates[n].sup_distance(&self.reference).powi(2)
    }
}

/// Runs the recursion to `n_max` with the reference at `n_max + 10`.
pub fn run_iteration(
    f: &dyn Drift,
    g: &dyn Diffusion,
    law: &dyn MessageLaw,
    grid: &TimeGrid,
    n_max: usize,
    stream: &RngStream,
) -> Result<IterationBundle> {
    run_iteration_with(f, g, law, grid, n_max, DEFAULT_REFERENCE_EXTRA, stream)
}

pub fn run_iteration_with(
    f: &dyn Drift,
    g: &dyn Diffusion,
    law: &dyn MessageLaw,
    grid: &TimeGrid,
    n_max: usize,
    reference_extra: usize,
    stream: &RngStream,
) -> Result<IterationBundle> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let (x, w) = draw_message_and_noise(law, grid, stream);
    let mut buf = StepBuffers::new(grid);
    let mut iterates = Vec::with_capacity(n_max + 1);
    iterates.push(Path::zeros(*grid));
    for n in 0..n_max {
        let mut next = Path::zeros(*grid);
        step_into(
            f,
            g,
            grid,
            x.values(),
            iterates[n].values(),
            w.values(),
            &mut buf,
            next.values_mut(),
        )?;
        iterates.push(next);
    }
    let mut cur = iterates[n_max].clone();
    let mut next = Path::zeros(*grid);
    for _ in 0..reference_extra {
        step_into(
            f,
            g,
            grid,
            x.values(),
            cur.values(),
            w.values(),
            &mut buf,
            next.values_mut(),
        )?;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(IterationBundle {
        message: x,
        noise: w,
        iterates,
        reference: cur,
        reference_order: n_max + reference_extra,
    })
}

/// Reusable level buffers for noise inversion.
#[derive(Debug, Default)]
pub(crate) struct InversionWorkspace {
    levels: Vec<Vec<f64>>,
}

/// Walks the grid reconstructing the noise that makes the order-`n` iterate
/// driven by `x` equal `y` (unit diffusion).
///
/// At knot `i` the iterates of orders `1..n-1` are known through knot `i`
/// from the recovered noise prefix, so `F_i = f(t_i, x, Y⁽ⁿ⁻¹⁾)` and
/// `ΔW_i = Δy_i − F_iΔt` follow. `visit(i, F_i, ΔW_i)` sees each step.
/// Orders above the step count use the fixed point, i.e. `F_i = f(t_i, x, y)`.
pub(crate) fn inversion_pass(
    f: &dyn Drift,
    grid: &TimeGrid,
    x: &[f64],
    y: &[f64],
    n: usize,
    ws: &mut InversionWorkspace,
    mut visit: impl FnMut(usize, f64, f64),
) -> Result<()> {
    debug_assert!(n >= 1);
    let dt = grid.dt();
    let knots = grid.knots();
    if n > grid.steps() {
        // order-(n-1) iterate is already the fixed point, which is y itself
        for i in 0..grid.steps() {
            let fi = f.eval(i, grid, &x[..=i], &y[..=i]);
            check_drift(i, fi)?;
            visit(i, fi, (y[i + 1] - y[i]) - fi * dt);
        }
        return Ok(());
    }
    let depth = n - 1;
    if ws.levels.len() < depth + 1 {
        ws.levels.resize_with(depth + 1, Vec::new);
    }
    for level in ws.levels.iter_mut().take(depth + 1) {
        level.clear();
        level.resize(knots, 0.0);
    }
    for i in 0..grid.steps() {
        let fi = f.eval(i, grid, &x[..=i], &ws.levels[depth][..=i]);
        check_drift(i, fi)?;
        let dw = (y[i + 1] - y[i]) - fi * dt;
        visit(i, fi, dw);
        for k in 1..=depth {
            let (lower, upper) = ws.levels.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            let fk = f.eval(i, grid, &x[..=i], &prev[..=i]);
            check_drift(i, fk)?;
            cur[i + 1] = cur[i] + fk * dt + dw;
        }
    }
    Ok(())
}

#[inline]
fn check_drift(knot: usize, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Evaluation {
            what: "drift",
            knot,
            detail: format!("value {v} during noise inversion"),
        })
    }
}

/// Output of a full noise inversion.
#[derive(Debug, Clone)]
pub struct NoiseInversion {
    /// Reconstructed driving noise `W`.
    pub noise: Path,
    /// Drift `f(t_i, x, Y⁽ⁿ⁻¹⁾)` at the left point of every step.
    pub drift: Vec<f64>,
}

/// Reconstructed `W` such that the order-`n` iterate driven by `(x, W)`
/// equals `y`. Assumes unit diffusion (reduce first otherwise).
pub fn invert_noise(f: &dyn Drift, x: &Path, y: &Path, n: usize) -> Result<Path> {
    Ok(invert_noise_full(f, x, y, n)?.noise)
}

pub fn invert_noise_full(f: &dyn Drift, x: &Path, y: &Path, n: usize) -> Result<NoiseInversion> {
    if n == 0 {
        return Err(Error::Domain("noise inversion needs order n >= 1".into()));
    }
    same_grid(x, y)?;
    let grid = *y.grid();
    let mut w = Path::zeros(grid);
    let mut drift = vec![0.0; grid.steps()];
    let mut ws = InversionWorkspace::default();
    {
        let wv = w.values_mut();
        inversion_pass(f, &grid, x.values(), y.values(), n, &mut ws, |i, fi, dw| {
            drift[i] = fi;
            wv[i + 1] = wv[i] + dw;
        })?;
    }
    Ok(NoiseInversion { noise: w, drift })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{
        truncate_drift, ConstantGaussian, Constants, ExprDrift, LinearFeedback, MessageDrift, NoMessage, UnitDiffusion,
        ZeroDrift,
    };
    use crate::path::sample_brownian;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    fn noise(g: &TimeGrid, k: u64) -> Path {
        sample_brownian(g, &mut RngStream::new(21, k).rng())
    }

    #[test]
    fn zero_drift_step_is_pure_noise() {
        let g = grid(32);
        let w = noise(&g, 0);
        let x = Path::zeros(g);
        let y = picard_step(&ZeroDrift, &UnitDiffusion, &x, &w.clone(), &w).unwrap();
        assert_eq!(y, w);
    }

    #[test]
    fn constant_message_step() {
        let g = grid(40);
        let w = noise(&g, 1);
        let c = 1.7;
        let x = Path::from_fn(g, |_| c);
        let y = picard_step(&MessageDrift, &UnitDiffusion, &x, &Path::zeros(g), &w).unwrap();
        for i in 0..=40 {
            assert!((y[i] - (c * g.time(i) + w[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_feedback_step_matches_resummation() {
        let g = grid(50);
        let w = noise(&g, 2);
        let f = ExprDrift::parse("y", Constants::new(1.0, 1.0, None).unwrap()).unwrap();
        let y = picard_step(&f, &UnitDiffusion, &Path::zeros(g), &w, &w).unwrap();
        let dt = g.dt();
        for i in 0..=50 {
            let sum: f64 = (0..i).map(|j| w[j] * dt).sum();
            assert!((y[i] - (sum + w[i])).abs() < 1e-12, "knot {i}");
        }
    }

    #[test]
    fn divergence_names_the_knot() {
        let g = grid(8);
        let f = ExprDrift::parse("1/t", Constants::new(1.0, 1.0, None).unwrap()).unwrap();
        let w = noise(&g, 3);
        let err = picard_step(&f, &UnitDiffusion, &Path::zeros(g), &w, &w).unwrap_err();
        assert_eq!(
            err,
            Error::Divergence {
                knot: 1,
                value: f64::INFINITY
            }
        );
    }

    #[test]
    fn y_independent_drift_reaches_fixed_point_in_one_step() {
        let g = grid(64);
        let b = run_iteration(
            &MessageDrift,
            &UnitDiffusion,
            &ConstantGaussian { sigma: 1.0 },
            &g,
            5,
            &RngStream::new(4, 0),
        )
        .unwrap();
        for n in 2..=5 {
            assert_eq!(b.iterates[n], b.iterates[1]);
        }
        assert_eq!(b.reference, b.iterates[1]);
        assert_eq!(b.reference_order, 15);
    }

    #[test]
    fn zero_drift_iterates_equal_noise() {
        let g = grid(16);
        let b = run_iteration(&ZeroDrift, &UnitDiffusion, &NoMessage, &g, 4, &RngStream::new(4, 1)).unwrap();
        assert!(b.iterates[0].values().iter().all(|&v| v == 0.0));
        for n in 1..=4 {
            assert_eq!(b.iterates[n], b.noise);
        }
    }

    #[test]
    fn iterates_reach_euler_solution_after_step_count() {
        let g = grid(12);
        let f = LinearFeedback { gain: 0.8 };
        let (x, w) = draw_message_and_noise(&ConstantGaussian { sigma: 1.0 }, &g, &RngStream::new(6, 0));
        let euler = solve_limit(&f, &UnitDiffusion, &x, &w).unwrap();
        let y_n = iterate(&f, &UnitDiffusion, &x, &w, 12).unwrap();
        assert!(y_n.sup_distance(&euler) < 1e-12);
        // not yet exact one order earlier at the last knot
        let y_prev = iterate(&f, &UnitDiffusion, &x, &w, 11).unwrap();
        assert!(y_prev.sup_distance(&euler) > 0.0);
    }

    #[test]
    fn reference_is_a_fixed_point_up_to_residual() {
        let g = grid(256);
        let f = LinearFeedback { gain: 0.5 };
        for k in 0..5 {
            let b = run_iteration(
                &f,
                &UnitDiffusion,
                &ConstantGaussian { sigma: 1.0 },
                &g,
                4,
                &RngStream::new(8, k),
            )
            .unwrap();
            let prev = iterate(&f, &UnitDiffusion, &b.message, &b.noise, b.reference_order - 1).unwrap();
            let residual = b.reference.sup_distance(&prev);
            let stepped = picard_step(&f, &UnitDiffusion, &b.message, &b.reference, &b.noise).unwrap();
            assert!(stepped.sup_distance(&b.reference) <= residual + 1e-15);
        }
    }

    #[test]
    fn first_order_inversion_is_rearranged_euler_step() {
        let g = grid(20);
        let f = LinearFeedback { gain: 0.3 };
        let x = Path::from_fn(g, |_| 0.9);
        let y = Path::from_fn(g, |t| (3.0 * t).sin());
        let w = invert_noise(&f, &x, &y, 1).unwrap();
        let dt = g.dt();
        for i in 0..=20 {
            // f(t, x, 0) = x
            let expected = y[i] - (0..i).map(|_| 0.9 * dt).sum::<f64>();
            assert!((w[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_drift_inversion_returns_path() {
        let g = grid(10);
        let y = noise(&g, 9);
        for n in [1, 3, 20] {
            let w = invert_noise(&ZeroDrift, &Path::zeros(g), &y, n).unwrap();
            assert!(w.sup_distance(&y) < 1e-14);
        }
    }

    #[test]
    fn inversion_round_trips() {
        let g = grid(128);
        let drifts: Vec<Arc<dyn Drift>> = vec![
            Arc::new(LinearFeedback { gain: 0.5 }),
            Arc::new(truncate_drift(Arc::new(LinearFeedback { gain: 1.5 }), 0.7).unwrap()),
            Arc::new(ExprDrift::parse("sin(y) + x*t - 0.2*sup|y|", Constants::new(2.0, 2.0, None).unwrap()).unwrap()),
        ];
        for f in drifts {
            for n in [1, 3, 6, 200] {
                let (x, w) =
                    draw_message_and_noise(&ConstantGaussian { sigma: 1.0 }, &g, &RngStream::new(10, n as u64));
                let y = iterate(&*f, &UnitDiffusion, &x, &w, n).unwrap();
                let inv = invert_noise_full(&*f, &x, &y, n).unwrap();
                assert!(inv.noise.sup_distance(&w) < 1e-10, "{} n={n}", f.describe());
                let again = iterate(&*f, &UnitDiffusion, &x, &inv.noise, n).unwrap();
                assert!(again.sup_distance(&y) < 1e-10);
            }
        }
    }

    #[test]
    fn order_zero_cannot_be_inverted() {
        let g = grid(4);
        assert!(invert_noise(&ZeroDrift, &Path::zeros(g), &Path::zeros(g), 0).is_err());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Path::zeros(grid(4));
        let b = Path::zeros(grid(5));
        assert!(picard_step(&ZeroDrift, &UnitDiffusion, &a, &a, &b).is_err());
    }
}
