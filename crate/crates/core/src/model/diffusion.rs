use std::sync::Arc;

use super::grid::TimeGrid;

/// A non-anticipative diffusion functional `g(t, y)`.
pub trait Diffusion: Send + Sync {
    /// `y` is the prefix through knot `i`.
    fn eval(&self, i: usize, grid: &TimeGrid, y: &[f64]) -> f64;

    fn eval_path(&self, grid: &TimeGrid, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval(i, grid, &y[..=i]);
        }
    }

    /// Declared `sup |1/g|` when the regularity condition holds.
    fn inverse_bound(&self) -> Option<f64>;

    fn is_unit(&self) -> bool {
        false
    }

    fn describe(&self) -> String;
}

/// `g ≡ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitDiffusion;

impl Diffusion for UnitDiffusion {
    fn eval(&self, _: usize, _: &TimeGrid, _: &[f64]) -> f64 {
        1.0
    }

    fn eval_path(&self, _: &TimeGrid, _: &[f64], out: &mut [f64]) {
        out.fill(1.0);
    }

    fn inverse_bound(&self) -> Option<f64> {
        Some(1.0)
    }

    fn is_unit(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        "1".into()
    }
}

type DiffusionFn = dyn Fn(usize, &TimeGrid, &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct FnDiffusion {
    g: Arc<DiffusionFn>,
    inverse_bound: Option<f64>,
    name: String,
}

impl FnDiffusion {
    pub fn new(
        name: impl Into<String>,
        inverse_bound: Option<f64>,
        g: impl Fn(usize, &TimeGrid, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            g: Arc::new(g),
            inverse_bound,
            name: name.into(),
        }
    }
}

impl Diffusion for FnDiffusion {
    fn eval(&self, i: usize, grid: &TimeGrid, y: &[f64]) -> f64 {
        (self.g)(i, grid, y)
    }

    fn inverse_bound(&self) -> Option<f64> {
        self.inverse_bound
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}
