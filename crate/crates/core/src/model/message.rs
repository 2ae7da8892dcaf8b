use std::sync::Arc;

use rand::Rng;

use super::grid::{Path, TimeGrid};
use crate::rng::{normal, StreamRng};

/// Law of the message process ξ, independent of the driving noise.
pub trait MessageLaw: Send + Sync {
    /// Writes one draw of ξ at the grid knots into `out` (`grid.knots()` values).
    fn sample_into(&self, grid: &TimeGrid, rng: &mut StreamRng, out: &mut [f64]);

    fn sample(&self, grid: &TimeGrid, rng: &mut StreamRng) -> Path {
        let mut p = Path::zeros(*grid);
        self.sample_into(grid, rng, p.values_mut());
        p
    }

    /// Declared `E[sup_{t≤T} |ξ(t)|²]`.
    fn second_moment(&self, grid: &TimeGrid) -> f64;

    /// True when every draw is the same path; mixtures over it are exact.
    fn is_deterministic(&self) -> bool {
        false
    }

    fn label(&self) -> String;
}

pub type MessageLawRef = Arc<dyn MessageLaw>;

impl std::fmt::Debug for dyn MessageLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MessageLaw({})", self.label())
    }
}

/// No message: ξ ≡ 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoMessage;

impl MessageLaw for NoMessage {
    fn sample_into(&self, _: &TimeGrid, _: &mut StreamRng, out: &mut [f64]) {
        out.fill(0.0);
    }

    fn second_moment(&self, _: &TimeGrid) -> f64 {
        0.0
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        "none".into()
    }
}

/// ξ(t) ≡ ξ₀ with ξ₀ ~ N(0, σ²).
#[derive(Debug, Clone, Copy)]
pub struct ConstantGaussian {
    pub sigma: f64,
}

impl MessageLaw for ConstantGaussian {
    fn sample_into(&self, _: &TimeGrid, rng: &mut StreamRng, out: &mut [f64]) {
        let v = self.sigma * normal(rng);
        out.fill(v);
    }

    fn second_moment(&self, _: &TimeGrid) -> f64 {
        self.sigma * self.sigma
    }

    fn label(&self) -> String {
        format!("constant-gaussian(sigma={})", self.sigma)
    }
}

/// ξ(t) ≡ ξ₀ with ξ₀ ~ U[-b, b].
#[derive(Debug, Clone, Copy)]
pub struct ConstantUniform {
    pub half_width: f64,
}

impl MessageLaw for ConstantUniform {
    fn sample_into(&self, _: &TimeGrid, rng: &mut StreamRng, out: &mut [f64]) {
        let u: f64 = rng.random();
        out.fill(self.half_width * (2.0 * u - 1.0));
    }

    fn second_moment(&self, _: &TimeGrid) -> f64 {
        self.half_width * self.half_width / 3.0
    }

    fn label(&self) -> String {
        format!("constant-uniform(half_width={})", self.half_width)
    }
}
