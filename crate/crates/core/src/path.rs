//! Grid numerics: Brownian paths, left-point Itô sums, quadrature, sup-norms.

use crate::error::{Error, Result};
use crate::model::{Path, TimeGrid};
use crate::rng::{normal, StreamRng};

/// Standard Brownian motion at the knots, `W(0) = 0`.
pub fn sample_brownian(grid: &TimeGrid, rng: &mut StreamRng) -> Path {
    let mut w = Path::zeros(*grid);
    sample_brownian_into(grid, rng, w.values_mut());
    w
}

pub fn sample_brownian_into(grid: &TimeGrid, rng: &mut StreamRng, out: &mut [f64]) {
    let sd = grid.dt().sqrt();
    out[0] = 0.0;
    for i in 0..grid.steps() {
        out[i + 1] = out[i] + sd * normal(rng);
    }
}

/// Left-point Itô sum `Σ_i h_i (y_{i+1} - y_i)`.
///
/// `h` holds one value per increment; the caller guarantees `h_i` only
/// depends on knots `≤ i`.
pub fn ito_integral(h: &[f64], y: &Path) -> Result<f64> {
    let steps = y.grid().steps();
    if h.len() != steps {
        return Err(Error::Dimension {
            expected: steps,
            got: h.len(),
        });
    }
    Ok(ito_sum(h, y.values()))
}

/// Unchecked kernel of [`ito_integral`]; `y.len() == h.len() + 1`.
#[inline]
pub(crate) fn ito_sum(h: &[f64], y: &[f64]) -> f64 {
    h.iter().zip(y.windows(2)).map(|(hi, w)| hi * (w[1] - w[0])).sum()
}

/// Left-point rule `Σ_{i<N} h_i Δt`. Accepts `N` or `N + 1` values; a
/// terminal value is ignored.
pub fn quadrature(h: &[f64], grid: &TimeGrid) -> Result<f64> {
    let n = grid.steps();
    if h.len() != n && h.len() != n + 1 {
        return Err(Error::Dimension {
            expected: n,
            got: h.len(),
        });
    }
    Ok(h[..n].iter().sum::<f64>() * grid.dt())
}

/// `max_{j ≤ up_to} |y_j|`.
pub fn sup_norm(y: &Path, up_to: usize) -> f64 {
    y.values()[..=up_to.min(y.grid().steps())]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}
