use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::diffusion::Diffusion;
use super::grid::TimeGrid;
use crate::error::{Error, Result};

/// Declared condition constants of a drift (together with its diffusion).
///
/// * `lipschitz` (K): `|f(t,x,y)-f(t,x,y')|^2 + |g(t,y)-g(t,y')|^2 <= K sup_{s<=t}|y-y'|^2`
/// * `growth` (L): `|f(t,x,y)|^2 + |g(t,y)|^2 <= L (1 + sup|x|^2 + sup|y|^2)`
/// * `peak_power` (M): `int_0^T f^2 dt <= M` for all inputs, when declared.
///
/// These are claims carried with the functional. [`probe_conditions`]
/// can falsify them but never certify them.
///
/// [`probe_conditions`]: super::probe::probe_conditions
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "K")]
    pub lipschitz: f64,
    #[serde(rename = "L")]
    pub growth: f64,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub peak_power: Option<f64>,
}

impl Constants {
    pub fn new(lipschitz: f64, growth: f64, peak_power: Option<f64>) -> Result<Self> {
        let c = Self {
            lipschitz,
            growth,
            peak_power,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("K", self.lipschitz)?;
        pos("L", self.growth)?;
        if let Some(m) = self.peak_power {
            pos("M", m)?;
        }
        Ok(())
    }
}

/// A non-anticipative drift functional `f(t, x, y)` on a grid.
///
/// `eval` receives the prefixes `x[..=i]` and `y[..=i]` only, so an
/// implementation cannot read the future of either path.
pub trait Drift: Send + Sync {
    fn eval(&self, i: usize, grid: &TimeGrid, x: &[f64], y: &[f64]) -> f64;

    /// Drift at knots `0..out.len()` along full paths `x`, `y`.
    ///
    /// Overrides must return exactly what `eval` returns at each knot; they
    /// exist to share running state (integrals, maxima) along the path.
    fn eval_path(&self, grid: &TimeGrid, x: &[f64], y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval(i, grid, &x[..=i], &y[..=i]);
        }
    }

    fn constants(&self) -> Constants;

    fn describe(&self) -> String;

    /// False when the output never depends on the state path `y`.
    fn reads_state(&self) -> bool {
        true
    }
}

/// Shared handle to a drift.
pub type DriftRef = Arc<dyn Drift>;

impl fmt::Debug for dyn Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Drift({})", self.describe())
    }
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn eval(&self, _: usize, _: &TimeGrid, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }

    fn eval_path(&self, _: &TimeGrid, _: &[f64], _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn constants(&self) -> Constants {
        Constants {
            lipschitz: 1.0,
            growth: 1.0,
            peak_power: None,
        }
    }

    fn reads_state(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        "0".into()
    }
}

/// `f ≡ θ`, no message dependence.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDrift {
    pub theta: f64,
}

impl Drift for ConstantDrift {
    fn eval(&self, _: usize, _: &TimeGrid, _: &[f64], _: &[f64]) -> f64 {
        self.theta
    }

    fn eval_path(&self, _: &TimeGrid, _: &[f64], _: &[f64], out: &mut [f64]) {
        out.fill(self.theta);
    }

    fn constants(&self) -> Constants {
        let m = self.theta * self.theta;
        Constants {
            lipschitz: 1.0,
            growth: 1.0 + m,
            peak_power: None,
        }
    }

    fn reads_state(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        format!("{}", self.theta)
    }
}

/// `f(t, x, y) = x(t)`: the channel input is the message itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct MessageDrift;

impl Drift for MessageDrift {
    fn eval(&self, i: usize, _: &TimeGrid, x: &[f64], _: &[f64]) -> f64 {
        x[i]
    }

    fn eval_path(&self, _: &TimeGrid, x: &[f64], _: &[f64], out: &mut [f64]) {
        let n = out.len();
        out.copy_from_slice(&x[..n]);
    }

    fn constants(&self) -> Constants {
        Constants {
            lipschitz: 1.0,
            growth: 1.0,
            peak_power: None,
        }
    }

    fn reads_state(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        "x(t)".into()
    }
}

/// `f(t, x, y) = a·y(t) + x(t)`: linear output feedback plus message.
///
/// Declared `K = max(8a², 1)`, `L = 8·max(1, a²)`; both dominate the true
/// constants `a²` and `2·max(1, a²)`.
#[derive(Debug, Clone, Copy)]
pub struct LinearFeedback {
    pub gain: f64,
}

impl Drift for LinearFeedback {
    fn eval(&self, i: usize, _: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
        self.gain * y[i] + x[i]
    }

    fn eval_path(&self, _: &TimeGrid, x: &[f64], y: &[f64], out: &mut [f64]) {
        for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
            *o = self.gain * yi + xi;
        }
    }

    fn constants(&self) -> Constants {
        let a2 = self.gain * self.gain;
        Constants {
            lipschitz: (8.0 * a2).max(1.0),
            growth: 8.0 * a2.max(1.0),
            peak_power: None,
        }
    }

    fn describe(&self) -> String {
        format!("{}*y(t) + x(t)", self.gain)
    }
}

type DriftFn = dyn Fn(usize, &TimeGrid, &[f64], &[f64]) -> f64 + Send + Sync;

/// Drift backed by a closure; the closure sees prefixes only.
#[derive(Clone)]
pub struct FnDrift {
    f: Arc<DriftFn>,
    constants: Constants,
    name: String,
}

impl FnDrift {
    pub fn new(
        name: impl Into<String>,
        constants: Constants,
        f: impl Fn(usize, &TimeGrid, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            constants,
            name: name.into(),
        }
    }
}

impl Drift for FnDrift {
    fn eval(&self, i: usize, grid: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
        (self.f)(i, grid, x, y)
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Wraps a drift with overriding declared constants.
#[derive(Clone)]
pub struct WithConstants {
    inner: DriftRef,
    constants: Constants,
}

impl WithConstants {
    pub fn new(inner: DriftRef, constants: Constants) -> Self {
        Self { inner, constants }
    }
}

impl Drift for WithConstants {
    fn eval(&self, i: usize, grid: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
        self.inner.eval(i, grid, x, y)
    }

    fn eval_path(&self, grid: &TimeGrid, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.inner.eval_path(grid, x, y, out)
    }

    fn constants(&self) -> Constants {
        self.constants
    }

    fn reads_state(&self) -> bool {
        self.inner.reads_state()
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// `f_(m)(t) = f(t)·1{∫ f² ≤ m}` with the running integral taken by the
/// left-point rule through the end of the current step.
///
/// At knot `i` the indicator tests `Σ_{j≤i} f(t_j)²·Δt ≤ m`, which only reads
/// path values up to knot `i`. Since the untruncated integral is
/// nondecreasing, the active knots form a prefix and the truncated output
/// satisfies `∫ f_(m)² dt ≤ m` exactly.
#[derive(Clone)]
pub struct Truncated {
    inner: DriftRef,
    level: f64,
}

impl Truncated {
    pub fn level(&self) -> f64 {
        self.level
    }
}

/// Truncates `f` at running energy level `m > 0`.
pub fn truncate_drift(f: DriftRef, m: f64) -> Result<Truncated> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Domain(format!("truncation level must be positive, got {m}")));
    }
    Ok(Truncated { inner: f, level: m })
}

impl Drift for Truncated {
    fn eval(&self, i: usize, grid: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
        let dt = grid.dt();
        let mut energy = 0.0;
        let mut current = 0.0;
        for j in 0..=i {
            current = self.inner.eval(j, grid, &x[..=j], &y[..=j]);
            energy += current * current * dt;
            if energy > self.level {
                return 0.0;
            }
        }
        current
    }

    fn eval_path(&self, grid: &TimeGrid, x: &[f64], y: &[f64], out: &mut [f64]) {
        let dt = grid.dt();
        self.inner.eval_path(grid, x, y, out);
        let mut energy = 0.0;
        let mut active = true;
        for o in out.iter_mut() {
            if active {
                energy += *o * *o * dt;
                active = energy <= self.level;
            }
            if !active {
                *o = 0.0;
            }
        }
    }

    fn constants(&self) -> Constants {
        Constants {
            peak_power: Some(self.level),
            ..self.inner.constants()
        }
    }

    fn reads_state(&self) -> bool {
        self.inner.reads_state()
    }

    fn describe(&self) -> String {
        format!("trunc[{}]({})", self.level, self.inner.describe())
    }
}

/// The reduced drift `f / g` for the unit-diffusion form of an equation.
///
/// Evaluation yields NaN where `|g|` falls below the declared regularity
/// floor, which downstream integrators report as a non-finite value;
/// [`Reduced::check`] reports the violation itself.
#[derive(Clone)]
pub struct Reduced {
    drift: DriftRef,
    diffusion: Arc<dyn Diffusion>,
    floor: f64,
}

/// `f̃ = f g⁻¹`. Requires `g` to declare a bound on `|1/g|`.
pub fn reduce_diffusion(f: DriftRef, g: Arc<dyn Diffusion>) -> Result<Reduced> {
    let bound = g.inverse_bound().ok_or(Error::MissingRegularityBound)?;
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::Domain(format!("regularity bound must be positive, got {bound}")));
    }
    Ok(Reduced {
        drift: f,
        diffusion: g,
        floor: 1.0 / bound,
    })
}

impl Reduced {
    /// Errors at the first knot where `|g(t_i, y)| < 1/bound`.
    pub fn check(&self, grid: &TimeGrid, y: &[f64]) -> Result<()> {
        for i in 0..grid.steps() {
            let g = self.diffusion.eval(i, grid, &y[..=i]);
            if g.is_nan() || g.abs() < self.floor {
                return Err(Error::Regularity {
                    knot: i,
                    value: g.abs(),
                    floor: self.floor,
                });
            }
        }
        Ok(())
    }

    #[inline]
    fn quotient(&self, f: f64, g: f64) -> f64 {
        if g.abs() >= self.floor {
            f / g
        } else {
            f64::NAN
        }
    }
}

impl Drift for Reduced {
    fn eval(&self, i: usize, grid: &TimeGrid, x: &[f64], y: &[f64]) -> f64 {
        let f = self.drift.eval(i, grid, x, y);
        let g = self.diffusion.eval(i, grid, y);
        self.quotient(f, g)
    }

    fn eval_path(&self, grid: &TimeGrid, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.drift.eval_path(grid, x, y, out);
        let mut g = vec![0.0; out.len()];
        self.diffusion.eval_path(grid, y, &mut g);
        for (o, &gi) in out.iter_mut().zip(&g) {
            *o = self.quotient(*o, gi);
        }
    }

    fn constants(&self) -> Constants {
        // |f/g - f'/g'| <= b|f-f'| + b^2 |f'| |g-g'|, with |f'|^2 taken as L.
        // Only exact for drifts bounded by sqrt(L); probes can falsify it.
        let c = self.drift.constants();
        let b2 = (1.0 / self.floor).powi(2);
        Constants {
            lipschitz: 2.0 * b2 * c.lipschitz * (1.0 + b2 * c.growth),
            growth: b2 * c.growth,
            peak_power: c.peak_power.map(|m| m * b2),
        }
    }

    fn reads_state(&self) -> bool {
        self.drift.reads_state() || !self.diffusion.is_unit()
    }

    fn describe(&self) -> String {
        format!("({}) / g", self.drift.describe())
    }
}
