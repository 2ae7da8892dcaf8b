//! Girsanov log-densities against Wiener measure, for a fixed message, for
//! finite iterates, and for message mixtures.
//!
//! All exponents use the left-point rule, so they are the exact
//! log-likelihood ratios of the Euler chain against scaled Gaussian
//! increments at any step size.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Drift, MessageLaw, Path, TimeGrid};
use crate::picard::{inversion_pass, InversionWorkspace, Order};
use crate::rng::StreamRng;

/// Path measures that appear as numerator or denominator of a density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    /// Wiener measure `μ_W`.
    Wiener,
    /// Law of the output for one fixed message.
    Conditional(Order),
    /// Marginal law of the output, averaged over the message.
    Marginal(Order),
    /// Joint law of message and output.
    Joint(Order),
    /// `μ_ξ × μ_W`.
    Product,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sup = |o: &Order| match o {
            Order::Iterate(n) => format!(",({n})"),
            Order::Limit => String::new(),
        };
        let bare = |o: &Order| match o {
            Order::Iterate(n) => format!("^({n})"),
            Order::Limit => String::new(),
        };
        match self {
            Measure::Wiener => f.write_str("μ_W"),
            Measure::Conditional(o) => write!(f, "μ_{{Y^{{x{}}}}}", sup(o)),
            Measure::Marginal(o) => write!(f, "μ_{{Y{}}}", bare(o)),
            Measure::Joint(o) => write!(f, "μ_{{ξ,Y{}}}", bare(o)),
            Measure::Product => f.write_str("μ_ξ×μ_W"),
        }
    }
}

/// Value of `log dμ/dν` at one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDensity {
    pub value: f64,
    pub numerator: Measure,
    pub denominator: Measure,
    pub path_id: Option<usize>,
    /// Message draws averaged over; 0 for fixed-message densities.
    pub n_inner: usize,
}

impl LogDensity {
    pub fn with_path(mut self, id: usize) -> Self {
        self.path_id = Some(id);
        self
    }
}

impl fmt::Display for LogDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "log d{}/d{} = {}", self.numerator, self.denominator, self.value)
    }
}

/// Numerically stable `log(mean(exp(v)))`; `-∞` for an empty slice.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return if values.is_empty() { f64::NEG_INFINITY } else { max };
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

fn checked(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Density {
            path: None,
            detail: format!("{what} evaluated to {value}"),
        })
    }
}

/// Scratch space reused across density evaluations on one grid.
#[derive(Debug, Default)]
pub(crate) struct DensityWorkspace {
    drift: Vec<f64>,
    message: Vec<f64>,
    exponents: Vec<f64>,
    inversion: InversionWorkspace,
}

impl DensityWorkspace {
    pub(crate) fn new(grid: &TimeGrid) -> Self {
        Self {
            drift: vec![0.0; grid.steps()],
            message: vec![0.0; grid.knots()],
            exponents: Vec::new(),
            inversion: InversionWorkspace::default(),
        }
    }
}

/// `Σ f_i Δy_i − ½ Σ f_i² Δt` with `f` read along `y` itself.
fn fixed_exponent(f: &dyn Drift, grid: &TimeGrid, x: &[f64], y: &[f64], drift: &mut [f64]) -> f64 {
    f.eval_path(grid, x, y, drift);
    let dt = grid.dt();
    let mut ito = 0.0;
    let mut energy = 0.0;
    for (i, &fi) in drift.iter().enumerate() {
        ito += fi * (y[i + 1] - y[i]);
        energy += fi * fi;
    }
    ito - 0.5 * energy * dt
}

/// Same exponent with `f` read along the rebuilt previous iterate.
fn iterate_exponent(
    f: &dyn Drift,
    grid: &TimeGrid,
    x: &[f64],
    y: &[f64],
    n: usize,
    ws: &mut InversionWorkspace,
) -> Result<f64> {
    let dt = grid.dt();
    let mut ito = 0.0;
    let mut energy = 0.0;
    inversion_pass(f, grid, x, y, n, ws, |i, fi, _| {
        ito += fi * (y[i + 1] - y[i]);
        energy += fi * fi;
    })?;
    Ok(ito - 0.5 * energy * dt)
}

/// Exponent for the conditional law of the given order at `y`.
pub(crate) fn conditional_exponent(
    f: &dyn Drift,
    grid: &TimeGrid,
    x: &[f64],
    y: &[f64],
    order: Order,
    ws: &mut DensityWorkspace,
) -> Result<f64> {
    match order.effective(grid) {
        Order::Iterate(0) => Err(Error::Domain("iterate densities need n >= 1".into())),
        Order::Iterate(_) if !f.reads_state() => Ok(fixed_exponent(f, grid, x, y, &mut ws.drift)),
        Order::Iterate(n) => iterate_exponent(f, grid, x, y, n, &mut ws.inversion),
        Order::Limit => Ok(fixed_exponent(f, grid, x, y, &mut ws.drift)),
    }
}

fn same_grid(x: &Path, y: &Path) -> Result<()> {
    if x.grid() != y.grid() {
        return Err(Error::InvalidGrid("message and path live on different grids".into()));
    }
    Ok(())
}

fn conditional(f: &dyn Drift, x: &Path, y: &Path, order: Order) -> Result<LogDensity> {
    same_grid(x, y)?;
    let grid = *y.grid();
    let mut ws = DensityWorkspace::new(&grid);
    let value = conditional_exponent(f, &grid, x.values(), y.values(), order, &mut ws)?;
    Ok(LogDensity {
        value: checked(value, "fixed-message exponent")?,
        numerator: Measure::Conditional(order),
        denominator: Measure::Wiener,
        path_id: None,
        n_inner: 0,
    })
}

/// `log dμ_{Yˣ}/dμ_W (y) = ∫ f(t, x, y) dy − ½ ∫ f(t, x, y)² dt` (unit diffusion).
pub fn log_density_fixed_message(f: &dyn Drift, x: &Path, y: &Path) -> Result<LogDensity> {
    conditional(f, x, y, Order::Limit)
}

/// `log dμ_{Y^{x,(n)}}/dμ_W (y)`: the drift is read along the order-`(n−1)`
/// iterate rebuilt from the noise that produces `y`.
pub fn log_density_fixed_message_iterate(f: &dyn Drift, x: &Path, y: &Path, n: usize) -> Result<LogDensity> {
    if n == 0 {
        return Err(Error::Domain("iterate densities need n >= 1".into()));
    }
    conditional(f, x, y, Order::Iterate(n))
}

/// `log dμ_{ξ,Y}/d(μ_ξ × μ_W) (x, y)`, which is the fixed-message density
/// of the same order.
pub fn joint_log_density(f: &dyn Drift, x: &Path, y: &Path, order: Order) -> Result<LogDensity> {
    let d = conditional(f, x, y, order)?;
    Ok(LogDensity {
        numerator: Measure::Joint(order),
        denominator: Measure::Product,
        ..d
    })
}

/// Mixture densities for several orders from one set of inner message
/// draws; `out[k]` belongs to `orders[k]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn mixture_exponents(
    f: &dyn Drift,
    grid: &TimeGrid,
    y: &[f64],
    law: &dyn MessageLaw,
    n_inner: usize,
    orders: &[Order],
    rng: &mut StreamRng,
    ws: &mut DensityWorkspace,
    out: &mut [f64],
) -> Result<()> {
    if n_inner == 0 {
        return Err(Error::Domain("mixture densities need n_inner >= 1".into()));
    }
    let draws = if law.is_deterministic() { 1 } else { n_inner };
    let k = orders.len();
    let mut exps = std::mem::take(&mut ws.exponents);
    exps.clear();
    exps.resize(draws * k, 0.0);
    let mut message = std::mem::take(&mut ws.message);
    message.resize(grid.knots(), 0.0);
    let result = (|| {
        for d in 0..draws {
            law.sample_into(grid, rng, &mut message);
            for (j, &order) in orders.iter().enumerate() {
                exps[j * draws + d] = conditional_exponent(f, grid, &message, y, order, ws)?;
            }
        }
        Ok(())
    })();
    ws.message = message;
    if let Err(e) = result {
        ws.exponents = exps;
        return Err(e);
    }
    for (j, o) in out.iter_mut().enumerate().take(k) {
        let v = log_mean_exp(&exps[j * draws..(j + 1) * draws]);
        if v == f64::NEG_INFINITY {
            ws.exponents = exps;
            return Err(Error::DegenerateMixture { path: None });
        }
        *o = v;
    }
    ws.exponents = exps;
    for &v in out.iter().take(k) {
        checked(v, "mixture density")?;
    }
    Ok(())
}

/// `log dμ_{Y⁽ⁿ⁾}/dμ_W (y)` or `log dμ_Y/dμ_W (y)` as a log-mean-exp of
/// conditional densities over `n_inner` fresh message draws.
pub fn log_mixture_density(
    f: &dyn Drift,
    y: &Path,
    law: &dyn MessageLaw,
    n_inner: usize,
    order: Order,
    rng: &mut StreamRng,
) -> Result<LogDensity> {
    let grid = *y.grid();
    let mut ws = DensityWorkspace::new(&grid);
    let mut out = [0.0];
    mixture_exponents(f, &grid, y.values(), law, n_inner, &[order], rng, &mut ws, &mut out)?;
    Ok(LogDensity {
        value: out[0],
        numerator: Measure::Marginal(order),
        denominator: Measure::Wiener,
        path_id: None,
        n_inner,
    })
}
