//! Monte Carlo estimators for divergences and mutual information along the
//! Picard iteration.
//!
//! Outer draw `i` always uses stream `(seed, i)` for its `(ξ, W)` pair and
//! the child stream [`INNER_STREAM`] for the message draws of every mixture
//! evaluated on it. Estimators for different quantities or different orders
//! therefore see the same randomness draw by draw, and their differences are
//! computed per draw.

use serde::{Deserialize, Serialize};

use crate::bounds::{compute_bounds, BoundInputs, BoundSet};
use crate::density::{conditional_exponent, mixture_exponents, DensityWorkspace, Measure};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{DriftRef, MessageLawRef, Path, TimeGrid, UnitDiffusion};
use crate::picard::{draw_message_and_noise, iterate, run_iteration_with, solve_limit, Order};
use crate::rng::RngStream;
use crate::stats::Accumulator;

/// Child-stream tag for inner message draws.
pub const INNER_STREAM: u64 = 1;

/// A unit-diffusion channel: drift, message law and grid.
#[derive(Clone)]
pub struct Channel {
    pub drift: DriftRef,
    pub law: MessageLawRef,
    pub grid: TimeGrid,
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Channel")
            .field("drift", &self.drift.describe())
            .field("law", &self.law.label())
            .field("grid", &self.grid)
            .finish()
    }
}

impl Channel {
    pub fn new(drift: DriftRef, law: MessageLawRef, grid: TimeGrid) -> Self {
        Self { drift, law, grid }
    }

    /// Declared constants of the drift with the message moment and horizon.
    pub fn bound_inputs(&self) -> BoundInputs {
        let c = self.drift.constants();
        BoundInputs {
            peak_power: c.peak_power,
            ..BoundInputs::new(
                c.lipschitz,
                c.growth,
                self.grid.horizon(),
                self.law.second_moment(&self.grid),
            )
        }
    }

    pub fn bounds(&self) -> Result<BoundSet> {
        compute_bounds(self.bound_inputs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub n_outer: usize,
    pub n_inner: usize,
}

impl Budget {
    pub fn new(n_outer: usize, n_inner: usize) -> Self {
        Self { n_outer, n_inner }
    }

    fn check(&self, inner: bool) -> Result<()> {
        if self.n_outer < 2 {
            return Err(Error::Domain(format!(
                "n_outer must be at least 2, got {}",
                self.n_outer
            )));
        }
        if inner && self.n_inner < 1 {
            return Err(Error::Domain("n_inner must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seed, worker pool and bound options shared by a run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub seed: u64,
    pub executor: Executor,
    /// Exponent `p` of the mutual-information rate shape.
    pub p: f64,
    pub mi_multiplier: f64,
}

impl RunContext {
    pub fn new(seed: u64, executor: Executor) -> Self {
        Self {
            seed,
            executor,
            p: 2.0,
            mi_multiplier: 1.0,
        }
    }

    pub fn sequential(seed: u64) -> Self {
        Self::new(seed, Executor::sequential())
    }

    fn bounds(&self, channel: &Channel) -> Option<BoundSet> {
        let inputs = BoundInputs {
            p: self.p,
            mi_multiplier: self.mi_multiplier,
            ..channel.bound_inputs()
        };
        compute_bounds(inputs).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    PicardIncrement,
    KlIterateVsLimit,
    KlVsWiener,
    KlJointVsProduct,
    MutualInformation,
    MiGap,
    ConditionalKl,
}

impl Quantity {
    /// Column-safe identifier.
    pub fn key(&self) -> &'static str {
        match self {
            Quantity::PicardIncrement => "picard_increment",
            Quantity::KlIterateVsLimit => "kl_iterate_vs_limit",
            Quantity::KlVsWiener => "kl_vs_wiener",
            Quantity::KlJointVsProduct => "kl_joint_vs_product",
            Quantity::MutualInformation => "mutual_information",
            Quantity::MiGap => "mi_gap",
            Quantity::ConditionalKl => "conditional_kl",
        }
    }

    pub fn label(&self, order: Order) -> String {
        let marginal = Measure::Marginal(order);
        let out = match order {
            Order::Iterate(n) => format!("Y^({n})"),
            Order::Limit => "Y".to_string(),
        };
        match self {
            Quantity::PicardIncrement => match order {
                Order::Iterate(n) => format!("E‖Y^({})−Y^({n})‖²", n + 1),
                Order::Limit => "E‖Y−Y‖²".into(),
            },
            Quantity::KlIterateVsLimit => {
                format!("D({marginal}‖{})", Measure::Marginal(Order::Limit))
            }
            Quantity::KlVsWiener => format!("D({marginal}‖{})", Measure::Wiener),
            Quantity::KlJointVsProduct => {
                format!("D({}‖{})", Measure::Joint(order), Measure::Product)
            }
            Quantity::MutualInformation => format!("I_T(ξ;{out})"),
            Quantity::MiGap => format!("I_T(ξ;{out}) − I_T(ξ;Y)"),
            Quantity::ConditionalKl => format!(
                "E_ξ D({}‖{})",
                Measure::Conditional(order),
                Measure::Conditional(Order::Limit)
            ),
        }
    }
}

/// A Monte Carlo estimate with its provenance and optional bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub quantity: Quantity,
    pub label: String,
    pub order: Order,
    /// Nats.
    pub estimate: f64,
    pub stderr: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub bound: Option<f64>,
    /// `estimate ≤ bound + 3·stderr`, when a bound is attached.
    pub within_bound: Option<bool>,
    pub steps: usize,
    pub horizon: f64,
    pub seed: u64,
    pub workers: usize,
}

impl EstimateReport {
    fn new(
        quantity: Quantity,
        order: Order,
        acc: &Accumulator,
        n_inner: usize,
        channel: &Channel,
        ctx: &RunContext,
    ) -> Self {
        Self {
            quantity,
            label: quantity.label(order),
            order,
            estimate: acc.mean(),
            stderr: acc.stderr(),
            n_outer: acc.count() as usize,
            n_inner,
            bound: None,
            within_bound: None,
            steps: channel.grid.steps(),
            horizon: channel.grid.horizon(),
            seed: ctx.seed,
            workers: ctx.executor.workers(),
        }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.within_bound = Some(self.estimate <= bound + 3.0 * self.stderr);
        self
    }

    /// Estimate in bits.
    pub fn bits(&self) -> f64 {
        self.estimate / std::f64::consts::LN_2
    }
}

fn outer_draw(channel: &Channel, seed: u64, i: usize) -> (RngStream, Path, Path) {
    let stream = RngStream::new(seed, i as u64);
    let (x, w) = draw_message_and_noise(&*channel.law, &channel.grid, &stream);
    (stream, x, w)
}

fn output_path(channel: &Channel, x: &Path, w: &Path, order: Order) -> Result<Path> {
    let f = &*channel.drift;
    match order.effective(&channel.grid) {
        Order::Iterate(n) if f.reads_state() => iterate(f, &UnitDiffusion, x, w, n),
        _ => solve_limit(f, &UnitDiffusion, x, w),
    }
}

fn check_order(order: Order) -> Result<()> {
    match order {
        Order::Iterate(0) => Err(Error::Domain("iterate order must be at least 1".into())),
        _ => Ok(()),
    }
}

/// Mixture densities at `y` for each of `orders`, with the inner draws of `stream`.
fn mixtures(
    channel: &Channel,
    stream: &RngStream,
    y: &Path,
    n_inner: usize,
    orders: &[Order],
    ws: &mut DensityWorkspace,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; orders.len()];
    let mut rng = stream.child(INNER_STREAM).rng();
    mixture_exponents(
        &*channel.drift,
        &channel.grid,
        y.values(),
        &*channel.law,
        n_inner,
        orders,
        &mut rng,
        ws,
        &mut out,
    )?;
    Ok(out)
}

fn joint(channel: &Channel, x: &Path, y: &Path, order: Order, ws: &mut DensityWorkspace) -> Result<f64> {
    let v = conditional_exponent(&*channel.drift, &channel.grid, x.values(), y.values(), order, ws)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Density {
            path: None,
            detail: format!("joint exponent evaluated to {v}"),
        })
    }
}

fn run<F>(ctx: &RunContext, n: usize, terms: usize, draw: F) -> Result<Vec<Accumulator>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    ctx.executor.accumulate(n, terms, |i| draw(i).map_err(|e| e.at_path(i)))
}

/// `E‖Y⁽ⁿ⁺¹⁾ − Y⁽ⁿ⁾‖²_T` for `n = 0..=n_max`, with the factorial bound attached.
pub fn picard_increments(
    channel: &Channel,
    n_max: usize,
    n_outer: usize,
    ctx: &RunContext,
) -> Result<Vec<EstimateReport>> {
    Budget::new(n_outer, 1).check(false)?;
    let accs = run(ctx, n_outer, n_max + 1, |i| {
        let stream = RngStream::new(ctx.seed, i as u64);
        let b = run_iteration_with(
            &*channel.drift,
            &UnitDiffusion,
            &*channel.law,
            &channel.grid,
            n_max + 1,
            0,
            &stream,
        )?;
        Ok((0..=n_max).map(|n| b.increment_sq(n)).collect())
    })?;
    let bounds = ctx.bounds(channel);
    Ok(accs
        .iter()
        .enumerate()
        .map(|(n, acc)| {
            let r = EstimateReport::new(Quantity::PicardIncrement, Order::Iterate(n), acc, 0, channel, ctx);
            match &bounds {
                Some(b) => r.with_bound(b.picard_l2(n)),
                None => r,
            }
        })
        .collect())
}

/// `D(μ_{Y⁽ⁿ⁾}‖μ_Y)`: mean over draws of `Y⁽ⁿ⁾` of the difference of the two
/// mixture densities, both built from the same inner message draws.
pub fn kl_iterate_vs_limit(channel: &Channel, n: usize, budget: Budget, ctx: &RunContext) -> Result<EstimateReport> {
    budget.check(true)?;
    let order = Order::Iterate(n);
    check_order(order)?;
    let accs = run(ctx, budget.n_outer, 1, |i| {
        let (stream, x, w) = outer_draw(channel, ctx.seed, i);
        let y = output_path(channel, &x, &w, order)?;
        let mut ws = DensityWorkspace::new(&channel.grid);
        let m = mixtures(channel, &stream, &y, budget.n_inner, &[order, Order::Limit], &mut ws)?;
        Ok(vec![m[0] - m[1]])
    })?;
    let r = EstimateReport::new(
        Quantity::KlIterateVsLimit,
        order,
        &accs[0],
        budget.n_inner,
        channel,
        ctx,
    );
    Ok(match ctx.bounds(channel) {
        Some(b) => r.with_bound(b.kl_rate(n)),
        None => r,
    })
}

/// `D(μ_{Y⁽ⁿ⁾}‖μ_W)` or `D(μ_Y‖μ_W)`.
pub fn kl_vs_wiener(channel: &Channel, order: Order, budget: Budget, ctx: &RunContext) -> Result<EstimateReport> {
    budget.check(true)?;
    check_order(order)?;
    let accs = run(ctx, budget.n_outer, 1, |i| {
        let (stream, x, w) = outer_draw(channel, ctx.seed, i);
        let y = output_path(channel, &x, &w, order)?;
        let mut ws = DensityWorkspace::new(&channel.grid);
        mixtures(channel, &stream, &y, budget.n_inner, &[order], &mut ws)
    })?;
    Ok(EstimateReport::new(
        Quantity::KlVsWiener,
        order,
        &accs[0],
        budget.n_inner,
        channel,
        ctx,
    ))
}

/// `D(μ_{ξ,Y⁽ⁿ⁾}‖μ_ξ × μ_W)`; no inner loop. Under a declared peak power
/// `M` the bound `M/2` is attached.
pub fn kl_joint_vs_product(
    channel: &Channel,
    order: Order,
    n_outer: usize,
    ctx: &RunContext,
) -> Result<EstimateReport> {
    Budget::new(n_outer, 0).check(false)?;
    check_order(order)?;
    let accs = run(ctx, n_outer, 1, |i| {
        let (_, x, w) = outer_draw(channel, ctx.seed, i);
        let y = output_path(channel, &x, &w, order)?;
        let mut ws = DensityWorkspace::new(&channel.grid);
        Ok(vec![joint(channel, &x, &y, order, &mut ws)?])
    })?;
    let r = EstimateReport::new(Quantity::KlJointVsProduct, order, &accs[0], 0, channel, ctx);
    Ok(match channel.drift.constants().peak_power {
        Some(m) => r.with_bound(m / 2.0),
        None => r,
    })
}

/// Mean over messages of the fixed-message divergence
/// `D(μ_{Y^{ξ,(n)}}‖μ_{Y^ξ})`, estimated on draws of `(ξ, Y^{ξ,(n)})`.
pub fn conditional_kl_iterate_vs_limit(
    channel: &Channel,
    n: usize,
    n_outer: usize,
    ctx: &RunContext,
) -> Result<EstimateReport> {
    Budget::new(n_outer, 0).check(false)?;
    let order = Order::Iterate(n);
    check_order(order)?;
    let accs = run(ctx, n_outer, 1, |i| {
        let (_, x, w) = outer_draw(channel, ctx.seed, i);
        let y = output_path(channel, &x, &w, order)?;
        let mut ws = DensityWorkspace::new(&channel.grid);
        let a = joint(channel, &x, &y, order, &mut ws)?;
        let b = joint(channel, &x, &y, Order::Limit, &mut ws)?;
        Ok(vec![a - b])
    })?;
    Ok(EstimateReport::new(
        Quantity::ConditionalKl,
        order,
        &accs[0],
        0,
        channel,
        ctx,
    ))
}

/// Joint divergence, output divergence and their difference, all on the
/// same outer draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub joint: EstimateReport,
    pub marginal: EstimateReport,
    pub mutual: EstimateReport,
}

/// Per-draw terms `[joint, mixture, joint − mixture]` at one order.
fn information_terms(
    channel: &Channel,
    stream: &RngStream,
    x: &Path,
    y: &Path,
    order: Order,
    n_inner: usize,
    ws: &mut DensityWorkspace,
) -> Result<[f64; 3]> {
    let j = joint(channel, x, y, order, ws)?;
    let m = mixtures(channel, stream, y, n_inner, &[order], ws)?[0];
    Ok([j, m, j - m])
}

fn decomposition(
    accs: &[Accumulator],
    order: Order,
    n_inner: usize,
    channel: &Channel,
    ctx: &RunContext,
) -> Decomposition {
    let joint = EstimateReport::new(Quantity::KlJointVsProduct, order, &accs[0], 0, channel, ctx);
    let marginal = EstimateReport::new(Quantity::KlVsWiener, order, &accs[1], n_inner, channel, ctx);
    let mut mutual = EstimateReport::new(Quantity::MutualInformation, order, &accs[2], n_inner, channel, ctx);
    mutual.estimate = joint.estimate - marginal.estimate;
    Decomposition {
        joint,
        marginal,
        mutual,
    }
}

pub fn information_decomposition(
    channel: &Channel,
    order: Order,
    budget: Budget,
    ctx: &RunContext,
) -> Result<Decomposition> {
    budget.check(true)?;
    check_order(order)?;
    let accs = run(ctx, budget.n_outer, 3, |i| {
        let (stream, x, w) = outer_draw(channel, ctx.seed, i);
        let y = output_path(channel, &x, &w, order)?;
        let mut ws = DensityWorkspace::new(&channel.grid);
        Ok(information_terms(channel, &stream, &x, &y, order, budget.n_inner, &mut ws)?.to_vec())
    })?;
    Ok(decomposition(&accs, order, budget.n_inner, channel, ctx))
}

/// `I_T(ξ;Y⁽ⁿ⁾)` or `I_T(ξ;Y)` as joint minus output divergence on shared
/// draws; the standard error comes from the per-draw differences.
pub fn mutual_information(channel: &Channel, order: Order, budget: Budget, ctx: &RunContext) -> Result<EstimateReport> {
    Ok(information_decomposition(channel, order, budget, ctx)?.mutual)
}

/// All quantities at one order of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub kl_iterate_vs_limit: EstimateReport,
    pub information: Decomposition,
    /// `I_T(ξ;Y⁽ⁿ⁾) − I_T(ξ;Y)` from per-draw differences.
    pub gap: EstimateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub limit: Decomposition,
    pub bounds: Option<BoundSet>,
}

impl Sweep {
    /// Every report, row by row, followed by the limit reports.
    pub fn reports(&self) -> Vec<&EstimateReport> {
        let mut out = Vec::new();
        for r in &self.rows {
            out.extend([
                &r.kl_iterate_vs_limit,
                &r.information.marginal,
                &r.information.joint,
                &r.information.mutual,
                &r.gap,
            ]);
        }
        out.extend([&self.limit.marginal, &self.limit.joint, &self.limit.mutual]);
        out
    }
}

const ROW_TERMS: usize = 5;

/// Every quantity for each `n` in `ns` plus the limit, from one pass over
/// shared outer draws.
pub fn convergence_sweep(channel: &Channel, ns: &[usize], budget: Budget, ctx: &RunContext) -> Result<Sweep> {
    if ns.is_empty() {
        return Err(Error::Domain("sweep needs at least one order".into()));
    }
    budget.check(true)?;
    for &n in ns {
        check_order(Order::Iterate(n))?;
    }
    let terms = ROW_TERMS * ns.len() + 3;
    let accs = run(ctx, budget.n_outer, terms, |i| {
        let (stream, x, w) = outer_draw(channel, ctx.seed, i);
        let mut ws = DensityWorkspace::new(&channel.grid);
        let y_lim = output_path(channel, &x, &w, Order::Limit)?;
        let lim = information_terms(channel, &stream, &x, &y_lim, Order::Limit, budget.n_inner, &mut ws)?;
        let mut out = Vec::with_capacity(terms);
        for &n in ns {
            let order = Order::Iterate(n);
            let y = output_path(channel, &x, &w, order)?;
            let m = mixtures(channel, &stream, &y, budget.n_inner, &[order, Order::Limit], &mut ws)?;
            let j = joint(channel, &x, &y, order, &mut ws)?;
            let mi = j - m[0];
            out.extend([m[0] - m[1], j, m[0], mi, mi - lim[2]]);
        }
        out.extend(lim);
        Ok(out)
    })?;
    let bounds = ctx.bounds(channel);
    let limit = decomposition(&accs[terms - 3..], Order::Limit, budget.n_inner, channel, ctx);
    let rows = ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let a = &accs[ROW_TERMS * k..ROW_TERMS * (k + 1)];
            let order = Order::Iterate(n);
            let mut kl = EstimateReport::new(Quantity::KlIterateVsLimit, order, &a[0], budget.n_inner, channel, ctx);
            let information = decomposition(&a[1..4], order, budget.n_inner, channel, ctx);
            let mut gap = EstimateReport::new(Quantity::MiGap, order, &a[4], budget.n_inner, channel, ctx);
            if let Some(b) = &bounds {
                kl = kl.with_bound(b.kl_rate(n));
                gap.bound = Some(b.mi_rate(n));
            }
            SweepRow {
                n,
                kl_iterate_vs_limit: kl,
                information,
                gap,
            }
        })
        .collect();
    Ok(Sweep { rows, limit, bounds })
}

/// `√(D/2)` with a delta-method standard error; Pinsker's bound on total
/// variation from a divergence estimate.
pub fn pinsker_bound(kl: &EstimateReport) -> (f64, f64) {
    let d = kl.estimate.max(0.0);
    let tv = (d / 2.0).sqrt();
    let se = if tv > 0.0 {
        kl.stderr / (4.0 * tv)
    } else {
        (kl.stderr / 2.0).sqrt()
    };
    (tv, se)
}

/// Comparison of a gap sequence with a rate shape `C·rate(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    /// `C` fitted on the first point.
    pub multiplier: f64,
    /// Least-squares slope of `ln|gap|` against `n` over points with
    /// `|gap| > 3·stderr`, when there are at least two.
    pub gap_slope: Option<f64>,
    /// Slope of `ln rate` over the same points.
    pub rate_slope: Option<f64>,
    /// Every later point satisfies `|gap| ≤ C·rate(n) + 3·stderr`.
    pub consistent: bool,
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits `C` so that `C·rate(n₀) = |gap(n₀)|` at the first order and checks
/// that the remaining gaps stay under the scaled curve.
pub fn fit_rate_shape(gaps: &[EstimateReport], rate: impl Fn(usize) -> f64) -> ShapeFit {
    let order_of = |r: &EstimateReport| match r.order {
        Order::Iterate(n) => n,
        Order::Limit => usize::MAX,
    };
    let Some(first) = gaps.first() else {
        return ShapeFit {
            multiplier: 0.0,
            gap_slope: None,
            rate_slope: None,
            consistent: true,
        };
    };
    let multiplier = first.estimate.abs() / rate(order_of(first));
    let consistent = gaps
        .iter()
        .all(|g| g.estimate.abs() <= multiplier * rate(order_of(g)) + 3.0 * g.stderr);
    let significant: Vec<&EstimateReport> = gaps
        .iter()
        .filter(|g| g.estimate.abs() > 3.0 * g.stderr && g.estimate != 0.0)
        .collect();
    let (gap_slope, rate_slope) = if significant.len() >= 2 {
        let gp: Vec<(f64, f64)> = significant
            .iter()
            .map(|g| (order_of(g) as f64, g.estimate.abs().ln()))
            .collect();
        let rp: Vec<(f64, f64)> = significant
            .iter()
            .map(|g| (order_of(g) as f64, rate(order_of(g)).ln()))
            .collect();
        (Some(slope(&gp)), Some(slope(&rp)))
    } else {
        (None, None)
    };
    ShapeFit {
        multiplier,
        gap_slope,
        rate_slope,
        consistent,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{
        truncate_drift, ConstantDrift, ConstantGaussian, LinearFeedback, MessageDrift, NoMessage, ZeroDrift,
    };

    fn grid(steps: usize) -> TimeGrid {
        TimeGrid::new(1.0, steps).unwrap()
    }

    fn gaussian_channel(steps: usize) -> Channel {
        Channel::new(
            Arc::new(MessageDrift),
            Arc::new(ConstantGaussian { sigma: 1.0 }),
            grid(steps),
        )
    }

    fn linear_channel(steps: usize) -> Channel {
        Channel::new(
            Arc::new(LinearFeedback { gain: 0.5 }),
            Arc::new(ConstantGaussian { sigma: 1.0 }),
            grid(steps),
        )
    }

    fn ctx() -> RunContext {
        RunContext::sequential(42)
    }

    #[test]
    fn zero_drift_estimates_vanish() {
        let ch = Channel::new(Arc::new(ZeroDrift), Arc::new(ConstantGaussian { sigma: 1.0 }), grid(16));
        let b = Budget::new(50, 10);
        assert_eq!(kl_iterate_vs_limit(&ch, 2, b, &ctx()).unwrap().estimate, 0.0);
        assert_eq!(kl_vs_wiener(&ch, Order::Limit, b, &ctx()).unwrap().estimate, 0.0);
        assert_eq!(
            kl_joint_vs_product(&ch, Order::Iterate(3), 50, &ctx())
                .unwrap()
                .estimate,
            0.0
        );
        assert_eq!(mutual_information(&ch, Order::Limit, b, &ctx()).unwrap().estimate, 0.0);
        let s = convergence_sweep(&ch, &[1, 2, 3], b, &ctx()).unwrap();
        assert!(s.reports().iter().all(|r| r.estimate == 0.0 && r.stderr == 0.0));
    }

    #[test]
    fn state_free_drift_has_no_iteration_gap() {
        let ch = gaussian_channel(16);
        for n in [1, 2, 5] {
            let r = kl_iterate_vs_limit(&ch, n, Budget::new(200, 50), &ctx()).unwrap();
            assert_eq!(r.estimate, 0.0);
        }
    }

    #[test]
    fn constant_drift_divergence_from_wiener() {
        let ch = Channel::new(Arc::new(ConstantDrift { theta: 1.0 }), Arc::new(NoMessage), grid(16));
        let r = kl_vs_wiener(&ch, Order::Limit, Budget::new(20_000, 4), &ctx()).unwrap();
        assert!((r.estimate - 0.5).abs() < 3.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn gaussian_channel_joint_divergence() {
        let r = kl_joint_vs_product(&gaussian_channel(16), Order::Limit, 20_000, &ctx()).unwrap();
        assert!((r.estimate - 0.5).abs() < 3.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn gaussian_channel_mutual_information() {
        let d = information_decomposition(&gaussian_channel(8), Order::Limit, Budget::new(4000, 500), &ctx()).unwrap();
        let exact = 0.5 * 2f64.ln();
        assert!((d.mutual.estimate - exact).abs() < 0.05, "{:?}", d.mutual);
        assert!((d.marginal.estimate - (1.0 - 2f64.ln()) / 2.0).abs() < 0.03);
        assert_eq!(d.joint.estimate - d.marginal.estimate - d.mutual.estimate, 0.0);
        assert!(d.mutual.stderr < d.joint.stderr);
    }

    #[test]
    fn truncated_joint_respects_half_power() {
        let f = truncate_drift(Arc::new(LinearFeedback { gain: 0.5 }), 1.0).unwrap();
        let ch = Channel::new(Arc::new(f), Arc::new(ConstantGaussian { sigma: 1.0 }), grid(16));
        let r = kl_joint_vs_product(&ch, Order::Iterate(2), 2000, &ctx()).unwrap();
        assert_eq!(r.bound, Some(0.5));
        assert_eq!(r.within_bound, Some(true));
    }

    #[test]
    fn sweep_matches_standalone_estimators() {
        let ch = linear_channel(12);
        let b = Budget::new(40, 20);
        let s = convergence_sweep(&ch, &[1, 3], b, &ctx()).unwrap();
        let kl = kl_iterate_vs_limit(&ch, 3, b, &ctx()).unwrap();
        assert_eq!(kl.estimate, s.rows[1].kl_iterate_vs_limit.estimate);
        let w = kl_vs_wiener(&ch, Order::Iterate(1), b, &ctx()).unwrap();
        assert_eq!(w.estimate, s.rows[0].information.marginal.estimate);
        let mi = mutual_information(&ch, Order::Limit, b, &ctx()).unwrap();
        assert_eq!(mi.estimate, s.limit.mutual.estimate);
        for r in s.reports() {
            assert!(r.stderr >= 0.0);
            assert_eq!(r.seed, 42);
            assert_eq!(r.steps, 12);
        }
    }

    #[test]
    fn linear_sweep_gap_shrinks_and_respects_bounds() {
        let ch = linear_channel(16);
        let s = convergence_sweep(&ch, &[1, 2, 3, 4, 5, 6], Budget::new(400, 100), &ctx()).unwrap();
        for r in &s.rows {
            assert_eq!(r.kl_iterate_vs_limit.within_bound, Some(true));
            assert!(r.kl_iterate_vs_limit.estimate >= -3.0 * r.kl_iterate_vs_limit.stderr);
        }
        for pair in s.rows.windows(2) {
            let (a, b) = (&pair[0].gap, &pair[1].gap);
            assert!(b.estimate.abs() <= a.estimate.abs() + 3.0 * (a.stderr + b.stderr));
        }
    }

    #[test]
    fn convexity_against_conditional_divergence() {
        let ch = linear_channel(16);
        for n in [1, 2] {
            let mixed = kl_iterate_vs_limit(&ch, n, Budget::new(400, 200), &ctx()).unwrap();
            let cond = conditional_kl_iterate_vs_limit(&ch, n, 400, &ctx()).unwrap();
            let se = (mixed.stderr.powi(2) + cond.stderr.powi(2)).sqrt();
            assert!(mixed.estimate <= cond.estimate + 3.0 * se, "n={n}: {mixed:?} {cond:?}");
        }
    }

    #[test]
    fn increments_respect_factorial_bound() {
        let ch = linear_channel(64);
        let rows = picard_increments(&ch, 6, 500, &ctx()).unwrap();
        assert_eq!(rows.len(), 7);
        for r in &rows {
            assert_eq!(r.within_bound, Some(true), "{r:?}");
        }
        assert!(rows[6].estimate < rows[0].estimate);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let ch = linear_channel(8);
        let b = Budget::new(30, 10);
        let seq = convergence_sweep(&ch, &[1, 2], b, &ctx()).unwrap();
        let par = convergence_sweep(
            &ch,
            &[1, 2],
            b,
            &RunContext::new(42, Executor::with_workers(3).unwrap()),
        )
        .unwrap();
        for (a, b) in seq.reports().iter().zip(par.reports()) {
            assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
            assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        }
    }

    #[test]
    fn budgets_are_validated() {
        let ch = gaussian_channel(4);
        assert!(kl_vs_wiener(&ch, Order::Limit, Budget::new(1, 10), &ctx()).is_err());
        assert!(kl_vs_wiener(&ch, Order::Limit, Budget::new(10, 0), &ctx()).is_err());
        assert!(kl_vs_wiener(&ch, Order::Iterate(0), Budget::new(10, 1), &ctx()).is_err());
        assert!(convergence_sweep(&ch, &[], Budget::new(10, 1), &ctx()).is_err());
    }

    #[test]
    fn pinsker_delta_method() {
        let r = EstimateReport {
            quantity: Quantity::KlVsWiener,
            label: String::new(),
            order: Order::Limit,
            estimate: 0.5,
            stderr: 0.01,
            n_outer: 10,
            n_inner: 1,
            bound: None,
            within_bound: None,
            steps: 1,
            horizon: 1.0,
            seed: 0,
            workers: 1,
        };
        let (tv, se) = pinsker_bound(&r);
        assert_eq!(tv, 0.5);
        assert!((se - 0.005).abs() < 1e-15);
    }

    #[test]
    fn labels_use_measure_vocabulary() {
        assert_eq!(
            Quantity::KlIterateVsLimit.label(Order::Iterate(2)),
            "D(μ_{Y^(2)}‖μ_{Y})"
        );
        assert_eq!(Quantity::KlVsWiener.label(Order::Limit), "D(μ_{Y}‖μ_W)");
        assert_eq!(Quantity::MutualInformation.label(Order::Iterate(1)), "I_T(ξ;Y^(1))");
        assert_eq!(Quantity::KlJointVsProduct.label(Order::Limit), "D(μ_{ξ,Y}‖μ_ξ×μ_W)");
    }

    #[test]
    fn shape_fit_on_synthetic_gaps() {
        let mk = |n: usize, v: f64| EstimateReport {
            quantity: Quantity::MiGap,
            label: String::new(),
            order: Order::Iterate(n),
            estimate: v,
            stderr: 1e-6,
            n_outer: 10,
            n_inner: 1,
            bound: None,
            within_bound: None,
            steps: 1,
            horizon: 1.0,
            seed: 0,
            workers: 1,
        };
        let rate = |n: usize| 0.5f64.powi(n as i32);
        let fast: Vec<_> = (1..6).map(|n| mk(n, 0.1 * 0.2f64.powi(n as i32))).collect();
        let fit = fit_rate_shape(&fast, rate);
        assert!(fit.consistent);
        assert!(fit.gap_slope.unwrap() < fit.rate_slope.unwrap());
        let slow: Vec<_> = (1..6).map(|n| mk(n, 0.1 * 0.9f64.powi(n as i32))).collect();
        assert!(!fit_rate_shape(&slow, rate).consistent);
    }
}
