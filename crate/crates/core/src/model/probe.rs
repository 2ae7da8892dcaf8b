use rand::Rng;

use super::diffusion::Diffusion;
use super::drift::{Constants, Drift};
use super::grid::TimeGrid;
use super::message::MessageLaw;
use crate::error::{Error, Result};
use crate::rng::{normal, StreamRng};

/// Relative slack before an empirical ratio counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Lipschitz,
    Growth,
    PeakPower,
}

/// Largest condition ratios seen while probing, next to the declared constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub lipschitz: f64,
    pub growth: f64,
    /// Largest sampled `∫_0^T f² dt`.
    pub peak_power: f64,
    pub declared: Constants,
    pub trials: usize,
    pub violations: Vec<Condition>,
}

impl ConditionReport {
    pub fn is_violated(&self) -> bool {
        !self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    /// Probe paths are clamped to `[-amplitude, amplitude]`.
    pub amplitude: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { amplitude: 10.0 }
    }
}

fn probe_path(grid: &TimeGrid, amplitude: f64, rng: &mut StreamRng, out: &mut [f64]) {
    let scale = amplitude * rng.random::<f64>();
    let offset = amplitude * (2.0 * rng.random::<f64>() - 1.0);
    let sd = grid.dt().sqrt() * scale;
    let mut walk = 0.0;
    for o in out.iter_mut() {
        *o = (offset + walk).clamp(-amplitude, amplitude);
        walk += sd * normal(rng);
    }
}

fn running_sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn finite(what: &'static str, knot: usize, value: f64, x: f64, y: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation {
            what,
            knot,
            detail: format!("value {value} at x(t) = {x}, y(t) = {y}"),
        })
    }
}

/// Empirical falsification harness for the Lipschitz, growth and peak-power
/// conditions. Samples messages from `law`, pairs of clamped random-walk
/// state paths, and random knots, and records the largest ratios.
pub fn probe_conditions(
    f: &dyn Drift,
    g: &dyn Diffusion,
    law: &dyn MessageLaw,
    grid: &TimeGrid,
    trials: usize,
    options: ProbeOptions,
    rng: &mut StreamRng,
) -> Result<ConditionReport> {
    if trials == 0 {
        return Err(Error::Domain("probe needs at least one trial".into()));
    }
    let declared = f.constants();
    let knots = grid.knots();
    let (mut x, mut psi, mut phi) = (vec![0.0; knots], vec![0.0; knots], vec![0.0; knots]);
    let mut along = vec![0.0; grid.steps()];
    let (mut k_hat, mut l_hat, mut m_hat) = (0.0_f64, 0.0_f64, 0.0_f64);

    for _ in 0..trials {
        law.sample_into(grid, rng, &mut x);
        probe_path(grid, options.amplitude, rng, &mut psi);
        probe_path(grid, options.amplitude, rng, &mut phi);
        let i = rng.random_range(0..grid.steps());

        let f1 = finite("drift", i, f.eval(i, grid, &x[..=i], &psi[..=i]), x[i], psi[i])?;
        let f2 = finite("drift", i, f.eval(i, grid, &x[..=i], &phi[..=i]), x[i], phi[i])?;
        let g1 = finite("diffusion", i, g.eval(i, grid, &psi[..=i]), x[i], psi[i])?;
        let g2 = finite("diffusion", i, g.eval(i, grid, &phi[..=i]), x[i], phi[i])?;

        let gap = psi[..=i]
            .iter()
            .zip(&phi[..=i])
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if gap > 0.0 {
            k_hat = k_hat.max(((f1 - f2).powi(2) + (g1 - g2).powi(2)) / (gap * gap));
        }
        let scale = 1.0 + running_sup(&x[..=i]).powi(2) + running_sup(&psi[..=i]).powi(2);
        l_hat = l_hat.max((f1 * f1 + g1 * g1) / scale);

        f.eval_path(grid, &x, &psi, &mut along);
        let energy = along.iter().map(|v| v * v).sum::<f64>() * grid.dt();
        if !energy.is_finite() {
            return Err(Error::Evaluation {
                what: "drift energy",
                knot: grid.steps(),
                detail: format!("∫f² = {energy}"),
            });
        }
        m_hat = m_hat.max(energy);
    }

    let exceeds = |seen: f64, bound: f64| seen > bound * (1.0 + VIOLATION_TOLERANCE);
    let mut violations = Vec::new();
    if exceeds(k_hat, declared.lipschitz) {
        violations.push(Condition::Lipschitz);
    }
    if exceeds(l_hat, declared.growth) {
        violations.push(Condition::Growth);
    }
    if let Some(m) = declared.peak_power {
        if exceeds(m_hat, m) {
            violations.push(Condition::PeakPower);
        }
    }
    Ok(ConditionReport {
        lipschitz: k_hat,
        growth: l_hat,
        peak_power: m_hat,
        declared,
        trials,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::diffusion::UnitDiffusion;
    use super::super::drift::{truncate_drift, FnDrift, LinearFeedback, ZeroDrift};
    use super::super::message::{ConstantGaussian, NoMessage};
    use super::*;
    use crate::rng::RngStream;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, 32).unwrap()
    }

    fn probe(f: &dyn Drift, law: &dyn MessageLaw) -> ConditionReport {
        let mut rng = RngStream::new(3, 0).rng();
        probe_conditions(f, &UnitDiffusion, law, &grid(), 2000, ProbeOptions::default(), &mut rng).unwrap()
    }

    fn unit_constants() -> Constants {
        Constants::new(1.0, 1.0, None).unwrap()
    }

    #[test]
    fn zero_drift() {
        let r = probe(&ZeroDrift, &NoMessage);
        assert_eq!(r.lipschitz, 0.0);
        assert!(r.growth <= 1.0);
        assert!(!r.is_violated());
    }

    #[test]
    fn identity_feedback_is_one_lipschitz() {
        let f = FnDrift::new("y", unit_constants(), |i, _, _, y: &[f64]| y[i]);
        let r = probe(&f, &NoMessage);
        assert!(r.lipschitz <= 1.0 + 1e-12);
        assert!(!r.violations.contains(&Condition::Lipschitz));
    }

    #[test]
    fn quadratic_feedback_is_flagged() {
        let f = FnDrift::new("y^2", unit_constants(), |i, _, _, y: &[f64]| y[i] * y[i]);
        let r = probe(&f, &NoMessage);
        assert!(r.violations.contains(&Condition::Lipschitz));
        assert!(r.lipschitz > 1.0);
        // the hand pair psi = 10, phi = 9 already gives 361
        let g = grid();
        let a = [10.0];
        let b = [9.0];
        let ratio = (f.eval(0, &g, &[0.0], &a) - f.eval(0, &g, &[0.0], &b)).powi(2) / 1.0;
        assert_eq!(ratio, 361.0);
    }

    #[test]
    fn linear_preset_constants_hold() {
        let r = probe(&LinearFeedback { gain: 0.5 }, &ConstantGaussian { sigma: 1.0 });
        assert!(!r.is_violated(), "{r:?}");
    }

    #[test]
    fn truncated_preset_respects_peak_power() {
        let t = truncate_drift(Arc::new(LinearFeedback { gain: 0.5 }), 1.0).unwrap();
        let r = probe(&t, &ConstantGaussian { sigma: 1.0 });
        assert!(r.peak_power <= 1.0);
        assert!(!r.violations.contains(&Condition::PeakPower));
    }

    #[test]
    fn non_finite_output_names_the_knot() {
        let f = FnDrift::new("1/0", unit_constants(), |_, _, _, _| f64::INFINITY);
        let mut rng = RngStream::new(3, 0).rng();
        let err = probe_conditions(
            &f,
            &UnitDiffusion,
            &NoMessage,
            &grid(),
            5,
            ProbeOptions::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Evaluation { what: "drift", .. }), "{err}");
        assert!(err.to_string().contains("knot"));
    }

    #[test]
    fn needs_a_trial() {
        let mut rng = RngStream::new(3, 0).rng();
        assert!(probe_conditions(
            &ZeroDrift,
            &UnitDiffusion,
            &NoMessage,
            &grid(),
            0,
            ProbeOptions::default(),
            &mut rng
        )
        .is_err());
    }
}
