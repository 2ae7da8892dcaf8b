//! Explicit constants and convergence curves for the Picard iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to [`compute_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Lipschitz constant `K`.
    pub lipschitz: f64,
    /// Growth constant `L`.
    pub growth: f64,
    pub horizon: f64,
    /// `E‖ξ‖²_T`.
    pub xi_moment: f64,
    /// Peak power `M`, if declared.
    pub peak_power: Option<f64>,
    /// Moment exponent `p ≥ 1` in the mutual-information rate.
    pub p: f64,
    /// Front constant of the mutual-information rate shape.
    pub mi_multiplier: f64,
}

impl BoundInputs {
    pub fn new(lipschitz: f64, growth: f64, horizon: f64, xi_moment: f64) -> Self {
        Self {
            lipschitz,
            growth,
            horizon,
            xi_moment,
            peak_power: None,
            p: 2.0,
            mi_multiplier: 1.0,
        }
    }

    pub fn with_peak_power(mut self, m: f64) -> Self {
        self.peak_power = Some(m);
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }
}

/// Every constant of the iteration bounds plus the per-`n` curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub inputs: BoundInputs,
    pub k1: f64,
    pub k2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `2T(M + 4)`, available when `M` is declared.
    pub c1_tilde: Option<f64>,
    /// `e^{p(p+1)M/2}`, available when `M` is declared.
    pub moment_cap: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

/// Computes `k₁, k₂, c₁, c₂, c₃` and, under a peak-power constraint, `c̃₁`
/// and the density moment cap.
pub fn compute_bounds(inputs: BoundInputs) -> Result<BoundSet> {
    let BoundInputs {
        lipschitz: k,
        growth: l,
        horizon: t,
        xi_moment,
        peak_power,
        p,
        mi_multiplier,
    } = inputs;
    positive("K", k)?;
    positive("L", l)?;
    positive("T", t)?;
    if !(xi_moment.is_finite() && xi_moment >= 0.0) {
        return Err(Error::Domain(format!("E|xi|^2 must be nonnegative, got {xi_moment}")));
    }
    positive("multiplier", mi_multiplier)?;
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    if let Some(m) = peak_power {
        positive("M", m)?;
    }
    let k1 = 2.0 * l * t * (t + 4.0) * (1.0 + xi_moment);
    let k2 = 2.0 * l * (t + 4.0);
    let c1 = 2.0 * t * l * (t + 4.0) * (1.0 + xi_moment);
    let c2 = 2.0 * k * (t + 4.0);
    Ok(BoundSet {
        inputs,
        k1,
        k2,
        c1,
        c2,
        c3: k1 * (k2 * t).exp(),
        c1_tilde: peak_power.map(|m| 2.0 * t * (m + 4.0)),
        moment_cap: peak_power.map(|m| (p * (p + 1.0) * m / 2.0).exp()),
    })
}

/// `ln(a^n / n!)`.
fn ln_power_over_factorial(a: f64, n: usize) -> f64 {
    let n_f = n as f64;
    n_f * a.ln() - ln_factorial(n)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

impl BoundSet {
    fn c2t(&self) -> f64 {
        self.c2 * self.inputs.horizon
    }

    /// `(c₂T)^k / k!`.
    pub fn ratio_term(&self, k: usize) -> f64 {
        ln_power_over_factorial(self.c2t(), k).exp()
    }

    /// `c₁(c₂T)ⁿ/n!`: bound on `E‖Y⁽ⁿ⁺¹⁾ − Y⁽ⁿ⁾‖²_T`.
    pub fn picard_l2(&self, n: usize) -> f64 {
        (self.c1.ln() + ln_power_over_factorial(self.c2t(), n)).exp()
    }

    /// `(c₁KT)^{1/2}·√r + c₁KT·r/2` with `r = (c₂T)^{n−1}/(n−1)!`; bound on
    /// `D(μ_{Y⁽ⁿ⁾}‖μ_Y)` for `n ≥ 1`.
    pub fn kl_rate(&self, n: usize) -> f64 {
        let a = self.c1 * self.inputs.lipschitz * self.inputs.horizon;
        let r = self.ratio_term(n.saturating_sub(1));
        (a * r).sqrt() + a * r / 2.0
    }

    /// `mult·[(rₙ₋₁ + rₙ)^{1/(2p)} + √rₙ₋₁ + rₙ₋₁]` with `r_k = (c₂T)^k/k!`:
    /// the shape of the mutual-information rate.
    pub fn mi_rate(&self, n: usize) -> f64 {
        let prev = self.ratio_term(n.saturating_sub(1));
        let cur = self.ratio_term(n);
        let p = self.inputs.p;
        self.inputs.mi_multiplier * ((prev + cur).powf(1.0 / (2.0 * p)) + prev.sqrt() + prev)
    }

    /// First `n ≥ 1` with `kl_rate(n) < threshold`.
    pub fn first_n_below(&self, threshold: f64) -> Result<usize> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::Domain(format!("threshold must be positive, got {threshold}")));
        }
        let mut n = 1;
        while self.kl_rate(n) >= threshold {
            n += 1;
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn unit() -> BoundSet {
        compute_bounds(BoundInputs::new(1.0, 1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn unit_constants() {
        let b = unit();
        assert_eq!(b.k1, 20.0);
        assert_eq!(b.k2, 10.0);
        assert_eq!(b.c1, 20.0);
        assert_eq!(b.c2, 10.0);
        assert_eq!(b.c3, 20.0 * 10f64.exp());
        assert_eq!(b.c1_tilde, None);
        assert_eq!(b.moment_cap, None);
    }

    #[test]
    fn peak_power_constants() {
        let b = compute_bounds(BoundInputs::new(1.0, 1.0, 1.0, 1.0).with_peak_power(1.0).with_p(2.0)).unwrap();
        assert_eq!(b.c1_tilde, Some(10.0));
        assert_eq!(b.moment_cap, Some(3f64.exp()));
    }

    #[test]
    fn kl_rate_at_one() {
        let b = unit();
        assert!((b.kl_rate(1) - (20f64.sqrt() + 10.0)).abs() < 1e-12);
    }

    #[test]
    fn picard_curve_values() {
        let b = unit();
        assert!((b.picard_l2(0) - 20.0).abs() < 1e-12);
        assert!((b.picard_l2(3) - 20.0 * 1000.0 / 6.0).abs() < 1e-9);
        assert!(b.picard_l2(400).is_finite());
        assert!(b.picard_l2(400) < 1e-100);
    }

    #[test]
    fn first_n_below_is_finite() {
        let b = unit();
        let n = b.first_n_below(1e-2).unwrap();
        assert!(b.kl_rate(n) < 1e-2);
        assert!(b.kl_rate(n - 1) >= 1e-2);
        let big = compute_bounds(BoundInputs::new(50.0, 80.0, 3.0, 10.0)).unwrap();
        let n = big.first_n_below(1e-2).unwrap();
        assert!(big.kl_rate(n) < 1e-2);
    }

    #[test]
    fn nonpositive_inputs_are_rejected() {
        for bad in [
            BoundInputs::new(0.0, 1.0, 1.0, 1.0),
            BoundInputs::new(1.0, -1.0, 1.0, 1.0),
            BoundInputs::new(1.0, 1.0, 0.0, 1.0),
            BoundInputs::new(1.0, 1.0, 1.0, f64::NAN),
            BoundInputs::new(1.0, 1.0, 1.0, -0.1),
            BoundInputs::new(1.0, 1.0, 1.0, 1.0).with_p(0.5),
            BoundInputs::new(1.0, 1.0, 1.0, 1.0).with_peak_power(0.0),
        ] {
            assert!(matches!(compute_bounds(bad), Err(Error::Domain(_))), "{bad:?}");
        }
    }

    #[test]
    fn mi_rate_vanishes() {
        let b = unit();
        assert!(b.mi_rate(200) < 1e-6);
        assert!(b.mi_rate(1) > b.mi_rate(100));
    }

    proptest! {
        #[test]
        fn factorial_ratio(k in 0.1f64..5.0, l in 0.1f64..5.0, t in 0.1f64..3.0, m in 0.1f64..5.0, n in 0usize..40) {
            let b = compute_bounds(BoundInputs::new(k, l, t, m)).unwrap();
            let ratio = b.picard_l2(n + 1) / b.picard_l2(n);
            let expected = b.c2 * t / (n as f64 + 1.0);
            prop_assert!((ratio / expected - 1.0).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_inputs(
            k in 0.1f64..5.0, l in 0.1f64..5.0, t in 0.1f64..3.0, m in 0.1f64..5.0,
            which in 0usize..4, bump in 1.0f64..2.0, n in 1usize..30,
        ) {
            let base = BoundInputs::new(k, l, t, m);
            let mut up = base;
            match which {
                0 => up.lipschitz *= bump,
                1 => up.growth *= bump,
                2 => up.horizon *= bump,
                _ => up.xi_moment *= bump,
            }
            let a = compute_bounds(base).unwrap();
            let b = compute_bounds(up).unwrap();
            let tol = 1.0 + 1e-12;
            for (x, y) in [(a.k1, b.k1), (a.k2, b.k2), (a.c1, b.c1), (a.c2, b.c2), (a.c3, b.c3)] {
                prop_assert!(x <= y * tol);
            }
            prop_assert!(a.picard_l2(n) <= b.picard_l2(n) * tol);
            prop_assert!(a.kl_rate(n) <= b.kl_rate(n) * tol);
            prop_assert!(a.mi_rate(n) <= b.mi_rate(n) * tol);
        }
    }
}
