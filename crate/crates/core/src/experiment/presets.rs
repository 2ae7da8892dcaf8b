use std::collections::BTreeMap;
use std::sync::Arc;

use super::config::{ExperimentConfig, MessageSpec};
use crate::error::{Error, Result};
use crate::estimators::Channel;
use crate::model::{
    truncate_drift, ConstantDrift, ConstantGaussian, ConstantUniform, Constants, DriftRef, ExprDrift, LinearFeedback,
    MessageDrift, MessageLawRef, NoMessage, TimeGrid, WithConstants, ZeroDrift,
};

/// Built-in channel names.
pub const PRESETS: [&str; 6] = [
    "zero",
    "constant-drift",
    "message-only",
    "linear-feedback",
    "bounded-truncated",
    "ou-drift",
];

struct Params<'a> {
    preset: &'a str,
    given: &'a BTreeMap<String, f64>,
}

impl Params<'_> {
    fn allow(&self, names: &[&str]) -> Result<()> {
        for key in self.given.keys() {
            if !names.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "preset `{}` has no parameter `{key}` (expected one of: {})",
                    self.preset,
                    names.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn get(&self, name: &str, default: f64) -> Result<f64> {
        let v = self.given.get(name).copied().unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("params.{name} must be finite")))
        }
    }

    fn positive(&self, name: &str, default: f64) -> Result<f64> {
        let v = self.get(name, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Config(format!("params.{name} must be positive, got {v}")))
        }
    }
}

fn gaussian(sigma: f64) -> MessageLawRef {
    Arc::new(ConstantGaussian { sigma })
}

/// Drift and message law of a named preset.
///
/// | preset | drift | message | declared `K`, `L`, `M` |
/// |---|---|---|---|
/// | `zero` | `0` | none | 1, 1 |
/// | `constant-drift` (`theta`) | `θ` | none | 1, `1 + θ²` |
/// | `message-only` (`sigma`) | `x(t)` | `N(0, σ²)` constant | 1, 1 |
/// | `linear-feedback` (`a`, `sigma`) | `a·y(t) + x(t)` | `N(0, σ²)` constant | `max(8a², 1)`, `8·max(1, a²)` |
/// | `bounded-truncated` (`m`, `a`, `sigma`) | linear feedback truncated at energy `m` | `N(0, σ²)` constant | as linear, `M = m` |
/// | `ou-drift` (`theta`, `sigma`) | `−θ·y(t) + x(t)` | `N(0, σ²)` constant | as linear with `a = −θ` |
pub fn build_preset(name: &str, params: &BTreeMap<String, f64>) -> Result<(DriftRef, MessageLawRef)> {
    let p = Params {
        preset: name,
        given: params,
    };
    Ok(match name {
        "zero" => {
            p.allow(&[])?;
            (Arc::new(ZeroDrift), Arc::new(NoMessage))
        }
        "constant-drift" => {
            p.allow(&["theta"])?;
            (
                Arc::new(ConstantDrift {
                    theta: p.get("theta", 1.0)?,
                }),
                Arc::new(NoMessage),
            )
        }
        "message-only" => {
            p.allow(&["sigma"])?;
            (Arc::new(MessageDrift), gaussian(p.positive("sigma", 1.0)?))
        }
        "linear-feedback" => {
            p.allow(&["a", "sigma"])?;
            (
                Arc::new(LinearFeedback { gain: p.get("a", 0.5)? }),
                gaussian(p.positive("sigma", 1.0)?),
            )
        }
        "bounded-truncated" => {
            p.allow(&["m", "a", "sigma"])?;
            let inner = Arc::new(LinearFeedback { gain: p.get("a", 0.5)? });
            (
                Arc::new(truncate_drift(inner, p.positive("m", 1.0)?)?),
                gaussian(p.positive("sigma", 1.0)?),
            )
        }
        "ou-drift" => {
            p.allow(&["theta", "sigma"])?;
            (
                Arc::new(LinearFeedback {
                    gain: -p.get("theta", 1.0)?,
                }),
                gaussian(p.positive("sigma", 1.0)?),
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    })
}

fn message_law(spec: &MessageSpec) -> Result<MessageLawRef> {
    let need = |v: Option<f64>, name: &str| -> Result<f64> {
        match v {
            Some(v) if v.is_finite() && v > 0.0 => Ok(v),
            Some(v) => Err(Error::Config(format!("message.{name} must be positive, got {v}"))),
            None => Err(Error::Config(format!("missing field `message.{name}`"))),
        }
    };
    Ok(match spec.kind.as_str() {
        "none" => Arc::new(NoMessage),
        "gaussian" => gaussian(need(spec.sigma, "sigma")?),
        "uniform" => Arc::new(ConstantUniform {
            half_width: need(spec.half_width, "half_width")?,
        }),
        other => {
            return Err(Error::Config(format!(
                "unknown message kind `{other}` (expected none, gaussian or uniform)"
            )))
        }
    })
}

/// Resolves the channel described by a config.
pub fn build_channel(cfg: &ExperimentConfig) -> Result<Channel> {
    let grid = TimeGrid::new(cfg.grid.horizon, cfg.grid.steps)?;
    let declared = cfg
        .constants
        .map(|c| Constants::new(c.lipschitz, c.growth, c.peak_power))
        .transpose()?;
    let (drift, law): (DriftRef, MessageLawRef) = match (&cfg.preset, &cfg.drift) {
        (Some(name), None) => {
            let (f, law) = build_preset(name, &cfg.params)?;
            match declared {
                Some(c) => {
                    let c = Constants {
                        peak_power: c.peak_power.or(f.constants().peak_power),
                        ..c
                    };
                    (Arc::new(WithConstants::new(f, c)), law)
                }
                None => (f, law),
            }
        }
        (None, Some(spec)) => {
            let c = declared.ok_or_else(|| Error::Config("missing field `constants`".into()))?;
            if !cfg.params.is_empty() {
                return Err(Error::Config("`params` only applies to presets".into()));
            }
            (Arc::new(ExprDrift::parse(&spec.expr, c)?), Arc::new(NoMessage))
        }
        _ => {
            cfg.validate()?;
            unreachable!("validate rejects configs without exactly one drift source")
        }
    };
    let law = match &cfg.message {
        Some(spec) => message_law(spec)?,
        None => law,
    };
    Ok(Channel::new(drift, law, grid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn every_preset_builds_with_defaults() {
        for name in PRESETS {
            let (f, law) = build_preset(name, &BTreeMap::new()).unwrap();
            f.constants().validate().unwrap();
            assert!(law.second_moment(&TimeGrid::new(1.0, 4).unwrap()) >= 0.0);
        }
    }

    #[test]
    fn declared_constants() {
        let (f, _) = build_preset("linear-feedback", &BTreeMap::new()).unwrap();
        let c = f.constants();
        assert_eq!((c.lipschitz, c.growth, c.peak_power), (2.0, 8.0, None));
        let (f, _) = build_preset("bounded-truncated", &params(&[("m", 1.0)])).unwrap();
        assert_eq!(f.constants().peak_power, Some(1.0));
        let (f, _) = build_preset("constant-drift", &params(&[("theta", 2.0)])).unwrap();
        assert_eq!(f.constants().growth, 5.0);
    }

    #[test]
    fn bad_names_and_params() {
        assert!(matches!(build_preset("nope", &BTreeMap::new()), Err(Error::Config(_))));
        let e = build_preset("zero", &params(&[("theta", 1.0)])).unwrap_err();
        assert!(e.to_string().contains("theta"));
        assert!(build_preset("message-only", &params(&[("sigma", 0.0)])).is_err());
    }

    #[test]
    fn channel_from_inline_drift() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 3\n[drift]\nexpr = \"0.5*y(t) + x(t)\"\n[constants]\nK = 1.0\nL = 2.0\n[message]\nkind = \"uniform\"\nhalf_width = 2.0\n[grid]\nhorizon = 2.0\nsteps = 8\n",
        )
        .unwrap();
        let ch = build_channel(&cfg).unwrap();
        assert_eq!(ch.grid.steps(), 8);
        assert_eq!(ch.drift.constants().growth, 2.0);
        assert!((ch.law.second_moment(&ch.grid) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constants_override_keeps_truncation_level() {
        let mut cfg = ExperimentConfig::preset("bounded-truncated", 8);
        cfg.constants = Some(super::super::config::ConstantsSpec {
            lipschitz: 3.0,
            growth: 9.0,
            peak_power: None,
        });
        let c = build_channel(&cfg).unwrap().drift.constants();
        assert_eq!((c.lipschitz, c.growth, c.peak_power), (3.0, 9.0, Some(1.0)));
    }

    #[test]
    fn nonpositive_declared_constant_is_a_domain_error() {
        let mut cfg = ExperimentConfig::preset("zero", 8);
        cfg.constants = Some(super::super::config::ConstantsSpec {
            lipschitz: 0.0,
            growth: 1.0,
            peak_power: None,
        });
        assert!(matches!(build_channel(&cfg), Err(Error::Domain(_))));
    }
}
