use serde::{Deserialize, Serialize};

use super::risk::Engine;
use super::{FamilyDescriptor, FamilyMembers};
use crate::error::{invalid, Error, Result};
use crate::mechanisms::EstimatorKind;
use crate::packings::Loss;

/// Upper end of the doubling search for the required sample size.
const MAX_N: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingProblem {
    KaryTv,
    KaryL2,
    AssouadProduct,
}

/// Parameter varied across `values`. `K` is the dimension d for the product problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingAxis {
    K,
    Epsilon,
    Alpha,
}

impl ScalingAxis {
    /// Exponent of the required n in the axis parameter: linear in k, inverse
    /// in epsilon (privacy regime), inverse square in alpha (statistical regime).
    pub fn default_exponent(self) -> f64 {
        match self {
            ScalingAxis::K => 1.0,
            ScalingAxis::Epsilon => -1.0,
            ScalingAxis::Alpha => -2.0,
        }
    }
}

fn default_trials() -> usize {
    200
}

fn default_members() -> usize {
    8
}

fn default_band() -> f64 {
    0.25
}

/// Sweep of one parameter; the others stay at `k`, `alpha`, `epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub problem: ScalingProblem,
    pub axis: ScalingAxis,
    pub values: Vec<f64>,
    #[serde(default)]
    pub k: usize,
    /// Target risk.
    pub alpha: f64,
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_members")]
    pub max_members: usize,
    /// Separation parameter of the family the risk is maximised over; defaults
    /// to 0.02 for k-ary problems and 0.005 for products.
    #[serde(default)]
    pub family_alpha: Option<f64>,
    /// Relative half-width of the accepted band around the expected ratio.
    #[serde(default = "default_band")]
    pub band: f64,
    #[serde(default)]
    pub expected_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioVerdict {
    pub from: f64,
    pub to: f64,
    pub ratio: f64,
    pub expected: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingVerdict {
    pub problem: ScalingProblem,
    pub axis: ScalingAxis,
    pub values: Vec<f64>,
    pub required_n: Vec<usize>,
    pub ratios: Vec<RatioVerdict>,
    pub pass: bool,
}

struct Point {
    k: usize,
    alpha: f64,
    epsilon: f64,
}

impl ScalingConfig {
    fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return invalid("scaling needs at least two values");
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return invalid("scaling values must be positive and finite");
        }
        if self.axis == ScalingAxis::K && self.values.iter().any(|v| v.fract() != 0.0) {
            return invalid("k values must be integers");
        }
        if self.axis != ScalingAxis::K && self.k == 0 {
            return invalid("k must be set when it is not the varied axis");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid("target alpha must be in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return invalid("epsilon must be positive");
        }
        if self.trials < 50 {
            return invalid("at least 50 trials required");
        }
        if !(self.band > 0.0 && self.band < 1.0) {
            return invalid("band must be in (0, 1)");
        }
        Ok(())
    }

    fn point(&self, v: f64) -> Point {
        let mut p = Point {
            k: self.k,
            alpha: self.alpha,
            epsilon: self.epsilon,
        };
        match self.axis {
            ScalingAxis::K => p.k = v as usize,
            ScalingAxis::Epsilon => p.epsilon = v,
            ScalingAxis::Alpha => p.alpha = v,
        }
        p
    }

    fn members(&self, k: usize) -> Result<FamilyMembers> {
        let max_members = Some(self.max_members);
        let d = match self.problem {
            ScalingProblem::KaryTv | ScalingProblem::KaryL2 => FamilyDescriptor::KaryTv {
                k,
                alpha: self.family_alpha.unwrap_or(0.02),
                max_members,
            },
            ScalingProblem::AssouadProduct => FamilyDescriptor::AssouadProduct {
                d: k,
                alpha: self.family_alpha.unwrap_or(0.005),
                max_members,
            },
        };
        Ok(d.build()?.members)
    }
}

/// Smallest n on the search path whose max-over-members risk is at most
/// `target`; found by doubling to a bracket then integer bisection down to 1%.
fn required_n(engine: &Engine, target: f64) -> Result<usize> {
    let risk = |n: usize| -> Result<f64> {
        Ok(engine
            .member_risks(n)?
            .iter()
            .map(|r| r.0)
            .fold(f64::NEG_INFINITY, f64::max))
    };
    let mut hi = 16;
    let mut last = risk(hi)?;
    if last <= target {
        while hi > 1 && risk(hi / 2)? <= target {
            hi /= 2;
        }
        if hi == 1 {
            return Err(Error::Bracket(format!("risk is already at most {target} at n = 1")));
        }
    } else {
        while last > target {
            if hi >= MAX_N {
                return Err(Error::Bracket(format!(
                    "risk {last:.4} at n = {hi} still above target {target}"
                )));
            }
            hi *= 2;
            last = risk(hi)?;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > (hi / 100).max(1) {
        let mid = lo + (hi - lo) / 2;
        if risk(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Finds the sample size the Laplace estimator needs to reach risk `alpha`
/// at each value and checks consecutive ratios against `(v'/v)^exponent`.
pub fn scaling_check(config: &ScalingConfig) -> Result<ScalingVerdict> {
    config.validate()?;
    let loss = match config.problem {
        ScalingProblem::KaryL2 => Loss::L2,
        _ => Loss::Tv,
    };
    let mut required = Vec::with_capacity(config.values.len());
    for &v in &config.values {
        let p = config.point(v);
        let members = config.members(p.k)?;
        let engine = Engine {
            members: &members,
            kind: EstimatorKind::Laplace,
            epsilon: Some(p.epsilon),
            loss,
            trials: config.trials,
            seed: config.seed,
            common_streams: true,
        };
        required.push(required_n(&engine, p.alpha)?);
    }
    let exponent = config.expected_exponent.unwrap_or(config.axis.default_exponent());
    let ratios: Vec<RatioVerdict> = config
        .values
        .windows(2)
        .zip(required.windows(2))
        .map(|(v, n)| {
            let expected = (v[1] / v[0]).powf(exponent);
            let ratio = n[1] as f64 / n[0] as f64;
            let (lower, upper) = (expected * (1.0 - config.band), expected * (1.0 + config.band));
            RatioVerdict {
                from: v[0],
                to: v[1],
                ratio,
                expected,
                lower,
                upper,
                pass: ratio >= lower && ratio <= upper,
            }
        })
        .collect();
    Ok(ScalingVerdict {
        problem: config.problem,
        axis: config.axis,
        values: config.values.clone(),
        required_n: required,
        pass: ratios.iter().all(|r| r.pass),
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(axis: ScalingAxis, values: Vec<f64>) -> ScalingConfig {
        ScalingConfig {
            problem: ScalingProblem::KaryTv,
            axis,
            values,
            k: 10,
            alpha: 0.2,
            epsilon: 0.2,
            trials: 50,
            seed: 3,
            max_members: 2,
            family_alpha: None,
            band: 0.25,
            expected_exponent: None,
        }
    }

    #[test]
    fn rejects_bad_sweeps() {
        assert!(scaling_check(&base(ScalingAxis::K, vec![10.0])).is_err());
        assert!(scaling_check(&base(ScalingAxis::K, vec![10.0, 20.5])).is_err());
    }

    #[test]
    fn unreachable_target_fails_to_bracket() {
        let mut c = base(ScalingAxis::K, vec![10.0, 20.0]);
        c.alpha = 1e-9;
        c.epsilon = 1e-9;
        assert!(matches!(scaling_check(&c), Err(Error::Bracket(_))));
    }

    #[test]
    fn required_n_grows_with_k() {
        let v = scaling_check(&base(ScalingAxis::K, vec![10.0, 20.0])).unwrap();
        assert!(v.required_n[1] > v.required_n[0]);
    }
}
