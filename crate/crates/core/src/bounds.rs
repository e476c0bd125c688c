//! Private minimax lower bounds (Le Cam, Fano, Assouad), the sample-complexity
//! thresholds they imply, and the published complexity expressions.
//!
//! Logarithms are natural throughout. Terms that would go negative clamp at 0.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::PrivacyBudget;
use crate::error::{invalid, Error, Result};

/// A bound value together with the terms it is the maximum of.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    pub terms: BTreeMap<String, f64>,
    pub binding: String,
}

impl BoundReport {
    fn from_terms(terms: &[(&str, f64)]) -> Self {
        let (name, value) = terms
            .iter()
            .copied()
            .fold(("", f64::NEG_INFINITY), |best, t| if t.1 > best.1 { t } else { best });
        Self {
            value,
            terms: terms.iter().map(|&(n, v)| (n.to_string(), v)).collect(),
            binding: name.to_string(),
        }
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) {
        return invalid(format!("{name} must be >= 0, got {v}"));
    }
    Ok(())
}

/// `0.9 e^{-10 eps D} - 10 D delta`, clamped at 0.
fn coupling_term(d: f64, budget: PrivacyBudget) -> f64 {
    let decay = if d == 0.0 {
        1.0
    } else {
        (-10.0 * budget.epsilon * d).exp()
    };
    (0.9 * decay - 10.0 * d * budget.delta).max(0.0)
}

/// Two-point bound: `1/2 max{1 - tv, 0.9 e^{-10 eps D} - 10 D delta}`.
pub fn le_cam_bound(tv: f64, d: f64, budget: PrivacyBudget) -> Result<BoundReport> {
    if !(0.0..=1.0).contains(&tv) {
        return invalid(format!("tv must lie in [0, 1], got {tv}"));
    }
    nonneg("D", d)?;
    Ok(BoundReport::from_terms(&[
        ("statistical", 0.5 * (1.0 - tv)),
        ("privacy", 0.5 * coupling_term(d, budget)),
    ]))
}

/// Multi-hypothesis bound for pure DP:
/// `max{alpha/2 (1 - (beta + ln 2)/ln M), 0.4 alpha min(1, M e^{-10 eps D})}`.
///
/// `m` is real so that families too large for an integer type can be passed.
pub fn fano_bound(alpha: f64, beta: f64, d: f64, m: f64, epsilon: f64) -> Result<BoundReport> {
    nonneg("alpha", alpha)?;
    nonneg("beta", beta)?;
    nonneg("D", d)?;
    nonneg("epsilon", epsilon)?;
    if !(m >= 2.0) {
        return invalid(format!("M must be at least 2, got {m}"));
    }
    let log_m = m.ln();
    let statistical = (0.5 * alpha * (1.0 - (beta + std::f64::consts::LN_2) / log_m)).max(0.0);
    let exponent = if d == 0.0 { 0.0 } else { 10.0 * epsilon * d };
    let privacy = 0.4 * alpha * (log_m - exponent).min(0.0).exp();
    Ok(BoundReport::from_terms(&[
        ("statistical", statistical),
        ("privacy", privacy),
    ]))
}

/// Hypercube bound: `(k tau / 2) max(0, 0.9 e^{-10 eps D} - 10 D delta)`.
pub fn assouad_bound(k_index: usize, tau: f64, d: f64, budget: PrivacyBudget) -> Result<BoundReport> {
    if k_index == 0 {
        return invalid("hypercube dimension must be at least 1");
    }
    nonneg("tau", tau)?;
    nonneg("D", d)?;
    Ok(BoundReport::from_terms(&[(
        "privacy",
        k_index as f64 * tau / 2.0 * coupling_term(d, budget),
    )]))
}

/// `(3 tau / 2)(1 - (n beta + ln 2)/ln M)`: the classical risk term at n samples.
pub fn classical_risk_term(n: u64, beta: f64, log_m: f64, tau: f64) -> f64 {
    1.5 * tau * (1.0 - (n as f64 * beta + std::f64::consts::LN_2) / log_m)
}

/// `1.2 tau min{1, M e^{-10 eps n gamma}}`: the privacy risk term at n samples.
pub fn private_risk_term(n: u64, gamma: f64, log_m: f64, epsilon: f64, tau: f64) -> f64 {
    let exponent = if n == 0 { 0.0 } else { 10.0 * epsilon * n as f64 * gamma };
    1.2 * tau * (log_m - exponent).min(0.0).exp()
}

/// Largest n with `pred(n)`, starting from a closed-form estimate and
/// correcting for rounding so that `pred(n)` holds and `pred(n + 1)` fails.
/// Returns 0 when `pred(0)` fails too.
fn integer_threshold(estimate: f64, pred: impl Fn(u64) -> bool) -> u64 {
    let mut n = if estimate.is_finite() && estimate > 0.0 {
        (estimate.ceil() - 1.0).min(u64::MAX as f64 / 2.0) as u64
    } else {
        0
    };
    while n > 0 && !pred(n) {
        n -= 1;
    }
    while pred(n + 1) {
        n += 1;
    }
    n
}

/// Sample thresholds below which the packing forces risk above `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleThresholds {
    pub n_classical: u64,
    pub n_private: u64,
}

/// Integer thresholds for a packing of `ln M = log_m` members satisfying the
/// separation `alpha_sep >= 3 tau`, KL cap `beta` and TV cap `gamma`.
///
/// `n_classical` is the largest n with `classical_risk_term > tau` and
/// `n_private` the largest n with `private_risk_term > tau`.
pub fn fano_sample_complexity(
    alpha_sep: f64,
    beta: f64,
    gamma: f64,
    log_m: f64,
    epsilon: f64,
    tau: f64,
) -> Result<SampleThresholds> {
    if !(tau > 0.0) {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    if !(alpha_sep >= 3.0 * tau * (1.0 - 1e-12)) {
        return invalid(format!("separation {alpha_sep} is below 3 tau = {}", 3.0 * tau));
    }
    if !(beta > 0.0 && gamma > 0.0) {
        return invalid("beta and gamma must be positive");
    }
    nonneg("epsilon", epsilon)?;
    if !(log_m >= std::f64::consts::LN_2) {
        return invalid(format!("ln M must be at least ln 2, got {log_m}"));
    }
    let n_classical = if log_m <= std::f64::consts::LN_2 {
        0
    } else {
        let est = (log_m / 3.0 - std::f64::consts::LN_2) / beta;
        let t = integer_threshold(est, |n| classical_risk_term(n, beta, log_m, tau) > tau);
        if classical_risk_term(t, beta, log_m, tau) > tau {
            t
        } else {
            0
        }
    };
    let n_private = if epsilon.is_infinite() {
        0
    } else if epsilon == 0.0 {
        // The privacy term never decays.
        u64::MAX
    } else {
        let est = (log_m - (5.0f64 / 6.0).ln()) / (10.0 * epsilon * gamma);
        integer_threshold(est, |n| private_risk_term(n, gamma, log_m, epsilon, tau) > tau)
    };
    Ok(SampleThresholds { n_classical, n_private })
}

/// Packing-argument privacy level `ln M / d`, without the hidden constant.
pub fn packing_bound(m: f64, d: f64) -> Result<f64> {
    if !(m >= 2.0) {
        return invalid(format!("M must be at least 2, got {m}"));
    }
    if !(d > 0.0) {
        return invalid(format!("d must be positive, got {d}"));
    }
    Ok(m.ln() / d)
}

/// Group privacy at distance t: multiplier `e^{t eps}`, additive `delta t e^{eps (t-1)}`.
pub fn group_privacy_factor(budget: PrivacyBudget, t: u32) -> (f64, f64) {
    if t == 0 {
        return (1.0, 0.0);
    }
    let t = t as f64;
    (
        (t * budget.epsilon).exp(),
        budget.delta * t * (budget.epsilon * (t - 1.0)).exp(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    KaryTv,
    KaryL2,
    Product,
    Gmix,
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "kary_tv" => Ok(Problem::KaryTv),
            "kary_l2" => Ok(Problem::KaryL2),
            "product" => Ok(Problem::Product),
            "gmix" => Ok(Problem::Gmix),
            other => invalid(format!("unknown problem {other:?}")),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::KaryTv => "kary_tv",
            Problem::KaryL2 => "kary_l2",
            Problem::Product => "product",
            Problem::Gmix => "gmix",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub radius: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// delta = 0
    Pure,
    /// (eps, delta)
    Approx,
}

/// One evaluated complexity expression, with constant 1 in place of the hidden one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub problem: Problem,
    pub setting: Setting,
    pub side: Side,
    /// "Theta", "O" or "Omega".
    pub order: String,
    pub expression: String,
    pub value: f64,
    /// Where the expression comes from: "this-work" or "prior-work".
    pub source: String,
    pub unscaled: bool,
}

fn row(problem: Problem, setting: Setting, side: Side, order: &str, expr: &str, value: f64, source: &str) -> TableRow {
    TableRow {
        problem,
        setting,
        side,
        order: order.into(),
        expression: expr.into(),
        value,
        source: source.into(),
        unscaled: true,
    }
}

fn need<T: Copy>(v: Option<T>, name: &str, problem: Problem) -> Result<T> {
    v.ok_or_else(|| Error::InvalidInput(format!("problem {problem} needs parameter {name}")))
}

/// Evaluates the published upper and lower sample-complexity expressions.
///
/// Rows for pure DP are always emitted; (eps, delta) rows use `budget.delta`
/// and exist for the k-ary problems and for binary products.
pub fn sample_complexity_table(problem: Problem, params: TableParams, budget: PrivacyBudget) -> Result<Vec<TableRow>> {
    use Setting::*;
    use Side::*;
    let a = params.alpha;
    let e = budget.epsilon;
    let ed = budget.epsilon + budget.delta;
    if !(a > 0.0) || !(e > 0.0) {
        return invalid("alpha and epsilon must be positive");
    }
    let mut rows = Vec::new();
    match problem {
        Problem::KaryTv => {
            let k = need(params.k, "k", problem)? as f64;
            let v = k / (a * a) + k / (a * e);
            rows.push(row(problem, Pure, Upper, "Theta", "k/a^2 + k/(a eps)", v, "prior-work"));
            rows.push(row(problem, Pure, Lower, "Theta", "k/a^2 + k/(a eps)", v, "this-work"));
            rows.push(row(problem, Approx, Upper, "O", "k/a^2 + k/(a eps)", v, "prior-work"));
            rows.push(row(
                problem,
                Approx,
                Lower,
                "Omega",
                "k/a^2 + k/(a (eps+delta))",
                k / (a * a) + k / (a * ed),
                "this-work",
            ));
        }
        Problem::KaryL2 => {
            let k = need(params.k, "k", problem)? as f64;
            let base = 1.0 / (a * a);
            let sqrt_branch = k.sqrt() / (a * e);
            // For a < 1/sqrt(k) the logarithmic branch is negative and only
            // the sqrt(k) branch is meaningful.
            let large_alpha = a >= 1.0 / k.sqrt();
            let upper_priv = sqrt_branch.min(k.ln() / (a * a * e));
            let lower_priv = if large_alpha {
                sqrt_branch.min((k * a * a).ln() / (a * a * e))
            } else {
                sqrt_branch
            };
            let (up_expr, low_expr) = if large_alpha {
                (
                    "1/a^2 + min(sqrt(k)/(a eps), ln k/(a^2 eps))",
                    "1/a^2 + min(sqrt(k)/(a eps), ln(k a^2)/(a^2 eps))",
                )
            } else {
                (
                    "1/a^2 + min(sqrt(k)/(a eps), ln k/(a^2 eps))",
                    "1/a^2 + sqrt(k)/(a eps)",
                )
            };
            rows.push(row(problem, Pure, Upper, "O", up_expr, base + upper_priv, "this-work"));
            rows.push(row(
                problem,
                Pure,
                Lower,
                "Omega",
                low_expr,
                base + lower_priv,
                "this-work",
            ));
            rows.push(row(
                problem,
                Approx,
                Upper,
                "O",
                "1/a^2 + min(sqrt(k)/(a eps), ln k/(a^2 eps))",
                base + upper_priv,
                "this-work",
            ));
            rows.push(row(
                problem,
                Approx,
                Lower,
                "Omega",
                "1/a^2 + min(sqrt(k)/(a (eps+delta)), 1/(a^2 (eps+delta)))",
                base + (k.sqrt() / (a * ed)).min(1.0 / (a * a * ed)),
                "this-work",
            ));
        }
        Problem::Product => {
            let k = need(params.k, "k", problem)? as f64;
            let d = need(params.d, "d", problem)? as f64;
            let rate = 1.0 / (a * a) + 1.0 / (a * e);
            rows.push(row(
                problem,
                Pure,
                Upper,
                "O",
                "k d ln(k d/a) (1/a^2 + 1/(a eps))",
                k * d * (k * d / a).ln() * rate,
                "prior-work",
            ));
            rows.push(row(
                problem,
                Pure,
                Lower,
                "Omega",
                "k d (1/a^2 + 1/(a eps))",
                k * d * rate,
                "this-work",
            ));
            if k == 2.0 {
                rows.push(row(
                    problem,
                    Approx,
                    Upper,
                    "O",
                    "d ln(d/a) (1/a^2 + 1/(a eps))",
                    d * (d / a).ln() * rate,
                    "prior-work",
                ));
                rows.push(row(
                    problem,
                    Approx,
                    Lower,
                    "Omega",
                    "d/a^2 + d/(a (eps+delta))",
                    d / (a * a) + d / (a * ed),
                    "this-work",
                ));
            }
        }
        Problem::Gmix => {
            let k = need(params.k, "k", problem)? as f64;
            let d = need(params.d, "d", problem)? as f64;
            let r = need(params.radius, "R", problem)?;
            let rate = 1.0 / (a * a) + 1.0 / (a * e);
            rows.push(row(
                problem,
                Pure,
                Upper,
                "O",
                "k d ln(d R/a) (1/a^2 + 1/(a eps))",
                k * d * (d * r / a).ln() * rate,
                "prior-work",
            ));
            rows.push(row(
                problem,
                Pure,
                Lower,
                "Omega",
                "k d (1/a^2 + 1/(a eps))",
                k * d * rate,
                "this-work",
            ));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(eps: f64, delta: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps, delta).unwrap()
    }

    #[test]
    fn report_value_is_max_of_terms() {
        let r = le_cam_bound(0.2, 0.5, b(1.0, 0.0)).unwrap();
        let max = r.terms.values().cloned().fold(f64::MIN, f64::max);
        assert_eq!(r.value, max);
        assert_eq!(r.binding, "statistical");
    }

    #[test]
    fn invalid_bound_inputs() {
        assert!(le_cam_bound(1.5, 0.0, b(1.0, 0.0)).is_err());
        assert!(le_cam_bound(0.5, -1.0, b(1.0, 0.0)).is_err());
        assert!(fano_bound(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(assouad_bound(0, 1.0, 0.0, b(1.0, 0.0)).is_err());
        assert!(packing_bound(1.0, 1.0).is_err());
        assert!(packing_bound(2.0, 0.0).is_err());
    }

    #[test]
    fn infinite_epsilon_kills_private_threshold() {
        let t = fano_sample_complexity(0.3, 0.01, 0.1, 20.0, f64::INFINITY, 0.1).unwrap();
        assert_eq!(t.n_private, 0);
    }

    #[test]
    fn tiny_family_has_no_classical_threshold() {
        let t = fano_sample_complexity(0.3, 0.01, 0.1, std::f64::consts::LN_2, 1.0, 0.1).unwrap();
        assert_eq!(t.n_classical, 0);
    }

    #[test]
    fn separation_must_cover_three_tau() {
        assert!(fano_sample_complexity(0.2, 0.01, 0.1, 10.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn table_needs_its_parameters() {
        let p = TableParams {
            alpha: 0.1,
            ..Default::default()
        };
        assert!(sample_complexity_table(Problem::KaryTv, p, b(1.0, 0.0)).is_err());
        assert!("poisson".parse::<Problem>().is_err());
    }

    #[test]
    fn small_alpha_l2_rows_use_sqrt_branch() {
        let p = TableParams {
            k: Some(10_000),
            alpha: 0.001,
            ..Default::default()
        };
        let rows = sample_complexity_table(Problem::KaryL2, p, b(1.0, 0.0)).unwrap();
        let lower = &rows[1];
        assert_eq!(lower.side, Side::Lower);
        assert!((lower.value - (1e6 + 100.0 / 0.001)).abs() < 1e-6);
    }
}
