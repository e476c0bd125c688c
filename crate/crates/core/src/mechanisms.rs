//! Frequency estimators, Euclidean projection onto the simplex, and an exact
//! (eps, delta) auditor for finitely tabulated mechanisms.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Dataset, PrivacyBudget, ProbVector, NORMALIZATION_TOL};
use crate::error::{invalid, Error, Result};
use crate::rng::laplace;

fn discrete_symbols(data: &Dataset, k: usize) -> Result<&[usize]> {
    let symbols = match data {
        Dataset::Discrete { symbols } => symbols,
        _ => {
            return Err(Error::Unsupported(
                "frequency estimators need a discrete dataset".into(),
            ))
        }
    };
    if symbols.is_empty() {
        return invalid("cannot estimate from an empty dataset");
    }
    if let Some(&s) = symbols.iter().find(|&&s| s >= k) {
        return invalid(format!("symbol {s} outside alphabet of size {k}"));
    }
    Ok(symbols)
}

fn frequencies(symbols: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &s in symbols {
        counts[s] += 1;
    }
    let n = symbols.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Empirical frequencies of the symbols `0..k`.
pub fn empirical_estimator(data: &Dataset, k: usize) -> Result<ProbVector> {
    let symbols = discrete_symbols(data, k)?;
    ProbVector::new(frequencies(symbols, k))
}

/// Empirical frequencies plus i.i.d. Laplace(2/(n eps)) noise per symbol,
/// projected back onto the simplex. The frequency vector moves by at most
/// 2/n in l1 when one record changes, so this is eps-DP.
pub fn laplace_estimator<R: Rng + ?Sized>(data: &Dataset, k: usize, epsilon: f64, rng: &mut R) -> Result<ProbVector> {
    if !(epsilon > 0.0) {
        return invalid(format!("the Laplace estimator needs epsilon > 0, got {epsilon}"));
    }
    let symbols = discrete_symbols(data, k)?;
    laplace_from_frequencies(&frequencies(symbols, k), symbols.len(), epsilon, rng)
}

/// The Laplace estimator applied to precomputed frequencies of `n` records.
pub fn laplace_from_frequencies<R: Rng + ?Sized>(
    freqs: &[f64],
    n: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<ProbVector> {
    if !(epsilon > 0.0) {
        return invalid(format!("the Laplace estimator needs epsilon > 0, got {epsilon}"));
    }
    if n == 0 {
        return invalid("cannot estimate from an empty dataset");
    }
    let scale = 2.0 / (n as f64 * epsilon);
    let noisy: Vec<f64> = freqs.iter().map(|f| f + laplace(rng, scale)).collect();
    project_simplex(&noisy)
}

/// Euclidean projection onto the probability simplex by sorting and thresholding.
pub fn project_simplex(v: &[f64]) -> Result<ProbVector> {
    if v.is_empty() {
        return invalid("cannot project an empty vector");
    }
    if v.iter().any(|x| !x.is_finite()) {
        return invalid("projection input has non-finite entries");
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    ProbVector::new(v.iter().map(|x| (x - theta).max(0.0)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Empirical,
    Laplace,
}

/// A frequency estimator and its privacy budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub k: usize,
    pub budget: PrivacyBudget,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, k: usize, budget: PrivacyBudget, seed: u64) -> Result<Self> {
        let cfg = Self { kind, k, budget, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return invalid("estimator alphabet size must be positive");
        }
        if self.kind == EstimatorKind::Laplace && !(self.budget.epsilon > 0.0) {
            return invalid("the Laplace estimator needs epsilon > 0");
        }
        Ok(())
    }

    pub fn estimate<R: Rng + ?Sized>(&self, data: &Dataset, rng: &mut R) -> Result<ProbVector> {
        match self.kind {
            EstimatorKind::Empirical => empirical_estimator(data, self.k),
            EstimatorKind::Laplace => laplace_estimator(data, self.k, self.budget.epsilon, rng),
        }
    }
}

/// A mechanism given by its full table of output probabilities per dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismRepr", into = "MechanismRepr")]
pub struct FiniteMechanism {
    datasets: Vec<Vec<i64>>,
    outputs: Vec<serde_json::Value>,
    table: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MechanismRepr {
    datasets: Vec<Vec<i64>>,
    outputs: Vec<serde_json::Value>,
    table: Vec<Vec<f64>>,
}

impl TryFrom<MechanismRepr> for FiniteMechanism {
    type Error = Error;
    fn try_from(r: MechanismRepr) -> Result<Self> {
        FiniteMechanism::new(r.datasets, r.outputs, r.table)
    }
}

impl From<FiniteMechanism> for MechanismRepr {
    fn from(m: FiniteMechanism) -> Self {
        MechanismRepr {
            datasets: m.datasets,
            outputs: m.outputs,
            table: m.table,
        }
    }
}

impl FiniteMechanism {
    pub fn new(datasets: Vec<Vec<i64>>, outputs: Vec<serde_json::Value>, table: Vec<Vec<f64>>) -> Result<Self> {
        if datasets.is_empty() || outputs.is_empty() {
            return invalid("a mechanism needs at least one dataset and one output");
        }
        if table.len() != datasets.len() {
            return Err(Error::DimensionMismatch {
                left: table.len(),
                right: datasets.len(),
            });
        }
        let mut seen = HashMap::new();
        for (i, x) in datasets.iter().enumerate() {
            if let Some(j) = seen.insert(x, i) {
                return invalid(format!("datasets {j} and {i} are identical"));
            }
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != outputs.len() {
                return Err(Error::DimensionMismatch {
                    left: row.len(),
                    right: outputs.len(),
                });
            }
            if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return invalid(format!("row {i} has a negative or non-finite entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return invalid(format!("row {i} sums to {s}"));
            }
        }
        Ok(Self {
            datasets,
            outputs,
            table,
        })
    }

    pub fn datasets(&self) -> &[Vec<i64>] {
        &self.datasets
    }

    pub fn outputs(&self) -> &[serde_json::Value] {
        &self.outputs
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    fn index_of(&self, x: &[i64]) -> Result<usize> {
        self.datasets
            .iter()
            .position(|d| d == x)
            .ok_or_else(|| Error::InvalidInput(format!("dataset {x:?} is not tabulated")))
    }

    /// Ordered pairs of row indices at Hamming distance in `1..=t`.
    fn pairs_within(&self, t: usize) -> Vec<(usize, usize)> {
        let m = self.datasets.len();
        (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                let (x, y) = (&self.datasets[i], &self.datasets[j]);
                let h = dataset_hamming(x, y);
                i != j && h >= 1 && h <= t
            })
            .collect()
    }

    /// `sum_o max(0, P(o|x) - bound P(o|y))` for rows `x`, `y`.
    fn slack(&self, x: usize, y: usize, multiplier: f64) -> f64 {
        self.table[x]
            .iter()
            .zip(&self.table[y])
            .map(|(&a, &b)| {
                let rhs = multiplier * b;
                let diff = a - rhs;
                // Ignore differences at the level of rounding error in the products.
                if diff > 8.0 * f64::EPSILON * a.max(rhs) {
                    diff
                } else {
                    0.0
                }
            })
            .sum()
    }
}

fn dataset_hamming(x: &[i64], y: &[i64]) -> usize {
    if x.len() != y.len() {
        return usize::MAX;
    }
    x.iter().zip(y).filter(|(a, b)| a != b).count()
}

/// Which dataset pairs count as neighbors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRelation {
    /// Equal-length datasets differing in exactly one record.
    #[default]
    HammingOne,
    /// Unordered pairs; both orders are checked.
    Explicit(Vec<(Vec<i64>, Vec<i64>)>),
}

/// Smallest delta for which `mech` is (eps, delta)-DP under `relation`:
/// the maximum over ordered neighboring pairs of `sum_o max(0, P(o|x) - e^eps P(o|y))`.
pub fn check_dp(mech: &FiniteMechanism, relation: &NeighborRelation, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return invalid(format!("epsilon must be >= 0, got {epsilon}"));
    }
    let pairs: Vec<(usize, usize)> = match relation {
        NeighborRelation::HammingOne => mech.pairs_within(1),
        NeighborRelation::Explicit(list) => {
            let mut out = Vec::with_capacity(2 * list.len());
            for (x, y) in list {
                let (i, j) = (mech.index_of(x)?, mech.index_of(y)?);
                out.push((i, j));
                out.push((j, i));
            }
            out
        }
    };
    let multiplier = epsilon.exp();
    Ok(pairs
        .par_iter()
        .map(|&(i, j)| mech.slack(i, j, multiplier))
        .reduce(|| 0.0, f64::max))
}

/// Largest violation of the group-privacy guarantee over dataset pairs at
/// Hamming distance at most t: slack at multiplier `e^{t eps}` minus
/// `delta t e^{eps (t-1)}`. A value `<= 0` means the guarantee holds.
pub fn group_dp_check(mech: &FiniteMechanism, epsilon: f64, delta: f64, t: u32) -> Result<f64> {
    let budget = PrivacyBudget::new(epsilon, delta)?;
    if t == 0 {
        return invalid("group size t must be at least 1");
    }
    let pairs = mech.pairs_within(t as usize);
    if pairs.is_empty() {
        return invalid(format!("no tabulated dataset pairs within distance {t}"));
    }
    let (multiplier, additive) = crate::bounds::group_privacy_factor(budget, t);
    Ok(pairs
        .par_iter()
        .map(|&(i, j)| mech.slack(i, j, multiplier))
        .reduce(|| 0.0, f64::max)
        - additive)
}

/// Randomized response applied independently to each of `bits` bits, each
/// flipped with probability `1/(1 + e^eps)`. Datasets and outputs are all bit
/// strings of that length.
pub fn randomized_response(bits: usize, epsilon: f64) -> Result<FiniteMechanism> {
    if bits == 0 || bits > 12 {
        return invalid(format!("randomized response supports 1..=12 bits, got {bits}"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return invalid(format!("epsilon must be finite and >= 0, got {epsilon}"));
    }
    let flip = 1.0 / (1.0 + epsilon.exp());
    let size = 1usize << bits;
    let word = |m: usize| -> Vec<i64> { (0..bits).map(|b| ((m >> b) & 1) as i64).collect() };
    let datasets: Vec<Vec<i64>> = (0..size).map(word).collect();
    let outputs = (0..size).map(|m| serde_json::Value::from(word(m))).collect();
    let table = (0..size)
        .map(|x| {
            (0..size)
                .map(|o| {
                    let changed = (x ^ o).count_ones() as i32;
                    flip.powi(changed) * (1.0 - flip).powi(bits as i32 - changed)
                })
                .collect()
        })
        .collect();
    FiniteMechanism::new(datasets, outputs, table)
}
