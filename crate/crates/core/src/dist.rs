//! Probability objects, statistical distances and sampling primitives.
//!
//! Symbols of a k-ary alphabet are 0-based (`0..k`) everywhere in this crate.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::mean_stderr;

/// Absolute tolerance on the total mass of a stored distribution.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Inputs whose mass is within this of 1 are renormalized; beyond it they are rejected.
pub const RENORMALIZE_TOL: f64 = 1e-6;

fn normalize_weights(mut w: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if w.is_empty() {
        return invalid(format!("{what}: empty"));
    }
    if let Some((i, x)) = w.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return invalid(format!("{what}: entry {i} is {x}, expected a finite nonnegative value"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > RENORMALIZE_TOL {
        return invalid(format!("{what}: entries sum to {s}, expected 1"));
    }
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        w.iter_mut().for_each(|x| *x /= s);
    }
    Ok(w)
}

/// A probability mass function over `0..k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Self {
            probs: normalize_weights(probs, "probability vector")?,
        })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("alphabet size must be positive");
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn point_mass(k: usize, symbol: usize) -> Result<Self> {
        if symbol >= k {
            return invalid(format!("symbol {symbol} outside alphabet of size {k}"));
        }
        let mut probs = vec![0.0; k];
        probs[symbol] = 1.0;
        Ok(Self { probs })
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sampler(&self) -> Categorical {
        Categorical::new(&self.probs)
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.probs
    }
}

/// Inverse-CDF sampler over `0..k`.
#[derive(Clone, Debug)]
pub struct Categorical {
    cdf: Vec<f64>,
}

impl Categorical {
    pub fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("nonempty cdf");
        let u = rng.random::<f64>() * total;
        // First index whose cumulative mass exceeds u; never a zero-mass symbol.
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// A product of `d` distributions over a common alphabet `0..k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ProbVector>", into = "Vec<ProbVector>")]
pub struct ProductDist {
    marginals: Vec<ProbVector>,
}

impl ProductDist {
    pub fn new(marginals: Vec<ProbVector>) -> Result<Self> {
        let Some(first) = marginals.first() else {
            return invalid("product distribution needs at least one marginal");
        };
        let k = first.k();
        if let Some(m) = marginals.iter().find(|m| m.k() != k) {
            return Err(Error::DimensionMismatch { left: k, right: m.k() });
        }
        Ok(Self { marginals })
    }

    /// Product of Bernoulli marginals with the given means; symbol 1 means "one".
    pub fn bernoulli(means: &[f64]) -> Result<Self> {
        let marginals = means
            .iter()
            .map(|&m| ProbVector::new(vec![1.0 - m, m]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(marginals)
    }

    pub fn d(&self) -> usize {
        self.marginals.len()
    }

    pub fn k(&self) -> usize {
        self.marginals[0].k()
    }

    pub fn marginals(&self) -> &[ProbVector] {
        &self.marginals
    }
}

impl TryFrom<Vec<ProbVector>> for ProductDist {
    type Error = Error;
    fn try_from(v: Vec<ProbVector>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProductDist> for Vec<ProbVector> {
    fn from(p: ProductDist) -> Self {
        p.marginals
    }
}

/// Overflow-safe Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A mixture of identity-covariance Gaussians whose means lie in the ball of radius `norm_bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianMixtureRepr", into = "GaussianMixtureRepr")]
pub struct GaussianMixtureSpec {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    norm_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianMixtureRepr {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    norm_bound: f64,
}

impl TryFrom<GaussianMixtureRepr> for GaussianMixtureSpec {
    type Error = Error;
    fn try_from(r: GaussianMixtureRepr) -> Result<Self> {
        Self::new(r.weights, r.means, r.norm_bound)
    }
}

impl From<GaussianMixtureSpec> for GaussianMixtureRepr {
    fn from(g: GaussianMixtureSpec) -> Self {
        Self {
            weights: g.weights,
            means: g.means,
            norm_bound: g.norm_bound,
        }
    }
}

impl GaussianMixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, norm_bound: f64) -> Result<Self> {
        let weights = normalize_weights(weights, "mixture weights")?;
        if means.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                left: weights.len(),
                right: means.len(),
            });
        }
        if !(norm_bound >= 0.0) {
            return invalid(format!("norm bound must be nonnegative, got {norm_bound}"));
        }
        let d = means[0].len();
        if d == 0 {
            return invalid("means must have positive dimension");
        }
        for (j, mu) in means.iter().enumerate() {
            if mu.len() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: mu.len(),
                });
            }
            if mu.iter().any(|x| !x.is_finite()) {
                return invalid(format!("mean {j} has a non-finite entry"));
            }
            let norm = l2_norm(mu);
            if norm > norm_bound * (1.0 + 1e-12) {
                return invalid(format!("mean {j} has norm {norm} > R = {norm_bound}"));
            }
        }
        Ok(Self {
            weights,
            means,
            norm_bound,
        })
    }

    pub fn single(mean: Vec<f64>, norm_bound: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], norm_bound)
    }

    pub fn d(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// Log density, evaluated with log-sum-exp over components.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, mu)| w.ln() - 0.5 * sq_dist(z, mu))
            .collect();
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return m;
        }
        let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
        lse - 0.5 * self.d() as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let j = Categorical::new(&self.weights).sample(rng);
        self.means[j]
            .iter()
            .map(|m| m + rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Any of the distribution kinds handled by the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Distribution {
    #[serde(rename = "kary")]
    Kary { probs: ProbVector },
    #[serde(rename = "product")]
    Product { marginals: ProductDist },
    #[serde(rename = "gmix")]
    GaussianMixture(GaussianMixtureSpec),
}

impl Distribution {
    pub fn as_kary(&self) -> Option<&ProbVector> {
        match self {
            Distribution::Kary { probs } => Some(probs),
            _ => None,
        }
    }

    pub fn as_product(&self) -> Option<&ProductDist> {
        match self {
            Distribution::Product { marginals } => Some(marginals),
            _ => None,
        }
    }

    pub fn as_mixture(&self) -> Option<&GaussianMixtureSpec> {
        match self {
            Distribution::GaussianMixture(g) => Some(g),
            _ => None,
        }
    }
}

impl From<ProbVector> for Distribution {
    fn from(probs: ProbVector) -> Self {
        Distribution::Kary { probs }
    }
}

impl From<ProductDist> for Distribution {
    fn from(marginals: ProductDist) -> Self {
        Distribution::Product { marginals }
    }
}

impl From<GaussianMixtureSpec> for Distribution {
    fn from(g: GaussianMixtureSpec) -> Self {
        Distribution::GaussianMixture(g)
    }
}

/// The pair (epsilon, delta) of approximate differential privacy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BudgetRepr")]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Deserialize)]
struct BudgetRepr {
    epsilon: f64,
    #[serde(default)]
    delta: f64,
}

impl TryFrom<BudgetRepr> for PrivacyBudget {
    type Error = Error;
    fn try_from(r: BudgetRepr) -> Result<Self> {
        Self::new(r.epsilon, r.delta)
    }
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return invalid(format!("epsilon must be >= 0, got {epsilon}"));
        }
        if !(0.0..=1.0).contains(&delta) {
            return invalid(format!("delta must lie in [0, 1], got {delta}"));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// A sequence of `n` records.
///
/// Product and real-valued records are stored flat, `d` values per record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Dataset {
    Discrete { symbols: Vec<usize> },
    Product { d: usize, values: Vec<usize> },
    Real { d: usize, values: Vec<f64> },
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Discrete { symbols } => symbols.len(),
            Dataset::Product { d, values } => values.len() / d,
            Dataset::Real { d, values } => values.len() / d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of records at which the two datasets differ; a multi-attribute record counts once.
    pub fn hamming(&self, other: &Dataset) -> Result<usize> {
        fn chunked<T: PartialEq>(a: &[T], b: &[T], d: usize) -> usize {
            a.chunks(d).zip(b.chunks(d)).filter(|(x, y)| x != y).count()
        }
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        match (self, other) {
            (Dataset::Discrete { symbols: a }, Dataset::Discrete { symbols: b }) => {
                Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
            }
            (Dataset::Product { d, values: a }, Dataset::Product { d: e, values: b }) if d == e => {
                Ok(chunked(a, b, *d))
            }
            (Dataset::Real { d, values: a }, Dataset::Real { d: e, values: b }) if d == e => Ok(chunked(a, b, *d)),
            _ => invalid("datasets are over different domains"),
        }
    }
}

/// Distances between k-ary distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tv,
    Kl,
    Chi2,
    L1,
    L2,
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tv" => Ok(Metric::Tv),
            "kl" => Ok(Metric::Kl),
            "chi2" => Ok(Metric::Chi2),
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            other => invalid(format!("unknown metric {other:?}")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Metric::Tv => "tv",
            Metric::Kl => "kl",
            Metric::Chi2 => "chi2",
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        };
        f.write_str(s)
    }
}

/// Distance between two k-ary distributions. KL and chi-squared return
/// `+inf` when `q` vanishes on a symbol where `p` does not.
pub fn distance(p: &ProbVector, q: &ProbVector, metric: Metric) -> Result<f64> {
    if p.k() != q.k() {
        return Err(Error::DimensionMismatch {
            left: p.k(),
            right: q.k(),
        });
    }
    let pairs = p.probs().iter().zip(q.probs());
    let value = match metric {
        Metric::L1 => pairs.map(|(a, b)| (a - b).abs()).sum(),
        Metric::Tv => 0.5 * pairs.map(|(a, b)| (a - b).abs()).sum::<f64>(),
        Metric::L2 => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Metric::Kl => pairs
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| if *b == 0.0 { f64::INFINITY } else { a * (a / b).ln() })
            .sum::<f64>()
            .max(0.0),
        Metric::Chi2 => pairs
            .filter(|(a, b)| a != b)
            .map(|(a, b)| {
                if *b == 0.0 {
                    f64::INFINITY
                } else {
                    (a - b) * (a - b) / b
                }
            })
            .sum(),
    };
    Ok(value)
}

fn check_same_shape(p: &ProductDist, q: &ProductDist) -> Result<()> {
    if p.d() != q.d() {
        return Err(Error::DimensionMismatch {
            left: p.d(),
            right: q.d(),
        });
    }
    if p.k() != q.k() {
        return Err(Error::DimensionMismatch {
            left: p.k(),
            right: q.k(),
        });
    }
    Ok(())
}

/// KL divergence between product distributions, summed coordinate-wise.
pub fn product_kl(p: &ProductDist, q: &ProductDist) -> Result<f64> {
    check_same_shape(p, q)?;
    p.marginals()
        .iter()
        .zip(q.marginals())
        .map(|(a, b)| distance(a, b, Metric::Kl))
        .sum()
}

/// Default limit on the number of (compressed) atoms enumerated by [`product_tv_exact`].
pub const PRODUCT_ATOM_CAP: u64 = 1 << 24;

/// Exact TV distance between product distributions.
///
/// Coordinates with identical marginals integrate out, and symbols that carry
/// the same pair of masses on a coordinate are merged with a multiplicity, so
/// the enumeration runs over the remaining compressed atoms only. Errors when
/// more than `atom_cap` atoms remain.
pub fn product_tv_exact(p: &ProductDist, q: &ProductDist, atom_cap: u64) -> Result<f64> {
    check_same_shape(p, q)?;
    let mut coords: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    for (a, b) in p.marginals().iter().zip(q.marginals()) {
        if a == b {
            continue;
        }
        let mut groups: HashMap<(u64, u64), f64> = HashMap::new();
        for (&x, &y) in a.probs().iter().zip(b.probs()) {
            if x == 0.0 && y == 0.0 {
                continue;
            }
            *groups.entry((x.to_bits(), y.to_bits())).or_insert(0.0) += 1.0;
        }
        let mut atoms: Vec<(f64, f64, f64)> = groups
            .into_iter()
            .map(|((x, y), m)| (f64::from_bits(x), f64::from_bits(y), m))
            .collect();
        atoms.sort_by(|u, v| u.partial_cmp(v).expect("finite masses"));
        coords.push(atoms);
    }
    let mut count: u64 = 1;
    for c in &coords {
        count = count.saturating_mul(c.len() as u64);
        if count > atom_cap {
            return Err(Error::Infeasible(format!(
                "exact product TV needs more than {atom_cap} atoms"
            )));
        }
    }
    fn walk(coords: &[Vec<(f64, f64, f64)>], pp: f64, qq: f64, mult: f64) -> f64 {
        match coords.split_first() {
            None => mult * (pp - qq).abs(),
            Some((head, rest)) => head.iter().map(|&(x, y, m)| walk(rest, pp * x, qq * y, mult * m)).sum(),
        }
    }
    Ok(0.5 * walk(&coords, 1.0, 1.0, 1.0))
}

/// KL divergence between two identity-covariance Gaussians: `|mu1 - mu2|^2 / 2`.
pub fn gaussian_component_kl(mu1: &[f64], mu2: &[f64]) -> Result<f64> {
    if mu1.len() != mu2.len() {
        return Err(Error::DimensionMismatch {
            left: mu1.len(),
            right: mu2.len(),
        });
    }
    Ok(0.5 * sq_dist(mu1, mu2))
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of the TV distance between two Gaussian mixtures.
///
/// Draws `z` from the equal-weight average of both mixtures and averages
/// `|m1(z) - m2(z)| / (m1(z) + m2(z))`, which equals `|tanh((l1 - l2) / 2)|`
/// in terms of the log densities. Each term lies in `[0, 1]`.
pub fn mixture_tv_mc<R: Rng + ?Sized>(
    m1: &GaussianMixtureSpec,
    m2: &GaussianMixtureSpec,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if m1.d() != m2.d() {
        return Err(Error::DimensionMismatch {
            left: m1.d(),
            right: m2.d(),
        });
    }
    if samples < 1000 {
        return invalid(format!("mixture TV needs at least 1000 samples, got {samples}"));
    }
    let mut terms = Vec::with_capacity(samples);
    for i in 0..samples {
        let z = if rng.random::<bool>() {
            m1.sample(rng)
        } else {
            m2.sample(rng)
        };
        terms.push(tv_term(m1, m2, &z, i)?);
    }
    let (estimate, stderr) = mean_stderr(&terms);
    Ok(McEstimate { estimate, stderr })
}

fn tv_term(m1: &GaussianMixtureSpec, m2: &GaussianMixtureSpec, z: &[f64], sample: usize) -> Result<f64> {
    let (l1, l2) = (m1.log_density(z), m2.log_density(z));
    if l1.is_nan() || l2.is_nan() || (!l1.is_finite() && !l2.is_finite()) {
        return Err(Error::DegenerateDensity {
            sample,
            detail: format!("log densities {l1} and {l2}"),
        });
    }
    if l1.is_finite() && l2.is_finite() {
        Ok((0.5 * (l1 - l2)).tanh().abs())
    } else {
        Ok(1.0)
    }
}

/// Draws `n` i.i.d. records from `dist`.
pub fn sample_dataset<R: Rng + ?Sized>(dist: &Distribution, n: usize, rng: &mut R) -> Dataset {
    match dist {
        Distribution::Kary { probs } => {
            let s = probs.sampler();
            Dataset::Discrete {
                symbols: (0..n).map(|_| s.sample(rng)).collect(),
            }
        }
        Distribution::Product { marginals } => {
            let samplers: Vec<Categorical> = marginals.marginals().iter().map(|m| m.sampler()).collect();
            let mut values = Vec::with_capacity(n * samplers.len());
            for _ in 0..n {
                values.extend(samplers.iter().map(|s| s.sample(rng)));
            }
            Dataset::Product {
                d: samplers.len(),
                values,
            }
        }
        Distribution::GaussianMixture(g) => {
            let mut values = Vec::with_capacity(n * g.d());
            for _ in 0..n {
                values.extend(g.sample(rng));
            }
            Dataset::Real { d: g.d(), values }
        }
    }
}
