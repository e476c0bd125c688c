//! Couplings of dataset distributions and Monte Carlo estimates of their
//! expected Hamming distance.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{distance, Categorical, Dataset, Metric, ProbVector};
use crate::error::{invalid, Error, Result};
use crate::packings::{assouad_kary_family, assouad_product_family};
use crate::rng::{mean_stderr, stream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Law of a single record on one side of a coupling.
#[derive(Clone, Debug, PartialEq)]
pub enum RecordLaw {
    Symbol(ProbVector),
    /// Independent attributes, one marginal per attribute.
    Attributes(Vec<ProbVector>),
    Continuous,
}

/// A joint sampler of two datasets of `n` records each.
pub trait CouplingSampler: Send + Sync {
    fn n(&self) -> usize;
    fn draw(&self, rng: &mut StreamRng) -> (Dataset, Dataset);
    fn record_law(&self, side: Side) -> RecordLaw;
    /// Exact expected Hamming distance between the two datasets.
    fn expected_hamming(&self) -> f64;
}

/// Coordinate-wise maximal coupling of `p^n` and `q^n`.
#[derive(Clone, Debug)]
pub struct MaximalCoupling {
    p: ProbVector,
    q: ProbVector,
    n: usize,
    tv: f64,
    overlap: Option<Categorical>,
    left_residual: Option<Categorical>,
    right_residual: Option<Categorical>,
}

pub fn maximal_coupling_iid(p: &ProbVector, q: &ProbVector, n: usize) -> Result<MaximalCoupling> {
    if p.k() != q.k() {
        return Err(Error::DimensionMismatch {
            left: p.k(),
            right: q.k(),
        });
    }
    if n == 0 {
        return invalid("maximal coupling needs n >= 1");
    }
    let tv = distance(p, q, Metric::Tv)?;
    let common: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| a.min(*b)).collect();
    let residual =
        |r: &ProbVector| -> Vec<f64> { r.probs().iter().zip(&common).map(|(a, c)| (a - c).max(0.0)).collect() };
    let nonzero = |w: &[f64]| w.iter().any(|&x| x > 0.0);
    let lr = residual(p);
    let rr = residual(q);
    Ok(MaximalCoupling {
        overlap: nonzero(&common).then(|| Categorical::new(&common)),
        left_residual: (tv > 0.0 && nonzero(&lr)).then(|| Categorical::new(&lr)),
        right_residual: (tv > 0.0 && nonzero(&rr)).then(|| Categorical::new(&rr)),
        p: p.clone(),
        q: q.clone(),
        n,
        tv,
    })
}

impl MaximalCoupling {
    pub fn tv(&self) -> f64 {
        self.tv
    }
}

impl CouplingSampler for MaximalCoupling {
    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, rng: &mut StreamRng) -> (Dataset, Dataset) {
        let mut xs = Vec::with_capacity(self.n);
        let mut ys = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let differ = match (&self.overlap, &self.left_residual, &self.right_residual) {
                (None, _, _) => true,
                (Some(_), Some(_), Some(_)) => rng.random::<f64>() < self.tv,
                _ => false,
            };
            if differ {
                xs.push(self.left_residual.as_ref().expect("tv > 0").sample(rng));
                ys.push(self.right_residual.as_ref().expect("tv > 0").sample(rng));
            } else {
                let s = self.overlap.as_ref().expect("tv < 1").sample(rng);
                xs.push(s);
                ys.push(s);
            }
        }
        (Dataset::Discrete { symbols: xs }, Dataset::Discrete { symbols: ys })
    }

    fn record_law(&self, side: Side) -> RecordLaw {
        RecordLaw::Symbol(match side {
            Side::Left => self.p.clone(),
            Side::Right => self.q.clone(),
        })
    }

    fn expected_hamming(&self) -> f64 {
        self.n as f64 * self.tv
    }
}

/// Couples the mixtures `p_{+i}` and `p_{-i}` of the Assouad k-ary family.
///
/// A sign vector with `e_i = +1` is shared by both sides; each record of X on
/// symbol 2i (0-based) moves to 2i+1 in Y with probability `20a/(1+10a)`.
#[derive(Clone, Debug)]
pub struct AssouadKaryCoupling {
    k: usize,
    alpha: f64,
    n: usize,
    i: usize,
}

pub fn assouad_kary_coupling(k: usize, alpha: f64, n: usize, i: usize) -> Result<AssouadKaryCoupling> {
    if alpha != 0.0 {
        assouad_kary_family(k, alpha, n)?;
    } else if k < 2 || !k.is_multiple_of(2) {
        return invalid(format!("Assouad k-ary coupling needs an even k >= 2, got {k}"));
    }
    if i >= k / 2 {
        return invalid(format!("coordinate {i} out of range 0..{}", k / 2));
    }
    Ok(AssouadKaryCoupling { k, alpha, n, i })
}

impl AssouadKaryCoupling {
    fn flip_probability(&self) -> f64 {
        20.0 * self.alpha / (1.0 + 10.0 * self.alpha)
    }

    fn side_marginal(&self, sign: f64) -> ProbVector {
        let k = self.k as f64;
        let mut probs = vec![1.0 / k; self.k];
        probs[2 * self.i] = (1.0 + 10.0 * sign * self.alpha) / k;
        probs[2 * self.i + 1] = (1.0 - 10.0 * sign * self.alpha) / k;
        ProbVector::new(probs).expect("valid by construction")
    }
}

impl CouplingSampler for AssouadKaryCoupling {
    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, rng: &mut StreamRng) -> (Dataset, Dataset) {
        let k = self.k as f64;
        let probs: Vec<f64> = (0..self.k / 2)
            .flat_map(|j| {
                let s = if j == self.i || rng.random::<bool>() { 1.0 } else { -1.0 };
                [(1.0 + 10.0 * s * self.alpha) / k, (1.0 - 10.0 * s * self.alpha) / k]
            })
            .collect();
        let sampler = Categorical::new(&probs);
        let flip = self.flip_probability();
        let (from, to) = (2 * self.i, 2 * self.i + 1);
        let xs: Vec<usize> = (0..self.n).map(|_| sampler.sample(rng)).collect();
        let ys = xs
            .iter()
            .map(|&x| if x == from && rng.random::<f64>() < flip { to } else { x })
            .collect();
        (Dataset::Discrete { symbols: xs }, Dataset::Discrete { symbols: ys })
    }

    fn record_law(&self, side: Side) -> RecordLaw {
        RecordLaw::Symbol(self.side_marginal(match side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }))
    }

    fn expected_hamming(&self) -> f64 {
        20.0 * self.alpha * self.n as f64 / self.k as f64
    }
}

/// Couples the mixtures `p_{+i}` and `p_{-i}` of the Assouad Bernoulli product
/// family: attribute i of each record of X is switched from 1 to 0 in Y with
/// probability `40a/(1+20a)`.
#[derive(Clone, Debug)]
pub struct ProductFlipCoupling {
    d: usize,
    alpha: f64,
    n: usize,
    i: usize,
}

pub fn product_flip_coupling(d: usize, alpha: f64, n: usize, i: usize) -> Result<ProductFlipCoupling> {
    if alpha != 0.0 {
        assouad_product_family(d, alpha, n)?;
    } else if d < 2 {
        return invalid(format!("product flip coupling needs d >= 2, got {d}"));
    }
    if i >= d {
        return invalid(format!("coordinate {i} out of range 0..{d}"));
    }
    Ok(ProductFlipCoupling { d, alpha, n, i })
}

/// Calls `f` on the indices in `0..n` of successes of independent Bernoulli(p)
/// trials, skipping failures geometrically.
fn bernoulli_successes<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64, mut f: impl FnMut(usize)) {
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..n).for_each(f);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut pos = 0usize;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (n - pos) as f64 {
            return;
        }
        pos += skip as usize;
        f(pos);
        pos += 1;
        if pos >= n {
            return;
        }
    }
}

impl ProductFlipCoupling {
    fn flip_probability(&self) -> f64 {
        40.0 * self.alpha / (1.0 + 20.0 * self.alpha)
    }

    fn side_law(&self, sign: f64) -> Vec<ProbVector> {
        let d = self.d as f64;
        (0..self.d)
            .map(|j| {
                let mu = if j == self.i {
                    (1.0 + 20.0 * sign * self.alpha) / d
                } else {
                    1.0 / d
                };
                ProbVector::new(vec![1.0 - mu, mu]).expect("valid by construction")
            })
            .collect()
    }
}

impl CouplingSampler for ProductFlipCoupling {
    fn n(&self) -> usize {
        self.n
    }

    fn draw(&self, rng: &mut StreamRng) -> (Dataset, Dataset) {
        let (d, n) = (self.d, self.n);
        let mut xs = vec![0usize; n * d];
        for j in 0..d {
            let s = if j == self.i || rng.random::<bool>() { 1.0 } else { -1.0 };
            let mu = (1.0 + 20.0 * s * self.alpha) / d as f64;
            bernoulli_successes(rng, n, mu, |r| xs[r * d + j] = 1);
        }
        let mut ys = xs.clone();
        let flip = self.flip_probability();
        for r in 0..n {
            if xs[r * d + self.i] == 1 && rng.random::<f64>() < flip {
                ys[r * d + self.i] = 0;
            }
        }
        (Dataset::Product { d, values: xs }, Dataset::Product { d, values: ys })
    }

    fn record_law(&self, side: Side) -> RecordLaw {
        RecordLaw::Attributes(self.side_law(match side {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }))
    }

    fn expected_hamming(&self) -> f64 {
        40.0 * self.alpha * self.n as f64 / self.d as f64
    }
}

/// Sample mean and standard error of the Hamming distance over `trials` draws.
///
/// Trial t uses its own stream derived from a base seed drawn from `rng`, so
/// the result does not depend on the number of worker threads.
pub fn empirical_hamming<S, R>(sampler: &S, trials: usize, rng: &mut R) -> Result<(f64, f64)>
where
    S: CouplingSampler + ?Sized,
    R: Rng + ?Sized,
{
    if trials < 100 {
        return invalid(format!("empirical_hamming needs at least 100 trials, got {trials}"));
    }
    let base: u64 = rng.random();
    let distances = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut r = stream(base, &[t]);
            let (x, y) = sampler.draw(&mut r);
            x.hamming(&y).map(|h| h as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_stderr(&distances))
}

/// TV between the pooled empirical single-record frequencies on one side and
/// that side's declared record law. For independent attributes the largest
/// per-attribute TV is returned.
pub fn marginal_check<S, R>(sampler: &S, side: Side, trials: usize, rng: &mut R) -> Result<f64>
where
    S: CouplingSampler + ?Sized,
    R: Rng + ?Sized,
{
    if trials < 10_000 {
        return invalid(format!("marginal_check needs at least 10^4 trials, got {trials}"));
    }
    let laws: Vec<ProbVector> = match sampler.record_law(side) {
        RecordLaw::Symbol(p) => vec![p],
        RecordLaw::Attributes(ms) => ms,
        RecordLaw::Continuous => return Err(Error::Unsupported("marginal_check needs discrete record laws".into())),
    };
    let widths: Vec<usize> = laws.iter().map(|m| m.k()).collect();
    let offsets: Vec<usize> = widths
        .iter()
        .scan(0, |acc, w| {
            let o = *acc;
            *acc += w;
            Some(o)
        })
        .collect();
    let cells = widths.iter().sum::<usize>();
    let base: u64 = rng.random();
    let counts = (0..trials as u64)
        .into_par_iter()
        .try_fold(
            || vec![0u64; cells],
            |mut acc, t| {
                let mut r = stream(base, &[t]);
                let (x, y) = sampler.draw(&mut r);
                let data = if side == Side::Left { x } else { y };
                match data {
                    Dataset::Discrete { symbols } if laws.len() == 1 => {
                        for s in symbols {
                            acc[s] += 1;
                        }
                    }
                    Dataset::Product { d, values } if d == laws.len() => {
                        for (idx, v) in values.into_iter().enumerate() {
                            acc[offsets[idx % d] + v] += 1;
                        }
                    }
                    _ => return Err(Error::Unsupported("dataset does not match the record law".into())),
                }
                Ok(acc)
            },
        )
        .try_reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let mut worst: f64 = 0.0;
    for (law, &off) in laws.iter().zip(&offsets) {
        let c = &counts[off..off + law.k()];
        let total: u64 = c.iter().sum();
        if total == 0 {
            return invalid("no records drawn");
        }
        let tv = 0.5
            * c.iter()
                .zip(law.probs())
                .map(|(&n, &p)| (n as f64 / total as f64 - p).abs())
                .sum::<f64>();
        worst = worst.max(tv);
    }
    Ok(worst)
}
