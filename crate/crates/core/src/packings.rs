//! Hard-instance families: packings (well separated in the loss, close in KL
//! and TV) and hypercube families whose loss splits across coordinates.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::codes::{gv_constant_weight, gv_qary, Code, CodeOptions, Construction};
use crate::dist::{
    distance, gaussian_component_kl, l2_norm, product_kl, product_tv_exact, Distribution, GaussianMixtureSpec, Metric,
    ProbVector, ProductDist, PRODUCT_ATOM_CAP,
};
use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

/// Families larger than this are not verified pairwise.
pub const EXHAUSTIVE_MEMBER_CAP: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Tv,
    L2,
}

impl Loss {
    pub fn metric(self) -> Metric {
        match self {
            Loss::Tv => Metric::Tv,
            Loss::L2 => Metric::L2,
        }
    }
}

impl FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tv" => Ok(Loss::Tv),
            "l2" => Ok(Loss::L2),
            other => invalid(format!("unknown loss {other:?} (expected tv or l2)")),
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Loss::Tv => "tv",
            Loss::L2 => "l2",
        })
    }
}

/// Parameters of a code used inside a construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeSummary {
    pub h: u32,
    pub len: usize,
    pub weight: Option<usize>,
    pub min_dist: usize,
    pub size: usize,
    pub construction: Construction,
    pub certified: bool,
}

impl From<&Code> for CodeSummary {
    fn from(c: &Code) -> Self {
        Self {
            h: c.alphabet_size(),
            len: c.length(),
            weight: c.weight(),
            min_dist: c.claimed_min_distance(),
            size: c.len(),
            construction: c.construction(),
            certified: c.certified(),
        }
    }
}

/// A finite family of distributions with its claimed pairwise guarantees.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PackingFamily {
    pub family: String,
    pub params: serde_json::Value,
    pub loss: Loss,
    /// Claimed pairwise lower bound in `loss`; `None` when no explicit constant is known.
    pub separation: Option<f64>,
    /// Claimed pairwise KL upper bound; `None` when KL may be infinite.
    pub kl_cap: Option<f64>,
    pub tv_cap: Option<f64>,
    /// Set when the parameters fall outside the range where the size guarantee applies.
    pub guarantee_waived: bool,
    pub codes: Vec<CodeSummary>,
    pub members: Vec<Distribution>,
}

/// Result of exhaustive pairwise verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub members: usize,
    pub pairs: usize,
    /// Smallest pairwise distance in the family's loss, when computable exactly.
    pub min_loss: Option<f64>,
    pub min_tv: Option<f64>,
    pub max_tv: Option<f64>,
    /// Largest pairwise KL (for mixtures, the convexity bound). `None` if infinite.
    pub max_kl: Option<f64>,
    pub separation_ok: bool,
    pub kl_ok: bool,
    pub tv_ok: bool,
    pub passed: bool,
}

/// Relative slack for comparing computed distances with closed-form claims.
const CLAIM_TOL: f64 = 1e-9;

fn le(a: f64, b: f64) -> bool {
    a <= b + CLAIM_TOL * b.abs().max(1.0)
}

#[derive(Default)]
struct PairStats {
    min_loss: f64,
    min_tv: f64,
    max_tv: f64,
    max_kl: f64,
}

impl PairStats {
    fn empty() -> Self {
        Self {
            min_loss: f64::INFINITY,
            min_tv: f64::INFINITY,
            max_tv: 0.0,
            max_kl: 0.0,
        }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            min_loss: self.min_loss.min(o.min_loss),
            min_tv: self.min_tv.min(o.min_tv),
            max_tv: self.max_tv.max(o.max_tv),
            max_kl: self.max_kl.max(o.max_kl),
        }
    }
}

/// Convexity bound on the KL between equal-weight mixtures with matched components.
pub fn mixture_convexity_kl(a: &GaussianMixtureSpec, b: &GaussianMixtureSpec) -> Result<f64> {
    if a.means().len() != b.means().len() {
        return Err(Error::DimensionMismatch {
            left: a.means().len(),
            right: b.means().len(),
        });
    }
    let k = a.means().len() as f64;
    let mut total = 0.0;
    for (x, y) in a.means().iter().zip(b.means()) {
        total += gaussian_component_kl(x, y)?;
    }
    Ok(total / k)
}

fn pair_stats(x: &Distribution, y: &Distribution, loss: Loss) -> Result<PairStats> {
    match (x, y) {
        (Distribution::Kary { probs: p }, Distribution::Kary { probs: q }) => {
            let tv = distance(p, q, Metric::Tv)?;
            let kl = distance(p, q, Metric::Kl)?.max(distance(q, p, Metric::Kl)?);
            let l = if loss == Loss::Tv {
                tv
            } else {
                distance(p, q, loss.metric())?
            };
            Ok(PairStats {
                min_loss: l,
                min_tv: tv,
                max_tv: tv,
                max_kl: kl,
            })
        }
        (Distribution::Product { marginals: p }, Distribution::Product { marginals: q }) => {
            if loss != Loss::Tv {
                return Err(Error::Unsupported("product families use TV loss".into()));
            }
            let tv = product_tv_exact(p, q, PRODUCT_ATOM_CAP)?;
            let kl = product_kl(p, q)?.max(product_kl(q, p)?);
            Ok(PairStats {
                min_loss: tv,
                min_tv: tv,
                max_tv: tv,
                max_kl: kl,
            })
        }
        (Distribution::GaussianMixture(a), Distribution::GaussianMixture(b)) => {
            let kl = mixture_convexity_kl(a, b)?.max(mixture_convexity_kl(b, a)?);
            Ok(PairStats {
                min_loss: f64::INFINITY,
                min_tv: f64::INFINITY,
                max_tv: 0.0,
                max_kl: kl,
            })
        }
        _ => invalid("family members are not of a common type"),
    }
}

impl PackingFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members as k-ary vectors, when the family is k-ary.
    pub fn kary_members(&self) -> Option<Vec<&ProbVector>> {
        self.members.iter().map(|m| m.as_kary()).collect()
    }

    /// Checks every pair against the claimed separation and caps.
    pub fn verify(&self) -> Result<VerificationReport> {
        let m = self.members.len();
        if m < 2 {
            return invalid("a family needs at least two members");
        }
        if m > EXHAUSTIVE_MEMBER_CAP {
            return Err(Error::Infeasible(format!(
                "{m} members exceeds the exhaustive verification cap {EXHAUSTIVE_MEMBER_CAP}"
            )));
        }
        let is_mixture = matches!(self.members[0], Distribution::GaussianMixture(_));
        if let Distribution::GaussianMixture(g) = &self.members[0] {
            for (i, member) in self.members.iter().enumerate() {
                let mix = member
                    .as_mixture()
                    .ok_or_else(|| Error::InvalidInput("family members are not of a common type".into()))?;
                if mix.means().len() != g.means().len() || mix.d() != g.d() {
                    return invalid(format!("member {i} has a different shape"));
                }
            }
        }
        let members = &self.members;
        let loss = self.loss;
        let stats = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut acc = PairStats::empty();
                for j in i + 1..m {
                    acc = acc.merge(pair_stats(&members[i], &members[j], loss)?);
                }
                Ok::<_, Error>(acc)
            })
            .try_reduce(PairStats::empty, |a, b| Ok(a.merge(b)))?;

        let finite = |v: f64| v.is_finite().then_some(v);
        let (min_loss, min_tv, max_tv) = if is_mixture {
            (None, None, None)
        } else {
            (Some(stats.min_loss), Some(stats.min_tv), Some(stats.max_tv))
        };
        let separation_ok = match (self.separation, min_loss) {
            (Some(s), Some(l)) => le(s, l),
            _ => true,
        };
        let kl_ok = self.kl_cap.is_none_or(|c| le(stats.max_kl, c));
        let tv_ok = match (self.tv_cap, max_tv) {
            (Some(c), Some(t)) => le(t, c),
            _ => true,
        };
        let norms_ok = self.members.iter().all(|mem| match mem {
            Distribution::GaussianMixture(g) => {
                g.means().iter().all(|mu| l2_norm(mu) <= g.norm_bound() * (1.0 + 1e-12))
            }
            _ => true,
        });
        Ok(VerificationReport {
            members: m,
            pairs: m * (m - 1) / 2,
            min_loss,
            min_tv,
            max_tv,
            max_kl: finite(stats.max_kl),
            separation_ok,
            kl_ok,
            tv_ok,
            passed: separation_ok && kl_ok && tv_ok && norms_ok,
        })
    }
}

fn code_opts(max_members: Option<usize>) -> CodeOptions {
    match max_members {
        Some(m) => CodeOptions::with_max_words(m),
        None => CodeOptions::default(),
    }
}

fn check_alpha(alpha: f64, upper: f64, what: &str) -> Result<()> {
    if !(alpha > 0.0 && alpha < upper) {
        return invalid(format!("{what} needs 0 < alpha < {upper}, got {alpha}"));
    }
    Ok(())
}

/// Largest `alpha` accepted by [`kary_tv_packing`].
pub const KARY_TV_ALPHA_MAX: f64 = 1.0 / 48.0;

/// k-ary family `p_c(i) = (1 ± 24 alpha)/k` over a constant-weight code of weight k/2.
///
/// Pairs at codeword distance `d_H` are at TV exactly `24 alpha d_H / k`.
/// `k < 40` is accepted with the code-size guarantee waived.
pub fn kary_tv_packing(k: usize, alpha: f64, max_members: Option<usize>) -> Result<PackingFamily> {
    check_alpha(alpha, KARY_TV_ALPHA_MAX, "kary TV packing")?;
    if k < 2 || !k.is_multiple_of(2) {
        return invalid(format!("kary TV packing needs an even k >= 2, got {k}"));
    }
    let code = gv_constant_weight(k, k / 2, &code_opts(max_members))?;
    let kf = k as f64;
    let members = code
        .words()
        .iter()
        .map(|w| {
            let probs = w
                .iter()
                .map(|&b| (1.0 + 24.0 * alpha * if b == 1 { 1.0 } else { -1.0 }) / kf)
                .collect();
            ProbVector::new(probs).map(Distribution::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PackingFamily {
        family: "kary-tv".into(),
        params: json!({ "k": k, "alpha": alpha, "max_members": max_members }),
        loss: Loss::Tv,
        separation: Some(3.0 * alpha),
        kl_cap: Some(10_000.0 * alpha * alpha),
        tv_cap: Some(24.0 * alpha),
        guarantee_waived: k < 40,
        codes: vec![CodeSummary::from(&code)],
        members,
    })
}

/// k-ary family of uniform distributions on the supports of weight-l codewords,
/// `l = floor(1 / (50 alpha^2))`, separated by `1/(2 sqrt l)` in l2.
///
/// Requires `alpha >= 1/sqrt(k)`; `alpha >= 0.1` (where `l < 20`) is built with
/// the guarantee waived.
pub fn kary_l2_packing(k: usize, alpha: f64, max_members: Option<usize>) -> Result<PackingFamily> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    if alpha < 1.0 / (k as f64).sqrt() {
        return invalid(format!(
            "alpha = {alpha} is below 1/sqrt(k) = {}; use the TV packing instead",
            1.0 / (k as f64).sqrt()
        ));
    }
    let l = (1.0 / (50.0 * alpha * alpha)).floor() as usize;
    if l == 0 {
        return invalid(format!("alpha = {alpha} gives support size floor(1/(50 alpha^2)) = 0"));
    }
    let code = gv_constant_weight(k, l, &code_opts(max_members))?;
    let members = code
        .words()
        .iter()
        .map(|w| {
            let probs = w.iter().map(|&b| b as f64 / l as f64).collect();
            ProbVector::new(probs).map(Distribution::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PackingFamily {
        family: "kary-l2".into(),
        params: json!({ "k": k, "alpha": alpha, "l": l, "max_members": max_members }),
        loss: Loss::L2,
        separation: Some(1.0 / (2.0 * (l as f64).sqrt())),
        kl_cap: None,
        tv_cap: Some(1.0),
        guarantee_waived: alpha >= 0.1 || l < 20,
        codes: vec![CodeSummary::from(&code)],
        members,
    })
}

/// One k-ary marginal per inner codeword, perturbed by `alpha/(k sqrt d)`.
fn product_marginal(word: &[u32], d: usize, alpha: f64, balanced: bool) -> Result<ProbVector> {
    let k = word.len() as f64;
    let delta = alpha / (k * (d as f64).sqrt());
    let probs: Vec<f64> = word
        .iter()
        .map(|&b| match (b, balanced) {
            (1, _) => 1.0 / k + delta,
            (_, true) => 1.0 / k - delta,
            (_, false) => 1.0 / k,
        })
        .collect();
    if balanced {
        ProbVector::new(probs)
    } else {
        let s: f64 = probs.iter().sum();
        ProbVector::new(probs.into_iter().map(|x| x / s).collect())
    }
}

/// (k,d)-product family: inner constant-weight code over [k] gives h marginals,
/// outer h-ary code of length d picks one marginal per coordinate.
///
/// `balanced` subtracts the perturbation on zero bits so each marginal sums to
/// one; otherwise the one-bit-only perturbation is renormalized.
/// `max_members` caps both the inner and the outer code.
pub fn product_packing(
    k: usize,
    d: usize,
    alpha: f64,
    balanced: bool,
    max_members: Option<usize>,
) -> Result<PackingFamily> {
    check_alpha(alpha, 0.1, "product packing")?;
    if k < 2 || !k.is_multiple_of(2) {
        return invalid(format!("product packing needs an even k >= 2, got {k}"));
    }
    if d < 2 {
        return invalid(format!("product packing needs d >= 2, got {d}"));
    }
    let inner = gv_constant_weight(k, k / 2, &code_opts(max_members))?;
    let h = inner.len() as u32;
    if h < 2 {
        return Err(Error::Infeasible("inner code has fewer than two words".into()));
    }
    let marginals = inner
        .words()
        .iter()
        .map(|w| product_marginal(w, d, alpha, balanced))
        .collect::<Result<Vec<_>>>()?;
    let outer = gv_qary(h, d, &code_opts(max_members))?;
    let members = outer
        .words()
        .iter()
        .map(|b| ProductDist::new(b.iter().map(|&s| marginals[s as usize].clone()).collect()).map(Distribution::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(PackingFamily {
        family: "product".into(),
        params: json!({ "k": k, "d": d, "alpha": alpha, "balanced": balanced, "max_members": max_members }),
        loss: Loss::Tv,
        separation: None,
        kl_cap: Some(4.0 * alpha * alpha),
        tv_cap: Some(2.0 * 2f64.sqrt() * alpha),
        guarantee_waived: k < 40 || h < 16,
        codes: vec![CodeSummary::from(&inner), CodeSummary::from(&outer)],
        members,
    })
}

/// Smallest mean-norm bound accepted by [`gaussian_mixture_packing`].
pub fn gmix_radius_threshold(k: usize, d: usize, alpha: f64) -> f64 {
    let log_term = (8.0 * k as f64 / alpha).ln();
    if k <= d {
        (64.0 * log_term).sqrt()
    } else {
        (k as f64).powf(1.0 / d as f64) * (64.0 * d as f64 * log_term).sqrt()
    }
}

const CASE_B_ATTEMPTS: usize = 1_000_000;

/// Greedy packing: seeded uniform points of the `radius` ball, each kept when
/// farther than `sep` from all kept points.
fn ball_packing(count: usize, d: usize, radius: f64, sep: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = seeded(seed);
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(count);
    for _ in 0..CASE_B_ATTEMPTS {
        if kept.len() == count {
            return Ok(kept);
        }
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = l2_norm(&dir);
        if norm == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        let v: Vec<f64> = dir.iter().map(|x| x * r / norm).collect();
        if kept
            .iter()
            .all(|u| u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > sep)
        {
            kept.push(v);
        }
    }
    if kept.len() == count {
        Ok(kept)
    } else {
        Err(Error::Infeasible(format!(
            "found only {} of {count} points at separation {sep} in a ball of radius {radius}",
            kept.len()
        )))
    }
}

/// Equal-weight mixtures of k identity-covariance Gaussians in `R^d`.
///
/// Inner means `(alpha/sqrt d) c` come from a weight-d/2 binary code; an outer
/// h-ary code of length k picks the inner mean for each component. Component j
/// is shifted by `(R/2) e_j` when `k <= d`, otherwise by the j-th point of a
/// seeded greedy packing of the `R/3` ball.
pub fn gaussian_mixture_packing(
    k: usize,
    d: usize,
    alpha: f64,
    radius: f64,
    max_members: Option<usize>,
    seed: u64,
) -> Result<PackingFamily> {
    check_alpha(alpha, 1.0, "Gaussian mixture packing")?;
    if k < 2 || d < 2 {
        return invalid(format!(
            "Gaussian mixture packing needs k >= 2 and d >= 2, got k={k}, d={d}"
        ));
    }
    let threshold = gmix_radius_threshold(k, d, alpha);
    if !(radius >= threshold) {
        return invalid(format!("R = {radius} is below the required {threshold}"));
    }
    let inner = gv_constant_weight(d, d / 2, &code_opts(max_members))?;
    let h = inner.len() as u32;
    if h < 2 {
        return Err(Error::Infeasible("inner code has fewer than two words".into()));
    }
    let scale = alpha / (d as f64).sqrt();
    let inner_means: Vec<Vec<f64>> = inner
        .words()
        .iter()
        .map(|w| w.iter().map(|&b| scale * b as f64).collect())
        .collect();
    let shifts: Vec<Vec<f64>> = if k <= d {
        (0..k)
            .map(|j| {
                let mut e = vec![0.0; d];
                e[j] = radius / 2.0;
                e
            })
            .collect()
    } else {
        let r = (16.0 * d as f64 * (8.0 * k as f64 / alpha).ln()).sqrt();
        ball_packing(k, d, radius / 3.0, r, seed)?
    };
    let outer = gv_qary(h, k, &code_opts(max_members))?;
    let weights = vec![1.0 / k as f64; k];
    let members = outer
        .words()
        .iter()
        .map(|b| {
            let means = b
                .iter()
                .zip(&shifts)
                .map(|(&s, v)| inner_means[s as usize].iter().zip(v).map(|(a, c)| a + c).collect())
                .collect();
            GaussianMixtureSpec::new(weights.clone(), means, radius).map(Distribution::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PackingFamily {
        family: "gmix".into(),
        params: json!({ "k": k, "d": d, "alpha": alpha, "R": radius, "max_members": max_members, "seed": seed }),
        loss: Loss::Tv,
        separation: None,
        kl_cap: Some(4.0 * alpha * alpha),
        tv_cap: Some(2.0 * 2f64.sqrt() * alpha),
        guarantee_waived: h < 16,
        codes: vec![CodeSummary::from(&inner), CodeSummary::from(&outer)],
        members,
    })
}

/// Which hypercube construction a [`HypercubeFamily`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum HypercubeKind {
    /// Symbols 2i, 2i+1 (0-based) carry `(1 ± 10 e_i alpha)/k`.
    AssouadKary { k: usize, alpha: f64 },
    /// Bernoulli products with means `(1 + 20 e_i alpha)/d`.
    AssouadProduct { d: usize, alpha: f64 },
}

/// A family indexed by sign vectors in `{-1, +1}^index_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypercubeFamily {
    #[serde(flatten)]
    pub kind: HypercubeKind,
    pub index_dim: usize,
    pub tau: f64,
    pub n: usize,
}

/// `alpha = 1/10` is allowed: the member masses `(1 - 10 alpha)/k` become zero
/// but stay valid distributions.
pub fn assouad_kary_family(k: usize, alpha: f64, n: usize) -> Result<HypercubeFamily> {
    if !(alpha > 0.0 && alpha <= 0.1) {
        return invalid(format!("Assouad k-ary family needs 0 < alpha <= 0.1, got {alpha}"));
    }
    if k < 2 || !k.is_multiple_of(2) {
        return invalid(format!("Assouad k-ary family needs an even k >= 2, got {k}"));
    }
    Ok(HypercubeFamily {
        kind: HypercubeKind::AssouadKary { k, alpha },
        index_dim: k / 2,
        tau: 10.0 * alpha / k as f64,
        n,
    })
}

pub fn assouad_product_family(d: usize, alpha: f64, n: usize) -> Result<HypercubeFamily> {
    check_alpha(alpha, 0.01, "Assouad product family")?;
    if d < 2 {
        return invalid(format!("Assouad product family needs d >= 2, got {d}"));
    }
    Ok(HypercubeFamily {
        kind: HypercubeKind::AssouadProduct { d, alpha },
        index_dim: d,
        tau: 20.0 * alpha / d as f64,
        n,
    })
}

fn sign_value(s: i8) -> Result<f64> {
    match s {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => invalid(format!("sign vector entries must be +1 or -1, got {s}")),
    }
}

impl HypercubeFamily {
    fn check_signs(&self, e: &[i8]) -> Result<()> {
        if e.len() != self.index_dim {
            return Err(Error::DimensionMismatch {
                left: e.len(),
                right: self.index_dim,
            });
        }
        Ok(())
    }

    /// The member indexed by the sign vector `e`.
    pub fn member(&self, e: &[i8]) -> Result<Distribution> {
        self.check_signs(e)?;
        match self.kind {
            HypercubeKind::AssouadKary { k, alpha } => {
                let mut probs = Vec::with_capacity(k);
                for &s in e {
                    let s = sign_value(s)?;
                    probs.push((1.0 + 10.0 * s * alpha) / k as f64);
                    probs.push((1.0 - 10.0 * s * alpha) / k as f64);
                }
                Ok(ProbVector::new(probs)?.into())
            }
            HypercubeKind::AssouadProduct { d, alpha } => {
                let means = e
                    .iter()
                    .map(|&s| Ok((1.0 + 20.0 * sign_value(s)? * alpha) / d as f64))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ProductDist::bernoulli(&means)?.into())
            }
        }
    }

    /// Single-record law of the mixture `p_{±i}`: the average of the members with
    /// `e_i` fixed to `sign` over uniform signs elsewhere.
    pub fn mixture_marginal(&self, i: usize, sign: i8) -> Result<Distribution> {
        if i >= self.index_dim {
            return invalid(format!("coordinate {i} out of range 0..{}", self.index_dim));
        }
        let s = sign_value(sign)?;
        match self.kind {
            HypercubeKind::AssouadKary { k, alpha } => {
                let mut probs = vec![1.0 / k as f64; k];
                probs[2 * i] = (1.0 + 10.0 * s * alpha) / k as f64;
                probs[2 * i + 1] = (1.0 - 10.0 * s * alpha) / k as f64;
                Ok(ProbVector::new(probs)?.into())
            }
            HypercubeKind::AssouadProduct { d, alpha } => {
                let mut means = vec![1.0 / d as f64; d];
                means[i] = (1.0 + 20.0 * s * alpha) / d as f64;
                Ok(ProductDist::bernoulli(&means)?.into())
            }
        }
    }

    /// Loss between two members: TV distance, exact for both constructions.
    pub fn member_tv(&self, u: &[i8], v: &[i8]) -> Result<f64> {
        match (self.member(u)?, self.member(v)?) {
            (Distribution::Kary { probs: p }, Distribution::Kary { probs: q }) => distance(&p, &q, Metric::Tv),
            (Distribution::Product { marginals: p }, Distribution::Product { marginals: q }) => {
                product_tv_exact(&p, &q, PRODUCT_ATOM_CAP)
            }
            _ => unreachable!("members of one family share a type"),
        }
    }

    /// Largest `|2 tau sum 1{u_i != v_i} - TV(p_u, p_v)|` over the given pairs;
    /// zero when the loss splits across coordinates with equality.
    pub fn decomposition_gap(&self, pairs: &[(Vec<i8>, Vec<i8>)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (u, v) in pairs {
            let diff = u.iter().zip(v).filter(|(a, b)| a != b).count() as f64;
            let tv = self.member_tv(u, v)?;
            worst = worst.max((2.0 * self.tau * diff - tv).abs());
        }
        Ok(worst)
    }
}
