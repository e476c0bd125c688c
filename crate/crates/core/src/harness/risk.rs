use std::time::Instant;

use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{BandResult, EstimatorSpec, ExperimentConfig};
use super::{BuiltFamily, FamilyMembers};
use crate::bounds::{assouad_bound, fano_bound, le_cam_bound};
use crate::dist::{distance, product_tv_exact, Metric, PrivacyBudget, ProbVector, ProductDist, PRODUCT_ATOM_CAP};
use crate::error::{invalid, Error, Result};
use crate::mechanisms::{laplace_from_frequencies, EstimatorKind};
use crate::packings::{HypercubeKind, Loss, EXHAUSTIVE_MEMBER_CAP};
use crate::rng::{laplace, mean_stderr, stream, StreamRng};

/// `git describe` of the source tree this crate was built from.
pub const GIT_DESCRIBE: &str = env!("DPMINIMAX_GIT_DESCRIBE");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRisk {
    pub member: usize,
    pub n: usize,
    pub trials: usize,
    pub mean_loss: f64,
    pub stderr: f64,
}

/// Lower bounds evaluated at the family's parameters and the estimator's budget.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchedBounds {
    pub lecam: Option<f64>,
    pub fano: Option<f64>,
    pub assouad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NRisk {
    pub n: usize,
    /// Largest member mean loss at this n.
    pub max_risk: f64,
    pub argmax_member: usize,
    /// Standard error of the member attaining `max_risk`.
    pub stderr: f64,
    pub bounds: MatchedBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub git_describe: String,
    pub version: String,
    pub wall_time_s: f64,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub schema: u32,
    pub family: String,
    pub loss: Loss,
    pub estimator: EstimatorSpec,
    pub seed: u64,
    pub trials: usize,
    pub members: usize,
    pub rows: Vec<MemberRisk>,
    pub per_n: Vec<NRisk>,
    #[serde(default)]
    pub bands: Vec<BandResult>,
    pub metadata: RunMetadata,
}

impl RiskReport {
    pub fn at(&self, n: usize) -> Option<&NRisk> {
        self.per_n.iter().find(|r| r.n == n)
    }

    pub fn all_bands_pass(&self) -> bool {
        self.bands.iter().all(|b| b.pass)
    }
}

/// Multinomial counts of `n` draws from `p` by conditional binomials.
fn multinomial<R: Rng + ?Sized>(p: &ProbVector, n: usize, rng: &mut R) -> Vec<u64> {
    let probs = p.probs();
    let mut counts = vec![0u64; probs.len()];
    let mut left = n as u64;
    let mut mass = 1.0;
    for (i, &pi) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = left;
            break;
        }
        let q = (pi / mass).clamp(0.0, 1.0);
        let c = Binomial::new(left, q).expect("q in [0, 1]").sample(rng);
        counts[i] = c;
        left -= c;
        mass -= pi;
    }
    counts
}

/// Draws one dataset's sufficient statistics and scores the estimator on them.
pub(crate) struct Engine<'a> {
    pub members: &'a FamilyMembers,
    pub kind: EstimatorKind,
    pub epsilon: Option<f64>,
    pub loss: Loss,
    pub trials: usize,
    pub seed: u64,
    /// Common random numbers: trial streams do not depend on n.
    pub common_streams: bool,
}

impl Engine<'_> {
    fn check(&self) -> Result<()> {
        if self.kind == EstimatorKind::Laplace && !self.epsilon.is_some_and(|e| e > 0.0) {
            return invalid("the Laplace estimator needs epsilon > 0");
        }
        if matches!(self.members, FamilyMembers::Bernoulli(_)) && self.loss != Loss::Tv {
            return Err(Error::Unsupported("Bernoulli product families use TV loss".into()));
        }
        Ok(())
    }

    fn kary_loss(&self, p: &ProbVector, n: usize, rng: &mut StreamRng) -> Result<f64> {
        let counts = multinomial(p, n, rng);
        let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let est = match self.kind {
            EstimatorKind::Empirical => ProbVector::new(freqs)?,
            EstimatorKind::Laplace => laplace_from_frequencies(&freqs, n, self.epsilon.unwrap_or(0.0), rng)?,
        };
        distance(&est, p, self.loss.metric())
    }

    /// Coordinate-wise mean estimate; one record moves the mean vector by at
    /// most d/n in l1, so Laplace(d/(n eps)) noise per coordinate is eps-DP.
    fn bernoulli_loss(&self, p: &ProductDist, n: usize, rng: &mut StreamRng) -> Result<f64> {
        let d = p.d();
        let means: Vec<f64> = p
            .marginals()
            .iter()
            .map(|m| {
                let c = Binomial::new(n as u64, m.probs()[1])
                    .expect("mean in [0, 1]")
                    .sample(rng);
                let mut mu = c as f64 / n as f64;
                if self.kind == EstimatorKind::Laplace {
                    mu += laplace(rng, d as f64 / (n as f64 * self.epsilon.unwrap_or(0.0)));
                }
                mu.clamp(0.0, 1.0)
            })
            .collect();
        product_tv_exact(&ProductDist::bernoulli(&means)?, p, PRODUCT_ATOM_CAP)
    }

    fn trial_rng(&self, member: usize, n: usize, trial: usize) -> StreamRng {
        let n_index = if self.common_streams { u64::MAX } else { n as u64 };
        stream(self.seed, &[member as u64, n_index, trial as u64])
    }

    /// Mean loss and standard error for each member at sample size `n`.
    pub fn member_risks(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        self.check()?;
        if n == 0 {
            return invalid("sample size must be at least 1");
        }
        let m = self.members.len();
        let t = self.trials;
        let losses = (0..m * t)
            .into_par_iter()
            .map(|idx| {
                let (member, trial) = (idx / t, idx % t);
                let mut rng = self.trial_rng(member, n, trial);
                match self.members {
                    FamilyMembers::Kary(ps) => self.kary_loss(&ps[member], n, &mut rng),
                    FamilyMembers::Bernoulli(ps) => self.bernoulli_loss(&ps[member], n, &mut rng),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(losses.chunks(t).map(mean_stderr).collect())
    }
}

struct PairSummary {
    /// (loss distance, TV) per unordered pair.
    pairs: Vec<(f64, f64)>,
    min_sep: f64,
    max_kl: f64,
    max_tv: f64,
}

fn kary_pairs(members: &[ProbVector], loss: Loss) -> Result<Option<PairSummary>> {
    let m = members.len();
    if m < 2 {
        return Ok(None);
    }
    let per_i = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(m - i - 1);
            let mut max_kl: f64 = 0.0;
            for j in i + 1..m {
                let (p, q) = (&members[i], &members[j]);
                let tv = distance(p, q, Metric::Tv)?;
                let sep = distance(p, q, loss.metric())?;
                max_kl = max_kl.max(distance(p, q, Metric::Kl)?).max(distance(q, p, Metric::Kl)?);
                out.push((sep, tv));
            }
            Ok((out, max_kl))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    let mut max_kl: f64 = 0.0;
    for (v, kl) in per_i {
        pairs.extend(v);
        max_kl = max_kl.max(kl);
    }
    let min_sep = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_tv = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(Some(PairSummary {
        pairs,
        min_sep,
        max_kl,
        max_tv,
    }))
}

/// Lower bounds at sample size n.
///
/// Le Cam: best pair, separation/2 times the two-point bound with the n-fold
/// TV replaced by its upper bound `min(1, n tv)` and the maximal coupling
/// distance `D = n tv`. Fano (pure DP only): smallest separation, KL cap
/// `n max KL`, `D = n max TV`. Assouad (TV loss): the hypercube's own
/// coupling distance.
fn matched_bounds(
    family: &BuiltFamily,
    pairs: Option<&PairSummary>,
    loss: Loss,
    budget: PrivacyBudget,
    n: usize,
) -> Result<MatchedBounds> {
    let nf = n as f64;
    let mut out = MatchedBounds::default();
    if let Some(ps) = pairs {
        let lecam = ps
            .pairs
            .par_iter()
            .map(|&(sep, tv)| {
                let d = nf * tv;
                le_cam_bound(d.min(1.0), d, budget).map(|r| sep / 2.0 * r.value)
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        out.lecam = Some(lecam);
        if budget.delta == 0.0 {
            let m = family.members.len() as f64;
            let f = fano_bound(ps.min_sep, nf * ps.max_kl, nf * ps.max_tv, m, budget.epsilon)?;
            out.fano = Some(f.value);
        }
    }
    if let (Some(cube), Loss::Tv) = (family.hypercube, loss) {
        let d = match cube.kind {
            HypercubeKind::AssouadKary { k, alpha } => 20.0 * alpha * nf / k as f64,
            HypercubeKind::AssouadProduct { d, alpha } => 40.0 * alpha * nf / d as f64,
        };
        out.assouad = Some(assouad_bound(cube.index_dim, cube.tau, d, budget)?.value);
    }
    Ok(out)
}

pub(crate) fn validate_n_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::Schema("n_grid must not be empty".into()));
    }
    if n_grid[0] == 0 {
        return Err(Error::Schema("n_grid entries must be positive".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Schema("n_grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Estimates, for each n in the grid and each family member, the mean loss of
/// the configured estimator, and evaluates the matched lower bounds.
///
/// The reported risk is the maximum over members for this fixed estimator,
/// which upper-bounds the minimax risk. Trial t of member m at size n draws
/// from a stream derived from `(seed, m, n, t)`, and means use pairwise
/// summation, so reports are identical for any thread count.
pub fn monte_carlo_risk(config: &ExperimentConfig) -> Result<RiskReport> {
    let start = Instant::now();
    config.validate()?;
    let family = config.family.build()?;
    let m = family.members.len();
    if m > EXHAUSTIVE_MEMBER_CAP {
        return Err(Error::Infeasible(format!(
            "{m} members exceeds the cap {EXHAUSTIVE_MEMBER_CAP}; set max_members"
        )));
    }
    let engine = Engine {
        members: &family.members,
        kind: config.estimator.kind,
        epsilon: config.estimator.epsilon,
        loss: config.loss,
        trials: config.trials,
        seed: config.seed,
        common_streams: false,
    };
    let pairs = match &family.members {
        FamilyMembers::Kary(ps) => kary_pairs(ps, config.loss)?,
        FamilyMembers::Bernoulli(_) => None,
    };
    let budget = config.estimator.budget()?;

    let mut rows = Vec::with_capacity(m * config.n_grid.len());
    let mut per_n = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let risks = engine.member_risks(n)?;
        let (argmax, &(max_risk, stderr)) = risks
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, &(f64, f64))>, (i, r)| match best {
                Some((_, b)) if b.0 >= r.0 => best,
                _ => Some((i, r)),
            })
            .expect("at least one member");
        rows.extend(
            risks
                .iter()
                .enumerate()
                .map(|(member, &(mean_loss, stderr))| MemberRisk {
                    member,
                    n,
                    trials: config.trials,
                    mean_loss,
                    stderr,
                }),
        );
        per_n.push(NRisk {
            n,
            max_risk,
            argmax_member: argmax,
            stderr,
            bounds: matched_bounds(&family, pairs.as_ref(), config.loss, budget, n)?,
        });
    }
    let mut report = RiskReport {
        schema: super::CONFIG_SCHEMA,
        family: family.name,
        loss: config.loss,
        estimator: config.estimator.clone(),
        seed: config.seed,
        trials: config.trials,
        members: m,
        rows,
        per_n,
        bands: Vec::new(),
        metadata: RunMetadata {
            git_describe: GIT_DESCRIBE.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
            threads: rayon::current_num_threads(),
        },
    };
    report.bands = config
        .bands
        .iter()
        .map(|b| b.evaluate(&report))
        .collect::<Result<_>>()?;
    report.metadata.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn multinomial_counts_sum_to_n() {
        let p = ProbVector::new(vec![0.1, 0.0, 0.6, 0.3]).unwrap();
        let mut rng = seeded(1);
        for n in [1, 7, 1000] {
            let c = multinomial(&p, n, &mut rng);
            assert_eq!(c.iter().sum::<u64>(), n as u64);
            assert_eq!(c[1], 0);
        }
    }

    #[test]
    fn multinomial_means() {
        let p = ProbVector::new(vec![0.2, 0.5, 0.3]).unwrap();
        let mut rng = seeded(2);
        let mut tot = [0u64; 3];
        for _ in 0..2000 {
            let c = multinomial(&p, 100, &mut rng);
            for (t, x) in tot.iter_mut().zip(&c) {
                *t += x;
            }
        }
        for (t, q) in tot.iter().zip(p.probs()) {
            let f = *t as f64 / 200_000.0;
            assert!((f - q).abs() < 0.005, "{f}");
        }
    }

    #[test]
    fn grid_validation() {
        assert!(validate_n_grid(&[]).is_err());
        assert!(validate_n_grid(&[0, 5]).is_err());
        assert!(validate_n_grid(&[5, 5]).is_err());
        assert!(validate_n_grid(&[1, 2, 10]).is_ok());
    }
}
