//! Monte Carlo risk estimation, experiments against matched lower bounds, and
//! sample-complexity scaling checks.

mod experiment;
mod risk;
mod scaling;

pub use experiment::{
    parse_config, report_csv, run_config, run_experiment, Band, BandResult, BoundName, EstimatorSpec, ExperimentConfig,
    ExperimentOutcome, CONFIG_SCHEMA,
};
pub use risk::{monte_carlo_risk, MatchedBounds, MemberRisk, NRisk, RiskReport, RunMetadata, GIT_DESCRIBE};
pub use scaling::{scaling_check, RatioVerdict, ScalingAxis, ScalingConfig, ScalingProblem, ScalingVerdict};

use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, ProbVector, ProductDist};
use crate::error::{invalid, Error, Result};
use crate::packings::{
    assouad_kary_family, assouad_product_family, gaussian_mixture_packing, kary_l2_packing, kary_tv_packing,
    product_packing, HypercubeFamily, PackingFamily, EXHAUSTIVE_MEMBER_CAP,
};

/// A family of distributions named by its construction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilyDescriptor {
    KaryTv {
        k: usize,
        alpha: f64,
        #[serde(default)]
        max_members: Option<usize>,
    },
    KaryL2 {
        k: usize,
        alpha: f64,
        #[serde(default)]
        max_members: Option<usize>,
    },
    Product {
        k: usize,
        d: usize,
        alpha: f64,
        #[serde(default = "default_true")]
        balanced: bool,
        #[serde(default)]
        max_members: Option<usize>,
    },
    Gmix {
        k: usize,
        d: usize,
        alpha: f64,
        #[serde(rename = "R")]
        radius: f64,
        #[serde(default)]
        max_members: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    AssouadKary {
        k: usize,
        alpha: f64,
        #[serde(default)]
        max_members: Option<usize>,
    },
    AssouadProduct {
        d: usize,
        alpha: f64,
        #[serde(default)]
        max_members: Option<usize>,
    },
    /// Explicitly listed k-ary distributions.
    Explicit { members: Vec<ProbVector> },
}

fn default_true() -> bool {
    true
}

/// Members of a family in the form the risk engine samples from.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyMembers {
    Kary(Vec<ProbVector>),
    /// Bernoulli products; symbol 1 of each attribute means "one".
    Bernoulli(Vec<ProductDist>),
}

impl FamilyMembers {
    pub fn len(&self) -> usize {
        match self {
            FamilyMembers::Kary(m) => m.len(),
            FamilyMembers::Bernoulli(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A constructed family plus whatever structure the matched bounds need.
#[derive(Clone, Debug)]
pub struct BuiltFamily {
    pub name: String,
    pub members: FamilyMembers,
    pub hypercube: Option<HypercubeFamily>,
    pub packing: Option<PackingFamily>,
}

/// All sign vectors of the cube in a fixed order: member m has `e_i = -1`
/// exactly when bit i of m is set.
fn sign_vectors(dim: usize, max_members: Option<usize>) -> Result<Vec<Vec<i8>>> {
    let total = if dim >= 63 { u64::MAX } else { 1u64 << dim };
    let count = match max_members {
        Some(m) => (m as u64).min(total),
        None if total <= EXHAUSTIVE_MEMBER_CAP as u64 => total,
        None => {
            return Err(Error::Infeasible(format!(
                "2^{dim} sign vectors exceed {EXHAUSTIVE_MEMBER_CAP} members; set max_members"
            )))
        }
    };
    Ok((0..count)
        .map(|m| (0..dim).map(|i| if (m >> i) & 1 == 1 { -1 } else { 1 }).collect())
        .collect())
}

fn cube_members(cube: &HypercubeFamily, max_members: Option<usize>) -> Result<Vec<Distribution>> {
    sign_vectors(cube.index_dim, max_members)?
        .iter()
        .map(|e| cube.member(e))
        .collect()
}

fn kary_only(members: Vec<Distribution>) -> Result<FamilyMembers> {
    members
        .into_iter()
        .map(|m| match m {
            Distribution::Kary { probs } => Ok(probs),
            _ => Err(Error::Unsupported("expected k-ary members".into())),
        })
        .collect::<Result<Vec<_>>>()
        .map(FamilyMembers::Kary)
}

impl FamilyDescriptor {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyDescriptor::KaryTv { .. } => "kary-tv",
            FamilyDescriptor::KaryL2 { .. } => "kary-l2",
            FamilyDescriptor::Product { .. } => "product",
            FamilyDescriptor::Gmix { .. } => "gmix",
            FamilyDescriptor::AssouadKary { .. } => "assouad-kary",
            FamilyDescriptor::AssouadProduct { .. } => "assouad-product",
            FamilyDescriptor::Explicit { .. } => "explicit",
        }
    }

    /// Builds the family. Product and Gaussian-mixture packings build but the
    /// risk engine has no estimator for them.
    pub fn build(&self) -> Result<BuiltFamily> {
        let name = self.name().to_string();
        let from_packing = |fam: PackingFamily| -> Result<BuiltFamily> {
            Ok(BuiltFamily {
                name: name.clone(),
                members: kary_only(fam.members.clone())?,
                hypercube: None,
                packing: Some(fam),
            })
        };
        match *self {
            FamilyDescriptor::KaryTv { k, alpha, max_members } => from_packing(kary_tv_packing(k, alpha, max_members)?),
            FamilyDescriptor::KaryL2 { k, alpha, max_members } => from_packing(kary_l2_packing(k, alpha, max_members)?),
            FamilyDescriptor::Product { .. } | FamilyDescriptor::Gmix { .. } => Err(Error::Unsupported(format!(
                "no estimator in the risk engine for the {name} family"
            ))),
            FamilyDescriptor::AssouadKary { k, alpha, max_members } => {
                let cube = assouad_kary_family(k, alpha, 0)?;
                Ok(BuiltFamily {
                    name,
                    members: kary_only(cube_members(&cube, max_members)?)?,
                    hypercube: Some(cube),
                    packing: None,
                })
            }
            FamilyDescriptor::AssouadProduct { d, alpha, max_members } => {
                let cube = assouad_product_family(d, alpha, 0)?;
                let members = cube_members(&cube, max_members)?
                    .into_iter()
                    .map(|m| match m {
                        Distribution::Product { marginals } => Ok(marginals),
                        _ => Err(Error::Unsupported("expected product members".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BuiltFamily {
                    name,
                    members: FamilyMembers::Bernoulli(members),
                    hypercube: Some(cube),
                    packing: None,
                })
            }
            FamilyDescriptor::Explicit { ref members } => {
                if members.is_empty() {
                    return invalid("explicit family has no members");
                }
                let k = members[0].k();
                if members.iter().any(|m| m.k() != k) {
                    return invalid("explicit family members differ in alphabet size");
                }
                Ok(BuiltFamily {
                    name,
                    members: FamilyMembers::Kary(members.clone()),
                    hypercube: None,
                    packing: None,
                })
            }
        }
    }

    /// The packing itself, for the families that are packings.
    pub fn packing(&self) -> Result<PackingFamily> {
        match *self {
            FamilyDescriptor::KaryTv { k, alpha, max_members } => kary_tv_packing(k, alpha, max_members),
            FamilyDescriptor::KaryL2 { k, alpha, max_members } => kary_l2_packing(k, alpha, max_members),
            FamilyDescriptor::Product {
                k,
                d,
                alpha,
                balanced,
                max_members,
            } => product_packing(k, d, alpha, balanced, max_members),
            FamilyDescriptor::Gmix {
                k,
                d,
                alpha,
                radius,
                max_members,
                seed,
            } => gaussian_mixture_packing(k, d, alpha, radius, max_members, seed),
            _ => invalid(format!("{} is not a packing family", self.name())),
        }
    }
}
