use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dpminimax_core::bounds::{self, TableParams};
use dpminimax_core::couplings::{CouplingSampler, Side};
use dpminimax_core::harness::{self, FamilyDescriptor, ScalingConfig};
use dpminimax_core::mechanisms::{EstimatorConfig, EstimatorKind, FiniteMechanism, NeighborRelation};
use dpminimax_core::rng::seeded;
use dpminimax_core::{
    assouad_kary_coupling, check_dp, empirical_hamming, group_dp_check, gv_constant_weight, gv_qary, marginal_check,
    maximal_coupling_iid, min_distance, product_flip_coupling, Code, CodeOptions, Dataset, Error, PackingFamily,
    PrivacyBudget, ProbVector, Problem,
};

/// Exit status when a declared band or check fails.
const EXIT_FAIL: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "dpminimax",
    version,
    about = "Private minimax bounds, hard instances and risk experiments"
)]
struct Cli {
    /// Seed for randomized commands; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path; JSON goes to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate lower bounds and sample-complexity expressions.
    Bounds {
        #[command(subcommand)]
        which: BoundsCmd,
    },
    /// Greedy codes.
    Codes {
        #[command(subcommand)]
        which: CodesCmd,
    },
    /// Packing families.
    Pack {
        #[command(subcommand)]
        which: PackCmd,
    },
    /// Couplings and their expected Hamming distance.
    Couple {
        #[command(subcommand)]
        which: CoupleCmd,
    },
    /// Estimators and the finite-mechanism auditor.
    Mech {
        #[command(subcommand)]
        which: MechCmd,
    },
    /// Monte Carlo risk for a config, printed without writing report files.
    Risk { config: PathBuf },
    /// Run a config and write its JSON and CSV reports.
    Experiment { config: PathBuf },
    /// Required-n scaling check from a JSON config.
    Scaling { config: PathBuf },
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

impl BudgetArgs {
    fn budget(&self) -> Result<PrivacyBudget, Error> {
        PrivacyBudget::new(self.eps, self.delta)
    }
}

#[derive(Subcommand)]
enum BoundsCmd {
    Lecam {
        #[arg(long)]
        tv: f64,
        #[arg(long)]
        d: f64,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    Fano {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        eps: f64,
    },
    Assouad {
        #[arg(long)]
        k_index: usize,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        d: f64,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Integer sample thresholds for a packing with ln M = log-m.
    Corollary {
        #[arg(long)]
        alpha_sep: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        log_m: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        tau: f64,
    },
    Packing {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        d: f64,
    },
    Group {
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        t: u32,
    },
    Table {
        #[arg(long)]
        problem: Problem,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "R")]
        radius: Option<f64>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CodeKind {
    Cw,
    Qary,
}

#[derive(Subcommand)]
enum CodesCmd {
    Gen {
        #[arg(long)]
        kind: CodeKind,
        /// Length (constant weight).
        #[arg(long)]
        k: Option<usize>,
        /// Weight (constant weight).
        #[arg(long)]
        l: Option<usize>,
        /// Alphabet size (q-ary).
        #[arg(long)]
        h: Option<u32>,
        /// Length (q-ary).
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        max_words: Option<usize>,
        /// Scan candidates in a seeded random order.
        #[arg(long)]
        randomized: bool,
    },
    /// Recompute the minimum distance of a code file.
    Verify { file: PathBuf },
}

#[derive(Subcommand)]
enum PackCmd {
    /// Build a packing from flags, or from JSON text or a file given with --descriptor.
    Gen {
        #[arg(long, required_unless_present = "descriptor")]
        family: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long = "R")]
        radius: Option<f64>,
        #[arg(long)]
        max_members: Option<usize>,
        /// Product family without the balancing constraint.
        #[arg(long)]
        unbalanced: bool,
        /// Descriptor JSON text or file, e.g. {"family": "kary-tv", "k": 8, "alpha": 0.02}.
        #[arg(long, conflicts_with = "family")]
        descriptor: Option<String>,
    },
    Verify {
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingKind {
    Maximal,
    AssouadKary,
    #[value(alias = "product-flip")]
    AssouadProduct,
}

#[derive(Subcommand)]
enum CoupleCmd {
    Run {
        #[arg(long)]
        kind: CouplingKind,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        q: Vec<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        i: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Trials for the marginal TV check on each side (default: --trials).
        #[arg(long)]
        marginal_trials: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EstKind {
    Empirical,
    Laplace,
}

#[derive(Subcommand)]
enum MechCmd {
    /// Estimate a k-ary distribution from a dataset file or a comma list of symbols.
    Estimate {
        #[arg(long)]
        kind: EstKind,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        eps: Option<f64>,
        /// Dataset JSON file or a comma list of symbols.
        #[arg(long = "in")]
        input: String,
    },
    /// Exact delta of a tabulated mechanism; with --group, the group-privacy violation.
    Audit {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Fail (exit 1) when the audited delta exceeds this.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        group: Option<u32>,
    },
}

fn read(path: &Path) -> Result<String, Error> {
    Ok(fs::read_to_string(path)?)
}

fn emit(value: &Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, Error> {
    v.ok_or_else(|| Error::InvalidInput(format!("--{name} is required here")))
}

fn code_json(code: &Code) -> Result<Value, Error> {
    let mut v = serde_json::to_value(code)?;
    v["verified_min_distance"] = json!(min_distance(code)?);
    Ok(v)
}

fn coupling_report<S: CouplingSampler>(
    s: &S,
    trials: usize,
    marginal: Option<usize>,
    seed: u64,
) -> Result<Value, Error> {
    let mut rng = seeded(seed);
    let (mean, stderr) = empirical_hamming(s, trials, &mut rng)?;
    let m = marginal.unwrap_or(trials);
    let left = marginal_check(s, Side::Left, m, &mut rng)?;
    let right = marginal_check(s, Side::Right, m, &mut rng)?;
    Ok(json!({
        "n": s.n(),
        "bound": s.expected_hamming(),
        "mean": mean,
        "stderr": stderr,
        "trials": trials,
        "marginal_tv": left.max(right),
    }))
}

fn parse_dataset(data: &str) -> Result<Dataset, Error> {
    let path = Path::new(data);
    if path.exists() {
        return Ok(serde_json::from_str(&read(path)?)?);
    }
    let symbols = data
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidInput(format!("data is neither a file nor a symbol list: {e}")))?;
    Ok(Dataset::Discrete { symbols })
}

/// Runs a command; `Ok(false)` means a declared check failed.
fn run(cli: &Cli) -> Result<bool, Error> {
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Bounds { which } => {
            let v = match which {
                BoundsCmd::Lecam { tv, d, budget } => {
                    serde_json::to_value(bounds::le_cam_bound(*tv, *d, budget.budget()?)?)?
                }
                BoundsCmd::Fano { alpha, beta, d, m, eps } => {
                    serde_json::to_value(bounds::fano_bound(*alpha, *beta, *d, *m, *eps)?)?
                }
                BoundsCmd::Assouad {
                    k_index,
                    tau,
                    d,
                    budget,
                } => serde_json::to_value(bounds::assouad_bound(*k_index, *tau, *d, budget.budget()?)?)?,
                BoundsCmd::Corollary {
                    alpha_sep,
                    beta,
                    gamma,
                    log_m,
                    eps,
                    tau,
                } => serde_json::to_value(bounds::fano_sample_complexity(
                    *alpha_sep, *beta, *gamma, *log_m, *eps, *tau,
                )?)?,
                BoundsCmd::Packing { m, d } => json!({ "value": bounds::packing_bound(*m, *d)? }),
                BoundsCmd::Group { budget, t } => {
                    let (multiplier, additive) = bounds::group_privacy_factor(budget.budget()?, *t);
                    json!({ "multiplier": multiplier, "additive": additive })
                }
                BoundsCmd::Table {
                    problem,
                    k,
                    d,
                    alpha,
                    radius,
                    budget,
                } => {
                    let params = TableParams {
                        k: *k,
                        d: *d,
                        alpha: *alpha,
                        radius: *radius,
                    };
                    serde_json::to_value(bounds::sample_complexity_table(*problem, params, budget.budget()?)?)?
                }
            };
            emit(&v, out)?;
            Ok(true)
        }
        Command::Codes { which } => match which {
            CodesCmd::Gen {
                kind,
                k,
                l,
                h,
                d,
                max_words,
                randomized,
            } => {
                let opts = if *randomized {
                    CodeOptions::randomized(seed, *max_words)
                } else {
                    CodeOptions {
                        max_words: *max_words,
                        ..CodeOptions::default()
                    }
                };
                let code = match kind {
                    CodeKind::Cw => gv_constant_weight(need(*k, "k")?, need(*l, "l")?, &opts)?,
                    CodeKind::Qary => gv_qary(need(*h, "h")?, need(*d, "d")?, &opts)?,
                };
                emit(&code_json(&code)?, out)?;
                Ok(true)
            }
            CodesCmd::Verify { file } => {
                let code: Code = serde_json::from_str(&read(file)?)?;
                let v = code_json(&code)?;
                let ok = min_distance(&code)? >= code.claimed_min_distance();
                emit(&v, out)?;
                Ok(ok)
            }
        },
        Command::Pack { which } => match which {
            PackCmd::Gen {
                family,
                k,
                d,
                alpha,
                radius,
                max_members,
                unbalanced,
                descriptor,
            } => {
                let desc: FamilyDescriptor = match (descriptor, family) {
                    (Some(descriptor), _) => {
                        let text = if Path::new(descriptor).exists() {
                            read(Path::new(descriptor))?
                        } else {
                            descriptor.clone()
                        };
                        serde_json::from_str(&text)?
                    }
                    (None, family) => {
                        let mut v = json!({ "family": family, "k": k, "d": d, "alpha": alpha, "R": radius,
                            "max_members": max_members, "balanced": !unbalanced, "seed": seed });
                        if let Value::Object(m) = &mut v {
                            m.retain(|_, x| !x.is_null());
                        }
                        serde_json::from_value(v)?
                    }
                };
                let fam = desc.packing()?;
                emit(&serde_json::to_value(&fam)?, out)?;
                Ok(true)
            }
            PackCmd::Verify { file } => {
                let fam: PackingFamily = serde_json::from_str(&read(file)?)?;
                let report = fam.verify()?;
                emit(&serde_json::to_value(&report)?, out)?;
                Ok(report.passed)
            }
        },
        Command::Couple {
            which:
                CoupleCmd::Run {
                    kind,
                    p,
                    q,
                    k,
                    d,
                    alpha,
                    n,
                    i,
                    trials,
                    marginal_trials,
                },
        } => {
            let v = match kind {
                CouplingKind::Maximal => {
                    let c = maximal_coupling_iid(&ProbVector::new(p.clone())?, &ProbVector::new(q.clone())?, *n)?;
                    coupling_report(&c, *trials, *marginal_trials, seed)?
                }
                CouplingKind::AssouadKary => {
                    let c = assouad_kary_coupling(need(*k, "k")?, *alpha, *n, *i)?;
                    coupling_report(&c, *trials, *marginal_trials, seed)?
                }
                CouplingKind::AssouadProduct => {
                    let c = product_flip_coupling(need(*d, "d")?, *alpha, *n, *i)?;
                    coupling_report(&c, *trials, *marginal_trials, seed)?
                }
            };
            emit(&v, out)?;
            Ok(true)
        }
        Command::Mech { which } => match which {
            MechCmd::Estimate { kind, k, eps, input } => {
                let (kind, budget) = match kind {
                    EstKind::Empirical => (EstimatorKind::Empirical, PrivacyBudget::new(f64::INFINITY, 0.0)?),
                    EstKind::Laplace => (EstimatorKind::Laplace, PrivacyBudget::pure(need(*eps, "eps")?)?),
                };
                let est = EstimatorConfig::new(kind, *k, budget, seed)?;
                let p = est.estimate(&parse_dataset(input)?, &mut seeded(seed))?;
                emit(&json!({ "estimate": p.probs() }), out)?;
                Ok(true)
            }
            MechCmd::Audit {
                mech,
                eps,
                delta,
                group,
            } => {
                let mech: FiniteMechanism = serde_json::from_str(&read(mech)?)?;
                let (v, ok) = match group {
                    Some(t) => {
                        let worst = group_dp_check(&mech, *eps, delta.unwrap_or(0.0), *t)?;
                        (json!({ "t": t, "worst_violation": worst }), worst <= 0.0)
                    }
                    None => {
                        let d = check_dp(&mech, &NeighborRelation::HammingOne, *eps)?;
                        (
                            json!({ "epsilon": eps, "delta": d }),
                            delta.is_none_or(|bound| d <= bound),
                        )
                    }
                };
                emit(&v, out)?;
                Ok(ok)
            }
        },
        Command::Risk { config } => {
            let mut cfg = harness::parse_config(&read(config)?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let report = harness::monte_carlo_risk(&cfg)?;
            emit(&serde_json::to_value(&report)?, out)?;
            Ok(report.all_bands_pass())
        }
        Command::Experiment { config } => {
            let mut cfg = harness::parse_config(&read(config)?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let outcome = harness::run_config(&cfg, config, out)?;
            for b in &outcome.report.bands {
                eprintln!("{} {}", if b.pass { "PASS" } else { "FAIL" }, b.detail);
            }
            println!("{}", outcome.json_path.display());
            println!("{}", outcome.csv_path.display());
            Ok(outcome.report.all_bands_pass())
        }
        Command::Scaling { config } => {
            let mut cfg: ScalingConfig = serde_json::from_str(&read(config)?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let verdict = harness::scaling_check(&cfg)?;
            emit(&serde_json::to_value(&verdict)?, out)?;
            Ok(verdict.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
