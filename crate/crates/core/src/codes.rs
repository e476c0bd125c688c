//! Greedy Gilbert–Varshamov constructions: binary constant-weight codes and
//! h-ary codes with minimum distance half their length.
//!
//! Candidates are scanned in a fixed order and a candidate is kept when it is
//! far enough from every word kept so far. When the candidate space is fully
//! enumerated this realizes the Gilbert–Varshamov counting bound. Larger spaces
//! need either a word budget (`max_words`, deterministic truncation of the
//! same scan) or the seeded randomized mode; neither certifies the size bound.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 24;
/// Upper limit on candidates examined by truncated or randomized scans.
pub const DEFAULT_SCAN_LIMIT: u64 = 1 << 32;

#[derive(Clone, Debug)]
pub struct CodeOptions {
    pub max_words: Option<usize>,
    pub enumeration_cap: u64,
    pub scan_limit: u64,
    /// Seed for the randomized mode; `None` selects the deterministic scan.
    pub random_seed: Option<u64>,
}

impl Default for CodeOptions {
    fn default() -> Self {
        Self {
            max_words: None,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            scan_limit: DEFAULT_SCAN_LIMIT,
            random_seed: None,
        }
    }
}

impl CodeOptions {
    pub fn with_max_words(max_words: usize) -> Self {
        Self {
            max_words: Some(max_words),
            ..Self::default()
        }
    }

    pub fn randomized(seed: u64, max_words: Option<usize>) -> Self {
        Self {
            max_words,
            random_seed: Some(seed),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    /// Every candidate was scanned.
    Exhaustive,
    /// The deterministic scan stopped at the word budget or scan limit.
    Truncated,
    /// Seeded random candidates, verified after the fact.
    Randomized,
}

/// A block code over `{0, .., h-1}` with a verified minimum distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodeRepr", into = "CodeRepr")]
pub struct Code {
    alphabet_size: u32,
    length: usize,
    weight: Option<usize>,
    claimed_min_distance: usize,
    words: Vec<Vec<u32>>,
    construction: Construction,
    size_bound: Option<f64>,
    certified: bool,
}

#[derive(Serialize, Deserialize)]
struct CodeRepr {
    h: u32,
    len: usize,
    weight: Option<usize>,
    min_dist: usize,
    words: Vec<String>,
    #[serde(default = "default_construction")]
    construction: Construction,
    #[serde(default)]
    size_bound: Option<f64>,
    #[serde(default)]
    certified: bool,
}

fn default_construction() -> Construction {
    Construction::Truncated
}

const DIGITS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Alphabets up to 36 symbols print one base-36 digit per symbol; larger
/// alphabets print dot-separated decimals.
fn encode_word(word: &[u32], h: u32) -> String {
    if h <= 36 {
        word.iter().map(|&s| DIGITS[s as usize] as char).collect()
    } else {
        word.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(".")
    }
}

fn decode_word(s: &str, h: u32) -> Result<Vec<u32>> {
    let parsed: Option<Vec<u32>> = if h <= 36 {
        s.chars().map(|c| c.to_digit(36)).collect()
    } else {
        s.split('.').map(|t| t.parse().ok()).collect()
    };
    parsed.ok_or_else(|| Error::Schema(format!("cannot parse codeword {s:?}")))
}

impl TryFrom<CodeRepr> for Code {
    type Error = Error;
    fn try_from(r: CodeRepr) -> Result<Self> {
        let words = r
            .words
            .iter()
            .map(|w| decode_word(w, r.h))
            .collect::<Result<Vec<_>>>()?;
        let code = Code {
            alphabet_size: r.h,
            length: r.len,
            weight: r.weight,
            claimed_min_distance: r.min_dist,
            words,
            construction: r.construction,
            size_bound: r.size_bound,
            certified: r.certified,
        };
        code.check_structure()?;
        Ok(code)
    }
}

impl From<Code> for CodeRepr {
    fn from(c: Code) -> Self {
        CodeRepr {
            h: c.alphabet_size,
            len: c.length,
            weight: c.weight,
            min_dist: c.claimed_min_distance,
            words: c.words.iter().map(|w| encode_word(w, c.alphabet_size)).collect(),
            construction: c.construction,
            size_bound: c.size_bound,
            certified: c.certified,
        }
    }
}

pub fn hamming(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

impl Code {
    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn weight(&self) -> Option<usize> {
        self.weight
    }

    pub fn claimed_min_distance(&self) -> usize {
        self.claimed_min_distance
    }

    pub fn words(&self) -> &[Vec<u32>] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// The existence bound on the code size, when its preconditions hold.
    pub fn size_bound(&self) -> Option<f64> {
        self.size_bound
    }

    /// True when the scan was exhaustive and the size bound applies, so
    /// `len() >= size_bound()` is a checked guarantee.
    pub fn certified(&self) -> bool {
        self.certified
    }

    fn check_structure(&self) -> Result<()> {
        if self.alphabet_size < 2 {
            return invalid("alphabet size must be at least 2");
        }
        for (i, w) in self.words.iter().enumerate() {
            if w.len() != self.length {
                return invalid(format!("word {i} has length {}, expected {}", w.len(), self.length));
            }
            if w.iter().any(|&s| s >= self.alphabet_size) {
                return invalid(format!("word {i} leaves the alphabet"));
            }
            if let Some(l) = self.weight {
                let wt = w.iter().filter(|&&s| s != 0).count();
                if self.alphabet_size != 2 || wt != l {
                    return invalid(format!("word {i} has weight {wt}, expected {l}"));
                }
            }
        }
        Ok(())
    }

    /// Re-checks every invariant, including the pairwise distance, exhaustively.
    pub fn verify(&self) -> Result<()> {
        self.check_structure()?;
        if self.words.len() < 2 {
            return Ok(());
        }
        let dmin = min_distance(self)?;
        if dmin < self.claimed_min_distance {
            return Err(Error::Infeasible(format!(
                "minimum distance {dmin} below claimed {}",
                self.claimed_min_distance
            )));
        }
        if self.certified {
            if let Some(b) = self.size_bound {
                if (self.words.len() as f64) < b {
                    return Err(Error::Infeasible(format!(
                        "certified code has {} words, below the bound {b}",
                        self.words.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Exact minimum pairwise Hamming distance.
pub fn min_distance(code: &Code) -> Result<usize> {
    let words = code.words();
    if words.len() < 2 {
        return invalid("minimum distance needs at least two words");
    }
    Ok((0..words.len())
        .into_par_iter()
        .map(|i| {
            words[i + 1..]
                .iter()
                .map(|w| hamming(&words[i], w))
                .min()
                .unwrap_or(usize::MAX)
        })
        .min()
        .expect("at least one pair"))
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if acc == u128::MAX {
            return acc;
        }
    }
    acc
}

/// Size guaranteed for a constant-weight code of length k, weight l and distance l/4,
/// valid when `20 <= l <= k/2`.
pub fn constant_weight_size_bound(k: usize, l: usize) -> Option<f64> {
    if l < 20 || 2 * l > k {
        return None;
    }
    let (k, l) = (k as f64, l as f64);
    Some((k / (2f64.powf(7.0 / 8.0) * l)).powf(7.0 * l / 8.0))
}

/// Size guaranteed for an h-ary code of length d and distance d/2, valid when `h >= 16`.
pub fn qary_size_bound(h: u32, d: usize) -> Option<f64> {
    (h >= 16).then(|| (h as f64 / 16.0).powf(d as f64 / 2.0))
}

fn mask_to_word(mask: u128, k: usize) -> Vec<u32> {
    (0..k).map(|i| ((mask >> i) & 1) as u32).collect()
}

/// Next integer with the same popcount (Gosper's hack); `None` past 2^k.
fn next_same_weight(x: u128, k: usize) -> Option<u128> {
    if x == 0 {
        return None;
    }
    let c = x & x.wrapping_neg();
    let r = x.checked_add(c)?;
    let next = (((r ^ x) >> 2) / c) | r;
    if k < 128 && next >> k != 0 {
        None
    } else {
        Some(next)
    }
}

struct Greedy<T> {
    kept: Vec<T>,
    target: usize,
}

impl<T> Greedy<T> {
    /// Keeps `cand` if it is at distance >= target from every kept word.
    /// Recent words are checked first since nearby candidates come in runs.
    fn offer(&mut self, cand: T, dist: impl Fn(&T, &T) -> usize) -> bool {
        if self.kept.iter().rev().all(|w| dist(w, &cand) >= self.target) {
            self.kept.push(cand);
            true
        } else {
            false
        }
    }

    fn full(&self, max: Option<usize>) -> bool {
        max.is_some_and(|m| self.kept.len() >= m)
    }
}

/// Binary constant-weight code of length `k`, weight `l` and minimum distance `ceil(l/4)`.
///
/// Candidates are scanned in increasing order of their bitmask (bit i is
/// position i). The size bound applies when `20 <= l <= k/2`; for other `l` the
/// code is still built and verified but `size_bound()` is `None`.
pub fn gv_constant_weight(k: usize, l: usize, opts: &CodeOptions) -> Result<Code> {
    if l > k {
        return invalid(format!("weight {l} exceeds length {k}"));
    }
    if k == 0 || k > 128 {
        return Err(Error::Unsupported(format!(
            "constant-weight codes support lengths 1..=128, got {k}"
        )));
    }
    let target = l.div_ceil(4).max(1);
    let total = binomial(k as u64, l as u64);
    let mut greedy = Greedy::<u128> {
        kept: Vec::new(),
        target,
    };
    let dist = |a: &u128, b: &u128| (a ^ b).count_ones() as usize;

    let construction = if let Some(seed) = opts.random_seed {
        let mut rng = seeded(seed);
        let mut attempts = 0u64;
        while attempts < opts.scan_limit.min(opts.enumeration_cap) && !greedy.full(opts.max_words) {
            let mask = sample_indices(&mut rng, k, l)
                .into_iter()
                .fold(0u128, |m, i| m | (1u128 << i));
            greedy.offer(mask, dist);
            attempts += 1;
        }
        Construction::Randomized
    } else {
        let exhaustive_ok = total <= opts.enumeration_cap as u128;
        if !exhaustive_ok && opts.max_words.is_none() {
            return Err(Error::Infeasible(format!(
                "C({k}, {l}) = {total} candidates exceeds the enumeration cap {}; \
                 pass max_words or use randomized mode",
                opts.enumeration_cap
            )));
        }
        let mut cand = Some(if l == 0 { 0 } else { u128::MAX >> (128 - l) });
        let mut scanned = 0u64;
        while let Some(c) = cand {
            if greedy.full(opts.max_words) || scanned >= opts.scan_limit {
                break;
            }
            greedy.offer(c, dist);
            scanned += 1;
            cand = next_same_weight(c, k);
        }
        if cand.is_none() {
            Construction::Exhaustive
        } else {
            Construction::Truncated
        }
    };

    let size_bound = constant_weight_size_bound(k, l);
    let words = greedy.kept.iter().map(|&m| mask_to_word(m, k)).collect();
    Ok(Code {
        alphabet_size: 2,
        length: k,
        weight: Some(l),
        claimed_min_distance: target,
        words,
        construction,
        certified: construction == Construction::Exhaustive && size_bound.is_some(),
        size_bound,
    })
}

fn advance(word: &mut [u32], h: u32) -> bool {
    for s in word.iter_mut().rev() {
        *s += 1;
        if *s < h {
            return true;
        }
        *s = 0;
    }
    false
}

/// h-ary code of length `d` with minimum distance `ceil(d/2)`, scanned in
/// lexicographic order (first position most significant).
pub fn gv_qary(h: u32, d: usize, opts: &CodeOptions) -> Result<Code> {
    if h < 2 {
        return invalid(format!("alphabet size must be at least 2, got {h}"));
    }
    if d < 2 {
        return invalid(format!("code length must be at least 2, got {d}"));
    }
    let target = d.div_ceil(2);
    let total = (h as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    let mut greedy = Greedy::<Vec<u32>> {
        kept: Vec::new(),
        target,
    };
    let dist = |a: &Vec<u32>, b: &Vec<u32>| hamming(a, b);

    let construction = if let Some(seed) = opts.random_seed {
        let mut rng = seeded(seed);
        let mut attempts = 0u64;
        while attempts < opts.scan_limit.min(opts.enumeration_cap) && !greedy.full(opts.max_words) {
            let w: Vec<u32> = (0..d).map(|_| rng.random_range(0..h)).collect();
            // Duplicates are at distance 0 and rejected by the greedy rule.
            greedy.offer(w, dist);
            attempts += 1;
        }
        Construction::Randomized
    } else {
        if total > opts.enumeration_cap as u128 && opts.max_words.is_none() {
            return Err(Error::Infeasible(format!(
                "{h}^{d} candidates exceeds the enumeration cap {}; pass max_words or use randomized mode",
                opts.enumeration_cap
            )));
        }
        let mut word = vec![0u32; d];
        let mut scanned = 0u64;
        let mut exhausted = false;
        loop {
            if greedy.full(opts.max_words) || scanned >= opts.scan_limit {
                break;
            }
            greedy.offer(word.clone(), dist);
            scanned += 1;
            if !advance(&mut word, h) {
                exhausted = true;
                break;
            }
        }
        if exhausted {
            Construction::Exhaustive
        } else {
            Construction::Truncated
        }
    };

    let size_bound = qary_size_bound(h, d);
    Ok(Code {
        alphabet_size: h,
        length: d,
        weight: None,
        claimed_min_distance: target,
        words: greedy.kept,
        construction,
        certified: construction == Construction::Exhaustive && size_bound.is_some(),
        size_bound,
    })
}
