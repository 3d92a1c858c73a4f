//! Method-of-types machinery: empirical measures, type classes,
//! combinatorial ranking, and the exactly uniform encoder `ψ`.
//!
//! For block length `k`, entropy slack `ε` and total-variation radius `δ`
//! around the limiting law `p`:
//!
//! * `B_k = {0, .., 2^⌈k(H(p)-ε)⌉ - 1}` is the output set;
//! * a denominator-`k` type `q` is *admissible* when `d_TV(q, p) < δ`
//!   (exact rational comparison) and `q` is not the point mass at the
//!   marker symbol (the word `a^k` is always omitted);
//! * from each admissible type class, the lexicographically first
//!   `m(q,k)·#B_k` words are kept, where `m(q,k) = ⌊#type_k(q)/#B_k⌋`;
//! * `ψ(word) = rank(word within its type class) mod #B_k`, an exactly
//!   `m(q,k)`-to-1 map onto `B_k` on every kept prefix.
//!
//! Ranking is exact big-integer arithmetic; admissibility is exact rational
//! arithmetic; no codeword table is ever materialized (membership is a rank
//! bound).

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::source::{keyed_unit, MarginalSchedule, ProbVector, ScheduleKind};
use crate::{Error, Result};

/// Exact probability vector for codebook arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalProb(Vec<Ratio<i128>>);

impl RationalProb {
    pub fn new(entries: Vec<(i128, i128)>) -> Result<Self> {
        let v: Vec<Ratio<i128>> = entries
            .into_iter()
            .map(|(n, d)| {
                if d == 0 {
                    Err(Error::Domain("zero denominator".into()))
                } else {
                    Ok(Ratio::new(n, d))
                }
            })
            .collect::<Result<_>>()?;
        let sum: Ratio<i128> = v.iter().sum();
        if sum != Ratio::one() {
            return Err(Error::Domain("rational weights must sum to exactly 1".into()));
        }
        if v.iter().any(|r| *r < Ratio::zero()) {
            return Err(Error::Domain("rational weights must be nonnegative".into()));
        }
        Ok(Self(v))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![Ratio::new(1, n as i128); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, a: usize) -> Ratio<i128> {
        self.0[a]
    }

    /// Float view.
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|r| ratio_f64(*r)).collect()
    }

    /// Shannon entropy in bits (float).
    pub fn entropy_bits(&self) -> f64 {
        crate::source::entropy_bits(&self.to_f64())
    }

    /// Unnormalized total-variation distance to a denominator-`k` type
    /// given by counts: `Σ_a |n_a/k - p_a|`, exact.
    pub fn tv_to_counts(&self, counts: &[u32], k: u32) -> Ratio<i128> {
        let k = Ratio::new(k as i128, 1);
        self.0
            .iter()
            .zip(counts)
            .map(|(&p, &c)| {
                let q = Ratio::new(c as i128, 1) / k;
                if q >= p {
                    q - p
                } else {
                    p - q
                }
            })
            .sum()
    }
}

fn ratio_f64(r: Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

// ---------------------------------------------------------------------------
// Empirical measures and type classes
// ---------------------------------------------------------------------------

/// Symbol counts of a word: the numerators of its denominator-`k` type.
pub fn empirical_counts(word: &[u8], a_size: usize) -> Vec<u32> {
    let mut c = vec![0u32; a_size];
    for &s in word {
        c[s as usize] += 1;
    }
    c
}

/// `emp(x)(a) = #{j : x_j = a} / k` as a float vector.
pub fn empirical_measure(word: &[u8], a_size: usize) -> ProbVector {
    let k = word.len() as f64;
    let w = empirical_counts(word, a_size)
        .into_iter()
        .map(|c| c as f64 / k)
        .collect();
    ProbVector::new(w).expect("counts/k always form a probability vector")
}

/// `#type_k(q) = k! / Π_a (k q(a))!` for the type with the given counts.
pub fn type_class_size(counts: &[u32]) -> BigUint {
    let k: u32 = counts.iter().sum();
    let mut size = factorial(k);
    for &c in counts {
        size /= factorial(c);
    }
    size
}

fn factorial(n: u32) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, i| acc * i)
}

/// Lexicographic rank of `word` within its own type class (symbols ordered
/// by index). Standard multinomial ranking: at each position, count the
/// completions that start with a strictly smaller symbol.
pub fn rank_in_type(word: &[u8], a_size: usize) -> BigUint {
    let mut counts = empirical_counts(word, a_size);
    let mut rank = BigUint::zero();
    for &s in word {
        for t in 0..s {
            if counts[t as usize] > 0 {
                counts[t as usize] -= 1;
                rank += type_class_size(&counts);
                counts[t as usize] += 1;
            }
        }
        counts[s as usize] -= 1;
    }
    rank
}

/// Inverse of [`rank_in_type`]: the word of the given type at the given
/// lexicographic rank.
pub fn unrank_in_type(counts: &[u32], mut rank: BigUint) -> Result<Vec<u8>> {
    let mut counts = counts.to_vec();
    let k: u32 = counts.iter().sum();
    if rank >= type_class_size(&counts) {
        return Err(Error::Domain("rank outside the type class".into()));
    }
    let mut word = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let mut placed = false;
        for s in 0..counts.len() {
            if counts[s] == 0 {
                continue;
            }
            counts[s] -= 1;
            let block = type_class_size(&counts);
            if rank < block {
                word.push(s as u8);
                placed = true;
                break;
            }
            rank -= block;
            counts[s] += 1;
        }
        debug_assert!(placed);
    }
    Ok(word)
}

// ---------------------------------------------------------------------------
// Codebook
// ---------------------------------------------------------------------------

/// One admissible type with its chopping arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeEntry {
    pub counts: Vec<u32>,
    /// `#type_k(q)`, decimal string for serializability.
    pub size: String,
    /// `m(q,k) = ⌊size / B_size⌋`, decimal string.
    pub multiplicity: String,
    /// `m(q,k) · B_size`: how many lexicographically-first words are kept.
    pub kept: String,
}

/// The codebook for `(p, k, ε, δ)`: admissible types, output set size, and
/// the data needed to answer membership and `ψ` queries without
/// materializing any word list.
#[derive(Debug, Clone)]
pub struct TypeCodebook {
    pub k: u32,
    pub epsilon: f64,
    pub delta: Ratio<i128>,
    pub p: RationalProb,
    pub a_size: usize,
    pub marker_a: u8,
    /// `log2 #B_k = ⌈k(H(p)-ε)⌉`.
    pub b_bits: u32,
    entries: BTreeMap<Vec<u32>, CodebookEntry>,
}

#[derive(Debug, Clone)]
struct CodebookEntry {
    size: BigUint,
    multiplicity: BigUint,
    kept: BigUint,
}

/// Default TV radius: half the distance from `p` to the nearest degenerate
/// law, capped at 1/5. Guarantees the all-`a` word is never admissible.
pub fn default_delta(p: &RationalProb) -> Ratio<i128> {
    let pmax = (0..p.len()).map(|a| p.get(a)).max().unwrap_or_else(Ratio::one);
    let half_dist = Ratio::one() - pmax; // = d_TV(p, nearest degenerate)/2
    half_dist.min(Ratio::new(1, 5))
}

impl TypeCodebook {
    /// `#B_k` as a `u64` (the construction caps `⌈k(H-ε)⌉` at 62 bits).
    pub fn b_size(&self) -> u64 {
        1u64 << self.b_bits
    }

    pub fn entries(&self) -> Vec<TypeEntry> {
        self.entries
            .iter()
            .map(|(c, e)| TypeEntry {
                counts: c.clone(),
                size: e.size.to_string(),
                multiplicity: e.multiplicity.to_string(),
                kept: e.kept.to_string(),
            })
            .collect()
    }

    /// Exact multiplicity `m(q,k)` for an admissible type.
    pub fn multiplicity(&self, counts: &[u32]) -> Option<BigUint> {
        self.entries.get(counts).map(|e| e.multiplicity.clone())
    }

    /// Is this word in the good set `G_k`?
    pub fn is_good(&self, word: &[u8]) -> bool {
        if word.len() != self.k as usize {
            return false;
        }
        let counts = empirical_counts(word, self.a_size);
        match self.entries.get(&counts) {
            None => false,
            Some(e) => rank_in_type(word, self.a_size) < e.kept,
        }
    }

    /// Total number of words in `G_k`.
    pub fn good_count(&self) -> BigUint {
        self.entries.values().map(|e| e.kept.clone()).sum()
    }

    /// `ρ^{⊗k}`-mass of `G_k` under an arbitrary single-coordinate law
    /// (exact type-level sum; valid because membership is type-uniform).
    pub fn good_mass_iid(&self, pv: &ProbVector) -> f64 {
        let mut mass = 0.0;
        for (counts, e) in &self.entries {
            let mut log_p = 0.0;
            for (a, &c) in counts.iter().enumerate() {
                if c > 0 {
                    if pv[a] <= 0.0 {
                        log_p = f64::NEG_INFINITY;
                        break;
                    }
                    log_p += c as f64 * pv[a].ln();
                }
            }
            let kept = biguint_f64(&e.kept);
            mass += kept * log_p.exp();
        }
        mass
    }
}

fn biguint_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// Build the codebook for `(p, k, ε, δ)`.
///
/// Fails with an infeasibility error naming the violating type when some
/// admissible type class is smaller than `#B_k` (the guarantee
/// `#type_k(q) ≥ #B_k` only holds once `k` is large enough).
pub fn build_codebook(
    p: &RationalProb,
    marker_a: u8,
    k: u32,
    epsilon: f64,
    delta: Ratio<i128>,
) -> Result<TypeCodebook> {
    if epsilon <= 0.0 {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let k_min = (2.0 / epsilon).ceil() as u32;
    if k < k_min {
        return Err(Error::Infeasible(format!(
            "k = {k} below ceil(2/epsilon) = {k_min}"
        )));
    }
    let a_size = p.len();
    if (marker_a as usize) >= a_size {
        return Err(Error::Domain("marker symbol outside p".into()));
    }
    let h = p.entropy_bits();
    let exponent = k as f64 * (h - epsilon);
    // guard against float dust right above an integer
    let b_bits = (exponent - 1e-9).ceil().max(1.0) as u32;
    if b_bits > 62 {
        return Err(Error::Capacity(format!("#B_k = 2^{b_bits} exceeds u64 range")));
    }
    let b_size = BigUint::from(1u64 << b_bits);

    let mut entries = BTreeMap::new();
    for counts in compositions(k, a_size) {
        // the all-a word forms the point-mass type; always omitted
        if counts[marker_a as usize] == k {
            continue;
        }
        if p.tv_to_counts(&counts, k) >= delta {
            continue;
        }
        let size = type_class_size(&counts);
        if size < b_size {
            return Err(Error::Infeasible(format!(
                "type {:?} has class size {} < #B_k = {}; increase k or epsilon",
                counts, size, b_size
            )));
        }
        let multiplicity = &size / &b_size;
        let kept = &multiplicity * &b_size;
        entries.insert(counts, CodebookEntry { size, multiplicity, kept });
    }
    Ok(TypeCodebook {
        k,
        epsilon,
        delta,
        p: p.clone(),
        a_size,
        marker_a,
        b_bits,
        entries,
    })
}

// All count vectors of length `a_size` summing to `k`.
fn compositions(k: u32, a_size: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; a_size];
    fn rec(k_left: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() - 1 {
            cur[pos] = k_left;
            out.push(cur.clone());
            return;
        }
        for c in 0..=k_left {
            cur[pos] = c;
            rec(k_left - c, pos + 1, cur, out);
        }
    }
    rec(k, 0, &mut cur, &mut out);
    out
}

/// `ψ(word) = rank(word) mod #B_k` for `word ∈ G_k`.
///
/// On each kept prefix `F_k(q)` the fibers `ψ^{-1}(c)` have size exactly
/// `m(q,k)`: the kept ranks are `0 .. m·#B_k`, so each residue class is hit
/// `m` times.
pub fn psi_encode(word: &[u8], codebook: &TypeCodebook) -> Result<u64> {
    if word.len() != codebook.k as usize {
        return Err(Error::Domain("word length != k".into()));
    }
    let counts = empirical_counts(word, codebook.a_size);
    let entry = codebook.entries.get(&counts).ok_or(Error::NotGood)?;
    let rank = rank_in_type(word, codebook.a_size);
    if rank >= entry.kept {
        return Err(Error::NotGood);
    }
    let b = BigUint::from(codebook.b_size());
    Ok((rank % b).to_u64().expect("residue fits u64"))
}

// ---------------------------------------------------------------------------
// Exact enumeration helpers
// ---------------------------------------------------------------------------

/// Enumeration cap for exact masses and defects.
pub const EXACT_ENUM_CAP: usize = 10_000_000;

/// Precomputed fiber assignment for every word of `A^k`:
/// `None` when the word is outside `G_k`, else `Some(ψ(word))`.
pub struct FiberTable {
    pub k: u32,
    pub a_size: usize,
    cells: Vec<i64>,
}

impl FiberTable {
    pub fn build(codebook: &TypeCodebook) -> Result<Self> {
        let total = (codebook.a_size as u128).pow(codebook.k);
        if total > EXACT_ENUM_CAP as u128 {
            return Err(Error::Capacity(format!(
                "{}^{} words exceed the exact-enumeration cap",
                codebook.a_size, codebook.k
            )));
        }
        let total = total as usize;
        let mut cells = vec![-1i64; total];
        let mut word = vec![0u8; codebook.k as usize];
        for (cell_idx, cell) in cells.iter_mut().enumerate() {
            let mut idx = cell_idx;
            for j in (0..codebook.k as usize).rev() {
                word[j] = (idx % codebook.a_size) as u8;
                idx /= codebook.a_size;
            }
            match psi_encode(&word, codebook) {
                Ok(c) => *cell = c as i64,
                Err(Error::NotGood) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Self { k: codebook.k, a_size: codebook.a_size, cells })
    }

    #[inline]
    pub fn fiber_of_cell(&self, cell: usize) -> Option<u64> {
        let v = self.cells[cell];
        (v >= 0).then_some(v as u64)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Decode a cell index back into its word.
    pub fn word_of_cell(&self, mut cell: usize) -> Vec<u8> {
        let mut word = vec![0u8; self.k as usize];
        for j in (0..self.k as usize).rev() {
            word[j] = (cell % self.a_size) as u8;
            cell /= self.a_size;
        }
        word
    }
}

/// `ρ_i^{⊕k}(word) = Π_j ρ_{i+j}(word_j)`.
pub fn oblique_mass(schedule: &MarginalSchedule, i: i64, word: &[u8]) -> f64 {
    word.iter()
        .enumerate()
        .map(|(j, &s)| schedule.marginal_at(i + j as i64)[s as usize])
        .product()
}

/// How `ρ_i^{⊕k}(G_k)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMethod {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// Mass estimate with an optional 99% confidence interval (Monte Carlo).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GoodMass {
    pub estimate: f64,
    pub ci_99: Option<(f64, f64)>,
}

/// `ρ_i^{⊕k}(G_k)`: the probability that the block at positions
/// `i .. i+k-1` is good.
pub fn good_mass(
    schedule: &MarginalSchedule,
    i: i64,
    codebook: &TypeCodebook,
    method: MassMethod,
) -> Result<GoodMass> {
    match method {
        MassMethod::Exact => {
            if schedule.kind == ScheduleKind::Stationary {
                let est = codebook.good_mass_iid(&schedule.marginal_at(i));
                return Ok(GoodMass { estimate: est, ci_99: None });
            }
            let table = FiberTable::build(codebook)?;
            let marginals: Vec<ProbVector> =
                (0..codebook.k as i64).map(|j| schedule.marginal_at(i + j)).collect();
            let mut mass = 0.0;
            for cell in 0..table.num_cells() {
                if table.fiber_of_cell(cell).is_some() {
                    let word = table.word_of_cell(cell);
                    let p: f64 = word
                        .iter()
                        .enumerate()
                        .map(|(j, &s)| marginals[j][s as usize])
                        .product();
                    mass += p;
                }
            }
            Ok(GoodMass { estimate: mass, ci_99: None })
        }
        MassMethod::MonteCarlo { samples, seed } => {
            let mut hits = 0u64;
            let mut word = vec![0u8; codebook.k as usize];
            for s in 0..samples {
                for (j, slot) in word.iter_mut().enumerate() {
                    let pv = schedule.marginal_at(i + j as i64);
                    *slot = crate::source::draw_symbol(&pv, keyed_unit(seed, s as i64, j as u64));
                }
                if codebook.is_good(&word) {
                    hits += 1;
                }
            }
            let est = hits as f64 / samples as f64;
            let sd = (est * (1.0 - est) / samples as f64).sqrt();
            Ok(GoodMass { estimate: est, ci_99: Some((est - 2.576 * sd, est + 2.576 * sd)) })
        }
    }
}

/// `ρ_i^{⊕k}(ψ^{-1}(c) | G_k) - 1/#B_k` for one output symbol `c`.
pub fn uniformity_defect(
    schedule: &MarginalSchedule,
    i: i64,
    codebook: &TypeCodebook,
    c: u64,
) -> Result<f64> {
    let defects = uniformity_defects(schedule, i, codebook)?;
    defects
        .get(c as usize)
        .copied()
        .ok_or_else(|| Error::Domain(format!("c = {c} outside B_k")))
}

/// All defects at index `i` in one exact enumeration pass.
pub fn uniformity_defects(
    schedule: &MarginalSchedule,
    i: i64,
    codebook: &TypeCodebook,
) -> Result<Vec<f64>> {
    let table = FiberTable::build(codebook)?;
    defects_with_table(schedule, i, codebook, &table)
}

/// Same as [`uniformity_defects`] with a caller-held table (for sweeps
/// over many indices).
pub fn defects_with_table(
    schedule: &MarginalSchedule,
    i: i64,
    codebook: &TypeCodebook,
    table: &FiberTable,
) -> Result<Vec<f64>> {
    let b = codebook.b_size() as usize;
    let k = codebook.k as usize;
    let marginals: Vec<Vec<f64>> = (0..k)
        .map(|j| schedule.marginal_at(i + j as i64).weights().to_vec())
        .collect();
    let mut fiber_mass = vec![0.0f64; b];
    let mut good = 0.0f64;
    let a = codebook.a_size;
    // iterate words in cell order, maintaining the digit expansion
    let mut word = vec![0u8; k];
    let mut prefix = vec![1.0f64; k + 1];
    for j in 0..k {
        prefix[j + 1] = prefix[j] * marginals[j][0];
    }
    for cell in 0..table.num_cells() {
        if cell > 0 {
            // increment the base-a counter from the right
            let mut j = k - 1;
            loop {
                if (word[j] as usize) + 1 < a {
                    word[j] += 1;
                    break;
                }
                word[j] = 0;
                j -= 1;
            }
            for jj in j..k {
                prefix[jj + 1] = prefix[jj] * marginals[jj][word[jj] as usize];
            }
        }
        if let Some(c) = table.fiber_of_cell(cell) {
            let p = prefix[k];
            fiber_mass[c as usize] += p;
            good += p;
        }
    }
    if good <= 0.0 {
        return Err(Error::InsufficientData("good set has zero mass at this index".into()));
    }
    let uniform = 1.0 / b as f64;
    Ok(fiber_mass.into_iter().map(|m| m / good - uniform).collect())
}
