//! Verification instruments: entropy estimation, divergences, Shannon-type
//! concentration, AEP covers, Hamming-ball counts, dissipativity series,
//! and chi-square tests.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::source::{
    draw_symbol, entropy_bits, keyed_unit, ls_slope, sample_window, MarginalSchedule, ProbVector,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

/// Total-variation distance in the unnormalized L1 convention
/// `Σ_a |q1(a) - q2(a)|`, range `[0, 2]`.
pub fn tv_distance(q1: &ProbVector, q2: &ProbVector) -> Result<f64> {
    if q1.len() != q2.len() {
        return Err(Error::MismatchedAlphabets("tv_distance".into()));
    }
    Ok(q1
        .weights()
        .iter()
        .zip(q2.weights())
        .map(|(a, b)| (a - b).abs())
        .sum())
}

/// `Σ_a p(a) log2(p(a)/q(a))`, evaluated exactly as printed (this is the
/// divergence with the roles of the arguments fixed by the formula, not by
/// the usual `D(q‖p)` naming). Returns `+∞` when some `p(a) > 0` meets
/// `q(a) = 0`; terms with `p(a) = 0` contribute nothing.
pub fn divergence_as_printed(q: &ProbVector, p: &ProbVector) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::MismatchedAlphabets("divergence_as_printed".into()));
    }
    let mut sum = 0.0;
    for (a, &pa) in p.weights().iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        if q[a] == 0.0 {
            return Ok(f64::INFINITY);
        }
        sum += pa * (pa / q[a]).log2();
    }
    Ok(sum)
}

// ---------------------------------------------------------------------------
// Plug-in block entropy
// ---------------------------------------------------------------------------

/// Plug-in block entropy estimate with a bootstrap confidence interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntropyReport {
    pub block_length: usize,
    /// Bits per symbol.
    pub plug_in_rate: f64,
    /// Percentile bootstrap 95% interval over block resamples.
    pub ci: (f64, f64),
    pub n_samples: usize,
}

/// Empirical entropy of sliding `L`-blocks divided by `L`.
///
/// Requires `len >= 100·|A|^L` so the block histogram is populated;
/// the bootstrap resamples the observed blocks 200 times.
pub fn plug_in_entropy(
    seq: &[u16],
    alphabet_size: usize,
    block_length: usize,
    seed: u64,
) -> Result<EntropyReport> {
    if block_length == 0 {
        return Err(Error::Domain("block length must be positive".into()));
    }
    let cells = (alphabet_size as u128).checked_pow(block_length as u32);
    let cells = match cells {
        Some(c) if c <= 50_000_000 => c as usize,
        _ => return Err(Error::Capacity("|A|^L too large".into())),
    };
    let required = 100usize.saturating_mul(cells);
    if seq.len() < required {
        return Err(Error::InsufficientData(format!(
            "need at least {required} symbols for L = {block_length} over {alphabet_size} \
             letters, have {}",
            seq.len()
        )));
    }
    let blocks: Vec<usize> = seq
        .windows(block_length)
        .map(|w| w.iter().fold(0usize, |acc, &s| acc * alphabet_size + s as usize))
        .collect();
    let n = blocks.len();
    let mut counts = vec![0u64; cells];
    for &b in &blocks {
        counts[b] += 1;
    }
    let rate = entropy_of_counts(&counts, n) / block_length as f64;

    let mut boot: Vec<f64> = (0..200u64)
        .map(|r| {
            let mut c = vec![0u64; cells];
            for t in 0..n {
                let u = keyed_unit(seed ^ 0xb007, (r as i64) * n as i64 + t as i64, 1);
                c[blocks[(u * n as f64) as usize]] += 1;
            }
            entropy_of_counts(&c, n) / block_length as f64
        })
        .collect();
    boot.sort_by(|a, b| a.total_cmp(b));
    let ci = (boot[4], boot[194]);
    Ok(EntropyReport { block_length, plug_in_rate: rate, ci, n_samples: n })
}

fn entropy_of_counts(counts: &[u64], n: usize) -> f64 {
    let n = n as f64;
    let h = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Entropy-ceiling check: pass iff the plug-in rate of the output does not
/// exceed `H(p) + tolerance`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CeilingReport {
    pub plug_in_rate: f64,
    pub ceiling: f64,
    pub pass: bool,
}

pub const CEILING_TOLERANCE: f64 = 0.05;

pub fn entropy_ceiling_report(
    output: &[u16],
    out_alphabet_size: usize,
    p: &ProbVector,
    block_length: usize,
    seed: u64,
) -> Result<CeilingReport> {
    if output.len() < 100_000 {
        return Err(Error::InsufficientData(
            "ceiling check needs at least 10^5 resolved symbols".into(),
        ));
    }
    let rate = plug_in_entropy(output, out_alphabet_size, block_length, seed)?.plug_in_rate;
    let ceiling = p.entropy_bits() + CEILING_TOLERANCE;
    Ok(CeilingReport { plug_in_rate: rate, ceiling, pass: rate <= ceiling })
}

// ---------------------------------------------------------------------------
// Shannon-type concentration
// ---------------------------------------------------------------------------

/// `g_n(x) = log2 ρ([x]_n)/n + (1/n) Σ_{k=1..n} H(ρ_k)` for one sampled
/// `x`, where `[x]_n` is the cylinder on coordinates `1..n`. Converges to 0
/// in measure under the Doeblin condition.
pub fn shannon_gn(schedule: &MarginalSchedule, seed: u64, n: i64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    let w = sample_window(schedule, 1, n, seed)?;
    let mut log_mass = 0.0;
    let mut mean_entropy = 0.0;
    for i in 1..=n {
        let pv = schedule.marginal_at(i);
        let p_sym = pv[w.at(i) as usize];
        if p_sym <= 0.0 {
            return Err(Error::Domain(format!(
                "zero-probability symbol at index {i}; schedule violates Doeblin"
            )));
        }
        log_mass += p_sym.log2();
        mean_entropy += pv.entropy_bits();
    }
    Ok((log_mass + mean_entropy) / n as f64)
}

// ---------------------------------------------------------------------------
// AEP cover
// ---------------------------------------------------------------------------

/// Cylinder cover at the AEP threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AepCover {
    /// Number of `[-M, n+M]`-cylinders whose mass exceeds
    /// `2^{-n(h+ε)}`; `None` in Monte Carlo mode.
    pub cover_size: Option<String>,
    /// Their total mass (exact) or the sampled probability of landing in
    /// one (Monte Carlo).
    pub mass: f64,
    /// `h = (1/n) Σ_{k=1..n} H(ρ_k)`.
    pub h_bits: f64,
    /// The bound `2^{n(h+ε)}` the cover size must respect.
    pub size_bound_log2: f64,
}

/// Count/estimate the cylinders `[x]_{-M}^{n+M}` with
/// `ρ([x]) > 2^{-n(h+ε)}` and their total mass.
///
/// Exact mode enumerates all `|A|^{n+2M+1}` words (capacity-capped);
/// Monte Carlo mode samples windows and reports the hit probability.
pub fn aep_cover(
    schedule: &MarginalSchedule,
    n: i64,
    epsilon: f64,
    m_pad: i64,
    monte_carlo: Option<(u64, u64)>,
) -> Result<AepCover> {
    if n < 1 || m_pad < 0 || epsilon <= 0.0 {
        return Err(Error::Domain("need n >= 1, M >= 0, epsilon > 0".into()));
    }
    let h: f64 =
        (1..=n).map(|k| schedule.marginal_at(k).entropy_bits()).sum::<f64>() / n as f64;
    let threshold_log2 = -(n as f64) * (h + epsilon);
    let lo = -m_pad;
    let hi = n + m_pad;
    let width = (hi - lo + 1) as u32;
    let a = schedule.alphabet.size();

    if let Some((samples, seed)) = monte_carlo {
        let mut hits = 0u64;
        for s in 0..samples {
            let mut log2_mass = 0.0;
            for i in lo..=hi {
                let pv = schedule.marginal_at(i);
                let sym = draw_symbol(&pv, keyed_unit(seed, s as i64 * width as i64 + i, 3));
                log2_mass += pv[sym as usize].max(f64::MIN_POSITIVE).log2();
            }
            if log2_mass > threshold_log2 {
                hits += 1;
            }
        }
        return Ok(AepCover {
            cover_size: None,
            mass: hits as f64 / samples as f64,
            h_bits: h,
            size_bound_log2: -threshold_log2,
        });
    }

    let total = (a as u128).checked_pow(width);
    match total {
        Some(t) if t <= crate::typecode::EXACT_ENUM_CAP as u128 => {}
        _ => {
            return Err(Error::Capacity(format!(
                "{a}^{width} cylinders exceed the exact-enumeration cap"
            )))
        }
    }
    let marginals: Vec<Vec<f64>> =
        (lo..=hi).map(|i| schedule.marginal_at(i).weights().to_vec()).collect();
    let mut count = BigUint::zero();
    let mut mass = 0.0f64;
    // depth-first product over coordinates, pruning cannot help since all
    // words are visited; iterate with an odometer like the fiber table
    let width = width as usize;
    let mut word = vec![0u8; width];
    let mut prefix = vec![1.0f64; width + 1];
    for j in 0..width {
        prefix[j + 1] = prefix[j] * marginals[j][0];
    }
    let total = total.unwrap() as usize;
    for cell in 0..total {
        if cell > 0 {
            let mut j = width - 1;
            loop {
                if (word[j] as usize) + 1 < a {
                    word[j] += 1;
                    break;
                }
                word[j] = 0;
                j -= 1;
            }
            for jj in j..width {
                prefix[jj + 1] = prefix[jj] * marginals[jj][word[jj] as usize];
            }
        }
        let p = prefix[width];
        if p > 0.0 && p.log2() > threshold_log2 {
            count += BigUint::one();
            mass += p;
        }
    }
    // the counted cylinders each weigh more than the threshold, so the
    // count is bounded by 2^{n(h+ε)}
    debug_assert!(count.to_f64().unwrap_or(f64::INFINITY).log2() <= -threshold_log2 + 1e-9);
    Ok(AepCover {
        cover_size: Some(count.to_string()),
        mass,
        h_bits: h,
        size_bound_log2: -threshold_log2,
    })
}

// ---------------------------------------------------------------------------
// Hamming balls
// ---------------------------------------------------------------------------

/// `binom(n, ⌊εn⌋) · |B|^{⌊εn⌋}`: the dominant count of words within
/// averaged Hamming distance `ε` of a fixed word; `log2/n` approaches
/// `ε log2 |B| + H(ε, 1-ε)`.
pub fn hamming_ball_count(n: u64, eps: f64, alphabet_size: u64) -> Result<BigUint> {
    if !(0.0..1.0).contains(&eps) || eps <= 0.0 {
        return Err(Error::Domain("need 0 < eps < 1".into()));
    }
    let r = (eps * n as f64).floor() as u64;
    Ok(binomial(n, r) * BigUint::from(alphabet_size).pow(r as u32))
}

/// `log2(count)/n` against the asymptote `ε log2 |B| + H(ε, 1-ε)`.
pub fn hamming_ball_exponent(n: u64, eps: f64, alphabet_size: u64) -> Result<(f64, f64)> {
    let count = hamming_ball_count(n, eps, alphabet_size)?;
    let log2_count = log2_biguint(&count);
    let asymptote = eps * (alphabet_size as f64).log2() + entropy_bits(&[eps, 1.0 - eps]);
    Ok((log2_count / n as f64, asymptote))
}

fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 52 {
        return x.to_f64().unwrap().log2();
    }
    let shift = bits - 52;
    let top = (x >> shift).to_f64().unwrap();
    top.log2() + shift as f64
}

// ---------------------------------------------------------------------------
// Dissipativity series
// ---------------------------------------------------------------------------

/// Truncated values of `∫ √(dμ∘T^n/dμ) dμ` with partial sums and the
/// fitted log-log decay slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DissipativityReport {
    /// `affinity[n]` for `n = 0..=N`; `affinity[0] = 1` by definition.
    pub affinity: Vec<f64>,
    /// Natural log of each affinity (safe against underflow).
    pub ln_affinity: Vec<f64>,
    /// `partial_sums[n] = Σ_{m=1..n} affinity[m]`.
    pub partial_sums: Vec<f64>,
    /// Least-squares slope of `ln affinity` against `ln n` over the fit
    /// window (last decade by default).
    pub loglog_slope: f64,
    pub truncation_k: i64,
    /// Bound `Σ_{|k|>K} (μ_k(0)-μ_{k-n}(0))²/2` on the neglected log-mass,
    /// maximized over the shift range. Exactly 0 when all perturbed
    /// coordinates sit inside the truncation window.
    pub tail_bound: f64,
    pub fit_range: (i64, i64),
}

/// Per-coordinate Hellinger affinity of two Bernoulli laws:
/// `√(ab) + √((1-a)(1-b))`, in `(0, 1]`, equal to 1 iff `a = b`.
#[inline]
pub fn bernoulli_affinity(a: f64, b: f64) -> f64 {
    (a * b).sqrt() + ((1.0 - a) * (1.0 - b)).sqrt()
}

/// Radon-Nikodym affinity series for the shift on a binary product
/// measure: `affinity(n) = Π_{|k|<=K} (√(μ_k(0)μ_{k-n}(0)) +
/// √(μ_k(1)μ_{k-n}(1)))`. Coordinates outside the truncation window
/// contribute 1; the reported tail bound covers what that neglects.
///
/// A summable series certifies dissipativity.
pub fn hellinger_series(
    schedule: &MarginalSchedule,
    n_max: i64,
    truncation_k: i64,
    fit_range: Option<(i64, i64)>,
) -> Result<DissipativityReport> {
    if schedule.alphabet.size() != 2 {
        return Err(Error::Domain("hellinger_series supports binary alphabets".into()));
    }
    if n_max < 1 || truncation_k < 10 * n_max {
        return Err(Error::Domain("need N >= 1 and K >= 10·N".into()));
    }
    let w0: Vec<f64> =
        (-truncation_k - n_max..=truncation_k).map(|k| schedule.marginal_at(k)[0]).collect();
    let at = |k: i64| w0[(k + truncation_k + n_max) as usize];

    let mut affinity = Vec::with_capacity(n_max as usize + 1);
    let mut ln_affinity = Vec::with_capacity(n_max as usize + 1);
    let mut partial_sums = Vec::with_capacity(n_max as usize + 1);
    affinity.push(1.0);
    ln_affinity.push(0.0);
    partial_sums.push(0.0);
    for n in 1..=n_max {
        let mut ln_aff = 0.0;
        for k in -truncation_k..=truncation_k {
            let f = bernoulli_affinity(at(k), at(k - n));
            ln_aff += f.ln();
        }
        ln_affinity.push(ln_aff);
        affinity.push(ln_aff.exp());
        partial_sums.push(partial_sums.last().unwrap() + ln_aff.exp());
    }

    let (fit_lo, fit_hi) = fit_range.unwrap_or(((n_max / 10).max(1), n_max));
    if fit_lo < 1 || fit_hi > n_max || fit_lo >= fit_hi {
        return Err(Error::Domain("fit range outside 1..=N".into()));
    }
    let pts: Vec<(f64, f64)> = (fit_lo..=fit_hi)
        .map(|n| ((n as f64).ln(), ln_affinity[n as usize]))
        .collect();
    let loglog_slope = ls_slope(&pts);

    let tail_bound = hellinger_tail_bound(schedule, n_max, truncation_k);

    Ok(DissipativityReport {
        affinity,
        ln_affinity,
        partial_sums,
        loglog_slope,
        truncation_k,
        tail_bound,
        fit_range: (fit_lo, fit_hi),
    })
}

// Σ_{|k|>K} Δ_k(n)²/2 at the worst shift n = N, summed exactly over the
// region where the marginals have not both settled to their clipped
// far-field values (beyond that every term is exactly 0). When that region
// is very wide the scan stops at 10^6 coordinates per side and a closed
// integral bound covers the remainder.
fn hellinger_tail_bound(schedule: &MarginalSchedule, n_max: i64, truncation_k: i64) -> f64 {
    const SCAN_CAP: i64 = 1_000_000;
    let reach = schedule.settled_radius().map(|r| r + n_max).unwrap_or(i64::MAX);
    let scan_to = reach.min(truncation_k + SCAN_CAP);
    let n = n_max;
    let mut sum = 0.0;
    for k in truncation_k + 1..=scan_to {
        let d = schedule.marginal_at(k)[0] - schedule.marginal_at(k - n)[0];
        sum += d * d;
        let dm = schedule.marginal_at(-k)[0] - schedule.marginal_at(-k - n)[0];
        sum += dm * dm;
    }
    if scan_to < reach {
        // remainder bound for a power-decay tail: |Δ_k| <= |scale|·n·e·
        // (k-n+offset)^{-e-1}, so Σ_{k>k0} Δ² <= (scale·n·e)²·
        // (k0-n+offset)^{-2e-1}/(2e+1), per side.
        if let crate::source::ScheduleKind::PowerDecay { exponent, scale, offset } =
            schedule.kind
        {
            let e = exponent;
            let c = (scale * n as f64 * e).powi(2);
            let base = (scan_to - n) as f64 + offset;
            sum += 2.0 * c * base.powf(-2.0 * e - 1.0) / (2.0 * e + 1.0);
        }
    }
    sum / 2.0
}

// ---------------------------------------------------------------------------
// Weak-law window averages
// ---------------------------------------------------------------------------

/// Window average of a cylinder indicator against its schedule mean:
/// `(1/n) Σ_{j=0..n-1} 1[x_{j..j+w} = word]` vs
/// `(1/n) Σ_j Π_t ρ_{j+t}(word_t)`.
pub fn wl_average_gap(
    schedule: &MarginalSchedule,
    word: &[u8],
    n: i64,
    seed: u64,
) -> Result<f64> {
    if word.is_empty() || word.len() > 8 {
        return Err(Error::Domain("cylinder width must be 1..=8".into()));
    }
    let w = sample_window(schedule, 0, n + word.len() as i64 - 2, seed)?;
    let mut hits = 0u64;
    let mut mean = 0.0;
    for j in 0..n {
        let mut all = true;
        let mut prob = 1.0;
        for (t, &s) in word.iter().enumerate() {
            let idx = j + t as i64;
            if w.at(idx) != s {
                all = false;
            }
            prob *= schedule.marginal_at(idx)[s as usize];
        }
        if all {
            hits += 1;
        }
        mean += prob;
    }
    Ok(hits as f64 / n as f64 - mean / n as f64)
}

// ---------------------------------------------------------------------------
// Chi-square tests
// ---------------------------------------------------------------------------

/// Pearson goodness-of-fit: observed counts against expected counts.
/// Returns `(statistic, p_value)`; cells with expected mass below 1e-9
/// must be empty.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != expected.len() {
        return Err(Error::Domain("length mismatch".into()));
    }
    let mut stat = 0.0;
    let mut df = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e < 1e-9 {
            if o > 0 {
                return Err(Error::Domain("observation in a zero-probability cell".into()));
            }
            continue;
        }
        let d = o as f64 - e;
        stat += d * d / e;
        df += 1;
    }
    if df < 2 {
        return Err(Error::InsufficientData("fewer than 2 populated cells".into()));
    }
    Ok((stat, chi_square_p(stat, (df - 1) as f64)))
}

/// Two-sample chi-square over shared categories. Categories empty in both
/// samples are ignored.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<(f64, usize, f64)> {
    if a.len() != b.len() {
        return Err(Error::Domain("length mismatch".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let (ka, kb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y == 0 {
            continue;
        }
        let d = ka * x as f64 - kb * y as f64;
        stat += d * d / (x + y) as f64;
        cells += 1;
    }
    if cells < 2 {
        return Err(Error::InsufficientData("fewer than 2 populated cells".into()));
    }
    let df = cells - 1;
    Ok((stat, df, chi_square_p(stat, df as f64)))
}

/// Serial independence test at one lag: chi-square on the contingency
/// table of `(x_t, x_{t+lag})`. Returns `(statistic, p_value)`.
pub fn lag_independence(seq: &[u16], alphabet_size: usize, lag: usize) -> Result<(f64, f64)> {
    if lag == 0 || seq.len() <= lag + 1 {
        return Err(Error::Domain("need 0 < lag < len-1".into()));
    }
    let c = alphabet_size;
    let mut table = vec![0u64; c * c];
    for t in 0..seq.len() - lag {
        table[seq[t] as usize * c + seq[t + lag] as usize] += 1;
    }
    let n: u64 = table.iter().sum();
    let mut rows = vec![0u64; c];
    let mut cols = vec![0u64; c];
    for i in 0..c {
        for j in 0..c {
            rows[i] += table[i * c + j];
            cols[j] += table[i * c + j];
        }
    }
    let mut stat = 0.0;
    for i in 0..c {
        for j in 0..c {
            let e = rows[i] as f64 * cols[j] as f64 / n as f64;
            if e > 0.0 {
                let d = table[i * c + j] as f64 - e;
                stat += d * d / e;
            }
        }
    }
    let df = (c - 1) * (c - 1);
    Ok((stat, chi_square_p(stat, df.max(1) as f64)))
}

fn chi_square_p(stat: f64, df: f64) -> f64 {
    let dist = ChiSquared::new(df).expect("positive df");
    1.0 - dist.cdf(stat)
}

/// Empirical per-symbol TV distance to the uniform law over `c` symbols.
pub fn tv_to_uniform(seq: &[u16], c: usize) -> f64 {
    let mut counts = vec![0u64; c];
    for &s in seq {
        counts[s as usize] += 1;
    }
    let n = seq.len() as f64;
    counts
        .iter()
        .map(|&x| (x as f64 / n - 1.0 / c as f64).abs())
        .sum()
}
