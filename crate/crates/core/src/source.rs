//! Nonstationary product sources and their diagnostics.
//!
//! A source is a product measure `ρ = ⊗ ρ_i` on `A^Z`: independent draws,
//! one probability vector per integer index. Supported families:
//!
//! * `stationary(p)` — every marginal equals `p`;
//! * `power_decay` — symbol 0 receives `p(0) + scale·(|i|+offset)^{-exponent}`,
//!   the remaining symbols share the complement proportionally to `p`;
//! * `table` — explicit marginals on finitely many indices, `p` elsewhere.
//!
//! All parametric marginals are clipped into `[clip, 1-clip]` coordinatewise
//! so the Doeblin condition holds everywhere. Sampling is counter-based:
//! the symbol at absolute index `i` is a pure function of `(seed, i)`, which
//! makes window sampling reproducible and position-stable by construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cap on a single sampled window, in symbols.
pub const WINDOW_CAP: usize = 200_000_000;

// ---------------------------------------------------------------------------
// Alphabet and probability vectors
// ---------------------------------------------------------------------------

/// A finite ordered alphabet with two distinguished marker symbols.
///
/// Symbols are referred to by index (`u8`) throughout the library; the
/// token strings only matter for I/O.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    tokens: Vec<String>,
    marker_a: u8,
    marker_b: u8,
}

impl Alphabet {
    pub fn new(tokens: Vec<String>, marker_a: u8, marker_b: u8) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(Error::Domain("alphabet needs at least 2 symbols".into()));
        }
        if tokens.len() > 250 {
            return Err(Error::Capacity("alphabet larger than 250 symbols".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tokens {
            if !seen.insert(t) {
                return Err(Error::Domain(format!("duplicate symbol token {t:?}")));
            }
        }
        if marker_a as usize >= tokens.len() || marker_b as usize >= tokens.len() {
            return Err(Error::Domain("marker symbol outside alphabet".into()));
        }
        if marker_a == marker_b {
            return Err(Error::Domain("marker symbols must differ".into()));
        }
        Ok(Self { tokens, marker_a, marker_b })
    }

    /// Binary alphabet `{"0","1"}` with `marker_a = 0`, `marker_b = 1`.
    pub fn binary() -> Self {
        Self::uniform_tokens(2)
    }

    /// Alphabet `{"0",...,"n-1"}` with markers `0` and `1`.
    pub fn uniform_tokens(n: usize) -> Self {
        let tokens = (0..n).map(|i| i.to_string()).collect();
        Alphabet::new(tokens, 0, 1).expect("valid by construction")
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn marker_a(&self) -> u8 {
        self.marker_a
    }

    pub fn marker_b(&self) -> u8 {
        self.marker_b
    }

    pub fn token(&self, s: u8) -> &str {
        &self.tokens[s as usize]
    }

    pub fn index_of(&self, token: &str) -> Option<u8> {
        self.tokens.iter().position(|t| t == token).map(|i| i as u8)
    }
}

/// A probability vector over an alphabet, float mode.
///
/// Exact rational vectors for codebook arithmetic live in
/// [`crate::typecode::RationalProb`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(0.0..=1.0).contains(&w) || w.is_nan()) {
            return Err(Error::Domain("weights must lie in [0,1]".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Shannon entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.0)
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `H(w) = -Σ w_a log2 w_a`, with `0 log 0 = 0`.
pub fn entropy_bits(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.log2())
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

/// Parametric family for the per-index marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Stationary,
    /// `w_0(i) = p(0) + scale · (|i| + offset)^{-exponent}` before clipping;
    /// the other symbols split `1 - w_0` proportionally to `p`.
    PowerDecay { exponent: f64, scale: f64, offset: f64 },
    /// Explicit marginals at finitely many indices; `p` on the tails.
    Table { entries: BTreeMap<i64, Vec<f64>> },
}

/// A product-measure source: alphabet, marginal family, limiting law and
/// Doeblin floor, plus the finite exception set where the floor or the
/// limit has not yet kicked in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSchedule {
    pub alphabet: Alphabet,
    pub kind: ScheduleKind,
    /// Limiting marginal `p` (the clip makes parametric schedules attain a
    /// clipped version of their nominal limit).
    pub limiting: ProbVector,
    /// Clip bound `δ_min`; every stored marginal entry lies in
    /// `[δ_min, 1-δ_min]` after clipping, so this is also the Doeblin floor.
    pub clip: f64,
    /// Indices where the raw (pre-clip) formula leaves `[δ_min, 1-δ_min]`,
    /// exposed as schedule metadata rather than inferred downstream.
    pub exceptions: Vec<i64>,
    /// Set when the nominal (unclipped) limit is degenerate, so only one
    /// side of the Doeblin bound is meaningful before clipping.
    pub doeblin_only_one_sided: bool,
    /// Shift applied to the index before evaluating the marginal; used to
    /// compare a schedule against its own translates.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub index_shift: i64,
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

pub const DEFAULT_CLIP: f64 = 1e-3;

impl MarginalSchedule {
    pub fn stationary(alphabet: Alphabet, p: ProbVector) -> Result<Self> {
        if p.len() != alphabet.size() {
            return Err(Error::Domain("p length != alphabet size".into()));
        }
        Ok(Self {
            alphabet,
            kind: ScheduleKind::Stationary,
            limiting: p,
            clip: 0.0,
            exceptions: Vec::new(),
            doeblin_only_one_sided: false,
            index_shift: 0,
        })
    }

    /// Power-decay perturbation of `p` on symbol 0, clipped into
    /// `[clip, 1-clip]`. `doeblin_only_one_sided` is set automatically when
    /// `p` is degenerate.
    pub fn power_decay(
        alphabet: Alphabet,
        p: ProbVector,
        exponent: f64,
        scale: f64,
        offset: f64,
        clip: f64,
    ) -> Result<Self> {
        if p.len() != alphabet.size() {
            return Err(Error::Domain("p length != alphabet size".into()));
        }
        if exponent <= 0.0 || !(0.0..0.5).contains(&clip) || clip <= 0.0 || offset < 0.0 {
            return Err(Error::Domain(
                "need exponent > 0, clip in (0, 0.5), offset >= 0".into(),
            ));
        }
        let one_sided = p.weights().iter().any(|&w| w == 0.0 || w == 1.0);
        let mut s = Self {
            alphabet,
            kind: ScheduleKind::PowerDecay { exponent, scale, offset },
            limiting: p,
            clip,
            exceptions: Vec::new(),
            doeblin_only_one_sided: one_sided,
            index_shift: 0,
        };
        s.exceptions = s.scan_exceptions();
        Ok(s)
    }

    pub fn table(
        alphabet: Alphabet,
        p: ProbVector,
        entries: BTreeMap<i64, Vec<f64>>,
        clip: f64,
    ) -> Result<Self> {
        if p.len() != alphabet.size() {
            return Err(Error::Domain("p length != alphabet size".into()));
        }
        for (i, w) in &entries {
            ProbVector::new(w.clone())
                .map_err(|e| Error::Domain(format!("table entry at {i}: {e}")))?;
        }
        let mut s = Self {
            alphabet,
            kind: ScheduleKind::Table { entries },
            limiting: p,
            clip,
            exceptions: Vec::new(),
            doeblin_only_one_sided: false,
            index_shift: 0,
        };
        s.exceptions = s.scan_exceptions();
        Ok(s)
    }

    /// The same source observed `offset` places to the right:
    /// `marginal_at(i)` of the translate equals `marginal_at(i - offset)`.
    pub fn translated(&self, offset: i64) -> Self {
        let mut s = self.clone();
        s.index_shift += offset;
        s
    }

    /// `ρ_i`: the marginal law at absolute index `i`.
    pub fn marginal_at(&self, i: i64) -> ProbVector {
        let i = i - self.index_shift;
        let w = match &self.kind {
            ScheduleKind::Stationary => self.limiting.weights().to_vec(),
            ScheduleKind::PowerDecay { exponent, scale, offset } => {
                let p = self.limiting.weights();
                let dev = if i == 0 && *offset == 0.0 {
                    // |0|^{-r} diverges; the clip decides the stored value.
                    scale.signum() * f64::INFINITY
                } else {
                    scale * (i.unsigned_abs() as f64 + offset).powf(-exponent)
                };
                self.clipped_perturbation(p, dev)
            }
            ScheduleKind::Table { entries } => match entries.get(&i) {
                Some(w) => self.clip_vector(w),
                None => self.limiting.weights().to_vec(),
            },
        };
        ProbVector::new(w).expect("schedule marginals are valid by construction")
    }

    /// Doeblin floor currently in force (the clip, or the smallest limiting
    /// weight for unclipped stationary schedules).
    pub fn doeblin_floor(&self) -> f64 {
        if self.clip > 0.0 {
            self.clip
        } else {
            self.limiting.weights().iter().cloned().fold(f64::INFINITY, f64::min)
        }
    }

    // Perturb symbol 0 by `dev`, clip, and share the complement among the
    // remaining symbols proportionally to the limiting law.
    fn clipped_perturbation(&self, p: &[f64], dev: f64) -> Vec<f64> {
        let n = p.len();
        let lo = self.clip;
        let hi = 1.0 - self.clip * (n as f64 - 1.0);
        let w0 = (p[0] + dev).clamp(lo, hi.max(lo));
        let rest_p: f64 = 1.0 - p[0];
        let mut w = vec![0.0; n];
        w[0] = w0;
        if rest_p > 0.0 {
            for a in 1..n {
                w[a] = (1.0 - w0) * p[a] / rest_p;
            }
        } else {
            // degenerate limit: spread the complement evenly
            for x in w.iter_mut().skip(1) {
                *x = (1.0 - w0) / (n as f64 - 1.0);
            }
        }
        w
    }

    fn clip_vector(&self, w: &[f64]) -> Vec<f64> {
        if self.clip == 0.0 {
            return w.to_vec();
        }
        let lo = self.clip;
        let mut v: Vec<f64> = w.iter().map(|&x| x.max(lo)).collect();
        let s: f64 = v.iter().sum();
        for x in &mut v {
            *x /= s;
        }
        v
    }

    // Indices where the raw formula needed clipping. Bounded scan: the
    // parametric deviations are monotone in |i|, so scanning outward until
    // the deviation is safely inside the band finds the whole set.
    fn scan_exceptions(&self) -> Vec<i64> {
        let mut out = Vec::new();
        match &self.kind {
            ScheduleKind::Stationary => {}
            ScheduleKind::PowerDecay { exponent, scale, offset } => {
                let p = self.limiting.weights();
                let n = p.len() as f64;
                let lo = self.clip;
                let hi = 1.0 - self.clip * (n - 1.0);
                // |dev| below this never leaves the band
                let slack = (p[0] - lo).min(hi - p[0]).max(0.0);
                let r = if slack <= 0.0 {
                    i64::MAX
                } else {
                    ((scale.abs() / slack).powf(1.0 / exponent) - offset).ceil() as i64
                };
                let r = r.clamp(0, 100_000_000);
                for i in -r..=r {
                    let dev = if i == 0 && *offset == 0.0 {
                        f64::INFINITY
                    } else {
                        scale.abs() * (i.unsigned_abs() as f64 + offset).powf(-exponent)
                    };
                    let raw = p[0] + dev.copysign(*scale);
                    if raw < lo || raw > hi {
                        out.push(i);
                    }
                }
            }
            ScheduleKind::Table { entries } => {
                for (&i, w) in entries {
                    if w.iter().any(|&x| x < self.clip) {
                        out.push(i);
                    }
                }
            }
        }
        out
    }

    /// Radius beyond which parametric marginals are exactly equal to their
    /// clipped far-field value (`None` for table tails, which are exact `p`
    /// beyond the table extent).
    pub fn settled_radius(&self) -> Option<i64> {
        match &self.kind {
            ScheduleKind::Stationary => Some(0),
            ScheduleKind::PowerDecay { exponent, scale, offset } => {
                if self.clip <= 0.0 {
                    return None;
                }
                // |dev| <= clip  =>  value is clipped to the same constant
                let r = (scale.abs() / self.clip).powf(1.0 / exponent) - offset;
                if r.is_finite() && r < 4e18 {
                    Some(r.ceil() as i64 + 1)
                } else {
                    None
                }
            }
            ScheduleKind::Table { entries } => {
                let m = entries.keys().map(|k| k.unsigned_abs()).max().unwrap_or(0);
                Some(m as i64 + 1)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Windows and counter-based sampling
// ---------------------------------------------------------------------------

/// A finite stretch of the stream occupying absolute positions
/// `start .. start + len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub start: i64,
    pub symbols: Vec<u8>,
}

impl Window {
    pub fn new(start: i64, symbols: Vec<u8>) -> Self {
        Self { start, symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// One past the last absolute index.
    pub fn end(&self) -> i64 {
        self.start + self.symbols.len() as i64
    }

    /// Symbol at absolute index `i` (must lie inside the window).
    pub fn at(&self, i: i64) -> u8 {
        self.symbols[(i - self.start) as usize]
    }

    /// The same content re-anchored at a different start index.
    pub fn translated_to(&self, start: i64) -> Self {
        Self { start, symbols: self.symbols.clone() }
    }
}

// splitmix64: the standard 64-bit finalizer-based generator. Keyed by
// (seed, absolute index) it gives a counter-based stream: no state, exact
// position stability.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniform double in `[0,1)` keyed by `(seed, index, lane)`.
#[inline]
pub fn keyed_unit(seed: u64, index: i64, lane: u64) -> f64 {
    let h = splitmix64(seed ^ splitmix64(index as u64 ^ splitmix64(lane)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Draw one symbol from `pv` by inverse CDF at the keyed uniform.
#[inline]
pub fn draw_symbol(pv: &ProbVector, u: f64) -> u8 {
    let mut acc = 0.0;
    let w = pv.weights();
    for (s, &x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return s as u8;
        }
    }
    (w.len() - 1) as u8
}

/// Sample the window `[m, n]` (inclusive) of the stream determined by
/// `(schedule, seed)`.
///
/// Position `i` is drawn from `marginal_at(i)` via a counter-based uniform,
/// so the result is reproducible and agrees on overlaps with any other
/// window sampled with the same seed.
pub fn sample_window(schedule: &MarginalSchedule, m: i64, n: i64, seed: u64) -> Result<Window> {
    if m > n {
        return Err(Error::Domain(format!("window [{m}, {n}] is empty")));
    }
    let len = (n - m + 1) as u128;
    if len > WINDOW_CAP as u128 {
        return Err(Error::Capacity(format!(
            "window of {len} symbols exceeds cap {WINDOW_CAP}"
        )));
    }
    let mut symbols = Vec::with_capacity(len as usize);
    for i in m..=n {
        let pv = schedule.marginal_at(i);
        symbols.push(draw_symbol(&pv, keyed_unit(seed, i, 0)));
    }
    Ok(Window::new(m, symbols))
}

// ---------------------------------------------------------------------------
// Kakutani-type diagnostics
// ---------------------------------------------------------------------------

/// Outcome of a squared-difference series diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    Singular,
    Inconclusive,
}

/// Partial sums of `Σ_{|n|<=N} Σ_a (s1_n(a) - s2_n(a))^2` with tail
/// diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KakutaniReport {
    pub partial_sum: f64,
    /// Log-log slope of the per-|n| summand fitted over the last decade.
    pub tail_slope: f64,
    /// Largest single-step increment of the partial sum over the last decade.
    pub last_decade_max_delta: f64,
    pub verdict: Verdict,
    pub n_max: i64,
}

/// Threshold on the per-step increment below which the series is declared
/// Cauchy ("equivalent").
pub const EQUIVALENT_DELTA: f64 = 1e-6;
/// Summand slopes at least this flat indicate a divergent `~1/n` series
/// ("singular").
pub const SINGULAR_SLOPE: f64 = -1.1;

/// Kakutani dichotomy diagnostic between two schedules on the same alphabet:
/// the measures are equivalent iff `Σ_n Σ_a (μ_n(a) - ν_n(a))^2` converges
/// (both sides Doeblin), singular otherwise.
///
/// The verdict is numeric: "equivalent" when every per-step increment over
/// the last decade is below [`EQUIVALENT_DELTA`], "singular" when the fitted
/// summand slope is at least [`SINGULAR_SLOPE`], otherwise inconclusive.
pub fn kakutani_divergence(
    s1: &MarginalSchedule,
    s2: &MarginalSchedule,
    n_max: i64,
) -> Result<KakutaniReport> {
    if s1.alphabet != s2.alphabet {
        return Err(Error::MismatchedAlphabets(
            "kakutani_divergence needs a common alphabet".into(),
        ));
    }
    if n_max < 10 {
        return Err(Error::Domain("need N >= 10".into()));
    }
    series_report(n_max, |n| {
        let mut t = sq_diff(&s1.marginal_at(n), &s2.marginal_at(n));
        if n != 0 {
            t += sq_diff(&s1.marginal_at(-n), &s2.marginal_at(-n));
        }
        t
    })
}

fn sq_diff(a: &ProbVector, b: &ProbVector) -> f64 {
    a.weights()
        .iter()
        .zip(b.weights())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// `Σ_{|n|<=N} Σ_a (√ρ_n(a) - √ρ_{n-1}(a))^2`: the shift-nonsingularity
/// series; finite iff the shift is nonsingular for the product measure.
pub fn shift_nonsingularity_sum(schedule: &MarginalSchedule, n_max: i64) -> Result<f64> {
    Ok(shift_nonsingularity_report(schedule, n_max)?.partial_sum)
}

/// Same series with the finite-limit diagnostics of
/// [`kakutani_divergence`].
pub fn shift_nonsingularity_report(
    schedule: &MarginalSchedule,
    n_max: i64,
) -> Result<KakutaniReport> {
    if n_max < 10 {
        return Err(Error::Domain("need N >= 10".into()));
    }
    let term = |n: i64| {
        let cur = schedule.marginal_at(n);
        let prev = schedule.marginal_at(n - 1);
        cur.weights()
            .iter()
            .zip(prev.weights())
            .map(|(&x, &y)| {
                let d = x.sqrt() - y.sqrt();
                d * d
            })
            .sum::<f64>()
    };
    series_report(n_max, |n| {
        if n == 0 {
            term(0)
        } else {
            term(n) + term(-n)
        }
    })
}

// Shared series machinery: summand(n) for n = 0..N combining both tails.
fn series_report(n_max: i64, summand: impl Fn(i64) -> f64) -> Result<KakutaniReport> {
    let decade_start = (n_max / 10).max(1);
    let mut partial = 0.0;
    let mut max_delta = 0.0f64;
    let mut fit: Vec<(f64, f64)> = Vec::new();
    for n in 0..=n_max {
        let t = summand(n);
        partial += t;
        if n >= decade_start {
            max_delta = max_delta.max(t);
            if t > 0.0 {
                fit.push(((n as f64).ln(), t.ln()));
            }
        }
    }
    let tail_slope = if fit.len() >= 2 { ls_slope(&fit) } else { f64::NEG_INFINITY };
    let verdict = if max_delta < EQUIVALENT_DELTA {
        Verdict::Equivalent
    } else if tail_slope >= SINGULAR_SLOPE {
        Verdict::Singular
    } else {
        Verdict::Inconclusive
    };
    Ok(KakutaniReport { partial_sum: partial, tail_slope, last_decade_max_delta: max_delta, verdict, n_max })
}

/// Least-squares slope of `y` on `x`.
pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

// ---------------------------------------------------------------------------
// Countable-alphabet cut-off
// ---------------------------------------------------------------------------

/// Push a stationary countable-alphabet law through the cut-off
/// `θ_n(k) = min(k, n)`: symbols `0..n` keep their mass, symbol `n`
/// receives the whole tail. Returns the truncated schedule together with
/// the entropy (bits) of the pushforward limiting law.
pub fn truncate_alphabet(
    weights: impl Fn(usize) -> f64,
    n: usize,
) -> Result<(MarginalSchedule, f64)> {
    if n < 1 {
        return Err(Error::Domain("need n >= 1".into()));
    }
    let mut head: Vec<f64> = (0..n).map(&weights).collect();
    if head.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Domain("weights must be finite and nonnegative".into()));
    }
    let head_sum: f64 = head.iter().sum();
    if head_sum > 1.0 + 1e-9 {
        return Err(Error::Domain("weights are not a probability measure".into()));
    }
    // Verify summability to 1 by scanning the tail until it is negligible.
    let mut tail = 0.0;
    let mut k = n;
    let mut converged = false;
    while k < n + 10_000_000 {
        let w = weights(k);
        if w < 0.0 || !w.is_finite() {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        tail += w;
        if head_sum + tail > 1.0 + 1e-9 {
            return Err(Error::Domain("weights sum beyond 1; not summable to a law".into()));
        }
        if 1.0 - head_sum - tail < 1e-13 {
            converged = true;
            break;
        }
        k += 1;
    }
    if !converged {
        return Err(Error::Domain(
            "weight tail did not converge; non-summable sequence".into(),
        ));
    }
    let tail_mass = (1.0 - head_sum).max(0.0);
    head.push(tail_mass);
    let p = ProbVector::new(head)?;
    let entropy = p.entropy_bits();
    let schedule = MarginalSchedule::stationary(Alphabet::uniform_tokens(n + 1), p)?;
    Ok((schedule, entropy))
}

// ---------------------------------------------------------------------------
// Schedule description files
// ---------------------------------------------------------------------------

/// On-disk schedule description. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub alphabet: Vec<String>,
    pub marker_a: String,
    pub marker_b: String,
    pub kind: String,
    pub p: Vec<f64>,
    #[serde(default)]
    pub exponent: Option<f64>,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub offset: Option<f64>,
    #[serde(default)]
    pub clip: Option<f64>,
    #[serde(default)]
    pub table: Option<BTreeMap<i64, Vec<f64>>>,
}

impl ScheduleFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!(
                "schedule file: {e} (line {}, column {})",
                e.line(),
                e.column()
            ))
        })
    }

    pub fn build(&self) -> Result<MarginalSchedule> {
        let mut tokens = self.alphabet.clone();
        if tokens.is_empty() {
            return Err(Error::Config("empty alphabet".into()));
        }
        let marker_a = tokens
            .iter()
            .position(|t| *t == self.marker_a)
            .ok_or_else(|| Error::Config("marker_a not in alphabet".into()))? as u8;
        let marker_b = tokens
            .iter()
            .position(|t| *t == self.marker_b)
            .ok_or_else(|| Error::Config("marker_b not in alphabet".into()))? as u8;
        let alphabet = Alphabet::new(std::mem::take(&mut tokens), marker_a, marker_b)?;
        let p = ProbVector::new(self.p.clone())?;
        let clip = self.clip.unwrap_or(DEFAULT_CLIP);
        match self.kind.as_str() {
            "stationary" => MarginalSchedule::stationary(alphabet, p),
            "power_decay" => MarginalSchedule::power_decay(
                alphabet,
                p,
                self.exponent
                    .ok_or_else(|| Error::Config("power_decay needs exponent".into()))?,
                self.scale.ok_or_else(|| Error::Config("power_decay needs scale".into()))?,
                self.offset.unwrap_or(0.0),
                clip,
            ),
            "table" => MarginalSchedule::table(
                alphabet,
                p,
                self.table.clone().unwrap_or_default(),
                clip,
            ),
            other => Err(Error::Config(format!("unknown schedule kind {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical test schedules
// ---------------------------------------------------------------------------

/// Fair-coin limit with the `a_n = |n|^{-1/2}` perturbation on symbol 0,
/// clipped at the default floor. Nonsingular, singular w.r.t. the
/// stationary fair coin.
pub fn sqrt_decay_binary() -> MarginalSchedule {
    MarginalSchedule::power_decay(
        Alphabet::binary(),
        ProbVector::new(vec![0.5, 0.5]).unwrap(),
        0.5,
        -1.0,
        0.0,
        DEFAULT_CLIP,
    )
    .unwrap()
}

/// Uniform ternary limit with the `a_n = |n|^{-1/2}` perturbation on
/// symbol 0.
pub fn sqrt_decay_ternary() -> MarginalSchedule {
    MarginalSchedule::power_decay(
        Alphabet::uniform_tokens(3),
        ProbVector::uniform(3),
        0.5,
        -1.0,
        0.0,
        DEFAULT_CLIP,
    )
    .unwrap()
}

/// The totally dissipative example `μ_i(0) = 10/√(|i|+2)`, clipped.
pub fn dissipative_example(clip: f64) -> MarginalSchedule {
    MarginalSchedule::power_decay(
        Alphabet::binary(),
        ProbVector::new(vec![0.0, 1.0]).unwrap(),
        0.5,
        10.0,
        2.0,
        clip,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair() -> MarginalSchedule {
        MarginalSchedule::stationary(Alphabet::binary(), ProbVector::uniform(2)).unwrap()
    }

    #[test]
    fn stationary_marginal_is_constant() {
        let s = fair();
        assert_eq!(s.marginal_at(7).weights(), &[0.5, 0.5]);
        assert_eq!(s.marginal_at(-123).weights(), &[0.5, 0.5]);
    }

    #[test]
    fn power_decay_value_before_clip() {
        // w_0(n) = 1/2 - 0.5 |n|^{-1/2}; at n = 4 the deviation is 0.25.
        let s = MarginalSchedule::power_decay(
            Alphabet::binary(),
            ProbVector::uniform(2),
            0.5,
            -0.5,
            0.0,
            1e-3,
        )
        .unwrap();
        let w = s.marginal_at(4);
        assert!((w[0] - 0.25).abs() < 1e-12);
        assert!((w[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn dissipative_schedule_clips_at_origin() {
        // 10/sqrt(98+2) = 1 exactly; stored value is the clipped (1-δ, δ).
        let s = dissipative_example(1e-3);
        let w = s.marginal_at(98);
        assert!((w[0] - 0.999).abs() < 1e-12);
        assert!((w[1] - 0.001).abs() < 1e-12);
        assert!(s.doeblin_only_one_sided);
        assert!(s.exceptions.contains(&98));
        assert!(!s.exceptions.contains(&120));
    }

    #[test]
    fn marginals_respect_floor_outside_exceptions() {
        for s in [sqrt_decay_binary(), sqrt_decay_ternary(), dissipative_example(0.01)] {
            for i in [-1_000_000, -1000, -37, 0, 11, 999, 123_456] {
                let w = s.marginal_at(i);
                let sum: f64 = w.weights().iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                if !s.exceptions.contains(&i) {
                    for &x in w.weights() {
                        assert!(x >= s.doeblin_floor() - 1e-12, "i={i} w={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn limiting_convergence_in_tv() {
        let s = sqrt_decay_binary();
        let tv = |i: i64| {
            s.marginal_at(i)
                .weights()
                .iter()
                .zip(s.limiting.weights())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        };
        assert!(tv(1_000_000) < tv(1_000));
        assert!(tv(1_000_000) < 1e-2);
    }

    #[test]
    fn degenerate_law_samples_constant() {
        let s = MarginalSchedule::stationary(
            Alphabet::binary(),
            ProbVector::new(vec![1.0, 0.0]).unwrap(),
        )
        .unwrap();
        let w = sample_window(&s, 0, 99, 42).unwrap();
        assert!(w.symbols.iter().all(|&x| x == 0));
    }

    #[test]
    fn fair_coin_frequency_within_3_sigma() {
        let s = fair();
        let n = 1_000_000i64;
        let w = sample_window(&s, 0, n - 1, 7).unwrap();
        let zeros = w.symbols.iter().filter(|&&x| x == 0).count() as f64;
        let freq = zeros / n as f64;
        assert!((freq - 0.5).abs() < 0.002, "freq={freq}");
    }

    #[test]
    fn sampling_is_position_stable_and_deterministic() {
        let s = sqrt_decay_binary();
        let a = sample_window(&s, 0, 9, 5).unwrap();
        let b = sample_window(&s, -5, 14, 5).unwrap();
        for i in 0..=9 {
            assert_eq!(a.at(i), b.at(i));
        }
        let c = sample_window(&s, 0, 9, 5).unwrap();
        assert_eq!(a, c);
        let d = sample_window(&s, 0, 9, 6).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn window_cap_is_enforced() {
        let s = fair();
        let r = sample_window(&s, 0, WINDOW_CAP as i64 + 10, 1);
        assert!(matches!(r, Err(Error::Capacity(_))));
    }

    #[test]
    fn sampled_marginals_pass_chi_square_gof() {
        let s = sqrt_decay_ternary();
        let reps = 100_000u64;
        for &pos in &[-40i64, -3, 0, 17, 2000] {
            let pv = s.marginal_at(pos);
            let mut counts = vec![0u64; 3];
            for r in 0..reps {
                let u = keyed_unit(977 + r, pos, 1);
                counts[draw_symbol(&pv, u) as usize] += 1;
            }
            let expected: Vec<f64> =
                pv.weights().iter().map(|&w| w * reps as f64).collect();
            let (_, p) = crate::analysis::chi_square_gof(&counts, &expected).unwrap();
            assert!(p > 0.001, "pos {pos}: p={p}");
        }
    }

    #[test]
    fn kakutani_identical_schedules_equivalent() {
        let s = fair();
        let r = kakutani_divergence(&s, &s, 100).unwrap();
        assert_eq!(r.partial_sum, 0.0);
        assert_eq!(r.verdict, Verdict::Equivalent);
    }

    #[test]
    fn kakutani_sqrt_decay_is_singular() {
        let r = kakutani_divergence(&sqrt_decay_binary(), &fair(), 100_000).unwrap();
        assert_eq!(r.verdict, Verdict::Singular);
        // summand ~ 1/n gives partial sums ~ 4 ln N
        assert!(r.partial_sum > 1.8 * (100_000f64).ln());
    }

    #[test]
    fn kakutani_inverse_decay_is_equivalent() {
        let s = MarginalSchedule::power_decay(
            Alphabet::binary(),
            ProbVector::uniform(2),
            1.0,
            -1.0,
            0.0,
            DEFAULT_CLIP,
        )
        .unwrap();
        let r = kakutani_divergence(&s, &fair(), 100_000).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent);
        assert!(r.last_decade_max_delta < 1e-6);
    }

    #[test]
    fn kakutani_is_symmetric() {
        let a = sqrt_decay_binary();
        let b = fair();
        let r1 = kakutani_divergence(&a, &b, 1000).unwrap();
        let r2 = kakutani_divergence(&b, &a, 1000).unwrap();
        assert_eq!(r1.partial_sum, r2.partial_sum);
    }

    #[test]
    fn kakutani_rejects_mismatched_alphabets() {
        let a = fair();
        let b = MarginalSchedule::stationary(Alphabet::uniform_tokens(3), ProbVector::uniform(3))
            .unwrap();
        assert!(matches!(
            kakutani_divergence(&a, &b, 100),
            Err(Error::MismatchedAlphabets(_))
        ));
    }

    #[test]
    fn nonsingularity_sum_stationary_is_zero() {
        assert_eq!(shift_nonsingularity_sum(&fair(), 1000).unwrap(), 0.0);
    }

    #[test]
    fn nonsingularity_sum_dissipative_converges() {
        let s = dissipative_example(1e-3);
        let a = shift_nonsingularity_sum(&s, 10_000).unwrap();
        let b = shift_nonsingularity_sum(&s, 100_000).unwrap();
        assert!(b.is_finite());
        assert!(b - a < 1e-3, "tail grows by {}", b - a);
        let r = shift_nonsingularity_report(&s, 100_000).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent);
    }

    #[test]
    fn nonsingularity_sum_alternating_diverges_linearly() {
        let mut entries = BTreeMap::new();
        for i in -2000i64..=2000 {
            let w = if i.rem_euclid(2) == 0 { vec![0.25, 0.75] } else { vec![0.75, 0.25] };
            entries.insert(i, w);
        }
        let s = MarginalSchedule::table(
            Alphabet::binary(),
            ProbVector::new(vec![0.25, 0.75]).unwrap(),
            entries,
            0.0,
        )
        .unwrap();
        let one_term = 2.0 * (0.25f64.sqrt() - 0.75f64.sqrt()).powi(2);
        let sum = shift_nonsingularity_sum(&s, 1000).unwrap();
        assert!((sum - one_term * 2001.0).abs() / sum < 0.01);
    }

    #[test]
    fn truncate_geometric_tail_collapse() {
        let geom = |i: usize| 0.5f64.powi(i as i32 + 1);
        let (s1, _) = truncate_alphabet(geom, 1).unwrap();
        assert_eq!(s1.limiting.weights(), &[0.5, 0.5]);
        let (s3, _) = truncate_alphabet(geom, 3).unwrap();
        assert_eq!(s3.limiting.weights(), &[0.5, 0.25, 0.125, 0.125]);
        let (_, h10) = truncate_alphabet(geom, 10).unwrap();
        assert!((h10 - 2.0).abs() < 0.03, "H = {h10}");
    }

    #[test]
    fn truncate_rejects_non_summable() {
        let harmonic = |i: usize| 0.1 / (i + 1) as f64;
        assert!(truncate_alphabet(harmonic, 3).is_err());
    }

    #[test]
    fn schedule_file_round_trip_and_unknown_keys() {
        let text = r#"{"alphabet":["0","1"],"marker_a":"0","marker_b":"1",
            "kind":"power_decay","p":[0.5,0.5],"exponent":0.5,"scale":-1.0,
            "offset":0.0,"clip":0.001}"#;
        let f = ScheduleFile::parse(text).unwrap();
        let s = f.build().unwrap();
        assert_eq!(s, sqrt_decay_binary());
        let bad = r#"{"alphabet":["0","1"],"marker_a":"0","marker_b":"1",
            "kind":"stationary","p":[0.5,0.5],"wat":1}"#;
        assert!(ScheduleFile::parse(bad).is_err());
    }

    #[test]
    fn translated_schedule_shifts_marginals() {
        let s = sqrt_decay_binary();
        let t = s.translated(3);
        for i in [-10i64, 0, 5, 100] {
            assert_eq!(t.marginal_at(i), s.marginal_at(i - 3));
        }
    }
}
