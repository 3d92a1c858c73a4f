//! The assembled factor map: window → alternating intervals → goodness and
//! `ψ` codes → dyadic expansion → Mešalkin delivery of the surplus symbols
//! → output stream with per-position coding radii.
//!
//! Every stage is a pure function of window *content*; absolute indices
//! only enter through the window's own symbols, which is what makes the
//! map equivariant. Finite windows cannot resolve everything: positions
//! left of the first marker, trailing partial intervals, and starved red
//! or maroon intervals come back as `unresolved` rather than as errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expand::{expand_uniform, ExpansionPlan};
use crate::intervals::{decompose_by, find_markers_by};
use crate::matching::{color_intervals, mesalkin_match, Color};
use crate::source::{sample_window, keyed_unit, MarginalSchedule, Window};
use crate::typecode::{psi_encode, TypeCodebook};
use crate::{Error, Result};

/// Run statistics for one extraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub good_intervals: u64,
    pub bad_intervals: u64,
    pub red_intervals: u64,
    pub discarded_extras: u64,
    pub resolved_positions: u64,
    pub unresolved_positions: u64,
    pub no_marker: bool,
}

/// Diagnostic record of one alternating interval (for inspection and
/// equivariance checks).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub start: i64,
    pub len: u32,
    pub color: Color,
    /// `ψ` code for green intervals.
    pub code: Option<u64>,
}

/// Output stream over the window's positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorOutput {
    pub start: i64,
    /// One slot per position `start..start+len`; `None` = unresolved.
    pub out: Vec<Option<u16>>,
    /// Coding radius per resolved position: the value is a function of the
    /// source symbols within `[pos - r, pos + r]`.
    pub radius: Vec<Option<u32>>,
    pub stats: ExtractStats,
    pub intervals: Vec<IntervalRecord>,
}

impl FactorOutput {
    pub fn end(&self) -> i64 {
        self.start + self.out.len() as i64
    }

    pub fn value_at(&self, pos: i64) -> Option<u16> {
        if pos < self.start || pos >= self.end() {
            return None;
        }
        self.out[(pos - self.start) as usize]
    }

    pub fn radius_at(&self, pos: i64) -> Option<u32> {
        if pos < self.start || pos >= self.end() {
            return None;
        }
        self.radius[(pos - self.start) as usize]
    }

    /// Resolved symbols in position order.
    pub fn resolved_symbols(&self) -> Vec<u16> {
        self.out.iter().flatten().copied().collect()
    }
}

/// Extract the output stream from one window.
///
/// Per green interval, `ψ` followed by the dyadic expansion yields `k+1`
/// symbols: the first `k` fill the interval's own positions left to right
/// and the last is the *extra*, delivered through the Mešalkin matching
/// (a red partner receives it at its single position; a maroon's `i`-th
/// position receives the extra of its `i`-th partner). Extras of unmatched
/// greens are discarded.
pub fn extract(
    w: &Window,
    schedule: &MarginalSchedule,
    codebook: &TypeCodebook,
    plan: &ExpansionPlan,
) -> Result<FactorOutput> {
    extract_with_encoder(w, schedule, codebook, plan, &|word, _| psi_encode(word, codebook))
}

// Seam for the negative-control tests: the encoder also receives the
// interval's position relative to the window start, so a deliberately
// frame-dependent encoder can demonstrate what an equivariance failure
// looks like. The honest encoder ignores it.
pub(crate) fn extract_with_encoder(
    w: &Window,
    schedule: &MarginalSchedule,
    codebook: &TypeCodebook,
    plan: &ExpansionPlan,
    encoder: &dyn Fn(&[u8], i64) -> Result<u64>,
) -> Result<FactorOutput> {
    if codebook.k != plan.k {
        return Err(Error::Config(format!(
            "codebook k = {} but plan k = {}",
            codebook.k, plan.k
        )));
    }
    if codebook.b_bits != plan.m_bits {
        return Err(Error::Config(format!(
            "codebook width 2^{} but plan width 2^{}",
            codebook.b_bits, plan.m_bits
        )));
    }
    if codebook.a_size != schedule.alphabet.size() {
        return Err(Error::Config("codebook alphabet size != schedule alphabet".into()));
    }
    let k = codebook.k;
    let marker_a = schedule.alphabet.marker_a();
    let marker_b = schedule.alphabet.marker_b();
    let markers = find_markers_by(w, k, marker_a, marker_b);
    let d = decompose_by(w, k, marker_a, marker_b);

    let mut out = vec![None; w.len()];
    let mut radius = vec![None; w.len()];
    let mut stats = ExtractStats { no_marker: d.no_marker, ..Default::default() };
    let mut records = Vec::with_capacity(d.intervals.len());

    if d.no_marker {
        stats.unresolved_positions = w.len() as u64;
        return Ok(FactorOutput { start: w.start, out, radius, stats, intervals: records });
    }

    // goodness and codes per length-k interval
    let mut goodness = Vec::new();
    let mut codes: Vec<Option<u64>> = vec![None; d.intervals.len()];
    for (idx, iv) in d.intervals.iter().enumerate() {
        if iv.len != 1 {
            let word: Vec<u8> = (0..k as i64).map(|j| w.at(iv.start + j)).collect();
            match encoder(&word, iv.start - w.start) {
                Ok(c) => {
                    goodness.push(true);
                    codes[idx] = Some(c);
                }
                Err(Error::NotGood) => goodness.push(false),
                Err(e) => return Err(e),
            }
        }
    }
    let colors = color_intervals(&d, &goodness)?;
    let assignment = mesalkin_match(&colors);

    for (idx, iv) in d.intervals.iter().enumerate() {
        records.push(IntervalRecord {
            start: iv.start,
            len: iv.len,
            color: colors.colors[idx],
            code: codes[idx],
        });
    }

    // expansions per green interval
    let expansions: Vec<Option<Vec<u16>>> = codes
        .iter()
        .map(|c| c.map(|code| expand_uniform(code, plan)).transpose())
        .collect::<Result<_>>()?;

    // anchor(start) = start of the nearest marker ending at or before start
    let anchor = |start: i64| -> i64 {
        let mut best = markers[0].start;
        for m in &markers {
            if m.end <= start {
                best = best.max(m.start);
            } else {
                break;
            }
        }
        best
    };
    let put = |out: &mut Vec<Option<u16>>,
               radius: &mut Vec<Option<u32>>,
               pos: i64,
               val: u16,
               span: (i64, i64)| {
        let slot = (pos - w.start) as usize;
        assert!(out[slot].is_none(), "double write at position {pos}");
        out[slot] = Some(val);
        let r = (pos - span.0).max(span.1 - pos);
        radius[slot] = Some(r as u32);
    };

    // greens fill their own k positions
    for (idx, iv) in d.intervals.iter().enumerate() {
        if let Some(exp) = &expansions[idx] {
            stats.good_intervals += 1;
            let span = (anchor(iv.start), iv.end() - 1);
            for j in 0..k as i64 {
                put(&mut out, &mut radius, iv.start + j, exp[j as usize], span);
            }
        } else if iv.len == 1 {
            stats.red_intervals += 1;
        } else {
            stats.bad_intervals += 1;
        }
    }

    // extras travel along the matching
    let mut donated = vec![false; d.intervals.len()];
    for (&claimant, partners) in &assignment.partners {
        let civ = &d.intervals[claimant];
        for (slot, &g) in partners.iter().enumerate() {
            let giv = &d.intervals[g];
            let extra = expansions[g].as_ref().expect("partners are green")[k as usize];
            donated[g] = true;
            let pos = civ.start + slot as i64;
            let span = (anchor(civ.start), giv.end() - 1);
            put(&mut out, &mut radius, pos, extra, span);
        }
    }
    for (idx, iv) in d.intervals.iter().enumerate() {
        if expansions[idx].is_some() && !donated[idx] {
            let _ = iv;
            stats.discarded_extras += 1;
        }
    }

    stats.resolved_positions = out.iter().flatten().count() as u64;
    stats.unresolved_positions = w.len() as u64 - stats.resolved_positions;
    Ok(FactorOutput { start: w.start, out, radius, stats, intervals: records })
}

// ---------------------------------------------------------------------------
// Coding-radius profile
// ---------------------------------------------------------------------------

/// Histogram of coding radii over resolved positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusProfile {
    pub histogram: std::collections::BTreeMap<u32, u64>,
    pub resolved: u64,
    pub unresolved: u64,
    pub max_radius: u32,
}

impl RadiusProfile {
    /// Fraction of resolved positions with radius above `r`.
    pub fn tail_fraction_above(&self, r: u32) -> f64 {
        if self.resolved == 0 {
            return 0.0;
        }
        let above: u64 =
            self.histogram.iter().filter(|(&rad, _)| rad > r).map(|(_, &c)| c).sum();
        above as f64 / self.resolved as f64
    }
}

pub fn coding_radius_profile(output: &FactorOutput) -> Result<RadiusProfile> {
    let mut histogram = std::collections::BTreeMap::new();
    let mut resolved = 0u64;
    let mut max_radius = 0u32;
    for r in output.radius.iter().flatten() {
        *histogram.entry(*r).or_insert(0u64) += 1;
        resolved += 1;
        max_radius = max_radius.max(*r);
    }
    if resolved == 0 {
        return Err(Error::InsufficientData("no resolved positions".into()));
    }
    Ok(RadiusProfile {
        histogram,
        resolved,
        unresolved: output.out.len() as u64 - resolved,
        max_radius,
    })
}

// ---------------------------------------------------------------------------
// Equivariance check
// ---------------------------------------------------------------------------

/// Result of the equivariance sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub trials: u64,
    pub compared_positions: u64,
    pub mismatches: Vec<i64>,
    pub pass: bool,
}

/// Sample windows into the same realized stream at offsets differing by
/// one, extract both, and compare values and radii on the positions both
/// resolve. The factor map commutes with the shift, so any mismatch is a
/// failure.
pub fn equivariance_check(
    schedule: &MarginalSchedule,
    codebook: &TypeCodebook,
    plan: &ExpansionPlan,
    trials: u64,
    window_len: i64,
    seed: u64,
) -> Result<EquivarianceReport> {
    equivariance_check_with_encoder(schedule, codebook, plan, trials, window_len, seed, &|w, _| {
        psi_encode(w, codebook)
    })
}

pub(crate) fn equivariance_check_with_encoder(
    schedule: &MarginalSchedule,
    codebook: &TypeCodebook,
    plan: &ExpansionPlan,
    trials: u64,
    window_len: i64,
    seed: u64,
    encoder: &dyn Fn(&[u8], i64) -> Result<u64>,
) -> Result<EquivarianceReport> {
    if trials < 1 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let mut mismatches = Vec::new();
    let mut compared = 0u64;
    for t in 0..trials {
        let m = (keyed_unit(seed, t as i64, 7) * 2000.0) as i64 - 1000;
        let w1 = sample_window(schedule, m, m + window_len - 1, seed)?;
        let w2 = sample_window(schedule, m + 1, m + window_len, seed)?;
        let o1 = extract_with_encoder(&w1, schedule, codebook, plan, encoder)?;
        let o2 = extract_with_encoder(&w2, schedule, codebook, plan, encoder)?;
        for pos in (m + 1)..(m + window_len) {
            if let (Some(v1), Some(v2)) = (o1.value_at(pos), o2.value_at(pos)) {
                compared += 1;
                if v1 != v2 || o1.radius_at(pos) != o2.radius_at(pos) {
                    mismatches.push(pos);
                }
            }
        }
    }
    let pass = mismatches.is_empty();
    Ok(EquivarianceReport { trials, compared_positions: compared, mismatches, pass })
}

// ---------------------------------------------------------------------------
// Chunked extraction
// ---------------------------------------------------------------------------

/// Default chunk overlap, in multiples of `k`.
pub const DEFAULT_OVERLAP_K: i64 = 8;

/// Extract `[from, to]` in overlapping chunks (processed in parallel) and
/// merge; resolved values must agree wherever chunks overlap, and the
/// merged result equals what a single window would produce on the
/// positions either side resolves.
pub fn extract_chunked(
    schedule: &MarginalSchedule,
    codebook: &TypeCodebook,
    plan: &ExpansionPlan,
    from: i64,
    to: i64,
    seed: u64,
    chunk_len: i64,
) -> Result<FactorOutput> {
    if from > to {
        return Err(Error::Domain("empty range".into()));
    }
    let overlap = DEFAULT_OVERLAP_K * codebook.k as i64;
    let chunk_len = chunk_len.max(overlap * 2 + 2 * codebook.k as i64);
    let mut starts = Vec::new();
    let mut s = from;
    loop {
        starts.push(s);
        if s + chunk_len > to {
            break;
        }
        s += chunk_len - overlap;
    }
    let chunks: Vec<FactorOutput> = starts
        .par_iter()
        .map(|&cs| {
            let ce = (cs + chunk_len - 1).min(to);
            let w = sample_window(schedule, cs, ce, seed)?;
            extract(&w, schedule, codebook, plan)
        })
        .collect::<Result<_>>()?;

    let len = (to - from + 1) as usize;
    let mut out = vec![None; len];
    let mut radius = vec![None; len];
    let mut stats = ExtractStats::default();
    let mut intervals = Vec::new();
    let mut covered_to = i64::MIN;
    for c in &chunks {
        for (i, (v, r)) in c.out.iter().zip(&c.radius).enumerate() {
            let pos = c.start + i as i64;
            let slot = (pos - from) as usize;
            if let Some(v) = v {
                match out[slot] {
                    None => {
                        out[slot] = Some(*v);
                        radius[slot] = *r;
                    }
                    Some(prev) => {
                        if prev != *v {
                            return Err(Error::Config(format!(
                                "chunk overlap disagreement at position {pos}"
                            )));
                        }
                    }
                }
            }
        }
        for rec in &c.intervals {
            if rec.start > covered_to {
                intervals.push(rec.clone());
                covered_to = rec.start;
            }
        }
        stats.discarded_extras += c.stats.discarded_extras;
    }
    // interval counts from the deduplicated records, so overlaps are not
    // counted twice
    for rec in &intervals {
        match rec.color {
            crate::matching::Color::Green => stats.good_intervals += 1,
            crate::matching::Color::Maroon => stats.bad_intervals += 1,
            crate::matching::Color::Red => stats.red_intervals += 1,
        }
    }
    stats.resolved_positions = out.iter().flatten().count() as u64;
    stats.unresolved_positions = len as u64 - stats.resolved_positions;
    stats.no_marker = stats.resolved_positions == 0;
    Ok(FactorOutput { start: from, out, radius, stats, intervals })
}

// ---------------------------------------------------------------------------
// Block-level extraction chain
// ---------------------------------------------------------------------------

/// Statistics of a block-level run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BlockChainStats {
    pub blocks_drawn: u64,
    pub blocks_good: u64,
    pub symbols_emitted: u64,
}

/// Marker-free statistical harness for the per-interval chain
/// `conditional block → ψ → expansion`.
///
/// Blocks of length `k` are drawn at positions `i, i+k, i+2k, ...`
/// sweeping symmetrically over `[-blocks·k/2, blocks·k/2)`; good blocks
/// are encoded and expanded, and the `k+1`-symbol groups are concatenated.
/// This exposes the law of the produced symbols at scale (the windowed
/// pipeline transports exactly these symbols, but marker density at large
/// `k` makes window harvests impractically sparse).
pub fn block_extraction_stream(
    schedule: &MarginalSchedule,
    codebook: &TypeCodebook,
    plan: &ExpansionPlan,
    blocks: u64,
    seed: u64,
) -> Result<(Vec<u16>, BlockChainStats)> {
    if codebook.k != plan.k || codebook.b_bits != plan.m_bits {
        return Err(Error::Config("codebook and plan disagree".into()));
    }
    let k = codebook.k as i64;
    let mut stream = Vec::new();
    let mut stats = BlockChainStats::default();
    let start = -(blocks as i64) * k / 2;
    let mut word = vec![0u8; codebook.k as usize];
    for t in 0..blocks as i64 {
        let base = start + t * k;
        for (j, slot) in word.iter_mut().enumerate() {
            let pv = schedule.marginal_at(base + j as i64);
            *slot = crate::source::draw_symbol(&pv, keyed_unit(seed, base + j as i64, 0));
        }
        stats.blocks_drawn += 1;
        match psi_encode(&word, codebook) {
            Ok(code) => {
                stats.blocks_good += 1;
                let out = expand_uniform(code, plan)?;
                stats.symbols_emitted += out.len() as u64;
                stream.extend(out);
            }
            Err(Error::NotGood) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((stream, stats))
}
