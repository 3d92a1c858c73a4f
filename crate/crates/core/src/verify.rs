//! Desk-scale verification suite.
//!
//! Each check pins its thresholds in code and reports one pass/fail line;
//! the `nseb verify` subcommand and the `acceptance` test target both run
//! these. The underlying statements are asymptotic, so every check is a
//! property at explicit finite scale with explicit tolerances.

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::analysis;
use crate::expand::{plan_for_entropy, ExpansionPlan, PlanOutcome};
use crate::factor;
use crate::intervals;
use crate::matching::{mesalkin_match, Color, ColorSequence};
use crate::source::{
    self, dissipative_example, keyed_unit, sample_window, sqrt_decay_binary, sqrt_decay_ternary,
    Alphabet, MarginalSchedule, ProbVector, Verdict, Window,
};
use crate::typecode::{
    build_codebook, default_delta, defects_with_table, empirical_counts, good_mass, psi_encode,
    FiberTable, MassMethod, RationalProb,
};
use crate::Error;

/// One verification outcome.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
}

impl CriterionReport {
    fn new(name: &'static str, pass: bool, details: String) -> Self {
        Self { name, pass, details }
    }
}

fn fail(name: &'static str, e: impl std::fmt::Display) -> CriterionReport {
    CriterionReport::new(name, false, format!("error: {e}"))
}

/// Run every check in order.
pub fn run_all() -> Vec<CriterionReport> {
    vec![
        psi_uniformity(),
        defect_summability(),
        extraction_quality(),
        entropy_ceiling(),
        matching_success(),
        kakutani_dichotomy(),
        dissipativity_series(),
        shannon_concentration(),
        equivariance_determinism(),
        interval_oracle(),
    ]
}

// ---------------------------------------------------------------------------
// 1. ψ exact uniformity
// ---------------------------------------------------------------------------

/// Exhaustive fiber counts for the fair-coin codebooks at `ε = 0.25`.
///
/// `k = 8` and `k = 12` admit codebooks; every fiber within every kept
/// prefix must have size exactly `m(q,k)`. At `k = 10` the construction is
/// arithmetically infeasible — the only admissible type has
/// `C(10,5) = 252 < 2^⌈7.5⌉ = 256` — so the required outcome there is the
/// infeasibility error naming that type.
pub fn psi_uniformity() -> CriterionReport {
    const NAME: &str = "psi-uniformity";
    let p = RationalProb::uniform(2);
    let delta = default_delta(&p);
    let mut details = Vec::new();
    for k in [8u32, 10, 12] {
        match build_codebook(&p, 0, k, 0.25, delta) {
            Ok(cb) => {
                // enumerate all 2^k words; group kept words per (type, c)
                let mut fibers: std::collections::HashMap<(Vec<u32>, u64), u64> =
                    std::collections::HashMap::new();
                let mut kept_words = 0u64;
                for bits in 0..(1u64 << k) {
                    let word: Vec<u8> =
                        (0..k).map(|j| ((bits >> (k - 1 - j)) & 1) as u8).collect();
                    match psi_encode(&word, &cb) {
                        Ok(c) => {
                            kept_words += 1;
                            *fibers
                                .entry((empirical_counts(&word, 2), c))
                                .or_insert(0) += 1;
                        }
                        Err(Error::NotGood) => {}
                        Err(e) => return fail(NAME, e),
                    }
                }
                if kept_words == 0 {
                    return CriterionReport::new(NAME, false, format!("k={k}: empty good set"));
                }
                for ((counts, c), size) in &fibers {
                    let m = cb
                        .multiplicity(counts)
                        .and_then(|m| m.to_u64())
                        .unwrap_or(0);
                    if *size != m {
                        return CriterionReport::new(
                            NAME,
                            false,
                            format!("k={k}: fiber ({counts:?}, {c}) has {size} != m = {m}"),
                        );
                    }
                }
                // every c in B_k must be covered within every admissible type
                let expected_fibers = cb.entries().len() as u64 * cb.b_size();
                if fibers.len() as u64 != expected_fibers {
                    return CriterionReport::new(
                        NAME,
                        false,
                        format!("k={k}: {} fibers, expected {expected_fibers}", fibers.len()),
                    );
                }
                details.push(format!("k={k}: {} kept words, all fibers exact", kept_words));
            }
            Err(Error::Infeasible(msg)) if k == 10 => {
                if msg.contains("[5, 5]") && msg.contains("252") {
                    details.push(format!("k=10: infeasible as required ({msg})"));
                } else {
                    return CriterionReport::new(
                        NAME,
                        false,
                        format!("k=10 infeasible with unexpected payload: {msg}"),
                    );
                }
            }
            Err(e) => return fail(NAME, e),
        }
    }
    CriterionReport::new(NAME, true, details.join("; "))
}

// ---------------------------------------------------------------------------
// 2. Uniformity-defect summability
// ---------------------------------------------------------------------------

/// Exact per-index defects for the clipped `|n|^{-1/2}` schedule at
/// `k = 6`: the partial sums of `Σ_c defect²` must increase by less than
/// `10^-6` over the last decade of `|i| <= 10^4`.
pub fn defect_summability() -> CriterionReport {
    const NAME: &str = "defect-summability";
    let schedule = sqrt_decay_binary();
    let p = RationalProb::uniform(2);
    let cb = match build_codebook(&p, 0, 6, 0.5, default_delta(&p)) {
        Ok(cb) => cb,
        Err(e) => return fail(NAME, e),
    };
    let table = match FiberTable::build(&cb) {
        Ok(t) => t,
        Err(e) => return fail(NAME, e),
    };
    let sum_sq_at = |i: i64| -> crate::Result<f64> {
        Ok(defects_with_table(&schedule, i, &cb, &table)?
            .iter()
            .map(|d| d * d)
            .sum())
    };
    let mut s_1e3 = 0.0;
    let mut s_1e4 = 0.0;
    for i in -10_000i64..=10_000 {
        let t = match sum_sq_at(i) {
            Ok(t) => t,
            Err(e) => return fail(NAME, e),
        };
        s_1e4 += t;
        if i.abs() <= 1_000 {
            s_1e3 += t;
        }
    }
    let increment = s_1e4 - s_1e3;
    let pass = increment < 1e-6;
    CriterionReport::new(
        NAME,
        pass,
        format!(
            "sum(|i|<=1e3) = {s_1e3:.3e}, sum(|i|<=1e4) = {s_1e4:.3e}, \
             last-decade increment = {increment:.3e} (< 1e-6 required)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Near-optimal extraction quality
// ---------------------------------------------------------------------------

// Codebook/plan used by the statistical extraction checks: uniform ternary
// limit (the dyadic expansion needs more than one bit of source entropy
// per position, which no binary source can supply).
fn ternary_chain() -> crate::Result<(MarginalSchedule, crate::typecode::TypeCodebook, ExpansionPlan)>
{
    let schedule = sqrt_decay_ternary();
    let p = RationalProb::uniform(3);
    let cb = build_codebook(&p, 0, 16, 0.5, Ratio::new(9, 20))?;
    let plan = match plan_for_entropy(16, p.entropy_bits(), 0.5, 0.5) {
        PlanOutcome::Feasible { plan, .. } => plan,
        PlanOutcome::Infeasible { reason, .. } => return Err(Error::Infeasible(reason)),
    };
    if plan.m_bits != cb.b_bits {
        return Err(Error::Config("plan/codebook width mismatch".into()));
    }
    Ok((schedule, cb, plan))
}

/// Law quality of the produced stream for the clipped `|n|^{-1/2}` ternary
/// schedule at `k = 16`, planner-chosen `j`: over at least `10^5` output
/// symbols, per-symbol TV to uniform `< 0.02`, lag-1..4 independence
/// `p > 0.001`, and plug-in entropy within `0.05` bits of `j`.
pub fn extraction_quality() -> CriterionReport {
    const NAME: &str = "extraction-quality";
    let (schedule, cb, plan) = match ternary_chain() {
        Ok(t) => t,
        Err(e) => return fail(NAME, e),
    };
    let (stream, stats) =
        match factor::block_extraction_stream(&schedule, &cb, &plan, 12_000, 20_260_810) {
            Ok(r) => r,
            Err(e) => return fail(NAME, e),
        };
    if stream.len() < 100_000 {
        return CriterionReport::new(
            NAME,
            false,
            format!("only {} output symbols (need 1e5)", stream.len()),
        );
    }
    let c = plan.out_alphabet_size() as usize;
    let tv = analysis::tv_to_uniform(&stream, c);
    let mut lag_ps = Vec::new();
    for lag in 1..=4 {
        match analysis::lag_independence(&stream, c, lag) {
            Ok((_, p)) => lag_ps.push(p),
            Err(e) => return fail(NAME, e),
        }
    }
    let ent = match analysis::plug_in_entropy(&stream, c, 10, 77) {
        Ok(r) => r.plug_in_rate,
        Err(e) => return fail(NAME, e),
    };
    let j = plan.j_bits as f64;
    let pass = tv < 0.02 && lag_ps.iter().all(|&p| p > 0.001) && (ent - j).abs() < 0.05;
    CriterionReport::new(
        NAME,
        pass,
        format!(
            "j={}, {} symbols from {} good blocks / {} drawn; TV {tv:.4} (<0.02), \
             lag p-values {:?} (>0.001), plug-in {ent:.4} vs j = {j} (±0.05)",
            plan.j_bits, stream.len(), stats.blocks_good, stats.blocks_drawn, lag_ps
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Entropy ceiling
// ---------------------------------------------------------------------------

/// No pipeline output may exceed `H(p) + 0.05` bits per symbol, and an
/// injected control with entropy above `H(p) + 0.3` must fail the check.
pub fn entropy_ceiling() -> CriterionReport {
    const NAME: &str = "entropy-ceiling";
    let (schedule, cb, plan) = match ternary_chain() {
        Ok(t) => t,
        Err(e) => return fail(NAME, e),
    };
    let p3 = ProbVector::uniform(3);
    let (stream, _) =
        match factor::block_extraction_stream(&schedule, &cb, &plan, 12_000, 20_260_810) {
            Ok(r) => r,
            Err(e) => return fail(NAME, e),
        };
    let honest =
        match analysis::entropy_ceiling_report(&stream, plan.out_alphabet_size() as usize, &p3, 10, 5)
        {
            Ok(r) => r,
            Err(e) => return fail(NAME, e),
        };
    // constant output passes trivially
    let constant = vec![0u16; 120_000];
    let flat = match analysis::entropy_ceiling_report(&constant, 2, &p3, 2, 5) {
        Ok(r) => r,
        Err(e) => return fail(NAME, e),
    };
    // negative control: uniform 4-ary iid has 2 bits > log2(3) + 0.3
    let s4 = MarginalSchedule::stationary(Alphabet::uniform_tokens(4), ProbVector::uniform(4))
        .unwrap();
    let w = match sample_window(&s4, 0, 119_999, 55) {
        Ok(w) => w,
        Err(e) => return fail(NAME, e),
    };
    let control: Vec<u16> = w.symbols.iter().map(|&x| x as u16).collect();
    let inflated = match analysis::entropy_ceiling_report(&control, 4, &p3, 2, 5) {
        Ok(r) => r,
        Err(e) => return fail(NAME, e),
    };
    let pass = honest.pass && flat.pass && !inflated.pass;
    CriterionReport::new(
        NAME,
        pass,
        format!(
            "pipeline rate {:.4} <= {:.4}; constant rate {:.4}; control rate {:.4} \
             correctly {}",
            honest.plug_in_rate,
            honest.ceiling,
            flat.plug_in_rate,
            inflated.plug_in_rate,
            if inflated.pass { "ACCEPTED (bug)" } else { "rejected" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Mešalkin matching success
// ---------------------------------------------------------------------------

/// (a) With `k = 16` and interval goodness matching the real fair-coin
/// codebook (good mass 0.96875 >= 0.9), the unresolved red/maroon fraction
/// in the left 90% of a `10^5`-interval run stays below 1%.
/// (b) The pass algorithm agrees with an exhaustive transcription of the
/// inductive matching on every colour sequence of length <= 12, k <= 3.
pub fn matching_success() -> CriterionReport {
    const NAME: &str = "matching-success";
    // the colour law is tied to a real codebook: binary k=16, ε=0.5,
    // δ=11/20 keeps types j ∈ [4..12] and has exact good mass 63488/65536
    let p = RationalProb::uniform(2);
    let cb = match build_codebook(&p, 0, 16, 0.5, Ratio::new(11, 20)) {
        Ok(cb) => cb,
        Err(e) => return fail(NAME, e),
    };
    let s = MarginalSchedule::stationary(Alphabet::binary(), ProbVector::uniform(2)).unwrap();
    let mass = match good_mass(&s, 0, &cb, MassMethod::Exact) {
        Ok(m) => m.estimate,
        Err(e) => return fail(NAME, e),
    };
    if (mass - 63488.0 / 65536.0).abs() > 1e-12 || mass < 0.9 {
        return CriterionReport::new(NAME, false, format!("good mass {mass} unexpected"));
    }
    let p_maroon = 1.0 - mass; // length-k interval is maroon when not good
    let p_red = 0.001; // switch-driven length-1 intervals are rare at k=16
    let n = 100_000usize;
    let colors: Vec<Color> = (0..n)
        .map(|i| {
            let u = keyed_unit(424_242, i as i64, 0);
            if u < p_maroon {
                Color::Maroon
            } else if u < p_maroon + p_red {
                Color::Red
            } else {
                Color::Green
            }
        })
        .collect();
    let seq = ColorSequence { colors, k: 16 };
    let assignment = mesalkin_match(&seq);
    let cutoff = (n as f64 * 0.9) as usize;
    let mut demand = 0u64;
    let mut starving = 0u64;
    for (i, &c) in seq.colors.iter().enumerate().take(cutoff) {
        if c == Color::Green {
            continue;
        }
        demand += 1;
        if !assignment.is_resolved(i) {
            starving += 1;
        }
    }
    let frac = starving as f64 / demand as f64;
    if frac >= 0.01 {
        return CriterionReport::new(
            NAME,
            false,
            format!("unresolved fraction {frac:.4} >= 1% ({starving}/{demand})"),
        );
    }

    // exhaustive oracle agreement
    for k in 1..=3u32 {
        for len in 1..=12usize {
            for code in 0..3usize.pow(len as u32) {
                let mut c = code;
                let colors: Vec<Color> = (0..len)
                    .map(|_| {
                        let v = c % 3;
                        c /= 3;
                        [Color::Green, Color::Red, Color::Maroon][v]
                    })
                    .collect();
                let seq = ColorSequence { colors, k };
                let got = mesalkin_match(&seq);
                let want = oracle_match(&seq);
                if got != want {
                    return CriterionReport::new(
                        NAME,
                        false,
                        format!("oracle disagreement at k={k}, colors {:?}", seq.colors),
                    );
                }
            }
        }
    }
    CriterionReport::new(
        NAME,
        true,
        format!(
            "good mass {mass:.5}; unresolved {starving}/{demand} = {frac:.5} in left 90%; \
             oracle agreement on all sequences len <= 12, k <= 3"
        ),
    )
}

// Literal transcription of the inductive matching description, kept
// structurally different from the production linked-list version.
fn oracle_match(colors: &ColorSequence) -> crate::matching::MatchingAssignment {
    let k = colors.k as usize;
    let n = colors.colors.len();
    let mut live: Vec<usize> = (0..n).collect();
    let mut got: Vec<Vec<usize>> = vec![Vec::new(); n];
    loop {
        let mut pairs = Vec::new();
        for w in live.windows(2) {
            if colors.colors[w[0]] != Color::Green && colors.colors[w[1]] == Color::Green {
                pairs.push((w[0], w[1]));
            }
        }
        if pairs.is_empty() {
            break;
        }
        let mut dead = std::collections::HashSet::new();
        for (i, j) in pairs {
            got[i].push(j);
            dead.insert(j);
            let quota = if colors.colors[i] == Color::Red { 1 } else { k };
            if got[i].len() == quota {
                dead.insert(i);
            }
        }
        live.retain(|x| !dead.contains(x));
    }
    let mut out = crate::matching::MatchingAssignment::default();
    for (i, claims) in got.iter_mut().enumerate() {
        if colors.colors[i] == Color::Green {
            continue;
        }
        let quota = if colors.colors[i] == Color::Red { 1 } else { k };
        if claims.len() < quota {
            out.unresolved.push(i);
        }
        if !claims.is_empty() {
            out.partners.insert(i, std::mem::take(claims));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// 6. Kakutani dichotomy
// ---------------------------------------------------------------------------

/// The `|n|^{-1/2}` perturbation must come out singular with partial sums
/// growing at least `1.8·ln N` over `N ∈ [10^3, 10^5]`; the `|n|^{-1}`
/// perturbation must come out equivalent with every last-decade step below
/// `10^-6`.
pub fn kakutani_dichotomy() -> CriterionReport {
    const NAME: &str = "kakutani-dichotomy";
    let fair =
        MarginalSchedule::stationary(Alphabet::binary(), ProbVector::uniform(2)).unwrap();
    let sqrt = sqrt_decay_binary();
    let mut sums = Vec::new();
    for n in [1_000i64, 10_000, 100_000] {
        let r = match source::kakutani_divergence(&sqrt, &fair, n) {
            Ok(r) => r,
            Err(e) => return fail(NAME, e),
        };
        if r.verdict != Verdict::Singular {
            return CriterionReport::new(NAME, false, format!("N={n}: verdict {:?}", r.verdict));
        }
        if r.partial_sum < 1.8 * (n as f64).ln() {
            return CriterionReport::new(
                NAME,
                false,
                format!("N={n}: partial sum {:.3} < 1.8 ln N = {:.3}", r.partial_sum, 1.8 * (n as f64).ln()),
            );
        }
        sums.push(r.partial_sum);
    }
    let growth = (sums[2] - sums[0]) / ((100_000f64).ln() - (1_000f64).ln());
    let inv = MarginalSchedule::power_decay(
        Alphabet::binary(),
        ProbVector::uniform(2),
        1.0,
        -1.0,
        0.0,
        source::DEFAULT_CLIP,
    )
    .unwrap();
    let r = match source::kakutani_divergence(&inv, &fair, 100_000) {
        Ok(r) => r,
        Err(e) => return fail(NAME, e),
    };
    let pass = r.verdict == Verdict::Equivalent && r.last_decade_max_delta < 1e-6 && growth >= 1.8;
    CriterionReport::new(
        NAME,
        pass,
        format!(
            "sqrt-decay singular, sums {:.2}/{:.2}/{:.2} (growth {growth:.2} per ln N); \
             inverse-decay {:?} with max last-decade step {:.2e}",
            sums[0], sums[1], sums[2], r.verdict, r.last_decade_max_delta
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Dissipativity series
// ---------------------------------------------------------------------------

/// The `10/√(|i|+2)` schedule, clipped at 0.11 so its whole perturbed
/// region sits inside the truncation window `K = 10^4`, must show a fitted
/// log-log affinity slope `<= -1.4` on `n ∈ [100, 1000]` with reported
/// tail bound below `10^-3`.
pub fn dissipativity_series() -> CriterionReport {
    const NAME: &str = "dissipativity-series";
    let s = dissipative_example(0.11);
    let r = match analysis::hellinger_series(&s, 1_000, 10_000, Some((100, 1_000))) {
        Ok(r) => r,
        Err(e) => return fail(NAME, e),
    };
    let pass = r.loglog_slope <= -1.4 && r.tail_bound < 1e-3;
    CriterionReport::new(
        NAME,
        pass,
        format!(
            "slope {:.2} (<= -1.4), tail bound {:.2e} (< 1e-3), partial sum {:.4}",
            r.loglog_slope,
            r.tail_bound,
            r.partial_sums.last().unwrap()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Shannon concentration
// ---------------------------------------------------------------------------

/// `|g_n| <= 0.05` in at least 90% of 200 seeded runs at `n = 10^4` for
/// both the stationary `(3/4, 1/4)` source and the clipped power-decay
/// schedule, plus the variance-halving check
/// `var(10^3)/var(2·10^3) ∈ [1.6, 2.4]`.
pub fn shannon_concentration() -> CriterionReport {
    const NAME: &str = "shannon-concentration";
    let skew = MarginalSchedule::stationary(
        Alphabet::binary(),
        ProbVector::new(vec![0.75, 0.25]).unwrap(),
    )
    .unwrap();
    let decay = sqrt_decay_binary();
    let mut rates = Vec::new();
    for s in [&skew, &decay] {
        let ok = (0..200u64)
            .filter(|&seed| {
                analysis::shannon_gn(s, seed, 10_000).map(|g| g.abs() <= 0.05).unwrap_or(false)
            })
            .count();
        rates.push(ok);
        if ok < 180 {
            return CriterionReport::new(
                NAME,
                false,
                format!("only {ok}/200 runs within |g_n| <= 0.05"),
            );
        }
    }
    let var_at = |n: i64| -> f64 {
        let xs: Vec<f64> =
            (0..400u64).map(|seed| analysis::shannon_gn(&skew, seed, n).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let ratio = var_at(1_000) / var_at(2_000);
    let pass = (1.6..=2.4).contains(&ratio);
    CriterionReport::new(
        NAME,
        pass,
        format!(
            "{}/200 and {}/200 runs within 0.05; var(1e3)/var(2e3) = {ratio:.3} in [1.6, 2.4]",
            rates[0], rates[1]
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Equivariance and determinism
// ---------------------------------------------------------------------------

/// 100 shifted-window comparisons per schedule kind with zero mismatches
/// on the positions both windows resolve, plus exact translated-content
/// invariance.
pub fn equivariance_determinism() -> CriterionReport {
    const NAME: &str = "equivariance-determinism";
    // binary k = 2 pipeline
    let p2 = RationalProb::uniform(2);
    let cb2 = match build_codebook(&p2, 0, 2, 1.0, default_delta(&p2)) {
        Ok(cb) => cb,
        Err(e) => return fail(NAME, e),
    };
    let plan2 = ExpansionPlan { k: 2, m_bits: cb2.b_bits, j_bits: 0 };
    // quaternary k = 2 pipeline (wide δ keeps the six mixed types)
    let p4 = RationalProb::uniform(4);
    let cb4 = match build_codebook(&p4, 0, 2, 1.5, Ratio::new(6, 5)) {
        Ok(cb) => cb,
        Err(e) => return fail(NAME, e),
    };
    let plan4 = ExpansionPlan { k: 2, m_bits: cb4.b_bits, j_bits: 0 };

    let fair =
        MarginalSchedule::stationary(Alphabet::binary(), ProbVector::uniform(2)).unwrap();
    let decay = sqrt_decay_binary();
    // one representative of each schedule kind; the table entries perturb a
    // stretch near the origin
    let table = {
        let mut entries = std::collections::BTreeMap::new();
        for i in -20i64..=20 {
            let w0 = 0.3 + 0.01 * (i.rem_euclid(5) as f64);
            entries.insert(i, vec![w0, 1.0 - w0]);
        }
        MarginalSchedule::table(Alphabet::binary(), ProbVector::uniform(2), entries, 0.0)
            .unwrap()
    };
    let quat =
        MarginalSchedule::stationary(Alphabet::uniform_tokens(4), ProbVector::uniform(4)).unwrap();

    let mut compared_total = 0u64;
    for (s, cb, plan) in [
        (&fair, &cb2, &plan2),
        (&decay, &cb2, &plan2),
        (&table, &cb2, &plan2),
        (&quat, &cb4, &plan4),
    ] {
        let r = match factor::equivariance_check(s, cb, plan, 100, 400, 1_009) {
            Ok(r) => r,
            Err(e) => return fail(NAME, e),
        };
        if !r.pass {
            return CriterionReport::new(
                NAME,
                false,
                format!("mismatches at positions {:?}", r.mismatches),
            );
        }
        compared_total += r.compared_positions;
    }

    // translated-content invariance: identical content at a different
    // start index must give identical (relative) output
    let w = match sample_window(&fair, 0, 499, 3) {
        Ok(w) => w,
        Err(e) => return fail(NAME, e),
    };
    let o1 = match factor::extract(&w, &fair, &cb2, &plan2) {
        Ok(o) => o,
        Err(e) => return fail(NAME, e),
    };
    let o2 = match factor::extract(&w.translated_to(-777), &fair, &cb2, &plan2) {
        Ok(o) => o,
        Err(e) => return fail(NAME, e),
    };
    if o1.out != o2.out || o1.radius != o2.radius {
        return CriterionReport::new(NAME, false, "translated content changed the output".into());
    }
    CriterionReport::new(
        NAME,
        true,
        format!("3 schedule kinds x 100 windows, {compared_total} positions compared, 0 mismatches"),
    )
}

// ---------------------------------------------------------------------------
// 10. Interval automaton against brute force
// ---------------------------------------------------------------------------

/// Exhaustive agreement with an independent automaton transcription on
/// every binary window of length <= 16 for k ∈ {1,2,3}, plus the
/// conditional-law two-sample test at `p > 0.001`.
pub fn interval_oracle() -> CriterionReport {
    const NAME: &str = "interval-oracle";
    for k in 1..=3u32 {
        for len in 1..=16usize {
            for bits in 0..(1u64 << len) {
                let symbols: Vec<u8> =
                    (0..len).map(|j| ((bits >> j) & 1) as u8).collect();
                let w = Window::new(0, symbols);
                let got = intervals::decompose_by(&w, k, 0, 1);
                let want = oracle_decompose(&w, k, 0, 1);
                if got.determined_from != want.0
                    || got
                        .intervals
                        .iter()
                        .map(|iv| (iv.start, iv.len, iv.switch))
                        .collect::<Vec<_>>()
                        != want.1
                {
                    return CriterionReport::new(
                        NAME,
                        false,
                        format!("k={k} window {:?}: {:?} vs {:?}", w.symbols, got, want),
                    );
                }
                if !got.check_tiling() {
                    return CriterionReport::new(
                        NAME,
                        false,
                        format!("k={k} window {:?}: tiling violated", w.symbols),
                    );
                }
            }
        }
    }
    let fair =
        MarginalSchedule::stationary(Alphabet::binary(), ProbVector::uniform(2)).unwrap();
    let mut p_values = Vec::new();
    for seed in [1u64, 2, 3, 4, 5] {
        match intervals::conditional_interval_law_check(&fair, 3, 20_000, seed) {
            Ok(r) => {
                if r.p_value <= 0.001 {
                    return CriterionReport::new(
                        NAME,
                        false,
                        format!("conditional law rejected: p = {}", r.p_value),
                    );
                }
                p_values.push(r.p_value);
            }
            Err(e) => return fail(NAME, e),
        }
    }
    CriterionReport::new(
        NAME,
        true,
        format!(
            "exhaustive agreement on all binary windows len <= 16, k <= 3; \
             conditional-law p-values {:?}",
            p_values.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>()
        ),
    )
}

// Direct, position-by-position transcription of the alternating-interval
// construction: markers by literal pattern test, then an explicit walk.
#[allow(clippy::type_complexity)]
fn oracle_decompose(
    w: &Window,
    k: u32,
    a: u8,
    b: u8,
) -> (i64, Vec<(i64, u32, bool)>) {
    let span = 2 * k as i64;
    let mut marker_end = None;
    for n in w.start..=w.end() - span - 1 {
        let is_marker =
            (0..span).all(|i| w.at(n + i) == a) && w.at(n + span) == b;
        if is_marker {
            marker_end = Some(n + span);
            break;
        }
    }
    let Some(start) = marker_end else {
        return (w.end(), Vec::new());
    };
    let mut out = Vec::new();
    out.push((start, 1u32, w.at(start) != a));
    let mut pos = start + 1;
    let mut ones_mode = false;
    loop {
        if ones_mode {
            if pos >= w.end() {
                break;
            }
            let sw = w.at(pos) != a;
            out.push((pos, 1, sw));
            pos += 1;
            if sw {
                ones_mode = false;
            }
        } else {
            if pos + k as i64 > w.end() {
                break;
            }
            let sw = (0..k as i64).all(|j| w.at(pos + j) == a);
            out.push((pos, k, sw));
            pos += k as i64;
            if sw {
                ones_mode = true;
            }
        }
    }
    (start, out)
}
