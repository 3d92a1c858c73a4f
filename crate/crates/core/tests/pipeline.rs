//! Cross-module pipeline tests: a straight-line differential oracle for
//! the full extraction, excess-walk diagnostics, coding-radius behaviour,
//! and property-based invariants.

use nseb::expand::ExpansionPlan;
use nseb::factor::{self, coding_radius_profile};
use nseb::matching::{excess_walk, Color, ColorSequence};
use nseb::source::{keyed_unit, sample_window, Alphabet, MarginalSchedule, ProbVector, Window};
use nseb::typecode::{build_codebook, default_delta, RationalProb, TypeCodebook};

fn k2_pipeline() -> (MarginalSchedule, TypeCodebook, ExpansionPlan) {
    let schedule =
        MarginalSchedule::stationary(Alphabet::binary(), ProbVector::uniform(2)).unwrap();
    let p = RationalProb::uniform(2);
    let cb = build_codebook(&p, 0, 2, 1.0, default_delta(&p)).unwrap();
    let plan = ExpansionPlan { k: 2, m_bits: cb.b_bits, j_bits: 0 };
    (schedule, cb, plan)
}

// Straight-line re-implementation of the whole k = 2 binary pipeline with
// everything inlined: marker scan, interval walk, hard-coded good set
// {01, 10}, pass-based matching over plain vectors, j = 0 expansion.
fn straight_line_extract(symbols: &[u8]) -> Vec<Option<u16>> {
    let n = symbols.len();
    let mut out = vec![None; n];
    // first marker: 0,0,0,0,1
    let mut marker_end = None;
    for s in 0..n.saturating_sub(4) {
        if symbols[s..s + 4] == [0, 0, 0, 0] && symbols[s + 4] == 1 {
            marker_end = Some(s + 4);
            break;
        }
    }
    let Some(anchor) = marker_end else {
        return out;
    };
    // interval walk
    #[derive(Clone, Copy, PartialEq)]
    enum Kind {
        Red,
        Green,
        Maroon,
    }
    let mut ivs: Vec<(usize, usize, Kind)> = vec![(anchor, 1, Kind::Red)];
    let mut pos = anchor + 1;
    let mut ones = false;
    loop {
        if ones {
            if pos + 1 > n {
                break;
            }
            ivs.push((pos, 1, Kind::Red));
            if symbols[pos] != 0 {
                ones = false;
            }
            pos += 1;
        } else {
            if pos + 2 > n {
                break;
            }
            let pair = [symbols[pos], symbols[pos + 1]];
            let kind = if pair == [0, 1] || pair == [1, 0] { Kind::Green } else { Kind::Maroon };
            ivs.push((pos, 2, kind));
            if pair == [0, 0] {
                ones = true;
            }
            pos += 2;
        }
    }
    // matching: repeat passes of "claimant immediately left of a green"
    let m = ivs.len();
    let mut live: Vec<usize> = (0..m).collect();
    let mut partners: Vec<Vec<usize>> = vec![Vec::new(); m];
    loop {
        let mut claims = Vec::new();
        for w in live.windows(2) {
            if ivs[w[0]].2 != Kind::Green && ivs[w[1]].2 == Kind::Green {
                claims.push((w[0], w[1]));
            }
        }
        if claims.is_empty() {
            break;
        }
        let mut gone = std::collections::HashSet::new();
        for (c, g) in claims {
            partners[c].push(g);
            gone.insert(g);
            let quota = if ivs[c].2 == Kind::Red { 1 } else { 2 };
            if partners[c].len() == quota {
                gone.insert(c);
            }
        }
        live.retain(|x| !gone.contains(x));
    }
    // placement: greens fill themselves (j = 0 makes every symbol 0); the
    // extra goes to the claimant's slot
    for (i, &(start, len, kind)) in ivs.iter().enumerate() {
        if kind == Kind::Green {
            for d in 0..len {
                out[start + d] = Some(0);
            }
        }
        for (slot, _) in partners[i].iter().enumerate() {
            out[start + slot] = Some(0);
        }
    }
    out
}

#[test]
fn differential_oracle_on_hand_built_window() {
    let (s, cb, plan) = k2_pipeline();
    // 40 symbols: marker, goods, a bb maroon, an aa switch into a red run,
    // more goods, a trailing partial interval
    let symbols: Vec<u8> = vec![
        0, 0, 0, 0, 1, // marker
        0, 1, 1, 0, 1, 1, 0, 1, 0, 0, // 01 10 11 01 00(switch)
        0, 1, // red run: a, then b switches back
        1, 0, 0, 1, 1, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, // pairs
        0, // trailing partial
    ];
    assert_eq!(symbols.len(), 40);
    let w = Window::new(0, symbols.clone());
    let got = factor::extract(&w, &s, &cb, &plan).unwrap();
    let want = straight_line_extract(&symbols);
    for (i, (g, e)) in got.out.iter().zip(&want).enumerate() {
        assert_eq!(g, e, "position {i}");
    }
    // sanity on the structure: one maroon pair resolves only partially
    assert!(got.stats.good_intervals >= 12);
    assert!(got.stats.bad_intervals >= 3);
}

#[test]
fn differential_oracle_on_random_windows() {
    let (s, cb, plan) = k2_pipeline();
    for seed in 0..60u64 {
        let w = sample_window(&s, 0, 249, seed).unwrap();
        let got = factor::extract(&w, &s, &cb, &plan).unwrap();
        let want = straight_line_extract(&w.symbols);
        assert_eq!(got.out, want, "seed {seed}");
    }
}

#[test]
fn excess_walk_has_positive_mean_at_k16() {
    // colour law from the k = 16 codebook regime: green 0.968, the excess
    // S_0^n / n should be clearly positive by n = 10^4 on every seed
    let n = 10_000usize;
    let mut means = Vec::new();
    for seed in 0..20u64 {
        let colors: Vec<Color> = (0..n)
            .map(|i| {
                let u = keyed_unit(seed, i as i64, 0);
                if u < 0.031 {
                    Color::Maroon
                } else if u < 0.032 {
                    Color::Red
                } else {
                    Color::Green
                }
            })
            .collect();
        let seq = ColorSequence { colors, k: 16 };
        let s = excess_walk(&seq, 0, n - 1).unwrap();
        means.push(s as f64 / n as f64);
    }
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    assert!(grand > 0.2, "mean excess {grand}");
    assert!(means.iter().all(|&m| m > 0.0), "some seed went negative: {means:?}");
}

#[test]
fn radii_stay_local_when_markers_are_dense() {
    let (s, cb, plan) = k2_pipeline();
    let w = sample_window(&s, 0, 4999, 13).unwrap();
    let o = factor::extract(&w, &s, &cb, &plan).unwrap();
    let prof = coding_radius_profile(&o).unwrap();
    // fair-coin markers (00001) appear every ~32 positions, so most radii
    // sit well under 100
    assert!(prof.tail_fraction_above(100) < 0.2, "radii too heavy: {:?}", prof.histogram);
}

#[test]
fn starved_maroon_needs_distant_donor() {
    let (s, cb, plan) = k2_pipeline();
    // marker, then six bb maroons, then a green run: the leftmost maroon
    // resolves last, with donors eleven intervals to its right, so its
    // radius dwarfs a green's own-interval radius
    let mut symbols = vec![0, 0, 0, 0, 1];
    for _ in 0..6 {
        symbols.extend_from_slice(&[1, 1]);
    }
    for _ in 0..14 {
        symbols.extend_from_slice(&[0, 1]);
    }
    let w = Window::new(0, symbols);
    let o = factor::extract(&w, &s, &cb, &plan).unwrap();
    let maroon1_radius = o.radius_at(5).expect("first maroon slot resolved");
    let green_own_radius = o.radius_at(18).expect("green position resolved");
    assert!(
        maroon1_radius > green_own_radius + 4,
        "maroon radius {maroon1_radius} vs green radius {green_own_radius}"
    );
}

#[test]
fn unresolved_positions_are_excluded_from_profile() {
    let (s, cb, plan) = k2_pipeline();
    let w = sample_window(&s, 0, 399, 2).unwrap();
    let o = factor::extract(&w, &s, &cb, &plan).unwrap();
    let prof = coding_radius_profile(&o).unwrap();
    assert_eq!(prof.resolved, o.stats.resolved_positions);
    assert_eq!(prof.unresolved, o.stats.unresolved_positions);
}

mod properties {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rank_unrank_round_trip(word in proptest::collection::vec(0u8..3, 1..12)) {
            let counts = nseb::typecode::empirical_counts(&word, 3);
            let rank = nseb::typecode::rank_in_type(&word, 3);
            let back = nseb::typecode::unrank_in_type(&counts, rank.clone()).unwrap();
            prop_assert_eq!(&back, &word);
            let size = nseb::typecode::type_class_size(&counts);
            prop_assert!(rank < size);
        }

        #[test]
        fn emp_counts_sum_to_k(word in proptest::collection::vec(0u8..4, 1..40)) {
            let counts = nseb::typecode::empirical_counts(&word, 4);
            let total: u32 = counts.iter().sum();
            prop_assert_eq!(total as usize, word.len());
        }

        #[test]
        fn decompose_tiles_gap_free(
            symbols in proptest::collection::vec(0u8..2, 0..64),
            k in 1u32..4,
        ) {
            let w = Window::new(-7, symbols);
            let d = nseb::intervals::decompose_by(&w, k, 0, 1);
            prop_assert!(d.check_tiling());
            // alternation rule: a length-1 interval is preceded by an
            // all-a k-interval, another length-1 interval, or opens the
            // decomposition at a marker endpoint
            for i in 1..d.intervals.len() {
                let prev = &d.intervals[i - 1];
                let cur = &d.intervals[i];
                if cur.len == 1 {
                    prop_assert!(prev.len == 1 || prev.switch);
                }
            }
        }

        #[test]
        fn tv_triangle_inequality(
            a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0,
        ) {
            let pv = |x: f64| ProbVector::new(vec![x, 1.0 - x]).unwrap();
            let (x, y, z) = (pv(a), pv(b), pv(c));
            let dxy = nseb::analysis::tv_distance(&x, &y).unwrap();
            let dyz = nseb::analysis::tv_distance(&y, &z).unwrap();
            let dxz = nseb::analysis::tv_distance(&x, &z).unwrap();
            prop_assert!(dxz <= dxy + dyz + 1e-12);
        }

        #[test]
        fn psi_stays_in_range(bits in 0u64..(1 << 12)) {
            let p = RationalProb::uniform(2);
            let cb = build_codebook(&p, 0, 12, 0.5, default_delta(&p)).unwrap();
            let word: Vec<u8> = (0..12).map(|j| ((bits >> j) & 1) as u8).collect();
            if let Ok(c) = nseb::typecode::psi_encode(&word, &cb) {
                prop_assert!(c < cb.b_size());
                // fibers are residue classes of the rank
                let r = nseb::typecode::rank_in_type(&word, 2);
                let b = BigUint::from(cb.b_size());
                prop_assert_eq!((r % b).to_u64().unwrap(), c);
            }
        }
    }
}
