//! Mešalkin matching of green intervals to red and maroon intervals.
//!
//! Colour the alternating intervals: a good length-`k` interval is green,
//! a length-1 interval is red, a length-`k` interval outside the good set
//! is maroon. Every red wants one green partner, every maroon wants `k`;
//! partners always sit strictly to the right.
//!
//! The matching runs in simultaneous passes: within a pass, every red or
//! maroon index whose immediate right neighbour among the survivors is a
//! green claims it; claimed greens and claimants that reached quota drop
//! out, and the passes repeat until nothing is claimed. The rule never
//! consults absolute positions, so the matching commutes with translation,
//! and claims made inside a window stay valid in any extension of it.

use serde::{Deserialize, Serialize};

use crate::intervals::IntervalDecomposition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Green,
    Red,
    Maroon,
}

/// Colours of consecutively indexed intervals, plus the maroon quota `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorSequence {
    pub colors: Vec<Color>,
    pub k: u32,
}

/// Partner assignment produced by the matching.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchingAssignment {
    /// Partner lists (green indices, ascending) for every red/maroon index
    /// that claimed at least one green. Resolved indices hold a full quota.
    pub partners: std::collections::BTreeMap<usize, Vec<usize>>,
    /// Red/maroon indices that did not reach quota inside the window.
    pub unresolved: Vec<usize>,
}

impl MatchingAssignment {
    pub fn is_resolved(&self, idx: usize) -> bool {
        !self.unresolved.contains(&idx)
    }
}

/// Colour a decomposition given per-`k`-interval goodness.
///
/// `goodness[j]` refers to the `j`-th length-`k` interval in order; length-1
/// intervals are red unconditionally.
pub fn color_intervals(
    decomposition: &IntervalDecomposition,
    goodness: &[bool],
) -> Result<ColorSequence> {
    let k_count = decomposition.intervals.iter().filter(|iv| iv.len != 1).count();
    if goodness.len() != k_count {
        return Err(Error::Domain(format!(
            "goodness has {} entries for {} length-k intervals",
            goodness.len(),
            k_count
        )));
    }
    let mut colors = Vec::with_capacity(decomposition.intervals.len());
    let mut gi = 0;
    for iv in &decomposition.intervals {
        if iv.len == 1 {
            colors.push(Color::Red);
        } else {
            colors.push(if goodness[gi] { Color::Green } else { Color::Maroon });
            gi += 1;
        }
    }
    Ok(ColorSequence { colors, k: decomposition.k })
}

/// Run the pass-based Mešalkin matching over a colour sequence.
pub fn mesalkin_match(colors: &ColorSequence) -> MatchingAssignment {
    let n = colors.colors.len();
    let k = colors.k as usize;
    let quota = |c: Color| match c {
        Color::Red => 1usize,
        Color::Maroon => k,
        Color::Green => 0,
    };
    // survivor doubly-linked list over indices
    let mut next: Vec<usize> = (1..=n).collect();
    let mut prev: Vec<i64> = (0..n as i64).map(|i| i - 1).collect();
    let mut alive = vec![true; n];
    let mut claimed: Vec<Vec<usize>> = vec![Vec::new(); n];

    loop {
        // collect this pass's claims against the frozen survivor structure
        let mut claims: Vec<(usize, usize)> = Vec::new();
        let mut i = 0usize;
        while i < n && !alive[i] {
            i += 1;
        }
        while i < n {
            let nx = next[i];
            if nx < n
                && alive[nx]
                && colors.colors[nx] == Color::Green
                && colors.colors[i] != Color::Green
            {
                claims.push((i, nx));
            }
            i = nx;
        }
        if claims.is_empty() {
            break;
        }
        for (claimant, green) in claims {
            claimed[claimant].push(green);
            // unlink the green
            remove(&mut next, &mut prev, &mut alive, green);
            if claimed[claimant].len() == quota(colors.colors[claimant]) {
                remove(&mut next, &mut prev, &mut alive, claimant);
            }
        }
    }

    let mut out = MatchingAssignment::default();
    for (i, &c) in colors.colors.iter().enumerate() {
        if c == Color::Green {
            continue;
        }
        let q = quota(c);
        if claimed[i].len() < q {
            out.unresolved.push(i);
        }
        if !claimed[i].is_empty() {
            debug_assert!(claimed[i].windows(2).all(|w| w[0] < w[1]));
            out.partners.insert(i, std::mem::take(&mut claimed[i]));
        }
    }
    assert!(check_assignment(colors, &out), "matching invariants violated");
    out
}

fn remove(next: &mut [usize], prev: &mut [i64], alive: &mut [bool], i: usize) {
    alive[i] = false;
    let p = prev[i];
    let nx = next[i];
    if p >= 0 {
        next[p as usize] = nx;
    }
    if nx < next.len() {
        prev[nx] = p;
    }
}

/// Quota correctness and rightness-of-partners; used as a per-run assertion.
pub fn check_assignment(colors: &ColorSequence, m: &MatchingAssignment) -> bool {
    let k = colors.k as usize;
    let unresolved: std::collections::HashSet<usize> =
        m.unresolved.iter().copied().collect();
    let mut used = std::collections::HashSet::new();
    for (&i, partners) in &m.partners {
        let quota = match colors.colors[i] {
            Color::Red => 1,
            Color::Maroon => k,
            Color::Green => return false,
        };
        if partners.len() > quota {
            return false;
        }
        if partners.len() < quota && !unresolved.contains(&i) {
            return false;
        }
        for &g in partners {
            if colors.colors[g] != Color::Green || g <= i || !used.insert(g) {
                return false;
            }
        }
    }
    true
}

/// `S_j^n = #greens - k·#maroons - #reds` over interval indices `[j, n]`.
pub fn excess_walk(colors: &ColorSequence, j: usize, n: usize) -> Result<i64> {
    if j > n || n >= colors.colors.len() {
        return Err(Error::Domain(format!(
            "range [{j}, {n}] outside 0..{}",
            colors.colors.len()
        )));
    }
    let k = colors.k as i64;
    Ok(colors.colors[j..=n]
        .iter()
        .map(|c| match c {
            Color::Green => 1i64,
            Color::Maroon => -k,
            Color::Red => -1i64,
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Color::*;

    fn seq(colors: Vec<Color>, k: u32) -> ColorSequence {
        ColorSequence { colors, k }
    }

    fn partners(m: &MatchingAssignment, i: usize) -> Vec<usize> {
        m.partners.get(&i).cloned().unwrap_or_default()
    }

    #[test]
    fn coloring_follows_length_and_goodness() {
        use crate::intervals::{Interval, IntervalDecomposition};
        let d = IntervalDecomposition {
            k: 2,
            determined_from: 0,
            intervals: vec![
                Interval { start: 0, len: 2, switch: false },
                Interval { start: 2, len: 1, switch: true },
                Interval { start: 3, len: 2, switch: false },
            ],
            determined_to: 5,
            no_marker: false,
        };
        let seq = color_intervals(&d, &[true, false]).unwrap();
        assert_eq!(seq.colors, vec![Green, Red, Maroon]);
        // goodness vector must cover exactly the length-k intervals
        assert!(color_intervals(&d, &[true]).is_err());
    }

    #[test]
    fn red_takes_adjacent_green() {
        let m = mesalkin_match(&seq(vec![Red, Green], 2));
        assert_eq!(partners(&m, 0), vec![1]);
        assert!(m.unresolved.is_empty());
    }

    #[test]
    fn maroon_takes_two_greens_over_two_passes() {
        let m = mesalkin_match(&seq(vec![Maroon, Green, Green], 2));
        assert_eq!(partners(&m, 0), vec![1, 2]);
        assert!(m.unresolved.is_empty());
    }

    #[test]
    fn bracket_nesting_inner_pair_first() {
        let m = mesalkin_match(&seq(vec![Red, Red, Green, Green], 3));
        assert_eq!(partners(&m, 1), vec![2]);
        assert_eq!(partners(&m, 0), vec![3]);
    }

    #[test]
    fn starving_maroon_stays_unresolved() {
        let m = mesalkin_match(&seq(vec![Maroon, Green], 2));
        assert_eq!(m.unresolved, vec![0]);
        assert_eq!(partners(&m, 0), vec![1]); // partial claim is kept
    }

    #[test]
    fn greens_never_serve_twice() {
        let m = mesalkin_match(&seq(vec![Red, Red, Green], 1));
        assert_eq!(partners(&m, 1), vec![2]);
        assert_eq!(m.unresolved, vec![0]);
    }

    #[test]
    fn excess_walk_values() {
        let all_green = seq(vec![Green; 7], 2);
        assert_eq!(excess_walk(&all_green, 0, 6).unwrap(), 7);
        let gm = seq(vec![Green, Maroon], 2);
        assert_eq!(excess_walk(&gm, 0, 1).unwrap(), -1);
        assert!(excess_walk(&gm, 1, 2).is_err());
    }

    #[test]
    fn matching_commutes_with_translation() {
        // translation = dropping a prefix of already-resolved indices; the
        // rule sees only relative order, so re-running on a suffix that cuts
        // at a claim boundary reproduces the assignment.
        let colors = vec![Red, Green, Maroon, Green, Green, Red, Green];
        let m_full = mesalkin_match(&seq(colors.clone(), 2));
        let m_suffix = mesalkin_match(&seq(colors[2..].to_vec(), 2));
        for (i, p_full) in &m_full.partners {
            if *i >= 2 {
                let shifted: Vec<usize> = p_full.iter().map(|g| g - 2).collect();
                assert_eq!(partners(&m_suffix, i - 2), shifted);
            }
        }
    }

    // Independent oracle: a literal, slow transcription of the inductive
    // description using explicit index sets instead of a linked list.
    fn oracle_match(colors: &ColorSequence) -> MatchingAssignment {
        let k = colors.k as usize;
        let n = colors.colors.len();
        let mut live: Vec<usize> = (0..n).collect();
        let mut got: Vec<Vec<usize>> = vec![Vec::new(); n];
        loop {
            let mut pairs = Vec::new();
            for w in live.windows(2) {
                let (i, j) = (w[0], w[1]);
                if colors.colors[i] != Green && colors.colors[j] == Green {
                    pairs.push((i, j));
                }
            }
            if pairs.is_empty() {
                break;
            }
            let mut dead = std::collections::HashSet::new();
            for (i, j) in pairs {
                got[i].push(j);
                dead.insert(j);
                let quota = if colors.colors[i] == Red { 1 } else { k };
                if got[i].len() == quota {
                    dead.insert(i);
                }
            }
            live.retain(|x| !dead.contains(x));
        }
        let mut out = MatchingAssignment::default();
        for (i, claims) in got.iter_mut().enumerate() {
            if colors.colors[i] == Green {
                continue;
            }
            let quota = if colors.colors[i] == Red { 1 } else { k };
            if claims.len() < quota {
                out.unresolved.push(i);
            }
            if !claims.is_empty() {
                out.partners.insert(i, std::mem::take(claims));
            }
        }
        out
    }

    #[test]
    fn agrees_with_oracle_exhaustively() {
        // all colour sequences of length <= 8 here; the acceptance suite
        // extends the sweep to length 12.
        for k in 1..=3u32 {
            for len in 1..=8usize {
                for code in 0..3usize.pow(len as u32) {
                    let mut c = code;
                    let colors: Vec<Color> = (0..len)
                        .map(|_| {
                            let v = c % 3;
                            c /= 3;
                            [Green, Red, Maroon][v]
                        })
                        .collect();
                    let s = seq(colors, k);
                    assert_eq!(mesalkin_match(&s), oracle_match(&s));
                }
            }
        }
    }
}
