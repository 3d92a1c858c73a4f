//! Dyadic expansion of one uniform codebook symbol into `k+1` independent
//! output symbols.
//!
//! A codebook symbol is uniform on `B_k = {0, .., 2^m - 1}`, i.e. `m`
//! independent fair bits. Chunking the top `j(k+1)` bits into `k+1` groups
//! of `j` bits yields `k+1` exactly iid uniform symbols over a `2^j`-ary
//! alphabet, provided `j(k+1) <= m`. Restricting the output law to dyadic
//! uniforms keeps this step exact and stateless; it costs at most one bit
//! per block versus an arbitrary output law.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A feasible expansion: `k+1` symbols of `j` bits each from an `m`-bit
/// uniform code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionPlan {
    pub k: u32,
    /// Code width: `#B_k = 2^m`.
    pub m_bits: u32,
    /// Bits per output symbol; output alphabet has `2^j` symbols.
    pub j_bits: u32,
}

impl ExpansionPlan {
    pub fn out_len(&self) -> u32 {
        self.k + 1
    }

    pub fn out_alphabet_size(&self) -> u64 {
        1u64 << self.j_bits
    }

    /// Bits emitted per source position, `j(k+1)/k`.
    pub fn rate_bits_per_source_symbol(&self) -> f64 {
        self.j_bits as f64 * (self.k + 1) as f64 / self.k as f64
    }
}

/// Planner outcome: a plan, or the reason none exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanOutcome {
    Feasible {
        plan: ExpansionPlan,
        achieved_rate: f64,
        meets_target: bool,
    },
    /// `m < k+1`, so not even one bit per output symbol fits.
    Infeasible {
        reason: String,
        /// Smallest `k` whose codebook width `⌈k(h-ε)⌉` would admit `j >= 1`
        /// and meet the target rate, when one exists for the given entropy.
        minimal_k: Option<u32>,
    },
}

/// Choose the largest `j` with `j(k+1) <= m` and report the achieved
/// entropy rate against a target (bits per source position).
pub fn plan_expansion(k: u32, m_bits: u32, target_entropy_bits: f64) -> PlanOutcome {
    if k == 0 {
        return PlanOutcome::Infeasible { reason: "k must be positive".into(), minimal_k: None };
    }
    let j = m_bits / (k + 1);
    if j == 0 {
        return PlanOutcome::Infeasible {
            reason: format!("m = {m_bits} < k+1 = {}; no whole bit per output symbol", k + 1),
            minimal_k: None,
        };
    }
    let plan = ExpansionPlan { k, m_bits, j_bits: j };
    let rate = plan.rate_bits_per_source_symbol();
    PlanOutcome::Feasible { plan, achieved_rate: rate, meets_target: rate >= target_entropy_bits }
}

/// Planner driven by the codebook parameters: `m = ⌈k(h-ε)⌉` for the given
/// per-symbol source entropy `h`.
pub fn plan_for_entropy(k: u32, h_bits: f64, epsilon: f64, target_entropy_bits: f64) -> PlanOutcome {
    let m = ((k as f64 * (h_bits - epsilon)) - 1e-9).ceil().max(0.0) as u32;
    match plan_expansion(k, m, target_entropy_bits) {
        PlanOutcome::Feasible { plan, achieved_rate, meets_target } => {
            PlanOutcome::Feasible { plan, achieved_rate, meets_target }
        }
        PlanOutcome::Infeasible { reason, .. } => PlanOutcome::Infeasible {
            reason,
            minimal_k: minimal_feasible_k(h_bits, epsilon, target_entropy_bits),
        },
    }
}

// Smallest k with ⌈k(h-ε)⌉ >= k+1 and rate >= target. For h-ε <= 1 no k
// works (the code width can never outrun k+1).
fn minimal_feasible_k(h_bits: f64, epsilon: f64, target: f64) -> Option<u32> {
    if h_bits - epsilon <= 1.0 {
        return None;
    }
    (1..=4096u32).find(|&k| {
        let m = ((k as f64 * (h_bits - epsilon)) - 1e-9).ceil() as u32;
        match plan_expansion(k, m, target) {
            PlanOutcome::Feasible { meets_target, .. } => meets_target,
            _ => false,
        }
    })
}

/// Expand one code into `k+1` output symbols: the top `j(k+1)` bits of
/// `code`, chunked most-significant first into `j`-bit symbols.
///
/// A uniform `code` yields exactly iid uniform output symbols, by bit
/// independence of uniform integers.
pub fn expand_uniform(code: u64, plan: &ExpansionPlan) -> Result<Vec<u16>> {
    if plan.m_bits > 62 || plan.j_bits > 16 {
        return Err(Error::Capacity("plan width out of supported range".into()));
    }
    if plan.j_bits * plan.out_len() > plan.m_bits {
        return Err(Error::Config(format!(
            "plan overdraws entropy: {}·{} > {}",
            plan.j_bits,
            plan.out_len(),
            plan.m_bits
        )));
    }
    if code >= (1u64 << plan.m_bits) {
        return Err(Error::Domain(format!(
            "code {code} outside [0, 2^{})",
            plan.m_bits
        )));
    }
    let j = plan.j_bits;
    let mask = (1u64 << j) - 1;
    let mut out = Vec::with_capacity(plan.out_len() as usize);
    for t in 0..plan.out_len() {
        let shift = plan.m_bits - j * (t + 1);
        out.push(((code >> shift) & mask) as u16);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_when_m_below_k_plus_1() {
        match plan_expansion(8, 4, 0.5) {
            PlanOutcome::Infeasible { .. } => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn exact_fit_plan() {
        // k=3, m=8: j=2, 4 output symbols over 4 letters, 8 bits of 8 used
        match plan_expansion(3, 8, 0.5) {
            PlanOutcome::Feasible { plan, achieved_rate, meets_target } => {
                assert_eq!(plan.j_bits, 2);
                assert_eq!(plan.out_len(), 4);
                assert_eq!(plan.out_alphabet_size(), 4);
                assert_eq!(plan.j_bits * plan.out_len(), 8);
                assert!((achieved_rate - 8.0 / 3.0).abs() < 1e-12);
                assert!(meets_target);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn binary_source_never_admits_a_plan() {
        // ⌈k(1-ε)⌉ <= k < k+1 for every k, so the planner must report that
        // no k achieves a positive dyadic rate from a 1-bit source.
        match plan_for_entropy(16, 1.0, 0.25, 0.5) {
            PlanOutcome::Infeasible { minimal_k, .. } => assert_eq!(minimal_k, None),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ternary_source_admits_a_plan() {
        let h = 3f64.log2();
        match plan_for_entropy(16, h, 0.5, 0.5) {
            PlanOutcome::Feasible { plan, .. } => {
                assert_eq!(plan.m_bits, 18);
                assert_eq!(plan.j_bits, 1);
            }
            other => panic!("{other:?}"),
        }
        // with a large slack the width falls below k+1 and, since
        // h - ε < 1, no k can recover it
        match plan_for_entropy(16, h, 1.0, 0.5) {
            PlanOutcome::Infeasible { minimal_k, .. } => assert_eq!(minimal_k, None),
            other => panic!("{other:?}"),
        }
        // just above one bit of retained entropy the smallest k already
        // admits j = 1
        match plan_for_entropy(16, h, 1.0, 0.0) {
            PlanOutcome::Infeasible { .. } => {}
            other => panic!("{other:?}"),
        }
        assert_eq!(minimal_feasible_k(h, 0.5, 0.5), Some(1));
    }

    #[test]
    fn bit_chunking_msb_first() {
        let plan = ExpansionPlan { k: 2, m_bits: 8, j_bits: 1 };
        let out = expand_uniform(0b1010_0000, &plan).unwrap();
        assert_eq!(out, vec![1, 0, 1]);
    }

    #[test]
    fn code_out_of_range_rejected() {
        let plan = ExpansionPlan { k: 2, m_bits: 6, j_bits: 1 };
        assert!(expand_uniform(64, &plan).is_err());
    }

    #[test]
    fn exhaustive_preimage_counts() {
        // B = 64, j = 1, k+1 = 3: every output triple has exactly 8 preimages
        let plan = ExpansionPlan { k: 2, m_bits: 6, j_bits: 1 };
        let mut counts = std::collections::HashMap::new();
        for code in 0..64u64 {
            let out = expand_uniform(code, &plan).unwrap();
            *counts.entry(out).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 8);
        assert!(counts.values().all(|&c| c == 8));
    }

    #[test]
    fn exact_uniformity_and_independence() {
        // j=2, k+1=4 over an 8-bit code: marginals uniform on 4 values and
        // all pairs of positions exactly independent.
        let plan = ExpansionPlan { k: 3, m_bits: 8, j_bits: 2 };
        let n = 256u64;
        let mut single = [[0u32; 4]; 4];
        let mut pair = vec![[[0u32; 4]; 4]; 6];
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for code in 0..n {
            let out = expand_uniform(code, &plan).unwrap();
            for (t, &s) in out.iter().enumerate() {
                single[t][s as usize] += 1;
            }
            for (pi, &(x, y)) in pairs.iter().enumerate() {
                pair[pi][out[x] as usize][out[y] as usize] += 1;
            }
        }
        for row in single {
            assert!(row.iter().all(|&c| c == 64));
        }
        for table in pair {
            for row in table {
                assert!(row.iter().all(|&c| c == 16));
            }
        }
    }

    #[test]
    fn rate_never_exceeds_code_budget() {
        for k in 1..40u32 {
            for m in (k + 1)..80 {
                if let PlanOutcome::Feasible { plan, achieved_rate, .. } =
                    plan_expansion(k, m, 0.0)
                {
                    assert!(plan.j_bits * plan.out_len() <= m);
                    assert!(achieved_rate <= m as f64 / k as f64 + 1e-12);
                }
            }
        }
    }
}
