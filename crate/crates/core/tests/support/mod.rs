// SPDX-License-Identifier: Apache-2.0

//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use acdiff_core::ct::{CompressorKind, CompressorTree};
use acdiff_core::prefix::PrefixBitmap;
use acdiff_core::DesignRuleViolation;
use rand::Rng;

/// Outcome of pushing individual bits through a tree.
#[derive(Debug, PartialEq, Eq)]
pub struct EventTrace {
    /// First stage where some compressor found too few bits, with the
    /// `(column, missing bits)` list for that stage.
    pub starved: Option<(usize, Vec<(usize, u32)>)>,
    /// Bits left per column after the last stage.
    pub final_bits: Vec<usize>,
}

/// Per-bit event simulation: every partial product is a token; each FA
/// takes three tokens of its column and emits one there plus one in the
/// next column, each HA takes two. Stops at the first starving stage.
pub fn event_simulate(t: &CompressorTree) -> EventTrace {
    let n = t.width();
    let cols = 2 * n;
    let mut next_id = 0u32;
    let mut bits: Vec<Vec<u32>> = vec![Vec::new(); cols];
    for i in 0..n {
        for j in 0..n {
            bits[i + j].push(next_id);
            next_id += 1;
        }
    }
    for s in 0..t.stages() {
        let mut out: Vec<Vec<u32>> = vec![Vec::new(); cols];
        let mut starved = Vec::new();
        for c in 0..cols {
            let mut pool = std::mem::take(&mut bits[c]);
            let mut missing = 0u32;
            let jobs = std::iter::repeat_n(3, t.get(CompressorKind::Full, c, s) as usize)
                .chain(std::iter::repeat_n(2, t.get(CompressorKind::Half, c, s) as usize));
            for inputs in jobs {
                for _ in 0..inputs {
                    if pool.pop().is_none() {
                        missing += 1;
                    }
                }
                out[c].push(next_id);
                if c + 1 < cols {
                    out[c + 1].push(next_id + 1);
                }
                next_id += 2;
            }
            if missing > 0 {
                starved.push((c, missing));
            }
            out[c].extend(pool);
        }
        if !starved.is_empty() {
            return EventTrace {
                starved: Some((s, starved)),
                final_bits: Vec::new(),
            };
        }
        bits = out;
    }
    EventTrace {
        starved: None,
        final_bits: bits.iter().map(Vec::len).collect(),
    }
}

/// Whether the validator's report is consistent with the event trace:
/// same legality, same first-stage starvation, same leftover columns.
pub fn validator_agrees(t: &CompressorTree, report: &[DesignRuleViolation]) -> bool {
    let trace = event_simulate(t);
    match trace.starved {
        Some((stage, starved)) => {
            let first: Vec<(usize, u32)> = report
                .iter()
                .filter_map(|v| match *v {
                    DesignRuleViolation::OverCompression { column, stage: s, excess } if s == stage => {
                        Some((column, excess))
                    }
                    _ => None,
                })
                .collect();
            let earlier = report.iter().any(|v| {
                matches!(*v, DesignRuleViolation::OverCompression { stage: s, .. } if s < stage)
            });
            !earlier && first == starved
        }
        None => {
            let expect: Vec<DesignRuleViolation> = trace
                .final_bits
                .iter()
                .enumerate()
                .filter(|(_, &b)| b > 2)
                .map(|(c, &b)| DesignRuleViolation::UnderCompression {
                    column: c,
                    excess: (b - 2) as u32,
                })
                .collect();
            report == expect.as_slice()
        }
    }
}

/// Present off-diagonal nodes with no `k` in `[j+1, i]` such that both
/// `(i, k)` and `(k-1, j)` are present.
pub fn brute_force_orphans(p: &PrefixBitmap) -> Vec<(usize, usize)> {
    let n = p.width();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if p.get(i, j) && !(j + 1..=i).any(|k| p.get(i, k) && p.get(k - 1, j)) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Random lower-triangular bitmap; the diagonal is kept with high
/// probability so that most nodes have a chance of a parent pair.
pub fn random_bitmap(rng: &mut impl Rng, n: usize) -> PrefixBitmap {
    let density: f64 = rng.random_range(0.05..0.9);
    let mut bits = vec![false; n * n];
    for i in 0..n {
        for j in 0..=i {
            bits[i * n + j] = if i == j { rng.random_bool(0.95) } else { rng.random_bool(density) };
        }
    }
    PrefixBitmap::from_bits(n, bits).expect("lower triangular")
}

/// Random tree: a mutant of a seed with some cells perturbed at random.
pub fn random_tree(rng: &mut impl Rng, base: &CompressorTree, corrupt: bool) -> CompressorTree {
    let mut t = base.clone();
    if corrupt {
        for _ in 0..rng.random_range(1..4) {
            let kind = CompressorKind::ALL[rng.random_range(0..2)];
            let c = rng.random_range(0..t.columns());
            let s = rng.random_range(0..t.stages());
            let delta = if rng.random_bool(0.5) { 1 } else { -1 };
            if delta > 0 || t.get(kind, c, s) > 0 {
                t.add(kind, c, s, delta);
            }
        }
    }
    t
}
