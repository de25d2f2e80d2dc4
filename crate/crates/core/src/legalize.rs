// SPDX-License-Identifier: Apache-2.0

//! Greedy repair of design-rule violations.
//!
//! Compressor trees are repaired one violation at a time with local actions.
//! Each action's net effect on the bit counts cancels one unit of the
//! violation it is proposed for:
//!
//! | action       | tensor edit      | same column later | column c+1 later | consumed at (c,s) |
//! |--------------|------------------|-------------------|------------------|-------------------|
//! | `SplitFA`    | FA -> 2 HA       | 0                 | +1               | +1                |
//! | `ReplaceFA`  | FA -> HA         | +1                | 0                | -1                |
//! | `DeleteHA`   | HA -> nothing    | +1                | -1               | -2                |
//! | `FuseFA`     | 2 HA -> FA       | 0                 | -1               | -1                |
//! | `ReplaceHA`  | HA -> FA         | -1                | 0                | +1                |
//! | `AddHA`      | nothing -> HA    | -1                | +1               | +2                |

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::ct::{propagate_counts, violations_with_counts, CompressorKind, CompressorTree};
use crate::error::{Error, Result};
use crate::prefix::PrefixBitmap;
use crate::violation::DesignRuleViolation;

/// Step budget used when none is given.
pub const DEFAULT_MAX_STEPS: usize = 5000;

/// Declaration order is the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    SplitFA,
    ReplaceFA,
    DeleteHA,
    FuseFA,
    ReplaceHA,
    AddHA,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LegalizeAction {
    pub kind: ActionKind,
    pub column: usize,
    pub stage: usize,
}

impl LegalizeAction {
    pub fn new(kind: ActionKind, column: usize, stage: usize) -> Self {
        LegalizeAction {
            kind,
            column,
            stage,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalizeReport {
    pub steps_taken: usize,
    /// Steps where no candidate reduced the number of violations.
    pub detours: usize,
    pub final_violations: usize,
    pub trace: Vec<LegalizeAction>,
}

fn spare_bits(t: &CompressorTree, available: i64, column: usize, stage: usize) -> i64 {
    available - t.consumed(column, stage)
}

fn applicable(t: &CompressorTree, available: i64, a: LegalizeAction) -> bool {
    if a.column >= t.columns() || a.stage >= t.stages() {
        return false;
    }
    let fa = t.get(CompressorKind::Full, a.column, a.stage);
    let ha = t.get(CompressorKind::Half, a.column, a.stage);
    let spare = spare_bits(t, available, a.column, a.stage);
    match a.kind {
        ActionKind::SplitFA => fa >= 1 && spare >= 1,
        ActionKind::ReplaceFA => fa >= 1,
        ActionKind::DeleteHA => ha >= 1,
        ActionKind::FuseFA => ha >= 2,
        ActionKind::ReplaceHA => ha >= 1 && spare >= 1,
        ActionKind::AddHA => spare >= 2,
    }
}

fn edit(t: &mut CompressorTree, a: LegalizeAction) {
    use CompressorKind::{Full, Half};
    let (dfa, dha) = match a.kind {
        ActionKind::SplitFA => (-1, 2),
        ActionKind::ReplaceFA => (-1, 1),
        ActionKind::DeleteHA => (0, -1),
        ActionKind::FuseFA => (1, -2),
        ActionKind::ReplaceHA => (1, -1),
        ActionKind::AddHA => (0, 1),
    };
    t.add(Full, a.column, a.stage, dfa);
    t.add(Half, a.column, a.stage, dha);
}

/// Applies `a`, failing if its precondition does not hold.
pub fn apply_action(t: &CompressorTree, a: LegalizeAction) -> Result<CompressorTree> {
    let counts = propagate_counts(t);
    let available = if a.column < t.columns() && a.stage < t.stages() {
        counts.get(a.column, a.stage)
    } else {
        0
    };
    if !applicable(t, available, a) {
        return Err(Error::InapplicableAction(a));
    }
    let mut out = t.clone();
    edit(&mut out, a);
    Ok(out)
}

/// Applicable repair actions for one violation, in tie-break order.
pub fn candidate_actions(t: &CompressorTree, e: &DesignRuleViolation) -> Vec<LegalizeAction> {
    let counts = propagate_counts(t);
    let mut raw = Vec::new();
    match *e {
        DesignRuleViolation::OverCompression { column: c, stage: s, .. } => {
            if c > 1 {
                raw.extend((0..s).map(|sp| LegalizeAction::new(ActionKind::SplitFA, c - 1, sp)));
            }
            raw.extend((0..=s).map(|sp| LegalizeAction::new(ActionKind::ReplaceFA, c, sp)));
            raw.push(LegalizeAction::new(ActionKind::DeleteHA, c, s));
        }
        DesignRuleViolation::UnderCompression { column: c, .. } => {
            let stages = t.stages();
            if c > 1 {
                raw.extend((0..stages).map(|sp| LegalizeAction::new(ActionKind::FuseFA, c - 1, sp)));
            }
            raw.extend((0..stages).map(|sp| LegalizeAction::new(ActionKind::ReplaceHA, c, sp)));
            raw.extend((0..stages).map(|sp| LegalizeAction::new(ActionKind::AddHA, c, sp)));
        }
        DesignRuleViolation::MissingLowerParent { .. } | DesignRuleViolation::MissingRequiredNode { .. } => {}
    }
    raw.sort();
    raw.into_iter()
        .filter(|a| {
            a.column < t.columns()
                && a.stage < t.stages()
                && applicable(t, counts.get(a.column, a.stage), *a)
        })
        .collect()
}

/// Actions tried only when no violation has an applicable
/// [`candidate_actions`] entry. Under-compression can dead-end when column
/// `c` has no spare bits beside its half adders and column `c-1` holds no
/// half-adder pair; removing a half adder below cuts a carry into `c`, and
/// demoting a full adder in `c` frees a bit for the stages after it.
pub fn fallback_actions(t: &CompressorTree, e: &DesignRuleViolation) -> Vec<LegalizeAction> {
    let DesignRuleViolation::UnderCompression { column: c, .. } = *e else {
        return Vec::new();
    };
    let counts = propagate_counts(t);
    let mut raw = Vec::new();
    if c > 0 {
        raw.extend((0..t.stages()).map(|sp| LegalizeAction::new(ActionKind::DeleteHA, c - 1, sp)));
    }
    raw.extend((0..t.stages()).map(|sp| LegalizeAction::new(ActionKind::ReplaceFA, c, sp)));
    raw.sort();
    raw.into_iter()
        .filter(|a| applicable(t, counts.get(a.column, a.stage), *a))
        .collect()
}

/// Ranking of a candidate outcome: number of violations, then their total
/// magnitude.
fn score(errors: &[DesignRuleViolation]) -> (usize, u64) {
    (
        errors.len(),
        errors.iter().map(|e| e.magnitude() as u64).sum(),
    )
}

/// Repairs `t` with greedy local actions until it is legal or the step
/// budget runs out.
///
/// The first violation that has applicable actions is repaired each step;
/// when none has any, [`fallback_actions`] are used instead.
/// Among its candidates the one leaving the fewest violations (then the
/// smallest total excess) wins; ties go to the candidate listed first.
/// Candidates are ranked by how often their outcome was visited before
/// the score, so the walk cannot settle into a cycle.
pub fn legalize_ct(t: &CompressorTree, max_steps: usize) -> Result<(CompressorTree, LegalizeReport)> {
    let mut current = t.clone();
    let mut report = LegalizeReport::default();
    let mut visits: HashMap<CompressorTree, usize> = HashMap::new();
    visits.insert(current.clone(), 1);
    loop {
        let counts = propagate_counts(&current);
        let errors = violations_with_counts(&current, &counts);
        report.final_violations = errors.len();
        if errors.is_empty() {
            return Ok((current, report));
        }
        if report.steps_taken >= max_steps {
            return Err(Error::LegalizationFailure(Box::new(report)));
        }
        let before = score(&errors);

        let mut best: Option<(usize, (usize, u64), LegalizeAction, CompressorTree)> = None;
        let dead_end = errors.iter().all(|e| candidate_actions(&current, e).is_empty());
        for e in &errors {
            let actions = if dead_end {
                fallback_actions(&current, e)
            } else {
                candidate_actions(&current, e)
            };
            for a in actions {
                let mut next = current.clone();
                edit(&mut next, a);
                let s = score(&violations_with_counts(&next, &propagate_counts(&next)));
                let seen = visits.get(&next).copied().unwrap_or(0);
                let better = match &best {
                    None => true,
                    Some((best_seen, best_score, _, _)) => (seen, s) < (*best_seen, *best_score),
                };
                if better {
                    best = Some((seen, s, a, next));
                }
            }
            if best.is_some() {
                break;
            }
        }
        let Some((_, s, action, next)) = best else {
            return Err(Error::LegalizationFailure(Box::new(report)));
        };
        if s.0 >= before.0 {
            report.detours += 1;
        }
        report.steps_taken += 1;
        report.trace.push(action);
        *visits.entry(next.clone()).or_insert(0) += 1;
        current = next;
    }
}

/// Forces the diagonal and column-0 nodes, then walks nodes by increasing
/// row and decreasing column. A node without a parent pair gets the lower
/// parent `(k-1, j)` of its smallest present upper parent `(i, k)`, and the
/// new node is checked the same way.
pub fn legalize_prefix(p: &PrefixBitmap) -> PrefixBitmap {
    let mut out = p.clone();
    let n = out.width();
    for i in 0..n {
        out.set(i, i, true);
        out.set(i, 0, true);
    }
    for i in 1..n {
        for j in (0..i).rev() {
            let (mut row, col) = (i, j);
            while row > col && out.get(row, col) && out.split_point(row, col).is_none() {
                let k = (col + 1..=row)
                    .find(|&k| out.get(row, k))
                    .expect("diagonal node is always present");
                out.set(k - 1, col, true);
                row = k - 1;
            }
        }
    }
    out
}
