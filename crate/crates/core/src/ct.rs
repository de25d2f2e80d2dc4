// SPDX-License-Identifier: Apache-2.0

//! Compressor-tree representation and its design rules.
//!
//! A tree for an `n`-bit multiplier is a `[2, 2n, S]` tensor of compressor
//! counts: index 0 along the first axis counts full adders, index 1 half
//! adders. Column 0 is the least significant column and stage 0 is the first
//! reduction stage. [`ColumnCounts`] tracks how many partial-product bits sit
//! in each column before each stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::violation::DesignRuleViolation;

/// Extra stages allowed on top of the Wallace lower bound.
pub const DEFAULT_EXTRA_STAGES: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompressorKind {
    /// 3:2 counter.
    Full,
    /// 2:2 counter.
    Half,
}

impl CompressorKind {
    pub const ALL: [CompressorKind; 2] = [CompressorKind::Full, CompressorKind::Half];

    pub fn index(self) -> usize {
        match self {
            CompressorKind::Full => 0,
            CompressorKind::Half => 1,
        }
    }

    /// Bits consumed from the compressor's own column.
    pub fn inputs(self) -> i64 {
        match self {
            CompressorKind::Full => 3,
            CompressorKind::Half => 2,
        }
    }
}

/// Smallest number of 3:2 reduction stages that brings `n` rows down to two.
pub fn wallace_min_stages(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "multiplier width must be at least 2, got {n}"
        )));
    }
    let mut rows = 3usize;
    let mut stages = 1;
    while rows < n {
        rows = rows * 3 / 2;
        stages += 1;
    }
    Ok(stages)
}

/// Partial-product count per column produced by an AND-array PPG.
pub fn initial_pp_counts(n: usize) -> Result<Vec<i64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "multiplier width must be at least 2, got {n}"
        )));
    }
    let columns = 2 * n;
    Ok((0..columns)
        .map(|c| {
            if c + 1 == columns {
                0
            } else {
                (c + 1).min(n).min(2 * n - 1 - c) as i64
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompressorTree {
    width: usize,
    stages: usize,
    counts: Vec<u32>,
}

impl CompressorTree {
    /// An empty tree with an explicit stage count.
    pub fn new(width: usize, stages: usize) -> Result<Self> {
        if width < 2 {
            return Err(Error::InvalidArgument(format!(
                "multiplier width must be at least 2, got {width}"
            )));
        }
        if stages == 0 {
            return Err(Error::InvalidArgument("a tree needs at least one stage".into()));
        }
        Ok(CompressorTree {
            width,
            stages,
            counts: vec![0; 2 * 2 * width * stages],
        })
    }

    /// An empty tree with `wallace_min_stages(width) + DEFAULT_EXTRA_STAGES` stages.
    pub fn with_default_stages(width: usize) -> Result<Self> {
        Self::new(width, default_stages(width)?)
    }

    pub fn from_counts(width: usize, stages: usize, counts: Vec<u32>) -> Result<Self> {
        let mut tree = Self::new(width, stages)?;
        if counts.len() != tree.counts.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} counts for shape [2, {}, {}], got {}",
                tree.counts.len(),
                2 * width,
                stages,
                counts.len()
            )));
        }
        tree.counts = counts;
        Ok(tree)
    }

    /// Multiplier bit-width `n`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn columns(&self) -> usize {
        2 * self.width
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn shape(&self) -> [usize; 3] {
        [2, self.columns(), self.stages]
    }

    /// Row-major `[kind][column][stage]` counts.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    fn index(&self, kind: CompressorKind, column: usize, stage: usize) -> usize {
        debug_assert!(column < self.columns() && stage < self.stages);
        (kind.index() * self.columns() + column) * self.stages + stage
    }

    pub fn get(&self, kind: CompressorKind, column: usize, stage: usize) -> u32 {
        self.counts[self.index(kind, column, stage)]
    }

    pub fn set(&mut self, kind: CompressorKind, column: usize, stage: usize, value: u32) {
        let i = self.index(kind, column, stage);
        self.counts[i] = value;
    }

    pub fn add(&mut self, kind: CompressorKind, column: usize, stage: usize, delta: i64) {
        let i = self.index(kind, column, stage);
        let v = self.counts[i] as i64 + delta;
        assert!(v >= 0, "compressor count would become negative");
        self.counts[i] = v as u32;
    }

    /// Bits consumed at `(column, stage)`: `3·FA + 2·HA`.
    pub fn consumed(&self, column: usize, stage: usize) -> i64 {
        3 * self.get(CompressorKind::Full, column, stage) as i64
            + 2 * self.get(CompressorKind::Half, column, stage) as i64
    }

    pub fn total(&self, kind: CompressorKind) -> u64 {
        let len = self.columns() * self.stages;
        let start = kind.index() * len;
        self.counts[start..start + len].iter().map(|&c| c as u64).sum()
    }

    /// Compressors of `kind` in `column`, summed over stages.
    pub fn column_total(&self, kind: CompressorKind, column: usize) -> u64 {
        (0..self.stages)
            .map(|s| self.get(kind, column, s) as u64)
            .sum()
    }

    /// Number of stages holding at least one compressor, counted up to the
    /// last non-empty stage.
    pub fn used_stages(&self) -> usize {
        (0..self.stages)
            .rev()
            .find(|&s| {
                (0..self.columns()).any(|c| {
                    self.get(CompressorKind::Full, c, s) + self.get(CompressorKind::Half, c, s) > 0
                })
            })
            .map_or(0, |s| s + 1)
    }
}

pub fn default_stages(width: usize) -> Result<usize> {
    Ok(wallace_min_stages(width)? + DEFAULT_EXTRA_STAGES)
}

/// Bits per column before every stage; entry `(c, S)` holds what is left for
/// the carry-propagate adder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnCounts {
    columns: usize,
    stages: usize,
    values: Vec<i64>,
}

impl ColumnCounts {
    pub fn columns(&self) -> usize {
        self.columns
    }

    /// Number of compressor stages `S`; valid stage indices are `0..=S`.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn get(&self, column: usize, stage: usize) -> i64 {
        self.values[column * (self.stages + 1) + stage]
    }

    fn set(&mut self, column: usize, stage: usize, v: i64) {
        self.values[column * (self.stages + 1) + stage] = v;
    }

    pub fn stage(&self, stage: usize) -> Vec<i64> {
        (0..self.columns).map(|c| self.get(c, stage)).collect()
    }

    pub fn final_counts(&self) -> Vec<i64> {
        self.stage(self.stages)
    }
}

/// Applies the count-propagation rule stage by stage. Negative values are
/// kept so that validation can see them.
pub fn propagate_counts(tree: &CompressorTree) -> ColumnCounts {
    let columns = tree.columns();
    let stages = tree.stages();
    let mut counts = ColumnCounts {
        columns,
        stages,
        values: vec![0; columns * (stages + 1)],
    };
    let initial = initial_pp_counts(tree.width()).expect("tree width is at least 2");
    for (c, v) in initial.into_iter().enumerate() {
        counts.set(c, 0, v);
    }
    for s in 0..stages {
        for c in 0..columns {
            let fa = tree.get(CompressorKind::Full, c, s) as i64;
            let ha = tree.get(CompressorKind::Half, c, s) as i64;
            let mut next = counts.get(c, s) - (2 * fa + ha);
            if c > 0 {
                next += tree.get(CompressorKind::Full, c - 1, s) as i64
                    + tree.get(CompressorKind::Half, c - 1, s) as i64;
            }
            counts.set(c, s + 1, next);
        }
    }
    counts
}

/// All over-compression errors ordered by (stage, column), followed by all
/// under-compression errors ordered by column. Empty iff the tree is legal.
pub fn validate_ct(tree: &CompressorTree) -> Vec<DesignRuleViolation> {
    let counts = propagate_counts(tree);
    violations_with_counts(tree, &counts)
}

pub(crate) fn violations_with_counts(
    tree: &CompressorTree,
    counts: &ColumnCounts,
) -> Vec<DesignRuleViolation> {
    let mut out = Vec::new();
    for s in 0..tree.stages() {
        for c in 0..tree.columns() {
            let excess = tree.consumed(c, s) - counts.get(c, s);
            if excess > 0 {
                out.push(DesignRuleViolation::OverCompression {
                    column: c,
                    stage: s,
                    excess: excess as u32,
                });
            }
        }
    }
    for c in 0..tree.columns() {
        let left = counts.get(c, tree.stages());
        if left > 2 {
            out.push(DesignRuleViolation::UnderCompression {
                column: c,
                excess: (left - 2) as u32,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_stages_follow_recurrence() {
        assert_eq!(wallace_min_stages(3).unwrap(), 1);
        assert_eq!(wallace_min_stages(8).unwrap(), 4);
        assert_eq!(wallace_min_stages(16).unwrap(), 6);
        assert!(wallace_min_stages(1).is_err());
    }

    #[test]
    fn initial_counts_by_enumeration() {
        for n in 2..10usize {
            let mut expect = vec![0i64; 2 * n];
            for i in 0..n {
                for j in 0..n {
                    expect[i + j] += 1;
                }
            }
            assert_eq!(initial_pp_counts(n).unwrap(), expect);
        }
        assert_eq!(initial_pp_counts(2).unwrap(), vec![1, 2, 1, 0]);
        assert_eq!(initial_pp_counts(4).unwrap(), vec![1, 2, 3, 4, 3, 2, 1, 0]);
        assert_eq!(initial_pp_counts(8).unwrap().iter().sum::<i64>(), 64);
    }

    #[test]
    fn empty_tree_keeps_counts() {
        let t = CompressorTree::with_default_stages(4).unwrap();
        let v = propagate_counts(&t);
        for s in 0..=t.stages() {
            assert_eq!(v.stage(s), v.stage(0));
        }
    }

    #[test]
    fn single_half_adder_moves_one_bit() {
        let mut t = CompressorTree::new(2, 2).unwrap();
        t.set(CompressorKind::Half, 1, 0, 1);
        let v = propagate_counts(&t);
        assert_eq!(v.get(1, 1), 1);
        assert_eq!(v.get(2, 1), 2);
    }

    #[test]
    fn over_compression_reported_with_excess() {
        let mut t = CompressorTree::new(2, 2).unwrap();
        t.set(CompressorKind::Full, 0, 0, 1);
        let errs = validate_ct(&t);
        assert!(errs.contains(&DesignRuleViolation::OverCompression {
            column: 0,
            stage: 0,
            excess: 2
        }));
    }

    #[test]
    fn empty_tree_is_under_compressed_in_tall_columns() {
        let t = CompressorTree::with_default_stages(4).unwrap();
        let cols: Vec<usize> = validate_ct(&t)
            .into_iter()
            .map(|e| match e {
                DesignRuleViolation::UnderCompression { column, .. } => column,
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        assert_eq!(cols, vec![2, 3, 4]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(CompressorTree::from_counts(4, 3, vec![0; 5]).is_err());
    }
}
