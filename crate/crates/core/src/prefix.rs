// SPDX-License-Identifier: Apache-2.0

//! Parallel-prefix adders as lower-triangular bitmaps.
//!
//! Entry `(i, j)` with `i >= j` marks a node computing the group
//! generate/propagate over bits `j..=i`. Diagonal entries are the per-bit
//! inputs, column 0 holds the carries consumed by the sum stage. A node
//! `(i, j)` with `i > j` needs a split point `k` in `j+1..=i` such that both
//! `(i, k)` and `(k-1, j)` are present; the smallest such `k` fixes the
//! node's parents.

use crate::error::{Error, Result};
use crate::violation::DesignRuleViolation;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrefixBitmap {
    width: usize,
    bits: Vec<bool>,
}

impl PrefixBitmap {
    /// All-zero bitmap, not even the diagonal.
    pub fn empty(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("prefix width must be positive".into()));
        }
        Ok(PrefixBitmap {
            width,
            bits: vec![false; width * width],
        })
    }

    /// Only the diagonal input nodes.
    pub fn inputs_only(width: usize) -> Result<Self> {
        let mut p = Self::empty(width)?;
        for i in 0..width {
            p.set(i, i, true);
        }
        Ok(p)
    }

    pub fn from_bits(width: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || bits.len() != width * width {
            return Err(Error::InvalidArgument(format!(
                "expected {} bits for a {width}x{width} bitmap, got {}",
                width * width,
                bits.len()
            )));
        }
        if (0..width).any(|i| (i + 1..width).any(|j| bits[i * width + j])) {
            return Err(Error::InvalidArgument(
                "upper-right triangle of a prefix bitmap must be zero".into(),
            ));
        }
        Ok(PrefixBitmap { width, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major bits.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        j <= i && self.bits[i * self.width + j]
    }

    /// Sets `(i, j)`. Entries above the diagonal cannot be set.
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(j <= i && i < self.width, "({i}, {j}) outside the lower triangle");
        self.bits[i * self.width + j] = value;
    }

    /// Present nodes with `i > j`, in row order then descending `j`.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.width).flat_map(move |i| (0..i).rev().filter(move |&j| self.get(i, j)).map(move |j| (i, j)))
    }

    /// Number of combine nodes (present nodes off the diagonal).
    pub fn node_count(&self) -> usize {
        self.nodes().count()
    }

    /// Smallest split point `k` for `(i, j)`, if any.
    pub fn split_point(&self, i: usize, j: usize) -> Option<usize> {
        (j + 1..=i).find(|&k| self.get(i, k) && self.get(k - 1, j))
    }
}

/// Reports missing required nodes (diagonal and column 0) first, then every
/// present off-diagonal node without a parent pair, in row order.
pub fn validate_prefix(p: &PrefixBitmap) -> Vec<DesignRuleViolation> {
    let mut out = Vec::new();
    for i in 0..p.width() {
        if !p.get(i, i) {
            out.push(DesignRuleViolation::MissingRequiredNode { row: i, col: i });
        }
        if i > 0 && !p.get(i, 0) {
            out.push(DesignRuleViolation::MissingRequiredNode { row: i, col: 0 });
        }
    }
    for i in 0..p.width() {
        for j in 0..i {
            if p.get(i, j) && p.split_point(i, j).is_none() {
                out.push(DesignRuleViolation::MissingLowerParent { row: i, col: j });
            }
        }
    }
    out
}

/// Upper and lower parent of node `(i, j)` under the minimal-split rule.
pub fn canonical_parents(
    p: &PrefixBitmap,
    i: usize,
    j: usize,
) -> Result<((usize, usize), (usize, usize))> {
    if i >= p.width() || j >= i || !p.get(i, j) {
        return Err(Error::InvalidArgument(format!(
            "({i}, {j}) is not a present off-diagonal node"
        )));
    }
    let k = p
        .split_point(i, j)
        .ok_or(Error::MissingParent { row: i, col: j })?;
    Ok(((i, k), (k - 1, j)))
}
