// SPDX-License-Identifier: Apache-2.0

//! Classic constructions used as dataset seeds and as the QoR reference.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ct::{default_stages, initial_pp_counts, CompressorKind, CompressorTree};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::legalize::legalize_prefix;
use crate::prefix::PrefixBitmap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    Wallace,
    Dadda,
    Serial,
    Sklansky,
    KoggeStone,
    BrentKung,
}

impl SeedKind {
    pub const CT: [SeedKind; 2] = [SeedKind::Wallace, SeedKind::Dadda];
    pub const PREFIX: [SeedKind; 4] = [
        SeedKind::Serial,
        SeedKind::Sklansky,
        SeedKind::KoggeStone,
        SeedKind::BrentKung,
    ];
}

impl fmt::Display for SeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SeedKind::Wallace => "wallace",
            SeedKind::Dadda => "dadda",
            SeedKind::Serial => "serial",
            SeedKind::Sklansky => "sklansky",
            SeedKind::KoggeStone => "kogge_stone",
            SeedKind::BrentKung => "brent_kung",
        };
        f.write_str(s)
    }
}

impl FromStr for SeedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "wallace" => SeedKind::Wallace,
            "dadda" => SeedKind::Dadda,
            "serial" => SeedKind::Serial,
            "sklansky" => SeedKind::Sklansky,
            "kogge_stone" | "kogge-stone" => SeedKind::KoggeStone,
            "brent_kung" | "brent-kung" => SeedKind::BrentKung,
            other => return Err(Error::InvalidArgument(format!("unknown seed kind `{other}`"))),
        })
    }
}

/// Canonical construction of `kind` at width `n`. Trees use the default
/// stage budget; prefix bitmaps are `n` bits wide.
pub fn seed_design(n: usize, kind: SeedKind) -> Result<Design> {
    Ok(match kind {
        SeedKind::Wallace => Design::Ct(wallace(n)?),
        SeedKind::Dadda => Design::Ct(dadda(n)?),
        SeedKind::Serial => Design::Prefix(serial(n)?),
        SeedKind::Sklansky => Design::Prefix(sklansky(n)?),
        SeedKind::KoggeStone => Design::Prefix(kogge_stone(n)?),
        SeedKind::BrentKung => Design::Prefix(brent_kung(n)?),
    })
}

fn fit_stages(n: usize, plan: Vec<Vec<(u32, u32)>>) -> Result<CompressorTree> {
    let stages = default_stages(n)?;
    if plan.len() > stages {
        return Err(Error::IllegalDesign(format!(
            "construction needs {} stages but only {stages} are available",
            plan.len()
        )));
    }
    let mut t = CompressorTree::new(n, stages)?;
    for (s, cols) in plan.into_iter().enumerate() {
        for (c, (fa, ha)) in cols.into_iter().enumerate() {
            t.set(CompressorKind::Full, c, s, fa);
            t.set(CompressorKind::Half, c, s, ha);
        }
    }
    Ok(t)
}

fn next_heights(heights: &[i64], plan: &[(u32, u32)]) -> Vec<i64> {
    let mut next = vec![0; heights.len()];
    for c in 0..heights.len() {
        let (fa, ha) = plan[c];
        next[c] += heights[c] - 2 * fa as i64 - ha as i64;
        if c + 1 < heights.len() {
            next[c + 1] += (fa + ha) as i64;
        }
    }
    next
}

/// Greedy column-wise Wallace reduction: every stage packs as many full
/// adders as fit and a half adder on a remainder of two.
pub fn wallace(n: usize) -> Result<CompressorTree> {
    let mut heights = initial_pp_counts(n)?;
    let mut plan = Vec::new();
    while heights.iter().any(|&h| h > 2) {
        let stage: Vec<(u32, u32)> = heights
            .iter()
            .map(|&h| ((h / 3) as u32, (h % 3 == 2) as u32))
            .collect();
        heights = next_heights(&heights, &stage);
        plan.push(stage);
    }
    fit_stages(n, plan)
}

/// Dadda reduction: each stage only compresses as much as needed to meet the
/// next height target in the 2, 3, 4, 6, 9, ... sequence.
pub fn dadda(n: usize) -> Result<CompressorTree> {
    let mut heights = initial_pp_counts(n)?;
    let mut targets = vec![2i64];
    while *targets.last().unwrap() < n as i64 {
        let d = *targets.last().unwrap();
        targets.push(d * 3 / 2);
    }
    let mut plan = Vec::new();
    while heights.iter().any(|&h| h > 2) {
        let max = *heights.iter().max().unwrap();
        let target = *targets.iter().rev().find(|&&d| d < max).unwrap();
        let mut stage = Vec::with_capacity(heights.len());
        let mut carries_in = 0i64;
        for &h in &heights {
            let (mut fa, mut ha) = (0i64, 0i64);
            loop {
                let next = h - 2 * fa - ha + carries_in;
                let free = h - 3 * fa - 2 * ha;
                if next <= target {
                    break;
                }
                if next - target >= 2 && free >= 3 {
                    fa += 1;
                } else if free >= 2 {
                    ha += 1;
                } else {
                    break;
                }
            }
            carries_in = fa + ha;
            stage.push((fa as u32, ha as u32));
        }
        heights = next_heights(&heights, &stage);
        plan.push(stage);
    }
    fit_stages(n, plan)
}

/// Ripple-carry prefix structure: every output node `(i, 0)` only.
pub fn serial(n: usize) -> Result<PrefixBitmap> {
    let mut p = PrefixBitmap::inputs_only(n)?;
    for i in 1..n {
        p.set(i, 0, true);
    }
    Ok(p)
}

pub fn sklansky(n: usize) -> Result<PrefixBitmap> {
    let mut p = PrefixBitmap::inputs_only(n)?;
    let mut half = 1;
    while half < n {
        let block = 2 * half;
        for i in 0..n {
            if i & half != 0 {
                p.set(i, (i / block) * block, true);
            }
        }
        half = block;
    }
    Ok(p)
}

pub fn kogge_stone(n: usize) -> Result<PrefixBitmap> {
    let mut p = PrefixBitmap::inputs_only(n)?;
    let mut d = 1;
    while d < n {
        for i in d..n {
            p.set(i, (i + 1).saturating_sub(2 * d), true);
        }
        d *= 2;
    }
    Ok(p)
}

pub fn brent_kung(n: usize) -> Result<PrefixBitmap> {
    let mut p = PrefixBitmap::inputs_only(n)?;
    let mut span = 2;
    while span <= n {
        let mut i = span - 1;
        while i < n {
            p.set(i, i + 1 - span, true);
            i += span;
        }
        span *= 2;
    }
    while span > 2 {
        span /= 2;
        let mut i = span + span / 2 - 1;
        while i < n {
            p.set(i, 0, true);
            i += span;
        }
    }
    // Widths that are not a power of two leave some outputs without parents.
    Ok(legalize_prefix(&p))
}
