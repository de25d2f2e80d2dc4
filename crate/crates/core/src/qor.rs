// SPDX-License-Identifier: Apache-2.0

//! Analytical quality-of-result cost.

use serde::{Deserialize, Serialize};

use crate::ct::CompressorTree;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::netlist::{assemble_multiplier, critical_path, total_area, CpaChoice, Netlist, TimingModel};
use crate::prefix::PrefixBitmap;
use crate::seeds;

pub const DEFAULT_DELAY_WEIGHT: f64 = 0.66;

/// Number of optimization scenarios (timing-driven, area-driven).
pub const SCENARIOS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QorLabel {
    /// Critical-path delay per scenario, unit delays.
    pub delay: [f64; SCENARIOS],
    /// Cell area per scenario, unit areas.
    pub area: [f64; SCENARIOS],
    /// Normalized weighted cost; 1.0 for the reference design.
    pub y: f64,
}

/// Delay and area of the same-width Wallace tree with a serial CPA.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QorReference {
    pub width: usize,
    pub delay: f64,
    pub area: f64,
}

impl QorReference {
    pub fn wallace(n: usize, timing: &TimingModel) -> Result<Self> {
        let nl = assemble_multiplier(&seeds::wallace(n)?, CpaChoice::Default, timing)?;
        Ok(QorReference {
            width: n,
            delay: critical_path(&nl, timing),
            area: total_area(&nl, timing),
        })
    }
}

/// Cost of an assembled `n`-bit multiplier netlist.
///
/// Both scenarios share one timing model, so their delay and area entries
/// coincide; `y` averages the two normalized weighted sums.
pub fn evaluate_qor(
    nl: &Netlist,
    timing: &TimingModel,
    delay_weight: f64,
    reference: Option<&QorReference>,
) -> Result<QorLabel> {
    let reference = reference.ok_or(Error::MissingReference)?;
    let n = nl.input("a").map_or(0, |p| p.wires.len());
    if n != reference.width {
        return Err(Error::InvalidArgument(format!(
            "reference is for width {}, netlist has width {n}",
            reference.width
        )));
    }
    if !(0.0..=1.0).contains(&delay_weight) {
        return Err(Error::InvalidArgument(format!("delay weight {delay_weight} outside [0, 1]")));
    }
    let d = critical_path(nl, timing);
    let a = total_area(nl, timing);
    let delay = [d; SCENARIOS];
    let area = [a; SCENARIOS];
    let sum: f64 = (0..SCENARIOS)
        .map(|i| delay_weight * delay[i] / reference.delay + (1.0 - delay_weight) * area[i] / reference.area)
        .sum();
    Ok(QorLabel {
        delay,
        area,
        y: sum / SCENARIOS as f64,
    })
}

/// Labels designs of one multiplier width. A tree is paired with the fixed
/// CPA (serial by default); a prefix bitmap with the fixed tree (Wallace by
/// default).
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub timing: TimingModel,
    pub delay_weight: f64,
    reference: QorReference,
    fixed_ct: CompressorTree,
    fixed_cpa: Option<PrefixBitmap>,
}

impl Evaluator {
    pub fn new(n: usize, timing: TimingModel, delay_weight: f64) -> Result<Self> {
        Ok(Evaluator {
            reference: QorReference::wallace(n, &timing)?,
            fixed_ct: seeds::wallace(n)?,
            fixed_cpa: None,
            timing,
            delay_weight,
        })
    }

    pub fn width(&self) -> usize {
        self.reference.width
    }

    pub fn reference(&self) -> &QorReference {
        &self.reference
    }

    pub fn fixed_ct(&self) -> &CompressorTree {
        &self.fixed_ct
    }

    pub fn fixed_cpa(&self) -> Option<&PrefixBitmap> {
        self.fixed_cpa.as_ref()
    }

    pub fn with_fixed_ct(mut self, t: CompressorTree) -> Result<Self> {
        if t.width() != self.width() {
            return Err(Error::InvalidArgument(format!(
                "fixed tree width {} differs from {}",
                t.width(),
                self.width()
            )));
        }
        self.fixed_ct = t;
        Ok(self)
    }

    pub fn with_fixed_cpa(mut self, p: Option<PrefixBitmap>) -> Result<Self> {
        if let Some(p) = &p {
            if p.width() != 2 * self.width() {
                return Err(Error::InvalidArgument(format!(
                    "fixed CPA width {} differs from {}",
                    p.width(),
                    2 * self.width()
                )));
            }
        }
        self.fixed_cpa = p;
        Ok(self)
    }

    /// Builds the full multiplier around `design`.
    pub fn assemble(&self, design: &Design) -> Result<Netlist> {
        match design {
            Design::Ct(t) => {
                let cpa = self.fixed_cpa.as_ref().map_or(CpaChoice::Default, CpaChoice::Prefix);
                assemble_multiplier(t, cpa, &self.timing)
            }
            Design::Prefix(p) => assemble_multiplier(&self.fixed_ct, CpaChoice::Prefix(p), &self.timing),
        }
    }

    pub fn evaluate(&self, design: &Design) -> Result<QorLabel> {
        let nl = self.assemble(design)?;
        evaluate_qor(&nl, &self.timing, self.delay_weight, Some(&self.reference))
    }
}
