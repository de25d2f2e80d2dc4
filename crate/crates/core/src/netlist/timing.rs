// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{CellKind, Netlist};

/// Unit-gate delay and area constants.
///
/// Defaults: XOR-class gates cost 2, simple gates 1; a full adder's `a`/`b`
/// pins see two XOR levels, its `ci` pin one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub and_delay: f64,
    pub and_area: f64,
    pub xor_delay: f64,
    pub xor_area: f64,
    pub ha_sum_delay: f64,
    pub ha_carry_delay: f64,
    pub ha_area: f64,
    pub fa_ab_sum_delay: f64,
    pub fa_ab_carry_delay: f64,
    pub fa_cin_sum_delay: f64,
    pub fa_cin_carry_delay: f64,
    pub fa_area: f64,
    pub prefix_delay: f64,
    pub prefix_area: f64,
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel {
            and_delay: 1.0,
            and_area: 1.0,
            xor_delay: 2.0,
            xor_area: 2.0,
            ha_sum_delay: 2.0,
            ha_carry_delay: 1.0,
            ha_area: 3.0,
            fa_ab_sum_delay: 4.0,
            fa_ab_carry_delay: 4.0,
            fa_cin_sum_delay: 2.0,
            fa_cin_carry_delay: 2.0,
            fa_area: 7.0,
            prefix_delay: 2.0,
            prefix_area: 3.0,
        }
    }
}

impl TimingModel {
    /// Delay from input pin `input` to output pin `output`, or `None` when
    /// the output does not depend on that input.
    pub fn pin_delay(&self, kind: CellKind, input: usize, output: usize) -> Option<f64> {
        match kind {
            CellKind::And => Some(self.and_delay),
            CellKind::Xor => Some(self.xor_delay),
            CellKind::HalfAdder => Some(if output == 0 {
                self.ha_sum_delay
            } else {
                self.ha_carry_delay
            }),
            CellKind::FullAdder => Some(match (input == 2, output == 0) {
                (false, true) => self.fa_ab_sum_delay,
                (false, false) => self.fa_ab_carry_delay,
                (true, true) => self.fa_cin_sum_delay,
                (true, false) => self.fa_cin_carry_delay,
            }),
            CellKind::PrefixBlack => {
                // p = pu & pl ignores both generates.
                if output == 1 && (input == 0 || input == 2) {
                    None
                } else {
                    Some(self.prefix_delay)
                }
            }
            CellKind::PrefixGray => Some(self.prefix_delay),
        }
    }

    pub fn area(&self, kind: CellKind) -> f64 {
        match kind {
            CellKind::And => self.and_area,
            CellKind::Xor => self.xor_area,
            CellKind::HalfAdder => self.ha_area,
            CellKind::FullAdder => self.fa_area,
            CellKind::PrefixBlack | CellKind::PrefixGray => self.prefix_area,
        }
    }

    /// Output arrival times of a cell given its input arrivals.
    pub fn cell_arrivals(&self, kind: CellKind, inputs: &[f64]) -> [f64; 2] {
        let mut out = [0.0f64; 2];
        for (o, slot) in out.iter_mut().enumerate().take(kind.output_pins().len()) {
            *slot = inputs
                .iter()
                .enumerate()
                .filter_map(|(i, &t)| self.pin_delay(kind, i, o).map(|d| t + d))
                .fold(0.0, f64::max);
        }
        out
    }
}

/// Arrival time of every wire; primary inputs and constants arrive at 0.
pub fn arrival_times(nl: &Netlist, timing: &TimingModel) -> Vec<f64> {
    let mut at = vec![0.0; nl.wire_count()];
    let mut ins = Vec::with_capacity(4);
    for cell in &nl.cells {
        ins.clear();
        ins.extend(cell.inputs.iter().map(|w| at[w.index()]));
        let outs = timing.cell_arrivals(cell.kind, &ins);
        for (k, w) in cell.outputs.iter().enumerate() {
            at[w.index()] = outs[k];
        }
    }
    at
}

/// Latest arrival over all primary outputs.
pub fn critical_path(nl: &Netlist, timing: &TimingModel) -> f64 {
    let at = arrival_times(nl, timing);
    nl.outputs
        .iter()
        .flat_map(|p| p.wires.iter())
        .map(|w| at[w.index()])
        .fold(0.0, f64::max)
}

pub fn total_area(nl: &Netlist, timing: &TimingModel) -> f64 {
    nl.cells.iter().map(|c| timing.area(c.kind)).sum()
}
