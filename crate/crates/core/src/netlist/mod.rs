// SPDX-License-Identifier: Apache-2.0

//! Gate-level netlists for multipliers and prefix adders.

mod build;
mod hdl;
mod sim;
mod timing;

pub use build::{
    assemble_multiplier, build_ct_netlist, build_prefix_netlist, CpaChoice, CtNetlist,
};
pub use hdl::{emit_hdl, parse_hdl};
pub use sim::{simulate, verify_exhaustive, Counterexample, Verification, MAX_EXHAUSTIVE_WIDTH};
pub use timing::{arrival_times, critical_path, total_area, TimingModel};

use crate::error::{Error, Result};

/// Wire 0 is the constant-zero net.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireId(pub u32);

impl WireId {
    pub const ZERO: WireId = WireId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    /// `y = a & b`
    And,
    /// `y = a ^ b`
    Xor,
    /// `(s, co) = a + b`
    HalfAdder,
    /// `(s, co) = a + b + ci`
    FullAdder,
    /// `(g, p) = (gu | pu & gl, pu & pl)`
    PrefixBlack,
    /// `g = gu | pu & gl`
    PrefixGray,
}

impl CellKind {
    pub fn input_pins(self) -> &'static [&'static str] {
        match self {
            CellKind::And | CellKind::Xor | CellKind::HalfAdder => &["a", "b"],
            CellKind::FullAdder => &["a", "b", "ci"],
            CellKind::PrefixBlack => &["gu", "pu", "gl", "pl"],
            CellKind::PrefixGray => &["gu", "pu", "gl"],
        }
    }

    pub fn output_pins(self) -> &'static [&'static str] {
        match self {
            CellKind::And | CellKind::Xor => &["y"],
            CellKind::HalfAdder | CellKind::FullAdder => &["s", "co"],
            CellKind::PrefixBlack => &["g", "p"],
            CellKind::PrefixGray => &["g"],
        }
    }

    /// Primitive module name used in emitted HDL.
    pub fn primitive(self) -> &'static str {
        match self {
            CellKind::And => "AND2",
            CellKind::Xor => "XOR2",
            CellKind::HalfAdder => "HA",
            CellKind::FullAdder => "FA",
            CellKind::PrefixBlack => "PFX_BLACK",
            CellKind::PrefixGray => "PFX_GRAY",
        }
    }

    pub fn from_primitive(name: &str) -> Option<Self> {
        Some(match name {
            "AND2" => CellKind::And,
            "XOR2" => CellKind::Xor,
            "HA" => CellKind::HalfAdder,
            "FA" => CellKind::FullAdder,
            "PFX_BLACK" => CellKind::PrefixBlack,
            "PFX_GRAY" => CellKind::PrefixGray,
            _ => return None,
        })
    }

    /// Output values for one 64-lane slice of inputs.
    pub(crate) fn eval(self, i: &[u64]) -> [u64; 2] {
        match self {
            CellKind::And => [i[0] & i[1], 0],
            CellKind::Xor => [i[0] ^ i[1], 0],
            CellKind::HalfAdder => [i[0] ^ i[1], i[0] & i[1]],
            CellKind::FullAdder => [
                i[0] ^ i[1] ^ i[2],
                (i[0] & i[1]) | (i[2] & (i[0] ^ i[1])),
            ],
            CellKind::PrefixBlack => [i[0] | (i[1] & i[2]), i[1] & i[3]],
            CellKind::PrefixGray => [i[0] | (i[1] & i[2]), 0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub kind: CellKind,
    /// Instance name; encodes the structural position of the cell.
    pub name: String,
    pub inputs: Vec<WireId>,
    pub outputs: Vec<WireId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Port {
    pub name: String,
    /// Bit 0 first.
    pub wires: Vec<WireId>,
}

/// Cells are stored in topological order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Netlist {
    pub name: String,
    wire_count: u32,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    pub cells: Vec<Cell>,
}

impl Netlist {
    pub fn new(name: impl Into<String>) -> Self {
        Netlist {
            name: name.into(),
            wire_count: 1,
            inputs: Vec::new(),
            outputs: Vec::new(),
            cells: Vec::new(),
        }
    }

    pub fn wire_count(&self) -> usize {
        self.wire_count as usize
    }

    pub fn new_wire(&mut self) -> WireId {
        let w = WireId(self.wire_count);
        self.wire_count += 1;
        w
    }

    pub fn add_input(&mut self, name: impl Into<String>, width: usize) -> Vec<WireId> {
        let wires: Vec<WireId> = (0..width).map(|_| self.new_wire()).collect();
        self.inputs.push(Port {
            name: name.into(),
            wires: wires.clone(),
        });
        wires
    }

    pub fn add_output(&mut self, name: impl Into<String>, wires: Vec<WireId>) {
        self.outputs.push(Port {
            name: name.into(),
            wires,
        });
    }

    /// Adds a cell with fresh output wires and returns them.
    pub fn add_cell(&mut self, kind: CellKind, name: impl Into<String>, inputs: Vec<WireId>) -> Vec<WireId> {
        assert_eq!(inputs.len(), kind.input_pins().len(), "{kind:?} pin count");
        let outputs: Vec<WireId> = (0..kind.output_pins().len()).map(|_| self.new_wire()).collect();
        self.cells.push(Cell {
            kind,
            name: name.into(),
            inputs,
            outputs: outputs.clone(),
        });
        outputs
    }

    pub fn input(&self, name: &str) -> Option<&Port> {
        self.inputs.iter().find(|p| p.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&Port> {
        self.outputs.iter().find(|p| p.name == name)
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|c| c.kind == kind).count()
    }

    /// Checks single drivers, driven cell inputs, pin counts and
    /// topological cell order.
    pub fn validate(&self) -> Result<()> {
        let mut driven = vec![false; self.wire_count()];
        driven[0] = true;
        let mut drive = |w: WireId, what: &str| -> Result<()> {
            let slot = driven
                .get_mut(w.index())
                .ok_or_else(|| Error::IllegalDesign(format!("{what} drives unknown wire {}", w.0)))?;
            if *slot {
                return Err(Error::IllegalDesign(format!("wire {} has several drivers", w.0)));
            }
            *slot = true;
            Ok(())
        };
        for p in &self.inputs {
            for &w in &p.wires {
                drive(w, &p.name)?;
            }
        }
        let mut defined = vec![false; self.wire_count()];
        defined[0] = true;
        for p in &self.inputs {
            for &w in &p.wires {
                defined[w.index()] = true;
            }
        }
        for cell in &self.cells {
            if cell.inputs.len() != cell.kind.input_pins().len()
                || cell.outputs.len() != cell.kind.output_pins().len()
            {
                return Err(Error::IllegalDesign(format!("cell {} has wrong pin count", cell.name)));
            }
            for &w in &cell.inputs {
                if !defined.get(w.index()).copied().unwrap_or(false) {
                    return Err(Error::IllegalDesign(format!(
                        "cell {} reads wire {} before it is driven",
                        cell.name, w.0
                    )));
                }
            }
            for &w in &cell.outputs {
                drive(w, &cell.name)?;
                defined[w.index()] = true;
            }
        }
        for p in &self.outputs {
            for &w in &p.wires {
                if !defined.get(w.index()).copied().unwrap_or(false) {
                    return Err(Error::IllegalDesign(format!("output {} reads an undriven wire", p.name)));
                }
            }
        }
        Ok(())
    }
}
