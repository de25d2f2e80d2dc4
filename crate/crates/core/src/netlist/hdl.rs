// SPDX-License-Identifier: Apache-2.0

//! Structural Verilog output and a parser for exactly that subset.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{CellKind, Netlist, WireId};
use crate::error::{Error, Result};

const PRIMITIVES: &str = "\
module AND2(input a, input b, output y);
  assign y = a & b;
endmodule
module XOR2(input a, input b, output y);
  assign y = a ^ b;
endmodule
module HA(input a, input b, output s, output co);
  assign s = a ^ b;
  assign co = a & b;
endmodule
module FA(input a, input b, input ci, output s, output co);
  assign s = a ^ b ^ ci;
  assign co = (a & b) | (ci & (a ^ b));
endmodule
module PFX_BLACK(input gu, input pu, input gl, input pl, output g, output p);
  assign g = gu | (pu & gl);
  assign p = pu & pl;
endmodule
module PFX_GRAY(input gu, input pu, input gl, output g);
  assign g = gu | (pu & gl);
endmodule
";

fn wire_names(nl: &Netlist) -> Vec<String> {
    let mut names: Vec<String> = (0..nl.wire_count()).map(|w| format!("w{w}")).collect();
    names[0] = "1'b0".into();
    for p in &nl.inputs {
        for (i, w) in p.wires.iter().enumerate() {
            names[w.index()] = format!("{}[{i}]", p.name);
        }
    }
    names
}

/// Emits the netlist as structural Verilog, preceded by the primitive cell
/// definitions. Output is a pure function of the netlist.
pub fn emit_hdl(nl: &Netlist) -> String {
    let names = wire_names(nl);
    let mut out = String::from("// format_version: 1\n");
    out.push_str(PRIMITIVES);
    let ports: Vec<&str> = nl
        .inputs
        .iter()
        .chain(&nl.outputs)
        .map(|p| p.name.as_str())
        .collect();
    let _ = writeln!(out, "module {}({});", nl.name, ports.join(", "));
    for p in &nl.inputs {
        let _ = writeln!(out, "  input [{}:0] {};", p.wires.len() - 1, p.name);
    }
    for p in &nl.outputs {
        let _ = writeln!(out, "  output [{}:0] {};", p.wires.len() - 1, p.name);
    }
    for cell in &nl.cells {
        for w in &cell.outputs {
            let _ = writeln!(out, "  wire {};", names[w.index()]);
        }
    }
    for cell in &nl.cells {
        let pins: Vec<String> = cell
            .kind
            .input_pins()
            .iter()
            .zip(&cell.inputs)
            .chain(cell.kind.output_pins().iter().zip(&cell.outputs))
            .map(|(pin, w)| format!(".{pin}({})", names[w.index()]))
            .collect();
        let _ = writeln!(out, "  {} {} ({});", cell.kind.primitive(), cell.name, pins.join(", "));
    }
    for p in &nl.outputs {
        for (i, w) in p.wires.iter().enumerate() {
            let _ = writeln!(out, "  assign {}[{i}] = {};", p.name, names[w.index()]);
        }
    }
    out.push_str("endmodule\n");
    out
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("hdl line {line}: {msg}"))
}

fn parse_width(decl: &str, line: usize) -> Result<(usize, String)> {
    let decl = decl.trim_end_matches(';').trim();
    let (range, name) = decl
        .strip_prefix('[')
        .and_then(|r| r.split_once(']'))
        .ok_or_else(|| bad(line, "expected `[msb:0] name`"))?;
    let msb: usize = range
        .strip_suffix(":0")
        .and_then(|m| m.parse().ok())
        .ok_or_else(|| bad(line, format!("bad range `{range}`")))?;
    Ok((msb + 1, name.trim().to_string()))
}

/// Parses HDL produced by [`emit_hdl`] back into a netlist. Primitive module
/// definitions are skipped; the first other module is returned.
pub fn parse_hdl(text: &str) -> Result<Netlist> {
    let mut nl: Option<Netlist> = None;
    let mut in_primitive = false;
    let mut names: HashMap<String, WireId> = HashMap::from([("1'b0".to_string(), WireId::ZERO)]);
    let mut outputs: Vec<(String, Vec<Option<WireId>>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with("//") {
            continue;
        }
        if let Some(rest) = s.strip_prefix("module ") {
            let name = rest.split('(').next().unwrap_or("").trim();
            if CellKind::from_primitive(name).is_some() {
                in_primitive = true;
            } else if nl.is_some() {
                return Err(bad(line, "more than one design module"));
            } else {
                nl = Some(Netlist::new(name));
            }
            continue;
        }
        if s == "endmodule" {
            if in_primitive {
                in_primitive = false;
                continue;
            }
            break;
        }
        if in_primitive {
            continue;
        }
        let nl = nl.as_mut().ok_or_else(|| bad(line, "statement outside a module"))?;
        if let Some(rest) = s.strip_prefix("input ") {
            let (width, name) = parse_width(rest, line)?;
            for (i, w) in nl.add_input(&name, width).into_iter().enumerate() {
                names.insert(format!("{name}[{i}]"), w);
            }
        } else if let Some(rest) = s.strip_prefix("output ") {
            let (width, name) = parse_width(rest, line)?;
            outputs.push((name, vec![None; width]));
        } else if s.starts_with("wire ") {
            // Declarations carry no information beyond the cell instances.
        } else if let Some(rest) = s.strip_prefix("assign ") {
            let (lhs, rhs) = rest
                .trim_end_matches(';')
                .split_once('=')
                .ok_or_else(|| bad(line, "expected `assign port[i] = wire;`"))?;
            let (port, bit) = lhs
                .trim()
                .strip_suffix(']')
                .and_then(|l| l.split_once('['))
                .ok_or_else(|| bad(line, "bad assign target"))?;
            let bit: usize = bit.parse().map_err(|_| bad(line, "bad bit index"))?;
            let w = *names
                .get(rhs.trim())
                .ok_or_else(|| bad(line, format!("unknown wire `{}`", rhs.trim())))?;
            let slot = outputs
                .iter_mut()
                .find(|(n, _)| n == port)
                .and_then(|(_, ws)| ws.get_mut(bit))
                .ok_or_else(|| bad(line, format!("unknown output bit {port}[{bit}]")))?;
            *slot = Some(w);
        } else {
            let (head, pins) = s
                .trim_end_matches(';')
                .split_once('(')
                .ok_or_else(|| bad(line, "expected a cell instance"))?;
            let mut head = head.split_whitespace();
            let (prim, inst) = (head.next().unwrap_or(""), head.next().unwrap_or(""));
            let kind = CellKind::from_primitive(prim).ok_or_else(|| bad(line, format!("unknown cell `{prim}`")))?;
            let pins = pins.trim().strip_suffix(')').ok_or_else(|| bad(line, "unclosed pin list"))?;
            let mut conn: HashMap<&str, &str> = HashMap::new();
            for p in pins.split(',') {
                let (pin, net) = p
                    .trim()
                    .strip_prefix('.')
                    .and_then(|p| p.strip_suffix(')'))
                    .and_then(|p| p.split_once('('))
                    .ok_or_else(|| bad(line, format!("bad pin `{}`", p.trim())))?;
                conn.insert(pin, net);
            }
            let inputs = kind
                .input_pins()
                .iter()
                .map(|pin| {
                    let net = conn.get(pin).ok_or_else(|| bad(line, format!("pin `{pin}` unconnected")))?;
                    names
                        .get(*net)
                        .copied()
                        .ok_or_else(|| bad(line, format!("wire `{net}` used before it is driven")))
                })
                .collect::<Result<Vec<_>>>()?;
            let outs = nl.add_cell(kind, inst, inputs);
            for (pin, w) in kind.output_pins().iter().zip(outs) {
                let net = conn.get(pin).ok_or_else(|| bad(line, format!("pin `{pin}` unconnected")))?;
                if names.insert(net.to_string(), w).is_some() {
                    return Err(bad(line, format!("wire `{net}` has several drivers")));
                }
            }
        }
    }
    let mut nl = nl.ok_or_else(|| Error::Format("no design module found".into()))?;
    for (name, wires) in outputs {
        let wires = wires
            .into_iter()
            .enumerate()
            .map(|(i, w)| w.ok_or_else(|| Error::Format(format!("output {name}[{i}] never assigned"))))
            .collect::<Result<Vec<_>>>()?;
        nl.add_output(name, wires);
    }
    nl.validate()?;
    Ok(nl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{assemble_multiplier, CpaChoice, TimingModel};
    use crate::seeds::wallace;

    #[test]
    fn round_trip_is_exact() {
        let t = wallace(4).unwrap();
        let nl = assemble_multiplier(&t, CpaChoice::Default, &TimingModel::default()).unwrap();
        let text = emit_hdl(&nl);
        assert!(text.starts_with("// format_version: 1\n"));
        let back = parse_hdl(&text).unwrap();
        assert_eq!(back, nl);
        assert_eq!(emit_hdl(&back), text);
    }

    #[test]
    fn rejects_unknown_cell() {
        let text = "module m(a, p);\n  input [0:0] a;\n  output [0:0] p;\n  OR2 x (.a(a[0]), .b(a[0]), .y(w2));\nendmodule\n";
        assert!(matches!(parse_hdl(text), Err(Error::Format(_))));
    }
}
