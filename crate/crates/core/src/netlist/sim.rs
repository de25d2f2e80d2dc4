// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{Netlist, WireId};
use crate::error::{Error, Result};

/// Largest operand width accepted by [`verify_exhaustive`].
pub const MAX_EXHAUSTIVE_WIDTH: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Input port values, in port order.
    pub inputs: Vec<(String, u64)>,
    pub expected: u64,
    pub actual: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verification {
    Passed { vectors: u64 },
    Failed(Counterexample),
}

impl Verification {
    pub fn passed(&self) -> bool {
        matches!(self, Verification::Passed { .. })
    }
}

/// Evaluates 64 input vectors at once. `lanes[k]` carries the `k`-th input
/// bit (ports in order, bit 0 first) of every lane.
fn eval_lanes(nl: &Netlist, lanes: &[u64]) -> Vec<u64> {
    let mut val = vec![0u64; nl.wire_count()];
    let mut k = 0;
    for p in &nl.inputs {
        for w in &p.wires {
            val[w.index()] = lanes[k];
            k += 1;
        }
    }
    let mut ins = [0u64; 4];
    for cell in &nl.cells {
        for (slot, w) in ins.iter_mut().zip(&cell.inputs) {
            *slot = val[w.index()];
        }
        let out = cell.kind.eval(&ins[..cell.inputs.len()]);
        for (o, w) in cell.outputs.iter().enumerate() {
            val[w.index()] = out[o];
        }
    }
    val
}

fn port_value(val: &[u64], wires: &[WireId], lane: usize) -> u64 {
    wires
        .iter()
        .enumerate()
        .fold(0, |acc, (i, w)| acc | (((val[w.index()] >> lane) & 1) << i))
}

/// Simulates one vector: one integer per input port in, one per output port
/// out. Ports wider than 64 bits are rejected.
pub fn simulate(nl: &Netlist, inputs: &[u64]) -> Result<Vec<u64>> {
    if inputs.len() != nl.inputs.len() {
        return Err(Error::InvalidArgument(format!(
            "netlist has {} input ports, got {} values",
            nl.inputs.len(),
            inputs.len()
        )));
    }
    if nl.inputs.iter().chain(&nl.outputs).any(|p| p.wires.len() > 64) {
        return Err(Error::InvalidArgument("port wider than 64 bits".into()));
    }
    let mut lanes = Vec::new();
    for (p, &v) in nl.inputs.iter().zip(inputs) {
        lanes.extend((0..p.wires.len()).map(|i| (v >> i) & 1));
    }
    let val = eval_lanes(nl, &lanes);
    Ok(nl.outputs.iter().map(|p| port_value(&val, &p.wires, 0)).collect())
}

enum Function {
    Multiply,
    AddWithCarry,
}

fn classify(nl: &Netlist) -> Result<(Function, usize)> {
    let names: Vec<&str> = nl.inputs.iter().map(|p| p.name.as_str()).collect();
    let outs: Vec<&str> = nl.outputs.iter().map(|p| p.name.as_str()).collect();
    let n = nl.input("a").map_or(0, |p| p.wires.len());
    let b = nl.input("b").map_or(0, |p| p.wires.len());
    let f = match (names.as_slice(), outs.as_slice()) {
        (["a", "b"], ["p"]) if nl.outputs[0].wires.len() == 2 * n => Function::Multiply,
        (["a", "b", "cin"], ["s"]) if nl.outputs[0].wires.len() == n + 1 => Function::AddWithCarry,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "netlist `{}` is neither a multiplier (a, b -> p) nor an adder (a, b, cin -> s)",
                nl.name
            )))
        }
    };
    if n != b || n == 0 {
        return Err(Error::InvalidArgument("operand widths differ or are zero".into()));
    }
    if n > MAX_EXHAUSTIVE_WIDTH {
        return Err(Error::InvalidArgument(format!(
            "exhaustive verification is limited to {MAX_EXHAUSTIVE_WIDTH} bits, got {n}"
        )));
    }
    Ok((f, n))
}

/// Checks every input vector of a multiplier (`p = a·b`) or adder
/// (`s = a + b + cin`) netlist and reports the first mismatch.
pub fn verify_exhaustive(nl: &Netlist) -> Result<Verification> {
    nl.validate()?;
    let (f, n) = classify(nl)?;
    let in_bits: usize = nl.inputs.iter().map(|p| p.wires.len()).sum();
    let total = 1u64 << in_bits;
    let out = &nl.outputs[0].wires;
    let mask = (1u64 << n) - 1;
    let mut lanes = vec![0u64; in_bits];
    let mut base = 0u64;
    while base < total {
        let count = (total - base).min(64) as usize;
        for (k, word) in lanes.iter_mut().enumerate() {
            *word = (0..count).fold(0, |acc, l| acc | ((((base + l as u64) >> k) & 1) << l));
        }
        let val = eval_lanes(nl, &lanes);
        for l in 0..count {
            let v = base + l as u64;
            let (a, b) = (v & mask, (v >> n) & mask);
            let expected = match f {
                Function::Multiply => a * b,
                Function::AddWithCarry => a + b + (v >> (2 * n)),
            };
            let actual = port_value(&val, out, l);
            if actual != expected {
                let mut inputs = vec![("a".to_string(), a), ("b".to_string(), b)];
                if let Function::AddWithCarry = f {
                    inputs.push(("cin".to_string(), v >> (2 * n)));
                }
                return Ok(Verification::Failed(Counterexample {
                    inputs,
                    expected,
                    actual,
                }));
            }
        }
        base += count as u64;
    }
    Ok(Verification::Passed { vectors: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{assemble_multiplier, build_prefix_netlist, CellKind, CpaChoice, TimingModel};
    use crate::seeds::{serial, sklansky, wallace};

    #[test]
    fn one_bit_multiplier_by_hand() {
        let mut nl = Netlist::new("m1");
        let a = nl.add_input("a", 1);
        let b = nl.add_input("b", 1);
        let y = nl.add_cell(CellKind::And, "g", vec![a[0], b[0]]);
        nl.add_output("p", vec![y[0], WireId::ZERO]);
        assert_eq!(verify_exhaustive(&nl).unwrap(), Verification::Passed { vectors: 4 });
    }

    #[test]
    fn broken_adder_gives_counterexample() {
        let mut nl = Netlist::new("bad");
        let a = nl.add_input("a", 1);
        let b = nl.add_input("b", 1);
        let _cin = nl.add_input("cin", 1);
        let s = nl.add_cell(CellKind::HalfAdder, "h", vec![a[0], b[0]]);
        nl.add_output("s", s);
        match verify_exhaustive(&nl).unwrap() {
            Verification::Failed(cx) => {
                assert_eq!(cx.inputs[2].1, 1);
                assert_eq!(cx.expected, cx.inputs.iter().map(|x| x.1).sum::<u64>());
            }
            v => panic!("expected failure, got {v:?}"),
        }
    }

    #[test]
    fn seeds_verify() {
        let t = wallace(4).unwrap();
        let nl = assemble_multiplier(&t, CpaChoice::Default, &TimingModel::default()).unwrap();
        assert!(verify_exhaustive(&nl).unwrap().passed());
        let nl = build_prefix_netlist(&sklansky(6).unwrap()).unwrap();
        assert!(verify_exhaustive(&nl).unwrap().passed());
        assert_eq!(simulate(&nl, &[63, 1, 1]).unwrap(), vec![65]);
    }

    #[test]
    fn width_limit() {
        let nl = build_prefix_netlist(&serial(11).unwrap()).unwrap();
        assert!(matches!(verify_exhaustive(&nl), Err(Error::InvalidArgument(_))));
    }
}
