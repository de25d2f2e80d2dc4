// SPDX-License-Identifier: Apache-2.0

use super::{CellKind, Netlist, TimingModel, WireId};
use crate::ct::{validate_ct, CompressorKind, CompressorTree};
use crate::error::{Error, Result};
use crate::prefix::{canonical_parents, validate_prefix, PrefixBitmap};
use crate::seeds;

type Bit = (WireId, f64);

/// Compressor-tree netlist: AND-array PPG followed by the tree. Its outputs
/// `r0` and `r1` are the two rows handed to the carry-propagate adder.
#[derive(Clone, Debug)]
pub struct CtNetlist {
    pub netlist: Netlist,
    /// Bits left in each column after the last stage.
    pub columns: Vec<Vec<WireId>>,
    /// Estimated arrival time of each bit in `columns`.
    pub arrivals: Vec<Vec<f64>>,
    /// Bit count of each column before each stage, `[stage][column]`.
    pub stage_heights: Vec<Vec<usize>>,
}

/// Which carry-propagate adder closes the multiplier.
#[derive(Clone, Copy, Debug)]
pub enum CpaChoice<'a> {
    /// Serial prefix structure over `2n` bits.
    Default,
    Prefix(&'a PrefixBitmap),
}

fn ppg(nl: &mut Netlist, n: usize, timing: &TimingModel) -> Vec<Vec<Bit>> {
    let a = nl.add_input("a", n);
    let b = nl.add_input("b", n);
    let mut cols: Vec<Vec<Bit>> = vec![Vec::new(); 2 * n];
    for c in 0..2 * n - 1 {
        let lo = c.saturating_sub(n - 1);
        let hi = c.min(n - 1);
        for (ord, i) in (lo..=hi).enumerate() {
            let y = nl.add_cell(CellKind::And, format!("pp_c{c}_{ord}"), vec![a[i], b[c - i]]);
            cols[c].push((y[0], timing.and_delay));
        }
    }
    cols
}

fn reduce(
    nl: &mut Netlist,
    t: &CompressorTree,
    mut cols: Vec<Vec<Bit>>,
    timing: &TimingModel,
) -> (Vec<Vec<Bit>>, Vec<Vec<usize>>) {
    let width = cols.len();
    let mut heights = vec![cols.iter().map(Vec::len).collect::<Vec<_>>()];
    for s in 0..t.stages() {
        let mut next: Vec<Vec<Bit>> = vec![Vec::new(); width];
        for c in 0..width {
            let mut bits = std::mem::take(&mut cols[c]);
            // Stable: equal arrivals keep their column order.
            bits.sort_by(|x, y| x.1.total_cmp(&y.1));
            let mut bits = bits.into_iter();
            let mut carries = Vec::new();
            let fa = t.get(CompressorKind::Full, c, s);
            for ord in 0..fa {
                let ins: Vec<Bit> = bits.by_ref().take(3).collect();
                let arr = timing.cell_arrivals(CellKind::FullAdder, &[ins[0].1, ins[1].1, ins[2].1]);
                let out = nl.add_cell(
                    CellKind::FullAdder,
                    format!("fa_c{c}_s{s}_{ord}"),
                    ins.iter().map(|b| b.0).collect(),
                );
                next[c].push((out[0], arr[0]));
                carries.push((out[1], arr[1]));
            }
            let ha = t.get(CompressorKind::Half, c, s);
            for ord in 0..ha {
                let ins: Vec<Bit> = bits.by_ref().take(2).collect();
                let arr = timing.cell_arrivals(CellKind::HalfAdder, &[ins[0].1, ins[1].1]);
                let out = nl.add_cell(
                    CellKind::HalfAdder,
                    format!("ha_c{c}_s{s}_{ord}"),
                    ins.iter().map(|b| b.0).collect(),
                );
                next[c].push((out[0], arr[0]));
                carries.push((out[1], arr[1]));
            }
            next[c].extend(bits);
            if c + 1 < width {
                next[c + 1].extend(carries);
            }
        }
        cols = next;
        heights.push(cols.iter().map(Vec::len).collect());
    }
    (cols, heights)
}

/// Lowers a legal tree into PPG + compressor cells.
///
/// Within each column and stage, bits are sorted by estimated arrival; the
/// earliest `3·FA` bits feed full adders (latest of each triple on the fast
/// carry-in pin), the next `2·HA` feed half adders and the rest pass through.
pub fn build_ct_netlist(t: &CompressorTree, timing: &TimingModel) -> Result<CtNetlist> {
    let errs = validate_ct(t);
    if let Some(e) = errs.first() {
        return Err(Error::IllegalDesign(format!("{e}")));
    }
    let n = t.width();
    let mut nl = Netlist::new(format!("ct{n}"));
    let cols = ppg(&mut nl, n, timing);
    let (cols, stage_heights) = reduce(&mut nl, t, cols, timing);
    let row = |k: usize| -> Vec<WireId> {
        cols.iter()
            .map(|bits| bits.get(k).map_or(WireId::ZERO, |b| b.0))
            .collect()
    };
    let (r0, r1) = (row(0), row(1));
    nl.add_output("r0", r0);
    nl.add_output("r1", r1);
    Ok(CtNetlist {
        netlist: nl,
        columns: cols.iter().map(|c| c.iter().map(|b| b.0).collect()).collect(),
        arrivals: cols.iter().map(|c| c.iter().map(|b| b.1).collect()).collect(),
        stage_heights,
    })
}

/// Instantiates a prefix adder over operand rows `a` and `b`; constant-zero
/// operand bits are folded. Returns the sum bits and the carry out.
fn prefix_adder(
    nl: &mut Netlist,
    p: &PrefixBitmap,
    a: &[WireId],
    b: &[WireId],
    cin: Option<WireId>,
) -> Result<(Vec<WireId>, WireId)> {
    if let Some(e) = validate_prefix(p).first() {
        return Err(Error::IllegalDesign(format!("{e}")));
    }
    let n = p.width();
    if a.len() != n || b.len() != n {
        return Err(Error::InvalidArgument(format!(
            "prefix width {n} does not match operand width {}",
            a.len()
        )));
    }
    // Group (generate, propagate) per node; propagate is absent on gray nodes.
    let mut node: Vec<Option<(WireId, Option<WireId>)>> = vec![None; n * n];
    let mut bit_p = Vec::with_capacity(n);
    for i in 0..n {
        let (g, pr) = match (a[i] == WireId::ZERO, b[i] == WireId::ZERO) {
            (false, false) => {
                let g = nl.add_cell(CellKind::And, format!("gen_b{i}"), vec![a[i], b[i]])[0];
                let pr = nl.add_cell(CellKind::Xor, format!("prop_b{i}"), vec![a[i], b[i]])[0];
                (g, pr)
            }
            (true, false) => (WireId::ZERO, b[i]),
            (false, true) => (WireId::ZERO, a[i]),
            (true, true) => (WireId::ZERO, WireId::ZERO),
        };
        bit_p.push(pr);
        node[i * n + i] = Some((g, Some(pr)));
    }
    if let Some(c) = cin.filter(|&c| c != WireId::ZERO) {
        let (g0, p0) = node[0].unwrap();
        let g = nl.add_cell(CellKind::PrefixGray, "cin_b0", vec![g0, p0.unwrap(), c])[0];
        node[0] = Some((g, p0));
    }
    for i in 1..n {
        for j in (0..i).rev() {
            if !p.get(i, j) {
                continue;
            }
            let (up, lo) = canonical_parents(p, i, j)?;
            let (gu, pu) = node[up.0 * n + up.1].expect("upper parent built first");
            let (gl, pl) = node[lo.0 * n + lo.1].expect("lower parent built first");
            let pu = pu.expect("upper parents never sit in column 0");
            let name = format!("pfx_{i}_{j}");
            node[i * n + j] = Some(if j == 0 {
                (nl.add_cell(CellKind::PrefixGray, name, vec![gu, pu, gl])[0], None)
            } else {
                let pl = pl.expect("lower parent off column 0 has a propagate");
                let out = nl.add_cell(CellKind::PrefixBlack, name, vec![gu, pu, gl, pl]);
                (out[0], Some(out[1]))
            });
        }
    }
    let carry = |i: usize| node[i * n].expect("column-0 nodes are present").0;
    let mut sums = Vec::with_capacity(n);
    for (i, &p) in bit_p.iter().enumerate().take(n) {
        let c = if i == 0 { cin.unwrap_or(WireId::ZERO) } else { carry(i - 1) };
        let s = match (p == WireId::ZERO, c == WireId::ZERO) {
            (_, true) => p,
            (true, false) => c,
            (false, false) => nl.add_cell(CellKind::Xor, format!("sum_b{i}"), vec![p, c])[0],
        };
        sums.push(s);
    }
    Ok((sums, carry(n - 1)))
}

/// Stand-alone `n`-bit adder with ports `a[n]`, `b[n]`, `cin[1]` and
/// `s[n+1]` (bit `n` is the carry out).
pub fn build_prefix_netlist(p: &PrefixBitmap) -> Result<Netlist> {
    let n = p.width();
    let mut nl = Netlist::new(format!("prefix_adder{n}"));
    let a = nl.add_input("a", n);
    let b = nl.add_input("b", n);
    let cin = nl.add_input("cin", 1)[0];
    let (mut sums, cout) = prefix_adder(&mut nl, p, &a, &b, Some(cin))?;
    sums.push(cout);
    nl.add_output("s", sums);
    Ok(nl)
}

/// Full multiplier with ports `a[n]`, `b[n]` and `p[2n]`.
pub fn assemble_multiplier(t: &CompressorTree, cpa: CpaChoice<'_>, timing: &TimingModel) -> Result<Netlist> {
    let n = t.width();
    let serial;
    let p = match cpa {
        CpaChoice::Default => {
            serial = seeds::serial(2 * n)?;
            &serial
        }
        CpaChoice::Prefix(p) => p,
    };
    if p.width() != 2 * n {
        return Err(Error::InvalidArgument(format!(
            "CPA width {} does not match multiplier width {n} (need {})",
            p.width(),
            2 * n
        )));
    }
    let ct = build_ct_netlist(t, timing)?;
    let mut nl = ct.netlist;
    let r0 = nl.output("r0").expect("ct rows").wires.clone();
    let r1 = nl.output("r1").expect("ct rows").wires.clone();
    nl.outputs.clear();
    nl.name = format!("mult{n}");
    let (sums, _carry_out) = prefix_adder(&mut nl, p, &r0, &r1, None)?;
    nl.add_output("p", sums);
    Ok(nl)
}
