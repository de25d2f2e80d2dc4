// SPDX-License-Identifier: Apache-2.0

use acdiff_core::dataset::{mutate_ct, mutate_prefix};
use acdiff_core::netlist::{
    arrival_times, assemble_multiplier, build_ct_netlist, build_prefix_netlist, critical_path, emit_hdl, parse_hdl,
    simulate, verify_exhaustive, CellKind, CpaChoice, TimingModel, Verification,
};
use acdiff_core::seeds::{brent_kung, dadda, kogge_stone, serial, sklansky, wallace};
use acdiff_core::{propagate_counts, CompressorKind, CompressorTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn timing() -> TimingModel {
    TimingModel::default()
}

#[test]
fn legal_pairs_multiply_correctly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2usize, 4, 8] {
        let trees = [wallace(n).unwrap(), dadda(n).unwrap()];
        let cpas = [
            serial(2 * n).unwrap(),
            sklansky(2 * n).unwrap(),
            kogge_stone(2 * n).unwrap(),
            brent_kung(2 * n).unwrap(),
        ];
        for (i, base) in trees.iter().enumerate() {
            let mut t = base.clone();
            let mut p = cpas[i].clone();
            for round in 0..4 {
                let nl = assemble_multiplier(&t, CpaChoice::Prefix(&p), &timing()).unwrap();
                let v = verify_exhaustive(&nl).unwrap();
                assert!(v.passed(), "n={n} round {round}: {v:?}");
                t = mutate_ct(&t, &mut rng).unwrap();
                p = mutate_prefix(&p, &mut rng).unwrap();
            }
        }
    }
}

#[test]
fn two_bit_tree_by_hand() {
    // One HA in column 1 at stage 0, one in column 2 at stage 1.
    let mut t = CompressorTree::with_default_stages(2).unwrap();
    t.set(CompressorKind::Half, 1, 0, 1);
    t.set(CompressorKind::Half, 2, 1, 1);
    let ct = build_ct_netlist(&t, &timing()).unwrap();
    assert_eq!(ct.netlist.count(CellKind::HalfAdder), 2);
    assert_eq!(ct.netlist.count(CellKind::And), 4);
    for a in 0..4u64 {
        for b in 0..4u64 {
            let rows = simulate(&ct.netlist, &[a, b]).unwrap();
            assert_eq!(rows[0] + rows[1], a * b, "{a}x{b}");
        }
    }
}

#[test]
fn stage_heights_match_counts_for_mutants() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut t = wallace(8).unwrap();
    for _ in 0..30 {
        let ct = build_ct_netlist(&t, &timing()).unwrap();
        let v = propagate_counts(&t);
        for s in 0..=t.stages() {
            let expect: Vec<usize> = v.stage(s).iter().map(|&x| x as usize).collect();
            assert_eq!(ct.stage_heights[s], expect);
        }
        t = mutate_ct(&t, &mut rng).unwrap();
    }
}

#[test]
fn four_bit_spot_product_and_cpa_equivalence() {
    let t = wallace(4).unwrap();
    let a = assemble_multiplier(&t, CpaChoice::Default, &timing()).unwrap();
    let sk = sklansky(8).unwrap();
    let b = assemble_multiplier(&t, CpaChoice::Prefix(&sk), &timing()).unwrap();
    assert_eq!(simulate(&a, &[3, 5]).unwrap(), vec![15]);
    for x in 0..16 {
        for y in 0..16 {
            assert_eq!(simulate(&a, &[x, y]).unwrap(), simulate(&b, &[x, y]).unwrap());
        }
    }
}

#[test]
fn serial_adder_is_exhaustively_correct() {
    let nl = build_prefix_netlist(&serial(4).unwrap()).unwrap();
    assert_eq!(verify_exhaustive(&nl).unwrap(), Verification::Passed { vectors: 512 });
}

#[test]
fn swapped_full_adder_outputs_are_caught() {
    let t = wallace(4).unwrap();
    let mut nl = assemble_multiplier(&t, CpaChoice::Default, &timing()).unwrap();
    let fa = nl.cells.iter_mut().find(|c| c.kind == CellKind::FullAdder).unwrap();
    fa.outputs.swap(0, 1);
    match verify_exhaustive(&nl).unwrap() {
        Verification::Failed(cx) => {
            assert_eq!(cx.expected, cx.inputs[0].1 * cx.inputs[1].1);
            assert_ne!(cx.actual, cx.expected);
        }
        v => panic!("fault not detected: {v:?}"),
    }
}

#[test]
fn hdl_round_trip_and_determinism() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut t = dadda(4).unwrap();
    for _ in 0..5 {
        let p = sklansky(8).unwrap();
        let nl = assemble_multiplier(&t, CpaChoice::Prefix(&p), &timing()).unwrap();
        let text = emit_hdl(&nl);
        assert_eq!(emit_hdl(&nl), text);
        let back = parse_hdl(&text).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                assert_eq!(simulate(&back, &[x, y]).unwrap(), simulate(&nl, &[x, y]).unwrap());
            }
        }
        t = mutate_ct(&t, &mut rng).unwrap();
    }
    let empty = acdiff_core::netlist::Netlist::new("empty");
    let text = emit_hdl(&empty);
    assert!(text.contains("module empty();"));
}

#[test]
fn interconnection_is_deterministic() {
    let t = dadda(8).unwrap();
    let a = build_ct_netlist(&t, &timing()).unwrap();
    let b = build_ct_netlist(&t, &timing()).unwrap();
    assert_eq!(a.netlist, b.netlist);
    assert_eq!(a.arrivals, b.arrivals);
}

#[test]
fn critical_path_is_monotone_in_each_delay() {
    let t = wallace(8).unwrap();
    let p = kogge_stone(16).unwrap();
    let base = timing();
    let nl = assemble_multiplier(&t, CpaChoice::Prefix(&p), &base).unwrap();
    let d0 = critical_path(&nl, &base);
    let bumps: [fn(&mut TimingModel); 10] = [
        |m| m.and_delay += 1.0,
        |m| m.xor_delay += 1.0,
        |m| m.ha_sum_delay += 1.0,
        |m| m.ha_carry_delay += 1.0,
        |m| m.fa_ab_sum_delay += 1.0,
        |m| m.fa_ab_carry_delay += 1.0,
        |m| m.fa_cin_sum_delay += 1.0,
        |m| m.fa_cin_carry_delay += 1.0,
        |m| m.prefix_delay += 1.0,
        |m| m.prefix_delay += 0.5,
    ];
    for bump in bumps {
        let mut m = base.clone();
        bump(&mut m);
        // Same structure, slower cells.
        assert!(critical_path(&nl, &m) >= d0);
        let at = arrival_times(&nl, &m);
        let at0 = arrival_times(&nl, &base);
        assert!(at.iter().zip(&at0).all(|(x, y)| x >= y));
    }
}
