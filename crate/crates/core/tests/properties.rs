// SPDX-License-Identifier: Apache-2.0

use acdiff_core::codec::{from_tensor, to_tensor};
use acdiff_core::dataset::{mutate_ct, mutate_prefix};
use acdiff_core::seeds::{dadda, kogge_stone, wallace};
use acdiff_core::{Design, PrefixBitmap};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn walk(seed: u64, steps: usize, n: usize, prefix: bool) -> Design {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if prefix {
        let mut p = kogge_stone(n).unwrap();
        for _ in 0..steps {
            p = mutate_prefix(&p, &mut rng).unwrap();
        }
        Design::Prefix(p)
    } else {
        let mut t = if seed.is_multiple_of(2) { wallace(n) } else { dadda(n) }.unwrap();
        for _ in 0..steps {
            t = mutate_ct(&t, &mut rng).unwrap();
        }
        Design::Ct(t)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codec_round_trips_legal_designs(seed in any::<u64>(), steps in 0usize..12, n in 2usize..=8, prefix in any::<bool>()) {
        let d = walk(seed, steps, if prefix { 2 * n } else { n }, prefix);
        let x = to_tensor(&d).unwrap();
        prop_assert!(x.data.iter().all(|&v| v == 1.0 || v == -1.0));
        prop_assert_eq!(from_tensor(&x).unwrap(), d);
    }

    #[test]
    fn codec_round_trips_arbitrary_bitmaps(n in 1usize..=12, raw in proptest::collection::vec(any::<bool>(), 144)) {
        let mut bits = vec![false; n * n];
        for i in 0..n {
            for j in 0..=i {
                bits[i * n + j] = raw[i * 12 + j];
            }
        }
        let d = Design::Prefix(PrefixBitmap::from_bits(n, bits).unwrap());
        prop_assert_eq!(from_tensor(&to_tensor(&d).unwrap()).unwrap(), d);
    }

    #[test]
    fn mutation_preserves_shape(seed in any::<u64>(), steps in 1usize..10) {
        let d = walk(seed, steps, 6, false);
        prop_assert_eq!(d.as_ct().unwrap().shape(), wallace(6).unwrap().shape());
        prop_assert!(d.is_legal());
    }

    #[test]
    fn design_json_round_trips(seed in any::<u64>(), prefix in any::<bool>()) {
        let d = walk(seed, 3, 8, prefix);
        prop_assert_eq!(Design::from_json(&d.to_json()).unwrap(), d);
    }
}
