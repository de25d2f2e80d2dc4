// SPDX-License-Identifier: Apache-2.0

use acdiff_optimizer::{ParetoArchive, ParetoPoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(n^2) filter: keep points nobody dominates, and of exact ties only the
/// first seen.
fn brute_force(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    points
        .iter()
        .enumerate()
        .filter(|(i, p)| {
            points.iter().enumerate().all(|(j, q)| {
                let dominates = q.delay <= p.delay && q.area <= p.area && (q.delay < p.delay || q.area < p.area);
                let earlier_tie = j < *i && q.delay == p.delay && q.area == p.area;
                !dominates && !earlier_tie
            })
        })
        .map(|(_, p)| p.clone())
        .collect()
}

fn sorted(mut v: Vec<ParetoPoint>) -> Vec<ParetoPoint> {
    v.sort_by(|a, b| a.id.cmp(&b.id));
    v
}

fn point(i: usize, delay: f64, area: f64) -> ParetoPoint {
    ParetoPoint { id: format!("p{i:05}"), delay, area, y: 0.66 * delay + 0.34 * area }
}

#[test]
fn thousand_random_points_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Coarse grid so ties and equal coordinates occur.
    let pts: Vec<ParetoPoint> = (0..1000)
        .map(|i| point(i, rng.random_range(0..60) as f64, rng.random_range(0..60) as f64))
        .collect();
    let mut a = ParetoArchive::new();
    for p in &pts {
        a.insert(p.clone()).unwrap();
    }
    assert_eq!(sorted(a.points().to_vec()), sorted(brute_force(&pts)));
    let best = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best().unwrap().y, best);
}

proptest! {
    #[test]
    fn archive_is_the_non_dominated_set(raw in prop::collection::vec((0u8..12, 0u8..12), 0..80)) {
        let pts: Vec<ParetoPoint> = raw.iter().enumerate().map(|(i, &(d, a))| point(i, d as f64, a as f64)).collect();
        let mut arch = ParetoArchive::new();
        for p in &pts {
            arch.insert(p.clone()).unwrap();
        }
        for p in arch.points() {
            for q in arch.points() {
                prop_assert!(!p.dominates(q));
            }
        }
        prop_assert_eq!(sorted(arch.points().to_vec()), sorted(brute_force(&pts)));
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = ParetoArchive::new();
    a.extend([point(0, 3.0, 1.0), point(1, 1.0, 3.0), point(2, 2.0, 2.0)]);
    let path = dir.path().join("archive.csv");
    a.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# format_version: 1\nid,delay,area,y\np00001,"));
    assert_eq!(sorted(ParetoArchive::read_csv(&path).unwrap()), sorted(a.points().to_vec()));
}
