// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;

use acdiff_core::dataset::Dataset;
use acdiff_core::Design;
use acdiff_optimizer::campaign::ARCHIVE_FILE;
use acdiff_optimizer::{export_plots, run_campaign, verify, CampaignConfig, Error, LabeledPoint, ParetoArchive};
use acdiff_core::netlist::TimingModel;
use acdiff_core::Evaluator;

fn tiny() -> CampaignConfig {
    let mut c = CampaignConfig::desk(4);
    c.apply_text(
        "seed = 11
         unlabeled_count = 60
         labeled_count = 20
         base_channels = 4
         time_dim = 8
         timesteps = 100
         diffusion_epochs = 2
         predictor_epochs = 3
         rounds = 2
         samples_per_round = 12
         labels_per_round = 4
         finetune_epochs = 1
         sampling_steps = 4
         reflection_steps = 2
         sample_batch = 5
         sweep_targets = 2
         sweep_samples = 3
         sweep_strengths = 0,10",
    )
    .unwrap();
    c
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let dst = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &dst);
        } else {
            fs::copy(e.path(), dst).unwrap();
        }
    }
}

fn all_labels(dir: &Path, rounds: usize) -> Vec<(String, f64, f64, f64)> {
    let mut out = Vec::new();
    for phase in ["phase1_ct", "phase2_cpa"] {
        let ds = Dataset::load(&dir.join(phase).join("dataset")).unwrap();
        let tag = if phase == "phase1_ct" { "ct" } else { "cpa" };
        out.extend(ds.labeled.iter().map(|l| (format!("{tag}-d{:05}", l.id), l.label.delay[0], l.label.area[0], l.label.y)));
        for r in 1..=rounds {
            let path = dir.join(phase).join(format!("round_{r:02}")).join("labeled.json");
            let pts: Vec<LabeledPoint> = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
            out.extend(pts.iter().map(|p| (p.id.clone(), p.label.delay[0], p.label.area[0], p.label.y)));
        }
    }
    out
}

#[test]
fn campaign_is_deterministic_resumable_and_consistent() {
    let cfg = tiny();
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    let report = run_campaign(&a, &cfg).unwrap();
    let again = run_campaign(&b, &cfg).unwrap();
    assert_eq!(report, again);
    let archive = fs::read(a.join(ARCHIVE_FILE)).unwrap();
    assert_eq!(archive, fs::read(b.join(ARCHIVE_FILE)).unwrap());

    // Accounting: initial labels plus each round's labels.
    assert_eq!(report.phases.len(), 2);
    for p in &report.phases {
        let rounds: usize = p.rounds.iter().map(|r| r.labeled).sum();
        assert_eq!(p.evaluator_invocations, p.initial_labels + rounds);
        assert_eq!(p.initial_labels, 20);
        assert!(p.rounds.iter().all(|r| r.labeled == 4 && r.verification_failures == 0));
        let mut prev = p.initial_best_y;
        for r in &p.rounds {
            assert!(r.best_so_far <= prev);
            prev = r.best_so_far;
        }
        assert!(p.best_y <= p.initial_best_y);
    }
    assert!(report.phases[1].best_y <= report.phases[0].best_y);
    assert_eq!(report.evaluator_invocations, 2 * (20 + 2 * 4));

    // The archive is the non-dominated set of every label seen.
    let labels = all_labels(&a, 2);
    assert_eq!(labels.len(), report.evaluator_invocations);
    let mut arch = ParetoArchive::read_csv(&a.join(ARCHIVE_FILE)).unwrap();
    arch.sort_by(|x, y| x.id.cmp(&y.id));
    let mut expect: Vec<String> = labels
        .iter()
        .enumerate()
        .filter(|(i, (_, d, ar, _))| {
            labels.iter().enumerate().all(|(j, (_, d2, a2, _))| {
                let dom = d2 <= d && a2 <= ar && (d2 < d || a2 < ar);
                !dom && !(j < *i && d2 == d && a2 == ar)
            })
        })
        .map(|(_, l)| l.0.clone())
        .collect();
    expect.sort();
    assert_eq!(arch.iter().map(|p| p.id.clone()).collect::<Vec<_>>(), expect);
    let best = labels.iter().map(|l| l.3).fold(f64::INFINITY, f64::min);
    assert_eq!(report.best_y, best);

    // Every round label is legal and functionally correct.
    let ev = Evaluator::new(4, TimingModel::default(), cfg.delay_weight).unwrap();
    let pts: Vec<LabeledPoint> = serde_json::from_str(
        &fs::read_to_string(a.join("phase1_ct").join("round_01").join("labeled.json")).unwrap(),
    )
    .unwrap();
    for p in &pts {
        assert!(p.design.is_legal());
        assert!(verify(&p.design, &ev).unwrap());
    }
    let best_design = Design::from_json(&fs::read_to_string(a.join("best_design.json")).unwrap()).unwrap();
    assert!(best_design.is_legal());

    // Resume from an interrupted second round of phase 1.
    let c = root.path().join("c");
    copy_dir(&a, &c);
    fs::remove_file(c.join("phase1_ct").join("round_02").join("round.json")).unwrap();
    fs::remove_dir_all(c.join("phase2_cpa")).unwrap();
    fs::remove_file(c.join(ARCHIVE_FILE)).unwrap();
    let resumed = run_campaign(&c, &cfg).unwrap();
    assert_eq!(resumed, report);
    assert_eq!(fs::read(c.join(ARCHIVE_FILE)).unwrap(), archive);

    // A directory is bound to its configuration.
    let mut other = cfg.clone();
    other.seed += 1;
    assert!(matches!(run_campaign(&a, &other), Err(Error::Resume(_))));

    // Plot tables.
    let plots = root.path().join("plots");
    export_plots(&a, &plots).unwrap();
    let target = fs::read_to_string(plots.join("target_sweep.csv")).unwrap();
    assert_eq!(target.lines().nth(1).unwrap(), "target,sample,achieved_y,predicted_y,raw_violations,legal");
    assert_eq!(target.lines().count(), 2 + 2 * 3);
    let rounds = fs::read_to_string(plots.join("rounds.csv")).unwrap();
    assert_eq!(rounds.lines().count(), 2 + 2 * 3);
    let pareto = ParetoArchive::read_csv(&plots.join("pareto.csv")).unwrap();
    for p in &pareto {
        assert!(pareto.iter().all(|q| !q.dominates(p)));
    }
}

#[test]
fn empty_campaign_exports_header_only_tables() {
    let root = tempfile::tempdir().unwrap();
    let files = export_plots(root.path(), &root.path().join("out")).unwrap();
    assert_eq!(files.len(), 4);
    for f in files {
        let text = fs::read_to_string(&f).unwrap();
        assert_eq!(text.lines().count(), 2, "{}", f.display());
        assert!(text.starts_with("# format_version: 1\n"));
    }
}
