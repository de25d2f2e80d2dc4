// SPDX-License-Identifier: Apache-2.0

//! Initial design corpora: mutation chains grown from classic seeds.

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::ct::{CompressorKind, CompressorTree};
use crate::design::{Design, DesignKind, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::legalize::{legalize_ct, legalize_prefix, DEFAULT_MAX_STEPS};
use crate::prefix::PrefixBitmap;
use crate::qor::{Evaluator, QorLabel};
use crate::seeds::{seed_design, SeedKind};

/// Attempts per mutation before giving up.
pub const MUTATION_ATTEMPTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DesignKind,
    /// Multiplier width; prefix designs are `2n` bits wide.
    pub n: usize,
    pub unlabeled_count: usize,
    pub labeled_count: usize,
    pub seeds: Vec<SeedKind>,
    /// Mean number of edits per mutation chain.
    pub mean_chain_length: f64,
    pub seed: u64,
}

impl DatasetSpec {
    fn preset(kind: DesignKind, n: usize, unlabeled: usize, labeled: usize, seed: u64) -> Self {
        let seeds = match kind {
            DesignKind::Ct => SeedKind::CT.to_vec(),
            DesignKind::Prefix => SeedKind::PREFIX.to_vec(),
        };
        DatasetSpec {
            kind,
            n,
            unlabeled_count: unlabeled,
            labeled_count: labeled,
            seeds,
            mean_chain_length: 8.0,
            seed,
        }
    }

    /// 2,000 unlabeled / 200 labeled.
    pub fn desk(kind: DesignKind, n: usize, seed: u64) -> Self {
        Self::preset(kind, n, 2000, 200, seed)
    }

    /// 15,000 unlabeled / 1,000 labeled.
    pub fn paper_scale(kind: DesignKind, n: usize, seed: u64) -> Self {
        Self::preset(kind, n, 15000, 1000, seed)
    }

    /// Width of the designs themselves.
    pub fn design_width(&self) -> usize {
        match self.kind {
            DesignKind::Ct => self.n,
            DesignKind::Prefix => 2 * self.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n < 2 {
            return bad(format!("width {} is below 2", self.n));
        }
        if self.unlabeled_count == 0 || self.labeled_count == 0 {
            return bad("dataset counts must be positive".into());
        }
        if self.labeled_count > self.unlabeled_count {
            return bad(format!(
                "labeled count {} exceeds unlabeled count {}",
                self.labeled_count, self.unlabeled_count
            ));
        }
        if self.seeds.is_empty() {
            return bad("no seed kinds given".into());
        }
        let allowed: &[SeedKind] = match self.kind {
            DesignKind::Ct => &SeedKind::CT,
            DesignKind::Prefix => &SeedKind::PREFIX,
        };
        if let Some(s) = self.seeds.iter().find(|s| !allowed.contains(s)) {
            return bad(format!("seed kind {s} does not produce {:?} designs", self.kind));
        }
        if self.mean_chain_length.is_nan() || self.mean_chain_length < 1.0 {
            return bad(format!("mean chain length {} is below 1", self.mean_chain_length));
        }
        Ok(())
    }
}

fn random_edit(t: &CompressorTree, rng: &mut dyn RngCore) -> Option<CompressorTree> {
    let (cols, stages) = (t.columns(), t.stages());
    let mut out = t.clone();
    // Every edit but an addition acts on an existing compressor.
    let present: Vec<(CompressorKind, usize, usize)> = CompressorKind::ALL
        .into_iter()
        .flat_map(|k| (0..cols).flat_map(move |c| (0..stages).map(move |s| (k, c, s))))
        .filter(|&(k, c, s)| t.get(k, c, s) > 0)
        .collect();
    let op = rng.random_range(0..4);
    if op == 1 || present.is_empty() {
        let kind = CompressorKind::ALL[rng.random_range(0..2)];
        out.add(kind, rng.random_range(0..cols), rng.random_range(0..stages), 1);
        return Some(out);
    }
    let (kind, c, s) = present[rng.random_range(0..present.len())];
    out.add(kind, c, s, -1);
    match op {
        // Move it to another stage of the same column.
        0 => {
            if stages < 2 {
                return None;
            }
            let s2 = (s + rng.random_range(1..stages)) % stages;
            out.add(kind, c, s2, 1);
        }
        2 => {}
        _ => out.add(CompressorKind::ALL[1 - kind.index()], c, s, 1),
    }
    Some(out)
}

/// One random edit (stage swap, add, delete or FA/HA replacement) followed
/// by legalization. Edits that fail to legalize or legalize back to the
/// input are retried.
pub fn mutate_ct(t: &CompressorTree, rng: &mut dyn RngCore) -> Result<CompressorTree> {
    for _ in 0..MUTATION_ATTEMPTS {
        let Some(edited) = random_edit(t, rng) else {
            continue;
        };
        if let Ok((legal, _)) = legalize_ct(&edited, DEFAULT_MAX_STEPS) {
            if &legal != t {
                return Ok(legal);
            }
        }
    }
    Err(Error::MutationFailed(MUTATION_ATTEMPTS))
}

/// Flips one off-diagonal node. After a removal, nodes left without a parent
/// pair are removed too before the bitmap is legalized.
pub fn mutate_prefix(p: &PrefixBitmap, rng: &mut dyn RngCore) -> Result<PrefixBitmap> {
    let n = p.width();
    if n < 2 {
        return Err(Error::MutationFailed(0));
    }
    for _ in 0..MUTATION_ATTEMPTS {
        let i = rng.random_range(1..n);
        let j = rng.random_range(0..i);
        let mut out = p.clone();
        if p.get(i, j) {
            out.set(i, j, false);
            prune_orphans(&mut out);
        } else {
            out.set(i, j, true);
        }
        let out = legalize_prefix(&out);
        if &out != p {
            return Ok(out);
        }
    }
    Err(Error::MutationFailed(MUTATION_ATTEMPTS))
}

/// Removes off-diagonal, non-output nodes that lack a parent pair until none
/// remain.
fn prune_orphans(p: &mut PrefixBitmap) {
    let n = p.width();
    loop {
        let mut changed = false;
        for i in 1..n {
            for j in 1..i {
                if p.get(i, j) && p.split_point(i, j).is_none() {
                    p.set(i, j, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

pub fn mutate(design: &Design, rng: &mut dyn RngCore) -> Result<Design> {
    Ok(match design {
        Design::Ct(t) => Design::Ct(mutate_ct(t, rng)?),
        Design::Prefix(p) => Design::Prefix(mutate_prefix(p, rng)?),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDesign {
    /// Index into the unlabeled set.
    pub id: usize,
    pub design: Design,
    pub label: QorLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub unlabeled: Vec<Design>,
    pub labeled: Vec<LabeledDesign>,
}

/// RNG stream of sample `index` under `master`.
pub fn sample_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// The seeds come first, followed by mutation chains from the seeds in
/// round-robin order. The labeled subset always contains the seeds and is
/// otherwise a uniform sample of the chains.
pub fn generate_dataset(spec: &DatasetSpec, evaluator: &Evaluator) -> Result<Dataset> {
    spec.validate()?;
    if evaluator.width() != spec.n {
        return Err(Error::InvalidArgument(format!(
            "evaluator width {} differs from dataset width {}",
            evaluator.width(),
            spec.n
        )));
    }
    let width = spec.design_width();
    let seeds: Vec<Design> = spec
        .seeds
        .iter()
        .map(|&k| seed_design(width, k))
        .collect::<Result<_>>()?;
    let chain = Geometric::new(1.0 / spec.mean_chain_length)
        .map_err(|e| Error::InvalidArgument(format!("chain length distribution: {e}")))?;
    let mut unlabeled = Vec::with_capacity(spec.unlabeled_count);
    for i in 0..spec.unlabeled_count {
        if i < seeds.len() {
            unlabeled.push(seeds[i].clone());
            continue;
        }
        let mut rng = sample_rng(spec.seed, i as u64);
        let mut d = seeds[i % seeds.len()].clone();
        let edits = 1 + chain.sample(&mut rng);
        for _ in 0..edits {
            d = mutate(&d, &mut rng)?;
        }
        unlabeled.push(d);
    }

    let fixed = seeds.len().min(spec.labeled_count).min(unlabeled.len());
    let mut ids: Vec<usize> = (0..fixed).collect();
    let pool = unlabeled.len() - seeds.len().min(unlabeled.len());
    let extra = (spec.labeled_count - fixed).min(pool);
    let mut rng = sample_rng(spec.seed, u64::MAX);
    let mut picked: Vec<usize> = sample(&mut rng, pool, extra)
        .into_iter()
        .map(|k| k + seeds.len())
        .collect();
    picked.sort_unstable();
    ids.extend(picked);
    let labeled = ids
        .into_iter()
        .map(|id| {
            let design = unlabeled[id].clone();
            let label = evaluator.evaluate(&design)?;
            Ok(LabeledDesign { id, design, label })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        spec: spec.clone(),
        unlabeled,
        labeled,
    })
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    format_version: u32,
    spec: DatasetSpec,
}

#[derive(Serialize, Deserialize)]
struct LabelRow {
    id: usize,
    delay_1: f64,
    area_1: f64,
    delay_2: f64,
    area_2: f64,
    y: f64,
}

pub const LABELS_FILE: &str = "labels.csv";
pub const HEADER_FILE: &str = "dataset.json";
pub const DESIGNS_DIR: &str = "designs";

/// Writes the `# format_version` line followed by CSV rows.
pub fn write_versioned_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = format!("# format_version: {FORMAT_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_versioned_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    if first.trim() != format!("# format_version: {FORMAT_VERSION}") {
        return Err(Error::Format(format!(
            "{}: expected `# format_version: {FORMAT_VERSION}` first line",
            path.display()
        )));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

impl Dataset {
    /// Layout: `dataset.json`, `designs/<id>.json`, `labels.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join(DESIGNS_DIR))?;
        let header = DatasetHeader {
            format_version: FORMAT_VERSION,
            spec: self.spec.clone(),
        };
        fs::write(dir.join(HEADER_FILE), serde_json::to_string_pretty(&header)?)?;
        for (i, d) in self.unlabeled.iter().enumerate() {
            d.save(&dir.join(DESIGNS_DIR).join(format!("{i:06}.json")))?;
        }
        write_versioned_csv(
            &dir.join(LABELS_FILE),
            self.labeled.iter().map(|l| LabelRow {
                id: l.id,
                delay_1: l.label.delay[0],
                area_1: l.label.area[0],
                delay_2: l.label.delay[1],
                area_2: l.label.area[1],
                y: l.label.y,
            }),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: DatasetHeader = serde_json::from_str(&fs::read_to_string(dir.join(HEADER_FILE))?)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format_version {}",
                header.format_version
            )));
        }
        let unlabeled = (0..header.spec.unlabeled_count)
            .map(|i| Design::load(&dir.join(DESIGNS_DIR).join(format!("{i:06}.json"))))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<LabelRow> = read_versioned_csv(&dir.join(LABELS_FILE))?;
        let labeled = rows
            .into_iter()
            .map(|r| {
                let design = unlabeled
                    .get(r.id)
                    .cloned()
                    .ok_or_else(|| Error::Format(format!("label for unknown design {}", r.id)))?;
                Ok(LabeledDesign {
                    id: r.id,
                    design,
                    label: QorLabel {
                        delay: [r.delay_1, r.delay_2],
                        area: [r.area_1, r.area_2],
                        y: r.y,
                    },
                })
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            spec: header.spec,
            unlabeled,
            labeled,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::TimingModel;
    use crate::qor::DEFAULT_DELAY_WEIGHT;
    use crate::seeds::{serial, sklansky, wallace};

    #[test]
    fn stage_swap_keeps_column_totals() {
        let t = wallace(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut swaps = 0;
        while swaps < 20 {
            let c = rng.random_range(0..t.columns());
            let (s1, s2) = (rng.random_range(0..t.stages()), rng.random_range(0..t.stages()));
            if s1 == s2 || t.get(CompressorKind::Full, c, s1) == 0 {
                continue;
            }
            let mut e = t.clone();
            e.add(CompressorKind::Full, c, s1, -1);
            e.add(CompressorKind::Full, c, s2, 1);
            for k in CompressorKind::ALL {
                assert_eq!(e.column_total(k, c), t.column_total(k, c));
            }
            swaps += 1;
        }
    }

    #[test]
    fn removing_output_from_serial_is_repaired() {
        let mut p = serial(8).unwrap();
        p.set(5, 0, false);
        prune_orphans(&mut p);
        assert_eq!(legalize_prefix(&p), serial(8).unwrap());
    }

    #[test]
    fn mutants_are_legal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = wallace(8).unwrap();
        let p = sklansky(8).unwrap();
        for _ in 0..200 {
            assert!(crate::ct::validate_ct(&mutate_ct(&t, &mut rng).unwrap()).is_empty());
            assert!(crate::prefix::validate_prefix(&mutate_prefix(&p, &mut rng).unwrap()).is_empty());
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = DatasetSpec::desk(DesignKind::Ct, 8, 0);
        assert!(s.validate().is_ok());
        s.labeled_count = s.unlabeled_count + 1;
        assert!(s.validate().is_err());
        let mut s = DatasetSpec::desk(DesignKind::Ct, 8, 0);
        s.seeds = vec![SeedKind::Serial];
        assert!(s.validate().is_err());
    }

    #[test]
    fn small_dataset_is_reproducible() {
        let ev = Evaluator::new(4, TimingModel::default(), DEFAULT_DELAY_WEIGHT).unwrap();
        let mut spec = DatasetSpec::desk(DesignKind::Ct, 4, 11);
        spec.unlabeled_count = 30;
        spec.labeled_count = 8;
        let a = generate_dataset(&spec, &ev).unwrap();
        let b = generate_dataset(&spec, &ev).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labeled.len(), 8);
        assert_eq!(a.labeled[0].label.y, 1.0);
        assert!(a.unlabeled.iter().all(Design::is_legal));
    }
}
