// SPDX-License-Identifier: Apache-2.0

//! Sample, legalize, verify and evaluate.

use acdiff_core::netlist::verify_exhaustive;
use acdiff_core::{legalize_ct, legalize_prefix, Design, Error as CoreError, Evaluator, QorLabel};
use acdiff_neural::{sample_chains, GuidanceConfig, Sample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::ModelPair;

/// Widest multiplier that is verified exhaustively.
pub const VERIFY_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Legal,
    SamplingFailed,
    LegalizationFailed,
    VerificationFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub chain: usize,
    pub status: CandidateStatus,
    /// Violations of the sign-decoded sample.
    pub raw_violations: usize,
    /// Legalizer steps (trees) or nodes added (prefix bitmaps).
    pub legalize_steps: usize,
    pub predicted: Option<f64>,
    /// The legalized design, when legalization succeeded.
    pub design: Option<Design>,
}

impl Candidate {
    pub fn is_legal(&self) -> bool {
        self.status == CandidateStatus::Legal
    }
}

/// Guided draw of `count` chains, split across the rayon pool in
/// sampler-sized batches. The result does not depend on the pool size.
pub fn draw(models: &ModelPair, guidance: &GuidanceConfig, count: usize, seed: u64) -> Result<Vec<Sample>> {
    let batch = guidance.batch_size.max(1);
    let chunks: Vec<std::ops::Range<usize>> = (0..count)
        .step_by(batch)
        .map(|s| s..(s + batch).min(count))
        .collect();
    let parts = chunks
        .into_par_iter()
        .map(|r| {
            sample_chains(
                r,
                &models.denoiser,
                Some(&models.predictor),
                &models.schedule,
                &models.layout,
                guidance,
                seed,
            )
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Legalizes one design; trees that exhaust `max_steps` come back as `None`
/// with the steps spent.
pub fn legalize(design: &Design, max_steps: usize) -> Result<(Option<Design>, usize)> {
    match design {
        Design::Ct(t) => match legalize_ct(t, max_steps) {
            Ok((fixed, report)) => Ok((Some(Design::Ct(fixed)), report.steps_taken)),
            Err(CoreError::LegalizationFailure(report)) => Ok((None, report.steps_taken)),
            Err(e) => Err(e.into()),
        },
        Design::Prefix(p) => {
            let fixed = legalize_prefix(p);
            let added = fixed.node_count() - p.node_count();
            Ok((Some(Design::Prefix(fixed)), added))
        }
    }
}

/// Builds the full multiplier and checks it exhaustively when it is narrow
/// enough; wider designs pass unchecked.
pub fn verify(design: &Design, evaluator: &Evaluator) -> Result<bool> {
    if evaluator.width() > VERIFY_LIMIT {
        return Ok(true);
    }
    let nl = evaluator.assemble(design)?;
    Ok(verify_exhaustive(&nl)?.passed())
}

fn realize_one(chain: usize, s: &Sample, evaluator: &Evaluator, max_steps: usize) -> Result<Candidate> {
    let mut c = Candidate {
        chain,
        status: CandidateStatus::SamplingFailed,
        raw_violations: s.violations,
        legalize_steps: 0,
        predicted: s.predicted,
        design: None,
    };
    let Some(raw) = &s.design else { return Ok(c) };
    let (fixed, steps) = legalize(raw, max_steps)?;
    c.legalize_steps = steps;
    let Some(fixed) = fixed else {
        c.status = CandidateStatus::LegalizationFailed;
        return Ok(c);
    };
    c.status = if verify(&fixed, evaluator)? {
        CandidateStatus::Legal
    } else {
        CandidateStatus::VerificationFailed
    };
    c.design = Some(fixed);
    Ok(c)
}

/// Legalizes and verifies every sample, in parallel, keeping order.
pub fn realize(samples: &[Sample], evaluator: &Evaluator, max_steps: usize) -> Result<Vec<Candidate>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| realize_one(i, s, evaluator, max_steps))
        .collect()
}

pub fn evaluate_all(designs: &[&Design], evaluator: &Evaluator) -> Result<Vec<QorLabel>> {
    Ok(designs
        .par_iter()
        .map(|d| evaluator.evaluate(d))
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    acdiff_neural::stats::median(xs)
}
