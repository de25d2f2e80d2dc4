// SPDX-License-Identifier: Apache-2.0

//! Non-dominated (delay, area) archive.

use std::path::Path;

use acdiff_core::dataset::{read_versioned_csv, write_versioned_csv};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub id: String,
    pub delay: f64,
    pub area: f64,
    pub y: f64,
}

impl ParetoPoint {
    /// No worse on both axes and strictly better on one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.delay <= other.delay
            && self.area <= other.area
            && (self.delay < other.delay || self.area < other.area)
    }

    fn ties(&self, other: &ParetoPoint) -> bool {
        self.delay == other.delay && self.area == other.area
    }
}

/// Points kept in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    points: Vec<ParetoPoint>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[ParetoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds `p` unless an archived point dominates or ties it; evicts the
    /// points it dominates. Returns whether `p` was archived.
    pub fn insert(&mut self, p: ParetoPoint) -> Result<bool> {
        if ![p.delay, p.area, p.y].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteMetric(p.id));
        }
        if self.points.iter().any(|q| q.dominates(&p) || q.ties(&p)) {
            return Ok(false);
        }
        self.points.retain(|q| !p.dominates(q));
        self.points.push(p);
        Ok(true)
    }

    /// Lowest-cost archived point; the first one on ties.
    pub fn best(&self) -> Option<&ParetoPoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&ParetoPoint>, p| match best {
                Some(b) if b.y <= p.y => Some(b),
                _ => Some(p),
            })
    }

    /// `# format_version` line, then `id,delay,area,y` sorted by delay.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut rows = self.points.clone();
        rows.sort_by(|a, b| a.delay.total_cmp(&b.delay).then(a.area.total_cmp(&b.area)));
        write_versioned_csv(path, rows)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Vec<ParetoPoint>> {
        Ok(read_versioned_csv(path)?)
    }
}

impl Extend<ParetoPoint> for ParetoArchive {
    /// Non-finite points are skipped.
    fn extend<I: IntoIterator<Item = ParetoPoint>>(&mut self, iter: I) {
        for p in iter {
            let _ = self.insert(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(id: &str, delay: f64, area: f64) -> ParetoPoint {
        ParetoPoint { id: id.into(), delay, area, y: delay + area }
    }

    #[test]
    fn dominated_incumbent_is_evicted() {
        let mut a = ParetoArchive::new();
        assert!(a.insert(pt("a", 2.0, 10.0)).unwrap());
        assert!(a.insert(pt("b", 1.0, 9.0)).unwrap());
        assert_eq!(a.points(), &[pt("b", 1.0, 9.0)]);
    }

    #[test]
    fn ties_keep_the_incumbent() {
        let mut a = ParetoArchive::new();
        a.insert(pt("a", 1.0, 5.0)).unwrap();
        assert!(!a.insert(pt("b", 1.0, 5.0)).unwrap());
        assert!(a.insert(pt("c", 0.5, 6.0)).unwrap());
        assert_eq!(a.len(), 2);
        assert_eq!(a.best().unwrap().id, "a");
        assert!(a.insert(pt("d", f64::NAN, 1.0)).is_err());
    }
}
