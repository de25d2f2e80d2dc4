// SPDX-License-Identifier: Apache-2.0

//! JSON interchange format shared by every command.
//!
//! ```json
//! {"format_version":1,"kind":"ct","n":4,"shape":[2,8,4],"counts":[0,1,...]}
//! {"format_version":1,"kind":"prefix","n":8,"shape":[8,8],"bits":[1,0,...]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ct::{validate_ct, CompressorTree};
use crate::error::{Error, Result};
use crate::prefix::{validate_prefix, PrefixBitmap};
use crate::violation::DesignRuleViolation;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Ct,
    Prefix,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "DesignFile", try_from = "DesignFile")]
pub enum Design {
    Ct(CompressorTree),
    Prefix(PrefixBitmap),
}

impl Design {
    pub fn kind(&self) -> DesignKind {
        match self {
            Design::Ct(_) => DesignKind::Ct,
            Design::Prefix(_) => DesignKind::Prefix,
        }
    }

    /// Multiplier width for trees, adder width for prefix bitmaps.
    pub fn width(&self) -> usize {
        match self {
            Design::Ct(t) => t.width(),
            Design::Prefix(p) => p.width(),
        }
    }

    pub fn violations(&self) -> Vec<DesignRuleViolation> {
        match self {
            Design::Ct(t) => validate_ct(t),
            Design::Prefix(p) => validate_prefix(p),
        }
    }

    pub fn is_legal(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn as_ct(&self) -> Option<&CompressorTree> {
        match self {
            Design::Ct(t) => Some(t),
            Design::Prefix(_) => None,
        }
    }

    pub fn as_prefix(&self) -> Option<&PrefixBitmap> {
        match self {
            Design::Prefix(p) => Some(p),
            Design::Ct(_) => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DesignFile::from(self)).expect("design serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DesignFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl From<CompressorTree> for Design {
    fn from(t: CompressorTree) -> Self {
        Design::Ct(t)
    }
}

impl From<PrefixBitmap> for Design {
    fn from(p: PrefixBitmap) -> Self {
        Design::Prefix(p)
    }
}

#[derive(Serialize, Deserialize)]
struct DesignFile {
    format_version: u32,
    kind: DesignKind,
    n: usize,
    shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bits: Option<Vec<u8>>,
}

impl From<Design> for DesignFile {
    fn from(d: Design) -> Self {
        DesignFile::from(&d)
    }
}

impl From<&Design> for DesignFile {
    fn from(d: &Design) -> Self {
        match d {
            Design::Ct(t) => DesignFile {
                format_version: FORMAT_VERSION,
                kind: DesignKind::Ct,
                n: t.width(),
                shape: t.shape().to_vec(),
                counts: Some(t.counts().to_vec()),
                bits: None,
            },
            Design::Prefix(p) => DesignFile {
                format_version: FORMAT_VERSION,
                kind: DesignKind::Prefix,
                n: p.width(),
                shape: vec![p.width(), p.width()],
                counts: None,
                bits: Some(p.bits().iter().map(|&b| b as u8).collect()),
            },
        }
    }
}

impl TryFrom<DesignFile> for Design {
    type Error = Error;

    fn try_from(f: DesignFile) -> Result<Self> {
        if f.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {}",
                f.format_version
            )));
        }
        match f.kind {
            DesignKind::Ct => {
                let counts = f
                    .counts
                    .ok_or_else(|| Error::Format("ct design without counts".into()))?;
                if f.shape.len() != 3 || f.shape[0] != 2 || f.shape[1] != 2 * f.n {
                    return Err(Error::Format(format!("bad ct shape {:?}", f.shape)));
                }
                Ok(Design::Ct(CompressorTree::from_counts(f.n, f.shape[2], counts)?))
            }
            DesignKind::Prefix => {
                let bits = f
                    .bits
                    .ok_or_else(|| Error::Format("prefix design without bits".into()))?;
                if f.shape != [f.n, f.n] {
                    return Err(Error::Format(format!("bad prefix shape {:?}", f.shape)));
                }
                if bits.iter().any(|&b| b > 1) {
                    return Err(Error::Format("prefix bits must be 0 or 1".into()));
                }
                Ok(Design::Prefix(PrefixBitmap::from_bits(
                    f.n,
                    bits.into_iter().map(|b| b == 1).collect(),
                )?))
            }
        }
    }
}
