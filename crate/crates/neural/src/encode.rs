// SPDX-License-Identifier: Apache-2.0

//! Conversion between designs and network input rows.

use acdiff_core::codec::{bits_per_cell, from_tensor, to_tensor, DesignTensor};
use acdiff_core::{Design, DesignKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::ItemShape;
use crate::tensor::{chw_to_hwc, hwc_to_chw, Tensor};

/// What a network row decodes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub kind: DesignKind,
    /// Multiplier width for trees, adder width for prefix bitmaps.
    pub width: usize,
    /// `[channels, rows, cols]`.
    pub shape: ItemShape,
}

impl DesignLayout {
    pub fn of(design: &Design) -> Result<Self> {
        let x = to_tensor(design)?;
        Ok(DesignLayout {
            kind: x.kind,
            width: x.width,
            shape: x.shape,
        })
    }

    pub fn row_len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Sign-decodes one `[H, W, C]` row.
    pub fn decode(&self, row: &[f64]) -> Result<Design> {
        Ok(from_tensor(&self.to_design_tensor(row))?)
    }

    pub fn to_design_tensor(&self, row: &[f64]) -> DesignTensor {
        let [c, h, w] = self.shape;
        DesignTensor {
            kind: self.kind,
            width: self.width,
            shape: self.shape,
            bits_per_cell: match self.kind {
                DesignKind::Ct => bits_per_cell(self.width),
                DesignKind::Prefix => 1,
            },
            data: hwc_to_chw(row, c, h, w),
        }
    }
}

/// Encodes designs as `[H, W, C]` rows of one common layout.
pub fn encode_designs(designs: &[&Design]) -> Result<(DesignLayout, Vec<Vec<f64>>)> {
    let mut layout: Option<DesignLayout> = None;
    let mut rows = Vec::with_capacity(designs.len());
    for d in designs {
        let x = to_tensor(d)?;
        let this = DesignLayout {
            kind: x.kind,
            width: x.width,
            shape: x.shape,
        };
        match layout {
            None => layout = Some(this),
            Some(l) if l != this => {
                return Err(Error::Shape(format!("mixed design layouts {l:?} and {this:?}")));
            }
            _ => {}
        }
        rows.push(chw_to_hwc(&x.data, x.shape[0], x.shape[1], x.shape[2]));
    }
    let layout = layout.ok_or_else(|| Error::InvalidArgument("no designs to encode".into()))?;
    Ok((layout, rows))
}

/// Stacks `[H, W, C]` rows into a `[N, H, W, C]` batch.
pub fn batch_rows(rows: &[&[f64]], shape: &ItemShape) -> Result<Tensor> {
    Tensor::stack(rows, &[shape[1], shape[2], shape[0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use acdiff_core::seeds::{dadda, sklansky};

    #[test]
    fn rows_decode_back() {
        let designs = [Design::Ct(dadda(8).unwrap()), Design::Ct(dadda(8).unwrap())];
        let refs: Vec<&Design> = designs.iter().collect();
        let (layout, rows) = encode_designs(&refs).unwrap();
        assert_eq!(layout.shape, [8, 16, 5]);
        assert_eq!(layout.decode(&rows[0]).unwrap(), designs[0]);
        let p = Design::Prefix(sklansky(16).unwrap());
        let (layout, rows) = encode_designs(&[&p]).unwrap();
        assert_eq!(layout.decode(&rows[0]).unwrap(), p);
        assert!(encode_designs(&[&designs[0], &p]).is_err());
    }
}
