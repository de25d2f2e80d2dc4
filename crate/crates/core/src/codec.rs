// SPDX-License-Identifier: Apache-2.0

//! Design <-> real tensor codec.
//!
//! Every binary digit becomes `-1.0` (0) or `+1.0` (1). Compressor counts are
//! first split into `B = ceil(log2 n) + 1` digits, most significant first,
//! giving a `[2B, 2n, S]` tensor whose channel `k·B + d` holds digit `d` of
//! compressor kind `k`. Prefix bitmaps map to `[1, n, n]`. Decoding takes the
//! sign of every element (`>= 0` is a one) and makes no attempt at repair.

use serde::{Deserialize, Serialize};

use crate::ct::{CompressorKind, CompressorTree};
use crate::design::{Design, DesignKind};
use crate::error::{Error, Result};
use crate::prefix::PrefixBitmap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignTensor {
    pub kind: DesignKind,
    /// Multiplier width for trees, adder width for prefix bitmaps.
    pub width: usize,
    /// `[channels, rows, cols]`.
    pub shape: [usize; 3],
    /// Digits per count; 1 for prefix bitmaps.
    pub bits_per_cell: usize,
    pub data: Vec<f64>,
}

/// `ceil(log2 n) + 1`.
pub fn bits_per_cell(width: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < width {
        bits += 1;
    }
    bits + 1
}

/// Tensor shape a design of this kind and width encodes to.
pub fn tensor_shape(kind: DesignKind, width: usize, stages: usize) -> [usize; 3] {
    match kind {
        DesignKind::Ct => [2 * bits_per_cell(width), 2 * width, stages],
        DesignKind::Prefix => [1, width, width],
    }
}

fn level(bit: bool) -> f64 {
    if bit {
        1.0
    } else {
        -1.0
    }
}

pub fn to_tensor(design: &Design) -> Result<DesignTensor> {
    match design {
        Design::Ct(t) => ct_to_tensor(t),
        Design::Prefix(p) => Ok(prefix_to_tensor(p)),
    }
}

pub fn ct_to_tensor(t: &CompressorTree) -> Result<DesignTensor> {
    let bits = bits_per_cell(t.width());
    let shape = tensor_shape(DesignKind::Ct, t.width(), t.stages());
    let plane = shape[1] * shape[2];
    let mut data = vec![0.0; shape[0] * plane];
    for kind in CompressorKind::ALL {
        for c in 0..t.columns() {
            for s in 0..t.stages() {
                let count = t.get(kind, c, s);
                if (count as u64) >> bits != 0 {
                    return Err(Error::EncodingOverflow { count, bits });
                }
                for d in 0..bits {
                    let digit = (count >> (bits - 1 - d)) & 1 == 1;
                    let ch = kind.index() * bits + d;
                    data[ch * plane + c * shape[2] + s] = level(digit);
                }
            }
        }
    }
    Ok(DesignTensor {
        kind: DesignKind::Ct,
        width: t.width(),
        shape,
        bits_per_cell: bits,
        data,
    })
}

pub fn prefix_to_tensor(p: &PrefixBitmap) -> DesignTensor {
    DesignTensor {
        kind: DesignKind::Prefix,
        width: p.width(),
        shape: [1, p.width(), p.width()],
        bits_per_cell: 1,
        data: p.bits().iter().map(|&b| level(b)).collect(),
    }
}

/// Sign-quantizes a tensor back into a design. The upper-right triangle of
/// prefix tensors is ignored.
pub fn from_tensor(x: &DesignTensor) -> Result<Design> {
    let expected = x.shape.iter().product::<usize>();
    if x.data.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "tensor holds {} values for shape {:?}",
            x.data.len(),
            x.shape
        )));
    }
    match x.kind {
        DesignKind::Ct => {
            let bits = x.bits_per_cell;
            if x.shape != tensor_shape(DesignKind::Ct, x.width, x.shape[2]) {
                return Err(Error::InvalidArgument(format!(
                    "shape {:?} does not match a width-{} tree",
                    x.shape, x.width
                )));
            }
            let mut t = CompressorTree::new(x.width, x.shape[2])?;
            let plane = x.shape[1] * x.shape[2];
            for kind in CompressorKind::ALL {
                for c in 0..t.columns() {
                    for s in 0..t.stages() {
                        let mut count = 0u32;
                        for d in 0..bits {
                            let ch = kind.index() * bits + d;
                            count = (count << 1) | (x.data[ch * plane + c * x.shape[2] + s] >= 0.0) as u32;
                        }
                        t.set(kind, c, s, count);
                    }
                }
            }
            Ok(Design::Ct(t))
        }
        DesignKind::Prefix => {
            let n = x.width;
            if x.shape != [1, n, n] {
                return Err(Error::InvalidArgument(format!(
                    "shape {:?} does not match a width-{n} bitmap",
                    x.shape
                )));
            }
            let mut p = PrefixBitmap::empty(n)?;
            for i in 0..n {
                for j in 0..=i {
                    p.set(i, j, x.data[i * n + j] >= 0.0);
                }
            }
            Ok(Design::Prefix(p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_layout_msb_first() {
        let mut t = CompressorTree::new(8, 5).unwrap();
        assert_eq!(bits_per_cell(8), 4);
        t.set(CompressorKind::Half, 3, 2, 5);
        let x = ct_to_tensor(&t).unwrap();
        assert_eq!(x.shape, [8, 16, 5]);
        let plane = 16 * 5;
        let digits: Vec<f64> = (0..4).map(|d| x.data[(4 + d) * plane + 3 * 5 + 2]).collect();
        assert_eq!(digits, vec![-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn overflow_detected() {
        let mut t = CompressorTree::new(2, 2).unwrap();
        assert_eq!(bits_per_cell(2), 2);
        t.set(CompressorKind::Full, 1, 0, 4);
        assert!(matches!(ct_to_tensor(&t), Err(Error::EncodingOverflow { count: 4, bits: 2 })));
    }

    #[test]
    fn zero_decodes_to_one() {
        let x = DesignTensor {
            kind: DesignKind::Prefix,
            width: 1,
            shape: [1, 1, 1],
            bits_per_cell: 1,
            data: vec![0.0],
        };
        assert!(from_tensor(&x).unwrap().as_prefix().unwrap().get(0, 0));
    }

    #[test]
    fn negative_tensor_decodes_to_empty_bitmap() {
        let x = DesignTensor {
            kind: DesignKind::Prefix,
            width: 4,
            shape: [1, 4, 4],
            bits_per_cell: 1,
            data: vec![-0.2; 16],
        };
        let p = from_tensor(&x).unwrap();
        let p = p.as_prefix().unwrap();
        assert!(p.bits().iter().all(|&b| !b));
        assert!(!crate::prefix::validate_prefix(p).is_empty());
    }
}
