//! Segmented latent codes: `K` contiguous blocks of `d` coordinates.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLayout {
    segments: usize,
    segment_dim: usize,
}

impl SegmentLayout {
    pub fn new(segments: usize, segment_dim: usize) -> Result<Self> {
        if segments < 2 {
            return Err(CoreError::Config(format!(
                "need at least 2 segments, got {segments}"
            )));
        }
        if segment_dim < 1 {
            return Err(CoreError::Config("segment dimension must be >= 1".into()));
        }
        Ok(SegmentLayout {
            segments,
            segment_dim,
        })
    }

    #[inline]
    pub fn segments(&self) -> usize {
        self.segments
    }

    #[inline]
    pub fn segment_dim(&self) -> usize {
        self.segment_dim
    }

    #[inline]
    pub fn latent_dim(&self) -> usize {
        self.segments * self.segment_dim
    }

    /// Index range of segment `k`.
    pub fn range(&self, k: usize) -> Result<core::ops::Range<usize>> {
        if k >= self.segments {
            return Err(CoreError::Config(format!(
                "segment {k} out of range for {} segments",
                self.segments
            )));
        }
        Ok(k * self.segment_dim..(k + 1) * self.segment_dim)
    }
}

/// A latent vector carrying its segment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    pub values: Vec<f32>,
    pub layout: SegmentLayout,
}

impl LatentCode {
    pub fn new(values: Vec<f32>, layout: SegmentLayout) -> Result<Self> {
        if values.len() != layout.latent_dim() {
            return Err(CoreError::Shape(format!(
                "latent length {} but layout requires {}",
                values.len(),
                layout.latent_dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Numeric("non-finite latent entry".into()));
        }
        Ok(LatentCode { values, layout })
    }

    pub fn segment(&self, k: usize) -> Result<&[f32]> {
        Ok(&self.values[self.layout.range(k)?])
    }

    /// All coordinates outside segment `k`, in layout order.
    pub fn complement(&self, k: usize) -> Result<Vec<f32>> {
        let r = self.layout.range(k)?;
        let mut out = Vec::with_capacity(self.values.len() - self.layout.segment_dim());
        out.extend_from_slice(&self.values[..r.start]);
        out.extend_from_slice(&self.values[r.end..]);
        Ok(out)
    }

    /// Copy with segment `k` overwritten; all other coordinates bit-identical.
    pub fn with_segment(&self, k: usize, replacement: &[f32]) -> Result<LatentCode> {
        if replacement.len() != self.layout.segment_dim() {
            return Err(CoreError::Shape(format!(
                "replacement length {} but segments have dimension {}",
                replacement.len(),
                self.layout.segment_dim()
            )));
        }
        let r = self.layout.range(k)?;
        let mut values = self.values.clone();
        values[r].copy_from_slice(replacement);
        Ok(LatentCode {
            values,
            layout: self.layout,
        })
    }

    /// Copy with everything except segment `k` overwritten in layout order;
    /// segment `k` is preserved bit-identically.
    pub fn with_complement(&self, k: usize, complement: &[f32]) -> Result<LatentCode> {
        let d = self.layout.segment_dim();
        if complement.len() != self.values.len() - d {
            return Err(CoreError::Shape(format!(
                "complement length {} but layout requires {}",
                complement.len(),
                self.values.len() - d
            )));
        }
        let r = self.layout.range(k)?;
        let mut values = self.values.clone();
        values[..r.start].copy_from_slice(&complement[..r.start]);
        values[r.end..].copy_from_slice(&complement[r.start..]);
        Ok(LatentCode {
            values,
            layout: self.layout,
        })
    }

    /// Concatenation of the selected segments, in the order given.
    pub fn select_segments(&self, selection: &[usize]) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(selection.len() * self.layout.segment_dim());
        for &k in selection {
            out.extend_from_slice(self.segment(k)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn layout_validates_bounds() {
        assert!(SegmentLayout::new(1, 4).is_err());
        assert!(SegmentLayout::new(2, 0).is_err());
        let l = SegmentLayout::new(3, 2).unwrap();
        assert_eq!(l.latent_dim(), 6);
        assert_eq!(l.range(2).unwrap(), 4..6);
        assert!(l.range(3).is_err());
    }

    #[test]
    fn slice_and_reconcatenate_roundtrip() {
        let layout = SegmentLayout::new(4, 3).unwrap();
        let z = LatentCode::new((0..12).map(|i| i as f32).collect(), layout).unwrap();
        let rebuilt = z.select_segments(&[0, 1, 2, 3]).unwrap();
        assert_eq!(rebuilt, z.values);
    }

    #[test]
    fn complement_masks_are_complementary() {
        let layout = SegmentLayout::new(3, 2).unwrap();
        let z = LatentCode::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], layout).unwrap();
        let seg = z.segment(1).unwrap().to_vec();
        let comp = z.complement(1).unwrap();
        assert_eq!(seg, vec![2.0, 3.0]);
        assert_eq!(comp, vec![0.0, 1.0, 4.0, 5.0]);
        let rebuilt = z
            .with_segment(1, &seg)
            .unwrap()
            .with_complement(1, &comp)
            .unwrap();
        assert_eq!(rebuilt, z);
    }

    #[test]
    fn non_finite_rejected() {
        let layout = SegmentLayout::new(2, 1).unwrap();
        assert!(LatentCode::new(vec![f32::NAN, 0.0], layout).is_err());
    }
}
