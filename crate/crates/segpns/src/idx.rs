//! IDX file IO (the MNIST container format).
//!
//! Images: magic `0x00000803`, then `n`, `rows`, `cols` as big-endian u32,
//! then `n*rows*cols` bytes. Labels: magic `0x00000801`, then `n`, then `n`
//! bytes. Pixels are scaled to `[0,1]` by `/255` on read.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const GRID: usize = 28;

pub struct IdxPair {
    /// Row-major 28x28 grids in `[0,1]`.
    pub images: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
}

fn read_u32_be(bytes: &[u8], at: usize) -> Result<u32> {
    let slice = bytes
        .get(at..at + 4)
        .context("truncated IDX header")?
        .try_into()?;
    Ok(u32::from_be_bytes(slice))
}

/// Parses a matching pair of IDX image and label files.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<IdxPair> {
    let magic = read_u32_be(image_bytes, 0)?;
    if magic != IMAGE_MAGIC {
        bail!("bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}");
    }
    let n = read_u32_be(image_bytes, 4)? as usize;
    let rows = read_u32_be(image_bytes, 8)? as usize;
    let cols = read_u32_be(image_bytes, 12)? as usize;
    if rows != GRID || cols != GRID {
        bail!("expected {GRID}x{GRID} images, got {rows}x{cols}");
    }
    let payload = &image_bytes[16..];
    if payload.len() != n * rows * cols {
        bail!(
            "image payload holds {} bytes for {n} declared images ({} expected)",
            payload.len(),
            n * rows * cols
        );
    }

    let lmagic = read_u32_be(label_bytes, 0)?;
    if lmagic != LABEL_MAGIC {
        bail!("bad label magic 0x{lmagic:08x}, expected 0x{LABEL_MAGIC:08x}");
    }
    let ln = read_u32_be(label_bytes, 4)? as usize;
    if ln != n {
        bail!("{n} images but {ln} labels");
    }
    let lpayload = &label_bytes[8..];
    if lpayload.len() != ln {
        bail!("label payload holds {} bytes for {ln} declared labels", lpayload.len());
    }
    if let Some(bad) = lpayload.iter().find(|&&l| l > 9) {
        bail!("label {bad} out of 0..=9");
    }

    let images = payload
        .chunks_exact(rows * cols)
        .map(|chunk| chunk.iter().map(|&b| b as f32 / 255.0).collect())
        .collect();
    Ok(IdxPair {
        images,
        labels: lpayload.to_vec(),
    })
}

/// Reads and parses an IDX pair from disk.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxPair> {
    let image_bytes = fs::read(images_path)
        .with_context(|| format!("reading IDX images from {}", images_path.display()))?;
    let label_bytes = fs::read(labels_path)
        .with_context(|| format!("reading IDX labels from {}", labels_path.display()))?;
    parse_idx(&image_bytes, &label_bytes)
}

/// Writes 28x28 grids (quantized to bytes) and labels as an IDX pair.
pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    grids: &[Vec<f32>],
    labels: &[u8],
) -> Result<()> {
    if grids.len() != labels.len() {
        bail!("{} grids but {} labels", grids.len(), labels.len());
    }
    let n = grids.len() as u32;
    let mut img = Vec::with_capacity(16 + grids.len() * GRID * GRID);
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&n.to_be_bytes());
    img.extend_from_slice(&(GRID as u32).to_be_bytes());
    img.extend_from_slice(&(GRID as u32).to_be_bytes());
    for g in grids {
        if g.len() != GRID * GRID {
            bail!("grid with {} pixels, expected {}", g.len(), GRID * GRID);
        }
        img.extend(g.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    lab.extend_from_slice(labels);
    fs::write(images_path, img)
        .with_context(|| format!("writing {}", images_path.display()))?;
    fs::write(labels_path, lab)
        .with_context(|| format!("writing {}", labels_path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_pair() -> (Vec<Vec<f32>>, Vec<u8>) {
        let mut a = vec![0.0f32; GRID * GRID];
        a[0] = 1.0;
        let b = vec![0.5f32; GRID * GRID];
        (vec![a, b], vec![3, 7])
    }

    #[test]
    fn roundtrip_through_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (grids, labels) = tiny_pair();
        let ip = dir.path().join("img.idx");
        let lp = dir.path().join("lab.idx");
        write_idx(&ip, &lp, &grids, &labels).unwrap();
        let pair = load_idx(&ip, &lp).unwrap();
        assert_eq!(pair.labels, labels);
        assert_eq!(pair.images[0][0], 1.0);
        // 0.5 quantizes to 128/255
        assert!((pair.images[1][0] - 128.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn all_255_image_scales_to_ones() {
        let grids = vec![vec![1.0f32; GRID * GRID]];
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&ip, &lp, &grids, &[0]).unwrap();
        let pair = load_idx(&ip, &lp).unwrap();
        assert!(pair.images[0].iter().all(|&p| p == 1.0));
    }

    #[test]
    fn empty_payload_with_zero_count_is_ok() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&ip, &lp, &[], &[]).unwrap();
        let pair = load_idx(&ip, &lp).unwrap();
        assert!(pair.images.is_empty());
        assert!(pair.labels.is_empty());
    }

    #[test]
    fn bad_magic_rejected() {
        let mut img = Vec::new();
        img.extend_from_slice(&0x12345678u32.to_be_bytes());
        img.extend_from_slice(&0u32.to_be_bytes());
        img.extend_from_slice(&(GRID as u32).to_be_bytes());
        img.extend_from_slice(&(GRID as u32).to_be_bytes());
        let mut lab = Vec::new();
        lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        lab.extend_from_slice(&0u32.to_be_bytes());
        assert!(parse_idx(&img, &lab).is_err());
    }

    #[test]
    fn count_mismatch_rejected() {
        let (grids, _) = tiny_pair();
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&ip, &lp, &grids, &[1, 2]).unwrap();
        let img = std::fs::read(&ip).unwrap();
        let mut lab = std::fs::read(&lp).unwrap();
        lab[7] = 9; // claim 9 labels
        assert!(parse_idx(&img, &lab).is_err());
    }

    #[test]
    fn truncated_payload_rejected() {
        let (grids, labels) = tiny_pair();
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&ip, &lp, &grids, &labels).unwrap();
        let img = std::fs::read(&ip).unwrap();
        let lab = std::fs::read(&lp).unwrap();
        assert!(parse_idx(&img[..img.len() - 10], &lab).is_err());
    }
}
