//! 32x32 grayscale grids and the domain-shift transforms.
//!
//! All transforms operate on pixels in `[0,1]` and are pure functions of the
//! image plus (for the noise domain) an explicit RNG stream, so dataset
//! generation is reproducible and schedule-independent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// needed for float math in no_std builds; tests compile with std
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CoreError, Result};

pub const SIDE: usize = 32;
pub const PIXELS: usize = SIDE * SIDE;

/// A 32x32 grayscale image with pixels in `[0,1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image32 {
    pixels: Vec<f32>,
}

impl Image32 {
    pub fn from_pixels(pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != PIXELS {
            return Err(CoreError::Shape(format!(
                "image needs {PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CoreError::Domain("pixel outside [0,1]".into()));
        }
        Ok(Image32 { pixels })
    }

    pub fn constant(v: f32) -> Self {
        Image32 {
            pixels: vec![v.clamp(0.0, 1.0); PIXELS],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * SIDE + col]
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    /// 8-bit levels as exported to PNG: `round(p * 255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(levels: &[u8]) -> Result<Self> {
        if levels.len() != PIXELS {
            return Err(CoreError::Shape(format!(
                "image needs {PIXELS} bytes, got {}",
                levels.len()
            )));
        }
        Ok(Image32 {
            pixels: levels.iter().map(|&b| b as f32 / 255.0).collect(),
        })
    }

    /// Snaps every pixel to the 8-bit lattice `{0..255}/255`. Generation
    /// quantizes up front so PNG export/import is lossless.
    pub fn quantized(&self) -> Image32 {
        Image32 {
            pixels: self
                .pixels
                .iter()
                .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() / 255.0)
                .collect(),
        }
    }

    pub fn clipped(&self) -> Image32 {
        Image32 {
            pixels: self.pixels.iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        }
    }
}

/// Bilinear resize of an arbitrary grid onto 32x32 with corner alignment
/// (corners map to corners, constants stay constant).
pub fn resize_bilinear(src: &[f32], src_w: usize, src_h: usize) -> Result<Image32> {
    if src.len() != src_w * src_h || src_w < 2 || src_h < 2 {
        return Err(CoreError::Shape(format!(
            "resize source {src_w}x{src_h} with {} values",
            src.len()
        )));
    }
    let sx = (src_w - 1) as f32 / (SIDE - 1) as f32;
    let sy = (src_h - 1) as f32 / (SIDE - 1) as f32;
    let mut out = vec![0.0f32; PIXELS];
    for r in 0..SIDE {
        let fy = r as f32 * sy;
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let wy = fy - y0 as f32;
        for c in 0..SIDE {
            let fx = c as f32 * sx;
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let wx = fx - x0 as f32;
            let top = src[y0 * src_w + x0] * (1.0 - wx) + src[y0 * src_w + x1] * wx;
            let bot = src[y1 * src_w + x0] * (1.0 - wx) + src[y1 * src_w + x1] * wx;
            out[r * SIDE + c] = top * (1.0 - wy) + bot * wy;
        }
    }
    Image32::from_pixels(out)
}

/// Separable Gaussian blur with kernel half-width `ceil(3*sigma)`,
/// renormalized where the kernel hangs over the border.
pub fn gaussian_blur(img: &Image32, sigma: f32) -> Image32 {
    let h = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let kernel: Vec<f32> = (-h..=h)
        .map(|i| (-((i * i) as f32) / denom).exp())
        .collect();
    let pass = |src: &[f32], horizontal: bool| -> Vec<f32> {
        let mut dst = vec![0.0f32; PIXELS];
        for r in 0..SIDE as isize {
            for c in 0..SIDE as isize {
                let mut acc = 0.0;
                let mut wsum = 0.0;
                for (ki, &w) in kernel.iter().enumerate() {
                    let off = ki as isize - h;
                    let (rr, cc) = if horizontal { (r, c + off) } else { (r + off, c) };
                    if rr < 0 || rr >= SIDE as isize || cc < 0 || cc >= SIDE as isize {
                        continue;
                    }
                    acc += w * src[(rr * SIDE as isize + cc) as usize];
                    wsum += w;
                }
                dst[(r * SIDE as isize + c) as usize] = acc / wsum;
            }
        }
        dst
    };
    let tmp = pass(img.pixels(), true);
    Image32 {
        pixels: pass(&tmp, false),
    }
}

/// Rotation about the image center with bilinear sampling and zero padding.
pub fn rotate_bilinear(img: &Image32, degrees: f32) -> Image32 {
    let theta = degrees.to_radians();
    let (sin, cos) = (theta.sin(), theta.cos());
    let center = (SIDE as f32 - 1.0) / 2.0;
    let mut out = vec![0.0f32; PIXELS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            // inverse map: rotate the destination coordinate backwards
            let dy = r as f32 - center;
            let dx = c as f32 - center;
            let sx = cos * dx + sin * dy + center;
            let sy = -sin * dx + cos * dy + center;
            out[r * SIDE + c] = sample_bilinear_zero(img.pixels(), sx, sy);
        }
    }
    Image32 { pixels: out }
}

fn sample_bilinear_zero(src: &[f32], x: f32, y: f32) -> f32 {
    let x0 = x.floor();
    let y0 = y.floor();
    let wx = x - x0;
    let wy = y - y0;
    let mut acc = 0.0;
    for (dy, wr) in [(0.0, 1.0 - wy), (1.0, wy)] {
        for (dx, wc) in [(0.0, 1.0 - wx), (1.0, wx)] {
            let xi = x0 + dx;
            let yi = y0 + dy;
            if xi < 0.0 || yi < 0.0 || xi >= SIDE as f32 || yi >= SIDE as f32 {
                continue; // zero padding
            }
            acc += wr * wc * src[yi as usize * SIDE + xi as usize];
        }
    }
    acc
}

/// `pivot + factor * (p - pivot)` computed in f64 so the endpoint images
/// `{0,1} -> {0.3,0.7}` are exact at factor 0.4.
pub fn contrast(img: &Image32, factor: f32, pivot: f32) -> Image32 {
    let (f, pv) = (factor as f64, pivot as f64);
    Image32 {
        pixels: img
            .pixels()
            .iter()
            .map(|&p| (pv + f * (p as f64 - pv)) as f32)
            .collect(),
    }
}

pub fn invert(img: &Image32) -> Image32 {
    Image32 {
        pixels: img.pixels().iter().map(|&p| 1.0 - p).collect(),
    }
}

fn neighborhood_reduce(img: &Image32, pick_max: bool) -> Image32 {
    let mut out = vec![0.0f32; PIXELS];
    for r in 0..SIDE as isize {
        for c in 0..SIDE as isize {
            let mut best = if pick_max { f32::MIN } else { f32::MAX };
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || rr >= SIDE as isize || cc < 0 || cc >= SIDE as isize {
                        continue;
                    }
                    let v = img.pixels()[(rr * SIDE as isize + cc) as usize];
                    best = if pick_max { best.max(v) } else { best.min(v) };
                }
            }
            out[(r * SIDE as isize + c) as usize] = best;
        }
    }
    Image32 { pixels: out }
}

/// 3x3 max filter (morphological thickening).
pub fn max_filter3(img: &Image32) -> Image32 {
    neighborhood_reduce(img, true)
}

/// 3x3 min filter (morphological thinning).
pub fn min_filter3(img: &Image32) -> Image32 {
    neighborhood_reduce(img, false)
}

/// Adds i.i.d. Gaussian noise WITHOUT clipping; callers clip afterwards.
/// Kept separate so the noise scale can be verified pre-clip.
pub fn gaussian_noise<R: Rng>(img: &Image32, sigma: f32, rng: &mut R) -> Image32 {
    let normal = Normal::new(0.0f32, sigma).expect("sigma must be finite and positive");
    Image32 {
        pixels: img
            .pixels()
            .iter()
            .map(|&p| p + normal.sample(rng))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn resize_preserves_constants() {
        let src = vec![0.5f32; 28 * 28];
        let out = resize_bilinear(&src, 28, 28).unwrap();
        for &p in out.pixels() {
            assert!((p - 0.5).abs() < 1e-6);
        }
        let zeros = vec![0.0f32; 28 * 28];
        assert!(resize_bilinear(&zeros, 28, 28)
            .unwrap()
            .pixels()
            .iter()
            .all(|&p| p == 0.0));
    }

    #[test]
    fn resize_matches_closed_form_on_ramp() {
        // horizontal ramp g[r][c] = c / 27 resized with corner alignment
        // evaluates to c / 31 at destination column c.
        let src: Vec<f32> = (0..28 * 28).map(|i| (i % 28) as f32 / 27.0).collect();
        let out = resize_bilinear(&src, 28, 28).unwrap();
        for r in 0..SIDE {
            for c in 0..SIDE {
                let expected = c as f32 / 31.0;
                assert!(
                    (out.get(r, c) - expected).abs() < 1e-5,
                    "({r},{c}): {} vs {expected}",
                    out.get(r, c)
                );
            }
        }
    }

    #[test]
    fn resize_corners_map_to_corners() {
        let mut src = vec![0.0f32; 28 * 28];
        src[0] = 1.0;
        src[27] = 0.75;
        src[27 * 28] = 0.5;
        src[27 * 28 + 27] = 0.25;
        let out = resize_bilinear(&src, 28, 28).unwrap();
        assert_eq!(out.get(0, 0), 1.0);
        assert_eq!(out.get(0, 31), 0.75);
        assert_eq!(out.get(31, 0), 0.5);
        assert_eq!(out.get(31, 31), 0.25);
    }

    #[test]
    fn contrast_endpoints_exact() {
        let ones = Image32::constant(1.0);
        let zeros = Image32::constant(0.0);
        assert_eq!(contrast(&ones, 0.4, 0.5).pixels()[0], 0.7f32);
        assert_eq!(contrast(&zeros, 0.4, 0.5).pixels()[0], 0.3f32);
    }

    #[test]
    fn invert_is_involution_on_quantized_pixels() {
        let img = Image32::from_pixels((0..PIXELS).map(|i| (i % 256) as f32 / 255.0).collect())
            .unwrap()
            .quantized();
        let back = invert(&invert(&img)).quantized();
        assert_eq!(img, back);
    }

    #[test]
    fn noise_std_matches_parameter_before_clipping() {
        let img = Image32::constant(0.5);
        let mut r = rng::stream(77, &[0]);
        let mut values = Vec::new();
        for _ in 0..10 {
            let noisy = gaussian_noise(&img, 0.25, &mut r);
            values.extend(noisy.pixels().iter().map(|&p| p - 0.5));
        }
        let n = values.len() as f32;
        let mean: f32 = values.iter().sum::<f32>() / n;
        let var: f32 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let std = var.sqrt();
        assert!((0.24..=0.26).contains(&std), "std {std}");
    }

    #[test]
    fn rotation_preserves_disk_energy() {
        // smooth-edged disk of radius 10 at the center; 20 degrees keeps it
        // fully inside the frame, so energy loss is interpolation only.
        let mut px = vec![0.0f32; PIXELS];
        let c = (SIDE as f32 - 1.0) / 2.0;
        for r in 0..SIDE {
            for q in 0..SIDE {
                let d = ((r as f32 - c).powi(2) + (q as f32 - c).powi(2)).sqrt();
                px[r * SIDE + q] = (1.0 - (d - 8.0).max(0.0) / 2.5).clamp(0.0, 1.0);
            }
        }
        let img = Image32::from_pixels(px).unwrap();
        let rot = rotate_bilinear(&img, 20.0);
        let energy = |im: &Image32| im.pixels().iter().map(|p| p * p).sum::<f32>();
        let (e0, e1) = (energy(&img), energy(&rot));
        assert!(
            (e1 - e0).abs() / e0 < 0.02,
            "energy drift {} -> {}",
            e0,
            e1
        );
    }

    #[test]
    fn max_filter_dilates_single_pixel() {
        let mut px = vec![0.0f32; PIXELS];
        px[16 * SIDE + 16] = 1.0;
        let img = Image32::from_pixels(px).unwrap();
        let out = max_filter3(&img);
        let lit = out.pixels().iter().filter(|&&p| p == 1.0).count();
        assert_eq!(lit, 9);
    }

    #[test]
    fn min_filter_erases_single_pixel() {
        let mut px = vec![0.0f32; PIXELS];
        px[16 * SIDE + 16] = 1.0;
        let img = Image32::from_pixels(px).unwrap();
        let out = min_filter3(&img);
        assert!(out.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn quantization_is_idempotent() {
        let img = Image32::from_pixels((0..PIXELS).map(|i| i as f32 / PIXELS as f32).collect())
            .unwrap();
        let q = img.quantized();
        assert_eq!(q, q.quantized());
        let bytes = q.to_u8();
        assert_eq!(Image32::from_u8(&bytes).unwrap(), q);
    }
}
