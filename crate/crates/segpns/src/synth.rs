//! Procedural handwritten-style digits in MNIST's container format.
//!
//! Each class is a stroke skeleton (polylines in unit coordinates) rendered
//! with per-sample jitter: affine warp (rotation, anisotropic scale, shear,
//! translation), stroke width, and stroke intensity. The output matches the
//! IDX layout bit-for-bit, so the rest of the pipeline cannot tell it apart
//! from dataset files on disk. Useful for demos and self-contained tests
//! when the original digit files are not present.

use std::path::Path;

use anyhow::Result;
use rand::Rng;
use segpns_core::rng;

use crate::idx::{write_idx, GRID};

type Stroke = Vec<(f32, f32)>;

fn line(x0: f32, y0: f32, x1: f32, y1: f32) -> Stroke {
    vec![(x0, y0), (x1, y1)]
}

/// Elliptic arc sampled as a polyline; angles in degrees, y axis pointing
/// down, 0 degrees toward +x.
fn arc(cx: f32, cy: f32, rx: f32, ry: f32, a0: f32, a1: f32, n: usize) -> Stroke {
    (0..=n)
        .map(|i| {
            let t = (a0 + (a1 - a0) * i as f32 / n as f32).to_radians();
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

fn ellipse(cx: f32, cy: f32, rx: f32, ry: f32) -> Stroke {
    arc(cx, cy, rx, ry, 0.0, 360.0, 20)
}

fn skeleton(label: u8) -> Vec<Stroke> {
    match label {
        0 => vec![ellipse(0.50, 0.50, 0.18, 0.28)],
        1 => vec![line(0.52, 0.20, 0.52, 0.80), line(0.40, 0.34, 0.52, 0.20)],
        2 => vec![
            arc(0.50, 0.36, 0.17, 0.15, 180.0, 340.0, 10),
            vec![(0.66, 0.41), (0.34, 0.78)],
            line(0.34, 0.78, 0.70, 0.78),
        ],
        3 => vec![
            arc(0.46, 0.35, 0.16, 0.145, -100.0, 95.0, 10),
            arc(0.46, 0.645, 0.17, 0.155, -95.0, 100.0, 10),
        ],
        4 => vec![
            line(0.63, 0.20, 0.63, 0.80),
            line(0.63, 0.20, 0.30, 0.58),
            line(0.28, 0.58, 0.76, 0.58),
        ],
        5 => vec![
            line(0.66, 0.20, 0.36, 0.20),
            line(0.36, 0.20, 0.34, 0.46),
            vec![
                (0.34, 0.46),
                (0.52, 0.43),
                (0.64, 0.52),
                (0.62, 0.68),
                (0.48, 0.78),
                (0.32, 0.72),
            ],
        ],
        6 => vec![
            vec![(0.62, 0.18), (0.46, 0.32), (0.37, 0.52), (0.355, 0.66)],
            ellipse(0.49, 0.64, 0.14, 0.13),
        ],
        7 => vec![line(0.30, 0.22, 0.70, 0.22), line(0.70, 0.22, 0.44, 0.80)],
        8 => vec![
            ellipse(0.50, 0.34, 0.14, 0.14),
            ellipse(0.50, 0.645, 0.16, 0.15),
        ],
        9 => vec![
            ellipse(0.52, 0.36, 0.145, 0.14),
            vec![(0.665, 0.38), (0.66, 0.58), (0.60, 0.80)],
        ],
        other => panic!("digit label {other} out of range"),
    }
}

fn dist_to_segment(p: (f32, f32), a: (f32, f32), b: (f32, f32)) -> f32 {
    let (px, py) = (p.0 - a.0, p.1 - a.1);
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((px * vx + py * vy) / len2).clamp(0.0, 1.0)
    };
    let (dx, dy) = (px - t * vx, py - t * vy);
    (dx * dx + dy * dy).sqrt()
}

/// Renders one digit as a 28x28 grid in `[0,1]`.
pub fn render_digit<R: Rng>(label: u8, r: &mut R) -> Vec<f32> {
    let strokes = skeleton(label);

    // per-sample warp about the glyph center
    let theta: f32 = r.random_range(-0.21f32..0.21);
    let (sin, cos) = theta.sin_cos();
    let sx: f32 = r.random_range(0.85..1.15);
    let sy: f32 = r.random_range(0.85..1.15);
    let shear: f32 = r.random_range(-0.15..0.15);
    let tx: f32 = r.random_range(-0.05..0.05);
    let ty: f32 = r.random_range(-0.05..0.05);
    let warp = |(x, y): (f32, f32)| {
        let (cx, cy) = (x - 0.5, y - 0.5);
        let (cx, cy) = (sx * (cx + shear * cy), sy * cy);
        let (cx, cy) = (cos * cx - sin * cy, sin * cx + cos * cy);
        (cx + 0.5 + tx, cy + 0.5 + ty)
    };
    let strokes: Vec<Stroke> = strokes
        .into_iter()
        .map(|s| s.into_iter().map(warp).collect())
        .collect();

    let width: f32 = r.random_range(0.035..0.075);
    let intensity: f32 = r.random_range(0.65..1.0);
    let edge = 0.02 + 0.35 * width;

    let mut grid = vec![0.0f32; GRID * GRID];
    for row in 0..GRID {
        for col in 0..GRID {
            let p = (
                (col as f32 + 0.5) / GRID as f32,
                (row as f32 + 0.5) / GRID as f32,
            );
            let mut best = f32::MAX;
            for s in &strokes {
                for seg in s.windows(2) {
                    let d = dist_to_segment(p, seg[0], seg[1]);
                    if d < best {
                        best = d;
                    }
                }
            }
            let v = intensity * ((width - best) / edge + 1.0).clamp(0.0, 1.0);
            grid[row * GRID + col] = v;
        }
    }
    grid
}

/// Deterministically generates `n` digits; per-sample streams are keyed by
/// `(seed, index)` so any subset renders identically.
pub fn generate_digits(n: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<u8>) {
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng::stream(seed, &[0xd161, i as u64]);
        let label = r.random_range(0..10u8);
        images.push(render_digit(label, &mut r));
        labels.push(label);
    }
    (images, labels)
}

/// Generates digits and writes them as an IDX pair.
pub fn write_synthetic_idx(
    images_path: &Path,
    labels_path: &Path,
    n: usize,
    seed: u64,
) -> Result<()> {
    let (images, labels) = generate_digits(n, seed);
    write_idx(images_path, labels_path, &images, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_in_range() {
        let (a, la) = generate_digits(20, 9);
        let (b, lb) = generate_digits(20, 9);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        for img in &a {
            assert_eq!(img.len(), GRID * GRID);
            assert!(img.iter().all(|p| (0.0..=1.0).contains(p)));
            // a digit is actually drawn
            assert!(img.iter().any(|&p| p > 0.5));
        }
    }

    #[test]
    fn labels_are_roughly_balanced() {
        let (_, labels) = generate_digits(2000, 3);
        let mut hist = [0usize; 10];
        for &l in &labels {
            hist[l as usize] += 1;
        }
        for (digit, &count) in hist.iter().enumerate() {
            assert!(
                (140..=260).contains(&count),
                "digit {digit} appears {count} times"
            );
        }
    }

    #[test]
    fn different_classes_render_differently() {
        let mut r = rng::stream(1, &[0]);
        let a = render_digit(0, &mut r);
        let mut r = rng::stream(1, &[0]);
        let b = render_digit(1, &mut r);
        let diff: f32 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 10.0);
    }
}
