//! Benchmark domains: labeled images under eight deterministic shifts.
//!
//! Every domain applies one transform to the same underlying digits (paired
//! construction, labels untouched). The default split trains on
//! clean/noise/blur/contrast and holds out rotate/invert/thick/thin.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::image::{self, Image32};
use crate::latent::SegmentLayout;
use crate::rng;

/// Transform parameters fixed by the benchmark definition.
pub mod params {
    /// Gaussian noise standard deviation (pre-clip).
    pub const NOISE_SIGMA: f32 = 0.25;
    /// Gaussian blur radius, interpreted as the Gaussian sigma.
    pub const BLUR_SIGMA: f32 = 1.2;
    /// Contrast reduction factor about the mid-gray pivot.
    pub const CONTRAST_FACTOR: f32 = 0.4;
    pub const CONTRAST_PIVOT: f32 = 0.5;
    /// Rotation angle in degrees.
    pub const ROTATE_DEGREES: f32 = 20.0;
    /// Thin-domain parameters: light blur, 3x3 min filter, mild contrast cut.
    pub const THIN_BLUR_SIGMA: f32 = 0.8;
    pub const THIN_CONTRAST_FACTOR: f32 = 0.7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Clean,
    Noise,
    Blur,
    Contrast,
    Rotate,
    Invert,
    Thick,
    Thin,
}

impl DomainKind {
    pub const ALL: [DomainKind; 8] = [
        DomainKind::Clean,
        DomainKind::Noise,
        DomainKind::Blur,
        DomainKind::Contrast,
        DomainKind::Rotate,
        DomainKind::Invert,
        DomainKind::Thick,
        DomainKind::Thin,
    ];

    pub const DEFAULT_TRAIN: [DomainKind; 4] = [
        DomainKind::Clean,
        DomainKind::Noise,
        DomainKind::Blur,
        DomainKind::Contrast,
    ];

    pub const DEFAULT_TEST: [DomainKind; 4] = [
        DomainKind::Rotate,
        DomainKind::Invert,
        DomainKind::Thick,
        DomainKind::Thin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Clean => "clean",
            DomainKind::Noise => "noise",
            DomainKind::Blur => "blur",
            DomainKind::Contrast => "contrast",
            DomainKind::Rotate => "rotate",
            DomainKind::Invert => "invert",
            DomainKind::Thick => "thick",
            DomainKind::Thin => "thin",
        }
    }

    pub fn parse(name: &str) -> Result<DomainKind> {
        DomainKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| CoreError::Config(format!("unknown domain '{name}'")))
    }

    /// Stable integer id used in RNG key paths.
    pub fn index(self) -> u64 {
        DomainKind::ALL.iter().position(|&k| k == self).unwrap() as u64
    }
}

impl core::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainRole {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTag {
    pub kind: DomainKind,
    pub role: DomainRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Image32,
    pub label: u8,
    pub domain: DomainKind,
}

impl LabeledImage {
    pub fn new(image: Image32, label: u8, domain: DomainKind) -> Result<Self> {
        if label > 9 {
            return Err(CoreError::Domain(format!("label {label} out of 0..=9")));
        }
        Ok(LabeledImage {
            image,
            label,
            domain,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub tag: DomainTag,
    pub samples: Vec<LabeledImage>,
    /// Mixture weight over its split; uniform by default.
    pub mixture_weight: f32,
}

impl DomainDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_histogram(&self) -> [usize; 10] {
        let mut h = [0usize; 10];
        for s in &self.samples {
            h[s.label as usize] += 1;
        }
        h
    }
}

/// Applies the transform of `kind` to a 32x32 image. The RNG stream is only
/// consumed by the noise domain; pass the stream keyed by
/// `(seed, domain index, image index)` so generation is order-independent.
pub fn apply_domain_transform<R: rand::Rng>(
    img: &Image32,
    kind: DomainKind,
    rng: &mut R,
) -> Image32 {
    let out = match kind {
        DomainKind::Clean => img.clone(),
        DomainKind::Noise => image::gaussian_noise(img, params::NOISE_SIGMA, rng),
        DomainKind::Blur => image::gaussian_blur(img, params::BLUR_SIGMA),
        DomainKind::Contrast => {
            image::contrast(img, params::CONTRAST_FACTOR, params::CONTRAST_PIVOT)
        }
        DomainKind::Rotate => image::rotate_bilinear(img, params::ROTATE_DEGREES),
        DomainKind::Invert => image::invert(img),
        DomainKind::Thick => image::max_filter3(img),
        DomainKind::Thin => {
            let blurred = image::gaussian_blur(img, params::THIN_BLUR_SIGMA);
            let eroded = image::min_filter3(&blurred);
            image::contrast(&eroded, params::THIN_CONTRAST_FACTOR, params::CONTRAST_PIVOT)
        }
    };
    out.clipped()
}

/// Base material for domain generation: a 28x28 grid plus its digit label.
pub struct BaseSample {
    pub grid: Vec<f32>,
    pub label: u8,
}

/// Builds one dataset per requested domain from shared base digits.
///
/// The same subset of base indices (a seeded sample without replacement)
/// feeds every domain, each final image is quantized to the 8-bit lattice,
/// and per-image RNG streams are keyed by `(seed, domain, index)`.
pub fn generate_domains(
    base: &[BaseSample],
    train: &[DomainKind],
    test: &[DomainKind],
    per_domain_count: usize,
    seed: u64,
) -> Result<Vec<DomainDataset>> {
    if per_domain_count == 0 || per_domain_count > base.len() {
        return Err(CoreError::Config(format!(
            "per-domain count {per_domain_count} not in 1..={}",
            base.len()
        )));
    }
    for k in train {
        if test.contains(k) {
            return Err(CoreError::Config(format!(
                "domain '{k}' appears in both train and test"
            )));
        }
    }
    let chosen = seeded_subset(base.len(), per_domain_count, seed);
    let resized: Vec<(Image32, u8)> = chosen
        .iter()
        .map(|&i| {
            let b = &base[i];
            image::resize_bilinear(&b.grid, 28, 28).map(|img| (img, b.label))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (role, kinds) in [(DomainRole::Train, train), (DomainRole::Test, test)] {
        let weight = 1.0 / kinds.len() as f32;
        for &kind in kinds {
            let mut samples = Vec::with_capacity(resized.len());
            for (idx, (img, label)) in resized.iter().enumerate() {
                let mut r = rng::stream(seed, &[kind.index(), idx as u64]);
                let transformed = apply_domain_transform(img, kind, &mut r).quantized();
                samples.push(LabeledImage::new(transformed, *label, kind)?);
            }
            out.push(DomainDataset {
                tag: DomainTag { kind, role },
                samples,
                mixture_weight: weight,
            });
        }
    }
    Ok(out)
}

/// Deterministic sample of `count` distinct indices from `0..n`.
fn seeded_subset(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, &[0x5e1ec7]);
    for i in 0..count {
        let j = i + rand::Rng::random_range(&mut r, 0..n - i);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx
}

/// Externally supplied per-sample feature vectors with labels and domains,
/// used in place of encoder outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub layout: SegmentLayout,
    pub features: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
    pub domains: Vec<DomainKind>,
}

impl FeatureMatrix {
    pub fn new(
        layout: SegmentLayout,
        features: Vec<Vec<f32>>,
        labels: Vec<u8>,
        domains: Vec<DomainKind>,
    ) -> Result<Self> {
        let width = layout.latent_dim();
        if features.len() != labels.len() || features.len() != domains.len() {
            return Err(CoreError::Shape(
                "features, labels, and domains must have equal length".into(),
            ));
        }
        for (i, f) in features.iter().enumerate() {
            if f.len() != width {
                return Err(CoreError::Shape(format!(
                    "feature row {i} has length {} but the layout requires {width}",
                    f.len()
                )));
            }
        }
        Ok(FeatureMatrix {
            layout,
            features,
            labels,
            domains,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Rows restricted to one domain, keeping input order.
    pub fn rows_for_domain(&self, kind: DomainKind) -> (Vec<Vec<f32>>, Vec<u8>) {
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.len() {
            if self.domains[i] == kind {
                feats.push(self.features[i].clone());
                labels.push(self.labels[i]);
            }
        }
        (feats, labels)
    }

    pub fn present_domains(&self) -> Vec<DomainKind> {
        let mut kinds: Vec<DomainKind> = Vec::new();
        for &d in &self.domains {
            if !kinds.contains(&d) {
                kinds.push(d);
            }
        }
        kinds.sort();
        kinds
    }
}
