//! Dataset materialization: PNG images, a `filename,label` CSV, and a
//! key-value manifest recording the generation parameters actually used,
//! so any exported domain can be regenerated and byte-compared.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{GrayImage, ImageReader};

use segpns_core::domain::{
    generate_domains, params, BaseSample, DomainDataset, DomainKind, DomainRole, DomainTag,
    LabeledImage,
};
use segpns_core::image::Image32;

use crate::idx;

pub const MANIFEST_VERSION: u32 = 1;

/// Where a generated dataset came from; recorded in every manifest.
#[derive(Debug, Clone)]
pub struct GenProvenance {
    pub seed: u64,
    pub per_domain_count: usize,
    pub base_images: String,
    pub base_labels: String,
}

/// Parses the IDX pair and synthesizes one dataset per requested domain.
pub fn generate_benchmark(
    images_idx: &Path,
    labels_idx: &Path,
    train: &[DomainKind],
    test: &[DomainKind],
    per_domain_count: usize,
    seed: u64,
) -> Result<Vec<DomainDataset>> {
    let pair = idx::load_idx(images_idx, labels_idx)?;
    let base: Vec<BaseSample> = pair
        .images
        .into_iter()
        .zip(pair.labels)
        .map(|(grid, label)| BaseSample { grid, label })
        .collect();
    generate_domains(&base, train, test, per_domain_count, seed)
        .context("synthesizing benchmark domains")
}

fn image_name(index: usize) -> String {
    format!("img_{index:06}.png")
}

/// Transform parameters that produced a domain, for the manifest.
fn transform_params(kind: DomainKind) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        map.insert(format!("transform.{k}"), v);
    };
    match kind {
        DomainKind::Clean | DomainKind::Invert => {}
        DomainKind::Noise => put("noise_sigma", params::NOISE_SIGMA.to_string()),
        DomainKind::Blur => put("blur_sigma", params::BLUR_SIGMA.to_string()),
        DomainKind::Contrast => {
            put("contrast_factor", params::CONTRAST_FACTOR.to_string());
            put("contrast_pivot", params::CONTRAST_PIVOT.to_string());
        }
        DomainKind::Rotate => put("rotate_degrees", params::ROTATE_DEGREES.to_string()),
        DomainKind::Thick => put("kernel", "3".to_string()),
        DomainKind::Thin => {
            put("blur_sigma", params::THIN_BLUR_SIGMA.to_string());
            put("kernel", "3".to_string());
            put("contrast_factor", params::THIN_CONTRAST_FACTOR.to_string());
            put("contrast_pivot", params::CONTRAST_PIVOT.to_string());
        }
    }
    map
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub entries: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .get(key)
            .map(|s| s.as_str())
            .with_context(|| format!("manifest is missing '{key}'"))
    }

    pub fn domain(&self) -> Result<DomainKind> {
        Ok(DomainKind::parse(self.get("domain")?)?)
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.get("seed")?.parse()?)
    }

    pub fn per_domain_count(&self) -> Result<usize> {
        Ok(self.get("per_domain_count")?.parse()?)
    }
}

fn render_manifest(entries: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("manifest line {} is not 'key = value'", i + 1))?;
        entries.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(DatasetManifest { entries })
}

/// Writes one dataset as PNGs + CSV + manifest. The manifest is written
/// last with `status = complete`; on failure a stub manifest records the
/// abort so partial exports are never importable.
pub fn export_dataset(
    dataset: &DomainDataset,
    dir: &Path,
    provenance: &GenProvenance,
) -> Result<DatasetManifest> {
    let result = export_inner(dataset, dir, provenance);
    if let Err(e) = &result {
        let mut entries = BTreeMap::new();
        entries.insert("format_version".to_string(), MANIFEST_VERSION.to_string());
        entries.insert("status".to_string(), "aborted".to_string());
        entries.insert("error".to_string(), e.to_string().replace('\n', " "));
        let _ = fs::write(dir.join("manifest.txt"), render_manifest(&entries));
    }
    result
}

fn export_inner(
    dataset: &DomainDataset,
    dir: &Path,
    provenance: &GenProvenance,
) -> Result<DatasetManifest> {
    let images_dir = dir.join("images");
    fs::create_dir_all(&images_dir)
        .with_context(|| format!("creating {}", images_dir.display()))?;

    let mut csv = String::from("filename,label\n");
    for (i, sample) in dataset.samples.iter().enumerate() {
        let name = image_name(i);
        let png = GrayImage::from_raw(32, 32, sample.image.to_u8())
            .context("building 32x32 grayscale image")?;
        png.save(images_dir.join(&name))
            .with_context(|| format!("writing {name}"))?;
        csv.push_str(&format!("{name},{}\n", sample.label));
    }
    fs::write(dir.join("labels.csv"), csv).context("writing labels.csv")?;

    let mut entries = BTreeMap::new();
    entries.insert("format_version".to_string(), MANIFEST_VERSION.to_string());
    entries.insert("status".to_string(), "complete".to_string());
    entries.insert("domain".to_string(), dataset.tag.kind.name().to_string());
    entries.insert(
        "role".to_string(),
        match dataset.tag.role {
            DomainRole::Train => "train".to_string(),
            DomainRole::Test => "test".to_string(),
        },
    );
    entries.insert("count".to_string(), dataset.len().to_string());
    entries.insert(
        "mixture_weight".to_string(),
        dataset.mixture_weight.to_string(),
    );
    entries.insert("seed".to_string(), provenance.seed.to_string());
    entries.insert(
        "per_domain_count".to_string(),
        provenance.per_domain_count.to_string(),
    );
    entries.insert("base_images".to_string(), provenance.base_images.clone());
    entries.insert("base_labels".to_string(), provenance.base_labels.clone());
    entries.extend(transform_params(dataset.tag.kind));
    fs::write(dir.join("manifest.txt"), render_manifest(&entries))
        .context("writing manifest.txt")?;
    Ok(DatasetManifest { entries })
}

/// Reads a dataset back; pixel-exact because generation quantizes to the
/// 8-bit lattice before export.
pub fn import_dataset(dir: &Path) -> Result<(DomainDataset, DatasetManifest)> {
    let manifest_text = fs::read_to_string(dir.join("manifest.txt"))
        .with_context(|| format!("reading manifest in {}", dir.display()))?;
    let manifest = parse_manifest(&manifest_text)?;
    if manifest.get("status")? != "complete" {
        bail!(
            "dataset in {} is marked '{}', refusing to import",
            dir.display(),
            manifest.get("status")?
        );
    }
    let kind = manifest.domain()?;
    let role = match manifest.get("role")? {
        "train" => DomainRole::Train,
        "test" => DomainRole::Test,
        other => bail!("unknown role '{other}'"),
    };
    let weight: f32 = manifest.get("mixture_weight")?.parse()?;

    let csv = fs::read_to_string(dir.join("labels.csv")).context("reading labels.csv")?;
    let mut samples = Vec::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            if line != "filename,label" {
                bail!("unexpected CSV header '{line}'");
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (name, label) = line
            .split_once(',')
            .with_context(|| format!("CSV line {} is not 'filename,label'", i + 1))?;
        let label: u8 = label.trim().parse()?;
        let path = dir.join("images").join(name.trim());
        let img = ImageReader::open(&path)
            .with_context(|| format!("opening {}", path.display()))?
            .decode()
            .with_context(|| format!("decoding {}", path.display()))?
            .to_luma8();
        if img.dimensions() != (32, 32) {
            bail!("{} is not 32x32", path.display());
        }
        let image = Image32::from_u8(img.as_raw())?;
        samples.push(LabeledImage::new(image, label, kind)?);
    }
    let declared: usize = manifest.get("count")?.parse()?;
    if samples.len() != declared {
        bail!("manifest declares {declared} samples, found {}", samples.len());
    }
    Ok((
        DomainDataset {
            tag: DomainTag { kind, role },
            samples,
            mixture_weight: weight,
        },
        manifest,
    ))
}

/// Exports every domain of a benchmark under `root/<domain>/`.
pub fn export_benchmark(
    datasets: &[DomainDataset],
    root: &Path,
    provenance: &GenProvenance,
) -> Result<()> {
    for ds in datasets {
        export_dataset(ds, &root.join(ds.tag.kind.name()), provenance)?;
    }
    Ok(())
}

/// Imports the domains listed, expecting `root/<domain>/` layouts.
pub fn import_benchmark(root: &Path, kinds: &[DomainKind]) -> Result<Vec<DomainDataset>> {
    kinds
        .iter()
        .map(|k| Ok(import_dataset(&root.join(k.name()))?.0))
        .collect()
}

/// Canonical output paths of a benchmark data directory.
pub fn dataset_dir(root: &Path, kind: DomainKind) -> PathBuf {
    root.join(kind.name())
}
