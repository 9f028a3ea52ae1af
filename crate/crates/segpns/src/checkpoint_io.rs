//! Checkpoint files: the core binary parameter codec plus the layout
//! sidecar that pins `(segments, segment_dim)` next to stage-1 weights.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use segpns_core::checkpoint::{decode_params, encode_params};
use segpns_core::classify::{ClassifierHead, Selection};
use segpns_core::latent::SegmentLayout;
use segpns_core::nn::DenseParams;
use segpns_core::repr::Stage1Model;

use crate::data_io::parse_manifest;

pub fn save_params(path: &Path, params: &DenseParams<f32>) -> Result<()> {
    fs::write(path, encode_params(params))
        .with_context(|| format!("writing checkpoint {}", path.display()))
}

pub fn load_params(path: &Path) -> Result<DenseParams<f32>> {
    let bytes =
        fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Ok(decode_params(&bytes)?)
}

/// Stage-1 artifacts live in one directory: `encoder.bin`, `generator.bin`,
/// and a `layout.txt` sidecar.
pub fn save_stage1(dir: &Path, model: &Stage1Model) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_params(&dir.join("encoder.bin"), model.encoder())?;
    save_params(&dir.join("generator.bin"), model.generator())?;
    let layout = model.layout();
    fs::write(
        dir.join("layout.txt"),
        format!(
            "segments = {}\nsegment_dim = {}\n",
            layout.segments(),
            layout.segment_dim()
        ),
    )
    .context("writing layout sidecar")?;
    Ok(())
}

pub fn load_stage1(dir: &Path) -> Result<Stage1Model> {
    let layout = load_layout(&dir.join("layout.txt"))?;
    let encoder = load_params(&dir.join("encoder.bin"))?;
    let generator = load_params(&dir.join("generator.bin"))?;
    Ok(Stage1Model::new(encoder, generator, layout)?)
}

pub fn load_layout(path: &Path) -> Result<SegmentLayout> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading layout sidecar {}", path.display()))?;
    let manifest = parse_manifest(&text)?;
    Ok(SegmentLayout::new(
        manifest.get("segments")?.parse()?,
        manifest.get("segment_dim")?.parse()?,
    )?)
}

/// A classifier head plus its segment selection (`full` or a sorted index
/// list), stored as `head.bin` + `selection.txt`.
pub fn save_head(dir: &Path, head: &ClassifierHead) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_params(&dir.join("head.bin"), head.params())?;
    let layout = head.selection().layout();
    let selection = match head.selection() {
        Selection::Full(_) => "full".to_string(),
        Selection::Segments { indices, .. } => indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(","),
    };
    fs::write(
        dir.join("selection.txt"),
        format!(
            "segments = {}\nsegment_dim = {}\nselection = {}\n",
            layout.segments(),
            layout.segment_dim(),
            selection
        ),
    )?;
    Ok(())
}

pub fn load_head(dir: &Path) -> Result<ClassifierHead> {
    let text = fs::read_to_string(dir.join("selection.txt"))?;
    let manifest = parse_manifest(&text)?;
    let layout = SegmentLayout::new(
        manifest.get("segments")?.parse()?,
        manifest.get("segment_dim")?.parse()?,
    )?;
    let selection = match manifest.get("selection")? {
        "full" => Selection::Full(layout),
        list => {
            let indices: Vec<usize> = list
                .split(',')
                .map(|s| s.trim().parse().map_err(anyhow::Error::from))
                .collect::<Result<_>>()?;
            Selection::segments(layout, indices)?
        }
    };
    let params = load_params(&dir.join("head.bin"))?;
    Ok(ClassifierHead::new(params, selection)?)
}
