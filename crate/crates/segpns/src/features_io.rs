//! Feature-matrix CSV: `domain,label,f0..f(Kd-1)` with a header row.
//!
//! This is the representation-agnostic entry point: rows produced by any
//! encoder with semantically aligned segments can be scored in place of the
//! in-process encoder.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use segpns_core::domain::{DomainKind, FeatureMatrix};
use segpns_core::latent::SegmentLayout;

pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let width = features.layout.latent_dim();
    let mut out = String::from("domain,label");
    for i in 0..width {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for i in 0..features.len() {
        out.push_str(features.domains[i].name());
        out.push(',');
        out.push_str(&features.labels[i].to_string());
        for v in &features.features[i] {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing features to {}", path.display()))
}

pub fn read_features(path: &Path, layout: SegmentLayout) -> Result<FeatureMatrix> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading features from {}", path.display()))?;
    let width = layout.latent_dim();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().context("empty feature file")?;
    let expected_header = {
        let mut h = String::from("domain,label");
        for i in 0..width {
            h.push_str(&format!(",f{i}"));
        }
        h
    };
    if header.trim() != expected_header {
        bail!(
            "feature header does not match the declared layout (expected {} feature columns)",
            width
        );
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut domains = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let domain = parts.next().context("missing domain column")?;
        let label = parts
            .next()
            .with_context(|| format!("line {}: missing label", ln + 1))?;
        let values: Vec<f32> = parts
            .map(|p| p.trim().parse::<f32>().map_err(anyhow::Error::from))
            .collect::<Result<_>>()
            .with_context(|| format!("line {}: bad feature value", ln + 1))?;
        if values.len() != width {
            bail!(
                "line {}: {} feature values but the layout requires {width}",
                ln + 1,
                values.len()
            );
        }
        domains.push(DomainKind::parse(domain.trim())?);
        labels.push(label.trim().parse::<u8>()?);
        rows.push(values);
    }
    Ok(FeatureMatrix::new(layout, rows, labels, domains)?)
}
