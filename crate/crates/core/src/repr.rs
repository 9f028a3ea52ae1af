//! Stage one: learn the segmented latent coordinate system.
//!
//! An encoder and a generator are trained jointly on pooled train-domain
//! images with two terms: mean L1 reconstruction `|G(E(x)) - x|` and a
//! latent-consistency penalty `lambda * |E(G(z)) - z|^2`, where `z` is drawn
//! from the aggregated posterior (the encodings of the current pooled
//! minibatch, treated as constants). The trained pair is immutable
//! afterwards and shared read-only by everything downstream.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::domain::DomainDataset;
use crate::error::{CoreError, Result};
use crate::image::{Image32, PIXELS};
use crate::latent::{LatentCode, SegmentLayout};
use crate::linalg::Matrix;
use crate::nn::{optimizer_step, Activation, DenseParams, GradBundle, LossDelta, OptimState};
use crate::rng;

/// Where the consistency term samples its latents from. Only the aggregated
/// posterior of the current minibatch is implemented; the tag exists so
/// configs can state the choice explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConsistencySource {
    #[default]
    MinibatchPosterior,
}

#[derive(Debug, Clone)]
pub struct ReprTrainConfig {
    pub lambda_lat: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub hidden: usize,
    pub seed: u64,
    pub consistency_source: ConsistencySource,
}

impl Default for ReprTrainConfig {
    fn default() -> Self {
        ReprTrainConfig {
            lambda_lat: 0.5,
            epochs: 6,
            batch_size: 128,
            learning_rate: 0.02,
            momentum: 0.9,
            hidden: 512,
            seed: 11,
            consistency_source: ConsistencySource::MinibatchPosterior,
        }
    }
}

impl ReprTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.lambda_lat < 0.0 || !self.lambda_lat.is_finite() {
            return Err(CoreError::Config("lambda_lat must be >= 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(CoreError::Config(
                "epochs, batch size, and hidden width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Trained encoder/generator pair with its segment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Model {
    encoder: DenseParams<f32>,
    generator: DenseParams<f32>,
    layout: SegmentLayout,
}

impl Stage1Model {
    pub fn new(
        encoder: DenseParams<f32>,
        generator: DenseParams<f32>,
        layout: SegmentLayout,
    ) -> Result<Self> {
        if encoder.output_dim() != layout.latent_dim() {
            return Err(CoreError::Config(format!(
                "encoder outputs {} but the layout requires {}",
                encoder.output_dim(),
                layout.latent_dim()
            )));
        }
        if generator.input_dim() != layout.latent_dim() {
            return Err(CoreError::Config(format!(
                "generator consumes {} but the layout requires {}",
                generator.input_dim(),
                layout.latent_dim()
            )));
        }
        if encoder.input_dim() != generator.output_dim() {
            return Err(CoreError::Config(
                "encoder input and generator output widths differ".into(),
            ));
        }
        Ok(Stage1Model {
            encoder,
            generator,
            layout,
        })
    }

    pub fn encoder(&self) -> &DenseParams<f32> {
        &self.encoder
    }

    pub fn generator(&self) -> &DenseParams<f32> {
        &self.generator
    }

    pub fn layout(&self) -> SegmentLayout {
        self.layout
    }

    /// Deterministic encoding of one image.
    pub fn encode(&self, image: &Image32) -> Result<LatentCode> {
        let z = self.encoder.forward(image.pixels())?;
        LatentCode::new(z, self.layout)
    }

    /// Decodes a latent back to an image; the sigmoid output layer keeps
    /// pixels inside `[0,1]`.
    pub fn decode(&self, code: &LatentCode) -> Result<Image32> {
        if code.layout != self.layout {
            return Err(CoreError::Config("latent layout mismatch".into()));
        }
        let px = self.generator.forward(&code.values)?;
        Image32::from_pixels(px)
    }

    /// Batched encoding in input order.
    pub fn encode_all<'a, I>(&self, images: I) -> Result<Vec<LatentCode>>
    where
        I: IntoIterator<Item = &'a Image32>,
    {
        let mut out = Vec::new();
        let mut chunk: Vec<&Image32> = Vec::with_capacity(256);
        let flush = |chunk: &mut Vec<&Image32>, out: &mut Vec<LatentCode>| -> Result<()> {
            if chunk.is_empty() {
                return Ok(());
            }
            let rows: Vec<&[f32]> = chunk.iter().map(|im| im.pixels()).collect();
            let x = Matrix::from_rows(&rows)?;
            let z = self.encoder.forward_batch(&x)?;
            for r in 0..z.rows() {
                out.push(LatentCode::new(z.row(r).to_vec(), self.layout)?);
            }
            chunk.clear();
            Ok(())
        };
        for im in images {
            chunk.push(im);
            if chunk.len() == 256 {
                flush(&mut chunk, &mut out)?;
            }
        }
        flush(&mut chunk, &mut out)?;
        Ok(out)
    }

    /// Encodes a dataset into `(codes, labels)`.
    pub fn encode_dataset(&self, dataset: &DomainDataset) -> Result<(Vec<LatentCode>, Vec<u8>)> {
        let codes = self.encode_all(dataset.samples.iter().map(|s| &s.image))?;
        let labels = dataset.samples.iter().map(|s| s.label).collect();
        Ok((codes, labels))
    }
}

/// Default encoder: pixels -> hidden ReLU -> latent (linear).
pub fn default_encoder(
    layout: SegmentLayout,
    hidden: usize,
    seed: u64,
) -> Result<DenseParams<f32>> {
    DenseParams::seeded(
        &[PIXELS, hidden, layout.latent_dim()],
        &[Activation::Relu, Activation::Identity],
        seed,
    )
}

/// Default generator, mirroring the encoder with a sigmoid pixel output.
pub fn default_generator(
    layout: SegmentLayout,
    hidden: usize,
    seed: u64,
) -> Result<DenseParams<f32>> {
    DenseParams::seeded(
        &[layout.latent_dim(), hidden, PIXELS],
        &[Activation::Relu, Activation::Sigmoid],
        seed,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub reconstruction: f64,
    pub consistency: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Stage1Log {
    pub epochs: Vec<EpochStats>,
    /// How many times the consistency term was evaluated; stays 0 when
    /// `lambda_lat == 0`.
    pub consistency_evals: u64,
}

/// Divergence carries the last finite parameters so callers can checkpoint
/// them before surfacing the error.
#[derive(Debug)]
pub enum Stage1Failure {
    Invalid(CoreError),
    Diverged {
        epoch: usize,
        message: String,
        last_finite: Box<Stage1Model>,
    },
}

impl From<CoreError> for Stage1Failure {
    fn from(e: CoreError) -> Self {
        Stage1Failure::Invalid(e)
    }
}

impl core::fmt::Display for Stage1Failure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Stage1Failure::Invalid(e) => write!(f, "{e}"),
            Stage1Failure::Diverged { epoch, message, .. } => {
                write!(f, "stage-1 training diverged at epoch {epoch}: {message}")
            }
        }
    }
}

impl core::error::Error for Stage1Failure {}

/// Trains the encoder/generator pair on the pooled train-domain images.
/// With equal per-domain counts and uniform mixture weights (the default
/// construction), shuffling the pooled union realizes the training mixture.
pub fn train_stage1(
    datasets: &[DomainDataset],
    layout: SegmentLayout,
    config: &ReprTrainConfig,
) -> core::result::Result<(Stage1Model, Stage1Log), Stage1Failure> {
    config.validate()?;
    if datasets.is_empty() || datasets.iter().any(|d| d.is_empty()) {
        return Err(CoreError::Data("stage-1 needs non-empty train datasets".into()).into());
    }
    let data: Vec<&[f32]> = datasets
        .iter()
        .flat_map(|d| d.samples.iter().map(|s| s.image.pixels()))
        .collect();
    train_stage1_rows(&data, PIXELS, layout, config)
}

/// Training core over raw rows; `width` must equal each row's length.
/// Exposed so small synthetic spaces can exercise the objective directly.
pub fn train_stage1_rows(
    rows: &[&[f32]],
    width: usize,
    layout: SegmentLayout,
    config: &ReprTrainConfig,
) -> core::result::Result<(Stage1Model, Stage1Log), Stage1Failure> {
    config.validate()?;
    if rows.is_empty() {
        return Err(CoreError::Data("no training rows".into()).into());
    }
    let encoder = DenseParams::seeded(
        &[width, config.hidden, layout.latent_dim()],
        &[Activation::Relu, Activation::Identity],
        rng::mix(config.seed, &[0xe2c]),
    )?;
    let generator = DenseParams::seeded(
        &[layout.latent_dim(), config.hidden, width],
        &[Activation::Relu, Activation::Sigmoid],
        rng::mix(config.seed, &[0x9e2]),
    )?;
    let mut model = Stage1Model::new(encoder, generator, layout)?;
    let mut enc_state = OptimState::new(config.learning_rate, config.momentum, &model.encoder)?;
    let mut gen_state = OptimState::new(config.learning_rate, config.momentum, &model.generator)?;
    let mut log = Stage1Log::default();
    let mut last_finite = model.clone();

    let n = rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        let mut r = rng::stream(config.seed, &[0x0e9, epoch as u64]);
        for i in 0..n.saturating_sub(1) {
            let j = i + r.random_range(0..n - i);
            order.swap(i, j);
        }
        let mut epoch_recon = 0.0f64;
        let mut epoch_cycle = 0.0f64;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let slice_rows: Vec<&[f32]> = chunk.iter().map(|&i| rows[i]).collect();
            let x = Matrix::from_rows(&slice_rows)?;
            let step = stage1_step(
                &mut model,
                &x,
                config,
                &mut enc_state,
                &mut gen_state,
                &mut log.consistency_evals,
            );
            let (recon, cycle) = match step {
                Ok(v) => v,
                Err(CoreError::Numeric(m)) => {
                    return Err(Stage1Failure::Diverged {
                        epoch,
                        message: m,
                        last_finite: Box::new(last_finite),
                    });
                }
                Err(e) => return Err(e.into()),
            };
            let total = recon + config.lambda_lat as f64 * cycle;
            if !total.is_finite() {
                return Err(Stage1Failure::Diverged {
                    epoch,
                    message: format!("non-finite loss in batch {batches}"),
                    last_finite: Box::new(last_finite),
                });
            }
            epoch_recon += recon;
            epoch_cycle += cycle;
            batches += 1;
        }
        log.epochs.push(EpochStats {
            reconstruction: epoch_recon / batches as f64,
            consistency: epoch_cycle / batches as f64,
            total: (epoch_recon + config.lambda_lat as f64 * epoch_cycle) / batches as f64,
        });
        last_finite = model.clone();
    }
    Ok((model, log))
}

/// One optimizer step on one minibatch; returns `(recon, cycle)` losses.
fn stage1_step(
    model: &mut Stage1Model,
    x: &Matrix<f32>,
    config: &ReprTrainConfig,
    enc_state: &mut OptimState<f32>,
    gen_state: &mut OptimState<f32>,
    consistency_evals: &mut u64,
) -> Result<(f64, f64)> {
    let b = x.rows();
    let inv_b = 1.0f32 / b as f32;
    let mut enc_grads = GradBundle::zeros_like(&model.encoder, 0.0);
    let mut gen_grads = GradBundle::zeros_like(&model.generator, 0.0);

    // reconstruction: |G(E(x)) - x|, backpropagated through G then E
    let enc_cache = model.encoder.forward_batch_cached(x)?;
    let gen_cache = model.generator.forward_batch_cached(enc_cache.output())?;
    let xhat = gen_cache.output();
    let mut recon_loss = 0.0f64;
    let mut d_xhat = Matrix::zeros(b, xhat.cols());
    for r in 0..b {
        let (xr, hr) = (x.row(r), xhat.row(r));
        let dr = d_xhat.row_mut(r);
        for c in 0..hr.len() {
            let resid = hr[c] - xr[c];
            recon_loss += resid.abs() as f64;
            dr[c] = if resid > 0.0 {
                inv_b
            } else if resid < 0.0 {
                -inv_b
            } else {
                0.0
            };
        }
    }
    recon_loss *= inv_b as f64;
    let dz = model
        .generator
        .backward_batch(
            &gen_cache,
            LossDelta::PostActivation(d_xhat),
            &mut gen_grads,
            true,
        )?
        .expect("input gradient requested");
    model.encoder.backward_batch(
        &enc_cache,
        LossDelta::PostActivation(dz),
        &mut enc_grads,
        false,
    )?;

    // latent consistency: |E(G(z)) - z|^2 with z the detached minibatch
    // posterior; G(z) is exactly the reconstruction already computed.
    let mut cycle_loss = 0.0f64;
    if config.lambda_lat > 0.0 {
        *consistency_evals += 1;
        let z0 = enc_cache.output();
        let cyc_cache = model.encoder.forward_batch_cached(xhat)?;
        let v = cyc_cache.output();
        let mut d_v = Matrix::zeros(b, v.cols());
        let scale = 2.0 * config.lambda_lat * inv_b;
        for r in 0..b {
            let (zr, vr) = (z0.row(r), v.row(r));
            let dr = d_v.row_mut(r);
            for c in 0..vr.len() {
                let resid = vr[c] - zr[c];
                cycle_loss += (resid * resid) as f64;
                dr[c] = scale * resid;
            }
        }
        cycle_loss *= inv_b as f64;
        let d_xhat_cycle = model
            .encoder
            .backward_batch(
                &cyc_cache,
                LossDelta::PostActivation(d_v),
                &mut enc_grads,
                true,
            )?
            .expect("input gradient requested");
        model.generator.backward_batch(
            &gen_cache,
            LossDelta::PostActivation(d_xhat_cycle),
            &mut gen_grads,
            false,
        )?;
    }

    enc_grads.loss = (recon_loss + config.lambda_lat as f64 * cycle_loss) as f32;
    gen_grads.loss = enc_grads.loss;
    optimizer_step(&mut model.encoder, &enc_grads, enc_state)?;
    optimizer_step(&mut model.generator, &gen_grads, gen_state)?;
    Ok((recon_loss, cycle_loss))
}

/// Evaluation-only losses of the stage-1 objective on one batch:
/// `(mean L1 reconstruction, mean squared latent-cycle error)`.
pub fn stage1_losses(model: &Stage1Model, x: &Matrix<f32>) -> Result<(f64, f64)> {
    let z = model.encoder.forward_batch(x)?;
    let xhat = model.generator.forward_batch(&z)?;
    let v = model.encoder.forward_batch(&xhat)?;
    let b = x.rows() as f64;
    let mut recon = 0.0f64;
    for r in 0..x.rows() {
        for (a, h) in x.row(r).iter().zip(xhat.row(r)) {
            recon += (h - a).abs() as f64;
        }
    }
    let mut cycle = 0.0f64;
    for r in 0..x.rows() {
        for (zv, vv) in z.row(r).iter().zip(v.row(r)) {
            let d = vv - zv;
            cycle += (d * d) as f64;
        }
    }
    Ok((recon / b, cycle / b))
}
