//! Synthetic latent structural causal models and the brute-force oracle.
//!
//! Instances declare which latent blocks are causal and which are spurious.
//! Labels are a deterministic function of the causal factors (nearest class
//! prototype), identical across domains; spurious factors agree with the
//! label with a per-domain probability, which is exactly what makes them
//! unstable. Each block is observed through a domain-dependent invertible
//! affine map plus nuisance noise.
//!
//! The module also hosts:
//!
//! * [`DiscreteToyModel`] - fully enumerable models on small alphabets whose
//!   SF/NC/M/PNS/proxy values are computed exactly by summation, used to
//!   validate the Monte-Carlo estimators;
//! * [`theorem1_trial`] - trains a classifier on sampled SCM data, scores
//!   every block, and checks that causal blocks separate from spurious ones
//!   under the cross-domain aggregate;
//! * [`alignment_noncommutation_check`] - demonstrates that segment
//!   interventions commute with coordinate-separable reparameterizations but
//!   not with segment-mixing rotations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// needed for float math in no_std builds; tests compile with std
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::classify::{train_head, ClassifierConfig, Selection};
use crate::error::{CoreError, Result};
use crate::latent::{LatentCode, SegmentLayout};
use crate::rng;
use crate::scoring::{
    score_table, DomainRef, DomainScores, InterventionPool, Predictor, ScoringConfig,
};

const KEY_PROTO: u64 = 0xa11;
const KEY_MIX: u64 = 0xa12;
const KEY_SAMPLE: u64 = 0xa13;
const KEY_TOY: u64 = 0xa14;
const KEY_NC: u64 = 0xa15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockRole {
    Causal,
    Spurious,
}

/// How the per-block observation maps vary with the domain.
///
/// `SharedAcrossDomains` (one random affine per block, equal for every
/// domain) is the default family: it realizes semantic alignment with the
/// per-domain maps chosen equal, and keeps the control arm meaningful - with
/// genuinely domain-dependent maps a classifier can identify the domain from
/// the mixing geometry and sidestep a flipped label rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingMode {
    Identity,
    SharedAcrossDomains,
    PerDomain,
}

/// Invertible affine map on one block, stored with its condition number.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    matrix: Vec<f32>,
    offset: Vec<f32>,
    dim: usize,
    cond: f32,
}

impl Affine {
    pub fn identity(dim: usize) -> Affine {
        let mut matrix = vec![0.0f32; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Affine {
            matrix,
            offset: vec![0.0; dim],
            dim,
            cond: 1.0,
        }
    }

    pub fn condition_number(&self) -> f32 {
        self.cond
    }

    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        let mut out = self.offset.clone();
        for r in 0..self.dim {
            let row = &self.matrix[r * self.dim..(r + 1) * self.dim];
            let mut acc = 0.0f32;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            out[r] += acc;
        }
        out
    }

    /// Random `R1 * diag(scales) * R2 + offset` built from Givens rotations;
    /// the condition number is exactly `max(scale) / min(scale)`.
    fn seeded(dim: usize, scale_range: (f32, f32), seed: u64) -> Affine {
        let mut r = rng::stream(seed, &[KEY_MIX]);
        let scales: Vec<f32> = (0..dim)
            .map(|_| r.random_range(scale_range.0..=scale_range.1))
            .collect();
        let mut matrix = vec![0.0f32; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = scales[i];
        }
        let mut rotate = |matrix: &mut Vec<f32>, left: bool| {
            for a in 0..dim {
                for b in (a + 1)..dim {
                    let theta = r.random_range(0.0..core::f32::consts::TAU);
                    let (s, c) = (theta.sin(), theta.cos());
                    for i in 0..dim {
                        let (pa, pb) = if left {
                            (a * dim + i, b * dim + i)
                        } else {
                            (i * dim + a, i * dim + b)
                        };
                        let (va, vb) = (matrix[pa], matrix[pb]);
                        matrix[pa] = c * va - s * vb;
                        matrix[pb] = s * va + c * vb;
                    }
                }
            }
        };
        rotate(&mut matrix, false);
        rotate(&mut matrix, true);
        let offset: Vec<f32> = (0..dim).map(|_| r.random_range(-0.5..0.5)).collect();
        let cond = scales.iter().cloned().fold(f32::MIN, f32::max)
            / scales.iter().cloned().fold(f32::MAX, f32::min);
        Affine {
            matrix,
            offset,
            dim,
            cond,
        }
    }
}

/// Generative family parameters; `instantiate` realizes them with a seed.
///
/// The default family keeps a single causal block: each causal block's
/// factors alone determine the label, matching the idealization under which
/// the separation result is stated (redundant causal blocks would rescue
/// each other under necessity interventions and blur the contrast).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScmFamilyConfig {
    pub blocks: usize,
    pub block_dim: usize,
    /// The first `causal_blocks` blocks are causal, the rest spurious.
    pub causal_blocks: usize,
    pub class_count: usize,
    pub domains: usize,
    /// Within-class jitter of the causal factors.
    pub jitter: f32,
    /// Within-class jitter of the spurious factors (noisier by default so
    /// spurious shortcuts are strong but imperfect).
    pub spur_jitter: f32,
    /// Nuisance noise added after the mixing.
    pub noise_scale: f32,
    /// Per-domain probability that a spurious block agrees with the label.
    pub spur_agree: Vec<f64>,
    /// Singular-value range of the random mixings; the condition number is
    /// bounded by `max/min` of this range.
    pub mixing_scale_range: (f32, f32),
    pub mixings: MixingMode,
    /// Control arm: permute the label map per domain, breaking the
    /// invariance of `P(Y | causal factors)`.
    pub violate_assumption1: bool,
}

impl Default for ScmFamilyConfig {
    fn default() -> Self {
        ScmFamilyConfig {
            blocks: 4,
            block_dim: 2,
            causal_blocks: 1,
            class_count: 4,
            domains: 3,
            jitter: 0.15,
            spur_jitter: 0.15,
            noise_scale: 0.05,
            spur_agree: vec![0.95, 0.80, 0.65],
            mixing_scale_range: (0.6, 1.8),
            mixings: MixingMode::SharedAcrossDomains,
            violate_assumption1: false,
        }
    }
}

impl ScmFamilyConfig {
    /// The default family with the label rule flipped across domains.
    pub fn assumption1_violating() -> Self {
        ScmFamilyConfig {
            violate_assumption1: true,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.causal_blocks == 0 || self.causal_blocks >= self.blocks {
            return Err(CoreError::Config(
                "causal blocks must be a non-empty proper subset".into(),
            ));
        }
        if self.class_count < 2 || self.domains < 2 {
            return Err(CoreError::Config(
                "need at least 2 classes and 2 domains".into(),
            ));
        }
        if self.spur_agree.len() != self.domains {
            return Err(CoreError::Config(format!(
                "{} spur_agree entries for {} domains",
                self.spur_agree.len(),
                self.domains
            )));
        }
        if self.spur_agree.iter().any(|&a| !(0.5..=1.0).contains(&a)) {
            return Err(CoreError::Config(
                "spurious agreement probabilities must lie in [0.5, 1.0]".into(),
            ));
        }
        if self.mixing_scale_range.0 <= 0.0
            || self.mixing_scale_range.1 < self.mixing_scale_range.0
        {
            return Err(CoreError::Config("bad mixing scale range".into()));
        }
        if self.mixing_scale_range.1 / self.mixing_scale_range.0 > 10.0 {
            return Err(CoreError::Config(
                "mixing condition number bound exceeds 10".into(),
            ));
        }
        Ok(())
    }
}

/// One realized synthetic model.
#[derive(Debug, Clone)]
pub struct ScmInstance {
    config: ScmFamilyConfig,
    layout: SegmentLayout,
    roles: Vec<BlockRole>,
    /// `[block][class]` -> prototype vector of length `block_dim`.
    prototypes: Vec<Vec<Vec<f32>>>,
    /// `[domain][block]`.
    mixings: Vec<Vec<Affine>>,
    /// `[domain][true class]` -> observed label (identity unless the
    /// assumption-1 control arm is active).
    label_maps: Vec<Vec<u8>>,
    seed: u64,
}

/// A sample with its underlying factors, for assumption checks.
#[derive(Debug, Clone)]
pub struct ScmSample {
    pub code: LatentCode,
    pub label: u8,
    pub factors: Vec<f32>,
}

impl ScmInstance {
    pub fn instantiate(config: &ScmFamilyConfig, seed: u64) -> Result<ScmInstance> {
        config.validate()?;
        let layout = SegmentLayout::new(config.blocks, config.block_dim)?;
        let roles: Vec<BlockRole> = (0..config.blocks)
            .map(|k| {
                if k < config.causal_blocks {
                    BlockRole::Causal
                } else {
                    BlockRole::Spurious
                }
            })
            .collect();
        let mut prototypes = Vec::with_capacity(config.blocks);
        for k in 0..config.blocks {
            prototypes.push(seeded_prototypes(
                config.class_count,
                config.block_dim,
                rng::mix(seed, &[KEY_PROTO, k as u64]),
            )?);
        }
        let mixings: Vec<Vec<Affine>> = (0..config.domains)
            .map(|m| {
                (0..config.blocks)
                    .map(|k| match config.mixings {
                        MixingMode::Identity => Affine::identity(config.block_dim),
                        MixingMode::SharedAcrossDomains => Affine::seeded(
                            config.block_dim,
                            config.mixing_scale_range,
                            rng::mix(seed, &[KEY_MIX, k as u64]),
                        ),
                        MixingMode::PerDomain => Affine::seeded(
                            config.block_dim,
                            config.mixing_scale_range,
                            rng::mix(seed, &[KEY_MIX, m as u64, k as u64]),
                        ),
                    })
                    .collect()
            })
            .collect();
        let label_maps: Vec<Vec<u8>> = (0..config.domains)
            .map(|m| {
                (0..config.class_count)
                    .map(|c| {
                        if config.violate_assumption1 {
                            ((c + m) % config.class_count) as u8
                        } else {
                            c as u8
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(ScmInstance {
            config: config.clone(),
            layout,
            roles,
            prototypes,
            mixings,
            label_maps,
            seed,
        })
    }

    pub fn config(&self) -> &ScmFamilyConfig {
        &self.config
    }

    pub fn layout(&self) -> SegmentLayout {
        self.layout
    }

    pub fn roles(&self) -> &[BlockRole] {
        &self.roles
    }

    pub fn causal_blocks(&self) -> Vec<usize> {
        (0..self.config.causal_blocks).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_mixing_condition(&self) -> f32 {
        self.mixings
            .iter()
            .flatten()
            .map(|a| a.condition_number())
            .fold(1.0, f32::max)
    }

    /// The deterministic label rule: nearest joint causal prototype.
    fn label_rule(&self, causal_factors: &[Vec<f32>]) -> usize {
        let mut best = 0usize;
        let mut best_d = f32::MAX;
        for c in 0..self.config.class_count {
            let mut d = 0.0f32;
            for (k, f) in causal_factors.iter().enumerate() {
                for (a, b) in f.iter().zip(&self.prototypes[k][c]) {
                    d += (a - b) * (a - b);
                }
            }
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    /// Draws `n` samples from one domain, keeping the underlying factors.
    pub fn sample_with_factors(
        &self,
        domain: usize,
        n: usize,
        seed: u64,
    ) -> Result<Vec<ScmSample>> {
        if domain >= self.config.domains {
            return Err(CoreError::Config(format!(
                "domain {domain} out of range for {} domains",
                self.config.domains
            )));
        }
        if n == 0 {
            return Err(CoreError::Domain("need n >= 1 samples".into()));
        }
        let cfg = &self.config;
        let normal = Normal::new(0.0f32, 1.0).expect("unit normal");
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = rng::stream(seed, &[KEY_SAMPLE, domain as u64, i as u64]);
            let class = r.random_range(0..cfg.class_count);
            // causal factors first, then the label through the rule
            let mut factors: Vec<Vec<f32>> = Vec::with_capacity(cfg.blocks);
            for k in 0..cfg.causal_blocks {
                let proto = &self.prototypes[k][class];
                factors.push(
                    proto
                        .iter()
                        .map(|p| p + cfg.jitter * normal.sample(&mut r))
                        .collect(),
                );
            }
            let y_true = self.label_rule(&factors);
            let label = self.label_maps[domain][y_true];
            // spurious factors correlate with the observed label per domain
            for k in cfg.causal_blocks..cfg.blocks {
                let agree = r.random_range(0.0..1.0f64) < cfg.spur_agree[domain];
                let spur_class = if agree {
                    label as usize
                } else {
                    let mut c = r.random_range(0..cfg.class_count - 1);
                    if c >= label as usize {
                        c += 1;
                    }
                    c
                };
                let proto = &self.prototypes[k][spur_class];
                factors.push(
                    proto
                        .iter()
                        .map(|p| p + cfg.spur_jitter * normal.sample(&mut r))
                        .collect(),
                );
            }
            // observe each block through its domain mixing plus noise
            let mut values = Vec::with_capacity(self.layout.latent_dim());
            let mut flat_factors = Vec::with_capacity(self.layout.latent_dim());
            for (k, f) in factors.iter().enumerate() {
                let mixed = self.mixings[domain][k].apply(f);
                values.extend(
                    mixed
                        .iter()
                        .map(|v| v + cfg.noise_scale * normal.sample(&mut r)),
                );
                flat_factors.extend_from_slice(f);
            }
            out.push(ScmSample {
                code: LatentCode::new(values, self.layout)?,
                label,
                factors: flat_factors,
            });
        }
        Ok(out)
    }

    /// Draws `n` `(code, label)` pairs from one domain.
    pub fn sample_scm(&self, domain: usize, n: usize, seed: u64) -> Result<Vec<(LatentCode, u8)>> {
        Ok(self
            .sample_with_factors(domain, n, seed)?
            .into_iter()
            .map(|s| (s.code, s.label))
            .collect())
    }
}

/// Well-separated class prototypes: evenly spaced on a seeded-rotation ring
/// in the first two dimensions (a line for one-dimensional blocks), with
/// small seeded offsets on any remaining coordinates.
fn seeded_prototypes(classes: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f32>>> {
    let mut r = rng::stream(seed, &[0]);
    let radius = 1.2f32;
    let phase: f32 = r.random_range(0.0..core::f32::consts::TAU);
    let mut protos = Vec::with_capacity(classes);
    for c in 0..classes {
        let mut p = vec![0.0f32; dim];
        if dim == 1 {
            p[0] = -radius + 2.0 * radius * c as f32 / (classes - 1).max(1) as f32;
        } else {
            let theta = phase + core::f32::consts::TAU * c as f32 / classes as f32;
            p[0] = radius * theta.cos();
            p[1] = radius * theta.sin();
            for coord in p.iter_mut().skip(2) {
                *coord = r.random_range(-0.3..0.3);
            }
        }
        protos.push(p);
    }
    Ok(protos)
}

/// Empirical checks that a realized instance satisfies the assumptions it
/// was built for.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Max over causal bins and domain pairs of the label-distribution gap;
    /// 0 for a deterministic invariant label rule.
    pub causal_invariance_gap: f64,
    /// Per-domain empirical spurious agreement rates.
    pub spur_agreement: Vec<f64>,
    /// Spread (max - min) of the agreement rates across domains.
    pub spur_spread: f64,
    /// Smallest per-coordinate variance over all latent segments.
    pub min_segment_variance: f64,
}

pub fn verify_assumptions(
    instance: &ScmInstance,
    per_domain: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    let cfg = instance.config();
    let mut per_domain_samples = Vec::new();
    for m in 0..cfg.domains {
        per_domain_samples.push(instance.sample_with_factors(
            m,
            per_domain,
            rng::mix(seed, &[KEY_NC, m as u64]),
        )?);
    }
    let d = cfg.block_dim;

    // Assumption 1: P(label | causal bin) identical across domains.
    // Bin = nearest joint causal prototype of the underlying factors.
    let bins = cfg.class_count;
    let mut tables = vec![vec![vec![0usize; cfg.class_count]; bins]; cfg.domains];
    for (m, samples) in per_domain_samples.iter().enumerate() {
        for s in samples {
            let causal: Vec<Vec<f32>> = (0..cfg.causal_blocks)
                .map(|k| s.factors[k * d..(k + 1) * d].to_vec())
                .collect();
            let bin = instance.label_rule(&causal);
            tables[m][bin][s.label as usize] += 1;
        }
    }
    let mut gap = 0.0f64;
    for bin in 0..bins {
        for a in 0..cfg.domains {
            for b in (a + 1)..cfg.domains {
                let (na, nb) = (
                    tables[a][bin].iter().sum::<usize>(),
                    tables[b][bin].iter().sum::<usize>(),
                );
                if na == 0 || nb == 0 {
                    continue;
                }
                for y in 0..cfg.class_count {
                    let pa = tables[a][bin][y] as f64 / na as f64;
                    let pb = tables[b][bin][y] as f64 / nb as f64;
                    gap = gap.max((pa - pb).abs());
                }
            }
        }
    }

    // Assumption 2: empirical spurious agreement differs across domains.
    let mut agreement = Vec::with_capacity(cfg.domains);
    for samples in &per_domain_samples {
        let mut agree = 0usize;
        let mut total = 0usize;
        for s in samples {
            for k in cfg.causal_blocks..cfg.blocks {
                let f = &s.factors[k * d..(k + 1) * d];
                let mut best = 0usize;
                let mut best_d = f32::MAX;
                for c in 0..cfg.class_count {
                    let dist: f32 = f
                        .iter()
                        .zip(&instance.prototypes[k][c])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    if dist < best_d {
                        best_d = dist;
                        best = c;
                    }
                }
                if best == s.label as usize {
                    agree += 1;
                }
                total += 1;
            }
        }
        agreement.push(agree as f64 / total as f64);
    }
    let spread = agreement.iter().cloned().fold(f64::MIN, f64::max)
        - agreement.iter().cloned().fold(f64::MAX, f64::min);

    // Assumption 3 (non-degeneracy): every latent coordinate varies.
    let latent_dim = instance.layout().latent_dim();
    let mut min_var = f64::MAX;
    for c in 0..latent_dim {
        let mut mean = 0.0f64;
        let mut count = 0usize;
        for samples in &per_domain_samples {
            for s in samples {
                mean += s.code.values[c] as f64;
                count += 1;
            }
        }
        mean /= count as f64;
        let mut var = 0.0f64;
        for samples in &per_domain_samples {
            for s in samples {
                let dv = s.code.values[c] as f64 - mean;
                var += dv * dv;
            }
        }
        min_var = min_var.min(var / count as f64);
    }

    Ok(AssumptionReport {
        causal_invariance_gap: gap,
        spur_agreement: agreement,
        spur_spread: spread,
        min_segment_variance: min_var,
    })
}

// ---------------------------------------------------------------------------
// Discrete toy models and the exact oracle
// ---------------------------------------------------------------------------

const MAX_TOY_STATES: usize = 1_000_000;

/// A fully enumerable model: each segment takes values in a small alphabet,
/// the classifier and the label are explicit tables over joint states, and
/// each domain has an explicit probability table.
#[derive(Debug, Clone)]
pub struct DiscreteToyModel {
    /// Alphabet size per segment.
    pub alphabet: Vec<usize>,
    pub class_count: usize,
    /// True label per joint state.
    pub label_of_state: Vec<u8>,
    /// Classifier output per joint state.
    pub classifier_of_state: Vec<usize>,
    /// `[domain][state]` probabilities, each summing to 1.
    pub dist: Vec<Vec<f64>>,
}

impl DiscreteToyModel {
    pub fn new(
        alphabet: Vec<usize>,
        class_count: usize,
        label_of_state: Vec<u8>,
        classifier_of_state: Vec<usize>,
        dist: Vec<Vec<f64>>,
    ) -> Result<DiscreteToyModel> {
        if alphabet.len() < 2 || alphabet.iter().any(|&a| a == 0) {
            return Err(CoreError::Config(
                "toy model needs >= 2 segments with non-empty alphabets".into(),
            ));
        }
        let states = alphabet.iter().try_fold(1usize, |acc, &a| {
            let next = acc.checked_mul(a)?;
            (next <= MAX_TOY_STATES).then_some(next)
        });
        let states = states.ok_or_else(|| {
            CoreError::Config(format!("toy state space exceeds {MAX_TOY_STATES}"))
        })?;
        if label_of_state.len() != states || classifier_of_state.len() != states {
            return Err(CoreError::Shape(format!(
                "label/classifier tables must cover {states} states"
            )));
        }
        if dist.is_empty() {
            return Err(CoreError::Config("toy model needs >= 1 domain".into()));
        }
        for (m, p) in dist.iter().enumerate() {
            if p.len() != states {
                return Err(CoreError::Shape(format!(
                    "domain {m} table covers {} of {states} states",
                    p.len()
                )));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&x| x < 0.0) {
                return Err(CoreError::Domain(format!(
                    "domain {m} probabilities sum to {sum}"
                )));
            }
        }
        Ok(DiscreteToyModel {
            alphabet,
            class_count,
            label_of_state,
            classifier_of_state,
            dist,
        })
    }

    pub fn state_count(&self) -> usize {
        self.alphabet.iter().product()
    }

    pub fn segments(&self) -> usize {
        self.alphabet.len()
    }

    pub fn layout(&self) -> SegmentLayout {
        SegmentLayout::new(self.segments(), 1).expect(">= 2 segments by construction")
    }

    /// Mixed-radix decomposition of a state index into segment values.
    pub fn decompose(&self, mut state: usize) -> Vec<usize> {
        let mut vals = vec![0usize; self.segments()];
        for (k, &a) in self.alphabet.iter().enumerate().rev() {
            vals[k] = state % a;
            state /= a;
        }
        vals
    }

    pub fn compose(&self, values: &[usize]) -> usize {
        let mut state = 0usize;
        for (k, &a) in self.alphabet.iter().enumerate() {
            state = state * a + values[k];
        }
        state
    }

    /// Embeds a state as a latent code (one coordinate per segment).
    pub fn code_of_state(&self, state: usize) -> LatentCode {
        let values: Vec<f32> = self.decompose(state).iter().map(|&v| v as f32).collect();
        LatentCode::new(values, self.layout()).expect("valid by construction")
    }

    fn state_of_code(&self, code: &[f32]) -> usize {
        let values: Vec<usize> = code
            .iter()
            .zip(&self.alphabet)
            .map(|(&c, &a)| (c.round().max(0.0) as usize).min(a - 1))
            .collect();
        self.compose(&values)
    }

    /// Inverse-CDF sampling of `(code, label)` pairs from one domain.
    pub fn sample(&self, domain: usize, n: usize, seed: u64) -> Result<Vec<(LatentCode, u8)>> {
        let p = self
            .dist
            .get(domain)
            .ok_or_else(|| CoreError::Config(format!("toy domain {domain} out of range")))?;
        let mut cdf = Vec::with_capacity(p.len());
        let mut acc = 0.0f64;
        for &x in p {
            acc += x;
            cdf.push(acc);
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = rng::stream(seed, &[KEY_TOY, domain as u64, i as u64]);
            let u: f64 = r.random_range(0.0..1.0);
            let state = cdf.partition_point(|&c| c <= u).min(p.len() - 1);
            out.push((self.code_of_state(state), self.label_of_state[state]));
        }
        Ok(out)
    }

    /// Donor codes per domain whose composition matches each domain's state
    /// distribution as closely as integer counts allow (largest remainder),
    /// so pool draws realize the aggregated posterior without sampling bias.
    pub fn exact_pool_codes(&self, per_domain: usize) -> Vec<Vec<LatentCode>> {
        self.dist
            .iter()
            .map(|p| {
                let mut counts: Vec<usize> =
                    p.iter().map(|&x| (x * per_domain as f64) as usize).collect();
                let mut rema: Vec<(usize, f64)> = p
                    .iter()
                    .enumerate()
                    .map(|(s, &x)| (s, x * per_domain as f64 - counts[s] as f64))
                    .collect();
                rema.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
                let mut deficit = per_domain - counts.iter().sum::<usize>();
                for (s, _) in rema {
                    if deficit == 0 {
                        break;
                    }
                    counts[s] += 1;
                    deficit -= 1;
                }
                let mut codes = Vec::with_capacity(per_domain);
                for (s, &c) in counts.iter().enumerate() {
                    for _ in 0..c {
                        codes.push(self.code_of_state(s));
                    }
                }
                codes
            })
            .collect()
    }
}

/// Classifier-table predictor over toy latents.
pub struct ToyPredictor<'a> {
    pub model: &'a DiscreteToyModel,
}

impl Predictor for ToyPredictor<'_> {
    fn class_count(&self) -> usize {
        self.model.class_count
    }

    fn predict_code(&self, code: &[f32]) -> Result<usize> {
        Ok(self.model.classifier_of_state[self.model.state_of_code(code)])
    }
}

/// Exact per-domain scores plus the pairwise proxy for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSegmentScores {
    pub per_domain: Vec<DomainScores>,
    pub proxy: f64,
}

/// Exact expectations by full enumeration: every `(sample state,
/// replacement)` pair is weighted by its probability. Replacements come
/// from the pooled (across-domain average) marginals, mirroring the
/// Monte-Carlo reference pools.
pub fn brute_force_scores(toy: &DiscreteToyModel, k: usize) -> Result<ExactSegmentScores> {
    let states = toy.state_count();
    let segments = toy.segments();
    if k >= segments {
        return Err(CoreError::Config(format!("segment {k} out of range")));
    }
    let m_domains = toy.dist.len();

    // pooled marginal over segment k values
    let ak = toy.alphabet[k];
    let mut q_seg = vec![0.0f64; ak];
    // pooled marginal over complement tuples, indexed by complement rank
    let comp_states: usize = (0..segments)
        .filter(|&j| j != k)
        .map(|j| toy.alphabet[j])
        .product();
    let mut q_comp = vec![0.0f64; comp_states];
    let comp_rank = |vals: &[usize]| -> usize {
        let mut rank = 0usize;
        for j in 0..segments {
            if j == k {
                continue;
            }
            rank = rank * toy.alphabet[j] + vals[j];
        }
        rank
    };
    for s in 0..states {
        let vals = toy.decompose(s);
        let pooled: f64 = (0..m_domains).map(|m| toy.dist[m][s]).sum::<f64>() / m_domains as f64;
        q_seg[vals[k]] += pooled;
        q_comp[comp_rank(&vals)] += pooled;
    }
    // enumerate complement tuples once for reuse
    let mut comp_tuples: Vec<Vec<usize>> = Vec::with_capacity(comp_states);
    {
        let radices: Vec<usize> = (0..segments)
            .filter(|&j| j != k)
            .map(|j| toy.alphabet[j])
            .collect();
        let mut cur = vec![0usize; radices.len()];
        loop {
            comp_tuples.push(cur.clone());
            let mut pos = radices.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                cur[pos] += 1;
                if cur[pos] < radices[pos] {
                    break;
                }
                cur[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX || comp_tuples.len() == comp_states {
                if comp_tuples.len() == comp_states {
                    break;
                }
            }
        }
    }

    let mut per_domain = Vec::with_capacity(m_domains);
    let mut flips = Vec::with_capacity(m_domains);
    for m in 0..m_domains {
        let mut sf = 0.0f64;
        let mut nc = 0.0f64;
        let mut agree = 0.0f64;
        let mut pns = 0.0f64;
        let mut flip = 0.0f64;
        for s in 0..states {
            let ps = toy.dist[m][s];
            if ps == 0.0 {
                continue;
            }
            let vals = toy.decompose(s);
            let y = toy.label_of_state[s] as usize;
            let yhat = toy.classifier_of_state[s];

            // necessity: replace segment k by v ~ Q_k
            let mut p_nec_correct = 0.0f64;
            let mut p_nec_agree = 0.0f64;
            for (v, &qv) in q_seg.iter().enumerate() {
                if qv == 0.0 {
                    continue;
                }
                let mut w = vals.clone();
                w[k] = v;
                let pred = toy.classifier_of_state[toy.compose(&w)];
                if pred == y {
                    p_nec_correct += qv;
                }
                if pred == yhat {
                    p_nec_agree += qv;
                }
            }
            // sufficiency: replace the complement by a pooled donor tuple
            let mut p_suf_correct = 0.0f64;
            for (rank, tuple) in comp_tuples.iter().enumerate() {
                let qc = q_comp[rank];
                if qc == 0.0 {
                    continue;
                }
                let mut w = vec![0usize; segments];
                let mut t = 0usize;
                for j in 0..segments {
                    if j == k {
                        w[j] = vals[k];
                    } else {
                        w[j] = tuple[t];
                        t += 1;
                    }
                }
                if toy.classifier_of_state[toy.compose(&w)] == y {
                    p_suf_correct += qc;
                }
            }
            sf += ps * (1.0 - p_suf_correct);
            nc += ps * p_nec_correct;
            agree += ps * p_nec_agree;
            flip += ps * (1.0 - p_nec_agree);
            if yhat == y {
                // the two interventions are independent draws
                pns += ps * (1.0 - p_nec_correct) * p_suf_correct;
            }
        }
        per_domain.push(DomainScores {
            sufficiency_failure: sf,
            retained_correctness: nc,
            agreement: agree,
            pns,
        });
        flips.push(flip);
    }
    // mean over ordered pairs; the per-pair value only depends on the source
    let mut proxy = 0.0f64;
    for i in 0..m_domains {
        for j in 0..m_domains {
            if i != j {
                proxy += flips[i];
            }
        }
    }
    let pairs = (m_domains * (m_domains - 1)).max(1);
    Ok(ExactSegmentScores {
        per_domain,
        proxy: proxy / pairs as f64,
    })
}

// ---------------------------------------------------------------------------
// Theorem-1 trials
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Theorem1Config {
    pub family: ScmFamilyConfig,
    pub train_per_domain: usize,
    pub eval_per_domain: usize,
    pub score_per_domain: usize,
    pub classifier: ClassifierConfig,
    pub scoring: ScoringConfig,
    /// Trials whose classifier misses this in-distribution accuracy are
    /// reported as invalid and excluded from the separation rate.
    pub min_train_accuracy: f64,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        let family = ScmFamilyConfig::default();
        Theorem1Config {
            classifier: ClassifierConfig {
                hidden: 64,
                epochs: 50,
                batch_size: 64,
                learning_rate: 0.1,
                momentum: 0.9,
                class_count: family.class_count,
                seed: 0,
            },
            scoring: ScoringConfig {
                draws_r: 4,
                samples_n: 400,
                lambda_m: 1.0,
                seed: 0,
            },
            family,
            train_per_domain: 2000,
            eval_per_domain: 400,
            score_per_domain: 400,
            min_train_accuracy: 0.99,
        }
    }
}

impl Theorem1Config {
    /// The control arm: same sizes, label rule flipped across domains, and
    /// a relaxed accuracy gate (the pooled task is no longer cleanly
    /// solvable from causal factors alone).
    pub fn control_arm() -> Self {
        Theorem1Config {
            family: ScmFamilyConfig::assumption1_violating(),
            min_train_accuracy: 0.5,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub id_accuracy: f64,
    pub valid: bool,
    pub roles: Vec<BlockRole>,
    pub block_scores: Vec<f64>,
    pub causal_min: f64,
    pub spurious_max: f64,
    pub separated: bool,
}

/// One full trial: instantiate, sample, train to convergence, score every
/// block, and test the separation `min(causal) > max(spurious)`.
pub fn theorem1_trial(config: &Theorem1Config, seed: u64) -> Result<TrialResult> {
    let instance = ScmInstance::instantiate(&config.family, rng::mix(seed, &[1]))?;
    let m_domains = config.family.domains;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for m in 0..m_domains {
        for (code, label) in
            instance.sample_scm(m, config.train_per_domain, rng::mix(seed, &[2, m as u64]))?
        {
            rows.push(code.values);
            labels.push(label);
        }
    }
    let mut cls_cfg = config.classifier.clone();
    cls_cfg.seed = rng::mix(seed, &[3]);
    cls_cfg.class_count = config.family.class_count;
    let head = train_head(&rows, &labels, Selection::Full(instance.layout()), &cls_cfg)?;

    // in-distribution accuracy on fresh samples
    let mut correct = 0usize;
    let mut total = 0usize;
    for m in 0..m_domains {
        for (code, label) in
            instance.sample_scm(m, config.eval_per_domain, rng::mix(seed, &[4, m as u64]))?
        {
            if head.predict(&code.values)? == label as usize {
                correct += 1;
            }
            total += 1;
        }
    }
    let id_accuracy = correct as f64 / total as f64;
    let valid = id_accuracy >= config.min_train_accuracy;

    // fresh scoring samples; pools draw from the same material
    let domain_names: Vec<String> = (0..m_domains).map(|m| format!("scm-{m}")).collect();
    let mut domains: Vec<(DomainRef<'_>, Vec<LatentCode>, Vec<u8>)> = Vec::new();
    for m in 0..m_domains {
        let samples =
            instance.sample_scm(m, config.score_per_domain, rng::mix(seed, &[5, m as u64]))?;
        let (codes, ls): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
        domains.push((
            DomainRef {
                key: m as u64,
                name: &domain_names[m],
            },
            codes,
            ls,
        ));
    }
    let pool_view: Vec<(DomainRef<'_>, &[LatentCode])> = domains
        .iter()
        .map(|(d, codes, _)| (*d, codes.as_slice()))
        .collect();
    let mut scoring = config.scoring.clone();
    scoring.seed = rng::mix(seed, &[6]);
    scoring.samples_n = config.score_per_domain;
    let pool = InterventionPool::from_codes(&pool_view, scoring.seed)?;
    let table = score_table(&head, &domains, &pool, &scoring)?;

    let block_scores: Vec<f64> = table.segments.iter().map(|s| s.pns_cross).collect();
    let causal_min = instance
        .roles()
        .iter()
        .zip(&block_scores)
        .filter(|(r, _)| **r == BlockRole::Causal)
        .map(|(_, &s)| s)
        .fold(f64::MAX, f64::min);
    let spurious_max = instance
        .roles()
        .iter()
        .zip(&block_scores)
        .filter(|(r, _)| **r == BlockRole::Spurious)
        .map(|(_, &s)| s)
        .fold(f64::MIN, f64::max);
    Ok(TrialResult {
        seed,
        id_accuracy,
        valid,
        roles: instance.roles().to_vec(),
        block_scores,
        causal_min,
        spurious_max,
        separated: causal_min > spurious_max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Theorem1Batch {
    pub trials: Vec<TrialResult>,
    pub valid_trials: usize,
    pub separated_trials: usize,
    /// Separation rate over valid trials.
    pub separation_rate: f64,
}

/// Runs `n_trials` independent seeded trials.
pub fn theorem1_batch(config: &Theorem1Config, n_trials: usize, base_seed: u64) -> Result<Theorem1Batch> {
    let mut trials = Vec::with_capacity(n_trials);
    for t in 0..n_trials {
        trials.push(theorem1_trial(config, rng::mix(base_seed, &[0x7e0, t as u64]))?);
    }
    let valid_trials = trials.iter().filter(|t| t.valid).count();
    let separated_trials = trials.iter().filter(|t| t.valid && t.separated).count();
    let separation_rate = if valid_trials == 0 {
        0.0
    } else {
        separated_trials as f64 / valid_trials as f64
    };
    Ok(Theorem1Batch {
        trials,
        valid_trials,
        separated_trials,
        separation_rate,
    })
}

// ---------------------------------------------------------------------------
// Reparameterization non-commutation demo
// ---------------------------------------------------------------------------

/// An invertible map of the full latent space.
#[derive(Debug, Clone, PartialEq)]
pub enum BijectionSpec {
    Identity,
    /// Per-coordinate scaling; every factor must be non-zero.
    CoordScale(Vec<f32>),
    /// Plane rotation applied to matching coordinates of two segments.
    SegmentRotation {
        seg_a: usize,
        seg_b: usize,
        degrees: f32,
    },
}

impl BijectionSpec {
    fn validate(&self, layout: SegmentLayout) -> Result<()> {
        match self {
            BijectionSpec::Identity => Ok(()),
            BijectionSpec::CoordScale(scales) => {
                if scales.len() != layout.latent_dim() {
                    return Err(CoreError::Config(format!(
                        "{} scales for latent dimension {}",
                        scales.len(),
                        layout.latent_dim()
                    )));
                }
                if scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
                    return Err(CoreError::Config(
                        "coordinate scaling must be invertible (non-zero, finite)".into(),
                    ));
                }
                Ok(())
            }
            BijectionSpec::SegmentRotation { seg_a, seg_b, .. } => {
                layout.range(*seg_a)?;
                layout.range(*seg_b)?;
                if seg_a == seg_b {
                    return Err(CoreError::Config(
                        "rotation must mix two distinct segments".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn apply(&self, layout: SegmentLayout, code: &[f32]) -> Vec<f32> {
        match self {
            BijectionSpec::Identity => code.to_vec(),
            BijectionSpec::CoordScale(scales) => {
                code.iter().zip(scales).map(|(&v, &s)| v * s).collect()
            }
            BijectionSpec::SegmentRotation {
                seg_a,
                seg_b,
                degrees,
            } => {
                let mut out = code.to_vec();
                let (sin, cos) = degrees.to_radians().sin_cos();
                let d = layout.segment_dim();
                for i in 0..d {
                    let ia = seg_a * d + i;
                    let ib = seg_b * d + i;
                    let (va, vb) = (code[ia], code[ib]);
                    out[ia] = cos * va - sin * vb;
                    out[ib] = sin * va + cos * vb;
                }
                out
            }
        }
    }
}

/// Maximum discrepancy between reparameterizing after versus before a
/// segment intervention, over sampled `(code, donor)` pairs with coupled
/// replacements: `phi(I_k(z, w_k))` versus `I_k(phi(z), phi(w)_k)`.
/// Coordinate-separable maps give 0; segment-mixing rotations do not.
pub fn alignment_noncommutation_check(
    spec: &BijectionSpec,
    layout: SegmentLayout,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    spec.validate(layout)?;
    layout.range(k)?;
    if n_samples == 0 {
        return Err(CoreError::Domain("need at least one sample".into()));
    }
    let normal = Normal::new(0.0f32, 1.0).expect("unit normal");
    let dim = layout.latent_dim();
    let mut max_disc = 0.0f64;
    for i in 0..n_samples {
        let mut r = rng::stream(seed, &[0xa1b, i as u64]);
        let z: Vec<f32> = (0..dim).map(|_| normal.sample(&mut r)).collect();
        let w: Vec<f32> = (0..dim).map(|_| normal.sample(&mut r)).collect();
        let z_code = LatentCode::new(z.clone(), layout)?;
        let w_code = LatentCode::new(w.clone(), layout)?;

        // route 1: intervene in the original coordinates, then map
        let intervened = z_code.with_segment(k, w_code.segment(k)?)?;
        let route1 = spec.apply(layout, &intervened.values);

        // route 2: map, then intervene with the coupled replacement
        let phi_z = LatentCode::new(spec.apply(layout, &z), layout)?;
        let phi_w = LatentCode::new(spec.apply(layout, &w), layout)?;
        let route2 = phi_z.with_segment(k, phi_w.segment(k)?)?.values;

        let disc: f64 = route1
            .iter()
            .zip(&route2)
            .map(|(a, b)| {
                let d = (a - b) as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        max_disc = max_disc.max(disc);
    }
    Ok(max_disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::score_segment_domain;

    fn uniform_dist(states: usize, domains: usize) -> Vec<Vec<f64>> {
        vec![vec![1.0 / states as f64; states]; domains]
    }

    /// Segment 0 carries the label; the classifier reads it.
    fn toy_reads_segment0(classes: usize, junk: usize) -> DiscreteToyModel {
        let alphabet = vec![classes, junk];
        let states = classes * junk;
        let mut label = Vec::with_capacity(states);
        let mut cls = Vec::with_capacity(states);
        for s in 0..states {
            let v0 = s / junk;
            label.push(v0 as u8);
            cls.push(v0);
        }
        DiscreteToyModel::new(alphabet, classes, label, cls, uniform_dist(states, 2)).unwrap()
    }

    #[test]
    fn brute_force_reads_only_segment_closed_form() {
        let toy = toy_reads_segment0(4, 3);
        let exact = brute_force_scores(&toy, 0).unwrap();
        for d in &exact.per_domain {
            assert!((d.sufficiency_failure - 0.0).abs() < 1e-12);
            // uniform marginal: retained correctness = sum q^2 = 1/4
            assert!((d.retained_correctness - 0.25).abs() < 1e-12);
            assert!((d.pns - (1.0 - 0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_ignored_segment() {
        let toy = toy_reads_segment0(4, 3);
        let exact = brute_force_scores(&toy, 1).unwrap();
        for d in &exact.per_domain {
            // classifier is always correct and never reads segment 1
            assert_eq!(d.retained_correctness, 1.0);
            assert_eq!(d.agreement, 1.0);
            assert_eq!(d.pns, 0.0);
        }
        assert_eq!(exact.proxy, 0.0);
    }

    #[test]
    fn brute_force_symmetric_xor_toy() {
        // label = classifier = s0 XOR s1 under the uniform distribution;
        // destroying either segment flips the parity half the time and so
        // does randomizing the complement: SF(k) = NC(k) = 1/2.
        let alphabet = vec![2usize, 2];
        let states = 4;
        let mut label = Vec::new();
        let mut cls = Vec::new();
        for s in 0..states {
            let v0 = s / 2;
            let v1 = s % 2;
            label.push(((v0 + v1) % 2) as u8);
            cls.push((v0 + v1) % 2);
        }
        let toy =
            DiscreteToyModel::new(alphabet, 2, label, cls, uniform_dist(states, 2)).unwrap();
        for k in 0..2 {
            let exact = brute_force_scores(&toy, k).unwrap();
            for d in &exact.per_domain {
                assert!((d.sufficiency_failure - d.retained_correctness).abs() < 1e-12);
                assert!((d.sufficiency_failure - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_matches_brute_force_on_biased_toy() {
        // two domains with different biases over the junk segment
        let classes = 3usize;
        let junk = 4usize;
        let states = classes * junk;
        let mut label = Vec::new();
        let mut cls = Vec::new();
        for s in 0..states {
            let v0 = s / junk;
            label.push(v0 as u8);
            cls.push(v0);
        }
        let mut d0 = vec![0.0f64; states];
        let mut d1 = vec![0.0f64; states];
        for s in 0..states {
            let v1 = s % junk;
            d0[s] = (1.0 + v1 as f64) / (classes as f64 * 10.0);
            d1[s] = (4.0 - v1 as f64) / (classes as f64 * 10.0);
        }
        let toy =
            DiscreteToyModel::new(vec![classes, junk], classes, label, cls, vec![d0, d1]).unwrap();
        let head = ToyPredictor { model: &toy };
        let pool_codes = toy.exact_pool_codes(2000);
        let pool_refs: Vec<(DomainRef<'_>, &[LatentCode])> = pool_codes
            .iter()
            .enumerate()
            .map(|(m, codes)| {
                (
                    DomainRef {
                        key: m as u64,
                        name: "toy",
                    },
                    codes.as_slice(),
                )
            })
            .collect();
        let pool = InterventionPool::from_codes(&pool_refs, 1).unwrap();
        let cfg = ScoringConfig {
            draws_r: 1,
            samples_n: 4000,
            lambda_m: 1.0,
            seed: 99,
        };
        for m in 0..2 {
            let samples = toy.sample(m, 4000, 7 + m as u64).unwrap();
            let (codes, labels): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
            let dom = DomainRef {
                key: m as u64,
                name: "toy",
            };
            for k in 0..2 {
                let mc =
                    score_segment_domain(&head, &codes, &labels, k, dom, &pool, &cfg).unwrap();
                let exact = brute_force_scores(&toy, k).unwrap().per_domain[m];
                assert!(
                    (mc.sufficiency_failure - exact.sufficiency_failure).abs() < 0.03,
                    "sf {} vs {}",
                    mc.sufficiency_failure,
                    exact.sufficiency_failure
                );
                assert!(
                    (mc.retained_correctness - exact.retained_correctness).abs() < 0.03,
                    "nc {} vs {}",
                    mc.retained_correctness,
                    exact.retained_correctness
                );
                assert!((mc.agreement - exact.agreement).abs() < 0.03);
                assert!((mc.pns - exact.pns).abs() < 0.03);
            }
        }
    }

    #[test]
    fn identity_mixing_zero_noise_exposes_factors() {
        let cfg = ScmFamilyConfig {
            mixings: MixingMode::Identity,
            noise_scale: 0.0,
            ..Default::default()
        };
        let inst = ScmInstance::instantiate(&cfg, 3).unwrap();
        let samples = inst.sample_with_factors(1, 20, 9).unwrap();
        for s in samples {
            assert_eq!(s.code.values, s.factors);
        }
    }

    #[test]
    fn assumptions_hold_on_default_family() {
        let inst = ScmInstance::instantiate(&ScmFamilyConfig::default(), 11).unwrap();
        let report = verify_assumptions(&inst, 1500, 5).unwrap();
        assert!(
            report.causal_invariance_gap < 0.05,
            "gap {}",
            report.causal_invariance_gap
        );
        assert!(report.spur_spread > 0.2, "spread {}", report.spur_spread);
        assert!(report.min_segment_variance > 1e-6);
        assert!(inst.max_mixing_condition() <= 10.0);
    }

    #[test]
    fn control_arm_breaks_causal_invariance() {
        let inst =
            ScmInstance::instantiate(&ScmFamilyConfig::assumption1_violating(), 11).unwrap();
        let report = verify_assumptions(&inst, 1500, 5).unwrap();
        assert!(
            report.causal_invariance_gap > 0.5,
            "gap {}",
            report.causal_invariance_gap
        );
    }

    #[test]
    fn single_theorem1_trial_separates_on_default_family() {
        let cfg = Theorem1Config::default();
        let trial = theorem1_trial(&cfg, 424242).unwrap();
        assert!(trial.valid, "id accuracy {}", trial.id_accuracy);
        assert!(
            trial.separated,
            "causal {} vs spurious {}",
            trial.causal_min, trial.spurious_max
        );
    }

    #[test]
    fn noncommutation_identity_and_scaling_are_exact_zero() {
        let layout = SegmentLayout::new(3, 2).unwrap();
        let id = alignment_noncommutation_check(&BijectionSpec::Identity, layout, 0, 50, 3)
            .unwrap();
        assert_eq!(id, 0.0);
        let scales: Vec<f32> = (0..6).map(|i| 0.5 + i as f32 * 0.3).collect();
        let sc = alignment_noncommutation_check(
            &BijectionSpec::CoordScale(scales),
            layout,
            1,
            50,
            3,
        )
        .unwrap();
        assert_eq!(sc, 0.0);
    }

    #[test]
    fn noncommutation_rotation_is_visible() {
        let layout = SegmentLayout::new(3, 2).unwrap();
        let rot = BijectionSpec::SegmentRotation {
            seg_a: 0,
            seg_b: 1,
            degrees: 45.0,
        };
        let disc = alignment_noncommutation_check(&rot, layout, 0, 50, 3).unwrap();
        assert!(disc > 0.1, "discrepancy {disc}");
    }

    #[test]
    fn degenerate_bijections_rejected() {
        let layout = SegmentLayout::new(2, 2).unwrap();
        let zero_scale = BijectionSpec::CoordScale(vec![1.0, 0.0, 1.0, 1.0]);
        assert!(alignment_noncommutation_check(&zero_scale, layout, 0, 5, 1).is_err());
        let self_rot = BijectionSpec::SegmentRotation {
            seg_a: 1,
            seg_b: 1,
            degrees: 30.0,
        };
        assert!(alignment_noncommutation_check(&self_rot, layout, 0, 5, 1).is_err());
    }

    #[test]
    fn toy_state_space_guard() {
        let err = DiscreteToyModel::new(
            vec![1000, 1000, 1000],
            2,
            vec![],
            vec![],
            vec![],
        );
        assert!(matches!(err, Err(CoreError::Config(_))));
    }
}
