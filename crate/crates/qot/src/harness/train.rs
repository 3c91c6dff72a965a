//! Training driver: the backbone + decomposition + transformer bundle, the
//! stage schedule, and deterministic epoch loops.
//!
//! Determinism contract: single-threaded, data order drawn from a counter
//! RNG keyed on (seed, global epoch), gradients applied in name order.
//! Two runs with the same seed and data produce identical metric logs and
//! checkpoints.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{snapshot, Param, Parameterized, Tape, Var};
use crate::error::{Error, Result};
use crate::ortho::{
    build_quaternion, decompose, extract_pipeline, finetune_loss, OrthoHead, ToyBackbone,
};
use crate::qcore::{QTensor, Real};
use crate::qnn::{combined_loss, orthogonal_loss, LossWeights};
use crate::qvit::QVit;

use super::config::RunConfig;
use super::io::{read_tensor_any, Checkpoint};
use super::manifest::Manifest;
use super::optim::{Adam, Optimizer};

/// The full model: convolutional feature extractor, orthogonal
/// decomposition head, and the quaternion transformer.
pub struct Pipeline<T: Real> {
    pub backbone: ToyBackbone<T>,
    pub head: OrthoHead<T>,
    pub qvit: QVit<T>,
}

impl<T: Real> Pipeline<T> {
    pub fn init(cfg: &RunConfig, rng: &mut impl rand::Rng) -> Result<Self> {
        cfg.validate()?;
        let backbone = ToyBackbone::init("backbone", cfg.in_channels, &cfg.backbone_widths, rng);
        let head = OrthoHead::init(
            "ortho",
            cfg.feature_dim(),
            cfg.model.c,
            cfg.model.num_classes,
            rng,
        );
        let qvit = QVit::init(cfg.model.clone(), rng)?;
        Ok(Pipeline { backbone, head, qvit })
    }

    /// Image to class logits `[K]`.
    pub fn logits(&self, tape: &Tape<T>, image: &QTensor<T>) -> Result<Var<T>> {
        let q = extract_pipeline(tape, &self.backbone, &self.head, image)?;
        self.qvit.forward(tape, &q)
    }
}

impl<T: Real> Parameterized<T> for Pipeline<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        self.backbone.visit_params(f);
        self.head.visit_params(f);
        self.qvit.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.backbone.visit_params_mut(f);
        self.head.visit_params_mut(f);
        self.qvit.visit_params_mut(f);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Fine-tune backbone + head on cross-entropy plus the weighted
    /// orthogonality penalty.
    Ortho,
    /// Freeze the extractor, cache quaternion features once, train the
    /// transformer on cross-entropy.
    Qvit,
    /// Everything trainable end to end, cross-entropy plus penalty.
    Joint,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ortho => "ortho",
            Stage::Qvit => "qvit",
            Stage::Joint => "joint",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Stage> {
        match s {
            "ortho" => Ok(Stage::Ortho),
            "qvit" => Ok(Stage::Qvit),
            "joint" => Ok(Stage::Joint),
            other => Err(Error::Config(format!(
                "unknown stage '{other}', expected ortho, qvit, or joint"
            ))),
        }
    }
}

/// Default schedule: decomposition fine-tune, then transformer training.
pub const DEFAULT_STAGES: [Stage; 2] = [Stage::Ortho, Stage::Qvit];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricLine {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
}

impl fmt::Display for MetricLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{:.6}\t{:.6}", self.epoch, self.split, self.loss, self.accuracy)
    }
}

#[derive(Debug)]
pub struct TrainResult {
    pub metrics: Vec<MetricLine>,
    pub checkpoint: PathBuf,
    pub metrics_path: PathBuf,
}

pub fn save_pipeline<T: Real>(
    path: impl AsRef<Path>,
    cfg: &RunConfig,
    step: u64,
    model: &Pipeline<T>,
) -> Result<()> {
    let ckpt = Checkpoint { config: cfg.clone(), step, tensors: snapshot(model) };
    ckpt.save(path)
}

pub fn load_pipeline<T: Real>(path: impl AsRef<Path>) -> Result<(RunConfig, u64, Pipeline<T>)> {
    let ckpt: Checkpoint<T> = Checkpoint::load(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ckpt.config.seed);
    let mut model = Pipeline::init(&ckpt.config, &mut rng)?;
    crate::autograd::load_values(&mut model, &ckpt.tensor_map())?;
    Ok((ckpt.config, ckpt.step, model))
}

/// Loads every manifest entry into memory, checking image geometry.
pub fn load_dataset<T: Real>(
    manifest: &Manifest,
    cfg: &RunConfig,
) -> Result<(Vec<QTensor<T>>, Vec<usize>)> {
    let want = [cfg.image_size, cfg.image_size, cfg.in_channels];
    let mut images = Vec::with_capacity(manifest.len());
    let mut labels = Vec::with_capacity(manifest.len());
    for e in &manifest.entries {
        let img: QTensor<T> = read_tensor_any(&e.path)?.cast();
        if img.shape() != want {
            return Err(Error::Contract(format!(
                "{}: image shape {:?}, config wants {:?}",
                e.path.display(),
                img.shape(),
                want
            )));
        }
        images.push(img);
        labels.push(e.label);
    }
    Ok((images, labels))
}

pub fn train<T: Real>(
    cfg: &RunConfig,
    train_manifest: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    stages: &[Stage],
) -> Result<TrainResult> {
    cfg.validate()?;
    if stages.is_empty() {
        return Err(Error::Contract("no training stages requested".into()));
    }
    let manifest = Manifest::read(train_manifest)?;
    manifest.validate(cfg.model.num_classes)?;
    let (images, labels) = load_dataset::<T>(&manifest, cfg)?;

    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        detail: e.to_string(),
    })?;

    let mut model = Pipeline::init(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let mut run = Run {
        cfg,
        images: &images,
        labels: &labels,
        metrics: Vec::new(),
        epoch: 0,
        step: 0,
    };

    for (i, &stage) in stages.iter().enumerate() {
        match stage {
            Stage::Ortho => run.ortho_stage(&mut model)?,
            Stage::Qvit => run.qvit_stage(&mut model)?,
            Stage::Joint => run.joint_stage(&mut model)?,
        }
        if i + 1 < stages.len() {
            save_pipeline(out_dir.join(format!("stage{}.qckpt", i + 1)), cfg, run.step, &model)?;
        }
    }

    let checkpoint = out_dir.join("model.qckpt");
    save_pipeline(&checkpoint, cfg, run.step, &model)?;
    let metrics_path = out_dir.join("metrics.tsv");
    let mut text = String::new();
    for m in &run.metrics {
        text.push_str(&m.to_string());
        text.push('\n');
    }
    std::fs::write(&metrics_path, text).map_err(|e| Error::Io {
        path: metrics_path.display().to_string(),
        detail: e.to_string(),
    })?;
    Ok(TrainResult { metrics: run.metrics, checkpoint, metrics_path })
}

struct Run<'a, T: Real> {
    cfg: &'a RunConfig,
    images: &'a [QTensor<T>],
    labels: &'a [usize],
    metrics: Vec<MetricLine>,
    epoch: usize,
    step: u64,
}

impl<T: Real> Run<'_, T> {
    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.images.len()).collect();
        let key = self.cfg.seed ^ (self.epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(key));
        idx
    }

    fn ensure_finite(&self, tape: &Tape<T>, loss: &Var<T>) -> Result<()> {
        if loss.value().data().iter().all(|x| x.is_finite()) {
            return Ok(());
        }
        let tensor = match tape.first_non_finite() {
            Some((idx, op, name)) => name.unwrap_or_else(|| format!("node {idx} ({op})")),
            None => "loss".to_string(),
        };
        Err(Error::NanLoss { tensor, step: self.step as usize })
    }

    fn log_epoch(&mut self, loss_sum: f64, correct: usize) {
        let n = self.images.len() as f64;
        self.metrics.push(MetricLine {
            epoch: self.epoch,
            split: "train".into(),
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
        });
    }

    fn ortho_stage(&mut self, model: &mut Pipeline<T>) -> Result<()> {
        let weights = LossWeights::new(T::from_f64(self.cfg.lambda))?;
        let mut opt: Adam<T> = Adam::new(self.cfg.lr);
        for _ in 0..self.cfg.epochs_stage1 {
            self.epoch += 1;
            let mut loss_sum = 0.0;
            let mut correct = 0;
            for chunk in self.order().chunks(self.cfg.batch_size) {
                let imgs: Vec<QTensor<T>> =
                    chunk.iter().map(|&i| self.images[i].clone()).collect();
                let labs: Vec<usize> = chunk.iter().map(|&i| self.labels[i]).collect();
                let tape = Tape::new();
                let fl =
                    finetune_loss(&tape, &model.backbone, &model.head, &imgs, &labs, weights)?;
                self.step += 1;
                self.ensure_finite(&tape, &fl.total)?;
                tape.backward(&fl.total)?;
                opt.step(model, &tape.trainable_grads())?;
                loss_sum += fl.total.value().data()[0].to_f64() * chunk.len() as f64;
                correct += correct_count(&fl.logits.value(), &labs);
            }
            self.log_epoch(loss_sum, correct);
        }
        Ok(())
    }

    fn qvit_stage(&mut self, model: &mut Pipeline<T>) -> Result<()> {
        // The extractor is fixed for this stage, so features are computed once.
        let feats: Vec<QTensor<T>> = self
            .images
            .iter()
            .map(|img| {
                let tape = Tape::new();
                extract_pipeline(&tape, &model.backbone, &model.head, img).map(|v| v.value())
            })
            .collect::<Result<_>>()?;
        let mut opt: Adam<T> = Adam::new(self.cfg.lr);
        for _ in 0..self.cfg.epochs_stage2 {
            self.epoch += 1;
            let mut loss_sum = 0.0;
            let mut correct = 0;
            for chunk in self.order().chunks(self.cfg.batch_size) {
                let batch: Vec<QTensor<T>> = chunk.iter().map(|&i| feats[i].clone()).collect();
                let labs: Vec<usize> = chunk.iter().map(|&i| self.labels[i]).collect();
                let tape = Tape::new();
                let logits = model.qvit.forward_batch(&tape, &batch)?;
                let loss = logits.cross_entropy(&labs)?;
                self.step += 1;
                self.ensure_finite(&tape, &loss)?;
                tape.backward(&loss)?;
                opt.step(model, &tape.trainable_grads())?;
                loss_sum += loss.value().data()[0].to_f64() * chunk.len() as f64;
                correct += correct_count(&logits.value(), &labs);
            }
            self.log_epoch(loss_sum, correct);
        }
        Ok(())
    }

    fn joint_stage(&mut self, model: &mut Pipeline<T>) -> Result<()> {
        let weights = LossWeights::new(T::from_f64(self.cfg.lambda))?;
        let k = self.cfg.model.num_classes;
        let mut opt: Adam<T> = Adam::new(self.cfg.lr);
        for _ in 0..self.cfg.epochs_stage2 {
            self.epoch += 1;
            let mut loss_sum = 0.0;
            let mut correct = 0;
            for chunk in self.order().chunks(self.cfg.batch_size) {
                let labs: Vec<usize> = chunk.iter().map(|&i| self.labels[i]).collect();
                let tape = Tape::new();
                let mut rows = Vec::with_capacity(chunk.len());
                let mut orthos = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let x = tape.constant(self.images[i].clone());
                    let f = model.backbone.forward(&tape, &x)?;
                    let dec = decompose(&tape, &f, &model.head)?;
                    let q = build_quaternion(&dec.u[0], &dec.u[1], &dec.u[2])?;
                    rows.push(model.qvit.forward(&tape, &q)?.reshape(vec![1, k])?);
                    orthos.push(orthogonal_loss(&dec.v[0], &dec.v[1], &dec.v[2])?);
                }
                let logits = Var::concat(&rows, 0)?;
                let ce = logits.cross_entropy(&labs)?;
                let mut ortho = orthos[0].clone();
                for t in &orthos[1..] {
                    ortho = ortho.add(t)?;
                }
                let ortho = ortho.scale(T::from_f64(1.0 / orthos.len() as f64));
                let total = combined_loss(&ce, &ortho, weights)?;
                self.step += 1;
                self.ensure_finite(&tape, &total)?;
                tape.backward(&total)?;
                opt.step(model, &tape.trainable_grads())?;
                loss_sum += total.value().data()[0].to_f64() * chunk.len() as f64;
                correct += correct_count(&logits.value(), &labs);
            }
            self.log_epoch(loss_sum, correct);
        }
        Ok(())
    }
}

/// Rows of `[B, K]` logits scored against labels.
pub fn correct_count<T: Real>(logits: &QTensor<T>, labels: &[usize]) -> usize {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &label)| {
            let mut best = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            best == label
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::synth::{generate, SynthSpec};
    use crate::qvit::QVitConfig;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("qot-train-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn tiny_cfg() -> RunConfig {
        RunConfig {
            model: QVitConfig {
                h: 7,
                w: 7,
                c: 2,
                embed_dim: 4,
                heads: 2,
                blocks: 1,
                ffn_convs: 2,
                ffn_hidden: 4,
                mlp_layers: 1,
                num_classes: 2,
            },
            backbone_widths: [2, 4, 4, 4],
            in_channels: 1,
            image_size: 56,
            batch_size: 4,
            lr: 1e-3,
            lambda: 1.0,
            epochs_stage1: 2,
            epochs_stage2: 2,
            seed: 9,
        }
    }

    fn tiny_data(dir: &Path) -> PathBuf {
        let spec = SynthSpec {
            classes: 2,
            per_class_train: 4,
            per_class_test: 2,
            image_size: 56,
            noise_sigma: 0.1,
        };
        generate(dir, &spec, 5).unwrap().train_manifest
    }

    #[test]
    fn fixed_seed_runs_reproduce_metrics() {
        let data = tmpdir("det-data");
        let manifest = tiny_data(&data);
        let cfg = tiny_cfg();
        let a = train::<f32>(&cfg, &manifest, tmpdir("det-a"), &DEFAULT_STAGES).unwrap();
        let b = train::<f32>(&cfg, &manifest, tmpdir("det-b"), &DEFAULT_STAGES).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.metrics.len(), 4);
        assert_eq!(
            std::fs::read(&a.checkpoint).unwrap(),
            std::fs::read(&b.checkpoint).unwrap()
        );
    }

    #[test]
    fn checkpoint_reload_preserves_logits_bitwise() {
        let data = tmpdir("reload-data");
        let manifest = tiny_data(&data);
        let cfg = tiny_cfg();
        let out = train::<f32>(&cfg, &manifest, tmpdir("reload-out"), &[Stage::Ortho]).unwrap();

        let (lcfg, _, loaded): (_, _, Pipeline<f32>) = load_pipeline(&out.checkpoint).unwrap();
        assert_eq!(lcfg, cfg);
        let m = Manifest::read(&manifest).unwrap();
        let (images, _) = load_dataset::<f32>(&m, &cfg).unwrap();

        let mut fresh = Pipeline::init(&cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        let ckpt: Checkpoint<f32> = Checkpoint::load(&out.checkpoint).unwrap();
        crate::autograd::load_values(&mut fresh, &ckpt.tensor_map()).unwrap();

        let ta = Tape::new();
        let tb = Tape::new();
        let la = loaded.logits(&ta, &images[0]).unwrap().value();
        let lb = fresh.logits(&tb, &images[0]).unwrap().value();
        for (x, y) in la.data().iter().zip(lb.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn strong_penalty_reduces_orthogonality_term() {
        let data = tmpdir("ortho-data");
        let manifest = tiny_data(&data);
        let mut cfg = tiny_cfg();
        cfg.lambda = 100.0;
        cfg.epochs_stage1 = 3;
        cfg.lr = 5e-3;

        let m = Manifest::read(&manifest).unwrap();
        let (images, labels) = load_dataset::<f32>(&m, &cfg).unwrap();
        let weights = LossWeights::new(100.0f32).unwrap();

        let probe = |model: &Pipeline<f32>| -> f64 {
            let tape = Tape::new();
            let fl = finetune_loss(&tape, &model.backbone, &model.head, &images, &labels, weights)
                .unwrap();
            fl.ortho.value().data()[0] as f64
        };

        let fresh = Pipeline::init(&cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        let before = probe(&fresh);

        let out = train::<f32>(&cfg, &manifest, tmpdir("ortho-out"), &[Stage::Ortho]).unwrap();
        let (_, _, trained): (_, _, Pipeline<f32>) = load_pipeline(&out.checkpoint).unwrap();
        let after = probe(&trained);
        assert!(after < before, "ortho term {before} -> {after}");
    }

    #[test]
    fn joint_stage_runs_and_logs() {
        let data = tmpdir("joint-data");
        let manifest = tiny_data(&data);
        let mut cfg = tiny_cfg();
        cfg.epochs_stage2 = 1;
        let out = train::<f32>(&cfg, &manifest, tmpdir("joint-out"), &[Stage::Joint]).unwrap();
        assert_eq!(out.metrics.len(), 1);
        assert!(out.metrics[0].loss.is_finite());
    }

    #[test]
    fn nan_input_aborts_without_checkpoint() {
        let data = tmpdir("nan-data");
        let manifest = tiny_data(&data);
        let poisoned = Manifest::read(&manifest).unwrap().entries[0].path.clone();
        let img = QTensor::full(vec![56, 56, 1], f32::NAN);
        crate::harness::io::write_tensor(&poisoned, &img).unwrap();

        let out_dir = tmpdir("nan-out");
        let err = train::<f32>(&tiny_cfg(), &manifest, &out_dir, &DEFAULT_STAGES).unwrap_err();
        assert!(matches!(err, Error::NanLoss { .. }), "{err}");
        assert!(!out_dir.join("model.qckpt").exists());
    }

    #[test]
    fn empty_manifest_is_rejected_before_any_output() {
        let dir = tmpdir("empty");
        let mpath = dir.join("train.tsv");
        std::fs::write(&mpath, "").unwrap();
        let out_dir = dir.join("out");
        assert!(train::<f32>(&tiny_cfg(), &mpath, &out_dir, &DEFAULT_STAGES).is_err());
        assert!(!out_dir.exists());
    }

    #[test]
    fn stage_names_parse_back() {
        for s in [Stage::Ortho, Stage::Qvit, Stage::Joint] {
            assert_eq!(Stage::from_str(s.name()).unwrap(), s);
        }
        assert!(Stage::from_str("warmup").is_err());
    }
}
