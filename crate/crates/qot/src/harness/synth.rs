//! Synthetic desk-scale dataset: one Gaussian blob per class at a
//! class-specific position and width on a square single-channel canvas,
//! plus iid pixel noise. Classes overlap spatially but stay separable;
//! `nearest_centroid_accuracy` certifies that from the files alone.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::qcore::QTensor;

use super::io::{read_tensor, write_tensor};
use super::manifest::Manifest;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class_train: usize,
    pub per_class_test: usize,
    pub image_size: usize,
    pub noise_sigma: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 7,
            per_class_train: 100,
            per_class_test: 100,
            image_size: 56,
            noise_sigma: 0.1,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Contract(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.per_class_train == 0 || self.per_class_test == 0 || self.image_size < 8 {
            return Err(Error::Contract("degenerate dataset geometry".into()));
        }
        Ok(())
    }

    /// Blob center and standard deviation for a class: centers sit on a
    /// circle of radius size/4 about the canvas center, widths grow with
    /// the class index.
    pub fn blob(&self, class: usize) -> (f64, f64, f64) {
        let mid = self.image_size as f64 / 2.0;
        let r = self.image_size as f64 / 4.0;
        let angle = std::f64::consts::TAU * class as f64 / self.classes as f64;
        let sigma = self.image_size as f64 * (3.0 + 0.8 * class as f64) / 56.0;
        (mid + r * angle.cos(), mid + r * angle.sin(), sigma)
    }

    /// Noiseless class signal, row-major [size, size].
    pub fn signal(&self, class: usize) -> Vec<f64> {
        let (cx, cy, sigma) = self.blob(class);
        let n = self.image_size;
        let mut out = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                out.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
            }
        }
        out
    }

    /// One noisy sample, shape [size, size, 1].
    pub fn sample(&self, class: usize, rng: &mut impl Rng) -> QTensor<f32> {
        let noise = Normal::new(0.0, self.noise_sigma).expect("sigma finite");
        let data: Vec<f32> = self
            .signal(class)
            .into_iter()
            .map(|s| (s + noise.sample(rng)) as f32)
            .collect();
        QTensor::from_vec(vec![self.image_size, self.image_size, 1], data)
            .expect("signal length matches canvas")
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub files: usize,
}

/// Writes tensor files plus `train.tsv` / `test.tsv` under `out_dir`.
/// Identical seeds reproduce identical bytes.
pub fn generate(out_dir: impl AsRef<Path>, spec: &SynthSpec, seed: u64) -> Result<SynthOutput> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut files = 0;
    let mut manifests = Vec::new();
    for (split, per_class) in [("train", spec.per_class_train), ("test", spec.per_class_test)] {
        let mut rows = Vec::with_capacity(spec.classes * per_class);
        for class in 0..spec.classes {
            for i in 0..per_class {
                let rel = format!("{split}/img_{class:02}_{i:04}.qt");
                let img = spec.sample(class, &mut rng);
                write_tensor(out_dir.join(&rel), &img)?;
                rows.push((rel, class));
                files += 1;
            }
        }
        let mpath = out_dir.join(format!("{split}.tsv"));
        Manifest::write(&mpath, &rows)?;
        manifests.push(mpath);
    }
    let test_manifest = manifests.pop().expect("two splits");
    let train_manifest = manifests.pop().expect("two splits");
    Ok(SynthOutput { train_manifest, test_manifest, files })
}

/// Pixel-space nearest-centroid classifier: per-class mean over the
/// training split, L2-nearest assignment on the test split. Certifies the
/// dataset is separable independently of any learned model.
pub fn nearest_centroid_accuracy(
    train_manifest: impl AsRef<Path>,
    test_manifest: impl AsRef<Path>,
    num_classes: usize,
) -> Result<f64> {
    let train = Manifest::read(train_manifest)?;
    let test = Manifest::read(test_manifest)?;
    train.validate(num_classes)?;
    test.validate(num_classes)?;

    let mut centroids: Vec<Vec<f64>> = vec![Vec::new(); num_classes];
    let mut counts = vec![0usize; num_classes];
    for e in &train.entries {
        let img: QTensor<f32> = read_tensor(&e.path)?;
        let c = &mut centroids[e.label];
        if c.is_empty() {
            c.resize(img.len(), 0.0);
        } else if c.len() != img.len() {
            return Err(Error::Contract(format!(
                "inconsistent image sizes in {}",
                e.path.display()
            )));
        }
        for (acc, &x) in c.iter_mut().zip(img.data()) {
            *acc += x as f64;
        }
        counts[e.label] += 1;
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        if n == 0 {
            return Err(Error::Contract("a class has no training examples".into()));
        }
        for x in c.iter_mut() {
            *x /= n as f64;
        }
    }

    let mut correct = 0usize;
    for e in &test.entries {
        let img: QTensor<f32> = read_tensor(&e.path)?;
        let mut best = (f64::INFINITY, 0usize);
        for (k, c) in centroids.iter().enumerate() {
            let d: f64 = c
                .iter()
                .zip(img.data())
                .map(|(&m, &x)| (x as f64 - m) * (x as f64 - m))
                .sum();
            if d < best.0 {
                best = (d, k);
            }
        }
        if best.1 == e.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("qot-synth-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_spec() -> SynthSpec {
        SynthSpec {
            classes: 4,
            per_class_train: 8,
            per_class_test: 8,
            image_size: 32,
            noise_sigma: 0.1,
        }
    }

    #[test]
    fn generates_counted_files_and_manifests() {
        let dir = tmpdir("count");
        let out = generate(&dir, &small_spec(), 7).unwrap();
        assert_eq!(out.files, 4 * 16);
        let train = Manifest::read(&out.train_manifest).unwrap();
        let test = Manifest::read(&out.test_manifest).unwrap();
        assert_eq!(train.len(), 32);
        assert_eq!(test.len(), 32);
        train.validate(4).unwrap();
        test.validate(4).unwrap();
        let img: QTensor<f32> = read_tensor(&train.entries[0].path).unwrap();
        assert_eq!(img.shape(), &[32, 32, 1]);
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let a = tmpdir("det-a");
        let b = tmpdir("det-b");
        generate(&a, &small_spec(), 3).unwrap();
        generate(&b, &small_spec(), 3).unwrap();
        let fa = std::fs::read(a.join("train/img_01_0003.qt")).unwrap();
        let fb = std::fs::read(b.join("train/img_01_0003.qt")).unwrap();
        assert_eq!(fa, fb);

        let c = tmpdir("det-c");
        generate(&c, &small_spec(), 4).unwrap();
        let fc = std::fs::read(c.join("train/img_01_0003.qt")).unwrap();
        assert_ne!(fa, fc);
    }

    #[test]
    fn classes_have_distinct_blobs() {
        let spec = SynthSpec::default();
        let (x0, y0, s0) = spec.blob(0);
        let (x3, y3, s3) = spec.blob(3);
        assert!((x0 - x3).abs() + (y0 - y3).abs() > 5.0);
        assert!(s3 > s0);
        let sig = spec.signal(0);
        let peak = sig.iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak > 0.99);
        assert_eq!(sig.len(), 56 * 56);
    }

    #[test]
    fn nearest_centroid_separates_small_set() {
        let dir = tmpdir("centroid");
        let out = generate(&dir, &small_spec(), 11).unwrap();
        let acc =
            nearest_centroid_accuracy(&out.train_manifest, &out.test_manifest, 4).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn rejects_single_class() {
        let dir = tmpdir("reject");
        let spec = SynthSpec { classes: 1, ..small_spec() };
        assert!(generate(&dir, &spec, 0).is_err());
    }
}
