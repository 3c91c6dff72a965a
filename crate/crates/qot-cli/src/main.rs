//! Command-line driver: dataset synthesis, training, evaluation, cost
//! accounting, gradient certification, and feature export.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use qot::autograd::Tape;
use qot::harness::{
    certification_cases, evaluate_checkpoint, generate, human, load_dataset, load_pipeline,
    qvit_cost, real_vit_params, train, write_tensor, Manifest, Pipeline, RunConfig, Stage,
    SynthSpec, DEFAULT_STAGES,
};
use qot::ortho::extract_pipeline;

#[derive(Parser)]
#[command(name = "qot", version, about = "Quaternion orthogonal transformer toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic blob dataset (tensor files + manifests)
    Synth {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of classes
        #[arg(long, default_value_t = 7)]
        classes: usize,
        /// Examples per class in each of the train and test splits
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        /// Square canvas size in pixels
        #[arg(long, default_value_t = 56)]
        image_size: usize,
    },
    /// Train on a manifest and write metrics + checkpoints
    Train {
        /// Preset name (default, paper, desk) or config file path
        #[arg(long, default_value = "desk")]
        config: String,
        /// Training manifest
        #[arg(long)]
        data: PathBuf,
        /// Output directory for checkpoints and metrics
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Orthogonality penalty weight
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        lr: Option<f64>,
        /// Override the epoch count of every stage run
        #[arg(long)]
        epochs: Option<usize>,
        /// Run a single stage (ortho, qvit, joint) instead of the
        /// default ortho-then-qvit schedule
        #[arg(long)]
        stage: Option<String>,
    },
    /// Evaluate a checkpoint: accuracy and confusion matrix
    Eval {
        /// Checkpoint produced by train
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation manifest
        #[arg(long)]
        data: PathBuf,
        /// Also write the report to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report parameter and FLOP counts for a config
    Count {
        /// Preset name (default, paper, desk) or config file path
        #[arg(long, default_value = "default")]
        config: String,
    },
    /// Run the finite-difference certification suite over every op
    Gradcheck,
    /// Run the extraction stage over a manifest and write quaternion
    /// feature tensors
    ExportFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Synth { out, seed, classes, per_class, image_size } => {
            let spec = SynthSpec {
                classes,
                per_class_train: per_class,
                per_class_test: per_class,
                image_size,
                ..SynthSpec::default()
            };
            let result = generate(&out, &spec, seed).context("generating dataset")?;
            println!(
                "wrote {} tensor files\ntrain manifest {}\ntest manifest {}",
                result.files,
                result.train_manifest.display(),
                result.test_manifest.display()
            );
            Ok(())
        }
        Cmd::Train { config, data, out, seed, lambda, lr, epochs, stage } => {
            let mut cfg = RunConfig::resolve(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(l) = lambda {
                cfg.lambda = l;
            }
            if let Some(l) = lr {
                cfg.lr = l;
            }
            if let Some(e) = epochs {
                cfg.epochs_stage1 = e;
                cfg.epochs_stage2 = e;
            }
            let stages: Vec<Stage> = match stage {
                Some(s) => vec![s.parse()?],
                None => DEFAULT_STAGES.to_vec(),
            };
            let result = train::<f32>(&cfg, &data, &out, &stages).context("training")?;
            for m in &result.metrics {
                println!("{m}");
            }
            println!("metrics {}", result.metrics_path.display());
            println!("checkpoint {}", result.checkpoint.display());
            Ok(())
        }
        Cmd::Eval { checkpoint, data, out } => {
            let report = evaluate_checkpoint::<f32>(&checkpoint, &data).context("evaluating")?;
            println!("{report}");
            if let Some(path) = out {
                std::fs::write(&path, format!("{report}\n"))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Cmd::Count { config } => {
            let cfg = RunConfig::resolve(&config)?;
            let report = qvit_cost(&cfg.model);
            println!("{report}");
            let q = report.total_params();
            let r = real_vit_params(&cfg.model);
            println!(
                "real-layer equivalent: params {} ({}); quaternion/real ratio {:.3}",
                r,
                human(r),
                q as f64 / r as f64
            );
            Ok(())
        }
        Cmd::Gradcheck => {
            let mut failures = 0;
            for case in certification_cases() {
                match (case.run)() {
                    Ok(report) => {
                        let verdict = if report.all_pass() { "PASS" } else { "FAIL" };
                        println!("{}\t{:.3e}\t{}", case.name, report.worst(), verdict);
                        if !report.all_pass() {
                            failures += 1;
                            print!("{report}");
                        }
                    }
                    Err(e) => {
                        println!("{}\tERROR\t{}", case.name, e);
                        failures += 1;
                    }
                }
            }
            if failures > 0 {
                bail!("{failures} certification case(s) failed");
            }
            Ok(())
        }
        Cmd::ExportFeatures { checkpoint, data, out } => {
            let (cfg, _, model): (_, _, Pipeline<f32>) =
                load_pipeline(&checkpoint).context("loading checkpoint")?;
            let manifest = Manifest::read(&data)?;
            manifest.validate(cfg.model.num_classes)?;
            let (images, labels) = load_dataset::<f32>(&manifest, &cfg)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let mut rows = Vec::with_capacity(images.len());
            for (i, (img, &label)) in images.iter().zip(&labels).enumerate() {
                let tape = Tape::new();
                let q = extract_pipeline(&tape, &model.backbone, &model.head, img)?.value();
                let rel = format!("feat_{i:05}.qt");
                write_tensor(out.join(&rel), &q)?;
                rows.push((rel, label));
            }
            Manifest::write(out.join("features.tsv"), &rows)?;
            println!("wrote {} feature tensors to {}", rows.len(), out.display());
            Ok(())
        }
    }
}
