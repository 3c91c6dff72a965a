//! Run configuration: model hyperparameters plus training settings, stored
//! as line-oriented `key = value` text.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::qvit::QVitConfig;

/// Everything a run needs: the transformer config, the feature-extraction
/// stage geometry, and training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: QVitConfig,
    /// Backbone channel widths after the stem and each stride-2 stage; the
    /// last is the feature width the decomposition head consumes.
    pub backbone_widths: [usize; 4],
    /// Input image channels.
    pub in_channels: usize,
    /// Input image spatial extent (square).
    pub image_size: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda: f64,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: QVitConfig::default(),
            backbone_widths: [8, 16, 32, 32],
            in_channels: 1,
            image_size: 56,
            batch_size: 16,
            lr: 1e-3,
            lambda: 1.0,
            epochs_stage1: 20,
            epochs_stage2: 20,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Named presets: `default`, `paper` (sized to the published parameter
    /// budget), `desk` (small enough to train on one core in minutes).
    pub fn preset(name: &str) -> Option<RunConfig> {
        match name {
            "default" => Some(RunConfig::default()),
            "paper" => Some(RunConfig {
                model: QVitConfig {
                    embed_dim: 16,
                    ffn_hidden: 32,
                    ..QVitConfig::default()
                },
                ..RunConfig::default()
            }),
            "desk" => Some(RunConfig {
                model: QVitConfig {
                    h: 7,
                    w: 7,
                    c: 8,
                    embed_dim: 8,
                    heads: 2,
                    blocks: 1,
                    ffn_convs: 2,
                    ffn_hidden: 16,
                    mlp_layers: 2,
                    num_classes: 7,
                },
                backbone_widths: [8, 16, 32, 32],
                batch_size: 16,
                lr: 1e-3,
                epochs_stage1: 6,
                epochs_stage2: 30,
                ..RunConfig::default()
            }),
            _ => None,
        }
    }

    /// A preset name, or a path to a `key = value` file.
    pub fn resolve(arg: &str) -> Result<RunConfig> {
        if let Some(cfg) = RunConfig::preset(arg) {
            return Ok(cfg);
        }
        let path = Path::new(arg);
        if !path.exists() {
            return Err(Error::Config(format!(
                "'{arg}' is neither a preset (default, paper, desk) nor an existing file"
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: arg.to_string(),
            detail: e.to_string(),
        })?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |detail: &str| Error::Config(format!("line {}: {key}: {detail}", lineno + 1));
            let as_usize =
                |v: &str| v.parse::<usize>().map_err(|_| bad(&format!("bad integer '{v}'")));
            let as_f64 = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("bad number '{v}'")));
            match key {
                "h" => cfg.model.h = as_usize(value)?,
                "w" => cfg.model.w = as_usize(value)?,
                "c" => cfg.model.c = as_usize(value)?,
                "embed_dim" => cfg.model.embed_dim = as_usize(value)?,
                "heads" => cfg.model.heads = as_usize(value)?,
                "blocks" => cfg.model.blocks = as_usize(value)?,
                "ffn_convs" => cfg.model.ffn_convs = as_usize(value)?,
                "ffn_hidden" => cfg.model.ffn_hidden = as_usize(value)?,
                "mlp_layers" => cfg.model.mlp_layers = as_usize(value)?,
                "num_classes" => cfg.model.num_classes = as_usize(value)?,
                "backbone_widths" => {
                    let parts: Vec<usize> = value
                        .split(',')
                        .map(|p| as_usize(p.trim()))
                        .collect::<Result<_>>()?;
                    if parts.len() != 4 {
                        return Err(bad("need exactly 4 comma-separated widths"));
                    }
                    cfg.backbone_widths = [parts[0], parts[1], parts[2], parts[3]];
                }
                "in_channels" => cfg.in_channels = as_usize(value)?,
                "image_size" => cfg.image_size = as_usize(value)?,
                "batch_size" => cfg.batch_size = as_usize(value)?,
                "lr" => cfg.lr = as_f64(value)?,
                "lambda" => cfg.lambda = as_f64(value)?,
                "epochs_stage1" => cfg.epochs_stage1 = as_usize(value)?,
                "epochs_stage2" => cfg.epochs_stage2 = as_usize(value)?,
                "seed" => {
                    cfg.seed = value
                        .parse::<u64>()
                        .map_err(|_| bad(&format!("bad integer '{value}'")))?
                }
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !self.image_size.is_multiple_of(8)
            || self.image_size / 8 != self.model.h
            || self.model.h != self.model.w
        {
            return Err(Error::Config(format!(
                "image_size {} must be 8 x the square model grid {}x{}",
                self.image_size, self.model.h, self.model.w
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.backbone_widths.contains(&0) || self.in_channels == 0 {
            return Err(Error::Config("channel widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Feature width entering the decomposition head.
    pub fn feature_dim(&self) -> usize {
        self.backbone_widths[3]
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut s = String::new();
        let _ = writeln!(s, "h = {}", m.h);
        let _ = writeln!(s, "w = {}", m.w);
        let _ = writeln!(s, "c = {}", m.c);
        let _ = writeln!(s, "embed_dim = {}", m.embed_dim);
        let _ = writeln!(s, "heads = {}", m.heads);
        let _ = writeln!(s, "blocks = {}", m.blocks);
        let _ = writeln!(s, "ffn_convs = {}", m.ffn_convs);
        let _ = writeln!(s, "ffn_hidden = {}", m.ffn_hidden);
        let _ = writeln!(s, "mlp_layers = {}", m.mlp_layers);
        let _ = writeln!(s, "num_classes = {}", m.num_classes);
        let _ = writeln!(
            s,
            "backbone_widths = {},{},{},{}",
            self.backbone_widths[0], self.backbone_widths[1], self.backbone_widths[2], self.backbone_widths[3]
        );
        let _ = writeln!(s, "in_channels = {}", self.in_channels);
        let _ = writeln!(s, "image_size = {}", self.image_size);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "epochs_stage1 = {}", self.epochs_stage1);
        let _ = writeln!(s, "epochs_stage2 = {}", self.epochs_stage2);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in ["default", "paper", "desk"] {
            RunConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(RunConfig::preset("nope").is_none());
    }

    #[test]
    fn text_round_trip_is_identity() {
        for name in ["default", "paper", "desk"] {
            let cfg = RunConfig::preset(name).unwrap();
            let parsed = RunConfig::parse(&cfg.to_text()).unwrap();
            assert_eq!(cfg, parsed);
        }
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = RunConfig::parse("# comment\n\nlr = 0.05\nheads = 4\n").unwrap();
        assert_eq!(cfg.lr, 0.05);
        assert_eq!(cfg.model.heads, 4);
        assert_eq!(cfg.model.embed_dim, 64);
    }

    #[test]
    fn rejects_unknown_key_and_bad_values() {
        assert!(RunConfig::parse("bogus = 3\n").is_err());
        assert!(RunConfig::parse("lr = fast\n").is_err());
        assert!(RunConfig::parse("heads = 5\n").is_err());
        assert!(RunConfig::parse("just a line\n").is_err());
    }

    #[test]
    fn paper_preset_keeps_default_geometry() {
        let cfg = RunConfig::preset("paper").unwrap();
        assert_eq!(cfg.model.c, 64);
        assert_eq!(cfg.model.embed_dim, 16);
        assert_eq!(cfg.model.blocks, 4);
    }
}
