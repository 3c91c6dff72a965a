//! Parameter and FLOP accounting from closed forms, independent of any
//! constructed model.
//!
//! Two FLOP columns are reported. The headline treats one quaternion
//! multiply-accumulate as one MAC = 2 FLOPs, mirroring how real-network
//! tables count a real MAC. The expanded column charges each Hamilton
//! product its full 16 multiplies + 12 adds = 28 FLOPs and each quaternion
//! add 4. Elementwise costs (both columns): softmax 4/elem, GELU 4/elem,
//! LayerNorm 8/elem, built from exp=1, div=1, sqrt=1, erf=1.

use std::fmt;

use crate::qvit::QVitConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostLine {
    pub name: String,
    /// Real scalars (each quaternion weight counts 4).
    pub params: u64,
    /// Headline convention: quaternion MAC = 2 FLOPs.
    pub flops_mac: u64,
    /// Expanded convention: Hamilton product = 28 FLOPs, quaternion add = 4.
    pub flops_hamilton: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub lines: Vec<CostLine>,
}

pub const CONVENTION: &str = "flops(mac): 1 quaternion or real multiply-accumulate = 1 MAC = 2 FLOPs; \
flops(h28): each Hamilton product = 16 mul + 12 add = 28 FLOPs, quaternion add = 4; \
elementwise in both columns: softmax 4/elem, GELU 4/elem, LayerNorm 8/elem (exp=div=sqrt=erf=1)";

impl CostReport {
    pub fn total_params(&self) -> u64 {
        self.lines.iter().map(|l| l.params).sum()
    }

    pub fn total_flops_mac(&self) -> u64 {
        self.lines.iter().map(|l| l.flops_mac).sum()
    }

    pub fn total_flops_hamilton(&self) -> u64 {
        self.lines.iter().map(|l| l.flops_hamilton).sum()
    }

    /// Table-I-style one-liner under the headline convention.
    pub fn headline(&self) -> String {
        format!(
            "params {} flops {}",
            human(self.total_params()),
            human(self.total_flops_mac())
        )
    }
}

pub fn human(n: u64) -> String {
    if n >= 1_000_000 {
        format!("{:.2}M", n as f64 / 1e6)
    } else if n >= 1_000 {
        format!("{:.2}K", n as f64 / 1e3)
    } else {
        n.to_string()
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>14} {:>14} {:>14}", "layer", "params", "flops(mac)", "flops(h28)")?;
        for l in &self.lines {
            writeln!(f, "{:<24} {:>14} {:>14} {:>14}", l.name, l.params, l.flops_mac, l.flops_hamilton)?;
        }
        writeln!(
            f,
            "{:<24} {:>14} {:>14} {:>14}",
            "total",
            self.total_params(),
            self.total_flops_mac(),
            self.total_flops_hamilton()
        )?;
        writeln!(f, "{}", self.headline())?;
        write!(f, "convention: {CONVENTION}")
    }
}

/// Cost of one quaternion fully connected application on `t` rows.
struct Qfc {
    params: u64,
    flops_mac: u64,
    flops_hamilton: u64,
}

fn qfc(t: u64, d_in: u64, d_out: u64, bias: bool) -> Qfc {
    let hamiltons = t * d_out * d_in;
    let quat_adds = t * d_out * (d_in - 1) + if bias { t * d_out } else { 0 };
    Qfc {
        params: 4 * d_in * d_out + if bias { 4 * d_out } else { 0 },
        flops_mac: 2 * hamiltons + if bias { 2 * t * d_out } else { 0 },
        flops_hamilton: 28 * hamiltons + 4 * quat_adds,
    }
}

/// Plain quaternion matrix product [m,k,4] x [k,n,4].
fn quat_matmul(m: u64, k: u64, n: u64) -> (u64, u64) {
    let hamiltons = m * n * k;
    (2 * hamiltons, 28 * hamiltons + 4 * m * n * (k - 1))
}

fn layer_norm_flops(elems: u64) -> u64 {
    8 * elems
}

fn softmax_flops(elems: u64) -> u64 {
    4 * elems
}

fn gelu_flops(elems: u64) -> u64 {
    4 * elems
}

/// Per-layer forward cost of the transformer on one image.
pub fn qvit_cost(cfg: &QVitConfig) -> CostReport {
    let t = cfg.tokens() as u64;
    let e = cfg.embed_dim as u64;
    let hw = cfg.token_dim() as u64;
    let d = cfg.head_dim() as u64;
    let heads = cfg.heads as u64;
    let hidden = cfg.ffn_hidden as u64;
    let s = t * e;
    let k = cfg.num_classes as u64;

    let mut lines = Vec::new();

    lines.push(CostLine {
        name: "pos_embed".into(),
        params: t * hw * 4,
        flops_mac: t * hw * 4,
        flops_hamilton: t * hw * 4,
    });

    let proj = qfc(t, hw, e, true);
    lines.push(CostLine {
        name: "input_proj".into(),
        params: proj.params,
        flops_mac: proj.flops_mac,
        flops_hamilton: proj.flops_hamilton,
    });

    for b in 0..cfg.blocks {
        // q, k, v per head; scores, softmax, mix; then the output mix.
        let head_proj = qfc(t, e, d, true);
        let (scores_mac, scores_h28) = quat_matmul(t, d, t);
        let scale = t * t * 4;
        let softmax = softmax_flops(t * t * 4);
        let (mix_mac, mix_h28) = quat_matmul(t, t, d);
        let out_proj = qfc(t, e, e, true);
        let residual = t * e * 4;
        lines.push(CostLine {
            name: format!("block{b}.attn"),
            params: heads * 3 * head_proj.params + out_proj.params,
            flops_mac: heads * (3 * head_proj.flops_mac + scores_mac + scale + softmax + mix_mac)
                + out_proj.flops_mac
                + residual,
            flops_hamilton: heads
                * (3 * head_proj.flops_hamilton + scores_h28 + scale + softmax + mix_h28)
                + out_proj.flops_hamilton
                + residual,
        });

        lines.push(CostLine {
            name: format!("block{b}.norm"),
            params: 2 * e * 4,
            flops_mac: layer_norm_flops(t * e * 4),
            flops_hamilton: layer_norm_flops(t * e * 4),
        });

        let mut ffn_params = 0;
        let mut ffn_mac = 0;
        let mut ffn_h28 = 0;
        for m in 0..cfg.ffn_convs {
            let c_in = if m == 0 { e } else { hidden };
            let c_out = if m + 1 == cfg.ffn_convs { e } else { hidden };
            let conv = qfc(t, c_in, c_out, true);
            ffn_params += conv.params;
            ffn_mac += conv.flops_mac;
            ffn_h28 += conv.flops_hamilton;
            if m + 1 < cfg.ffn_convs {
                ffn_params += 2 * c_out * 4;
                let elems = t * c_out * 4;
                let act = layer_norm_flops(elems) + gelu_flops(elems);
                ffn_mac += act;
                ffn_h28 += act;
            }
        }
        let residual = t * e * 4;
        lines.push(CostLine {
            name: format!("block{b}.ffn"),
            params: ffn_params,
            flops_mac: ffn_mac + residual,
            flops_hamilton: ffn_h28 + residual,
        });
    }

    lines.push(CostLine {
        name: "final_norm".into(),
        params: 2 * e * 4,
        flops_mac: layer_norm_flops(t * e * 4),
        flops_hamilton: layer_norm_flops(t * e * 4),
    });

    for l in 0..cfg.mlp_layers {
        let fc = qfc(1, s, s, true);
        let act = if l + 1 < cfg.mlp_layers { gelu_flops(4 * s) } else { 0 };
        lines.push(CostLine {
            name: format!("mlp{l}"),
            params: fc.params,
            flops_mac: fc.flops_mac + act,
            flops_hamilton: fc.flops_hamilton + act,
        });
    }

    let head_flops = 2 * (4 * s) * k + k;
    lines.push(CostLine {
        name: "head".into(),
        params: 4 * s * k + k,
        flops_mac: head_flops,
        flops_hamilton: head_flops,
    });

    CostReport { lines }
}

/// Real-parameter total for the same architecture built from real layers:
/// every quaternion linear map of d_in -> d_out becomes a real 4 d_in ->
/// 4 d_out map; norms, position table, and the real head are unchanged.
pub fn real_vit_params(cfg: &QVitConfig) -> u64 {
    let t = cfg.tokens() as u64;
    let e = cfg.embed_dim as u64;
    let hw = cfg.token_dim() as u64;
    let d = cfg.head_dim() as u64;
    let heads = cfg.heads as u64;
    let hidden = cfg.ffn_hidden as u64;
    let s = t * e;
    let k = cfg.num_classes as u64;

    let real_fc = |d_in: u64, d_out: u64| 16 * d_in * d_out + 4 * d_out;

    let mut total = t * hw * 4;
    total += real_fc(hw, e);
    for _ in 0..cfg.blocks {
        total += heads * 3 * real_fc(e, d) + real_fc(e, e);
        total += 2 * e * 4;
        for m in 0..cfg.ffn_convs {
            let c_in = if m == 0 { e } else { hidden };
            let c_out = if m + 1 == cfg.ffn_convs { e } else { hidden };
            total += real_fc(c_in, c_out);
            if m + 1 < cfg.ffn_convs {
                total += 2 * c_out * 4;
            }
        }
    }
    total += 2 * e * 4;
    total += cfg.mlp_layers as u64 * real_fc(s, s);
    total += 4 * s * k + k;
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::param_count;
    use crate::qvit::QVit;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn qfc_flops_match_worked_example() {
        // One row, two inputs, one output, no bias: two Hamilton products
        // plus one quaternion add.
        let c = qfc(1, 2, 1, false);
        assert_eq!(c.flops_hamilton, 60);
        assert_eq!(c.flops_mac, 4);
        assert_eq!(c.params, 8);
    }

    #[test]
    fn qfc_bias_adds_four_reals_per_output() {
        assert_eq!(qfc(1, 1, 1, true).params, 8);
        assert_eq!(qfc(3, 5, 2, true).params, 4 * 5 * 2 + 8);
    }

    #[test]
    fn projection_flops_are_linear_in_tokens() {
        let one = qfc(7, 49, 16, true);
        let two = qfc(14, 49, 16, true);
        assert_eq!(two.flops_mac, 2 * one.flops_mac);
        assert_eq!(two.flops_hamilton, 2 * one.flops_hamilton);
    }

    #[test]
    fn params_column_matches_constructed_model() {
        let cfg = QVitConfig {
            h: 2,
            w: 3,
            c: 5,
            embed_dim: 8,
            heads: 2,
            blocks: 2,
            ffn_convs: 3,
            ffn_hidden: 6,
            mlp_layers: 2,
            num_classes: 4,
        };
        let mut rng = StdRng::seed_from_u64(0);
        let model: QVit<f64> = QVit::init(cfg.clone(), &mut rng).unwrap();
        let report = qvit_cost(&cfg);
        assert_eq!(report.total_params(), param_count(&model));
    }

    #[test]
    fn default_quat_to_real_ratio_is_in_band() {
        let cfg = QVitConfig::default();
        let q = qvit_cost(&cfg).total_params() as f64;
        let r = real_vit_params(&cfg) as f64;
        let ratio = q / r;
        assert!(ratio > 0.25 && ratio < 1.0 / 3.0, "ratio {ratio}");
    }

    #[test]
    fn totals_equal_sum_of_parts() {
        let report = qvit_cost(&QVitConfig::default());
        let p: u64 = report.lines.iter().map(|l| l.params).sum();
        assert_eq!(report.total_params(), p);
        assert!(report.to_string().contains("convention"));
    }

    #[test]
    fn human_units_read_naturally() {
        assert_eq!(human(950), "950");
        assert_eq!(human(8_480_000), "8.48M");
        assert_eq!(human(10_530), "10.53K");
    }
}
