use std::collections::BTreeMap;

use super::{Architecture, ModelConfig, ModelError};
use crate::numerics::{Tape, Tensor};
use crate::rng::Prng;

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Parameters live in a name-sorted map so iteration order, checkpoints, and
/// optimizer state all agree without extra bookkeeping.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: BTreeMap<String, Param>,
}

/// Tape leaves for one forward pass, keyed by parameter name.
pub struct ParamLeaves(pub BTreeMap<String, Tensor>);

impl ParamLeaves {
    pub fn get(&self, name: &str) -> Tensor {
        *self
            .0
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} missing from tape"))
    }
}

/// Per-encoder parameter prefixes. Single-encoder architectures use only
/// "enc"; multi_encoder adds independent context encoders.
pub fn encoder_prefixes(arch: Architecture) -> &'static [&'static str] {
    match arch {
        Architecture::Sentence | Architecture::Concat2to2 => &["enc"],
        Architecture::MultiEncoder => &["enc_sc", "enc", "enc_tc"],
    }
}

/// How a parameter is filled at construction time.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Init {
    Xavier,
    Embed,
    Zeros,
    Ones,
}

/// Single source of truth for the parameter set: every name, shape, and init
/// rule implied by a config, in emission order.
fn for_each_param(config: &ModelConfig, mut f: impl FnMut(String, Vec<usize>, Init)) {
    let d = config.d_model;
    let ffn = config.d_ffn;
    f("src_embed".into(), vec![config.src_vocab, d], Init::Embed);
    f("tgt_embed".into(), vec![config.tgt_vocab, d], Init::Embed);
    if config.arch == Architecture::MultiEncoder && !config.tied_context_embeddings {
        f("enc_sc.embed".into(), vec![config.src_vocab, d], Init::Embed);
        f("enc_tc.embed".into(), vec![config.tgt_vocab, d], Init::Embed);
    }
    f("out_proj".into(), vec![d, config.tgt_vocab], Init::Xavier);
    f("out_bias".into(), vec![config.tgt_vocab], Init::Zeros);

    let attn = |f: &mut dyn FnMut(String, Vec<usize>, Init), prefix: &str| {
        for p in ["wq", "wk", "wv", "wo"] {
            f(format!("{prefix}.{p}"), vec![d, d], Init::Xavier);
        }
        for p in ["bq", "bk", "bv", "bo"] {
            f(format!("{prefix}.{p}"), vec![d], Init::Zeros);
        }
    };
    let ln = |f: &mut dyn FnMut(String, Vec<usize>, Init), prefix: &str| {
        f(format!("{prefix}.g"), vec![d], Init::Ones);
        f(format!("{prefix}.b"), vec![d], Init::Zeros);
    };
    let ffn_block = |f: &mut dyn FnMut(String, Vec<usize>, Init), base: &str| {
        f(format!("{base}.ffn.w1"), vec![d, ffn], Init::Xavier);
        f(format!("{base}.ffn.b1"), vec![ffn], Init::Zeros);
        f(format!("{base}.ffn.w2"), vec![ffn, d], Init::Xavier);
        f(format!("{base}.ffn.b2"), vec![d], Init::Zeros);
    };

    for enc in encoder_prefixes(config.arch) {
        for l in 0..config.n_layers {
            let base = format!("{enc}.l{l}");
            attn(&mut f, &format!("{base}.attn"));
            ln(&mut f, &format!("{base}.ln1"));
            ln(&mut f, &format!("{base}.ln2"));
            ffn_block(&mut f, &base);
        }
    }
    for l in 0..config.n_layers {
        let base = format!("dec.l{l}");
        attn(&mut f, &format!("{base}.self"));
        attn(&mut f, &format!("{base}.cross"));
        ln(&mut f, &format!("{base}.ln1"));
        ln(&mut f, &format!("{base}.ln2"));
        ln(&mut f, &format!("{base}.ln3"));
        ffn_block(&mut f, &base);
    }
}

/// Expected (name, shape) pairs for a config, in name-sorted order.
pub(super) fn param_layout(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for_each_param(config, |name, shape, _| out.push((name, shape)));
    out.sort();
    out
}

/// Parameter count per layer stack entry is at least one, so a manifest
/// shorter than n_layers can never match; callers use this to reject absurd
/// configs before materializing the layout.
pub(super) fn layout_min_entries(config: &ModelConfig) -> usize {
    config.n_layers
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model, ModelError> {
        config.validate()?;
        let rng = Prng::new(seed).fork("model.init");
        let d = config.d_model;
        let mut params = BTreeMap::new();
        for_each_param(&config, |name, shape, init| {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Xavier => {
                    let std = (2.0 / (shape[0] + shape[1]) as f64).sqrt();
                    let mut fork = rng.fork(&name);
                    (0..n).map(|_| fork.normal() * std).collect()
                }
                Init::Embed => {
                    let std = (d as f64).powf(-0.5);
                    let mut fork = rng.fork(&name);
                    (0..n).map(|_| fork.normal() * std).collect()
                }
            };
            params.insert(name, Param { shape, data });
        });
        Ok(Model { config, params })
    }

    pub fn param(&self, name: &str) -> &Param {
        self.params.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn param_mut(&mut self, name: &str) -> &mut Param {
        self.params.get_mut(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn n_params(&self) -> usize {
        self.params.values().map(Param::len).sum()
    }

    /// Pushes every parameter onto the tape as a gradient-tracked leaf.
    pub fn inject(&self, tape: &mut Tape) -> ParamLeaves {
        let mut leaves = BTreeMap::new();
        for (name, p) in &self.params {
            leaves.insert(name.clone(), tape.param(&p.data, &p.shape));
        }
        ParamLeaves(leaves)
    }

    /// Name of the embedding table feeding an encoder block, honoring the
    /// tied-context-embeddings flag.
    pub fn encoder_embed_name(&self, enc: &str) -> &'static str {
        match enc {
            "enc" => "src_embed",
            "enc_sc" => {
                if self.config.tied_context_embeddings {
                    "src_embed"
                } else {
                    "enc_sc.embed"
                }
            }
            "enc_tc" => {
                if self.config.tied_context_embeddings {
                    "tgt_embed"
                } else {
                    "enc_tc.embed"
                }
            }
            other => panic!("unknown encoder {other}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(arch: Architecture) -> ModelConfig {
        ModelConfig::desk(arch, 24, 26)
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Model::new(cfg(Architecture::Concat2to2), 7).unwrap();
        let b = Model::new(cfg(Architecture::Concat2to2), 7).unwrap();
        let c = Model::new(cfg(Architecture::Concat2to2), 8).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(
            a.param("enc.l0.attn.wq").data,
            c.param("enc.l0.attn.wq").data
        );
    }

    #[test]
    fn multi_encoder_owns_three_encoders() {
        let m = Model::new(cfg(Architecture::MultiEncoder), 1).unwrap();
        for enc in ["enc", "enc_sc", "enc_tc"] {
            assert!(m.params.contains_key(&format!("{enc}.l0.attn.wq")), "{enc} missing");
            assert!(m.params.contains_key(&format!("{enc}.l1.ffn.w2")), "{enc} missing ffn");
        }
        let s = Model::new(cfg(Architecture::Sentence), 1).unwrap();
        assert!(!s.params.keys().any(|k| k.starts_with("enc_sc") || k.starts_with("enc_tc")));
    }

    #[test]
    fn tied_flag_controls_context_embedding_tables() {
        let tied = Model::new(cfg(Architecture::MultiEncoder), 3).unwrap();
        assert!(!tied.params.contains_key("enc_sc.embed"));
        assert_eq!(tied.encoder_embed_name("enc_sc"), "src_embed");
        assert_eq!(tied.encoder_embed_name("enc_tc"), "tgt_embed");

        let mut c = cfg(Architecture::MultiEncoder);
        c.tied_context_embeddings = false;
        let untied = Model::new(c, 3).unwrap();
        assert_eq!(untied.param("enc_sc.embed").shape, vec![24, 64]);
        assert_eq!(untied.param("enc_tc.embed").shape, vec![26, 64]);
        assert_eq!(untied.encoder_embed_name("enc_tc"), "enc_tc.embed");
    }

    #[test]
    fn config_validation_rejects_bad_shapes() {
        let mut c = cfg(Architecture::Sentence);
        c.n_heads = 5;
        assert!(matches!(Model::new(c, 0), Err(ModelError::Config(_))));
        let mut c = cfg(Architecture::Sentence);
        c.dropout = 1.0;
        assert!(matches!(Model::new(c, 0), Err(ModelError::Config(_))));
        let mut c = cfg(Architecture::Sentence);
        c.src_vocab = 4;
        assert!(matches!(Model::new(c, 0), Err(ModelError::Config(_))));
    }

    #[test]
    fn layer_norm_gains_start_at_one() {
        let m = Model::new(cfg(Architecture::Sentence), 2).unwrap();
        assert!(m.param("dec.l0.ln1.g").data.iter().all(|&x| x == 1.0));
        assert!(m.param("dec.l0.ln1.b").data.iter().all(|&x| x == 0.0));
        assert!(m.param("out_bias").data.iter().all(|&x| x == 0.0));
    }
}
