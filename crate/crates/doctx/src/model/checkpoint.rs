//! Checkpoints are a UTF-8 header (magic, config, parameter manifest)
//! followed by raw little-endian f64 data. Round-trips are bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use super::params::{Model, Param};
use super::{Architecture, ModelConfig, ModelError};

const MAGIC: &str = "doctx-checkpoint v1";

fn config_lines(c: &ModelConfig) -> String {
    let mut s = String::new();
    s.push_str(&format!("arch={}\n", c.arch.as_str()));
    s.push_str(&format!("d_ffn={}\n", c.d_ffn));
    s.push_str(&format!("d_model={}\n", c.d_model));
    s.push_str(&format!("dropout={}\n", c.dropout));
    s.push_str(&format!("max_context={}\n", c.max_context));
    s.push_str(&format!("max_positions={}\n", c.max_positions));
    s.push_str(&format!("n_heads={}\n", c.n_heads));
    s.push_str(&format!("n_layers={}\n", c.n_layers));
    s.push_str(&format!("src_vocab={}\n", c.src_vocab));
    s.push_str(&format!("tgt_vocab={}\n", c.tgt_vocab));
    s.push_str(&format!("tied_context_embeddings={}\n", c.tied_context_embeddings));
    s
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

fn parse_config(lines: &[&str]) -> Result<ModelConfig, ModelError> {
    let mut kv = BTreeMap::new();
    for line in lines {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad config line {line:?}")))?;
        if kv.insert(k.to_string(), v.to_string()).is_some() {
            return Err(bad(format!("duplicate config key {k}")));
        }
    }
    let mut take = |k: &str| kv.remove(k).ok_or_else(|| bad(format!("missing config key {k}")));
    let usize_of = |k: &str, v: String| {
        v.parse::<usize>().map_err(|_| bad(format!("config {k}={v} is not a count")))
    };
    let arch_s = take("arch")?;
    let arch = Architecture::parse(&arch_s)
        .ok_or_else(|| bad(format!("unknown architecture {arch_s}")))?;
    let dropout_s = take("dropout")?;
    let dropout = dropout_s
        .parse::<f64>()
        .map_err(|_| bad(format!("config dropout={dropout_s} is not a number")))?;
    let tied_s = take("tied_context_embeddings")?;
    let tied = match tied_s.as_str() {
        "true" => true,
        "false" => false,
        _ => return Err(bad(format!("config tied_context_embeddings={tied_s} is not a bool"))),
    };
    let config = ModelConfig {
        arch,
        d_ffn: usize_of("d_ffn", take("d_ffn")?)?,
        d_model: usize_of("d_model", take("d_model")?)?,
        dropout,
        max_context: usize_of("max_context", take("max_context")?)?,
        max_positions: usize_of("max_positions", take("max_positions")?)?,
        n_heads: usize_of("n_heads", take("n_heads")?)?,
        n_layers: usize_of("n_layers", take("n_layers")?)?,
        src_vocab: usize_of("src_vocab", take("src_vocab")?)?,
        tgt_vocab: usize_of("tgt_vocab", take("tgt_vocab")?)?,
        tied_context_embeddings: tied,
    };
    if let Some(k) = kv.keys().next() {
        return Err(bad(format!("unknown config key {k}")));
    }
    Ok(config)
}

impl Model {
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut header = String::new();
        header.push_str(MAGIC);
        header.push_str("\nconfig\n");
        header.push_str(&config_lines(&self.config));
        header.push_str("manifest\n");
        let mut offset = 0usize;
        for (name, p) in &self.params {
            let dims: Vec<String> = p.shape.iter().map(|d| d.to_string()).collect();
            header.push_str(&format!("{name} {} {offset}\n", dims.join(",")));
            offset += p.data.len() * 8;
        }
        header.push_str("data\n");

        let mut bytes = header.into_bytes();
        bytes.reserve(offset);
        for p in self.params.values() {
            for &x in &p.data {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model, ModelError> {
        let bytes = std::fs::read(path)?;
        Model::from_bytes(&bytes)
    }

    /// Parses checkpoint bytes. Malformed input of any kind is a
    /// [`ModelError::Checkpoint`], never a panic.
    pub fn from_bytes(bytes: &[u8]) -> Result<Model, ModelError> {
        let delim = b"\ndata\n";
        let data_at = bytes
            .windows(delim.len())
            .position(|w| w == delim)
            .ok_or_else(|| bad("missing data section"))?;
        let header = std::str::from_utf8(&bytes[..data_at])
            .map_err(|_| bad("header is not valid UTF-8"))?;
        let data = &bytes[data_at + delim.len()..];

        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("bad magic line"));
        }
        if lines.next() != Some("config") {
            return Err(bad("missing config section"));
        }
        let rest: Vec<&str> = lines.collect();
        let manifest_at = rest
            .iter()
            .position(|&l| l == "manifest")
            .ok_or_else(|| bad("missing manifest section"))?;
        let config = parse_config(&rest[..manifest_at])?;
        config.validate().map_err(|e| bad(format!("config rejected: {e}")))?;

        let mut params = BTreeMap::new();
        let mut expect_offset = 0usize;
        for line in &rest[manifest_at + 1..] {
            let mut fields = line.split(' ');
            let (name, dims, offset) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(n), Some(d), Some(o), None) => (n, d, o),
                _ => return Err(bad(format!("bad manifest line {line:?}"))),
            };
            let offset: usize =
                offset.parse().map_err(|_| bad(format!("bad offset in {line:?}")))?;
            if offset != expect_offset {
                return Err(bad(format!(
                    "parameter {name} at offset {offset}, expected {expect_offset}"
                )));
            }
            let mut shape = Vec::new();
            for d in dims.split(',') {
                shape.push(d.parse::<usize>().map_err(|_| bad(format!("bad shape in {line:?}")))?);
            }
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| bad(format!("shape overflow in {line:?}")))?;
            let size = count.checked_mul(8).ok_or_else(|| bad(format!("size overflow in {line:?}")))?;
            let end = offset.checked_add(size).ok_or_else(|| bad("offset overflow"))?;
            let slice = data
                .get(offset..end)
                .ok_or_else(|| bad(format!("parameter {name} runs past end of data")))?;
            let values: Vec<f64> = slice
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            if params.insert(name.to_string(), Param { shape, data: values }).is_some() {
                return Err(bad(format!("duplicate parameter {name}")));
            }
            expect_offset = end;
        }
        if expect_offset != data.len() {
            return Err(bad(format!(
                "data section holds {} bytes, manifest covers {expect_offset}",
                data.len()
            )));
        }

        // Every layer contributes parameters, so a manifest shorter than
        // n_layers cannot match; checking first keeps the expected layout
        // bounded by the file size.
        if super::params::layout_min_entries(&config) > params.len() {
            return Err(bad("manifest does not match the parameter set of the config"));
        }
        let expected = super::params::param_layout(&config);
        if params.len() != expected.len()
            || !params
                .iter()
                .zip(&expected)
                .all(|((ln, lp), (rn, rs))| ln == rn && &lp.shape == rs)
        {
            return Err(bad("manifest does not match the parameter set of the config"));
        }
        Ok(Model { config, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        let mut c = ModelConfig::desk(Architecture::MultiEncoder, 11, 13);
        c.n_layers = 1;
        c.d_model = 8;
        c.n_heads = 2;
        c.d_ffn = 16;
        Model::new(c, 42).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut m = model();
        // Exercise awkward floats, including negative zero and subnormals.
        m.param_mut("out_bias").data[0] = -0.0;
        m.param_mut("out_bias").data[1] = f64::MIN_POSITIVE / 2.0;
        m.param_mut("out_bias").data[2] = 0.1 + 0.2;
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back.config, m.config);
        for (name, p) in &m.params {
            let q = back.param(name);
            assert_eq!(q.shape, p.shape, "{name}");
            let bits_a: Vec<u64> = p.data.iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = q.data.iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "{name}");
        }
    }

    #[test]
    fn saved_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let m = model();
        m.save(&a).unwrap();
        m.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn rejects_corrupted_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model();
        m.save(&path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let cases: Vec<Vec<u8>> = vec![
            b"not a checkpoint".to_vec(),
            good[1..].to_vec(),
            good[..good.len() - 8].to_vec(),
            [good.clone(), vec![0u8; 8]].concat(),
            replace_once(&good, b"n_heads=2", b"n_heads=3"),
        ];
        for (i, bytes) in cases.iter().enumerate() {
            let err = Model::from_bytes(bytes);
            assert!(
                matches!(err, Err(ModelError::Checkpoint(_))),
                "case {i} should fail as a checkpoint error"
            );
        }
    }

    #[test]
    fn rejects_manifest_name_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model();
        m.save(&path).unwrap();
        let text = std::fs::read(&path).unwrap();
        let swapped = replace_once(&text, b"dec.l0.cross.bk", b"dec.l0.cross.bz");
        assert!(matches!(Model::from_bytes(&swapped), Err(ModelError::Checkpoint(_))));
    }

    fn replace_once(data: &[u8], from: &[u8], to: &[u8]) -> Vec<u8> {
        let at = data.windows(from.len()).position(|w| w == from).expect("pattern present");
        let mut out = data[..at].to_vec();
        out.extend_from_slice(to);
        out.extend_from_slice(&data[at + from.len()..]);
        out
    }
}
