//! On-disk model format: `model.json` describes the config and every tensor,
//! `weights.bin` holds the tensors as little-endian signed bytes, row-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xpikesim_core::matrix::{IntMatrix, RealMatrix};
use xpikesim_core::model::{BlockThresholds, ClassifierWeights, LayerWeights, Model, ModelConfig};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const FORMAT_VERSION: u32 = 1;
/// Largest weight magnitude a differential pair of 4-bit devices holds.
pub const MAX_WEIGHT: i32 = 15;

const BLOCK_TENSORS: [&str; 6] = ["w_q", "w_k", "w_v", "w_o", "w_1", "w_2"];
const CLASSIFIER: &str = "classifier";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDescriptor {
    /// `blocks.<b>.<w_q|w_k|w_v|w_o|w_1|w_2>` or `classifier`.
    pub name: String,
    /// `[out, in]`.
    pub shape: [usize; 2],
    /// Real value of one integer step.
    pub scale: f64,
    /// Firing threshold of the LIF bank fed by this tensor.
    pub threshold: i32,
    /// Byte offset into the weights file.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightManifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub weights_file: String,
    pub tensors: Vec<TensorDescriptor>,
    /// Additive rate-domain position embedding, `tokens x d_model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<Vec<f64>>>,
}

fn block_name(b: usize, field: &str) -> String {
    format!("blocks.{b}.{field}")
}

fn expected_shapes(cfg: &ModelConfig) -> Vec<(String, [usize; 2])> {
    let (d, f) = (cfg.d_model, cfg.ffn_dim);
    let mut out = Vec::new();
    for b in 0..cfg.depth {
        for (field, shape) in BLOCK_TENSORS.iter().zip([[d, d], [d, d], [d, d], [d, d], [f, d], [d, f]]) {
            out.push((block_name(b, field), shape));
        }
    }
    if let Some(c) = cfg.classes {
        out.push((CLASSIFIER.to_string(), [c, d]));
    }
    out
}

impl WeightManifest {
    /// Manifest and weight blob for a model. Tensors are laid out back to back
    /// in declaration order.
    pub fn from_model(model: &Model) -> (Self, Vec<u8>) {
        let mut tensors = Vec::new();
        let mut blob = Vec::new();
        let mut push = |name: String, w: &IntMatrix, scale: f64, threshold: i32| {
            tensors.push(TensorDescriptor {
                name,
                shape: [w.rows(), w.cols()],
                scale,
                threshold,
                offset: blob.len() as u64,
            });
            blob.extend(w.as_slice().iter().map(|&v| v as i8 as u8));
        };
        for (b, lw) in model.blocks.iter().enumerate() {
            let th = &lw.thresholds;
            let ths = [th.q, th.k, th.v, th.o, th.ffn1, th.ffn2];
            for (i, (field, w)) in lw.matrices().into_iter().enumerate() {
                push(block_name(b, field), w, lw.scales[i], ths[i]);
            }
        }
        if let Some(c) = &model.classifier {
            push(CLASSIFIER.to_string(), &c.w, c.scale, c.threshold);
        }
        let manifest = Self {
            format_version: FORMAT_VERSION,
            config: model.config.clone(),
            weights_file: WEIGHTS_FILE.to_string(),
            tensors,
            position: model.position.as_ref().map(|p| p.to_rows()),
        };
        (manifest, blob)
    }

    /// Rebuild the model from the manifest and its blob, validating coverage,
    /// shapes, bounds, and weight range.
    pub fn to_model(&self, blob: &[u8]) -> CliResult<Model> {
        let bad = |d: String| CliError::malformed("manifest", d);
        if self.format_version != FORMAT_VERSION {
            return Err(bad(format!("format_version {} (expected {FORMAT_VERSION})", self.format_version)));
        }
        let cfg = &self.config;
        cfg.validate().map_err(|e| bad(format!("config: {e}")))?;

        let mut by_name: BTreeMap<&str, &TensorDescriptor> = BTreeMap::new();
        for t in &self.tensors {
            if by_name.insert(&t.name, t).is_some() {
                return Err(bad(format!("tensor {} listed twice", t.name)));
            }
        }
        let expected = expected_shapes(cfg);
        if let Some(extra) = by_name.keys().find(|n| !expected.iter().any(|(e, _)| e == *n)) {
            return Err(bad(format!("unexpected tensor {extra}")));
        }

        let mut mats: BTreeMap<String, (IntMatrix, f64, i32)> = BTreeMap::new();
        for (name, shape) in &expected {
            let t = by_name.get(name.as_str()).ok_or_else(|| bad(format!("missing tensor {name}")))?;
            if t.shape != *shape {
                return Err(CliError::Dimension(format!(
                    "{name} is {}x{}, config implies {}x{}",
                    t.shape[0], t.shape[1], shape[0], shape[1]
                )));
            }
            if !(t.scale.is_finite() && t.scale > 0.0) {
                return Err(bad(format!("{name}: scale {} must be positive", t.scale)));
            }
            if t.threshold < 1 {
                return Err(bad(format!("{name}: threshold {} must be at least 1", t.threshold)));
            }
            let len = shape[0] * shape[1];
            let start = usize::try_from(t.offset).map_err(|_| bad(format!("{name}: offset too large")))?;
            let bytes = start
                .checked_add(len)
                .and_then(|end| blob.get(start..end))
                .ok_or_else(|| bad(format!("{name}: bytes {start}..{} beyond a {}-byte weights file", start + len, blob.len())))?;
            let values: Vec<i32> = bytes.iter().map(|&b| b as i8 as i32).collect();
            if let Some(v) = values.iter().find(|v| v.abs() > MAX_WEIGHT) {
                return Err(bad(format!("{name}: weight {v} outside [-{MAX_WEIGHT}, {MAX_WEIGHT}]")));
            }
            let m = IntMatrix::from_vec(shape[0], shape[1], values)?;
            mats.insert(name.clone(), (m, t.scale, t.threshold));
        }

        let blocks = (0..cfg.depth)
            .map(|b| {
                let mut take = |f: &str| mats.remove(&block_name(b, f)).expect("validated above");
                let [q, k, v, o, w1, w2] = BLOCK_TENSORS.map(&mut take);
                LayerWeights {
                    scales: [q.1, k.1, v.1, o.1, w1.1, w2.1],
                    thresholds: BlockThresholds { q: q.2, k: k.2, v: v.2, o: o.2, ffn1: w1.2, ffn2: w2.2 },
                    w_q: q.0,
                    w_k: k.0,
                    w_v: v.0,
                    w_o: o.0,
                    w_1: w1.0,
                    w_2: w2.0,
                }
            })
            .collect();
        let classifier = mats.remove(CLASSIFIER).map(|(w, scale, threshold)| ClassifierWeights { w, scale, threshold });
        let position = match &self.position {
            None => None,
            Some(rows) => {
                let p = RealMatrix::from_rows(rows).map_err(|e| bad(format!("position: {e}")))?;
                if (p.rows(), p.cols()) != (cfg.tokens, cfg.d_model) {
                    return Err(CliError::Dimension(format!(
                        "position embedding is {}x{}, expected {}x{}",
                        p.rows(),
                        p.cols(),
                        cfg.tokens,
                        cfg.d_model
                    )));
                }
                if p.as_slice().iter().any(|x| !x.is_finite()) {
                    return Err(bad("position: non-finite value".into()));
                }
                Some(p)
            }
        };
        let model = Model { config: cfg.clone(), blocks, classifier, position };
        model.check(MAX_WEIGHT)?;
        Ok(model)
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn load_model(dir: &Path) -> CliResult<Model> {
    let text = read(&dir.join(MANIFEST_FILE))?;
    let manifest: WeightManifest =
        serde_json::from_slice(&text).map_err(|e| CliError::malformed(MANIFEST_FILE, e))?;
    if Path::new(&manifest.weights_file).components().count() != 1 {
        return Err(CliError::malformed(MANIFEST_FILE, "weights_file must be a plain file name"));
    }
    let blob = read(&dir.join(&manifest.weights_file))?;
    manifest.to_model(&blob)
}

pub fn save_model(model: &Model, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let (manifest, blob) = WeightManifest::from_model(model);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST_FILE), format!("{text}\n").as_bytes())?;
    write_file(&dir.join(&manifest.weights_file), &blob)
}
