use super::EnergyTable;
use crate::error::{Error, Result};
use crate::model::{Arch, ModelConfig};

pub const PRESET_NAMES: [&str; 3] = ["vit-8-768", "vit-6-512", "vit-4-384-cifar"];

/// Named model shapes. Steps are the minimum encoding lengths used for the
/// accelerator (`steps`) and the digital SNN (`snn_steps`).
pub fn preset_config(name: &str) -> Result<ModelConfig> {
    let (depth, d, heads, tokens, steps, snn, input, classes) = match name {
        "vit-8-768" => (8, 768, 12, 196, 7, 4, 768, 1000),
        "vit-6-512" => (6, 512, 8, 196, 8, 6, 768, 1000),
        "vit-4-384-cifar" => (4, 384, 12, 64, 11, 5, 48, 10),
        other => return Err(Error::Config(format!("unknown preset {other:?}; known: {PRESET_NAMES:?}"))),
    };
    let mut cfg = ModelConfig::new(Arch::Encoder, depth, d, heads, tokens, steps);
    cfg.snn_steps = Some(snn);
    cfg.input_dim = Some(input);
    cfg.classes = Some(classes);
    Ok(cfg)
}

/// The frozen calibrated energy table.
pub fn paper_calib() -> EnergyTable {
    EnergyTable::from_json(include_str!("../../../../presets/paper-calib.json")).expect("bundled table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            let c = preset_config(name).unwrap();
            c.validate_shapes().unwrap();
            assert_eq!(c.ffn_dim, 4 * c.d_model);
        }
        assert!(preset_config("vit-1-1").is_err());
    }
}
