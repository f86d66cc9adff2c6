use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xpikesim_core::model::{run_inference, Arch, Model, ModelConfig, ProgrammedModel, RunOptions, TokenBatch};
use xpikesim_core::HwConfig;

#[test]
fn oracle_gap_shrinks_with_encoding_length() {
    let trials = 20;
    let mut monotone = 0;
    for trial in 0..trials {
        let arch = if trial % 2 == 0 { Arch::Encoder } else { Arch::Decoder };
        let cfg = ModelConfig::new(arch, 1, 16, 2, 4, 256);
        let pm = ProgrammedModel::program(Model::random(cfg, trial, 15), &HwConfig::ideal(), trial).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..16).map(|_| rng.random()).collect()).collect();
        let batch = TokenBatch::from_rows(&rows).unwrap();
        let gaps: Vec<f64> = [256, 1024, 4096]
            .iter()
            .map(|&t| {
                let opts = RunOptions { steps: Some(t), oracle: true, ..RunOptions::default() };
                let gap = run_inference(&pm, &batch, 0.0, &opts).unwrap().oracle.unwrap();
                assert_eq!(gap.linear_exact, Some(true));
                gap.median
            })
            .collect();
        monotone += (gaps[1] <= gaps[0] && gaps[2] <= gaps[1]) as usize;
    }
    assert!(monotone * 10 >= trials as usize * 9, "{monotone}/{trials} monotone");
}
