//! Oracle self-test suite. `Scale::Full` runs every check at acceptance size.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use xpikesim_core::aimc::{
    gdc_apply, gdc_calibrate, program_crossbar, AimcConfig, AimcLayer, CrossbarTile, DriftModel, HwConfig, NoiseModel,
};
use xpikesim_core::cost::{cost_report, paper_calib, preset_config, Component, Impl};
use xpikesim_core::matrix::{IntMatrix, RateMatrix};
use xpikesim_core::model::{default_threshold, run_inference, Arch, Model, ModelConfig, ProgrammedModel, RunOptions, TokenBatch};
use xpikesim_core::oracle::{ideal_mvm_int, rate_attention, reference_lif_layer};
use xpikesim_core::spike::{bernoulli_encode, domain, stochastic_and, unit_base, BitMatrix, LfsrStream, RateValue, SpikeTensor};
use xpikesim_core::ssa::{ssa_attend, ssa_attend_streaming, HeadActivations, SsaConfig, SsaStreams};
use xpikesim_core::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick(self, quick: usize, full: usize) -> usize {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {:<24} {} ({:.2}s)", self.name, self.detail, self.seconds)
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn random_bits(rng: &mut impl Rng, rows: usize, cols: usize, p: f64) -> BitMatrix {
    BitMatrix::from_fn(rows, cols, |_, _| rng.random_bool(p))
}

fn random_weights(rng: &mut impl Rng, rows: usize, cols: usize, max: i32) -> IntMatrix {
    IntMatrix::from_fn(rows, cols, |_, _| rng.random_range(-max..=max))
}

/// AND of two independent Bernoulli trains over the 9x9 grid of rates.
pub fn stochastic_multiply(steps: usize, seed: u64) -> Check {
    timed("stochastic_multiply", || {
        let start = Instant::now();
        let base = unit_base(domain::INPUT_ENCODER, 0xFFFF, 0);
        let mut within = 0;
        let mut worst = 0.0f64;
        // Same residual against the product of the 8-bit encoded rates.
        let mut worst_encoded = 0.0f64;
        for a in 1..=9 {
            for b in 1..=9 {
                let (x1, x2) = (a as f64 / 10.0, b as f64 / 10.0);
                let id = base + 2 * (a * 10 + b) as u64;
                let s1 = bernoulli_encode(RateValue::saturating(x1), steps, &mut LfsrStream::for_unit(seed, id));
                let s2 = bernoulli_encode(RateValue::saturating(x2), steps, &mut LfsrStream::for_unit(seed, id + 1));
                let rate = stochastic_and(&s1, &s2)?.count_ones() as f64 / steps as f64;
                let p = x1 * x2;
                let z = (rate - p).abs() / (p * (1.0 - p) / steps as f64).sqrt();
                worst = worst.max(z);
                let q = (x1 * 256.0).round() * (x2 * 256.0).round() / 65536.0;
                worst_encoded = worst_encoded.max((rate - q).abs() / (q * (1.0 - q) / steps as f64).sqrt());
                within += (z <= 4.0) as usize;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let ok = within as f64 >= 0.99 * 81.0 && secs < 10.0;
        Ok((ok, format!(
            "{within}/81 within 4 sigma, worst {worst:.2} sigma ({worst_encoded:.2} vs encoded rates), T={steps}, {secs:.2}s"
        )))
    })
}

fn constant_head(rng: &mut impl Rng, n: usize, dk: usize, steps: usize) -> Result<(HeadActivations, RateMatrix)> {
    let (q, k, v) = (random_bits(rng, dk, n, 0.5), random_bits(rng, dk, n, 0.5), random_bits(rng, dk, n, 0.5));
    let rates = |b: &BitMatrix| RateMatrix::from_fn(dk, n, |r, c| b.get(r, c) as u8 as f64);
    let expect = rate_attention(&rates(&q), &rates(&k), &rates(&v), false)?;
    let head = HeadActivations::new(vec![q; steps], vec![k; steps], vec![v; steps])?;
    Ok((head, expect))
}

/// Time-averaged attention against the rate expectation, and its decay
/// with the encoding length.
pub fn ssa_expectation(instances: usize, seed: u64) -> Check {
    timed("ssa_expectation", || {
        let (n, dk) = (8, 16);
        let lengths = [256usize, 1024, 4096];
        let mut mean_err = [0.0f64; 3];
        let mut worst_final = 0.0f64;
        for inst in 0..instances {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (inst as u64).wrapping_mul(0x9E37));
            let (one, expect) = constant_head(&mut rng, n, dk, 1)?;
            for (li, &t) in lengths.iter().enumerate() {
                let head = HeadActivations::new(vec![one.q[0].clone(); t], vec![one.k[0].clone(); t], vec![one.v[0].clone(); t])?;
                let cfg = SsaConfig::new(n, dk, false, t)?;
                let streams = SsaStreams::new(seed.wrapping_add(t as u64), inst, 0);
                let err = ssa_attend(&head, &cfg, &streams)?.rates().max_abs_diff(&expect);
                mean_err[li] += err / instances as f64;
                if li == lengths.len() - 1 {
                    worst_final = worst_final.max(err);
                }
            }
        }
        let xs: Vec<f64> = lengths.iter().map(|&t| (t as f64).ln()).collect();
        let ys: Vec<f64> = mean_err.iter().map(|e| e.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let ok = worst_final <= 0.04 && (-0.6..=-0.4).contains(&slope);
        Ok((ok, format!("max error {worst_final:.4} at T=4096 over {instances} instances, slope {slope:.3}")))
    })
}

/// Cycle-level SAC pipeline against the functional evaluator.
pub fn streaming_equivalence(configs: usize, seed: u64) -> Check {
    timed("streaming_equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut equal = 0;
        for c in 0..configs {
            let n = 1usize << rng.random_range(1..=4);
            let dk = 1usize << rng.random_range(1..=5);
            let t = rng.random_range(1..=64);
            let causal = rng.random_bool(0.5);
            let p = rng.random_range(0.1..0.9);
            let seq = |rng: &mut ChaCha8Rng| (0..t).map(|_| random_bits(rng, dk, n, p)).collect::<Vec<_>>();
            let head = HeadActivations::new(seq(&mut rng), seq(&mut rng), seq(&mut rng))?;
            let cfg = SsaConfig::new(n, dk, causal, t)?;
            let streams = SsaStreams::new(seed ^ c as u64, c, 0);
            let (streamed, _) = ssa_attend_streaming(&head, &cfg, &streams)?;
            equal += (streamed == ssa_attend(&head, &cfg, &streams)?) as usize;
        }
        Ok((equal == configs, format!("{equal}/{configs} configs bit-identical")))
    })
}

/// A 384x512 layer split over twelve tiles against the monolithic
/// integer MVM + LIF reference.
pub fn partition_invariance(inputs: usize, seed: u64) -> Check {
    timed("partition_invariance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_weights(&mut rng, 384, 512, 15);
        let threshold = default_threshold(512, 0.5);
        let layer = AimcLayer::program(&w, threshold, &HwConfig::ideal(), seed, 0, 0.0)?;
        let mut equal = 0;
        for _ in 0..inputs {
            let p = rng.random_range(0.05..0.95);
            let x = SpikeTensor::from_fn(1, 8, 512, |_, _, _| rng.random_bool(p));
            let (got, _) = layer.forward(&x, 0.0, None, None)?;
            equal += (got == reference_lif_layer(&w, threshold, &x, None)?) as usize;
        }
        Ok((equal == inputs && layer.tiles.len() == 12, format!("{equal}/{inputs} inputs bit-identical over {} tiles", layer.tiles.len())))
    })
}

/// Noise-free crossbar with an ideal ADC against the exact integer MVM.
pub fn crossbar_oracle(cases: usize, seed: u64) -> Check {
    timed("crossbar_oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = AimcConfig::ideal();
        let mut equal = 0;
        for _ in 0..cases {
            let w = random_weights(&mut rng, 128, 128, 15);
            let p = rng.random_range(0.0..1.0);
            let bits: Vec<bool> = (0..128).map(|_| rng.random_bool(p)).collect();
            let tile = program_crossbar(&w, &cfg, &NoiseModel::off(), &DriftModel::off(), 0.0, &mut rng)?;
            let got = xpikesim_core::aimc::crossbar_mvm(&tile, &bits, 0.0, &mut rng)?;
            let want = ideal_mvm_int(&w, &bits)?;
            equal += got.iter().zip(&want).all(|(&g, &e)| g as i64 == e) as usize;
        }
        Ok((equal == cases, format!("{equal}/{cases} cases exact")))
    })
}

fn drifted_tile(rng: &mut ChaCha8Rng, drift: DriftModel) -> Result<(IntMatrix, CrossbarTile)> {
    let w = random_weights(rng, 128, 128, 15);
    let tile = program_crossbar(&w, &AimcConfig::ideal(), &NoiseModel::off(), &drift, 0.0, rng)?;
    Ok((w, tile))
}

/// Drift compensation: exact recovery under a uniform exponent, and a strict
/// error reduction under device-to-device spread.
pub fn drift_gdc(trials: usize, seed: u64) -> Check {
    timed("drift_gdc", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = 1e6;
        let (w, tile) = drifted_tile(&mut rng, DriftModel { nu_mean: 0.05, nu_sigma: 0.0, t0: 1.0 })?;
        let rec = gdc_calibrate(&[&tile], 64, t, seed)?;
        let readout = tile.readout(t)?;
        let mut worst_lsb = 0i64;
        for _ in 0..20 {
            let bits: Vec<bool> = (0..128).map(|_| rng.random_bool(0.5)).collect();
            let raw = readout.mvm(&bits, &mut rng)?;
            for (r, e) in raw.iter().zip(ideal_mvm_int(&w, &bits)?) {
                worst_lsb = worst_lsb.max((gdc_apply(*r as i64, &rec) - e).abs());
            }
        }

        let mut improved = 0;
        for _ in 0..trials {
            let (w, tile) = drifted_tile(&mut rng, DriftModel::default())?;
            let rec = gdc_calibrate(&[&tile], 64, t, rng.random())?;
            let readout = tile.readout(t)?;
            let (mut pre, mut post, mut norm) = (0.0, 0.0, 0.0);
            for _ in 0..10 {
                let bits: Vec<bool> = (0..128).map(|_| rng.random_bool(0.5)).collect();
                let raw = readout.mvm(&bits, &mut rng)?;
                for (r, e) in raw.iter().zip(ideal_mvm_int(&w, &bits)?) {
                    pre += (*r as i64 - e).abs() as f64;
                    post += (gdc_apply(*r as i64, &rec) - e).abs() as f64;
                    norm += e.abs() as f64;
                }
            }
            improved += (post / norm < pre / norm) as usize;
        }
        let ok = worst_lsb <= 1 && improved == trials;
        Ok((ok, format!("uniform: worst {worst_lsb} LSB (alpha {:.4}); spread: {improved}/{trials} improved", rec.alpha)))
    })
}

/// Breakdown of the accelerator's energy on the large preset.
pub fn cost_breakdown() -> Check {
    timed("cost_breakdown", || {
        let start = Instant::now();
        let cfg = preset_config("vit-8-768")?;
        let table = paper_calib();
        let x = cost_report(&cfg, Impl::Xpikeformer, &table)?;
        let ann = cost_report(&cfg, Impl::AnnQuant, &table)?;
        let secs = start.elapsed().as_secs_f64();
        let (aimc, ssa, other) = (x.aimc_share, x.share(Component::Ssa), x.share(Component::Other));
        let mac = ann.mac_share();
        let ok = (aimc - 0.784).abs() <= 0.07
            && (ssa - 0.189).abs() <= 0.07
            && (other - 0.027).abs() <= 0.03
            && mac > 0.9
            && secs < 1.0;
        Ok((
            ok,
            format!("aimc {:.1}% ssa {:.1}% other {:.1}%, ANN MAC share {:.1}%", aimc * 100.0, ssa * 100.0, other * 100.0, mac * 100.0),
        ))
    })
}

/// Energy ratios of the digital baselines on both large presets.
pub fn baseline_ratios() -> Check {
    timed("baseline_ratios", || {
        let table = paper_calib();
        let mut ok = true;
        let mut parts = Vec::new();
        for name in ["vit-8-768", "vit-6-512"] {
            let cfg = preset_config(name)?;
            let x = cost_report(&cfg, Impl::Xpikeformer, &table)?.total_pj;
            let ann = cost_report(&cfg, Impl::AnnQuant, &table)?.total_pj / x;
            let snn = cost_report(&cfg, Impl::SnnDigiOpt, &table)?.total_pj / x;
            ok &= (9.6 * 0.7..=13.0 * 1.3).contains(&ann) && (1.8 * 0.8..=1.9 * 1.2).contains(&snn);
            parts.push(format!("{name}: ann {ann:.2}x snn {snn:.2}x"));
        }
        Ok((ok, parts.join(", ")))
    })
}

/// Decoder outputs for token n do not depend on tokens after n.
pub fn decoder_causality(trials: usize, seed: u64) -> Check {
    timed("decoder_causality", || {
        let cfg = ModelConfig::new(Arch::Decoder, 2, 16, 2, 8, 32);
        let pm = ProgrammedModel::program(Model::random(cfg, seed, 15), &HwConfig::default(), seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row = |rng: &mut ChaCha8Rng| (0..16).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
        let mut held = 0;
        for _ in 0..trials {
            let rows: Vec<Vec<f64>> = (0..8).map(|_| row(&mut rng)).collect();
            let n = rng.random_range(0..7);
            let mut changed = rows.clone();
            for r in changed.iter_mut().skip(n + 1) {
                *r = row(&mut rng);
            }
            let run = |rows: &[Vec<f64>]| run_inference(&pm, &TokenBatch::from_rows(rows)?, 100.0, &RunOptions::default());
            let (a, b) = (run(&rows)?, run(&changed)?);
            held += (a.output_rates[..=n] == b.output_rates[..=n]) as usize;
        }
        Ok((held == trials, format!("{held}/{trials} trials unchanged up to the perturbed token")))
    })
}

pub fn run_all(scale: Scale, seed: u64) -> Vec<Check> {
    vec![
        stochastic_multiply(scale.pick(10_000, 100_000), seed),
        ssa_expectation(scale.pick(4, 20), seed),
        streaming_equivalence(scale.pick(20, 100), seed),
        partition_invariance(scale.pick(5, 50), seed),
        crossbar_oracle(scale.pick(50, 1000), seed),
        drift_gdc(scale.pick(10, 100), seed),
        cost_breakdown(),
        baseline_ratios(),
        decoder_causality(scale.pick(10, 50), seed),
    ]
}
