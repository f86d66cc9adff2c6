//! Least-squares calibration of the free energy constants against a target
//! breakdown and target energy ratios.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{count_ops, estimate_energy, preset_config, Component, EnergyTable, Impl, OpKind};
use crate::error::Result;
use crate::model::ModelConfig;

/// Per-op energies held fixed during the fit, pJ.
const FIXED: [(OpKind, f64); 8] = [
    (OpKind::Mac8, 0.23),
    (OpKind::Add8, 0.03),
    (OpKind::Mul8, 0.2),
    (OpKind::Softmax, 2.0),
    (OpKind::LayerNorm, 1.0),
    (OpKind::Gelu, 0.5),
    (OpKind::CrossbarRead, 0.001),
    (OpKind::LifUpdate, 0.1),
];

/// Relative cost of the attention-tile primitives, in units of one AND.
const SSA_RELATIVE: [(OpKind, f64); 6] = [
    (OpKind::And, 1.0),
    (OpKind::CounterInc, 2.0),
    (OpKind::FifoShift, 1.0),
    (OpKind::Comparator, 8.0),
    (OpKind::LfsrByte, 8.0),
    (OpKind::AdderTree, 1.0),
];

/// Names of the fitted parameters, in parameter-vector order.


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitTargets {
    pub large: String,
    pub small: String,
    /// Compute-energy shares of the accelerator on the large config.
    pub aimc_share: f64,
    pub ssa_share: f64,
    pub other_share: f64,
    /// Crossbar sub-shares on the large config.
    pub periphery: f64,
    pub accumulation: f64,
    pub adc: f64,
    /// Total-energy ratios to the accelerator.
    pub ann_ratio_large: f64,
    pub ann_ratio_small: f64,
    pub snn_ratio_large: f64,
    pub snn_ratio_small: f64,
    /// SRAM energy per byte, held fixed.
    pub sram_byte: f64,
}

impl Default for FitTargets {
    fn default() -> Self {
        Self {
            large: "vit-8-768".into(),
            small: "vit-6-512".into(),
            aimc_share: 0.784,
            ssa_share: 0.189,
            other_share: 0.027,
            periphery: 0.859,
            accumulation: 0.121,
            adc: 0.020,
            ann_ratio_large: 13.0,
            ann_ratio_small: 9.6,
            snn_ratio_large: 1.9,
            snn_ratio_small: 1.8,
            sram_byte: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub table: EnergyTable,
    /// Log-ratio residuals at the optimum.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn table_from(params: &[f64], sram: f64) -> EnergyTable {
    let e: Vec<f64> = params.iter().map(|p| p.exp()).collect();
    let mut m: BTreeMap<OpKind, f64> = FIXED.into_iter().collect();
    m.insert(OpKind::SramByte, sram);
    m.insert(OpKind::PeripheryRead, e[0]);
    m.insert(OpKind::CsaAdd, e[1]);
    m.insert(OpKind::AdcConversion, e[2]);
    for (op, rel) in SSA_RELATIVE {
        m.insert(op, rel * e[3]);
    }
    m.insert(OpKind::ResidualAdd, e[4]);
    m.insert(OpKind::MaskedAdd, e[5]);
    EnergyTable { id: "paper-calib".into(), energy_pj: m }
}

fn total(cfg: &ModelConfig, imp: Impl, t: &EnergyTable) -> Result<f64> {
    Ok(estimate_energy(&count_ops(cfg, imp)?, t)?.total_pj)
}

fn residuals(params: &[f64], tg: &FitTargets, large: &ModelConfig, small: &ModelConfig) -> Result<Vec<f64>> {
    let t = table_from(params, tg.sram_byte);
    let x = estimate_energy(&count_ops(large, Impl::Xpikeformer)?, &t)?;
    let x_small = estimate_energy(&count_ops(small, Impl::Xpikeformer)?, &t)?;
    let b = &x.aimc_breakdown;
    let r = |got: f64, want: f64| (got / want).ln();
    Ok(vec![
        r(x.aimc_share, tg.aimc_share),
        r(x.share(Component::Ssa), tg.ssa_share),
        r(x.share(Component::Other), tg.other_share),
        r(b.periphery, tg.periphery),
        r(b.accumulation, tg.accumulation),
        r(b.adc, tg.adc),
        r(total(large, Impl::AnnQuant, &t)? / x.total_pj, tg.ann_ratio_large),
        r(total(small, Impl::AnnQuant, &t)? / x_small.total_pj, tg.ann_ratio_small),
        r(total(large, Impl::SnnDigiOpt, &t)? / x.total_pj, tg.snn_ratio_large),
        r(total(small, Impl::SnnDigiOpt, &t)? / x_small.total_pj, tg.snn_ratio_small),
    ])
}

/// Levenberg-Marquardt on log-energies, minimizing squared log-ratio errors
/// of the six breakdown shares and four energy ratios. Deterministic: fixed
/// start point, finite-difference Jacobian.
pub fn fit_energy_table(tg: &FitTargets) -> Result<FitReport> {
    let large = preset_config(&tg.large)?;
    let small = preset_config(&tg.small)?;
    let res = |p: &[f64]| residuals(p, tg, &large, &small);
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();

    let mut p: Vec<f64> = [1.0f64, 0.1, 0.1, 0.01, 0.03, 0.01].iter().map(|v| v.ln()).collect();
    let mut r = res(&p)?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it + 1;
        let h = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(r.len(), p.len());
        for k in 0..p.len() {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[k] += h;
            lo[k] -= h;
            let (rh, rl) = (res(&hi)?, res(&lo)?);
            for i in 0..r.len() {
                jac[(i, k)] = (rh[i] - rl[i]) / (2.0 * h);
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * rv;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..p.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 4.0;
                continue;
            };
            let cand: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rc = res(&cand)?;
            if cost(&rc) < cost(&r) {
                let small_step = step.norm() < 1e-10;
                p = cand;
                r = rc;
                lambda = (lambda / 3.0).max(1e-12);
                improved = !small_step;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok(FitReport { table: table_from(&p, tg.sram_byte), residuals: r, iterations })
}
