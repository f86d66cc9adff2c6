//! Analytical op counts, energy, and pipeline latency for the accelerator and
//! three reference implementations (8-bit ANN, 8-bit ANN with crossbar
//! linear layers, digital SNN).

mod counts;
mod fit;
mod latency;
mod presets;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;

pub use counts::count_ops;
pub use fit::{fit_energy_table, FitReport, FitTargets};
pub use latency::{estimate_latency, ssa_head_cycles, LatencyReport, StageLatency, DEFAULT_DIGITAL_LANES};
pub use presets::{paper_calib, preset_config, PRESET_NAMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impl {
    Xpikeformer,
    AnnQuant,
    AnnQuantAimc,
    SnnDigiOpt,
}

impl Impl {
    pub const ALL: [Impl; 4] = [Impl::Xpikeformer, Impl::AnnQuant, Impl::AnnQuantAimc, Impl::SnnDigiOpt];

    pub fn name(self) -> &'static str {
        match self {
            Impl::Xpikeformer => "xpikeformer",
            Impl::AnnQuant => "ann_quant",
            Impl::AnnQuantAimc => "ann_quant_aimc",
            Impl::SnnDigiOpt => "snn_digi_opt",
        }
    }

    pub fn is_spiking(self) -> bool {
        matches!(self, Impl::Xpikeformer | Impl::SnnDigiOpt)
    }
}

impl fmt::Display for Impl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Impl {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Impl::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::UnknownImpl(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    AimcCore,
    AimcPeriphery,
    AimcAccumulation,
    Adc,
    Ssa,
    Linear,
    Attention,
    Nonlinear,
    Other,
    Memory,
}

impl Component {
    pub fn is_memory(self) -> bool {
        self == Component::Memory
    }

    pub fn is_aimc(self) -> bool {
        matches!(
            self,
            Component::AimcCore | Component::AimcPeriphery | Component::AimcAccumulation | Component::Adc
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Mac8,
    Add8,
    Mul8,
    MaskedAdd,
    Softmax,
    LayerNorm,
    Gelu,
    CrossbarRead,
    PeripheryRead,
    AdcConversion,
    CsaAdd,
    LifUpdate,
    And,
    CounterInc,
    FifoShift,
    Comparator,
    LfsrByte,
    AdderTree,
    ResidualAdd,
    SramByte,
}

/// Op counts keyed by (component, op). Counts are reals because some terms
/// are byte fractions of bit traffic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<OpCount>", into = "Vec<OpCount>")]
pub struct OpCounts {
    map: BTreeMap<(Component, OpKind), f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpCount {
    pub component: Component,
    pub op: OpKind,
    pub count: f64,
}

impl From<Vec<OpCount>> for OpCounts {
    fn from(v: Vec<OpCount>) -> Self {
        let mut c = OpCounts::default();
        for e in v {
            c.add(e.component, e.op, e.count);
        }
        c
    }
}

impl From<OpCounts> for Vec<OpCount> {
    fn from(c: OpCounts) -> Self {
        c.map.into_iter().map(|((component, op), count)| OpCount { component, op, count }).collect()
    }
}

impl OpCounts {
    pub fn add(&mut self, component: Component, op: OpKind, count: f64) {
        *self.map.entry((component, op)).or_insert(0.0) += count;
    }

    pub fn get(&self, component: Component, op: OpKind) -> f64 {
        self.map.get(&(component, op)).copied().unwrap_or(0.0)
    }

    /// Sum of one op kind over every component.
    pub fn op_total(&self, op: OpKind) -> f64 {
        self.map.iter().filter(|((_, o), _)| *o == op).map(|(_, v)| v).sum()
    }

    pub fn component_total(&self, component: Component) -> f64 {
        self.map.iter().filter(|((c, _), _)| *c == component).map(|(_, v)| v).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Component, OpKind, f64)> + '_ {
        self.map.iter().map(|(&(c, o), &v)| (c, o, v))
    }

    pub fn remove_op(&mut self, op: OpKind) {
        self.map.retain(|(_, o), _| *o != op);
    }

    /// Every count multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self { map: self.map.iter().map(|(key, v)| (*key, v * k)).collect() }
    }
}

/// Energy per op in pJ; `sram_byte` is per byte of runtime SRAM traffic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyTable {
    pub id: String,
    pub energy_pj: BTreeMap<OpKind, f64>,
}

impl EnergyTable {
    pub fn validate(&self) -> Result<()> {
        if let Some((op, e)) = self.energy_pj.iter().find(|(_, e)| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Config(format!("energy for {op:?} must be positive, got {e}")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn get(&self, op: OpKind) -> Result<f64> {
        self.energy_pj
            .get(&op)
            .copied()
            .ok_or_else(|| Error::MissingEnergy { table: self.id.clone(), op: format!("{op:?}") })
    }
}

/// Energy of the crossbar engine split the way its breakdown is reported.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AimcBreakdown {
    /// Array reads plus periphery (drivers, sense, mux).
    pub periphery: f64,
    pub accumulation: f64,
    pub adc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub implementation: Option<Impl>,
    pub table: String,
    pub energy_pj: BTreeMap<Component, f64>,
    pub compute_pj: f64,
    pub memory_pj: f64,
    pub total_pj: f64,
    /// Share of compute energy per compute component.
    pub shares: BTreeMap<Component, f64>,
    /// Share of compute energy spent in the crossbar engine.
    pub aimc_share: f64,
    /// Crossbar sub-shares (of crossbar energy).
    pub aimc_breakdown: AimcBreakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyReport>,
}

impl CostReport {
    pub fn share(&self, c: Component) -> f64 {
        self.shares.get(&c).copied().unwrap_or(0.0)
    }

    /// Share of compute energy in MAC-type work (linear and attention).
    pub fn mac_share(&self) -> f64 {
        self.share(Component::Linear) + self.share(Component::Attention)
    }
}

/// Dot product of counts with the table, grouped by component.
pub fn estimate_energy(counts: &OpCounts, table: &EnergyTable) -> Result<CostReport> {
    let mut energy: BTreeMap<Component, f64> = BTreeMap::new();
    for (c, op, n) in counts.iter() {
        *energy.entry(c).or_insert(0.0) += n * table.get(op)?;
    }
    let memory_pj = energy.get(&Component::Memory).copied().unwrap_or(0.0);
    let compute_pj: f64 = energy.iter().filter(|(c, _)| !c.is_memory()).map(|(_, e)| e).sum();
    let shares: BTreeMap<Component, f64> = energy
        .iter()
        .filter(|(c, _)| !c.is_memory())
        .map(|(&c, &e)| (c, if compute_pj > 0.0 { e / compute_pj } else { 0.0 }))
        .collect();
    let aimc: f64 = energy.iter().filter(|(c, _)| c.is_aimc()).map(|(_, e)| e).sum();
    let part = |cs: &[Component]| -> f64 {
        let e: f64 = cs.iter().map(|c| energy.get(c).copied().unwrap_or(0.0)).sum();
        if aimc > 0.0 { e / aimc } else { 0.0 }
    };
    Ok(CostReport {
        implementation: None,
        table: table.id.clone(),
        aimc_share: if compute_pj > 0.0 { aimc / compute_pj } else { 0.0 },
        aimc_breakdown: AimcBreakdown {
            periphery: part(&[Component::AimcCore, Component::AimcPeriphery]),
            accumulation: part(&[Component::AimcAccumulation]),
            adc: part(&[Component::Adc]),
        },
        energy_pj: energy,
        compute_pj,
        memory_pj,
        total_pj: compute_pj + memory_pj,
        shares,
        latency: None,
    })
}

/// Counts, energy and latency of one implementation.
pub fn cost_report(cfg: &ModelConfig, imp: Impl, table: &EnergyTable) -> Result<CostReport> {
    let mut r = estimate_energy(&count_ops(cfg, imp)?, table)?;
    r.implementation = Some(imp);
    r.latency = Some(estimate_latency(cfg, imp, &crate::aimc::AimcConfig::default())?);
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub implementation: Impl,
    pub steps: Option<usize>,
    pub total_pj: f64,
    /// Energy relative to the accelerator.
    pub ratio: f64,
}

/// Energy of each implementation relative to the accelerator, each spiking
/// implementation at its own encoding length.
pub fn compare_baselines(cfg: &ModelConfig, table: &EnergyTable) -> Result<Vec<BaselineRow>> {
    let reference = estimate_energy(&count_ops(cfg, Impl::Xpikeformer)?, table)?.total_pj;
    Impl::ALL
        .into_iter()
        .map(|imp| {
            let total = estimate_energy(&count_ops(cfg, imp)?, table)?.total_pj;
            let steps = match imp {
                Impl::Xpikeformer => Some(cfg.steps),
                Impl::SnnDigiOpt => Some(cfg.snn_steps.unwrap_or(cfg.steps)),
                _ => None,
            };
            Ok(BaselineRow { implementation: imp, steps, total_pj: total, ratio: total / reference })
        })
        .collect()
}
