//! Energy and latency attribution over instruction traces.
//!
//! Per-instruction energies come from measured efficiencies at the 200 MHz,
//! 0.85 V operating point. One op is one 11-bit operation; every CIM
//! instruction performs one per slot, so six per instruction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::{InstrKind, NeuronKind, NeuronModel, TraceEvent};
use crate::macro_core::{MacroConfig, SLOTS_PER_CYCLE, WEIGHTS_PER_ROW};
use crate::mapper::{map_network, LayerSpec};
use crate::runtime::Engine;

pub const ACCW2V_TOPS_PER_W: f64 = 0.99;
pub const ACCV2V_TOPS_PER_W: f64 = 1.18;
pub const RESETV_TOPS_PER_W: f64 = 1.02;
pub const SPIKECHECK_TOPS_PER_W: f64 = 1.22;
pub const DEFAULT_CLOCK_PERIOD_NS: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("energy table has no entry for {0}")]
    UnconfiguredKind(InstrKind),
    #[error("sparsity grid is empty")]
    EmptyGrid,
    #[error("sparsity {0} outside [0, 1]")]
    InvalidSparsity(f64),
    #[error("invalid energy table: {0}")]
    InvalidTable(String),
    #[error("sweep simulation failed: {0}")]
    Simulation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindCost {
    pub energy_pj: f64,
    pub cycles: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub clock_period_ns: f64,
    pub ops_per_acc_instruction: u64,
    pub instructions: BTreeMap<InstrKind, KindCost>,
}

/// The operating-point D table: energy = ops / (TOPS/W), one cycle each.
/// Plain reads and writes cost nothing until configured.
pub fn default_table() -> EnergyTable {
    let ops = SLOTS_PER_CYCLE as u64;
    let mut table = EnergyTable::empty(DEFAULT_CLOCK_PERIOD_NS, ops);
    for (kind, eff) in [
        (InstrKind::AccW2V, ACCW2V_TOPS_PER_W),
        (InstrKind::AccV2V, ACCV2V_TOPS_PER_W),
        (InstrKind::ResetV, RESETV_TOPS_PER_W),
        (InstrKind::SpikeCheck, SPIKECHECK_TOPS_PER_W),
    ] {
        table.set_efficiency(kind, eff);
    }
    for kind in [InstrKind::Read, InstrKind::Write] {
        table.instructions.insert(
            kind,
            KindCost {
                energy_pj: 0.0,
                cycles: 1,
            },
        );
    }
    table
}

impl Default for EnergyTable {
    fn default() -> Self {
        default_table()
    }
}

impl EnergyTable {
    pub fn empty(clock_period_ns: f64, ops_per_acc_instruction: u64) -> Self {
        EnergyTable {
            clock_period_ns,
            ops_per_acc_instruction,
            instructions: BTreeMap::new(),
        }
    }

    /// Eleven-bit ops credited to one instruction of `kind`.
    pub fn ops(&self, kind: InstrKind) -> u64 {
        if kind.is_cim() {
            self.ops_per_acc_instruction
        } else {
            0
        }
    }

    /// Sets `kind`'s energy from an efficiency in TOPS/W (= ops per pJ).
    pub fn set_efficiency(&mut self, kind: InstrKind, tops_per_watt: f64) {
        let cycles = self.instructions.get(&kind).map_or(1, |c| c.cycles);
        self.instructions.insert(
            kind,
            KindCost {
                energy_pj: self.ops(kind) as f64 / tops_per_watt,
                cycles,
            },
        );
    }

    pub fn cost(&self, kind: InstrKind) -> Result<KindCost, EnergyError> {
        self.instructions
            .get(&kind)
            .copied()
            .ok_or(EnergyError::UnconfiguredKind(kind))
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        if self.clock_period_ns.is_nan() || self.clock_period_ns <= 0.0 {
            return Err(EnergyError::InvalidTable(
                "clock_period_ns must be > 0".into(),
            ));
        }
        if self.ops_per_acc_instruction == 0 {
            return Err(EnergyError::InvalidTable(
                "ops_per_acc_instruction must be > 0".into(),
            ));
        }
        for (kind, c) in &self.instructions {
            let energy_ok = if kind.is_cim() {
                c.energy_pj > 0.0
            } else {
                c.energy_pj >= 0.0
            };
            if !energy_ok || !c.energy_pj.is_finite() || c.cycles == 0 {
                return Err(EnergyError::InvalidTable(format!("bad entry for {kind}")));
            }
        }
        Ok(())
    }

    /// Applies the fields present in `o` on top of this table. Efficiencies
    /// are converted after any change to `ops_per_acc_instruction`.
    pub fn apply(&mut self, o: &EnergyOverride) -> Result<(), EnergyError> {
        if let Some(p) = o.clock_period_ns {
            self.clock_period_ns = p;
        }
        if let Some(ops) = o.ops_per_acc_instruction {
            self.ops_per_acc_instruction = ops;
        }
        for (name, entry) in &o.instructions {
            let kind: InstrKind = name.parse().map_err(EnergyError::InvalidTable)?;
            if let Some(cycles) = entry.cycles {
                let cost = self.instructions.entry(kind).or_insert(KindCost {
                    energy_pj: 0.0,
                    cycles,
                });
                cost.cycles = cycles;
            }
            match (entry.energy_pj, entry.tops_per_watt) {
                (Some(_), Some(_)) => {
                    return Err(EnergyError::InvalidTable(format!(
                        "{kind}: give energy_pj or tops_per_watt, not both"
                    )))
                }
                (Some(e), None) => {
                    let cycles = self.instructions.get(&kind).map_or(1, |c| c.cycles);
                    self.instructions.insert(
                        kind,
                        KindCost {
                            energy_pj: e,
                            cycles,
                        },
                    );
                }
                (None, Some(eff)) => self.set_efficiency(kind, eff),
                (None, None) => {}
            }
        }
        self.validate()
    }
}

/// Partial table as read from a JSON override file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyOverride {
    #[serde(default)]
    pub clock_period_ns: Option<f64>,
    #[serde(default)]
    pub ops_per_acc_instruction: Option<u64>,
    #[serde(default)]
    pub instructions: BTreeMap<String, KindOverride>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindOverride {
    #[serde(default)]
    pub energy_pj: Option<f64>,
    #[serde(default)]
    pub tops_per_watt: Option<f64>,
    #[serde(default)]
    pub cycles: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KindTotals {
    pub count: u64,
    pub energy_pj: f64,
    pub cycles: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CostReport {
    pub energy_pj: f64,
    pub delay_ns: f64,
    pub edp_pj_ns: f64,
    pub ops: u64,
    pub tops_per_watt: f64,
    pub breakdown: BTreeMap<InstrKind, KindTotals>,
}

impl CostReport {
    /// `kind,count,energy_pj,cycles` rows followed by a `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,count,energy_pj,cycles\n");
        let (mut count, mut cycles) = (0, 0);
        for (kind, t) in &self.breakdown {
            let _ = writeln!(out, "{},{},{:.6},{}", kind, t.count, t.energy_pj, t.cycles);
            count += t.count;
            cycles += t.cycles;
        }
        let _ = writeln!(out, "total,{},{:.6},{}", count, self.energy_pj, cycles);
        out
    }
}

/// Sums energy and delay over the given instruction kinds.
pub fn account_kinds<I>(kinds: I, table: &EnergyTable) -> Result<CostReport, EnergyError>
where
    I: IntoIterator<Item = InstrKind>,
{
    let mut breakdown: BTreeMap<InstrKind, KindTotals> = BTreeMap::new();
    for kind in kinds {
        let cost = table.cost(kind)?;
        let t = breakdown.entry(kind).or_default();
        t.count += 1;
        t.cycles += cost.cycles;
    }
    // energies are summed per kind from counts so totals depend only on the multiset
    let mut report = CostReport::default();
    let mut cycles = 0u64;
    for (&kind, t) in breakdown.iter_mut() {
        t.energy_pj = table.cost(kind)?.energy_pj * t.count as f64;
        report.energy_pj += t.energy_pj;
        report.ops += table.ops(kind) * t.count;
        cycles += t.cycles;
    }
    report.delay_ns = cycles as f64 * table.clock_period_ns;
    report.edp_pj_ns = report.energy_pj * report.delay_ns;
    report.tops_per_watt = if report.energy_pj > 0.0 {
        report.ops as f64 / report.energy_pj
    } else {
        0.0
    };
    report.breakdown = breakdown;
    Ok(report)
}

pub fn account<'a, I>(trace: I, table: &EnergyTable) -> Result<CostReport, EnergyError>
where
    I: IntoIterator<Item = &'a TraceEvent>,
{
    account_kinds(trace.into_iter().map(|e| e.kind), table)
}

/// Single-group layer used for the sparsity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTemplate {
    pub inputs: usize,
    pub outputs: usize,
    pub model: NeuronModel,
}

impl Default for SweepTemplate {
    fn default() -> Self {
        SweepTemplate {
            inputs: 128,
            outputs: WEIGHTS_PER_ROW,
            model: NeuronModel::new(NeuronKind::If, 64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub sparsity: f64,
    pub spiking_inputs: usize,
    pub energy_pj: f64,
    pub delay_ns: f64,
    /// Per neuron per timestep.
    pub edp_pj_ns: f64,
    /// Relative to the no-sparsity point.
    pub reduction_pct: f64,
}

pub const DEFAULT_SWEEP_GRID: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 0.85, 1.0];

/// Spiking inputs for sparsity `s` over `inputs` neurons.
pub fn spiking_inputs(s: f64, inputs: usize) -> usize {
    ((1.0 - s) * inputs as f64).round() as usize
}

/// Simulates one timestep of the template per point and reports EDP per
/// neuron per timestep.
pub fn edp_sweep(
    template: &SweepTemplate,
    points: &[f64],
    table: &EnergyTable,
) -> Result<Vec<SweepPoint>, EnergyError> {
    if points.is_empty() {
        return Err(EnergyError::EmptyGrid);
    }
    if let Some(&bad) = points.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(EnergyError::InvalidSparsity(bad));
    }
    let weights: Vec<Vec<i32>> = (0..template.inputs)
        .map(|i| {
            (0..template.outputs)
                .map(|o| ((i + o) % 3) as i32 - 1)
                .collect()
        })
        .collect();
    let layer = LayerSpec::fc(template.model, &weights)
        .map_err(|e| EnergyError::Simulation(e.to_string()))?;
    let mapping = map_network(&[layer]).map_err(|e| EnergyError::Simulation(e.to_string()))?;
    let group_cost = |s: f64| -> Result<(usize, CostReport), EnergyError> {
        let k = spiking_inputs(s, template.inputs);
        let mut engine = Engine::new(&mapping, MacroConfig::default())
            .map_err(|e| EnergyError::Simulation(e.to_string()))?;
        let input: Vec<bool> = (0..template.inputs).map(|i| i < k).collect();
        engine
            .run_timestep(&input)
            .map_err(|e| EnergyError::Simulation(e.to_string()))?;
        Ok((k, account(engine.trace().iter().map(|e| &e.event), table)?))
    };
    let per_neuron = |r: &CostReport| r.edp_pj_ns / template.outputs as f64;
    let baseline = per_neuron(&group_cost(0.0)?.1);
    points
        .iter()
        .map(|&s| {
            let (k, r) = group_cost(s)?;
            let edp = per_neuron(&r);
            Ok(SweepPoint {
                sparsity: s,
                spiking_inputs: k,
                energy_pj: r.energy_pj,
                delay_ns: r.delay_ns,
                edp_pj_ns: edp,
                reduction_pct: 100.0 * (1.0 - edp / baseline),
            })
        })
        .collect()
}

/// `sparsity,edp_pj_ns,reduction_pct`
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("sparsity,edp_pj_ns,reduction_pct\n");
    for p in points {
        let _ = writeln!(
            out,
            "{:.4},{:.4},{:.4}",
            p.sparsity, p.edp_pj_ns, p.reduction_pct
        );
    }
    out
}
