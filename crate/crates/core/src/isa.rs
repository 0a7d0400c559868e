//! In-memory instruction set and neuron microsequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::macro_core::layout::{wrap_v, SlotLayout};
use crate::macro_core::{
    build_adder_config, check_alignment, check_v, check_w, ripple_add, sense_rows, MacroConfig,
    MacroError, MacroState, Parity, RowAddr, RowSelect, SlotSum, SLOTS_PER_CYCLE, TOTAL_COLS,
    V_MAX, V_MIN, WEIGHTS_PER_ROW,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstrKind {
    AccW2V,
    AccV2V,
    SpikeCheck,
    ResetV,
    Read,
    Write,
}

impl InstrKind {
    pub const ALL: [InstrKind; 6] = [
        InstrKind::AccW2V,
        InstrKind::AccV2V,
        InstrKind::SpikeCheck,
        InstrKind::ResetV,
        InstrKind::Read,
        InstrKind::Write,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InstrKind::AccW2V => "AccW2V",
            InstrKind::AccV2V => "AccV2V",
            InstrKind::SpikeCheck => "SpikeCheck",
            InstrKind::ResetV => "ResetV",
            InstrKind::Read => "Read",
            InstrKind::Write => "Write",
        }
    }

    /// Compute-in-memory kinds, as opposed to plain row access.
    pub fn is_cim(self) -> bool {
        !matches!(self, InstrKind::Read | InstrKind::Write)
    }
}

impl fmt::Display for InstrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstrKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InstrKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown instruction kind `{s}`"))
    }
}

/// One instruction as issued by the host.
///
/// Operand requirements per kind:
/// - AccW2V: `w_row`, `v_src`, `v_dst`
/// - AccV2V: `v_src`, `v_src2`, `v_dst` (optionally `conditional`)
/// - SpikeCheck: `v_src` (potential), `v_src2` (negated threshold)
/// - ResetV: `v_src` (reset values), `v_dst`
/// - Read: `w_row` or `v_src`
/// - Write: `w_row` or `v_dst`, plus `data`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: InstrKind,
    pub parity: Parity,
    pub w_row: Option<usize>,
    pub v_src: Option<usize>,
    pub v_src2: Option<usize>,
    pub v_dst: Option<usize>,
    pub conditional: bool,
    pub data: Option<u128>,
}

impl Instruction {
    fn blank(kind: InstrKind, parity: Parity) -> Self {
        Instruction {
            kind,
            parity,
            w_row: None,
            v_src: None,
            v_src2: None,
            v_dst: None,
            conditional: false,
            data: None,
        }
    }

    pub fn acc_w2v(w_row: usize, parity: Parity, v_src: usize, v_dst: usize) -> Self {
        Instruction {
            w_row: Some(w_row),
            v_src: Some(v_src),
            v_dst: Some(v_dst),
            ..Self::blank(InstrKind::AccW2V, parity)
        }
    }

    pub fn acc_v2v(
        parity: Parity,
        v_src: usize,
        v_src2: usize,
        v_dst: usize,
        conditional: bool,
    ) -> Self {
        Instruction {
            v_src: Some(v_src),
            v_src2: Some(v_src2),
            v_dst: Some(v_dst),
            conditional,
            ..Self::blank(InstrKind::AccV2V, parity)
        }
    }

    pub fn spike_check(parity: Parity, potential: usize, neg_threshold: usize) -> Self {
        Instruction {
            v_src: Some(potential),
            v_src2: Some(neg_threshold),
            ..Self::blank(InstrKind::SpikeCheck, parity)
        }
    }

    pub fn reset_v(parity: Parity, reset_row: usize, v_dst: usize) -> Self {
        Instruction {
            v_src: Some(reset_row),
            v_dst: Some(v_dst),
            conditional: true,
            ..Self::blank(InstrKind::ResetV, parity)
        }
    }

    pub fn read(addr: RowAddr) -> Self {
        match addr {
            RowAddr::W(r) => Instruction {
                w_row: Some(r),
                ..Self::blank(InstrKind::Read, Parity::Odd)
            },
            RowAddr::V(r) => Instruction {
                v_src: Some(r),
                ..Self::blank(InstrKind::Read, Parity::of_v_row(r))
            },
        }
    }

    pub fn write(addr: RowAddr, data: u128) -> Self {
        match addr {
            RowAddr::W(r) => Instruction {
                w_row: Some(r),
                data: Some(data),
                ..Self::blank(InstrKind::Write, Parity::Odd)
            },
            RowAddr::V(r) => Instruction {
                v_dst: Some(r),
                data: Some(data),
                ..Self::blank(InstrKind::Write, Parity::of_v_row(r))
            },
        }
    }

    /// Checks operand presence, row ranges, and V-row alignment.
    pub fn validate(&self) -> Result<(), IsaError> {
        use InstrKind::*;
        let malformed = |reason: &'static str| IsaError::Malformed {
            kind: self.kind,
            reason,
        };
        let (need_w, need_src, need_src2, need_dst) = match self.kind {
            AccW2V => (true, true, false, true),
            AccV2V => (false, true, true, true),
            SpikeCheck => (false, true, true, false),
            ResetV => (false, true, false, true),
            Read => {
                if self.w_row.is_some() == self.v_src.is_some() {
                    return Err(malformed("Read needs exactly one of w_row or v_src"));
                }
                (self.w_row.is_some(), self.v_src.is_some(), false, false)
            }
            Write => {
                if self.w_row.is_some() == self.v_dst.is_some() {
                    return Err(malformed("Write needs exactly one of w_row or v_dst"));
                }
                if self.data.is_none() {
                    return Err(malformed("Write needs data"));
                }
                (self.w_row.is_some(), false, false, self.v_dst.is_some())
            }
        };
        if need_w != self.w_row.is_some() {
            return Err(malformed(if need_w {
                "missing w_row"
            } else {
                "unexpected w_row"
            }));
        }
        if need_src != self.v_src.is_some() {
            return Err(malformed(if need_src {
                "missing v_src"
            } else {
                "unexpected v_src"
            }));
        }
        if need_src2 != self.v_src2.is_some() {
            return Err(malformed(if need_src2 {
                "missing v_src2"
            } else {
                "unexpected v_src2"
            }));
        }
        if need_dst != self.v_dst.is_some() {
            return Err(malformed(if need_dst {
                "missing v_dst"
            } else {
                "unexpected v_dst"
            }));
        }
        if self.conditional && !matches!(self.kind, AccV2V | ResetV) {
            return Err(malformed("only AccV2V and ResetV write conditionally"));
        }
        if self.kind == ResetV && !self.conditional {
            return Err(malformed("ResetV always writes through the spike buffers"));
        }
        if let Some(r) = self.w_row {
            check_w(r)?;
        }
        for r in self.v_rows() {
            check_v(r)?;
            if self.kind.is_cim() {
                check_alignment(r, self.parity)?;
            }
        }
        Ok(())
    }

    pub fn v_rows(&self) -> impl Iterator<Item = usize> {
        [self.v_src, self.v_src2, self.v_dst].into_iter().flatten()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsaError {
    #[error("malformed {kind}: {reason}")]
    Malformed {
        kind: InstrKind,
        reason: &'static str,
    },
    #[error("conditional write with stale {parity} spike buffers")]
    StaleSpikeBuffers { parity: Parity },
    #[error("{model} update needs the {which} rows")]
    MissingReservedRow {
        model: NeuronKind,
        which: &'static str,
    },
    #[error(transparent)]
    Macro(#[from] MacroError),
}

/// What one executed instruction did, as seen by energy accounting and tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: InstrKind,
    pub parity: Parity,
    pub w_row: Option<usize>,
    pub v_src: Option<usize>,
    pub v_src2: Option<usize>,
    pub v_dst: Option<usize>,
    pub conditional: bool,
    /// SpikeCheck only: slots whose potential reached threshold.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spike_mask: Option<[bool; SLOTS_PER_CYCLE]>,
    /// SpikeCheck only: carry out of each MSB column.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub msb_cout: Option<[bool; SLOTS_PER_CYCLE]>,
    #[serde(skip_serializing_if = "is_zero", default)]
    pub overflows: u8,
}

fn is_zero(n: &u8) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutcome {
    pub spike_mask: Option<[bool; SLOTS_PER_CYCLE]>,
    pub read_data: Option<u128>,
    pub event: TraceEvent,
}

/// A macro plus its instruction trace. Instructions apply strictly in order.
#[derive(Debug, Clone)]
pub struct MacroExecutor {
    state: MacroState,
    trace: Vec<TraceEvent>,
    spike_valid: [bool; 2],
}

impl MacroExecutor {
    pub fn new(config: MacroConfig) -> Self {
        Self::from_state(MacroState::new(config))
    }

    pub fn from_state(state: MacroState) -> Self {
        MacroExecutor {
            state,
            trace: Vec::new(),
            spike_valid: [false; 2],
        }
    }

    pub fn state(&self) -> &MacroState {
        &self.state
    }

    /// Direct access for loading images outside the instruction stream.
    pub fn state_mut(&mut self) -> &mut MacroState {
        &mut self.state
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.trace)
    }

    pub fn clear_spike_buffers(&mut self) {
        self.state.clear_spike_buffers();
        self.spike_valid = [false; 2];
    }

    /// Executes one instruction. On error the state and trace are unchanged.
    pub fn exec(&mut self, instr: &Instruction) -> Result<ExecOutcome, IsaError> {
        instr.validate()?;
        let p = instr.parity;
        let mut event = TraceEvent {
            kind: instr.kind,
            parity: p,
            w_row: instr.w_row,
            v_src: instr.v_src,
            v_src2: instr.v_src2,
            v_dst: instr.v_dst,
            conditional: instr.conditional,
            spike_mask: None,
            msb_cout: None,
            overflows: 0,
        };
        let mut outcome_mask = None;
        let mut read_data = None;
        // unwraps below are guarded by validate()
        match instr.kind {
            InstrKind::AccW2V => {
                let sums = self.add_rows(
                    instr,
                    [
                        RowSelect::W {
                            row: instr.w_row.unwrap(),
                            parity: p,
                        },
                        RowSelect::V {
                            row: instr.v_src.unwrap(),
                        },
                    ],
                )?;
                event.overflows =
                    self.write_sums(instr.v_dst.unwrap(), p, &sums, &[true; SLOTS_PER_CYCLE])?;
            }
            InstrKind::AccV2V => {
                let mask = if instr.conditional {
                    self.fresh_bank(p)?
                } else {
                    [true; SLOTS_PER_CYCLE]
                };
                let sums = self.add_rows(
                    instr,
                    [
                        RowSelect::V {
                            row: instr.v_src.unwrap(),
                        },
                        RowSelect::V {
                            row: instr.v_src2.unwrap(),
                        },
                    ],
                )?;
                event.overflows = self.write_sums(instr.v_dst.unwrap(), p, &sums, &mask)?;
            }
            InstrKind::SpikeCheck => {
                let sums = self.add_rows(
                    instr,
                    [
                        RowSelect::V {
                            row: instr.v_src.unwrap(),
                        },
                        RowSelect::V {
                            row: instr.v_src2.unwrap(),
                        },
                    ],
                )?;
                let saturate = self.state.config().saturate;
                let mask = sums.map(|s| {
                    // a saturating comparator reports the true sign on overflow
                    if saturate && s.overflow {
                        s.sign_bit
                    } else {
                        !s.sign_bit
                    }
                });
                let overflows = sums.iter().filter(|s| s.overflow).count();
                self.state.record_overflows(overflows as u64);
                self.state.set_spike_bank(p, mask);
                self.spike_valid[p.index()] = true;
                event.spike_mask = Some(mask);
                event.msb_cout = Some(sums.map(|s| s.msb_cout));
                event.overflows = overflows as u8;
                outcome_mask = Some(mask);
            }
            InstrKind::ResetV => {
                let mask = self.fresh_bank(p)?;
                let sense = sense_rows(
                    &self.state,
                    &[RowSelect::V {
                        row: instr.v_src.unwrap(),
                    }],
                    0..TOTAL_COLS,
                )?;
                // BLFA bypassed: the sensed reset bits go straight to the write driver
                let values = SlotLayout::all(p).map(|s| s.decode(sense.and));
                self.state
                    .conditional_write(instr.v_dst.unwrap(), p, &values, &mask)?;
            }
            InstrKind::Read => {
                let addr = match (instr.w_row, instr.v_src) {
                    (Some(r), _) => RowAddr::W(r),
                    (_, Some(r)) => RowAddr::V(r),
                    _ => unreachable!(),
                };
                read_data = Some(self.state.read_row(addr)?);
            }
            InstrKind::Write => {
                let addr = match (instr.w_row, instr.v_dst) {
                    (Some(r), _) => RowAddr::W(r),
                    (_, Some(r)) => RowAddr::V(r),
                    _ => unreachable!(),
                };
                self.state.write_row(addr, instr.data.unwrap())?;
            }
        }
        self.trace.push(event.clone());
        Ok(ExecOutcome {
            spike_mask: outcome_mask,
            read_data,
            event,
        })
    }

    fn fresh_bank(&self, parity: Parity) -> Result<[bool; SLOTS_PER_CYCLE], IsaError> {
        if self.state.config().strict && !self.spike_valid[parity.index()] {
            return Err(IsaError::StaleSpikeBuffers { parity });
        }
        Ok(self.state.spike_bank(parity))
    }

    fn add_rows(
        &self,
        instr: &Instruction,
        rows: [RowSelect; 2],
    ) -> Result<[SlotSum; SLOTS_PER_CYCLE], IsaError> {
        let sense = sense_rows(&self.state, &rows, 0..TOTAL_COLS)?;
        let config = build_adder_config(instr.kind, instr.parity);
        Ok(ripple_add(&sense, &config))
    }

    fn write_sums(
        &mut self,
        dst: usize,
        parity: Parity,
        sums: &[SlotSum; SLOTS_PER_CYCLE],
        mask: &[bool; SLOTS_PER_CYCLE],
    ) -> Result<u8, IsaError> {
        let saturate = self.state.config().saturate;
        let values = sums.map(|s| match (s.overflow && saturate, s.sign_bit) {
            // wrapped negative means the true sum overflowed upward
            (true, true) => V_MAX as i16,
            (true, false) => V_MIN as i16,
            (false, _) => s.value(),
        });
        self.state.conditional_write(dst, parity, &values, mask)?;
        let overflows = sums
            .iter()
            .zip(mask)
            .filter(|(s, &m)| m && s.overflow)
            .count();
        self.state.record_overflows(overflows as u64);
        Ok(overflows as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeuronKind {
    #[serde(rename = "IF")]
    If,
    #[serde(rename = "LIF")]
    Lif,
    #[serde(rename = "RMP")]
    Rmp,
}

impl fmt::Display for NeuronKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeuronKind::If => "IF",
            NeuronKind::Lif => "LIF",
            NeuronKind::Rmp => "RMP",
        })
    }
}

impl FromStr for NeuronKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "IF" => Ok(NeuronKind::If),
            "LIF" => Ok(NeuronKind::Lif),
            "RMP" => Ok(NeuronKind::Rmp),
            _ => Err(format!("unknown neuron model `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronModel {
    pub kind: NeuronKind,
    pub threshold: i16,
    /// Subtracted once per timestep (LIF only).
    pub leak: i16,
    pub v_reset: i16,
}

impl NeuronModel {
    pub fn new(kind: NeuronKind, threshold: i16) -> Self {
        NeuronModel {
            kind,
            threshold,
            leak: 0,
            v_reset: 0,
        }
    }

    pub fn with_leak(mut self, leak: i16) -> Self {
        self.leak = leak;
        self
    }

    pub fn with_reset(mut self, v_reset: i16) -> Self {
        self.v_reset = v_reset;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=1023).contains(&self.threshold) {
            return Err(format!("threshold {} outside [1, 1023]", self.threshold));
        }
        if !(0..=1024).contains(&self.leak) {
            return Err(format!("leak {} outside [0, 1024]", self.leak));
        }
        if !(V_MIN..=V_MAX).contains(&(self.v_reset as i32)) {
            return Err(format!("v_reset {} outside [-1024, 1023]", self.v_reset));
        }
        Ok(())
    }

    /// Values for the reserved rows of a macro whose first `active` output
    /// groups are in use. Inactive groups get zero leak so they stay at rest.
    pub fn reserved_values(&self, active: usize) -> ReservedValues {
        let neg_threshold = wrap_v(-(self.threshold as i32));
        let neg_leak = wrap_v(-(self.leak as i32));
        ReservedValues {
            neg_threshold: [neg_threshold; WEIGHTS_PER_ROW],
            neg_leak: std::array::from_fn(|g| if g < active { neg_leak } else { 0 }),
            reset: [self.v_reset; WEIGHTS_PER_ROW],
        }
    }
}

/// Per-output-neuron contents of the reserved rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReservedValues {
    pub neg_threshold: [i16; WEIGHTS_PER_ROW],
    pub neg_leak: [i16; WEIGHTS_PER_ROW],
    pub reset: [i16; WEIGHTS_PER_ROW],
}

impl ReservedValues {
    pub fn install(&self, state: &mut MacroState, rows: &ReservedRows) -> Result<(), MacroError> {
        let pairs = [
            (rows.threshold, &self.neg_threshold),
            (rows.leak, &self.neg_leak),
            (rows.reset, &self.reset),
        ];
        for (pair, values) in pairs {
            let Some(pair) = pair else { continue };
            for p in Parity::BOTH {
                let slots = SlotLayout::all(p).map(|s| values[s.weight_group()]);
                state.conditional_write(pair[p.index()], p, &slots, &[true; SLOTS_PER_CYCLE])?;
            }
        }
        Ok(())
    }
}

/// The (odd-aligned, even-aligned) V row pair holding one group's potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VContext {
    pub odd_row: usize,
    pub even_row: usize,
}

impl VContext {
    pub fn row(&self, parity: Parity) -> usize {
        match parity {
            Parity::Odd => self.odd_row,
            Parity::Even => self.even_row,
        }
    }
}

/// Reserved parameter rows, indexed `[odd, even]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservedRows {
    pub threshold: Option<[usize; 2]>,
    pub leak: Option<[usize; 2]>,
    pub reset: Option<[usize; 2]>,
}

impl Default for ReservedRows {
    fn default() -> Self {
        ReservedRows {
            threshold: Some([0, 1]),
            leak: Some([2, 3]),
            reset: Some([4, 5]),
        }
    }
}

fn need(
    rows: Option<[usize; 2]>,
    model: NeuronKind,
    which: &'static str,
) -> Result<[usize; 2], IsaError> {
    rows.ok_or(IsaError::MissingReservedRow { model, which })
}

/// Instructions that update one parity of a context for the given model.
pub fn microsequence(
    kind: NeuronKind,
    parity: Parity,
    ctx_row: usize,
    reserved: &ReservedRows,
) -> Result<Vec<Instruction>, IsaError> {
    let i = parity.index();
    let threshold = need(reserved.threshold, kind, "threshold")?[i];
    Ok(match kind {
        NeuronKind::If => vec![
            Instruction::spike_check(parity, ctx_row, threshold),
            Instruction::reset_v(parity, need(reserved.reset, kind, "reset")?[i], ctx_row),
        ],
        NeuronKind::Lif => vec![
            Instruction::acc_v2v(
                parity,
                ctx_row,
                need(reserved.leak, kind, "leak")?[i],
                ctx_row,
                false,
            ),
            Instruction::spike_check(parity, ctx_row, threshold),
            Instruction::reset_v(parity, need(reserved.reset, kind, "reset")?[i], ctx_row),
        ],
        NeuronKind::Rmp => vec![
            Instruction::spike_check(parity, ctx_row, threshold),
            Instruction::acc_v2v(parity, ctx_row, threshold, ctx_row, true),
        ],
    })
}

/// Runs the odd then even microsequence on `ctx` and returns the 12 output
/// spikes in neuron order. Spike buffers are cleared afterwards.
pub fn neuron_update(
    exec: &mut MacroExecutor,
    kind: NeuronKind,
    ctx: VContext,
    reserved: &ReservedRows,
) -> Result<[bool; WEIGHTS_PER_ROW], IsaError> {
    let sequences = Parity::BOTH.map(|p| microsequence(kind, p, ctx.row(p), reserved));
    let mut spikes = [false; WEIGHTS_PER_ROW];
    for (p, seq) in Parity::BOTH.into_iter().zip(sequences) {
        for instr in seq? {
            if let Some(mask) = exec.exec(&instr)?.spike_mask {
                for (j, s) in mask.into_iter().enumerate() {
                    spikes[2 * j + p.index()] = s;
                }
            }
        }
    }
    exec.clear_spike_buffers();
    Ok(spikes)
}
