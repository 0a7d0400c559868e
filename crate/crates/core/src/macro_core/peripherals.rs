//! Bitline sensing and the reconfigurable column peripherals.
//!
//! Each column peripheral latches the OR/AND (and their complements) of the
//! enabled cells on its bitlines, then a bitwise-logic full adder derives
//! SUM and COUT from those signals. Carry MUXes chain twelve neighbouring
//! peripherals into one ripple-carry adder per slot.

use std::ops::Range;

use super::layout::{w_parity_mask, Parity, SlotLayout, V_ROW_MASK};
use super::{MacroError, MacroState, SLOTS_PER_CYCLE, SLOT_COLS, TOTAL_COLS, V_ROWS, W_ROWS};
use crate::isa::InstrKind;

/// A read wordline selection. W rows are selected per parity (RWLo/RWLe).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSelect {
    W { row: usize, parity: Parity },
    V { row: usize },
}

/// Latched sensing-inverter outputs, one bit per column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BitwiseSense {
    pub or: u128,
    pub and: u128,
}

impl BitwiseSense {
    pub fn or_bit(&self, col: usize) -> bool {
        (self.or >> col) & 1 == 1
    }

    pub fn and_bit(&self, col: usize) -> bool {
        (self.and >> col) & 1 == 1
    }

    pub fn nor_bit(&self, col: usize) -> bool {
        !self.or_bit(col)
    }

    pub fn nand_bit(&self, col: usize) -> bool {
        !self.and_bit(col)
    }

    pub fn nor(&self) -> u128 {
        !self.or & V_ROW_MASK
    }

    pub fn nand(&self) -> u128 {
        !self.and & V_ROW_MASK
    }
}

/// Senses up to two enabled rows over `cols`.
///
/// A column with a single enabled cell returns that cell on both OR and AND;
/// a column with no enabled cell senses zero.
pub fn sense_rows(
    state: &MacroState,
    rows: &[RowSelect],
    cols: Range<usize>,
) -> Result<BitwiseSense, MacroError> {
    if rows.len() > 2 {
        return Err(MacroError::DecoderConstraint {
            enabled: rows.len(),
        });
    }
    let mut any = 0u128;
    let mut or = 0u128;
    let mut and = u128::MAX;
    for sel in rows {
        let (bits, enabled) = match *sel {
            RowSelect::W { row, parity } => {
                if row >= W_ROWS {
                    return Err(MacroError::RowOutOfRange {
                        array: "W_MEM",
                        row,
                        rows: W_ROWS,
                    });
                }
                (state.w_mem[row], w_parity_mask(parity))
            }
            RowSelect::V { row } => {
                if row >= V_ROWS {
                    return Err(MacroError::RowOutOfRange {
                        array: "V_MEM",
                        row,
                        rows: V_ROWS,
                    });
                }
                (state.v_mem[row], V_ROW_MASK)
            }
        };
        any |= enabled;
        or |= bits & enabled;
        and &= bits | !enabled;
    }
    let window = col_window(cols);
    Ok(BitwiseSense {
        or: or & window,
        and: and & any & window,
    })
}

fn col_window(cols: Range<usize>) -> u128 {
    let end = cols.end.min(TOTAL_COLS);
    if cols.start >= end {
        return 0;
    }
    let hi = if end == 128 {
        u128::MAX
    } else {
        (1u128 << end) - 1
    };
    hi & !((1u128 << cols.start) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnMode {
    CarryForward,
    CarrySkip,
    Lsb,
    Msb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnConfig {
    pub mode: ColumnMode,
    /// CS column whose latched weight sign replaces the second operand.
    pub forwarded_sign_source: Option<usize>,
}

/// Per-column peripheral configuration for one instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdderConfig {
    pub kind: InstrKind,
    pub parity: Parity,
    /// `None` for columns outside every adder group (or when the BLFA is bypassed).
    pub columns: [Option<ColumnConfig>; TOTAL_COLS],
}

impl AdderConfig {
    pub fn group_bases(&self) -> [usize; SLOTS_PER_CYCLE] {
        SlotLayout::all(self.parity).map(|s| s.col_base)
    }

    pub fn is_bypassed(&self) -> bool {
        self.columns.iter().all(Option::is_none)
    }
}

/// Configures the carry MUXes for `kind` in the given cycle parity.
///
/// Groups begin at column 0 (odd) or 6 (even). Within a group: LSB, four CF,
/// the CS hole column, five CF, then MSB. For AccW2V the six columns above the
/// hole take the weight sign forwarded by the CS column as their second operand.
/// Kinds that do not use the adder get an all-bypassed configuration.
pub fn build_adder_config(kind: InstrKind, parity: Parity) -> AdderConfig {
    let mut columns = [None; TOTAL_COLS];
    if matches!(
        kind,
        InstrKind::AccW2V | InstrKind::AccV2V | InstrKind::SpikeCheck
    ) {
        for slot in SlotLayout::all(parity) {
            let base = slot.col_base;
            let fwd = (kind == InstrKind::AccW2V).then_some(slot.hole_col);
            for off in 0..SLOT_COLS {
                let col = base + off;
                let cfg = match off {
                    0 => ColumnConfig {
                        mode: ColumnMode::Lsb,
                        forwarded_sign_source: None,
                    },
                    1..=4 => ColumnConfig {
                        mode: ColumnMode::CarryForward,
                        forwarded_sign_source: None,
                    },
                    5 => ColumnConfig {
                        mode: ColumnMode::CarrySkip,
                        forwarded_sign_source: None,
                    },
                    6..=10 => ColumnConfig {
                        mode: ColumnMode::CarryForward,
                        forwarded_sign_source: fwd,
                    },
                    _ => ColumnConfig {
                        mode: ColumnMode::Msb,
                        forwarded_sign_source: fwd,
                    },
                };
                columns[col] = Some(cfg);
            }
        }
    }
    AdderConfig {
        kind,
        parity,
        columns,
    }
}

/// Result of one 12-column adder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSum {
    /// 11-bit two's-complement sum, bit i = value bit i.
    pub sum_bits: u16,
    pub msb_cout: bool,
    pub sign_bit: bool,
    /// Carry into the MSB differs from carry out of it.
    pub overflow: bool,
}

impl SlotSum {
    pub fn value(&self) -> i16 {
        super::layout::decode_v(self.sum_bits)
    }
}

/// Ripples every configured group and returns one sum per slot.
///
/// Per column: propagate = OR·NAND, generate = AND, SUM = propagate ⊕ carry,
/// COUT = generate + carry·propagate. The CS column writes nothing, passes the
/// carry from bit 4 to bit 5, and latches its OR (the weight sign when the V
/// hole is zero) for forwarding.
pub fn ripple_add(sense: &BitwiseSense, config: &AdderConfig) -> [SlotSum; SLOTS_PER_CYCLE] {
    let mut latched_sign = [false; TOTAL_COLS];
    config.group_bases().map(|base| {
        let mut carry = false;
        let mut bit = 0;
        let mut sum_bits = 0u16;
        let mut carry_into_msb = false;
        for col in base..base + SLOT_COLS {
            let Some(cfg) = config.columns[col] else {
                continue;
            };
            if cfg.mode == ColumnMode::CarrySkip {
                latched_sign[col] = sense.or_bit(col);
                continue;
            }
            let (propagate, generate) = match cfg.forwarded_sign_source {
                Some(src) => {
                    // single enabled cell: OR = AND = the V bit
                    let v = sense.and_bit(col);
                    let s = latched_sign[src];
                    (v ^ s, v & s)
                }
                None => (sense.or_bit(col) & sense.nand_bit(col), sense.and_bit(col)),
            };
            if cfg.mode == ColumnMode::Lsb {
                carry = false;
            }
            let sum = propagate ^ carry;
            let cout = generate | (carry & propagate);
            if cfg.mode == ColumnMode::Msb {
                carry_into_msb = carry;
            }
            sum_bits |= u16::from(sum) << bit;
            bit += 1;
            carry = cout;
        }
        SlotSum {
            sum_bits,
            msb_cout: carry,
            sign_bit: (sum_bits >> 10) & 1 == 1,
            overflow: carry_into_msb != carry,
        }
    })
}
