//! Bit-level model of the fused W_MEM/V_MEM array.
//!
//! The array is 78 columns wide. Columns 0..72 are shared by both subarrays;
//! columns 72..78 exist only in V_MEM and serve the last even-aligned slot.

pub mod layout;
pub mod peripherals;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use layout::{Parity, SlotLayout};
pub use peripherals::{
    build_adder_config, ripple_add, sense_rows, AdderConfig, BitwiseSense, ColumnConfig,
    ColumnMode, RowSelect, SlotSum,
};

use layout::{hole_mask, V_ROW_MASK, W_ROW_MASK};

pub const W_ROWS: usize = 128;
pub const W_COLS: usize = 72;
pub const V_ROWS: usize = 32;
pub const TOTAL_COLS: usize = 78;
pub const WEIGHT_BITS: usize = 6;
pub const V_BITS: usize = 11;
pub const SLOT_COLS: usize = 12;
pub const SLOTS_PER_CYCLE: usize = 6;
pub const WEIGHTS_PER_ROW: usize = 12;

pub const W_MIN: i32 = -32;
pub const W_MAX: i32 = 31;
pub const V_MIN: i32 = -1024;
pub const V_MAX: i32 = 1023;

/// Array dimensions. Fixed for this macro; kept as a value so reports and
/// validators can carry it around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroGeometry {
    pub w_rows: usize,
    pub w_cols: usize,
    pub v_rows: usize,
    pub total_cols: usize,
    pub weight_bits: usize,
    pub v_bits: usize,
    pub slot_cols: usize,
    pub slots_per_cycle: usize,
    pub weights_per_row: usize,
}

impl MacroGeometry {
    pub const IMPULSE: MacroGeometry = MacroGeometry {
        w_rows: W_ROWS,
        w_cols: W_COLS,
        v_rows: V_ROWS,
        total_cols: TOTAL_COLS,
        weight_bits: WEIGHT_BITS,
        v_bits: V_BITS,
        slot_cols: SLOT_COLS,
        slots_per_cycle: SLOTS_PER_CYCLE,
        weights_per_row: WEIGHTS_PER_ROW,
    };

    pub fn is_consistent(&self) -> bool {
        self.w_cols == self.weights_per_row * self.weight_bits
            && self.total_cols == self.w_cols + self.weight_bits
            && self.slots_per_cycle * self.slot_cols == self.w_cols
            && self.slot_cols == self.v_bits + 1
    }
}

impl Default for MacroGeometry {
    fn default() -> Self {
        Self::IMPULSE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MacroConfig {
    /// Reject writes that would break the hole-column invariant and
    /// conditional writes without a fresh spike mask.
    pub strict: bool,
    /// Clamp accumulate results to [-1024, 1023] instead of wrapping.
    pub saturate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowAddr {
    W(usize),
    V(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MacroError {
    #[error("decoder can enable at most 2 read wordlines, got {enabled}")]
    DecoderConstraint { enabled: usize },
    #[error("{array} row {row} out of range (0..{rows})")]
    RowOutOfRange {
        array: &'static str,
        row: usize,
        rows: usize,
    },
    #[error("V_MEM row {row} is {row_parity}-aligned, not {requested}")]
    ParityMismatch {
        row: usize,
        row_parity: Parity,
        requested: Parity,
    },
    #[error("V_MEM row {row}: hole column {col} must be 0")]
    HoleNotZero { row: usize, col: usize },
    #[error("{array} row {row}: bits set beyond column {width}")]
    BitsOutsideRow {
        array: &'static str,
        row: usize,
        width: usize,
    },
}

/// Contents of one macro: both subarrays plus the 12 spike buffers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroState {
    pub(crate) w_mem: Vec<u128>,
    pub(crate) v_mem: Vec<u128>,
    /// Indexed by output neuron (weight group) 0..12.
    spike_buffers: [bool; WEIGHTS_PER_ROW],
    geometry: MacroGeometry,
    config: MacroConfig,
    overflow_events: u64,
}

impl MacroState {
    pub fn new(config: MacroConfig) -> Self {
        MacroState {
            w_mem: vec![0; W_ROWS],
            v_mem: vec![0; V_ROWS],
            spike_buffers: [false; WEIGHTS_PER_ROW],
            geometry: MacroGeometry::IMPULSE,
            config,
            overflow_events: 0,
        }
    }

    pub fn geometry(&self) -> &MacroGeometry {
        &self.geometry
    }

    pub fn config(&self) -> MacroConfig {
        self.config
    }

    pub fn overflow_events(&self) -> u64 {
        self.overflow_events
    }

    pub(crate) fn record_overflows(&mut self, n: u64) {
        self.overflow_events += n;
    }

    pub fn read_row(&self, addr: RowAddr) -> Result<u128, MacroError> {
        match addr {
            RowAddr::W(row) => check_w(row).map(|_| self.w_mem[row]),
            RowAddr::V(row) => check_v(row).map(|_| self.v_mem[row]),
        }
    }

    pub fn write_row(&mut self, addr: RowAddr, bits: u128) -> Result<(), MacroError> {
        match addr {
            RowAddr::W(row) => {
                check_w(row)?;
                if bits & !W_ROW_MASK != 0 {
                    return Err(MacroError::BitsOutsideRow {
                        array: "W_MEM",
                        row,
                        width: W_COLS,
                    });
                }
                self.w_mem[row] = bits;
            }
            RowAddr::V(row) => {
                check_v(row)?;
                if bits & !V_ROW_MASK != 0 {
                    return Err(MacroError::BitsOutsideRow {
                        array: "V_MEM",
                        row,
                        width: TOTAL_COLS,
                    });
                }
                if self.config.strict {
                    let holes = bits & hole_mask(Parity::of_v_row(row));
                    if holes != 0 {
                        return Err(MacroError::HoleNotZero {
                            row,
                            col: holes.trailing_zeros() as usize,
                        });
                    }
                }
                self.v_mem[row] = bits;
            }
        }
        Ok(())
    }

    /// Writes the masked slots of `dst_row`; unmasked slots are left untouched.
    pub fn conditional_write(
        &mut self,
        dst_row: usize,
        parity: Parity,
        data: &[i16; SLOTS_PER_CYCLE],
        mask: &[bool; SLOTS_PER_CYCLE],
    ) -> Result<(), MacroError> {
        check_v(dst_row)?;
        check_alignment(dst_row, parity)?;
        let mut row = self.v_mem[dst_row];
        for slot in SlotLayout::all(parity) {
            if mask[slot.slot_index] {
                row = (row & !slot.column_mask()) | slot.encode(data[slot.slot_index]);
            }
        }
        self.v_mem[dst_row] = row;
        Ok(())
    }

    /// Decoded slot values of a V row, in its own alignment.
    pub fn slot_values(&self, row: usize) -> Result<[i16; SLOTS_PER_CYCLE], MacroError> {
        check_v(row)?;
        let bits = self.v_mem[row];
        Ok(SlotLayout::all(Parity::of_v_row(row)).map(|s| s.decode(bits)))
    }

    pub fn set_slot_values(
        &mut self,
        row: usize,
        values: &[i16; SLOTS_PER_CYCLE],
    ) -> Result<(), MacroError> {
        self.conditional_write(row, Parity::of_v_row(row), values, &[true; SLOTS_PER_CYCLE])
    }

    pub fn spike_buffers(&self) -> [bool; WEIGHTS_PER_ROW] {
        self.spike_buffers
    }

    /// The six buffers of one parity, in slot order.
    pub fn spike_bank(&self, parity: Parity) -> [bool; SLOTS_PER_CYCLE] {
        std::array::from_fn(|j| self.spike_buffers[2 * j + parity.index()])
    }

    pub(crate) fn set_spike_bank(&mut self, parity: Parity, bank: [bool; SLOTS_PER_CYCLE]) {
        for (j, b) in bank.into_iter().enumerate() {
            self.spike_buffers[2 * j + parity.index()] = b;
        }
    }

    pub fn clear_spike_buffers(&mut self) {
        self.spike_buffers = [false; WEIGHTS_PER_ROW];
    }

    /// True when every hole column of every V row is zero.
    pub fn holes_clear(&self) -> bool {
        self.v_mem
            .iter()
            .enumerate()
            .all(|(r, bits)| bits & hole_mask(Parity::of_v_row(r)) == 0)
    }
}

pub(crate) fn check_w(row: usize) -> Result<(), MacroError> {
    if row < W_ROWS {
        Ok(())
    } else {
        Err(MacroError::RowOutOfRange {
            array: "W_MEM",
            row,
            rows: W_ROWS,
        })
    }
}

pub(crate) fn check_v(row: usize) -> Result<(), MacroError> {
    if row < V_ROWS {
        Ok(())
    } else {
        Err(MacroError::RowOutOfRange {
            array: "V_MEM",
            row,
            rows: V_ROWS,
        })
    }
}

pub(crate) fn check_alignment(row: usize, parity: Parity) -> Result<(), MacroError> {
    let row_parity = Parity::of_v_row(row);
    if row_parity == parity {
        Ok(())
    } else {
        Err(MacroError::ParityMismatch {
            row,
            row_parity,
            requested: parity,
        })
    }
}
