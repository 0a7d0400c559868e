//! Column layout of weights and staggered membrane-potential slots.
//!
//! A W_MEM row stores twelve 6-bit weights: group `g` occupies columns
//! `6g..6g+6`, LSB first. Even-numbered groups sit on the odd read wordline,
//! odd-numbered groups on the even one.
//!
//! A V_MEM row stores six 11-bit potentials in 12-column slots. Odd-aligned
//! rows start at column 0, even-aligned rows at column 6. Inside a slot, bit 5
//! of the column run is a hole that stays zero so that the weight sign bit on
//! the same column can be sensed alone.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{SLOTS_PER_CYCLE, SLOT_COLS, TOTAL_COLS, V_BITS, WEIGHTS_PER_ROW, WEIGHT_BITS, W_COLS};

/// Which interleaved half of the array an instruction addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Odd, Parity::Even];

    pub const fn index(self) -> usize {
        match self {
            Parity::Odd => 0,
            Parity::Even => 1,
        }
    }

    /// Alignment of a V_MEM row. Rows are staggered by index: even-indexed rows
    /// hold odd-aligned slots, odd-indexed rows hold even-aligned slots.
    pub const fn of_v_row(row: usize) -> Parity {
        if row.is_multiple_of(2) {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// Read wordline that carries weight group `group`.
    pub const fn of_group(group: usize) -> Parity {
        if group.is_multiple_of(2) {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub const fn first_col(self) -> usize {
        match self {
            Parity::Odd => 0,
            Parity::Even => WEIGHT_BITS,
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parity::Odd => f.write_str("odd"),
            Parity::Even => f.write_str("even"),
        }
    }
}

/// Physical placement of one 11-bit potential inside a V_MEM row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotLayout {
    pub parity: Parity,
    pub slot_index: usize,
    pub col_base: usize,
    pub hole_col: usize,
}

impl SlotLayout {
    pub const fn new(parity: Parity, slot_index: usize) -> Self {
        let col_base = parity.first_col() + SLOT_COLS * slot_index;
        SlotLayout {
            parity,
            slot_index,
            col_base,
            hole_col: col_base + 5,
        }
    }

    pub fn all(parity: Parity) -> [SlotLayout; SLOTS_PER_CYCLE] {
        std::array::from_fn(|j| SlotLayout::new(parity, j))
    }

    /// Slot holding the potential of output neuron `group`.
    pub const fn for_group(group: usize) -> Self {
        SlotLayout::new(Parity::of_group(group), group / 2)
    }

    pub const fn bit_col(&self, bit: usize) -> usize {
        if bit < 5 {
            self.col_base + bit
        } else {
            self.col_base + 1 + bit
        }
    }

    pub fn columns(&self) -> Range<usize> {
        self.col_base..self.col_base + SLOT_COLS
    }

    pub fn column_mask(&self) -> u128 {
        ((1u128 << SLOT_COLS) - 1) << self.col_base
    }

    /// Weight group whose sign bit shares this slot's hole column.
    pub const fn weight_group(&self) -> usize {
        2 * self.slot_index + self.parity.index()
    }

    /// Places `value` into the slot's columns (hole zero); other columns zero.
    pub fn encode(&self, value: i16) -> u128 {
        let bits = encode_v(value);
        (0..V_BITS).fold(0u128, |acc, i| {
            acc | ((((bits >> i) & 1) as u128) << self.bit_col(i))
        })
    }

    pub fn decode(&self, row: u128) -> i16 {
        let bits = (0..V_BITS).fold(0u16, |acc, i| {
            acc | ((((row >> self.bit_col(i)) & 1) as u16) << i)
        });
        decode_v(bits)
    }
}

/// Columns `6g..6g+6` of weight group `g`.
pub fn weight_group_cols(group: usize) -> Range<usize> {
    group * WEIGHT_BITS..(group + 1) * WEIGHT_BITS
}

/// W_MEM columns driven by the read wordline of `parity`.
pub fn w_parity_mask(parity: Parity) -> u128 {
    (0..WEIGHTS_PER_ROW)
        .filter(|&g| Parity::of_group(g) == parity)
        .fold(0u128, |acc, g| acc | (0x3f << (g * WEIGHT_BITS)))
}

/// Union of the hole columns of all six slots of `parity`.
pub fn hole_mask(parity: Parity) -> u128 {
    SlotLayout::all(parity)
        .iter()
        .fold(0u128, |acc, s| acc | (1u128 << s.hole_col))
}

pub const fn row_mask(width: usize) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

pub const W_ROW_MASK: u128 = row_mask(W_COLS);
pub const V_ROW_MASK: u128 = row_mask(TOTAL_COLS);

pub const fn encode_weight(w: i8) -> u8 {
    (w as u8) & 0x3f
}

pub const fn decode_weight(bits: u8) -> i8 {
    (((bits & 0x3f) << 2) as i8) >> 2
}

pub const fn encode_v(v: i16) -> u16 {
    (v as u16) & 0x7ff
}

pub const fn decode_v(bits: u16) -> i16 {
    (((bits & 0x7ff) << 5) as i16) >> 5
}

/// Reduces an integer modulo 2^11 into the signed range [-1024, 1023].
pub const fn wrap_v(x: i32) -> i16 {
    decode_v((x & 0x7ff) as u16)
}
