//! Behavioral model of one NAND flash block, including the transposed
//! ternary-search primitive.
//!
//! A cell is tracked by its logical read value: an erased cell sits at the low
//! threshold voltage and reads as 1; programming moves it to the high
//! threshold and it reads as 0. Search blocks store each element bit in a pair
//! of adjacent wordlines holding inverse values, so a per-wordline choice of
//! read/pass voltage turns a whole-block sensing pass into a ternary match
//! across every bitline at once.

use crate::bitmap::Bitmap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlashError {
    #[error("row {row} out of range (block has {rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("row {row} already programmed since last erase")]
    ProgramOnRowTwice { row: usize },
    #[error("operation requires a search-mode (SLC) block")]
    WrongMode,
    #[error("element of {bits} bits exceeds native element size {max}")]
    ElementTooLong { bits: usize, max: usize },
    #[error("elements do not fit in the requested bitline range")]
    RegionOverflow,
    #[error("search key of {bits} bits exceeds native element size {max}")]
    KeyTooLong { bits: usize, max: usize },
    #[error("bitline position {pos} out of range (block has {bitlines} bitlines)")]
    PositionOutOfRange { pos: usize, bitlines: usize },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BlockMode {
    Conventional,
    SearchSlc,
}

/// One position of a ternary search key.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TernaryBit {
    Zero,
    One,
    DontCare,
}

/// Per-bit ternary pattern driving a block search.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SearchKey {
    bits: Vec<TernaryBit>,
}

impl SearchKey {
    pub fn new(bits: Vec<TernaryBit>) -> Self {
        assert!(!bits.is_empty(), "search key must have at least one bit");
        SearchKey { bits }
    }

    /// Parse from a pattern string of `0`, `1`, `X` (e.g. `"01X0"`), where the
    /// first character is bit 0.
    pub fn parse(pattern: &str) -> Self {
        let bits = pattern
            .chars()
            .map(|c| match c {
                '0' => TernaryBit::Zero,
                '1' => TernaryBit::One,
                'X' | 'x' => TernaryBit::DontCare,
                other => panic!("invalid ternary pattern char {other:?}"),
            })
            .collect();
        SearchKey::new(bits)
    }

    /// Exact-match key for a stored element.
    pub fn exact(element: &[bool]) -> Self {
        SearchKey::new(
            element
                .iter()
                .map(|&b| if b { TernaryBit::One } else { TernaryBit::Zero })
                .collect(),
        )
    }

    pub fn all_dont_care(len: usize) -> Self {
        SearchKey::new(vec![TernaryBit::DontCare; len])
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[TernaryBit] {
        &self.bits
    }

    /// Does this key match the given element, with positions past the element
    /// length treated as matched?
    pub fn matches(&self, element: &[bool]) -> bool {
        self.bits.iter().enumerate().all(|(i, &kb)| match kb {
            TernaryBit::DontCare => true,
            TernaryBit::Zero => element.get(i).map_or(true, |&b| !b),
            TernaryBit::One => element.get(i).map_or(true, |&b| b),
        })
    }

    /// The key restricted to bit positions `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> SearchKey {
        let end = end.min(self.bits.len());
        if start >= end {
            return SearchKey::all_dont_care(1);
        }
        SearchKey::new(self.bits[start..end].to_vec())
    }
}

/// Raw bitline outputs of one block search: bit k set means bitline k holds a
/// valid element matching the key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MatchVector(pub Bitmap);

impl MatchVector {
    pub fn positions(&self) -> Vec<usize> {
        self.0.iter_ones().collect()
    }
}

/// One NAND flash block: `rows` wordlines by `bitlines` columns of SLC cells.
pub struct FlashBlock {
    rows: usize,
    bitlines: usize,
    mode: BlockMode,
    erased: bool,
    /// Logical read value per cell, one bitmap per row (1 = low Vth, conducts
    /// under the read reference voltage).
    levels: Vec<Bitmap>,
    /// Page-program-once tracking per row.
    programmed: Vec<bool>,
    /// Bitlines that hold a transposed element.
    occupied: Bitmap,
    write_inversion: bool,
}

impl FlashBlock {
    pub fn new(rows: usize, bitlines: usize, mode: BlockMode) -> Self {
        FlashBlock {
            rows,
            bitlines,
            mode,
            erased: true,
            levels: (0..rows).map(|_| Bitmap::ones(bitlines)).collect(),
            programmed: vec![false; rows],
            occupied: Bitmap::zeros(bitlines),
            write_inversion: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn bitlines(&self) -> usize {
        self.bitlines
    }

    pub fn mode(&self) -> BlockMode {
        self.mode
    }

    pub fn is_erased(&self) -> bool {
        self.erased
    }

    pub fn set_write_inversion(&mut self, enabled: bool) {
        self.write_inversion = enabled;
    }

    /// Maximum searchable element width: half the rows hold bit pairs, minus
    /// one bit reserved for the valid flag.
    pub fn native_element_size(&self) -> usize {
        (self.rows / 2).saturating_sub(1)
    }

    fn valid_row(&self) -> usize {
        self.rows - 1
    }

    /// Reset every cell to the erased (low Vth) state. Idempotent; the mode
    /// tag is retained.
    pub fn erase(&mut self) {
        for row in &mut self.levels {
            row.fill(true);
        }
        self.programmed.iter_mut().for_each(|p| *p = false);
        self.occupied.fill(false);
        self.erased = true;
    }

    /// Conventional page program: cells at positions where `page_bits` is 0
    /// move to high Vth; 1 bits leave the cell untouched.
    pub fn program_page(&mut self, row: usize, page_bits: &Bitmap) -> Result<(), FlashError> {
        if row >= self.rows {
            return Err(FlashError::RowOutOfRange { row, rows: self.rows });
        }
        if self.programmed[row] {
            return Err(FlashError::ProgramOnRowTwice { row });
        }
        assert_eq!(page_bits.len(), self.bitlines, "page width mismatch");
        let level = &mut self.levels[row];
        for bl in 0..self.bitlines {
            if !page_bits.get(bl) {
                level.set(bl, false);
            }
        }
        self.programmed[row] = true;
        self.erased = false;
        Ok(())
    }

    /// Conventional page read: logical value per cell.
    pub fn read_page(&self, row: usize) -> Result<Bitmap, FlashError> {
        if row >= self.rows {
            return Err(FlashError::RowOutOfRange { row, rows: self.rows });
        }
        Ok(self.levels[row].clone())
    }

    /// Program a batch of elements column-wise starting at `start_bitline`.
    ///
    /// Element j's bit i lands in rows (2i, 2i+1) of bitline `start_bitline+j`
    /// as an inverse pair: row 2i carries the bit value, row 2i+1 its
    /// complement. Bit pairs past an element's length stay erased, so they
    /// conduct under any wordline voltage and behave as always-matched.
    ///
    /// Returns the firmware-to-flash bytes this transfer cost; write inversion
    /// halves it because complement rows are derived chip-side.
    pub fn program_transposed(
        &mut self,
        elements: &[Vec<bool>],
        start_bitline: usize,
    ) -> Result<u64, FlashError> {
        if self.mode != BlockMode::SearchSlc {
            return Err(FlashError::WrongMode);
        }
        if elements.is_empty() {
            return Ok(0);
        }
        let native = self.native_element_size();
        let mut max_len = 0usize;
        for el in elements {
            if el.len() > native {
                return Err(FlashError::ElementTooLong {
                    bits: el.len(),
                    max: native,
                });
            }
            max_len = max_len.max(el.len());
        }
        let end = start_bitline
            .checked_add(elements.len())
            .ok_or(FlashError::RegionOverflow)?;
        if end > self.bitlines {
            return Err(FlashError::RegionOverflow);
        }
        if !self.occupied.range_is_zero(start_bitline, elements.len()) {
            return Err(FlashError::RegionOverflow);
        }
        for (j, el) in elements.iter().enumerate() {
            let bl = start_bitline + j;
            for (i, &bit) in el.iter().enumerate() {
                // Storing X is not supported; a bit is always exactly one
                // programmed cell of the pair.
                let programmed_row = if bit { 2 * i + 1 } else { 2 * i };
                self.levels[programmed_row].set(bl, false);
            }
            // Valid flag: the valid-row cell stays at low Vth (conducting),
            // which is the valid state; invalidation later raises it.
            self.occupied.set(bl, true);
        }
        self.erased = false;
        let rows_programmed = 2 * max_len as u64;
        let page_bytes = (self.bitlines as u64).div_ceil(8);
        let divisor = if self.write_inversion { 2 } else { 1 };
        Ok(rows_programmed * page_bytes / divisor)
    }

    /// Chip-level block search: one sensing pass with per-wordline voltages
    /// chosen from the key. Side-effect free.
    pub fn srch(&self, key: &SearchKey) -> Result<MatchVector, FlashError> {
        if self.mode != BlockMode::SearchSlc {
            return Err(FlashError::WrongMode);
        }
        let native = self.native_element_size();
        if key.len() > native {
            return Err(FlashError::KeyTooLong {
                bits: key.len(),
                max: native,
            });
        }
        // The read voltage goes to the row that must conduct for the probed
        // value; pass voltage everywhere else. A bitline conducts end to end
        // iff every probed row reads 1 there.
        let mut out = self.occupied.clone();
        for (i, &kb) in key.bits().iter().enumerate() {
            match kb {
                TernaryBit::One => out.and_assign(&self.levels[2 * i]),
                TernaryBit::Zero => out.and_assign(&self.levels[2 * i + 1]),
                TernaryBit::DontCare => {}
            }
        }
        // Valid wordline always gets the read voltage: an invalidated bitline
        // blocks there and never matches.
        out.and_assign(&self.levels[self.valid_row()]);
        Ok(MatchVector(out))
    }

    /// Flip the valid-row cell of each listed bitline to the invalid state.
    /// An in-place low-to-high Vth raise; no erase involved, idempotent.
    pub fn invalidate_matches(&mut self, bitline_positions: &[usize]) -> Result<(), FlashError> {
        if self.mode != BlockMode::SearchSlc {
            return Err(FlashError::WrongMode);
        }
        let valid_row = self.valid_row();
        for &pos in bitline_positions {
            if pos >= self.bitlines {
                return Err(FlashError::PositionOutOfRange {
                    pos,
                    bitlines: self.bitlines,
                });
            }
            self.levels[valid_row].set(pos, false);
        }
        Ok(())
    }
}
