//! Firmware search manager: region lifecycle, link table, multi-block search
//! planning, match-vector decode with early termination, delete/update, and
//! result compaction.
//!
//! Search regions are block-granular and striped round-robin across
//! (channel, die) pairs, so a region of up to one superblock's worth of
//! blocks is searched in a single parallel wave. Data regions are modeled as
//! a flat per-region entry store with page-granular read accounting.

use crate::backend::{Backend, CellMode, FlashOp, LatencyReport, ModelError, OpKind, PhysicalAddress, SsdConfig};
use crate::bitmap::Bitmap;
use crate::flash_array::{BlockMode, FlashBlock, FlashError, MatchVector, SearchKey};
use std::collections::HashMap;
use thiserror::Error;

/// Reported footprint of one link-table entry: base address, entry geometry,
/// update-buffer handle and region bookkeeping.
pub const LINK_TABLE_ENTRY_BYTES: u64 = 44;

/// Widest supported element, in block-group span.
pub const MAX_BLOCKS_PER_ELEMENT: u64 = 8;

/// Burst granularity of the early-termination circuit at the channel
/// controller.
pub const BURST_BYTES: usize = 64;

pub type RegionId = u64;

#[derive(Debug, Error)]
pub enum FtlError {
    #[error("unknown region {0}")]
    UnknownRegion(RegionId),
    #[error("capacity exhausted: need {need} blocks, {available} available")]
    CapacityExhausted { need: u64, available: u64 },
    #[error("element of {bits} bits exceeds the supported {max} bits")]
    ElementWiderThanSupported { bits: u64, max: u64 },
    #[error("element/entry shape mismatch: {0}")]
    WidthMismatch(String),
    #[error("search key of {bits} bits exceeds region element width {max}")]
    KeyTooWide { bits: u64, max: u64 },
    #[error("region entries are not fixed-width integers")]
    NonNumericEntries,
    #[error(transparent)]
    Flash(#[from] FlashError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Firmware view of one search region.
#[derive(Clone, Debug)]
pub struct SearchRegionDescriptor {
    pub region_id: RegionId,
    pub element_bits: u64,
    pub elements_per_block: u64,
    pub blocks_per_element: u64,
    pub blocks: Vec<PhysicalAddress>,
    pub element_count: u64,
    pub entry_bytes: u64,
}

impl SearchRegionDescriptor {
    pub fn block_groups(&self) -> u64 {
        self.blocks.len() as u64 / self.blocks_per_element
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinkTableEntry {
    pub search_block_group: u64,
    pub data_base_address: u64,
    pub entry_bytes: u64,
    pub update_buffer_handle: u64,
}

/// Decoded matches plus the early-termination bookkeeping that produced them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodedMatches {
    /// Matching element ordinals, strictly increasing.
    pub ordinals: Vec<u64>,
    /// Zero-burst counter value tagged onto each buffered (nonzero) burst.
    pub burst_counter_tags: Vec<u64>,
    /// All-zero bursts discarded without buffering.
    pub bursts_discarded: u64,
    /// Bytes actually buffered in firmware DRAM.
    pub buffered_bytes: u64,
    /// Bytes the vector would have occupied without early termination.
    pub total_bytes: u64,
}

impl DecodedMatches {
    pub fn bytes_saved(&self) -> u64 {
        self.total_bytes - self.buffered_bytes
    }

    fn merge_offset(&mut self, other: DecodedMatches, ordinal_offset: u64) {
        self.ordinals
            .extend(other.ordinals.iter().map(|o| o + ordinal_offset));
        self.burst_counter_tags.extend(other.burst_counter_tags);
        self.bursts_discarded += other.bursts_discarded;
        self.buffered_bytes += other.buffered_bytes;
        self.total_bytes += other.total_bytes;
    }
}

/// Channel-side decode of one match vector: all-zero bursts bump a counter
/// and are dropped; nonzero bursts are buffered tagged with the counter, so
/// offsets reconstruct exactly.
pub fn decode_match_vector(vector: &MatchVector, burst_bytes: usize) -> DecodedMatches {
    let bytes = vector.0.to_bytes();
    let mut out = DecodedMatches {
        total_bytes: bytes.len() as u64,
        ..DecodedMatches::default()
    };
    let mut zero_counter = 0u64;
    for (burst_idx, burst) in bytes.chunks(burst_bytes).enumerate() {
        if burst.iter().all(|&b| b == 0) {
            zero_counter += 1;
            continue;
        }
        out.burst_counter_tags.push(zero_counter);
        out.buffered_bytes += burst.len() as u64;
        let base_bit = burst_idx * burst_bytes * 8;
        for (i, &byte) in burst.iter().enumerate() {
            let mut b = byte;
            while b != 0 {
                let bit = b.trailing_zeros() as usize;
                out.ordinals.push((base_bit + i * 8 + bit) as u64);
                b &= b - 1;
            }
        }
    }
    out.bursts_discarded = zero_counter;
    out
}

/// Pack entries contiguously into host logical blocks.
pub fn compact_results(entries: &[Vec<u8>], host_block_bytes: u64) -> Vec<Vec<u8>> {
    let total: u64 = entries.iter().map(|e| e.len() as u64).sum();
    if total == 0 {
        return Vec::new();
    }
    let mut packed: Vec<u8> = Vec::with_capacity(total as usize);
    for e in entries {
        packed.extend_from_slice(e);
    }
    packed
        .chunks(host_block_bytes as usize)
        .map(|c| c.to_vec())
        .collect()
}

/// Byte size returned to the host for a compacted result set.
pub fn compacted_bytes(entry_count: u64, entry_bytes: u64, host_block_bytes: u64) -> u64 {
    (entry_count * entry_bytes).div_ceil(host_block_bytes) * host_block_bytes
}

/// Reduction applied across sub-key match vectors before decode.
#[derive(Clone, Debug)]
pub enum Reduction {
    Single(SearchKey),
    And(Vec<SearchKey>),
    Or(Vec<SearchKey>),
}

impl Reduction {
    pub fn sub_keys(&self) -> &[SearchKey] {
        match self {
            Reduction::Single(k) => std::slice::from_ref(k),
            Reduction::And(ks) | Reduction::Or(ks) => ks,
        }
    }

    fn matches_element(&self, element: &[bool]) -> bool {
        match self {
            Reduction::Single(k) => k.matches(element),
            Reduction::And(ks) => ks.iter().all(|k| k.matches(element)),
            Reduction::Or(ks) => ks.iter().any(|k| k.matches(element)),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum UpdateOp {
    Add,
    Sub,
    Set,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub matches: DecodedMatches,
    pub entries: Vec<Vec<u8>>,
    pub report: LatencyReport,
    /// Set when more matches exist past the returned window.
    pub truncated: bool,
}

pub struct AllocateRequest {
    pub element_bits: u64,
    pub entry_bytes: u64,
    /// Entries are little-endian fixed-width integers (enables associative
    /// update).
    pub numeric: bool,
    /// Declared capacity; overridden by `initial` when data is supplied.
    pub element_count: u64,
    pub initial: Option<InitialData>,
}

pub struct InitialData {
    pub elements: Vec<Vec<bool>>,
    pub entries: Vec<Vec<u8>>,
}

struct Region {
    desc: SearchRegionDescriptor,
    numeric: bool,
    link: Vec<LinkTableEntry>,
    /// Data-region contents, ordinal-indexed at entry_bytes stride.
    data: Vec<u8>,
    /// Elements written to flash so far (dense prefix of the ordinal space).
    flushed: u64,
    staged_elements: Vec<Vec<bool>>,
    staged_valid: Vec<bool>,
    update_buf: HashMap<u64, Vec<u8>>,
    mutation_stamp: u64,
}

impl Region {
    fn native(&self, config: &SsdConfig) -> u64 {
        config.native_element_size()
    }

    fn group_blocks(&self, group: u64) -> &[PhysicalAddress] {
        let bpe = self.desc.blocks_per_element as usize;
        &self.desc.blocks[group as usize * bpe..(group as usize + 1) * bpe]
    }

    fn total_count(&self) -> u64 {
        self.flushed + self.staged_elements.len() as u64
    }
}

pub struct SearchManager {
    pub backend: Backend,
    regions: HashMap<RegionId, Region>,
    blocks: HashMap<PhysicalAddress, FlashBlock>,
    next_region: RegionId,
    allocated_blocks: u64,
    freed_blocks: u64,
    /// Host logical block size used for result compaction.
    pub host_block_bytes: u64,
    /// Write inversion halves FE-BE program traffic for search regions.
    pub write_inversion: bool,
    pub last_report: LatencyReport,
}

impl SearchManager {
    pub fn new(config: SsdConfig) -> Self {
        SearchManager {
            backend: Backend::new(config),
            regions: HashMap::new(),
            blocks: HashMap::new(),
            next_region: 1,
            allocated_blocks: 0,
            freed_blocks: 0,
            host_block_bytes: 4096,
            write_inversion: true,
            last_report: LatencyReport::default(),
        }
    }

    pub fn config(&self) -> &SsdConfig {
        &self.backend.config
    }

    /// Live search-region blocks (allocated minus deallocated).
    pub fn search_blocks_in_use(&self) -> u64 {
        self.allocated_blocks - self.freed_blocks
    }

    pub fn link_table_bytes(&self) -> u64 {
        self.regions
            .values()
            .map(|r| r.link.len() as u64 * LINK_TABLE_ENTRY_BYTES)
            .sum()
    }

    pub fn link_table_entries(&self) -> u64 {
        self.regions.values().map(|r| r.link.len() as u64).sum()
    }

    pub fn descriptor(&self, region_id: RegionId) -> Result<&SearchRegionDescriptor, FtlError> {
        self.regions
            .get(&region_id)
            .map(|r| &r.desc)
            .ok_or(FtlError::UnknownRegion(region_id))
    }

    pub fn mutation_stamp(&self, region_id: RegionId) -> Result<u64, FtlError> {
        self.regions
            .get(&region_id)
            .map(|r| r.mutation_stamp)
            .ok_or(FtlError::UnknownRegion(region_id))
    }

    fn address_of_block_index(&self, n: u64) -> PhysicalAddress {
        let cfg = self.config();
        let units = cfg.parallel_units();
        let pair = n % units;
        let offset = n / units;
        PhysicalAddress {
            channel: pair % cfg.channels,
            die: pair / cfg.channels,
            plane: offset / cfg.blocks_per_plane,
            block: offset % cfg.blocks_per_plane,
            page: 0,
        }
    }

    fn take_blocks(&mut self, count: u64) -> Result<Vec<PhysicalAddress>, FtlError> {
        let available = self.config().total_blocks() - self.allocated_blocks;
        if count > available {
            return Err(FtlError::CapacityExhausted {
                need: count,
                available,
            });
        }
        let start = self.allocated_blocks;
        self.allocated_blocks += count;
        Ok((start..start + count)
            .map(|n| self.address_of_block_index(n))
            .collect())
    }

    /// Address used for scheduling a data-region page read; data pages are
    /// spread round-robin across (channel, die) pairs.
    fn data_page_address(&self, page_index: u64) -> PhysicalAddress {
        let cfg = self.config();
        let pair = page_index % cfg.parallel_units();
        PhysicalAddress {
            channel: pair % cfg.channels,
            die: pair / cfg.channels,
            plane: 0,
            block: 0,
            page: 0,
        }
    }

    pub fn allocate_region(&mut self, req: AllocateRequest) -> Result<RegionId, FtlError> {
        let cfg = self.config().clone();
        let native = cfg.native_element_size();
        if req.element_bits == 0 || req.element_bits > native * MAX_BLOCKS_PER_ELEMENT {
            return Err(FtlError::ElementWiderThanSupported {
                bits: req.element_bits,
                max: native * MAX_BLOCKS_PER_ELEMENT,
            });
        }
        let blocks_per_element = req.element_bits.div_ceil(native);
        let elements_per_block = cfg.bitlines();
        let element_count = match &req.initial {
            Some(init) => {
                if init.elements.len() != init.entries.len() {
                    return Err(FtlError::WidthMismatch(format!(
                        "{} elements but {} entries",
                        init.elements.len(),
                        init.entries.len()
                    )));
                }
                init.elements.len() as u64
            }
            None => req.element_count,
        };
        let groups = element_count.div_ceil(elements_per_block);
        let blocks = self.take_blocks(groups * blocks_per_element)?;

        let region_id = self.next_region;
        self.next_region += 1;
        let link = (0..groups)
            .map(|g| LinkTableEntry {
                search_block_group: g,
                data_base_address: g * elements_per_block * req.entry_bytes,
                entry_bytes: req.entry_bytes,
                update_buffer_handle: region_id << 16 | g,
            })
            .collect();
        let mut region = Region {
            desc: SearchRegionDescriptor {
                region_id,
                element_bits: req.element_bits,
                elements_per_block,
                blocks_per_element,
                blocks,
                element_count,
                entry_bytes: req.entry_bytes,
            },
            numeric: req.numeric,
            link,
            data: Vec::new(),
            flushed: 0,
            staged_elements: Vec::new(),
            staged_valid: Vec::new(),
            update_buf: HashMap::new(),
            mutation_stamp: 0,
        };

        if let Some(init) = req.initial {
            self.check_widths(&region.desc, &init.elements, &init.entries)?;
            for e in &init.entries {
                region.data.extend_from_slice(e);
            }
            let ops = self.program_elements(&mut region, 0, &init.elements)?;
            region.flushed = init.elements.len() as u64;
            let host_bytes: u64 = init.entries.iter().map(|e| e.len() as u64).sum::<u64>()
                + init.elements.len() as u64 * region.desc.element_bits.div_ceil(8);
            self.last_report = self.backend.schedule_detail(1, &ops, 0, host_bytes)?;
        } else {
            self.last_report = self.backend.schedule_detail(1, &[], 0, 0)?;
        }
        self.regions.insert(region_id, region);
        Ok(region_id)
    }

    fn check_widths(
        &self,
        desc: &SearchRegionDescriptor,
        elements: &[Vec<bool>],
        entries: &[Vec<u8>],
    ) -> Result<(), FtlError> {
        for el in elements {
            if el.len() as u64 != desc.element_bits {
                return Err(FtlError::WidthMismatch(format!(
                    "element of {} bits in a {}-bit region",
                    el.len(),
                    desc.element_bits
                )));
            }
        }
        for en in entries {
            if en.len() as u64 != desc.entry_bytes {
                return Err(FtlError::WidthMismatch(format!(
                    "entry of {} bytes in a {}-byte region",
                    en.len(),
                    desc.entry_bytes
                )));
            }
        }
        Ok(())
    }

    /// Write elements into flash starting at ordinal `first`, materializing
    /// blocks on demand. Returns the program ops for scheduling.
    fn program_elements(
        &mut self,
        region: &mut Region,
        first: u64,
        elements: &[Vec<bool>],
    ) -> Result<Vec<FlashOp>, FtlError> {
        let cfg = self.config().clone();
        let native = region.native(&cfg) as usize;
        let epb = region.desc.elements_per_block;
        let rows = cfg.pages_per_block as usize;
        let bitlines = cfg.bitlines() as usize;
        let write_inversion = self.write_inversion;
        let mut ops = Vec::new();
        let mut idx = 0usize;
        while idx < elements.len() {
            let ordinal = first + idx as u64;
            let group = ordinal / epb;
            let start_bitline = (ordinal % epb) as usize;
            let room = (epb as usize - start_bitline).min(elements.len() - idx);
            let batch = &elements[idx..idx + room];
            for (b, addr) in region.group_blocks(group).to_vec().into_iter().enumerate() {
                let lo = b * native;
                let hi = ((b + 1) * native).min(region.desc.element_bits as usize);
                let slices: Vec<Vec<bool>> = batch
                    .iter()
                    .map(|el| el[lo..hi.max(lo)].to_vec())
                    .collect();
                let block = self.blocks.entry(addr).or_insert_with(|| {
                    let mut fb = FlashBlock::new(rows, bitlines, BlockMode::SearchSlc);
                    fb.set_write_inversion(write_inversion);
                    fb
                });
                let bytes = block.program_transposed(&slices, start_bitline)?;
                ops.push(FlashOp {
                    kind: OpKind::Program(CellMode::Slc),
                    addr,
                    payload_bytes: bytes,
                    to_host: false,
                    parallel_group: group as u32,
                });
            }
            idx += room;
        }
        Ok(ops)
    }

    pub fn deallocate_region(&mut self, region_id: RegionId) -> Result<(), FtlError> {
        let region = self
            .regions
            .remove(&region_id)
            .ok_or(FtlError::UnknownRegion(region_id))?;
        self.freed_blocks += region.desc.blocks.len() as u64;
        for addr in &region.desc.blocks {
            self.blocks.remove(addr);
        }
        Ok(())
    }

    pub fn append(
        &mut self,
        region_id: RegionId,
        elements: Vec<Vec<bool>>,
        entries: Vec<Vec<u8>>,
    ) -> Result<(), FtlError> {
        if elements.len() != entries.len() {
            return Err(FtlError::WidthMismatch(format!(
                "{} elements but {} entries",
                elements.len(),
                entries.len()
            )));
        }
        let mut region = self
            .regions
            .remove(&region_id)
            .ok_or(FtlError::UnknownRegion(region_id))?;
        let result = self.append_inner(&mut region, elements, entries);
        region.mutation_stamp += 1;
        self.regions.insert(region_id, region);
        result
    }

    fn append_inner(
        &mut self,
        region: &mut Region,
        elements: Vec<Vec<bool>>,
        entries: Vec<Vec<u8>>,
    ) -> Result<(), FtlError> {
        self.check_widths(&region.desc, &elements, &entries)?;
        let epb = region.desc.elements_per_block;
        let host_bytes: u64 = entries.iter().map(|e| e.len() as u64).sum::<u64>()
            + elements.len() as u64 * region.desc.element_bits.div_ceil(8);
        for e in &entries {
            region.data.extend_from_slice(e);
        }
        region.staged_elements.extend(elements);
        region
            .staged_valid
            .resize(region.staged_elements.len(), true);
        region.desc.element_count = region.desc.element_count.max(region.total_count());

        let mut ops = Vec::new();
        // Flush whole blocks out of the buffer; a partial tail stays staged
        // and remains searchable through the buffer.
        while region.staged_elements.len() as u64 >= epb {
            let batch: Vec<Vec<bool>> = region.staged_elements.drain(..epb as usize).collect();
            let valid: Vec<bool> = region.staged_valid.drain(..epb as usize).collect();
            let first = region.flushed;
            // A batch that starts inside a partially filled tail group spills
            // into the next one; make sure every touched group has blocks.
            let needed_groups = (first + epb).div_ceil(epb);
            while region.desc.block_groups() < needed_groups {
                let g = region.desc.block_groups();
                let new_blocks = self.take_blocks(region.desc.blocks_per_element)?;
                region.desc.blocks.extend(new_blocks);
                region.link.push(LinkTableEntry {
                    search_block_group: g,
                    data_base_address: g * epb * region.desc.entry_bytes,
                    entry_bytes: region.desc.entry_bytes,
                    update_buffer_handle: region.desc.region_id << 16 | g,
                });
            }
            ops.extend(self.program_elements(region, first, &batch)?);
            region.flushed += epb;
            // Elements deleted while still staged are invalidated right after
            // the flush programs them.
            for (i, &v) in valid.iter().enumerate() {
                if v {
                    continue;
                }
                let ordinal = first + i as u64;
                let pos = (ordinal % epb) as usize;
                for addr in region.group_blocks(ordinal / epb).to_vec() {
                    if let Some(block) = self.blocks.get_mut(&addr) {
                        block.invalidate_matches(&[pos])?;
                    }
                }
            }
        }
        self.last_report = self.backend.schedule_detail(1, &ops, 0, host_bytes)?;
        Ok(())
    }

    fn key_width_check(&self, region: &Region, reduction: &Reduction) -> Result<(), FtlError> {
        for key in reduction.sub_keys() {
            if key.len() as u64 > region.desc.element_bits {
                return Err(FtlError::KeyTooWide {
                    bits: key.len() as u64,
                    max: region.desc.element_bits,
                });
            }
        }
        Ok(())
    }

    /// Per-group combined match vector for one sub-key: SRCH every block of
    /// the group and AND the vectors (wide elements span blocks).
    fn group_vector(&self, region: &Region, group: u64, key: &SearchKey) -> Result<Bitmap, FtlError> {
        let native = region.native(&self.backend.config) as usize;
        let bitlines = self.backend.config.bitlines() as usize;
        let mut combined: Option<Bitmap> = None;
        for (b, addr) in region.group_blocks(group).iter().enumerate() {
            let vector = match self.blocks.get(addr) {
                Some(block) => {
                    let slice = key.slice(b * native, (b + 1) * native);
                    block.srch(&slice)?.0
                }
                // Unmaterialized block: nothing programmed, nothing matches.
                None => Bitmap::zeros(bitlines),
            };
            match &mut combined {
                Some(c) => c.and_assign(&vector),
                None => combined = Some(vector),
            }
        }
        Ok(combined.unwrap_or_else(|| Bitmap::zeros(bitlines)))
    }

    /// All matching ordinals for a reduction, in ordinal order, plus the
    /// early-termination decode stats and the per-sub-key buffered bytes.
    fn match_all(
        &self,
        region: &Region,
        reduction: &Reduction,
    ) -> Result<(DecodedMatches, u64), FtlError> {
        let epb = region.desc.elements_per_block;
        let groups = region.desc.block_groups();
        let mut decoded = DecodedMatches::default();
        let mut decode_bytes = 0u64;
        for g in 0..groups {
            let sub_vectors: Vec<Bitmap> = reduction
                .sub_keys()
                .iter()
                .map(|k| self.group_vector(region, g, k))
                .collect::<Result<_, _>>()?;
            // Early termination runs per transferred vector; buffered bytes
            // accrue per sub-key before the reduction.
            for v in &sub_vectors {
                decode_bytes += decode_match_vector(&MatchVector(v.clone()), BURST_BYTES).buffered_bytes;
            }
            let mut combined = sub_vectors[0].clone();
            for v in &sub_vectors[1..] {
                match reduction {
                    Reduction::Or(_) => combined.or_assign(v),
                    _ => combined.and_assign(v),
                }
            }
            let part = decode_match_vector(&MatchVector(combined), BURST_BYTES);
            decoded.merge_offset(part, g * epb);
        }
        // Staged elements are searched linearly in the append buffer.
        for (i, el) in region.staged_elements.iter().enumerate() {
            if region.staged_valid[i] && reduction.matches_element(el) {
                decoded.ordinals.push(region.flushed + i as u64);
            }
        }
        Ok((decoded, decode_bytes))
    }

    fn entry_of(&self, region: &Region, ordinal: u64) -> Vec<u8> {
        if let Some(over) = region.update_buf.get(&ordinal) {
            return over.clone();
        }
        let eb = region.desc.entry_bytes as usize;
        let start = ordinal as usize * eb;
        region
            .data
            .get(start..start + eb)
            .map(|s| s.to_vec())
            .unwrap_or_else(|| vec![0; eb])
    }

    fn search_ops(&self, region: &Region, sub_keys: usize) -> Vec<FlashOp> {
        let units = self.backend.config.parallel_units();
        let page = self.backend.config.page_size;
        let mut ops = Vec::with_capacity(region.desc.blocks.len() * sub_keys);
        let mut group: u32 = 0;
        for _ in 0..sub_keys {
            for (i, addr) in region.desc.blocks.iter().enumerate() {
                ops.push(FlashOp {
                    kind: OpKind::Search,
                    addr: *addr,
                    payload_bytes: page,
                    to_host: false,
                    parallel_group: group + (i as u64 / units) as u32,
                });
            }
            group += (region.desc.blocks.len() as u64).div_ceil(units).max(1) as u32;
        }
        ops
    }

    fn read_ops_for(&self, region: &Region, ordinals: &[u64], base_group: u32) -> Vec<FlashOp> {
        let page = self.backend.config.page_size;
        let units = self.backend.config.parallel_units();
        let mut pages: Vec<u64> = ordinals
            .iter()
            .map(|o| o * region.desc.entry_bytes / page)
            .collect();
        pages.dedup();
        pages
            .iter()
            .enumerate()
            .map(|(i, &p)| FlashOp {
                kind: OpKind::Read,
                addr: self.data_page_address(p),
                payload_bytes: page,
                to_host: false,
                parallel_group: base_group + (i as u64 / units) as u32,
            })
            .collect()
    }

    pub fn execute_search(
        &mut self,
        region_id: RegionId,
        reduction: &Reduction,
        max_results: usize,
    ) -> Result<SearchOutcome, FtlError> {
        self.execute_search_window(region_id, reduction, 0, max_results)
    }

    /// Search with a result window: matches `[start_match..start_match+max)`
    /// of the full match list are returned along with all match ordinals.
    pub fn execute_search_window(
        &mut self,
        region_id: RegionId,
        reduction: &Reduction,
        start_match: usize,
        max_results: usize,
    ) -> Result<SearchOutcome, FtlError> {
        let region = self
            .regions
            .get(&region_id)
            .ok_or(FtlError::UnknownRegion(region_id))?;
        self.key_width_check(region, reduction)?;
        let (matches, decode_bytes) = self.match_all(region, reduction)?;

        let end = (start_match + max_results).min(matches.ordinals.len());
        let window = &matches.ordinals[start_match.min(end)..end];
        let entries: Vec<Vec<u8>> = window.iter().map(|&o| self.entry_of(region, o)).collect();
        let truncated = end < matches.ordinals.len();

        let mut ops = self.search_ops(region, reduction.sub_keys().len());
        let read_base = ops
            .iter()
            .map(|o| o.parallel_group + 1)
            .max()
            .unwrap_or(0);
        ops.extend(self.read_ops_for(region, window, read_base));
        let host_bytes = compacted_bytes(
            window.len() as u64,
            region.desc.entry_bytes,
            self.host_block_bytes,
        );
        let report = self
            .backend
            .schedule_detail(1, &ops, decode_bytes, host_bytes)?;
        Ok(SearchOutcome {
            matches,
            entries,
            report,
            truncated,
        })
    }

    /// Read the data entries for an explicit ordinal list (pagination path;
    /// no new SRCH is issued).
    pub fn read_entries(
        &mut self,
        region_id: RegionId,
        ordinals: &[u64],
    ) -> Result<(Vec<Vec<u8>>, LatencyReport), FtlError> {
        let region = self
            .regions
            .get(&region_id)
            .ok_or(FtlError::UnknownRegion(region_id))?;
        let entries: Vec<Vec<u8>> = ordinals.iter().map(|&o| self.entry_of(region, o)).collect();
        let ops = self.read_ops_for(region, ordinals, 0);
        let host_bytes = compacted_bytes(
            ordinals.len() as u64,
            region.desc.entry_bytes,
            self.host_block_bytes,
        );
        let report = self.backend.schedule_detail(1, &ops, 0, host_bytes)?;
        Ok((entries, report))
    }

    /// Invalidate every element matching the key; slots are not reclaimed.
    pub fn delete(&mut self, region_id: RegionId, key: &SearchKey) -> Result<u64, FtlError> {
        let reduction = Reduction::Single(key.clone());
        let region = self
            .regions
            .get(&region_id)
            .ok_or(FtlError::UnknownRegion(region_id))?;
        self.key_width_check(region, &reduction)?;
        let (matches, decode_bytes) = self.match_all(region, &reduction)?;

        let epb = region.desc.elements_per_block;
        let flushed = region.flushed;
        let mut per_group: HashMap<u64, Vec<usize>> = HashMap::new();
        let mut staged_dead: Vec<usize> = Vec::new();
        for &o in &matches.ordinals {
            if o < flushed {
                per_group.entry(o / epb).or_default().push((o % epb) as usize);
            } else {
                staged_dead.push((o - flushed) as usize);
            }
        }

        let mut ops = self.search_ops(region, 1);
        let mut flip_group = ops.iter().map(|o| o.parallel_group + 1).max().unwrap_or(0);
        let page = self.backend.config.page_size;
        let mut flips: Vec<(PhysicalAddress, Vec<usize>)> = Vec::new();
        for (g, positions) in per_group {
            for addr in self.regions[&region_id].group_blocks(g) {
                // Valid-bit flip: a page read plus an in-place program.
                ops.push(FlashOp {
                    kind: OpKind::Read,
                    addr: *addr,
                    payload_bytes: page,
                    to_host: false,
                    parallel_group: flip_group,
                });
                ops.push(FlashOp {
                    kind: OpKind::Program(CellMode::Slc),
                    addr: *addr,
                    payload_bytes: page,
                    to_host: false,
                    parallel_group: flip_group + 1,
                });
                flips.push((*addr, positions.clone()));
            }
            flip_group += 2;
        }
        for (addr, positions) in flips {
            if let Some(block) = self.blocks.get_mut(&addr) {
                block.invalidate_matches(&positions)?;
            }
        }
        let region = self.regions.get_mut(&region_id).unwrap();
        for i in staged_dead {
            region.staged_valid[i] = false;
        }
        region.mutation_stamp += 1;
        self.last_report = self.backend.schedule_detail(1, &ops, decode_bytes, 0)?;
        Ok(matches.ordinals.len() as u64)
    }

    /// In-SSD bulk update of all matching entries. Results land in the
    /// firmware update buffer; no bytes cross the host link.
    pub fn associative_update(
        &mut self,
        region_id: RegionId,
        key: &SearchKey,
        op: UpdateOp,
        immediate: u64,
    ) -> Result<u64, FtlError> {
        let reduction = Reduction::Single(key.clone());
        let region = self
            .regions
            .get(&region_id)
            .ok_or(FtlError::UnknownRegion(region_id))?;
        self.key_width_check(region, &reduction)?;
        if !region.numeric || region.desc.entry_bytes > 8 {
            return Err(FtlError::NonNumericEntries);
        }
        let (matches, decode_bytes) = self.match_all(region, &reduction)?;
        let eb = region.desc.entry_bytes as usize;

        let mut updates: Vec<(u64, Vec<u8>)> = Vec::with_capacity(matches.ordinals.len());
        for &o in &matches.ordinals {
            let cur = self.entry_of(region, o);
            let mut word = [0u8; 8];
            word[..eb].copy_from_slice(&cur);
            let value = u64::from_le_bytes(word);
            let new = match op {
                UpdateOp::Add => value.wrapping_add(immediate),
                UpdateOp::Sub => value.wrapping_sub(immediate),
                UpdateOp::Set => immediate,
            };
            updates.push((o, new.to_le_bytes()[..eb].to_vec()));
        }

        let mut ops = self.search_ops(region, 1);
        let read_base = ops.iter().map(|o| o.parallel_group + 1).max().unwrap_or(0);
        ops.extend(self.read_ops_for(region, &matches.ordinals, read_base));
        let region = self.regions.get_mut(&region_id).unwrap();
        let count = updates.len() as u64;
        for (o, bytes) in updates {
            region.update_buf.insert(o, bytes);
        }
        region.mutation_stamp += 1;
        self.last_report = self.backend.schedule_detail(1, &ops, decode_bytes, 0)?;
        Ok(count)
    }
}
