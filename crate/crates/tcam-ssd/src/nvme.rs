//! Structural NVMe command surface: command/completion objects, the
//! host-buffer pagination protocol, and the two convenience API modes.
//!
//! Commands are structural values; wire encoding is out of scope. A
//! continuation token is an opaque handle invalidated by any mutation to its
//! region.

use crate::backend::LatencyReport;
use crate::flash_array::SearchKey;
use crate::ftl::{
    AllocateRequest, FtlError, Reduction, RegionId, SearchManager, UpdateOp,
};
use std::collections::HashMap;
use thiserror::Error;

/// Widest key that fits inline in a SimpleSearch command.
pub const SIMPLE_SEARCH_MAX_KEY_BITS: usize = 127;

#[derive(Debug, Error)]
pub enum NvmeError {
    #[error("malformed command: {0}")]
    MalformedCommand(String),
    #[error("continuation token {0} is unknown")]
    UnknownToken(u64),
    #[error("continuation token {0} is stale: the region was mutated")]
    StaleContinuation(u64),
    #[error(transparent)]
    Ftl(#[from] FtlError),
}

/// Host-side result buffer descriptor: capacity in entries.
#[derive(Clone, Copy, Debug)]
pub struct HostBuffer {
    pub capacity_entries: usize,
}

#[derive(Clone, Debug)]
pub enum Command {
    Allocate {
        element_bits: u64,
        entry_bytes: u64,
        numeric: bool,
        element_count: u64,
        elements: Vec<Vec<bool>>,
        entries: Vec<Vec<u8>>,
    },
    Deallocate {
        region: RegionId,
    },
    Append {
        region: RegionId,
        elements: Vec<Vec<bool>>,
        entries: Vec<Vec<u8>>,
    },
    /// Key carried inline in the command capsule; limited width.
    SimpleSearch {
        region: RegionId,
        key: SearchKey,
        buffer: HostBuffer,
    },
    /// Key carried via data pointer; arbitrary reduction.
    Search {
        region: RegionId,
        reduction: Reduction,
        buffer: HostBuffer,
    },
    SearchContinue {
        token: u64,
        buffer: HostBuffer,
    },
    Delete {
        region: RegionId,
        key: SearchKey,
    },
    AssocUpdate {
        region: RegionId,
        key: SearchKey,
        op: UpdateOp,
        immediate: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandStatus {
    Success,
}

#[derive(Clone, Debug, Default)]
pub struct CompletionEntry {
    pub returned_entry_count: u64,
    /// More matches exist than the host buffer could hold.
    pub buffer_exceeded: bool,
    /// Present iff buffer_exceeded.
    pub continuation_token: Option<u64>,
    pub entries: Vec<Vec<u8>>,
    /// Region id of a freshly allocated region.
    pub region: Option<RegionId>,
    /// Delete / update match count.
    pub affected: u64,
    pub report: LatencyReport,
}

struct PendingSearch {
    region: RegionId,
    ordinals: Vec<u64>,
    served: usize,
    stamp: u64,
}

/// One simulated drive behind an NVMe submission queue.
pub struct NvmeDevice {
    pub manager: SearchManager,
    pending: HashMap<u64, PendingSearch>,
    next_token: u64,
}

impl NvmeDevice {
    pub fn new(manager: SearchManager) -> Self {
        NvmeDevice {
            manager,
            pending: HashMap::new(),
            next_token: 1,
        }
    }

    pub fn submit(&mut self, command: Command) -> Result<CompletionEntry, NvmeError> {
        match command {
            Command::Allocate {
                element_bits,
                entry_bytes,
                numeric,
                element_count,
                elements,
                entries,
            } => {
                let initial = if elements.is_empty() && entries.is_empty() {
                    None
                } else {
                    Some(crate::ftl::InitialData { elements, entries })
                };
                let region = self.manager.allocate_region(AllocateRequest {
                    element_bits,
                    entry_bytes,
                    numeric,
                    element_count,
                    initial,
                })?;
                Ok(CompletionEntry {
                    region: Some(region),
                    report: self.manager.last_report,
                    ..CompletionEntry::default()
                })
            }
            Command::Deallocate { region } => {
                self.manager.deallocate_region(region)?;
                self.pending.retain(|_, p| p.region != region);
                Ok(CompletionEntry::default())
            }
            Command::Append {
                region,
                elements,
                entries,
            } => {
                self.manager.append(region, elements, entries)?;
                Ok(CompletionEntry {
                    report: self.manager.last_report,
                    ..CompletionEntry::default()
                })
            }
            Command::SimpleSearch {
                region,
                key,
                buffer,
            } => {
                if key.len() > SIMPLE_SEARCH_MAX_KEY_BITS {
                    return Err(NvmeError::MalformedCommand(format!(
                        "SimpleSearch inline key of {} bits exceeds {} bits",
                        key.len(),
                        SIMPLE_SEARCH_MAX_KEY_BITS
                    )));
                }
                self.run_search(region, Reduction::Single(key), buffer)
            }
            Command::Search {
                region,
                reduction,
                buffer,
            } => self.run_search(region, reduction, buffer),
            Command::SearchContinue { token, buffer } => self.run_continue(token, buffer),
            Command::Delete { region, key } => {
                let affected = self.manager.delete(region, &key)?;
                Ok(CompletionEntry {
                    affected,
                    report: self.manager.last_report,
                    ..CompletionEntry::default()
                })
            }
            Command::AssocUpdate {
                region,
                key,
                op,
                immediate,
            } => {
                let affected = self.manager.associative_update(region, &key, op, immediate)?;
                Ok(CompletionEntry {
                    affected,
                    report: self.manager.last_report,
                    ..CompletionEntry::default()
                })
            }
        }
    }

    fn run_search(
        &mut self,
        region: RegionId,
        reduction: Reduction,
        buffer: HostBuffer,
    ) -> Result<CompletionEntry, NvmeError> {
        let out = self
            .manager
            .execute_search(region, &reduction, buffer.capacity_entries)?;
        let mut completion = CompletionEntry {
            returned_entry_count: out.entries.len() as u64,
            buffer_exceeded: out.truncated,
            entries: out.entries,
            report: out.report,
            ..CompletionEntry::default()
        };
        if out.truncated {
            let token = self.next_token;
            self.next_token += 1;
            self.pending.insert(
                token,
                PendingSearch {
                    region,
                    ordinals: out.matches.ordinals,
                    served: completion.returned_entry_count as usize,
                    stamp: self.manager.mutation_stamp(region)?,
                },
            );
            completion.continuation_token = Some(token);
        }
        Ok(completion)
    }

    fn run_continue(&mut self, token: u64, buffer: HostBuffer) -> Result<CompletionEntry, NvmeError> {
        let pending = self
            .pending
            .get_mut(&token)
            .ok_or(NvmeError::UnknownToken(token))?;
        let stamp = self.manager.mutation_stamp(pending.region)?;
        if stamp != pending.stamp {
            let token_id = token;
            self.pending.remove(&token);
            return Err(NvmeError::StaleContinuation(token_id));
        }
        let end = (pending.served + buffer.capacity_entries).min(pending.ordinals.len());
        let window = pending.ordinals[pending.served..end].to_vec();
        let region = pending.region;
        pending.served = end;
        let exceeded = end < pending.ordinals.len();
        if !exceeded {
            self.pending.remove(&token);
        }
        let (entries, report) = self.manager.read_entries(region, &window)?;
        Ok(CompletionEntry {
            returned_entry_count: entries.len() as u64,
            buffer_exceeded: exceeded,
            continuation_token: exceeded.then_some(token),
            entries,
            report,
            ..CompletionEntry::default()
        })
    }

    /// Listing-1 style convenience: loop submit + SearchContinue until the
    /// buffer-exceeded flag clears; returns all entries plus the latency sum
    /// and the number of commands issued.
    pub fn tcam_search(
        &mut self,
        region: RegionId,
        key: SearchKey,
        buffer: HostBuffer,
    ) -> Result<(Vec<Vec<u8>>, LatencyReport, u64), NvmeError> {
        let mut completion = self.submit(Command::Search {
            region,
            reduction: Reduction::Single(key),
            buffer,
        })?;
        let mut entries = std::mem::take(&mut completion.entries);
        let mut report = completion.report;
        let mut commands = 1u64;
        while completion.buffer_exceeded {
            let token = completion
                .continuation_token
                .expect("buffer_exceeded without a continuation token");
            completion = self.submit(Command::SearchContinue { token, buffer })?;
            entries.extend(std::mem::take(&mut completion.entries));
            report.accumulate(&completion.report);
            commands += 1;
        }
        Ok((entries, report, commands))
    }

    /// Listing-2 style convenience: in-SSD bulk update; asserts the operation
    /// moved no bytes over the host link.
    pub fn tcam_update(
        &mut self,
        region: RegionId,
        key: SearchKey,
        op: UpdateOp,
        immediate: u64,
    ) -> Result<u64, NvmeError> {
        let before = self.manager.backend.counters.cpu_fe_bytes;
        let completion = self.submit(Command::AssocUpdate {
            region,
            key,
            op,
            immediate,
        })?;
        assert_eq!(
            self.manager.backend.counters.cpu_fe_bytes, before,
            "associative update must not cross the host link"
        );
        Ok(completion.affected)
    }
}
