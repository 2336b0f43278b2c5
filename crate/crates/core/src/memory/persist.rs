//! Bank directory layout:
//!
//! - `entries.jsonl`: one `DiscreteEntry` JSON object per line.
//! - `slots.bin`: little-endian `u32` header `n_entries, n_slots, dim`, then
//!   each entry's slot matrix as row-major little-endian `f32`, in the same
//!   order as `entries.jsonl`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::bank::{ContinuousSlots, DiscreteEntry, MemoryBank, N_SLOTS};
use super::MemoryError;

pub const ENTRIES_FILE: &str = "entries.jsonl";
pub const SLOTS_FILE: &str = "slots.bin";

fn io_err(path: &Path, e: impl std::fmt::Display) -> MemoryError {
    MemoryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn save_bank(bank: &MemoryBank, dir: impl AsRef<Path>) -> Result<(), MemoryError> {
    let dir = dir.as_ref();
    bank.check_invariants()?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let entries_path = dir.join(ENTRIES_FILE);
    let file = fs::File::create(&entries_path).map_err(|e| io_err(&entries_path, e))?;
    let mut w = BufWriter::new(file);
    for entry in &bank.entries {
        let line = serde_json::to_string(entry).map_err(|e| io_err(&entries_path, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(&entries_path, e))?;
    }
    w.flush().map_err(|e| io_err(&entries_path, e))?;

    let slots_path = dir.join(SLOTS_FILE);
    let mut buf = Vec::with_capacity(12 + bank.entries.len() * N_SLOTS * bank.dim * 4);
    for h in [bank.entries.len(), N_SLOTS, bank.dim] {
        let h = u32::try_from(h).map_err(|_| MemoryError::Invalid("bank too large for slots header".into()))?;
        buf.extend_from_slice(&h.to_le_bytes());
    }
    for entry in &bank.entries {
        for x in bank.slots_by_entry[&entry.entry_id].as_slice() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(&slots_path, buf).map_err(|e| io_err(&slots_path, e))
}

pub fn load_bank(dir: impl AsRef<Path>) -> Result<MemoryBank, MemoryError> {
    let dir = dir.as_ref();
    let entries_path = dir.join(ENTRIES_FILE);
    let file = fs::File::open(&entries_path).map_err(|e| io_err(&entries_path, e))?;
    let mut entries: Vec<DiscreteEntry> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(&entries_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| MemoryError::Format {
            path: entries_path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }

    let slots_path = dir.join(SLOTS_FILE);
    let bytes = fs::read(&slots_path).map_err(|e| io_err(&slots_path, e))?;
    let format_err = |message: String| MemoryError::Format {
        path: slots_path.display().to_string(),
        line: 0,
        message,
    };
    if bytes.len() < 12 {
        return Err(format_err(format!("header truncated ({} bytes)", bytes.len())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
    let (n_entries, n_slots, dim) = (word(0), word(1), word(2));
    if n_slots != N_SLOTS {
        return Err(format_err(format!("expected {N_SLOTS} slots per entry, header says {n_slots}")));
    }
    if n_entries != entries.len() {
        return Err(format_err(format!(
            "header lists {n_entries} entries but {ENTRIES_FILE} has {}",
            entries.len()
        )));
    }
    let per_entry = n_slots * dim;
    let expected = 12 + n_entries * per_entry * 4;
    if bytes.len() != expected {
        return Err(format_err(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let floats: Vec<f32> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut slots_by_entry = BTreeMap::new();
    for (entry, rows) in entries.iter().zip(floats.chunks_exact(per_entry.max(1))) {
        if entry.feature_vec.len() != dim {
            return Err(MemoryError::Shape {
                expected: dim,
                got: entry.feature_vec.len(),
            });
        }
        slots_by_entry.insert(entry.entry_id, ContinuousSlots::from_rows(dim, rows.to_vec())?);
    }
    let bank = MemoryBank {
        dim,
        entries,
        slots_by_entry,
    };
    bank.check_invariants()?;
    Ok(bank)
}
