//! Integer occupation-number bookkeeping for field modes.
//!
//! Annihilating an empty mode gives no state at all, which is distinct from
//! the vacuum; [`fock_annihilate`] models that as `Ok(None)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockOccupancy {
    counts: Vec<u32>,
}

impl FockOccupancy {
    pub fn vacuum(modes: usize) -> Self {
        Self { counts: vec![0; modes] }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn modes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.counts.len() {
            return Err(Error::ModeOutOfRange { index: mode, modes: self.counts.len() });
        }
        Ok(())
    }
}

/// Adds one quantum to `mode`.
pub fn fock_create(occ: &FockOccupancy, mode: usize) -> Result<FockOccupancy> {
    occ.check_mode(mode)?;
    let mut next = occ.clone();
    next.counts[mode] = next.counts[mode]
        .checked_add(1)
        .ok_or_else(|| Error::OutOfRange(format!("occupation overflow in mode {mode}")))?;
    Ok(next)
}

/// Removes one quantum from `mode`; `None` when the mode is empty.
pub fn fock_annihilate(occ: &FockOccupancy, mode: usize) -> Result<Option<FockOccupancy>> {
    occ.check_mode(mode)?;
    if occ.counts[mode] == 0 {
        return Ok(None);
    }
    let mut next = occ.clone();
    next.counts[mode] -= 1;
    Ok(Some(next))
}
