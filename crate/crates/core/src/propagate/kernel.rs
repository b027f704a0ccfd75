//! The message kernel: marginalize the source clique onto the separator and
//! scatter the ratio of new to old separator entries into the target clique.
//!
//! Both engines run the identical per-entry computation: `sep_star[j]` sums
//! `μ[src,sep][j]` in ascending order, the ratio `sep_star[j] / sep[j]` is
//! formed once, and each target entry is multiplied by it. The parallel engine
//! only changes which thread runs which `j`, so results are bit-identical.

use rayon::prelude::*;

use crate::compile::MappingTable;
use crate::error::{Error, Result};

/// Work for one separator entry. Returns the new separator value.
#[inline]
fn entry_update(
    j: usize,
    src: &[f64],
    old: f64,
    mu_src: &MappingTable,
    mu_tgt: &MappingTable,
    separator: usize,
    mut scale: impl FnMut(usize, f64),
) -> Result<f64> {
    let mut star = 0.0;
    mu_src.for_each(j, |r| star += src[r]);
    let ratio = if old == 0.0 {
        if star != 0.0 {
            return Err(Error::InconsistentDivision { separator, entry: j, value: star });
        }
        0.0
    } else {
        star / old
    };
    mu_tgt.for_each(j, |t| scale(t, ratio));
    Ok(star)
}

pub(crate) fn pass_sequential(
    src: &[f64],
    tgt: &mut [f64],
    sep: &mut [f64],
    mu_src: &MappingTable,
    mu_tgt: &MappingTable,
    separator: usize,
) -> Result<()> {
    for (j, slot) in sep.iter_mut().enumerate() {
        *slot = entry_update(j, src, *slot, mu_src, mu_tgt, separator, |t, ratio| tgt[t] *= ratio)?;
    }
    Ok(())
}

/// Raw view of the target table shared by the worker tasks.
struct ScatterTarget {
    ptr: *mut f64,
    len: usize,
}

// SAFETY: tasks only write through `scale`, and every target index belongs to
// exactly one separator entry's list (the mapping table is a partition), so no
// two tasks touch the same element.
unsafe impl Send for ScatterTarget {}
unsafe impl Sync for ScatterTarget {}

impl ScatterTarget {
    #[inline]
    fn scale(&self, t: usize, ratio: f64) {
        assert!(t < self.len);
        // SAFETY: in bounds (checked above); exclusive per the partition invariant.
        unsafe { *self.ptr.add(t) *= ratio }
    }
}

/// Entries of the separator are split into at most `workers` contiguous
/// blocks; each block owns its separator slots and the target indices mapped
/// to them.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pass_parallel(
    pool: &rayon::ThreadPool,
    workers: usize,
    src: &[f64],
    tgt: &mut [f64],
    sep: &mut [f64],
    mu_src: &MappingTable,
    mu_tgt: &MappingTable,
    separator: usize,
) -> Result<()> {
    let n = sep.len();
    if n == 0 {
        return Ok(());
    }
    debug_assert_eq!(mu_tgt.entries() * mu_tgt.per_entry(), tgt.len());
    let block = n.div_ceil(workers.clamp(1, n));
    let target = ScatterTarget { ptr: tgt.as_mut_ptr(), len: tgt.len() };
    pool.install(|| {
        sep.par_chunks_mut(block).enumerate().try_for_each(|(b, slots)| {
            for (k, slot) in slots.iter_mut().enumerate() {
                let j = b * block + k;
                *slot = entry_update(j, src, *slot, mu_src, mu_tgt, separator, |t, ratio| target.scale(t, ratio))?;
            }
            Ok(())
        })
    })
}
