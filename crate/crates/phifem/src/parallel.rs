//! Parallel evaluation of assembly work items.

use phifem_core::assembly::{AssembledSystem, Assembler, Contribution};
use rayon::prelude::*;

use crate::Result;

const CHUNK: usize = 512;

/// Evaluates all work items on the rayon pool and concatenates them in item
/// order, so the triplet list does not depend on the thread count.
pub fn assemble(assembler: &Assembler<'_>) -> Result<AssembledSystem> {
    let items: Vec<usize> = (0..assembler.num_items()).collect();
    let chunks = items
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|&k| assembler.item(k)).collect::<phifem_core::Result<Vec<Contribution>>>())
        .collect::<phifem_core::Result<Vec<_>>>()?;
    Ok(assembler.finish(chunks.into_iter().flatten()))
}
