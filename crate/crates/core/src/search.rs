//! Candidate families and search over them.
//!
//! Three families are supported: nested leading-term models, every union of
//! whole blocks of a [`BlockPartition`], and the data-driven path produced by
//! greedy general-to-specific block elimination. The exhaustive block family is
//! mostly a test oracle; with 20 blocks it already has 2²⁰ members.
//!
//! Tie-breaking is not specified by the underlying method. Here an exactly tied
//! RSS increase removes the block with the lowest index, and an exactly tied
//! criterion value selects the smaller model, then the lexicographically
//! smaller mask.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::criteria::{CriterionKind, CriterionRecord};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, forward_substitute, HouseholderQr};
use crate::regression::{check_order, fit_restricted_ls, Dataset, ModelMask};

/// Largest partition for which the exhaustive family may be enumerated.
pub const MAX_EXHAUSTIVE_BLOCKS: usize = 20;

/// Disjoint blocks of column indices whose union is `0..p_active`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
}

impl BlockPartition {
    /// Blocks must be non-empty, pairwise disjoint and cover `0..p_active`.
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let total: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; total];
        for (b, block) in blocks.iter_mut().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {b} is empty")));
            }
            block.sort_unstable();
            for &j in block.iter() {
                if j >= total {
                    return Err(Error::InvalidPartition(format!(
                        "index {j} leaves a gap: blocks must cover 0..{total}"
                    )));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidPartition(format!("index {j} appears twice")));
                }
            }
        }
        Ok(Self { blocks })
    }

    /// Consecutive blocks of the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&s| {
                let b: Vec<usize> = (start..start + s).collect();
                start += s;
                b
            })
            .collect();
        Self::new(blocks)
    }

    /// `count` consecutive blocks of `size` columns each.
    pub fn contiguous(count: usize, size: usize) -> Result<Self> {
        Self::from_sizes(&vec![size; count])
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of columns covered.
    pub fn p_active(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// The model made of the listed blocks, over `p` regressors.
    pub fn union_mask(&self, p: usize, block_ids: &[usize]) -> Result<ModelMask> {
        ModelMask::new(p, block_ids.iter().flat_map(|&b| self.blocks[b].iter().copied()))
    }
}

/// One model along a greedy elimination path.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub mask: ModelMask,
    pub rss: f64,
    /// Block removed to reach this model; `None` for the starting full model.
    pub eliminated_block: Option<usize>,
}

/// Models visited by greedy block elimination, from all blocks down to none.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPath {
    pub steps: Vec<GreedyStep>,
}

impl GreedyPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn masks(&self) -> Vec<ModelMask> {
        self.steps.iter().map(|s| s.mask.clone()).collect()
    }

    /// Blocks in elimination order.
    pub fn elimination_order(&self) -> Vec<usize> {
        self.steps.iter().filter_map(|s| s.eliminated_block).collect()
    }
}

/// Nested models `{0..k-1}` for `k = 0..=p_max`.
pub fn leading_term_family(p: usize, p_max: usize) -> Vec<ModelMask> {
    (0..=p_max).map(|k| ModelMask::leading(p, k)).collect()
}

/// Increase in RSS from dropping each candidate block of the current model.
///
/// Uses one QR of the current design: dropping the coefficient subset `B`
/// raises the RSS by `β̂_Bᵀ [(XᵀX)⁻¹]_BB⁻¹ β̂_B`, and `(XᵀX)⁻¹ = R⁻¹R⁻ᵀ`.
fn removal_costs(
    data: &Dataset,
    mask: &ModelMask,
    active: &[usize],
    partition: &BlockPartition,
) -> Result<Vec<f64>> {
    let k = mask.order();
    let qr = HouseholderQr::factor(data.x().select_columns(mask.indices()));
    let rank = qr.leading_rank(k);
    if rank < k {
        return Err(Error::RankDeficient { rank, order: k }.at_mask(mask));
    }
    let mut qty = data.y().to_vec();
    qr.apply_qt(&mut qty);
    let coef = qr.solve_leading(k, &qty);
    let rinv = qr.inverse_r(k);

    active
        .par_iter()
        .map(|&b| {
            let pos: Vec<usize> = partition
                .block(b)
                .iter()
                .map(|j| mask.indices().binary_search(j).expect("active block inside mask"))
                .collect();
            let m = pos.len();
            // S_BB = W Wᵀ with W the rows `pos` of R⁻¹ (upper triangular, so
            // row i is zero before column i).
            let mut s = vec![0.0; m * m];
            for a in 0..m {
                let ra = &rinv[pos[a] * k..(pos[a] + 1) * k];
                for c in 0..=a {
                    let rc = &rinv[pos[c] * k..(pos[c] + 1) * k];
                    let start = pos[a].max(pos[c]);
                    let v: f64 = ra[start..].iter().zip(&rc[start..]).map(|(x, y)| x * y).sum();
                    s[a * m + c] = v;
                    s[c * m + a] = v;
                }
            }
            let l = cholesky(&s, m).ok_or(Error::RankDeficient { rank: k - 1, order: k })?;
            let mut z: Vec<f64> = pos.iter().map(|&i| coef[i]).collect();
            forward_substitute(&l, m, &mut z);
            Ok(z.iter().map(|v| v * v).sum())
        })
        .collect()
}

/// Greedy general-to-specific elimination: starting from the model with every
/// block, repeatedly remove the block whose removal increases RSS the least.
///
/// The path has `#blocks + 1` models and ends at the empty model. Candidate
/// removals are scored in parallel; the reduction is sequential in block order,
/// so the result does not depend on the thread count.
pub fn greedy_block_elimination(data: &Dataset, partition: &BlockPartition) -> Result<GreedyPath> {
    let p = data.p();
    if partition.p_active() > p {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} columns but the dataset has {p}",
            partition.p_active()
        )));
    }
    let mut active: Vec<usize> = (0..partition.num_blocks()).collect();
    let mut mask = partition.union_mask(p, &active)?;
    check_order(mask.order(), data.n())?;
    let full = fit_restricted_ls(data, &mask).map_err(|e| e.at_mask(&mask))?;
    let mut steps = vec![GreedyStep {
        mask: mask.clone(),
        rss: full.rss,
        eliminated_block: None,
    }];

    while !active.is_empty() {
        let pick = if active.len() == 1 {
            0
        } else {
            let costs = removal_costs(data, &mask, &active, partition)?;
            let mut best = 0;
            for i in 1..costs.len() {
                if costs[i] < costs[best] {
                    best = i;
                }
            }
            best
        };
        let block = active.remove(pick);
        mask = mask.without(partition.block(block));
        let fit = fit_restricted_ls(data, &mask).map_err(|e| e.at_mask(&mask))?;
        steps.push(GreedyStep {
            mask: mask.clone(),
            rss: fit.rss,
            eliminated_block: Some(block),
        });
    }
    Ok(GreedyPath { steps })
}

/// Reference implementation of [`greedy_block_elimination`] that refits every
/// candidate removal from scratch. Quadratic in the number of blocks; meant for
/// cross-checking.
pub fn greedy_block_elimination_by_refit(data: &Dataset, partition: &BlockPartition) -> Result<GreedyPath> {
    let p = data.p();
    let mut active: Vec<usize> = (0..partition.num_blocks()).collect();
    let mut mask = partition.union_mask(p, &active)?;
    check_order(mask.order(), data.n())?;
    let mut steps = vec![GreedyStep {
        rss: fit_restricted_ls(data, &mask)?.rss,
        mask: mask.clone(),
        eliminated_block: None,
    }];
    while !active.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (i, _) in active.iter().enumerate() {
            let rest: Vec<usize> = active.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &b)| b).collect();
            let rss = fit_restricted_ls(data, &partition.union_mask(p, &rest)?)?.rss;
            if best.is_none_or(|(r, _)| rss < r) {
                best = Some((rss, i));
            }
        }
        let (rss, i) = best.expect("at least one active block");
        let block = active.remove(i);
        mask = mask.without(partition.block(block));
        steps.push(GreedyStep {
            mask: mask.clone(),
            rss,
            eliminated_block: Some(block),
        });
    }
    Ok(GreedyPath { steps })
}

/// Every union of whole blocks, produced lazily in binary-counter order:
/// member `i` contains block `b` iff bit `b` of `i` is set.
#[derive(Debug, Clone)]
pub struct BlockFamily<'a> {
    partition: &'a BlockPartition,
    p: usize,
    next: u64,
    end: u64,
}

impl Iterator for BlockFamily<'_> {
    type Item = ModelMask;

    fn next(&mut self) -> Option<ModelMask> {
        if self.next >= self.end {
            return None;
        }
        let i = self.next;
        self.next += 1;
        let ids: Vec<usize> = (0..self.partition.num_blocks())
            .filter(|b| i >> b & 1 == 1)
            .collect();
        Some(
            self.partition
                .union_mask(self.p, &ids)
                .expect("partition indices lie below p"),
        )
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = (self.end - self.next) as usize;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for BlockFamily<'_> {}

pub fn exhaustive_block_family(partition: &BlockPartition, p: usize) -> Result<BlockFamily<'_>> {
    let nb = partition.num_blocks();
    if nb > MAX_EXHAUSTIVE_BLOCKS {
        return Err(Error::TooManyBlocks {
            blocks: nb,
            max: MAX_EXHAUSTIVE_BLOCKS,
        });
    }
    if partition.p_active() > p {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} columns but p = {p}",
            partition.p_active()
        )));
    }
    Ok(BlockFamily {
        partition,
        p,
        next: 0,
        end: 1u64 << nb,
    })
}

/// Position of the record minimizing `kind`, with the documented tie-breaks.
pub fn select_best_index(records: &[CriterionRecord], kind: CriterionKind) -> Result<usize> {
    if records.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let values = records
        .iter()
        .map(|r| r.get(kind).ok_or(Error::MissingCriterion(kind)))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..records.len() {
        let ord = values[i]
            .total_cmp(&values[best])
            .then(records[i].k.cmp(&records[best].k))
            .then_with(|| records[i].mask.cmp(&records[best].mask));
        if ord == Ordering::Less {
            best = i;
        }
    }
    Ok(best)
}

/// Like [`select_best_index`], restricted to the records where `kind` is
/// defined (AICc is not, at the largest orders).
pub fn select_best_defined_index(records: &[CriterionRecord], kind: CriterionKind) -> Result<usize> {
    if records.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let defined: Vec<usize> = (0..records.len()).filter(|&i| records[i].get(kind).is_some()).collect();
    if defined.is_empty() {
        return Err(Error::MissingCriterion(kind));
    }
    let subset: Vec<CriterionRecord> = defined.iter().map(|&i| records[i].clone()).collect();
    Ok(defined[select_best_index(&subset, kind)?])
}

/// Model minimizing `kind` over the records.
pub fn select_best(records: &[CriterionRecord], kind: CriterionKind) -> Result<ModelMask> {
    Ok(records[select_best_index(records, kind)?].mask.clone())
}
