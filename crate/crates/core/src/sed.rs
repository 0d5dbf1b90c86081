//! SED scoring: the suppression-of-local-entropy-decrease proxy.
//!
//! Per block, three sub-scores are combined:
//!
//! * `skip_sed`  — `sig(n_skip) * n_skip` over the block's skip connections,
//! * `conv_sed`  — `sig(c_out) * count` summed over kernel kinds dominating
//!   the space's largest pool,
//! * `pool_sed`  — `D^2 + T^2 - S^2`, where `D` counts dominating kernel
//!   placements, `T` all operation placements, and `S` pooling placements
//!   plus non-dominating kernel placements.
//!
//! The block score is `sig(c_out) * f_in / f_out * pool_sed *
//! sig(skip_sed * conv_sed)` and the architecture score is the mean over
//! blocks. Scoring is pure and deterministic: sums run in block order, so
//! results are bitwise identical across runs and thread counts.

use std::thread;

use serde::{Deserialize, Serialize};

use crate::arch::{
    effective_kernel, validate, Architecture, Block, OpKind, SearchSpaceDescriptor, Violation,
};

/// The logistic function `1 / (1 + e^-x)`. Saturates cleanly for large `|x|`.
pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scoring conventions that the formulas leave open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SedConfig {
    /// Count `none` placements in the total-operation term of `pool_sed`.
    /// For fixed-slot cells this only shifts every block by a per-space
    /// constant, but the convention is exposed so both readings are
    /// available.
    pub count_none: bool,
}

impl Default for SedConfig {
    fn default() -> Self {
        Self { count_none: true }
    }
}

/// Per-block sub-scores, as used in the final product (fallback constants
/// already substituted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSed {
    pub skip_sed: f64,
    pub conv_sed: f64,
    pub pool_sed: f64,
    /// `sig(c_out) * f_in / f_out`.
    pub ratio: f64,
    pub block_score: f64,
}

/// Full scoring breakdown for one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SedBreakdown {
    pub per_block: Vec<BlockSed>,
    pub sed: f64,
}

/// Scoring rejected the architecture; carries every violation found.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("invalid architecture: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidArchitecture {
    pub violations: Vec<Violation>,
}

/// `sig(n_skip) * n_skip` for the block. Zero when the block places no skip
/// connections; the absent-skip space fallback is applied in [`sed`].
pub fn skip_sed(block: &Block) -> f64 {
    let n = block.count(&OpKind::Skip) as f64;
    sig(n) * n
}

/// Sums `sig(c_out) * count` over the kernel kinds that dominate the space's
/// largest pool. Without pooling in the space every kernel counts.
pub fn conv_sed(block: &Block, space: &SearchSpaceDescriptor) -> f64 {
    let dominating = kernel_instance_counts(block, space).dominating;
    sig(block.c_out as f64) * dominating as f64
}

/// `D^2 + T^2 - S^2` over the block's placements. `T` honors the
/// `count_none` convention; `D` and `S` partition the kernel placements by
/// dominance, with pooling placements joining `S`.
pub fn pool_sed(block: &Block, space: &SearchSpaceDescriptor, config: &SedConfig) -> f64 {
    let counts = kernel_instance_counts(block, space);
    let d = counts.dominating as f64;
    let s = (counts.suppressed + pool_instance_count(block)) as f64;
    let t = total_op_count(block, config) as f64;
    d * d + t * t - s * s
}

struct KernelCounts {
    dominating: u64,
    suppressed: u64,
}

fn kernel_instance_counts(block: &Block, space: &SearchSpaceDescriptor) -> KernelCounts {
    let mut dominating = 0u64;
    let mut suppressed = 0u64;
    for (op, &count) in &block.op_counts {
        if let OpKind::Conv(k, _) = op {
            if space.kernel_dominates(&effective_kernel(*k)) {
                dominating += count as u64;
            } else {
                suppressed += count as u64;
            }
        }
    }
    KernelCounts {
        dominating,
        suppressed,
    }
}

fn pool_instance_count(block: &Block) -> u64 {
    block
        .op_counts
        .iter()
        .filter(|(op, _)| op.is_pool())
        .map(|(_, &c)| c as u64)
        .sum()
}

fn total_op_count(block: &Block, config: &SedConfig) -> u64 {
    block
        .op_counts
        .iter()
        .filter(|(op, _)| config.count_none || !matches!(op, OpKind::None))
        .map(|(_, &c)| c as u64)
        .sum()
}

/// Scores an architecture with the default conventions.
pub fn sed(
    arch: &Architecture,
    space: &SearchSpaceDescriptor,
) -> Result<SedBreakdown, InvalidArchitecture> {
    sed_with_config(arch, space, &SedConfig::default())
}

/// Scores an architecture. For spaces without skip connections `skip_sed`
/// falls back to the constant 1, and without pooling `pool_sed` does the
/// same (1 is the identity in the block product, leaving the remaining
/// factors to discriminate).
pub fn sed_with_config(
    arch: &Architecture,
    space: &SearchSpaceDescriptor,
    config: &SedConfig,
) -> Result<SedBreakdown, InvalidArchitecture> {
    let violations = validate(arch, space);
    if !violations.is_empty() {
        return Err(InvalidArchitecture { violations });
    }

    let mut per_block = Vec::with_capacity(arch.blocks.len());
    let mut sum = 0.0f64;
    for block in &arch.blocks {
        // Single pass over the block's counts, shared by all three sub-scores.
        let mut n_skip = 0u64;
        let mut dominating = 0u64;
        let mut suppressed = 0u64;
        let mut pools = 0u64;
        let mut total = 0u64;
        for (op, &count) in &block.op_counts {
            let count = count as u64;
            match op {
                OpKind::Skip => n_skip += count,
                OpKind::Conv(k, _) => {
                    if space.kernel_dominates(&effective_kernel(*k)) {
                        dominating += count;
                    } else {
                        suppressed += count;
                    }
                }
                OpKind::Pool(_, _) => pools += count,
                OpKind::None if !config.count_none => continue,
                _ => {}
            }
            total += count;
        }
        let skip = if space.has_skip {
            sig(n_skip as f64) * n_skip as f64
        } else {
            1.0
        };
        let conv = sig(block.c_out as f64) * dominating as f64;
        let pool = if space.has_pool {
            let (d, t, s) = (dominating as f64, total as f64, (pools + suppressed) as f64);
            d * d + t * t - s * s
        } else {
            1.0
        };
        // The quotient is formed first so equal rescalings of f_in and
        // f_out cancel exactly.
        let ratio = sig(block.c_out as f64) * (block.f_in as f64 / block.f_out as f64);
        let block_score = ratio * pool * sig(skip * conv);
        sum += block_score;
        per_block.push(BlockSed {
            skip_sed: skip,
            conv_sed: conv,
            pool_sed: pool,
            ratio,
            block_score,
        });
    }
    let sed = sum / arch.blocks.len() as f64;
    Ok(SedBreakdown { per_block, sed })
}

/// Scores a batch in input order. Per-item failures are reported in place;
/// the batch never aborts.
pub fn batch_score(
    archs: &[Architecture],
    space: &SearchSpaceDescriptor,
) -> Vec<Result<f64, InvalidArchitecture>> {
    archs.iter().map(|a| sed(a, space).map(|b| b.sed)).collect()
}

/// Parallel batch scoring over `threads` workers. Results are collected in
/// input order, so the output is identical to [`batch_score`] for any worker
/// count.
pub fn batch_score_parallel(
    archs: &[Architecture],
    space: &SearchSpaceDescriptor,
    threads: usize,
) -> Vec<Result<f64, InvalidArchitecture>> {
    let threads = threads.max(1).min(archs.len().max(1));
    if threads == 1 {
        return batch_score(archs, space);
    }
    let chunk = archs.len().div_ceil(threads);
    let mut results: Vec<Vec<Result<f64, InvalidArchitecture>>> = Vec::new();
    thread::scope(|scope| {
        let handles: Vec<_> = archs
            .chunks(chunk)
            .map(|part| scope.spawn(move || batch_score(part, space)))
            .collect();
        for h in handles {
            results.push(h.join().expect("scoring worker panicked"));
        }
    });
    results.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::nats_bench_tss_space;
    use std::collections::BTreeMap;

    use crate::arch::{KernelSpec, StrideSpec};

    #[allow(clippy::too_many_arguments)]
    fn tss_block(
        conv3: u32,
        conv1: u32,
        skip: u32,
        pool: u32,
        none: u32,
        c: u32,
        f_in: u64,
        f_out: u64,
    ) -> Block {
        let space = nats_bench_tss_space();
        let mut counts = BTreeMap::new();
        for (token, n) in [
            ("nor_conv_3x3", conv3),
            ("nor_conv_1x1", conv1),
            ("skip_connect", skip),
            ("avg_pool_3x3", pool),
            ("none", none),
        ] {
            if n > 0 {
                counts.insert(crate::spaces::tss_op(token).unwrap(), n);
            }
        }
        let _ = space;
        Block::new(counts, c, c, f_in, f_out)
    }

    fn single_block_arch(block: Block) -> Architecture {
        Architecture::new(vec![block], "nats-bench-tss", "fixture")
    }

    #[test]
    fn sig_known_values() {
        assert_eq!(sig(0.0), 0.5);
        assert!((sig(1.0) - 0.7310585786300049).abs() < 1e-15);
        assert!((sig(16.0) - 0.9999998874648379).abs() < 1e-15);
        // Saturation, no NaN.
        assert_eq!(sig(1e6), 1.0);
        assert_eq!(sig(-1e6), 0.0);
    }

    #[test]
    fn skip_sed_known_values() {
        let space = nats_bench_tss_space();
        let _ = space;
        assert_eq!(skip_sed(&tss_block(0, 0, 0, 0, 6, 16, 1024, 1024)), 0.0);
        let one = skip_sed(&tss_block(0, 0, 1, 0, 5, 16, 1024, 1024));
        assert!((one - 0.7310585786300049).abs() < 1e-12);
        let two = skip_sed(&tss_block(0, 0, 2, 0, 4, 16, 1024, 1024));
        assert!((two - 1.7615941559557646).abs() < 1e-12);
    }

    #[test]
    fn conv_sed_counts_only_dominating_kernels() {
        let space = nats_bench_tss_space();
        // {conv3x3:2, conv1x1:1}: only the 3x3 covers the 3x3 stride-1 pool.
        let block = tss_block(2, 1, 0, 0, 3, 16, 1024, 1024);
        let got = conv_sed(&block, &space);
        assert!((got - 1.9999997749296758).abs() < 1e-12, "got {got}");

        let empty = tss_block(0, 0, 0, 0, 6, 16, 1024, 1024);
        assert_eq!(conv_sed(&empty, &space), 0.0);
    }

    #[test]
    fn conv_sed_without_pooling_counts_every_kernel() {
        // Same inventory minus the pool: the indicator is 1 for all kernels.
        let opt: Vec<OpKind> = ["none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3"]
            .iter()
            .map(|t| crate::spaces::tss_op(t).unwrap())
            .collect();
        let space = SearchSpaceDescriptor::new(
            "no-pool",
            crate::arch::EncodingFormat::GenericJson,
            opt,
            6,
            vec![crate::arch::SkeletonStage {
                repeat: 1,
                c_out: 16,
                f_in: 1024,
                f_out: 1024,
                cell: crate::arch::CellKind::Normal,
            }],
        )
        .unwrap();
        let block = tss_block(2, 1, 0, 0, 3, 16, 1024, 1024);
        let got = conv_sed(&block, &space);
        assert!((got - 2.9999996623945138).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn pool_sed_worked_example() {
        let space = nats_bench_tss_space();
        let config = SedConfig::default();
        // D=2, T=6, S=2 -> 4 + 36 - 4 = 36.
        let block = tss_block(2, 1, 1, 1, 1, 16, 1024, 1024);
        assert_eq!(pool_sed(&block, &space, &config), 36.0);

        // Empty block: all terms zero.
        let empty = Block::new(BTreeMap::new(), 16, 16, 1024, 1024);
        assert_eq!(pool_sed(&empty, &space, &config), 0.0);

        // All-suppressive cell scores zero: D=0, T=6, S=6.
        let sup = tss_block(0, 3, 0, 3, 0, 16, 1024, 1024);
        assert_eq!(pool_sed(&sup, &space, &config), 0.0);
    }

    #[test]
    fn pool_sed_count_none_convention() {
        let space = nats_bench_tss_space();
        let block = tss_block(2, 1, 1, 1, 1, 16, 1024, 1024);
        let without = pool_sed(&block, &space, &SedConfig { count_none: false });
        // T drops from 6 to 5: 4 + 25 - 4 = 25.
        assert_eq!(without, 25.0);
    }

    #[test]
    fn sed_worked_single_block() {
        let space = nats_bench_tss_space();
        let arch = single_block_arch(tss_block(2, 1, 1, 1, 1, 16, 1024, 1024));
        let got = sed(&arch, &space).unwrap();
        assert!((got.sed - 29.226821703042702).abs() < 1e-4 * 29.226821703042702);
        let b = &got.per_block[0];
        assert_eq!(b.pool_sed, 36.0);
        assert!((b.ratio - 0.9999998874648379).abs() < 1e-12);
    }

    #[test]
    fn sed_all_none_block() {
        let space = nats_bench_tss_space();
        let arch = single_block_arch(tss_block(0, 0, 0, 0, 6, 16, 1024, 1024));
        let got = sed(&arch, &space).unwrap();
        // ratio * 36 * sig(0) with ratio ~ 1.
        assert!((got.sed - 17.999997974367083).abs() < 1e-9);
    }

    #[test]
    fn sed_empty_op_block_is_rejected() {
        // Zero placements conflict with the 6-slot cell template.
        let space = nats_bench_tss_space();
        let arch = single_block_arch(Block::new(BTreeMap::new(), 16, 16, 1024, 1024));
        let err = sed(&arch, &space).unwrap_err();
        assert!(err
            .violations
            .iter()
            .any(|v| matches!(v, Violation::SlotCountMismatch { .. })));
    }

    #[test]
    fn sed_empty_op_block_in_zero_slot_template_scores_zero() {
        // With a 0-slot template the empty block is valid and pool_sed = 0
        // annihilates the product: ratio * 0 * sig(0) = 0.
        let opt: Vec<OpKind> = crate::spaces::TSS_TOKENS
            .iter()
            .map(|t| crate::spaces::tss_op(t).unwrap())
            .collect();
        let space = SearchSpaceDescriptor::new(
            "empty-template",
            crate::arch::EncodingFormat::GenericJson,
            opt,
            0,
            vec![crate::arch::SkeletonStage {
                repeat: 1,
                c_out: 16,
                f_in: 1024,
                f_out: 1024,
                cell: crate::arch::CellKind::Normal,
            }],
        )
        .unwrap();
        let arch = Architecture::new(
            vec![Block::new(BTreeMap::new(), 16, 16, 1024, 1024)],
            "empty-template",
            "",
        );
        let got = sed(&arch, &space).unwrap();
        assert_eq!(got.sed, 0.0);
    }

    #[test]
    fn batch_score_of_empty_sequence_is_empty() {
        let space = nats_bench_tss_space();
        assert!(batch_score(&[], &space).is_empty());
    }

    #[test]
    fn sed_fallback_constants_for_absent_skip_and_pool() {
        // A conv-only inventory: skip_sed and pool_sed fall back to 1.
        let conv = OpKind::Conv(KernelSpec::new(3, 3, 1), StrideSpec::unit());
        let space = SearchSpaceDescriptor::new(
            "conv-only",
            crate::arch::EncodingFormat::GenericJson,
            vec![conv.clone()],
            2,
            vec![crate::arch::SkeletonStage {
                repeat: 1,
                c_out: 16,
                f_in: 512,
                f_out: 512,
                cell: crate::arch::CellKind::Normal,
            }],
        )
        .unwrap();
        let mut counts = BTreeMap::new();
        counts.insert(conv, 2);
        let arch = Architecture::new(vec![Block::new(counts, 16, 16, 512, 512)], "conv-only", "");
        let got = sed(&arch, &space).unwrap();
        let b = &got.per_block[0];
        assert_eq!(b.skip_sed, 1.0);
        assert_eq!(b.pool_sed, 1.0);
        // block = ratio * 1 * sig(1 * sig(16)*2)
        let expect = sig(16.0) * 1.0 * sig(sig(16.0) * 2.0);
        assert!((b.block_score - expect).abs() < 1e-12);
    }

    #[test]
    fn batch_score_reports_per_item_errors() {
        let space = nats_bench_tss_space();
        let good = single_block_arch(tss_block(2, 1, 1, 1, 1, 16, 1024, 1024));
        let bad = Architecture::new(vec![], "nats-bench-tss", "");
        let results = batch_score(&[good.clone(), bad, good], &space);
        assert_eq!(results.len(), 3);
        assert!(results[0].is_ok());
        assert!(results[1].is_err());
        assert!(results[2].is_ok());
        assert_eq!(results[0], results[2]);
    }

    #[test]
    fn parallel_batch_matches_sequential_bitwise() {
        let space = nats_bench_tss_space();
        let archs: Vec<Architecture> = (0..37)
            .map(|i| {
                single_block_arch(tss_block(
                    i % 3,
                    (i + 1) % 2,
                    i % 4,
                    (i + 2) % 3,
                    0,
                    16,
                    1024,
                    1024,
                ))
            })
            .map(|mut a| {
                // Pad each block up to the 6-slot template with `none`.
                let b = &mut a.blocks[0];
                let placed = b.total_ops();
                if placed < 6 {
                    *b.op_counts.entry(OpKind::None).or_insert(0) += (6 - placed) as u32;
                }
                a
            })
            .collect();
        let seq = batch_score(&archs, &space);
        for threads in [2, 3, 8] {
            let par = batch_score_parallel(&archs, &space, threads);
            assert_eq!(seq, par);
        }
    }
}
