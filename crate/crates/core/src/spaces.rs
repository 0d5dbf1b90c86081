//! Built-in search-space descriptors for the supported benchmark families.
//!
//! The macro skeletons follow the published benchmark conventions: they are
//! defaults, not hard-coded requirements — any skeleton can be supplied
//! through the space JSON instead.

use crate::arch::{
    CellKind, EncodingFormat, KernelSpec, OpKind, PoolKind, PoolSpec, SearchSpaceDescriptor,
    SkeletonStage, StrideSpec,
};

/// Cell-string tokens of the NATS-Bench topology space, in canonical order.
pub const TSS_TOKENS: [&str; 5] = [
    "none",
    "skip_connect",
    "nor_conv_1x1",
    "nor_conv_3x3",
    "avg_pool_3x3",
];

/// Number of operation slots (edges) in a NATS-Bench-TSS cell.
pub const TSS_SLOTS: u32 = 6;

/// Genotype tokens accepted for the DARTS space.
pub const DARTS_TOKENS: [&str; 8] = [
    "none",
    "skip_connect",
    "sep_conv_3x3",
    "sep_conv_5x5",
    "dil_conv_3x3",
    "dil_conv_5x5",
    "max_pool_3x3",
    "avg_pool_3x3",
];

/// Maps a TSS cell-string token to its operation. Separable or dilated
/// variants do not occur in this space.
pub fn tss_op(token: &str) -> Option<OpKind> {
    let s = StrideSpec::unit();
    match token {
        "none" => Some(OpKind::None),
        "skip_connect" => Some(OpKind::Skip),
        "nor_conv_1x1" => Some(OpKind::Conv(KernelSpec::new(1, 1, 1), s)),
        "nor_conv_3x3" => Some(OpKind::Conv(KernelSpec::new(3, 3, 1), s)),
        "avg_pool_3x3" => Some(OpKind::Pool(PoolSpec::new(3, 3, PoolKind::Avg), s)),
        _ => None,
    }
}

/// Maps a DARTS genotype token to its operation, folding dilated and
/// separable convolutions onto their effective receptive field. `reduce`
/// selects the reduce-cell stride convention for pooling.
pub fn darts_op(token: &str, reduce: bool) -> Option<OpKind> {
    let s = StrideSpec::unit();
    let pool_stride = if reduce { StrideSpec::new(2, 2, 0) } else { s };
    match token {
        "none" => Some(OpKind::None),
        "skip_connect" => Some(OpKind::Skip),
        "sep_conv_3x3" => Some(OpKind::Conv(KernelSpec::new(3, 3, 1), s)),
        "sep_conv_5x5" => Some(OpKind::Conv(KernelSpec::new(5, 5, 1), s)),
        "dil_conv_3x3" => Some(OpKind::Conv(
            crate::arch::effective_kernel(KernelSpec::with_dilation(3, 3, 1, 2)),
            s,
        )),
        "dil_conv_5x5" => Some(OpKind::Conv(
            crate::arch::effective_kernel(KernelSpec::with_dilation(5, 5, 1, 2)),
            s,
        )),
        "max_pool_3x3" => Some(OpKind::Pool(
            PoolSpec::new(3, 3, PoolKind::Max),
            pool_stride,
        )),
        "avg_pool_3x3" => Some(OpKind::Pool(
            PoolSpec::new(3, 3, PoolKind::Avg),
            pool_stride,
        )),
        _ => None,
    }
}

/// NATS-Bench-TSS: 5 ops on the 6 edges of a 4-node cell, tiled as 3 stages
/// of 5 cells at 16/32/64 channels on 32x32 inputs. The fixed reduction
/// blocks between stages are not searched and are excluded from the blocks.
pub fn nats_bench_tss_space() -> SearchSpaceDescriptor {
    let opt: Vec<OpKind> = TSS_TOKENS.iter().map(|t| tss_op(t).unwrap()).collect();
    let skeleton = vec![
        SkeletonStage {
            repeat: 5,
            c_out: 16,
            f_in: 1024,
            f_out: 1024,
            cell: CellKind::Normal,
        },
        SkeletonStage {
            repeat: 5,
            c_out: 32,
            f_in: 256,
            f_out: 256,
            cell: CellKind::Normal,
        },
        SkeletonStage {
            repeat: 5,
            c_out: 64,
            f_in: 64,
            f_out: 64,
            cell: CellKind::Normal,
        },
    ];
    SearchSpaceDescriptor::new(
        "nats-bench-tss",
        EncodingFormat::TssCellString,
        opt,
        TSS_SLOTS,
        skeleton,
    )
    .expect("built-in TSS space is well formed")
}

/// DARTS: 8 ops, 8 operation slots per cell (4 nodes x 2 inputs), 20-cell
/// evaluation network with reduce cells at one and two thirds of the depth.
pub fn darts_space() -> SearchSpaceDescriptor {
    let mut opt = Vec::new();
    for token in DARTS_TOKENS {
        opt.push(darts_op(token, false).unwrap());
        opt.push(darts_op(token, true).unwrap());
    }
    let skeleton = vec![
        SkeletonStage {
            repeat: 6,
            c_out: 36,
            f_in: 1024,
            f_out: 1024,
            cell: CellKind::Normal,
        },
        SkeletonStage {
            repeat: 1,
            c_out: 72,
            f_in: 1024,
            f_out: 256,
            cell: CellKind::Reduce,
        },
        SkeletonStage {
            repeat: 6,
            c_out: 72,
            f_in: 256,
            f_out: 256,
            cell: CellKind::Normal,
        },
        SkeletonStage {
            repeat: 1,
            c_out: 144,
            f_in: 256,
            f_out: 64,
            cell: CellKind::Reduce,
        },
        SkeletonStage {
            repeat: 6,
            c_out: 144,
            f_in: 64,
            f_out: 64,
            cell: CellKind::Normal,
        },
    ];
    SearchSpaceDescriptor::new("darts", EncodingFormat::DartsGenotype, opt, 8, skeleton)
        .expect("built-in DARTS space is well formed")
}
