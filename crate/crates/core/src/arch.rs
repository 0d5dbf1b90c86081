//! Domain types for architectures, operations, and search spaces, plus the
//! dominance relation between convolution kernels and pooling windows.
//!
//! All types are immutable after construction and every operation here is a
//! pure function, so values can be shared freely across threads.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Geometry of a convolution kernel: width, height, channels, dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KernelSpec {
    pub k_w: u32,
    pub k_h: u32,
    pub k_c: u32,
    pub dilation: u32,
}

impl KernelSpec {
    pub fn new(k_w: u32, k_h: u32, k_c: u32) -> Self {
        Self {
            k_w,
            k_h,
            k_c,
            dilation: 1,
        }
    }

    pub fn with_dilation(k_w: u32, k_h: u32, k_c: u32, dilation: u32) -> Self {
        Self {
            k_w,
            k_h,
            k_c,
            dilation,
        }
    }

    /// Number of feature entries this kernel touches, the ordering key for
    /// kernel inventories (larger first).
    pub fn involved_features(&self) -> u64 {
        self.k_w as u64 * self.k_h as u64 * self.k_c as u64
    }

    fn check(&self) -> Result<(), String> {
        if self.k_w == 0 || self.k_h == 0 || self.k_c == 0 || self.dilation == 0 {
            return Err(format!(
                "kernel dimensions and dilation must be >= 1, got {}x{}x{} d{}",
                self.k_w, self.k_h, self.k_c, self.dilation
            ));
        }
        Ok(())
    }
}

/// Folds dilation into the kernel extent: a k-wide kernel at dilation d covers
/// k + (k-1)(d-1) entries. The result always has dilation 1, so the fold is
/// idempotent.
pub fn effective_kernel(kernel: KernelSpec) -> KernelSpec {
    let spread = |k: u32, d: u32| k + (k.saturating_sub(1)) * (d.saturating_sub(1));
    KernelSpec {
        k_w: spread(kernel.k_w, kernel.dilation),
        k_h: spread(kernel.k_h, kernel.dilation),
        k_c: kernel.k_c,
        dilation: 1,
    }
}

/// Pooling flavor. Only the window geometry matters for dominance checks; the
/// flavor is kept so distinct operations stay distinct in an inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Max,
    Avg,
}

impl fmt::Display for PoolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolKind::Max => write!(f, "max"),
            PoolKind::Avg => write!(f, "avg"),
        }
    }
}

/// Geometry of a pooling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoolSpec {
    pub o_w: u32,
    pub o_h: u32,
    pub kind: PoolKind,
}

impl PoolSpec {
    pub fn new(o_w: u32, o_h: u32, kind: PoolKind) -> Self {
        Self { o_w, o_h, kind }
    }

    pub fn involved_features(&self) -> u64 {
        self.o_w as u64 * self.o_h as u64
    }

    fn check(&self) -> Result<(), String> {
        if self.o_w == 0 || self.o_h == 0 {
            return Err(format!(
                "pool window must be >= 1x1, got {}x{}",
                self.o_w, self.o_h
            ));
        }
        Ok(())
    }
}

/// Stride triple (spatial x, spatial y, channel). The channel stride may be
/// zero for operations that do not slide across channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StrideSpec {
    pub s_1: u32,
    pub s_2: u32,
    pub s_3: u32,
}

impl StrideSpec {
    pub fn new(s_1: u32, s_2: u32, s_3: u32) -> Self {
        Self { s_1, s_2, s_3 }
    }

    pub fn unit() -> Self {
        Self {
            s_1: 1,
            s_2: 1,
            s_3: 0,
        }
    }

    fn check(&self) -> Result<(), String> {
        if self.s_1 == 0 || self.s_2 == 0 {
            return Err(format!(
                "spatial strides must be >= 1, got ({},{})",
                self.s_1, self.s_2
            ));
        }
        Ok(())
    }
}

/// One optional operation of a search space.
///
/// `Other` operations never contribute to the skip or convolution scores;
/// they only enter the total-operation count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    None,
    Skip,
    Conv(KernelSpec, StrideSpec),
    Pool(PoolSpec, StrideSpec),
    Other(String),
}

impl OpKind {
    pub fn is_conv(&self) -> bool {
        matches!(self, OpKind::Conv(_, _))
    }

    pub fn is_pool(&self) -> bool {
        matches!(self, OpKind::Pool(_, _))
    }

    /// Short human-readable token used in error messages and reports.
    pub fn label(&self) -> String {
        match self {
            OpKind::None => "none".into(),
            OpKind::Skip => "skip".into(),
            OpKind::Conv(k, _) => {
                if k.dilation > 1 {
                    format!("conv{}x{}d{}", k.k_w, k.k_h, k.dilation)
                } else {
                    format!("conv{}x{}", k.k_w, k.k_h)
                }
            }
            OpKind::Pool(p, s) => format!("{}pool{}x{}s{}", p.kind, p.o_w, p.o_h, s.s_1),
            OpKind::Other(l) => format!("other:{l}"),
        }
    }

    fn check(&self) -> Result<(), String> {
        match self {
            OpKind::Conv(k, s) => {
                k.check()?;
                s.check()
            }
            OpKind::Pool(p, s) => {
                p.check()?;
                s.check()
            }
            _ => Ok(()),
        }
    }
}

/// Returns true iff the kernel covers at least the pooled footprint on both
/// spatial axes: `k_w >= ceil(o_w/s_1)` and `k_h >= ceil(o_h/s_2)`.
///
/// The negation is exactly the "kernel smaller than pooled window" condition
/// that marks a kernel as entropy-suppressing. Kernel channels do not
/// participate. Callers must fold dilation first (`effective_kernel`).
pub fn dominates(kernel: &KernelSpec, pool: &PoolSpec, pool_stride: &StrideSpec) -> bool {
    debug_assert_eq!(kernel.dilation, 1, "fold dilation before dominance checks");
    let ceil_div = |a: u32, b: u32| a.div_ceil(b.max(1));
    kernel.k_w >= ceil_div(pool.o_w, pool_stride.s_1)
        && kernel.k_h >= ceil_div(pool.o_h, pool_stride.s_2)
}

/// A structural block: one searched-cell instance with its operation counts
/// and channel/feature bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Multiset of operations placed in this block's cell.
    pub op_counts: BTreeMap<OpKind, u32>,
    pub c_in: u32,
    pub c_out: u32,
    /// Input entries per channel.
    pub f_in: u64,
    /// Output entries per channel.
    pub f_out: u64,
}

impl Block {
    pub fn new(
        op_counts: BTreeMap<OpKind, u32>,
        c_in: u32,
        c_out: u32,
        f_in: u64,
        f_out: u64,
    ) -> Self {
        Self {
            op_counts,
            c_in,
            c_out,
            f_in,
            f_out,
        }
    }

    pub fn count(&self, op: &OpKind) -> u32 {
        self.op_counts.get(op).copied().unwrap_or(0)
    }

    pub fn total_ops(&self) -> u64 {
        self.op_counts.values().map(|&c| c as u64).sum()
    }
}

/// Which native encoding a space's architectures are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingFormat {
    TssCellString,
    DartsGenotype,
    GenericJson,
}

/// Cell role inside the macro skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[default]
    Normal,
    Reduce,
}

/// One stage of the macro skeleton: `repeat` cells sharing the same channel
/// and feature bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkeletonStage {
    pub repeat: u32,
    pub c_out: u32,
    pub f_in: u64,
    pub f_out: u64,
    pub cell: CellKind,
}

/// A pooling operation with the stride it is applied at, as listed in a
/// space's ordered pool inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolOp {
    pub spec: PoolSpec,
    pub stride: StrideSpec,
}

/// Inventory and macro structure of a search space.
///
/// `kernels` holds the distinct effective convolution kernels of the
/// inventory and `pools` the pooling operations, both ordered so element `i`
/// involves at least as many features as element `i + 1` (ties broken by
/// width, then height, then stride, then flavor).
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpaceDescriptor {
    pub id: String,
    pub family: EncodingFormat,
    pub opt: Vec<OpKind>,
    pub kernels: Vec<KernelSpec>,
    pub pools: Vec<PoolOp>,
    pub has_skip: bool,
    pub has_pool: bool,
    pub slots_per_cell: u32,
    pub skeleton: Vec<SkeletonStage>,
}

/// Invalid space definitions (bad geometry, empty inventories, bad skeleton).
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("invalid search space: {0}")]
pub struct SpaceError(pub String);

impl SearchSpaceDescriptor {
    /// Builds a descriptor from an operation inventory, deriving the ordered
    /// kernel/pool lists and the skip/pool flags.
    pub fn new(
        id: impl Into<String>,
        family: EncodingFormat,
        opt: Vec<OpKind>,
        slots_per_cell: u32,
        skeleton: Vec<SkeletonStage>,
    ) -> Result<Self, SpaceError> {
        let id = id.into();
        if opt.is_empty() {
            return Err(SpaceError("operation inventory is empty".into()));
        }
        // slots_per_cell of 0 is permitted: a degenerate template whose
        // blocks place no operations.
        if skeleton.is_empty() {
            return Err(SpaceError("skeleton has no stages".into()));
        }
        for op in &opt {
            op.check().map_err(SpaceError)?;
        }
        for (i, st) in skeleton.iter().enumerate() {
            if st.repeat == 0 || st.c_out == 0 || st.f_in == 0 || st.f_out == 0 {
                return Err(SpaceError(format!(
                    "skeleton stage {i} has zero repeat/channel/feature fields"
                )));
            }
        }

        let mut opt_sorted = opt;
        opt_sorted.sort();
        opt_sorted.dedup();

        let mut kernels: Vec<KernelSpec> = opt_sorted
            .iter()
            .filter_map(|op| match op {
                OpKind::Conv(k, _) => Some(effective_kernel(*k)),
                _ => None,
            })
            .collect();
        kernels.sort_by(|a, b| {
            b.involved_features()
                .cmp(&a.involved_features())
                .then(b.k_w.cmp(&a.k_w))
                .then(b.k_h.cmp(&a.k_h))
        });
        kernels.dedup();

        let mut pools: Vec<PoolOp> = opt_sorted
            .iter()
            .filter_map(|op| match op {
                OpKind::Pool(p, s) => Some(PoolOp {
                    spec: *p,
                    stride: *s,
                }),
                _ => None,
            })
            .collect();
        pools.sort_by(|a, b| {
            b.spec
                .involved_features()
                .cmp(&a.spec.involved_features())
                .then(b.spec.o_w.cmp(&a.spec.o_w))
                .then(b.spec.o_h.cmp(&a.spec.o_h))
                .then(a.stride.s_1.cmp(&b.stride.s_1))
                .then(a.stride.s_2.cmp(&b.stride.s_2))
                .then(a.spec.kind.cmp(&b.spec.kind))
        });

        let has_skip = opt_sorted.contains(&OpKind::Skip);
        let has_pool = !pools.is_empty();

        Ok(Self {
            id,
            family,
            opt: opt_sorted,
            kernels,
            pools,
            has_skip,
            has_pool,
            slots_per_cell,
            skeleton,
        })
    }

    /// The largest pooling operation, the reference for dominance checks.
    pub fn largest_pool(&self) -> Option<&PoolOp> {
        self.pools.first()
    }

    /// Total number of blocks an architecture in this space expands to.
    pub fn total_blocks(&self) -> u64 {
        self.skeleton.iter().map(|s| s.repeat as u64).sum()
    }

    /// Whether a kernel (already dilation-folded) dominates the space's
    /// largest pool. With no pooling in the space every kernel trivially
    /// dominates.
    pub fn kernel_dominates(&self, kernel: &KernelSpec) -> bool {
        match self.largest_pool() {
            Some(p) => dominates(kernel, &p.spec, &p.stride),
            None => true,
        }
    }
}

/// An architecture: an ordered sequence of blocks plus the source encoding it
/// was parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub blocks: Vec<Block>,
    pub space_id: String,
    pub encoding: String,
}

impl Architecture {
    pub fn new(
        blocks: Vec<Block>,
        space_id: impl Into<String>,
        encoding: impl Into<String>,
    ) -> Self {
        Self {
            blocks,
            space_id: space_id.into(),
            encoding: encoding.into(),
        }
    }

    /// Structural equality ignoring the source encoding text, the relation
    /// preserved by serialize/parse round trips.
    pub fn structurally_equal(&self, other: &Architecture) -> bool {
        self.space_id == other.space_id && self.blocks == other.blocks
    }
}

/// One way an architecture fails validation against its space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyArchitecture,
    UnknownOperation {
        block: usize,
        op: String,
    },
    SlotCountMismatch {
        block: usize,
        expected: u64,
        actual: u64,
    },
    ZeroDimension {
        block: usize,
        field: &'static str,
    },
    SpaceMismatch {
        expected: String,
        actual: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyArchitecture => write!(f, "empty architecture"),
            Violation::UnknownOperation { block, op } => {
                write!(f, "block {block}: unknown operation {op}")
            }
            Violation::SlotCountMismatch {
                block,
                expected,
                actual,
            } => {
                write!(
                    f,
                    "block {block}: {actual} operations placed, cell template declares {expected}"
                )
            }
            Violation::ZeroDimension { block, field } => {
                write!(f, "block {block}: {field} must be >= 1")
            }
            Violation::SpaceMismatch { expected, actual } => {
                write!(
                    f,
                    "architecture belongs to space {actual:?}, expected {expected:?}"
                )
            }
        }
    }
}

/// Checks an architecture against its space. Returns every violation found;
/// an empty list means the architecture is well formed.
pub fn validate(arch: &Architecture, space: &SearchSpaceDescriptor) -> Vec<Violation> {
    let mut violations = Vec::new();
    if arch.space_id != space.id {
        violations.push(Violation::SpaceMismatch {
            expected: space.id.clone(),
            actual: arch.space_id.clone(),
        });
    }
    if arch.blocks.is_empty() {
        violations.push(Violation::EmptyArchitecture);
        return violations;
    }
    for (i, block) in arch.blocks.iter().enumerate() {
        if block.c_in == 0 {
            violations.push(Violation::ZeroDimension {
                block: i,
                field: "c_in",
            });
        }
        if block.c_out == 0 {
            violations.push(Violation::ZeroDimension {
                block: i,
                field: "c_out",
            });
        }
        if block.f_in == 0 {
            violations.push(Violation::ZeroDimension {
                block: i,
                field: "f_in",
            });
        }
        if block.f_out == 0 {
            violations.push(Violation::ZeroDimension {
                block: i,
                field: "f_out",
            });
        }
        for op in block.op_counts.keys() {
            if !space.opt.contains(op) {
                violations.push(Violation::UnknownOperation {
                    block: i,
                    op: op.label(),
                });
            }
        }
        let total = block.total_ops();
        if total != space.slots_per_cell as u64 {
            violations.push(Violation::SlotCountMismatch {
                block: i,
                expected: space.slots_per_cell as u64,
                actual: total,
            });
        }
    }
    violations
}
