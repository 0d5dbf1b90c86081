//! Topology-only zero-cost scoring for neural architecture search.
//!
//! The crate parses architecture encodings (NATS-Bench-TSS cell strings,
//! DARTS genotypes, a generic JSON format), computes the SED proxy from
//! operation counts alone — no weights, no data, no network execution — and
//! evaluates proxy quality against user-supplied benchmark accuracy tables.
//! A verification lab checks the entropy propositions behind the proxy
//! numerically.
//!
//! ```
//! use sednas_core::{parse, sed, spaces};
//!
//! let space = spaces::nats_bench_tss_space();
//! let cell = "|nor_conv_3x3~0|+|nor_conv_3x3~0|skip_connect~1|\
//!             +|avg_pool_3x3~0|nor_conv_1x1~1|none~2|";
//! let arch = parse::parse_tss(cell, &space)?;
//! let breakdown = sed::sed(&arch, &space)?;
//! assert!((breakdown.sed - 29.226824498924582).abs() < 1e-9);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod arch;
pub mod bench;
pub mod entropy;
pub mod parse;
pub mod search;
pub mod sed;
pub mod spaces;

pub use arch::{
    dominates, effective_kernel, validate, Architecture, Block, CellKind, EncodingFormat,
    KernelSpec, OpKind, PoolKind, PoolOp, PoolSpec, SearchSpaceDescriptor, SkeletonStage,
    StrideSpec, Violation,
};
pub use bench::{
    emit_report, kendall, load_records, rank_report, spearman, BenchmarkRecord, RankingReport,
    ReportFormat, TableFormat,
};
pub use entropy::{
    gaussian_entropy, max_pool, one_dim_entropy, prop2_bound, verify_prop1, verify_prop2,
    verify_prop3, verify_prop4, zero_entropy_window_exists, FeatureField, GaussianFieldSpec,
    SubtensorWindow,
};
pub use parse::{
    parse_darts, parse_generic, parse_space, parse_tss, serialize_generic, ParseError,
};
pub use search::{enumerate_tss_encodings, sample_random, search, SearchConfig, SearchOutcome};
pub use sed::{
    batch_score, batch_score_parallel, sed, sed_with_config, sig, SedBreakdown, SedConfig,
};
