//! Property suites over the module invariants, executed programmatically so
//! the acceptance criterion can count generated cases. Runs are seeded: the
//! same cases are generated on every machine.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{
    Config, FailurePersistence, RngAlgorithm, TestError, TestRng, TestRunner,
};

use sednas_core::arch::{
    dominates, effective_kernel, Architecture, Block, CellKind, EncodingFormat, KernelSpec, OpKind,
    PoolKind, PoolSpec, SearchSpaceDescriptor, SkeletonStage, StrideSpec,
};
use sednas_core::bench;
use sednas_core::entropy::{
    gaussian_entropy, max_pool, one_dim_entropy, FeatureField, GaussianFieldSpec,
};
use sednas_core::parse;
use sednas_core::sed::{self, SedConfig};
use sednas_core::spaces::{nats_bench_tss_space, TSS_TOKENS};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None::<Box<dyn FailurePersistence>>,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[7u8; 32]))
}

fn run<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> u64
where
    S::Value: std::fmt::Debug,
{
    let mut r = runner(cases);
    match r.run(&strategy, test) {
        Ok(()) => cases as u64,
        Err(TestError::Fail(reason, value)) => {
            panic!("property {name} failed: {reason}\ncounterexample: {value:?}")
        }
        Err(TestError::Abort(reason)) => panic!("property {name} aborted: {reason}"),
    }
}

fn cell_string(tokens: &[usize]) -> String {
    let ops: Vec<&str> = tokens.iter().map(|&t| TSS_TOKENS[t]).collect();
    parse::format_tss(&[ops[0], ops[1], ops[2], ops[3], ops[4], ops[5]])
}

/// Catalog of operations used to assemble random generic spaces.
fn op_catalog() -> Vec<OpKind> {
    let unit = StrideSpec::unit();
    vec![
        OpKind::None,
        OpKind::Skip,
        OpKind::Conv(KernelSpec::new(1, 1, 1), unit),
        OpKind::Conv(KernelSpec::new(3, 3, 1), unit),
        OpKind::Conv(KernelSpec::new(5, 5, 1), unit),
        OpKind::Conv(KernelSpec::with_dilation(3, 3, 1, 2), unit),
        OpKind::Pool(PoolSpec::new(3, 3, PoolKind::Max), unit),
        OpKind::Pool(PoolSpec::new(3, 3, PoolKind::Avg), unit),
        OpKind::Pool(PoolSpec::new(2, 2, PoolKind::Max), StrideSpec::new(2, 2, 0)),
        OpKind::Other("attention".into()),
    ]
}

fn pd_cov(dim: usize, raw: &[f64], floor: f64) -> Vec<f64> {
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut sum = 0.0;
            for k in 0..dim {
                sum += raw[i * dim + k] * raw[j * dim + k];
            }
            cov[i * dim + j] = sum;
        }
    }
    for i in 0..dim {
        for j in 0..i {
            let v = 0.5 * (cov[i * dim + j] + cov[j * dim + i]);
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
        cov[i * dim + i] += floor;
    }
    cov
}

pub fn run_all() -> u64 {
    let mut total = 0u64;

    // SED depends only on the multiset of edge operations, never their order.
    total += run(
        "sed_permutation_invariance",
        2000,
        prop::collection::vec(0..TSS_TOKENS.len(), 6)
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        |(tokens, shuffled)| {
            let space = nats_bench_tss_space();
            let a = parse::parse_tss(&cell_string(&tokens), &space).unwrap();
            let b = parse::parse_tss(&cell_string(&shuffled), &space).unwrap();
            let sa = sed::sed(&a, &space).unwrap().sed;
            let sb = sed::sed(&b, &space).unwrap().sed;
            prop_assert_eq!(sa.to_bits(), sb.to_bits());
            Ok(())
        },
    );

    // Enlarging a kernel never loses dominance.
    total += run(
        "dominance_monotone_kernel_growth",
        2000,
        (
            1..=7u32,
            1..=7u32,
            1..=7u32,
            1..=7u32,
            1..=4u32,
            1..=4u32,
            0..=4u32,
            0..=4u32,
        ),
        |(kw, kh, ow, oh, s1, s2, dw, dh)| {
            let pool = PoolSpec::new(ow, oh, PoolKind::Max);
            let stride = StrideSpec::new(s1, s2, 0);
            let small = KernelSpec::new(kw, kh, 1);
            let big = KernelSpec::new(kw + dw, kh + dh, 1);
            if dominates(&small, &pool, &stride) {
                prop_assert!(dominates(&big, &pool, &stride));
            }
            Ok(())
        },
    );

    // Enlarging the pool never grants dominance.
    total += run(
        "dominance_monotone_pool_growth",
        1000,
        (
            1..=7u32,
            1..=7u32,
            1..=7u32,
            1..=7u32,
            1..=4u32,
            1..=4u32,
            0..=4u32,
            0..=4u32,
        ),
        |(kw, kh, ow, oh, s1, s2, dw, dh)| {
            let kernel = KernelSpec::new(kw, kh, 1);
            let stride = StrideSpec::new(s1, s2, 0);
            let small = PoolSpec::new(ow, oh, PoolKind::Max);
            let big = PoolSpec::new(ow + dw, oh + dh, PoolKind::Max);
            if !dominates(&kernel, &small, &stride) {
                prop_assert!(!dominates(&kernel, &big, &stride));
            }
            Ok(())
        },
    );

    // A stride covering the pool window collapses it to one entry.
    total += run(
        "dominance_stride_covers_pool",
        500,
        (1..=7u32, 1..=7u32, 1..=7u32, 1..=7u32, 0..=3u32, 0..=3u32),
        |(kw, kh, ow, oh, extra1, extra2)| {
            let kernel = KernelSpec::new(kw, kh, 1);
            let pool = PoolSpec::new(ow, oh, PoolKind::Avg);
            let stride = StrideSpec::new(ow + extra1, oh + extra2, 0);
            prop_assert!(dominates(&kernel, &pool, &stride));
            Ok(())
        },
    );

    total += run(
        "effective_kernel_idempotent",
        500,
        (1..=9u32, 1..=9u32, 1..=8u32, 1..=5u32),
        |(kw, kh, kc, d)| {
            let once = effective_kernel(KernelSpec::with_dilation(kw, kh, kc, d));
            prop_assert_eq!(effective_kernel(once), once);
            prop_assert_eq!(once.dilation, 1);
            Ok(())
        },
    );

    // Generic documents round-trip structurally.
    let catalog = op_catalog();
    let catalog_len = catalog.len();
    total += run(
        "generic_round_trip",
        1000,
        (
            prop::collection::btree_set(0..catalog_len, 1..=catalog_len),
            1..=6u32,
            prop::collection::vec(
                (1..=3u32, 1..=64u32, 1..=2048u64, 1..=2048u64, any::<bool>()),
                1..=3,
            ),
        )
            .prop_flat_map(|(opt_idx, slots, stages)| {
                let opt: Vec<usize> = opt_idx.into_iter().collect();
                let len = opt.len();
                (
                    Just(opt),
                    Just(slots),
                    Just(stages),
                    prop::collection::vec(0..len, slots as usize),
                    prop::collection::vec(0..len, slots as usize),
                )
            }),
        move |(opt_idx, slots, stages, normal_slots, reduce_slots)| {
            let catalog = op_catalog();
            let opt: Vec<OpKind> = opt_idx.iter().map(|&i| catalog[i].clone()).collect();
            let skeleton: Vec<SkeletonStage> = stages
                .iter()
                .map(|&(repeat, c_out, f_in, f_out, reduce)| SkeletonStage {
                    repeat,
                    c_out,
                    f_in,
                    f_out,
                    cell: if reduce {
                        CellKind::Reduce
                    } else {
                        CellKind::Normal
                    },
                })
                .collect();
            let space = SearchSpaceDescriptor::new(
                "prop-space",
                EncodingFormat::GenericJson,
                opt.clone(),
                slots,
                skeleton.clone(),
            )
            .unwrap();

            let counts_for = |assignment: &[usize]| {
                let mut counts: BTreeMap<OpKind, u32> = BTreeMap::new();
                for &i in assignment {
                    *counts.entry(opt[i % opt.len()].clone()).or_insert(0) += 1;
                }
                counts
            };
            let normal = counts_for(&normal_slots);
            let reduce = counts_for(&reduce_slots);
            let mut blocks = Vec::new();
            for stage in &skeleton {
                let counts = match stage.cell {
                    CellKind::Normal => &normal,
                    CellKind::Reduce => &reduce,
                };
                for _ in 0..stage.repeat {
                    blocks.push(Block::new(
                        counts.clone(),
                        stage.c_out,
                        stage.c_out,
                        stage.f_in,
                        stage.f_out,
                    ));
                }
            }
            let arch = Architecture::new(blocks, "prop-space", "");
            let doc = parse::serialize_generic(&arch, &space).unwrap();
            let (space2, arch2) = parse::parse_generic(&doc).unwrap();
            prop_assert_eq!(&space, &space2);
            prop_assert!(arch.structurally_equal(&arch2));
            Ok(())
        },
    );

    // Every TSS parse tallies exactly the 6 edges.
    total += run(
        "tss_parse_tallies_six_edges",
        1500,
        prop::collection::vec(0..TSS_TOKENS.len(), 6),
        |tokens| {
            let space = nats_bench_tss_space();
            let arch = parse::parse_tss(&cell_string(&tokens), &space).unwrap();
            prop_assert_eq!(arch.blocks.len(), 15);
            for block in &arch.blocks {
                prop_assert_eq!(block.total_ops(), 6);
            }
            // Tallies match a direct count of the token list.
            let b = &arch.blocks[0];
            for (t, token) in TSS_TOKENS.iter().enumerate() {
                let manual = tokens.iter().filter(|&&x| x == t).count() as u32;
                let op = sednas_core::spaces::tss_op(token).unwrap();
                prop_assert_eq!(b.count(&op), manual);
            }
            Ok(())
        },
    );

    // Empirical entropy lives in [0, log2 n], zero iff constant.
    total += run(
        "one_dim_entropy_bounds",
        2000,
        prop::collection::vec(0..5usize, 1..=64),
        |indices| {
            let alphabet = [0.0, 1.5, -2.0, 3.25, 9.0];
            let values: Vec<f64> = indices.iter().map(|&i| alphabet[i]).collect();
            let h = one_dim_entropy(&values);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (values.len() as f64).log2() + 1e-12);
            let constant = values.iter().all(|&v| v == values[0]);
            prop_assert_eq!(h == 0.0, constant);
            Ok(())
        },
    );

    // Gaussian entropy never reads the mean.
    total += run(
        "gaussian_translation_invariance",
        500,
        (1..=6usize).prop_flat_map(|dim| {
            (
                Just(dim),
                prop::collection::vec(-1.0..1.0f64, dim * dim),
                prop::collection::vec(-100.0..100.0f64, dim),
                prop::collection::vec(-100.0..100.0f64, dim),
            )
        }),
        |(dim, raw, mean1, mean2)| {
            let cov = pd_cov(dim, &raw, 0.1);
            let a = GaussianFieldSpec::new(dim, mean1, cov.clone()).unwrap();
            let b = GaussianFieldSpec::new(dim, mean2, cov).unwrap();
            let ha = gaussian_entropy(&a).unwrap();
            let hb = gaussian_entropy(&b).unwrap();
            prop_assert_eq!(ha.to_bits(), hb.to_bits());
            Ok(())
        },
    );

    // Block-diagonal covariances add their entropies.
    total += run(
        "gaussian_block_additivity",
        500,
        (1..=4usize, 1..=4usize).prop_flat_map(|(d1, d2)| {
            (
                Just(d1),
                Just(d2),
                prop::collection::vec(-1.0..1.0f64, d1 * d1),
                prop::collection::vec(-1.0..1.0f64, d2 * d2),
            )
        }),
        |(d1, d2, raw1, raw2)| {
            let cov1 = pd_cov(d1, &raw1, 0.1);
            let cov2 = pd_cov(d2, &raw2, 0.1);
            let n = d1 + d2;
            let mut joint = vec![0.0; n * n];
            for i in 0..d1 {
                for j in 0..d1 {
                    joint[i * n + j] = cov1[i * d1 + j];
                }
            }
            for i in 0..d2 {
                for j in 0..d2 {
                    joint[(d1 + i) * n + (d1 + j)] = cov2[i * d2 + j];
                }
            }
            let ha = gaussian_entropy(&GaussianFieldSpec::new(d1, vec![0.0; d1], cov1).unwrap())
                .unwrap();
            let hb = gaussian_entropy(&GaussianFieldSpec::new(d2, vec![0.0; d2], cov2).unwrap())
                .unwrap();
            let hj =
                gaussian_entropy(&GaussianFieldSpec::new(n, vec![0.0; n], joint).unwrap()).unwrap();
            prop_assert!((hj - (ha + hb)).abs() <= 1e-9);
            Ok(())
        },
    );

    // Pointwise-larger fields pool to pointwise-larger outputs.
    total += run(
        "max_pool_monotone",
        500,
        (2..=8usize, 2..=8usize).prop_flat_map(|(w, h)| {
            (
                Just(w),
                Just(h),
                prop::collection::vec(-10.0..10.0f64, w * h),
                prop::collection::vec(0.0..5.0f64, w * h),
                1..=w.min(h),
                1..=3u32,
            )
        }),
        |(w, h, base, bump, o, s)| {
            let x = FeatureField::new(w, h, 1, base.clone()).unwrap();
            let y = FeatureField::new(
                w,
                h,
                1,
                base.iter().zip(&bump).map(|(a, b)| a + b).collect(),
            )
            .unwrap();
            let pool = PoolSpec::new(o as u32, o as u32, PoolKind::Max);
            let stride = StrideSpec::new(s, s, 0);
            let px = max_pool(&x, &pool, &stride).unwrap();
            let py = max_pool(&y, &pool, &stride).unwrap();
            for (a, b) in px.entries().iter().zip(py.entries()) {
                prop_assert!(a <= b);
            }
            Ok(())
        },
    );

    // Correlations are symmetric and invariant under strictly increasing
    // transforms of either argument.
    total += run(
        "correlation_symmetry_and_monotone_invariance",
        1000,
        (2..=30usize, 2..=8u32).prop_flat_map(|(n, alphabet)| {
            (
                prop::collection::vec(0..alphabet, n),
                prop::collection::vec(0..alphabet, n),
            )
        }),
        |(xi, yi)| {
            let xs: Vec<f64> = xi.iter().map(|&v| v as f64).collect();
            let ys: Vec<f64> = yi.iter().map(|&v| v as f64).collect();
            let fx: Vec<f64> = xs.iter().map(|&v| (v / 10.0).exp()).collect();

            match (bench::spearman(&xs, &ys), bench::spearman(&ys, &xs)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (Err(_), Err(_)) => {}
                other => return Err(TestCaseError::fail(format!("asymmetry: {other:?}"))),
            }
            match (bench::spearman(&xs, &ys), bench::spearman(&fx, &ys)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (Err(_), Err(_)) => {}
                other => {
                    return Err(TestCaseError::fail(format!(
                        "not rank-invariant: {other:?}"
                    )))
                }
            }
            match (bench::kendall(&xs, &ys), bench::kendall(&fx, &ys)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (Err(_), Err(_)) => {}
                other => {
                    return Err(TestCaseError::fail(format!(
                        "not rank-invariant: {other:?}"
                    )))
                }
            }
            // Perfect self-correlation whenever defined.
            if let Ok(rho) = bench::spearman(&xs, &xs) {
                prop_assert_eq!(rho, 1.0);
            }
            Ok(())
        },
    );

    // Block score strictly increases in the skip count when some kernel
    // dominates (D > 0), all other counts fixed.
    total += run(
        "block_score_increases_with_skip",
        1000,
        (1..=4u32, 0..=2u32, 0..=2u32, 0..=2u32, 0..=4u32),
        |(conv3, conv1, pool, none, skip)| {
            let space = nats_bench_tss_space();
            let config = SedConfig::default();
            let score = |n_skip: u32| {
                let mut counts = BTreeMap::new();
                counts.insert(sednas_core::spaces::tss_op("nor_conv_3x3").unwrap(), conv3);
                if conv1 > 0 {
                    counts.insert(sednas_core::spaces::tss_op("nor_conv_1x1").unwrap(), conv1);
                }
                if pool > 0 {
                    counts.insert(sednas_core::spaces::tss_op("avg_pool_3x3").unwrap(), pool);
                }
                if none > 0 {
                    counts.insert(OpKind::None, none);
                }
                if n_skip > 0 {
                    counts.insert(OpKind::Skip, n_skip);
                }
                let block = Block::new(counts, 16, 16, 1024, 1024);
                let skip_score = sed::skip_sed(&block);
                let conv_score = sed::conv_sed(&block, &space);
                let pool_score = sed::pool_sed(&block, &space, &config);
                let ratio = sed::sig(16.0);
                ratio * pool_score * sed::sig(skip_score * conv_score)
            };
            prop_assert!(score(skip + 1) > score(skip));
            Ok(())
        },
    );

    // Swapping a suppressed kernel for a dominating one (T fixed) strictly
    // increases pool_sed.
    total += run(
        "pool_sed_increases_on_dominating_swap",
        1000,
        (0..=4u32, 1..=4u32, 0..=2u32, 0..=2u32, 0..=2u32),
        |(conv3, conv1, skip, pool, none)| {
            let space = nats_bench_tss_space();
            let config = SedConfig::default();
            let build = |c3: u32, c1: u32| {
                let mut counts = BTreeMap::new();
                if c3 > 0 {
                    counts.insert(sednas_core::spaces::tss_op("nor_conv_3x3").unwrap(), c3);
                }
                if c1 > 0 {
                    counts.insert(sednas_core::spaces::tss_op("nor_conv_1x1").unwrap(), c1);
                }
                if skip > 0 {
                    counts.insert(OpKind::Skip, skip);
                }
                if pool > 0 {
                    counts.insert(sednas_core::spaces::tss_op("avg_pool_3x3").unwrap(), pool);
                }
                if none > 0 {
                    counts.insert(OpKind::None, none);
                }
                Block::new(counts, 16, 16, 1024, 1024)
            };
            let before = sed::pool_sed(&build(conv3, conv1), &space, &config);
            let after = sed::pool_sed(&build(conv3 + 1, conv1 - 1), &space, &config);
            prop_assert!(after > before, "pool_sed {} -> {}", before, after);
            Ok(())
        },
    );

    // No parser panics on arbitrary input; every failure is a typed error.
    total += run("parser_never_panics", 1000, any::<String>(), |junk| {
        let tss = nats_bench_tss_space();
        let darts = sednas_core::spaces::darts_space();
        let _ = parse::parse_tss(&junk, &tss);
        let _ = parse::parse_darts(&junk, &darts);
        let _ = parse::parse_generic(&junk);
        let _ = parse::parse_space(&junk);
        Ok(())
    });

    // Scaling f_in and f_out together changes nothing.
    total += run(
        "sed_feature_scale_invariance",
        1000,
        (prop::collection::vec(0..TSS_TOKENS.len(), 6), 2..=64u64),
        |(tokens, factor)| {
            let space = nats_bench_tss_space();
            let arch = parse::parse_tss(&cell_string(&tokens), &space).unwrap();
            let scaled = Architecture::new(
                arch.blocks
                    .iter()
                    .map(|b| {
                        Block::new(
                            b.op_counts.clone(),
                            b.c_in,
                            b.c_out,
                            b.f_in * factor,
                            b.f_out * factor,
                        )
                    })
                    .collect(),
                arch.space_id.clone(),
                arch.encoding.clone(),
            );
            let a = sed::sed(&arch, &space).unwrap().sed;
            let b = sed::sed(&scaled, &space).unwrap().sed;
            prop_assert_eq!(a.to_bits(), b.to_bits());
            Ok(())
        },
    );

    total
}
