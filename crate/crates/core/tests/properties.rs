use proptest::prelude::*;
use rand::SeedableRng;
use splittree::statistics::{path_length_identity_check, summarize, DEFAULT_EPSILON};
use splittree::tree::{build, SimRng};
use splittree::{BuildMode, ConstantsMethod, SplitParams, SplitVectorSource, Tree};

fn params() -> impl Strategy<Value = SplitParams> {
    (2u32..=4, 1u32..=5)
        .prop_flat_map(|(b, s)| (Just(b), Just(s), 0..=s))
        .prop_flat_map(|(b, s, s0)| (Just(b), Just(s), Just(s0), 0..=(s + 1 - s0) / b))
        .prop_map(|(b, s, s0, s1)| SplitParams::new(b, s, s0, s1).unwrap())
}

fn source(b: u32, kind: u8) -> SplitVectorSource {
    match kind {
        0 => SplitVectorSource::uniform_spacings(b as usize).unwrap(),
        1 => SplitVectorSource::dirichlet(0.5, b as usize).unwrap(),
        2 => SplitVectorSource::dirichlet(2.5, b as usize).unwrap(),
        _ => {
            let mut p: Vec<f64> = (1..=b).map(f64::from).collect();
            let total: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= total);
            let last = 1.0 - p[..p.len() - 1].iter().sum::<f64>();
            *p.last_mut().unwrap() = last;
            SplitVectorSource::deterministic_permuted(p).unwrap()
        }
    }
}

fn mode() -> impl Strategy<Value = BuildMode> {
    prop_oneof![Just(BuildMode::CountsOnly), Just(BuildMode::Traced), Just(BuildMode::Instrumented)]
}

fn check_shape(tree: &Tree) -> Result<(), TestCaseError> {
    let p = tree.params();
    let counts = tree.subtree_ball_counts();
    for (id, v) in tree.vertices() {
        prop_assert!(counts[id.index()] > 0, "useless vertex {id:?}");
        if let Some(parent) = v.parent() {
            prop_assert_eq!(v.depth(), tree.vertex(parent).depth() + 1);
        } else {
            prop_assert_eq!(v.depth(), 0);
        }
        if tree.children(id).any(|c| c.is_some()) {
            prop_assert_eq!(v.ball_count(), p.s0);
        } else {
            prop_assert!(v.ball_count() >= 1 && v.ball_count() <= p.s);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn balls_are_conserved_after_every_insertion(
        p in params(), kind in 0u8..4, n in 1u64..200, seed: u64, mode in mode(),
    ) {
        let src = source(p.b, kind);
        let mut rng = SimRng::seed_from_u64(seed);
        let mut tree = Tree::new(p, mode).unwrap();
        for k in 1..=n {
            tree.add_ball(&src, &mut rng).unwrap();
            let held: u64 = tree.vertices().map(|(_, v)| u64::from(v.ball_count())).sum();
            prop_assert_eq!(held, k);
        }
        check_shape(&tree)?;
    }

    #[test]
    fn path_length_identities_hold(p in params(), kind in 0u8..4, n in 1u64..400, seed: u64, mode in mode()) {
        let src = source(p.b, kind);
        let tree = build(p, &src, n, seed, mode).unwrap();
        prop_assert!(path_length_identity_check(&tree));
        let k = src.constants(ConstantsMethod::Auto).unwrap();
        let stats = summarize(&tree, &k, DEFAULT_EPSILON).unwrap();
        prop_assert_eq!(stats.vertices, stats.profile.iter().sum::<u64>());
        prop_assert_eq!(stats.n, stats.ball_profile.iter().sum::<u64>());
        prop_assert_eq!(stats.good + stats.bad, stats.vertices);
        prop_assert_eq!(stats.profile.len() as u32, stats.height + 1);
        prop_assert_eq!(stats.psi, tree.subtree_ball_counts().iter().skip(1).sum::<u64>());
        prop_assert_eq!(stats.upsilon, tree.subtree_vertex_counts().iter().skip(1).sum::<u64>());
    }

    #[test]
    fn weights_telescope(p in params(), kind in 0u8..3, n in 1u64..300, seed: u64) {
        let src = source(p.b, kind);
        let tree = build(p, &src, n, seed, BuildMode::Instrumented).unwrap();
        prop_assert_eq!(tree.vertex(tree.root()).cumulative_weight(), Some(1.0));
        for (id, v) in tree.vertices() {
            let w = v.cumulative_weight().unwrap();
            let Some(split) = tree.split_vector(id) else { continue };
            let total: f64 = split.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for (i, child) in tree.children(id).enumerate() {
                if let Some(c) = child {
                    prop_assert_eq!(tree.vertex(c).cumulative_weight().unwrap(), w * split[i]);
                }
            }
            let mass: f64 = split.iter().map(|x| w * x).sum();
            prop_assert!((mass - w).abs() <= 1e-12 * w.max(1e-300));
        }
    }

    #[test]
    fn builds_are_deterministic(p in params(), kind in 0u8..4, n in 1u64..300, seed: u64, mode in mode()) {
        let src = source(p.b, kind);
        let k = src.constants(ConstantsMethod::Auto).unwrap();
        let a = build(p, &src, n, seed, mode).unwrap();
        let b = build(p, &src, n, seed, mode).unwrap();
        prop_assert_eq!(summarize(&a, &k, 0.25).unwrap(), summarize(&b, &k, 0.25).unwrap());
        let shape = |t: &Tree| t.vertices().map(|(_, v)| (v.parent(), v.ball_count())).collect::<Vec<_>>();
        prop_assert_eq!(shape(&a), shape(&b));
    }

    #[test]
    fn traced_locations_agree_with_vertex_contents(p in params(), kind in 0u8..4, n in 1u64..300, seed: u64) {
        let src = source(p.b, kind);
        let tree = build(p, &src, n, seed, BuildMode::Traced).unwrap();
        let mut seen = vec![false; n as usize];
        for (id, _) in tree.vertices() {
            for &ball in tree.balls_at(id).unwrap() {
                prop_assert!(!seen[ball as usize]);
                seen[ball as usize] = true;
                prop_assert_eq!(tree.ball_location(ball as usize), Some(id));
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        let depths = tree.final_depths().unwrap();
        let psi: u64 = depths.iter().map(|&d| u64::from(d)).sum();
        prop_assert_eq!(psi, tree.subtree_ball_counts().iter().skip(1).sum::<u64>());
    }

    #[test]
    fn bst_has_one_ball_per_vertex(n in 1u64..2000, seed: u64) {
        let p = SplitParams::new(2, 1, 1, 0).unwrap();
        let src = SplitVectorSource::dirichlet(1.0, 2).unwrap();
        let tree = build(p, &src, n, seed, BuildMode::CountsOnly).unwrap();
        prop_assert_eq!(tree.num_vertices() as u64, n);
        let k = src.constants(ConstantsMethod::ClosedForm).unwrap();
        let stats = summarize(&tree, &k, 0.25).unwrap();
        prop_assert_eq!(stats.psi, stats.upsilon);
    }
}
