use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splittree::experiment::{derive_seed, replicate};
use splittree::families::preset;
use splittree::statistics::{path_length_identity_check, summarize, MeanSe};
use splittree::tree::{build, SimRng};
use splittree::{BuildMode, SplitParams, SplitVectorSource, Tree};

fn bst() -> (SplitParams, SplitVectorSource) {
    (SplitParams::new(2, 1, 1, 0).unwrap(), SplitVectorSource::dirichlet(1.0, 2).unwrap())
}

fn harmonic(n: u64) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Expected leaves of a random binary search tree on `k` keys:
/// `L_k = (2/k) sum_{j<k} L_j`, `L_0 = 0`, `L_1 = 1`.
fn bst_leaves(k: usize) -> f64 {
    let mut l = vec![0.0, 1.0];
    let mut acc = 1.0;
    for m in 2..=k {
        let next = 2.0 * acc / m as f64;
        l.push(next);
        acc += next;
    }
    l[k]
}

/// Mean depth of the newest ball when one of the two balls at a splitting leaf
/// is kept at random: the classical `2(H_n - 1)`, less one half of a level
/// whenever the ball ends its descent at an occupied leaf. The ball picks one
/// of the `n` external slots of the older tree uniformly, and a leaf owns two
/// of them.
fn random_stay_depth_oracle(n: u64) -> f64 {
    let leaf_hit = 2.0 * bst_leaves(n as usize - 1) / n as f64;
    2.0 * (harmonic(n) - 1.0) - 0.5 * leaf_hit
}

#[test]
fn bst_vertex_count_tracks_ball_count() {
    let (p, src) = bst();
    for seed in 0..5 {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut tree = Tree::new(p, BuildMode::CountsOnly).unwrap();
        for k in 1..=10_000u64 {
            tree.add_ball(&src, &mut rng).unwrap();
            assert_eq!(tree.num_vertices() as u64, k);
        }
    }
}

#[test]
fn build_modes_share_the_random_stream() {
    let (p, src) = bst();
    let shapes: Vec<Vec<_>> = [BuildMode::CountsOnly, BuildMode::Traced, BuildMode::Instrumented]
        .into_iter()
        .map(|m| {
            let t = build(p, &src, 3000, 99, m).unwrap();
            t.vertices().map(|(_, v)| (v.parent(), v.depth())).collect()
        })
        .collect();
    assert_eq!(shapes[0], shapes[1]);
    assert_eq!(shapes[1], shapes[2]);
}

#[test]
fn three_ball_path_length_mean() {
    // a_n = n - 1 + (2/n) sum_{k<n} a_k
    let mut a = vec![0.0f64];
    for n in 1..=3usize {
        let s: f64 = a.iter().sum();
        a.push(n as f64 - 1.0 + 2.0 * s / n as f64);
    }
    assert!((a[3] - 8.0 / 3.0).abs() < 1e-12);

    let (p, src) = bst();
    let k = src.constants(splittree::ConstantsMethod::ClosedForm).unwrap();
    let psi: Vec<f64> = replicate(5, 3, 20_000, Some(1), |_, seed| {
        let t = build(p, &src, 3, seed, BuildMode::CountsOnly)?;
        Ok(summarize(&t, &k, 0.25)?.psi as f64)
    })
    .unwrap();
    let m = MeanSe::of(&psi);
    assert!((m.mean - a[3]).abs() < 4.0 * m.se, "{m:?}");
}

#[test]
fn random_stay_oracle_small_cases() {
    assert!((random_stay_depth_oracle(2) - 0.5).abs() < 1e-12);
    assert!((random_stay_depth_oracle(3) - 4.0 / 3.0).abs() < 1e-12);
    for n in 3..200 {
        let shift = 2.0 * (harmonic(n) - 1.0) - random_stay_depth_oracle(n);
        assert!((shift - 1.0 / 3.0).abs() < 1e-9, "n = {n}: {shift}");
    }
}

/// A plain recursive tree with the same stay rule, coded independently of
/// the arena builder: each node keeps a ball and a split point `u`.
fn reference_last_depth(n: u64, rng: &mut ChaCha8Rng) -> u32 {
    struct Node {
        u: f64,
        kids: [Option<usize>; 2],
    }
    let mut nodes = vec![Node { u: f64::NAN, kids: [None, None] }];
    let mut newest_depth = 0;
    for _ in 1..n {
        let mut at = 0;
        let mut depth = 0;
        loop {
            if nodes[at].u.is_nan() {
                // a leaf holding one ball: split it
                nodes[at].u = rng.random::<f64>();
                let u = nodes[at].u;
                let newest_stays = rng.random::<bool>();
                let side = usize::from(rng.random::<f64>() >= u);
                nodes.push(Node { u: f64::NAN, kids: [None, None] });
                nodes[at].kids[side] = Some(nodes.len() - 1);
                newest_depth = if newest_stays { depth } else { depth + 1 };
                break;
            }
            let side = usize::from(rng.random::<f64>() >= nodes[at].u);
            match nodes[at].kids[side] {
                Some(next) => {
                    at = next;
                    depth += 1;
                }
                None => {
                    nodes.push(Node { u: f64::NAN, kids: [None, None] });
                    nodes[at].kids[side] = Some(nodes.len() - 1);
                    newest_depth = depth + 1;
                    break;
                }
            }
        }
    }
    newest_depth
}

#[test]
fn last_ball_depth_matches_oracle_and_reference() {
    let (p, src) = bst();
    let reps = 100_000;
    for n in [2u64, 3, 4, 10, 60] {
        let oracle = random_stay_depth_oracle(n);
        let depths: Vec<f64> = replicate(41, n, reps, Some(1), |_, seed| {
            let t = build(p, &src, n, seed, BuildMode::Traced)?;
            Ok(f64::from(t.vertex(t.ball_location(n as usize - 1).unwrap()).depth()))
        })
        .unwrap();
        let m = MeanSe::of(&depths);
        assert!((m.mean - oracle).abs() < 4.0 * m.se, "n = {n}: {m:?} vs {oracle}");

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(42, n, 0));
        let reference: Vec<f64> = (0..reps).map(|_| f64::from(reference_last_depth(n, &mut rng))).collect();
        let r = MeanSe::of(&reference);
        assert!((r.mean - oracle).abs() < 4.0 * r.se, "reference n = {n}: {r:?} vs {oracle}");
    }
}

#[test]
fn insertion_depth_of_last_ball_is_its_final_depth() {
    let (p, src) = bst();
    let t = build(p, &src, 500, 8, BuildMode::Traced).unwrap();
    let finals = t.final_depths().unwrap();
    let at_insert = t.insertion_depths().unwrap();
    assert_eq!(finals.last(), at_insert.last());
    // a ball only ever moves down
    assert!(finals.iter().zip(at_insert).all(|(f, i)| f >= i));
}

#[test]
fn mean_final_depth_nondecreasing_in_insertion_index() {
    let (p, src) = bst();
    let n = 2000u64;
    let grid = [1usize, 10, 50, 200, 1000, 2000];
    let depths: Vec<Vec<f64>> = replicate(77, n, 2000, Some(1), |_, seed| {
        let t = build(p, &src, n, seed, BuildMode::Traced)?;
        let d = t.final_depths().unwrap();
        Ok(grid.iter().map(|&k| f64::from(d[k - 1])).collect())
    })
    .unwrap();
    let means: Vec<MeanSe> = (0..grid.len())
        .map(|j| MeanSe::of(&depths.iter().map(|row| row[j]).collect::<Vec<_>>()))
        .collect();
    for w in means.windows(2) {
        let tol = 2.0 * (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
        assert!(w[1].mean >= w[0].mean - tol, "{means:?}");
    }
}

#[test]
fn figure_parameters_keep_path_identities() {
    let src4 = SplitVectorSource::dirichlet(1.0, 4).unwrap();
    let src2 = SplitVectorSource::dirichlet(1.0, 2).unwrap();
    let fig1 = SplitParams::new(4, 3, 1, 0).unwrap();
    let fig2 = SplitParams::new(2, 4, 0, 2).unwrap();
    for seed in 0..200 {
        let t = build(fig1, &src4, 32, seed, BuildMode::Traced).unwrap();
        assert!(path_length_identity_check(&t));
        let t = build(fig2, &src2, 32, seed, BuildMode::Traced).unwrap();
        assert!(path_length_identity_check(&t));
    }
    let t = build(SplitParams::new(2, 1, 1, 0).unwrap(), &src2, 1000, 1, BuildMode::CountsOnly).unwrap();
    assert!(path_length_identity_check(&t));
}

#[test]
fn small_trees_stay_in_the_root() {
    let src = SplitVectorSource::uniform_spacings(3).unwrap();
    let p = SplitParams::new(3, 5, 2, 1).unwrap();
    for n in 1..=5 {
        let t = build(p, &src, n, n, BuildMode::Traced).unwrap();
        assert_eq!(t.num_vertices(), 1);
        assert_eq!(u64::from(t.vertex(t.root()).ball_count()), n);
        assert!(path_length_identity_check(&t));
    }
}

#[test]
fn mary_preset_builds() {
    for m in [3u32, 4] {
        let f = preset("mary", Some(&m.to_string())).unwrap();
        for seed in 0..20 {
            let t = build(f.params, &f.source, 5000, seed, BuildMode::CountsOnly).unwrap();
            assert!(t.num_vertices() <= 5000);
            for (id, v) in t.vertices() {
                if t.children(id).any(|c| c.is_some()) {
                    assert_eq!(v.ball_count(), m - 1);
                }
            }
        }
    }
}
