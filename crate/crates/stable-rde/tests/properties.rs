//! Property tests over randomized structures: metric axioms, reduction and
//! rescaling laws, serialization round-trips, and stick-breaking contracts.

use proptest::prelude::*;

use stable_rde::concat::ScalingSeq;
use stable_rde::laws::{gem_sticks, pd_sample};
use stable_rde::rng::SplitMix64;
use stable_rde::tree::{MassMode, MetricTree, TreeBuilder};
use stable_rde::tree::io::{from_json, to_json};

/// Attachment plan for a random tree: node k+1 hangs off `parents[k] % (k+1)`
/// with edge length `lens[k]`.
fn tree_strategy(max_extra: usize) -> impl Strategy<Value = MetricTree> {
    (1..=max_extra)
        .prop_flat_map(|extra| {
            (
                proptest::collection::vec(any::<u32>(), extra),
                proptest::collection::vec(0.01f64..2.0, extra),
                any::<u32>(),
            )
        })
        .prop_map(|(parents, lens, mark_pick)| {
            let mut b = TreeBuilder::new();
            b.label(TreeBuilder::ROOT, "n0").expect("label the root");
            let mut ids = vec![TreeBuilder::ROOT];
            for (k, (&p, &len)) in parents.iter().zip(&lens).enumerate() {
                let parent = ids[p as usize % (k + 1)];
                let v = b.add_child(parent, len).expect("positive edge");
                b.label(v, format!("n{v}")).expect("label new node");
                ids.push(v);
            }
            let mark = ids[1 + (mark_pick as usize % (ids.len() - 1))];
            b.mark(mark).expect("mark a non-root node");
            b.build().expect("plan yields a valid tree")
        })
}

proptest! {
    /// dist is symmetric, vanishes exactly on the diagonal, and satisfies
    /// the triangle and four-point inequalities.
    #[test]
    fn dist_is_a_four_point_metric(t in tree_strategy(10)) {
        let n = t.len();
        for u in 0..n {
            prop_assert_eq!(t.dist(u, u).unwrap(), 0.0);
            for v in 0..n {
                let duv = t.dist(u, v).unwrap();
                prop_assert_eq!(duv, t.dist(v, u).unwrap());
                for w in 0..n {
                    let tri = t.dist(u, w).unwrap() + t.dist(w, v).unwrap();
                    prop_assert!(duv <= tri + 1e-9);
                }
            }
        }
        // four-point: the largest two of the three pairings agree
        let mut rng = SplitMix64::new(7);
        for _ in 0..20 {
            let q: Vec<usize> = (0..4).map(|_| rng.random_range(0..n)).collect();
            let s1 = t.dist(q[0], q[1]).unwrap() + t.dist(q[2], q[3]).unwrap();
            let s2 = t.dist(q[0], q[2]).unwrap() + t.dist(q[1], q[3]).unwrap();
            let s3 = t.dist(q[0], q[3]).unwrap() + t.dist(q[1], q[2]).unwrap();
            let mut s = [s1, s2, s3];
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert!((s[2] - s[1]).abs() <= 1e-9 * (1.0 + s[2]));
        }
    }

    /// Reducing to a point set preserves every pairwise distance between the
    /// kept points.
    #[test]
    fn reduce_preserves_distances_between_kept_points(
        t in tree_strategy(10),
        picks in proptest::collection::vec(any::<u32>(), 1..5),
    ) {
        let pts: Vec<usize> = picks.iter().map(|&p| p as usize % t.len()).collect();
        let r = t.reduce(&pts).unwrap();
        // retained nodes keep their labels; match them up by label
        let mut new_of = std::collections::BTreeMap::new();
        for (&rv, label) in r.labels() {
            let v: usize = label.strip_prefix('n').unwrap().parse().unwrap();
            new_of.insert(v, rv);
        }
        for &a in &pts {
            prop_assert!(new_of.contains_key(&a), "picked point {} was dropped", a);
        }
        for (&a, &ra) in &new_of {
            for (&b, &rb) in &new_of {
                let want = t.dist(a, b).unwrap();
                let got = r.dist(ra, rb).unwrap();
                prop_assert!(
                    (want - got).abs() <= 1e-9 * (1.0 + want),
                    "{} vs {} between {} and {}", got, want, a, b
                );
            }
        }
    }

    /// JSON serialization round-trips to an isometric tree with identical
    /// summary statistics.
    #[test]
    fn json_round_trip_is_isometric(t in tree_strategy(10)) {
        let s = to_json(&t).unwrap();
        let u = from_json(&s).unwrap();
        prop_assert!(t.isometric_to(&u, 1e-12));
        prop_assert_eq!(t.len(), u.len());
        let (a, b) = (t.stats(), u.stats());
        prop_assert_eq!(a.n_leaves, b.n_leaves);
        prop_assert!((a.height - b.height).abs() <= 1e-12);
        prop_assert!((a.total_length - b.total_length).abs() <= 1e-12);
    }

    /// Rescaling composes multiplicatively: scaling masses by c1 then c2
    /// matches scaling by c1*c2 at the same exponent.
    #[test]
    fn rescale_composes_multiplicatively(
        t in tree_strategy(8),
        c1 in 0.2f64..5.0,
        c2 in 0.2f64..5.0,
        beta in 0.25f64..1.0,
    ) {
        let once = t.rescale(c1 * c2, beta, MassMode::Normalized).unwrap();
        let twice = t
            .rescale(c1, beta, MassMode::Normalized)
            .unwrap()
            .rescale(c2, beta, MassMode::Normalized)
            .unwrap();
        for v in 0..t.len() {
            let a = once.edge_len(v);
            let b = twice.edge_len(v);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    /// Stick-breaking returns positive atoms summing to one, and its
    /// size-ordered variant is the same multiset sorted decreasing.
    #[test]
    fn stick_breaking_contracts_hold(
        beta in 0.1f64..0.9,
        theta_shift in 0.0f64..2.0,
        eps in 0.01f64..0.2,
        seed in any::<u64>(),
    ) {
        let theta = -beta + 0.05 + theta_shift;
        let g = gem_sticks(beta, theta, eps, &mut SplitMix64::new(seed)).unwrap();
        prop_assert!(!g.weights.is_empty());
        prop_assert!(g.weights.iter().all(|&w| w > 0.0));
        let total: f64 = g.weights.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!(g.residual >= 0.0 && g.residual < 1.0);

        let p = pd_sample(beta, theta, eps, &mut SplitMix64::new(seed)).unwrap();
        let mut sorted = g.weights.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(p.weights, sorted);
    }

    /// A scaling sequence survives the atoms() / from_atoms() round trip.
    #[test]
    fn scaling_seq_atoms_round_trip(
        raw in proptest::collection::vec(0.05f64..1.0, 3..8),
    ) {
        let total: f64 = raw.iter().sum();
        let mut atoms: Vec<f64> = raw.iter().map(|a| a / total).collect();
        atoms[3..].sort_by(|a, b| b.partial_cmp(a).unwrap());
        let seq = ScalingSeq::from_atoms(&atoms).unwrap();
        let back = seq.atoms();
        prop_assert_eq!(back.len(), atoms.len());
        for (i, &a) in atoms.iter().enumerate() {
            prop_assert!((back[i] - a).abs() <= 1e-12, "atom {}: {} vs {}", i, back[i], a);
        }
    }
}
