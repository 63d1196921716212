use proptest::prelude::*;

use percolab::chemdist::{chemical_distance, distance_field, distance_field_from, wet_region, UNREACHABLE};
use percolab::clusters::label_clusters;
use percolab::geometry::{
    adapted_basis, hausdorff_points, signed_permutations, DirectionValue, NormBall, SignedPermutation,
};
use percolab::lattice::{make_window, sample_configuration, BoxWindow, Configuration};
use percolab::renorm::{unwired_components, wired_field, WiredState};
use percolab::stats::{fit_exponential_decay, DecayPoint};

fn l1f(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn window_8() -> BoxWindow {
    make_window(2, 8, &[-4, -4]).unwrap()
}

fn ball_strategy() -> impl Strategy<Value = NormBall> {
    (2usize..4)
        .prop_flat_map(|d| {
            let sample = (prop::collection::vec(0.0f64..1.0, d), 1.0f64..1.6);
            (Just(d), prop::collection::vec(sample, 1..4))
        })
        .prop_map(|(d, raw)| {
            let samples = raw
                .into_iter()
                .map(|(mut u, ratio)| {
                    u.sort_by(|a, b| b.total_cmp(a));
                    u[0] += 0.1;
                    let mu = l1f(&u) * ratio;
                    DirectionValue {
                        direction: u,
                        mu,
                        ci: (mu, mu),
                    }
                })
                .collect();
            NormBall::from_directions(d, samples).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_round_trip(side in 2usize..9, ox in -5i64..5, oy in -5i64..5, oz in -5i64..5, v in 0usize..729) {
        let w = make_window(3, side, &[ox, oy, oz]).unwrap();
        let v = v % w.vertex_count();
        prop_assert_eq!(w.index_of(&w.coords_of(v)), Some(v));
    }

    #[test]
    fn sampling_is_deterministic(p in 0.0f64..=1.0, seed in any::<u64>()) {
        let w = window_8();
        let a = sample_configuration(&w, p, seed).unwrap();
        let b = sample_configuration(&w, p, seed).unwrap();
        prop_assert_eq!(a.state_words(), b.state_words());
    }

    #[test]
    fn distance_field_invariants(p in 0.3f64..1.0, seed in any::<u64>()) {
        let w = window_8();
        let conf = sample_configuration(&w, p, seed).unwrap();
        let field = distance_field(&conf, &[0, 0], None).unwrap();
        let labels = label_clusters(&conf);
        let src = w.index_of(&[0, 0]).unwrap();
        for v in 0..w.vertex_count() {
            let x = w.coords_of(v);
            match field.get(v) {
                Some(dist) => {
                    prop_assert!(i64::from(dist) >= x.iter().map(|c| c.abs()).sum::<i64>());
                    prop_assert!(labels.same_cluster(src, v));
                }
                None => prop_assert!(!labels.same_cluster(src, v)),
            }
        }
        for e in 0..w.edge_count() {
            if conf.is_open(e) {
                let (a, b) = w.edge_endpoints(e);
                if let (Some(da), Some(db)) = (field.get(a), field.get(b)) {
                    prop_assert!(da.abs_diff(db) <= 1);
                }
            }
        }
    }

    #[test]
    fn symmetry_and_triangle(p in 0.5f64..1.0, seed in any::<u64>(), pts in prop::collection::vec((-4i64..4, -4i64..4), 3)) {
        let w = window_8();
        let conf = sample_configuration(&w, p, seed).unwrap();
        let (x, y, z) = ([pts[0].0, pts[0].1], [pts[1].0, pts[1].1], [pts[2].0, pts[2].1]);
        let dxy = chemical_distance(&conf, &x, &y).unwrap();
        prop_assert_eq!(dxy, chemical_distance(&conf, &y, &x).unwrap());
        let dyz = chemical_distance(&conf, &y, &z).unwrap();
        let dxz = chemical_distance(&conf, &x, &z).unwrap();
        if let (Some(a), Some(b), Some(c)) = (dxy, dyz, dxz) {
            prop_assert!(c <= a + b);
        }
    }

    #[test]
    fn opening_an_edge_never_increases_distances(p in 0.3f64..0.9, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let w = window_8();
        let conf = sample_configuration(&w, p, seed).unwrap();
        let e = pick.index(w.edge_count());
        let opened = conf.with_edge(e, true);
        let src = w.index_of(&[0, 0]).unwrap();
        let before = distance_field_from(&conf, src, None);
        let after = distance_field_from(&opened, src, None);
        for v in 0..w.vertex_count() {
            prop_assert!(after.distances()[v] <= before.distances()[v]);
        }
    }

    #[test]
    fn wet_regions_are_nested(p in 0.4f64..1.0, seed in any::<u64>(), s in 0.0f64..6.0, gap in 0.0f64..6.0) {
        let w = window_8();
        let conf = sample_configuration(&w, p, seed).unwrap();
        let field = distance_field(&conf, &[0, 0], None).unwrap();
        let small = wet_region(&field, s).unwrap();
        let large = wet_region(&field, s + gap).unwrap();
        prop_assert!(small.iter().all(|v| large.contains(v)));
        prop_assert!(small.iter().all(|&v| field.distances()[v] != UNREACHABLE));
    }

    #[test]
    fn giant_is_strictly_largest(p in 0.0f64..1.0, seed in any::<u64>()) {
        let conf = sample_configuration(&window_8(), p, seed).unwrap();
        let labels = label_clusters(&conf);
        if let Some(g) = labels.giant_root() {
            let size = labels.root_size(g);
            prop_assert!(labels.roots().all(|(r, s)| r == g || s < size));
        } else {
            let max = labels.roots().map(|(_, s)| s).max().unwrap();
            prop_assert!(labels.roots().filter(|&(_, s)| s == max).count() >= 2);
        }
    }

    #[test]
    fn wired_matches_stencil(p in 0.6f64..1.0, seed in any::<u64>()) {
        let w = make_window(2, 6, &[0, 0]).unwrap();
        let conf = sample_configuration(&w, p, seed).unwrap();
        let field = wired_field(&conf).unwrap();
        let comps = unwired_components(&field);
        for v in 0..w.vertex_count() {
            if w.is_boundary(v) {
                prop_assert_eq!(field.get(v), WiredState::Undefined);
                continue;
            }
            let x = w.coords_of(v);
            let inside = |c: &[i64]| c.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1);
            let all_open = (0..w.edge_count()).all(|e| {
                let (a, b) = w.edge_endpoints(e);
                !(inside(&w.coords_of(a)) && inside(&w.coords_of(b))) || conf.is_open(e)
            });
            let expected = if all_open { WiredState::Wired } else { WiredState::Unwired };
            prop_assert_eq!(field.get(v), expected);
            prop_assert_eq!(comps.component_of(v).is_some(), expected == WiredState::Unwired);
        }
    }

    #[test]
    fn signed_permutations_preserve_l1(d in 2usize..4, k in any::<prop::sample::Index>(), x in prop::collection::vec(-10.0f64..10.0, 3)) {
        let group = signed_permutations(d);
        let g: &SignedPermutation = &group[k.index(group.len())];
        let x = &x[..d];
        prop_assert!((l1f(&g.apply(x)) - l1f(x)).abs() < 1e-12);
        let back = g.inverse().apply(&g.apply(x));
        prop_assert!(back.iter().zip(x).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn adapted_basis_sandwich(x in prop::collection::vec(-5.0f64..5.0, 3), y in prop::collection::vec(-5.0f64..5.0, 3), d in 2usize..4) {
        prop_assume!(l1f(&x[..d]) > 1e-3);
        let basis = adapted_basis(&x[..d]).unwrap();
        let ly = l1f(&basis.apply(&y[..d]));
        prop_assert!(basis.conorm() * l1f(&y[..d]) <= ly + 1e-9);
        prop_assert!(ly <= l1f(&x[..d]) * l1f(&y[..d]) + 1e-9);
    }

    #[test]
    fn gauge_is_a_symmetric_norm(ball in ball_strategy(), a in prop::collection::vec(-3.0f64..3.0, 3), b in prop::collection::vec(-3.0f64..3.0, 3), t in 0.1f64..5.0) {
        let d = ball.d();
        let (a, b) = (&a[..d], &b[..d]);
        let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        prop_assert!(ball.gauge(&sum) <= ball.gauge(a) + ball.gauge(b) + 1e-9);
        let scaled: Vec<f64> = a.iter().map(|v| v * t).collect();
        prop_assert!((ball.gauge(&scaled) - t * ball.gauge(a)).abs() <= 1e-9 * (1.0 + t * ball.gauge(a)));
        for g in signed_permutations(d) {
            prop_assert!((ball.gauge(&g.apply(a)) - ball.gauge(a)).abs() <= 1e-9);
        }
        // The samples sit inside the ℓ¹ ball, so the gauge dominates ℓ¹.
        prop_assert!(ball.gauge(a) >= l1f(a) - 1e-9);
    }

    #[test]
    fn support_normal_separates(ball in ball_strategy(), y in prop::collection::vec(-1.0f64..1.0, 3)) {
        let y = &y[..ball.d()];
        prop_assume!(l1f(y) > 1e-3);
        let s = ball.support_normal(y).unwrap();
        let level: f64 = s.normal.iter().zip(&s.contact).map(|(a, b)| a * b).sum();
        for v in ball.vertices() {
            let value: f64 = s.normal.iter().zip(v).map(|(a, b)| a * b).sum();
            prop_assert!(value <= level + 1e-9);
        }
        prop_assert!((ball.gauge(&s.contact) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hausdorff_is_a_pseudometric(ball in ball_strategy(), pa in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..6), pb in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..6), pc in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..6)) {
        let d = ball.d();
        let cut = |s: Vec<Vec<f64>>| s.into_iter().map(|p| p[..d].to_vec()).collect::<Vec<_>>();
        let (a, b, c) = (cut(pa), cut(pb), cut(pc));
        let ab = hausdorff_points(&a, &b, &ball).unwrap();
        prop_assert!((ab - hausdorff_points(&b, &a, &ball).unwrap()).abs() < 1e-12);
        prop_assert!(hausdorff_points(&a, &a, &ball).unwrap().abs() < 1e-12);
        let ac = hausdorff_points(&a, &c, &ball).unwrap();
        let cb = hausdorff_points(&c, &b, &ball).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn noiseless_decay_is_recovered(rate in 0.05f64..1.0, shift in 0.0f64..3.0) {
        let total = 1u64 << 60;
        let points: Vec<DecayPoint> = (0..5)
            .map(|k| {
                let x = shift + k as f64;
                DecayPoint::new(x, ((-rate * x).exp() * total as f64).round() as u64, total)
            })
            .collect();
        let fit = fit_exponential_decay(&points).unwrap();
        prop_assert!((fit.slope - rate).abs() < 1e-6);
    }

    #[test]
    fn all_open_window_is_l1(side in 2usize..10) {
        let w = make_window(2, side, &[0, 0]).unwrap();
        let conf = Configuration::from_fn(&w, |_| true);
        let field = distance_field(&conf, &[0, 0], None).unwrap();
        for v in 0..w.vertex_count() {
            let x = w.coords_of(v);
            prop_assert_eq!(field.get(v), Some((x[0] + x[1]) as u32));
        }
    }
}
