use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use tdvertex::inclusion::{build_inclusion, parse_shape_id, shape_id, GAP_MIN_DEG};
use tdvertex::{generate_theta, DEFAULT_WIDTH};

/// Sorted angle lists whose cyclic gaps all exceed the admissible minimum.
fn angle_set() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=4, 0.0f64..360.0, prop::collection::vec(0.0f64..1.0, 4)).prop_filter_map("gaps too small", |(n, start, w)| {
        let total: f64 = w[..n].iter().map(|v| v + 0.2).sum();
        let gaps: Vec<f64> = w[..n].iter().map(|v| 360.0 * (v + 0.2) / total).collect();
        if gaps.iter().any(|g| *g < GAP_MIN_DEG + 1.0 || *g > 179.0) {
            return None;
        }
        let mut a = Vec::with_capacity(n);
        let mut t = start;
        for g in &gaps {
            a.push((t.rem_euclid(360.0) * 1e6).round() / 1e6 % 360.0);
            t += g;
        }
        a.sort_by(f64::total_cmp);
        Some(a)
    })
}

#[test]
fn monte_carlo_moments_agree() {
    let mut rng = StdRng::seed_from_u64(7);
    for angles in [vec![0.0, 90.0], vec![0.0, 45.0, 270.0], vec![30.0, 100.0, 200.0, 300.0], vec![0.0, 225.0]] {
        let s = build_inclusion(&angles, 0.2).unwrap();
        let m = s.moments().unwrap();
        let (lo, hi) = s.polygon.bbox();
        let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let n = 400_000;
        let (mut hits, mut sx, mut sy) = (0usize, 0.0, 0.0);
        for _ in 0..n {
            let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
            if s.polygon.contains(p) {
                hits += 1;
                sx += p[0];
                sy += p[1];
            }
        }
        let area = box_area * hits as f64 / n as f64;
        let c = [sx / hits as f64, sy / hits as f64];
        assert!((area - m.area).abs() < 0.02 * m.area, "{}: {area} vs {}", s.id, m.area);
        assert!((c[0] - m.centroid[0]).abs() < 5e-3 && (c[1] - m.centroid[1]).abs() < 5e-3, "{}: {c:?} vs {:?}", s.id, m.centroid);
    }
}

#[test]
fn theta_has_all_pairs_and_triples() {
    let t = generate_theta(8, &[2, 3], DEFAULT_WIDTH).unwrap();
    assert_eq!(t.len(), 28 + 56);
    let mut ids: Vec<&str> = t.shapes.iter().map(|s| s.id.as_str()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 84);
    assert!(ids.contains(&"w[0,90]") && ids.contains(&"w[45,90,180]"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shapes_are_simple_and_contain_the_origin(a in angle_set()) {
        let s = build_inclusion(&a, DEFAULT_WIDTH).unwrap();
        prop_assert!(s.polygon.is_simple());
        prop_assert!(s.polygon.contains([0.0, 0.0]));
        prop_assert!(s.polygon.signed_area() > 0.0);
        prop_assert_eq!(parse_shape_id(&shape_id(&a)).unwrap(), a);
    }

    #[test]
    fn rotating_the_rays_rotates_the_moments(a in angle_set(), k in 1usize..8) {
        let phi = 45.0 * k as f64;
        let base = build_inclusion(&a, DEFAULT_WIDTH).unwrap();
        let mut b: Vec<f64> = a.iter().map(|x| (x + phi) % 360.0).collect();
        b.sort_by(f64::total_cmp);
        let rot = build_inclusion(&b, DEFAULT_WIDTH).unwrap();
        let m0 = base.moments().unwrap();
        let m1 = rot.moments().unwrap();
        let expected = base.polygon.rotate(phi).moments().unwrap();
        prop_assert!((m0.area - m1.area).abs() < 1e-12);
        prop_assert!((m1.centroid[0] - expected.centroid[0]).abs() < 1e-12);
        prop_assert!((m1.centroid[1] - expected.centroid[1]).abs() < 1e-12);
    }

    #[test]
    fn area_grows_linearly_with_width_away_from_the_joint(a in angle_set()) {
        // each arm contributes about length * width
        let s = build_inclusion(&a, 0.02).unwrap();
        let area = s.moments().unwrap().area;
        let approx = 0.02 * a.len() as f64;
        prop_assert!((area - approx).abs() < 0.02 * 0.02 * 20.0, "{} vs {}", area, approx);
    }
}
