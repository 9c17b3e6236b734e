//! Planar convex geometry for rate regions.
//!
//! Rate pairs are plain `(f64, f64)` points. Regions are convex polygons
//! stored as counterclockwise vertex lists starting from the
//! lexicographically smallest vertex, with collinear points pruned;
//! degenerate regions (a segment or a single point) use the same
//! representation with two or one vertices.
//!
//! Distances between regions are measured in the sup norm
//! (`max(|dr1|, |dr2|)`), so a tolerance `tol` means "each rate coordinate
//! may be off by at most `tol`".

/// A rate pair `(r1, r2)`.
pub type Point = (f64, f64);

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by Andrew's monotone chain.
///
/// Returns the hull counterclockwise starting at the lexicographically
/// smallest vertex. Collinear boundary points are dropped; duplicate
/// inputs are harmless. An empty input yields an empty hull.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    // Lower chain, then upper chain over the reversed order.
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop(); // chain endpoint repeats as the next chain's start
    }
    if hull.is_empty() {
        // All points collinear: the chains collapsed; keep the extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

/// True when `p` lies inside or on the convex polygon (counterclockwise
/// vertex list). Degenerate polygons are handled as points or segments.
pub fn point_in_hull(hull: &[Point], p: Point) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => linf_point_to_segment(p, hull[0], hull[1]) == 0.0,
        _ => {
            for i in 0..hull.len() {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len()];
                if cross(a, b, p) < 0.0 {
                    return false;
                }
            }
            true
        }
    }
}

/// Sup-norm distance from `p` to the segment `ab`.
///
/// The objective `max(|px - qx(t)|, |py - qy(t)|)` is convex piecewise
/// linear in the segment parameter, so the minimum sits at an endpoint or
/// at one of the finitely many breakpoints; all are checked directly.
fn linf_point_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let dx = b.0 - a.0;
    let dy = b.1 - a.1;
    let fx = |t: f64| p.0 - (a.0 + t * dx);
    let fy = |t: f64| p.1 - (a.1 + t * dy);
    let mut candidates = vec![0.0f64, 1.0];
    // Zeros of each coordinate gap.
    if dx != 0.0 {
        candidates.push((p.0 - a.0) / dx);
    }
    if dy != 0.0 {
        candidates.push((p.1 - a.1) / dy);
    }
    // Crossings |gap_x| = |gap_y| in both sign combinations:
    // fx - fy = 0 and fx + fy = 0 are linear in t.
    let d_minus = -dx + dy;
    if d_minus != 0.0 {
        candidates.push(((p.0 - a.0) - (p.1 - a.1)) / (dx - dy));
    }
    let d_plus = dx + dy;
    if d_plus != 0.0 {
        candidates.push(((p.0 - a.0) + (p.1 - a.1)) / d_plus);
    }
    let mut best = f64::INFINITY;
    for t in candidates {
        let t = t.clamp(0.0, 1.0);
        let v = fx(t).abs().max(fy(t).abs());
        if v < best {
            best = v;
        }
    }
    best
}

/// Sup-norm distance from a point to a convex polygon (zero inside).
pub fn linf_distance_to_hull(hull: &[Point], p: Point) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => (p.0 - hull[0].0).abs().max((p.1 - hull[0].1).abs()),
        2 => linf_point_to_segment(p, hull[0], hull[1]),
        _ => {
            if point_in_hull(hull, p) {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for i in 0..hull.len() {
                let d = linf_point_to_segment(p, hull[i], hull[(i + 1) % hull.len()]);
                if d < best {
                    best = d;
                }
            }
            best
        }
    }
}

/// Euclidean closest point of a convex polygon to `p` (used to report a
/// separating direction when an inclusion check fails).
pub fn closest_point_on_hull(hull: &[Point], p: Point) -> Point {
    match hull.len() {
        0 => (f64::NAN, f64::NAN),
        1 => hull[0],
        _ => {
            if hull.len() > 2 && point_in_hull(hull, p) {
                return p;
            }
            let mut best = (f64::INFINITY, hull[0]);
            for i in 0..hull.len() {
                let a = hull[i];
                let b = hull[(i + 1) % hull.len().max(2)];
                let dx = b.0 - a.0;
                let dy = b.1 - a.1;
                let len2 = dx * dx + dy * dy;
                let t = if len2 == 0.0 {
                    0.0
                } else {
                    (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
                };
                let q = (a.0 + t * dx, a.1 + t * dy);
                let d2 = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
                if d2 < best.0 {
                    best = (d2, q);
                }
            }
            best.1
        }
    }
}

/// True when `p` lies within sup-norm `tol` of the polygon.
pub fn hull_contains_point(hull: &[Point], p: Point, tol: f64) -> bool {
    linf_distance_to_hull(hull, p) <= tol
}

/// Whether every point of the `inner` polygon lies within sup-norm `tol`
/// of the `outer` polygon; on failure also reports the worst inner vertex
/// and its distance. For convex polygons the maximum distance over the
/// inner region is attained at a vertex, so vertices suffice.
pub fn hull_contained_in(
    inner: &[Point],
    outer: &[Point],
    tol: f64,
) -> (bool, Option<(Point, f64)>) {
    let mut worst: Option<(Point, f64)> = None;
    for &v in inner {
        let d = linf_distance_to_hull(outer, v);
        if worst.map_or(true, |(_, w)| d > w) {
            worst = Some((v, d));
        }
    }
    match worst {
        None => (true, None), // empty inner region is contained in anything
        Some((_, d)) => (d <= tol, worst),
    }
}

/// Symmetric Hausdorff distance between two convex polygons in the sup
/// norm. For convex sets the directed distance is attained at a vertex.
pub fn hausdorff_distance(a: &[Point], b: &[Point]) -> f64 {
    let directed = |from: &[Point], to: &[Point]| {
        from.iter()
            .map(|&v| linf_distance_to_hull(to, v))
            .fold(0.0_f64, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// The polygon `{0 <= r1 <= a, 0 <= r2 <= b, r1 + r2 <= c}` as a
/// counterclockwise hull. Negative inputs are treated as zero. The result
/// may be a pentagon, quadrilateral, triangle, segment or single point.
pub fn clip_pentagon(a: f64, b: f64, c: f64) -> Vec<Point> {
    let a = a.max(0.0);
    let b = b.max(0.0);
    let c = c.max(0.0);
    // Intersect every pair of the five bounding lines and keep feasible
    // points; the hull of those is the region.
    let lines: [(f64, f64, f64); 5] = [
        (1.0, 0.0, 0.0), // r1 = 0
        (0.0, 1.0, 0.0), // r2 = 0
        (1.0, 0.0, a),   // r1 = a
        (0.0, 1.0, b),   // r2 = b
        (1.0, 1.0, c),   // r1 + r2 = c
    ];
    let mut pts = Vec::new();
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let (a1, b1, c1) = lines[i];
            let (a2, b2, c2) = lines[j];
            let det = a1 * b2 - a2 * b1;
            if det.abs() < 1e-14 {
                continue;
            }
            let x = (c1 * b2 - c2 * b1) / det;
            let y = (a1 * c2 - a2 * c1) / det;
            let feasible = x >= -1e-12
                && y >= -1e-12
                && x <= a + 1e-12
                && y <= b + 1e-12
                && x + y <= c + 1e-12;
            if feasible {
                pts.push((x.max(0.0), y.max(0.0)));
            }
        }
    }
    convex_hull(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_points_eq(got: &[Point], want: &[Point]) {
        assert_eq!(
            got.len(),
            want.len(),
            "vertex count: got {got:?}, want {want:?}"
        );
        for (g, w) in got.iter().zip(want) {
            assert!(
                (g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-12,
                "vertex mismatch: got {got:?}, want {want:?}"
            );
        }
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (0.5, 0.5),
            (0.25, 0.75),
            (1.0, 0.0), // duplicate
        ];
        let hull = convex_hull(&pts);
        assert_points_eq(&hull, &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
    }

    #[test]
    fn hull_prunes_collinear_boundary_points() {
        let pts = vec![(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let hull = convex_hull(&pts);
        assert_points_eq(&hull, &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
    }

    #[test]
    fn degenerate_hulls_are_points_and_segments() {
        assert!(convex_hull(&[]).is_empty());
        assert_points_eq(&convex_hull(&[(2.0, 3.0), (2.0, 3.0)]), &[(2.0, 3.0)]);
        let seg = convex_hull(&[(0.0, 0.0), (2.0, 2.0), (1.0, 1.0)]);
        assert_points_eq(&seg, &[(0.0, 0.0), (2.0, 2.0)]);
    }

    #[test]
    fn pentagon_with_active_sum_constraint() {
        // a = b = 1, c = 1.5 cuts the unit square's far corner.
        let hull = clip_pentagon(1.0, 1.0, 1.5);
        assert_points_eq(
            &hull,
            &[(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 1.0)],
        );
    }

    #[test]
    fn pentagon_with_zero_height_is_a_segment() {
        let hull = clip_pentagon(1.0, 0.0, 0.5);
        assert_points_eq(&hull, &[(0.0, 0.0), (0.5, 0.0)]);
    }

    #[test]
    fn pentagon_with_slack_sum_is_a_rectangle() {
        let hull = clip_pentagon(0.25, 0.75, 10.0);
        assert_points_eq(&hull, &[(0.0, 0.0), (0.25, 0.0), (0.25, 0.75), (0.0, 0.75)]);
    }

    #[test]
    fn pentagon_collapses_to_origin_when_sum_is_zero() {
        assert_points_eq(&clip_pentagon(1.0, 1.0, 0.0), &[(0.0, 0.0)]);
    }

    #[test]
    fn containment_respects_sup_norm_tolerance() {
        let square = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert!(hull_contains_point(&square, (0.5, 0.5), 0.0));
        assert!(hull_contains_point(&square, (1.0, 1.0), 0.0));
        assert!(hull_contains_point(&square, (1.05, 0.5), 0.1));
        assert!(!hull_contains_point(&square, (1.05, 0.5), 0.01));
        // Sup norm: the corner overhang counts the larger coordinate gap.
        assert!(hull_contains_point(&square, (1.08, 1.09), 0.1));
        assert!(!hull_contains_point(&square, (1.08, 1.11), 0.1));
    }

    #[test]
    fn segment_distance_is_exact_in_sup_norm() {
        // Point (0.5, 0.3) above the x-axis segment [0,1]: distance 0.3.
        let d = linf_point_to_segment((0.5, 0.3), (0.0, 0.0), (1.0, 0.0));
        assert!((d - 0.3).abs() < 1e-12);
        // Diagonal segment y = x: point (0.6, 0.0) reaches it at the
        // breakpoint where both gaps equal 0.3.
        let d = linf_point_to_segment((0.6, 0.0), (0.0, 0.0), (1.0, 1.0));
        assert!((d - 0.3).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn hausdorff_of_shifted_squares_is_the_shift() {
        let sq = |ox: f64, oy: f64| {
            convex_hull(&[
                (ox, oy),
                (ox + 1.0, oy),
                (ox + 1.0, oy + 1.0),
                (ox, oy + 1.0),
            ])
        };
        let a = sq(0.0, 0.0);
        let b = sq(0.3, 0.1);
        let d = hausdorff_distance(&a, &b);
        assert!((d - 0.3).abs() < 1e-12, "got {d}");
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
    }

    #[test]
    fn hausdorff_square_to_center_point() {
        let square = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let point = vec![(0.5, 0.5)];
        let d = hausdorff_distance(&square, &point);
        assert!((d - 0.5).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn inclusion_reports_worst_vertex() {
        let small = clip_pentagon(0.5, 0.5, 1.0);
        let big = clip_pentagon(1.0, 1.0, 2.0);
        let (ok, _) = hull_contained_in(&small, &big, 0.0);
        assert!(ok, "smaller pentagon must sit inside the bigger one");
        let (ok, worst) = hull_contained_in(&big, &small, 1e-9);
        assert!(!ok);
        let (v, d) = worst.unwrap();
        assert!((d - 0.5).abs() < 1e-12, "worst distance {d}");
        assert!(v == (1.0, 1.0) || (v.0 - 1.0).abs() < 1e-12 || (v.1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closest_point_gives_outward_direction() {
        let square = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let q = closest_point_on_hull(&square, (2.0, 0.5));
        assert!((q.0 - 1.0).abs() < 1e-12 && (q.1 - 0.5).abs() < 1e-12);
        let inside = closest_point_on_hull(&square, (0.25, 0.25));
        assert_eq!(inside, (0.25, 0.25));
    }

    proptest! {
        #[test]
        fn hull_contains_every_input_point(
            pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..40)
        ) {
            let hull = convex_hull(&pts);
            for &p in &pts {
                prop_assert!(
                    linf_distance_to_hull(&hull, p) < 1e-9,
                    "point {p:?} escapes its own hull {hull:?}"
                );
            }
        }

        #[test]
        fn hull_is_idempotent(
            pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..40)
        ) {
            let hull = convex_hull(&pts);
            let again = convex_hull(&hull);
            prop_assert_eq!(hull, again);
        }

        #[test]
        fn hull_vertices_come_from_the_input(
            pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..40)
        ) {
            let hull = convex_hull(&pts);
            for v in &hull {
                prop_assert!(pts.contains(v));
            }
        }

        #[test]
        fn pentagon_vertices_satisfy_their_constraints(
            a in 0.0..2.0f64, b in 0.0..2.0f64, c in 0.0..3.0f64
        ) {
            let hull = clip_pentagon(a, b, c);
            prop_assert!(!hull.is_empty(), "pentagon can never be empty: origin is feasible");
            for &(x, y) in &hull {
                prop_assert!(x >= 0.0 && y >= 0.0);
                prop_assert!(x <= a + 1e-9 && y <= b + 1e-9);
                prop_assert!(x + y <= c + 1e-9);
            }
        }

        #[test]
        fn hausdorff_is_symmetric_and_zero_on_self(
            pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..20)
        ) {
            let hull = convex_hull(&pts);
            prop_assert_eq!(hausdorff_distance(&hull, &hull), 0.0);
            let shifted: Vec<Point> = hull.iter().map(|&(x, y)| (x + 0.25, y)).collect();
            let d1 = hausdorff_distance(&hull, &shifted);
            let d2 = hausdorff_distance(&shifted, &hull);
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!((d1 - 0.25).abs() < 1e-9, "shift by 0.25 gives Hausdorff {d1}");
        }
    }
}
