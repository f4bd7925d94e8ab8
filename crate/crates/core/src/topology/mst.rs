use super::Point;

/// Minimum spanning tree of the complete Euclidean graph (Prim, O(n²)).
/// Edges are returned as `(parent, child)` in insertion order; ties go to
/// the lowest index.
pub fn build_mst(points: &[Point]) -> Vec<(usize, usize)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    in_tree[0] = true;
    for j in 1..n {
        best[j] = points[0].dist(&points[j]);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((parent[next], next));
        for j in 0..n {
            if !in_tree[j] {
                let d = points[next].dist(&points[j]);
                if d < best[j] {
                    best[j] = d;
                    parent[j] = next;
                }
            }
        }
    }
    edges
}

pub fn tree_weight(points: &[Point], edges: &[(usize, usize)]) -> f64 {
    edges.iter().map(|&(a, b)| points[a].dist(&points[b])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_sizes() {
        assert!(build_mst(&[]).is_empty());
        assert!(build_mst(&[Point::new(1.0, 1.0)]).is_empty());
        let e = build_mst(&[Point::new(0.0, 0.0), Point::new(3.0, 4.0)]);
        assert_eq!(e, vec![(0, 1)]);
    }

    #[test]
    fn collinear_chain() {
        let pts: Vec<Point> = [3.0, 0.0, 4.0, 1.0, 2.0]
            .iter()
            .map(|&x| Point::new(x * 10.0, 5.0))
            .collect();
        let e = build_mst(&pts);
        assert_eq!(e.len(), 4);
        assert_eq!(tree_weight(&pts, &e), 40.0);
        for (a, b) in e {
            assert_eq!(pts[a].dist(&pts[b]), 10.0);
        }
    }
}
