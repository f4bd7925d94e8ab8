use std::collections::{HashMap, VecDeque};

use super::Point;

/// Uniform bucket grid for fixed-radius neighbor queries.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGrid {
    pub fn new(points: &[Point], cell: f64) -> Self {
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key_of(cell, p)).or_default().push(i);
        }
        Self { cell, buckets }
    }

    fn key_of(cell: f64, p: &Point) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Indices of points within `r` of `p` (inclusive), ascending.
    pub fn within(&self, points: &[Point], p: &Point, r: f64) -> Vec<usize> {
        let reach = (r / self.cell).ceil() as i64;
        let (cx, cy) = Self::key_of(self.cell, p);
        let mut out = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(b) = self.buckets.get(&(cx + dx, cy + dy)) {
                    out.extend(b.iter().copied().filter(|&j| points[j].dist(p) <= r));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Connectivity {
    pub connected: bool,
    pub components: usize,
}

/// Connectivity of the disk graph of radius `radius` over `points`.
pub fn check_connectivity(points: &[Point], radius: f64) -> Connectivity {
    let grid = SpatialGrid::new(points, radius);
    let mut seen = vec![false; points.len()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..points.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in grid.within(points, &points[i], radius) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Connectivity { connected: components <= 1, components }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let one = [Point::new(1.0, 1.0)];
        assert_eq!(check_connectivity(&one, 5.0), Connectivity { connected: true, components: 1 });
        let two = [Point::new(0.0, 0.0), Point::new(15.0, 0.0)];
        assert_eq!(check_connectivity(&two, 5.0), Connectivity { connected: false, components: 2 });
        assert!(check_connectivity(&two, 15.0).connected);
    }

    #[test]
    fn grid_matches_scan() {
        let pts: Vec<Point> = (0..40)
            .map(|i| Point::new((i * 37 % 101) as f64, (i * 53 % 89) as f64))
            .collect();
        let grid = SpatialGrid::new(&pts, 12.0);
        for p in &pts {
            let scan: Vec<usize> = (0..pts.len()).filter(|&j| pts[j].dist(p) <= 20.0).collect();
            assert_eq!(grid.within(&pts, p, 20.0), scan);
        }
    }
}
