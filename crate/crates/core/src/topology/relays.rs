use super::Point;

/// Relay positions for a spanning-tree edge with communication range `r`:
/// one at the midpoint of a short edge, two at the thirds of a long one,
/// none for a degenerate edge.
pub fn place_relays(a: Point, b: Point, r: f64) -> Vec<Point> {
    let len = a.dist(&b);
    if len == 0.0 {
        Vec::new()
    } else if len < r {
        vec![a.lerp(&b, 0.5)]
    } else {
        vec![a.lerp(&b, 1.0 / 3.0), a.lerp(&b, 2.0 / 3.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_positions() {
        let a = Point::new(0.0, 0.0);
        assert!(place_relays(a, a, 10.0).is_empty());
        assert_eq!(place_relays(a, Point::new(5.0, 0.0), 10.0), vec![Point::new(2.5, 0.0)]);
        let two = place_relays(a, Point::new(0.0, 30.0), 15.0);
        assert_eq!(two.len(), 2);
        assert!((two[0].y - 10.0).abs() < 1e-12 && (two[1].y - 20.0).abs() < 1e-12);
        assert_eq!(place_relays(a, Point::new(10.0, 0.0), 10.0).len(), 2);
    }
}
