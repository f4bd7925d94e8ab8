use super::{Cell, Point};

/// Index of the cell whose centre is nearest `p`; equidistant cells resolve
/// to the lowest id.
///
/// # Panics
/// If `cells` is empty.
pub fn hard_handoff(p: &Point, cells: &[Cell]) -> usize {
    let mut best = cells.first().expect("at least one cell").id;
    let mut best_d = p.dist(&cells[0].center);
    for c in &cells[1..] {
        let d = p.dist(&c.center);
        if d < best_d || (d == best_d && c.id < best) {
            best = c.id;
            best_d = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells() -> Vec<Cell> {
        [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Cell { id, center: Point::new(x, y), radius: 6.0 })
            .collect()
    }

    #[test]
    fn nearest_and_ties() {
        let c = cells();
        assert_eq!(hard_handoff(&Point::new(10.0, 0.0), &c), 1);
        assert_eq!(hard_handoff(&Point::new(5.0, 0.0), &c), 0);
        assert_eq!(hard_handoff(&Point::new(5.0, 5.0), &c), 0);
        assert_eq!(hard_handoff(&Point::new(5.1, 4.0), &c), 1);
    }
}
