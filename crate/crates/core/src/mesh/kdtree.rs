//! Static 3-d tree for nearest-neighbour queries.

use crate::mesh::Point3;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    // Implicit balanced tree: the median of each range is its node.
    order: Vec<usize>,
}

fn dist_sq(a: &Point3, b: &Point3) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build_range(points, &mut order, 0);
        Self {
            points: points.to_vec(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and distance of the nearest stored point.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(q, 0, self.order.len(), 0, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn search(&self, q: &Point3, lo: usize, hi: usize, depth: usize, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d = dist_sq(q, p);
        if d < best.1 || (d == best.1 && idx < best.0) {
            *best = (idx, d);
        }
        let axis = depth % 3;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if delta * delta <= best.1 {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build_range(points: &[Point3], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let (left, right) = order.split_at_mut(mid);
    build_range(points, left, depth + 1);
    build_range(points, &mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut pt = || [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let cloud: Vec<Point3> = (0..200).map(|_| pt()).collect();
        let tree = KdTree::build(&cloud);
        for _ in 0..200 {
            let q = pt();
            let brute = cloud.iter().map(|p| dist_sq(p, &q)).fold(f64::INFINITY, f64::min).sqrt();
            let (_, d) = tree.nearest(&q).unwrap();
            assert!((d - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicates_and_empty() {
        assert!(KdTree::build(&[]).nearest(&[0.0; 3]).is_none());
        let tree = KdTree::build(&[[1.0, 1.0, 1.0]; 5]);
        assert_eq!(tree.nearest(&[1.0, 1.0, 1.0]).unwrap().1, 0.0);
    }
}
