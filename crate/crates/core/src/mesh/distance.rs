//! Point-cloud surface distances.

use rayon::prelude::*;

use crate::mesh::{KdTree, Point3};
use crate::{Error, Result};

/// Chamfer, Hausdorff and 95th-percentile Hausdorff distances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SurfaceDistances {
    pub chamfer: f64,
    pub hausdorff: f64,
    pub hd95: f64,
}

/// Distance from every point of `from` to its nearest point in `to`.
pub fn directed_distances(from: &[Point3], to: &[Point3]) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let tree = KdTree::build(to);
    Ok(from.par_iter().map(|p| tree.nearest(p).unwrap().1).collect())
}

/// Linear-interpolated quantile of unsorted values, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn surface_distances(a: &[Point3], b: &[Point3]) -> Result<SurfaceDistances> {
    let ab = directed_distances(a, b)?;
    let ba = directed_distances(b, a)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let mut pooled = ab.clone();
    pooled.extend_from_slice(&ba);
    Ok(SurfaceDistances {
        chamfer: 0.5 * (mean(&ab) + mean(&ba)),
        hausdorff: max(&ab).max(max(&ba)),
        hd95: quantile(&pooled, 0.95),
    })
}

pub fn chamfer(a: &[Point3], b: &[Point3]) -> Result<f64> {
    Ok(surface_distances(a, b)?.chamfer)
}

pub fn hausdorff(a: &[Point3], b: &[Point3]) -> Result<f64> {
    Ok(surface_distances(a, b)?.hausdorff)
}

pub fn hd95(a: &[Point3], b: &[Point3]) -> Result<f64> {
    Ok(surface_distances(a, b)?.hd95)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_clouds() {
        let a = vec![[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]];
        let d = surface_distances(&a, &a).unwrap();
        assert_eq!((d.chamfer, d.hausdorff, d.hd95), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_pair() {
        let d = surface_distances(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!((d.chamfer, d.hausdorff, d.hd95), (1.0, 1.0, 1.0));
    }

    #[test]
    fn outlier_moves_hausdorff_not_hd95() {
        let clean: Vec<Point3> = (0..100).map(|i| [i as f64, 0.0, 0.0]).collect();
        let mut noisy = clean.clone();
        noisy.push([50.0, 10.0, 0.0]);
        let d = surface_distances(&noisy, &clean).unwrap();
        assert_eq!(d.hausdorff, 10.0);
        assert!(d.hd95 < 10.0);
    }

    #[test]
    fn empty_cloud() {
        assert!(matches!(chamfer(&[], &[[0.0; 3]]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[7.0], 0.95), 7.0);
    }

    fn cloud() -> impl Strategy<Value = Vec<Point3>> {
        proptest::collection::vec(proptest::array::uniform3(-5.0f64..5.0), 1..40)
    }

    proptest! {
        #[test]
        fn symmetric_and_ordered(a in cloud(), b in cloud()) {
            let d = surface_distances(&a, &b).unwrap();
            let e = surface_distances(&b, &a).unwrap();
            prop_assert!((d.chamfer - e.chamfer).abs() < 1e-12);
            prop_assert_eq!(d.hausdorff, e.hausdorff);
            prop_assert!((d.hd95 - e.hd95).abs() < 1e-12);
            prop_assert!(d.hd95 <= d.hausdorff + 1e-12);
            prop_assert!(d.chamfer <= d.hausdorff + 1e-12);
        }

        #[test]
        fn translation_invariant(a in cloud(), b in cloud(), shift in proptest::array::uniform3(-3.0f64..3.0)) {
            let mv = |c: &[Point3]| c.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect::<Vec<_>>();
            let d = surface_distances(&a, &b).unwrap();
            let e = surface_distances(&mv(&a), &mv(&b)).unwrap();
            prop_assert!((d.chamfer - e.chamfer).abs() < 1e-9);
            prop_assert!((d.hausdorff - e.hausdorff).abs() < 1e-9);
            prop_assert!((d.hd95 - e.hd95).abs() < 1e-9);
        }
    }
}
