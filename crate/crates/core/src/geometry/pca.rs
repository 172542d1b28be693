use super::{GeometryError, Point3, Vec3};
use nalgebra::{Matrix3, SymmetricEigen};

/// Principal axis of a point set: unit eigenvector of the covariance matrix
/// with the largest eigenvalue.
///
/// The sign is fixed so that the component of largest magnitude is positive
/// (the first such index wins a tie). Fewer than two distinct points yield
/// `DegenerateInput`.
pub fn pca_principal_axis(points: &[Point3]) -> Result<Vec3, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::DegenerateInput(format!(
            "PCA needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    if cov.amax() <= 1e-24 {
        return Err(GeometryError::DegenerateInput(
            "PCA input points are all coincident".into(),
        ));
    }
    let eig = SymmetricEigen::new(cov);
    let mut best = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let mut axis: Vec3 = eig.eigenvectors.column(best).into_owned().normalize();
    let mut lead = 0;
    for i in 1..3 {
        if axis[i].abs() > axis[lead].abs() + 1e-12 {
            lead = i;
        }
    }
    if axis[lead] < 0.0 {
        axis = -axis;
    }
    Ok(axis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_along_x() {
        let pts: Vec<Point3> = (0..20)
            .map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0))
            .collect();
        let a = pca_principal_axis(&pts).unwrap();
        assert!((a - Vec3::x()).norm() < 1e-9);
    }

    #[test]
    fn sign_follows_dominant_component() {
        let pts: Vec<Point3> = (0..20)
            .map(|i| {
                let t = i as f64;
                Point3::new(-t, 0.3 * t, 0.0)
            })
            .collect();
        let a = pca_principal_axis(&pts).unwrap();
        assert!(a.x > 0.0);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(pca_principal_axis(&[Point3::origin()]).is_err());
        assert!(pca_principal_axis(&[Point3::origin(), Point3::origin()]).is_err());
    }

    proptest! {
        #[test]
        fn axis_is_unit_and_sign_canonical(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..40)
        ) {
            let pts: Vec<Point3> = pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
            let a = pca_principal_axis(&pts).unwrap();
            prop_assert!((a.norm() - 1.0).abs() < 1e-9);
            let m = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lead = a.iter().find(|v| v.abs() >= m - 1e-12).unwrap();
            prop_assert!(*lead > 0.0);
        }
    }
}
