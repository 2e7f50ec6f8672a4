//! Composite-rigid-body inertia matrix, written independently of the
//! Newton–Euler recursion so the two can check each other.
//!
//! Spatial quantities are 6-vectors `[angular; linear]` expressed at the base
//! origin. The composite inertia of links `i..n` projected onto the motion
//! axes of joints `i` and `j ≤ i` gives `M[i][j]`.

use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3, Vector6};

use super::ChainGeometry;
use crate::model::ManipulatorModel;

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Spatial inertia of a body about the base origin.
fn spatial_inertia(mass: f64, com: &Vector3<f64>, inertia: &Matrix3<f64>) -> Matrix6<f64> {
    let c = skew(com);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(inertia + mass * c * c.transpose()));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(mass * c));
    out.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(mass * c.transpose()));
    out.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Matrix3::identity() * mass));
    out
}

pub fn inertia_matrix_crba(model: &ManipulatorModel, q: &[f64]) -> DMatrix<f64> {
    let n = model.n();
    let geo = ChainGeometry::new(model, q);
    let axes: Vec<Vector6<f64>> = (0..n)
        .map(|i| {
            let z = geo.axis[i];
            let lin = geo.joint_origin[i].cross(&z);
            Vector6::new(z.x, z.y, z.z, lin.x, lin.y, lin.z)
        })
        .collect();

    let mut composite = Matrix6::zeros();
    let mut m = DMatrix::zeros(n, n);
    for i in (0..n).rev() {
        composite += spatial_inertia(model.joints[i].link_mass, &geo.com[i], &geo.inertia[i]);
        let force = composite * axes[i];
        for j in 0..=i {
            let v = axes[j].dot(&force);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] += model.joints[i].reflected_inertia();
    }
    m
}
