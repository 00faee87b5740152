use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

/// `√Σ‖v_i - w_i‖²` over corresponding vertices.
pub fn rms_error(evolved: &TriangleMesh, ground_truth: &TriangleMesh) -> Result<f64> {
    if evolved.vertex_count() != ground_truth.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "vertex counts differ: {} vs {}",
            evolved.vertex_count(),
            ground_truth.vertex_count()
        )));
    }
    Ok(evolved.vertices.iter().zip(&ground_truth.vertices).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt())
}

/// [`rms_error`] divided by `√n`.
pub fn rms_error_per_vertex(evolved: &TriangleMesh, ground_truth: &TriangleMesh) -> Result<f64> {
    Ok(rms_error(evolved, ground_truth)? / (evolved.vertex_count().max(1) as f64).sqrt())
}

/// Area-weighted centroid of the surface.
pub fn surface_centroid(mesh: &TriangleMesh) -> Vec3 {
    let mut sum = Vec3::zeros();
    let mut area = 0.0;
    for f in 0..mesh.face_count() {
        let [a, b, c] = mesh.triangle(f);
        let w = mesh.face_area(f);
        sum += (a + b + c) * (w / 3.0);
        area += w;
    }
    if area > 0.0 {
        sum / area
    } else {
        Vec3::zeros()
    }
}

/// Standard deviation over mean of vertex distances to the surface centroid;
/// zero for a perfect sphere.
pub fn sphericity(mesh: &TriangleMesh) -> f64 {
    let c = surface_centroid(mesh);
    let radii: Vec<f64> = mesh.vertices.iter().map(|v| (v - c).norm()).collect();
    let n = radii.len().max(1) as f64;
    let mean = radii.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}
