use crate::data::Pose;

use super::EvalError;

/// Translation and rotation error between two poses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub translation_m: f64,
    pub rotation_deg: f64,
}

fn check_unit(pose: &Pose) -> Result<(), EvalError> {
    let norm = pose.quaternion_norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(EvalError::NonUnitQuaternion { norm });
    }
    Ok(())
}

/// Euclidean position distance plus the geodesic rotation angle
/// 2*acos(|<q1, q2>|) in degrees.
pub fn pose_error(estimated: &Pose, ground_truth: &Pose) -> Result<PoseError, EvalError> {
    check_unit(estimated)?;
    check_unit(ground_truth)?;
    let translation_m = estimated.position_distance(ground_truth);
    let dot = (estimated.qw * ground_truth.qw
        + estimated.qx * ground_truth.qx
        + estimated.qy * ground_truth.qy
        + estimated.qz * ground_truth.qz)
        .abs()
        .min(1.0);
    let rotation_deg = 2.0 * dot.acos() * 180.0 / std::f64::consts::PI;
    Ok(PoseError {
        translation_m,
        rotation_deg,
    })
}
