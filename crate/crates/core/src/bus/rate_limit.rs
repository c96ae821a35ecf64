use super::BusError;
use crate::kinematics::JointState;

/// Limits each joint of `next` to move at most `speed_cap * dt` from
/// `prev`. Compliant joints pass through untouched; a violating joint keeps
/// its direction and stops exactly at the cap. Velocities are clamped to
/// `±speed_cap`.
pub fn rate_limit_joint_cmd(
    prev: &JointState,
    next: &JointState,
    speed_cap: f64,
    dt: f64,
) -> Result<JointState, BusError> {
    if !(dt > 0.0) {
        return Err(BusError::NonPositiveDt(dt));
    }
    if prev.positions.len() != next.positions.len() {
        return Err(BusError::DimensionMismatch(prev.positions.len(), next.positions.len()));
    }
    let max_step = speed_cap * dt;
    let positions = prev
        .positions
        .iter()
        .zip(&next.positions)
        .map(|(&p, &n)| {
            let d = n - p;
            if d.abs() <= max_step {
                n
            } else {
                p + max_step.copysign(d)
            }
        })
        .collect();
    let velocities = next
        .velocities
        .iter()
        .map(|v| v.clamp(-speed_cap, speed_cap))
        .collect();
    Ok(JointState {
        positions,
        velocities,
        timestamp: next.timestamp,
    })
}
