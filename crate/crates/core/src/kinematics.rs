//! Constant-velocity Kalman filter for 2-D player positions.
//!
//! State is `(x, y, vx, vy)`; process noise follows the discrete Wiener
//! process acceleration model, with `dt` taken from the actual sample
//! timestamps. Only positions are measured.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{TagId, TrackPoint, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanParams {
    /// Variance of unmodeled acceleration, m²/s⁴.
    pub process_noise_accel: f64,
    /// Position measurement variance, m².
    pub measurement_noise: f64,
    pub initial_position_var: f64,
    pub initial_velocity_var: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams {
            process_noise_accel: 4.0,
            measurement_noise: 0.09,
            initial_position_var: 1.0,
            initial_velocity_var: 4.0,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let fields = [
            ("process_noise_accel", self.process_noise_accel),
            ("measurement_noise", self.measurement_noise),
            ("initial_position_var", self.initial_position_var),
            ("initial_velocity_var", self.initial_velocity_var),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidParams(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateEstimate {
    pub t_ms: u64,
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    pub covariance: Matrix4<f64>,
}

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("timestamps not strictly increasing at sample {index}")]
    NonmonotonicTime { index: usize },
    #[error("invalid Kalman parameters: {0}")]
    InvalidParams(String),
    #[error("filtering tag `{tag}`: {source}")]
    Track {
        tag: TagId,
        #[source]
        source: Box<KinematicsError>,
    },
}

fn transition(dt: f64) -> Matrix4<f64> {
    #[rustfmt::skip]
    let f = Matrix4::new(
        1.0, 0.0, dt,  0.0,
        0.0, 1.0, 0.0, dt,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    );
    f
}

fn process_noise(dt: f64, accel_var: f64) -> Matrix4<f64> {
    let a = dt.powi(4) / 4.0 * accel_var;
    let b = dt.powi(3) / 2.0 * accel_var;
    let c = dt * dt * accel_var;
    #[rustfmt::skip]
    let q = Matrix4::new(
        a,   0.0, b,   0.0,
        0.0, a,   0.0, b,
        b,   0.0, c,   0.0,
        0.0, b,   0.0, c,
    );
    q
}

/// Runs the predict/update recursion over one trajectory and returns one
/// estimate per sample. The first estimate sits on the first measurement
/// with zero velocity.
pub fn kalman_filter(trajectory: &Trajectory, params: &KalmanParams) -> Result<Vec<StateEstimate>, KinematicsError> {
    params.validate()?;
    let samples = &trajectory.samples;
    let first = samples.first().ok_or(KinematicsError::EmptyTrajectory)?;
    if let Some(i) = samples.windows(2).position(|w| w[1].t_ms <= w[0].t_ms) {
        return Err(KinematicsError::NonmonotonicTime { index: i + 1 });
    }

    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let r = Matrix2::identity() * params.measurement_noise;
    let identity = Matrix4::<f64>::identity();

    let mut state = Vector4::new(first.x, first.y, 0.0, 0.0);
    let mut cov = Matrix4::from_diagonal(&Vector4::new(
        params.initial_position_var,
        params.initial_position_var,
        params.initial_velocity_var,
        params.initial_velocity_var,
    ));
    let mut out = Vec::with_capacity(samples.len());
    out.push(estimate(first.t_ms, &state, &cov));

    for pair in samples.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let dt = (cur.t_ms - prev.t_ms) as f64 / 1000.0;
        let f = transition(dt);
        state = f * state;
        cov = f * cov * f.transpose() + process_noise(dt, params.process_noise_accel);

        let z = Vector2::new(cur.x, cur.y);
        let innovation = z - h * state;
        let s = h * cov * h.transpose() + r;
        // s is 2x2 SPD (r > 0), so the inverse exists
        let s_inv = s.try_inverse().unwrap_or_else(Matrix2::zeros);
        let gain: Matrix4x2<f64> = cov * h.transpose() * s_inv;
        state += gain * innovation;
        // Joseph form keeps the update positive semi-definite
        let ikh = identity - gain * h;
        cov = ikh * cov * ikh.transpose() + gain * r * gain.transpose();
        cov = (cov + cov.transpose()) * 0.5;
        out.push(estimate(cur.t_ms, &state, &cov));
    }
    Ok(out)
}

fn estimate(t_ms: u64, state: &Vector4<f64>, cov: &Matrix4<f64>) -> StateEstimate {
    StateEstimate {
        t_ms,
        position: (state[0], state[1]),
        velocity: (state[2], state[3]),
        covariance: *cov,
    }
}

/// Replaces every trajectory's positions with its filtered positions.
pub fn smooth_trajectories(
    trajectories: &BTreeMap<TagId, Trajectory>,
    params: &KalmanParams,
) -> Result<BTreeMap<TagId, Trajectory>, KinematicsError> {
    trajectories
        .iter()
        .map(|(tag, traj)| {
            let estimates = kalman_filter(traj, params).map_err(|e| KinematicsError::Track {
                tag: tag.clone(),
                source: Box::new(e),
            })?;
            let samples = estimates
                .iter()
                .map(|e| TrackPoint {
                    t_ms: e.t_ms,
                    x: e.position.0,
                    y: e.position.1,
                })
                .collect();
            Ok((
                tag.clone(),
                Trajectory {
                    tag_id: tag.clone(),
                    samples,
                },
            ))
        })
        .collect()
}
