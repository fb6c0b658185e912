//! Constant-velocity Kalman filter over `(cx, cy, a, h)` box state.
//!
//! The 8-dimensional state is `(cx, cy, a, h, vcx, vcy, va, vh)`. Process and
//! measurement noise are scaled by the current box height.

use nalgebra::{Cholesky, SMatrix, SVector};

use crate::error::{Error, Result};

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
pub type Measurement = SVector<f64, 4>;
pub type MeasurementCovariance = SMatrix<f64, 4, 4>;

/// 0.95 quantile of the chi-square distribution with 4 degrees of freedom.
pub const CHI2_95_4DOF: f64 = 9.4877;

#[derive(Debug, Clone)]
pub struct KalmanModel {
    pub position_noise_weight: f64,
    pub velocity_noise_weight: f64,
    motion: StateCovariance,
    observation: SMatrix<f64, 4, 8>,
}

impl Default for KalmanModel {
    fn default() -> Self {
        Self::new(1.0 / 20.0, 1.0 / 160.0)
    }
}

impl KalmanModel {
    pub fn new(position_noise_weight: f64, velocity_noise_weight: f64) -> Self {
        let mut motion = StateCovariance::identity();
        for i in 0..4 {
            motion[(i, i + 4)] = 1.0;
        }
        let mut observation = SMatrix::<f64, 4, 8>::zeros();
        for i in 0..4 {
            observation[(i, i)] = 1.0;
        }
        Self {
            position_noise_weight,
            velocity_noise_weight,
            motion,
            observation,
        }
    }

    pub fn transition_matrix(&self) -> &StateCovariance {
        &self.motion
    }

    pub fn observation_matrix(&self) -> &SMatrix<f64, 4, 8> {
        &self.observation
    }

    /// New track state from an unassociated measurement; velocities start at zero.
    pub fn initiate(&self, measurement: &Measurement) -> Result<(StateVector, StateCovariance)> {
        let (a, h) = (measurement[2], measurement[3]);
        if !(h > 0.0) || !(a > 0.0) {
            return Err(Error::InvalidMeasurement(format!(
                "aspect {a} and height {h} must be positive"
            )));
        }
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(measurement);

        let p = 2.0 * self.position_noise_weight * h;
        let v = 10.0 * self.velocity_noise_weight * h;
        let std = StateVector::from_column_slice(&[p, p, 1e-2, p, v, v, 1e-5, v]);
        Ok((mean, StateCovariance::from_diagonal(&std.component_mul(&std))))
    }

    pub fn process_noise(&self, h: f64) -> StateCovariance {
        let p = self.position_noise_weight * h;
        let v = self.velocity_noise_weight * h;
        let std = StateVector::from_column_slice(&[p, p, 1e-2, p, v, v, 1e-5, v]);
        StateCovariance::from_diagonal(&std.component_mul(&std))
    }

    pub fn measurement_noise(&self, h: f64) -> MeasurementCovariance {
        let p = self.position_noise_weight * h;
        let std = Measurement::new(p, p, 1e-1, p);
        MeasurementCovariance::from_diagonal(&std.component_mul(&std))
    }

    pub fn predict(&self, mean: &StateVector, covariance: &StateCovariance) -> (StateVector, StateCovariance) {
        let q = self.process_noise(mean[3]);
        let mean = self.motion * mean;
        let cov = self.motion * covariance * self.motion.transpose() + q;
        (mean, symmetrize(cov))
    }

    /// Projects the state distribution into measurement space.
    pub fn project(&self, mean: &StateVector, covariance: &StateCovariance) -> (Measurement, MeasurementCovariance) {
        let r = self.measurement_noise(mean[3]);
        let projected_mean = self.observation * mean;
        let projected_cov = self.observation * covariance * self.observation.transpose() + r;
        (projected_mean, symmetrize(projected_cov))
    }

    pub fn update(
        &self,
        mean: &StateVector,
        covariance: &StateCovariance,
        measurement: &Measurement,
    ) -> Result<(StateVector, StateCovariance)> {
        let (projected_mean, projected_cov) = self.project(mean, covariance);
        let chol = Cholesky::new(projected_cov).ok_or(Error::Numerical("innovation covariance is not positive definite"))?;

        // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ since S and P are symmetric.
        let pht = covariance * self.observation.transpose();
        let gain = chol.solve(&pht.transpose()).transpose();
        let innovation = measurement - projected_mean;

        let new_mean = mean + gain * innovation;
        let new_cov = covariance - gain * projected_cov * gain.transpose();
        if new_mean.iter().chain(new_cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite state after update"));
        }
        Ok((new_mean, symmetrize(new_cov)))
    }

    /// Squared Mahalanobis distance of each measurement from the projected state.
    pub fn gating_distance(
        &self,
        mean: &StateVector,
        covariance: &StateCovariance,
        measurements: &[Measurement],
    ) -> Result<Vec<f64>> {
        let (projected_mean, projected_cov) = self.project(mean, covariance);
        let chol = Cholesky::new(projected_cov).ok_or(Error::Numerical("projected covariance is not positive definite"))?;
        let l = chol.l();
        Ok(measurements
            .iter()
            .map(|m| {
                let d = m - projected_mean;
                let z = l.solve_lower_triangular(&d).expect("cholesky factor has a positive diagonal");
                z.norm_squared()
            })
            .collect())
    }
}

fn symmetrize<const N: usize>(m: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}
