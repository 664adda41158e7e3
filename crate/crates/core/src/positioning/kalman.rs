/// Constant-acceleration-input Kalman filter over `(position, velocity)` on one axis.
///
/// Prediction treats the measured acceleration as a control input; process noise is
/// the piecewise-constant white acceleration model `Q = G Gᵀ σa²` with
/// `G = [dt²/2, dt]ᵀ`. Measurements observe position only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kalman1D {
    position: f64,
    velocity: f64,
    covariance: [[f64; 2]; 2],
    process_noise_accel_sigma: f64,
    measurement_noise_sigma: f64,
}

impl Kalman1D {
    pub fn new(
        position: f64,
        velocity: f64,
        covariance: [[f64; 2]; 2],
        process_noise_accel_sigma: f64,
        measurement_noise_sigma: f64,
    ) -> Self {
        Kalman1D { position, velocity, covariance, process_noise_accel_sigma, measurement_noise_sigma }
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance
    }

    pub fn predict(&mut self, dt: f64, accel: f64) {
        let [[p00, p01], [p10, p11]] = self.covariance;
        let half_dt2 = 0.5 * dt * dt;

        self.position += self.velocity * dt + half_dt2 * accel;
        self.velocity += dt * accel;

        // F P Fᵀ with F = [[1, dt], [0, 1]]
        let a00 = p00 + dt * (p10 + p01) + dt * dt * p11;
        let a01 = p01 + dt * p11;
        let a10 = p10 + dt * p11;
        let a11 = p11;

        let q = self.process_noise_accel_sigma * self.process_noise_accel_sigma;
        let q00 = half_dt2 * half_dt2 * q;
        let q01 = half_dt2 * dt * q;
        let q11 = dt * dt * q;

        let off = 0.5 * ((a01 + q01) + (a10 + q01));
        self.covariance = [[a00 + q00, off], [off, a11 + q11]];
    }

    pub fn correct(&mut self, measured_position: f64) {
        let [[p00, p01], [p10, p11]] = self.covariance;
        let r = self.measurement_noise_sigma * self.measurement_noise_sigma;
        let s = p00 + r;
        if !(s > 0.0) {
            // both prior and measurement are exact; nothing to weigh
            return;
        }
        let k0 = p00 / s;
        let k1 = p10 / s;
        let innovation = measured_position - self.position;
        self.position += k0 * innovation;
        self.velocity += k1 * innovation;

        // (I - K H) P
        let n00 = (1.0 - k0) * p00;
        let n01 = (1.0 - k0) * p01;
        let n10 = p10 - k1 * p00;
        let n11 = p11 - k1 * p01;
        let off = 0.5 * (n01 + n10);
        self.covariance = [[n00, off], [off, n11]];
    }
}
