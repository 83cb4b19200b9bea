use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::geometry::Point;

/// Noise settings for the constant-velocity centre filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanNoise {
    /// Variance added to each velocity component per frame (px^2/frame^2).
    pub process: f64,
    /// Variance of a measured centre coordinate (px^2).
    pub measurement: f64,
    /// Initial velocity variance of a fresh track.
    pub initial_velocity: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        Self {
            process: 1.0,
            measurement: 4.0,
            initial_velocity: 100.0,
        }
    }
}

/// State `(cx, cy, vx, vy)` with covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Kalman {
    x: Vector4<f64>,
    p: Matrix4<f64>,
    noise: KalmanNoise,
}

#[rustfmt::skip]
fn transition() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 1.0,
        0.0, 0.0, 1.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    )
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

impl Kalman {
    /// Starts at `center` with zero velocity.
    pub fn new(center: Point, noise: KalmanNoise) -> Self {
        Self::with_state(center, Point::new(0.0, 0.0), noise)
    }

    pub fn with_state(center: Point, velocity: Point, noise: KalmanNoise) -> Self {
        let r = noise.measurement;
        let v = noise.initial_velocity;
        Self {
            x: Vector4::new(center.x, center.y, velocity.x, velocity.y),
            p: Matrix4::from_diagonal(&Vector4::new(r, r, v, v)),
            noise,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> Point {
        Point::new(self.x[2], self.x[3])
    }

    pub fn covariance(&self) -> &Matrix4<f64> {
        &self.p
    }

    /// Time update by one frame.
    pub fn predict(&mut self) -> Point {
        let f = transition();
        let q = self.noise.process;
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + Matrix4::from_diagonal(&Vector4::new(0.0, 0.0, q, q));
        self.center()
    }

    /// Measurement update with an observed centre.
    pub fn update(&mut self, z: Point) {
        let h = observation();
        let r = Matrix2::from_diagonal_element(self.noise.measurement);
        let innovation = Vector2::new(z.x, z.y) - h * self.x;
        let s = h * self.p * h.transpose() + r;
        // S is symmetric positive definite because R is.
        let s_inv = s
            .try_inverse()
            .expect("innovation covariance is invertible");
        let k = self.p * h.transpose() * s_inv;
        self.x += k * innovation;
        // Joseph form keeps P symmetric positive semi-definite.
        let i_kh = Matrix4::identity() - k * h;
        self.p = i_kh * self.p * i_kh.transpose() + k * r * k.transpose();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_velocity_propagation() {
        let mut k = Kalman::with_state(
            Point::new(10.0, 10.0),
            Point::new(3.0, 0.0),
            KalmanNoise::default(),
        );
        assert_eq!(k.predict(), Point::new(13.0, 10.0));
        assert_eq!(k.predict(), Point::new(16.0, 10.0));
    }

    #[test]
    fn still_track_stays_put() {
        let mut k = Kalman::new(Point::new(4.0, 7.0), KalmanNoise::default());
        for _ in 0..5 {
            k.update(Point::new(4.0, 7.0));
            assert_eq!(k.predict(), Point::new(4.0, 7.0));
        }
    }

    #[test]
    fn converges_on_noiseless_motion() {
        let (vx, vy) = (2.7, -1.3);
        let truth = |t: f64| Point::new(20.0 + vx * t, 150.0 + vy * t);
        let mut k = Kalman::new(truth(0.0), KalmanNoise::default());
        for t in 1..60 {
            let predicted = k.predict();
            if t > 10 {
                assert!(
                    predicted.distance(truth(t as f64)) < 0.5,
                    "frame {t}: {predicted:?}"
                );
            }
            k.update(truth(t as f64));
        }
        // Coasting keeps the learned velocity.
        let start = k.center();
        for _ in 0..15 {
            k.predict();
        }
        let moved = k.center();
        assert!((moved.x - start.x - 15.0 * vx).abs() < 0.1);
        assert!((moved.y - start.y - 15.0 * vy).abs() < 0.1);
    }

    #[test]
    fn covariance_stays_symmetric() {
        let mut k = Kalman::new(Point::new(0.0, 0.0), KalmanNoise::default());
        for t in 0..30 {
            k.predict();
            if t % 3 != 0 {
                k.update(Point::new(t as f64, 0.5 * t as f64));
            }
            let p = k.covariance();
            assert!((p - p.transpose()).amax() < 1e-9);
            assert!(p.diagonal().iter().all(|v| *v > 0.0));
        }
    }
}
