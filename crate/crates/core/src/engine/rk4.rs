use crate::error::Result;

/// Scratch buffers for classical fourth-order Runge–Kutta on a flat state.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + dt`. The right-hand side may carry
    /// mutable state (e.g. gain caches) and may fail.
    pub fn step<F>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], dt: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let half = 0.5 * dt;
        rhs(t, y, &mut self.k1)?;
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = y + half * k;
        }
        rhs(t + half, &self.stage, &mut self.k2)?;
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = y + half * k;
        }
        rhs(t + half, &self.stage, &mut self.k3)?;
        for ((s, y), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = y + dt * k;
        }
        rhs(t + dt, &self.stage, &mut self.k4)?;
        let sixth = dt / 6.0;
        for (i, y) in y.iter_mut().enumerate() {
            *y += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let run = |dt: f64| {
            let mut y = [1.0];
            let mut rk = Rk4::new(1);
            let mut f = |_t: f64, y: &[f64], d: &mut [f64]| {
                d[0] = -y[0];
                Ok(())
            };
            let steps = (1.0 / dt).round() as usize;
            for k in 0..steps {
                rk.step(&mut f, k as f64 * dt, &mut y, dt).unwrap();
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.1, "observed order {order}");
    }

    #[test]
    fn time_dependent_rhs() {
        // y' = 3t², y(0) = 0 → y(1) = 1, exact for RK4
        let mut y = [0.0];
        let mut rk = Rk4::new(1);
        let mut f = |t: f64, _y: &[f64], d: &mut [f64]| {
            d[0] = 3.0 * t * t;
            Ok(())
        };
        for k in 0..10 {
            rk.step(&mut f, k as f64 * 0.1, &mut y, 0.1).unwrap();
        }
        assert!((y[0] - 1.0).abs() < 1e-14);
    }
}
