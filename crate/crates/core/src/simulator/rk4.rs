//! Classic fixed-step fourth-order Runge-Kutta over a flat state slice.

/// Scratch buffers reused across steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advance `y` from `t` to `t + h`. `f(t, y, dy)` writes derivatives.
    #[allow(clippy::needless_range_loop)]
    pub fn step<F>(&mut self, t: f64, y: &mut [f64], h: f64, mut f: F)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        debug_assert_eq!(n, self.k1.len());
        f(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let run = |dt: f64| {
            let mut rk = Rk4::new(1);
            let mut y = [1.0];
            let n = (1.0 / dt).round() as usize;
            for k in 0..n {
                rk.step(k as f64 * dt, &mut y, dt, |_, y, dy| dy[0] = -y[0]);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn linear_ramp_is_exact() {
        let mut rk = Rk4::new(1);
        let mut y = [0.0];
        rk.step(0.0, &mut y, 0.5, |_, _, dy| dy[0] = -0.6);
        assert!((y[0] + 0.3).abs() < 1e-15);
    }
}
