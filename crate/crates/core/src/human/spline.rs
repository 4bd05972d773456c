/// Natural cubic spline through `(x_i, y_i)` with strictly increasing `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Requires at least two knots; two knots give the straight line.
    pub fn natural(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len(), "knot and value counts differ");
        assert!(x.len() >= 2, "a spline needs at least two knots");
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        CubicSpline { x: x.to_vec(), y: y.to_vec(), m }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and first derivative at `t` (extrapolates with the end cubics).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.interval(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let (a, b) = ((x1 - t) / h, (t - x0) / h);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let value = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (self.y[i + 1] - self.y[i]) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (value, slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interpolates_knots_and_lines() {
        let x = [0.0, 0.5, 1.3, 2.0];
        let y = [1.0, 2.0, 3.6, 5.0];
        let s = CubicSpline::natural(&x, &y);
        for (xi, yi) in x.iter().zip(&y) {
            assert_relative_eq!(s.eval(*xi).0, *yi, epsilon = 1e-12);
        }
        // Collinear data reproduce the line and its slope.
        assert_relative_eq!(s.eval(0.9).1, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_function_and_derivative() {
        let x: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let y: Vec<f64> = x.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin()).collect();
        let s = CubicSpline::natural(&x, &y);
        for t in [0.13, 0.41, 0.77] {
            let (v, d) = s.eval(t);
            assert_relative_eq!(v, (2.0 * std::f64::consts::PI * t).sin(), epsilon = 1e-6);
            assert_relative_eq!(d, 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * t).cos(), epsilon = 1e-3);
        }
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let s = CubicSpline::natural(&[0.0, 1.0, 2.0, 3.0], &[0.4; 4]);
        assert_eq!(s.eval(1.7), (0.4, 0.0));
    }
}
