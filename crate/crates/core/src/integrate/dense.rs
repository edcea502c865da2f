//! Cubic Hermite dense output and monotone inverse interpolation.

use crate::error::{Error, Result};

/// Cubic Hermite interpolation between `(t0, y0, f0)` and `(t1, y1, f1)` written into `out`.
pub fn hermite(
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h * h10 * f0[i] + h01 * y1[i] + h * h11 * f1[i];
    }
}

/// Derivative of [`hermite`] with respect to `t`.
pub fn hermite_derivative(
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t1: f64,
    y1: &[f64],
    f1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    for i in 0..out.len() {
        out[i] = d00 * y0[i] + d10 * f0[i] + d01 * y1[i] + d11 * f1[i];
    }
}

/// Index `i` with `knots[i] <= x <= knots[i + 1]`, clamped to the valid range.
pub(crate) fn bracket(knots: &[f64], x: f64) -> usize {
    debug_assert!(knots.len() >= 2);
    match knots.binary_search_by(|k| k.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
        Ok(i) => i.min(knots.len() - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(knots.len() - 2),
    }
}

/// Piecewise cubic Hermite interpolant of a strictly increasing scalar function,
/// with slopes limited (Fritsch–Carlson) so the interpolant stays monotone.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `slopes` are exact derivatives when known; otherwise three-point estimates are used.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, slopes: Option<Vec<f64>>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::invalid(
                "interpolation",
                "need at least two matching knots",
            ));
        }
        for i in 1..n {
            if !(xs[i] > xs[i - 1]) {
                return Err(Error::NonMonotoneClock { index: i });
            }
            if !(ys[i] > ys[i - 1]) {
                return Err(Error::NonMonotoneClock { index: i });
            }
        }
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut m = match slopes {
            Some(s) if s.len() == n => s,
            Some(_) => return Err(Error::invalid("interpolation", "slope count mismatch")),
            None => {
                let mut s = vec![0.0; n];
                s[0] = secants[0];
                s[n - 1] = secants[n - 2];
                for i in 1..n - 1 {
                    s[i] = 0.5 * (secants[i - 1] + secants[i]);
                }
                s
            }
        };
        for (i, d) in secants.iter().enumerate() {
            if m[i] < 0.0 {
                m[i] = 0.0;
            }
            if m[i + 1] < 0.0 {
                m[i + 1] = 0.0;
            }
            let a = m[i] / d;
            let b = m[i + 1] / d;
            let q = a * a + b * b;
            if q > 9.0 {
                let tau = 3.0 / q.sqrt();
                m[i] = tau * a * d;
                m[i + 1] = tau * b * d;
            }
        }
        Ok(MonotoneCubic { xs, ys, slopes: m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = bracket(&self.xs, x);
        let mut out = [0.0];
        hermite(
            self.xs[i],
            &self.ys[i..=i],
            &self.slopes[i..=i],
            self.xs[i + 1],
            &self.ys[i + 1..=i + 1],
            &self.slopes[i + 1..=i + 1],
            x,
            &mut out,
        );
        out[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_is_exact_for_cubics() {
        let f = |t: f64| 2.0 * t * t * t - t * t + 3.0;
        let df = |t: f64| 6.0 * t * t - 2.0 * t;
        let mut out = [0.0];
        for t in [0.1, 0.5, 0.77] {
            hermite(
                0.0,
                &[f(0.0)],
                &[df(0.0)],
                1.0,
                &[f(1.0)],
                &[df(1.0)],
                t,
                &mut out,
            );
            assert!((out[0] - f(t)).abs() < 1e-14);
            hermite_derivative(
                0.0,
                &[f(0.0)],
                &[df(0.0)],
                1.0,
                &[f(1.0)],
                &[df(1.0)],
                t,
                &mut out,
            );
            assert!((out[0] - df(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn monotone_cubic_inverts_exp() {
        let xs: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let slopes = ys.clone();
        // inverse map: knots (e^x, x) with slopes e^-x
        let inv = MonotoneCubic::new(
            ys.clone(),
            xs.clone(),
            Some(slopes.iter().map(|s| 1.0 / s).collect()),
        )
        .unwrap();
        for x in [0.01f64, 0.33, 1.234, 1.99] {
            assert!((inv.eval(x.exp()) - x).abs() < 1e-7);
        }
        let est = MonotoneCubic::new(xs, ys, None).unwrap();
        assert!((est.eval(1.0) - 1f64.exp()).abs() < 1e-3);
    }

    #[test]
    fn rejects_non_monotone_knots() {
        let err = MonotoneCubic::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0], None).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneClock { index: 2 }));
    }

    #[test]
    fn limiter_keeps_monotone() {
        let xs = vec![0.0, 1.0, 2.0, 3.0];
        let ys = vec![0.0, 0.01, 0.02, 10.0];
        let m = MonotoneCubic::new(xs, ys, Some(vec![5.0, 5.0, 5.0, 5.0])).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=300 {
            let v = m.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}
