//! Dormand–Prince 5(4) integrator for complex vector ODEs.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

type State = DVector<Complex64>;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub(crate) struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Step size carried between calls to [`Dopri5::advance`].
    pub h: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            h: 0.0,
            max_steps: 10_000_000,
        }
    }

    /// Integrates from (t0, y) to t1, returning y(t1).
    pub fn advance<F>(&mut self, f: &F, t0: f64, y: State, t1: f64) -> Result<State>
    where
        F: Fn(f64, &State) -> State,
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(y);
        }
        let mut t = t0;
        let mut y = y;
        let mut k1 = f(t, &y);
        if self.h <= 0.0 {
            self.h = self.initial_step(f, t, &y, &k1, span);
        }
        let mut steps = 0usize;
        while t < t1 {
            let remaining = t1 - t;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::StepSizeUnderflow { t });
            }
            let k2 = f(t + C2 * h, &combo(&y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                t + C4 * h,
                &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                t + C5 * h,
                &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &combo(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = combo(
                &y,
                h,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = f(t + h, &y_new);
            let zero = DVector::zeros(y.len());
            let err = combo(
                &zero,
                h,
                &[
                    (E1, &k1),
                    (E3, &k3),
                    (E4, &k4),
                    (E5, &k5),
                    (E6, &k6),
                    (E7, &k7),
                ],
            );

            let mut acc = 0.0;
            for i in 0..y.len() {
                let sc = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
                acc += (err[i].norm() / sc).powi(2);
            }
            let e = (acc / y.len().max(1) as f64).sqrt();
            let factor = if e == 0.0 {
                5.0
            } else {
                (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
            };
            if e <= 1.0 {
                t = if last { t1 } else { t + h };
                y = y_new;
                k1 = k7;
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor.min(1.0);
            }
            if !self.h.is_finite() {
                return Err(Error::StepSizeUnderflow { t });
            }
        }
        Ok(y)
    }

    fn initial_step<F>(&self, f: &F, t: f64, y: &State, k1: &State, span: f64) -> f64
    where
        F: Fn(f64, &State) -> State,
    {
        let scale = |v: &State| {
            let n = v.len().max(1) as f64;
            (v.iter()
                .zip(y.iter())
                .map(|(a, b)| (a.norm() / (self.atol + self.rtol * b.norm())).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let d0 = scale(y);
        let d1 = scale(k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1 = combo(y, h0, &[(1.0, k1)]);
        let k2 = f(t + h0, &y1);
        let d2 = scale(&(&k2 - k1)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }
}

/// y + h Σ a_i k_i.
fn combo(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = y.clone();
    for (a, k) in terms {
        out.axpy(Complex64::new(a * h, 0.0), k, Complex64::new(1.0, 0.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_rotation() {
        let lam = Complex64::new(-0.7, 3.0);
        let f = |_t: f64, y: &State| y * lam;
        let mut s = Dopri5::new(1e-10, 1e-13);
        let y0 = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let y = s.advance(&f, 0.0, y0, 2.0).unwrap();
        assert!((y[0] - (lam * 2.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn forced_linear_system() {
        let f = |t: f64, y: &State| DVector::from_vec(vec![-y[0] + Complex64::new(t, 0.0)]);
        let mut s = Dopri5::new(1e-11, 1e-14);
        let mut y = DVector::from_vec(vec![Complex64::new(0.0, 0.0)]);
        let mut t = 0.0;
        for _ in 0..10 {
            y = s.advance(&f, t, y, t + 0.3).unwrap();
            t += 0.3;
        }
        let exact = t - 1.0 + (-t).exp();
        assert!((y[0].re - exact).abs() < 1e-9);
    }

    #[test]
    fn empty_span_is_noop() {
        let f = |_t: f64, y: &State| y.clone();
        let mut s = Dopri5::new(1e-8, 1e-10);
        let y0 = DVector::from_vec(vec![Complex64::new(2.0, 1.0)]);
        assert_eq!(s.advance(&f, 1.0, y0.clone(), 1.0).unwrap(), y0);
    }
}
