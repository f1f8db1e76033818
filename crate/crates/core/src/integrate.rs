//! Adaptive Dormand-Prince 5(4) stepper with the classical fourth-order dense output.

use crate::error::{Error, Result};

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_min: 1e-14, h_max: f64::INFINITY }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    rcont: [[f64; N]; 4],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// State at fraction `theta` in `[0, 1]` of the step.
    pub fn at_fraction(&self, theta: f64) -> [f64; N] {
        let th1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            let [r2, r3, r4, r5] = [self.rcont[0][i], self.rcont[1][i], self.rcont[2][i], self.rcont[3][i]];
            out[i] = self.y0[i] + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
        }
        out
    }

    pub fn at_time(&self, t: f64) -> [f64; N] {
        self.at_fraction(((t - self.t0) / self.h).clamp(0.0, 1.0))
    }
}

/// Stateful integrator of `y' = f(t, y)`; first-same-as-last stages are reused.
pub struct Dopri5<F, const N: usize>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    rhs: F,
    tol: Tolerances,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    pub accepted: usize,
    pub rejected: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], tol: Tolerances) -> Self {
        let k1 = rhs(t0, &y0);
        let mut s = Self { rhs, tol, t: t0, y: y0, k1, h: 0.0, accepted: 0, rejected: 0 };
        s.h = s.initial_step();
        s
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64; N] {
        &self.y
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.abs().max(b.abs())
    }

    /// Hairer's starting-step heuristic.
    fn initial_step(&mut self) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.tol.h_max);
        let y1 = axpy(&self.y, h0, &[(1.0, &self.k1)]);
        let k2 = (self.rhs)(self.t + h0, &y1);
        let mut d2 = 0.0;
        for i in 0..N {
            d2 += ((k2[i] - self.k1[i]) / self.scale(self.y[i], self.y[i])).powi(2);
        }
        let d2 = (d2 / N as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.tol.h_max).max(self.tol.h_min)
    }

    /// Overrides the next attempted step size, e.g. when restarting from a known scale.
    pub fn set_step_size(&mut self, h: f64) {
        if h > 0.0 && h.is_finite() {
            self.h = h.clamp(self.tol.h_min, self.tol.h_max);
        }
    }

    /// Caps the next attempted step, e.g. to land on an output time.
    pub fn limit_next_step(&mut self, h_cap: f64) {
        if h_cap > 0.0 {
            self.h = self.h.min(h_cap);
        }
    }

    /// Advances by one accepted step.
    pub fn step(&mut self) -> Result<DenseStep<N>> {
        loop {
            let h = self.h;
            if !(h >= self.tol.h_min) {
                return Err(Error::Stiffness { t: self.t, h });
            }
            let (t, y, k1) = (self.t, self.y, self.k1);
            let k2 = (self.rhs)(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = (self.rhs)(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = (self.rhs)(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = (self.rhs)(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = (self.rhs)(
                t + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = (self.rhs)(t + h, &y1);

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                finite &= y1[i].is_finite() && e.is_finite();
                err += (e / self.scale(y[i], y1[i])).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !finite || err > 1.0 {
                self.rejected += 1;
                let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.25 };
                self.h = h * fac;
                continue;
            }

            let mut rcont = [[0.0; N]; 4];
            for i in 0..N {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                rcont[0][i] = ydiff;
                rcont[1][i] = bspl;
                rcont[2][i] = ydiff - h * k7[i] - bspl;
                rcont[3][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            self.t = t + h;
            self.y = y1;
            self.k1 = k7;
            self.h = (h * fac).min(self.tol.h_max);
            self.accepted += 1;
            return Ok(DenseStep { t0: t, h, y0: y, y1, rcont });
        }
    }
}

/// Bisects `g(theta)` on `[lo, hi]` (with `g(lo) > 0 >= g(hi)`) until the bracket is
/// narrower than `tol`; returns the right end so the event is inclusive.
pub fn bisect_event<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
