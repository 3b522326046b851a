//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.

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

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
        }
    }
}

/// What the observer wants after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Finish {
    /// Reached the end of the span.
    Completed,
    /// The observer asked to stop at this abscissa.
    Stopped(f64),
    /// The step size underflowed at this abscissa.
    StepUnderflow(f64),
    /// A non-finite derivative was produced at this abscissa.
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub x: f64,
    pub y: [f64; N],
    pub finish: Finish,
    pub steps: usize,
}

#[inline]
fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `x0` to `x1 > x0`. The step is clipped
/// to land exactly on every abscissa of `stops` (ascending, inside the
/// span), and `observer` sees the state after every accepted step.
pub fn integrate<const N: usize, F, O>(
    mut f: F,
    x0: f64,
    y0: [f64; N],
    x1: f64,
    tol: Tolerance,
    stops: &[f64],
    mut observer: O,
) -> Outcome<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> Control,
{
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let mut h = initial_step(x0, x1, &y, &k1, tol);
    let mut next_stop = stops.iter().position(|s| *s > x0).unwrap_or(stops.len());
    let mut steps = 0;
    let mut err_prev = 1e-4f64;
    let h_min = 1e-14 * (x1 - x0).abs().max(1.0);

    loop {
        if x >= x1 {
            return Outcome {
                x,
                y,
                finish: Finish::Completed,
                steps,
            };
        }
        let mut target = x1;
        while next_stop < stops.len() && stops[next_stop] <= x {
            next_stop += 1;
        }
        if next_stop < stops.len() && stops[next_stop] < x1 {
            target = stops[next_stop];
        }
        let clipped = x + h >= target;
        let hs = if clipped { target - x } else { h };

        let k2 = f(x + C2 * hs, &lin(&y, hs, &[(A21, &k1)]));
        let k3 = f(x + C3 * hs, &lin(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            x + C4 * hs,
            &lin(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            x + C5 * hs,
            &lin(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + hs,
            &lin(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = lin(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = f(x + hs, &y_new);

        let mut err = 0.0f64;
        let mut finite = true;
        for i in 0..N {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
            finite &= y_new[i].is_finite() && k7[i].is_finite();
        }
        if !finite || !err.is_finite() {
            if hs <= h_min {
                return Outcome {
                    x,
                    y,
                    finish: Finish::NonFinite(x),
                    steps,
                };
            }
            h = 0.25 * hs;
            continue;
        }

        if err <= 1.0 {
            // PI step control
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            err_prev = err.max(1e-4);
            x = if clipped { target } else { x + hs };
            y = y_new;
            k1 = k7;
            steps += 1;
            let grow = fac.clamp(0.2, 5.0);
            h = if clipped { h.max(hs * grow) } else { hs * grow };
            if observer(x, &y) == Control::Stop {
                return Outcome {
                    x,
                    y,
                    finish: Finish::Stopped(x),
                    steps,
                };
            }
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h = hs * fac;
            if h < h_min {
                return Outcome {
                    x,
                    y,
                    finish: Finish::StepUnderflow(x),
                    steps,
                };
            }
        }
    }
}

fn initial_step<const N: usize>(
    x0: f64,
    x1: f64,
    y: &[f64; N],
    f: &[f64; N],
    tol: Tolerance,
) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..N {
        let sc = tol.atol + tol.rtol * y[i].abs();
        d0 = d0.max((y[i] / sc).abs());
        d1 = d1.max((f[i] / sc).abs());
    }
    let span = (x1 - x0).abs();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(0.1 * span).max(1e-12 * span.max(1.0))
}
