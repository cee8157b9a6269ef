//! Bracketed scalar root finding and composite Gauss-Legendre quadrature.

use crate::error::{Error, Result};

/// Safeguarded secant on a sign-changing bracket; falls back to bisection
/// whenever the secant point leaves the bracket or stalls.
pub fn find_root<F>(f: F, mut a: f64, mut b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootFinder(format!(
            "no sign change on [{a}, {b}]: f = ({fa:.3e}, {fb:.3e})"
        )));
    }
    let mut bisect_next = false;
    for _ in 0..400 {
        let width = (b - a).abs();
        if width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        let (lo, hi) = (a.min(b), a.max(b));
        let x = if bisect_next || !(secant > lo && secant < hi) {
            mid
        } else {
            secant
        };
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        let before = width;
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        // force a bisection if the bracket shrank by less than half
        bisect_next = (b - a).abs() > 0.5 * before;
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Scans outward from `start` in steps of `step` (both directions,
/// alternating) within `[lo, hi]` and returns the nearest sign-changing
/// bracket. Inadmissible points end the scan in that direction.
pub fn bracket_near<F>(f: &F, start: f64, step: f64, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let f0 = f(start)?;
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut prev = [(start, f0); 2];
    let mut alive = [true, true];
    let mut k = 1;
    while alive.iter().any(|&a| a) {
        for (dir, sign) in [(0usize, 1.0f64), (1, -1.0)] {
            if !alive[dir] {
                continue;
            }
            let x = start + sign * step * k as f64;
            if x < lo || x > hi {
                alive[dir] = false;
                continue;
            }
            match f(x) {
                Ok(fx) => {
                    if fx.signum() != prev[dir].1.signum() || fx == 0.0 {
                        let (a, b) = (prev[dir].0, x);
                        return Ok((a.min(b), a.max(b)));
                    }
                    prev[dir] = (x, fx);
                }
                Err(_) => alive[dir] = false,
            }
        }
        k += 1;
    }
    Err(Error::RootFinder(format!(
        "no sign change within [{lo}, {hi}] scanning from {start} in steps of {step}"
    )))
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Five-point Gauss-Legendre on `panels` equal panels of `[a, b]`.
pub fn gauss_legendre<F>(f: &F, a: f64, b: f64, panels: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for k in 0..panels {
        let mid = a + h * (k as f64 + 0.5);
        for (x, w) in GL5 {
            sum += w * f(mid + 0.5 * h * x)?;
        }
    }
    Ok(0.5 * h * sum)
}

/// Doubles the panel count until two successive estimates agree to `rel_tol`.
pub fn integrate<F>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut panels = 4;
    let mut prev = gauss_legendre(f, a, b, panels)?;
    while panels < 1 << 14 {
        panels *= 2;
        let next = gauss_legendre(f, a, b, panels)?;
        if (next - prev).abs() <= rel_tol * next.abs().max(1e-300) || (next - prev).abs() < 1e-300 {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}
