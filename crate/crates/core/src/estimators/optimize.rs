//! Bounded scalar maximization: a coarse grid followed by golden-section refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a scalar search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMax {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `f` on `[lo, hi]`: evaluates a grid of `grid` points, then refines
/// the bracket around the best grid point by golden section until its width is
/// below `tol`.
pub fn grid_golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> ScalarMax {
    assert!(hi > lo && grid >= 3);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..grid {
        let v = f(lo + step * i as f64);
        if v > best.1 {
            best = (i, v);
        }
    }
    let a = lo + step * best.0.saturating_sub(1) as f64;
    let b = (lo + step * (best.0 + 1) as f64).min(hi);
    let grid_x = lo + step * best.0 as f64;
    let refined = golden_max(&mut f, a, b, tol);
    let mut out = if refined.value >= best.1 {
        refined
    } else {
        ScalarMax { x: grid_x, value: best.1, evaluations: refined.evaluations }
    };
    out.evaluations += grid;
    out
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> ScalarMax {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    if fc >= fd {
        ScalarMax { x: c, value: fc, evaluations: evals }
    } else {
        ScalarMax { x: d, value: fd, evaluations: evals }
    }
}

/// Refines a maximizer `x` of a smooth function by locating the sign change of
/// its derivative `df` near `x` (Illinois false position) within `[lo, hi]`.
/// Returns `None` when no bracketing sign change is found within `max_width`.
pub fn polish_root<D: FnMut(f64) -> f64>(mut df: D, x: f64, lo: f64, hi: f64, max_width: f64) -> Option<f64> {
    let d0 = df(x);
    if d0 == 0.0 {
        return Some(x);
    }
    if !d0.is_finite() {
        return None;
    }
    // ascend in the direction of the derivative until it changes sign
    let dir = d0.signum();
    let mut step = 1e-9 * x.abs().max(1.0);
    let (mut a, mut fa) = (x, d0);
    let (b, fb) = loop {
        let t = (x + dir * step).clamp(lo, hi);
        let ft = df(t);
        if ft.is_finite() && ft.signum() != dir {
            break (t, ft);
        }
        if t == lo || t == hi || step > max_width || !ft.is_finite() {
            return None;
        }
        a = t;
        fa = ft;
        step *= 8.0;
    };
    let (mut a, mut b, mut fa, mut fb) = if a < b { (a, b, fa, fb) } else { (b, a, fb, fa) };
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = df(c);
        if fc == 0.0 || (b - a) <= 4.0 * f64::EPSILON * c.abs().max(1.0) {
            return Some(c);
        }
        if fc.signum() == fa.signum() {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Some(0.5 * (a + b))
}
