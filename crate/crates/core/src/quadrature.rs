//! Adaptive Simpson quadrature on half-lines.
//!
//! Used as the fallback for families that lack closed-form absolute-moment
//! integrals. The half-line `[a, inf)` is mapped onto `[0, 1)` with
//! `x = a + s t / (1 - t)` where `s` is a spread hint from the family.

/// Absolute tolerance promised by the fallback integrals.
pub const FALLBACK_TOLERANCE: f64 = 1e-8;

const MAX_DEPTH: u32 = 48;

/// `int_a^inf f(x) dx` for an integrand decaying to zero.
pub fn upper_half_line<F: Fn(f64) -> f64>(f: F, a: f64, spread: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        let v = f(a + spread * t / u) * spread / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    adaptive_simpson(&g, 0.0, 1.0, FALLBACK_TOLERANCE * 1e-2)
}

/// `int_-inf^a f(x) dx` for an integrand decaying to zero.
pub fn lower_half_line<F: Fn(f64) -> f64>(f: F, a: f64, spread: f64) -> f64 {
    upper_half_line(|x| f(2.0 * a - x), a, spread)
}

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    recurse(f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let lmid = 0.5 * (lo + mid);
    let rmid = 0.5 * (mid + hi);
    let (flm, frm) = (f(lmid), f(rmid));
    let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    let delta = left + right - whole;
    // force a few levels of refinement so narrow peaks are not missed
    if depth == 0 || (depth < MAX_DEPTH - 6 && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    recurse(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1)
        + recurse(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_tail() {
        let v = upper_half_line(|x| (-x).exp(), 0.0, 1.0);
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        let w = lower_half_line(|x| x.exp(), 0.0, 1.0);
        assert!((w - 1.0).abs() < 1e-9, "{w}");
    }

    #[test]
    fn gaussian_mass() {
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let total = upper_half_line(phi, 0.3, 1.0) + lower_half_line(phi, 0.3, 1.0);
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn polynomial_exact() {
        let v = adaptive_simpson(&|x: f64| x * x * x - x, -1.0, 2.0, 1e-12);
        assert!((v - 2.25).abs() < 1e-12);
    }
}
