//! Small numeric helpers: compensated sums, binomial mass vectors,
//! finite differences, quadrature and isotonic projection.

/// Streaming Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompSum {
    s: f64,
    c: f64,
}

impl CompSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    pub fn total(&self) -> f64 {
        self.s + self.c
    }
}

/// Compensated sum of an iterator.
pub fn comp_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.total()
}

/// Compensated prefix sums: `out[i] = x[0] + … + x[i]`.
pub fn prefix_comp_sums(xs: &[f64]) -> Vec<f64> {
    let mut acc = CompSum::new();
    xs.iter()
        .map(|&x| {
            acc.add(x);
            acc.total()
        })
        .collect()
}

/// Compensated suffix sums: `out[i] = x[i] + … + x[last]`.
pub fn suffix_comp_sums(xs: &[f64]) -> Vec<f64> {
    let mut acc = CompSum::new();
    let mut out = vec![0.0; xs.len()];
    for i in (0..xs.len()).rev() {
        acc.add(xs[i]);
        out[i] = acc.total();
    }
    out
}

/// Mass vector of a binomial with `m` trials and success probability `t`,
/// by iterated convolution (exact polynomial arithmetic in doubles).
pub fn binomial_pmf(m: usize, t: f64) -> Vec<f64> {
    let mut f = vec![0.0; m + 1];
    f[0] = 1.0;
    let q = 1.0 - t;
    for step in 1..=m {
        let mut prev = 0.0;
        for item in f.iter_mut().take(step + 1) {
            let cur = *item;
            *item = q * cur + t * prev;
            prev = cur;
        }
    }
    f
}

/// Five-point centered second derivative, error `O(h^4)`.
fn second_derivative_5pt<F: Fn(f64) -> f64>(f: &F, t: f64, h: f64) -> f64 {
    (-f(t - 2.0 * h) + 16.0 * f(t - h) - 30.0 * f(t) + 16.0 * f(t + h) - f(t + 2.0 * h))
        / (12.0 * h * h)
}

/// Richardson-extrapolated five-point second derivative at steps `h, h/2`.
///
/// The caller must guarantee `t ± 2h` stays inside the function's domain.
pub fn richardson_d2<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
    let d_h = second_derivative_5pt(&f, t, h);
    let d_h2 = second_derivative_5pt(&f, t, h / 2.0);
    (16.0 * d_h2 - d_h) / 15.0
}

/// Second difference of three samples on a possibly non-uniform grid.
pub fn second_diff_3pt(t0: f64, y0: f64, t1: f64, y1: f64, t2: f64, y2: f64) -> f64 {
    let h0 = t1 - t0;
    let h1 = t2 - t1;
    2.0 * (y0 / (h0 * (h0 + h1)) - y1 / (h0 * h1) + y2 / (h1 * (h0 + h1)))
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, a, b);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Project `y` in place onto nondecreasing sequences with entries in
/// `[lo, hi]` (pool-adjacent-violators, then clamp).
pub fn isotonic_clamped(y: &mut [f64], lo: f64, hi: f64) {
    let n = y.len();
    if n == 0 {
        return;
    }
    // PAVA with block (value, weight) stack.
    let mut vals = Vec::with_capacity(n);
    let mut wts: Vec<usize> = Vec::with_capacity(n);
    for &v in y.iter() {
        let mut v = v;
        let mut w = 1usize;
        while let Some(&last) = vals.last() {
            if last <= v {
                break;
            }
            let lw = *wts.last().unwrap();
            v = (last * lw as f64 + v * w as f64) / (lw + w) as f64;
            w += lw;
            vals.pop();
            wts.pop();
        }
        vals.push(v);
        wts.push(w);
    }
    let mut idx = 0;
    for (v, w) in vals.into_iter().zip(wts) {
        let v = v.clamp(lo, hi);
        for _ in 0..w {
            y[idx] = v;
            idx += 1;
        }
    }
}

/// Trapezoid rule over sample points `(times, values)`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let mut acc = CompSum::new();
    for i in 1..times.len() {
        acc.add(0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]));
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_matches_closed_form() {
        let f = binomial_pmf(4, 0.3);
        let expect = [
            0.7f64.powi(4),
            4.0 * 0.3 * 0.7f64.powi(3),
            6.0 * 0.09 * 0.49,
            4.0 * 0.027 * 0.7,
            0.3f64.powi(4),
        ];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = adaptive_simpson(|x| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn richardson_second_derivative() {
        // accuracy is limited by rounding in the stencil, not truncation
        let d2 = richardson_d2(|x: f64| x.sin(), 0.7, 1e-3);
        assert!((d2 + 0.7f64.sin()).abs() < 3e-8);
    }

    #[test]
    fn pava_projects_and_clamps() {
        let mut y = vec![0.3, 0.1, 0.2, 1.4];
        isotonic_clamped(&mut y, 0.0, 1.0);
        assert!(y.windows(2).all(|w| w[0] <= w[1]));
        assert!((y[0] - 0.2).abs() < 1e-15 && (y[1] - 0.2).abs() < 1e-15);
        assert_eq!(y[3], 1.0);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(comp_sum(xs), 2.0);
    }
}
