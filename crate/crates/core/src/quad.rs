//! Adaptive Simpson quadrature.
//!
//! Small and self-contained: the toolkit only ever integrates smooth
//! one-dimensional integrands (densities and their even-power moments after
//! a trigonometric substitution), so classic adaptive Simpson with the
//! Richardson error estimate is accurate and fast. A coarse composite pass
//! first sets the absolute tolerance from the requested relative one; the
//! adaptive refinement then runs *within* each coarse panel. Starting the
//! recursion from the whole interval instead would let symmetric integrands
//! (e.g. even powers of sine on [−π/2, π/2]) fool the error estimate: their
//! first bisection can reproduce the un-split Simpson value exactly.

/// Integrate `f` over `[a, b]` to roughly `rel_tol` relative accuracy
/// (floored at an absolute scale of 1 for integrals near zero).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    // Coarse composite Simpson estimate to fix the error scale.
    let panels = 64;
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    let mut evals = Vec::with_capacity(panels);
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = if i + 1 == panels { b } else { x0 + h };
        let fx0 = f(x0);
        let fxm = f(0.5 * (x0 + x1));
        let fx1 = f(x1);
        let s = simpson(x0, x1, fx0, fxm, fx1);
        evals.push((x0, x1, fx0, fxm, fx1, s));
        coarse += s;
    }
    let panel_tol = rel_tol * coarse.abs().max(1.0) / panels as f64;

    evals
        .into_iter()
        .map(|(x0, x1, fx0, fxm, fx1, s)| adaptive(&f, x0, x1, fx0, fxm, fx1, s, panel_tol, 46))
        .sum()
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
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
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Simpson halving gains a factor 16; 15·tol is the standard acceptance.
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
