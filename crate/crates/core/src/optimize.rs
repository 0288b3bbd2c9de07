//! One-dimensional minimization on a logarithmic scale, plus a small
//! Nelder–Mead simplex used by the simplex-law search.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    /// True when the objective is still non-increasing at the upper end of
    /// the search range, so the infimum is a boundary limit.
    pub upper_boundary: bool,
    pub lower_boundary: bool,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Golden-section search for a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `rel_tol * max(|lo|, |hi|, 1)`
/// or after `max_iter` steps. Returns `(x, f(x), iterations)`.
pub fn golden_section<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, f64, usize) {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut it = 0;
    while it < max_iter && (hi - lo) > rel_tol * lo.abs().max(hi.abs()).max(1.0) {
        it += 1;
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd { (c, fc, it) } else { (d, fd, it) }
}

/// Minimizes `f` over `[lo, hi]` (both positive) by a coarse scan on a
/// log-spaced grid followed by golden-section refinement in `ln x`.
///
/// Non-finite values count as `+∞`, so the search may extend up to a pole.
/// When the value at `hi` is within `flat_tol` of the scanned minimum the
/// objective is treated as still decreasing and `upper_boundary` is set.
pub fn minimize_log_scale<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    rel_tol: f64,
    flat_tol: f64,
) -> Minimum {
    assert!(lo > 0.0 && hi > lo && grid_points >= 3);
    let (tlo, thi) = (lo.ln(), hi.ln());
    let step = (thi - tlo) / (grid_points - 1) as f64;
    let g = |t: f64| {
        let v = f(t.exp());
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let values: Vec<f64> = (0..grid_points).map(|i| g(tlo + step * i as f64)).collect();
    let (k, &fmin) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let last = values[grid_points - 1];
    if last <= fmin + flat_tol {
        return Minimum {
            x: hi,
            value: last.min(fmin),
            upper_boundary: true,
            lower_boundary: false,
            bracket: ((tlo + step * (grid_points - 2) as f64).exp(), hi),
            iterations: grid_points,
        };
    }
    if k == 0 {
        return Minimum {
            x: lo,
            value: fmin,
            upper_boundary: false,
            lower_boundary: true,
            bracket: (lo, (tlo + step).exp()),
            iterations: grid_points,
        };
    }
    let a = tlo + step * (k - 1) as f64;
    let b = tlo + step * (k + 1) as f64;
    let (t, v, it) = golden_section(g, a, b, rel_tol, 400);
    let (t, v) = if v <= fmin { (t, v) } else { (tlo + step * k as f64, fmin) };
    Minimum {
        x: t.exp(),
        value: v,
        upper_boundary: false,
        lower_boundary: false,
        bracket: (a.exp(), b.exp()),
        iterations: grid_points + it,
    }
}

/// Nelder–Mead simplex minimization from `start` with initial edge `scale`.
/// Returns the best point, its value and the number of evaluations used.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    scale: f64,
    max_evals: usize,
) -> (Vec<f64>, f64, usize) {
    let n = start.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(start, &mut evals);
    simplex.push((start.to_vec(), v0));
    for i in 0..n {
        if evals >= max_evals {
            break;
        }
        let mut x = start.to_vec();
        x[i] += scale;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    if simplex.len() < n + 1 {
        let best = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        return (best.0, best.1, evals);
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[n].1 - simplex[0].1).abs() <= 1e-14 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + t * (w - c)).collect()
        };
        let worst = simplex[n].0.clone();
        let xr = along(-1.0, &worst);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0, &worst);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = along(0.5, &worst);
            let fc = eval(&xc, &mut evals);
            if fc < simplex[n].1 {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&item.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let v = eval(&x, &mut evals);
                    *item = (x, v);
                }
            }
        }
    }
    let best = simplex.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    (best.0, best.1, evals)
}
