//! Derivative-free simplex minimization.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below `ftol·(1 + |f_best|)`.
    pub ftol: f64,
    /// ... and every vertex lies within `xtol` of the best one (max-norm).
    pub xtol: f64,
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.3, max_evals: 20_000, ftol: 1e-10, xtol: 1e-7, restarts: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`; `steps[i]` scales the initial simplex along axis `i`.
/// A restart rebuilds the simplex around the incumbent, which guards against
/// premature collapse.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let fx = eval(x0, &mut evals);
        return NelderMeadResult { x: vec![], fx, evals, converged: true };
    }
    let mut best = x0.to_vec();
    let mut best_f = eval(&best, &mut evals);
    let mut converged = false;
    for _ in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += opts.initial_step * steps[i];
            simplex.push(v);
        }
        let mut fs: Vec<f64> = Vec::with_capacity(n + 1);
        fs.push(best_f);
        for v in &simplex[1..] {
            fs.push(eval(v, &mut evals));
        }
        converged = false;
        while evals < opts.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            fs = order.iter().map(|&i| fs[i]).collect();

            let spread = fs[n] - fs[0];
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= opts.ftol * (1.0 + fs[0].abs()) && size <= opts.xtol {
                converged = true;
                break;
            }

            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
            let along =
                |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect() };
            let xr = along(-1.0);
            let fr = eval(&xr, &mut evals);
            if fr < fs[0] {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    fs[n] = fe;
                } else {
                    simplex[n] = xr;
                    fs[n] = fr;
                }
            } else if fr < fs[n - 1] {
                simplex[n] = xr;
                fs[n] = fr;
            } else {
                let (xc, fc) = if fr < fs[n] {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < fs[n].min(fr) {
                    simplex[n] = xc;
                    fs[n] = fc;
                } else {
                    for i in 1..=n {
                        let v: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                        fs[i] = eval(&v, &mut evals);
                        simplex[i] = v;
                    }
                }
            }
        }
        let ib = (0..=n).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
        let improved = fs[ib] < best_f - opts.ftol * (1.0 + best_f.abs());
        if fs[ib] <= best_f {
            best = simplex[ib].clone();
            best_f = fs[ib];
        }
        if evals >= opts.max_evals || (converged && !improved) {
            break;
        }
    }
    NelderMeadResult { x: best, fx: best_f, evals, converged }
}
