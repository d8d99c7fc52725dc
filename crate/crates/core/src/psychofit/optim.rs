//! Nelder–Mead simplex minimization.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Per-coordinate size of the initial simplex.
    pub initial_step: Vec<f64>,
    /// Converged when every vertex lies within this distance of the best one
    /// (per coordinate) and function values agree to `f_tol`.
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    assert_eq!(opts.initial_step.len(), n, "one initial step per coordinate");
    let (alpha, gamma, rho, shrink) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.x_tol && (values[n] - values[0]).abs() <= opts.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let toward = |scale: f64| -> Vec<f64> {
            (0..n).map(|j| centroid[j] + scale * (simplex[n][j] - centroid[j])).collect()
        };

        let reflected = toward(-alpha);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = toward(-alpha * gamma);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = toward(-alpha * rho);
                let fc = f(&c);
                (c, fc)
            } else {
                let c = toward(rho);
                let fc = f(&c);
                (c, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + shrink * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NelderMeadResult { x: simplex[best].clone(), fx: values[best], iterations, converged }
}
