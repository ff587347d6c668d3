//! Box-constrained Nelder-Mead. Candidate points are clamped into the box
//! before evaluation, so the objective is never called outside it.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Converged when the spread of simplex values and the simplex diameter
    /// both fall below these.
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_iter: 500,
            f_tol: 1e-10,
            x_tol: 1e-8,
            initial_step: 0.1,
        }
    }
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], lower: &[f64], upper: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        let mut eval = |x: &mut Vec<f64>| {
            clamp(x, lower, upper);
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let mut start = x0.to_vec();
        let f0 = eval(&mut start);
        simplex.push((start.clone(), f0));
        for i in 0..n {
            let mut x = start.clone();
            // step away from the nearer bound so the vertex stays distinct
            let room_up = upper[i] - x[i];
            let room_down = x[i] - lower[i];
            x[i] += if room_up >= room_down {
                self.initial_step.min(room_up)
            } else {
                -self.initial_step.min(room_down)
            };
            let fx = eval(&mut x);
            simplex.push((x, fx));
        }

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_spread = (simplex[n].1 - simplex[0].1).abs();
            let x_spread = simplex[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&simplex[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if f_spread <= self.f_tol * (1.0 + simplex[0].1.abs()) && x_spread <= self.x_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let mut xr = along(-alpha);
            let fr = eval(&mut xr);
            if fr < simplex[0].1 {
                let mut xe = along(-gamma);
                let fe = eval(&mut xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (mut xc, fc) = if fr < simplex[n].1 {
                let mut xc = along(-rho);
                let fc = eval(&mut xc);
                (xc, fc)
            } else {
                let mut xc = along(rho);
                let fc = eval(&mut xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                clamp(&mut xc, lower, upper);
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for (x, fx) in simplex.iter_mut().skip(1) {
                for (xi, bi) in x.iter_mut().zip(&best) {
                    *xi = bi + sigma * (*xi - bi);
                }
                *fx = eval(x);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, fx) = simplex.swap_remove(0);
        Minimum {
            x,
            fx,
            iterations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let m = NelderMead::default().minimize(
            |x| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.2).powi(2),
            &[0.0, 0.0],
            &[-1.0, -1.0],
            &[1.0, 1.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 0.3).abs() < 1e-4);
        assert!((m.x[1] + 0.2).abs() < 1e-4);
    }

    #[test]
    fn respects_box() {
        let m = NelderMead::default().minimize(|x| (x[0] - 5.0).powi(2), &[0.5], &[0.0], &[1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-6);
    }
}
