//! Restarted GMRES with right preconditioning.

pub(crate) struct KrylovOutcome {
    pub solution: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` with `A` applied as `apply` and an approximate inverse
/// `precond`; the iterate starts from `precond(b)`.
pub(crate) fn gmres(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    tolerance: f64,
    restart: usize,
    max_iterations: usize,
) -> KrylovOutcome {
    let n = rhs.len();
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return KrylovOutcome { solution: vec![0.0; n], relative_residual: 0.0, iterations: 0 };
    }
    let mut x = precond(rhs);
    let mut iterations = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta / b_norm <= tolerance || iterations >= max_iterations {
            return KrylovOutcome { solution: x, relative_residual: beta / b_norm, iterations };
        }
        let m = restart.min(max_iterations - iterations).max(1);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let z = precond(&basis[j]);
            let mut w = apply(&z);
            for (i, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                hess[i][j] = h;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= h * vk;
                }
            }
            let h_next = norm(&w);
            hess[j + 1][j] = h_next;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = hess[j][j] / denom;
                sn[j] = hess[j + 1][j] / denom;
            }
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            iterations += 1;
            if g[j + 1].abs() / b_norm <= tolerance || h_next == 0.0 {
                break;
            }
            basis.push(w.into_iter().map(|v| v / h_next).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| hess[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vk) in update.iter_mut().zip(v) {
                *u += yi * vk;
            }
        }
        let dz = precond(&update);
        for (xi, d) in x.iter_mut().zip(&dz) {
            *xi += d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_nonsymmetric_system() {
        // tridiagonal with convection, solution known
        let n = 50;
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    4.0 * x[i] - 1.5 * l - 0.5 * r
                })
                .collect()
        };
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = apply(&exact);
        let id = |x: &[f64]| x.to_vec();
        let out = gmres(&apply, &id, &b, 1e-12, 10, 500);
        assert!(out.relative_residual <= 1e-12);
        for (a, e) in out.solution.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-10);
        }
    }
}
