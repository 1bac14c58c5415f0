//! Anderson mixing for the lagged fixed-point iterations.
//!
//! Plain Picard iteration of the lagged-mobility map can lock into a cycle
//! when a nodal value hovers near zero at a contact point, because the
//! regularized mobility switches branch there. The mixed iterate has the
//! same fixed points as the map itself.

use std::collections::VecDeque;

/// Columns whose orthogonalized norm falls below this fraction of their
/// original norm are dropped from the least-squares problem.
const DROP_TOL: f64 = 1e-10;

pub(crate) struct Anderson {
    depth: usize,
    /// Mixing weight on `G`; 1 gives undamped Anderson.
    beta: f64,
    /// Recent `(x_k, g_k)` pairs, oldest first, where `g_k = G(x_k)`.
    history: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    pub(crate) fn new(depth: usize, beta: f64) -> Self {
        Self {
            depth,
            beta,
            history: VecDeque::with_capacity(depth + 1),
        }
    }

    /// Records `g = G(x)` and returns the next iterate.
    pub(crate) fn next(&mut self, x: Vec<f64>, g: Vec<f64>) -> Vec<f64> {
        self.history.push_back((x, g));
        if self.history.len() > self.depth + 1 {
            self.history.pop_front();
        }
        let len = self.history.len();
        let (x_k, g_k) = self.history[len - 1].clone();
        let beta = self.beta;
        let blend = |x: &[f64], g: &[f64]| -> Vec<f64> {
            x.iter().zip(g).map(|(x, g)| x + beta * (g - x)).collect()
        };
        if len < 2 {
            return blend(&x_k, &g_k);
        }
        let f_k: Vec<f64> = g_k.iter().zip(&x_k).map(|(g, x)| g - x).collect();

        // differences newest first
        let mut df = Vec::with_capacity(len - 1);
        let mut dg = Vec::with_capacity(len - 1);
        let mut dx = Vec::with_capacity(len - 1);
        for i in (1..len).rev() {
            let (xa, ga) = &self.history[i - 1];
            let (xb, gb) = &self.history[i];
            df.push(
                (0..x_k.len())
                    .map(|j| (gb[j] - xb[j]) - (ga[j] - xa[j]))
                    .collect::<Vec<f64>>(),
            );
            dg.push(gb.iter().zip(ga).map(|(b, a)| b - a).collect::<Vec<f64>>());
            dx.push(xb.iter().zip(xa).map(|(b, a)| b - a).collect::<Vec<f64>>());
        }

        // modified Gram-Schmidt on the columns of dF
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut r: Vec<Vec<f64>> = Vec::new();
        let mut kept: Vec<usize> = Vec::new();
        for (c, col) in df.iter().enumerate() {
            let norm0 = dot(col, col).sqrt();
            if norm0 == 0.0 {
                continue;
            }
            let mut v = col.clone();
            let mut rc = vec![0.0; q.len() + 1];
            for (i, qi) in q.iter().enumerate() {
                let coef = dot(qi, &v);
                rc[i] = coef;
                axpy(-coef, qi, &mut v);
            }
            let nv = dot(&v, &v).sqrt();
            if nv <= DROP_TOL * norm0 {
                continue;
            }
            rc[q.len()] = nv;
            v.iter_mut().for_each(|e| *e /= nv);
            q.push(v);
            r.push(rc);
            kept.push(c);
        }
        if q.is_empty() {
            return blend(&x_k, &g_k);
        }
        // gamma = R^{-1} Q^T f_k, R stored by columns
        let m = q.len();
        let rhs: Vec<f64> = q.iter().map(|qi| dot(qi, &f_k)).collect();
        let mut gamma = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for jj in i + 1..m {
                s -= r[jj][i] * gamma[jj];
            }
            gamma[i] = s / r[i][i];
        }
        let mut xbar = x_k.clone();
        let mut gbar = g_k.clone();
        for (gm, &c) in gamma.iter().zip(&kept) {
            axpy(-gm, &dx[c], &mut xbar);
            axpy(-gm, &dg[c], &mut gbar);
        }
        let out = blend(&xbar, &gbar);
        if out.iter().all(|v| v.is_finite()) {
            out
        } else {
            self.history.clear();
            blend(&x_k, &g_k)
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_linear_map_in_few_steps() {
        // G(x) = A x + b with a contraction that Picard handles slowly
        let a = [[0.99, 0.0], [0.0, -0.98]];
        let b = [0.01, 1.98];
        let g = |x: &[f64]| {
            vec![
                a[0][0] * x[0] + a[0][1] * x[1] + b[0],
                a[1][0] * x[0] + a[1][1] * x[1] + b[1],
            ]
        };
        let mut aa = Anderson::new(3, 1.0);
        let mut x = vec![0.0, 0.0];
        for _ in 0..6 {
            let gx = g(&x);
            x = aa.next(x, gx);
        }
        assert!(
            (x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10,
            "{x:?}"
        );
    }

    #[test]
    fn breaks_two_cycle() {
        // G(x) = -x + 2 cycles forever under Picard from x = 0
        let mut aa = Anderson::new(2, 1.0);
        let mut x = vec![0.0];
        for _ in 0..3 {
            let gx = vec![2.0 - x[0]];
            x = aa.next(x, gx);
        }
        assert!((x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn first_call_is_picard() {
        let mut aa = Anderson::new(4, 1.0);
        assert_eq!(aa.next(vec![1.0, 2.0], vec![3.0, 4.0]), vec![3.0, 4.0]);
    }
}
