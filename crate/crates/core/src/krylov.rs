//! Restarted GMRES for complex linear systems given as a closure.

use num_complex::Complex64 as c64;

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<c64>,
    pub iterations: usize,
    /// Final `‖b − Ax‖ / ‖b‖`.
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iterations: usize,
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 120,
            max_iterations: 3000,
            tol: 1e-12,
        }
    }
}

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves `A x = b` with GMRES(m); `apply(v, out)` writes `A v` into `out`.
pub fn gmres(mut apply: impl FnMut(&[c64], &mut [c64]), b: &[c64], opts: GmresOptions) -> GmresOutcome {
    let n = b.len();
    let m = opts.restart.max(1);
    let mut x = vec![c64::new(0.0, 0.0); n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return GmresOutcome {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }

    let mut iterations = 0;
    let mut work = vec![c64::new(0.0, 0.0); n];
    let mut rel;
    loop {
        // r = b − A x
        apply(&x, &mut work);
        let r: Vec<c64> = b.iter().zip(&work).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / b_norm;
        if rel <= opts.tol || iterations >= opts.max_iterations {
            break;
        }

        let mut basis: Vec<Vec<c64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns, stored column-wise.
        let mut h: Vec<Vec<c64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<c64> = Vec::with_capacity(m);
        let mut g = vec![c64::new(0.0, 0.0); m + 1];
        g[0] = c64::new(beta, 0.0);

        let mut k = 0;
        while k < m && iterations < opts.max_iterations {
            let mut w = vec![c64::new(0.0, 0.0); n];
            apply(&basis[k], &mut w);
            iterations += 1;

            let mut col = vec![c64::new(0.0, 0.0); k + 2];
            // Modified Gram–Schmidt with one reorthogonalization pass.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(v, &w);
                    col[i] += hij;
                    axpy(-hij, v, &mut w);
                }
            }
            let h_next = norm(&w);
            col[k + 1] = c64::new(h_next, 0.0);

            for i in 0..k {
                let (c, s) = (cs[i], sn[i]);
                let a = col[i];
                let bb = col[i + 1];
                col[i] = c * a + s * bb;
                col[i + 1] = -s.conj() * a + c * bb;
            }
            let a = col[k];
            let bb = col[k + 1];
            let r_abs = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if r_abs == 0.0 {
                (1.0, c64::new(0.0, 0.0))
            } else if a.norm() == 0.0 {
                (0.0, c64::new(1.0, 0.0))
            } else {
                let phase = a / a.norm();
                (a.norm() / r_abs, phase * bb.conj() / r_abs)
            };
            col[k] = c * a + s * bb;
            col[k + 1] = c64::new(0.0, 0.0);
            cs.push(c);
            sn.push(s);
            g[k + 1] = -s.conj() * g[k];
            g[k] = c * g[k];
            h.push(col);

            k += 1;
            rel = g[k].norm() / b_norm;
            if h_next == 0.0 || rel <= opts.tol {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // Back substitution on the k×k triangle.
        let mut y = vec![c64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut x);
        }
    }

    GmresOutcome {
        x,
        iterations,
        relative_residual: rel,
        converged: rel <= opts.tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_a_random_well_conditioned_system() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<Vec<c64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let base = c64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                        if i == j {
                            base + c64::new(3.0, 1.0)
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect();
        let x_true: Vec<c64> = (0..n).map(|i| c64::new(i as f64, -(i as f64) * 0.5)).collect();
        let b: Vec<c64> = a.iter().map(|row| row.iter().zip(&x_true).map(|(p, q)| p * q).sum()).collect();
        let out = gmres(
            |v, o| {
                for (oi, row) in o.iter_mut().zip(&a) {
                    *oi = row.iter().zip(v).map(|(p, q)| p * q).sum();
                }
            },
            &b,
            GmresOptions {
                restart: 10,
                max_iterations: 500,
                tol: 1e-13,
            },
        );
        assert!(out.converged);
        for (xi, ti) in out.x.iter().zip(&x_true) {
            assert!((xi - ti).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let out = gmres(|v, o| o.copy_from_slice(v), &[c64::new(0.0, 0.0); 4], GmresOptions::default());
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }
}
