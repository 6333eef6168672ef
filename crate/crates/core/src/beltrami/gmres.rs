use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct GmresReport {
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES for `A x = b`; `x` holds the initial guess. `tol` is
/// relative to `|b|`.
pub(crate) fn gmres(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresReport> {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresReport { iterations: 0 });
    }
    let mut total = 0;
    loop {
        let ax = apply(x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        let res = beta / bnorm;
        if res <= tol {
            return Ok(GmresReport { iterations: total });
        }
        if total >= max_iter {
            return Err(Error::NonConvergence {
                what: "GMRES",
                iterations: total,
                residual: res,
                contraction: 1.0,
            });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut steps = 0;
        for j in 0..restart {
            let mut w = apply(&basis[j])?;
            let mut col = vec![0.0; j + 2];
            // Modified Gram-Schmidt, twice for stability.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let h = dot(&w, v);
                    col[i] += h;
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= h * b);
                }
            }
            col[j + 1] = norm(&w);
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = col[j].hypot(col[j + 1]);
            let (c, s) = if d == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / d, col[j + 1] / d)
            };
            cs.push(c);
            sn.push(s);
            let hn = col[j + 1];
            col[j] = d;
            col[j + 1] = 0.0;
            g.push(-s * g[j]);
            g[j] *= c;
            hess.push(col);
            steps = j + 1;
            total += 1;
            if g[j + 1].abs() / bnorm <= tol || total >= max_iter || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // Back substitution on the triangular factor.
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let s: f64 = (i + 1..steps).map(|k| hess[k][i] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[k]).for_each(|(a, v)| *a += yk * v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 30;
        let apply = |x: &[f64]| -> Result<Vec<f64>> {
            Ok((0..n)
                .map(|i| {
                    let mut v = 3.0 * x[i];
                    if i > 0 {
                        v -= x[i - 1];
                    }
                    if i + 2 < n {
                        v += 0.5 * x[i + 2];
                    }
                    v
                })
                .collect())
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut x = vec![0.0; n];
        let rep = gmres(apply, &b, &mut x, 1e-12, 8, 200).unwrap();
        let ax = apply(&x).unwrap();
        let err = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err} after {}", rep.iterations);
    }
}
