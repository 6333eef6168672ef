use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(c, v)| v * x[*c]).sum();
        }
    }

    pub fn dot_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (r, xr) in x.iter().enumerate().take(self.n) {
            let (cols, vals) = self.row(r);
            let row: f64 = cols.iter().zip(vals).map(|(c, v)| v * y[*c]).sum();
            acc += xr * row;
        }
        acc
    }

    /// Principal submatrix on `keep` (in that order), the coupling block
    /// from the remaining indices (rows follow `keep`), and those indices.
    pub fn split(&self, keep: &[usize]) -> (CsrMatrix, CsrMatrix, Vec<usize>) {
        let mut slot = vec![usize::MAX; self.n];
        for (i, k) in keep.iter().enumerate() {
            slot[*k] = i;
        }
        let rest: Vec<usize> = (0..self.n).filter(|k| slot[*k] == usize::MAX).collect();
        let mut rest_slot = vec![usize::MAX; self.n];
        for (i, k) in rest.iter().enumerate() {
            rest_slot[*k] = i;
        }
        let mut inner = Vec::new();
        let mut coupling = Vec::new();
        for (i, &r) in keep.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if slot[*c] != usize::MAX {
                    inner.push((i, slot[*c], *v));
                } else {
                    coupling.push((i, rest_slot[*c], *v));
                }
            }
        }
        (
            CsrMatrix::from_triplets(keep.len(), inner),
            CsrMatrix::from_triplets(keep.len(), coupling),
            rest,
        )
    }
}

/// Incomplete Cholesky factor on the lower-triangular pattern.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    lower: CsrMatrix,
    diag: Vec<f64>,
}

impl IncompleteCholesky {
    /// Falls back to a diagonally shifted factorization on breakdown.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let mut shift = 0.0;
        for _ in 0..12 {
            if let Some(f) = Self::try_factor(a, shift) {
                return Ok(f);
            }
            shift = if shift == 0.0 { 1e-3 } else { shift * 4.0 };
        }
        Err(Error::Singular("incomplete Cholesky broke down".into()))
    }

    fn try_factor(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.n;
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let (ac, av) = a.row(i);
            let start = cols.len();
            let mut aii = 0.0;
            for (c, v) in ac.iter().zip(av) {
                if *c < i {
                    cols.push(*c);
                    vals.push(*v);
                } else if *c == i {
                    aii = *v * (1.0 + shift);
                }
            }
            for p in start..cols.len() {
                let k = cols[p];
                // Sparse dot of row i and row k over columns below k.
                let (ks, ke) = (row_ptr[k], row_ptr[k + 1]);
                let mut s = 0.0;
                let (mut x, mut y) = (start, ks);
                while x < p && y < ke {
                    match cols[x].cmp(&cols[y]) {
                        std::cmp::Ordering::Less => x += 1,
                        std::cmp::Ordering::Greater => y += 1,
                        std::cmp::Ordering::Equal => {
                            s += vals[x] * vals[y];
                            x += 1;
                            y += 1;
                        }
                    }
                }
                vals[p] = (vals[p] - s) / diag[k];
            }
            let sq: f64 = vals[start..].iter().map(|v| v * v).sum();
            let d = aii - sq;
            if !(d > 1e-14 * aii.abs()) {
                return None;
            }
            diag[i] = d.sqrt();
            row_ptr[i + 1] = cols.len();
        }
        Some(IncompleteCholesky {
            lower: CsrMatrix {
                n,
                row_ptr,
                cols,
                vals,
            },
            diag,
        })
    }

    /// `z = (L L^t)^{-1} r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let (cols, vals) = self.lower.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(c, v)| v * z[*c]).sum();
            z[i] = (r[i] - s) / self.diag[i];
        }
        for i in (0..n).rev() {
            z[i] /= self.diag[i];
            let zi = z[i];
            let (cols, vals) = self.lower.row(i);
            for (c, v) in cols.iter().zip(vals) {
                z[*c] -= v * zi;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients; `x` holds the initial guess.
pub fn pcg(
    a: &CsrMatrix,
    pre: &IncompleteCholesky,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgReport> {
    let n = a.n;
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(CgReport {
                iterations: it,
                residual: res,
            });
        }
        a.mul_vec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Singular(format!(
                "matrix not positive definite (p^T A p = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        pre.apply(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol {
        return Ok(CgReport {
            iterations: max_iter,
            residual: res,
        });
    }
    Err(Error::NonConvergence {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: res,
        contraction: 1.0,
    })
}
