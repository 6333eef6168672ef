use num_complex::Complex64;

use super::mesh::TriangularMesh;
use super::sparse::{pcg, CgReport, CsrMatrix, IncompleteCholesky};
use crate::error::{Error, Result};
use crate::field_algebra::{SymTensor, TensorField};

/// Relative residual for the stiffness solves.
pub const FEM_TOL: f64 = 1e-12;

/// Gradients of the three hat functions on triangle `t`, as `x + i y`.
pub(crate) fn hat_gradients(mesh: &TriangularMesh, t: usize) -> [Complex64; 3] {
    let [a, b, c] = mesh.triangles()[t].map(|v| mesh.vertices()[v]);
    let twice = 2.0 * mesh.area(t);
    let i = Complex64::new(0.0, 1.0);
    [
        i * (c - b) / twice,
        i * (a - c) / twice,
        i * (b - a) / twice,
    ]
}

fn form(s: &SymTensor, g: Complex64, h: Complex64) -> f64 {
    let [x, y] = s.apply([h.re, h.im]);
    g.re * x + g.im * y
}

/// P1 stiffness matrix with `sigma` sampled at triangle centroids.
pub fn assemble_stiffness(mesh: &TriangularMesh, sigma: &impl TensorField) -> Result<CsrMatrix> {
    let mut entries = Vec::with_capacity(9 * mesh.triangles().len());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let s = sigma.tensor_at(mesh.centroid(k));
        if !(s.det() > 0.0 && s.s11 > 0.0) {
            let (lo, hi) = s.eigenvalues();
            return Err(Error::NotPositiveDefinite { cell: k, lo, hi });
        }
        let g = hat_gradients(mesh, k);
        let area = mesh.area(k);
        for a in 0..3 {
            for b in 0..3 {
                entries.push((tri[a], tri[b], area * form(&s, g[a], g[b])));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.vertices().len(), entries))
}

/// Vertex values of a P1 function with the solver record.
#[derive(Debug, Clone)]
pub struct FemSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Stiffness matrix partitioned into fixed (Dirichlet) and free vertices,
/// with the free block factorized for repeated solves.
pub struct FemSystem<'m> {
    mesh: &'m TriangularMesh,
    stiffness: CsrMatrix,
    fixed: Vec<usize>,
    free: Vec<usize>,
    free_block: CsrMatrix,
    coupling: CsrMatrix,
    pre: IncompleteCholesky,
}

impl<'m> FemSystem<'m> {
    pub fn new(
        mesh: &'m TriangularMesh,
        sigma: &impl TensorField,
        fixed: &[usize],
    ) -> Result<Self> {
        Self::from_stiffness(mesh, assemble_stiffness(mesh, sigma)?, fixed)
    }

    pub fn from_stiffness(
        mesh: &'m TriangularMesh,
        stiffness: CsrMatrix,
        fixed: &[usize],
    ) -> Result<Self> {
        if fixed.is_empty() {
            return Err(Error::Singular(
                "no Dirichlet vertex; the Neumann problem needs a pinned vertex".into(),
            ));
        }
        let mut is_fixed = vec![false; mesh.vertices().len()];
        for v in fixed {
            is_fixed[*v] = true;
        }
        let free: Vec<usize> = (0..is_fixed.len()).filter(|v| !is_fixed[*v]).collect();
        let (free_block, coupling, rest) = stiffness.split(&free);
        let pre = IncompleteCholesky::new(&free_block)?;
        Ok(FemSystem {
            mesh,
            stiffness,
            fixed: rest,
            free,
            free_block,
            coupling,
            pre,
        })
    }

    pub fn mesh(&self) -> &TriangularMesh {
        self.mesh
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Fixed vertices in ascending order.
    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    /// Solves with `u = fixed_value(v)` on the fixed vertices and nodal
    /// loads `load` (natural boundary data) on the free ones.
    pub fn solve(
        &self,
        fixed_value: impl Fn(usize) -> f64,
        load: Option<&[f64]>,
    ) -> Result<FemSolution> {
        let ub: Vec<f64> = self.fixed.iter().map(|v| fixed_value(*v)).collect();
        let mut rhs = vec![0.0; self.free.len()];
        self.coupling.mul_vec(&ub, &mut rhs);
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = -*r;
            if let Some(f) = load {
                *r += f[self.free[i]];
            }
        }
        let mut x = vec![0.0; self.free.len()];
        let CgReport {
            iterations,
            residual,
        } = pcg(
            &self.free_block,
            &self.pre,
            &rhs,
            &mut x,
            FEM_TOL,
            20 * self.free.len().max(50),
        )?;
        let mut values = vec![0.0; self.mesh.vertices().len()];
        for (v, u) in self.fixed.iter().zip(&ub) {
            values[*v] = *u;
        }
        for (v, u) in self.free.iter().zip(&x) {
            values[*v] = *u;
        }
        Ok(FemSolution {
            values,
            iterations,
            residual,
        })
    }

    /// `u^T K v`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.dot_form(u, v)
    }
}

/// `integral of J grad u . grad phi_i`, with `J` the rotation by `+pi/2`.
pub(crate) fn rotated_gradient_load(mesh: &TriangularMesh, u: &[f64]) -> Vec<f64> {
    let mut load = vec![0.0; mesh.vertices().len()];
    let i = Complex64::new(0.0, 1.0);
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let g = hat_gradients(mesh, k);
        let grad: Complex64 = (0..3).map(|a| g[a] * u[tri[a]]).sum();
        let rot = i * grad;
        let area = mesh.area(k);
        for a in 0..3 {
            load[tri[a]] += area * (rot.re * g[a].re + rot.im * g[a].im);
        }
    }
    load
}

/// Piecewise-constant gradient of a P1 function on each triangle.
pub fn gradients(mesh: &TriangularMesh, u: &[f64]) -> Vec<Complex64> {
    (0..mesh.triangles().len())
        .map(|k| {
            let g = hat_gradients(mesh, k);
            let tri = mesh.triangles()[k];
            (0..3).map(|a| g[a] * u[tri[a]]).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_algebra::ConductivityModel;

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let m = TriangularMesh::disc(0.2).unwrap();
        let k = assemble_stiffness(&m, &ConductivityModel::Identity).unwrap();
        let ones = vec![1.0; m.vertices().len()];
        let mut out = vec![0.0; ones.len()];
        k.mul_vec(&ones, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn anisotropic_affine_is_exact() {
        let m = TriangularMesh::disc(0.1).unwrap();
        let s = ConductivityModel::Constant {
            tensor: SymTensor::new(2.0, 1.0, 2.0),
            radius: 10.0,
        };
        let sys = FemSystem::new(&m, &s, m.boundary()).unwrap();
        let f = |z: Complex64| 0.7 * z.re - 1.3 * z.im + 0.2;
        let u = sys.solve(|v| f(m.vertices()[v]), None).unwrap();
        for (z, val) in m.vertices().iter().zip(&u.values) {
            assert!((val - f(*z)).abs() < 1e-9);
        }
    }
}
