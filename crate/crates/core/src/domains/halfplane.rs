use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::chart::{halfplane_angle, ConformalChart};
use crate::dtn::{DtnMatrix, FemSystem, TriangularMesh};
use crate::error::{Error, Result};
use crate::field_algebra::TensorField;

/// Half-plane DtN map sampled on compactly supported data: the energy form
/// `energy[(j, k)] = int Lambda(phi_j) phi_k dx` of the hat functions at the
/// boundary `nodes`.
#[derive(Debug, Clone)]
pub struct HalfPlaneDtn {
    nodes: Vec<f64>,
    energy: DMatrix<f64>,
}

impl HalfPlaneDtn {
    /// `nodes` strictly increasing.
    pub fn new(nodes: Vec<f64>, energy: DMatrix<f64>) -> Result<Self> {
        if energy.nrows() != nodes.len() || energy.ncols() != nodes.len() {
            return Err(Error::ShapeMismatch {
                expected: nodes.len() * nodes.len(),
                got: energy.len(),
            });
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NotMonotone("half-plane nodes must increase".into()));
        }
        Ok(HalfPlaneDtn { nodes, energy })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn energy(&self) -> &DMatrix<f64> {
        &self.energy
    }

    /// `int Lambda(phi) chi dx` for nodal values.
    pub fn pairing(&self, phi: &[f64], chi: &[f64]) -> f64 {
        let n = self.nodes.len();
        (0..n)
            .map(|j| chi[j] * (0..n).map(|k| self.energy[(j, k)] * phi[k]).sum::<f64>())
            .sum()
    }
}

/// Lower half plane meshed as the preimage of the disc mesh under the
/// half-plane chart, without the triangles within `cut` of the image of
/// infinity. The rim of the cut is listed in `flat`.
pub fn halfplane_mesh(h: f64, cut: f64) -> Result<TriangularMesh> {
    let one = Complex64::new(1.0, 0.0);
    TriangularMesh::disc(h)?
        .restricted(|t| t.iter().all(|w| (w - one).norm() >= cut))?
        .mapped(|w| ConformalChart::HalfPlane.unmap(w))
}

/// Energy form of the half-plane operator for `sigma` on a mesh from
/// [`halfplane_mesh`], with zero data on the rim.
pub fn halfplane_dtn_fem(sigma: &impl TensorField, mesh: &TriangularMesh) -> Result<HalfPlaneDtn> {
    let fixed: Vec<usize> = mesh.boundary().iter().chain(mesh.flat()).copied().collect();
    let sys = FemSystem::new(mesh, sigma, &fixed)?;
    // Boundary vertices sorted by increasing x.
    let mut order: Vec<usize> = mesh.boundary().to_vec();
    order.sort_by(|a, b| mesh.vertices()[*a].re.total_cmp(&mesh.vertices()[*b].re));
    let nv = mesh.vertices().len();
    let mut solutions = Vec::with_capacity(order.len());
    let mut loads = Vec::with_capacity(order.len());
    for v in &order {
        let u = sys.solve(|w| if w == *v { 1.0 } else { 0.0 }, None)?.values;
        let mut ku = vec![0.0; nv];
        sys.stiffness().mul_vec(&u, &mut ku);
        solutions.push(u);
        loads.push(ku);
    }
    let n = order.len();
    let energy = DMatrix::from_fn(n, n, |j, k| {
        solutions[j].iter().zip(&loads[k]).map(|(a, b)| a * b).sum()
    });
    let nodes = order.iter().map(|v| mesh.vertices()[*v].re).collect();
    HalfPlaneDtn::new(nodes, energy)
}

/// Disc operator `Lambda~ = transform of Lambda` under the half-plane chart,
/// on `|n| <= modes`. The trace `e^{i n theta} - 1` is compactly supported
/// on the real line up to the cut; constants complete it with
/// `Lambda~ 1 = 0`.
pub fn halfplane_to_disc_dtn(data: &HalfPlaneDtn, modes: usize) -> Result<DtnMatrix> {
    let theta: Vec<f64> = data.nodes.iter().map(|x| halfplane_angle(*x)).collect();
    let too_few = Error::TooManyModes {
        modes,
        available: theta.len(),
    };
    if theta.len() < 4 * modes {
        return Err(too_few);
    }
    // Nodes run from angle near 2 pi down to near 0; the wrap gap is the cut.
    let mut gap = theta[theta.len() - 1] + TAU - theta[0];
    for w in theta.windows(2) {
        gap = gap.max(w[0] - w[1]);
    }
    if gap > PI / (2.0 * modes as f64) {
        return Err(too_few);
    }
    let m = modes as i64;
    let trace = |n: i64| -> Vec<Complex64> {
        theta
            .iter()
            .map(|t| Complex64::from_polar(1.0, n as f64 * t) - 1.0)
            .collect()
    };
    let applied: Vec<Vec<Complex64>> = (-m..=m)
        .map(|n| {
            let c = trace(n);
            (0..c.len())
                .map(|j| (0..c.len()).map(|k| c[k] * data.energy[(j, k)]).sum())
                .collect()
        })
        .collect();
    let mut out = DtnMatrix::zeros(modes);
    for row in -m..=m {
        let c = trace(-row);
        for col in -m..=m {
            if row == 0 || col == 0 {
                continue;
            }
            let a = &applied[(col + m) as usize];
            let v: Complex64 = c.iter().zip(a).map(|(x, y)| x * y).sum();
            out.set(row, col, v / TAU);
        }
    }
    Ok(out)
}
