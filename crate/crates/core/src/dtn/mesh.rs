use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Conforming P1 triangulation with an ordered boundary parametrization.
///
/// `boundary[j]` sits at parameter `boundary_angles[j]`, increasing
/// counterclockwise. For the disc and star-shaped domains the ring closes and
/// the angles are `2 pi j / M`; for the half disc it is the curved arc from
/// `0` to `pi` and the straight side is listed separately in `flat`.
#[derive(Debug, Clone)]
pub struct TriangularMesh {
    vertices: Vec<Complex64>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<usize>,
    boundary_angles: Vec<f64>,
    flat: Vec<usize>,
    closed: bool,
    h: f64,
}

struct RingMesh {
    vertices: Vec<Complex64>,
    triangles: Vec<[usize; 3]>,
    rings: usize,
}

fn ring_start(j: usize) -> usize {
    if j == 0 {
        0
    } else {
        1 + 3 * j * (j - 1)
    }
}

fn ring_vertex(j: usize, i: usize) -> usize {
    if j == 0 {
        0
    } else {
        ring_start(j) + i % (6 * j)
    }
}

fn orient(v: &[Complex64], t: [usize; 3]) -> [usize; 3] {
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    if ((b - a).conj() * (c - a)).im < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

/// Concentric rings, ring `j` carrying `6 j` vertices. The upper half is
/// triangulated sector by sector and mirrored, so the mesh is symmetric
/// under conjugation.
fn ring_mesh(rings: usize) -> RingMesh {
    let mut vertices = vec![Complex64::new(0.0, 0.0)];
    for j in 1..=rings {
        let r = j as f64 / rings as f64;
        for i in 0..6 * j {
            let t = 2.0 * PI * i as f64 / (6 * j) as f64;
            vertices.push(Complex64::from_polar(r, t));
        }
    }
    let mirror = |v: usize| -> usize {
        if v == 0 {
            return 0;
        }
        let mut j = 1;
        while ring_start(j + 1) <= v {
            j += 1;
        }
        let i = v - ring_start(j);
        ring_vertex(j, 6 * j - i)
    };
    let mut upper = Vec::new();
    for s in 0..3 {
        upper.push([0, ring_vertex(1, s), ring_vertex(1, s + 1)]);
    }
    for j in 2..=rings {
        for s in 0..3 {
            let inner: Vec<usize> = ((j - 1) * s..=(j - 1) * (s + 1))
                .map(|i| ring_vertex(j - 1, i))
                .collect();
            let outer: Vec<usize> = (j * s..=j * (s + 1)).map(|i| ring_vertex(j, i)).collect();
            let (mut a, mut b) = (0, 0);
            while a + 1 < inner.len() || b + 1 < outer.len() {
                let advance_inner = if a + 1 == inner.len() {
                    false
                } else if b + 1 == outer.len() {
                    true
                } else {
                    (vertices[inner[a + 1]] - vertices[outer[b]]).norm()
                        < (vertices[inner[a]] - vertices[outer[b + 1]]).norm()
                };
                if advance_inner {
                    upper.push([inner[a], outer[b], inner[a + 1]]);
                    a += 1;
                } else {
                    upper.push([inner[a], outer[b], outer[b + 1]]);
                    b += 1;
                }
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * upper.len());
    for t in &upper {
        triangles.push(orient(&vertices, *t));
    }
    for t in &upper {
        triangles.push(orient(
            &vertices,
            [mirror(t[0]), mirror(t[1]), mirror(t[2])],
        ));
    }
    RingMesh {
        vertices,
        triangles,
        rings,
    }
}

fn max_edge(vertices: &[Complex64], triangles: &[[usize; 3]]) -> f64 {
    let mut h: f64 = 0.0;
    for t in triangles {
        for e in 0..3 {
            h = h.max((vertices[t[e]] - vertices[t[(e + 1) % 3]]).norm());
        }
    }
    h
}

fn rings_for(h: f64, scale: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Mesh(format!("mesh size must be positive, got {h}")));
    }
    // Longest edges are the ring diagonals, about 1.08 / rings on the unit disc.
    let mut rings = ((1.0 * scale / h).ceil() as usize).max(2);
    loop {
        let m = ring_mesh(rings);
        let v: Vec<Complex64> = m.vertices.iter().map(|z| z * scale).collect();
        if max_edge(&v, &m.triangles) <= h || rings > 4000 {
            return Ok(rings);
        }
        rings += (rings / 20).max(1);
    }
}

impl TriangularMesh {
    /// Unit disc with every edge no longer than `h`.
    pub fn disc(h: f64) -> Result<Self> {
        Self::disc_with_rings(rings_for(h, 1.0)?)
    }

    pub fn disc_with_rings(rings: usize) -> Result<Self> {
        if rings < 2 {
            return Err(Error::Mesh("need at least two rings".into()));
        }
        let m = ring_mesh(rings);
        let boundary: Vec<usize> = (0..6 * rings).map(|i| ring_vertex(rings, i)).collect();
        let boundary_angles = (0..6 * rings)
            .map(|i| 2.0 * PI * i as f64 / (6 * rings) as f64)
            .collect();
        let h = max_edge(&m.vertices, &m.triangles);
        Ok(TriangularMesh {
            vertices: m.vertices,
            triangles: m.triangles,
            boundary,
            boundary_angles,
            flat: Vec::new(),
            closed: true,
            h,
        })
    }

    /// `{ r rho(theta) e^{i theta} : r < 1 }`, parametrized on the boundary by
    /// the polar angle.
    pub fn star_shaped(h: f64, rho: impl Fn(f64) -> f64) -> Result<Self> {
        let mut scale: f64 = 0.0;
        for k in 0..720 {
            let r = rho(2.0 * PI * k as f64 / 720.0);
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Mesh(format!(
                    "star-shaped radius must be positive, got {r}"
                )));
            }
            scale = scale.max(r);
        }
        let mut rings = rings_for(h, scale)?;
        loop {
            let mesh = Self::disc_with_rings(rings)?.radially_scaled(&rho)?;
            if mesh.h <= h || rings > 4000 {
                return Ok(mesh);
            }
            rings += (rings / 20).max(1);
        }
    }

    fn radially_scaled(self, rho: &impl Fn(f64) -> f64) -> Result<Self> {
        self.mapped(|z| {
            if z == Complex64::new(0.0, 0.0) {
                z
            } else {
                z * rho(z.arg())
            }
        })
    }

    /// Image of the mesh under `f`, keeping the boundary parametrization.
    pub fn mapped(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let vertices: Vec<Complex64> = self.vertices.iter().map(|z| f(*z)).collect();
        for (k, t) in self.triangles.iter().enumerate() {
            let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if ((b - a).conj() * (c - a)).im <= 0.0 {
                return Err(Error::Mesh(format!("map folds triangle {k} of the mesh")));
            }
        }
        let h = max_edge(&vertices, &self.triangles);
        Ok(TriangularMesh {
            vertices,
            h,
            ..self.clone()
        })
    }

    /// Upper half `{|z| < 1, Im z > 0}` of the symmetric disc mesh.
    pub fn upper_half(h: f64) -> Result<Self> {
        let rings = rings_for(h, 1.0)?;
        let m = ring_mesh(rings);
        let eps = 1e-12;
        let keep: Vec<bool> = m.vertices.iter().map(|z| z.im >= -eps).collect();
        let mut renumber = vec![usize::MAX; m.vertices.len()];
        let mut vertices = Vec::new();
        for (k, z) in m.vertices.iter().enumerate() {
            if keep[k] {
                renumber[k] = vertices.len();
                vertices.push(Complex64::new(z.re, z.im.max(0.0)));
            }
        }
        let triangles: Vec<[usize; 3]> = m
            .triangles
            .iter()
            .filter(|t| t.iter().all(|v| keep[*v]))
            .map(|t| [renumber[t[0]], renumber[t[1]], renumber[t[2]]])
            .collect();
        let outer = m.rings;
        let boundary: Vec<usize> = (0..=3 * outer)
            .map(|i| renumber[ring_vertex(outer, i)])
            .collect();
        let boundary_angles = (0..=3 * outer)
            .map(|i| PI * i as f64 / (3 * outer) as f64)
            .collect();
        let mut flat: Vec<usize> = (0..vertices.len())
            .filter(|&k| vertices[k].im.abs() < eps && vertices[k].norm() < 1.0 - eps)
            .collect();
        flat.sort_by(|a, b| vertices[*a].re.total_cmp(&vertices[*b].re));
        let h = max_edge(&vertices, &triangles);
        Ok(TriangularMesh {
            vertices,
            triangles,
            boundary,
            boundary_angles,
            flat,
            closed: false,
            h,
        })
    }

    /// Keeps the triangles accepted by `keep`. Vertices that touched a
    /// dropped triangle leave the parametrized boundary and form the rim,
    /// listed in `flat`.
    pub fn restricted(&self, keep: impl Fn([Complex64; 3]) -> bool) -> Result<Self> {
        let corners = |t: &[usize; 3]| t.map(|v| self.vertices[v]);
        let (kept, dropped): (Vec<[usize; 3]>, Vec<[usize; 3]>) =
            self.triangles.iter().partition(|t| keep(corners(t)));
        if kept.is_empty() {
            return Err(Error::Mesh("restriction removes every triangle".into()));
        }
        let mut rim = vec![false; self.vertices.len()];
        for t in &dropped {
            for v in t {
                rim[*v] = true;
            }
        }
        let mut renumber = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for t in &kept {
            for v in t {
                if renumber[*v] == usize::MAX {
                    renumber[*v] = vertices.len();
                    vertices.push(self.vertices[*v]);
                }
            }
        }
        let triangles: Vec<[usize; 3]> = kept.iter().map(|t| t.map(|v| renumber[v])).collect();
        let (mut boundary, mut boundary_angles) = (Vec::new(), Vec::new());
        for (v, a) in self.boundary.iter().zip(&self.boundary_angles) {
            if renumber[*v] != usize::MAX && !rim[*v] {
                boundary.push(renumber[*v]);
                boundary_angles.push(*a);
            }
        }
        let mut flat: Vec<usize> = (0..self.vertices.len())
            .filter(|v| renumber[*v] != usize::MAX && rim[*v])
            .map(|v| renumber[v])
            .collect();
        flat.extend(self.flat.iter().filter(|v| renumber[**v] != usize::MAX && !rim[**v]).map(|v| renumber[*v]));
        let h = max_edge(&vertices, &triangles);
        Ok(TriangularMesh {
            vertices,
            triangles,
            boundary,
            boundary_angles,
            flat,
            closed: false,
            h,
        })
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn boundary_angles(&self) -> &[f64] {
        &self.boundary_angles
    }

    /// Boundary vertices off the parametrized part: the straight side of a
    /// half disc, or the rim left by [`TriangularMesh::restricted`].
    pub fn flat(&self) -> &[usize] {
        &self.flat
    }

    /// Whether the boundary ring closes up (disc-like domains).
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Longest edge.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((b - a).conj() * (c - a)).im
    }

    pub fn centroid(&self, t: usize) -> Complex64 {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// `V - E + T`.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Checks orientation, edge manifoldness and that the boundary edges are
    /// exactly the listed ones.
    pub fn validate(&self) -> Result<()> {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, t) in self.triangles.iter().enumerate() {
            if self.area(k) <= 0.0 {
                return Err(Error::Mesh(format!(
                    "triangle {k} is not positively oriented"
                )));
            }
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut on_boundary = vec![false; self.vertices.len()];
        for v in self.boundary.iter().chain(&self.flat) {
            on_boundary[*v] = true;
        }
        for (&(a, b), &count) in &edges {
            if count > 2 {
                return Err(Error::Mesh(format!(
                    "edge ({a},{b}) shared by {count} triangles"
                )));
            }
            if count == 1 && !(on_boundary[a] && on_boundary[b]) {
                return Err(Error::Mesh(format!("free edge ({a},{b}) off the boundary")));
            }
        }
        if self.euler_characteristic() != 1 {
            return Err(Error::Mesh(format!(
                "domain is not simply connected (Euler characteristic {})",
                self.euler_characteristic()
            )));
        }
        Ok(())
    }

    pub fn locator(&self) -> MeshLocator<'_> {
        MeshLocator::new(self)
    }
}

/// Bucketed point location for evaluating P1 functions.
pub struct MeshLocator<'a> {
    mesh: &'a TriangularMesh,
    lo: Complex64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> MeshLocator<'a> {
    fn new(mesh: &'a TriangularMesh) -> Self {
        let (mut lo, mut hi) = (mesh.vertices[0], mesh.vertices[0]);
        for z in &mesh.vertices {
            lo = Complex64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = Complex64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        let cell = mesh.h.max(1e-12) * 2.0;
        let nx = (((hi.re - lo.re) / cell).ceil() as usize).max(1);
        let ny = (((hi.im - lo.im) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for (k, t) in mesh.triangles.iter().enumerate() {
            let p = t.map(|v| mesh.vertices[v]);
            let (x0, x1) = (
                p.iter().map(|z| z.re).fold(f64::INFINITY, f64::min),
                p.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (
                p.iter().map(|z| z.im).fold(f64::INFINITY, f64::min),
                p.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max),
            );
            for by in clamp((y0 - lo.im) / cell, ny)..=clamp((y1 - lo.im) / cell, ny) {
                for bx in clamp((x0 - lo.re) / cell, nx)..=clamp((x1 - lo.re) / cell, nx) {
                    buckets[by * nx + bx].push(k);
                }
            }
        }
        MeshLocator {
            mesh,
            lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Triangle containing `z` and its barycentric coordinates.
    pub fn locate(&self, z: Complex64) -> Option<(usize, [f64; 3])> {
        let bx = ((z.re - self.lo.re) / self.cell).floor();
        let by = ((z.im - self.lo.im) / self.cell).floor();
        if bx < 0.0 || by < 0.0 || bx as usize >= self.nx || by as usize >= self.ny {
            return None;
        }
        let tol = 1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &k in &self.buckets[by as usize * self.nx + bx as usize] {
            let l = barycentric(self.mesh, k, z);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= -tol {
                return Some((k, l));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((k, l, worst));
            }
        }
        best.filter(|b| b.2 > -1e-9).map(|b| (b.0, b.1))
    }

    pub fn interpolate(&self, values: &[f64], z: Complex64) -> Option<f64> {
        let (k, l) = self.locate(z)?;
        let t = self.mesh.triangles[k];
        Some(l[0] * values[t[0]] + l[1] * values[t[1]] + l[2] * values[t[2]])
    }
}

fn barycentric(mesh: &TriangularMesh, k: usize, z: Complex64) -> [f64; 3] {
    let [a, b, c] = mesh.triangles[k].map(|v| mesh.vertices[v]);
    let area2 = ((b - a).conj() * (c - a)).im;
    let l1 = ((c - b).conj() * (z - b)).im / area2;
    let l2 = ((a - c).conj() * (z - c)).im / area2;
    [l1, l2, 1.0 - l1 - l2]
}
