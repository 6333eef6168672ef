//! Cauchy transform `C` and Beurling transform `S = dC` on grid fields.
//!
//! ```text
//! Ch(z) =  1/pi     int h(w) / (z - w)   dA(w)
//! Sh(z) = -1/pi  PV int h(w) / (z - w)^2 dA(w)
//! ```
//!
//! Two discretizations share one interface. `Periodic` applies the Fourier
//! multipliers `conj(zeta)/zeta` and `-2i/zeta` on the torus `[-L, L]^2`
//! (zero at the zero frequency). `FreeSpace` treats `h` as constant on each
//! cell and convolves with the exact cell integrals of the two kernels,
//! using a zero-padded FFT of size `2n`, so no periodization occurs.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Field, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Periodic,
    FreeSpace,
}

#[derive(Clone)]
pub struct SpectralTransform {
    grid: GridSpec,
    kind: TransformKind,
    size: usize,
    beurling_hat: Vec<Complex64>,
    cauchy_hat: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform")
            .field("grid", &self.grid)
            .field("kind", &self.kind)
            .field("size", &self.size)
            .finish()
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Beyond this cell distance kernels are integrated by Gauss-Legendre.
const CLOSED_FORM_RANGE: i64 = 16;

impl SpectralTransform {
    pub fn new(grid: GridSpec, kind: TransformKind) -> Self {
        match kind {
            TransformKind::Periodic => Self::periodic(grid),
            TransformKind::FreeSpace => Self::free_space(grid),
        }
    }

    pub fn periodic(grid: GridSpec) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let step = PI / grid.half_width();
        let freq = |k: usize| {
            let m = if k < n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            };
            m * step
        };
        let mut s = vec![ZERO; n * n];
        let mut c = vec![ZERO; n * n];
        for r in 0..n {
            for col in 0..n {
                let zeta = Complex64::new(freq(col), freq(r));
                if zeta.norm_sqr() > 0.0 {
                    s[r * n + col] = zeta.conj() / zeta;
                    c[r * n + col] = Complex64::new(0.0, -2.0) / zeta;
                }
            }
        }
        SpectralTransform {
            grid,
            kind: TransformKind::Periodic,
            size: n,
            beurling_hat: s,
            cauchy_hat: c,
            fwd,
            inv,
        }
    }

    pub fn free_space(grid: GridSpec) -> Self {
        let n = grid.n();
        let m = 2 * n;
        let h = grid.cell();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut s = vec![ZERO; m * m];
        let mut c = vec![ZERO; m * m];
        let span = n as i64 - 1;
        for dr in -span..=span {
            for dc in -span..=span {
                let (ic, is) = cell_integrals(dc, dr);
                let idx = wrap(dr, m) * m + wrap(dc, m);
                c[idx] = ic * (h / PI);
                s[idx] = is * (-1.0 / PI);
            }
        }
        fft2(&fwd, &mut s, m);
        fft2(&fwd, &mut c, m);
        SpectralTransform {
            grid,
            kind: TransformKind::FreeSpace,
            size: m,
            beurling_hat: s,
            cauchy_hat: c,
            fwd,
            inv,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    /// Multiplier table of `S` on the transform lattice.
    pub fn beurling_multiplier(&self) -> &[Complex64] {
        &self.beurling_hat
    }

    pub fn beurling_apply(&self, h: &ComplexField) -> Result<ComplexField> {
        self.apply(h, &self.beurling_hat)
    }

    pub fn cauchy_apply(&self, h: &ComplexField) -> Result<ComplexField> {
        self.apply(h, &self.cauchy_hat)
    }

    /// Both transforms of one density, sharing the forward FFT.
    pub fn cauchy_beurling(&self, h: &ComplexField) -> Result<(ComplexField, ComplexField)> {
        let spec = self.forward(h)?;
        Ok((
            self.back(&spec, &self.cauchy_hat),
            self.back(&spec, &self.beurling_hat),
        ))
    }

    /// True when `h` is non-zero on the outermost ring of cells, where
    /// periodization error is no longer controlled.
    pub fn support_touches_boundary(&self, h: &ComplexField) -> bool {
        let g = h.grid();
        let n = g.n();
        (0..n).any(|k| {
            [(0, k), (n - 1, k), (k, 0), (k, n - 1)]
                .iter()
                .any(|&(r, c)| h[g.index(r, c)].norm() > 0.0)
        })
    }

    fn apply(&self, h: &ComplexField, mult: &[Complex64]) -> Result<ComplexField> {
        let spec = self.forward(h)?;
        Ok(self.back(&spec, mult))
    }

    fn forward(&self, h: &ComplexField) -> Result<Vec<Complex64>> {
        if *h.grid() != self.grid {
            return Err(Error::ShapeMismatch {
                expected: self.grid.len(),
                got: h.values().len(),
            });
        }
        let n = self.grid.n();
        let m = self.size;
        let mut buf = vec![ZERO; m * m];
        for r in 0..n {
            buf[r * m..r * m + n].copy_from_slice(&h.values()[r * n..(r + 1) * n]);
        }
        fft2(&self.fwd, &mut buf, m);
        Ok(buf)
    }

    fn back(&self, spec: &[Complex64], mult: &[Complex64]) -> ComplexField {
        let n = self.grid.n();
        let m = self.size;
        let mut buf: Vec<Complex64> = spec.iter().zip(mult).map(|(a, b)| a * b).collect();
        fft2(&self.inv, &mut buf, m);
        let scale = 1.0 / (m * m) as f64;
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            out.extend(buf[r * m..r * m + n].iter().map(|v| v * scale));
        }
        Field::from_vec(self.grid, out).expect("grid-sized output")
    }
}

fn wrap(d: i64, m: usize) -> usize {
    d.rem_euclid(m as i64) as usize
}

/// In-place 2-D transform of a row-major `m x m` array.
fn fft2(plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], m: usize) {
    let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
    plan.process_with_scratch(data, &mut scratch);
    let mut t = vec![ZERO; m * m];
    transpose(data, &mut t, m);
    plan.process_with_scratch(&mut t, &mut scratch);
    transpose(&t, data, m);
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const B: usize = 32;
    for rb in (0..m).step_by(B) {
        for cb in (0..m).step_by(B) {
            for r in rb..(rb + B).min(m) {
                for c in cb..(cb + B).min(m) {
                    dst[c * m + r] = src[r * m + c];
                }
            }
        }
    }
}

/// `(int dv / v, PV int dv / v^2)` over the unit cell centred at `dc + i dr`.
pub(crate) fn cell_integrals(dc: i64, dr: i64) -> (Complex64, Complex64) {
    if dc == 0 && dr == 0 {
        return (ZERO, ZERO);
    }
    let centre = Complex64::new(dc as f64, dr as f64);
    if dc.abs().max(dr.abs()) > CLOSED_FORM_RANGE {
        return gauss_cell(centre);
    }
    // Double primitives with a branch cut pointing away from the cell.
    let dir = centre / centre.norm();
    let log = |v: Complex64| (v / dir).ln();
    let phi_c = |v: Complex64| v * log(v) - v;
    let phi_s = |v: Complex64| -log(v);
    let corners = [
        (Complex64::new(0.5, 0.5), 1.0),
        (Complex64::new(-0.5, 0.5), -1.0),
        (Complex64::new(0.5, -0.5), -1.0),
        (Complex64::new(-0.5, -0.5), 1.0),
    ];
    let mut ic = ZERO;
    let mut is = ZERO;
    for (off, sign) in corners {
        let v = centre + off;
        ic += phi_c(v) * sign;
        is += phi_s(v) * sign;
    }
    let minus_i = Complex64::new(0.0, -1.0);
    (ic * minus_i, is * minus_i)
}

const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

fn gauss_cell(centre: Complex64) -> (Complex64, Complex64) {
    let mut ic = ZERO;
    let mut is = ZERO;
    for (xa, wa) in GL4_X.iter().zip(GL4_W) {
        for (xb, wb) in GL4_X.iter().zip(GL4_W) {
            let v = centre + Complex64::new(0.5 * xa, 0.5 * xb);
            let w = 0.25 * wa * wb;
            let inv = v.inv();
            ic += inv * w;
            is += inv * inv * w;
        }
    }
    (ic, is)
}
