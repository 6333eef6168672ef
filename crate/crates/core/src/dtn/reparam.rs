use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Orientation-preserving circle homeomorphism given by samples of its lift,
/// `target[j] = h(source[j])`, interpolated by a periodic monotone cubic.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReparam {
    source: Vec<f64>,
    target: Vec<f64>,
    slopes: Vec<f64>,
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let sec = |j: usize| -> f64 {
        // Secant from sample j to j + 1, wrapping with the lift.
        let (x0, y0) = (x[j], y[j]);
        let (x1, y1) = if j + 1 < n {
            (x[j + 1], y[j + 1])
        } else {
            (x[0] + TAU, y[0] + TAU)
        };
        (y1 - y0) / (x1 - x0)
    };
    let width = |j: usize| -> f64 {
        if j + 1 < n {
            x[j + 1] - x[j]
        } else {
            x[0] + TAU - x[j]
        }
    };
    (0..n)
        .map(|j| {
            let p = (j + n - 1) % n;
            let (d0, d1) = (sec(p), sec(j));
            if d0 * d1 <= 0.0 {
                return 0.0;
            }
            let (h0, h1) = (width(p), width(j));
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            (w1 + w2) / (w1 / d0 + w2 / d1)
        })
        .collect()
}

impl BoundaryReparam {
    /// `source` strictly increasing over one period; `target` is unwrapped
    /// and must increase by exactly one turn.
    pub fn new(source: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        let n = source.len();
        if n < 4 || target.len() != n {
            return Err(Error::NotMonotone(format!(
                "need at least four paired samples, got {} and {}",
                n,
                target.len()
            )));
        }
        if source.windows(2).any(|w| w[1] <= w[0]) || source[n - 1] - source[0] >= TAU {
            return Err(Error::NotMonotone(
                "source angles must increase within one turn".into(),
            ));
        }
        let mut lifted = Vec::with_capacity(n);
        lifted.push(target[0]);
        for j in 1..n {
            let prev = lifted[j - 1];
            let mut t = target[j];
            while t - prev > PI {
                t -= TAU;
            }
            while t - prev <= -PI {
                t += TAU;
            }
            lifted.push(t);
        }
        for j in 0..n {
            let next = if j + 1 < n {
                lifted[j + 1]
            } else {
                lifted[0] + TAU
            };
            if next <= lifted[j] {
                return Err(Error::NotMonotone(format!(
                    "target decreases after sample {j} ({:.6} -> {:.6})",
                    lifted[j], next
                )));
            }
        }
        let slopes = pchip_slopes(&source, &lifted);
        Ok(BoundaryReparam {
            source,
            target: lifted,
            slopes,
        })
    }

    /// Samples `f` at `2 pi j / samples`.
    pub fn from_fn(samples: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let source: Vec<f64> = (0..samples)
            .map(|j| TAU * j as f64 / samples as f64)
            .collect();
        let target = source.iter().map(|s| f(*s)).collect();
        Self::new(source, target)
    }

    pub fn identity(samples: usize) -> Self {
        Self::from_fn(samples, |s| s).expect("identity is monotone")
    }

    pub fn rotation(alpha: f64, samples: usize) -> Self {
        Self::from_fn(samples, |s| s + alpha).expect("rotation is monotone")
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Segment holding `s`: its end samples, slopes, width, local
    /// coordinate in `[0, 1)` and the number of whole turns.
    fn segment(&self, s: f64) -> ([f64; 4], f64, f64, f64) {
        let n = self.source.len();
        let turns = ((s - self.source[0]) / TAU).floor();
        let u = s - turns * TAU;
        let j = match self.source.binary_search_by(|x| x.total_cmp(&u)) {
            Ok(j) => j,
            Err(j) => j - 1,
        };
        let (x0, y0, m0) = (self.source[j], self.target[j], self.slopes[j]);
        let (x1, y1, m1) = if j + 1 < n {
            (self.source[j + 1], self.target[j + 1], self.slopes[j + 1])
        } else {
            (self.source[0] + TAU, self.target[0] + TAU, self.slopes[0])
        };
        let w = x1 - x0;
        ([y0, m0, y1, m1], w, (u - x0) / w, turns)
    }

    /// Lift of `h` at `s`.
    pub fn eval(&self, s: f64) -> f64 {
        let ([y0, m0, y1, m1], w, t, turns) = self.segment(s);
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * w * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * w * m1;
        v + turns * TAU
    }

    /// `h'(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        let ([y0, m0, y1, m1], w, t, _) = self.segment(s);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * (y0 - y1)) / w
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (3.0 * t2 - 2.0 * t) * m1
    }

    /// The inverse homeomorphism from the swapped samples.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.source.len();
        // Rotate so the new source starts in [t0, t0 + 2 pi).
        let mut pairs: Vec<(f64, f64)> = (0..n).map(|j| (self.target[j], self.source[j])).collect();
        let t0 = pairs[0].0;
        for p in &mut pairs {
            while p.0 - t0 >= TAU {
                p.0 -= TAU;
                p.1 -= TAU;
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    /// `sup |h(s) - g(s)|` over `samples` equispaced points.
    pub fn max_deviation(&self, g: impl Fn(f64) -> f64, samples: usize) -> f64 {
        (0..samples)
            .map(|j| {
                let s = TAU * j as f64 / samples as f64;
                let d = (self.eval(s) - g(s)).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_smooth_map() {
        let f = |s: f64| s + 0.3 * s.sin();
        let h = BoundaryReparam::from_fn(256, f).unwrap();
        assert!(h.max_deviation(f, 1000) < 1e-6);
        assert!((h.eval(TAU + 1.0) - f(1.0) - TAU).abs() < 1e-6);
        for s in [0.1, 2.0, 5.5] {
            assert!((h.derivative(s) - 1.0 - 0.3 * s.cos()).abs() < 1e-4);
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let h = BoundaryReparam::from_fn(256, |s| s + 0.3 * s.sin() + 1.0).unwrap();
        let g = h.inverse().unwrap();
        for s in [0.0, 0.7, 3.0, 6.0] {
            let d = (g.eval(h.eval(s)) - s).rem_euclid(TAU);
            assert!(d.min(TAU - d) < 1e-5);
        }
    }

    #[test]
    fn rejects_folds() {
        assert!(BoundaryReparam::from_fn(64, |s| s + 2.0 * s.sin()).is_err());
        assert!(BoundaryReparam::from_fn(64, |s| -s).is_err());
        assert!(BoundaryReparam::from_fn(64, |s| 2.0 * s).is_err());
    }
}
