use num_complex::Complex64 as C64;

use super::CollectiveSpinState;

/// First and symmetrized second moments of `(Jx, Jy, Jz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMoments {
    /// `⟨J_i⟩`.
    pub mean: [f64; 3],
    /// `⟨{J_i, J_j}⟩ / 2`.
    pub second: [[f64; 3]; 3],
}

impl SpinMoments {
    /// Evaluates the moments through ladder-operator matrix elements,
    /// `J+|m⟩ = sqrt(J(J+1) - m(m+1)) |m+1⟩`.
    pub fn of(state: &CollectiveSpinState) -> Self {
        let c = state.amplitudes();
        let j = state.total_spin();
        let casimir = j * (j + 1.0);
        let ladder: Vec<f64> = (0..c.len())
            .map(|k| {
                let m = state.m_at(k);
                (casimir - m * (m + 1.0)).max(0.0).sqrt()
            })
            .collect();

        let (mut jz, mut jz2) = (0.0, 0.0);
        for (k, ck) in c.iter().enumerate() {
            let m = state.m_at(k);
            let p = ck.norm_sqr();
            jz += p * m;
            jz2 += p * m * m;
        }
        let mut jp = C64::new(0.0, 0.0);
        let mut jpz = C64::new(0.0, 0.0);
        for k in 0..c.len().saturating_sub(1) {
            let m = state.m_at(k);
            let t = c[k + 1].conj() * c[k] * ladder[k];
            jp += t;
            jpz += t * (2.0 * m + 1.0);
        }
        let mut jp2 = C64::new(0.0, 0.0);
        for k in 0..c.len().saturating_sub(2) {
            jp2 += c[k + 2].conj() * c[k] * (ladder[k] * ladder[k + 1]);
        }

        let xx = 0.5 * (casimir - jz2 + jp2.re);
        let yy = 0.5 * (casimir - jz2 - jp2.re);
        let xy = 0.5 * jp2.im;
        let xz = 0.5 * jpz.re;
        let yz = 0.5 * jpz.im;
        Self {
            mean: [jp.re, jp.im, jz],
            second: [[xx, xy, xz], [xy, yy, yz], [xz, yz, jz2]],
        }
    }

    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mut cov = self.second;
        for (i, row) in cov.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= self.mean[i] * self.mean[j];
            }
        }
        cov
    }

    pub fn mean_along(&self, n: [f64; 3]) -> f64 {
        (0..3).map(|i| self.mean[i] * n[i]).sum()
    }

    pub fn variance_along(&self, n: [f64; 3]) -> f64 {
        let cov = self.covariance();
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += n[i] * cov[i][j] * n[j];
            }
        }
        v.max(0.0)
    }

    /// Length of the mean Bloch vector.
    pub fn bloch_length(&self) -> f64 {
        self.mean.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Principal variances of the `(Jy, Jz)` block, smallest first, with the
    /// angle `α` of the minimum measured from `+z` towards `+y`.
    pub fn yz_principal(&self) -> (f64, f64, f64) {
        let cov = self.covariance();
        let (a, b, c) = (cov[2][2], cov[1][2], cov[1][1]);
        let mean = 0.5 * (a + c);
        let half = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        // Variance along cos α z + sin α y is mean + (a - c)/2 cos 2α + b sin 2α.
        let alpha_max = 0.5 * b.atan2(0.5 * (a - c));
        let mut alpha_min = alpha_max + std::f64::consts::FRAC_PI_2;
        if alpha_min > std::f64::consts::FRAC_PI_2 {
            alpha_min -= std::f64::consts::PI;
        }
        (mean - half, mean + half, alpha_min)
    }
}
