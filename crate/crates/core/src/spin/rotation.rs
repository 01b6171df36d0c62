//! Spin rotations `exp(-i a n·J)`.
//!
//! Rotations about `z` are diagonal phases. Equatorial rotations conjugate a
//! rotation about `x` by `z` phases; the `x` rotation is applied in the
//! eigenbasis of the tridiagonal `Jx` matrix, which is computed once per atom
//! number by inverse iteration (its eigenvalues are exactly `-J..=J`) and kept
//! in a process-wide cache.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;

use super::{CollectiveSpinState, SpinProjectionAxis};
use crate::error::{Error, Result};

const CACHE_BYTES: usize = 512 << 20;
const INVERSE_ITERATIONS: usize = 3;

/// Returns `exp(-i angle n·J) |state⟩`.
pub fn rotate(
    state: &CollectiveSpinState,
    angle: f64,
    axis: SpinProjectionAxis,
) -> Result<CollectiveSpinState> {
    let mut out = state.clone();
    rotate_in_place(&mut out, angle, axis)?;
    Ok(out)
}

/// In-place variant of [`rotate`].
pub fn rotate_in_place(
    state: &mut CollectiveSpinState,
    angle: f64,
    axis: SpinProjectionAxis,
) -> Result<()> {
    if !angle.is_finite() {
        return Err(Error::InvalidArgument(format!("rotation angle {angle} is not finite")));
    }
    if angle == 0.0 {
        return Ok(());
    }
    match axis.azimuth() {
        None => {
            phase_z(state, angle);
            Ok(())
        }
        Some(phi) if angle.abs() == std::f64::consts::PI => {
            flip_pi(state, phi, angle.signum());
            Ok(())
        }
        Some(phi) => {
            if phi != 0.0 {
                phase_z(state, -phi);
            }
            let basis = jx_basis(state.n_atoms());
            basis.apply(state.amplitudes_mut(), angle);
            if phi != 0.0 {
                phase_z(state, phi);
            }
            Ok(())
        }
    }
}

/// `c_m -> e^{-i a m} c_m`.
fn phase_z(state: &mut CollectiveSpinState, angle: f64) {
    let j = state.total_spin();
    for (k, c) in state.amplitudes_mut().iter_mut().enumerate() {
        *c *= C64::from_polar(1.0, -angle * (k as f64 - j));
    }
}

/// `π` rotation about an equatorial axis: `c'_{-m} = (-1)^{J-m} e^{2iψm} c_m`
/// with `ψ = φ - π/2`. A `-π` rotation differs by the global sign `(-1)^{2J}`.
fn flip_pi(state: &mut CollectiveSpinState, phi: f64, sign: f64) {
    let n = state.n_atoms() as usize;
    let j = state.total_spin();
    let psi = phi - FRAC_PI_2;
    let global = if sign < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let old = state.amplitudes().to_vec();
    let out = state.amplitudes_mut();
    for (k, c) in old.into_iter().enumerate() {
        let m = k as f64 - j;
        let parity = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
        out[n - k] = c * C64::from_polar(parity * global, 2.0 * psi * m);
    }
}

/// Active SO(3) rotation matching `exp(-i angle n·J)` acting on `⟨J⟩`.
pub fn rotation_matrix_so3(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    let [x, y, z] = axis.map(|v| v / norm);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

/// Eigenbasis of `Jx`: column `j` of `vectors` has eigenvalue `j - J`.
pub(crate) struct JxBasis {
    dim: usize,
    total_spin: f64,
    /// Row-major, `vectors[i * dim + j]` is component `i` of eigenvector `j`.
    vectors: Vec<f64>,
}

impl JxBasis {
    pub(crate) fn compute(n_atoms: u32) -> Self {
        let dim = n_atoms as usize + 1;
        let j = n_atoms as f64 / 2.0;
        let off: Vec<f64> = (0..dim - 1)
            .map(|k| {
                let m = k as f64 - j;
                0.5 * (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
            })
            .collect();
        let mut vectors = vec![0.0; dim * dim];
        let offset = 1e-14 * (1.0 + j);
        for col in 0..dim {
            let lambda = col as f64 - j;
            let lu = TridiagLu::factor(&off, lambda + offset);
            let mut x: Vec<f64> = (0..dim)
                .map(|k| 1.0 + (k as f64 * 0.618_033_988_749_895).fract())
                .collect();
            for _ in 0..INVERSE_ITERATIONS {
                lu.solve(&mut x);
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= norm);
            }
            for (i, v) in x.iter().enumerate() {
                vectors[i * dim + col] = *v;
            }
        }
        Self { dim, total_spin: j, vectors }
    }

    fn bytes(&self) -> usize {
        self.vectors.len() * std::mem::size_of::<f64>()
    }

    pub(crate) fn eigenvalue(&self, col: usize) -> f64 {
        col as f64 - self.total_spin
    }

    #[cfg(test)]
    pub(crate) fn component(&self, row: usize, col: usize) -> f64 {
        self.vectors[row * self.dim + col]
    }

    /// `c -> V diag(e^{-i a λ}) Vᵀ c`.
    fn apply(&self, c: &mut [C64], angle: f64) {
        let dim = self.dim;
        let mut yr = vec![0.0; dim];
        let mut yi = vec![0.0; dim];
        for (i, ci) in c.iter().enumerate() {
            let row = &self.vectors[i * dim..(i + 1) * dim];
            let (re, im) = (ci.re, ci.im);
            for ((r, a), b) in row.iter().zip(yr.iter_mut()).zip(yi.iter_mut()) {
                *a += r * re;
                *b += r * im;
            }
        }
        for col in 0..dim {
            let y = C64::new(yr[col], yi[col]) * C64::from_polar(1.0, -angle * self.eigenvalue(col));
            yr[col] = y.re;
            yi[col] = y.im;
        }
        for (i, ci) in c.iter_mut().enumerate() {
            let row = &self.vectors[i * dim..(i + 1) * dim];
            let re: f64 = row.iter().zip(&yr).map(|(r, y)| r * y).sum();
            let im: f64 = row.iter().zip(&yi).map(|(r, y)| r * y).sum();
            *ci = C64::new(re, im);
        }
    }
}

/// LU factorization with partial pivoting of `T - shift I` for the symmetric
/// tridiagonal `T` with zero diagonal and off-diagonal `off`.
struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(off: &[f64], shift: f64) -> Self {
        let n = off.len() + 1;
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut d = vec![-shift; n];
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let tiny = f64::EPSILON * (1.0 + off.iter().cloned().fold(0.0, f64::max));
        for v in &mut d {
            if v.abs() < tiny {
                *v = if *v < 0.0 { -tiny } else { tiny };
            }
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[derive(Default)]
struct BasisCache {
    entries: HashMap<u32, Arc<JxBasis>>,
    order: VecDeque<u32>,
    bytes: usize,
}

fn cache() -> &'static Mutex<BasisCache> {
    static CACHE: OnceLock<Mutex<BasisCache>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BasisCache::default()))
}

/// Cached `Jx` eigenbasis for `n_atoms`.
pub(crate) fn jx_basis(n_atoms: u32) -> Arc<JxBasis> {
    if let Some(b) = cache().lock().unwrap().entries.get(&n_atoms) {
        return b.clone();
    }
    // Computed outside the lock; a concurrent duplicate is harmless.
    let basis = Arc::new(JxBasis::compute(n_atoms));
    let mut guard = cache().lock().unwrap();
    if let Some(b) = guard.entries.get(&n_atoms) {
        return b.clone();
    }
    guard.bytes += basis.bytes();
    guard.entries.insert(n_atoms, basis.clone());
    guard.order.push_back(n_atoms);
    while guard.bytes > CACHE_BYTES && guard.order.len() > 1 {
        let oldest = guard.order.pop_front().unwrap();
        if let Some(b) = guard.entries.remove(&oldest) {
            guard.bytes -= b.bytes();
        }
    }
    basis
}
