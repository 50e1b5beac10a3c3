//! Thin complex SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! The working copy `B = A·V` has its columns pairwise orthogonalised; on
//! convergence `σ_j = ‖b_j‖` and `u_j = b_j / σ_j`. Wide inputs are handled by
//! factorising the adjoint. Column phases are fixed so that the
//! largest-magnitude entry of each `U` column is real and positive.

use super::{dot_conj, CMatrix, C64, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `A = U · diag(σ) · Vᴴ` with `r = min(m, n)` columns in `U` and `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U · diag(values) · Vᴴ`.
    pub fn recompose_with(&self, values: &[f64]) -> CMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = CMatrix::zeros(m, n);
        for (k, &s) in values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let uk = self.u.col(k);
            let vk = self.v.col(k);
            for j in 0..n {
                let coef = vk[j].conj() * s;
                if coef == ZERO {
                    continue;
                }
                let col = out.col_mut(j);
                for (o, &u) in col.iter_mut().zip(uk) {
                    *o += u * coef;
                }
            }
        }
        out
    }

    pub fn recompose(&self) -> CMatrix {
        self.recompose_with(&self.singular_values)
    }
}

/// Thin SVD of a finite complex matrix.
pub fn svd(a: &CMatrix) -> Result<SvdFactors> {
    if !a.is_finite() {
        return Err(Error::NonFinite("SVD input contains NaN or Inf".into()));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Shape("SVD of an empty matrix".into()));
    }
    let mut f = if a.rows() >= a.cols() {
        jacobi_tall(a.clone())?
    } else {
        let t = jacobi_tall(a.adjoint())?;
        SvdFactors {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        }
    };
    fix_phases(&mut f);
    Ok(f)
}

fn jacobi_tall(mut b: CMatrix) -> Result<SvdFactors> {
    let (m, n) = b.dims();
    let mut v = CMatrix::identity(n);
    let mut norms: Vec<f64> = (0..n).map(|j| col_norm_sq(b.col(j))).collect();
    let tol = (m as f64).sqrt() * f64::EPSILON;
    let max_sq = norms.iter().cloned().fold(0.0, f64::max);
    // columns below this energy are numerically zero and left alone
    let negligible = max_sq * (m as f64) * f64::EPSILON * f64::EPSILON;

    let mut converged = n == 1;
    let mut worst = 0.0;
    for _sweep in 0..MAX_SWEEPS {
        worst = 0.0f64;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = dot_conj(b.col(p), b.col(q));
                let g_abs = gamma.norm();
                let ratio = g_abs / (alpha.sqrt() * beta.sqrt());
                worst = worst.max(ratio);
                if ratio <= tol {
                    continue;
                }
                rotated = true;
                let phase = gamma / g_abs;
                let zeta = (beta - alpha) / (2.0 * g_abs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // column q is first rotated by conj(phase) so that ⟨b_p, b_q⟩ is real
                let ph_c = phase.conj();
                rotate(b.data_mut(), m, p, q, c, s, ph_c);
                rotate(v.data_mut(), n, p, q, c, s, ph_c);
                norms[p] = col_norm_sq(b.col(p));
                norms[q] = col_norm_sq(b.col(q));
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: MAX_SWEEPS,
            residual: worst,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sig: Vec<f64> = norms
        .iter()
        .map(|&x| if x <= negligible { 0.0 } else { x.sqrt() })
        .collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]).then(i.cmp(&j)));

    let mut u = CMatrix::zeros(m, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = sig[j];
        values.push(s);
        vs.col_mut(k).copy_from_slice(v.col(j));
        if s > 0.0 && s.is_normal() {
            let inv = 1.0 / s;
            for (dst, src) in u.col_mut(k).iter_mut().zip(b.col(j)) {
                *dst = src * inv;
            }
        } else {
            missing.push(k);
        }
    }
    for k in missing {
        complete_column(&mut u, k);
    }
    Ok(SvdFactors {
        u,
        singular_values: values,
        v: vs,
    })
}

/// `[x_p, x_q] ← [c·x_p − s·φ·x_q, s·x_p + c·φ·x_q]` on columns of a column-major buffer.
#[inline]
fn rotate(data: &mut [C64], rows: usize, p: usize, q: usize, c: f64, s: f64, phi: C64) {
    let (left, right) = data.split_at_mut(q * rows);
    let xp = &mut left[p * rows..(p + 1) * rows];
    let xq = &mut right[..rows];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let bq = *b * phi;
        let ap = *a;
        *a = ap * c - bq * s;
        *b = ap * s + bq * c;
    }
}

fn col_norm_sq(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Fills column `k` of `u` with a unit vector orthogonal to every other
/// nonzero column (Gram–Schmidt over canonical basis vectors).
fn complete_column(u: &mut CMatrix, k: usize) {
    let m = u.rows();
    for e in 0..m {
        let mut cand = vec![ZERO; m];
        cand[e] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for j in 0..u.cols() {
                if j == k {
                    continue;
                }
                let col = u.col(j);
                let nrm = col_norm_sq(col);
                if nrm == 0.0 {
                    continue;
                }
                let proj = dot_conj(col, &cand);
                for (c, &x) in cand.iter_mut().zip(col) {
                    *c -= x * proj;
                }
            }
        }
        let nrm = col_norm_sq(&cand).sqrt();
        if nrm > 1e-8 {
            for (dst, c) in u.col_mut(k).iter_mut().zip(cand) {
                *dst = c / nrm;
            }
            return;
        }
    }
}

fn fix_phases(f: &mut SvdFactors) {
    for k in 0..f.u.cols() {
        let col = f.u.col(k);
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, z) in col.iter().enumerate() {
            let a = z.norm();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs <= 0.0 {
            continue;
        }
        let rot = col[best].conj() / best_abs;
        f.u.col_mut(k).iter_mut().for_each(|z| *z *= rot);
        f.v.col_mut(k).iter_mut().for_each(|z| *z *= rot);
        // make the pivot exactly real
        let pivot = f.u.col(k)[best];
        f.u.col_mut(k)[best] = C64::new(pivot.norm(), 0.0);
    }
}
