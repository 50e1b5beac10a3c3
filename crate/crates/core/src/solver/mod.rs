//! Proximal-gradient solvers (ISTA and FISTA) for the L+S objective.
//!
//! One step maps `(L, S)` to
//!
//! ```text
//! G1 = L − (1/L_f)·H1ᴴ(H1·L + H2·S − D)      L⁺ = SVT_{λ1/L_f}(G1)
//! G2 = S − (1/L_f)·H2ᴴ(H1·L + H2·S − D)      S⁺ = T_{λ2/L_f}(G2)
//! ```
//!
//! FISTA applies the same step at an extrapolated point with the usual
//! `t_{k+1} = (1 + √(1 + 4t_k²))/2` momentum and no restarts.

mod ops;

pub use ops::{DenseOperator, Identity, MeasurementOperator, MeasurementOps, ScaledIdentity};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{l12_norm, row_soft_threshold, svt_full, RegWeights};
use crate::tensor::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ista,
    #[default]
    Fista,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ista" => Ok(Variant::Ista),
            "fista" => Ok(Variant::Fista),
            other => Err(Error::Config(format!("unknown solver variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(flatten)]
    pub weights: RegWeights,
    pub max_iters: usize,
    /// Stop once `‖X⁺ − X‖_F / ‖X‖_F` drops below this value.
    pub rel_tol: f64,
    /// Fixed Lipschitz constant; `None` estimates `‖AᴴA‖₂` by power iteration.
    pub lipschitz: Option<f64>,
    pub variant: Variant,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            weights: RegWeights::default(),
            max_iters: 30_000,
            rel_tol: 1e-7,
            lipschitz: None,
            variant: Variant::Fista,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::Config("rel_tol must be nonnegative".into()));
        }
        if let Some(lf) = self.lipschitz {
            if !(lf > 0.0) || !lf.is_finite() {
                return Err(Error::Config(format!("Lipschitz constant must be positive, got {lf}")));
            }
        }
        Ok(())
    }
}

/// Final iterates and bookkeeping of a solve.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub l: CMatrix,
    pub s: CMatrix,
    pub iter: usize,
    pub lipschitz: f64,
    /// FISTA momentum `t_k` (stays 1 for ISTA).
    pub momentum_t: f64,
    /// FISTA extrapolated point used for the last step.
    pub extrapolated: Option<(CMatrix, CMatrix)>,
    /// Objective value after each iteration.
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

/// Steps 1–2 of the iteration: the gradient step on `(L, S)`.
pub fn gradient_step(
    l: &CMatrix,
    s: &CMatrix,
    d: &CMatrix,
    ops: &MeasurementOps,
    lipschitz: f64,
) -> Result<(CMatrix, CMatrix)> {
    if !(lipschitz > 0.0) {
        return Err(Error::Config(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    let r = crate::prox::residual(d, l, s, ops)?;
    gradient_step_from_residual(l, s, &r, ops, lipschitz)
}

fn gradient_step_from_residual(
    l: &CMatrix,
    s: &CMatrix,
    r: &CMatrix,
    ops: &MeasurementOps,
    lipschitz: f64,
) -> Result<(CMatrix, CMatrix)> {
    let step = 1.0 / lipschitz;
    let mut g1 = ops.h1.adjoint(r)?.scaled(-step);
    g1.same_dims(l)?;
    g1 += l;
    let mut g2 = ops.h2.adjoint(r)?.scaled(-step);
    g2.same_dims(s)?;
    g2 += s;
    Ok((g1, g2))
}

/// Momentum recurrence `t ← (1 + √(1 + 4t²)) / 2`.
pub fn next_momentum(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

/// Plain L+S ISTA.
pub fn ista_solve(d: &CMatrix, ops: &MeasurementOps, cfg: &SolverConfig) -> Result<SolverState> {
    let cfg = SolverConfig {
        variant: Variant::Ista,
        ..cfg.clone()
    };
    solve(d, ops, &cfg, |_, _, _| {})
}

/// L+S FISTA.
pub fn fista_solve(d: &CMatrix, ops: &MeasurementOps, cfg: &SolverConfig) -> Result<SolverState> {
    let cfg = SolverConfig {
        variant: Variant::Fista,
        ..cfg.clone()
    };
    solve(d, ops, &cfg, |_, _, _| {})
}

/// Runs the configured variant from `L = S = 0`, calling `observer(k, L_k, S_k)`
/// after every iteration `k = 1, 2, …`.
pub fn solve<F>(d: &CMatrix, ops: &MeasurementOps, cfg: &SolverConfig, mut observer: F) -> Result<SolverState>
where
    F: FnMut(usize, &CMatrix, &CMatrix),
{
    cfg.validate()?;
    if !d.is_finite() {
        return Err(Error::NonFinite("input D contains NaN or Inf".into()));
    }
    let (rows, cols) = d.dims();
    let lipschitz = match cfg.lipschitz {
        Some(lf) => lf,
        None => ops.lipschitz(rows, cols)?,
    };
    let thr_l = cfg.weights.lambda1 / lipschitz;
    let thr_s = cfg.weights.lambda2 / lipschitz;

    let mut l = CMatrix::zeros(rows, cols);
    let mut s = CMatrix::zeros(rows, cols);
    let mut l_prev = l.clone();
    let mut s_prev = s.clone();
    let mut t = 1.0;
    let mut history = Vec::new();
    let mut extrapolated = None;
    let mut converged = false;
    let mut iter = 0;

    while iter < cfg.max_iters {
        let (yl, ys) = match cfg.variant {
            Variant::Ista => (l.clone(), s.clone()),
            Variant::Fista => {
                if iter == 0 {
                    (l.clone(), s.clone())
                } else {
                    let t_next = next_momentum(t);
                    let beta = (t - 1.0) / t_next;
                    t = t_next;
                    let mut yl = &l - &l_prev;
                    yl = yl.scaled(beta);
                    yl += &l;
                    let mut ys = &s - &s_prev;
                    ys = ys.scaled(beta);
                    ys += &s;
                    (yl, ys)
                }
            }
        };

        let r = crate::prox::residual(d, &yl, &ys, ops)?;
        let (g1, g2) = gradient_step_from_residual(&yl, &ys, &r, ops, lipschitz)?;
        let svt = svt_full(&g1, thr_l)?;
        let s_next = row_soft_threshold(&g2, thr_s)?;
        let l_next = svt.matrix;

        if !l_next.is_finite() || !s_next.is_finite() {
            return Err(Error::NonFinite(format!("iterate became non-finite at iteration {}", iter + 1)));
        }

        let r_next = crate::prox::residual(d, &l_next, &s_next, ops)?;
        let nuclear: f64 = svt.shrunk.iter().sum();
        let obj = 0.5 * r_next.norm_sq()
            + cfg.weights.lambda1 * nuclear
            + cfg.weights.lambda2 * l12_norm(&s_next);
        history.push(obj);

        let change = ((&l_next - &l).norm_sq() + (&s_next - &s).norm_sq()).sqrt();
        let base = (l.norm_sq() + s.norm_sq()).sqrt().max(1e-300);

        if cfg.variant == Variant::Fista {
            extrapolated = Some((yl, ys));
        }
        l_prev = std::mem::replace(&mut l, l_next);
        s_prev = std::mem::replace(&mut s, s_next);
        iter += 1;
        observer(iter, &l, &s);

        if change / base < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(SolverState {
        l,
        s,
        iter,
        lipschitz,
        momentum_t: t,
        extrapolated,
        objective_history: history,
        converged,
    })
}
