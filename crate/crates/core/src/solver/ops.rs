use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{spectral_norm, CMatrix, PowerIterOptions, C64};

/// A linear map on Casorati matrices together with its adjoint.
pub trait MeasurementOperator: Send + Sync + fmt::Debug {
    fn apply(&self, x: &CMatrix) -> Result<CMatrix>;
    fn adjoint(&self, y: &CMatrix) -> Result<CMatrix>;
}

/// `H = I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl MeasurementOperator for Identity {
    fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        Ok(x.clone())
    }

    fn adjoint(&self, y: &CMatrix) -> Result<CMatrix> {
        Ok(y.clone())
    }
}

/// `H = c·I`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity(pub C64);

impl MeasurementOperator for ScaledIdentity {
    fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        Ok(x.scaled_complex(self.0))
    }

    fn adjoint(&self, y: &CMatrix) -> Result<CMatrix> {
        Ok(y.scaled_complex(self.0.conj()))
    }
}

/// Left multiplication by a dense matrix: `H·X`, acting on every frame column.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub matrix: CMatrix,
}

impl MeasurementOperator for DenseOperator {
    fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        self.matrix.matmul(x)
    }

    fn adjoint(&self, y: &CMatrix) -> Result<CMatrix> {
        self.matrix.adjoint_matmul(y)
    }
}

/// The pair `(H1, H2)` of the measurement model `D = H1·L + H2·S + N`.
#[derive(Debug, Clone)]
pub struct MeasurementOps {
    pub h1: Arc<dyn MeasurementOperator>,
    pub h2: Arc<dyn MeasurementOperator>,
}

impl Default for MeasurementOps {
    fn default() -> Self {
        Self::identity()
    }
}

impl MeasurementOps {
    pub fn new(h1: impl MeasurementOperator + 'static, h2: impl MeasurementOperator + 'static) -> Self {
        Self {
            h1: Arc::new(h1),
            h2: Arc::new(h2),
        }
    }

    /// `H1 = H2 = I`, the plain L+S model.
    pub fn identity() -> Self {
        Self::new(Identity, Identity)
    }

    /// `AᴴA·[L; S]` with `A = [H1, H2]`.
    pub fn gram(&self, l: &CMatrix, s: &CMatrix) -> Result<(CMatrix, CMatrix)> {
        let mut ax = self.h1.apply(l)?;
        let h2s = self.h2.apply(s)?;
        ax.same_dims(&h2s)?;
        ax += &h2s;
        Ok((self.h1.adjoint(&ax)?, self.h2.adjoint(&ax)?))
    }

    /// Lipschitz constant of the quadratic term, `‖AᴴA‖₂`, for iterates of the given shape.
    pub fn lipschitz(&self, rows: usize, cols: usize) -> Result<f64> {
        let lf = spectral_norm(
            |l, s| self.gram(l, s),
            ((rows, cols), (rows, cols)),
            PowerIterOptions::default(),
        )?;
        if !(lf > 0.0) {
            return Err(Error::Degenerate(format!("Lipschitz estimate {lf} is not positive")));
        }
        Ok(lf)
    }
}
