//! Finite-dimensional Gelfand triple V ↪ H ↪ V′.
//!
//! Vectors in H and V are coefficient vectors `u` against a fixed basis, with
//! `(u|v)_H = vᴴ·M·u` and `(u|v)_V = vᴴ·K·u` for the Gram matrices `M` (mass)
//! and `K` (V-Gram). Functionals in V′ are coefficient vectors `f` with
//! `f_i = ⟨F, basis_i⟩`; the embedding H → V′ is `u ↦ M·u`.
//!
//! Everything is expressed through the generalized eigenpairs
//! `K·φ_i = λ_i·M·φ_i` with `Φᴴ·M·Φ = I`. In that basis the H norm is
//! Euclidean, the V norm carries weights `λ_i`, V′ carries `λ_i⁻¹` and the
//! interpolation space `[H, V]_γ` carries `λ_i^γ`.

use nalgebra::Cholesky;
use nalgebra::Dyn;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::linalg::{
    self, c, ensure_dim, hermitian_defect, hermitian_eigen, hermitian_part, matmul, matmul3,
    CMat, CVec, C64,
};

/// Hermiticity defects below this (relative) are symmetrized away.
pub const HERMITIAN_TOLERANCE: f64 = 1e-13;

/// Which norm a vector or operator is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Space {
    H,
    V,
    Vprime,
    /// Interpolation space `[H, V]_γ`, `0 ≤ γ ≤ 1`.
    Vgamma(f64),
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Space::H => write!(f, "H"),
            Space::V => write!(f, "V"),
            Space::Vprime => write!(f, "Vprime"),
            Space::Vgamma(g) => write!(f, "Vgamma({g})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GelfandTriple {
    mass: CMat,
    vgram: CMat,
    mass_chol: Cholesky<C64, Dyn>,
    /// `M⁻¹`, kept explicitly so products with it use the GEMM kernels.
    mass_inv: CMat,
    eigenvalues: Vec<f64>,
    /// Generalized eigenvectors Φ (columns), M-orthonormal.
    phi: CMat,
    /// Φ⁻¹ = Φᴴ·M.
    phi_inv: CMat,
}

fn symmetrize(what: &'static str, g: &CMat) -> Result<CMat> {
    let defect = hermitian_defect(g);
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { what, defect });
    }
    Ok(hermitian_part(g))
}

impl GelfandTriple {
    /// Build a triple from the H Gram matrix `mass` and the V Gram matrix
    /// `vgram`. Both must be Hermitian positive definite.
    pub fn new(mass: CMat, vgram: CMat) -> Result<Self> {
        let n = linalg::ensure_square(&mass)?;
        if n == 0 {
            return Err(Error::Invalid("empty Gram matrix".into()));
        }
        ensure_dim(&vgram, n)?;
        if !linalg::is_finite(&mass) || !linalg::is_finite(&vgram) {
            return Err(Error::NonFinite("Gram matrix"));
        }
        let mass = symmetrize("massGram", &mass)?;
        let vgram = symmetrize("vGram", &vgram)?;

        if !(linalg::min_hermitian_eigenvalue(&mass) > 0.0) {
            return Err(Error::NotPositiveDefinite { what: "massGram" });
        }
        let mass_chol = Cholesky::new(mass.clone())
            .ok_or(Error::NotPositiveDefinite { what: "massGram" })?;
        let l = mass_chol.l();
        // C = L⁻¹ K L⁻ᴴ
        let x = l
            .solve_lower_triangular(&vgram)
            .ok_or(Error::NotPositiveDefinite { what: "massGram" })?;
        let cmat = l
            .solve_lower_triangular(&x.adjoint())
            .ok_or(Error::NotPositiveDefinite { what: "massGram" })?;
        let (eigenvalues, q) = hermitian_eigen(&cmat);
        if !(eigenvalues[0] > 0.0) {
            return Err(Error::NotPositiveDefinite { what: "vGram" });
        }
        let phi = l
            .adjoint()
            .solve_upper_triangular(&q)
            .ok_or(Error::NotPositiveDefinite { what: "massGram" })?;
        let phi_inv = matmul(&phi.adjoint(), &mass);
        let mass_inv = hermitian_part(&mass_chol.solve(&linalg::identity(n)));

        Ok(Self {
            mass,
            vgram,
            mass_chol,
            mass_inv,
            eigenvalues,
            phi,
            phi_inv,
        })
    }

    /// Triple with `M = I` and a diagonal V-Gram.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let vgram = CMat::from_diagonal(&CVec::from_iterator(n, weights.iter().map(|&w| c(w))));
        Self::new(linalg::identity(n), vgram)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mass(&self) -> &CMat {
        &self.mass
    }

    pub fn vgram(&self) -> &CMat {
        &self.vgram
    }

    /// Generalized eigenvalues λ_1 ≤ … ≤ λ_n of `K φ = λ M φ`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.phi
    }

    /// Embedding constant `c_H` with `‖u‖_H ≤ c_H ‖u‖_V`.
    pub fn embedding_constant(&self) -> f64 {
        (1.0 / self.eigenvalues[0]).sqrt()
    }

    fn check_vec(&self, u: &CVec) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Spectral coordinates `Φᴴ·M·u` of an H vector.
    pub fn coordinates(&self, u: &CVec) -> CVec {
        &self.phi_inv * u
    }

    /// `(u|v)_H = vᴴ M u`.
    pub fn inner_h(&self, u: &CVec, v: &CVec) -> Result<C64> {
        self.check_vec(u)?;
        self.check_vec(v)?;
        Ok(v.dotc(&(&self.mass * u)))
    }

    /// Norm of `u` in `space`. For `Space::Vprime` the argument is read as a
    /// functional coefficient vector.
    pub fn norm(&self, u: &CVec, space: Space) -> Result<f64> {
        self.check_vec(u)?;
        let weighted = |coords: &CVec, power: f64| -> f64 {
            coords
                .iter()
                .zip(&self.eigenvalues)
                .map(|(ci, &lam)| lam.powf(power) * ci.norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        match space {
            Space::H => Ok(self.coordinates(u).norm()),
            Space::V => Ok(weighted(&self.coordinates(u), 1.0)),
            Space::Vgamma(gamma) => {
                check_range("gamma", gamma, 0.0, 1.0)?;
                Ok(weighted(&self.coordinates(u), gamma))
            }
            Space::Vprime => Ok(weighted(&(self.phi.adjoint() * u), -1.0)),
        }
    }

    /// Coordinate matrix of an operator: `Φ⁻¹·B·Φ`.
    pub fn operator_in_eigenbasis(&self, b: &CMat) -> CMat {
        matmul3(&self.phi_inv, b, &self.phi)
    }

    /// Coordinate matrix of a form matrix: `Φᴴ·A·Φ`.
    pub fn form_in_eigenbasis(&self, a: &CMat) -> CMat {
        matmul3(&self.phi.adjoint(), a, &self.phi)
    }

    pub(crate) fn eigen_powers(&self, power: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.powf(power)).collect()
    }

    /// Operator norm of `B` acting on coefficient vectors, in `L(H)`, `L(V)`
    /// or `L(V′)`. The V′ norm is taken through duality as
    /// `‖h_adjoint(B)‖_{L(V)}`.
    pub fn op_norm(&self, b: &CMat, space: Space) -> Result<f64> {
        ensure_dim(b, self.dim())?;
        match space {
            Space::H => Ok(linalg::spectral_norm(&self.operator_in_eigenbasis(b))),
            Space::V => {
                let t = self.operator_in_eigenbasis(b);
                let w = linalg::scale_rows_cols(&t, &self.eigen_powers(0.5), &self.eigen_powers(-0.5));
                Ok(linalg::spectral_norm(&w))
            }
            Space::Vprime => self.op_norm(&self.h_adjoint(b)?, Space::V),
            Space::Vgamma(_) => Err(Error::Invalid(
                "operator norms are provided for H, V and Vprime only".into(),
            )),
        }
    }

    /// Norm of the V′ extension `f ↦ M·B·M⁻¹·f` of `B`, measured directly in
    /// the dual norm `‖f‖²_{V′} = fᴴ K⁻¹ f`. Agrees with
    /// `op_norm(B, Vprime)`, but shares no intermediate with it.
    pub fn extension_norm_vprime(&self, b: &CMat) -> Result<f64> {
        ensure_dim(b, self.dim())?;
        let minv = self.mass_chol.solve(&linalg::identity(self.dim()));
        let ext = matmul3(&self.mass, b, &minv);
        // K^{-1/2}-weighted frame: Λ^{-1/2}Φᴴ on the left, Φ^{-H}Λ^{1/2} = MΦΛ^{1/2} on the right.
        let right = matmul(&self.mass, &self.phi);
        let core = matmul3(&self.phi.adjoint(), &ext, &right);
        let w = linalg::scale_rows_cols(&core, &self.eigen_powers(-0.5), &self.eigen_powers(0.5));
        Ok(linalg::spectral_norm(&w))
    }

    /// H-adjoint `M⁻¹·Bᴴ·M`, so that `(B u | v)_H = (u | B′ v)_H`.
    pub fn h_adjoint(&self, b: &CMat) -> Result<CMat> {
        ensure_dim(b, self.dim())?;
        Ok(linalg::matmul3(&self.mass_inv, &b.adjoint(), &self.mass))
    }

    /// `M⁻¹·A`, the H operator associated with a form matrix `A`.
    pub fn h_operator(&self, a: &CMat) -> Result<CMat> {
        ensure_dim(a, self.dim())?;
        Ok(matmul(&self.mass_inv, a))
    }

    /// Smallest generalized eigenvalue of `(Herm(A), K)`.
    pub(crate) fn min_rayleigh_v(&self, a: &CMat) -> f64 {
        let t = self.form_in_eigenbasis(&hermitian_part(a));
        let p = self.eigen_powers(-0.5);
        linalg::min_hermitian_eigenvalue(&linalg::scale_rows_cols(&t, &p, &p))
    }

    /// Spectral norm of `diag(λ^{-left/2})·Φᴴ·A·Φ·diag(λ^{-right/2})`, the best
    /// constant in `|vᴴ A u| ≤ C ‖u‖_{V_right} ‖v‖_{V_left}`.
    pub fn form_norm(&self, a: &CMat, gamma_u: f64, gamma_v: f64) -> Result<f64> {
        ensure_dim(a, self.dim())?;
        check_range("gamma_u", gamma_u, 0.0, 1.0)?;
        check_range("gamma_v", gamma_v, 0.0, 1.0)?;
        let t = self.form_in_eigenbasis(a);
        let w = linalg::scale_rows_cols(
            &t,
            &self.eigen_powers(-gamma_v / 2.0),
            &self.eigen_powers(-gamma_u / 2.0),
        );
        Ok(linalg::spectral_norm(&w))
    }
}
