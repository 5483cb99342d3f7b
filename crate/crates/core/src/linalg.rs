//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Everything in the library runs on 2-, 4- or 8-dimensional spaces (qubit,
//! qubit pair or system + toy bath spin), so operators are dense
//! [`DMatrix<C64>`] wrappers with exact eigendecomposition-based
//! exponentials. Hamiltonian entries are in rad/us; times in us.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest supported Hilbert-space dimension (two qubits + toy bath spin).
pub const MAX_DIM: usize = 8;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 || dim == 8 {
        Ok(())
    } else {
        Err(Error::UnsupportedDim(dim))
    }
}

/// A dense square complex operator (Hamiltonian, unitary or density matrix).
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch(m.nrows(), m.ncols()));
        }
        check_dim(m.nrows())?;
        Ok(Self { m })
    }

    /// Build from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::DimMismatch(entries.len(), dim * dim));
        }
        Ok(Self {
            m: DMatrix::from_row_slice(dim, dim, entries),
        })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            m: DMatrix::zeros(dim, dim),
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            m: DMatrix::identity(dim, dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn dagger(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.m.diagonal().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Frobenius norm of the anti-Hermitian part (A - A^dag)/2.
    pub fn anti_hermitian_norm(&self) -> f64 {
        let anti = (&self.m - self.m.adjoint()) * C64::new(0.5, 0.0);
        anti.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.anti_hermitian_norm() <= tol * self.frobenius_norm().max(1.0)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.dim();
        let prod = self.m.adjoint() * &self.m;
        let id = DMatrix::<C64>::identity(d, d);
        (prod - id).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() <= tol
    }

    /// Hermitian, unit trace, eigenvalues >= -tol.
    pub fn is_density_matrix(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return false;
        }
        let herm = (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        eig.eigenvalues.iter().all(|&ev| ev >= -tol)
    }

    /// Real eigenvalues and unitary eigenvectors of a Hermitian operator.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, Operator)> {
        let anti = self.anti_hermitian_norm();
        if anti > 1e-12 * self.frobenius_norm().max(1.0) {
            return Err(Error::NotHermitian(anti));
        }
        let herm = (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let vals = eig.eigenvalues.iter().copied().collect();
        Ok((vals, Self {
            m: eig.eigenvectors,
        }))
    }

    /// The unitary exp(-i H t) for Hermitian H, by eigendecomposition.
    ///
    /// Exact (to roundoff) at every supported dimension: the 2x2 case uses
    /// the analytic eigensystem of `c0*I + c.sigma`, larger dimensions a
    /// Hermitian eigensolver. Rejects operators whose anti-Hermitian part
    /// exceeds 1e-12 relative to the operator norm, reporting that norm.
    pub fn hermitian_exp(&self, t: f64) -> Result<Operator> {
        let anti = self.anti_hermitian_norm();
        if anti > 1e-12 * self.frobenius_norm().max(1.0) {
            return Err(Error::NotHermitian(anti));
        }
        if self.dim() == 2 {
            return Ok(self.exp2(t));
        }
        let herm = (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let phases = DVector::<C64>::from_iterator(
            self.dim(),
            eig.eigenvalues.iter().map(|&ev| (-C64::i() * ev * t).exp()),
        );
        let mut scaled = eig.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        Ok(Self {
            m: scaled * eig.eigenvectors.adjoint(),
        })
    }

    // Closed-form 2x2 branch: H = c0*I + (z, b) with eigen-splitting
    // lambda = sqrt(z^2 + |b|^2).
    fn exp2(&self, t: f64) -> Operator {
        let a = self.m[(0, 0)].re;
        let d = self.m[(1, 1)].re;
        let b = (self.m[(0, 1)] + self.m[(1, 0)].conj()) * 0.5;
        let c0 = 0.5 * (a + d);
        let z = 0.5 * (a - d);
        let lambda = (z * z + b.norm_sqr()).sqrt();
        let phase = (-C64::i() * c0 * t).exp();
        let (cos_l, sinc_l) = if lambda > 0.0 {
            ((lambda * t).cos(), (lambda * t).sin() / lambda)
        } else {
            (1.0, t)
        };
        let f = -C64::i() * sinc_l;
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                phase * (cos_l + f * z),
                phase * f * b,
                phase * f * b.conj(),
                phase * (cos_l - f * z),
            ],
        );
        Operator { m }
    }

    /// Kronecker product; the first factor is the most significant subsystem.
    pub fn tensor(&self, other: &Operator) -> Result<Operator> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(Error::TensorTooLarge(dim));
        }
        Operator::from_matrix(self.m.kronecker(&other.m))
    }

    /// Trace out the second (least significant) factor of dimension
    /// `dim / keep_dim`.
    pub fn partial_trace_second(&self, keep_dim: usize) -> Result<Operator> {
        let dim = self.dim();
        if keep_dim == 0 || dim % keep_dim != 0 {
            return Err(Error::DimMismatch(dim, keep_dim));
        }
        let env = dim / keep_dim;
        let mut out = DMatrix::<C64>::zeros(keep_dim, keep_dim);
        for i in 0..keep_dim {
            for j in 0..keep_dim {
                let mut s = C64::new(0.0, 0.0);
                for b in 0..env {
                    s += self.m[(i * env + b, j * env + b)];
                }
                out[(i, j)] = s;
            }
        }
        Operator::from_matrix(out)
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if self.dim() != v.dim() {
            return Err(Error::DimMismatch(self.dim(), v.dim()));
        }
        Ok(StateVector { v: &self.m * &v.v })
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m + &rhs.m,
        }
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m - &rhs.m,
        }
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m * &rhs.m,
        }
    }
}

impl std::ops::Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

/// Pauli X on a single qubit.
pub fn sigma_x() -> Operator {
    Operator::from_rows(
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

/// Pauli Y on a single qubit.
pub fn sigma_y() -> Operator {
    Operator::from_rows(
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

/// Pauli Z on a single qubit; |0> is the +1 eigenstate.
pub fn sigma_z() -> Operator {
    Operator::from_rows(
        2,
        &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        ],
    )
    .unwrap()
}

/// Raising operator |0><1|.
pub fn sigma_plus() -> Operator {
    Operator::from_rows(
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

/// Lowering operator |1><0|.
pub fn sigma_minus() -> Operator {
    Operator::from_rows(
        2,
        &[
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
    .unwrap()
}

/// The 2x2 Hermitian combination c0*I + cx*sx + cy*sy + cz*sz, built
/// entry-wise (hot path for schedule evaluation).
pub fn pauli_combination(c0: f64, cx: f64, cy: f64, cz: f64) -> Operator {
    Operator {
        m: DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(c0 + cz, 0.0),
                C64::new(cx, -cy),
                C64::new(cx, cy),
                C64::new(c0 - cz, 0.0),
            ],
        ),
    }
}

/// Frobenius distances between two operators, both with and without
/// optimizing over a global phase.
#[derive(Clone, Copy, Debug)]
pub struct OperatorDistance {
    /// min over alpha of ||A - e^{i alpha} B||_F.
    pub phase_insensitive: f64,
    /// ||A - B||_F.
    pub phase_sensitive: f64,
}

/// Both Frobenius distances between `a` and `b`. The phase-insensitive
/// minimum is attained at e^{i alpha} = conj(c)/|c| with c = tr(A^dag B);
/// the distance is evaluated by direct subtraction at that phase so that
/// operators equal up to a global phase give ~1e-16 rather than the
/// ~sqrt(eps) floor of the norm-identity form.
pub fn operator_distance(a: &Operator, b: &Operator) -> Result<OperatorDistance> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    let overlap: C64 = (a.dagger().m * &b.m).diagonal().sum();
    let phase = if overlap.norm() > 0.0 {
        overlap.conj() / overlap.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let phase_insensitive = (a - &b.scale(phase)).frobenius_norm();
    let phase_sensitive = (a - b).frobenius_norm();
    Ok(OperatorDistance {
        phase_insensitive,
        phase_sensitive,
    })
}

/// A pure state on a 2-, 4- or 8-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    v: DVector<C64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        check_dim(amps.len())?;
        Ok(Self {
            v: DVector::from_column_slice(amps),
        })
    }

    /// Computational basis state |k>.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        check_dim(dim)?;
        if k >= dim {
            return Err(Error::DimMismatch(k, dim));
        }
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        Ok(Self { v })
    }

    /// (|0> + |1>)/sqrt(2).
    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            v: DVector::from_column_slice(&[C64::new(s, 0.0), C64::new(s, 0.0)]),
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn amplitude(&self, k: usize) -> C64 {
        self.v[k]
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// <self|other>.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.v
            .iter()
            .zip(other.v.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |self><self| as a density matrix.
    pub fn projector(&self) -> Operator {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = self.v[i] * self.v[j].conj();
            }
        }
        Operator { m }
    }

    /// <self| A |self>, real part (A Hermitian in all call sites).
    pub fn expectation(&self, a: &Operator) -> Result<f64> {
        if self.dim() != a.dim() {
            return Err(Error::DimMismatch(self.dim(), a.dim()));
        }
        let av = &a.m * &self.v;
        let val: C64 = self
            .v
            .iter()
            .zip(av.iter())
            .map(|(s, t)| s.conj() * t)
            .sum();
        Ok(val.re)
    }

    /// Tensor product |self> (x) |other>, first factor most significant.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let dim = self.dim() * other.dim();
        if dim > MAX_DIM {
            return Err(Error::TensorTooLarge(dim));
        }
        let mut v = DVector::zeros(dim);
        for i in 0..self.dim() {
            for j in 0..other.dim() {
                v[i * other.dim() + j] = self.v[i] * other.v[j];
            }
        }
        Ok(StateVector { v })
    }
}
