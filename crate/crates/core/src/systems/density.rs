//! Density matrices, their real packings, Uhlmann fidelity and the dense
//! Lindblad right-hand side.

use nalgebra::DMatrix;
use ndarray::Array1;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on Hermiticity, trace and eigenvalue positivity.
pub const STATE_TOL: f64 = 1e-9;

/// Real packing of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
///
/// Populations first, then `(Re ρ_ij, Im ρ_ij)` for `i < j` in row-major
/// order. For a qubit with basis `(g, e)` this is `(ρ_gg, ρ_ee, Re ρ_ge, Im ρ_ge)`.
pub struct Packing(pub usize);

impl Packing {
    pub const QUBIT: Packing = Packing(2);

    pub fn dim(&self) -> usize {
        self.0
    }

    pub fn len(&self) -> usize {
        let d = self.dim();
        d * d
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn is_hermitian(rho: &CMatrix, tol: f64) -> bool {
    rho.is_square()
        && (0..rho.nrows())
            .all(|i| (0..rho.ncols()).all(|j| (rho[(i, j)] - rho[(j, i)].conj()).norm() <= tol))
}

pub fn trace(rho: &CMatrix) -> Complex64 {
    rho.diagonal().iter().sum()
}

/// Hermitian eigenvalues in ascending order.
pub fn hermitian_eigenvalues(rho: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = rho.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// (all within [`STATE_TOL`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: CMatrix,
}

impl DensityMatrix {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if !rho.is_square() || !(2..=16).contains(&rho.nrows()) {
            return Err(Error::state(format!(
                "density matrix must be square with dim in 2..=16, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if !is_hermitian(&rho, STATE_TOL) {
            return Err(Error::state("matrix is not Hermitian"));
        }
        let tr = trace(&rho);
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::state(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&rho)[0];
        if min < -STATE_TOL {
            return Err(Error::state(format!("negative eigenvalue {min}")));
        }
        Ok(Self { rho })
    }

    pub fn from_packed(x: &[f64], packing: Packing) -> Result<Self> {
        Self::new(unpack_density(x, packing)?)
    }

    /// `|k⟩⟨k|` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(k, k)] = Complex64::new(1.0, 0.0);
        Self { rho }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            rho: CMatrix::identity(dim, dim).map(|z| z / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    pub fn pack(&self, packing: Packing) -> Result<Array1<f64>> {
        pack_density(&self.rho, packing)
    }
}

/// Packs a Hermitian matrix into its real vector.
pub fn pack_density(rho: &CMatrix, packing: Packing) -> Result<Array1<f64>> {
    let d = packing.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::state(format!(
            "expected {d}x{d} matrix, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if !is_hermitian(rho, STATE_TOL) {
        return Err(Error::state("cannot pack a non-Hermitian matrix"));
    }
    let mut out = Vec::with_capacity(d * d);
    out.extend((0..d).map(|i| rho[(i, i)].re));
    for i in 0..d {
        for j in i + 1..d {
            out.extend([rho[(i, j)].re, rho[(i, j)].im]);
        }
    }
    Ok(Array1::from(out))
}

/// Inverse of [`pack_density`]; always yields a Hermitian matrix.
pub fn unpack_density(x: &[f64], packing: Packing) -> Result<CMatrix> {
    if x.len() != packing.len() {
        return Err(Error::state(format!(
            "packed state has length {}, expected {}",
            x.len(),
            packing.len()
        )));
    }
    let d = packing.dim();
    let mut rho = CMatrix::zeros(d, d);
    for i in 0..d {
        rho[(i, i)] = Complex64::new(x[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let z = Complex64::new(x[k], x[k + 1]);
            rho[(i, j)] = z;
            rho[(j, i)] = z.conj();
            k += 2;
        }
    }
    Ok(rho)
}

/// PSD square root through the Hermitian eigendecomposition. Eigenvalues in
/// `[-STATE_TOL, 0)` are clamped to zero; anything lower is an error.
fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = m.clone().symmetric_eigen();
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &l in eig.eigenvalues.iter() {
        if l < -STATE_TOL {
            return Err(Error::state(format!("negative eigenvalue {l}")));
        }
        roots.push(Complex64::new(l.max(0.0).sqrt(), 0.0));
    }
    let v = &eig.eigenvectors;
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(roots));
    Ok(v * d * v.adjoint())
}

/// Uhlmann fidelity `F = [Tr √(√ρ σ √ρ)]²`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::state("fidelity of matrices with different dimensions"));
    }
    let sr = psd_sqrt(rho)?;
    let inner = &sr * sigma * &sr;
    // Symmetrize against round-off before the second decomposition.
    let inner = (&inner + inner.adjoint()).map(|z| z * 0.5);
    let mut tr = 0.0;
    for &l in inner.symmetric_eigenvalues().iter() {
        if l < -STATE_TOL {
            return Err(Error::state(format!("negative eigenvalue {l} in fidelity")));
        }
        tr += l.max(0.0).sqrt();
    }
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// `C = 2|ρ_eg|` for a qubit.
pub fn coherence(rho: &CMatrix) -> Result<f64> {
    if rho.nrows() != 2 || rho.ncols() != 2 {
        return Err(Error::state("coherence is defined for qubits only"));
    }
    Ok(2.0 * rho[(0, 1)].norm())
}

/// A Lindblad jump operator with its rate.
#[derive(Clone, Debug)]
pub struct Channel {
    pub rate: f64,
    pub op: CMatrix,
}

/// `−i[H, ρ] + Σ γ (L ρ L† − ½{L†L, ρ})`.
pub fn lindblad_rhs(h: &CMatrix, rho: &CMatrix, channels: &[Channel]) -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    let mut d = (h * rho - rho * h).map(|z| -i * z);
    for ch in channels {
        let l = &ch.op;
        let ld = l.adjoint();
        let ldl = &ld * l;
        let term = l * rho * &ld - (&ldl * rho + rho * &ldl).map(|z| z * 0.5);
        d += term.map(|z| z * ch.rate);
    }
    d
}

/// Projector `|k⟩⟨k|` as a plain matrix.
pub fn projector(dim: usize, k: usize) -> CMatrix {
    DensityMatrix::basis(dim, k).into_matrix()
}

/// `|i⟩⟨j|`.
pub fn transition(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}
