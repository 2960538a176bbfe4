//! Register of N qubits driven between a transverse-field Hamiltonian `H0` and
//! a problem Hamiltonian `Hp`, written as a real system on `(Re ψ, Im ψ)`.
//!
//! Basis index bit `j` is 0 for spin up (`σ_z = +1`) and 1 for spin down.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NQubitParams {
    pub n_qubits: usize,
    pub omega_x: f64,
    /// Field strength in `Hp` (`ω_z`, or `ω_f` for the Ising case).
    pub omega_z: f64,
    /// Nearest-neighbour `σ_z σ_z` coupling; ignored unless `interacting`.
    pub coupling: f64,
    pub interacting: bool,
}

impl NQubitParams {
    pub fn non_interacting(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            omega_x: 1.0,
            omega_z: 1.0,
            coupling: 0.0,
            interacting: false,
        }
    }

    /// Open Ising chain with `J = ω_f / 4`.
    pub fn ising(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            omega_x: 1.0,
            omega_z: 1.0,
            coupling: 0.25,
            interacting: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.n_qubits) {
            return Err(Error::config(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {}",
                self.n_qubits
            )));
        }
        if ![self.omega_x, self.omega_z, self.coupling].iter().all(|v| v.is_finite()) {
            return Err(Error::config("non-finite qubit parameters"));
        }
        Ok(())
    }

    pub fn hilbert_dim(&self) -> usize {
        1 << self.n_qubits
    }
}

fn spin(index: usize, j: usize) -> f64 {
    if index >> j & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `H0 = −(ω_x/2) Σ σ_x,j`.
pub fn transverse_hamiltonian(p: &NQubitParams) -> Array2<f64> {
    let d = p.hilbert_dim();
    let mut h = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..p.n_qubits {
            h[[i ^ (1 << j), i]] += -0.5 * p.omega_x;
        }
    }
    h
}

/// Diagonal of `Hp = (ω_z/2) Σ (1 − σ_z,j) − J Σ σ_z,j σ_z,j+1`.
pub fn problem_diagonal(p: &NQubitParams) -> Array1<f64> {
    Array1::from_iter((0..p.hilbert_dim()).map(|i| {
        let field: f64 = (0..p.n_qubits).map(|j| 1.0 - spin(i, j)).sum();
        let mut e = 0.5 * p.omega_z * field;
        if p.interacting {
            e -= p.coupling * (0..p.n_qubits.saturating_sub(1)).map(|j| spin(i, j) * spin(i, j + 1)).sum::<f64>();
        }
        e
    }))
}

pub fn problem_hamiltonian(p: &NQubitParams) -> Array2<f64> {
    Array2::from_diag(&problem_diagonal(p))
}

/// Real embedding `[[0, H], [−H, 0]]` of a real Hamiltonian.
pub fn real_embedding(h: &Array2<f64>) -> Array2<f64> {
    let d = h.nrows();
    let mut a = Array2::zeros((2 * d, 2 * d));
    a.slice_mut(s![..d, d..]).assign(h);
    a.slice_mut(s![d.., ..d]).assign(&h.mapv(|v| -v));
    a
}

/// Dynamical matrix for `H = g0·H0 + gp·Hp`.
pub fn nqubit_real_system(p: &NQubitParams, g0: f64, gp: f64) -> Result<Array2<f64>> {
    p.validate()?;
    let h = transverse_hamiltonian(p) * g0 + problem_hamiltonian(p) * gp;
    Ok(real_embedding(&h))
}

/// Ground state of `H0`: every qubit in `|+⟩`, packed as `(Re ψ, Im ψ)`.
pub fn plus_state(p: &NQubitParams) -> Array1<f64> {
    let d = p.hilbert_dim();
    let mut x = Array1::zeros(2 * d);
    x.slice_mut(s![..d]).fill(1.0 / (d as f64).sqrt());
    x
}

/// All spins up, packed.
pub fn all_up_state(p: &NQubitParams) -> Array1<f64> {
    let mut x = Array1::zeros(2 * p.hilbert_dim());
    x[0] = 1.0;
    x
}

/// `⟨ψ|Hp|ψ⟩ / ⟨ψ|ψ⟩` from the packed state.
pub fn problem_expectation(p: &NQubitParams, x: &[f64]) -> f64 {
    let diag = problem_diagonal(p);
    let d = diag.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d {
        let w = x[i] * x[i] + x[d + i] * x[d + i];
        num += diag[i] * w;
        den += w;
    }
    num / den
}

/// Weight of the normalised state on the ground space of `Hp`.
pub fn ground_state_fidelity(p: &NQubitParams, x: &[f64]) -> f64 {
    let diag = problem_diagonal(p);
    let d = diag.len();
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..d {
        let w = x[i] * x[i] + x[d + i] * x[d + i];
        if (diag[i] - min).abs() < 1e-12 {
            num += w;
        }
        den += w;
    }
    num / den
}

/// `|⟨φ|ψ⟩|²` between packed states.
pub fn state_fidelity(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() / 2;
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..d {
        // ⟨x|y⟩ = Σ (xr − i xi)(yr + i yi)
        re += x[i] * y[i] + x[d + i] * y[d + i];
        im += x[i] * y[d + i] - x[d + i] * y[i];
    }
    re * re + im * im
}
