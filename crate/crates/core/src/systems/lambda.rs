//! Three-level Λ system and its four-level extension, driven by a pump
//! `Ω_p` (levels 1↔3) and a Stokes field `Ω_s` (levels 2↔3), with per-level
//! dephasing `γ_i (2σ_ii ρ σ_ii − σ_ii ρ − ρ σ_ii)`.

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{
    lindblad_rhs, pack_density, projector, trace, unpack_density, CMatrix, Channel, Packing,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaParams {
    /// Two-photon detuning.
    pub delta: f64,
    /// One-photon detuning of the excited level.
    pub delta1: f64,
    pub gamma: [f64; 3],
}

impl Default for LambdaParams {
    fn default() -> Self {
        Self {
            delta: 0.0,
            delta1: 0.0,
            gamma: [1e-3, 1e-3, 0.14],
        }
    }
}

/// Detuning used for robustness checks: `δ/2π = Δ1/2π = 0.2`.
pub const DETUNING: f64 = 0.4 * std::f64::consts::PI;

impl LambdaParams {
    pub fn detuned(self) -> Self {
        Self {
            delta: DETUNING,
            delta1: DETUNING,
            ..self
        }
    }

    pub fn lossless(self) -> Self {
        Self {
            gamma: [0.0; 3],
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite()
            || !self.delta1.is_finite()
            || self.gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(Error::config(format!("invalid Λ-system parameters {self:?}")));
        }
        Ok(())
    }
}

/// Right-hand side on `z = (ρ11, ρ22, ρ33, Re ρ12, Im ρ12, Re ρ13, Im ρ13, Re ρ23, Im ρ23)`.
pub fn lambda3_rhs(z: &[f64], omega_p: f64, omega_s: f64, p: &LambdaParams) -> Array1<f64> {
    assert_eq!(z.len(), 9, "Λ state has 9 components");
    let [g1, g2, g3] = p.gamma;
    let (d, d1) = (p.delta, p.delta1);
    let (op, os) = (omega_p, omega_s);
    let (hp, hs) = (0.5 * op, 0.5 * os);
    let [z1, z2, z3, z4, z5, z6, z7, z8, z9] = [z[0], z[1], z[2], z[3], z[4], z[5], z[6], z[7], z[8]];
    Array1::from(vec![
        -op * z7,
        -os * z9,
        op * z7 + os * z9,
        -d * z5 - (g1 + g2) * z4 - hp * z9 - hs * z7,
        d * z4 - (g1 + g2) * z5 - hp * z8 + hs * z6,
        -d1 * z7 - (g1 + g3) * z6 - hs * z5,
        d1 * z6 - (g1 + g3) * z7 - hp * z3 + hp * z1 + hs * z4,
        (d - d1) * z9 - (g2 + g3) * z8 + hp * z5,
        (d1 - d) * z8 - (g2 + g3) * z9 + hp * z4 + hs * z2 - hs * z3,
    ])
}

pub fn lambda3_hamiltonian(omega_p: f64, omega_s: f64, p: &LambdaParams) -> CMatrix {
    let mut h = CMatrix::zeros(3, 3);
    let c = |v: f64| Complex64::new(v, 0.0);
    h[(1, 1)] = c(p.delta);
    h[(2, 2)] = c(p.delta1);
    h[(0, 2)] = c(0.5 * omega_p);
    h[(2, 0)] = c(0.5 * omega_p);
    h[(1, 2)] = c(0.5 * omega_s);
    h[(2, 1)] = c(0.5 * omega_s);
    h
}

/// Dephasing `γ(2PρP − Pρ − ρP)` equals a Lindblad channel `P` at rate `2γ`.
fn dephasing_channels(gamma: &[f64]) -> Vec<Channel> {
    let d = gamma.len();
    gamma
        .iter()
        .enumerate()
        .map(|(i, &g)| Channel {
            rate: 2.0 * g,
            op: projector(d, i),
        })
        .collect()
}

/// Dense-matrix Lindblad evaluation of the Λ system, used as an oracle.
pub fn lambda3_dense_rhs(
    z: &[f64],
    omega_p: f64,
    omega_s: f64,
    p: &LambdaParams,
) -> Result<Array1<f64>> {
    let rho = unpack_density(z, Packing(3))?;
    let d = lindblad_rhs(
        &lambda3_hamiltonian(omega_p, omega_s, p),
        &rho,
        &dephasing_channels(&p.gamma),
    );
    pack_density(&d, Packing(3))
}

/// Λ evolution with an extra `|1⟩↔|2⟩` coupling `½(iΩ_a σ21 − iΩ_a σ12)`.
pub fn lambda3_auxiliary_rhs(
    z: &[f64],
    omega_p: f64,
    omega_s: f64,
    omega_a: f64,
    p: &LambdaParams,
) -> Result<Array1<f64>> {
    let rho = unpack_density(z, Packing(3))?;
    let mut h = lambda3_hamiltonian(omega_p, omega_s, p);
    h[(1, 0)] += Complex64::new(0.0, 0.5 * omega_a);
    h[(0, 1)] += Complex64::new(0.0, -0.5 * omega_a);
    let d = lindblad_rhs(&h, &rho, &dephasing_channels(&p.gamma));
    pack_density(&d, Packing(3))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourLevelParams {
    /// Two-photon detuning.
    pub delta: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub gamma: [f64; 4],
}

impl Default for FourLevelParams {
    fn default() -> Self {
        Self {
            delta: 0.0,
            delta3: 0.0,
            delta4: 6.79,
            gamma: [1e-3, 1e-3, 0.14, 1e-3],
        }
    }
}

impl FourLevelParams {
    pub fn validate(&self) -> Result<()> {
        if ![self.delta, self.delta3, self.delta4].iter().all(|v| v.is_finite())
            || self.gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(Error::config(format!("invalid four-level parameters {self:?}")));
        }
        Ok(())
    }
}

/// `δσ22 + Δ3σ33 + Δ4σ44 + Ω_p/2 (σ13 + σ14) + Ω_s/2 (σ23 − σ24) + h.c.`
pub fn lambda4_hamiltonian(omega_p: f64, omega_s: f64, p: &FourLevelParams) -> CMatrix {
    let mut h = CMatrix::zeros(4, 4);
    let c = |v: f64| Complex64::new(v, 0.0);
    h[(1, 1)] = c(p.delta);
    h[(2, 2)] = c(p.delta3);
    h[(3, 3)] = c(p.delta4);
    for (i, j, v) in [
        (0, 2, 0.5 * omega_p),
        (0, 3, 0.5 * omega_p),
        (1, 2, 0.5 * omega_s),
        (1, 3, -0.5 * omega_s),
    ] {
        h[(i, j)] = c(v);
        h[(j, i)] = c(v);
    }
    h
}

/// Lindblad right-hand side of the four-level system on its 16-component
/// standard packing.
pub fn lambda4_rhs(
    state: &[f64],
    omega_p: f64,
    omega_s: f64,
    p: &FourLevelParams,
) -> Result<Array1<f64>> {
    let rho = unpack_density(state, Packing(4))?;
    let tr = trace(&rho).re;
    if (tr - 1.0).abs() > 1e-6 {
        return Err(Error::state(format!("four-level state has trace {tr}")));
    }
    lambda4_rhs_unchecked(&rho, omega_p, omega_s, p)
}

/// As [`lambda4_rhs`] without the trace check; the map is linear in ρ.
pub(crate) fn lambda4_rhs_unchecked(
    rho: &CMatrix,
    omega_p: f64,
    omega_s: f64,
    p: &FourLevelParams,
) -> Result<Array1<f64>> {
    let d = lindblad_rhs(
        &lambda4_hamiltonian(omega_p, omega_s, p),
        rho,
        &dephasing_channels(&p.gamma),
    );
    pack_density(&d, Packing(4))
}
