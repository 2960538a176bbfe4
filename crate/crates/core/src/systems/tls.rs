//! Driven two-level system with absorption and emission.

use nalgebra::{Matrix4, Vector4};
use ndarray::{array, Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{fidelity, unpack_density, CMatrix, DensityMatrix, Packing};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsParams {
    pub omega_x: f64,
    pub omega_z: f64,
    pub gamma_abs: f64,
    pub gamma_em: f64,
}

impl Default for TlsParams {
    fn default() -> Self {
        Self {
            omega_x: 1.0,
            omega_z: 2.0,
            gamma_abs: 0.1,
            gamma_em: 0.3,
        }
    }
}

impl TlsParams {
    pub fn dephasing(&self) -> f64 {
        0.5 * (self.gamma_abs + self.gamma_em)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega_x, self.omega_z, self.gamma_abs, self.gamma_em];
        if all.iter().any(|v| !v.is_finite()) || self.gamma_abs < 0.0 || self.gamma_em < 0.0 {
            return Err(Error::config(format!("invalid two-level parameters {self:?}")));
        }
        Ok(())
    }
}

/// Dynamical matrix acting on `(ρ_gg, ρ_ee, Re ρ_ge, Im ρ_ge)`, the coherence
/// being the coefficient of `|g⟩⟨e|`.
pub fn tls_matrix(p: &TlsParams, xi: f64) -> Array2<f64> {
    let (wx, ga, ge) = (p.omega_x, p.gamma_abs, p.gamma_em);
    let g = p.dephasing();
    let w = 2.0 * p.omega_z + xi;
    array![
        [-ga, ge, 0.0, -2.0 * wx],
        [ga, -ge, 0.0, 2.0 * wx],
        [0.0, 0.0, -g, -w],
        [wx, -wx, w, -g],
    ]
}

/// `H = ω_z σ_z + ω_x σ_x + ξ σ_ee` in the basis `(g, e)`.
pub fn tls_hamiltonian(p: &TlsParams, xi: f64) -> CMatrix {
    let c = |v: f64| Complex64::new(v, 0.0);
    CMatrix::from_row_slice(
        2,
        2,
        &[c(-p.omega_z), c(p.omega_x), c(p.omega_x), c(p.omega_z + xi)],
    )
}

/// Trace-normalised null vector of [`tls_matrix`].
///
/// The two population rows are negatives of each other, so one of them is
/// replaced by the trace condition and the resulting 4×4 system is solved with
/// full pivoting.
pub fn tls_steady_state(p: &TlsParams, xi: f64) -> Result<Array1<f64>> {
    let a = tls_matrix(p, xi);
    let mut m = Matrix4::<f64>::zeros();
    for j in 0..4 {
        m[(0, j)] = a[[0, j]];
        m[(2, j)] = a[[2, j]];
        m[(3, j)] = a[[3, j]];
    }
    m[(1, 0)] = 1.0;
    m[(1, 1)] = 1.0;
    let lu = m.full_piv_lu();
    let scale = m.amax().max(1.0);
    let min_pivot = (0..4)
        .map(|i| lu.u()[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-12 * scale) {
        return Err(Error::DegenerateSteadyState(format!(
            "singular steady-state system at xi = {xi}"
        )));
    }
    let x = lu
        .solve(&Vector4::new(0.0, 1.0, 0.0, 0.0))
        .ok_or_else(|| Error::DegenerateSteadyState(format!("no solution at xi = {xi}")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSteadyState(format!(
            "non-finite steady state at xi = {xi}"
        )));
    }
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Result of the constant-control search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantControlOptimum {
    pub xi_star: f64,
    pub fidelity_star: f64,
}

pub const XI_SEARCH_RANGE: (f64, f64) = (-50.0, 50.0);

/// Minimises `1 − F(ρ_ss(ξ), ρ_d)` over constant `ξ`: a grid scan brackets the
/// global minimum and golden-section search refines it.
pub fn tls_optimal_constant_control(
    p: &TlsParams,
    rho_d: &DensityMatrix,
) -> Result<ConstantControlOptimum> {
    optimal_constant_control_in(p, rho_d, XI_SEARCH_RANGE)
}

pub fn optimal_constant_control_in(
    p: &TlsParams,
    rho_d: &DensityMatrix,
    (lo, hi): (f64, f64),
) -> Result<ConstantControlOptimum> {
    if rho_d.dim() != 2 {
        return Err(Error::state("target must be a qubit density matrix"));
    }
    if !(hi > lo) {
        return Err(Error::config("empty search range"));
    }
    let target = rho_d.matrix();
    let cost = |xi: f64| -> f64 {
        tls_steady_state(p, xi)
            .and_then(|x| unpack_density(x.as_slice().expect("contiguous"), Packing::QUBIT))
            .and_then(|rho| fidelity(&rho, target))
            .map(|f| 1.0 - f)
            .unwrap_or(f64::INFINITY)
    };

    const SCAN: usize = 2001;
    let h = (hi - lo) / (SCAN - 1) as f64;
    let values: Vec<f64> = (0..SCAN).map(|i| cost(lo + h * i as f64)).collect();
    let (best, &fbest) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    if !fbest.is_finite() || best == 0 || best == SCAN - 1 {
        return Err(Error::Optimization(format!(
            "no interior minimum bracketed in [{lo}, {hi}]"
        )));
    }

    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo + h * (best - 1) as f64, lo + h * (best + 1) as f64);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = cost(d);
        }
    }
    let xi_star = 0.5 * (a + b);
    let f_star = cost(xi_star);
    if !f_star.is_finite() {
        return Err(Error::Optimization("cost not finite at minimiser".into()));
    }
    Ok(ConstantControlOptimum {
        xi_star,
        fidelity_star: 1.0 - f_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_at_zero_control() {
        let a = tls_matrix(&TlsParams::default(), 0.0);
        let want = array![
            [-0.1, 0.3, 0.0, -2.0],
            [0.1, -0.3, 0.0, 2.0],
            [0.0, 0.0, -0.2, -4.0],
            [1.0, -1.0, 4.0, -0.2]
        ];
        assert!((a - want).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn population_rows_cancel() {
        for xi in [-7.0, -4.0, 0.0, 3.3] {
            let a = tls_matrix(&TlsParams::default(), xi);
            for j in 0..4 {
                assert_eq!(a[[0, j]] + a[[1, j]], 0.0);
            }
            if xi == -4.0 {
                assert_eq!(a[[2, 3]], 0.0);
            }
        }
    }

    #[test]
    fn steady_states() {
        let p = TlsParams::default();
        let x = tls_steady_state(&p, 0.0).unwrap();
        let want = [0.7225, 0.2775, -0.1106, 0.0083];
        for k in 0..4 {
            assert!((x[k] - want[k]).abs() < 5e-3, "{x}");
        }
        assert!(tls_matrix(&p, 0.0).dot(&x).iter().all(|v| v.abs() < 1e-14));

        let x = tls_steady_state(&p, -4.0).unwrap();
        assert_eq!(x[2], 0.0);
        assert!((x[3] - 0.049).abs() < 1e-3);
        // Hand-solved: 0.3 − 0.4 x1 − 2 x4 = 0 and 2 x1 − 1 = 0.2 x4.
        assert!((x[0] - 0.504902).abs() < 1e-6);
        assert!((x[1] - 0.495098).abs() < 1e-6);
    }

    #[test]
    fn degenerate_without_dissipation() {
        let p = TlsParams {
            omega_x: 0.0,
            omega_z: 0.0,
            gamma_abs: 0.0,
            gamma_em: 0.0,
        };
        assert!(matches!(
            tls_steady_state(&p, 0.0),
            Err(Error::DegenerateSteadyState(_))
        ));
    }

    #[test]
    fn constant_control_reaches_mixed_state() {
        let p = TlsParams::default();
        let opt = tls_optimal_constant_control(&p, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((opt.xi_star + 4.0).abs() < 0.05, "{opt:?}");
        assert!((opt.fidelity_star - 0.9988).abs() < 2e-3, "{opt:?}");
    }

    #[test]
    fn constant_control_recovers_free_steady_state() {
        let p = TlsParams::default();
        let x = tls_steady_state(&p, 0.0).unwrap();
        let rho = DensityMatrix::from_packed(x.as_slice().unwrap(), Packing::QUBIT).unwrap();
        let opt = tls_optimal_constant_control(&p, &rho).unwrap();
        assert!(opt.xi_star.abs() < 1e-3, "{opt:?}");
        assert!((opt.fidelity_star - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_bracket_at_range_edge() {
        let p = TlsParams::default();
        let err = optimal_constant_control_in(&p, &DensityMatrix::maximally_mixed(2), (0.0, 5.0));
        assert!(matches!(err, Err(Error::Optimization(_))));
    }

    #[test]
    fn hamiltonian_matches_generator() {
        // The commutator part of the Lindblad equation must agree with the
        // coherent part of the dynamical matrix.
        use super::super::density::{lindblad_rhs, pack_density, transition, Channel};
        let p = TlsParams::default();
        let xi = 1.7;
        let x = [0.6, 0.4, 0.1, -0.2];
        let rho = unpack_density(&x, Packing::QUBIT).unwrap();
        let ch = [
            Channel { rate: p.gamma_abs, op: transition(2, 1, 0) },
            Channel { rate: p.gamma_em, op: transition(2, 0, 1) },
        ];
        let d = lindblad_rhs(&tls_hamiltonian(&p, xi), &rho, &ch);
        let dense = pack_density(&d, Packing::QUBIT).unwrap();
        let direct = tls_matrix(&p, xi).dot(&Array1::from(x.to_vec()));
        for k in 0..4 {
            assert!((dense[k] - direct[k]).abs() < 1e-14, "{dense} vs {direct}");
        }
    }
}
