//! Dynamical systems `ẋ = A(λ, u) x` over real state vectors.
//!
//! Every system here is linear in the state and affine in the controls, so
//! `A(λ, u) = A0 + Σ_k u_k A_k`. [`BilinearDynamics`] stores that split, which
//! makes residuals and their adjoints cheap during training. The direct
//! right-hand sides (dense Lindblad, closed-form z-equations, ...) stay
//! available through [`SystemSpec::rhs`] for independent validation.

pub mod density;
pub mod lambda;
pub mod nqubit;
pub mod tls;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

pub use density::{
    coherence, fidelity, pack_density, unpack_density, CMatrix, DensityMatrix, Packing,
};
pub use lambda::{
    lambda3_rhs, lambda4_rhs, FourLevelParams, LambdaParams, DETUNING,
};
pub use nqubit::{nqubit_real_system, NQubitParams};
pub use tls::{tls_matrix, tls_optimal_constant_control, tls_steady_state, TlsParams};

use crate::error::{Error, Result};

/// `A(u) = drift + Σ_k u_k · generators[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearDynamics {
    pub drift: Array2<f64>,
    pub generators: Vec<Array2<f64>>,
}

impl BilinearDynamics {
    /// Recovers the split by probing a right-hand side that is linear in `x`
    /// and affine in `u` with unit vectors.
    pub fn probe(
        n: usize,
        m: usize,
        rhs: impl Fn(&[f64], &[f64]) -> Result<Array1<f64>>,
    ) -> Result<Self> {
        let zero_u = vec![0.0; m];
        let mut drift = Array2::zeros((n, n));
        let mut generators = vec![Array2::zeros((n, n)); m];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let base = rhs(&e, &zero_u)?;
            drift.column_mut(j).assign(&base);
            for (k, g) in generators.iter_mut().enumerate() {
                let mut uk = zero_u.clone();
                uk[k] = 1.0;
                g.column_mut(j).assign(&(rhs(&e, &uk)? - &base));
            }
            e[j] = 0.0;
        }
        Ok(Self { drift, generators })
    }

    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.generators.len()
    }

    pub fn matrix(&self, u: &[f64]) -> Array2<f64> {
        let mut a = self.drift.clone();
        for (g, &uk) in self.generators.iter().zip(u) {
            a.scaled_add(uk, g);
        }
        a
    }

    pub fn apply(&self, x: ArrayView1<f64>, u: &[f64]) -> Array1<f64> {
        let mut y = self.drift.dot(&x);
        for (g, &uk) in self.generators.iter().zip(u) {
            y.scaled_add(uk, &g.dot(&x));
        }
        y
    }

    /// Column-wise `A(u_i) x_i` for states `n×M` and controls `m×M`.
    pub fn apply_batch(&self, x: &Array2<f64>, u: &Array2<f64>) -> Array2<f64> {
        let mut y = self.drift.dot(x);
        for (k, g) in self.generators.iter().enumerate() {
            y += &(g.dot(x) * &u.row(k).insert_axis(Axis(0)));
        }
        y
    }

    /// Adjoints of `Σ_i r_iᵀ A(u_i) x_i` with respect to `x` and `u`.
    pub fn vjp_batch(
        &self,
        x: &Array2<f64>,
        u: &Array2<f64>,
        r: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let mut gx = self.drift.t().dot(r);
        let mut gu = Array2::zeros(u.raw_dim());
        for (k, g) in self.generators.iter().enumerate() {
            gx += &(g.t().dot(r) * &u.row(k).insert_axis(Axis(0)));
            let gxk = g.dot(x);
            let col_dots = (&gxk * r).sum_axis(Axis(0));
            gu.row_mut(k).assign(&col_dots);
        }
        (gx, gu)
    }
}

/// Which physical model a [`SystemSpec`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemKind {
    Tls(TlsParams),
    Lambda3(LambdaParams),
    Lambda4(FourLevelParams),
    Nqubit(NQubitParams),
}

impl SystemKind {
    pub fn state_dim(&self) -> usize {
        match self {
            SystemKind::Tls(_) => 4,
            SystemKind::Lambda3(_) => 9,
            SystemKind::Lambda4(_) => 16,
            SystemKind::Nqubit(p) => 2 * p.hilbert_dim(),
        }
    }

    pub fn control_dim(&self) -> usize {
        match self {
            SystemKind::Tls(_) => 1,
            _ => 2,
        }
    }

    pub fn packing(&self) -> Option<Packing> {
        match self {
            SystemKind::Tls(_) => Some(Packing::QUBIT),
            SystemKind::Lambda3(_) => Some(Packing(3)),
            SystemKind::Lambda4(_) => Some(Packing(4)),
            SystemKind::Nqubit(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SystemKind::Tls(p) => p.validate(),
            SystemKind::Lambda3(p) => p.validate(),
            SystemKind::Lambda4(p) => p.validate(),
            SystemKind::Nqubit(p) => p.validate(),
        }
    }

    /// Direct right-hand side, independent of the bilinear split.
    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Array1<f64>> {
        match self {
            SystemKind::Tls(p) => Ok(tls_matrix(p, u[0]).dot(&ArrayView1::from(x))),
            SystemKind::Lambda3(p) => Ok(lambda3_rhs(x, u[0], u[1], p)),
            SystemKind::Lambda4(p) => {
                let rho = unpack_density(x, Packing(4))?;
                lambda::lambda4_rhs_unchecked(&rho, u[0], u[1], p)
            }
            SystemKind::Nqubit(p) => {
                Ok(nqubit_real_system(p, u[0], u[1])?.dot(&ArrayView1::from(x)))
            }
        }
    }

    pub fn bilinear(&self) -> Result<BilinearDynamics> {
        self.validate()?;
        if let SystemKind::Nqubit(p) = self {
            // Built directly: probing a 2^{N+1} system column by column is wasteful.
            return Ok(BilinearDynamics {
                drift: Array2::zeros((self.state_dim(), self.state_dim())),
                generators: vec![
                    nqubit::real_embedding(&nqubit::transverse_hamiltonian(p)),
                    nqubit::real_embedding(&nqubit::problem_hamiltonian(p)),
                ],
            });
        }
        BilinearDynamics::probe(self.state_dim(), self.control_dim(), |x, u| self.rhs(x, u))
    }
}

/// What the control loss pushes the state towards.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec {
    /// Squared distance to a fixed state.
    StateVector(Array1<f64>),
    /// Squared distance of one component from 1.
    PopulationIndex(usize),
    /// Expectation of a real symmetric observable on the Hilbert space, for
    /// states packed as `(Re ψ, Im ψ)`.
    ExpectationMin(Array2<f64>),
}

impl TargetSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            TargetSpec::StateVector(xd) if xd.len() != n => Err(Error::config(format!(
                "target state has length {}, expected {n}",
                xd.len()
            ))),
            TargetSpec::PopulationIndex(i) if *i >= n => {
                Err(Error::config(format!("target index {i} out of range for n = {n}")))
            }
            TargetSpec::ExpectationMin(q) => {
                if q.nrows() != q.ncols() || 2 * q.nrows() != n {
                    return Err(Error::config("observable must be square with 2·dim = n"));
                }
                if (q - &q.t()).iter().any(|v| v.abs() > 1e-12) {
                    return Err(Error::config("observable must be symmetric"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A squared penalty evaluated at every grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum ConstraintTerm {
    /// `x_k²`
    StateComponent { index: usize },
    /// `(Σ_k u_k − value)²`
    ControlSum { value: f64 },
}

/// A fully specified control problem.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub name: String,
    pub kind: SystemKind,
    pub x0: Array1<f64>,
    pub u0: Array1<f64>,
    pub target: TargetSpec,
    pub constraints: Vec<ConstraintTerm>,
    pub dynamics: BilinearDynamics,
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        kind: SystemKind,
        x0: Array1<f64>,
        u0: Array1<f64>,
        target: TargetSpec,
        constraints: Vec<ConstraintTerm>,
    ) -> Result<Self> {
        let dynamics = kind.bilinear()?;
        let spec = Self {
            name: name.into(),
            kind,
            x0,
            u0,
            target,
            constraints,
            dynamics,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.kind.state_dim()
    }

    pub fn m(&self) -> usize {
        self.kind.control_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if self.x0.len() != n || self.u0.len() != m {
            return Err(Error::config(format!(
                "initial conditions have lengths ({}, {}), expected ({n}, {m})",
                self.x0.len(),
                self.u0.len()
            )));
        }
        if self.x0.iter().chain(self.u0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite initial condition"));
        }
        if let Some(packing) = self.kind.packing() {
            DensityMatrix::from_packed(self.x0.as_slice().expect("contiguous"), packing)?;
        } else {
            let norm: f64 = self.x0.iter().map(|v| v * v).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::state(format!("initial wavefunction has norm² {norm}")));
            }
        }
        self.target.validate(n)?;
        for c in &self.constraints {
            if let ConstraintTerm::StateComponent { index } = c {
                if *index >= n {
                    return Err(Error::config(format!("constraint index {index} out of range")));
                }
            }
        }
        Ok(())
    }

    pub fn rhs(&self, x: &[f64], u: &[f64]) -> Result<Array1<f64>> {
        self.kind.rhs(x, u)
    }

    /// Same system with different physical parameters; dimensions must agree.
    pub fn with_kind(&self, kind: SystemKind) -> Result<Self> {
        if kind.state_dim() != self.n() || kind.control_dim() != self.m() {
            return Err(Error::config("parameter change may not alter dimensions"));
        }
        Self::new(
            self.name.clone(),
            kind,
            self.x0.clone(),
            self.u0.clone(),
            self.target.clone(),
            self.constraints.clone(),
        )
    }

    /// Qubit with the mixed target `I/2`, starting from `ρ(0)`.
    pub fn tls(params: TlsParams, rho0: &DensityMatrix) -> Result<Self> {
        if rho0.dim() != 2 {
            return Err(Error::state("two-level system needs a qubit state"));
        }
        Self::new(
            "tls",
            SystemKind::Tls(params),
            rho0.pack(Packing::QUBIT)?,
            Array1::zeros(1),
            TargetSpec::StateVector(ndarray::array![0.5, 0.5, 0.0, 0.0]),
            vec![],
        )
    }

    /// Transfer `|1⟩ → |2⟩` while keeping `|1⟩` and `|3⟩` empty.
    pub fn lambda3(params: LambdaParams, rho0: &DensityMatrix) -> Result<Self> {
        if rho0.dim() != 3 {
            return Err(Error::state("Λ system needs a 3-level state"));
        }
        Self::new(
            "lambda3",
            SystemKind::Lambda3(params),
            rho0.pack(Packing(3))?,
            Array1::zeros(2),
            TargetSpec::PopulationIndex(1),
            vec![
                ConstraintTerm::StateComponent { index: 0 },
                ConstraintTerm::StateComponent { index: 2 },
            ],
        )
    }

    /// Four-level transfer `|1⟩ → |2⟩` with `|4⟩` also kept empty.
    pub fn lambda4(params: FourLevelParams, rho0: &DensityMatrix) -> Result<Self> {
        if rho0.dim() != 4 {
            return Err(Error::state("four-level system needs a 4-level state"));
        }
        Self::new(
            "lambda4",
            SystemKind::Lambda4(params),
            rho0.pack(Packing(4))?,
            Array1::zeros(2),
            TargetSpec::PopulationIndex(1),
            vec![
                ConstraintTerm::StateComponent { index: 0 },
                ConstraintTerm::StateComponent { index: 2 },
                ConstraintTerm::StateComponent { index: 3 },
            ],
        )
    }

    /// Drive `|+⟩^N` into the ground state of `Hp`, controls `(g0, gp)`
    /// starting at `(1, 0)`. `tied` adds the penalty `(g0 + gp − 1)²`.
    pub fn nqubit(params: NQubitParams, tied: bool) -> Result<Self> {
        params.validate()?;
        Self::new(
            if params.interacting { "ising" } else { "nqubit" },
            SystemKind::Nqubit(params),
            nqubit::plus_state(&params),
            ndarray::array![1.0, 0.0],
            TargetSpec::ExpectationMin(nqubit::problem_hamiltonian(&params)),
            if tied {
                vec![ConstraintTerm::ControlSum { value: 1.0 }]
            } else {
                vec![]
            },
        )
    }
}

/// `ρ(0) = σ11/2 + σ22/2 + ε(σ12 + σ21)/2` on the Λ system.
pub fn lambda_epsilon_state(eps: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::config(format!("ε must lie in [0, 1], got {eps}")));
    }
    let mut z = [0.0; 9];
    z[0] = 0.5;
    z[1] = 0.5;
    z[3] = 0.5 * eps;
    DensityMatrix::from_packed(&z, Packing(3))
}

/// `ρ(0) = p|g⟩⟨g| + (1 − p)|e⟩⟨e|`.
pub fn tls_gibbs_state(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("p must lie in [0, 1], got {p}")));
    }
    DensityMatrix::from_packed(&[p, 1.0 - p, 0.0, 0.0], Packing::QUBIT)
}
