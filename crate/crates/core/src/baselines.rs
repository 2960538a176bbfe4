//! Analytic pump/Stokes pulse protocols used as benchmarks for the Λ system.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix4, Matrix5, Vector4, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_csv;

/// Field cap used for fair comparisons.
pub const FIELD_CAP: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Stirap,
    InverseEngineering,
    Stirep,
    ModSatd,
    SaStirap,
}

impl Protocol {
    pub const BENCHMARK: [Protocol; 4] = [
        Protocol::Stirap,
        Protocol::Stirep,
        Protocol::InverseEngineering,
        Protocol::ModSatd,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Protocol::Stirap => "STIRAP",
            Protocol::InverseEngineering => "Inv. Eng.",
            Protocol::Stirep => "STIREP",
            Protocol::ModSatd => "MOD-SATD",
            Protocol::SaStirap => "SA-STIRAP",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "stirap" => Ok(Protocol::Stirap),
            "inverse-engineering" | "ie" => Ok(Protocol::InverseEngineering),
            "stirep" => Ok(Protocol::Stirep),
            "mod-satd" | "modsatd" => Ok(Protocol::ModSatd),
            "sa-stirap" | "sastirap" => Ok(Protocol::SaStirap),
            other => Err(Error::config(format!("unknown protocol {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// STIRAP

/// Gaussian pulses with the Stokes field leading the pump by `delay`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirapParams {
    pub omega0: f64,
    pub sigma: f64,
    pub delay: f64,
    pub center: f64,
    pub duration: f64,
}

impl Default for StirapParams {
    /// Tuned so that the pulse area up to the transfer time is close to the
    /// reference benchmark value of 128.6.
    fn default() -> Self {
        let sigma = 5.15;
        Self {
            omega0: 2.0 * PI,
            sigma,
            delay: 1.2 * sigma,
            center: 17.5,
            duration: 35.0,
        }
    }
}

/// `(Ω_p, Ω_s)` at time `t` measured from the pulse centre.
pub fn stirap_pulses(omega0: f64, sigma: f64, delay: f64, t: f64) -> (f64, f64) {
    let g = |s: f64| omega0 * (-(s * s) / (2.0 * sigma * sigma)).exp();
    (g(t - 0.5 * delay), g(t + 0.5 * delay))
}

/// Mixing angle with `tan θ = Ω_p / Ω_s`.
pub fn mixing_angle(omega_p: f64, omega_s: f64) -> f64 {
    omega_p.atan2(omega_s)
}

// ---------------------------------------------------------------------------
// Inverse engineering

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ansatz", rename_all = "snake_case")]
pub enum InverseAnsatz {
    /// `γ = ε`, `β = πt / 2t_f`.
    Constant { epsilon: f64, t_f: f64 },
    /// Quartic `γ` and cubic `β` fixed by boundary conditions.
    Polynomial { epsilon: f64, delta: f64, t_f: f64 },
    /// Quartic `γ`, cubic-plus-sine `β`; singular at `t = 0` since `γ(0) = 0`.
    Robust { d0: f64, d1: f64, t_total: f64 },
}

impl InverseAnsatz {
    pub fn duration(&self) -> f64 {
        match *self {
            InverseAnsatz::Constant { t_f, .. } | InverseAnsatz::Polynomial { t_f, .. } => t_f,
            InverseAnsatz::Robust { t_total, .. } => t_total,
        }
    }
}

/// Polynomial coefficients (ascending powers) for `γ` and `β`.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseCoefficients {
    pub gamma: [f64; 5],
    pub beta: [f64; 4],
}

fn poly_row<const N: usize>(t: f64, derivative: usize) -> [f64; N] {
    let mut row = [0.0; N];
    for (j, r) in row.iter_mut().enumerate() {
        if j >= derivative {
            let falling: f64 = (j - derivative + 1..=j).map(|k| k as f64).product();
            *r = falling * t.powi((j - derivative) as i32);
        }
    }
    row
}

/// Solves the nine boundary conditions of the polynomial ansatz.
pub fn inverse_polynomial_coefficients(epsilon: f64, delta: f64, t_f: f64) -> Result<InverseCoefficients> {
    if !(t_f > 0.0 && t_f.is_finite()) {
        return Err(Error::config(format!("t_f must be positive, got {t_f}")));
    }
    let rows5 = [
        poly_row::<5>(0.0, 0),
        poly_row::<5>(0.0, 1),
        poly_row::<5>(t_f, 0),
        poly_row::<5>(t_f, 1),
        poly_row::<5>(0.5 * t_f, 0),
    ];
    let m5 = Matrix5::from_fn(|i, j| rows5[i][j]);
    let a = m5
        .full_piv_lu()
        .solve(&Vector5::new(epsilon, 0.0, epsilon, 0.0, delta))
        .ok_or_else(|| Error::config("singular boundary conditions for γ"))?;
    let rows4 = [
        poly_row::<4>(0.0, 0),
        poly_row::<4>(0.0, 1),
        poly_row::<4>(t_f, 0),
        poly_row::<4>(t_f, 1),
    ];
    let m4 = Matrix4::from_fn(|i, j| rows4[i][j]);
    let b = m4
        .full_piv_lu()
        .solve(&Vector4::new(0.0, 0.0, FRAC_PI_2, 0.0))
        .ok_or_else(|| Error::config("singular boundary conditions for β"))?;
    let out = InverseCoefficients {
        gamma: [a[0], a[1], a[2], a[3], a[4]],
        beta: [b[0], b[1], b[2], b[3]],
    };
    if out.gamma.iter().chain(&out.beta).any(|v| !v.is_finite()) {
        return Err(Error::config("singular boundary conditions"));
    }
    Ok(out)
}

fn poly(c: &[f64], t: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &cj in c.iter().rev() {
        d = d * t + v;
        v = v * t + cj;
    }
    (v, d)
}

/// `(γ, γ̇, β, β̇)` of an ansatz.
pub fn inverse_auxiliary(ansatz: &InverseAnsatz, t: f64) -> Result<(f64, f64, f64, f64)> {
    Ok(match *ansatz {
        InverseAnsatz::Constant { epsilon, t_f } => (epsilon, 0.0, PI * t / (2.0 * t_f), PI / (2.0 * t_f)),
        InverseAnsatz::Polynomial { epsilon, delta, t_f } => {
            let c = inverse_polynomial_coefficients(epsilon, delta, t_f)?;
            let (g, gd) = poly(&c.gamma, t);
            let (b, bd) = poly(&c.beta, t);
            (g, gd, b, bd)
        }
        InverseAnsatz::Robust { d0, d1, t_total } => {
            let tt = t_total;
            let g4 = -8.0 * (PI - 2.0 * d0) / tt.powi(4);
            let g3 = 2.0 * (7.0 * PI - 16.0 * d0 + tt) / tt.powi(3);
            let g2 = -(5.0 * PI - 16.0 * d0 + 3.0 * tt) / tt.powi(2);
            let (g, gd) = poly(&[0.0, 1.0, g2, g3, g4], t);
            let s = t / tt;
            let c2 = 0.5 * (2.0 * PI * d1 + 3.0 * PI);
            let c1 = -0.5 * (2.0 * PI * d1 + 3.0 * PI + 1.5 * PI);
            let b = -PI * s.powi(3) + c2 * s * s + c1 * s + d1 * (PI * s).sin();
            let bd = (-3.0 * PI * s * s + 2.0 * c2 * s + c1 + d1 * PI * (PI * s).cos()) / tt;
            (g, gd, b, bd)
        }
    })
}

/// `Ω_s = 2(β̇ cot γ cos β − γ̇ sin β)`, `Ω_p = 2(β̇ cot γ sin β + γ̇ cos β)`.
pub fn inverse_engineering_fields(gamma: f64, gamma_dot: f64, beta: f64, beta_dot: f64) -> (f64, f64) {
    let cot = 1.0 / gamma.tan();
    let (sb, cb) = beta.sin_cos();
    let omega_s = 2.0 * (beta_dot * cot * cb - gamma_dot * sb);
    let omega_p = 2.0 * (beta_dot * cot * sb + gamma_dot * cb);
    (omega_p, omega_s)
}

pub fn inverse_engineering_pulses(ansatz: &InverseAnsatz, t: f64) -> Result<(f64, f64)> {
    let (g, gd, b, bd) = inverse_auxiliary(ansatz, t)?;
    Ok(inverse_engineering_fields(g, gd, b, bd))
}

// ---------------------------------------------------------------------------
// STIREP

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StirepParams {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Initial trajectory angle `φ(0)`; its slope starts at zero.
    pub phi0: f64,
    /// Final value of the reparametrised time `η`.
    pub eta_final: f64,
    /// Clock rate `η̇`; the fields scale as `2η̇ Ω̃`.
    pub clock_rate: f64,
    /// RK4 steps for the trajectory pre-solve.
    pub steps: usize,
}

impl Default for StirepParams {
    /// Reference multipliers; `η_f` maximises lossless transfer and the clock
    /// rate puts the peak field at the cap.
    fn default() -> Self {
        Self {
            lambda0: 0.394,
            lambda1: -0.064,
            lambda2: 0.283,
            phi0: 0.0,
            eta_final: 4.594,
            clock_rate: 4.955,
            steps: 20_000,
        }
    }
}

/// `φ̈ = −(2φ̇² + cos²φ) tan φ − (λ0 sec φ + λ1 sin η − λ2 cos η)(φ̇² + cos²φ)^{3/2}`.
pub fn stirep_trajectory_rhs(p: &StirepParams, eta: f64, phi: f64, phi_dot: f64) -> f64 {
    let c = phi.cos();
    let k = phi_dot * phi_dot + c * c;
    let lagrange = p.lambda0 / c + p.lambda1 * eta.sin() - p.lambda2 * eta.cos();
    -(2.0 * phi_dot * phi_dot + c * c) * phi.tan() - lagrange * k.powf(1.5)
}

/// `(φ, φ̇)` tabulated on a uniform `η` grid, interpolated with cubic Hermite.
#[derive(Clone, Debug)]
pub struct StirepTrajectory {
    pub params: StirepParams,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
    pub phi_ddot: Vec<f64>,
}

pub fn solve_stirep_trajectory(p: &StirepParams) -> Result<StirepTrajectory> {
    if p.steps < 2 || !(p.eta_final > 0.0) || !(p.clock_rate > 0.0) {
        return Err(Error::config(format!("invalid STIREP settings {p:?}")));
    }
    let f = |eta: f64, y: &[f64]| -> Result<Vec<f64>> {
        Ok(vec![y[1], stirep_trajectory_rhs(p, eta, y[0], y[1])])
    };
    let h = p.eta_final / p.steps as f64;
    let (eta, ys) = crate::validator::rk4_fixed(f, &[p.phi0, 0.0], 0.0, h, p.steps)?;
    let phi: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    let phi_dot: Vec<f64> = ys.iter().map(|y| y[1]).collect();
    let phi_ddot = eta
        .iter()
        .zip(&ys)
        .map(|(&e, y)| stirep_trajectory_rhs(p, e, y[0], y[1]))
        .collect();
    Ok(StirepTrajectory {
        params: *p,
        eta,
        phi,
        phi_dot,
        phi_ddot,
    })
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

impl StirepTrajectory {
    /// `(φ, φ̇)` at `η`, clamped to the solved range.
    pub fn at(&self, eta: f64) -> (f64, f64) {
        let n = self.eta.len() - 1;
        let h = self.eta[1] - self.eta[0];
        let e = eta.clamp(0.0, self.eta[n]);
        let i = ((e / h).floor() as usize).min(n - 1);
        let s = (e - self.eta[i]) / h;
        (
            hermite(self.phi[i], self.phi[i + 1], self.phi_dot[i], self.phi_dot[i + 1], h, s),
            hermite(self.phi_dot[i], self.phi_dot[i + 1], self.phi_ddot[i], self.phi_ddot[i + 1], h, s),
        )
    }

    /// Normalised fields `(Ω̃_p, Ω̃_s)` at `η`, with `θ̃ = η`.
    pub fn normalized_fields(&self, eta: f64) -> (f64, f64) {
        let (phi, phi_dot) = self.at(eta);
        let (se, ce) = eta.sin_cos();
        let c = phi.cos();
        let omega_s = c * se - phi_dot * ce;
        let omega_p = -c * ce - phi_dot * se;
        (omega_p, omega_s)
    }

    pub fn duration(&self) -> f64 {
        self.params.eta_final / self.params.clock_rate
    }

    pub fn fields(&self, t: f64) -> (f64, f64) {
        let k = self.params.clock_rate;
        if t < 0.0 || t > self.duration() {
            return (0.0, 0.0);
        }
        let (p, s) = self.normalized_fields(k * t);
        (2.0 * k * p, 2.0 * k * s)
    }
}

/// Pre-solves the trajectory and returns the pulse sequence.
pub fn stirep_pulses(p: &StirepParams) -> Result<PulseSequence> {
    let traj = solve_stirep_trajectory(p)?;
    Ok(PulseSequence {
        protocol: Protocol::Stirep,
        duration: traj.duration(),
        shape: Shape::Stirep(Arc::new(traj)),
    })
}

// ---------------------------------------------------------------------------
// MOD-SATD

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModSatdParams {
    pub omega0: f64,
    pub sigma: f64,
    pub delay: f64,
    pub amplitude: f64,
    pub zeta: f64,
    pub sigma_m: f64,
    pub center: f64,
    pub duration: f64,
    /// Apply the dressed-state corrections `g_x`, `g_z`.
    pub corrected: bool,
}

impl Default for ModSatdParams {
    fn default() -> Self {
        let sigma_m = 2.0;
        Self {
            omega0: 2.0 * PI,
            sigma: sigma_m,
            delay: 1.2 * sigma_m,
            amplitude: 1.0 / 40.0,
            zeta: 0.9 / sigma_m,
            sigma_m,
            center: 7.0,
            duration: 14.0,
            corrected: true,
        }
    }
}

/// Intermediate quantities of the construction at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModSatdTerms {
    pub theta: f64,
    pub theta_dot: f64,
    pub omega: f64,
    pub g: f64,
    pub mu: f64,
    pub g_x: f64,
    pub g_z: f64,
}

/// Evaluates the construction at `t` measured from the pulse centre.
pub fn modsatd_terms(p: &ModSatdParams, t: f64) -> ModSatdTerms {
    let s2 = p.sigma * p.sigma;
    let a = p.delay / s2;
    let theta = (a * t).exp().atan();
    let ch = (a * t).cosh();
    let th = (a * t).tanh();
    let theta_dot = a / (2.0 * ch);
    let theta_ddot = -a * a * (a * t).sinh() / (2.0 * ch * ch);
    let omega = p.omega0 * (-(t * t + p.delay * p.delay / 4.0) / (2.0 * s2)).exp() * (2.0 * ch).sqrt();
    let omega_dot = omega * (-t / s2 + 0.5 * a * th);
    let sech = 1.0 / (p.zeta * t).cosh();
    let g = p.amplitude * sech;
    let g_dot = -p.amplitude * p.zeta * sech * (p.zeta * t).tanh();
    let den = omega + g / p.sigma_m;
    let den_dot = omega_dot + g_dot / p.sigma_m;
    let q = theta_dot / den;
    let q_dot = (theta_ddot * den - theta_dot * den_dot) / (den * den);
    let mu = -q.atan();
    let g_x = -q_dot / (1.0 + q * q);
    // −Ω − θ̇ / tan μ with tan μ = −θ̇ / (Ω + g/σ_m) reduces to g/σ_m.
    let g_z = g / p.sigma_m;
    ModSatdTerms {
        theta,
        theta_dot,
        omega,
        g,
        mu,
        g_x,
        g_z,
    }
}

/// `Ω_p = −Ω' sin θ'`, `Ω_s = Ω' cos θ'` at absolute time `t`.
pub fn modsatd_pulses(p: &ModSatdParams, t: f64) -> (f64, f64) {
    let k = modsatd_terms(p, t - p.center);
    let (gx, gz) = if p.corrected { (k.g_x, k.g_z) } else { (0.0, 0.0) };
    let theta_p = k.theta - (gx / (k.omega + gz)).atan();
    let omega_p = ((k.omega + gz).powi(2) + gx * gx).sqrt();
    (-omega_p * theta_p.sin(), omega_p * theta_p.cos())
}

// ---------------------------------------------------------------------------
// SA-STIRAP

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaStirapParams {
    pub omega0: f64,
    pub tau: f64,
    pub period: f64,
}

impl Default for SaStirapParams {
    fn default() -> Self {
        Self {
            omega0: 2.0 * PI,
            tau: 0.4,
            period: 4.0,
        }
    }
}

/// `(Ω_p, Ω_s, Ω_a)` with `Ω_a = 2θ̇`, the `|1⟩↔|2⟩` correction.
pub fn sastirap_pulses(p: &SaStirapParams, t: f64) -> (f64, f64, f64) {
    let w = PI / p.period;
    let (sp, cp) = (w * (t - p.tau)).sin_cos();
    let (ss, cs) = (w * t).sin_cos();
    let op = p.omega0 * sp.powi(4);
    let os = p.omega0 * ss.powi(4);
    let op_dot = 4.0 * p.omega0 * w * sp.powi(3) * cp;
    let os_dot = 4.0 * p.omega0 * w * ss.powi(3) * cs;
    let norm = op * op + os * os;
    let theta_dot = if norm > 0.0 {
        (op_dot * os - op * os_dot) / norm
    } else {
        0.0
    };
    (op, os, 2.0 * theta_dot)
}

// ---------------------------------------------------------------------------
// Pulse sequences

#[derive(Clone, Debug)]
enum Shape {
    Stirap(StirapParams),
    Inverse(InverseAnsatz, Option<InverseCoefficients>),
    Stirep(Arc<StirepTrajectory>),
    ModSatd(ModSatdParams),
    SaStirap(SaStirapParams),
}

/// A pump/Stokes pair (plus the SA-STIRAP auxiliary field) on `[0, duration]`.
#[derive(Clone, Debug)]
pub struct PulseSequence {
    pub protocol: Protocol,
    pub duration: f64,
    shape: Shape,
}

impl PulseSequence {
    pub fn stirap(p: StirapParams) -> Result<Self> {
        if !(p.sigma > 0.0 && p.duration > 0.0) {
            return Err(Error::config("STIRAP needs sigma > 0 and a positive duration"));
        }
        Ok(Self {
            protocol: Protocol::Stirap,
            duration: p.duration,
            shape: Shape::Stirap(p),
        })
    }

    pub fn inverse_engineering(ansatz: InverseAnsatz) -> Result<Self> {
        let coeffs = match ansatz {
            InverseAnsatz::Polynomial { epsilon, delta, t_f } => {
                Some(inverse_polynomial_coefficients(epsilon, delta, t_f)?)
            }
            _ => None,
        };
        if !(ansatz.duration() > 0.0) {
            return Err(Error::config("inverse engineering needs a positive duration"));
        }
        Ok(Self {
            protocol: Protocol::InverseEngineering,
            duration: ansatz.duration(),
            shape: Shape::Inverse(ansatz, coeffs),
        })
    }

    pub fn stirep(p: StirepParams) -> Result<Self> {
        stirep_pulses(&p)
    }

    pub fn modsatd(p: ModSatdParams) -> Result<Self> {
        if !(p.sigma > 0.0 && p.sigma_m > 0.0 && p.duration > 0.0) {
            return Err(Error::config("MOD-SATD needs positive widths and duration"));
        }
        Ok(Self {
            protocol: Protocol::ModSatd,
            duration: p.duration,
            shape: Shape::ModSatd(p),
        })
    }

    pub fn sastirap(p: SaStirapParams) -> Result<Self> {
        if !(p.period > 0.0) {
            return Err(Error::config("SA-STIRAP needs a positive period"));
        }
        Ok(Self {
            protocol: Protocol::SaStirap,
            duration: p.period,
            shape: Shape::SaStirap(p),
        })
    }

    /// The benchmark preset of each protocol.
    pub fn preset(protocol: Protocol) -> Result<Self> {
        match protocol {
            Protocol::Stirap => Self::stirap(StirapParams::default()),
            Protocol::InverseEngineering => Self::inverse_engineering(InverseAnsatz::Polynomial {
                epsilon: 0.02,
                delta: PI / 10.0,
                t_f: 3.0,
            }),
            Protocol::Stirep => Self::stirep(StirepParams::default()),
            Protocol::ModSatd => Self::modsatd(ModSatdParams::default()),
            Protocol::SaStirap => Self::sastirap(SaStirapParams::default()),
        }
    }

    /// `(Ω_p, Ω_s)` at `t`.
    pub fn fields(&self, t: f64) -> (f64, f64) {
        match &self.shape {
            Shape::Stirap(p) => stirap_pulses(p.omega0, p.sigma, p.delay, t - p.center),
            Shape::Inverse(ansatz, coeffs) => {
                let (g, gd, b, bd) = match coeffs {
                    Some(c) => {
                        let (g, gd) = poly(&c.gamma, t);
                        let (b, bd) = poly(&c.beta, t);
                        (g, gd, b, bd)
                    }
                    None => inverse_auxiliary(ansatz, t).expect("closed-form ansatz"),
                };
                inverse_engineering_fields(g, gd, b, bd)
            }
            Shape::Stirep(traj) => traj.fields(t),
            Shape::ModSatd(p) => modsatd_pulses(p, t),
            Shape::SaStirap(p) => {
                let (op, os, _) = sastirap_pulses(p, t);
                (op, os)
            }
        }
    }

    /// The `|1⟩↔|2⟩` correction field, SA-STIRAP only.
    pub fn auxiliary(&self, t: f64) -> Option<f64> {
        match &self.shape {
            Shape::SaStirap(p) => Some(sastirap_pulses(p, t).2),
            _ => None,
        }
    }

    pub fn params(&self) -> BTreeMap<&'static str, f64> {
        let mut m = BTreeMap::new();
        match &self.shape {
            Shape::Stirap(p) => {
                m.extend([("omega0", p.omega0), ("sigma", p.sigma), ("delay", p.delay), ("center", p.center)]);
            }
            Shape::Inverse(a, _) => match *a {
                InverseAnsatz::Constant { epsilon, t_f } => {
                    m.extend([("ansatz", 1.0), ("epsilon", epsilon), ("t_f", t_f)]);
                }
                InverseAnsatz::Polynomial { epsilon, delta, t_f } => {
                    m.extend([("ansatz", 2.0), ("epsilon", epsilon), ("delta", delta), ("t_f", t_f)]);
                }
                InverseAnsatz::Robust { d0, d1, t_total } => {
                    m.extend([("ansatz", 3.0), ("d0", d0), ("d1", d1), ("T", t_total)]);
                }
            },
            Shape::Stirep(t) => {
                let p = t.params;
                m.extend([
                    ("lambda0", p.lambda0),
                    ("lambda1", p.lambda1),
                    ("lambda2", p.lambda2),
                    ("phi0", p.phi0),
                    ("eta_final", p.eta_final),
                    ("clock_rate", p.clock_rate),
                ]);
            }
            Shape::ModSatd(p) => {
                m.extend([
                    ("omega0", p.omega0),
                    ("sigma", p.sigma),
                    ("delay", p.delay),
                    ("A", p.amplitude),
                    ("zeta", p.zeta),
                    ("sigma_m", p.sigma_m),
                    ("center", p.center),
                ]);
            }
            Shape::SaStirap(p) => {
                m.extend([("omega0", p.omega0), ("tau", p.tau), ("T", p.period)]);
            }
        }
        m.insert("duration", self.duration);
        m
    }

    /// Largest `|Ω_p|`, `|Ω_s|` on a uniform scan of the domain.
    pub fn peak_field(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let t = self.duration * i as f64 / (samples - 1) as f64;
                let (p, s) = self.fields(t);
                p.abs().max(s.abs())
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, omega_p, omega_s[, omega_a]`.
    pub fn export_csv(&self, path: &Path, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::config("export step must be positive"));
        }
        let steps = (self.duration / dt).round() as usize;
        let aux = self.auxiliary(0.0).is_some();
        let header: &[&str] = if aux {
            &["t", "omega_p", "omega_s", "omega_a"]
        } else {
            &["t", "omega_p", "omega_s"]
        };
        let rows = (0..=steps).map(|i| {
            let t = (i as f64 * dt).min(self.duration);
            let (p, s) = self.fields(t);
            let mut row = vec![t, p, s];
            if let Some(a) = self.auxiliary(t) {
                row.push(a);
            }
            row
        });
        write_csv(path, header, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stirap_ordering_and_angle() {
        let (p, s) = stirap_pulses(1.0, 2.0, 3.0, 0.0);
        assert!((p - s).abs() < 1e-15);
        assert!((mixing_angle(p, s) - PI / 4.0).abs() < 1e-15);
        let (p, s) = stirap_pulses(1.0, 2.0, 3.0, -60.0);
        assert!(p / s < 1e-10);
        let seq = PulseSequence::preset(Protocol::Stirap).unwrap();
        let argmax = |k: usize| {
            (0..10_000)
                .map(|i| i as f64 * seq.duration / 9999.0)
                .max_by(|a, b| {
                    let fa = seq.fields(*a);
                    let fb = seq.fields(*b);
                    let (va, vb) = if k == 0 { (fa.0, fb.0) } else { (fa.1, fb.1) };
                    va.total_cmp(&vb)
                })
                .unwrap()
        };
        assert!(argmax(1) < argmax(0));
    }

    #[test]
    fn inverse_constant_ansatz() {
        let a = InverseAnsatz::Constant { epsilon: 0.05, t_f: 10.0 };
        let (p, s) = inverse_engineering_pulses(&a, 0.0).unwrap();
        assert_eq!(p, 0.0);
        assert!((s - PI / 10.0 / 0.05f64.tan()).abs() < 1e-12);
        assert!((s - 6.279).abs() < 2e-3);
        for t in [1.0, 3.3, 7.0] {
            let (p, s) = inverse_engineering_pulses(&a, t).unwrap();
            assert!((p / s - (PI * t / 20.0).tan()).abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_boundary_conditions() {
        let (eps, delta, tf) = (0.02, PI / 10.0, 3.0);
        let c = inverse_polynomial_coefficients(eps, delta, tf).unwrap();
        let g = |t| poly(&c.gamma, t);
        let b = |t| poly(&c.beta, t);
        let checks = [
            g(0.0).0 - eps,
            g(0.0).1,
            g(tf).0 - eps,
            g(tf).1,
            g(tf / 2.0).0 - delta,
            b(0.0).0,
            b(0.0).1,
            b(tf).0 - FRAC_PI_2,
            b(tf).1,
        ];
        for v in checks {
            assert!(v.abs() < 1e-10, "{checks:?}");
        }
        assert!(inverse_polynomial_coefficients(eps, delta, 0.0).is_err());
    }

    #[test]
    fn robust_ansatz_is_singular_at_start() {
        let a = InverseAnsatz::Robust { d0: 1.8, d1: 0.1, t_total: 1.0 };
        let (g, _, _, bd) = inverse_auxiliary(&a, 0.0).unwrap();
        assert_eq!(g, 0.0);
        assert!(bd.abs() > 1.0);
        let (_, s) = inverse_engineering_pulses(&a, 1e-6).unwrap();
        assert!(s.abs() > 1e5);
    }

    #[test]
    fn modsatd_identities() {
        let p = ModSatdParams::default();
        let k = modsatd_terms(&p, 0.0);
        assert!((k.g - 0.025).abs() < 1e-15);
        // g_z = −Ω − θ̇ / tan μ
        for t in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            let k = modsatd_terms(&p, t);
            let direct = -k.omega - k.theta_dot / k.mu.tan();
            assert!((direct - k.g_z).abs() < 1e-9 * (1.0 + k.omega));
            // g_x = μ̇ against a central difference
            let h = 1e-6;
            let fd = (modsatd_terms(&p, t + h).mu - modsatd_terms(&p, t - h).mu) / (2.0 * h);
            assert!((fd - k.g_x).abs() < 1e-7);
        }
        let bare = ModSatdParams { corrected: false, ..p };
        for t in [2.0, 7.0, 9.5] {
            let (op, os) = modsatd_pulses(&bare, t);
            let k = modsatd_terms(&bare, t - bare.center);
            assert!((op + k.omega * k.theta.sin()).abs() < 1e-12);
            assert!((os - k.omega * k.theta.cos()).abs() < 1e-12);
            // which are the delayed Gaussians
            let (gp, gs) = stirap_pulses(p.omega0, p.sigma, p.delay, t - p.center);
            assert!((op + gp).abs() < 1e-12 && (os - gs).abs() < 1e-12);
        }
    }

    #[test]
    fn sastirap_fields() {
        let p = SaStirapParams::default();
        let (op, os, _) = sastirap_pulses(&p, 0.0);
        assert_eq!(os, 0.0);
        assert!((op - p.omega0 * (-PI * 0.1).sin().powi(4)).abs() < 1e-15);
        assert!(op >= 0.0);
        let seq = PulseSequence::preset(Protocol::SaStirap).unwrap();
        for i in 0..=100_000 {
            let t = 4.0 * i as f64 / 100_000.0;
            let a = seq.auxiliary(t).unwrap();
            assert!(a.is_finite());
            let (op, os) = seq.fields(t);
            if (op - os).abs() < 1e-3 * op.max(os) && op > 1e-3 {
                assert!((mixing_angle(op, os) - PI / 4.0).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn stirep_reduces_without_multipliers() {
        let zero = StirepParams {
            lambda0: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            phi0: 0.3,
            eta_final: 2.0,
            steps: 4000,
            ..Default::default()
        };
        let traj = solve_stirep_trajectory(&zero).unwrap();
        assert_eq!(traj.phi_dot[0], 0.0);
        // Second integrator: explicit midpoint at a much finer step.
        let n = 400_000;
        let h = 2.0 / n as f64;
        let (mut phi, mut dphi) = (0.3f64, 0.0f64);
        let acc = |phi: f64, dphi: f64| -(2.0 * dphi * dphi + phi.cos().powi(2)) * phi.tan();
        for _ in 0..n {
            let (pm, dm) = (phi + 0.5 * h * dphi, dphi + 0.5 * h * acc(phi, dphi));
            phi += h * dm;
            dphi += h * acc(pm, dm);
        }
        assert!((traj.phi.last().unwrap() - phi).abs() < 1e-8);
        assert!((traj.phi_dot.last().unwrap() - dphi).abs() < 1e-8);
    }

    #[test]
    fn stirep_interpolation_is_smooth() {
        let traj = solve_stirep_trajectory(&StirepParams::default()).unwrap();
        let h = traj.eta[1] - traj.eta[0];
        for i in [10, 5000, 15000] {
            let (phi, dphi) = traj.at(traj.eta[i]);
            assert!((phi - traj.phi[i]).abs() < 1e-14 && (dphi - traj.phi_dot[i]).abs() < 1e-12);
            let (pm, _) = traj.at(traj.eta[i] + 0.5 * h);
            assert!((pm - 0.5 * (traj.phi[i] + traj.phi[i + 1])).abs() < 1e-6);
        }
    }

    #[test]
    fn benchmark_presets_respect_cap() {
        for protocol in [Protocol::Stirap, Protocol::Stirep, Protocol::ModSatd] {
            let seq = PulseSequence::preset(protocol).unwrap();
            let peak = seq.peak_field(10_000);
            assert!(peak <= FIELD_CAP + 1e-9, "{protocol:?} peak {peak}");
        }
        // The reference polynomial ansatz slightly exceeds the cap.
        let ie = PulseSequence::preset(Protocol::InverseEngineering).unwrap();
        let peak = ie.peak_field(10_000);
        assert!(peak > FIELD_CAP && peak < 1.03 * FIELD_CAP, "{peak}");
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sa.csv");
        PulseSequence::preset(Protocol::SaStirap)
            .unwrap()
            .export_csv(&path, 0.01)
            .unwrap();
        let (h, rows) = crate::io::read_csv(&path).unwrap();
        assert_eq!(h, vec!["t", "omega_p", "omega_s", "omega_a"]);
        assert_eq!(rows.len(), 401);
    }
}
