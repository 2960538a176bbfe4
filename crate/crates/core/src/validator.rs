//! Independent verification of controls on the true dynamics.
//!
//! Every control, learned or analytic, is replayed through a fixed-step RK4
//! integration of the direct right-hand side, and the figures of merit are
//! computed from that trajectory rather than from the network's own state
//! outputs.

use std::path::Path;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::baselines::PulseSequence;
use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::neural::{wrap_point, ConstraintMode, NetworkParams};
use crate::systems::density::{coherence, fidelity, hermitian_eigenvalues, unpack_density, CMatrix};
use crate::systems::lambda::{lambda3_auxiliary_rhs, LambdaParams};
use crate::systems::nqubit::{ground_state_fidelity, problem_expectation};
use crate::systems::tls::tls_hamiltonian;
use crate::systems::{SystemKind, SystemSpec, TlsParams};

/// Default step for density-matrix systems.
pub const DEFAULT_DT: f64 = 1e-3;
/// Default step for N-qubit systems.
pub const DEFAULT_DT_NQUBIT: f64 = 2e-3;

pub fn default_dt(kind: &SystemKind) -> f64 {
    match kind {
        SystemKind::Nqubit(_) => DEFAULT_DT_NQUBIT,
        _ => DEFAULT_DT,
    }
}

/// A control evaluable at any time in its domain.
#[derive(Clone, Debug)]
pub enum ControlFunction {
    /// The trained network with the same wrap used during training.
    Network {
        params: NetworkParams,
        x0: Array1<f64>,
        u0: Array1<f64>,
        mode: ConstraintMode,
    },
    /// `(Ω_p, Ω_s)` from an analytic protocol.
    Baseline(PulseSequence),
    Constant(Vec<f64>),
    Zero(usize),
}

impl ControlFunction {
    pub fn network(params: NetworkParams, system: &SystemSpec, mode: ConstraintMode) -> Result<Self> {
        if params.output_width() != system.n() + system.m() {
            return Err(Error::config(format!(
                "network width {} does not match system {}",
                params.output_width(),
                system.name
            )));
        }
        Ok(ControlFunction::Network {
            params,
            x0: system.x0.clone(),
            u0: system.u0.clone(),
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlFunction::Network { u0, .. } => u0.len(),
            ControlFunction::Baseline(_) => 2,
            ControlFunction::Constant(v) => v.len(),
            ControlFunction::Zero(m) => *m,
        }
    }

    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        match self {
            ControlFunction::Network { params, x0, u0, mode } => {
                Ok(wrap_point(*mode, x0.view(), u0.view(), params, t)?.u.to_vec())
            }
            ControlFunction::Baseline(seq) => {
                let (p, s) = seq.fields(t);
                Ok(vec![p, s])
            }
            ControlFunction::Constant(v) => Ok(v.clone()),
            ControlFunction::Zero(m) => Ok(vec![0.0; *m]),
        }
    }

    /// Time derivative: exact for the network, central difference with step
    /// `h` for sampled baselines.
    pub fn derivative(&self, t: f64, h: f64) -> Result<Vec<f64>> {
        match self {
            ControlFunction::Network { params, x0, u0, mode } => {
                Ok(wrap_point(*mode, x0.view(), u0.view(), params, t)?.u_dot.to_vec())
            }
            ControlFunction::Baseline(_) => {
                let a = self.value(t + h)?;
                let b = self.value((t - h).max(0.0))?;
                let span = t + h - (t - h).max(0.0);
                Ok(a.iter().zip(&b).map(|(a, b)| (a - b) / span).collect())
            }
            ControlFunction::Constant(v) => Ok(vec![0.0; v.len()]),
            ControlFunction::Zero(m) => Ok(vec![0.0; *m]),
        }
    }
}

/// Classical RK4 on `y' = f(t, y)`, `steps` steps of size `h` from `t0`.
/// Returns the time grid and the state at every grid point.
pub fn rk4_fixed<F>(mut f: F, y0: &[f64], t0: f64, h: f64, steps: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y0.len();
    let mut times = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    let mut y = y0.to_vec();
    times.push(t0);
    ys.push(y.clone());
    let mut tmp = vec![0.0; n];
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &y)?;
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        let k2 = f(t + 0.5 * h, &tmp)?;
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        let k3 = f(t + 0.5 * h, &tmp)?;
        for j in 0..n {
            tmp[j] = y[j] + h * k3[j];
        }
        let k4 = f(t + h, &tmp)?;
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let t_next = t0 + (i + 1) as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                time: t_next,
                what: "non-finite state".into(),
            });
        }
        times.push(t_next);
        ys.push(y.clone());
    }
    Ok((times, ys))
}

/// Dense RK4 output with the control sampled at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
}

impl SimTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[k]).collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }
}

fn step_count(t_span: (f64, f64), dt: f64) -> Result<(usize, f64)> {
    let (t0, t1) = t_span;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    if !(t1 > t0 && t0.is_finite() && t1.is_finite()) {
        return Err(Error::config(format!("empty time span [{t0}, {t1}]")));
    }
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    Ok((steps, (t1 - t0) / steps as f64))
}

/// RK4 on `ẋ = F(x, u(t))`, with the control evaluated at `t`, `t + dt/2`
/// and `t + dt` of every step. The step is adjusted so the grid ends at `t1`.
pub fn rk4_controlled<R>(
    rhs: R,
    control: &ControlFunction,
    x0: &[f64],
    t_span: (f64, f64),
    dt: f64,
) -> Result<SimTrajectory>
where
    R: Fn(&[f64], &[f64]) -> Result<Array1<f64>>,
{
    let (steps, h) = step_count(t_span, dt)?;
    let t0 = t_span.0;
    // Sample u on the half-step lattice once; each stage reuses it.
    let mut lattice = Vec::with_capacity(2 * steps + 1);
    for i in 0..=2 * steps {
        lattice.push(control.value(t0 + 0.5 * h * i as f64)?);
    }
    let f = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let idx = ((t - t0) / (0.5 * h)).round() as usize;
        Ok(rhs(x, &lattice[idx.min(2 * steps)])?.to_vec())
    };
    let (times, states) = rk4_fixed(f, x0, t0, h, steps)?;
    let controls = (0..=steps).map(|i| lattice[2 * i].clone()).collect();
    Ok(SimTrajectory { times, states, controls })
}

/// Integrates a system's true dynamics under `control`.
pub fn rk4_integrate(
    system: &SystemSpec,
    control: &ControlFunction,
    x0: &[f64],
    t_span: (f64, f64),
    dt: f64,
) -> Result<SimTrajectory> {
    if control.dim() != system.m() {
        return Err(Error::config(format!(
            "control has {} components, system {} needs {}",
            control.dim(),
            system.name,
            system.m()
        )));
    }
    if x0.len() != system.n() {
        return Err(Error::config("initial state has the wrong dimension"));
    }
    rk4_controlled(|x, u| system.rhs(x, u), control, x0, t_span, dt)
}

/// SA-STIRAP replay: the Λ system with the auxiliary `|1⟩↔|2⟩` field.
pub fn integrate_with_auxiliary(
    params: &LambdaParams,
    seq: &PulseSequence,
    x0: &[f64],
    dt: f64,
) -> Result<SimTrajectory> {
    if seq.auxiliary(0.0).is_none() {
        return Err(Error::config("pulse sequence has no auxiliary field"));
    }
    let (steps, h) = step_count((0.0, seq.duration), dt)?;
    let f = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let (p, s) = seq.fields(t);
        let a = seq.auxiliary(t).unwrap_or(0.0);
        Ok(lambda3_auxiliary_rhs(x, p, s, a, params)?.to_vec())
    };
    let (times, states) = rk4_fixed(f, x0, 0.0, h, steps)?;
    let controls = times
        .iter()
        .map(|&t| {
            let (p, s) = seq.fields(t);
            vec![p, s, seq.auxiliary(t).unwrap_or(0.0)]
        })
        .collect();
    Ok(SimTrajectory { times, states, controls })
}

/// `𝒜 = ∫₀^{t_f} √(Ω_p² + Ω_s²) dt` by composite Simpson with step ≤ `dt`.
pub fn pulse_area(control: &ControlFunction, t_f: f64, dt: f64) -> Result<f64> {
    if !(t_f > 0.0) {
        return Ok(0.0);
    }
    if !(dt > 0.0) {
        return Err(Error::config("quadrature step must be positive"));
    }
    let mut n = (t_f / dt).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let n = n.max(2);
    let h = t_f / n as f64;
    let g = |t: f64| -> Result<f64> {
        let u = control.value(t)?;
        Ok(u.iter().take(2).map(|v| v * v).sum::<f64>().sqrt())
    };
    let mut acc = g(0.0)? + g(t_f)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(i as f64 * h)?;
    }
    Ok(acc * h / 3.0)
}

/// Earliest time at which `values` attains its maximum.
pub fn transfer_time(times: &[f64], values: &[f64]) -> f64 {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    times[best]
}

pub fn density_series(traj: &SimTrajectory, system: &SystemSpec) -> Result<Vec<CMatrix>> {
    let packing = system
        .kind
        .packing()
        .ok_or_else(|| Error::config("system has no density-matrix packing"))?;
    traj.states.iter().map(|x| unpack_density(x, packing)).collect()
}

pub fn fidelity_series(traj: &SimTrajectory, system: &SystemSpec, target: &CMatrix) -> Result<Vec<f64>> {
    density_series(traj, system)?
        .iter()
        .map(|rho| fidelity(rho, target))
        .collect()
}

pub fn coherence_series(traj: &SimTrajectory, system: &SystemSpec) -> Result<Vec<f64>> {
    density_series(traj, system)?.iter().map(coherence).collect()
}

/// Cumulative trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..values.len() {
        acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        out.push(acc);
    }
    out
}

/// Work, heat and their ratio along a controlled qubit trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkHeat {
    pub times: Vec<f64>,
    pub work: Vec<f64>,
    pub heat: Vec<f64>,
    /// `|W/Q|`, `None` while `|Q| < 1e-12`.
    pub eta: Vec<Option<f64>>,
}

pub const HEAT_FLOOR: f64 = 1e-12;

/// `W(t) = ∫ ξ̇ ρ_ee`, `Q(t) = ∫ Tr(H ρ̇)` and `η = |W/Q|`.
pub fn work_heat(traj: &SimTrajectory, control: &ControlFunction, params: &TlsParams) -> Result<WorkHeat> {
    if traj.is_empty() {
        return Err(Error::DegenerateInput("empty trajectory".into()));
    }
    let h = if traj.len() > 1 {
        (traj.times[1] - traj.times[0]) / 10.0
    } else {
        1e-4
    };
    let mut power = Vec::with_capacity(traj.len());
    let mut heat_rate = Vec::with_capacity(traj.len());
    for ((t, x), u) in traj.times.iter().zip(&traj.states).zip(&traj.controls) {
        let xi = u[0];
        let xi_dot = control.derivative(*t, h)?[0];
        power.push(xi_dot * x[1]);
        let rho_dot = crate::systems::tls::tls_matrix(params, xi).dot(&ArrayView1::from(x.as_slice()));
        let hm = tls_hamiltonian(params, xi);
        let rd = unpack_density(rho_dot.as_slice().expect("contiguous"), crate::systems::Packing::QUBIT)?;
        heat_rate.push((&hm * &rd).trace().re);
    }
    let work = cumulative_trapezoid(&traj.times, &power);
    let heat = cumulative_trapezoid(&traj.times, &heat_rate);
    let eta = work
        .iter()
        .zip(&heat)
        .map(|(w, q)| (q.abs() >= HEAT_FLOOR).then(|| (w / q).abs()))
        .collect();
    Ok(WorkHeat {
        times: traj.times.clone(),
        work,
        heat,
        eta,
    })
}

/// `Eff = 1 − I₁/I₂`, `I₁ = ∫ max(η − 1, 0)`, `I₂ = ∫ η`, from the first
/// defined sample on.
pub fn efficiency(eta: &[Option<f64>], times: &[f64]) -> Result<f64> {
    let start = eta
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| Error::DegenerateInput("η is never defined".into()))?;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (t, e) in times[start..].iter().zip(&eta[start..]) {
        if let Some(v) = e {
            if !v.is_finite() {
                return Err(Error::DegenerateInput(format!("non-finite η at t = {t}")));
            }
            ts.push(*t);
            vs.push(*v);
        }
    }
    let excess: Vec<f64> = vs.iter().map(|v| (v - 1.0).max(0.0)).collect();
    let i1 = *cumulative_trapezoid(&ts, &excess).last().unwrap();
    let i2 = *cumulative_trapezoid(&ts, &vs).last().unwrap();
    if i2 == 0.0 {
        return Err(Error::DegenerateInput("∫η = 0".into()));
    }
    Ok((1.0 - i1 / i2).clamp(0.0, 1.0))
}

/// Figures of merit of one validated run; absent fields do not apply.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub system: String,
    pub source: String,
    pub horizon: f64,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_fidelity_tail: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_expectation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eff: Option<f64>,
    pub final_state: Vec<f64>,
    pub max_population_drift: f64,
}

impl MetricsRecord {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }
}

/// Largest `|Σ populations − 1|` (density systems) or `|‖ψ‖ − 1|` (N-qubit).
pub fn norm_drift(traj: &SimTrajectory, system: &SystemSpec) -> f64 {
    let n0 = state_norm(&system.kind, &traj.states[0]);
    traj.states
        .iter()
        .map(|x| (state_norm(&system.kind, x) - n0).abs().max((state_norm(&system.kind, x) - 1.0).abs()))
        .fold(0.0, f64::max)
}

fn state_norm(kind: &SystemKind, x: &[f64]) -> f64 {
    match kind.packing() {
        Some(p) => x[..p.dim()].iter().sum(),
        None => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

/// Smallest eigenvalue seen along a density trajectory.
pub fn min_eigenvalue(traj: &SimTrajectory, system: &SystemSpec) -> Result<f64> {
    Ok(density_series(traj, system)?
        .iter()
        .flat_map(hermitian_eigenvalues)
        .fold(f64::INFINITY, f64::min))
}

/// Population of level `k` along the trajectory.
pub fn population(traj: &SimTrajectory, k: usize) -> Vec<f64> {
    traj.component(k)
}

/// Replays `control` and collects the metrics appropriate to the system.
/// `tail` is the start of the window used for `min_fidelity_tail` on qubits.
pub fn evaluate(
    system: &SystemSpec,
    control: &ControlFunction,
    horizon: (f64, f64),
    dt: f64,
    tail: Option<f64>,
) -> Result<(SimTrajectory, MetricsRecord)> {
    let x0 = system.x0.to_vec();
    let traj = rk4_integrate(system, control, &x0, horizon, dt)?;
    let mut rec = MetricsRecord {
        system: system.name.clone(),
        source: source_label(control),
        horizon: horizon.1,
        dt,
        final_state: traj.final_state().to_vec(),
        max_population_drift: norm_drift(&traj, system),
        ..Default::default()
    };
    match &system.kind {
        SystemKind::Lambda3(_) | SystemKind::Lambda4(_) => {
            let p2 = population(&traj, 1);
            let t_f = transfer_time(&traj.times, &p2);
            rec.p2 = Some(p2.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            rec.t_f = Some(t_f);
            rec.area = Some(pulse_area(control, t_f - horizon.0, dt)?);
        }
        SystemKind::Tls(p) => {
            let target = CMatrix::identity(2, 2).map(|v| v * 0.5);
            let fid = fidelity_series(&traj, system, &target)?;
            rec.final_fidelity = fid.last().copied();
            if let Some(t0) = tail {
                rec.min_fidelity_tail = traj
                    .times
                    .iter()
                    .zip(&fid)
                    .filter(|(t, _)| **t >= t0)
                    .map(|(_, f)| *f)
                    .reduce(f64::min);
            }
            let wh = work_heat(&traj, control, p)?;
            rec.eff = efficiency(&wh.eta, &wh.times).ok();
        }
        SystemKind::Nqubit(p) => {
            let xf = traj.final_state();
            rec.final_fidelity = Some(ground_state_fidelity(p, xf));
            rec.final_expectation = Some(problem_expectation(p, xf));
        }
    }
    Ok((traj, rec))
}

fn source_label(control: &ControlFunction) -> String {
    match control {
        ControlFunction::Network { .. } => "network".into(),
        ControlFunction::Baseline(seq) => seq.protocol.label().into(),
        ControlFunction::Constant(_) => "constant".into(),
        ControlFunction::Zero(_) => "zero".into(),
    }
}

/// Trajectory CSV: time, state, controls, then system-specific diagnostics.
pub fn write_trajectory_csv(path: &Path, traj: &SimTrajectory, system: &SystemSpec) -> Result<()> {
    let n = system.n();
    let m = traj.controls.first().map_or(0, Vec::len);
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..n).map(|i| format!("x{}", i + 1)));
    header.extend((0..m).map(|i| format!("u{}", i + 1)));
    let extra: Vec<Vec<f64>> = match &system.kind {
        SystemKind::Tls(_) => {
            header.extend(["coherence".into(), "fidelity".into()]);
            let target = CMatrix::identity(2, 2).map(|v| v * 0.5);
            let c = coherence_series(traj, system)?;
            let f = fidelity_series(traj, system, &target)?;
            c.into_iter().zip(f).map(|(c, f)| vec![c, f]).collect()
        }
        SystemKind::Lambda3(_) | SystemKind::Lambda4(_) => vec![Vec::new(); traj.len()],
        SystemKind::Nqubit(p) => {
            header.extend(["fidelity".into(), "expectation".into()]);
            traj.states
                .iter()
                .map(|x| vec![ground_state_fidelity(p, x), problem_expectation(p, x)])
                .collect()
        }
    };
    let rows = traj.times.iter().enumerate().map(|(i, t)| {
        let mut row = vec![*t];
        row.extend_from_slice(&traj.states[i]);
        row.extend_from_slice(&traj.controls[i]);
        row.extend_from_slice(&extra[i]);
        row
    });
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &h, rows)
}

pub fn write_energy_csv(path: &Path, wh: &WorkHeat) -> Result<()> {
    let rows = (0..wh.times.len()).map(|i| {
        vec![wh.times[i], wh.work[i], wh.heat[i], wh.eta[i].unwrap_or(f64::NAN)]
    });
    write_csv(path, &["t", "work", "heat", "eta"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{InverseAnsatz, Protocol};
    use crate::systems::density::DensityMatrix;
    use crate::systems::lambda::LambdaParams;
    use crate::systems::tls::tls_steady_state;
    use crate::systems::NQubitParams;

    fn tls_system() -> SystemSpec {
        SystemSpec::tls(TlsParams::default(), &DensityMatrix::basis(2, 0)).unwrap()
    }

    #[test]
    fn exponential_decay() {
        let (ts, ys) = rk4_fixed(|_, y| Ok(vec![-y[0]]), &[1.0], 0.0, 0.01, 100).unwrap();
        assert!((ts[100] - 1.0).abs() < 1e-12);
        assert!((ys[100][0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_convergence() {
        let f = |t: f64, y: &[f64]| Ok(vec![y[1], -y[0] * (1.0 + 0.3 * t.sin())]);
        let run = |h: f64| rk4_fixed(f, &[1.0, 0.0], 0.0, h, (2.0 / h).round() as usize).unwrap().1;
        let reference = run(0.1 / 4.0);
        let e1 = (run(0.1).last().unwrap()[0] - reference.last().unwrap()[0]).abs();
        let e2 = (run(0.05).last().unwrap()[0] - reference.last().unwrap()[0]).abs();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let err = rk4_fixed(|_, y| Ok(vec![y[0] * y[0]]), &[1.0], 0.0, 0.1, 100).unwrap_err();
        match err {
            Error::Integration { time, .. } => assert!(time > 0.5 && time < 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tls_relaxes_to_steady_state() {
        let sys = tls_system();
        let traj = rk4_integrate(&sys, &ControlFunction::Zero(1), &sys.x0.to_vec(), (0.0, 200.0), 1e-2).unwrap();
        let ss = tls_steady_state(&TlsParams::default(), 0.0).unwrap();
        for (a, b) in traj.final_state().iter().zip(ss.iter()) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!(norm_drift(&traj, &sys) < 1e-8);
    }

    #[test]
    fn simpson_area() {
        let c = ControlFunction::Constant(vec![1.0, 1.0]);
        assert!((pulse_area(&c, 2.0, 1e-3).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let ramp = ControlFunction::Baseline(
            PulseSequence::inverse_engineering(InverseAnsatz::Constant { epsilon: 0.05, t_f: 10.0 }).unwrap(),
        );
        // γ̇ = 0 leaves |Ω| = (π/t_f) cot ε constant.
        let a = pulse_area(&ramp, 10.0, 1e-2).unwrap();
        let want = std::f64::consts::PI / 0.05f64.tan();
        assert!((a - want).abs() < 1e-9, "{a} vs {want}");
    }

    #[test]
    fn transfer_time_argmax() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(transfer_time(&t, &[0.1, 0.2, 0.3, 0.4]), 3.0);
        assert_eq!(transfer_time(&t, &[0.1, 0.9, 0.9, 0.2]), 1.0);
        let tt = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(transfer_time(&tt, &[0.1, 0.9, 0.9, 0.2, 0.1, 0.05]), 1.0);
    }

    #[test]
    fn efficiency_arithmetic() {
        let t: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let two = vec![Some(2.0); 101];
        assert!((efficiency(&two, &t).unwrap() - 0.5).abs() < 1e-12);
        let below = vec![Some(0.7); 101];
        assert_eq!(efficiency(&below, &t).unwrap(), 1.0);
        let zeros = vec![Some(0.0); 101];
        assert!(matches!(efficiency(&zeros, &t), Err(Error::DegenerateInput(_))));
        let mut gap = vec![None; 10];
        gap.extend(vec![Some(2.0); 91]);
        assert!((efficiency(&gap, &t).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_control_does_no_work() {
        let sys = tls_system();
        let c = ControlFunction::Constant(vec![-4.0]);
        let traj = rk4_integrate(&sys, &c, &sys.x0.to_vec(), (0.0, 5.0), 1e-3).unwrap();
        let wh = work_heat(&traj, &c, &TlsParams::default()).unwrap();
        assert!(wh.work.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn closed_system_heat_is_energy_change() {
        let p = TlsParams {
            gamma_abs: 0.0,
            gamma_em: 0.0,
            ..TlsParams::default()
        };
        let sys = SystemSpec::tls(p, &DensityMatrix::basis(2, 0)).unwrap();
        let c = ControlFunction::Constant(vec![1.5]);
        let traj = rk4_integrate(&sys, &c, &sys.x0.to_vec(), (0.0, 3.0), 1e-3).unwrap();
        let wh = work_heat(&traj, &c, &p).unwrap();
        let h = tls_hamiltonian(&p, 1.5);
        let energy = |x: &[f64]| {
            let rho = unpack_density(x, crate::systems::Packing::QUBIT).unwrap();
            (&h * &rho).trace().re
        };
        let de = energy(traj.final_state()) - energy(&traj.states[0]);
        assert!((wh.heat.last().unwrap() - de).abs() < 1e-6);
    }

    #[test]
    fn inverse_engineering_benchmark() {
        let sys = SystemSpec::lambda3(LambdaParams::default(), &DensityMatrix::basis(3, 0)).unwrap();
        let seq = PulseSequence::preset(Protocol::InverseEngineering).unwrap();
        let c = ControlFunction::Baseline(seq);
        let (_, rec) = evaluate(&sys, &c, (0.0, 3.0), 1e-3, None).unwrap();
        assert!((rec.p2.unwrap() - 0.97).abs() < 0.02, "{rec:?}");
        assert!((rec.area.unwrap() - 19.8).abs() < 1.0);
        assert!((rec.t_f.unwrap() - 3.0).abs() < 0.1);
        assert!(rec.max_population_drift < 1e-8);
    }

    #[test]
    fn sastirap_replay_conserves_trace() {
        let p = LambdaParams::default();
        let seq = PulseSequence::preset(Protocol::SaStirap).unwrap();
        let x0 = DensityMatrix::basis(3, 0).pack(crate::systems::Packing(3)).unwrap();
        let traj = integrate_with_auxiliary(&p, &seq, x0.as_slice().unwrap(), 1e-3).unwrap();
        let p2 = population(&traj, 1);
        assert!(p2.iter().copied().fold(0.0, f64::max) > 0.95);
        for x in &traj.states {
            assert!((x[0] + x[1] + x[2] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn nqubit_norm_is_conserved() {
        let p = NQubitParams::ising(3);
        let sys = SystemSpec::nqubit(p, true).unwrap();
        let c = ControlFunction::Constant(vec![0.6, 0.4]);
        let traj = rk4_integrate(&sys, &c, &sys.x0.to_vec(), (0.0, 10.0), DEFAULT_DT_NQUBIT).unwrap();
        assert!(norm_drift(&traj, &sys) < 1e-8);
    }

    #[test]
    fn trajectory_csv_layout() {
        let sys = tls_system();
        let traj = rk4_integrate(&sys, &ControlFunction::Zero(1), &sys.x0.to_vec(), (0.0, 1.0), 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        write_trajectory_csv(&path, &traj, &sys).unwrap();
        let (h, rows) = crate::io::read_csv(&path).unwrap();
        assert_eq!(h, ["t", "x1", "x2", "x3", "x4", "u1", "coherence", "fidelity"]);
        assert_eq!(rows.len(), 11);

        let sys = SystemSpec::lambda3(LambdaParams::default(), &DensityMatrix::basis(3, 0)).unwrap();
        let traj = rk4_integrate(&sys, &ControlFunction::Zero(2), &sys.x0.to_vec(), (0.0, 1.0), 0.1).unwrap();
        write_trajectory_csv(&path, &traj, &sys).unwrap();
        let (h, rows) = crate::io::read_csv(&path).unwrap();
        assert_eq!(h.len(), 1 + 9 + 2);
        assert_eq!(rows[0].len(), 12);
    }
}
