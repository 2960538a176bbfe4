//! Qubit steady states: the uncontrolled fixed point, the best constant
//! control for the maximally mixed target, and a long RK4 run that lands on it.
//!
//!     cargo run --release --example steady_state

use qcpinn::systems::tls::{tls_optimal_constant_control, tls_steady_state, TlsParams};
use qcpinn::systems::{DensityMatrix, SystemSpec};
use qcpinn::validator::{rk4_integrate, ControlFunction};

fn main() -> qcpinn::Result<()> {
    let p = TlsParams::default();
    let free = tls_steady_state(&p, 0.0)?;
    println!("xi = 0      steady state {:.4}", free);

    let target = DensityMatrix::maximally_mixed(2);
    let best = tls_optimal_constant_control(&p, &target)?;
    println!("xi* = {:.4}  F* = {:.5}", best.xi_star, best.fidelity_star);
    println!("xi = xi*    steady state {:.4}", tls_steady_state(&p, best.xi_star)?);

    let system = SystemSpec::tls(p, &DensityMatrix::basis(2, 0))?;
    let traj = rk4_integrate(&system, &ControlFunction::Zero(1), &system.x0.to_vec(), (0.0, 200.0), 1e-3)?;
    let end = traj.final_state();
    println!("RK4 to t = 200 with xi = 0: {:.4?}", end);
    Ok(())
}
