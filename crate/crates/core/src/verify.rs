//! The programmatic invariant suite behind `geomgate verify`.
//!
//! Each check is a named pass/fail with a one-line detail string; the CLI
//! prints the table and exits nonzero if anything fails. The heavy
//! paper-reproduction runs live in the acceptance test suite, not here;
//! this battery covers the structural contracts and finishes in well under
//! a minute.

use serde::Serialize;
use std::f64::consts::PI;

use crate::dynamics::{
    gate_consistency, lindblad_evolve, lindblad_evolve_periodic, magnus_first_order,
    propagate_unitary, rotating_frame, toy_bath_factorization, HamiltonianSchedule, LindbladSpec,
    NoiseSource, PropagationGrid,
};
use crate::error::Result;
use crate::experiments::{fid_protected_schedule, params, run_gate_fidelity, GateExpConfig};
use crate::gate::{
    bare_hamiltonian, decoupling_integral, dynamical_phase_residual, geometric_phase,
    synthesize_path, synthesize_two_qubit_path, BathCoupling, DressingSpec, LoopPath,
};
use crate::linalg::{sigma_z, Operator, StateVector};
use crate::noise::{ou_trajectory_with, substream, OuParams};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn sample_paths() -> Result<Vec<LoopPath>> {
    Ok(vec![
        synthesize_path([1.0, 0.0, 0.0], PI / 4.0, params::RABI, 0.0125)?,
        synthesize_path([0.0, 0.0, 1.0], PI / 2.0, params::RABI, 0.0125)?,
        synthesize_path(
            [0.6, 0.48, 0.64],
            -1.1,
            1.5 * PI,
            0.01,
        )?,
    ])
}

/// Run the full battery; `verbose` currently unused hook for future knobs.
pub fn run_all() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    // V(m tau) = I within 1e-12 for m = 1..10
    {
        let mut worst: f64 = 0.0;
        for n in 1..=2u32 {
            let d = DressingSpec::one_qubit(n, 0.0125)?;
            let id = Operator::identity(2)?;
            for m in 1..=10 {
                let v = d.evaluate(m as f64 * d.tau);
                worst = worst.max((&v - &id).frobenius_norm());
            }
        }
        out.push(check(
            "dressing_periodicity",
            worst < 1e-12,
            format!("max ||V(m tau) - I|| = {worst:.3e} (tol 1e-12)"),
        ));
    }

    // decoupling integral for sz vanishes, n = 1..4
    {
        let mut worst: f64 = 0.0;
        for n in 1..=4 {
            let d = DressingSpec::one_qubit(n, 0.0125)?;
            let avg = decoupling_integral(&d, &BathCoupling::classical_dephasing())?;
            worst = worst.max(avg.frobenius_norm());
        }
        let d2 = DressingSpec::electron_of_pair(1, 0.0125)?;
        let avg2 = decoupling_integral(&d2, &BathCoupling::classical_dephasing_electron())?;
        worst = worst.max(avg2.frobenius_norm());
        out.push(check(
            "decoupling_integral",
            worst < 1e-10,
            format!("max ||avg V^dag sz V|| = {worst:.3e} (tol 1e-10)"),
        ));
    }

    // dynamical phase residual on sample paths
    {
        let mut worst: f64 = 0.0;
        for path in sample_paths()? {
            let total = path.total_time();
            let times: Vec<f64> = (0..200).map(|k| total * (k as f64 + 0.5) / 200.0).collect();
            worst = worst.max(dynamical_phase_residual(&path, &times)?);
        }
        out.push(check(
            "dynamical_phase_residual",
            worst < 1e-12,
            format!("max |<nu|H|nu>| = {worst:.3e} rad/us (tol 1e-12)"),
        ));
    }

    // noise-free consistency: propagated bare and dressed gates vs closed form
    {
        let mut worst: f64 = 0.0;
        for path in sample_paths()? {
            let dressing = DressingSpec::one_qubit(1, path.tau())?;
            let c = gate_consistency(
                &path,
                &dressing,
                PropagationGrid::new(path.total_time() / 2000.0)?,
                PropagationGrid::per_period(path.tau(), 30_000)?,
            )?;
            worst = worst.max(c.bare_distance).max(c.dressed_distance);
        }
        out.push(check(
            "noise_free_consistency",
            worst < 1e-6,
            format!("max gate distance = {worst:.3e} (tol 1e-6)"),
        ));
    }

    // geometric phase closed form is consistent with the propagated bare gate
    // eigenphases (already covered by the consistency check), so here just
    // confirm the synthesized phase hits the request
    {
        let mut worst: f64 = 0.0;
        for (axis, angle) in [
            ([1.0, 0.0, 0.0], PI / 4.0),
            ([0.0, 1.0, 0.0], -2.0),
            ([0.0, 0.0, -1.0], 0.4),
        ] {
            let path = synthesize_path(axis, angle, params::RABI, 0.01)?;
            let g = geometric_phase(&path).gamma;
            let target = if axis[2] < 0.0 { -angle } else { angle };
            worst = worst.max((g - target).abs());
        }
        out.push(check(
            "synthesis_phase",
            worst < 1e-9,
            format!("max |gamma - target| = {worst:.3e} rad (tol 1e-9)"),
        ));
    }

    // Lindblad: Gamma = 0 equals unitary conjugation
    {
        let path = synthesize_path([1.0, 0.0, 0.0], PI / 4.0, params::RABI, 0.0125)?;
        let schedule = HamiltonianSchedule::bare(&path);
        let grid = PropagationGrid::new(path.total_time() / 4000.0)?;
        let rho0 = StateVector::plus().projector();
        let rhos = lindblad_evolve(
            &schedule,
            &LindbladSpec::none(),
            grid,
            &rho0,
            &[path.total_time()],
        )?;
        let u = propagate_unitary(&schedule, grid)?;
        let expect = Operator::from_matrix(
            u.matrix() * rho0.matrix() * u.dagger().matrix(),
        )?;
        let d = (&rhos[0] - &expect).frobenius_norm();
        out.push(check(
            "lindblad_unitary_limit",
            d < 1e-9,
            format!("||rho - U rho0 U^dag|| = {d:.3e} (tol 1e-9)"),
        ));
    }

    // Lindblad trace preservation over 1 ms with the periodic fast path
    {
        let tau = params::TAU_FID;
        let n_periods = 100_000;
        let schedule = fid_protected_schedule(params::DELTA, tau, n_periods as f64 * tau)
            .add_dephasing(sigma_z(), NoiseSource::Constant(params::SIGMA_QS))?;
        let lind = LindbladSpec::spin_relaxation(params::GAMMA)?;
        let rho0 = StateVector::plus().projector();
        let rhos = lindblad_evolve_periodic(&schedule, &lind, 2000, n_periods, 1000, &rho0)?;
        let drift = rhos
            .iter()
            .map(|r| (r.trace().re - 1.0).abs().max(r.trace().im.abs()))
            .fold(0.0f64, f64::max);
        out.push(check(
            "lindblad_trace_1ms",
            drift < 1e-9,
            format!("max |tr rho - 1| = {drift:.3e} over 1 ms (tol 1e-9)"),
        ));
    }

    // rotating frame cancels the dressing
    {
        let path = synthesize_path([1.0, 0.0, 0.0], PI / 4.0, params::RABI, 0.0125)?;
        let dressing = DressingSpec::one_qubit(1, path.tau())?;
        let lab = HamiltonianSchedule::dressed(&path, &dressing);
        let rot = rotating_frame(&lab, &dressing)?;
        let bare = HamiltonianSchedule::bare(&path);
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let t = path.total_time() * (k as f64 + 0.5) / 50.0;
            worst = worst.max((&rot.at(t) - &bare.at(t)).frobenius_norm());
        }
        out.push(check(
            "rotating_frame_cancellation",
            worst < 1e-9,
            format!("max ||H_r - H_S|| = {worst:.3e} rad/us (tol 1e-9)"),
        ));
    }

    // Magnus: the period average of H_j + delta0 V^dag sz V is H_j
    {
        let path = synthesize_path([1.0, 0.0, 0.0], PI / 4.0, params::RABI, 0.0125)?;
        let dressing = DressingSpec::one_qubit(1, path.tau())?;
        let lab = HamiltonianSchedule::dressed(&path, &dressing)
            .add_dephasing(sigma_z(), NoiseSource::Constant(params::SIGMA_QS))?;
        let rot = rotating_frame(&lab, &dressing)?;
        let report = magnus_first_order(
            &rot,
            0.0,
            path.tau(),
            PropagationGrid::per_period(path.tau(), 8000)?,
        )?;
        let h_j = bare_hamiltonian(&path, 0.5 * path.tau())?;
        let d = (&report.h_bar - &h_j).frobenius_norm();
        out.push(check(
            "magnus_average",
            d < 1e-6,
            format!("||H_bar - H_j|| = {d:.3e} rad/us (tol 1e-6)"),
        ));
    }

    // toy bath: protection preserves purity
    {
        let path = synthesize_path([1.0, 0.0, 0.0], PI / 4.0, params::RABI, 0.005)?;
        let dressing = DressingSpec::one_qubit(1, path.tau())?;
        let grid = PropagationGrid::per_period(path.tau(), 400)?;
        let prot = toy_bath_factorization(&path, Some(&dressing), 0.4, 0.1, grid)?;
        let bare = toy_bath_factorization(&path, None, 0.4, 0.1, grid)?;
        out.push(check(
            "toy_bath_protection",
            prot.purity > 0.999 && prot.purity > bare.purity,
            format!(
                "protected purity {:.6}, bare purity {:.6}",
                prot.purity, bare.purity
            ),
        ));
    }

    // two-qubit block structure
    {
        let path = synthesize_two_qubit_path([0.0, 0.0, 1.0], PI / 2.0, params::RABI, 0.0125)?;
        let dressing = DressingSpec::electron_of_pair(1, path.tau())?;
        let report = crate::experiments::run_two_qubit_check(&path, &dressing, 30_000, 0.4, 0.1)?;
        out.push(check(
            "two_qubit_blocks",
            report.check(1e-6).is_ok() && report.protected_purity > report.bare_purity,
            format!(
                "distance {:.3e}, purity protected {:.6} vs bare {:.6}",
                report.total_distance, report.protected_purity, report.bare_purity
            ),
        ));
    }

    // OU ensemble statistics (quick)
    {
        let p = OuParams::new(0.0, params::SIGMA_OU, params::TAU_E, 0.005, 0)?;
        let mut second = 0.0;
        let mut count = 0usize;
        for k in 0..500u64 {
            let mut rng = substream(17, k);
            let traj = ou_trajectory_with(&p, 1.0, &mut rng)?;
            second += traj.values().iter().map(|x| x * x).sum::<f64>();
            count += traj.values().len();
        }
        let var = second / count as f64;
        let expect = params::SIGMA_OU * params::SIGMA_OU;
        let rel = (var - expect).abs() / expect;
        out.push(check(
            "ou_stationary_variance",
            rel < 0.10,
            format!("variance {var:.4} vs sigma^2 = {expect:.4} ({:.1}% off)", 100.0 * rel),
        ));
    }

    // determinism: identical runs, and worker-count independence
    {
        let mut cfg = GateExpConfig::quasi_static_default();
        cfg.samples = 64;
        cfg.output_points = 20;
        cfg.steps_per_period = 40;
        let a = run_gate_fidelity(&cfg)?;
        let b = run_gate_fidelity(&cfg)?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(
            |e| crate::error::Error::InvalidConfig(format!("thread pool: {e}")),
        )?;
        let c = pool.install(|| run_gate_fidelity(&cfg))?;
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        let mut csv_c = Vec::new();
        a.write_csv(&mut csv_a)?;
        b.write_csv(&mut csv_b)?;
        c.write_csv(&mut csv_c)?;
        out.push(check(
            "determinism",
            csv_a == csv_b && csv_a == csv_c,
            "identical seeds give byte-identical curves across worker counts".to_string(),
        ));
    }

    Ok(out)
}
