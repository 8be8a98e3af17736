use nmotto::noise::{evolve_phase, PhaseSolution};
use nmotto::spectral::{BathSpec, SpectralParams};
use nmotto::validate::ode_steady_occupation;

fn bath(g0: f64, l: f64) -> BathSpec {
    BathSpec::new(20.0, SpectralParams::lorentzian(g0, l, 15.0).unwrap()).unwrap()
}

#[test]
fn analytic_steady_occupation_forgets_initial_state() {
    for (g0, l, w0) in [(1.0, 0.2, 16.0), (1.0, 0.2, 14.0), (5.0, 1.0, 16.0), (10.0, 0.2, 12.0)] {
        let b = bath(g0, l);
        let cold = evolve_phase(w0, &b, 0.0).unwrap();
        let warm = evolve_phase(w0, &b, 5.0).unwrap();
        assert!(cold.converged_at.is_some() && warm.converged_at.is_some());
        let diff = (cold.n_inf - warm.n_inf).abs();
        assert!(diff <= 1e-6, "g0={g0} w0={w0}: {} vs {}", cold.n_inf, warm.n_inf);
        let i_inf = PhaseSolution::new(w0, &b).unwrap().i_inf;
        assert!((cold.n_inf - i_inf).abs() <= 1e-6, "{} vs {i_inf}", cold.n_inf);
    }
}

#[test]
fn moment_equations_relax_to_the_same_state() {
    for w0 in [16.0, 14.0] {
        let b = bath(1.0, 0.2);
        let a = ode_steady_occupation(w0, &b, 0.0).unwrap();
        let c = ode_steady_occupation(w0, &b, 5.0).unwrap();
        assert!((a - c).abs() <= 1e-6, "w0={w0}: {a} vs {c}");
        let i_inf = PhaseSolution::new(w0, &b).unwrap().i_inf;
        assert!((a - i_inf).abs() <= 1e-6, "w0={w0}: {a} vs {i_inf}");
    }
}
