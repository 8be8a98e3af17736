use nmotto::noise::PhaseSolution;
use nmotto::spectral::{markov_rate, planck_occupation, BathSpec, SpectralParams};
use nmotto::thermo::{markov_cycle, run_cycle, CycleSpec};

fn resonant_weak_phase() -> (PhaseSolution, f64, f64) {
    let b = BathSpec::new(20.0, SpectralParams::lorentzian(0.01, 0.2, 15.0).unwrap()).unwrap();
    let phase = PhaseSolution::new(15.0, &b).unwrap();
    let rate = markov_rate(15.0, &b.spectral);
    let n_e = planck_occupation(15.0, 20.0).unwrap();
    (phase, rate, n_e)
}

#[test]
fn occupation_follows_rate_equation_from_cycle_state() {
    // Entry occupation of the hot stroke: cold-bath Planck value at omega1 = 14.
    let (phase, rate, n_e) = resonant_weak_phase();
    let n0 = planck_occupation(14.0, 15.0).unwrap();
    for j in 0..=100 {
        let t = 0.05 * j as f64 / rate;
        let (n, _, _) = phase.occupation(t, n0).unwrap();
        let born = n_e + (n0 - n_e) * (-rate * t).exp();
        assert!((n - born).abs() <= 0.02 * born, "t={t}: {n} vs {born}");
    }
}

#[test]
fn initial_slip_is_bounded_by_memory_ratio() {
    // The dominant Green-function amplitude is 1 + gamma0 / (2 lambda), so
    // the transient differs from the rate equation by about gamma0 / lambda.
    let (phase, rate, n_e) = resonant_weak_phase();
    let n0 = 0.0;
    for j in 0..=100 {
        let t = 0.05 * j as f64 / rate;
        let (n, _, _) = phase.occupation(t, n0).unwrap();
        let born = n_e + (n0 - n_e) * (-rate * t).exp();
        assert!((n - born).abs() <= 0.06 * (n0 - n_e).abs(), "t={t}: {n} vs {born}");
    }
}

#[test]
fn efficiency_converges_to_markov_along_coupling_ladder() {
    let mut last = f64::INFINITY;
    for g0 in [1.0, 0.1, 0.01, 0.001] {
        let spec = CycleSpec::new(14.0, 16.0, 15.0, 20.0, SpectralParams::lorentzian(g0, 0.2, 15.0).unwrap()).unwrap();
        let (_, exact) = run_cycle(&spec).unwrap();
        let markov = markov_cycle(&spec);
        let gap = (exact.eta - markov.eta).abs();
        assert!(gap < last, "g0={g0}: gap {gap} did not shrink from {last}");
        assert!(exact.diagnostics.q_h_discrepancy <= 1e-5);
        last = gap;
    }
    assert!(last <= 0.002, "gap at g0=0.001 is {last}");
}

#[test]
fn weakest_coupling_matches_markov_work_and_heat() {
    let spec = CycleSpec::new(14.0, 16.0, 15.0, 20.0, SpectralParams::lorentzian(0.001, 0.2, 15.0).unwrap()).unwrap();
    let (_, exact) = run_cycle(&spec).unwrap();
    let markov = markov_cycle(&spec);
    assert!((exact.w_out - markov.w_out).abs() <= 0.01 * markov.w_out);
    assert!((exact.q_h - markov.q_h).abs() <= 0.01 * markov.q_h);
}
