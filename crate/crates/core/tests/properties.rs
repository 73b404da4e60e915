mod common;

use common::*;
use mpemba_core::liouvillian::complex_dense;
use mpemba_core::propagation::LindbladRhs;
use mpemba_core::*;
use proptest::prelude::*;

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Open), Just(Boundary::Periodic)]
}

fn small_spec() -> impl Strategy<Value = HamiltonianSpec> {
    (
        3usize..=6,
        -2.0..2.0f64,
        -1.0..1.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
        boundary(),
    )
        .prop_map(|(l, j1, j2, d1, d2, b)| HamiltonianSpec {
            j1,
            j2,
            delta1: d1,
            delta2: d2,
            boundary: b,
            num_sites: l,
        })
}

fn temperature() -> impl Strategy<Value = TemperatureSpec> {
    prop_oneof![
        (0.05..50.0f64).prop_map(TemperatureSpec::Finite),
        (-50.0..-0.05f64).prop_map(TemperatureSpec::Finite),
        Just(TemperatureSpec::ZeroPlus),
        Just(TemperatureSpec::ZeroMinus),
        Just(TemperatureSpec::Infinite),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hamiltonian_is_symmetric_and_conserves_magnetization(spec in small_spec(), up_frac in 0.0..1.0f64) {
        let num_up = (up_frac * spec.num_sites as f64).round() as usize;
        let basis = SectorBasis::new(spec.num_sites, num_up).unwrap();
        let mut h = build_hamiltonian(&spec, &basis).unwrap();
        prop_assert_eq!(h.sparse().asymmetry(), 0.0);
        h.eigendecompose().unwrap();
        let e = h.energies().unwrap();
        prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(h.eigen_residual().unwrap() <= 1e-10 * h.sparse().max_abs().max(1.0) * basis.dim() as f64);
        let full = full_hamiltonian(&spec);
        prop_assert!(max_abs_diff(&project(&full, &basis), &real_to_complex(&h.to_dense())) < 1e-13);
    }

    #[test]
    fn thermal_states_are_valid(spec in small_spec(), temp in temperature()) {
        let basis = SectorBasis::new(spec.num_sites, spec.num_sites / 2).unwrap();
        let mut h = build_hamiltonian(&spec, &basis).unwrap();
        h.eigendecompose().unwrap();
        let rho = thermal_state(&h, temp).unwrap();
        prop_assert!(rho.validate(1e-12, 1e-10).is_ok());
        let diag = purity_and_diagnostics(&rho).unwrap();
        prop_assert!(diag.purity <= 1.0 + 1e-12 && diag.purity >= 1.0 / basis.dim() as f64 - 1e-12);
    }

    #[test]
    fn lindblad_rhs_is_traceless_and_hermitian(spec in small_spec(), gamma in 0.0..3.0f64, seed in 0u64..1000) {
        let basis = SectorBasis::new(spec.num_sites, spec.num_sites / 2).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let diss = Dissipator::dephasing(&DissipationSpec::uniform(spec.num_sites, gamma).unwrap(), &basis).unwrap();
        let d = basis.dim();
        let rho = random_density(d, &mut rng(seed));
        let out = apply_lindblad_rhs(&complex_dense(&h), &diss, &rho).unwrap();
        let tr: C64 = (0..d).map(|k| out[(k, k)]).sum();
        prop_assert!(tr.norm() < 1e-12);
        prop_assert!((&out - out.adjoint()).norm_max() < 1e-12);
        let rhs = LindbladRhs::new(&h, &diss).unwrap();
        let mut fast = vec![c(0.0); d * d];
        rhs.apply(&DensityMatrix::new_unchecked(rho).to_vec(), &mut fast);
        prop_assert!(max_abs_diff(&DensityMatrix::from_vec(d, &fast).into_matrix(), &out) < 1e-12);
    }

    #[test]
    fn config_round_trips(l in 2usize..12, gamma in 0.0..5.0f64, delta in -3.0..3.0f64, open in any::<bool>(), t_max in proptest::option::of(1.0..500.0f64)) {
        let mut text = format!("lattice.L = {l}\ndissipation.gamma = {gamma}\nmodel.Delta1 = {delta}\n");
        if open {
            text.push_str("lattice.boundary = open\n");
        }
        if let Some(t) = t_max {
            text.push_str(&format!("time.t_max = {t}\n"));
        }
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(&parse_config(&cfg.to_text()).unwrap(), &cfg);
    }
}
