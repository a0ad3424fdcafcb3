//! The spectral fidelity formula against brute-force repeated application
//! of the maps.

use loschmidt::ensembles::{
    haar_random_state, perturbed_map, sample_cue, PerturbationForm, PerturbationSpec, Spin,
};
use loschmidt::fidelity::{fidelity_direct, fidelity_spectral, fidelity_spectral_state};
use loschmidt::linalg::{overlap_matrix, spectral_decompose, CVector};
use proptest::prelude::*;

const TOL: f64 = 1e-8;

fn form_for(dim: usize) -> PerturbationForm {
    PerturbationForm::qubits_for_dim(dim)
        .unwrap_or_else(|_| PerturbationForm::spin(Spin::from_dim(dim).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn eigenstate_series_agree(
        dim in 2usize..=32,
        seed in any::<u64>(),
        delta in 0.0f64..1.5,
        n_max in 1usize..=200,
        pick in any::<prop::sample::Index>(),
    ) {
        let u = sample_cue(dim, seed).unwrap();
        let spec = PerturbationSpec { form: form_for(dim), delta };
        let up = perturbed_map(&u, &spec).unwrap();
        let d = spectral_decompose(&u).unwrap();
        let dp = spectral_decompose(&up).unwrap();
        let ov = overlap_matrix(&d, &dp).unwrap();
        let m = pick.index(dim);
        let psi: CVector = d.vectors().column(m).into_owned();
        let direct = fidelity_direct(&u, &up, &psi, n_max).unwrap();
        let spectral = fidelity_spectral(&ov, m, n_max).unwrap();
        prop_assert_eq!(direct.values.len(), spectral.values.len());
        for (n, (a, b)) in direct.values.iter().zip(&spectral.values).enumerate() {
            prop_assert!((a - b).abs() < TOL, "n = {}: {} vs {}", n, a, b);
        }
    }

    #[test]
    fn random_state_series_agree(
        dim in 2usize..=32,
        seed in any::<u64>(),
        delta in 0.0f64..1.5,
        n_max in 1usize..=200,
    ) {
        let u = sample_cue(dim, seed).unwrap();
        let up = perturbed_map(&u, &PerturbationSpec { form: form_for(dim), delta }).unwrap();
        let d = spectral_decompose(&u).unwrap();
        let dp = spectral_decompose(&up).unwrap();
        let psi = haar_random_state(dim, seed.wrapping_add(1));
        let direct = fidelity_direct(&u, &up, &psi, n_max).unwrap();
        let spectral = fidelity_spectral_state(&d, &dp, &psi, n_max).unwrap();
        for (a, b) in direct.values.iter().zip(&spectral.values) {
            prop_assert!((a - b).abs() < TOL);
        }
    }
}
