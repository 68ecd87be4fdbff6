//! Cross-module checks through the public surface: QR exponent spectra
//! against closed-form linearizations, the damping trace identity, and
//! descent of the gradient-case functional along simulated flows.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavedim::bounds::unstable_mode_count;
use wavedim::dynamics::{GalerkinState, NonlinearitySpec, PotentialTerm, WaveSystem};
use wavedim::lyapunov::{compute_exponents, LyapunovConfig};
use wavedim::spectral::{build_spectrum, Domain};

/// Smooth random state u_j ~ amplitude·ξ/λ_j, zero velocity.
fn random_state(system: &WaveSystem, amplitude: f64, seed: u64) -> GalerkinState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = system.modes();
    let n = system.n_components;
    let mut u = Array2::zeros((m, n));
    for j in 0..m {
        for c in 0..n {
            u[[j, c]] = amplitude / system.spectrum.lambdas[j] * rng.gen_range(-1.0..1.0);
        }
    }
    GalerkinState::from_coeffs(u, Array2::zeros((m, n)))
}

/// On a long interval the low modes fall below γ²/4 and the linear flow
/// mixes real exponent pairs −γ/2 ± √(γ²/4 − λ) with damped complex
/// pairs at −γ/2. The measured top of the spectrum must reproduce that
/// structure, not just the flat −γ/2 plateau.
#[test]
fn linear_flow_reproduces_closed_form_exponents() {
    let gamma = 0.5;
    let len = 10.0 * std::f64::consts::PI;
    let modes = 8;
    let system = WaveSystem::new(
        Domain::Interval { len },
        modes,
        1,
        NonlinearitySpec::linear(gamma),
    )
    .unwrap();

    let mut expected: Vec<f64> = Vec::new();
    for &lambda in &system.spectrum.lambdas {
        let disc = gamma * gamma / 4.0 - lambda;
        if disc > 0.0 {
            expected.push(-gamma / 2.0 + disc.sqrt());
            expected.push(-gamma / 2.0 - disc.sqrt());
        } else {
            expected.push(-gamma / 2.0);
            expected.push(-gamma / 2.0);
        }
    }
    expected.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let k = 6;
    let mut config = LyapunovConfig::new(k, 600.0);
    config.burn_in = Some(0.0);
    config.require_convergence = false;
    let report = compute_exponents(&system, random_state(&system, 0.5, 3), &config).unwrap();

    for (measured, want) in report.exponents.iter().zip(&expected[..k]) {
        assert!(
            (measured - want).abs() < 2e-3,
            "exponent {measured} vs closed form {want}"
        );
    }
}

/// The Jacobian of the rotational coupling is skew, so the trace of the
/// full variational flow is the damping trace −γMN exactly, and the sum
/// over all 2MN exponents telescopes to it pathwise.
#[test]
fn full_spectrum_sum_matches_damping_trace() {
    let gamma = 0.25;
    let (modes, n) = (6, 2);
    let system = WaveSystem::new(
        Domain::Interval {
            len: std::f64::consts::PI,
        },
        modes,
        n,
        NonlinearitySpec::rotational(gamma),
    )
    .unwrap();

    let mut config = LyapunovConfig::new(2 * modes * n, 20.0);
    config.burn_in = Some(0.0);
    config.align_time = Some(0.0);
    config.require_convergence = false;
    let report = compute_exponents(&system, random_state(&system, 0.5, 5), &config).unwrap();

    let sum: f64 = report.exponents.iter().sum();
    let want = -gamma * (modes * n) as f64;
    assert!(
        (sum - want).abs() < 1e-6,
        "exponent sum {sum} vs damping trace {want}"
    );
}

/// At the zero equilibrium the tangent flow is autonomous, so the QR
/// method must reproduce the growth rates of the linearization pencil
/// μ² + γμ + λ ± ib mode by mode. With γ = 0.2 and b = 1 the threshold
/// λ < (b/γ)² = 25 flags exactly the interval modes j = 1..4, and the
/// conjugate pairing doubles each rate in the exponent list.
#[test]
fn equilibrium_exponents_match_pencil_growth_rates() {
    let gamma = 0.2;
    let modes = 16;
    let domain = Domain::Interval {
        len: std::f64::consts::PI,
    };
    let scalar = build_spectrum(domain.clone(), modes, 1).unwrap();
    let unstable = unstable_mode_count(gamma, 0.0, 1.0, &scalar).unwrap();
    assert_eq!(unstable.positions, vec![0, 1, 2, 3]);
    assert_eq!(unstable.instability_index, 8);

    let mut rates = unstable.growth_rates.clone();
    rates.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!(rates[3] > 0.0);

    let system =
        WaveSystem::new(domain, modes, 2, NonlinearitySpec::rotational(gamma)).unwrap();
    let mut config = LyapunovConfig::new(4, 300.0);
    config.burn_in = Some(0.0);
    config.require_convergence = false;
    let report =
        compute_exponents(&system, GalerkinState::zero(modes, 2), &config).unwrap();

    for (pair, &rate) in report.exponents.chunks(2).zip(&rates[..2]) {
        for measured in pair {
            assert!(
                (measured - rate).abs() < 1e-3,
                "equilibrium exponent {measured} vs pencil rate {rate}"
            );
        }
    }
}

/// Forced gradient flow: the descent functional must not increase
/// between samples, within the integrator's per-step budget.
#[test]
fn forced_gradient_descent_survives_the_public_surface() {
    let gamma = 0.15;
    let modes = 8;
    let mut forcing = Array2::zeros((modes, 1));
    forcing[[0, 0]] = 0.3;
    let spec = NonlinearitySpec::gradient(
        gamma,
        vec![PotentialTerm {
            coeff: 0.25,
            powers: vec![4],
        }],
    )
    .with_forcing(forcing);
    let system = WaveSystem::new(
        Domain::Interval {
            len: std::f64::consts::PI,
        },
        modes,
        1,
        spec,
    )
    .unwrap();

    let traj = system
        .simulate(random_state(&system, 1.0, 7), 20.0, 0.01, 20)
        .unwrap();
    let lyap = traj.lyapunov.as_ref().expect("gradient case records descent");
    for (pair, ts) in lyap.windows(2).zip(traj.times.windows(2)) {
        let budget = 1e-6 * (ts[1] - ts[0]) + 1e-12;
        assert!(
            pair[1] <= pair[0] + budget,
            "descent functional rose: {} -> {}",
            pair[0],
            pair[1]
        );
    }
}
