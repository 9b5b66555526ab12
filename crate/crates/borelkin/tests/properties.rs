//! Property tests for the spectral calculus, operator algebra, and dynamics
//! invariants that hold for whole families of inputs.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;

use borelkin::dynamics::{evolve, DGParams};
use borelkin::geometry::{
    divergence, gradient, integrate, laplacian, twisted_laplacian, OneForm, TwistScale,
};
use borelkin::kinematics::{apply_p_sampled, apply_q, flow_unitary, KinematicsParams, VectorFieldSpec};
use borelkin::manifold::{Grid, ManifoldSpec};
use borelkin::state::WaveFunction;
use borelkin::trig::{Harmonic, TrigPoly, TrigTerm};

fn circle_grid(n: usize) -> Grid {
    Grid::new(ManifoldSpec::circle(TAU).unwrap(), vec![n]).unwrap()
}

fn harmonic_strategy(max_mode: u32) -> impl Strategy<Value = Harmonic> {
    prop_oneof![
        Just(Harmonic::One),
        (1..=max_mode).prop_map(Harmonic::Cos),
        (1..=max_mode).prop_map(Harmonic::Sin),
    ]
}

fn trig_poly_strategy(
    extents: Vec<f64>,
    max_mode: u32,
    max_terms: usize,
) -> impl Strategy<Value = TrigPoly> {
    let ndim = extents.len();
    prop::collection::vec(
        (-1.0f64..1.0, prop::collection::vec(harmonic_strategy(max_mode), ndim)),
        1..=max_terms,
    )
    .prop_map(move |terms| {
        TrigPoly::new(
            &extents,
            terms
                .into_iter()
                .map(|(amp, factors)| TrigTerm { amp, factors })
                .collect(),
        )
    })
}

fn complex_field(grid: &Grid, re: &TrigPoly, im: &TrigPoly) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            Complex64::new(re.eval(&x), im.eval(&x))
        })
        .collect()
}

fn max_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    /// divergence ∘ gradient = laplacian on random band-limited fields
    /// (torus, anisotropic metric).
    #[test]
    fn divergence_of_gradient_matches_laplacian(
        re in trig_poly_strategy(vec![TAU, TAU], 6, 3),
        im in trig_poly_strategy(vec![TAU, TAU], 6, 3),
    ) {
        let spec = ManifoldSpec::torus2(TAU, TAU)
            .unwrap()
            .with_metric(vec![1.5, 0.5])
            .unwrap();
        let grid = Grid::new(spec, vec![32, 32]).unwrap();
        let field = complex_field(&grid, &re, &im);
        let composed = divergence(&gradient(&field, &grid).unwrap(), &grid).unwrap();
        let direct = laplacian(&field, &grid).unwrap();
        prop_assert!(max_abs(&composed, &direct) < 1e-12);
    }

    /// ∫ f·div X dμ = −∫ df(X) dμ on closed manifolds.
    #[test]
    fn integration_by_parts(
        f in trig_poly_strategy(vec![TAU], 8, 3),
        xc in trig_poly_strategy(vec![TAU], 8, 3),
    ) {
        let grid = circle_grid(64);
        let fs = complex_field(&grid, &f, &TrigPoly::zero(&[TAU]));
        let xs = complex_field(&grid, &xc, &TrigPoly::zero(&[TAU]));
        let div_x = divergence(&[xs.clone()], &grid).unwrap();
        let lhs_field: Vec<Complex64> =
            fs.iter().zip(&div_x).map(|(a, b)| a * b).collect();
        let lhs = integrate(&lhs_field, &grid).unwrap();

        let df = f.partial(0);
        let dfs = complex_field(&grid, &df, &TrigPoly::zero(&[TAU]));
        let rhs_field: Vec<Complex64> =
            dfs.iter().zip(&xs).map(|(a, b)| a * b).collect();
        let rhs = integrate(&rhs_field, &grid).unwrap();
        prop_assert!((lhs + rhs).norm() < 1e-10, "lhs {lhs}, rhs {rhs}");
    }

    /// Zero twist reproduces the plain Laplacian on arbitrary fields.
    #[test]
    fn twisted_laplacian_zero_twist(
        re in trig_poly_strategy(vec![TAU], 8, 3),
        im in trig_poly_strategy(vec![TAU], 8, 3),
        hbar in 0.2f64..3.0,
    ) {
        let grid = circle_grid(64);
        let field = complex_field(&grid, &re, &im);
        let omega = OneForm::zero(&grid);
        let twisted = twisted_laplacian(&field, &omega, hbar, &grid).unwrap();
        let plain = laplacian(&field, &grid).unwrap();
        prop_assert!(max_abs(&twisted, &plain) < 1e-14);
    }

    /// Spectral differentiation is exact (to roundoff) for degree ≤ N/4.
    #[test]
    fn spectral_derivative_exactness(f in trig_poly_strategy(vec![TAU], 16, 4)) {
        let grid = circle_grid(64);
        let fs = complex_field(&grid, &f, &TrigPoly::zero(&[TAU]));
        let grad = gradient(&fs, &grid).unwrap();
        let df = f.partial(0);
        let expect = complex_field(&grid, &df, &TrigPoly::zero(&[TAU]));
        prop_assert!(max_abs(&grad[0], &expect) < 1e-10);
    }

    /// Q(f)·Q(g) commutes for arbitrary observables and states.
    #[test]
    fn q_operators_commute(
        f in trig_poly_strategy(vec![TAU], 8, 3),
        g in trig_poly_strategy(vec![TAU], 8, 3),
        seed in 0u64..1000,
    ) {
        let grid = circle_grid(64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let psi = WaveFunction::random_band_limited(&grid, 8, &mut rng).unwrap();
        let fs: Vec<f64> = grid.sample(|x| f.eval(x));
        let gs: Vec<f64> = grid.sample(|x| g.eval(x));
        let fg = apply_q(&fs, &apply_q(&gs, &psi).unwrap()).unwrap();
        let gf = apply_q(&gs, &apply_q(&fs, &psi).unwrap()).unwrap();
        prop_assert!(fg.l2_distance(&gf).unwrap() < 1e-13);
    }
}

/// Commutator residuals for fixed smooth non-polynomial data decay
/// spectrally: doubling N shrinks them faster than any fixed power of 1/N.
#[test]
fn commutator_residual_spectral_convergence() {
    // f has Fourier coefficients ~ r^|m| with r ≈ 0.73, so the truncation
    // tail is visible at N = 64, small at 128, and at the roundoff floor by
    // 256. ψ is likewise smooth with slow decay.
    let a = 1.05f64;
    let f = |x: f64| 1.0 / (a - x.cos());
    let fprime = |x: f64| -x.sin() / (a - x.cos()).powi(2);
    // The state itself stays mild so the measured tail is f's, not ψ's.
    let psi_fn = |x: f64| Complex64::from_polar((0.5 * x.cos()).exp(), x.sin());
    let hbar = 1.0;

    let residual_at = |n: usize| -> f64 {
        let grid = circle_grid(n);
        let params = KinematicsParams::untwisted(&grid, hbar, 0.7).unwrap();
        let psi = WaveFunction::from_fn(&grid, |x| psi_fn(x[0])).unwrap().normalized();
        let fs: Vec<f64> = grid.sample(|x| f(x[0]));
        let dfs: Vec<f64> = grid.sample(|x| fprime(x[0]));
        let ones = vec![vec![1.0; grid.len()]];
        // [P(∂), Q(f)]ψ − (ħ/i) Q(f')ψ
        let pq = apply_p_sampled(&ones, &apply_q(&fs, &psi).unwrap(), &params).unwrap();
        let qp = apply_q(&fs, &apply_p_sampled(&ones, &psi, &params).unwrap()).unwrap();
        let mut sum = 0.0;
        for i in 0..grid.len() {
            let rhs = Complex64::new(0.0, -hbar) * dfs[i] * psi.data()[i];
            sum += (pq.data()[i] - qp.data()[i] - rhs).norm_sqr();
        }
        (sum * grid.cell_volume()).sqrt() / psi.norm()
    };

    let r64 = residual_at(64);
    let r128 = residual_at(128);
    let r256 = residual_at(256);
    // Faster than (1/N)^6 per doubling at every step.
    let bound = 0.5f64.powi(6);
    assert!(r128 < bound * r64, "r64 {r64:.3e}, r128 {r128:.3e}");
    assert!(r256 < bound * r128, "r128 {r128:.3e}, r256 {r256:.3e}");
}

/// Exact-path flows stay unitary over a thousand compositions.
#[test]
fn flow_unitarity_over_many_shifts() {
    let grid = circle_grid(128);
    let params = KinematicsParams::twisted(&grid, 1.0, 0.3, &[0.4]).unwrap();
    let x = VectorFieldSpec::axis(&[TAU], 0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut psi = WaveFunction::random_band_limited(&grid, 10, &mut rng).unwrap();
    let h = grid.spacing(0);
    for step in 0..1000 {
        let m = ((step * 7919) % 128) as f64;
        psi = flow_unitary(&x, m * h, &psi, &params).unwrap();
    }
    assert!((psi.norm() - 1.0).abs() < 1e-12, "norm drift {:.3e}", (psi.norm() - 1.0).abs());
}

/// Shifting the twist by one equivalence-lattice unit and relabeling the
/// state by the matching integer character leaves density trajectories
/// unchanged. The full (minimal-coupling) twist convention has lattice
/// 2πħ/L; the default half-twist convention needs two units.
#[test]
fn theta_lattice_covariance_of_density_trajectories() {
    let grid = circle_grid(128);
    let hbar = 1.0;
    let psi = WaveFunction::periodic_bump(&grid, &[PI], &[1.0]).unwrap();
    let u = TAU / TAU; // unit wavenumber 2π/L on the 2π circle
    let relabeled = {
        let data: Vec<Complex64> = (0..grid.len())
            .map(|i| psi.data()[i] * Complex64::new(0.0, u * grid.point(i)[0]).exp())
            .collect();
        WaveFunction::new(grid.clone(), data).unwrap()
    };
    let theta = 0.3;
    let t_final = 0.3;

    for (twist, lattice_units) in [(TwistScale::Full, 1.0), (TwistScale::Half, 2.0)] {
        let lattice = TAU * hbar / TAU; // 2πħ/L
        let shifted = theta + lattice_units * lattice;

        let kin_shift = KinematicsParams::twisted(&grid, hbar, 0.0, &[shifted]).unwrap();
        let p_shift = DGParams::free(kin_shift, 1e-3).unwrap().with_twist(twist);
        let out_shift = evolve(&psi, &p_shift, t_final, &[], 1000).unwrap();

        let kin_base = KinematicsParams::twisted(&grid, hbar, 0.0, &[theta]).unwrap();
        let p_base = DGParams::free(kin_base, 1e-3).unwrap().with_twist(twist);
        let out_relab = evolve(&relabeled, &p_base, t_final, &[], 1000).unwrap();

        let rho_a = out_shift.final_state().density();
        let rho_b = out_relab.final_state().density();
        let max: f64 = rho_a
            .iter()
            .zip(&rho_b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(max < 1e-9, "{twist:?}: density deviation {max:.3e}");
    }
}
