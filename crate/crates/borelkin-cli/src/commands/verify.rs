//! `verify <suite>`: run the built-in relation suites and emit a JSON report
//! listing each relation tag, its residual, tolerance and verdict.

use std::f64::consts::TAU;
use std::path::Path;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use borelkin::classical::{
    classical_ehrenfest_residual, integrate_trajectory, poisson_bracket,
    ClassicalObservable, PhasePoint,
};
use borelkin::geometry::{OneForm, TwoForm};
use borelkin::kinematics::{
    commutator_residual, imprimitivity_residual, linearity_residual_p,
    linearity_residual_q, test_vectors, BorelSet, CommutatorKind, HarnessOptions,
    KinematicsParams, VectorFieldSpec,
};
use borelkin::manifold::{Grid, ManifoldSpec};
use borelkin::trig::{Harmonic, TrigPoly};

use crate::report::{RelationResult, VerifyReport};

pub fn run(suite: &str, out: Option<&Path>) -> Result<i32> {
    let results = match suite {
        "algebra" => algebra_suite()?,
        "imprimitivity" => imprimitivity_suite()?,
        "poisson" => poisson_suite(),
        "ehrenfest-classical" => classical_suite()?,
        "all" => {
            let mut all = algebra_suite()?;
            all.extend(imprimitivity_suite()?);
            all.extend(poisson_suite());
            all.extend(classical_suite()?);
            all
        }
        other => bail!("unknown suite {other:?} (algebra|imprimitivity|poisson|ehrenfest-classical|all)"),
    };
    let report = VerifyReport::new(suite, results);
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = out {
        std::fs::write(path, &json)?;
    }
    println!("{json}");
    Ok(if report.passed { 0 } else { 1 })
}

fn circle_grid() -> Grid {
    Grid::new(ManifoldSpec::circle(TAU).unwrap(), vec![128]).unwrap()
}

fn algebra_suite() -> Result<Vec<RelationResult>> {
    let grid = circle_grid();
    let ext = [TAU];
    let opts = HarnessOptions::for_grid(&grid);
    let f = TrigPoly::axis_harmonic(&ext, 0, Harmonic::Sin(3), 1.0);
    let g = TrigPoly::axis_harmonic(&ext, 0, Harmonic::Cos(5), 0.7);
    let x = VectorFieldSpec::new(vec![TrigPoly::axis_harmonic(&ext, 0, Harmonic::Sin(2), 0.8)]);
    let y = VectorFieldSpec::new(vec![TrigPoly::axis_harmonic(&ext, 0, Harmonic::Cos(3), 0.5)]);

    let mut qlin: f64 = 0.0;
    let mut qcom: f64 = 0.0;
    let mut pqcom: f64 = 0.0;
    let mut partadd: f64 = 0.0;
    let mut parhom: f64 = 0.0;
    for &theta in &[0.0, 0.3, 0.9] {
        for &c in &[0.0, 0.7, -0.4] {
            let params = KinematicsParams::twisted(&grid, 1.0, c, &[theta])?;
            let psis = test_vectors(&grid, &opts)?;
            for psi in &psis {
                qlin = qlin.max(linearity_residual_q(&f, &g, -1.3, psi)?);
                partadd = partadd.max(linearity_residual_p(&x, &y, 2.1, psi, &params)?);
            }
            qcom = qcom.max(commutator_residual(
                &CommutatorKind::QQ { f: f.clone(), g: g.clone() },
                &params,
                &opts,
            )?);
            pqcom = pqcom.max(commutator_residual(
                &CommutatorKind::PQ { x: x.clone(), f: f.clone() },
                &params,
                &opts,
            )?);
            parhom = parhom.max(commutator_residual(
                &CommutatorKind::PP { x: x.clone(), y: y.clone() },
                &params,
                &opts,
            )?);
        }
    }

    // Quantum magnetic commutator with an exact field on the torus.
    let tgrid = Grid::new(ManifoldSpec::torus2(TAU, TAU)?, vec![64, 64])?;
    let text = [TAU, TAU];
    let e = 0.8;
    let tparams = KinematicsParams::untwisted(&tgrid, 1.0, 0.3)?;
    let a_comps = vec![vec![0.0; tgrid.len()], tgrid.sample(|p| -e * p[0].cos())];
    let potential = OneForm::from_components_unchecked(&tgrid, a_comps)?;
    let phi = TwoForm::from_samples(&tgrid, tgrid.sample(|p| p[0].sin()))?;
    let curv = commutator_residual(
        &CommutatorKind::PPMagnetic {
            x: VectorFieldSpec::axis(&text, 0),
            y: VectorFieldSpec::axis(&text, 1),
            potential,
            e,
            phi,
        },
        &tparams,
        &HarnessOptions::for_grid(&tgrid),
    )?;

    let tol = 1e-10;
    Ok(vec![
        RelationResult::new("Qlin", "Q(f) + aQ(g) = Q(f + ag)", qlin, tol),
        RelationResult::new("Qcom", "[Q(f), Q(g)] = 0", qcom, tol),
        RelationResult::new("PQcom", "[P(X), Q(f)] = (h/i) Q(L_X f)", pqcom, tol),
        RelationResult::new("partadd", "P(X) + aP(Y) = P(X + aY)", partadd, tol),
        RelationResult::new("parhom", "[P(X), P(Y)] = (h/i) P([X, Y])", parhom, tol),
        RelationResult::new(
            "curv",
            "[P_A(X), P_A(Y)] = (h/i)(P_A([X,Y]) + e Q(phi(X,Y)))",
            curv,
            tol,
        ),
    ])
}

fn imprimitivity_suite() -> Result<Vec<RelationResult>> {
    let n = 128usize;
    let grid = circle_grid();
    let params = KinematicsParams::twisted(&grid, 1.0, 0.6, &[0.3])?;
    let x = VectorFieldSpec::axis(&[TAU], 0);
    let psis = test_vectors(&grid, &HarnessOptions::for_grid(&grid))?;
    let h = grid.spacing(0);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let ia = rng.gen_range(0..n - 1);
        let ib = rng.gen_range(ia + 1..n);
        let b = BorelSet::new(&[TAU], vec![vec![(ia as f64 * h, ib as f64 * h)]])?;
        let m = rng.gen_range(1..n) as f64;
        worst = worst.max(imprimitivity_residual(&x, m * h, &b, &psis, &params)?);
    }
    Ok(vec![RelationResult::new(
        "loc-cons",
        "V_s E(B) V_{-s} = E(Phi_s B), 20 random grid-aligned (B, s)",
        worst,
        1e-12,
    )])
}

fn poisson_suite() -> Vec<RelationResult> {
    let spec = ManifoldSpec::torus2(TAU, TAU).unwrap();
    let ext = [TAU, TAU];
    let p1 = ClassicalObservable::Momentum(VectorFieldSpec::axis(&ext, 0));
    let p2 = ClassicalObservable::Momentum(VectorFieldSpec::axis(&ext, 1));
    let f = ClassicalObservable::Position(TrigPoly::axis_harmonic(&ext, 0, Harmonic::Sin(1), 1.0));
    let g = ClassicalObservable::Position(TrigPoly::axis_harmonic(&ext, 1, Harmonic::Cos(2), 0.6));
    let py_shear = ClassicalObservable::Momentum(VectorFieldSpec::new(vec![
        TrigPoly::zero(&ext),
        TrigPoly::axis_harmonic(&ext, 0, Harmonic::Sin(1), 1.0),
    ]));
    let (e, phi0) = (0.8, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut qq: f64 = 0.0;
    let mut pq: f64 = 0.0;
    let mut pp: f64 = 0.0;
    let mut mag: f64 = 0.0;
    for _ in 0..50 {
        let alpha = PhasePoint::new(
            &spec,
            vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
            vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        );
        qq = qq.max(poisson_bracket(&f, &g, &alpha, 0.0, 0.0).abs());
        pq = pq.max(
            (poisson_bracket(&p1, &f, &alpha, 0.0, 0.0) - alpha.x[0].cos()).abs(),
        );
        pp = pp.max(
            (poisson_bracket(&p1, &py_shear, &alpha, 0.0, 0.0)
                - alpha.p[1] * alpha.x[0].cos())
            .abs(),
        );
        mag = mag.max((poisson_bracket(&p1, &p2, &alpha, e, phi0) - e * phi0).abs());
    }
    let tol = 1e-6;
    vec![
        RelationResult::new("wcom", "{Q_f, Q_g} = 0", qq, tol),
        RelationResult::new("wcom", "{P_X, Q_f} = Q_{L_X f}", pq, tol),
        RelationResult::new("wcom", "{P_X, P_Y} = P_{[X,Y]}", pp, tol),
        RelationResult::new("wecom", "{P_1, P_2}_e = e phi_12", mag, tol),
    ]
}

fn classical_suite() -> Result<Vec<RelationResult>> {
    let circle = ManifoldSpec::circle(TAU)?;
    let segment = ManifoldSpec::line_segment(20.0)?;
    let f_circle = TrigPoly::axis_harmonic(&[TAU], 0, Harmonic::Sin(1), 1.0);
    let f_segment = TrigPoly::axis_harmonic(&[20.0], 0, Harmonic::Sin(1), 1.0);

    let free = |_: &PhasePoint| vec![0.0];
    let alpha_free = PhasePoint::new(&circle, vec![0.4], vec![1.2]);
    let traj = integrate_trajectory(&free, &alpha_free, 1e-3, 2.0, &circle)?;
    let free_residual = classical_ehrenfest_residual(&f_circle, &traj, 1e-3, &circle)?;

    let harmonic = |a: &PhasePoint| vec![-(a.x[0] - 10.0)];
    let alpha_harm = PhasePoint::new(&segment, vec![11.5], vec![0.3]);
    let mut residuals = Vec::new();
    for &dt in &[1e-3, 5e-4] {
        let traj = integrate_trajectory(&harmonic, &alpha_harm, dt, 2.0, &segment)?;
        residuals.push(classical_ehrenfest_residual(&f_segment, &traj, dt, &segment)?);
    }
    let ratio = residuals[0] / residuals[1];

    Ok(vec![
        RelationResult::new("cm-Ehr", "d/dt Q_f = P_{grad f}, free flow", free_residual, 1e-6),
        RelationResult::new(
            "cm-Ehr",
            "d/dt Q_f = P_{grad f}, harmonic force",
            residuals[0],
            1e-6,
        ),
        RelationResult::new(
            "cm-Ehr",
            "halving dt quarters the residual (|ratio - 4|)",
            (ratio - 4.0).abs(),
            0.5,
        ),
    ])
}
