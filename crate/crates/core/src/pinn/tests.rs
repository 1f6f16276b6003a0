use super::*;
use crate::rng::stream_rng;
use std::f64::consts::PI;

fn fd_check(problem: &PinnProblem<f64>, seed: u64) {
    let mut rng = stream_rng(seed, 0);
    let params = problem.init_params(&mut rng);
    let grad = problem.pinn_gradient(&params).unwrap();
    let n = params.len();
    let mut coords: Vec<usize> = (0..20).map(|k| (k * 7919 + 13) % n).collect();
    if let Some(ia) = problem.net.inverse_index() {
        coords.push(ia);
    }
    for k in coords {
        let h = 1e-6 * (1.0 + params[k].abs());
        let mut a = params.clone();
        let mut b = params.clone();
        a[k] += h;
        b[k] -= h;
        let fd = (problem.pinn_energy(&a).unwrap() - problem.pinn_energy(&b).unwrap()) / (2.0 * h);
        let scale = grad[k].abs().max(fd.abs()).max(1.0);
        assert!((fd - grad[k]).abs() < 1e-5 * scale, "coordinate {k}: fd {fd} vs analytic {}", grad[k]);
    }
}

#[test]
fn qgd_forward_gradient_matches_finite_differences() {
    fd_check(&PinnProblem::qgd_forward(Fidelity::Coarse, TimeScaling::Physical), 1);
    fd_check(&PinnProblem::qgd_forward(Fidelity::Coarse, TimeScaling::Unit), 2);
}

#[test]
fn qgd_inverse_gradient_matches_finite_differences() {
    fd_check(&PinnProblem::qgd_inverse(Fidelity::Coarse, TimeScaling::Unit), 3);
}

#[test]
fn nonlinear_gradient_matches_finite_differences() {
    fd_check(&PinnProblem::nonlinear_inverse(Fidelity::Fine), 4);
}

#[test]
fn manufactured_solutions_satisfy_their_equations() {
    let h = 1e-4;
    for pde in [ResidualDefinition::<f64>::qgd(false), ResidualDefinition::nonlinear(false)] {
        for &(x, t) in &[(0.13, 0.0002), (0.5, 0.0007), (-0.4, 0.0), (0.81, 0.001)] {
            let u = |x: f64, t: f64| pde.exact(x, t);
            let u_xx = (u(x + h, t) - 2.0 * u(x, t) + u(x - h, t)) / (h * h);
            let d = match pde.family {
                // analytic time derivatives of sin(2 pi x) e^{-t}
                PdeFamily::Qgd => InputDerivatives {
                    u: u(x, t),
                    u_xx: Some(-4.0 * PI * PI * u(x, t)),
                    u_t: Some(-u(x, t)),
                    u_tt: Some(u(x, t)),
                    u_x: None,
                },
                PdeFamily::Nonlinear => InputDerivatives {
                    u: u(x, t),
                    u_xx: Some((16.0 * x * x - 4.0) * u(x, t)),
                    ..Default::default()
                },
            };
            let r = pde.residual(x, t, &d, pde.true_alpha);
            assert!(r.abs() < 1e-10, "{:?} residual {r}", pde.family);
            // the closed-form second derivative agrees with differencing
            assert!((u_xx - d.u_xx.unwrap()).abs() < 1e-5 * (1.0 + u_xx.abs()));
        }
    }
}

#[test]
fn source_values() {
    let q = ResidualDefinition::<f64>::qgd(false);
    let u = q.exact(0.2, 0.0005);
    assert!((q.source(0.2, 0.0005) / u - 4.0 * PI * PI).abs() < 1e-10);
    let n = ResidualDefinition::<f64>::nonlinear(true);
    assert!((n.source(0.0, 0.0) - 4.7).abs() < 1e-12);
    for x in [0.1, 0.45, 0.9] {
        assert_eq!(n.source(x, 0.0), n.source(-x, 0.0));
    }
}

#[test]
fn doubling_every_sigma_quarters_the_likelihood_terms() {
    let p = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    let spec = p.spec;
    let doubled = p
        .clone()
        .with_spec(PinnLossSpec {
            sigma_u: 2.0 * spec.sigma_u,
            sigma_f: 2.0 * spec.sigma_f,
            sigma_b: 2.0 * spec.sigma_b,
            ..spec
        })
        .unwrap();
    let params = p.init_params(&mut stream_rng(5, 0));
    let a = p.energy_breakdown(&params).unwrap();
    let b = doubled.energy_breakdown(&params).unwrap();
    for (ta, tb) in a.terms.iter().zip(&b.terms) {
        assert!((ta.1 / 4.0 - tb.1).abs() < 1e-12 * ta.1.abs().max(1.0));
    }
    assert_eq!(a.prior, b.prior);
}

#[test]
fn single_point_energy_by_hand() {
    let net = DenseNetwork::new(&[2, 1], false).unwrap();
    let mut p = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    p.net = net;
    p.pde.fixed_alpha = Some(0.7);
    p.collocation = CollocationSet {
        terms: vec![PointSet {
            kind: TermKind::Observation,
            points: vec![[0.5, 0.0]],
            targets: vec![1.0],
        }],
    };
    // u(x) = 2x + 0.25 - 0 * t
    let params = [2.0, -3.0, 0.25];
    // residual 0.25, sigma_u 0.1: 0.0625 / 0.02
    let b = p.energy_breakdown(&params).unwrap();
    assert!((b.terms[0].1 - 3.125).abs() < 1e-12);
    assert!((b.prior - (4.0 + 9.0 + 0.0625) / 2.0).abs() < 1e-12);
    let g = p.pinn_gradient(&params).unwrap();
    // dU/dw_x = r x / sigma^2 + w_x
    assert!((g[0] - (0.25 * 0.5 / 0.01 + 2.0)).abs() < 1e-12);
    assert!((g[1] - (-3.0)).abs() < 1e-12);
    assert!((g[2] - (0.25 / 0.01 + 0.25)).abs() < 1e-12);
}

#[test]
fn coefficient_gradient_follows_the_chain_rule() {
    let p = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    let params = p.init_params(&mut stream_rng(6, 0));
    let ia = p.net.inverse_index().unwrap();
    let g = p.pinn_gradient(&params).unwrap();
    // only the residual term and the prior depend on alpha
    let set = p.collocation.term(TermKind::Residual).unwrap();
    let alpha = params[ia];
    let mut expect = 0.0;
    for pt in &set.points {
        let d = p
            .net
            .input_derivatives(&params, &[pt[0], 0.0], DerivativeRequest { x: true, t: false })
            .unwrap();
        let r = p.pde.residual(pt[0], 0.0, &d, alpha);
        expect += r * d.u * d.u;
    }
    expect /= set.points.len() as f64 * p.spec.sigma_f * p.spec.sigma_f;
    expect += alpha / (p.spec.prior_std * p.spec.prior_std);
    assert!((g[ia] - expect).abs() < 1e-10 * expect.abs().max(1.0), "{} vs {expect}", g[ia]);
}

#[test]
fn builders_have_the_expected_shapes() {
    let f = PinnProblem::<f64>::qgd_forward(Fidelity::Fine, TimeScaling::Physical);
    assert_eq!(f.collocation.count(TermKind::Residual), 64 * 8);
    assert_eq!(f.collocation.count(TermKind::Boundary), 16);
    assert_eq!(f.collocation.count(TermKind::Observation), 0);
    assert!(!f.pde.trainable());
    let c = PinnProblem::<f64>::qgd_inverse(Fidelity::Coarse, TimeScaling::Physical);
    assert_eq!(c.collocation.count(TermKind::Residual), 48 * 8);
    assert_eq!(c.collocation.count(TermKind::Observation), 10);
    assert_eq!(c.n_params(), f.n_params() + 1);
    let n = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    assert_eq!(n.collocation.count(TermKind::Residual), 20);
    let sensors = &n.collocation.term(TermKind::Observation).unwrap().points;
    assert!((sensors[0][0] + 2.0 / 3.0).abs() < 1e-12 && sensors[2][0].abs() < 1e-12);
    assert_eq!(n.evaluation_grid().len(), EVAL_GRID_POINTS);
}

#[test]
fn relative_error_basics() {
    assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert!((relative_error::<f64>(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(relative_error(&[0.0], &[0.0]), Err(PinnError::ZeroExactNorm)));
    assert!(matches!(relative_error(&[0.0], &[1.0, 2.0]), Err(PinnError::Dimension { .. })));
}

#[test]
fn zero_network_error_is_one() {
    let p = PinnProblem::<f64>::qgd_forward(Fidelity::Coarse, TimeScaling::Physical);
    let z = vec![0.0; p.n_params()];
    assert!((p.relative_error(&z).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_specs_and_vectors_are_rejected() {
    let p = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    let bad = PinnLossSpec {
        sigma_f: 0.0,
        ..PinnLossSpec::default()
    };
    assert!(p.clone().with_spec(bad).is_err());
    let w = PinnLossSpec {
        weights: [0.5, 0.5, 0.5],
        ..PinnLossSpec::default()
    };
    assert!(p.clone().with_spec(w).is_err());
    assert!(matches!(p.pinn_energy(&[0.0; 3]), Err(PinnError::Dimension { .. })));
}

#[test]
fn non_finite_residual_names_the_point() {
    let p = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    let mut params = vec![0.0; p.n_params()];
    let last_bias = p.net.n_weights() - 1;
    params[last_bias] = f64::NAN;
    match p.pinn_energy(&params) {
        Err(PinnError::NonFinite { term, .. }) => assert_eq!(term, "residual"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn f32_energy_tracks_f64() {
    let p64 = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    let p32 = PinnProblem::<f32>::nonlinear_inverse(Fidelity::Coarse);
    let params = p64.init_params(&mut stream_rng(8, 0));
    let params32: Vec<f32> = params.iter().map(|&v| v as f32).collect();
    let e64 = p64.pinn_energy(&params).unwrap();
    let e32 = p32.pinn_energy(&params32).unwrap() as f64;
    assert!((e64 - e32).abs() < 1e-4 * e64.abs());
}

#[test]
fn csv_writers() {
    let p = PinnProblem::<f64>::nonlinear_inverse(Fidelity::Coarse);
    let s = vec![p.init_params(&mut stream_rng(1, 0)), p.init_params(&mut stream_rng(2, 0))];
    let summary = PredictionSummary::from_samples(&p, &s).unwrap();
    let mut buf = Vec::new();
    summary.write_csv(&mut buf, false).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,u_pred_mean,u_pred_var,u_exact");
    assert_eq!(lines.len(), 1 + EVAL_GRID_POINTS);
    assert!(summary.mean_variance() > 0.0);

    let mut buf = Vec::new();
    let rows = [TrainingRow {
        epoch: 3,
        relative_error: 0.5,
        energy: 12.0,
        chain_id: 1,
        swapped: true,
    }];
    write_training_log(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "3,5.00000000e-1,1.20000000e1,1,1");
}
