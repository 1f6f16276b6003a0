//! Bayesian physics-informed neural networks.
//!
//! A [`PinnProblem`] bundles a [`DenseNetwork`], collocation points, noise
//! levels and a PDE, and exposes the negative log posterior over the flat
//! parameter vector as an [`EnergyModel`]:
//!
//! ```text
//! U(beta) = sum over terms  (1/N) sum_i r_i^2 / (2 sigma_term^2)  +  |beta|^2 / (2 s_prior^2)
//! ```
//!
//! Two PDE families are covered. The damped wave (quasi-gas-dynamics) model
//! `u_t + alpha u_tt - u_xx = f` on `[0,1] x [0,T]` with `u = sin(2 pi x) e^{-t}`,
//! and the stationary `-u_xx + alpha u^2 = f` on `[-1,1]` with `u = e^{-2 x^2}`.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::sampler::{to_f64_vec, EnergyError, EnergyModel};
use crate::{fmt_sig9, Scalar};

pub mod dual;
pub mod jet;
pub mod network;

use jet::{backward_jets, forward_jets, JetLayout, JetTape};
pub use network::{DenseNetwork, DerivativeRequest, InputDerivatives};

#[derive(Debug, Error)]
pub enum PinnError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("{what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {term} residual at {point:?}")]
    NonFinite { term: &'static str, point: [f64; 2] },
    #[error("{0} term has no points")]
    EmptyTerm(&'static str),
    #[error("exact solution vanishes on the evaluation grid")]
    ZeroExactNorm,
    #[error("invalid loss specification: {0}")]
    InvalidSpec(String),
}

pub const QGD_T_FINAL: f64 = 0.001;
pub const QGD_TIME_LEVELS: usize = 8;
pub const QGD_OBSERVATIONS: usize = 10;
pub const NONLINEAR_SENSORS: usize = 5;
pub const NONLINEAR_TRUE_ALPHA: f64 = 0.7;
pub const QGD_TRUE_ALPHA: f64 = 1.0;
pub const ALPHA_INIT: f64 = 0.5;
pub const EVAL_GRID_POINTS: usize = 201;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fidelity {
    Fine,
    Coarse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdeFamily {
    /// `u_t + alpha u_tt - kappa u_xx = f`
    Qgd,
    /// `-u_xx + alpha u^2 = f`
    Nonlinear,
}

/// How the time coordinate enters the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TimeScaling {
    /// Physical time.
    #[default]
    Physical,
    /// Time divided by the final time, so the network sees `[0, 1]`.
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualDefinition<S> {
    pub family: PdeFamily,
    /// Coefficient used to manufacture the source.
    pub true_alpha: S,
    /// `None` when the coefficient is read from the parameter vector.
    pub fixed_alpha: Option<S>,
    pub kappa: S,
}

impl<S: Scalar> ResidualDefinition<S> {
    pub fn qgd(trainable: bool) -> Self {
        let a = S::of(QGD_TRUE_ALPHA);
        Self {
            family: PdeFamily::Qgd,
            true_alpha: a,
            fixed_alpha: (!trainable).then_some(a),
            kappa: S::one(),
        }
    }

    pub fn nonlinear(trainable: bool) -> Self {
        let a = S::of(NONLINEAR_TRUE_ALPHA);
        Self {
            family: PdeFamily::Nonlinear,
            true_alpha: a,
            fixed_alpha: (!trainable).then_some(a),
            kappa: S::one(),
        }
    }

    pub fn trainable(&self) -> bool {
        self.fixed_alpha.is_none()
    }

    pub fn exact(&self, x: S, t: S) -> S {
        match self.family {
            PdeFamily::Qgd => (S::of(2.0 * PI) * x).sin() * (-t).exp(),
            PdeFamily::Nonlinear => (S::of(-2.0) * x * x).exp(),
        }
    }

    /// Manufactured source for the true coefficient.
    pub fn source(&self, x: S, t: S) -> S {
        let u = self.exact(x, t);
        match self.family {
            // u_t = -u, u_tt = u, u_xx = -4 pi^2 u
            PdeFamily::Qgd => u * (-S::one() + self.true_alpha + self.kappa * S::of(4.0 * PI * PI)),
            PdeFamily::Nonlinear => -u * (S::of(16.0) * x * x - S::of(4.0)) + self.true_alpha * u * u,
        }
    }

    /// Residual from input derivatives, for consistency checks.
    pub fn residual(&self, x: S, t: S, d: &InputDerivatives<S>, alpha: S) -> S {
        let u_xx = d.u_xx.unwrap_or_else(S::zero);
        match self.family {
            PdeFamily::Qgd => {
                d.u_t.unwrap_or_else(S::zero) + alpha * d.u_tt.unwrap_or_else(S::zero) - self.kappa * u_xx
                    - self.source(x, t)
            }
            PdeFamily::Nonlinear => -u_xx + alpha * d.u * d.u - self.source(x, t),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Residual,
    Boundary,
    Initial,
    InitialVelocity,
    Observation,
}

impl TermKind {
    pub fn name(self) -> &'static str {
        match self {
            TermKind::Residual => "residual",
            TermKind::Boundary => "boundary",
            TermKind::Initial => "initial",
            TermKind::InitialVelocity => "initial velocity",
            TermKind::Observation => "observation",
        }
    }
}

/// Points `(x, t)` of one likelihood factor with their targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<S> {
    pub kind: TermKind,
    pub points: Vec<[S; 2]>,
    /// Observed values; unused for residual terms.
    pub targets: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet<S> {
    pub terms: Vec<PointSet<S>>,
}

impl<S: Scalar> CollocationSet<S> {
    pub fn term(&self, kind: TermKind) -> Option<&PointSet<S>> {
        self.terms.iter().find(|t| t.kind == kind)
    }

    pub fn count(&self, kind: TermKind) -> usize {
        self.term(kind).map_or(0, |t| t.points.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinnLossSpec<S> {
    /// Weights of the data, residual and boundary mean squares in the
    /// deterministic loss; diagnostics only.
    pub weights: [S; 3],
    pub sigma_u: S,
    pub sigma_f: S,
    pub sigma_b: S,
    pub prior_std: S,
}

impl<S: Scalar> Default for PinnLossSpec<S> {
    fn default() -> Self {
        let third = S::of(1.0 / 3.0);
        Self {
            weights: [third; 3],
            sigma_u: S::of(0.1),
            sigma_f: S::of(0.1),
            sigma_b: S::of(0.1),
            prior_std: S::one(),
        }
    }
}

impl<S: Scalar> PinnLossSpec<S> {
    pub fn validate(&self) -> Result<(), PinnError> {
        let sum: S = self.weights.iter().copied().sum();
        if self.weights.iter().any(|&w| !(w > S::zero())) || (sum - S::one()).abs() > S::of(1e-6) {
            return Err(PinnError::InvalidSpec("weights must be positive and sum to 1".into()));
        }
        for (name, s) in [
            ("sigma_u", self.sigma_u),
            ("sigma_f", self.sigma_f),
            ("sigma_b", self.sigma_b),
            ("prior_std", self.prior_std),
        ] {
            if !(s > S::zero()) {
                return Err(PinnError::InvalidSpec(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn sigma_for(&self, kind: TermKind) -> S {
        match kind {
            TermKind::Residual => self.sigma_f,
            TermKind::Boundary | TermKind::Initial => self.sigma_b,
            TermKind::InitialVelocity | TermKind::Observation => self.sigma_u,
        }
    }
}

/// Energy split by likelihood factor.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBreakdown<S> {
    /// `(kind, energy contribution, mean squared residual)` per term.
    pub terms: Vec<(TermKind, S, S)>,
    pub prior: S,
    pub total: S,
}

impl<S: Scalar> EnergyBreakdown<S> {
    pub fn term(&self, kind: TermKind) -> Option<S> {
        self.terms.iter().find(|t| t.0 == kind).map(|t| t.1)
    }

    pub fn mean_square(&self, kind: TermKind) -> Option<S> {
        self.terms.iter().find(|t| t.0 == kind).map(|t| t.2)
    }

    /// `w1 MSE_data + w2 MSE_residual + w3 MSE_boundary`
    pub fn weighted_loss(&self, spec: &PinnLossSpec<S>) -> S {
        let mut groups = [S::zero(); 3];
        for &(kind, _, ms) in &self.terms {
            let g = match kind {
                TermKind::Residual => 1,
                TermKind::Boundary => 2,
                _ => 0,
            };
            groups[g] += ms;
        }
        groups.iter().zip(&spec.weights).map(|(&g, &w)| g * w).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PinnProblem<S> {
    pub net: DenseNetwork,
    pub collocation: CollocationSet<S>,
    pub spec: PinnLossSpec<S>,
    pub pde: ResidualDefinition<S>,
    pub fidelity: Fidelity,
    pub t_final: S,
    pub time_scaling: TimeScaling,
    /// Sigma reported to the swap rule.
    pub assigned_sigma: S,
}

fn linspace<S: Scalar>(a: f64, b: f64, n: usize) -> Vec<S> {
    if n == 1 {
        return vec![S::of(0.5 * (a + b))];
    }
    (0..n).map(|i| S::of(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// `n` equally spaced points strictly inside `(a, b)`.
fn open_linspace<S: Scalar>(a: f64, b: f64, n: usize) -> Vec<S> {
    (1..=n).map(|i| S::of(a + (b - a) * i as f64 / (n + 1) as f64)).collect()
}

pub fn qgd_spatial_points(fidelity: Fidelity) -> usize {
    match fidelity {
        Fidelity::Fine => 64,
        Fidelity::Coarse => 48,
    }
}

pub fn nonlinear_points(fidelity: Fidelity) -> usize {
    match fidelity {
        Fidelity::Fine => 30,
        Fidelity::Coarse => 20,
    }
}

impl<S: Scalar> PinnProblem<S> {
    fn qgd(fidelity: Fidelity, inverse: bool, time_scaling: TimeScaling) -> Self {
        let pde = ResidualDefinition::qgd(inverse);
        let t_final = S::of(QGD_T_FINAL);
        let xs: Vec<S> = linspace(0.0, 1.0, qgd_spatial_points(fidelity));
        let ts: Vec<S> = linspace(0.0, QGD_T_FINAL, QGD_TIME_LEVELS);

        let interior: Vec<[S; 2]> = ts.iter().flat_map(|&t| xs.iter().map(move |&x| [x, t])).collect();
        let boundary: Vec<[S; 2]> = ts.iter().flat_map(|&t| [[S::zero(), t], [S::one(), t]]).collect();
        let initial: Vec<[S; 2]> = xs.iter().map(|&x| [x, S::zero()]).collect();
        let mut terms = vec![
            PointSet {
                kind: TermKind::Residual,
                targets: vec![S::zero(); interior.len()],
                points: interior,
            },
            PointSet {
                kind: TermKind::Boundary,
                targets: boundary.iter().map(|p| pde.exact(p[0], p[1])).collect(),
                points: boundary,
            },
            PointSet {
                kind: TermKind::Initial,
                targets: initial.iter().map(|p| pde.exact(p[0], S::zero())).collect(),
                points: initial.clone(),
            },
            PointSet {
                kind: TermKind::InitialVelocity,
                targets: initial.iter().map(|p| -pde.exact(p[0], S::zero())).collect(),
                points: initial,
            },
        ];
        if inverse {
            let obs: Vec<[S; 2]> = open_linspace(0.0, 1.0, QGD_OBSERVATIONS).into_iter().map(|x| [x, t_final]).collect();
            terms.push(PointSet {
                kind: TermKind::Observation,
                targets: obs.iter().map(|p| pde.exact(p[0], p[1])).collect(),
                points: obs,
            });
        }
        Self {
            net: DenseNetwork::standard(inverse),
            collocation: CollocationSet { terms },
            spec: PinnLossSpec::default(),
            pde,
            fidelity,
            t_final,
            time_scaling,
            assigned_sigma: S::zero(),
        }
    }

    /// Damped-wave forward problem with `alpha = 1` fixed.
    pub fn qgd_forward(fidelity: Fidelity, time_scaling: TimeScaling) -> Self {
        Self::qgd(fidelity, false, time_scaling)
    }

    /// Damped-wave problem with `alpha` trainable and ten readings at the final time.
    pub fn qgd_inverse(fidelity: Fidelity, time_scaling: TimeScaling) -> Self {
        Self::qgd(fidelity, true, time_scaling)
    }

    /// `-u_xx + alpha u^2 = f` on `[-1, 1]` with five interior sensors and trainable `alpha`.
    pub fn nonlinear_inverse(fidelity: Fidelity) -> Self {
        let pde = ResidualDefinition::nonlinear(true);
        let zero = S::zero();
        let interior: Vec<[S; 2]> = linspace(-1.0, 1.0, nonlinear_points(fidelity)).into_iter().map(|x| [x, zero]).collect();
        let boundary = vec![[-S::one(), zero], [S::one(), zero]];
        let sensors: Vec<[S; 2]> = open_linspace(-1.0, 1.0, NONLINEAR_SENSORS).into_iter().map(|x| [x, zero]).collect();
        let terms = vec![
            PointSet {
                kind: TermKind::Residual,
                targets: vec![zero; interior.len()],
                points: interior,
            },
            PointSet {
                kind: TermKind::Boundary,
                targets: boundary.iter().map(|p| pde.exact(p[0], zero)).collect(),
                points: boundary,
            },
            PointSet {
                kind: TermKind::Observation,
                targets: sensors.iter().map(|p| pde.exact(p[0], zero)).collect(),
                points: sensors,
            },
        ];
        Self {
            net: DenseNetwork::standard(true),
            collocation: CollocationSet { terms },
            spec: PinnLossSpec::default(),
            pde,
            fidelity,
            t_final: zero,
            time_scaling: TimeScaling::Physical,
            assigned_sigma: S::zero(),
        }
    }

    pub fn with_spec(mut self, spec: PinnLossSpec<S>) -> Result<Self, PinnError> {
        spec.validate()?;
        self.spec = spec;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: S) -> Self {
        self.assigned_sigma = sigma;
        self
    }

    pub fn n_params(&self) -> usize {
        self.net.n_params()
    }

    /// Initial parameters: scaled Gaussian weights and the coefficient slot at 0.5.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        self.net.init(rng, S::of(ALPHA_INIT))
    }

    /// Multiplier applied to the network's time input.
    fn time_factor(&self) -> S {
        match (self.pde.family, self.time_scaling) {
            (PdeFamily::Qgd, TimeScaling::Unit) => S::one() / self.t_final,
            _ => S::one(),
        }
    }

    pub fn network_input(&self, x: S, t: S) -> Vec<S> {
        match self.pde.family {
            PdeFamily::Qgd => vec![S::of(2.0) * x - S::one(), t * self.time_factor()],
            PdeFamily::Nonlinear => vec![x, S::zero()],
        }
    }

    pub fn alpha(&self, params: &[S]) -> S {
        match self.pde.fixed_alpha {
            Some(a) => a,
            None => params[self.net.inverse_index().expect("trainable coefficient has a slot")],
        }
    }

    fn layout(&self, kind: TermKind) -> JetLayout {
        match (kind, self.pde.family) {
            (TermKind::Residual, PdeFamily::Qgd) => JetLayout::along(&[0, 1]),
            (TermKind::Residual, PdeFamily::Nonlinear) => JetLayout::along(&[0]),
            (TermKind::InitialVelocity, _) => JetLayout::along(&[1]),
            _ => JetLayout::value_only(),
        }
    }

    fn check_params(&self, params: &[S]) -> Result<(), PinnError> {
        if params.len() != self.n_params() {
            return Err(PinnError::Dimension {
                what: "parameter vector",
                expected: self.n_params(),
                got: params.len(),
            });
        }
        Ok(())
    }

    /// Residuals of one term with their sensitivities to the output jet and
    /// to the coefficient.
    fn term_residuals(&self, set: &PointSet<S>, tape: &JetTape<S>, alpha: S) -> Result<TermResiduals<S>, PinnError> {
        let n = set.points.len();
        let layout = tape.layout();
        let c = layout.channels();
        let tf = self.time_factor();
        let mut r = Vec::with_capacity(n);
        // d r_p / d channel, stored [channel][point]
        let mut dr = vec![S::zero(); c * n];
        let mut dalpha = vec![S::zero(); n];
        for p in 0..n {
            let [x, t] = set.points[p];
            let rp = match (set.kind, self.pde.family) {
                (TermKind::Residual, PdeFamily::Qgd) => {
                    let (cx2, ct1, ct2) = (
                        layout.second(0).expect("x channel"),
                        layout.first(1).expect("t channel"),
                        layout.second(1).expect("t channel"),
                    );
                    let xf2 = S::of(4.0);
                    let u_xx = tape.out(cx2, p) * xf2;
                    let u_t = tape.out(ct1, p) * tf;
                    let u_tt = tape.out(ct2, p) * tf * tf;
                    dr[ct1 * n + p] = tf;
                    dr[ct2 * n + p] = alpha * tf * tf;
                    dr[cx2 * n + p] = -self.pde.kappa * xf2;
                    dalpha[p] = u_tt;
                    u_t + alpha * u_tt - self.pde.kappa * u_xx - self.pde.source(x, t)
                }
                (TermKind::Residual, PdeFamily::Nonlinear) => {
                    let cx2 = layout.second(0).expect("x channel");
                    let u = tape.out(0, p);
                    dr[p] = S::of(2.0) * alpha * u;
                    dr[cx2 * n + p] = -S::one();
                    dalpha[p] = u * u;
                    -tape.out(cx2, p) + alpha * u * u - self.pde.source(x, t)
                }
                (TermKind::InitialVelocity, _) => {
                    let ct1 = layout.first(1).expect("t channel");
                    dr[ct1 * n + p] = tf;
                    tape.out(ct1, p) * tf - set.targets[p]
                }
                _ => {
                    dr[p] = S::one();
                    tape.out(0, p) - set.targets[p]
                }
            };
            if !rp.is_finite() {
                return Err(PinnError::NonFinite {
                    term: set.kind.name(),
                    point: [x.as_f64(), t.as_f64()],
                });
            }
            r.push(rp);
        }
        Ok(TermResiduals { r, dr, dalpha })
    }

    fn run(&self, params: &[S], want_grad: bool) -> Result<(EnergyBreakdown<S>, Option<Vec<S>>), PinnError> {
        self.check_params(params)?;
        let alpha = self.alpha(params);
        let mut grad = want_grad.then(|| vec![S::zero(); params.len()]);
        let mut terms = Vec::with_capacity(self.collocation.terms.len());
        let mut total = S::zero();
        for set in &self.collocation.terms {
            let n = set.points.len();
            if n == 0 {
                return Err(PinnError::EmptyTerm(set.kind.name()));
            }
            let inputs: Vec<Vec<S>> = set.points.iter().map(|p| self.network_input(p[0], p[1])).collect();
            let tape = forward_jets(&self.net, params, &inputs, &self.layout(set.kind));
            let res = self.term_residuals(set, &tape, alpha)?;
            let sigma = self.spec.sigma_for(set.kind);
            let nn = S::of(n as f64);
            let ss: S = res.r.iter().map(|&r| r * r).sum();
            let energy = ss / (S::of(2.0) * sigma * sigma * nn);
            total += energy;
            terms.push((set.kind, energy, ss / nn));

            if let Some(g) = grad.as_mut() {
                let scale = S::one() / (sigma * sigma * nn);
                let c = tape.layout().channels();
                let mut out_bar = res.dr;
                for ch in 0..c {
                    for p in 0..n {
                        out_bar[ch * n + p] *= res.r[p] * scale;
                    }
                }
                backward_jets(&self.net, params, &tape, &out_bar, g);
                if let (None, Some(ia)) = (self.pde.fixed_alpha, self.net.inverse_index()) {
                    let da: S = res.r.iter().zip(&res.dalpha).map(|(&r, &d)| r * d).sum();
                    g[ia] += da * scale;
                }
            }
        }
        let var = self.spec.prior_std * self.spec.prior_std;
        let prior = params.iter().map(|&p| p * p).sum::<S>() / (S::of(2.0) * var);
        if let Some(g) = grad.as_mut() {
            for (gi, &p) in g.iter_mut().zip(params) {
                *gi += p / var;
            }
        }
        total += prior;
        Ok((EnergyBreakdown { terms, prior, total }, grad))
    }

    pub fn energy_breakdown(&self, params: &[S]) -> Result<EnergyBreakdown<S>, PinnError> {
        Ok(self.run(params, false)?.0)
    }

    pub fn pinn_energy(&self, params: &[S]) -> Result<S, PinnError> {
        Ok(self.energy_breakdown(params)?.total)
    }

    pub fn pinn_gradient(&self, params: &[S]) -> Result<Vec<S>, PinnError> {
        Ok(self.run(params, true)?.1.expect("gradient requested"))
    }

    pub fn pinn_energy_and_gradient(&self, params: &[S]) -> Result<(S, Vec<S>), PinnError> {
        let (b, g) = self.run(params, true)?;
        Ok((b.total, g.expect("gradient requested")))
    }

    /// Evaluation grid: 201 points over the spatial domain, at the final time
    /// for the time-dependent problem.
    pub fn evaluation_grid(&self) -> Vec<[S; 2]> {
        match self.pde.family {
            PdeFamily::Qgd => linspace(0.0, 1.0, EVAL_GRID_POINTS).into_iter().map(|x| [x, self.t_final]).collect(),
            PdeFamily::Nonlinear => linspace(-1.0, 1.0, EVAL_GRID_POINTS).into_iter().map(|x| [x, S::zero()]).collect(),
        }
    }

    pub fn predict(&self, params: &[S], grid: &[[S; 2]]) -> Result<Vec<S>, PinnError> {
        self.check_params(params)?;
        let inputs: Vec<Vec<S>> = grid.iter().map(|p| self.network_input(p[0], p[1])).collect();
        let tape = forward_jets(&self.net, params, &inputs, &JetLayout::value_only());
        Ok(tape.output().to_vec())
    }

    pub fn exact_on(&self, grid: &[[S; 2]]) -> Vec<S> {
        grid.iter().map(|p| self.pde.exact(p[0], p[1])).collect()
    }

    pub fn relative_error(&self, params: &[S]) -> Result<S, PinnError> {
        let grid = self.evaluation_grid();
        relative_error(&self.predict(params, &grid)?, &self.exact_on(&grid))
    }
}

struct TermResiduals<S> {
    r: Vec<S>,
    dr: Vec<S>,
    dalpha: Vec<S>,
}

/// `|pred - exact|_2 / |exact|_2`
pub fn relative_error<S: Scalar>(pred: &[S], exact: &[S]) -> Result<S, PinnError> {
    if pred.len() != exact.len() {
        return Err(PinnError::Dimension {
            what: "prediction",
            expected: exact.len(),
            got: pred.len(),
        });
    }
    let den: S = exact.iter().map(|&e| e * e).sum();
    if pred.is_empty() || den == S::zero() {
        return Err(PinnError::ZeroExactNorm);
    }
    let num: S = pred.iter().zip(exact).map(|(&p, &e)| (p - e) * (p - e)).sum();
    Ok((num / den).sqrt())
}

fn to_energy_error<S: Scalar>(position: &[S], e: PinnError) -> EnergyError {
    EnergyError::Evaluation {
        position: to_f64_vec(&position[..position.len().min(4)]),
        source: Box::new(e),
    }
}

impl<S: Scalar> EnergyModel<S> for PinnProblem<S> {
    fn energy(&self, position: &[S]) -> Result<S, EnergyError> {
        self.pinn_energy(position).map_err(|e| to_energy_error(position, e))
    }

    fn gradient(&self, position: &[S]) -> Result<Vec<S>, EnergyError> {
        self.pinn_gradient(position).map_err(|e| to_energy_error(position, e))
    }

    fn sigma(&self) -> S {
        self.assigned_sigma
    }

    fn joint_evaluation(&self) -> bool {
        true
    }

    fn energy_and_gradient(&self, position: &[S]) -> Result<(S, Vec<S>), EnergyError> {
        self.pinn_energy_and_gradient(position)
            .map_err(|e| to_energy_error(position, e))
    }
}

/// RMS of `U_coarse - U_fine` over parameter vectors drawn by `draw`.
pub fn calibrate_sigma<S: Scalar, R: Rng + ?Sized>(
    fine: &PinnProblem<S>,
    coarse: &PinnProblem<S>,
    n: usize,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> Vec<S>,
) -> Result<f64, PinnError> {
    if n == 0 {
        return Err(PinnError::InvalidSpec("calibration needs at least one draw".into()));
    }
    let mut ss = 0.0;
    for _ in 0..n {
        let p = draw(rng);
        let gap = (coarse.pinn_energy(&p)? - fine.pinn_energy(&p)?).as_f64();
        ss += gap * gap;
    }
    Ok((ss / n as f64).sqrt())
}

/// Pointwise mean and variance of predictions over a set of parameter samples.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSummary {
    pub grid: Vec<[f64; 2]>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub exact: Vec<f64>,
}

impl PredictionSummary {
    pub fn from_samples<S: Scalar>(problem: &PinnProblem<S>, samples: &[Vec<S>]) -> Result<Self, PinnError> {
        let grid = problem.evaluation_grid();
        let m = grid.len();
        let mut sum = vec![0.0; m];
        let mut sq = vec![0.0; m];
        for s in samples {
            for (k, v) in problem.predict(s, &grid)?.into_iter().enumerate() {
                let v = v.as_f64();
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        let n = samples.len().max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let variance = sq.iter().zip(&mean).map(|(q, m)| (q / n - m * m).max(0.0)).collect();
        Ok(Self {
            exact: problem.exact_on(&grid).into_iter().map(|v| v.as_f64()).collect(),
            grid: grid.into_iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect(),
            mean,
            variance,
        })
    }

    pub fn mean_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len().max(1) as f64
    }

    /// CSV with columns `x[,t],u_pred_mean,u_pred_var,u_exact`.
    pub fn write_csv<W: Write>(&self, mut w: W, with_time: bool) -> io::Result<()> {
        if with_time {
            writeln!(w, "x,t,u_pred_mean,u_pred_var,u_exact")?;
        } else {
            writeln!(w, "x,u_pred_mean,u_pred_var,u_exact")?;
        }
        for k in 0..self.grid.len() {
            write!(w, "{}", fmt_sig9(self.grid[k][0]))?;
            if with_time {
                write!(w, ",{}", fmt_sig9(self.grid[k][1]))?;
            }
            writeln!(
                w,
                ",{},{},{}",
                fmt_sig9(self.mean[k]),
                fmt_sig9(self.variance[k]),
                fmt_sig9(self.exact[k])
            )?;
        }
        Ok(())
    }
}

pub const TRAINING_LOG_HEADER: &str = "epoch,relative_error,energy,chain_id,swapped";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingRow {
    pub epoch: u64,
    pub relative_error: f64,
    pub energy: f64,
    pub chain_id: usize,
    pub swapped: bool,
}

pub fn write_training_log<W: Write>(mut w: W, rows: &[TrainingRow]) -> io::Result<()> {
    writeln!(w, "{TRAINING_LOG_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.epoch,
            fmt_sig9(r.relative_error),
            fmt_sig9(r.energy),
            r.chain_id,
            u8::from(r.swapped)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
