//! Bayesian source inversion for the contamination problem.
//!
//! The posterior over the source location `k` in `[0,1]^2` has a flat prior
//! and a Gaussian likelihood, giving the energy
//!
//! ```text
//! U(k) = |y - F(k)|^2 / sigma_obs^2     (k inside the box, +inf outside)
//! ```
//!
//! where `F` reads the sensors at the final time after a forward solve at the
//! chosen mesh fidelity. Gradients are finite differences of `U`.

use std::error::Error as StdError;
use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use thiserror::Error;

use crate::fem::{
    exact_solution, observe, FemError, FemSolver, ParabolicProblem, Point, ReducedObservation, SensorSet,
    SourceParams, COARSE_CELLS, DEFAULT_DT, DEFAULT_T_FINAL, FINE_CELLS,
};
use crate::sampler::{to_f64_vec, EnergyError, EnergyModel};
use crate::{fmt_sig9, Scalar};

mod diagnostics;

pub use diagnostics::{mode_coverage, CoverageReport, ModeDiagnostics, ModeTarget};

#[derive(Debug, Error)]
pub enum InverseError {
    #[error("invalid inverse problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("forward solve failed for source at {k:?}: {source}")]
    Forward {
        k: [f64; 2],
        #[source]
        source: FemError,
    },
    #[error("no samples to analyse")]
    EmptySamples,
    #[error("mode coverage needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("burn-in fraction {0} is outside [0, 1)")]
    BurnIn(f64),
}

/// Distance from each sensor at which the synthetic observations are taken.
pub const SENSOR_RADIUS: f64 = 0.2;
pub const DEFAULT_OBS_SIGMA: f64 = 0.1;
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fidelity {
    Fine,
    Coarse,
}

impl Fidelity {
    pub fn cells_per_side(self) -> usize {
        match self {
            Fidelity::Fine => FINE_CELLS,
            Fidelity::Coarse => COARSE_CELLS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fidelity::Fine => "fine",
            Fidelity::Coarse => "coarse",
        }
    }
}

/// How sensor readings are computed from a source location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Evaluator {
    /// Precomputed adjoint weights of the time-stepping map. Same readings up
    /// to the linear-solve tolerance, at a cost linear in the node count.
    #[default]
    Reduced,
    /// Full backward-Euler solve per evaluation.
    TimeStepping,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseProblem<S> {
    pub sensors: SensorSet<S>,
    pub observations: Vec<S>,
    pub obs_sigma: S,
    /// Radius and strength of the source being located; its position is the unknown.
    pub source: SourceParams<S>,
    pub dt: S,
    pub t_final: S,
}

impl<S: Scalar> InverseProblem<S> {
    /// Sensors are snapped to the fine mesh.
    pub fn new(sensor_locations: &[Point<S>], observations: Vec<S>, obs_sigma: S) -> Result<Self, InverseError> {
        let t_final = S::of(DEFAULT_T_FINAL);
        let (sensors, _) = SensorSet::snapped_to(sensor_locations, FINE_CELLS, t_final)?;
        let p = Self {
            sensors,
            observations,
            obs_sigma,
            source: SourceParams::at([S::of(0.5), S::of(0.5)])?,
            dt: S::of(DEFAULT_DT),
            t_final,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), InverseError> {
        if self.sensors.is_empty() {
            return Err(InverseError::InvalidProblem("need at least one sensor".into()));
        }
        if self.observations.len() != self.sensors.len() {
            return Err(InverseError::InvalidProblem(format!(
                "{} observations for {} sensors",
                self.observations.len(),
                self.sensors.len()
            )));
        }
        if !(self.obs_sigma > S::zero()) {
            return Err(InverseError::InvalidProblem("obs_sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn with_obs_sigma(mut self, obs_sigma: S) -> Result<Self, InverseError> {
        self.obs_sigma = obs_sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn forward_problem(&self, k: Point<S>, fidelity: Fidelity) -> Result<ParabolicProblem<S>, InverseError> {
        Ok(ParabolicProblem::new(
            self.source.with_location(k),
            fidelity.cells_per_side(),
            self.dt,
            self.t_final,
        )?)
    }

    /// Sensor readings of the closed-form solution for a source at `k`.
    pub fn closed_form_readings(&self, k: Point<S>) -> Vec<S> {
        let src = self.source.with_location(k);
        self.sensors
            .locations
            .iter()
            .map(|&x| exact_solution(&src, x, self.t_final))
            .collect()
    }

    /// `|y - readings|^2 / sigma_obs^2`
    pub fn misfit(&self, readings: &[S]) -> S {
        let ss: S = self
            .observations
            .iter()
            .zip(readings)
            .map(|(&y, &f)| (y - f) * (y - f))
            .sum();
        ss / (self.obs_sigma * self.obs_sigma)
    }

    pub fn closed_form_energy(&self, k: Point<S>) -> S {
        if !in_unit_box(k) {
            return S::infinity();
        }
        self.misfit(&self.closed_form_readings(k))
    }
}

pub fn in_unit_box<S: Scalar>(k: Point<S>) -> bool {
    k.iter().all(|&v| v >= S::zero() && v <= S::one())
}

/// Closed-form reading at distance `SENSOR_RADIUS` from a unit source at the final time.
fn ring_reading<S: Scalar>(problem_source: &SourceParams<S>, t_final: S) -> S {
    let c = [S::of(0.5), S::of(0.5)];
    let src = problem_source.with_location(c);
    exact_solution(&src, [c[0], c[1] + S::of(SENSOR_RADIUS)], t_final)
}

/// Two sensors on the line `x = 0.5`, both reading the value found at
/// distance 0.2 from the source. Two source locations explain the data.
pub fn make_two_mode_problem<S: Scalar>() -> Result<InverseProblem<S>, InverseError> {
    let sensors = [[S::of(0.5), S::of(0.3)], [S::of(0.5), S::of(0.6)]];
    let mut p = InverseProblem::new(&sensors, vec![S::zero(); 2], S::of(DEFAULT_OBS_SIGMA))?;
    let y = ring_reading(&p.source, p.t_final);
    p.observations = vec![y; 2];
    Ok(p)
}

/// The two analytic solutions of [`make_two_mode_problem`]: intersections of
/// the radius-0.2 circles around both sensors.
pub fn two_mode_locations<S: Scalar>() -> [Point<S>; 2] {
    let offset = S::of((SENSOR_RADIUS * SENSOR_RADIUS - 0.15 * 0.15_f64).sqrt());
    let half = S::of(0.5);
    [[half - offset, S::of(0.45)], [half + offset, S::of(0.45)]]
}

/// One sensor; every source on the radius-0.2 circle around it explains the data.
pub fn make_infinite_mode_problem<S: Scalar>() -> Result<InverseProblem<S>, InverseError> {
    let sensors = [[S::of(0.5), S::of(0.3)]];
    let mut p = InverseProblem::new(&sensors, vec![S::zero()], S::of(DEFAULT_OBS_SIGMA))?;
    p.observations = vec![ring_reading(&p.source, p.t_final)];
    Ok(p)
}

/// Centre and radius of the solution circle of [`make_infinite_mode_problem`].
pub fn infinite_mode_circle<S: Scalar>() -> (Point<S>, S) {
    ([S::of(0.5), S::of(0.3)], S::of(SENSOR_RADIUS))
}

#[derive(Debug)]
enum ForwardMap<S> {
    Reduced(ReducedObservation<S>),
    TimeStepping(FemSolver<S>),
}

/// Posterior energy at one mesh fidelity.
#[derive(Debug)]
pub struct PosteriorEnergy<S> {
    problem: InverseProblem<S>,
    fidelity: Fidelity,
    assigned_sigma: S,
    fd_step: S,
    forward: ForwardMap<S>,
    n_nodes: usize,
    evaluations: AtomicU64,
    one_sided: AtomicU64,
}

impl<S: Scalar> PosteriorEnergy<S> {
    pub fn new(problem: InverseProblem<S>, fidelity: Fidelity, evaluator: Evaluator) -> Result<Self, InverseError> {
        problem.validate()?;
        let solver = FemSolver::for_problem(&problem.forward_problem(problem.source.x0, fidelity)?)?;
        let n_nodes = solver.mesh().n_nodes();
        let forward = match evaluator {
            Evaluator::Reduced => ForwardMap::Reduced(ReducedObservation::new(&solver, &problem.sensors)?),
            Evaluator::TimeStepping => ForwardMap::TimeStepping(solver),
        };
        Ok(Self {
            problem,
            fidelity,
            assigned_sigma: S::zero(),
            fd_step: S::of(DEFAULT_FD_STEP),
            forward,
            n_nodes,
            evaluations: AtomicU64::new(0),
            one_sided: AtomicU64::new(0),
        })
    }

    pub fn with_sigma(mut self, sigma: S) -> Result<Self, InverseError> {
        if !(sigma >= S::zero()) || !sigma.is_finite() {
            return Err(InverseError::InvalidProblem(format!("assigned sigma must be finite and >= 0, got {sigma}")));
        }
        self.assigned_sigma = sigma;
        Ok(self)
    }

    pub fn with_fd_step(mut self, fd_step: S) -> Result<Self, InverseError> {
        if !(fd_step > S::zero() && fd_step < S::of(0.25)) {
            return Err(InverseError::InvalidProblem(format!("fd_step must lie in (0, 0.25), got {fd_step}")));
        }
        self.fd_step = fd_step;
        Ok(self)
    }

    pub fn problem(&self) -> &InverseProblem<S> {
        &self.problem
    }

    pub fn fidelity(&self) -> Fidelity {
        self.fidelity
    }

    pub fn fd_step(&self) -> S {
        self.fd_step
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Forward evaluations so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Gradients that fell back to one-sided differences near the box edge.
    pub fn one_sided_gradients(&self) -> u64 {
        self.one_sided.load(Ordering::Relaxed)
    }

    /// Sensor readings for a source at `k`.
    pub fn readings(&self, k: Point<S>) -> Result<Vec<S>, InverseError> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let src = self.problem.source.with_location(k);
        let fail = |e: FemError| InverseError::Forward {
            k: [k[0].as_f64(), k[1].as_f64()],
            source: e,
        };
        src.validate().map_err(fail)?;
        match &self.forward {
            ForwardMap::Reduced(r) => Ok(r.observe(&src)),
            ForwardMap::TimeStepping(solver) => {
                let sol = solver.solve(&src).map_err(fail)?;
                observe(&sol, &self.problem.sensors).map_err(fail)
            }
        }
    }

    /// Posterior energy; `+inf` outside the prior box.
    pub fn posterior_energy(&self, k: Point<S>) -> Result<S, InverseError> {
        if !in_unit_box(k) {
            return Ok(S::infinity());
        }
        Ok(self.problem.misfit(&self.readings(k)?))
    }

    /// Central differences with step `h`, or second-order one-sided
    /// differences along coordinates closer than `h` to the box edge.
    pub fn gradient_with_step(&self, k: Point<S>, h: S) -> Result<[S; 2], InverseError> {
        let mut g = [S::zero(); 2];
        let mut one_sided = false;
        let mut centre: Option<S> = None;
        for i in 0..2 {
            let at = |d: S| {
                let mut p = k;
                p[i] += d;
                self.posterior_energy(p)
            };
            if k[i] - h >= S::zero() && k[i] + h <= S::one() {
                g[i] = (at(h)? - at(-h)?) / (S::of(2.0) * h);
            } else {
                one_sided = true;
                let e0 = match centre {
                    Some(e) => e,
                    None => *centre.insert(self.posterior_energy(k)?),
                };
                let dir = if k[i] + S::of(2.0) * h <= S::one() { h } else { -h };
                g[i] = (S::of(-3.0) * e0 + S::of(4.0) * at(dir)? - at(S::of(2.0) * dir)?) / (S::of(2.0) * dir);
            }
        }
        if one_sided {
            self.one_sided.fetch_add(1, Ordering::Relaxed);
        }
        Ok(g)
    }

    pub fn posterior_gradient(&self, k: Point<S>) -> Result<[S; 2], InverseError> {
        self.gradient_with_step(k, self.fd_step)
    }

    /// Fourth-order five-point differences, used as a reference in checks.
    pub fn gradient_five_point(&self, k: Point<S>, h: S) -> Result<[S; 2], InverseError> {
        let mut g = [S::zero(); 2];
        for (i, gi) in g.iter_mut().enumerate() {
            let at = |d: S| {
                let mut p = k;
                p[i] += d;
                self.posterior_energy(p)
            };
            let two = S::of(2.0);
            *gi = (at(-two * h)? - S::of(8.0) * at(-h)? + S::of(8.0) * at(h)? - at(two * h)?) / (S::of(12.0) * h);
        }
        Ok(g)
    }
}

fn point_of<S: Scalar>(position: &[S]) -> Point<S> {
    [position[0], position[1]]
}

fn boxed(position: &[impl Scalar], e: InverseError) -> EnergyError {
    EnergyError::Evaluation {
        position: to_f64_vec(position),
        source: Box::new(e) as Box<dyn StdError + Send + Sync>,
    }
}

impl<S: Scalar> EnergyModel<S> for PosteriorEnergy<S> {
    fn energy(&self, position: &[S]) -> Result<S, EnergyError> {
        self.posterior_energy(point_of(position)).map_err(|e| boxed(position, e))
    }

    fn gradient(&self, position: &[S]) -> Result<Vec<S>, EnergyError> {
        self.posterior_gradient(point_of(position))
            .map(|g| g.to_vec())
            .map_err(|e| boxed(position, e))
    }

    fn sigma(&self) -> S {
        self.assigned_sigma
    }

    fn in_support(&self, position: &[S]) -> bool {
        position.len() == 2 && in_unit_box(point_of(position))
    }
}

/// Spread of the energy estimators, from paired evaluations at random sources.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaCalibration {
    /// RMS of `U_fine - U_closed_form`.
    pub fine_rms: f64,
    /// RMS of `U_coarse - U_fine`.
    pub coarse_rms: f64,
    pub n_sources: usize,
}

impl SigmaCalibration {
    /// Sigmas for the two chains, `(fine, coarse)`, with the coarse one at
    /// least as large as the fine one.
    pub fn sigmas(&self) -> (f64, f64) {
        (self.fine_rms, self.coarse_rms.max(self.fine_rms))
    }
}

/// Evaluates both fidelities at `n` sources drawn uniformly from the box.
pub fn calibrate_sigmas<S: Scalar, R: Rng + ?Sized>(
    fine: &PosteriorEnergy<S>,
    coarse: &PosteriorEnergy<S>,
    n: usize,
    rng: &mut R,
) -> Result<SigmaCalibration, InverseError> {
    if n == 0 {
        return Err(InverseError::InvalidProblem("calibration needs at least one source".into()));
    }
    let (mut ss_fine, mut ss_coarse) = (0.0, 0.0);
    for _ in 0..n {
        let k = [S::of(rng.random::<f64>()), S::of(rng.random::<f64>())];
        let uf = fine.posterior_energy(k)?.as_f64();
        let uc = coarse.posterior_energy(k)?.as_f64();
        let ue = fine.problem().closed_form_energy(k).as_f64();
        ss_fine += (uf - ue).powi(2);
        ss_coarse += (uc - uf).powi(2);
    }
    Ok(SigmaCalibration {
        fine_rms: (ss_fine / n as f64).sqrt(),
        coarse_rms: (ss_coarse / n as f64).sqrt(),
        n_sources: n,
    })
}

pub const SAMPLES_HEADER: &str = "step,x,y,energy,chain_id";

/// One row of a sample dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRow<S> {
    pub step: u64,
    pub position: Point<S>,
    pub energy: S,
    pub chain_id: usize,
}

pub fn write_samples_csv<S: Scalar, W: Write>(mut w: W, rows: &[SampleRow<S>]) -> io::Result<()> {
    writeln!(w, "{SAMPLES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.step,
            fmt_sig9(r.position[0]),
            fmt_sig9(r.position[1]),
            fmt_sig9(r.energy),
            r.chain_id
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fine() -> PosteriorEnergy<f64> {
        PosteriorEnergy::new(make_two_mode_problem().unwrap(), Fidelity::Fine, Evaluator::Reduced).unwrap()
    }

    #[test]
    fn two_mode_observations_are_equal_and_match_closed_form() {
        let p = make_two_mode_problem::<f64>().unwrap();
        assert_eq!(p.observations[0], p.observations[1]);
        assert!((p.observations[0] - 2.0902697394).abs() < 1e-9);
        for m in two_mode_locations::<f64>() {
            for (f, y) in p.closed_form_readings(m).iter().zip(&p.observations) {
                assert!((f - y).abs() < 1e-4, "{m:?}");
            }
        }
        let [a, b] = two_mode_locations::<f64>();
        assert!((b[0] - a[0] - 2.0 * 0.0175_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn infinite_mode_circle_explains_data() {
        let p = make_infinite_mode_problem::<f64>().unwrap();
        let (c, r) = infinite_mode_circle::<f64>();
        for i in 0..36 {
            let th = std::f64::consts::TAU * i as f64 / 36.0;
            let k = [c[0] + r * th.cos(), c[1] + r * th.sin()];
            assert!((p.closed_form_readings(k)[0] - p.observations[0]).abs() < 1e-10);
            assert!(p.closed_form_energy(k) < 1e-6);
        }
        assert!(p.closed_form_energy([c[0] + 0.3, c[1]]) > 0.0);
    }

    #[test]
    fn energy_is_infinite_outside_the_box() {
        let f = fine();
        assert!(f.posterior_energy([1.01, 0.5]).unwrap().is_infinite());
        assert!(!f.in_support(&[-0.1, 0.4]));
        assert!(f.in_support(&[0.0, 1.0]));
    }

    #[test]
    fn self_consistent_data_has_negligible_energy() {
        let mut p = make_two_mode_problem::<f64>().unwrap();
        let k = [0.41, 0.52];
        let model = PosteriorEnergy::new(p.clone(), Fidelity::Coarse, Evaluator::Reduced).unwrap();
        p.observations = model.readings(k).unwrap();
        let model = PosteriorEnergy::new(p, Fidelity::Coarse, Evaluator::Reduced).unwrap();
        assert!(model.posterior_energy(k).unwrap() < 1e-8 / 0.01);
    }

    #[test]
    fn corner_energy_dwarfs_mode_energy() {
        let f = fine();
        let [a, _] = two_mode_locations();
        let ea = f.posterior_energy(a).unwrap();
        let corner = f.posterior_energy([0.0, 0.0]).unwrap();
        assert!(corner > 100.0 * ea.max(1.0), "{corner} vs {ea}");
    }

    #[test]
    fn reduced_and_time_stepping_agree() {
        let p = make_two_mode_problem::<f64>().unwrap();
        let fast = PosteriorEnergy::new(p.clone(), Fidelity::Coarse, Evaluator::Reduced).unwrap();
        let slow = PosteriorEnergy::new(p, Fidelity::Coarse, Evaluator::TimeStepping).unwrap();
        for k in [[0.3, 0.4], [0.62, 0.45]] {
            let (a, b) = (fast.posterior_energy(k).unwrap(), slow.posterior_energy(k).unwrap());
            assert!((a - b).abs() < 1e-6 * (1.0 + a), "{a} vs {b}");
        }
    }

    #[test]
    fn one_sided_gradient_is_flagged_near_the_edge() {
        let f = fine();
        let interior = f.posterior_gradient([0.4, 0.4]).unwrap();
        assert!(interior.iter().all(|g| g.is_finite()));
        assert_eq!(f.one_sided_gradients(), 0);
        let edge = f.posterior_gradient([0.9995, 0.4]).unwrap();
        assert!(edge.iter().all(|g| g.is_finite()));
        assert_eq!(f.one_sided_gradients(), 1);
    }

    #[test]
    fn sample_csv_has_header_and_nine_digits() {
        let mut out = Vec::new();
        let rows = [SampleRow {
            step: 3,
            position: [0.5, 1.0 / 3.0],
            energy: 2.0,
            chain_id: 1,
        }];
        write_samples_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "step,x,y,energy,chain_id\n3,5.00000000e-1,3.33333333e-1,2.00000000e0,1\n");
    }
}
