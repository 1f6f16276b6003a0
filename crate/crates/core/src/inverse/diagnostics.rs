//! How well a set of samples covers the known solutions of an inverse problem.

use crate::fem::Point;
use crate::Scalar;

use super::InverseError;

pub const MIN_SAMPLES: usize = 100;
pub const ANGULAR_BINS: usize = 36;

#[derive(Clone, Debug, PartialEq)]
pub enum ModeTarget<S> {
    /// Isolated solutions.
    Points(Vec<Point<S>>),
    /// A continuum of solutions on a circle.
    Circle { center: Point<S>, radius: S },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeDiagnostics<S> {
    pub samples: Vec<Point<S>>,
    pub target: ModeTarget<S>,
    pub capture_radius: S,
}

impl<S: Scalar> ModeDiagnostics<S> {
    /// Drops the first `burn_in` fraction of `trajectory`.
    pub fn after_burn_in(
        trajectory: &[Point<S>],
        burn_in: f64,
        target: ModeTarget<S>,
        capture_radius: S,
    ) -> Result<Self, InverseError> {
        if !(0.0..1.0).contains(&burn_in) {
            return Err(InverseError::BurnIn(burn_in));
        }
        let skip = (burn_in * trajectory.len() as f64).floor() as usize;
        Ok(Self {
            samples: trajectory[skip..].to_vec(),
            target,
            capture_radius,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoverageReport {
    Modes {
        /// Fraction of samples within the capture radius of each mode.
        hit_fractions: Vec<f64>,
        n_samples: usize,
    },
    Circle {
        /// Fraction of angular bins holding at least one sample near the circle.
        angular_coverage: f64,
        bins_hit: usize,
        /// Fraction of samples within the capture radius of the circle.
        near_fraction: f64,
        n_samples: usize,
    },
}

fn dist<S: Scalar>(a: Point<S>, b: Point<S>) -> f64 {
    let dx = (a[0] - b[0]).as_f64();
    let dy = (a[1] - b[1]).as_f64();
    dx.hypot(dy)
}

pub fn mode_coverage<S: Scalar>(diag: &ModeDiagnostics<S>) -> Result<CoverageReport, InverseError> {
    let n = diag.samples.len();
    if n == 0 {
        return Err(InverseError::EmptySamples);
    }
    if n < MIN_SAMPLES {
        return Err(InverseError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let cap = diag.capture_radius.as_f64();
    match &diag.target {
        ModeTarget::Points(modes) => {
            let hit_fractions = modes
                .iter()
                .map(|&m| diag.samples.iter().filter(|&&s| dist(s, m) <= cap).count() as f64 / n as f64)
                .collect();
            Ok(CoverageReport::Modes {
                hit_fractions,
                n_samples: n,
            })
        }
        ModeTarget::Circle { center, radius } => {
            let mut bins = [false; ANGULAR_BINS];
            let mut near = 0usize;
            for &s in &diag.samples {
                let r = dist(s, *center);
                if (r - radius.as_f64()).abs() > cap {
                    continue;
                }
                near += 1;
                let angle = (s[1] - center[1]).as_f64().atan2((s[0] - center[0]).as_f64());
                let turn = angle.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
                let bin = ((turn * ANGULAR_BINS as f64) as usize).min(ANGULAR_BINS - 1);
                bins[bin] = true;
            }
            let bins_hit = bins.iter().filter(|&&b| b).count();
            Ok(CoverageReport::Circle {
                angular_coverage: bins_hit as f64 / ANGULAR_BINS as f64,
                bins_hit,
                near_fraction: near as f64 / n as f64,
                n_samples: n,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const MODES: [Point<f64>; 2] = [[0.3677, 0.45], [0.6323, 0.45]];

    fn fractions(samples: Vec<Point<f64>>) -> Vec<f64> {
        let d = ModeDiagnostics {
            samples,
            target: ModeTarget::Points(MODES.to_vec()),
            capture_radius: 0.05,
        };
        match mode_coverage(&d).unwrap() {
            CoverageReport::Modes { hit_fractions, .. } => hit_fractions,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_mode_samples() {
        assert_eq!(fractions(vec![MODES[0]; 150]), vec![1.0, 0.0]);
    }

    #[test]
    fn jittered_even_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let jitter = Normal::new(0.0, 0.01).unwrap();
        let samples: Vec<Point<f64>> = (0..2000)
            .map(|i| {
                let m = MODES[i % 2];
                [m[0] + jitter.sample(&mut rng), m[1] + jitter.sample(&mut rng)]
            })
            .collect();
        for f in fractions(samples) {
            assert!((0.45..=0.55).contains(&f), "{f}");
        }
    }

    #[test]
    fn uniform_circle_samples_cover_every_bin() {
        let samples: Vec<Point<f64>> = (0..360)
            .map(|i| {
                let th = std::f64::consts::TAU * (i as f64 + 0.5) / 360.0;
                [0.5 + 0.2 * th.cos(), 0.3 + 0.2 * th.sin()]
            })
            .collect();
        let d = ModeDiagnostics {
            samples,
            target: ModeTarget::Circle {
                center: [0.5, 0.3],
                radius: 0.2,
            },
            capture_radius: 0.05,
        };
        match mode_coverage(&d).unwrap() {
            CoverageReport::Circle {
                angular_coverage,
                near_fraction,
                ..
            } => {
                assert_eq!(angular_coverage, 1.0);
                assert_eq!(near_fraction, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_and_short_sample_sets_are_rejected() {
        let mut d = ModeDiagnostics::<f64> {
            samples: vec![],
            target: ModeTarget::Points(MODES.to_vec()),
            capture_radius: 0.05,
        };
        assert!(matches!(mode_coverage(&d), Err(InverseError::EmptySamples)));
        d.samples = vec![MODES[0]; 10];
        assert!(matches!(mode_coverage(&d), Err(InverseError::TooFewSamples { got: 10, .. })));
    }

    #[test]
    fn burn_in_drops_the_leading_fraction() {
        let traj: Vec<Point<f64>> = (0..10).map(|i| [i as f64, 0.0]).collect();
        let d = ModeDiagnostics::after_burn_in(&traj, 0.5, ModeTarget::Points(vec![]), 0.1).unwrap();
        assert_eq!(d.samples[0], [5.0, 0.0]);
        assert!(ModeDiagnostics::after_burn_in(&traj, 1.0, ModeTarget::Points(vec![]), 0.1).is_err());
    }
}
