//! Perihelion passages and apsidal precession.
//!
//! A perihelion is a crossing of the radial velocity `x·ẋ` from negative to
//! positive. Values within `1e-12·|x|·|ẋ|` of zero count as neither sign, so a
//! circular orbit produces no events.

use serde::{Deserialize, Serialize};

use super::{dense, wrap_angle, PlaneBasis, Sample, Trajectory};
use crate::dynamics::FlowField;
use crate::error::{Error, Result};

const CHATTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Perihelion {
    pub t: f64,
    /// Continuous polar angle in the orbital plane.
    pub angle: f64,
    pub radius: f64,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecessionEstimate {
    /// Mean perihelion advance per orbit beyond a full turn (radians).
    pub mean: f64,
    pub stddev: f64,
    pub gaps: usize,
}

/// Incremental perihelion detector over a growing sample list.
#[derive(Debug, Clone, Default)]
pub struct PerihelionTracker {
    next: usize,
    basis: Option<PlaneBasis>,
    angles: Vec<f64>,
    raw_prev: f64,
    last_negative: Option<usize>,
    events: Vec<Perihelion>,
}

fn interpolate(samples: &[Sample], lo: usize, hi: usize, t: f64, out: &mut [f64]) {
    let (mut a, mut b) = (lo, hi);
    while b - a > 1 {
        let mid = (a + b) / 2;
        if samples[mid].t <= t {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (p, q) = (&samples[a], &samples[b]);
    dense::hermite(p.t, &p.y, &p.dy, q.t, &q.y, &q.dy, t, out);
}

impl PerihelionTracker {
    pub fn events(&self) -> &[Perihelion] {
        &self.events
    }

    pub fn into_events(self) -> Vec<Perihelion> {
        self.events
    }

    /// Processes every sample not seen yet. `span` sets the refinement tolerance (`1e-10·span`).
    pub fn push(&mut self, field: &FlowField, samples: &[Sample], span: f64) {
        if samples.is_empty() {
            return;
        }
        let basis = *self
            .basis
            .get_or_insert_with(|| PlaneBasis::new(field, &samples[0].y));
        while self.next < samples.len() {
            let i = self.next;
            let y = &samples[i].y;
            let raw = basis.angle(&field.position(y));
            let unwrapped = if i == 0 {
                raw
            } else {
                self.angles[i - 1] + wrap_angle(raw - self.raw_prev)
            };
            self.angles.push(unwrapped);
            self.raw_prev = raw;

            let g = field.radial_indicator(y);
            let thr = CHATTER * field.position(y).norm() * field.conjugate(y).norm();
            if g < -thr {
                self.last_negative = Some(i);
            } else if g > thr {
                if let Some(j) = self.last_negative.take() {
                    let ev = self.refine(field, samples, j, i, span, &basis);
                    self.events.push(ev);
                }
            }
            self.next += 1;
        }
    }

    fn refine(
        &self,
        field: &FlowField,
        samples: &[Sample],
        j: usize,
        i: usize,
        span: f64,
        basis: &PlaneBasis,
    ) -> Perihelion {
        let mut y = vec![0.0; samples[j].y.len()];
        let (mut lo, mut hi) = (samples[j].t, samples[i].t);
        let tol = 1e-10 * span.abs();
        // bisect to the stated tolerance, then on to machine resolution
        let mut iter = 0;
        while iter < 400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            interpolate(samples, j, i, mid, &mut y);
            if field.radial_indicator(&y) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iter += 1;
            if hi - lo <= tol * 1e-6 {
                break;
            }
        }
        debug_assert!(hi - lo <= tol.max(f64::EPSILON * hi.abs()));
        let t = 0.5 * (lo + hi);
        interpolate(samples, j, i, t, &mut y);
        let x = field.position(&y);
        // locate the sample interval containing t for the unwrapped angle
        let mut k = j;
        while k + 1 < i && samples[k + 1].t <= t {
            k += 1;
        }
        let raw_k = basis.angle(&field.position(&samples[k].y));
        let angle = self.angles[k] + wrap_angle(basis.angle(&x) - raw_k);
        Perihelion {
            t,
            angle,
            radius: x.norm(),
            y,
        }
    }
}

/// Perihelion passages of a trajectory, refined on its Hermite dense output.
pub fn detect_perihelion(traj: &Trajectory) -> Vec<Perihelion> {
    let mut tracker = PerihelionTracker::default();
    tracker.push(&traj.field, &traj.samples, traj.t_end() - traj.t_start());
    tracker.into_events()
}

/// Mean and spread of successive perihelion angle gaps minus a full turn.
pub fn precession_estimate(events: &[Perihelion]) -> Result<PrecessionEstimate> {
    if events.len() < 3 {
        return Err(Error::InsufficientEvents {
            needed: 3,
            found: events.len(),
        });
    }
    let gaps: Vec<f64> = events
        .windows(2)
        .map(|w| (w[1].angle - w[0].angle).abs() - std::f64::consts::TAU)
        .collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(PrecessionEstimate {
        mean,
        stddev: var.sqrt(),
        gaps: gaps.len(),
    })
}
