//! Product-limit survival curves.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous step function. `probs[k]` is S(t) on
/// `[times[k], times[k+1])`; S(t) = 1 before `times[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    pub times: Vec<f64>,
    pub probs: Vec<f64>,
}

impl StepSurvival {
    pub fn eval(&self, t: f64) -> f64 {
        km_eval(self, t)
    }

    /// Two-column `time,survival` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,survival")?;
        for (t, s) in self.times.iter().zip(&self.probs) {
            writeln!(w, "{t},{s}")?;
        }
        Ok(())
    }
}

/// Kaplan-Meier estimate. Steps occur only at event times; a censoring at
/// the same time as events stays in that risk set.
pub fn km_estimate(times: &[f64], events: &[bool]) -> Result<StepSurvival> {
    if times.len() != events.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            actual: events.len(),
        });
    }
    if times.is_empty() {
        return Err(Error::InvalidArgument(
            "Kaplan-Meier needs at least one observation".into(),
        ));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidArgument(format!("invalid time {t}")));
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut curve = StepSurvival {
        times: Vec::new(),
        probs: Vec::new(),
    };
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0;
        let mut leaving = 0;
        while i < order.len() && times[order[i]] == t {
            deaths += events[order[i]] as usize;
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            curve.times.push(t);
            curve.probs.push(surv);
        }
        at_risk -= leaving;
    }
    Ok(curve)
}

/// Step lookup; the value at a jump time is the post-jump value.
pub fn km_eval(curve: &StepSurvival, t: f64) -> f64 {
    match curve.times.partition_point(|&u| u <= t) {
        0 => 1.0,
        k => curve.probs[k - 1],
    }
}
