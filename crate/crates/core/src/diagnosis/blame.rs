//! The blame distribution and its Bayesian update.

use serde::{Deserialize, Serialize};

use super::{DiagnosisConfig, DiagnosisError, FailTime, Fpf, Mom, NO_FAULT};
use crate::memory::{CallProfileMatrix, ExecutionRecord, SensorMatrix};

/// One test execution as seen by the diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub skill: String,
    pub success: bool,
    pub sensor: SensorMatrix,
    pub profile: CallProfileMatrix,
}

impl From<&ExecutionRecord> for Observation {
    fn from(r: &ExecutionRecord) -> Self {
        Observation {
            skill: r.subject.clone(),
            success: r.success,
            sensor: r.sensor.clone(),
            profile: r.profile.clone(),
        }
    }
}

/// `p(o | hypothesis)` for a function id or [`NO_FAULT`]. `fail_time` is
/// the estimated failure tick of a failed observation.
pub fn likelihood(
    o: &Observation,
    hypothesis: &str,
    fail_time: Option<FailTime>,
    fpf: &Fpf,
    config: &DiagnosisConfig,
) -> f64 {
    if hypothesis == NO_FAULT {
        return if o.success { config.beta_high } else { config.epsilon_bg };
    }
    let last_active = o.profile.last_active(hypothesis);
    match (o.success, last_active) {
        (true, Some(_)) => config.beta_low,
        (true, None) => config.beta_high,
        (false, None) => config.epsilon_bg,
        (false, Some(last)) => {
            let t_fail = fail_time.map(|f| f.tick as usize).unwrap_or(o.sensor.ticks().saturating_sub(1));
            let distance = (last as f64 - t_fail as f64).abs();
            let dev = fpf.deviation(&o.profile, hypothesis, t_fail);
            (-distance / config.lambda_t).exp() * (1.0 + config.kappa * dev)
        }
    }
}

/// Posterior over the instrumented functions plus the no-fault hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlameDistribution {
    pub hypotheses: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl BlameDistribution {
    /// Uniform over `functions` and [`NO_FAULT`], which comes last.
    pub fn uniform(functions: &[String]) -> Self {
        let mut hypotheses = functions.to_vec();
        hypotheses.push(NO_FAULT.to_string());
        let p = 1.0 / hypotheses.len() as f64;
        BlameDistribution {
            probabilities: vec![p; hypotheses.len()],
            hypotheses,
        }
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn probability(&self, hypothesis: &str) -> Option<f64> {
        self.hypotheses
            .iter()
            .position(|h| h == hypothesis)
            .map(|i| self.probabilities[i])
    }

    /// Most probable hypothesis; the earlier one on ties.
    pub fn argmax(&self) -> (&str, f64) {
        let i = crate::playing::argmax(&self.probabilities);
        (&self.hypotheses[i], self.probabilities[i])
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probabilities)
    }

    /// Posterior proportional to `likelihoods[i] * prior[i]`.
    pub fn update(&self, likelihoods: &[f64]) -> Result<Self, DiagnosisError> {
        if likelihoods.len() != self.len() {
            return Err(DiagnosisError::HypothesisMismatch {
                got: likelihoods.len(),
                expected: self.len(),
            });
        }
        let unnormalized: Vec<f64> = self.probabilities.iter().zip(likelihoods).map(|(p, l)| p * l).collect();
        let total: f64 = unnormalized.iter().sum();
        assert!(total > 0.0, "posterior mass vanished");
        Ok(BlameDistribution {
            hypotheses: self.hypotheses.clone(),
            probabilities: unnormalized.iter().map(|x| x / total).collect(),
        })
    }

    /// Likelihoods of `o` under every hypothesis.
    pub fn likelihoods(
        &self,
        o: &Observation,
        fail_time: Option<FailTime>,
        fpf: &Fpf,
        config: &DiagnosisConfig,
    ) -> Vec<f64> {
        self.hypotheses
            .iter()
            .map(|h| likelihood(o, h, fail_time, fpf, config))
            .collect()
    }

    /// Bayesian update with one observation of skill `o.skill`.
    pub fn observe(&self, o: &Observation, mom: &Mom, fpf: &Fpf, config: &DiagnosisConfig) -> Result<(Self, Option<FailTime>), DiagnosisError> {
        let fail_time = if o.success {
            None
        } else {
            Some(mom.estimate_fail_time(&o.sensor)?)
        };
        let posterior = self.update(&self.likelihoods(o, fail_time, fpf, config))?;
        Ok((posterior, fail_time))
    }

    /// Hypotheses sorted by descending probability.
    pub fn report(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .hypotheses
            .iter()
            .cloned()
            .zip(self.probabilities.iter().copied())
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

/// Shannon entropy in nats.
pub(crate) fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|x| **x > 0.0).map(|x| -x * x.ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blame3() -> BlameDistribution {
        BlameDistribution::uniform(&["a".to_string(), "b".to_string()])
    }

    #[test]
    fn uniform_prior_is_proportional_to_likelihood() {
        let post = blame3().update(&[0.8, 0.1, 0.1]).unwrap();
        for (p, e) in post.probabilities.iter().zip([0.8, 0.1, 0.1]) {
            assert!((p - e).abs() < 1e-15);
        }
        let prior = BlameDistribution {
            hypotheses: blame3().hypotheses,
            probabilities: vec![0.5, 0.3, 0.2],
        };
        let unchanged = prior.update(&[0.4, 0.4, 0.4]).unwrap();
        for (p, q) in unchanged.probabilities.iter().zip(&prior.probabilities) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    fn observation(success: bool) -> Observation {
        // f active at ticks 10..=12, g at 0..=2, h never; 13 ticks
        let ticks = 13;
        let mut counts = vec![0u32; 3 * ticks];
        counts[10..13].iter_mut().for_each(|c| *c = 1);
        counts[ticks..ticks + 3].iter_mut().for_each(|c| *c = 1);
        Observation {
            skill: "s".into(),
            success,
            sensor: SensorMatrix::new(vec!["a".into()], ticks, vec![0.0; ticks]).unwrap(),
            profile: CallProfileMatrix::new(vec!["f".into(), "g".into(), "h".into()], ticks, counts).unwrap(),
        }
    }

    fn fpf() -> Fpf {
        Fpf {
            skill: "s".into(),
            functions: vec![],
            ticks: 0,
            mean: vec![],
            variance: vec![],
        }
    }

    #[test]
    fn likelihood_rules() {
        let cfg = DiagnosisConfig::default();
        let failed = observation(false);
        let at = Some(FailTime { tick: 12, low_confidence: false });
        assert_eq!(likelihood(&failed, "h", at, &fpf(), &cfg), 0.01);
        let ratio = likelihood(&failed, "f", at, &fpf(), &cfg) / likelihood(&failed, "g", at, &fpf(), &cfg);
        assert!((ratio - 2f64.exp()).abs() < 1e-12);
        assert_eq!(likelihood(&failed, NO_FAULT, at, &fpf(), &cfg), 0.01);
        let ok = observation(true);
        assert_eq!(likelihood(&ok, "f", None, &fpf(), &cfg), 0.1);
        assert_eq!(likelihood(&ok, "h", None, &fpf(), &cfg), 0.9);
        assert_eq!(likelihood(&ok, NO_FAULT, None, &fpf(), &cfg), 0.9);
    }

    #[test]
    fn report_is_sorted() {
        let b = blame3().update(&[0.1, 0.7, 0.2]).unwrap();
        let r = b.report();
        assert_eq!(r[0].0, "b");
        assert_eq!(b.argmax().0, "b");
    }
}
