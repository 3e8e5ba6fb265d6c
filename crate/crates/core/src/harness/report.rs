use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::scenario::{Method, Scenario, Tolerance};

/// One method's value for the scenario's duality function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityEstimate {
    pub method: Method,
    /// Method tag, with a suffix when a method reports several values.
    pub label: String,
    pub value: f64,
    /// Zero for exact methods.
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_fraction: Option<f64>,
    /// Systematic error allowance (oracle leakage, measured time-step shift).
    pub bias: f64,
    pub runtime_s: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
}

impl DualityEstimate {
    pub fn exact(method: Method, value: f64) -> Self {
        Self {
            method,
            label: method.as_str().to_string(),
            value,
            stderr: 0.0,
            leakage: None,
            blowup_fraction: None,
            bias: 0.0,
            runtime_s: 0.0,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn sampled(method: Method, value: f64, stderr: f64) -> Self {
        Self {
            stderr,
            ..Self::exact(method, value)
        }
    }

    pub fn labelled(mut self, suffix: &str) -> Self {
        self.label = format!("{}:{suffix}", self.method);
        self
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.leakage = Some(leakage);
        self.bias += leakage;
        self
    }

    pub fn with_diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub diff: f64,
    /// `|a - b| / sqrt(se_a^2 + se_b^2)`; 0 for equal values, absent for
    /// distinct exact values.
    pub z: Option<f64>,
    pub allowed: f64,
    pub pass: bool,
}

/// All-pairs comparison under `tol`.
pub fn compare(estimates: &[DualityEstimate], tol: &Tolerance) -> Vec<PairComparison> {
    let mut out = Vec::new();
    for (i, a) in estimates.iter().enumerate() {
        for b in &estimates[i + 1..] {
            let diff = (a.value - b.value).abs();
            let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
            let z = if diff == 0.0 {
                Some(0.0)
            } else if se > 0.0 {
                Some(diff / se)
            } else {
                None
            };
            let allowed = tol.sigmas * se
                + tol.abs_tol
                + tol.rel_tol * a.value.abs().max(b.value.abs())
                + a.bias
                + b.bias;
            out.push(PairComparison {
                a: a.label.clone(),
                b: b.label.clone(),
                diff,
                z,
                allowed,
                pass: diff <= allowed,
            });
        }
    }
    out
}

/// A scalar diagnostic with a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Pass iff `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    /// Pass iff `value < threshold` or `value == 0`.
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value < threshold || value == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: Method,
    /// `numerical`, `blowup`, `estimation`, `validation`, ...
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario: Scenario,
    pub seed: u64,
    pub estimates: Vec<DualityEstimate>,
    pub comparisons: Vec<PairComparison>,
    pub checks: Vec<Check>,
    pub failures: Vec<MethodFailure>,
    pub pass: bool,
    pub runtime_s: f64,
}

impl ComparisonReport {
    pub fn finalize(&mut self) {
        self.pass = self.failures.is_empty()
            && self.comparisons.iter().all(|c| c.pass)
            && self.checks.iter().all(|c| c.pass)
            && !self.estimates.is_empty();
    }

    pub fn has_numerical_failure(&self) -> bool {
        self.failures.iter().any(|f| f.kind == "numerical")
    }

    /// Same report with every timing set to zero.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.runtime_s = 0.0;
        r.estimates.iter_mut().for_each(|e| e.runtime_s = 0.0);
        r
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// CSV columns: method, value, stderr, leakage, blowup_fraction, runtime_s.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "method",
            "value",
            "stderr",
            "leakage",
            "blowup_fraction",
            "runtime_s",
        ])?;
        for e in &self.estimates {
            wtr.write_record([
                e.label.clone(),
                format!("{:.15e}", e.value),
                format!("{:.6e}", e.stderr),
                opt(e.leakage),
                opt(e.blowup_fraction),
                format!("{:.3}", e.runtime_s),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} seed={} {} ({:.1}s)\n",
            self.scenario.name,
            self.seed,
            if self.pass { "PASS" } else { "FAIL" },
            self.runtime_s
        );
        for e in &self.estimates {
            s.push_str(&format!(
                "  {:<34} {:>+.10} +- {:.2e}",
                e.label, e.value, e.stderr
            ));
            if let Some(l) = e.leakage {
                s.push_str(&format!("  leakage {l:.1e}"));
            }
            if let Some(b) = e.blowup_fraction {
                s.push_str(&format!("  blowup {b:.3}"));
            }
            s.push('\n');
        }
        for c in &self.comparisons {
            s.push_str(&format!(
                "  {} {} vs {}: |diff| {:.2e} allowed {:.2e}{}\n",
                if c.pass { "ok  " } else { "FAIL" },
                c.a,
                c.b,
                c.diff,
                c.allowed,
                c.z.map(|z| format!(" z {z:.2}")).unwrap_or_default()
            ));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "  {} {}: {:.3e} (threshold {:.1e})\n",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            ));
        }
        for f in &self.failures {
            s.push_str(&format!(
                "  FAIL {} [{}]: {}\n",
                f.method, f.kind, f.message
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compare_examples() {
        let tol = Tolerance::default();
        let a = DualityEstimate::exact(Method::Oracle, 0.7);
        let b = DualityEstimate::exact(Method::PairingSum, 0.7);
        let c = compare(&[a, b], &tol);
        assert!(c[0].pass && c[0].z == Some(0.0));

        let a = DualityEstimate::sampled(Method::ParticleMc, 1.00, 0.01);
        let b = DualityEstimate::sampled(Method::SpdeEnsemble, 1.05, 0.01);
        let c = compare(&[a, b], &tol);
        assert!((c[0].z.unwrap() - 3.5355).abs() < 1e-3 && !c[0].pass);

        let a = DualityEstimate::exact(Method::Oracle, 0.5);
        let b = DualityEstimate::sampled(Method::ParticleMc, 0.5003, 0.002);
        assert!(compare(&[a, b], &tol)[0].pass);
    }
}
