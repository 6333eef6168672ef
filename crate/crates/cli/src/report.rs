use std::fmt::Write as _;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
    pub residuals: Vec<(String, f64)>,
    pub notes: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub error: Option<String>,
}

impl Stage {
    pub fn residual(&mut self, name: &str, value: f64) {
        self.residuals.push((name.into(), value));
    }

    pub fn note(&mut self, name: &str, value: impl ToString) {
        self.notes.push((name.into(), value.to_string()));
    }

    /// Passes when `value <= bound`; NaN fails.
    pub fn at_most(&mut self, id: &str, value: f64, bound: f64) -> bool {
        let pass = value <= bound;
        self.checks.push(Check {
            id: id.into(),
            value,
            bound,
            pass,
        });
        pass
    }

    pub fn fail(&mut self, id: &str) {
        self.checks.push(Check {
            id: id.into(),
            value: f64::NAN,
            bound: f64::NAN,
            pass: false,
        });
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub stages: Vec<Stage>,
}

impl RunReport {
    pub fn new(command: &str, scenario: &str) -> Self {
        RunReport {
            command: command.into(),
            scenario: scenario.into(),
            stages: Vec::new(),
        }
    }

    /// Runs one stage, timing it and turning an error into a failed stage.
    /// Returns `None` if the body failed.
    pub fn stage<T>(&mut self, name: &str, body: impl FnOnce(&mut Stage) -> anyhow::Result<T>) -> Option<T> {
        assert!(
            self.stages.iter().all(|s| s.name != name),
            "stage `{name}` recorded twice"
        );
        let mut stage = Stage {
            name: name.into(),
            ..Stage::default()
        };
        let start = Instant::now();
        let out = body(&mut stage);
        stage.seconds = start.elapsed().as_secs_f64();
        let out = match out {
            Ok(v) => Some(v),
            Err(e) => {
                stage.error = Some(format!("{e:#}"));
                None
            }
        };
        self.stages.push(stage);
        out
    }

    /// Records a stage that could not run.
    pub fn skipped(&mut self, name: &str, id: &str, reason: &str) {
        self.stage(name, |s| -> anyhow::Result<()> {
            s.fail(id);
            anyhow::bail!("skipped: {reason}")
        });
    }

    pub fn passed(&self) -> bool {
        self.stages.iter().all(Stage::passed)
    }

    /// Identifiers of failed checks, with `stage:error` for stages that
    /// stopped on an error.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.stages {
            out.extend(s.checks.iter().filter(|c| !c.pass).map(|c| c.id.clone()));
            if s.error.is_some() {
                out.push(format!("{}:error", s.name));
            }
        }
        out
    }

    /// Deterministic text form; wall times are left out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command {}", self.command);
        let _ = writeln!(s, "scenario {}", self.scenario);
        for st in &self.stages {
            let _ = writeln!(s, "stage {}", st.name);
            for (k, v) in &st.notes {
                let _ = writeln!(s, "  note {k} {v}");
            }
            for (k, v) in &st.residuals {
                let _ = writeln!(s, "  residual {k} {v:.6e}");
            }
            for c in &st.checks {
                let _ = writeln!(
                    s,
                    "  check {} {:.6e} <= {:.6e} {}",
                    c.id,
                    c.value,
                    c.bound,
                    if c.pass { "PASS" } else { "FAIL" }
                );
            }
            if let Some(e) = &st.error {
                let _ = writeln!(s, "  error {e}");
            }
        }
        let _ = writeln!(s, "verdict {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    pub fn timings(&self) -> String {
        self.stages
            .iter()
            .map(|s| format!("{} {:.2}s", s.name, s.seconds))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_and_failed_checks_set_the_verdict() {
        let mut r = RunReport::new("verify", "t");
        r.stage("ok", |s| {
            s.at_most("small", 1e-3, 1e-2);
            Ok(())
        });
        assert!(r.passed());
        r.stage("nan", |s| {
            s.at_most("nan-value", f64::NAN, 1.0);
            Ok(())
        });
        r.stage("broken", |_| -> anyhow::Result<()> { anyhow::bail!("no data") });
        assert!(!r.passed());
        assert_eq!(r.failures(), ["nan-value", "broken:error"]);
        let text = r.to_text();
        assert!(text.contains("check small 1.000000e-3 <= 1.000000e-2 PASS"));
        assert!(text.contains("error no data"));
        assert!(text.ends_with("verdict FAIL\n"));
    }

    #[test]
    #[should_panic(expected = "recorded twice")]
    fn stage_names_are_unique() {
        let mut r = RunReport::new("x", "y");
        r.stage("a", |_| Ok(()));
        r.stage("a", |_| Ok(()));
    }
}
