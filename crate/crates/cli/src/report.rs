//! Verification reports. Rendering is deterministic: timings are kept on the
//! checks but never printed.

use std::fmt::Write as _;
use std::time::Duration;

use serde_json::json;

#[derive(Clone, Debug)]
pub struct Check {
    /// Short stable identifier, e.g. `c07-graph-identity`.
    pub id: String,
    pub passed: bool,
    pub detail: String,
    /// Per-instance lines, shown by suites that list instances.
    pub instances: Vec<String>,
    pub elapsed: Duration,
    /// Runtime budget from the acceptance criteria, if any.
    pub time_limit: Option<Duration>,
}

impl Check {
    pub fn new(id: &str, passed: bool, detail: String) -> Self {
        Check { id: id.to_string(), passed, detail, instances: Vec::new(), elapsed: Duration::ZERO, time_limit: None }
    }

    pub fn failed(id: &str, err: impl std::fmt::Display) -> Self {
        Check::new(id, false, format!("error: {err}"))
    }

    pub fn within_time(&self) -> bool {
        self.time_limit.is_none_or(|t| self.elapsed <= t)
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub scale: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render_text(&self, instances: bool) -> String {
        let mut s = format!("suite {} seed {} scale {}\n", self.suite, self.seed, self.scale);
        for c in &self.checks {
            if instances {
                for i in &c.instances {
                    let _ = writeln!(s, "  {i}");
                }
            }
            let _ = writeln!(s, "{}", c.line());
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }

    pub fn render_json(&self, instances: bool) -> String {
        let checks: Vec<_> = self
            .checks
            .iter()
            .map(|c| {
                let mut v = json!({ "id": c.id, "passed": c.passed, "detail": c.detail });
                if instances {
                    v["instances"] = json!(c.instances);
                }
                v
            })
            .collect();
        let doc = json!({ "suite": self.suite, "seed": self.seed, "scale": self.scale, "passed": self.passed(), "checks": checks });
        serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"
    }
}
