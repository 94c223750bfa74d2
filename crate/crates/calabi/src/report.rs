//! Machine-readable verification reports.
//!
//! Reports serialize to a canonical JSON form (fixed field order, floats
//! printed with 17 significant digits) and to CSV, so that identical inputs
//! produce byte-identical output. Wall-clock runtime is kept out of the
//! serialized forms for the same reason; it is reported separately.

/// Outcome of one named check, aggregated over all sample points.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Empty, or a "skipped: …" / "error: …" annotation.
    pub note: String,
}

impl CheckResult {
    /// A check that ran: passes iff the relative residual is within tolerance.
    pub fn measured(name: &str, max_abs: f64, max_rel: f64, tolerance: f64) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            max_abs_residual: max_abs,
            max_rel_residual: max_rel,
            tolerance,
            pass: max_rel <= tolerance,
            note: String::new(),
        }
    }

    /// A check that does not apply to this spec.
    pub fn skipped(name: &str, tolerance: f64, reason: &str) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            max_abs_residual: 0.0,
            max_rel_residual: 0.0,
            tolerance,
            pass: true,
            note: format!("skipped: {reason}"),
        }
    }

    /// A check that could not run because the engine failed.
    pub fn errored(name: &str, tolerance: f64, message: &str) -> CheckResult {
        CheckResult {
            name: name.to_string(),
            max_abs_residual: f64::INFINITY,
            max_rel_residual: f64::INFINITY,
            tolerance,
            pass: false,
            note: format!("error: {message}"),
        }
    }
}

/// A complete verification run: deterministic under (spec, samples, seed).
#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub spec_id: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
    /// Wall-clock seconds; excluded from canonical serializations.
    pub runtime_seconds: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Sorts checks by name; the canonical report order.
    pub fn finalize(mut self) -> Self {
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        self
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"spec_id\": {},\n", json_string(&self.spec_id)));
        out.push_str(&format!("  \"seed\": {},\n", self.seed));
        out.push_str(&format!("  \"samples\": {},\n", self.samples));
        out.push_str(&format!("  \"tolerance\": {},\n", json_f64(self.tolerance)));
        out.push_str(&format!("  \"passed\": {},\n", self.passed()));
        out.push_str("  \"checks\": [\n");
        for (i, c) in self.checks.iter().enumerate() {
            out.push_str(&format!(
                "    {{\"name\": {}, \"max_abs_residual\": {}, \"max_rel_residual\": {}, \
                 \"tolerance\": {}, \"pass\": {}, \"note\": {}}}{}\n",
                json_string(&c.name),
                json_f64(c.max_abs_residual),
                json_f64(c.max_rel_residual),
                json_f64(c.tolerance),
                c.pass,
                json_string(&c.note),
                if i + 1 < self.checks.len() { "," } else { "" }
            ));
        }
        out.push_str("  ]\n}\n");
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,max_abs_residual,max_rel_residual,tolerance,pass,note\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                csv_field(&c.name),
                csv_f64(c.max_abs_residual),
                csv_f64(c.max_rel_residual),
                csv_f64(c.tolerance),
                c.pass,
                csv_field(&c.note)
            ));
        }
        out
    }

    /// One human-readable line per check.
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let status = if c.pass { "PASS" } else { "FAIL" };
                let note = if c.note.is_empty() {
                    String::new()
                } else {
                    format!("  [{}]", c.note)
                };
                format!(
                    "{status}  {:<40} rel {:>12.3e}  tol {:>8.1e}{note}",
                    c.name, c.max_rel_residual, c.tolerance
                )
            })
            .collect()
    }
}

/// Floats with 17 significant digits; non-finite values become JSON null.
fn json_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn csv_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
