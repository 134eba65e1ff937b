use std::fmt::Write;

use lipflow::verify::{run_suite, SuiteConfig};

use super::CommandOutput;
use crate::config::RunManifest;
use crate::output::Header;
use crate::{CliError, Globals};

/// Suite settings from a manifest: the flow check reuses the manifest's
/// training setup, the fixed-cloud discriminator uses the suite defaults
/// with the manifest's objective and step count.
pub fn suite_config(m: &RunManifest) -> Result<SuiteConfig, CliError> {
    let mut s = SuiteConfig::new(m.scenario.clone(), m.seed).map_err(CliError::core("verify"))?;
    s.discriminator.objective = m.train.objective.clone();
    s.discriminator.d_steps = m.verify.discriminator_steps;
    s.flow = m.train.clone();
    s.bounding_tol = m.verify.bounding_tol;
    s.gradient_tol = m.verify.gradient_tol;
    s.interp_pairs = m.verify.pairs;
    s.interp_steps = m.verify.interp_steps;
    s.nash_tol_w = m.verify.nash_tol_w;
    s.nash_tol_k = m.verify.nash_tol_k;
    Ok(s)
}

/// Writes `report.csv` (`theorem_id,pass,detail` records) and `report.json`
/// (`{header, reports}`).
/// Fails when any check disagrees with its expectation.
pub fn verify(m: &RunManifest, g: &Globals) -> Result<CommandOutput, CliError> {
    let cfg = suite_config(m)?;
    g.progress(format!("verify {}: running suite", m.output.name));
    let reports = run_suite(&cfg).map_err(CliError::core(format!("verify {}", m.output.name)))?;
    let header = Header::new(m.seed, m.hash.clone());
    let mut out = CommandOutput::default();
    let mut csv = header.csv_comment();
    let mut summary = String::new();
    for r in &reports {
        csv.push_str(&r.to_record());
        csv.push('\n');
        let verdict = match (r.pass, r.expect_pass) {
            (true, true) => "PASS",
            (false, false) => "FAIL (expected)",
            (true, false) => "PASS (unexpected)",
            (false, true) => "FAIL",
        };
        let _ = writeln!(summary, "{verdict:<18} {:<24} {}", r.id, r.detail);
        if !r.as_expected() {
            out.failed = true;
        }
    }
    // JSON has no comments, so the header is the first field
    let doc = serde_json::json!({ "header": header.text(), "reports": reports });
    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Usage(format!("report json: {e}")))?;
    out.files.add("report.csv", csv);
    out.files.add("report.json", json);
    let bad = reports.iter().filter(|r| !r.as_expected()).count();
    let _ = writeln!(summary, "{} checks, {bad} unexpected outcomes", reports.len());
    out.stdout = summary;
    Ok(out)
}
