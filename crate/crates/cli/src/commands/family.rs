use std::fmt::Write;

use lipflow::geometry::Rng;
use lipflow::objectives::{builtin_objective, check_membership, default_probe_grid};

use super::CommandOutput;
use crate::{CliError, Globals};

/// Random probes added to the fixed membership grid.
const EXTRA_PROBES: usize = 1000;

pub fn family(name: &str, param: Option<f64>, g: &Globals) -> Result<CommandOutput, CliError> {
    let obj = builtin_objective(name, param).map_err(CliError::core("family"))?;
    let grid = default_probe_grid(EXTRA_PROBES, &mut Rng::new(g.seed));
    let report = check_membership(&obj, &grid).map_err(CliError::core(format!("family {name}")))?;
    let mut s = String::new();
    if report.is_member {
        let anchor = report.anchor_a.map_or("none".to_string(), |a| a.to_string());
        let _ = writeln!(s, "{}: member (anchor a = {anchor})", report.objective);
    } else {
        let _ = writeln!(s, "{}: not a member", report.objective);
        for (cond, count, first) in report.summary() {
            let _ = writeln!(
                s,
                "  violation: {cond} fails at {count} probes; first at x = {} (observed {})",
                first.at, first.observed
            );
        }
        if report.violations.is_empty() {
            let _ = writeln!(s, "  violation: no anchor a with phi'(a)+varphi'(a)=0");
        }
    }
    Ok(CommandOutput {
        stdout: s,
        ..CommandOutput::default()
    })
}
