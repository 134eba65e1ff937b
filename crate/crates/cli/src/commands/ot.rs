use std::fmt::Write;
use std::path::Path;

use lipflow::transport::{w1_dual, w1_primal, ConstraintMode, DualPotential};

use super::CommandOutput;
use crate::cloud_io::parse_cloud;
use crate::config::manifest_hash;
use crate::output::{fmt_f64, render_csv, Header};
use crate::{CliError, Globals};

const DUALITY_TOL: f64 = 1e-6;

/// W1 between two cloud files, with both dual formulations when the LP fits.
pub fn ot(real: &Path, fake: &Path, g: &Globals) -> Result<CommandOutput, CliError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| CliError::io(p, e));
    let (real_text, fake_text) = (read(real)?, read(fake)?);
    let pr = parse_cloud(&real_text, &real.display().to_string())?;
    let pg = parse_cloud(&fake_text, &fake.display().to_string())?;
    let header = Header::new(g.seed, manifest_hash(&format!("real\n{real_text}fake\n{fake_text}"), g.seed));

    let plan = w1_primal(&pr, &pg).map_err(CliError::core("primal"))?;
    let mut out = CommandOutput::default();
    let mut s = String::new();
    let _ = writeln!(s, "W1 (primal)                 {}", plan.cost);

    let mut duals: Vec<Option<DualPotential>> = Vec::new();
    for mode in [ConstraintMode::SupportRestricted, ConstraintMode::FullLipschitz] {
        match w1_dual(&pr, &pg, mode) {
            Ok(d) => {
                let gap = (d.objective - plan.cost).abs();
                let _ = writeln!(s, "{:<28}{}   |gap| {gap:.3e}", format!("dual ({})", mode.label()), d.objective);
                if gap > DUALITY_TOL {
                    out.failed = true;
                }
                duals.push(Some(d));
            }
            Err(lipflow::Error::ScaleGuard { points, limit }) => {
                let _ = writeln!(s, "{:<28}skipped: {points} support points exceed {limit}", format!("dual ({})", mode.label()));
                duals.push(None);
            }
            Err(e) => return Err(CliError::Core { context: format!("dual {}", mode.label()), source: e }),
        }
    }
    let _ = writeln!(
        s,
        "strong duality within {DUALITY_TOL:e}: {}",
        if out.failed { "NO" } else { "yes" }
    );

    let mut rows = Vec::new();
    for (i, row) in plan.plan.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            if *m > 0.0 {
                rows.push(vec![i.to_string(), j.to_string(), fmt_f64(*m)]);
            }
        }
    }
    out.files.add("plan.csv", render_csv(&header, &["real_index", "fake_index", "mass"], rows));

    let value = |d: &Option<DualPotential>, real: bool, i: usize| {
        d.as_ref().map_or(String::new(), |d| fmt_f64(if real { d.real[i] } else { d.fake[i] }))
    };
    let mut rows = Vec::new();
    for (side, n, real) in [("real", pr.len(), true), ("fake", pg.len(), false)] {
        for i in 0..n {
            rows.push(vec![side.to_string(), i.to_string(), value(&duals[0], real, i), value(&duals[1], real, i)]);
        }
    }
    out.files.add(
        "dual.csv",
        render_csv(&header, &["side", "index", "support_restricted", "full_lipschitz"], rows),
    );
    g.progress(format!("ot: {} real x {} fake points", pr.len(), pg.len()));
    out.stdout = s;
    Ok(out)
}
