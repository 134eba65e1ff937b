use std::fmt::Write;

use lipflow::closed_form::{density_value, fstar_grad, fstar_value, AnalyticDensity, ClosedFormSpec};
use lipflow::dynamics::{particle_gradients, run_with, value_surface, FlowState, Lattice};
use lipflow::geometry::{Point, Rng};
use lipflow::scenario::Sides;

use super::CommandOutput;
use crate::config::{FieldConfig, RunManifest};
use crate::output::{fmt_f64, render_csv, Header};
use crate::svg::{heatmap, quiver, View};
use crate::{CliError, Globals};

/// Runs one manifest: the particle flow for cloud scenarios, or the
/// closed-form fields for density scenarios.
pub fn flow(m: &RunManifest, g: &Globals) -> Result<CommandOutput, CliError> {
    let header = Header::new(m.seed, m.hash.clone());
    match &m.scenario.sides {
        Sides::Densities { real, fake } => closed_form_fields(&header, &m.fields, fake, real),
        Sides::Clouds { .. } => particle_flow(m, &header, g),
    }
}

/// Runs manifests on separate threads; results keep the input order.
pub fn flow_many(manifests: &[RunManifest], g: &Globals) -> Vec<Result<CommandOutput, CliError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = manifests.iter().map(|m| scope.spawn(move || flow(m, g))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Usage("flow worker panicked".into()))))
            .collect()
    })
}

fn snapshot_due(iteration: usize, every: usize, last: usize) -> bool {
    iteration == 0 || iteration == last || (every > 0 && iteration % every == 0)
}

fn particle_flow(m: &RunManifest, header: &Header, g: &Globals) -> Result<CommandOutput, CliError> {
    let cfg = &m.train;
    let (real, fake) = m.scenario.clouds().map_err(CliError::core("flow"))?;
    let dim = real.dim();
    let view = View::around(real.points().iter().chain(fake.points()), 0.5);
    let lattice = if dim == 2 {
        Some(Lattice::around(real, fake, 0.5, m.output.grid).map_err(CliError::core("flow lattice"))?)
    } else {
        None
    };
    let mut out = CommandOutput::default();
    let mut trajectory = Vec::new();
    let last = cfg.outer_iters;
    let name = &m.output.name;

    let observe = |state: &FlowState| -> lipflow::Result<()> {
        let it = state.iteration;
        if it % m.output.trajectory_every == 0 || it == last {
            for (i, p) in state.particles.points().iter().enumerate() {
                let mut row = vec![it.to_string(), i.to_string()];
                row.extend(p.coords().iter().map(|c| fmt_f64(*c)));
                trajectory.push(row);
            }
        }
        if snapshot_due(it, m.output.snapshot_every, last) {
            let arrows = particle_gradients(&state.net, &state.particles)?;
            let title = format!("{name} iteration {it}");
            out.files.add(format!("quiver_{it:05}.svg"), quiver(header, &title, &view, real.points(), &arrows));
            if let Some(lat) = &lattice {
                let values = value_surface(&state.net, lat)?;
                out.files.add(
                    format!("surface_{it:05}.svg"),
                    heatmap(header, &title, lat, &values, real.points(), state.particles.points()),
                );
            }
        }
        if it % 50 == 0 {
            let mrow = state.last_metrics();
            g.progress(format!("{name}: iteration {it} W1 {:.5} k {:.4}", mrow.w1, mrow.k_emp));
        }
        Ok(())
    };
    let mut rng = Rng::new(m.seed);
    let state = run_with(&m.scenario, cfg, &mut rng, observe).map_err(CliError::core(format!("flow {name}")))?;

    let mut cols: Vec<String> = vec!["iteration".into(), "particle".into()];
    cols.extend((0..dim).map(|d| format!("x{d}")));
    let cols_ref: Vec<&str> = cols.iter().map(String::as_str).collect();
    out.files.add("trajectory.csv", render_csv(header, &cols_ref, trajectory));

    let metric_rows = state.history.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            fmt_f64(r.w1),
            fmt_f64(r.mean_f_pg),
            fmt_f64(r.mean_f_pr),
            fmt_f64(r.offset()),
            fmt_f64(r.k_emp),
            fmt_f64(r.j_d),
        ]
    });
    out.files.add(
        "metrics.csv",
        render_csv(header, &["iteration", "w1", "mean_f_pg", "mean_f_pr", "offset", "k_emp", "j_d"], metric_rows),
    );
    out.files.add("discriminator.txt", format!("{}{}", header.csv_comment(), state.net.to_checkpoint()));

    let first = &state.history[0];
    let final_row = state.last_metrics();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{name}: {} iterations, W1 {:.6} -> {:.6} (ratio {:.4}), k {:.4}, objective {}",
        final_row.iteration,
        first.w1,
        final_row.w1,
        final_row.w1 / first.w1.max(f64::MIN_POSITIVE),
        final_row.k_emp,
        cfg.objective.name
    );
    out.stdout = s;
    Ok(out)
}

fn field_spec(name: &str, fields: &FieldConfig) -> Result<ClosedFormSpec, CliError> {
    Ok(match name {
        "js" => ClosedFormSpec::Js,
        "least_squares" => ClosedFormSpec::least_squares(0.0, 1.0).map_err(CliError::core("least_squares"))?,
        // uniform reference measure over the plotted window
        "fisher" => ClosedFormSpec::Fisher {
            mu: AnalyticDensity::uniform_box(vec![fields.lo], vec![fields.hi]).map_err(CliError::core("fisher"))?,
        },
        other => return Err(CliError::Usage(format!("unknown closed-form field `{other}`"))),
    })
}

fn status(e: &lipflow::Error) -> &'static str {
    match e {
        lipflow::Error::OffSupport { .. } => "off_support",
        lipflow::Error::NonDifferentiable(_) => "non_differentiable",
        _ => "error",
    }
}

/// `x, p_fake, p_real, fstar, grad, status` over the configured 1-D grid,
/// one file per requested closed form. Failed points keep their row with
/// empty values and a status.
pub fn closed_form_fields(
    header: &Header,
    fields: &FieldConfig,
    pg: &AnalyticDensity,
    pr: &AnalyticDensity,
) -> Result<CommandOutput, CliError> {
    if pg.dim() != 1 {
        return Err(CliError::Usage("closed-form fields need a 1-D scenario".into()));
    }
    let grid = lipflow::closed_form::line_grid(fields.lo, fields.hi, fields.n);
    let mut out = CommandOutput::default();
    let mut s = String::new();
    for name in &fields.specs {
        let spec = field_spec(name, fields)?;
        let mut rows = Vec::with_capacity(grid.len());
        let mut ok = 0;
        for x in &grid {
            let dens = |d: &AnalyticDensity, x: &Point| density_value(d, x).map(fmt_f64).unwrap_or_default();
            let (v, gr) = (fstar_value(&spec, pg, pr, x), fstar_grad(&spec, pg, pr, x));
            let st = match (&v, &gr) {
                (Ok(_), Ok(_)) => {
                    ok += 1;
                    "ok"
                }
                (Err(e), _) | (_, Err(e)) => status(e),
            };
            rows.push(vec![
                fmt_f64(x[0]),
                dens(pg, x),
                dens(pr, x),
                v.as_ref().map(|v| fmt_f64(*v)).unwrap_or_default(),
                gr.as_ref().map(|g| fmt_f64(g[0])).unwrap_or_default(),
                st.to_string(),
            ]);
        }
        out.files.add(
            format!("field_{name}.csv"),
            render_csv(header, &["x", "p_fake", "p_real", "fstar", "grad", "status"], rows),
        );
        let _ = writeln!(s, "field {name}: {ok}/{} grid points defined", grid.len());
    }
    out.stdout = s;
    Ok(out)
}
