use std::fmt::Write;

use lipflow::dynamics::{train_discriminator, value_surface, FlowState, Lattice, TrainConfig};
use lipflow::geometry::Rng;
use lipflow::net::{Activation, AdamConfig};

use super::CommandOutput;
use crate::config::RunManifest;
use crate::output::{fmt_f64, render_csv, Header};
use crate::svg::heatmap;
use crate::{CliError, Globals};

/// `surface_<activation>_lr<lr>_depth<depth>`, with brackets stripped from
/// parametrised activations: `leaky_relu(0.2)` becomes `leaky_relu-0.2`.
pub fn surface_file_stem(act: Activation, lr: f64, depth: usize) -> String {
    let act = act.to_string().replace('(', "-").replace(')', "");
    format!("surface_{act}_lr{lr}_depth{depth}")
}

/// Trains one discriminator per (activation, learning rate, depth) cell on
/// the fixed clouds and writes its value surface as CSV and SVG.
pub fn surface(m: &RunManifest, g: &Globals) -> Result<CommandOutput, CliError> {
    let (real, fake) = m.scenario.clouds().map_err(CliError::core("surface"))?;
    if real.dim() != 2 {
        return Err(CliError::Usage(format!(
            "surface needs a 2-D scenario, `{}` has dimension {}",
            m.scenario.name,
            real.dim()
        )));
    }
    let lattice =
        Lattice::around(real, fake, m.surface.pad, m.surface.resolution).map_err(CliError::core("surface lattice"))?;
    let header = Header::new(m.seed, m.hash.clone());
    let mut out = CommandOutput::default();
    let mut s = String::new();
    for &act in &m.surface.activations {
        for &lr in &m.surface.lrs {
            for &depth in &m.surface.depths {
                let mut cfg = TrainConfig {
                    d_steps: m.surface.steps,
                    adam: AdamConfig { lr, ..m.train.adam },
                    ..m.train.clone()
                };
                cfg.net.activation = act;
                cfg.net.hidden = vec![m.surface.width; depth];
                let stem = surface_file_stem(act, lr, depth);
                // every cell starts from the same seed
                let mut rng = Rng::new(m.seed);
                let mut state = FlowState::new(fake.clone(), real.clone(), &cfg, &mut rng).map_err(CliError::core(&stem))?;
                train_discriminator(&mut state, &cfg, &mut rng).map_err(CliError::core(&stem))?;
                let values = value_surface(&state.net, &lattice).map_err(CliError::core(&stem))?;
                out.files.add(format!("{stem}.csv"), surface_csv(&header, &lattice, &values));
                out.files.add(format!("{stem}.svg"), heatmap(&header, &stem, &lattice, &values, real.points(), fake.points()));
                let (lo, hi) = values
                    .iter()
                    .flatten()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
                let _ = writeln!(s, "{stem}: range [{lo:.4}, {hi:.4}]");
                g.progress(format!("surface: {stem} done"));
            }
        }
    }
    out.stdout = s;
    Ok(out)
}

fn surface_csv(header: &Header, lattice: &Lattice, values: &[Vec<f64>]) -> String {
    let rows = values.iter().enumerate().flat_map(|(j, row)| {
        row.iter()
            .enumerate()
            .map(move |(i, v)| vec![fmt_f64(lattice.x(i)), fmt_f64(lattice.y(j)), fmt_f64(*v)])
    });
    render_csv(header, &["x", "y", "f"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lipflow::geometry::Point;
    use lipflow::net::Mlp;

    #[test]
    fn file_stems_are_systematic() {
        assert_eq!(surface_file_stem(Activation::Relu, 0.001, 2), "surface_relu_lr0.001_depth2");
        assert_eq!(
            surface_file_stem(Activation::LeakyRelu { slope: 0.2 }, 0.01, 0),
            "surface_leaky_relu-0.2_lr0.01_depth0"
        );
    }

    #[test]
    fn affine_surface_is_planar_with_diagonal_range() {
        // w parallel to the lattice diagonal (3, 4): range = ‖w‖·diagonal
        let lattice = Lattice::new((0.0, 3.0), (0.0, 4.0), 7, 9).unwrap();
        let net = Mlp::affine(&[0.6, 0.8], 0.25).unwrap();
        let v = value_surface(&net, &lattice).unwrap();
        let (lo, hi) = v.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        assert!((hi - lo - 5.0).abs() < 1e-12, "{}", hi - lo);
        // planar: constant second differences
        for row in &v {
            for w in row.windows(3) {
                assert!((w[2] - 2.0 * w[1] + w[0]).abs() < 1e-12);
            }
        }
        let csv = surface_csv(&Header::new(0, "h"), &lattice, &v);
        assert_eq!(csv.lines().count(), 2 + 7 * 9);
        assert_eq!(net.forward(&Point::new(vec![3.0, 4.0]).unwrap()).unwrap(), hi);
    }
}
