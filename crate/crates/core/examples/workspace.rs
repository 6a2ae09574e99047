//! Build a workspace from JSON, apply a named kernel and plot the result.

use std::path::Path;

use leafwise::config::{Overrides, Workspace};
use leafwise::op::{apply_op, Grid, OpConfig};
use leafwise::geometry::Aabb;
use leafwise::svg;

const CONFIG: &str = r#"{
  "settings": { "quadrature": { "order": 24 } },
  "kernels": {
    "ring": { "atoms": [ { "type": "density", "host": "R", "expr": "(1-(xi1/0.8)^2)^2",
                           "xi_box": [[-0.8, 0.8]], "base_box": [[-1.9, 1.9], [-1.9, 1.9]] } ] },
    "twice": { "convolve": ["ring", "ring"] }
  },
  "functions": { "spot": { "expr": "exp(-8*((x1 - 0.8)^2 + x2^2))" } }
}"#;

fn main() -> leafwise::Result<()> {
    let ws = Workspace::from_json(CONFIG, Path::new("."), &Overrides::default())?;
    let grid = Grid::uniform(Aabb::from_intervals(&[[-1.2, 1.2]; 2])?, 41)?;
    let cfg = OpConfig { quad: *ws.quad(), strict: false };
    let out = apply_op(ws.kernel("twice")?, ws.function("spot")?, &grid, &cfg)?;
    println!("max |Op(ring*ring) spot| = {:.4}, masked points: {}", out.values.max_abs(), out.masked);
    let path = std::env::temp_dir().join("leafwise_ring.svg");
    std::fs::write(&path, svg::grid_plot(&out.values, "Op(ring*ring) spot")?).map_err(|e| leafwise::Error::Invalid(e.to_string()))?;
    println!("heatmap written to {}", path.display());
    Ok(())
}
