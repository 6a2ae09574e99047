//! Sample leaves by random flows: a circle of the rotation foliation, the
//! fixed point at the origin, and an open half-line of the scaling foliation.

use leafwise::foliation::{canonical, leaf_dimension, leaf_sample, LeafOptions};

fn main() -> leafwise::Result<()> {
    let opts = LeafOptions { mesh: 0.02, ..LeafOptions::default() };
    let r = canonical::rotation();

    let circle = leaf_sample(&r, &[1.0, 0.0], 1500, &opts)?;
    let worst = circle.points.iter().map(|p| (p[0].hypot(p[1]) - 1.0).abs()).fold(0.0, f64::max);
    println!("circle: {} points, dim {}, max |‖p‖-1| = {worst:.1e}", circle.len(), circle.leaf_dim);
    let last = circle.len() - 1;
    println!("  point {last} is reached by the flow word {:?}", circle.word(last));

    let origin = leaf_sample(&r, &[0.0, 0.0], 100, &opts)?;
    println!("origin: {} point(s), dim {}", origin.len(), leaf_dimension(&r, &[0.0, 0.0]));

    let s = canonical::scaling();
    let half = leaf_sample(&s, &[0.5], 400, &opts)?;
    let lo = half.points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = half.points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    println!("scaling leaf of 0.5: {} points in [{lo:.3}, {hi:.3}], {} flows escaped", half.len(), half.escapes);
    Ok(())
}
