//! Flows of generator combinations and their Jacobians, compared with the
//! closed forms on the scaling and rotation foliations.

use std::f64::consts::{E, FRAC_PI_2};

use leafwise::flow::{back_flow, exp_flow, flow_jacobian, FlowConfig};
use leafwise::foliation::canonical;

fn main() -> leafwise::Result<()> {
    let cfg = FlowConfig::with_tol(1e-11);

    let s = canonical::scaling_on(6.0);
    let y = exp_flow(&s, &[1.0], &[2.0], &cfg)?;
    println!("scaling: exp(1)·2 = {:.12}  (2e = {:.12})", y[0], 2.0 * E);
    println!("         back     = {:.12}", back_flow(&s, &[1.0], &y, &cfg)?[0]);

    let r = canonical::rotation();
    let q = exp_flow(&r, &[FRAC_PI_2], &[1.0, 0.0], &cfg)?;
    println!("rotation by π/2 of (1,0) = ({:.2e}, {:.12})", q[0], q[1]);
    let j = flow_jacobian(&r, &[0.8], &[0.6, -0.3], &cfg)?;
    println!("Jacobian of the rotation by 0.8:\n{j:.9}");

    // Leaving the chart is an error, not a silent extrapolation.
    match exp_flow(&s, &[1.0], &[5.0], &cfg) {
        Err(e) => println!("escape: {e}"),
        Ok(p) => println!("unexpected: {p:?}"),
    }
    Ok(())
}
