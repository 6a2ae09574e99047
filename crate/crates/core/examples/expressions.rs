//! Parse scalar expressions and vector fields, differentiate them and take
//! Lie brackets.

use leafwise::expr::{lie_bracket, parse_field, ScalarExpr, Var};

fn main() -> leafwise::Result<()> {
    let e = ScalarExpr::parse("exp(-x1^2)*sin(2*x2) + x1*x2", 2)?;
    let p = [0.3, -0.7];
    println!("f            = {e}");
    println!("f(p)         = {:.6}", e.eval(&p, &[]));
    println!("df/dx1       = {}", e.diff(Var::X(0)));
    println!("df/dx1 (p)   = {:.6}", e.diff(Var::X(0)).eval(&p, &[]));

    let rotation = parse_field("[-x2, x1]", 2)?;
    let euler = parse_field("[x1, x2]", 2)?;
    let shear = parse_field("[x2, 0]", 2)?;
    println!("[rot, euler] = {}", lie_bracket(&rotation, &euler)?);
    println!("[rot, shear] = {}", lie_bracket(&rotation, &shear)?);
    Ok(())
}
