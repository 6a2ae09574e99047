//! Involutivity checks: the rotation foliation passes, while `{∂1, x1 ∂2}`
//! fails along `x1 = 0` and is refused an addition morphism.

use std::sync::Arc;

use leafwise::bisubmersion::{make_addition_morphism, make_path_holonomy};
use leafwise::foliation::{canonical, involutivity_check};

fn main() {
    for f in [canonical::rotation(), canonical::commuting_pair(), canonical::non_involutive()] {
        let rep = involutivity_check(&f, 20, 1e-10);
        println!("{}: pass={} worst residual {:.2e} at {:?}", f.name(), rep.pass, rep.worst_residual, rep.worst_point);
    }
    for f in [canonical::commuting_pair(), canonical::non_involutive()] {
        let name = f.name().to_string();
        match make_addition_morphism(&make_path_holonomy(Arc::new(f))) {
            Ok(_) => println!("{name}: addition morphism built"),
            Err(e) => println!("{name}: {e}"),
        }
    }
}
