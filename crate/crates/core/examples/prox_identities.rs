//! Proximal maps of every supported function, the conjugate prox obtained
//! through the Moreau decomposition, and the envelope gradient.

use nalgebra::dvector;
use opsplit::prox::ProxFunction;

fn main() -> opsplit::Result<()> {
    let functions = [
        ("l1, weight 1", ProxFunction::L1 { weight: 1.0 }, dvector![3.0, -1.0, 0.5, 0.0]),
        ("group l21, pairs (x0,x2),(x1,x3)", ProxFunction::GroupL21 { weight: 1.0, stride: 2 }, dvector![3.0, 0.1, 4.0, -0.2]),
        ("nonnegative orthant", ProxFunction::IndicatorNonneg, dvector![1.5, -2.0, 0.0, 0.3]),
        ("box [0, 1]", ProxFunction::IndicatorBox { lower: 0.0, upper: 1.0 }, dvector![1.5, -2.0, 0.4, 0.3]),
        ("nuclear, 2x2", ProxFunction::Nuclear { weight: 1.0, rows: 2, cols: 2 }, dvector![3.0, 0.0, 0.0, 1.0]),
        (
            "quadratic distance to (1,1,1,1)",
            ProxFunction::QuadraticDistance { weight: 2.0, center: dvector![1.0, 1.0, 1.0, 1.0] },
            dvector![3.0, -1.0, 0.5, 0.0],
        ),
    ];
    let step = 1.0;
    for (label, f, v) in functions {
        let p = f.prox(step, &v)?;
        let q = f.prox_conjugate(step, &v)?;
        let grad = f.moreau_envelope_grad(step, &v)?;
        println!("{label}");
        println!("  v              = {:?}", v.as_slice());
        println!("  prox f(v)      = {:?}", p.as_slice());
        println!("  prox f*(v)     = {:?}", q.as_slice());
        println!("  sum - v        = {:.2e}", (&p + &q - &v).amax());
        println!("  envelope grad  = {:?}", grad.as_slice());
    }
    Ok(())
}
