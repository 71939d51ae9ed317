//! Fixtures shared by the benchmarks.

use elastobie_core::{sample_grid, BoundaryGrid, ContrastPair, Curve, LameParams};

pub fn kite(n: usize) -> BoundaryGrid {
    sample_grid(&Curve::kite(), n).expect("valid grid size")
}

pub fn pair() -> ContrastPair {
    ContrastPair::new(
        LameParams::planar(0.5, 1.0).expect("valid"),
        LameParams::planar(1.0, 20.0).expect("valid"),
    )
}
