//! Legacy ASCII VTK export of scalar diagnostics on the cell grid.

use std::io::Write;

use crate::grid::{CellKind, Field};
use crate::manifold;

/// Writes β, |Q| and dist(Q, N) as STRUCTURED_POINTS cell-centred point
/// data. Exterior cells carry zeros.
pub fn write_vtk<W: Write>(field: &Field, mut w: W) -> std::io::Result<()> {
    let g = &*field.grid;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "ldg2d field eps={}", field.epsilon)?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} 1", g.nx, g.ny)?;
    writeln!(w, "ORIGIN {} {} 0", g.origin[0] + 0.5 * g.h, g.origin[1] + 0.5 * g.h)?;
    writeln!(w, "SPACING {} {} 1", g.h, g.h)?;
    writeln!(w, "POINT_DATA {}", g.nx * g.ny)?;
    let scalars: [(&str, fn(&crate::QTensor) -> f64); 3] = [
        ("beta", |q| q.biaxiality()),
        ("norm", |q| q.norm()),
        ("dist_to_n", manifold::dist_to_n),
    ];
    for (name, f) in scalars {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for (q, kind) in field.values.iter().zip(&g.kinds) {
            let v = if *kind == CellKind::Exterior { 0.0 } else { f(q) };
            writeln!(w, "{v}")?;
        }
    }
    w.flush()
}
