//! Plain-text coordinate export of the generator.

use std::fmt::Write as _;
use std::io::Write;

use super::{BoundaryMode, DiscreteGenerator};

/// Header lines start with `#`; each remaining line is `row col value` with
/// zero-based indices. Diagonal entries are included.
pub fn export_operator(gen: &DiscreteGenerator) -> String {
    let g = &gen.grid;
    let nnz = gen.cols.len() + gen.n();
    let mode = match g.boundary_mode {
        BoundaryMode::Periodic => "periodic",
        BoundaryMode::Restricted => "restricted",
    };
    let mut s = String::new();
    let _ = writeln!(s, "# dirjump generator");
    let _ = writeln!(s, "# dim {} h {:.16e} extent {:.16e} boundary {}", g.dim, g.h, g.extent, mode);
    let _ = writeln!(s, "# nodes {} nnz {}", gen.n(), nnz);
    for i in 0..gen.n() {
        let mut diag_written = false;
        for (j, q) in gen.row(i) {
            if !diag_written && j > i {
                let _ = writeln!(s, "{i} {i} {:.16e}", -gen.exit_rate(i));
                diag_written = true;
            }
            let _ = writeln!(s, "{i} {j} {q:.16e}");
        }
        if !diag_written {
            let _ = writeln!(s, "{i} {i} {:.16e}", -gen.exit_rate(i));
        }
    }
    s
}

pub fn write_operator<W: Write>(gen: &DiscreteGenerator, mut out: W) -> std::io::Result<()> {
    out.write_all(export_operator(gen).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{assemble, GridSpec};
    use crate::model::ModelSpec;

    #[test]
    fn triplets_round_trip() {
        let g = assemble(&ModelSpec::brownian(1), &GridSpec::new(1, 1.0, 0.5, BoundaryMode::Periodic)).unwrap();
        let text = export_operator(&g);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body.len(), g.n() * 3);
        let (i, j, v): (usize, usize, f64) = {
            let p: Vec<&str> = body[0].split(' ').collect();
            (p[0].parse().unwrap(), p[1].parse().unwrap(), p[2].parse().unwrap())
        };
        assert_eq!((i, j), (0, 0));
        assert_eq!(v, -g.exit_rate(0));
    }
}
