//! The three-system introductory truss example (systems A, B and C, which
//! turn into each other by one add, one remove and one exchange).
//!
//! Printed matrices are kept verbatim at three significant digits; the
//! `.full` variants are recomputed from scratch at full precision.

use crate::assembly::SystemMatrices;
use crate::error::Result;
use crate::io::{export_matrix, parse_model, serialize_model, ModelDocument, Precision};
use crate::redundancy::SystemState;

pub const SYSTEM_A: &str = "\
# System A: elements 1 2 4 5 6 (element 3 is added later)
redmx-model 1
raw 4
element 1 = 200 : 0 1 0 0
element 2 = 100*sqrt(2) : 0 0 sqrt(2)/2 sqrt(2)/2
element 4 = 200 : 0 0 0 1
element 5 = 200 : -1 0 1 0
element 6 = 200 : 0 0 -1 0
";

pub const SYSTEM_B: &str = "\
# System B: system A plus element 3 between nodes 2 and 3
redmx-model 1
raw 4
element 1 = 200 : 0 1 0 0
element 2 = 100*sqrt(2) : 0 0 sqrt(2)/2 sqrt(2)/2
element 3 = 100*sqrt(2) : -sqrt(2)/2 sqrt(2)/2 0 0
element 4 = 200 : 0 0 0 1
element 5 = 200 : -1 0 1 0
element 6 = 200 : 0 0 -1 0
";

pub const SYSTEM_C: &str = "\
# System C: system B without element 4
redmx-model 1
raw 4
element 1 = 200 : 0 1 0 0
element 2 = 100*sqrt(2) : 0 0 sqrt(2)/2 sqrt(2)/2
element 3 = 100*sqrt(2) : -sqrt(2)/2 sqrt(2)/2 0 0
element 5 = 200 : -1 0 1 0
element 6 = 200 : 0 0 -1 0
";

/// System A with coordinates. Nodes 1, 2 and 5 are pinned; EA = 200.
pub const SYSTEM_A_GEOMETRY: &str = "\
redmx-model 1
dim 2
node 1 0 0 fix x y
node 2 1 0 fix x y
node 3 0 1
node 4 1 1
node 5 2 1 fix x y
truss 1 1 3 E=200 A=1
truss 2 1 4 E=200 A=1
truss 4 2 4 E=200 A=1
truss 5 3 4 E=200 A=1
truss 6 4 5 E=200 A=1
";

/// A → B → C → A.
pub const CYCLE_SCRIPT: &str = "\
add 3 at 3 = 100*sqrt(2) : -sqrt(2)/2 sqrt(2)/2 0 0
remove 4
exchange 3 = 200 : 0 0 0 1
";

pub const SYSTEM_A_R: &str = "\
0.0 0.0 0.0 0.0 0.0
0.0 0.586 -0.414 0.0 0.414
0.0 -0.293 0.207 0.0 -0.207
0.0 0.0 0.0 0.0 0.0
0.0 0.293 -0.207 0.0 0.207
";

pub const SYSTEM_B_R: &str = "\
0.178 -0.0521 -0.252 0.0368 0.178 0.141
-0.0737 0.607 0.104 -0.429 -0.0737 0.356
-0.356 0.104 0.503 -0.0737 -0.356 -0.282
0.0368 -0.304 -0.0521 0.215 0.0368 -0.178
0.178 -0.0521 -0.252 0.0368 0.178 0.141
0.141 0.252 -0.199 -0.178 0.141 0.319
";

pub const SYSTEM_C_R: &str = "\
0.172 0.0 -0.243 0.172 0.172
0.0 0.0 0.0 0.0 0.0
-0.343 0.0 0.485 -0.343 -0.343
0.172 0.0 -0.243 0.172 0.172
0.172 0.0 -0.243 0.172 0.172
";

/// R after the full cycle, as printed; equal to [`SYSTEM_A_R`].
pub const CYCLE_R: &str = SYSTEM_A_R;

pub const SYSTEM_A_A: &str = "\
0 1 0 0
0 0 sqrt(2)/2 sqrt(2)/2
0 0 0 1
-1 0 1 0
0 0 -1 0
";

pub const SYSTEM_A_C: &str = "200 100*sqrt(2) 200 200 200\n";

pub const SYSTEM_B_A: &str = "\
0 1 0 0
0 0 sqrt(2)/2 sqrt(2)/2
-sqrt(2)/2 sqrt(2)/2 0 0
0 0 0 1
-1 0 1 0
0 0 -1 0
";

pub const SYSTEM_B_C: &str = "200 100*sqrt(2) 100*sqrt(2) 200 200 200\n";

pub const SYSTEM_C_A: &str = "\
0 1 0 0
0 0 sqrt(2)/2 sqrt(2)/2
-sqrt(2)/2 sqrt(2)/2 0 0
-1 0 1 0
0 0 -1 0
";

pub const SYSTEM_C_C: &str = "200 100*sqrt(2) 100*sqrt(2) 200 200\n";

pub fn system<T: crate::Scalar>(text: &str) -> SystemMatrices<T> {
    parse_model::<T>(text)
        .expect("fixture parses")
        .to_system()
        .expect("fixture assembles")
}

/// Every fixture file as `(file name, contents)`.
pub fn files() -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = [
        ("system_a.rxm", SYSTEM_A),
        ("system_b.rxm", SYSTEM_B),
        ("system_c.rxm", SYSTEM_C),
        ("system_a_geometry.rxm", SYSTEM_A_GEOMETRY),
        ("cycle.rxu", CYCLE_SCRIPT),
        ("system_a_R.mat.txt", SYSTEM_A_R),
        ("system_b_R.mat.txt", SYSTEM_B_R),
        ("system_c_R.mat.txt", SYSTEM_C_R),
        ("cycle_R.mat.txt", CYCLE_R),
        ("system_a_A.mat.txt", SYSTEM_A_A),
        ("system_a_C.mat.txt", SYSTEM_A_C),
        ("system_b_A.mat.txt", SYSTEM_B_A),
        ("system_b_C.mat.txt", SYSTEM_B_C),
        ("system_c_A.mat.txt", SYSTEM_C_A),
        ("system_c_C.mat.txt", SYSTEM_C_C),
    ]
    .into_iter()
    .map(|(n, c)| (n.to_string(), c.to_string()))
    .collect();
    for (name, text) in [
        ("system_a", SYSTEM_A),
        ("system_b", SYSTEM_B),
        ("system_c", SYSTEM_C),
    ] {
        let sys = system::<f64>(text);
        let state = SystemState::new(sys.clone())?;
        let full = Precision::Full;
        out.push((
            format!("{name}_R.full.mat.txt"),
            export_matrix(state.r(), full),
        ));
        out.push((
            format!("{name}_Kinv.full.mat.txt"),
            export_matrix(state.kinv(), full),
        ));
        out.push((
            format!("{name}_A.full.mat.txt"),
            export_matrix(&sys.a_dense(), full),
        ));
        let c = crate::Mat::from_vec(1, sys.n_q(), sys.c().to_vec());
        out.push((format!("{name}_C.full.mat.txt"), export_matrix(&c, full)));
        out.push((
            format!("{name}.full.rxm"),
            serialize_model(&ModelDocument::Raw(sys)),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_matrix;
    use crate::Mat;

    #[test]
    fn printed_and_computed_agree() {
        for (model, printed) in [
            (SYSTEM_A, SYSTEM_A_R),
            (SYSTEM_B, SYSTEM_B_R),
            (SYSTEM_C, SYSTEM_C_R),
        ] {
            let state = SystemState::new(system::<f64>(model)).unwrap();
            let p: Mat<f64> = parse_matrix(printed).unwrap();
            assert!(state.r().max_abs_diff(&p) <= 5e-4, "{model}");
            assert_eq!(export_matrix(state.r(), Precision::Significant(3)), printed);
        }
    }

    #[test]
    fn raw_and_geometric_system_a_coincide() {
        let raw = system::<f64>(SYSTEM_A);
        let geo = system::<f64>(SYSTEM_A_GEOMETRY);
        assert!(raw.a_dense().max_abs_diff(&geo.a_dense()) < 1e-15);
        for (x, y) in raw.c().iter().zip(geo.c()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(raw.row_map(), geo.row_map());
    }

    #[test]
    fn printed_a_and_c_match_models() {
        for (model, a, c) in [
            (SYSTEM_A, SYSTEM_A_A, SYSTEM_A_C),
            (SYSTEM_B, SYSTEM_B_A, SYSTEM_B_C),
            (SYSTEM_C, SYSTEM_C_A, SYSTEM_C_C),
        ] {
            let sys = system::<f64>(model);
            assert_eq!(sys.a_dense(), parse_matrix(a).unwrap());
            assert_eq!(sys.c(), parse_matrix::<f64>(c).unwrap().row(0));
        }
    }
}
