//! The bundled two-step example system and its published solution, printed
//! to four decimals.

use crate::format::{load_system, SystemFile};
use crate::linalg::Mat;
use crate::recursions::H2HinfSolution;

pub const PAPER_EXAMPLE_JSON: &str = include_str!("../examples/paper_example.json");

/// Absolute tolerance matching four printed decimals.
pub const TABLE_TOL: f64 = 5e-4;

pub fn paper_example() -> SystemFile {
    load_system(PAPER_EXAMPLE_JSON).expect("bundled example is well formed")
}

type Entry = [[f64; 2]; 2];

/// One published sequence, indexed by `k = 0, 1, 2`.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceSequence {
    pub name: &'static str,
    pub values: [Entry; 3],
}

impl ReferenceSequence {
    pub fn matrix(&self, k: usize) -> Mat {
        let e = self.values[k];
        Mat::from_row_slice(2, 2, &[e[0][0], e[0][1], e[1][0], e[1][1]])
    }
}

const ZERO: Entry = [[0.0, 0.0], [0.0, 0.0]];

pub const REFERENCE_SOLUTION: [ReferenceSequence; 12] = [
    ReferenceSequence {
        name: "H",
        values: [
            [[0.6346, -0.0112], [-0.0112, 0.6166]],
            [[0.6232, -0.0210], [-0.0210, 0.6127]],
            [[0.64, 0.0], [0.0, 0.64]],
        ],
    },
    ReferenceSequence {
        name: "Ht",
        values: [
            [[0.5950, -0.0801], [-0.0801, 0.4948]],
            [[0.5773, -0.0790], [-0.0790, 0.5364]],
            [[0.64, 0.0], [0.0, 0.64]],
        ],
    },
    ReferenceSequence {
        name: "H1",
        values: [
            [[1.1489, 0.1480], [0.1480, 1.1925]],
            [[1.0843, 0.0667], [0.0667, 1.1117]],
            [[1.0, 0.0], [0.0, 1.0]],
        ],
    },
    ReferenceSequence {
        name: "H1t",
        values: [
            [[1.1902, 0.2139], [0.2139, 1.2985]],
            [[1.0843, 0.0667], [0.0667, 1.1117]],
            [[1.0, 0.0], [0.0, 1.0]],
        ],
    },
    ReferenceSequence {
        name: "U",
        values: [
            [[-0.0848, -0.1243], [-0.0840, -0.1399]],
            [[-0.0605, -0.0419], [-0.0517, -0.0385]],
            ZERO,
        ],
    },
    ReferenceSequence {
        name: "Ut",
        values: [
            [[-0.1902, -0.1908], [-0.2225, -0.2947]],
            [[-0.0975, -0.0525], [-0.0829, -0.0630]],
            ZERO,
        ],
    },
    ReferenceSequence {
        name: "V",
        values: [
            [[0.0090, 0.0202], [0.0186, 0.0422]],
            [[0.0243, 0.0176], [0.0298, 0.0215]],
            ZERO,
        ],
    },
    ReferenceSequence {
        name: "Vt",
        values: [
            [[0.0891, 0.1179], [0.1550, 0.2060]],
            [[0.0905, 0.0575], [0.1194, 0.0769]],
            ZERO,
        ],
    },
    ReferenceSequence {
        name: "P1",
        values: [
            [[-0.1141, -0.1012], [-0.1012, -0.1148]],
            [[-0.0396, -0.0593], [-0.0593, -0.1129]],
            [[-0.0625, -0.0825], [-0.0825, -0.1125]],
        ],
    },
    ReferenceSequence {
        name: "Q1",
        values: [
            [[-0.3248, -0.3715], [-0.3715, -0.4619]],
            [[-0.1286, -0.1167], [-0.1167, -0.1502]],
            [[-0.0625, -0.0825], [-0.0825, -0.1125]],
        ],
    },
    ReferenceSequence {
        name: "Pt1",
        values: [
            [[1.1729, 0.2114], [0.2114, 1.3676]],
            [[1.1255, 0.1195], [0.1195, 1.1585]],
            [[1.0625, 0.0825], [0.0825, 1.1125]],
        ],
    },
    ReferenceSequence {
        name: "Qt1",
        values: [
            [[2.0130, 1.2515], [1.2515, 2.8022]],
            [[1.6674, 0.4629], [0.4629, 1.3867]],
            [[1.0625, 0.0825], [0.0825, 1.1125]],
        ],
    },
];

/// Looks up a sequence of a computed solution by its reference name.
pub fn solution_matrix<'a>(sol: &'a H2HinfSolution, name: &str, k: usize) -> Option<&'a Mat> {
    let ops = sol.h_ops.get(k);
    match name {
        "H" => ops.map(|o| &o.h),
        "Ht" => ops.map(|o| &o.h_bar),
        "H1" => ops.map(|o| &o.h1),
        "H1t" => ops.map(|o| &o.h1_bar),
        _ => sol
            .sequences()
            .into_iter()
            .find(|(n, _)| *n == name)
            .and_then(|(_, seq)| seq.get(k)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryComparison {
    pub name: &'static str,
    pub k: usize,
    pub max_abs_diff: f64,
}

/// Per-(sequence, k) maximum deviation from the published values.
pub fn compare_with_reference(sol: &H2HinfSolution) -> Vec<EntryComparison> {
    let mut out = Vec::with_capacity(36);
    for r in &REFERENCE_SOLUTION {
        for k in 0..3 {
            let diff = match solution_matrix(sol, r.name, k) {
                Some(m) if m.shape() == (2, 2) => (m - r.matrix(k)).amax(),
                _ => f64::INFINITY,
            };
            out.push(EntryComparison {
                name: r.name,
                k,
                max_abs_diff: diff,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_loads_with_gamma() {
        let file = paper_example();
        assert_eq!(file.gamma, Some(0.8));
        assert_eq!(file.system.dims.horizon, 2);
        assert!(file.system.validate().is_valid());
    }

    #[test]
    fn reference_symmetric_where_expected() {
        for r in REFERENCE_SOLUTION
            .iter()
            .filter(|r| !r.name.starts_with(['U', 'V']))
        {
            for k in 0..3 {
                let m = r.matrix(k);
                assert_eq!(m, m.transpose(), "{} at k={k}", r.name);
            }
        }
    }
}
