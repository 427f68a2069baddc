//! Benchmark fixtures shared by the criterion suites in `benches/`.

use cegis_clf::{Candidate, Matrix, SymMatrix, UncertaintySet};

/// The 4x4 interval system with a certain input column `[0 0 0 1]ᵀ`.
pub fn interval_4x4() -> UncertaintySet {
    let lo = Matrix::from_row_slice(
        4,
        4,
        &[
            -0.6685, -0.8709, -0.2028, -1.5547, 1.1457, -0.5898, 0.5688, 0.8496, -0.7812, -0.5754, -0.8774, -0.2501,
            -1.1429, 0.1730, 0.7763, 0.1618,
        ],
    );
    let hi = Matrix::from_row_slice(
        4,
        4,
        &[
            -0.6295, -0.8202, -0.1910, -1.4641, 1.2166, -0.5555, 0.6040, 0.9022, -0.7357, -0.5419, -0.8263, -0.2355,
            -1.0763, 0.1837, 0.8243, 0.1718,
        ],
    );
    let b = Matrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, 1.0]);
    UncertaintySet::interval_fixed_b(lo, hi, b).expect("valid bounds")
}

/// A candidate that is valid on [`interval_4x4`].
pub fn candidate_4x4() -> Candidate {
    let p = SymMatrix::from_row_slice(
        4,
        &[
            162.4930, 29.5126, 82.0931, 176.8625, 29.5126, 42.9150, 21.4642, 50.7574, 82.0931, 21.4642, 58.6050,
            99.6742, 176.8625, 50.7574, 99.6742, 232.9383,
        ],
    )
    .expect("finite");
    let k = Matrix::from_row_slice(1, 4, &[1.7667, 0.9014, -0.3555, 1.0089]);
    Candidate::new(p, k).expect("positive definite")
}
