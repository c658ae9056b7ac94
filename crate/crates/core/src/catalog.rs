//! Bundled reference systems used by the reproduction checks, the CLI and the demo.

use crate::criteria::{FunctionalTarget, SystemTriple};
use crate::numlin::{Matrix, Spectrum, TolerancePolicy};

/// A reference plant with its functional and suggested pole sets.
#[derive(Debug, Clone)]
pub struct Example {
    pub name: &'static str,
    pub system: SystemTriple,
    pub f: Matrix,
    pub controller_poles: Spectrum,
    pub observer_poles: Spectrum,
}

impl Example {
    pub fn functional(&self) -> FunctionalTarget {
        FunctionalTarget::new(self.f.clone(), self.system.states(), &TolerancePolicy::default())
            .expect("bundled functional has full row rank")
    }
}

/// Rows of the four functionals of the diagonal example.
pub const EXAMPLE1_FUNCTIONALS: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, 1.0, 0.0],
    [1.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 1.0],
];

/// Published verdicts (target output ctrb, functional stbl, functional ctrb) per functional.
pub const EXAMPLE1_TABLE: [(bool, bool, bool); 4] = [
    (true, false, false),
    (true, true, false),
    (true, true, true),
    (false, false, false),
];

/// `A = diag(1, 2, -1, 3)`, inputs on the first two states, `C = B^T`,
/// and functional `index` (0-based) of [`EXAMPLE1_FUNCTIONALS`].
pub fn example1(index: usize) -> Example {
    let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, -1.0, 3.0]));
    let b = Matrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let c = b.transpose();
    Example {
        name: "example1",
        system: SystemTriple::new(a, b, c).expect("valid system"),
        f: Matrix::from_row_slice(1, 4, &EXAMPLE1_FUNCTIONALS[index]),
        controller_poles: Spectrum::from_real(&[-1.0]),
        observer_poles: Spectrum::from_real(&[-2.0]),
    }
}

fn five_state_system() -> SystemTriple {
    #[rustfmt::skip]
    let a = Matrix::from_row_slice(5, 5, &[
        0.25, 2.25, 0.75, -0.25, 1.5,
        2.25, 0.25, -0.25, 0.75, -1.5,
        1.75, 1.75, 0.25, 1.25, -0.5,
        -1.25, -1.25, 2.25, 1.25, 0.5,
        0.0, 0.0, 0.0, 0.0, -4.0,
    ]);
    let b = Matrix::from_column_slice(5, 1, &[2.0, 0.0, 0.0, 0.0, 0.0]);
    let c = Matrix::from_row_slice(1, 5, &[1.0, 1.0, 0.0, 0.0, 0.0]);
    SystemTriple::new(a, b, c).expect("valid system")
}

/// Five-state plant, uncontrollable and unobservable, with `z = 0.5 (x1 + x2 + x3 + x4)`.
pub fn example2() -> Example {
    Example {
        name: "example2",
        system: five_state_system(),
        f: Matrix::from_row_slice(1, 5, &[0.5, 0.5, 0.5, 0.5, 0.0]),
        controller_poles: Spectrum::from_real(&[-3.0]),
        observer_poles: Spectrum::from_real(&[-6.0]),
    }
}

/// Same plant with `z = 1.5 (x1 + x2) - 0.5 (x3 + x4)`; needs one augmentation row.
pub fn example3() -> Example {
    Example {
        name: "example3",
        system: five_state_system(),
        f: Matrix::from_row_slice(1, 5, &[1.5, 1.5, -0.5, -0.5, 0.0]),
        controller_poles: Spectrum::from_real(&[-3.0, -5.0]),
        observer_poles: Spectrum::from_real(&[-6.0, -7.0]),
    }
}

/// Three-state plant used to probe the limits of controller augmentation.
/// The output matrix is not part of the original data; full-state measurement is assumed.
pub fn remark8() -> Example {
    let a = Matrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 2.0, 1.0, 0.0, 0.0, 1.0]);
    let b = Matrix::from_column_slice(3, 1, &[1.0, 2.0, 0.0]);
    Example {
        name: "remark8",
        system: SystemTriple::new(a, b, Matrix::identity(3, 3)).expect("valid system"),
        f: Matrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]),
        controller_poles: Spectrum::from_real(&[-1.0, -2.0]),
        observer_poles: Spectrum::from_real(&[-3.0]),
    }
}

/// Published observer parameters `(N, E, K, J, H)` and augmentation rows.
#[derive(Debug, Clone)]
pub struct PublishedObserver {
    pub r: Matrix,
    pub n: Matrix,
    pub e: Matrix,
    pub k: Matrix,
    pub j: Matrix,
    pub h: Matrix,
}

pub fn example2_published_observer() -> PublishedObserver {
    let s = |v: f64| Matrix::from_element(1, 1, v);
    PublishedObserver {
        r: Matrix::zeros(0, 5),
        n: s(-6.0),
        e: s(9.0),
        k: s(-18.0),
        j: s(-72.0),
        h: s(-17.0),
    }
}

pub fn example3_published_observer() -> PublishedObserver {
    let col = |a: f64, b: f64| Matrix::from_column_slice(2, 1, &[a, b]);
    PublishedObserver {
        r: Matrix::from_row_slice(1, 5, &[3.5, 3.5, -0.5, -0.5, 0.0]),
        n: Matrix::from_row_slice(2, 2, &[-6.0, 0.0, 0.0, -7.0]),
        e: col(-7.0, -6.0),
        k: col(30.0, 48.0),
        j: col(72.0, 90.0),
        h: col(17.0, 19.0),
    }
}

/// Published controller gain and reduced closed loop of the third example.
pub const EXAMPLE3_Z: [f64; 2] = [-148.5, 65.5];
pub const EXAMPLE3_REDUCED_CLOSED_LOOP: [[f64; 2]; 2] = [[445.5, -195.5], [1033.5, -453.5]];
pub const EXAMPLE3_PSI: [[f64; 4]; 4] = [
    [445.5, -195.5, -445.5, 196.5],
    [1033.5, -453.5, -1039.5, 458.5],
    [0.0, 0.0, -6.0, 0.0],
    [0.0, 0.0, 0.0, -7.0],
];
pub const EXAMPLE2_PSI: [[f64; 2]; 2] = [[-3.0, 6.0], [0.0, -6.0]];
