use serde::{Deserialize, Serialize};

use super::{controller_conditions, observer_conditions, Conditions};
use crate::criteria::{is_functional_observable, FunctionalTarget, SystemTriple};
use crate::error::{CandidateDiagnostic, Error, Result};
use crate::numlin::{
    observability_indices, observability_subspace, orthonormal_columns, vstack, Matrix,
    SubspaceBasis, TolerancePolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationStrategy {
    Empty,
    Theorem16,
    KalmanComplement,
    FullComplement,
    Given,
}

impl AugmentationStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Empty => "empty",
            Self::Theorem16 => "theorem16",
            Self::KalmanComplement => "kalman_complement",
            Self::FullComplement => "full_complement",
            Self::Given => "given",
        }
    }
}

/// The accepted augmentation and the record of every candidate tried.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationResult {
    pub r: Matrix,
    pub strategy: AugmentationStrategy,
    pub conditions: Conditions,
    pub candidates: Vec<CandidateDiagnostic>,
}

/// `R = stack_i (F_i A, ..., F_i A^{ν_i - 1})` from the observability indices of `(A, F)`.
pub fn build_augmentation_thm16(a: &Matrix, f: &FunctionalTarget, tol: &TolerancePolicy) -> Result<Matrix> {
    let nu = observability_indices(a, f.f(), tol)?;
    let n = a.ncols();
    let mut rows: Vec<Matrix> = Vec::new();
    for (i, &nu_i) in nu.iter().enumerate() {
        let mut row = f.f().rows(i, 1).into_owned();
        for _ in 1..nu_i {
            row = &row * a;
            rows.push(row.clone());
        }
    }
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, n));
    }
    let refs: Vec<&Matrix> = rows.iter().collect();
    Ok(vstack(&refs))
}

/// Rows completing the row space of `fbar` to the column space of `within`
/// (orthonormal columns), returned as orthonormal rows.
fn completion_rows(fbar: &Matrix, within: &SubspaceBasis, tol: &TolerancePolicy) -> Matrix {
    let n = fbar.ncols();
    let own = SubspaceBasis::zero(n).extend(&fbar.transpose(), tol.absolute_zero_tol);
    let mut rest = within.basis().clone();
    for mut col in rest.column_iter_mut() {
        let v = own.reject(&col.clone_owned());
        col.copy_from(&v);
    }
    orthonormal_columns(&rest, tol.zero_threshold(1.0)).transpose()
}

struct Candidate {
    strategy: AugmentationStrategy,
    r: Matrix,
}

type ConditionFn = fn(&SystemTriple, &FunctionalTarget, &Matrix, &TolerancePolicy) -> Result<Conditions>;

fn search(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    candidates: Vec<Candidate>,
    test: ConditionFn,
    tol: &TolerancePolicy,
) -> Result<AugmentationResult> {
    let mut diagnostics = Vec::new();
    for cand in candidates {
        let mut diag = CandidateDiagnostic {
            strategy: cand.strategy.as_str().into(),
            rows: cand.r.nrows(),
            rank_condition: None,
            assignability: None,
            note: String::new(),
        };
        match test(sys, f, &cand.r, tol) {
            Ok(cond) => {
                diag.rank_condition = Some(cond.rank_condition);
                diag.assignability = cond.assignability;
                diag.note = if cond.both() {
                    "accepted".into()
                } else if !cond.rank_condition {
                    format!("rank condition fails (residual {:e})", cond.residual)
                } else {
                    "reduced pair not assignable".into()
                };
                diagnostics.push(diag);
                if cond.both() {
                    // re-verify from scratch before reporting success
                    let again = test(sys, f, &cand.r, tol)?;
                    if again.both() {
                        return Ok(AugmentationResult {
                            r: cand.r,
                            strategy: cand.strategy,
                            conditions: again,
                            candidates: diagnostics,
                        });
                    }
                }
            }
            Err(err) => {
                diag.note = err.to_string();
                diagnostics.push(diag);
            }
        }
    }
    Err(Error::NoAugmentationFound(diagnostics))
}

/// Ordered search for `R1`: empty, the Krylov rows `FA, .., FA^(ν-1)` (`theorem16`), then a full complement of `F`.
pub fn find_controller_augmentation(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    tol: &TolerancePolicy,
) -> Result<AugmentationResult> {
    let n = sys.states();
    let mut candidates = vec![Candidate {
        strategy: AugmentationStrategy::Empty,
        r: Matrix::zeros(0, n),
    }];
    let thm16 = build_augmentation_thm16(sys.a(), f, tol)?;
    if thm16.nrows() > 0 {
        candidates.push(Candidate {
            strategy: AugmentationStrategy::Theorem16,
            r: thm16,
        });
    }
    let full = completion_rows(f.f(), &SubspaceBasis::full(n), tol);
    if full.nrows() > 0 {
        candidates.push(Candidate {
            strategy: AugmentationStrategy::FullComplement,
            r: full,
        });
    }
    search(sys, f, candidates, controller_conditions, tol)
}

/// Ordered search for `R`: empty, the Krylov rows `FA, .., FA^(ν-1)`, then the Kalman complement
/// that extends `F` to a basis of the observable row space.
pub fn find_observer_augmentation(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    tol: &TolerancePolicy,
) -> Result<AugmentationResult> {
    find_observer_augmentation_with_prefix(sys, f, &Matrix::zeros(0, sys.states()), tol)
}

/// Like [`find_observer_augmentation`], but every candidate starts with the
/// rows `prefix` (the controller augmentation `R1` when the observer feeds a
/// functional controller, so that `R = stack(R1, R2)`).
pub fn find_observer_augmentation_with_prefix(
    sys: &SystemTriple,
    f: &FunctionalTarget,
    prefix: &Matrix,
    tol: &TolerancePolicy,
) -> Result<AugmentationResult> {
    if !is_functional_observable(sys, f, tol)? {
        return Err(Error::NotFunctionalObservable);
    }
    let n = sys.states();
    let prefix = if prefix.nrows() == 0 { Matrix::zeros(0, n) } else { prefix.clone() };
    let with_prefix = |extra: &Matrix| -> Matrix {
        if extra.nrows() == 0 {
            prefix.clone()
        } else if prefix.nrows() == 0 {
            extra.clone()
        } else {
            vstack(&[&prefix, extra])
        }
    };
    let first = if prefix.nrows() == 0 { AugmentationStrategy::Empty } else { AugmentationStrategy::Given };
    let mut candidates = vec![Candidate { strategy: first, r: prefix.clone() }];

    let base = super::augmented_functional(f.f(), &prefix, tol)?;
    let base_target = FunctionalTarget::new(base.clone(), n, tol)?;
    let thm16 = build_augmentation_thm16(sys.a(), &base_target, tol)?;
    if thm16.nrows() > 0 {
        candidates.push(Candidate {
            strategy: AugmentationStrategy::Theorem16,
            r: with_prefix(&thm16),
        });
    }
    let observable = observability_subspace(sys.a(), sys.c(), tol)?;
    let kalman = completion_rows(&base, &observable, tol);
    if kalman.nrows() > 0 {
        candidates.push(Candidate {
            strategy: AugmentationStrategy::KalmanComplement,
            r: with_prefix(&kalman),
        });
    }
    search(sys, f, candidates, observer_conditions, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn tol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn theorem16_rows() {
        let ex = catalog::example3();
        let r = build_augmentation_thm16(ex.system.a(), &ex.functional(), &tol()).unwrap();
        let expected = Matrix::from_row_slice(1, 5, &[3.5, 3.5, -0.5, -0.5, 0.0]);
        assert!((r - expected).abs().max() < 1e-12);

        let id = FunctionalTarget::new(Matrix::identity(5, 5), 5, &tol()).unwrap();
        assert_eq!(build_augmentation_thm16(ex.system.a(), &id, &tol()).unwrap().nrows(), 0);

        let r8 = catalog::remark8();
        let r = build_augmentation_thm16(r8.system.a(), &r8.functional(), &tol()).unwrap();
        assert_eq!(r, Matrix::from_row_slice(1, 3, &[1.0, 3.0, 2.0]));
    }

    #[test]
    fn controller_search_examples() {
        let ex = catalog::example2();
        let res = find_controller_augmentation(&ex.system, &ex.functional(), &tol()).unwrap();
        assert_eq!(res.strategy, AugmentationStrategy::Empty);

        let ex = catalog::example3();
        let res = find_controller_augmentation(&ex.system, &ex.functional(), &tol()).unwrap();
        assert_eq!(res.strategy, AugmentationStrategy::Theorem16);
        assert_eq!(res.candidates.len(), 2);
        assert_eq!(res.candidates[0].rank_condition, Some(false));
    }

    #[test]
    fn observer_search_examples() {
        let ex = catalog::example2();
        let res = find_observer_augmentation(&ex.system, &ex.functional(), &tol()).unwrap();
        assert_eq!(res.strategy, AugmentationStrategy::Empty);

        let ex = catalog::example3();
        let r1 = ex.f.clone() * ex.system.a();
        let res = find_observer_augmentation_with_prefix(&ex.system, &ex.functional(), &r1, &tol()).unwrap();
        assert_eq!(res.strategy, AugmentationStrategy::Given);
        assert_eq!(res.r, r1);
    }

    #[test]
    fn unobservable_direction_is_rejected() {
        let ex = catalog::example1(0);
        let f = FunctionalTarget::new(Matrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0]), 4, &tol()).unwrap();
        assert!(matches!(
            find_observer_augmentation(&ex.system, &f, &tol()),
            Err(Error::NotFunctionalObservable)
        ));
    }

    #[test]
    fn kalman_complement_spans_observable_space() {
        let ex = catalog::example2();
        let observable = observability_subspace(ex.system.a(), ex.system.c(), &tol()).unwrap();
        let rows = completion_rows(&ex.f, &observable, &tol());
        assert_eq!(rows.nrows(), 1);
        let fbar = vstack(&[&ex.f, &rows]);
        for row in fbar.row_iter() {
            let res = observable.residual(&row.transpose());
            assert!(res < 1e-10, "{res:e}");
        }
    }
}
