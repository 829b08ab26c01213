//! Derivations, right multiplications and the weight machinery used to
//! recognise the nilradical's eigenvalue structure.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Algebra, Subspace};
use crate::error::{AlgebraError, Result};
use crate::linalg::{coordinates, leading_index, rational_roots, row_basis, Matrix};
use crate::scalar::{int, is_zero_vec, Scalar};

/// `R_x` as a matrix acting on column vectors: column `i` is `[b_i, x]`.
pub fn right_mult_matrix(a: &Algebra, x: &[Scalar]) -> Result<Matrix> {
    let n = a.dim();
    if x.len() != n {
        return Err(AlgebraError::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    let cols: Vec<Vec<Scalar>> = (0..n).map(|i| a.br(&a.unit(i), x)).collect();
    Ok(Matrix::from_cols(&cols, n))
}

/// `R_x` restricted to an `R_x`-invariant subspace, in the coordinates of
/// the subspace's echelon basis.
pub fn restricted_right_mult(a: &Algebra, n: &Subspace, x: &[Scalar]) -> Result<Matrix> {
    if x.len() != a.dim() {
        return Err(AlgebraError::Dimension {
            expected: a.dim(),
            got: x.len(),
        });
    }
    let mut cols = Vec::with_capacity(n.dim());
    for v in n.basis() {
        let image = a.br(v, x);
        cols.push(coordinates(n.basis(), &image).ok_or(AlgebraError::NotAnIdeal)?);
    }
    Ok(Matrix::from_cols(&cols, n.dim()))
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerivationSpace {
    pub basis: Vec<Matrix>,
    pub dim: usize,
}

fn derivation_equations(a: &Algebra) -> Matrix {
    // D acts on columns, unknown D[r][c] sits at index r*n + c.
    // For each (i, j, m): sum_r D[m][r] c_ij^r - D[r][i] c_rj^m - D[r][j] c_ir^m = 0
    let n = a.dim();
    let mut eqs = Matrix::zeros(n * n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            for m in 0..n {
                let row = (i * n + j) * n + m;
                for r in 0..n {
                    let c = a.coeff(i, j, r);
                    if !c.is_zero() {
                        eqs[(row, m * n + r)] += c;
                    }
                    let c = a.coeff(r, j, m);
                    if !c.is_zero() {
                        eqs[(row, r * n + i)] -= c;
                    }
                    let c = a.coeff(i, r, m);
                    if !c.is_zero() {
                        eqs[(row, r * n + j)] -= c;
                    }
                }
            }
        }
    }
    eqs
}

pub fn derivation_space(a: &Algebra) -> DerivationSpace {
    let n = a.dim();
    let basis: Vec<Matrix> = derivation_equations(a)
        .kernel()
        .into_iter()
        .map(|v| Matrix::from_rows(v.chunks(n).map(<[Scalar]>::to_vec).collect(), n))
        .collect();
    let dim = basis.len();
    DerivationSpace { basis, dim }
}

/// `d([x,y]) = [d(x),y] + [x,d(y)]` on all basis pairs.
pub fn is_derivation(a: &Algebra, d: &Matrix) -> bool {
    let n = a.dim();
    if d.rows() != n || d.cols() != n {
        return false;
    }
    let flat: Vec<Scalar> = d.to_rows().concat();
    let eqs = derivation_equations(a);
    is_zero_vec(&eqs.apply(&flat))
}

pub fn is_nilpotent_matrix(m: &Matrix) -> Result<bool> {
    if !m.is_square() {
        return Err(AlgebraError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let mut power = m.clone();
    let mut exponent = 1;
    while exponent < n {
        if power.is_zero() {
            return Ok(true);
        }
        power = power.mul(&power);
        exponent *= 2;
    }
    Ok(power.is_zero())
}

/// A joint generalised eigenspace of commuting operators.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeightSpace {
    /// Eigenvalue of each operator, in operator order.
    pub weight: Vec<Scalar>,
    /// Echelon basis, in the coordinates the operators act on.
    pub basis: Vec<Vec<Scalar>>,
}

fn restrict_to(op: &Matrix, basis: &[Vec<Scalar>]) -> Result<Matrix> {
    let cols = basis
        .iter()
        .map(|v| {
            coordinates(basis, &op.apply(v))
                .ok_or_else(|| AlgebraError::Internal("weight block is not invariant".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_cols(&cols, basis.len()))
}

/// Joint generalised weight decomposition of pairwise commuting square
/// operators on `Q^d`. Blocks come ordered by the pivot of their first
/// echelon row.
pub fn weight_decomposition(ops: &[Matrix], d: usize) -> Result<Vec<WeightSpace>> {
    for op in ops {
        if op.rows() != d || op.cols() != d {
            return Err(AlgebraError::Dimension {
                expected: d,
                got: op.rows().max(op.cols()),
            });
        }
    }
    for (i, p) in ops.iter().enumerate() {
        for q in &ops[i + 1..] {
            if p.mul(q) != q.mul(p) {
                return Err(AlgebraError::NonCommuting);
            }
        }
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let mut blocks = vec![WeightSpace {
        weight: Vec::new(),
        basis: Matrix::identity(d).to_rows(),
    }];
    for op in ops {
        let mut next = Vec::new();
        for block in blocks {
            let local = restrict_to(op, &block.basis)?;
            let roots = rational_roots(&local.charpoly()?);
            let found: usize = roots.iter().map(|(_, m)| m).sum();
            if found < block.basis.len() {
                return Err(AlgebraError::UnsupportedField(
                    "right multiplication has eigenvalues outside the rationals".into(),
                ));
            }
            let size = block.basis.len();
            for (lambda, mult) in roots {
                let shifted = local.sub(&Matrix::identity(size).scale(&lambda)).pow(mult);
                let vecs: Vec<Vec<Scalar>> = shifted
                    .kernel()
                    .into_iter()
                    .map(|c| {
                        let mut v = vec![Scalar::zero(); d];
                        for (coef, b) in c.iter().zip(&block.basis) {
                            if coef.is_zero() {
                                continue;
                            }
                            for (x, y) in v.iter_mut().zip(b) {
                                *x += coef * y;
                            }
                        }
                        v
                    })
                    .collect();
                let mut weight = block.weight.clone();
                weight.push(lambda);
                next.push(WeightSpace {
                    weight,
                    basis: row_basis(&vecs, d),
                });
            }
        }
        blocks = next;
    }
    blocks.sort_by_key(|b| leading_index(&b.basis[0]));
    Ok(blocks)
}

/// Weight decomposition of `n` under `R_q|n` for `q` in `q_basis`, with
/// block bases expressed in ambient coordinates.
pub fn nilradical_weights(
    a: &Algebra,
    n: &Subspace,
    q_basis: &[Vec<Scalar>],
) -> Result<Vec<WeightSpace>> {
    let ops = q_basis
        .iter()
        .map(|q| restricted_right_mult(a, n, q))
        .collect::<Result<Vec<_>>>()?;
    let mut blocks = weight_decomposition(&ops, n.dim())?;
    for b in &mut blocks {
        let ambient: Vec<Vec<Scalar>> = b
            .basis
            .iter()
            .map(|c| {
                let mut v = vec![Scalar::zero(); a.dim()];
                for (coef, row) in c.iter().zip(n.basis()) {
                    if coef.is_zero() {
                        continue;
                    }
                    for (x, y) in v.iter_mut().zip(row) {
                        *x += coef * y;
                    }
                }
                v
            })
            .collect();
        b.basis = row_basis(&ambient, a.dim());
    }
    blocks.sort_by_key(|b| leading_index(&b.basis[0]));
    Ok(blocks)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NilIndependence {
    pub rank: usize,
    /// One row per dimension of `N` (weights repeated by block size), one
    /// column per element of the complement basis.
    pub eigen_matrix: Matrix,
    pub independent: bool,
}

pub fn nil_independence_rank(
    a: &Algebra,
    n: &Subspace,
    q_basis: &[Vec<Scalar>],
) -> Result<NilIndependence> {
    let blocks = nilradical_weights(a, n, q_basis)?;
    let mut rows = Vec::new();
    for b in &blocks {
        for _ in 0..b.basis.len() {
            rows.push(b.weight.clone());
        }
    }
    let eigen_matrix = Matrix::from_rows(rows, q_basis.len());
    let rank = if q_basis.is_empty() {
        0
    } else {
        eigen_matrix.rank()
    };
    Ok(NilIndependence {
        rank,
        eigen_matrix,
        independent: rank == q_basis.len(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DimBound {
    pub holds: bool,
    pub witness_rank: usize,
}

/// Certifies `|Q| <= ` the number of nil-independent derivations of `N`
/// using the restricted right multiplications as the witness family.
pub fn check_dim_bound(a: &Algebra, n: &Subspace, q_basis: &[Vec<Scalar>]) -> Result<DimBound> {
    let r = nil_independence_rank(a, n, q_basis)?;
    Ok(DimBound {
        holds: r.independent,
        witness_rank: r.rank,
    })
}

/// Samples random nonzero integer combinations of `ops` and returns the
/// first coefficient vector whose combination is nilpotent.
pub fn find_nilpotent_combination(
    ops: &[Matrix],
    samples: usize,
    seed: u64,
) -> Result<Option<Vec<Scalar>>> {
    let Some(first) = ops.first() else {
        return Ok(None);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let coeffs: Vec<Scalar> = loop {
            let c: Vec<Scalar> = ops.iter().map(|_| int(rng.gen_range(-6..=6))).collect();
            if !is_zero_vec(&c) {
                break c;
            }
        };
        let mut m = Matrix::zeros(first.rows(), first.cols());
        for (c, op) in coeffs.iter().zip(ops) {
            if !c.is_zero() {
                m = m.add(&op.scale(c));
            }
        }
        if is_nilpotent_matrix(&m)? {
            return Ok(Some(coeffs));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{instantiate_max_class, TwoDim};
    use crate::scalar::frac;

    fn l2_direct_sum(k: usize) -> Algebra {
        instantiate_max_class(&vec![TwoDim::L2; k]).unwrap()
    }

    fn l2() -> Algebra {
        l2_direct_sum(1)
    }

    #[test]
    fn right_mult_in_l2() {
        let a = l2();
        let r = right_mult_matrix(&a, &a.unit(1)).unwrap();
        assert_eq!(r.apply(&a.unit(0)), a.unit(0));
        assert_eq!(r.apply(&a.unit(1)), vec![int(0), int(0)]);
        assert!(right_mult_matrix(&a, &[int(0), int(0)]).unwrap().is_zero());
        assert!(right_mult_matrix(&a, &[int(0)]).is_err());
    }

    #[test]
    fn derivation_dimensions() {
        assert_eq!(derivation_space(&Algebra::abelian(3)).dim, 9);
        // l2 with [x,e] = 0: the pairs (e,e), (e,x), (x,x) force d(x) = 0 and
        // d(e) in span{e}, leaving only multiples of R_x.
        let der = derivation_space(&l2());
        assert_eq!(der.dim, 1);
        // the Lie algebra [e,x] = e = -[x,e] has d(x) in span{e} as well
        let mut lie = l2();
        lie.set_product(1, 0, &[int(-1), int(0)]);
        assert_eq!(derivation_space(&lie).dim, 2);
        for d in &der.basis {
            assert!(is_derivation(&l2(), d));
        }
        let r = right_mult_matrix(&l2(), &l2().unit(1)).unwrap();
        assert!(is_derivation(&l2(), &r));
        let not = Matrix::from_rows(vec![vec![int(0), int(0)], vec![int(0), int(1)]], 2);
        assert!(!is_derivation(&l2(), &not));
    }

    #[test]
    fn nilpotent_matrices() {
        assert!(is_nilpotent_matrix(&Matrix::zeros(3, 3)).unwrap());
        assert!(!is_nilpotent_matrix(&Matrix::identity(3)).unwrap());
        let shift = Matrix::from_fn(3, 3, |r, c| if c == r + 1 { int(1) } else { int(0) });
        assert!(is_nilpotent_matrix(&shift).unwrap());
        assert!(is_nilpotent_matrix(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn weights_of_jordan_and_diagonal() {
        let jordan = Matrix::from_rows(vec![vec![int(2), int(1)], vec![int(0), int(2)]], 2);
        let w = weight_decomposition(&[jordan], 2).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].weight, vec![int(2)]);
        let diag = Matrix::from_rows(vec![vec![frac(1, 2), int(0)], vec![int(0), int(-3)]], 2);
        let w = weight_decomposition(&[diag], 2).unwrap();
        assert_eq!(
            w.iter().map(|b| b.weight[0].clone()).collect::<Vec<_>>(),
            vec![frac(1, 2), int(-3)]
        );
    }

    #[test]
    fn irrational_and_noncommuting() {
        let rot = Matrix::from_rows(vec![vec![int(0), int(2)], vec![int(1), int(0)]], 2);
        assert!(matches!(
            weight_decomposition(&[rot], 2),
            Err(AlgebraError::UnsupportedField(_))
        ));
        let a = Matrix::from_rows(vec![vec![int(1), int(0)], vec![int(0), int(0)]], 2);
        let b = Matrix::from_rows(vec![vec![int(0), int(1)], vec![int(0), int(0)]], 2);
        assert_eq!(
            weight_decomposition(&[a, b], 2),
            Err(AlgebraError::NonCommuting)
        );
    }

    #[test]
    fn direct_sum_of_l2_has_full_rank() {
        let a = l2_direct_sum(3);
        let n = Subspace::coordinate(6, &[0, 1, 2]);
        let q: Vec<_> = (3..6).map(|i| a.unit(i)).collect();
        let r = nil_independence_rank(&a, &n, &q).unwrap();
        assert_eq!(r.rank, 3);
        assert_eq!(r.eigen_matrix, Matrix::identity(3));
        assert_eq!(
            check_dim_bound(&a, &n, &q).unwrap(),
            DimBound {
                holds: true,
                witness_rank: 3
            }
        );
        let ops: Vec<_> = q
            .iter()
            .map(|x| restricted_right_mult(&a, &n, x).unwrap())
            .collect();
        assert_eq!(find_nilpotent_combination(&ops, 200, 7).unwrap(), None);
    }

    #[test]
    fn zero_operators_are_dependent() {
        let a = Algebra::abelian(3);
        let n = Subspace::coordinate(3, &[0, 1]);
        let r = nil_independence_rank(&a, &n, &[a.unit(2)]).unwrap();
        assert_eq!(r.rank, 0);
        assert!(!r.independent);
        let r = check_dim_bound(&a, &Subspace::full(3), &[]).unwrap();
        assert!(r.holds);
    }
}
