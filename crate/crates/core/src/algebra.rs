//! Finite-dimensional algebras given by structure constants, with the
//! Leibniz-specific predicates, series, ideals and quotients.

use std::collections::HashSet;

use num_traits::{One, Zero};

use crate::error::{AlgebraError, Result};
use crate::linalg::{coordinates, row_basis, Matrix};
use crate::scalar::Scalar;

/// Structure constants `c[i][j][m]` with `[b_i, b_j] = sum_m c[i][j][m] b_m`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Algebra {
    dim: usize,
    labels: Vec<String>,
    tensor: Vec<Scalar>,
}

impl Algebra {
    pub fn new(labels: Vec<String>, tensor: Vec<Scalar>) -> Result<Self> {
        let dim = labels.len();
        if dim == 0 {
            return Err(AlgebraError::Parse(
                "algebra dimension must be positive".into(),
            ));
        }
        if tensor.len() != dim * dim * dim {
            return Err(AlgebraError::Dimension {
                expected: dim * dim * dim,
                got: tensor.len(),
            });
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != dim {
            return Err(AlgebraError::Parse("basis labels must be distinct".into()));
        }
        Ok(Algebra {
            dim,
            labels,
            tensor,
        })
    }

    /// The algebra with all products zero, basis labelled `b1..bn`.
    pub fn zero(dim: usize) -> Self {
        let labels = (1..=dim).map(|i| format!("b{i}")).collect();
        Algebra {
            dim,
            labels,
            tensor: vec![Scalar::zero(); dim * dim * dim],
        }
    }

    /// The abelian algebra `a_k` with basis `e1..ek`.
    pub fn abelian(k: usize) -> Self {
        Self::zero(k).with_labels((1..=k).map(|i| format!("e{i}")).collect())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.dim);
        self.labels = labels;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn tensor(&self) -> &[Scalar] {
        &self.tensor
    }

    /// Coordinates of `[b_i, b_j]`.
    pub fn product(&self, i: usize, j: usize) -> &[Scalar] {
        let n = self.dim;
        &self.tensor[(i * n + j) * n..(i * n + j + 1) * n]
    }

    pub fn coeff(&self, i: usize, j: usize, m: usize) -> &Scalar {
        &self.tensor[(i * self.dim + j) * self.dim + m]
    }

    pub fn set_product(&mut self, i: usize, j: usize, value: &[Scalar]) {
        let n = self.dim;
        assert_eq!(value.len(), n);
        self.tensor[(i * n + j) * n..(i * n + j + 1) * n].clone_from_slice(value);
    }

    /// Adds `value` to the coefficient of `b_m` in `[b_i, b_j]`.
    pub fn add_coeff(&mut self, i: usize, j: usize, m: usize, value: Scalar) {
        let n = self.dim;
        self.tensor[(i * n + j) * n + m] += value;
    }

    pub fn unit(&self, i: usize) -> Vec<Scalar> {
        let mut v = vec![Scalar::zero(); self.dim];
        v[i] = Scalar::one();
        v
    }

    pub fn nonzero_products(&self) -> Vec<(usize, usize)> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.product(i, j).iter().any(|c| !c.is_zero()) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn bracket(&self, x: &[Scalar], y: &[Scalar]) -> Result<Vec<Scalar>> {
        for v in [x, y] {
            if v.len() != self.dim {
                return Err(AlgebraError::Dimension {
                    expected: self.dim,
                    got: v.len(),
                });
            }
        }
        Ok(self.br(x, y))
    }

    pub(crate) fn br(&self, x: &[Scalar], y: &[Scalar]) -> Vec<Scalar> {
        let n = self.dim;
        let mut out = vec![Scalar::zero(); n];
        for (i, xi) in x.iter().enumerate() {
            if xi.is_zero() {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if yj.is_zero() {
                    continue;
                }
                let c = xi * yj;
                for (m, t) in self.product(i, j).iter().enumerate() {
                    if !t.is_zero() {
                        out[m] += &c * t;
                    }
                }
            }
        }
        out
    }

    /// All basis triples violating `[a,[b,c]] = [[a,b],c] - [[a,c],b]`.
    pub fn check_leibniz(&self) -> Vec<LeibnizViolation> {
        let n = self.dim;
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let lhs = self.br(&self.unit(a), self.product(b, c));
                    let r1 = self.br(self.product(a, b), &self.unit(c));
                    let r2 = self.br(self.product(a, c), &self.unit(b));
                    let defect: Vec<Scalar> = lhs
                        .iter()
                        .zip(r1.iter().zip(&r2))
                        .map(|(l, (p, q))| l - p + q)
                        .collect();
                    if defect.iter().any(|d| !d.is_zero()) {
                        out.push(LeibnizViolation {
                            triple: (a, b, c),
                            defect,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn is_leibniz(&self) -> bool {
        self.check_leibniz().is_empty()
    }

    /// Structure constants in the basis whose `a`-th vector is row `a` of `p`.
    pub fn change_basis(&self, p: &Matrix) -> Result<Algebra> {
        let n = self.dim;
        if p.rows() != n || p.cols() != n {
            return Err(AlgebraError::Dimension {
                expected: n,
                got: p.rows().max(p.cols()),
            });
        }
        let inv = p.inverse()?;
        // t1[a][j][m] = sum_i p[a][i] c[i][j][m]
        let mut t1 = vec![Scalar::zero(); n * n * n];
        for a in 0..n {
            for i in 0..n {
                let pa = &p[(a, i)];
                if pa.is_zero() {
                    continue;
                }
                for j in 0..n {
                    for (m, c) in self.product(i, j).iter().enumerate() {
                        if !c.is_zero() {
                            t1[(a * n + j) * n + m] += pa * c;
                        }
                    }
                }
            }
        }
        let mut tensor = vec![Scalar::zero(); n * n * n];
        let mut t2 = vec![Scalar::zero(); n];
        for a in 0..n {
            for b in 0..n {
                t2.iter_mut().for_each(|x| *x = Scalar::zero());
                for j in 0..n {
                    let pb = &p[(b, j)];
                    if pb.is_zero() {
                        continue;
                    }
                    for m in 0..n {
                        let t = &t1[(a * n + j) * n + m];
                        if !t.is_zero() {
                            t2[m] += pb * t;
                        }
                    }
                }
                if t2.iter().all(Zero::is_zero) {
                    continue;
                }
                let coords = inv.apply_left(&t2);
                tensor[(a * n + b) * n..(a * n + b + 1) * n].clone_from_slice(&coords);
            }
        }
        Ok(Algebra {
            dim: n,
            labels: self.labels.clone(),
            tensor,
        })
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LeibnizViolation {
    pub triple: (usize, usize, usize),
    pub defect: Vec<Scalar>,
}

/// A subspace stored by its reduced row-echelon basis, so equality of
/// subspaces is equality of values.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Subspace {
    ambient_dim: usize,
    rows: Vec<Vec<Scalar>>,
}

impl Subspace {
    pub fn span(ambient_dim: usize, vectors: &[Vec<Scalar>]) -> Result<Self> {
        for v in vectors {
            if v.len() != ambient_dim {
                return Err(AlgebraError::Dimension {
                    expected: ambient_dim,
                    got: v.len(),
                });
            }
        }
        Ok(Subspace {
            ambient_dim,
            rows: row_basis(vectors, ambient_dim),
        })
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            rows: Vec::new(),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            rows: Matrix::identity(ambient_dim).to_rows(),
        }
    }

    /// Span of the given coordinate axes.
    pub fn coordinate(ambient_dim: usize, axes: &[usize]) -> Self {
        let vecs: Vec<Vec<Scalar>> = axes
            .iter()
            .map(|&i| {
                let mut v = vec![Scalar::zero(); ambient_dim];
                v[i] = Scalar::one();
                v
            })
            .collect();
        Subspace {
            ambient_dim,
            rows: row_basis(&vecs, ambient_dim),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn basis(&self) -> &[Vec<Scalar>] {
        &self.rows
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, v: &[Scalar]) -> bool {
        v.len() == self.ambient_dim && coordinates(&self.rows, v).is_some()
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.rows.iter().all(|v| self.contains(v))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut v = self.rows.clone();
        v.extend(other.rows.iter().cloned());
        Subspace {
            ambient_dim: self.ambient_dim,
            rows: row_basis(&v, self.ambient_dim),
        }
    }

    pub fn intersection(&self, other: &Subspace) -> Subspace {
        // u = sum a_i r_i = sum b_j s_j
        let n = self.ambient_dim;
        if self.is_zero() || other.is_zero() {
            return Subspace::zero(n);
        }
        let mut cols = self.rows.clone();
        cols.extend(
            other
                .rows
                .iter()
                .map(|r| r.iter().map(|x| -x).collect::<Vec<_>>()),
        );
        let m = Matrix::from_cols(&cols, n);
        let vecs: Vec<Vec<Scalar>> = m
            .kernel()
            .into_iter()
            .map(|k| {
                let mut u = vec![Scalar::zero(); n];
                for (a, r) in k.iter().zip(&self.rows) {
                    if a.is_zero() {
                        continue;
                    }
                    for (x, y) in u.iter_mut().zip(r) {
                        *x += a * y;
                    }
                }
                u
            })
            .collect();
        Subspace {
            ambient_dim: n,
            rows: row_basis(&vecs, n),
        }
    }

    /// Coordinate axes extending this subspace's basis to the whole space.
    pub fn complement_axes(&self) -> Vec<usize> {
        let mut cur = self.rows.clone();
        let mut axes = Vec::new();
        for i in 0..self.ambient_dim {
            if cur.len() == self.ambient_dim {
                break;
            }
            let mut e = vec![Scalar::zero(); self.ambient_dim];
            e[i] = Scalar::one();
            let mut next = cur.clone();
            next.push(e);
            if Matrix::from_rows(next.clone(), self.ambient_dim).rank() > cur.len() {
                cur = next;
                axes.push(i);
            }
        }
        axes
    }
}

fn check_ambient(a: &Algebra, u: &Subspace) -> Result<()> {
    if u.ambient_dim != a.dim {
        return Err(AlgebraError::Dimension {
            expected: a.dim,
            got: u.ambient_dim,
        });
    }
    Ok(())
}

/// `[U, V]`: the span of all brackets of basis vectors.
pub fn subspace_product(a: &Algebra, u: &Subspace, v: &Subspace) -> Result<Subspace> {
    check_ambient(a, u)?;
    check_ambient(a, v)?;
    let mut out = Vec::new();
    for x in &u.rows {
        for y in &v.rows {
            let p = a.br(x, y);
            if p.iter().any(|c| !c.is_zero()) {
                out.push(p);
            }
        }
    }
    Subspace::span(a.dim, &out)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SeriesKind {
    LowerCentral,
    Derived,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SeriesReport {
    pub kind: SeriesKind,
    pub terms: Vec<Subspace>,
    pub stabilized: bool,
    pub terminal_dim: usize,
}

impl SeriesReport {
    pub fn dims(&self) -> Vec<usize> {
        self.terms.iter().map(Subspace::dim).collect()
    }
}

/// Series of `U` inside `a` (`U` must be a subalgebra); stops before the
/// first repeated term.
pub fn series_of(a: &Algebra, u: &Subspace, kind: SeriesKind) -> Result<SeriesReport> {
    check_ambient(a, u)?;
    let mut terms = vec![u.clone()];
    let cap = a.dim + 1;
    loop {
        let last = terms.last().unwrap();
        let next = match kind {
            SeriesKind::LowerCentral => subspace_product(a, last, u)?,
            SeriesKind::Derived => subspace_product(a, last, last)?,
        };
        if &next == last {
            break;
        }
        terms.push(next);
        if terms.len() > cap {
            return Err(AlgebraError::Internal(
                "series did not stabilize within dim+1 steps".into(),
            ));
        }
    }
    let terminal_dim = terms.last().unwrap().dim();
    Ok(SeriesReport {
        kind,
        terms,
        stabilized: true,
        terminal_dim,
    })
}

pub fn series(a: &Algebra, kind: SeriesKind) -> Result<SeriesReport> {
    series_of(a, &Subspace::full(a.dim), kind)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AlgebraClass {
    /// `class` is the first index `n` with `L^n = 0`.
    Nilpotent {
        class: usize,
    },
    /// `derived_length` is the number of nonzero terms of the derived series.
    SolvableNotNilpotent {
        derived_length: usize,
    },
    Neither,
}

pub fn algebra_class(a: &Algebra) -> Result<AlgebraClass> {
    let lcs = series(a, SeriesKind::LowerCentral)?;
    if lcs.terminal_dim == 0 {
        return Ok(AlgebraClass::Nilpotent {
            class: lcs.terms.len(),
        });
    }
    let ds = series(a, SeriesKind::Derived)?;
    if ds.terminal_dim == 0 {
        return Ok(AlgebraClass::SolvableNotNilpotent {
            derived_length: ds.terms.len() - 1,
        });
    }
    Ok(AlgebraClass::Neither)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Annihilators {
    pub right: Subspace,
    pub left: Subspace,
    pub center: Subspace,
}

/// `Ann_r = {x : [y,x] = 0 for all y}`, `Ann_l = {x : [x,y] = 0 for all y}`.
pub fn annihilators_center(a: &Algebra) -> Annihilators {
    let n = a.dim;
    // Ann_r: for every i, m: sum_j x_j c[i][j][m] = 0
    let right_eqs = Matrix::from_fn(n * n, n, |r, j| a.coeff(r / n, j, r % n).clone());
    let left_eqs = Matrix::from_fn(n * n, n, |r, i| a.coeff(i, r / n, r % n).clone());
    let right = Subspace {
        ambient_dim: n,
        rows: row_basis(&right_eqs.kernel(), n),
    };
    let left = Subspace {
        ambient_dim: n,
        rows: row_basis(&left_eqs.kernel(), n),
    };
    let center = right.intersection(&left);
    Annihilators {
        right,
        left,
        center,
    }
}

pub fn is_ideal(a: &Algebra, u: &Subspace) -> Result<bool> {
    let full = Subspace::full(a.dim);
    Ok(u.contains_subspace(&subspace_product(a, u, &full)?)
        && u.contains_subspace(&subspace_product(a, &full, u)?))
}

/// Smallest two-sided ideal containing `u`.
pub fn ideal_closure(a: &Algebra, u: &Subspace) -> Result<Subspace> {
    check_ambient(a, u)?;
    let full = Subspace::full(a.dim);
    let mut cur = u.clone();
    loop {
        let next = cur
            .sum(&subspace_product(a, &cur, &full)?)
            .sum(&subspace_product(a, &full, &cur)?);
        if next == cur {
            return Ok(cur);
        }
        cur = next;
    }
}

/// Nilpotency of a subalgebra `u` (its own lower central series reaches zero).
pub fn is_nilpotent_subalgebra(a: &Algebra, u: &Subspace) -> Result<bool> {
    Ok(series_of(a, u, SeriesKind::LowerCentral)?.terminal_dim == 0)
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NilradicalCertificate {
    pub is_nilpotent_ideal: bool,
    pub one_dim_extension_maximal: bool,
    pub failing_witness: Option<Vec<Scalar>>,
}

impl NilradicalCertificate {
    pub fn passed(&self) -> bool {
        self.is_nilpotent_ideal && self.one_dim_extension_maximal
    }
}

/// Verifies that `n` is a nilpotent ideal and that no ideal generated by `n`
/// and one complement axis is nilpotent.
pub fn nilradical_check(a: &Algebra, n: &Subspace) -> Result<NilradicalCertificate> {
    check_ambient(a, n)?;
    let is_nilpotent_ideal = is_ideal(a, n)? && is_nilpotent_subalgebra(a, n)?;
    if !is_nilpotent_ideal {
        return Ok(NilradicalCertificate {
            is_nilpotent_ideal,
            one_dim_extension_maximal: false,
            failing_witness: None,
        });
    }
    for axis in n.complement_axes() {
        let v = a.unit(axis);
        let mut gens = n.rows.clone();
        gens.push(v.clone());
        let ideal = ideal_closure(a, &Subspace::span(a.dim, &gens)?)?;
        if is_nilpotent_subalgebra(a, &ideal)? {
            return Ok(NilradicalCertificate {
                is_nilpotent_ideal,
                one_dim_extension_maximal: false,
                failing_witness: Some(v),
            });
        }
    }
    Ok(NilradicalCertificate {
        is_nilpotent_ideal,
        one_dim_extension_maximal: true,
        failing_witness: None,
    })
}

/// Quotient by an ideal, realised on the complement spanned by the first
/// coordinate axes independent of the ideal.
pub fn quotient_algebra(a: &Algebra, ideal: &Subspace) -> Result<Algebra> {
    let axes = ideal.complement_axes();
    let complement: Vec<Vec<Scalar>> = axes.iter().map(|&i| a.unit(i)).collect();
    let labels = axes.iter().map(|&i| a.labels[i].clone()).collect();
    quotient_on_complement(a, ideal, &complement, labels)
}

/// Quotient realised on an explicit complement of the ideal.
pub fn quotient_on_complement(
    a: &Algebra,
    ideal: &Subspace,
    complement: &[Vec<Scalar>],
    labels: Vec<String>,
) -> Result<Algebra> {
    check_ambient(a, ideal)?;
    if !is_ideal(a, ideal)? {
        return Err(AlgebraError::NotAnIdeal);
    }
    let q = complement.len();
    if q + ideal.dim() != a.dim {
        return Err(AlgebraError::Dimension {
            expected: a.dim - ideal.dim(),
            got: q,
        });
    }
    let mut basis: Vec<Vec<Scalar>> = complement.to_vec();
    basis.extend(ideal.rows.iter().cloned());
    let change = Matrix::from_rows(basis, a.dim);
    let inv = change
        .inverse()
        .map_err(|_| AlgebraError::Parse("complement is not independent of the ideal".into()))?;
    let mut tensor = vec![Scalar::zero(); q * q * q];
    for i in 0..q {
        for j in 0..q {
            let p = a.br(&complement[i], &complement[j]);
            let coords = inv.apply_left(&p);
            tensor[(i * q + j) * q..(i * q + j + 1) * q].clone_from_slice(&coords[..q]);
        }
    }
    Algebra::new(labels, tensor)
}
