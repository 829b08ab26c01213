//! Dense exact linear algebra over the rationals: echelon forms, kernels,
//! inverses, characteristic polynomials and rational root isolation.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{AlgebraError, Result};
use crate::scalar::{fmt_scalar, Scalar};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(fmt_scalar).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Scalar;
    fn index(&self, (r, c): (usize, usize)) -> &Scalar {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Scalar {
        &mut self.data[r * self.cols + c]
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Scalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Scalar::one();
        }
        m
    }

    /// Builds a matrix from row vectors; `cols` is used when `rows` is empty.
    pub fn from_rows(rows: Vec<Vec<Scalar>>, cols: usize) -> Self {
        let r = rows.len();
        let mut data = Vec::with_capacity(r * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged matrix rows");
            data.extend(row);
        }
        Matrix {
            rows: r,
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Scalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_cols(cols: &[Vec<Scalar>], rows: usize) -> Self {
        Self::from_fn(rows, cols.len(), |r, c| cols[c][r].clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[Scalar] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self[(r, c)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Scalar>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == Matrix::identity(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = &self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(l, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Matrix times column vector.
    pub fn apply(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                let mut acc = Scalar::zero();
                for (a, b) in self.row(r).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc += a * b;
                    }
                }
                acc
            })
            .collect()
    }

    /// Row vector times matrix.
    pub fn apply_left(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![Scalar::zero(); self.cols];
        for (r, x) in v.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (c, o) in out.iter_mut().enumerate() {
                let a = &self[(r, c)];
                if !a.is_zero() {
                    *o += x * a;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: &Scalar) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Reduced row-echelon form together with the pivot columns.
    pub fn rref(&self) -> (Matrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut lead = 0;
        for c in 0..m.cols {
            if lead == m.rows {
                break;
            }
            let Some(p) = (lead..m.rows).find(|&r| !m[(r, c)].is_zero()) else {
                continue;
            };
            m.swap_rows(p, lead);
            let inv = m[(lead, c)].recip();
            for j in c..m.cols {
                let v = &m[(lead, j)] * &inv;
                m[(lead, j)] = v;
            }
            for r in 0..m.rows {
                if r == lead || m[(r, c)].is_zero() {
                    continue;
                }
                let f = m[(r, c)].clone();
                for j in c..m.cols {
                    if m[(lead, j)].is_zero() {
                        continue;
                    }
                    let v = &f * &m[(lead, j)];
                    m[(r, j)] -= v;
                }
            }
            pivots.push(c);
            lead += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `{v : self * v = 0}`, one vector per free column.
    pub fn kernel(&self) -> Vec<Vec<Scalar>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Scalar::zero(); self.cols];
                v[f] = Scalar::one();
                for (i, &p) in pivots.iter().enumerate() {
                    v[p] = -r[(i, f)].clone();
                }
                v
            })
            .collect()
    }

    /// A solution of `self * v = b` with free variables set to zero.
    pub fn solve(&self, b: &[Scalar]) -> Option<Vec<Scalar>> {
        assert_eq!(b.len(), self.rows);
        let aug = Matrix::from_fn(self.rows, self.cols + 1, |r, c| {
            if c < self.cols {
                self[(r, c)].clone()
            } else {
                b[r].clone()
            }
        });
        let (r, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut v = vec![Scalar::zero(); self.cols];
        for (i, &p) in pivots.iter().enumerate() {
            v[p] = r[(i, self.cols)].clone();
        }
        Some(v)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(AlgebraError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let aug = Matrix::from_fn(n, 2 * n, |r, c| {
            if c < n {
                self[(r, c)].clone()
            } else if c - n == r {
                Scalar::one()
            } else {
                Scalar::zero()
            }
        });
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(AlgebraError::Singular);
        }
        Ok(Matrix::from_fn(n, n, |i, j| r[(i, n + j)].clone()))
    }

    pub fn determinant(&self) -> Result<Scalar> {
        if !self.is_square() {
            return Err(AlgebraError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut m = self.clone();
        let n = m.rows;
        let mut det = Scalar::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| !m[(r, c)].is_zero()) else {
                return Ok(Scalar::zero());
            };
            if p != c {
                m.swap_rows(p, c);
                det = -det;
            }
            det *= m[(c, c)].clone();
            let inv = m[(c, c)].recip();
            for r in c + 1..n {
                if m[(r, c)].is_zero() {
                    continue;
                }
                let f = &m[(r, c)] * &inv;
                for j in c..n {
                    let v = &f * &m[(c, j)];
                    m[(r, j)] -= v;
                }
            }
        }
        Ok(det)
    }

    /// Monic characteristic polynomial `det(tI - M)`, coefficients low to high.
    pub fn charpoly(&self) -> Result<Vec<Scalar>> {
        if !self.is_square() {
            return Err(AlgebraError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        // Faddeev-LeVerrier.
        let n = self.rows;
        let mut coeffs = vec![Scalar::zero(); n + 1];
        coeffs[n] = Scalar::one();
        let mut m = Matrix::zeros(n, n);
        let id = Matrix::identity(n);
        for k in 1..=n {
            m = self.mul(&m).add(&id.scale(&coeffs[n - k + 1]));
            let am = self.mul(&m);
            let tr: Scalar = (0..n).map(|i| am[(i, i)].clone()).sum();
            coeffs[n - k] = -tr / Scalar::from_integer(BigInt::from(k));
        }
        Ok(coeffs)
    }

    pub fn pow(&self, e: usize) -> Matrix {
        let mut result = Matrix::identity(self.rows);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }
}

/// Row-reduced basis of the span of `vectors` (all of length `dim`).
pub fn row_basis(vectors: &[Vec<Scalar>], dim: usize) -> Vec<Vec<Scalar>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let (r, pivots) = Matrix::from_rows(vectors.to_vec(), dim).rref();
    (0..pivots.len()).map(|i| r.row(i).to_vec()).collect()
}

/// Coordinates of `v` in the (independent) rows `basis`, if `v` lies in their span.
pub fn coordinates(basis: &[Vec<Scalar>], v: &[Scalar]) -> Option<Vec<Scalar>> {
    let dim = v.len();
    if basis.is_empty() {
        return if v.iter().all(Zero::is_zero) {
            Some(Vec::new())
        } else {
            None
        };
    }
    Matrix::from_cols(basis, dim).solve(v)
}

pub fn leading_index(v: &[Scalar]) -> Option<usize> {
    v.iter().position(|x| !x.is_zero())
}

// ---------------------------------------------------------------------------
// Univariate polynomials, coefficients low to high.

fn trim(mut p: Vec<Scalar>) -> Vec<Scalar> {
    while p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

fn poly_eval(p: &[Scalar], x: &Scalar) -> Scalar {
    p.iter().rev().fold(Scalar::zero(), |acc, c| acc * x + c)
}

fn poly_derivative(p: &[Scalar]) -> Vec<Scalar> {
    trim(
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * Scalar::from_integer(BigInt::from(i)))
            .collect(),
    )
}

/// Quotient and remainder of `a / b`; `b` must be nonzero.
fn poly_divmod(a: &[Scalar], b: &[Scalar]) -> (Vec<Scalar>, Vec<Scalar>) {
    let b = trim(b.to_vec());
    let mut r = trim(a.to_vec());
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let mut q = vec![Scalar::zero(); r.len() - b.len() + 1];
    let lead = b.last().expect("division by zero polynomial").clone();
    while r.len() >= b.len() && !r.is_empty() {
        let shift = r.len() - b.len();
        let f = r.last().unwrap() / &lead;
        for (i, c) in b.iter().enumerate() {
            let v = &f * c;
            r[i + shift] -= v;
        }
        q[shift] = f;
        r.pop();
        r = trim(r);
    }
    (trim(q), r)
}

fn poly_gcd(a: &[Scalar], b: &[Scalar]) -> Vec<Scalar> {
    let mut a = trim(a.to_vec());
    let mut b = trim(b.to_vec());
    while !b.is_empty() {
        let (_, r) = poly_divmod(&a, &b);
        a = b;
        b = r;
    }
    if let Some(l) = a.last().cloned() {
        a.iter_mut().for_each(|c| *c /= &l);
    }
    a
}

fn sign_changes(chain: &[Vec<Scalar>], x: &Scalar) -> usize {
    let mut last: Option<bool> = None;
    let mut n = 0;
    for p in chain {
        let v = poly_eval(p, x);
        if v.is_zero() {
            continue;
        }
        let s = v.is_positive();
        if let Some(l) = last {
            if l != s {
                n += 1;
            }
        }
        last = Some(s);
    }
    n
}

/// Distinct rational roots of `p` with their multiplicities, in increasing order.
///
/// The search is exact: rational roots of an integer polynomial become
/// integer roots of a monic rescaling, which are isolated with a Sturm chain
/// on unit intervals.
pub fn rational_roots(p: &[Scalar]) -> Vec<(Scalar, usize)> {
    let p = trim(p.to_vec());
    if p.len() <= 1 {
        return Vec::new();
    }
    let sq = {
        let g = poly_gcd(&p, &poly_derivative(&p));
        poly_divmod(&p, &g).0
    };
    let n = sq.len() - 1;
    // integer coefficients
    let lcm = sq.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let ints: Vec<BigInt> = sq
        .iter()
        .map(|c| (c * Scalar::from_integer(lcm.clone())).to_integer())
        .collect();
    let lead = ints[n].clone();
    // q(y) = lead^{n-1} p(y / lead), monic with integer coefficients
    let mut q = Vec::with_capacity(n + 1);
    for (i, c) in ints.iter().enumerate() {
        let e = (n - 1).saturating_sub(i);
        let v = if i == n {
            BigInt::one()
        } else {
            c * num_traits::pow(lead.clone(), e)
        };
        q.push(Scalar::from_integer(v));
    }
    let bound = q[..n]
        .iter()
        .map(|c| c.abs().to_integer())
        .max()
        .unwrap_or_default()
        + BigInt::one();
    let mut chain = vec![q.clone(), poly_derivative(&q)];
    loop {
        let l = chain.len();
        let (_, r) = poly_divmod(&chain[l - 2], &chain[l - 1]);
        if r.is_empty() {
            break;
        }
        chain.push(r.into_iter().map(|c| -c).collect());
    }
    let mut int_roots = Vec::new();
    let mut stack = vec![(-bound.clone() - BigInt::one(), bound)];
    while let Some((a, b)) = stack.pop() {
        let fa = Scalar::from_integer(a.clone());
        let fb = Scalar::from_integer(b.clone());
        let count = sign_changes(&chain, &fa) as i64 - sign_changes(&chain, &fb) as i64;
        if count <= 0 {
            continue;
        }
        if &b - &a == BigInt::one() {
            if poly_eval(&q, &fb).is_zero() {
                int_roots.push(b);
            }
            continue;
        }
        let mid = (&a + &b).div_floor(&BigInt::from(2));
        stack.push((a, mid.clone()));
        stack.push((mid, b));
    }
    let mut roots: Vec<Scalar> = int_roots
        .into_iter()
        .map(|y| Scalar::new(y, lead.clone()))
        .collect();
    roots.sort();
    roots
        .into_iter()
        .map(|r| {
            let mut mult = 0;
            let mut cur = p.clone();
            let lin = vec![-r.clone(), Scalar::one()];
            loop {
                let (qq, rem) = poly_divmod(&cur, &lin);
                if !rem.is_empty() {
                    break;
                }
                mult += 1;
                cur = qq;
            }
            (r, mult)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{frac, int};

    fn m(rows: &[&[i64]]) -> Matrix {
        let c = rows[0].len();
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| int(x)).collect())
                .collect(),
            c,
        )
    }

    #[test]
    fn rref_and_rank() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        let (r, p) = a.rref();
        assert_eq!(p, vec![0, 1]);
        assert_eq!(r.row(0), &[int(1), int(0), int(1)]);
        assert_eq!(r.row(1), &[int(0), int(1), int(1)]);
        assert_eq!(a.rank(), 2);
    }

    #[test]
    fn kernel_vectors_are_annihilated() {
        let a = m(&[&[1, 2, 3], &[2, 4, 6]]);
        let k = a.kernel();
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(a.apply(v).iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn inverse_and_singular() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv), Matrix::identity(2));
        assert_eq!(
            m(&[&[1, 2], &[2, 4]]).inverse(),
            Err(AlgebraError::Singular)
        );
    }

    #[test]
    fn determinant_matches_expansion() {
        let a = m(&[&[2, 0, 1], &[1, 3, 2], &[1, 1, 1]]);
        // 2(3-2) - 0 + 1(1-3) = 0
        assert_eq!(a.determinant().unwrap(), int(0));
        assert_eq!(m(&[&[0, 1], &[1, 0]]).determinant().unwrap(), int(-1));
    }

    #[test]
    fn charpoly_of_companion() {
        // roots 1, 2, 3: t^3 - 6t^2 + 11t - 6
        let a = m(&[&[1, 5, 7], &[0, 2, 9], &[0, 0, 3]]);
        assert_eq!(
            a.charpoly().unwrap(),
            vec![int(-6), int(11), int(-6), int(1)]
        );
    }

    #[test]
    fn roots_with_multiplicity() {
        // (t - 1/2)^2 (t + 3) (t^2 + 1)
        let p = [frac(-3, 4), frac(1, 4), frac(-3, 4), int(2), int(0), int(1)];
        // expand check by evaluation
        for (r, _) in rational_roots(&p) {
            assert!(poly_eval(&p, &r).is_zero());
        }
        let lin = |r: Scalar| vec![-r, int(1)];
        let mut q = vec![int(1)];
        for f in [
            lin(frac(1, 2)),
            lin(frac(1, 2)),
            lin(int(-3)),
            vec![int(1), int(0), int(1)],
        ] {
            let mut out = vec![int(0); q.len() + f.len() - 1];
            for (i, a) in q.iter().enumerate() {
                for (j, b) in f.iter().enumerate() {
                    out[i + j] += a * b;
                }
            }
            q = out;
        }
        assert_eq!(rational_roots(&q), vec![(int(-3), 1), (frac(1, 2), 2)]);
    }

    #[test]
    fn irrational_roots_are_not_reported() {
        assert!(rational_roots(&[int(-2), int(0), int(1)]).is_empty());
    }

    #[test]
    fn large_rational_root() {
        let r = frac(123457, 991);
        let p = vec![r.clone() * frac(7, 3), -(r.clone() + frac(7, 3)), int(1)];
        let roots = rational_roots(&p);
        assert!(roots.contains(&(r, 1)));
        assert!(roots.contains(&(frac(7, 3), 1)));
    }
}
