//! Basis changes and the classifier: extraction of the general form from a
//! raw structure-constant table, then the case analysis that lands on a
//! family table and its canonical representative.

use std::fmt;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{annihilators_center, nilradical_check, subspace_product, Algebra, Subspace};
use crate::derivations::nilradical_weights;
use crate::error::{AlgebraError, Result};
use crate::families::{
    instantiate_family, normalize_params, FamilySpec, NormalizedSpec, Shape, Table,
};
use crate::linalg::{coordinates, row_basis, Matrix};
use crate::scalar::{fmt_scalar, int, is_zero_vec, Scalar};

/// New basis vectors as the rows of `matrix`, in old coordinates, together
/// with the named steps that produced it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BasisChange {
    pub matrix: Matrix,
    pub log: Vec<String>,
}

impl BasisChange {
    pub fn identity(n: usize) -> Self {
        BasisChange {
            matrix: Matrix::identity(n),
            log: Vec::new(),
        }
    }

    pub fn new(matrix: Matrix, log: Vec<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(AlgebraError::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        if matrix.rank() != matrix.rows() {
            return Err(AlgebraError::Singular);
        }
        Ok(BasisChange { matrix, log })
    }

    pub fn step(matrix: Matrix, step: impl Into<String>) -> Result<Self> {
        Self::new(matrix, vec![step.into()])
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// First `self`, then `next` (expressed in the basis produced by `self`).
    pub fn then(&self, next: &BasisChange) -> BasisChange {
        let mut log = self.log.clone();
        log.extend(next.log.iter().cloned());
        BasisChange {
            matrix: next.matrix.mul(&self.matrix),
            log,
        }
    }

    pub fn inverse(&self) -> Result<BasisChange> {
        let mut log = vec!["inverse of:".to_string()];
        log.extend(self.log.iter().cloned());
        Ok(BasisChange {
            matrix: self.matrix.inverse()?,
            log,
        })
    }
}

pub fn apply_basis_change(a: &Algebra, p: &BasisChange) -> Result<Algebra> {
    a.change_basis(&p.matrix)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ScrambleProfile {
    /// Maps `span{e_1..e_k}` to itself.
    NilradicalPreserving,
    General,
}

impl fmt::Display for ScrambleProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScrambleProfile::NilradicalPreserving => "nilradical-preserving",
            ScrambleProfile::General => "general",
        })
    }
}

/// Deterministic random invertible change of a `(2k-1)`-dimensional basis
/// with small integer entries.
pub fn random_basis_change(seed: u64, k: usize, profile: ScrambleProfile) -> BasisChange {
    let n = 2 * k - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut m = Matrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                if profile == ScrambleProfile::NilradicalPreserving && r < k && c >= k {
                    continue;
                }
                m[(r, c)] = int(rng.gen_range(-2..=2));
            }
        }
        if m.rank() == n {
            return BasisChange {
                matrix: m,
                log: vec![format!("random {profile} change, seed {seed}")],
            };
        }
    }
}

fn not_in_class(msg: impl Into<String>) -> AlgebraError {
    AlgebraError::NotInClass(msg.into())
}

fn inconsistent(msg: impl Into<String>) -> AlgebraError {
    AlgebraError::InconsistentForm(msg.into())
}

fn unit(n: usize, i: usize) -> Vec<Scalar> {
    let mut v = vec![Scalar::zero(); n];
    v[i] = Scalar::one();
    v
}

fn combine(n: usize, terms: &[(&[Scalar], Scalar)]) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(); n];
    for (v, c) in terms {
        if c.is_zero() {
            continue;
        }
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += c * x;
        }
    }
    out
}

fn neg(v: &[Scalar]) -> Vec<Scalar> {
    v.iter().map(|x| -x).collect()
}

fn independent(u: &[Scalar], v: &[Scalar]) -> bool {
    row_basis(&[u.to_vec(), v.to_vec()], u.len()).len() == 2
}

/// The coefficient template every algebra of the class reduces to, in the
/// basis `e_1..e_k, x_1..x_{k-1}`:
///
/// ```text
/// [e_i, x_i] = e_i + beta[i][i] e_k      [e_i, x_j] = beta[i][j] e_k   (i != j, i <= k)
/// [x_i, e_i] = alpha[i] e_i + gamma[i][i] e_k
/// [x_i, e_j] = gamma[i][j] e_k           [x_i, e_k] = sum_j nu[i][j] e_j
/// [x_i, x_j] = delta[i][j] e_k
/// ```
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GeneralForm {
    pub k: usize,
    /// One more than the number of `alpha` entries equal to `-1`.
    pub t: usize,
    pub alpha: Vec<Scalar>,
    pub beta: Vec<Vec<Scalar>>,
    pub gamma: Vec<Vec<Scalar>>,
    pub nu: Vec<Vec<Scalar>>,
    pub delta: Vec<Vec<Scalar>>,
}

impl GeneralForm {
    /// Reads the template coefficients; any product outside the template is
    /// a not-in-class error.
    pub fn read(a: &Algebra) -> Result<GeneralForm> {
        let n = a.dim();
        if n < 3 || n.is_multiple_of(2) {
            return Err(not_in_class(format!(
                "dimension {n} is not of the form 2k-1 with k >= 2"
            )));
        }
        let k = n.div_ceil(2);
        let ek = k - 1;
        let x = |j: usize| k + j;
        for i in 0..k {
            for j in 0..k {
                if !is_zero_vec(a.product(i, j)) {
                    return Err(not_in_class(format!(
                        "[e_{}, e_{}] is nonzero",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let outside = |p: &[Scalar], allowed: &dyn Fn(usize) -> bool| {
            (0..n).any(|m| !allowed(m) && !p[m].is_zero())
        };
        let mut beta = vec![vec![Scalar::zero(); k - 1]; k];
        for (i, row) in beta.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let p = a.product(i, x(j));
                let diag = i == j && i < ek;
                if outside(p, &|m| m == ek || (diag && m == i)) || (diag && !p[i].is_one()) {
                    return Err(not_in_class(format!(
                        "[e_{}, x_{}] leaves the general form",
                        i + 1,
                        j + 1
                    )));
                }
                *slot = p[ek].clone();
            }
        }
        let mut alpha = vec![Scalar::zero(); k - 1];
        let mut gamma = vec![vec![Scalar::zero(); k - 1]; k - 1];
        let mut nu = vec![vec![Scalar::zero(); k]; k - 1];
        let mut delta = vec![vec![Scalar::zero(); k - 1]; k - 1];
        for i in 0..k - 1 {
            for j in 0..k - 1 {
                let p = a.product(x(i), j);
                if outside(p, &|m| m == ek || (i == j && m == i)) {
                    return Err(not_in_class(format!(
                        "[x_{}, e_{}] leaves the general form",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j {
                    alpha[i] = p[i].clone();
                    if !(alpha[i].is_zero() || alpha[i] == -Scalar::one()) {
                        return Err(not_in_class(format!(
                            "alpha_{} = {} is neither 0 nor -1",
                            i + 1,
                            fmt_scalar(&alpha[i])
                        )));
                    }
                }
                gamma[i][j] = p[ek].clone();
                let p = a.product(x(i), x(j));
                if outside(p, &|m| m == ek) {
                    return Err(not_in_class(format!(
                        "[x_{}, x_{}] leaves the general form",
                        i + 1,
                        j + 1
                    )));
                }
                delta[i][j] = p[ek].clone();
            }
            let p = a.product(x(i), ek);
            if outside(p, &|m| m < k) {
                return Err(not_in_class(format!(
                    "[x_{}, e_k] leaves the nilradical",
                    i + 1
                )));
            }
            nu[i] = p[..k].to_vec();
        }
        let t = alpha.iter().filter(|a| !a.is_zero()).count() + 1;
        Ok(GeneralForm {
            k,
            t,
            alpha,
            beta,
            gamma,
            nu,
            delta,
        })
    }

    pub fn to_algebra(&self) -> Result<Algebra> {
        let k = self.k;
        if k < 2
            || self.alpha.len() != k - 1
            || self.beta.len() != k
            || self.beta.iter().any(|r| r.len() != k - 1)
            || self.gamma.len() != k - 1
            || self.gamma.iter().any(|r| r.len() != k - 1)
            || self.nu.len() != k - 1
            || self.nu.iter().any(|r| r.len() != k)
            || self.delta.len() != k - 1
            || self.delta.iter().any(|r| r.len() != k - 1)
        {
            return Err(AlgebraError::Shape(
                "general form arrays do not match k".into(),
            ));
        }
        let ek = k - 1;
        let x = |j: usize| k + j;
        let mut labels: Vec<String> = (1..=k).map(|i| format!("e{i}")).collect();
        labels.extend((1..k).map(|i| format!("x{i}")));
        let mut a = Algebra::zero(2 * k - 1).with_labels(labels);
        for i in 0..k {
            for j in 0..k - 1 {
                if i == j {
                    a.add_coeff(i, x(j), i, Scalar::one());
                }
                a.add_coeff(i, x(j), ek, self.beta[i][j].clone());
            }
        }
        for i in 0..k - 1 {
            a.add_coeff(x(i), i, i, self.alpha[i].clone());
            for j in 0..k - 1 {
                a.add_coeff(x(i), j, ek, self.gamma[i][j].clone());
                a.add_coeff(x(i), x(j), ek, self.delta[i][j].clone());
            }
            for j in 0..k {
                a.add_coeff(x(i), ek, j, self.nu[i][j].clone());
            }
        }
        Ok(a)
    }

    /// Coefficients of `[e_k, x_j]`.
    pub fn top_weight(&self) -> &[Scalar] {
        &self.beta[self.k - 1]
    }
}

/// `{v : [l, v] = 0 for all l in [L, L]}`; inside the class this is exactly
/// the abelian nilradical.
pub fn right_centralizer_of_square(a: &Algebra) -> Result<Subspace> {
    let n = a.dim();
    let full = Subspace::full(n);
    let sq = subspace_product(a, &full, &full)?;
    let mut eqs = Matrix::zeros(sq.dim() * n, n);
    for (r, l) in sq.basis().iter().enumerate() {
        for j in 0..n {
            for (m, c) in a.br(l, &a.unit(j)).into_iter().enumerate() {
                eqs[(r * n + m, j)] = c;
            }
        }
    }
    Subspace::span(n, &eqs.kernel())
}

/// Shifts `x_i <- x_i + n_i` with `n_i` in `span{e_1..e_k}` clearing the
/// `e_l` components of every `[x_i, x_j]` (all `l`, or `l < k` when
/// `keep_top`). Returns `None` when no such shifts exist.
fn clear_square_products(g: &Algebra, k: usize, keep_top: bool) -> Option<Matrix> {
    let n = g.dim();
    let m = k - 1;
    let comps = if keep_top { k - 1 } else { k };
    let x = |j: usize| k + j;
    let mut eqs = Matrix::zeros(m * m * comps, m * k);
    let mut rhs = vec![Scalar::zero(); m * m * comps];
    for i in 0..m {
        for j in 0..m {
            for l in 0..comps {
                let row = (i * m + j) * comps + l;
                rhs[row] = -g.coeff(x(i), x(j), l).clone();
                for p in 0..k {
                    eqs[(row, j * k + p)] += g.coeff(x(i), p, l);
                    eqs[(row, i * k + p)] += g.coeff(p, x(j), l);
                }
            }
        }
    }
    let sol = eqs.solve(&rhs)?;
    let mut change = Matrix::identity(n);
    for i in 0..m {
        for p in 0..k {
            change[(x(i), p)] = sol[i * k + p].clone();
        }
    }
    Some(change)
}

fn permutation_change(n: usize, k: usize, order: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for (p, &o) in order.iter().enumerate() {
        m[(p, o)] = Scalar::one();
        m[(k + p, k + o)] = Scalar::one();
    }
    m[(k - 1, k - 1)] = Scalar::one();
    m
}

/// Finds a basis `e_1..e_k, x_1..x_{k-1}` realising the general form.
///
/// The nilradical is taken from `hint` or computed as the right centralizer
/// of `[L, L]`. Weight spaces of `R_x` on it are ordered by pivot; `e_k` is
/// the last weight vector whose removal leaves a basis of weights (or the
/// distinguished line of the two-dimensional weight space), and the `x_j`
/// are dual to the remaining weights.
pub fn extract_general_form(
    a: &Algebra,
    hint: Option<&Subspace>,
) -> Result<(GeneralForm, BasisChange)> {
    let n = a.dim();
    if n < 3 || n.is_multiple_of(2) {
        return Err(not_in_class(format!(
            "dimension {n} is not of the form 2k-1 with k >= 2"
        )));
    }
    let k = n.div_ceil(2);
    if !a.is_leibniz() {
        return Err(not_in_class("the bracket violates the Leibniz identity"));
    }
    let nil = match hint {
        Some(h) => h.clone(),
        None => right_centralizer_of_square(a)?,
    };
    if nil.ambient_dim() != n {
        return Err(AlgebraError::Dimension {
            expected: n,
            got: nil.ambient_dim(),
        });
    }
    if nil.dim() != k {
        return Err(not_in_class(format!(
            "nilradical candidate has dimension {}, expected {k}",
            nil.dim()
        )));
    }
    if !subspace_product(a, &nil, &nil)?.is_zero() {
        return Err(not_in_class("nilradical candidate is not abelian"));
    }
    if !nilradical_check(a, &nil)?.passed() {
        return Err(not_in_class("candidate fails the nilradical check"));
    }
    let q: Vec<Vec<Scalar>> = nil
        .complement_axes()
        .into_iter()
        .map(|i| a.unit(i))
        .collect();
    let blocks = nilradical_weights(a, &nil, &q)?;
    let weights = Matrix::from_rows(blocks.iter().map(|b| b.weight.clone()).collect(), k - 1);
    let rank = weights.rank();
    if rank != k - 1 {
        return Err(not_in_class(format!(
            "weights of the nilradical have rank {rank}, expected {}",
            k - 1
        )));
    }

    let mut log = Vec::new();
    let (es, top, basis_weights) = if blocks.len() == k && blocks.iter().all(|b| b.basis.len() == 1)
    {
        let extra = (0..k)
            .rev()
            .find(|&z| {
                let rows: Vec<Vec<Scalar>> = (0..k)
                    .filter(|&p| p != z)
                    .map(|p| blocks[p].weight.clone())
                    .collect();
                Matrix::from_rows(rows, k - 1).rank() == k - 1
            })
            .expect("rank k-1 leaves some weight removable");
        let es: Vec<Vec<Scalar>> = (0..k)
            .filter(|&p| p != extra)
            .map(|p| blocks[p].basis[0].clone())
            .collect();
        let ws: Vec<Vec<Scalar>> = (0..k)
            .filter(|&p| p != extra)
            .map(|p| blocks[p].weight.clone())
            .collect();
        log.push(format!(
            "distinct weights; e_k is weight vector {} of {k}",
            extra + 1
        ));
        (es, blocks[extra].basis[0].clone(), ws)
    } else if blocks.len() == k - 1 && blocks.iter().filter(|b| b.basis.len() == 2).count() == 1 {
        let v = blocks.iter().position(|b| b.basis.len() == 2).unwrap();
        let (partner, top) = split_collision(a, &blocks[v].basis, &blocks[v].weight, &q, &mut log)?;
        let es: Vec<Vec<Scalar>> = blocks
            .iter()
            .enumerate()
            .map(|(p, b)| {
                if p == v {
                    partner.clone()
                } else {
                    b.basis[0].clone()
                }
            })
            .collect();
        (es, top, blocks.iter().map(|b| b.weight.clone()).collect())
    } else {
        return Err(not_in_class(
            "weight spaces of the nilradical do not have the expected sizes",
        ));
    };

    // x_j dual to the chosen weights
    let dual = Matrix::from_rows(basis_weights, k - 1).inverse()?;
    let mut rows = es;
    rows.push(top);
    for j in 0..k - 1 {
        let terms: Vec<(&[Scalar], Scalar)> = q
            .iter()
            .enumerate()
            .map(|(l, ql)| (ql.as_slice(), dual[(l, j)].clone()))
            .collect();
        rows.push(combine(n, &terms));
    }
    let mut change = BasisChange::step(
        Matrix::from_rows(rows, n),
        "weight basis of the nilradical, x dual to the weights",
    )?;
    let a1 = a.change_basis(&change.matrix)?;
    change.log.splice(0..0, log);

    let mut order: Vec<usize> = (0..k - 1).collect();
    for &i in &order {
        let c = a1.coeff(k + i, i, i);
        if !(c.is_zero() || *c == -Scalar::one()) {
            return Err(not_in_class(format!(
                "left action on weight vector {} is {}, not 0 or -1",
                i + 1,
                fmt_scalar(c)
            )));
        }
    }
    order.sort_by_key(|&i| a1.coeff(k + i, i, i).is_zero());
    let a2 = if order.iter().enumerate().any(|(p, &o)| p != o) {
        let step = BasisChange::step(
            permutation_change(n, k, &order),
            "move alpha = -1 indices first",
        )?;
        change = change.then(&step);
        a1.change_basis(&step.matrix)?
    } else {
        a1
    };
    let shifts = clear_square_products(&a2, k, true)
        .ok_or_else(|| not_in_class("[x_i, x_j] cannot be moved into span{e_k}"))?;
    let a3 = if shifts.is_identity() {
        a2
    } else {
        let step = BasisChange::step(
            shifts,
            "shift x_i by nilradical elements to clear [x_i, x_j] off e_k",
        )?;
        change = change.then(&step);
        a2.change_basis(&step.matrix)?
    };
    let form = GeneralForm::read(&a3)?;
    Ok((form, change))
}

/// Splits a two-dimensional weight space into (partner, e_k).
fn split_collision(
    a: &Algebra,
    v: &[Vec<Scalar>],
    weight: &[Scalar],
    q: &[Vec<Scalar>],
    log: &mut Vec<String>,
) -> Result<(Vec<Scalar>, Vec<Scalar>)> {
    let n = a.dim();
    let mut image = Vec::new();
    for b in v {
        for (qi, x) in q.iter().enumerate() {
            let r = combine(n, &[(&a.br(b, x), Scalar::one()), (b, -weight[qi].clone())]);
            if !is_zero_vec(&r) {
                image.push(r);
            }
        }
    }
    let first_independent = |line: &[Scalar]| -> Result<Vec<Scalar>> {
        v.iter()
            .find(|b| independent(line, b))
            .cloned()
            .ok_or_else(|| AlgebraError::Internal("weight space basis is degenerate".into()))
    };
    if !image.is_empty() {
        let img = row_basis(&image, n);
        if img.len() != 1 {
            return Err(not_in_class(
                "nilpotent part of the right action has rank above one",
            ));
        }
        log.push("repeated weight with nilpotent part; e_k spans its image".into());
        let top = img[0].clone();
        return Ok((first_independent(&top)?, top));
    }
    let vspace = Subspace::span(n, v)?;
    let ann = annihilators_center(a).right.intersection(&vspace);
    if ann.dim() == 1 {
        log.push(
            "repeated weight, mixed left actions; e_k spans the right-annihilator line".into(),
        );
        let top = ann.basis()[0].clone();
        return Ok((first_independent(&top)?, top));
    }
    log.push("repeated weight, equal left actions".into());
    Ok((v[0].clone(), v[1].clone()))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    Left,
    Right,
}

struct Slot {
    vec: Vec<Scalar>,
    x: usize,
    side: Side,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClassificationResult {
    /// Canonical representative.
    pub spec: NormalizedSpec,
    /// The family table the case analysis reads off before canonicalisation.
    pub theorem_spec: FamilySpec,
    /// Carries the classified algebra onto `instantiate_family(spec.spec)`.
    pub change: BasisChange,
    pub case_trace: Vec<String>,
}

/// Number of violated constraints `nu_{i,k}(nu_{j,k} + beta_{k,j}) = 0` and
/// `nu_{i,k} delta_{p,p} = 0`, where `p` is the first index with
/// `beta_{k,p}` outside `{0, 1}`; `None` when no such index exists.
pub fn case_one_violations(form: &GeneralForm) -> Option<usize> {
    let k = form.k;
    let b = form.top_weight();
    let p = b.iter().position(|x| !x.is_zero() && !x.is_one())?;
    let mut count = 0;
    for i in 0..k - 1 {
        let nik = &form.nu[i][k - 1];
        if nik.is_zero() {
            continue;
        }
        count += (0..k - 1)
            .filter(|&j| !(nik * (&form.nu[j][k - 1] + &b[j])).is_zero())
            .count();
        if !(nik * &form.delta[p][p]).is_zero() {
            count += 1;
        }
    }
    Some(count)
}

fn case_trace(form: &GeneralForm, top_in_ann: bool) -> Vec<String> {
    let b = form.top_weight();
    if b.iter().any(|x| !x.is_zero() && !x.is_one()) {
        return vec!["Case 1".into()];
    }
    let s = b.iter().filter(|x| x.is_one()).count();
    if s == 0 {
        return vec!["Case 3".into()];
    }
    let sub = if s >= 2 { "2.1" } else { "2.2" };
    let leaf = if top_in_ann { 1 } else { 2 };
    vec![
        "Case 2".into(),
        format!("Case {sub}"),
        format!("Case {sub}.{leaf}"),
    ]
}

/// Runs the case analysis on a general form and returns the canonical
/// family with a witness relative to the form's basis.
pub fn classify(form: &GeneralForm) -> Result<ClassificationResult> {
    let f = form.to_algebra()?;
    let k = form.k;
    let n = 2 * k - 1;
    let ek = k - 1;
    let x = |j: usize| unit(n, k + j);
    let b = form.top_weight().to_vec();
    let top_in_ann = annihilators_center(&f).right.contains(&unit(n, ek));
    let trace = case_trace(form, top_in_ann);
    if let Some(v) = case_one_violations(form) {
        if v > 0 {
            return Err(inconsistent(format!(
                "{v} Case 1 constraints on nu and delta fail"
            )));
        }
    }
    let mut log = Vec::new();
    if form.alpha.iter().any(|a| !a.is_zero()) {
        log.push(
            "alpha has -1 entries: branch follows the alpha = 0 argument (reconstructed)"
                .to_string(),
        );
    }

    let collision = (0..k - 1).find(|&m| b == unit(k - 1, m));
    let mut slots = Vec::new();
    for i in 0..k - 1 {
        if Some(i) == collision {
            continue;
        }
        // e_i + c e_k is an exact weight vector: c (b_j - [i = j]) = -beta_ij
        let pivot = (0..k - 1)
            .find(|&j| {
                b[j] != if i == j {
                    Scalar::one()
                } else {
                    Scalar::zero()
                }
            })
            .ok_or_else(|| {
                inconsistent("weight of e_k equals another weight outside the collision")
            })?;
        let denom = &b[pivot]
            - if i == pivot {
                Scalar::one()
            } else {
                Scalar::zero()
            };
        let c = -(&form.beta[i][pivot] / denom);
        for j in 0..k - 1 {
            let d = &b[j]
                - if i == j {
                    Scalar::one()
                } else {
                    Scalar::zero()
                };
            if &c * d != -form.beta[i][j].clone() {
                return Err(inconsistent(format!(
                    "no eigenvector shear for e_{}",
                    i + 1
                )));
            }
        }
        if !c.is_zero() {
            log.push(format!(
                "shear e_{} <- e_{} + ({}) e_k",
                i + 1,
                i + 1,
                fmt_scalar(&c)
            ));
        }
        let vec = combine(n, &[(&unit(n, i), Scalar::one()), (&unit(n, ek), c)]);
        let side = side_of(&f, &vec, i, k)?;
        slots.push(Slot { vec, x: i, side });
    }

    let ekv = unit(n, ek);
    let (shape, top, mut partner) = match collision {
        None => {
            let lk: Vec<Vec<Scalar>> = (0..k - 1).map(|j| f.br(&x(j), &ekv)).collect();
            if lk.iter().all(|v| is_zero_vec(v)) {
                (Shape::M1, ekv, None)
            } else if (0..k - 1).all(|j| lk[j] == combine(n, &[(&ekv, -b[j].clone())])) {
                (Shape::M2, ekv, None)
            } else {
                return Err(inconsistent(
                    "left action on e_k is neither 0 nor minus the right action",
                ));
            }
        }
        Some(m) => collision_branch(&f, form, m, &mut log)?,
    };

    // order the weight vectors for the target table
    let mut rights: Vec<Slot> = Vec::new();
    let mut lefts: Vec<Slot> = Vec::new();
    let diagonal = matches!(shape, Shape::M1 | Shape::M2);
    let mut all = slots;
    if diagonal {
        if let Some(p) = partner.take() {
            all.push(p);
        }
        all.sort_by_key(|s| s.x);
    }
    for s in all {
        match s.side {
            Side::Right => rights.push(s),
            Side::Left => lefts.push(s),
        }
    }
    let ordered: Vec<Slot> = if diagonal {
        rights.into_iter().chain(lefts).collect()
    } else {
        let p = partner
            .ok_or_else(|| AlgebraError::Internal("collision shape without partner".into()))?;
        match shape {
            Shape::M3 | Shape::M6 => rights
                .into_iter()
                .chain(std::iter::once(p))
                .chain(lefts)
                .collect(),
            _ => std::iter::once(p).chain(rights).chain(lefts).collect(),
        }
    };
    let t = ordered.iter().filter(|s| s.side == Side::Right).count() + 1;
    let mut rows: Vec<Vec<Scalar>> = ordered.iter().map(|s| s.vec.clone()).collect();
    rows.push(top);
    rows.extend(ordered.iter().map(|s| x(s.x)));
    let mut change = BasisChange::step(
        Matrix::from_rows(rows, n),
        "arrange weight vectors for the family table",
    )?;
    change.log.splice(0..0, log);
    let g = f.change_basis(&change.matrix)?;

    let delta_candidate = shape == Shape::M1 && collision.is_none() && is_zero_vec(&b);
    let shifts = clear_square_products(&g, k, delta_candidate)
        .ok_or_else(|| inconsistent("[x_i, x_j] cannot be cleared by shifting x"))?;
    let g = if shifts.is_identity() {
        g
    } else {
        let step = BasisChange::step(
            shifts,
            "shift x_i by nilradical elements to clear [x_i, x_j]",
        )?;
        change = change.then(&step);
        g.change_basis(&step.matrix)?
    };

    let xi = |j: usize| k + j;
    let t0 = t - 1;
    let (shape, params) = match shape {
        Shape::M1 if delta_candidate => {
            let delta: Vec<Scalar> = (0..(k - 1) * (k - 1))
                .map(|idx| g.coeff(xi(idx / (k - 1)), xi(idx % (k - 1)), ek).clone())
                .collect();
            if is_zero_vec(&delta) {
                (Shape::M1, vec![Scalar::zero(); k - 1])
            } else {
                (Shape::M7, delta)
            }
        }
        Shape::M1 | Shape::M2 => (
            shape,
            (0..k - 1).map(|j| g.coeff(ek, xi(j), ek).clone()).collect(),
        ),
        Shape::M3 => (
            shape,
            (0..k - 1).map(|j| g.coeff(t0, xi(j), ek).clone()).collect(),
        ),
        Shape::M4 => (
            shape,
            (0..k - 1).map(|j| g.coeff(0, xi(j), ek).clone()).collect(),
        ),
        Shape::M5 => (
            shape,
            (0..k - 1).map(|j| g.coeff(xi(j), 0, ek).clone()).collect(),
        ),
        Shape::M6 => (
            shape,
            (0..k - 1).map(|j| g.coeff(xi(j), ek, t0).clone()).collect(),
        ),
        Shape::M7 => unreachable!("delta shape is only reached through the M1 candidate"),
    };
    let table = Table {
        shape,
        k,
        t,
        params,
    };
    if table.instantiate()? != g {
        return Err(inconsistent(format!(
            "reduced algebra does not match the {shape:?} table"
        )));
    }
    let theorem_spec = table.to_spec()?;
    let normalized = normalize_params(&theorem_spec)?;
    let change = change.then(&normalized.change);
    if f.change_basis(&change.matrix)? != instantiate_family(&normalized.spec)? {
        return Err(AlgebraError::Internal(
            "classification witness does not conjugate".into(),
        ));
    }
    Ok(ClassificationResult {
        spec: normalized,
        theorem_spec,
        change,
        case_trace: trace,
    })
}

/// Left action type of an exact weight vector with weight `eps_i`.
fn side_of(f: &Algebra, v: &[Scalar], i: usize, k: usize) -> Result<Side> {
    let n = f.dim();
    let acts: Vec<Vec<Scalar>> = (0..k - 1).map(|j| f.br(&unit(n, k + j), v)).collect();
    if acts.iter().all(|a| is_zero_vec(a)) {
        return Ok(Side::Left);
    }
    if acts
        .iter()
        .enumerate()
        .all(|(j, a)| if j == i { *a == neg(v) } else { is_zero_vec(a) })
    {
        return Ok(Side::Right);
    }
    Err(inconsistent(format!(
        "left action on weight vector {} is neither 0 nor minus the right action",
        i + 1
    )))
}

/// The two-dimensional weight space `span{e_m, e_k}`: decides the table and
/// returns (shape, e_k vector, partner slot).
fn collision_branch(
    f: &Algebra,
    form: &GeneralForm,
    m: usize,
    log: &mut Vec<String>,
) -> Result<(Shape, Vec<Scalar>, Option<Slot>)> {
    let k = form.k;
    let n = 2 * k - 1;
    let ek = k - 1;
    let em = unit(n, m);
    let ekv = unit(n, ek);
    let x = |j: usize| unit(n, k + j);
    let lm: Vec<Vec<Scalar>> = (0..k - 1).map(|j| f.br(&x(j), &em)).collect();
    let lk: Vec<Vec<Scalar>> = (0..k - 1).map(|j| f.br(&x(j), &ekv)).collect();
    let rm: Vec<Vec<Scalar>> = (0..k - 1).map(|j| f.br(&em, &x(j))).collect();
    let rk: Vec<Vec<Scalar>> = (0..k - 1).map(|j| f.br(&ekv, &x(j))).collect();
    let in_block = |v: &Vec<Scalar>| {
        v.iter()
            .enumerate()
            .all(|(c, a)| c == m || c == ek || a.is_zero())
    };
    if !lm.iter().chain(&lk).all(in_block) {
        return Err(inconsistent("left action leaves the repeated weight space"));
    }
    let l_zero = lm.iter().chain(&lk).all(|v| is_zero_vec(v));
    let l_neg = (0..k - 1).all(|j| lm[j] == neg(&rm[j]) && lk[j] == neg(&rk[j]));
    let slot = |vec: Vec<Scalar>, side: Side| Slot { vec, x: m, side };
    if !is_zero_vec(&form.beta[m]) {
        return if l_zero {
            Ok((Shape::M3, ekv, Some(slot(em, Side::Left))))
        } else if l_neg {
            Ok((Shape::M4, ekv, Some(slot(em, Side::Right))))
        } else {
            Err(inconsistent(
                "repeated weight with nilpotent part has a mixed left action",
            ))
        };
    }
    if l_zero {
        return Ok((Shape::M1, ekv, Some(slot(em, Side::Left))));
    }
    if l_neg {
        return Ok((Shape::M2, ekv, Some(slot(em, Side::Right))));
    }
    if lk.iter().all(|v| is_zero_vec(v)) {
        // e_k in the right annihilator; the partner acts by -1 modulo e_k
        if lm[m][m] != -Scalar::one() {
            return Err(inconsistent("partner of e_k has no -1 left eigenvalue"));
        }
        let g = lm[m][ek].clone();
        if !g.is_zero() {
            log.push(format!(
                "shear e_{} <- e_{} - ({}) e_k",
                m + 1,
                m + 1,
                fmt_scalar(&g)
            ));
        }
        let p = combine(n, &[(&em, Scalar::one()), (&ekv, -g)]);
        let gamma_zero = (0..k - 1).all(|j| f.br(&x(j), &p)[ek].is_zero());
        let shape = if gamma_zero { Shape::M1 } else { Shape::M5 };
        return Ok((shape, ekv, Some(slot(p, Side::Right))));
    }
    // e_k outside the right annihilator: the annihilator line is the partner
    let eqs = Matrix::from_fn(n * (k - 1), 2, |r, c| {
        if c == 0 {
            lm[r / n][r % n].clone()
        } else {
            lk[r / n][r % n].clone()
        }
    });
    let ker = eqs.kernel();
    if ker.len() != 1 || ker[0][0].is_zero() {
        return Err(inconsistent(
            "repeated weight space has no annihilator line",
        ));
    }
    let ell = combine(n, &[(&em, Scalar::one()), (&ekv, &ker[0][1] / &ker[0][0])]);
    let basis = [ell.clone(), ekv.clone()];
    let mut nus = Vec::with_capacity(k - 1);
    for (j, v) in lk.iter().enumerate() {
        let co = coordinates(&basis, v)
            .ok_or_else(|| inconsistent("left action leaves the repeated weight space"))?;
        let want = if j == m {
            -Scalar::one()
        } else {
            Scalar::zero()
        };
        if co[1] != want {
            return Err(inconsistent(
                "e_k is not of right-multiplication type modulo the annihilator line",
            ));
        }
        nus.push(co[0].clone());
    }
    let nm = nus[m].clone();
    if !nm.is_zero() {
        log.push(format!(
            "e_k <- e_k - ({}) * annihilator line",
            fmt_scalar(&nm)
        ));
    }
    let top = combine(n, &[(&ekv, Scalar::one()), (&ell, -nm.clone())]);
    let nu_zero = nus.iter().enumerate().all(|(j, v)| j == m || v.is_zero());
    let shape = if nu_zero { Shape::M2 } else { Shape::M6 };
    Ok((shape, top, Some(slot(ell, Side::Left))))
}

/// Extraction followed by classification, with the witness composed so it
/// applies to `a` itself.
pub fn classify_algebra(
    a: &Algebra,
    hint: Option<&Subspace>,
) -> Result<(GeneralForm, ClassificationResult)> {
    let (form, extraction) = extract_general_form(a, hint)?;
    let mut result = classify(&form)?;
    result.change = extraction.then(&result.change);
    Ok((form, result))
}

/// One fuzz trial: scramble a family instance, classify it, and compare
/// against the normalized input.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RoundTrip {
    pub expected: FamilySpec,
    pub classified: FamilySpec,
    pub witness_exact: bool,
    pub case_trace: Vec<String>,
    pub case_one_violations: Option<usize>,
}

impl RoundTrip {
    pub fn passed(&self) -> bool {
        self.expected == self.classified && self.witness_exact
    }
}

pub fn round_trip(spec: &FamilySpec, seed: u64, profile: ScrambleProfile) -> Result<RoundTrip> {
    let expected = normalize_params(spec)?.spec;
    let scrambled = instantiate_family(spec)?
        .change_basis(&random_basis_change(seed, spec.k, profile).matrix)?;
    let (form, result) = classify_algebra(&scrambled, None)?;
    let witness_exact =
        scrambled.change_basis(&result.change.matrix)? == instantiate_family(&result.spec.spec)?;
    Ok(RoundTrip {
        expected,
        classified: result.spec.spec,
        witness_exact,
        case_trace: result.case_trace,
        case_one_violations: case_one_violations(&form),
    })
}
