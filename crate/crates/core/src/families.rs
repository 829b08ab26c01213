//! The families L1..L10 and M1,t..M7,t of solvable Leibniz algebras with
//! abelian nilradical `a_k` and complement of dimension `k-1`, their
//! canonical parameters, and the explicit isomorphisms between them.
//!
//! Basis order is `e_1..e_k, x_1..x_{k-1}`. Internally every label is a
//! [`Table`]: one of seven shapes `M1..M7` with an explicit `t`, where the
//! entries `alpha_1..alpha_{t-1}` are `-1`. The L-labels are the shapes at
//! `t = 1` (L1..L5) or `t = k` (L6..L10).

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use itertools::Itertools;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::Algebra;
use crate::error::{AlgebraError, Result};
use crate::linalg::Matrix;
use crate::normalizer::BasisChange;
use crate::scalar::{
    canonical_cmp, canonical_cmp_slice, fmt_scalar, frac, int, is_zero_vec, Scalar,
};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Label {
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
    L7,
    L8,
    L9,
    L10,
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParamKind {
    Beta,
    Gamma,
    Nu,
    Delta,
}

impl Label {
    pub const ALL: [Label; 17] = [
        Label::L1,
        Label::L2,
        Label::L3,
        Label::L4,
        Label::L5,
        Label::L6,
        Label::L7,
        Label::L8,
        Label::L9,
        Label::L10,
        Label::M1,
        Label::M2,
        Label::M3,
        Label::M4,
        Label::M5,
        Label::M6,
        Label::M7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Label::L1 => "L1",
            Label::L2 => "L2",
            Label::L3 => "L3",
            Label::L4 => "L4",
            Label::L5 => "L5",
            Label::L6 => "L6",
            Label::L7 => "L7",
            Label::L8 => "L8",
            Label::L9 => "L9",
            Label::L10 => "L10",
            Label::M1 => "M1",
            Label::M2 => "M2",
            Label::M3 => "M3",
            Label::M4 => "M4",
            Label::M5 => "M5",
            Label::M6 => "M6",
            Label::M7 => "M7",
        }
    }

    pub fn is_m(self) -> bool {
        self >= Label::M1
    }

    pub fn param_kind(self) -> ParamKind {
        match self {
            Label::L4 | Label::M6 => ParamKind::Nu,
            Label::L8 | Label::M5 => ParamKind::Gamma,
            Label::L5 | Label::L10 | Label::M7 => ParamKind::Delta,
            _ => ParamKind::Beta,
        }
    }

    /// Number of parameters the label's table carries at a given `k`.
    pub fn param_len(self, k: usize) -> usize {
        match self {
            Label::L4 | Label::M5 => k - 2,
            Label::L5 | Label::L10 | Label::M7 => (k - 1) * (k - 1),
            _ => k - 1,
        }
    }

    pub fn admissible_t(self, k: usize) -> Vec<usize> {
        match self {
            Label::L1 | Label::L2 | Label::L3 | Label::L4 | Label::L5 => vec![1],
            Label::L6 | Label::L7 | Label::L8 | Label::L9 | Label::L10 => vec![k],
            Label::M1 | Label::M2 | Label::M7 => (1..=k).collect(),
            _ => (2..k).collect(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = AlgebraError;

    fn from_str(s: &str) -> Result<Label> {
        Label::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| AlgebraError::Parse(format!("unknown family label {s:?}")))
    }
}

/// A family label with its dimension parameter `k`, the split index `t`
/// (implied for L-labels) and the table parameters. Delta parameters are
/// stored row-major.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct FamilySpec {
    pub label: Label,
    pub k: usize,
    pub t: usize,
    pub params: Vec<Scalar>,
}

impl FamilySpec {
    pub fn new(label: Label, k: usize, t: Option<usize>, params: Vec<Scalar>) -> Result<Self> {
        if k < 2 {
            return Err(AlgebraError::Shape(format!(
                "k must be at least 2, got {k}"
            )));
        }
        let allowed = label.admissible_t(k);
        let t = match (t, label.is_m()) {
            (Some(t), _) => t,
            (None, false) => allowed[0],
            (None, true) => {
                return Err(AlgebraError::Shape(format!("{label} needs an explicit t")))
            }
        };
        let spec = FamilySpec {
            label,
            k,
            t,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(AlgebraError::Shape(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if !self.label.admissible_t(self.k).contains(&self.t) {
            return Err(AlgebraError::Shape(format!(
                "t = {} is not admissible for {} at k = {}",
                self.t, self.label, self.k
            )));
        }
        let want = self.label.param_len(self.k);
        if self.params.len() != want {
            return Err(AlgebraError::Shape(format!(
                "{} at k = {} takes {want} parameters, got {}",
                self.label,
                self.k,
                self.params.len()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.k - 1
    }

    /// Label-independent shape view.
    pub fn table(&self) -> Table {
        let k = self.k;
        let p = self.params.clone();
        let with_leading_zero = |p: Vec<Scalar>| {
            let mut v = vec![Scalar::zero()];
            v.extend(p);
            v
        };
        let (shape, t, params) = match self.label {
            Label::L1 => (Shape::M1, 1, p),
            Label::L2 => (Shape::M2, 1, p),
            Label::L3 => (Shape::M3, 1, p),
            Label::L4 => (Shape::M6, 1, with_leading_zero(p)),
            Label::L5 => (Shape::M7, 1, p),
            Label::L6 => (Shape::M1, k, p),
            Label::L7 => (Shape::M2, k, p),
            Label::L8 => (Shape::M5, k, p),
            Label::L9 => (Shape::M4, k, p),
            Label::L10 => (Shape::M7, k, p),
            Label::M1 => (Shape::M1, self.t, p),
            Label::M2 => (Shape::M2, self.t, p),
            Label::M3 => (Shape::M3, self.t, p),
            Label::M4 => (Shape::M4, self.t, p),
            Label::M5 => (Shape::M5, self.t, with_leading_zero(p)),
            Label::M6 => (Shape::M6, self.t, p),
            Label::M7 => (Shape::M7, self.t, p),
        };
        Table {
            shape,
            k,
            t,
            params,
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params = self.params.iter().map(fmt_scalar).join(",");
        if self.label.is_m() {
            write!(f, "{},{}({})", self.label, self.t, params)
        } else {
            write!(f, "{}({})", self.label, params)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Shape {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
}

/// A family in shape form. Gamma (M5) and nu (M6) vectors always have full
/// length `k-1`; a nonzero `gamma_1` adds to `[x_1, e_1]` as in the L8 table.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Table {
    pub shape: Shape,
    pub k: usize,
    pub t: usize,
    pub params: Vec<Scalar>,
}

fn e(i: usize) -> usize {
    i
}

impl Table {
    fn x(&self, j: usize) -> usize {
        self.k + j
    }

    fn t_range(&self) -> Range<usize> {
        match self.shape {
            Shape::M1 | Shape::M2 | Shape::M7 => 1..self.k + 1,
            Shape::M3 | Shape::M6 => 1..self.k,
            Shape::M4 | Shape::M5 => 2..self.k + 1,
        }
    }

    fn check(&self) -> Result<()> {
        let want = if self.shape == Shape::M7 {
            (self.k - 1) * (self.k - 1)
        } else {
            self.k - 1
        };
        if self.k < 2 || !self.t_range().contains(&self.t) || self.params.len() != want {
            return Err(AlgebraError::Shape(format!(
                "invalid {:?} table: k = {}, t = {}, {} parameters",
                self.shape,
                self.k,
                self.t,
                self.params.len()
            )));
        }
        Ok(())
    }

    pub fn instantiate(&self) -> Result<Algebra> {
        self.check()?;
        let k = self.k;
        let n = 2 * k - 1;
        let ek = k - 1;
        let p = &self.params;
        let t0 = self.t - 1;
        let mut labels: Vec<String> = (1..=k).map(|i| format!("e{i}")).collect();
        labels.extend((1..k).map(|i| format!("x{i}")));
        let mut a = Algebra::zero(n).with_labels(labels);
        for i in 0..k - 1 {
            a.add_coeff(e(i), self.x(i), e(i), Scalar::one());
            if i < t0 {
                a.add_coeff(self.x(i), e(i), e(i), -Scalar::one());
            }
        }
        match self.shape {
            Shape::M1 | Shape::M2 => {
                for i in 0..k - 1 {
                    a.add_coeff(ek, self.x(i), ek, p[i].clone());
                    if self.shape == Shape::M2 {
                        a.add_coeff(self.x(i), ek, ek, -p[i].clone());
                    }
                }
            }
            Shape::M3 => {
                for i in 0..k - 1 {
                    a.add_coeff(e(t0), self.x(i), ek, p[i].clone());
                }
                a.add_coeff(ek, self.x(t0), ek, Scalar::one());
            }
            Shape::M4 => {
                for i in 0..k - 1 {
                    a.add_coeff(e(0), self.x(i), ek, p[i].clone());
                    a.add_coeff(self.x(i), e(0), ek, -p[i].clone());
                }
                a.add_coeff(ek, self.x(0), ek, Scalar::one());
                a.add_coeff(self.x(0), ek, ek, -Scalar::one());
            }
            Shape::M5 => {
                a.add_coeff(ek, self.x(0), ek, Scalar::one());
                for i in 0..k - 1 {
                    a.add_coeff(self.x(i), e(0), ek, p[i].clone());
                }
            }
            Shape::M6 => {
                a.add_coeff(ek, self.x(t0), ek, Scalar::one());
                a.add_coeff(self.x(t0), ek, ek, -Scalar::one());
                for i in 0..k - 1 {
                    a.add_coeff(self.x(i), ek, e(t0), p[i].clone());
                }
            }
            Shape::M7 => {
                for i in 0..k - 1 {
                    for j in 0..k - 1 {
                        a.add_coeff(self.x(i), self.x(j), ek, p[i * (k - 1) + j].clone());
                    }
                }
            }
        }
        Ok(a)
    }

    /// The public label for this shape (L-labels at the extreme `t`).
    pub fn to_spec(&self) -> Result<FamilySpec> {
        self.check()?;
        let k = self.k;
        let t = self.t;
        let p = self.params.clone();
        let drop_leading = |what: &str| -> Result<Vec<Scalar>> {
            if !p[0].is_zero() {
                return Err(AlgebraError::Internal(format!(
                    "{what} with nonzero first entry has no public label"
                )));
            }
            Ok(p[1..].to_vec())
        };
        let (label, params) = match (self.shape, t == 1, t == k) {
            (Shape::M1, true, _) => (Label::L1, p),
            (Shape::M1, _, true) => (Label::L6, p),
            (Shape::M1, ..) => (Label::M1, p),
            (Shape::M2, true, _) => (Label::L2, p),
            (Shape::M2, _, true) => (Label::L7, p),
            (Shape::M2, ..) => (Label::M2, p),
            (Shape::M7, true, _) => (Label::L5, p),
            (Shape::M7, _, true) => (Label::L10, p),
            (Shape::M7, ..) => (Label::M7, p),
            (Shape::M3, true, _) => (Label::L3, p),
            (Shape::M3, ..) => (Label::M3, p),
            (Shape::M4, _, true) => (Label::L9, p),
            (Shape::M4, ..) => (Label::M4, p),
            (Shape::M5, _, true) => (Label::L8, p),
            (Shape::M5, ..) => (Label::M5, drop_leading("M5 gamma")?),
            (Shape::M6, true, _) => (Label::L4, drop_leading("L4 nu")?),
            (Shape::M6, ..) => (Label::M6, p),
        };
        FamilySpec::new(label, k, Some(t), params)
    }
}

pub fn instantiate_family(spec: &FamilySpec) -> Result<Algebra> {
    spec.validate()?;
    spec.table().instantiate()
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NormalizedSpec {
    pub spec: FamilySpec,
    /// True when the input was already its own canonical representative.
    pub canonical: bool,
    pub normalization_log: Vec<String>,
    /// Carries `instantiate_family(input)` onto `instantiate_family(spec)`.
    pub change: BasisChange,
}

/// Builds a basis change from sparse rows `(index, coefficient)`.
fn change_from_rows(
    n: usize,
    rows: Vec<Vec<(usize, Scalar)>>,
    step: String,
) -> Result<BasisChange> {
    let mut m = Matrix::zeros(n, n);
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row {
            m[(r, c)] += v;
        }
    }
    BasisChange::step(m, step)
}

fn identity_rows(n: usize) -> Vec<Vec<(usize, Scalar)>> {
    (0..n).map(|i| vec![(i, Scalar::one())]).collect()
}

/// All permutations of `0..n` that only move positions inside `blocks`;
/// `perm[p]` is the old position placed at `p`.
fn block_permutations(n: usize, blocks: &[Range<usize>]) -> Vec<Vec<usize>> {
    let per_block: Vec<Vec<Vec<usize>>> = blocks
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| b.clone().permutations(b.len()).collect())
        .collect();
    if per_block.is_empty() {
        return vec![(0..n).collect()];
    }
    per_block
        .into_iter()
        .multi_cartesian_product()
        .map(|choice| {
            let mut perm: Vec<usize> = (0..n).collect();
            for (block, arrangement) in blocks.iter().filter(|b| !b.is_empty()).zip(choice) {
                for (p, old) in block.clone().zip(arrangement) {
                    perm[p] = old;
                }
            }
            perm
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    /// In the right annihilator: `[x, v] = 0`.
    Left,
    /// `[x, v] = -[v, x]`.
    Right,
}

/// Canonical representative of a diagonal table (M1 or M2): choose which
/// weight vector plays `e_k` and order the rest, preferring an
/// annihilator-type `e_k` (M1) and then the smallest parameter vector.
fn canonical_diagonal(tab: &Table) -> Result<(Table, BasisChange, String)> {
    let k = tab.k;
    let n = 2 * k - 1;
    let t0 = tab.t - 1;
    let beta = &tab.params;
    let mut side: Vec<Side> = (0..k - 1)
        .map(|p| if p < t0 { Side::Right } else { Side::Left })
        .collect();
    side.push(if tab.shape == Shape::M2 && !is_zero_vec(beta) {
        Side::Right
    } else {
        Side::Left
    });
    let weight = |p: usize| -> Vec<Scalar> {
        if p == k - 1 {
            beta.clone()
        } else {
            (0..k - 1)
                .map(|j| {
                    if j == p {
                        Scalar::one()
                    } else {
                        Scalar::zero()
                    }
                })
                .collect()
        }
    };

    struct Candidate {
        shape: Shape,
        params: Vec<Scalar>,
        extra: usize,
        others: Vec<usize>,
        inv: Matrix,
        order: Vec<usize>,
    }
    let mut best: Option<Candidate> = None;
    for extra in (0..k).rev() {
        if extra != k - 1 && beta[extra].is_zero() {
            continue;
        }
        let others: Vec<usize> = (0..k).filter(|&p| p != extra).collect();
        let w = Matrix::from_rows(others.iter().map(|&p| weight(p)).collect(), k - 1);
        let inv = w.inverse()?;
        let b = inv.apply_left(&weight(extra));
        let mut order: Vec<usize> = (0..k - 1).collect();
        order.sort_by(|&a, &c| {
            let sa = side[others[a]] == Side::Left;
            let sc = side[others[c]] == Side::Left;
            sa.cmp(&sc).then_with(|| canonical_cmp(&b[a], &b[c]))
        });
        let params: Vec<Scalar> = order.iter().map(|&q| b[q].clone()).collect();
        let shape = if side[extra] == Side::Left {
            Shape::M1
        } else {
            Shape::M2
        };
        let better = match &best {
            None => true,
            Some(cur) => {
                shape
                    .cmp(&cur.shape)
                    .then_with(|| canonical_cmp_slice(&params, &cur.params))
                    == Ordering::Less
            }
        };
        if better {
            best = Some(Candidate {
                shape,
                params,
                extra,
                others,
                inv,
                order,
            });
        }
    }
    let c = best.expect("e_k is always a candidate");
    let t = c.others.iter().filter(|&&p| side[p] == Side::Right).count() + 1;
    let mut rows: Vec<Vec<(usize, Scalar)>> = Vec::with_capacity(n);
    for &q in &c.order {
        rows.push(vec![(c.others[q], Scalar::one())]);
    }
    rows.push(vec![(c.extra, Scalar::one())]);
    for &q in &c.order {
        rows.push((0..k - 1).map(|l| (k + l, c.inv[(l, q)].clone())).collect());
    }
    let step = if c.extra == k - 1 {
        "reorder e_i, x_i within the annihilator blocks".to_string()
    } else {
        format!("exchange e_k with e_{} and re-dualise x", c.extra + 1)
    };
    let change = change_from_rows(n, rows, step.clone())?;
    Ok((
        Table {
            shape: c.shape,
            k,
            t,
            params: c.params,
        },
        change,
        step,
    ))
}

fn first_nonzero(v: &[Scalar]) -> Option<Scalar> {
    v.iter().find(|x| !x.is_zero()).cloned()
}

/// Shared search for the shapes whose only freedom is reordering inside
/// blocks and rescaling `e_k`.
fn canonical_by_permutation(
    tab: &Table,
    blocks: &[Range<usize>],
) -> Result<(Table, BasisChange, String)> {
    let k = tab.k;
    let m = k - 1;
    let permute = |perm: &[usize]| -> Vec<Scalar> {
        if tab.shape == Shape::M7 {
            (0..m * m)
                .map(|idx| tab.params[perm[idx / m] * m + perm[idx % m]].clone())
                .collect()
        } else {
            perm.iter().map(|&o| tab.params[o].clone()).collect()
        }
    };
    let mut best: Option<(Vec<Scalar>, Vec<usize>, Scalar)> = None;
    for perm in block_permutations(m, blocks) {
        let raw = permute(&perm);
        let s = first_nonzero(&raw)
            .ok_or_else(|| AlgebraError::Internal("all-zero parameters".into()))?;
        let scaled: Vec<Scalar> = raw.iter().map(|x| x / &s).collect();
        if best
            .as_ref()
            .is_none_or(|(b, _, _)| canonical_cmp_slice(&scaled, b) == Ordering::Less)
        {
            best = Some((scaled, perm, s));
        }
    }
    let (params, perm, s) = best.expect("identity permutation is always present");
    let n = 2 * k - 1;
    let mut rows: Vec<Vec<(usize, Scalar)>> = Vec::with_capacity(n);
    for &o in &perm {
        rows.push(vec![(o, Scalar::one())]);
    }
    rows.push(vec![(k - 1, s.clone())]);
    for &o in &perm {
        rows.push(vec![(k + o, Scalar::one())]);
    }
    let step = format!(
        "reorder within blocks and rescale e_k by {}",
        fmt_scalar(&s)
    );
    let change = change_from_rows(n, rows, step.clone())?;
    Ok((
        Table {
            shape: tab.shape,
            k,
            t: tab.t,
            params,
        },
        change,
        step,
    ))
}

/// Degenerate parameter choices where a table coincides with a simpler
/// shape; the tensors are identical so the change is the identity.
fn collapse(tab: &Table) -> Option<(Table, String)> {
    let k = tab.k;
    let t0 = tab.t - 1;
    let unit = |p: usize| -> Vec<Scalar> {
        (0..k - 1)
            .map(|j| {
                if j == p {
                    Scalar::one()
                } else {
                    Scalar::zero()
                }
            })
            .collect()
    };
    if !is_zero_vec(&tab.params) {
        return None;
    }
    let (shape, params, why) = match tab.shape {
        Shape::M2 => (
            Shape::M1,
            tab.params.clone(),
            "all beta vanish: M2 coincides with M1",
        ),
        Shape::M7 => (
            Shape::M1,
            vec![Scalar::zero(); k - 1],
            "all delta vanish: M7 collapses to M1(0)",
        ),
        Shape::M3 => (
            Shape::M1,
            unit(t0),
            "beta = 0: M3 coincides with M1(unit at t)",
        ),
        Shape::M4 => (
            Shape::M2,
            unit(0),
            "beta = 0: M4 coincides with M2(unit at 1)",
        ),
        Shape::M5 => (
            Shape::M1,
            unit(0),
            "gamma = 0: M5 coincides with M1(unit at 1)",
        ),
        Shape::M6 => (
            Shape::M2,
            unit(t0),
            "nu = 0: M6 coincides with M2(unit at t)",
        ),
        Shape::M1 => return None,
    };
    Some((
        Table {
            shape,
            k,
            t: tab.t,
            params,
        },
        why.to_string(),
    ))
}

/// `e_1' = e_1 - gamma_1 e_k` removes `gamma_1` from an M5 table.
fn absorb_gamma1(tab: &Table) -> Result<Option<(Table, BasisChange)>> {
    if tab.shape != Shape::M5 || tab.params[0].is_zero() {
        return Ok(None);
    }
    let k = tab.k;
    let g1 = tab.params[0].clone();
    let mut rows = identity_rows(2 * k - 1);
    rows[0].push((k - 1, -g1.clone()));
    let change = change_from_rows(
        2 * k - 1,
        rows,
        format!("shear e_1 <- e_1 - ({}) e_k", fmt_scalar(&g1)),
    )?;
    let mut params = tab.params.clone();
    params[0] = Scalar::zero();
    Ok(Some((
        Table {
            params,
            ..tab.clone()
        },
        change,
    )))
}

/// Canonical representative of a family together with the witnessing change.
pub fn normalize_params(spec: &FamilySpec) -> Result<NormalizedSpec> {
    spec.validate()?;
    let input = instantiate_family(spec)?;
    let n = spec.dim();
    let mut tab = spec.table();
    let mut change = BasisChange::identity(n);
    let mut log = Vec::new();

    if tab.shape == Shape::M6 {
        let (target, c) = rewrite_m6(&tab)?;
        log.push(format!("M6,{} rewritten as M5,{}", tab.t, target.t));
        change = change.then(&c);
        tab = target;
    }
    if let Some((next, c)) = absorb_gamma1(&tab)? {
        log.push("gamma_1 absorbed into e_1".to_string());
        change = change.then(&c);
        tab = next;
    }
    if let Some((next, why)) = collapse(&tab) {
        log.push(why);
        tab = next;
    }
    let (canon, c, step) = match tab.shape {
        Shape::M1 | Shape::M2 => canonical_diagonal(&tab)?,
        Shape::M7 => canonical_by_permutation(&tab, &[0..tab.t - 1, tab.t - 1..tab.k - 1])?,
        Shape::M3 => canonical_by_permutation(&tab, &[0..tab.t - 1, tab.t..tab.k - 1])?,
        Shape::M4 | Shape::M5 => {
            canonical_by_permutation(&tab, &[1..tab.t - 1, tab.t - 1..tab.k - 1])?
        }
        Shape::M6 => return Err(AlgebraError::Internal("M6 survived rewriting".into())),
    };
    log.push(step);
    change = change.then(&c);

    let out = canon.to_spec()?;
    if input.change_basis(&change.matrix)? != instantiate_family(&out)? {
        return Err(AlgebraError::Internal(format!(
            "normalization witness for {spec} does not conjugate"
        )));
    }
    Ok(NormalizedSpec {
        canonical: &out == spec,
        spec: out,
        normalization_log: log,
        change,
    })
}

/// `M6,t(nu)`: `e_k <- e_k - nu_t e_t`, then exchange the roles of
/// `(e_1, x_1)` and `(e_t, x_t)` with `e_k`, landing on `M5,t+1`.
fn rewrite_m6(tab: &Table) -> Result<(Table, BasisChange)> {
    let k = tab.k;
    let n = 2 * k - 1;
    let t0 = tab.t - 1;
    let nu = &tab.params;
    let mut rows = identity_rows(n);
    rows[0] = vec![(k - 1, Scalar::one()), (t0, -nu[t0].clone())];
    rows[k - 1] = vec![(t0, Scalar::one())];
    let mut gamma = nu.clone();
    gamma[0] = Scalar::zero();
    if t0 != 0 {
        rows[t0] = vec![(0, Scalar::one())];
        rows[k] = vec![(k + t0, Scalar::one())];
        rows[k + t0] = vec![(k, Scalar::one())];
        gamma[t0] = nu[0].clone();
    }
    let step = format!(
        "e_1' = e_k - ({}) e_{t}, e_t' = e_1, e_k' = e_t, x_1' = x_t, x_t' = x_1",
        fmt_scalar(&nu[t0]),
        t = tab.t
    );
    let change = change_from_rows(n, rows, step)?;
    Ok((
        Table {
            shape: Shape::M5,
            k,
            t: tab.t + 1,
            params: gamma,
        },
        change,
    ))
}

/// `M2,t(beta)` with `beta_j != 0` for some `j >= t`: exchange `e_k` into
/// the annihilator block, landing on `M1,t+1`.
fn rewrite_m2(tab: &Table, j0: usize) -> Result<(Table, BasisChange)> {
    let k = tab.k;
    let n = 2 * k - 1;
    let t0 = tab.t - 1;
    let b = &tab.params;
    let bj = b[j0].clone();
    let mut rows = identity_rows(n);
    let mut params: Vec<Scalar> = b.iter().map(|x| -(x / &bj)).collect();
    rows[t0] = vec![(k - 1, Scalar::one())];
    rows[k - 1] = vec![(j0, Scalar::one())];
    rows[k + t0] = vec![(k + j0, bj.recip())];
    for i in 0..k - 1 {
        if i != t0 && i != j0 {
            rows[k + i] = vec![(k + i, Scalar::one()), (k + j0, -(&b[i] / &bj))];
        }
    }
    if j0 != t0 {
        rows[j0] = vec![(t0, Scalar::one())];
        rows[k + j0] = vec![(k + t0, Scalar::one()), (k + j0, -(&b[t0] / &bj))];
        params[j0] = -(&b[t0] / &bj);
    }
    params[t0] = bj.recip();
    let step = format!(
        "e_t' = e_k, e_k' = e_{}, x_t' = x_{}/beta_{}",
        j0 + 1,
        j0 + 1,
        j0 + 1
    );
    let change = change_from_rows(n, rows, step)?;
    Ok((
        Table {
            shape: Shape::M1,
            k,
            t: tab.t + 1,
            params,
        },
        change,
    ))
}

/// The explicit cross-family isomorphisms: `M2,t -> M1,t+1` when some
/// `beta_j != 0` with `j >= t`, and `M6,t -> M5,t+1`.
pub fn rewrite_isomorphism(spec: &FamilySpec) -> Result<Option<(FamilySpec, BasisChange)>> {
    spec.validate()?;
    let tab = spec.table();
    let out = match tab.shape {
        Shape::M2 => match (tab.t - 1..tab.k - 1).find(|&j| !tab.params[j].is_zero()) {
            Some(j0) => Some(rewrite_m2(&tab, j0)?),
            None => None,
        },
        Shape::M6 => Some(rewrite_m6(&tab)?),
        _ => None,
    };
    out.map(|(target, change)| Ok((target.to_spec()?, change)))
        .transpose()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TwoDim {
    /// `[e, x] = e`
    L2,
    /// `[e, x] = e`, `[x, e] = -e`
    R2,
}

/// Direct sum of two-dimensional pieces, basis `e_1..e_m, x_1..x_m`.
pub fn instantiate_max_class(signature: &[TwoDim]) -> Result<Algebra> {
    let m = signature.len();
    if m == 0 {
        return Err(AlgebraError::Shape("empty signature".into()));
    }
    let mut labels: Vec<String> = (1..=m).map(|i| format!("e{i}")).collect();
    labels.extend((1..=m).map(|i| format!("x{i}")));
    let mut a = Algebra::zero(2 * m).with_labels(labels);
    for (i, part) in signature.iter().enumerate() {
        a.add_coeff(i, m + i, i, Scalar::one());
        if *part == TwoDim::R2 {
            a.add_coeff(m + i, i, i, -Scalar::one());
        }
    }
    Ok(a)
}

fn random_scalar(rng: &mut ChaCha8Rng) -> Scalar {
    if rng.gen_bool(0.25) {
        return Scalar::zero();
    }
    frac(rng.gen_range(-5..=5), rng.gen_range(1..=3))
}

/// Parameter draws for a label: all zeros, all ones, then random small
/// rationals (about a quarter of the entries zero).
pub fn sample_params(label: Label, k: usize, draws: usize, seed: u64) -> Vec<Vec<Scalar>> {
    let len = label.param_len(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64) << 32 ^ label as u64);
    let mut out = vec![vec![Scalar::zero(); len], vec![int(1); len]];
    while out.len() < draws.max(2) {
        out.push((0..len).map(|_| random_scalar(&mut rng)).collect());
    }
    out.truncate(draws.max(2));
    out
}

/// Every label and admissible `t` at dimension parameter `k`, each with
/// `draws` parameter samples.
pub fn sample_specs(k: usize, draws: usize, seed: u64) -> Vec<FamilySpec> {
    let mut out = Vec::new();
    for label in Label::ALL {
        for t in label.admissible_t(k) {
            for params in sample_params(label, k, draws, seed.wrapping_add(t as u64)) {
                out.push(FamilySpec {
                    label,
                    k,
                    t,
                    params,
                });
            }
        }
    }
    out
}

/// Distinct canonical representatives reached from [`sample_specs`].
pub fn canonical_samples(k: usize, draws: usize, seed: u64) -> Result<Vec<FamilySpec>> {
    let mut out: Vec<FamilySpec> = Vec::new();
    for spec in sample_specs(k, draws, seed) {
        let canon = normalize_params(&spec)?.spec;
        if !out.contains(&canon) {
            out.push(canon);
        }
    }
    Ok(out)
}

/// One line of the canonical list: a label, its `t`, and the parameter
/// pattern of the canonical representatives.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Branch {
    pub label: Label,
    pub t: usize,
    pub pattern: String,
}

/// The branches canonical outputs can land in at dimension parameter `k`.
pub fn canonical_branches(k: usize) -> Vec<Branch> {
    let mut out = Vec::new();
    let public = |shape: Shape, t: usize| -> Label {
        let tab = Table {
            shape,
            k,
            t,
            params: vec![Scalar::zero(); k - 1],
        };
        let tab = if shape == Shape::M7 {
            Table {
                params: vec![Scalar::one(); (k - 1) * (k - 1)],
                ..tab
            }
        } else {
            tab
        };
        tab.to_spec().map(|s| s.label).unwrap_or(Label::M1)
    };
    for t in 1..=k {
        out.push(Branch {
            label: public(Shape::M1, t),
            t,
            pattern: "beta_1..beta_{k-1}; each block sorted, e_k chosen to minimise".into(),
        });
    }
    for t in 2..=k {
        out.push(Branch {
            label: public(Shape::M2, t),
            t,
            pattern: "beta_1..beta_{t-1} not all zero, beta_t..beta_{k-1} = 0".into(),
        });
    }
    for t in 1..k {
        out.push(Branch {
            label: public(Shape::M3, t),
            t,
            pattern: "first nonzero beta equals 1".into(),
        });
    }
    for t in 2..=k {
        out.push(Branch {
            label: public(Shape::M4, t),
            t,
            pattern: "first nonzero beta equals 1".into(),
        });
        out.push(Branch {
            label: public(Shape::M5, t),
            t,
            pattern: "gamma_1 = 0, first nonzero gamma equals 1".into(),
        });
    }
    for t in 1..=k {
        out.push(Branch {
            label: public(Shape::M7, t),
            t,
            pattern: "delta not all zero, first nonzero (row-major) equals 1".into(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(label: Label, k: usize, t: Option<usize>, params: Vec<Scalar>) -> FamilySpec {
        FamilySpec::new(label, k, t, params).unwrap()
    }

    fn ints(v: &[i64]) -> Vec<Scalar> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn l1_table_at_k3() {
        let a = instantiate_family(&spec(Label::L1, 3, None, ints(&[2, 5]))).unwrap();
        let mut products = a.nonzero_products();
        products.sort();
        assert_eq!(products, vec![(0, 3), (1, 4), (2, 3), (2, 4)]);
        assert_eq!(a.product(2, 3), &ints(&[0, 0, 2, 0, 0])[..]);
        assert_eq!(a.product(2, 4), &ints(&[0, 0, 5, 0, 0])[..]);
    }

    #[test]
    fn l5_zero_is_l1_zero() {
        let l5 = instantiate_family(&spec(Label::L5, 3, None, ints(&[0, 0, 0, 0]))).unwrap();
        let l1 = instantiate_family(&spec(Label::L1, 3, None, ints(&[0, 0]))).unwrap();
        assert_eq!(l5, l1);
    }

    #[test]
    fn m6_table_entries() {
        let a = instantiate_family(&spec(Label::M6, 4, Some(2), ints(&[1, 0, 3]))).unwrap();
        // e_k = index 3, x_i = 4 + i - 1, e_t = index 1
        assert_eq!(a.coeff(3, 5, 3), &int(1));
        assert_eq!(a.coeff(5, 3, 3), &int(-1));
        assert_eq!(a.coeff(4, 3, 1), &int(1));
        assert_eq!(a.coeff(6, 3, 1), &int(3));
    }

    #[test]
    fn l2_and_l4_structure() {
        let a = instantiate_family(&spec(Label::L2, 3, None, ints(&[2, -3]))).unwrap();
        for i in 0..2 {
            assert_eq!(a.coeff(3 + i, 2, 2), &-a.coeff(2, 3 + i, 2).clone());
        }
        let a = instantiate_family(&spec(Label::L4, 4, None, ints(&[5, 7]))).unwrap();
        assert_eq!(a.coeff(4, 3, 3), &int(-1));
        assert_eq!(a.coeff(5, 3, 0), &int(5));
        assert_eq!(a.coeff(6, 3, 0), &int(7));
    }

    #[test]
    fn shape_errors() {
        assert!(FamilySpec::new(Label::L1, 3, None, ints(&[1])).is_err());
        assert!(FamilySpec::new(Label::M3, 4, Some(1), ints(&[1, 0, 0])).is_err());
        assert!(FamilySpec::new(Label::M3, 4, None, ints(&[1, 0, 0])).is_err());
        assert!(FamilySpec::new(Label::L6, 3, Some(1), ints(&[1, 0])).is_err());
        assert!("m4".parse::<Label>().is_ok());
        assert!("M8".parse::<Label>().is_err());
    }

    #[test]
    fn every_small_table_is_leibniz() {
        for k in 2..=4 {
            for s in sample_specs(k, 4, 11) {
                assert!(instantiate_family(&s).unwrap().is_leibniz(), "{s}");
            }
        }
    }

    #[test]
    fn m3_scaling_example() {
        let n = normalize_params(&spec(Label::M3, 4, Some(2), ints(&[3, 0, 4]))).unwrap();
        assert_eq!(
            n.spec,
            spec(Label::M3, 4, Some(2), vec![int(1), int(0), frac(4, 3)])
        );
        assert!(!n.canonical);
    }

    #[test]
    fn m7_zero_collapses() {
        let n = normalize_params(&spec(Label::M7, 3, Some(2), ints(&[0, 0, 0, 0]))).unwrap();
        assert!(!n.canonical);
        assert_eq!(n.spec.label, Label::M1);
        assert!(n.normalization_log.iter().any(|l| l.contains("collapses")));
    }

    #[test]
    fn l1_relabelings_share_a_representative() {
        let a = normalize_params(&spec(Label::L1, 3, None, ints(&[2, 5]))).unwrap();
        let b = normalize_params(&spec(Label::L1, 3, None, ints(&[5, 2]))).unwrap();
        assert_eq!(a.spec, b.spec);
        let c = normalize_params(&spec(Label::L1, 3, None, ints(&[2, 0]))).unwrap();
        let d = normalize_params(&spec(Label::L1, 3, None, vec![frac(1, 2), int(0)])).unwrap();
        assert_eq!(c.spec, d.spec);
    }

    #[test]
    fn normalization_is_idempotent() {
        for k in 2..=4 {
            for s in sample_specs(k, 5, 3) {
                let once = normalize_params(&s).unwrap();
                let twice = normalize_params(&once.spec).unwrap();
                assert_eq!(twice.spec, once.spec, "{s}");
                assert!(twice.canonical, "{s} -> {}", once.spec);
            }
        }
    }

    #[test]
    fn m2_rewrite_example() {
        let src = spec(Label::M2, 4, Some(2), ints(&[1, 0, 2]));
        let (target, change) = rewrite_isomorphism(&src).unwrap().unwrap();
        assert_eq!(
            target,
            spec(Label::M1, 4, Some(3), vec![frac(-1, 2), frac(1, 2), int(0)])
        );
        let conj = instantiate_family(&src)
            .unwrap()
            .change_basis(&change.matrix)
            .unwrap();
        assert_eq!(conj, instantiate_family(&target).unwrap());
    }

    #[test]
    fn m6_rewrite_conjugates() {
        let src = spec(Label::M6, 4, Some(2), ints(&[1, 4, 3]));
        let (target, change) = rewrite_isomorphism(&src).unwrap().unwrap();
        assert_eq!(target.label, Label::M5);
        assert_eq!(target.t, 3);
        // gamma_2 = nu_1, gamma_3 = nu_3; nu_2 is absorbed
        assert_eq!(target.params, ints(&[1, 3]));
        let conj = instantiate_family(&src)
            .unwrap()
            .change_basis(&change.matrix)
            .unwrap();
        assert_eq!(conj, instantiate_family(&target).unwrap());
        assert!(
            rewrite_isomorphism(&spec(Label::M1, 4, Some(2), ints(&[1, 2, 3])))
                .unwrap()
                .is_none()
        );
    }

    #[test]
    fn max_class_fixtures() {
        let l2 = instantiate_max_class(&[TwoDim::L2]).unwrap();
        assert_eq!(l2.nonzero_products(), vec![(0, 1)]);
        let r2 = instantiate_max_class(&[TwoDim::R2]).unwrap();
        assert_eq!(r2.coeff(1, 0, 0), &int(-1));
        let sum = instantiate_max_class(&[TwoDim::L2, TwoDim::R2]).unwrap();
        assert_eq!(sum.dim(), 4);
        assert!(sum.is_leibniz());
    }

    #[test]
    fn block_permutation_counts() {
        assert_eq!(block_permutations(4, &[0..2, 2..4]).len(), 4);
        assert_eq!(block_permutations(3, &[1..1, 0..3]).len(), 6);
        assert_eq!(block_permutations(2, &[]).len(), 1);
    }
}
