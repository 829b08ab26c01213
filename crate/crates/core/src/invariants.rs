//! Basis-independent profiles used as non-isomorphism evidence, and a
//! witness-producing isomorphism search that never claims non-isomorphism.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use num_traits::{One, Zero};

use crate::algebra::{
    annihilators_center, series, subspace_product, Algebra, SeriesKind, Subspace,
};
use crate::derivations::{derivation_space, nilradical_weights};
use crate::error::{AlgebraError, Result};
use crate::families::{instantiate_family, FamilySpec};
use crate::linalg::{coordinates, Matrix};
use crate::normalizer::{classify_algebra, right_centralizer_of_square, BasisChange};
use crate::scalar::{fmt_scalar, int, rational_sqrt, Scalar};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct InvariantProfile {
    pub dim: usize,
    pub lcs_dims: Vec<usize>,
    pub ds_dims: Vec<usize>,
    pub ann_r_dim: usize,
    pub ann_l_dim: usize,
    pub center_dim: usize,
    pub der_dim: usize,
    pub squared_dim: usize,
    /// Coordinates of each weight of the right action on the nilradical
    /// candidate, taken against every basis made of the other weights;
    /// `(value, count)` sorted by value.
    pub right_spectrum_multiset: Vec<(Scalar, usize)>,
    /// Per weight space of the same action: (dimension, dimension of the
    /// common eigenspace), sorted. Separates semisimple from Jordan blocks.
    pub weight_block_shape: Vec<(usize, usize)>,
    /// False when the spectrum could not be computed (no abelian ideal
    /// candidate, or irrational eigenvalues); the multiset is then empty.
    pub spectrum_available: bool,
}

impl InvariantProfile {
    /// Field names paired with a printable value, in comparison order.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let spectrum = self
            .right_spectrum_multiset
            .iter()
            .map(|(v, c)| format!("{}^{c}", fmt_scalar(v)))
            .join(",");
        vec![
            ("dim", self.dim.to_string()),
            ("lcs_dims", format!("{:?}", self.lcs_dims)),
            ("ds_dims", format!("{:?}", self.ds_dims)),
            ("ann_r_dim", self.ann_r_dim.to_string()),
            ("ann_l_dim", self.ann_l_dim.to_string()),
            ("center_dim", self.center_dim.to_string()),
            ("der_dim", self.der_dim.to_string()),
            ("squared_dim", self.squared_dim.to_string()),
            ("spectrum_available", self.spectrum_available.to_string()),
            (
                "weight_block_shape",
                format!("{:?}", self.weight_block_shape),
            ),
            ("right_spectrum_multiset", format!("[{spectrum}]")),
        ]
    }
}

pub fn invariant_profile(a: &Algebra) -> Result<InvariantProfile> {
    let n = a.dim();
    let ann = annihilators_center(a);
    let full = Subspace::full(n);
    let spectrum = right_spectrum(a);
    Ok(InvariantProfile {
        dim: n,
        lcs_dims: series(a, SeriesKind::LowerCentral)?.dims(),
        ds_dims: series(a, SeriesKind::Derived)?.dims(),
        ann_r_dim: ann.right.dim(),
        ann_l_dim: ann.left.dim(),
        center_dim: ann.center.dim(),
        der_dim: derivation_space(a).dim,
        squared_dim: subspace_product(a, &full, &full)?.dim(),
        spectrum_available: spectrum.is_some(),
        weight_block_shape: spectrum.as_ref().map(|s| s.1.clone()).unwrap_or_default(),
        right_spectrum_multiset: spectrum.map(|s| s.0).unwrap_or_default(),
    })
}

type Spectrum = (Vec<(Scalar, usize)>, Vec<(usize, usize)>);

fn right_spectrum(a: &Algebra) -> Option<Spectrum> {
    let nil = right_centralizer_of_square(a).ok()?;
    if !subspace_product(a, &nil, &nil).ok()?.is_zero() {
        return None;
    }
    let q: Vec<Vec<Scalar>> = nil
        .complement_axes()
        .into_iter()
        .map(|i| a.unit(i))
        .collect();
    let blocks = nilradical_weights(a, &nil, &q).ok()?;
    let weights: Vec<Vec<Scalar>> = blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(b.weight.clone(), b.basis.len()))
        .collect();
    let width = q.len();
    let rank = if width == 0 {
        0
    } else {
        Matrix::from_rows(weights.clone(), width).rank()
    };
    let mut counts: BTreeMap<Scalar, usize> = BTreeMap::new();
    for subset in (0..weights.len()).combinations(rank) {
        let basis: Vec<Vec<Scalar>> = subset.iter().map(|&i| weights[i].clone()).collect();
        if rank > 0 && Matrix::from_rows(basis.clone(), width).rank() != rank {
            continue;
        }
        for (i, w) in weights.iter().enumerate() {
            if subset.contains(&i) {
                continue;
            }
            let co = if rank == 0 {
                Vec::new()
            } else {
                coordinates(&basis, w)?
            };
            for c in co {
                *counts.entry(c).or_default() += 1;
            }
        }
    }
    let mut shape: Vec<(usize, usize)> = blocks
        .iter()
        .map(|b| {
            let n = a.dim();
            let images: Vec<Vec<Vec<Scalar>>> = b
                .basis
                .iter()
                .map(|v| {
                    q.iter()
                        .enumerate()
                        .map(|(l, x)| {
                            let mut r = a.br(v, x);
                            for (ri, vi) in r.iter_mut().zip(v) {
                                *ri -= &b.weight[l] * vi;
                            }
                            r
                        })
                        .collect()
                })
                .collect();
            let m = Matrix::from_fn(n * q.len(), b.basis.len(), |r, c| {
                images[c][r / n][r % n].clone()
            });
            (b.basis.len(), m.kernel().len())
        })
        .collect();
    shape.sort();
    Some((counts.into_iter().collect(), shape))
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Distinction {
    Distinguished(&'static str),
    Inconclusive,
}

pub fn distinguish(a: &Algebra, b: &Algebra) -> Result<Distinction> {
    Ok(distinguish_profiles(
        &invariant_profile(a)?,
        &invariant_profile(b)?,
    ))
}

pub fn distinguish_profiles(pa: &InvariantProfile, pb: &InvariantProfile) -> Distinction {
    pa.fields()
        .into_iter()
        .zip(pb.fields())
        .find(|(x, y)| x.1 != y.1)
        .map_or(Distinction::Inconclusive, |(x, _)| {
            Distinction::Distinguished(x.0)
        })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IsoBudget {
    /// Basis permutations with diagonal rescaling, plus the classifier's
    /// normalizing changes.
    PermutationScaling,
    /// Additionally precomposes one elementary shear; dimension at most 5.
    FullSmall,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum IsoOutcome {
    /// `a` conjugated by the witness equals `b` exactly.
    Isomorphic(BasisChange),
    Inconclusive,
}

const FULL_SMALL_MAX_DIM: usize = 5;
const MAX_ASSIGNMENTS: usize = 20_000;

pub fn isomorphism_search(a: &Algebra, b: &Algebra, budget: IsoBudget) -> Result<IsoOutcome> {
    let n = a.dim();
    if b.dim() != n {
        return Err(AlgebraError::Dimension {
            expected: n,
            got: b.dim(),
        });
    }
    if budget == IsoBudget::FullSmall && n > FULL_SMALL_MAX_DIM {
        return Err(AlgebraError::Budget(format!(
            "full search is limited to dimension {FULL_SMALL_MAX_DIM}, got {n}"
        )));
    }
    if a.tensor() == b.tensor() {
        return Ok(IsoOutcome::Isomorphic(BasisChange::identity(n)));
    }
    if let Some(p) = permutation_scaling(a, b)? {
        return Ok(IsoOutcome::Isomorphic(BasisChange::step(
            p,
            "basis permutation with rescaling",
        )?));
    }
    if let Some(w) = via_classifier(a, b)? {
        return Ok(IsoOutcome::Isomorphic(w));
    }
    if budget == IsoBudget::FullSmall {
        for (i, j) in (0..n).cartesian_product(0..n).filter(|(i, j)| i != j) {
            for c in [-2, -1, 1, 2] {
                let mut shear = Matrix::identity(n);
                shear[(i, j)] = int(c);
                let sheared = a.change_basis(&shear)?;
                if let Some(p) = permutation_scaling(&sheared, b)? {
                    let first = BasisChange::step(
                        shear,
                        format!("shear b{} <- b{} + ({c}) b{}", i + 1, i + 1, j + 1),
                    )?;
                    return Ok(IsoOutcome::Isomorphic(
                        first.then(&BasisChange::step(p, "basis permutation with rescaling")?),
                    ));
                }
            }
        }
    }
    Ok(IsoOutcome::Inconclusive)
}

/// Witness from the normalizing changes when both algebras classify to the
/// same canonical spec.
fn via_classifier(a: &Algebra, b: &Algebra) -> Result<Option<BasisChange>> {
    let (Ok((_, ra)), Ok((_, rb))) = (classify_algebra(a, None), classify_algebra(b, None)) else {
        return Ok(None);
    };
    if ra.spec.spec != rb.spec.spec {
        return Ok(None);
    }
    let w = ra.change.then(&rb.change.inverse()?);
    Ok((a.change_basis(&w.matrix)? == *b).then_some(w))
}

fn nonzero_pattern(a: &Algebra) -> Vec<bool> {
    a.tensor().iter().map(|c| !c.is_zero()).collect()
}

/// Per basis vector: nonzero counts as left factor, right factor, output.
fn signatures(a: &Algebra, nz: &[bool]) -> Vec<(usize, usize, usize)> {
    let n = a.dim();
    let idx = |i: usize, j: usize, m: usize| (i * n + j) * n + m;
    (0..n)
        .map(|v| {
            let left = (0..n)
                .cartesian_product(0..n)
                .filter(|&(j, m)| nz[idx(v, j, m)])
                .count();
            let right = (0..n)
                .cartesian_product(0..n)
                .filter(|&(i, m)| nz[idx(i, v, m)])
                .count();
            let out = (0..n)
                .cartesian_product(0..n)
                .filter(|&(i, j)| nz[idx(i, j, v)])
                .count();
            (left, right, out)
        })
        .collect()
}

/// Searches `tau` and `d` with new basis vector `p` equal to `d_p a_{tau(p)}`
/// carrying `a` onto `b`.
fn permutation_scaling(a: &Algebra, b: &Algebra) -> Result<Option<Matrix>> {
    let n = a.dim();
    let (na, nb) = (nonzero_pattern(a), nonzero_pattern(b));
    if na.iter().filter(|x| **x).count() != nb.iter().filter(|x| **x).count() {
        return Ok(None);
    }
    let (sa, sb) = (signatures(a, &na), signatures(b, &nb));
    let mut tau = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut budget = MAX_ASSIGNMENTS;
    let mut found = None;
    assign(0, &mut tau, &mut used, &na, &nb, &sa, &sb, &mut |tau| {
        if budget == 0 {
            return true;
        }
        budget -= 1;
        match scaling_for(a, b, tau) {
            Some(p) => {
                found = Some(p);
                true
            }
            None => false,
        }
    });
    Ok(found)
}

#[allow(clippy::too_many_arguments)]
fn assign(
    p: usize,
    tau: &mut Vec<usize>,
    used: &mut Vec<bool>,
    na: &[bool],
    nb: &[bool],
    sa: &[(usize, usize, usize)],
    sb: &[(usize, usize, usize)],
    done: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    let n = tau.len();
    if p == n {
        return done(tau);
    }
    let idx = |i: usize, j: usize, m: usize| (i * n + j) * n + m;
    for cand in 0..n {
        if used[cand] || sa[cand] != sb[p] {
            continue;
        }
        tau[p] = cand;
        let consistent = (0..=p).cartesian_product(0..=p).all(|(q, r)| {
            [(p, q, r), (q, p, r), (q, r, p)]
                .into_iter()
                .all(|(i, j, m)| nb[idx(i, j, m)] == na[idx(tau[i], tau[j], tau[m])])
        });
        if consistent {
            used[cand] = true;
            if assign(p + 1, tau, used, na, nb, sa, sb, done) {
                return true;
            }
            used[cand] = false;
        }
    }
    tau[p] = usize::MAX;
    false
}

/// Solves `d_p d_q / d_r = b_pq^r / a_{tau p, tau q}^{tau r}` by propagation,
/// fixing free scales to 1, and verifies the result.
fn scaling_for(a: &Algebra, b: &Algebra, tau: &[usize]) -> Option<Matrix> {
    let n = a.dim();
    let mut eqs = Vec::new();
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                let bv = b.coeff(p, q, r);
                if !bv.is_zero() {
                    eqs.push((p, q, r, bv / a.coeff(tau[p], tau[q], tau[r])));
                }
            }
        }
    }
    let mut d: Vec<Option<Scalar>> = vec![None; n];
    loop {
        let mut progressed = false;
        for (p, q, r, rho) in &eqs {
            let mut unknown: Option<usize> = None;
            let mut exp = 0i32;
            let mut known = Scalar::one();
            let mut solvable = true;
            for (v, sign) in [(*p, 1), (*q, 1), (*r, -1)] {
                match &d[v] {
                    Some(x) if sign > 0 => known *= x,
                    Some(x) => known /= x,
                    None if unknown.is_none_or(|u| u == v) => {
                        unknown = Some(v);
                        exp += sign;
                    }
                    None => solvable = false,
                }
            }
            let Some(u) = unknown else { continue };
            if !solvable {
                continue;
            }
            let rhs = rho / known;
            let value = match exp {
                1 => Some(rhs),
                -1 => Some(rhs.recip()),
                2 => rational_sqrt(&rhs),
                _ => None,
            };
            let value = value?;
            if value.is_zero() {
                return None;
            }
            d[u] = Some(value);
            progressed = true;
        }
        if !progressed {
            match d.iter().position(Option::is_none) {
                Some(free) => d[free] = Some(Scalar::one()),
                None => break,
            }
        }
    }
    let mut m = Matrix::zeros(n, n);
    for p in 0..n {
        m[(p, tau[p])] = d[p].clone().unwrap();
    }
    (a.change_basis(&m).ok()? == *b).then_some(m)
}

/// Outcome of the pairwise sweep over a list of canonical specs.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PairwiseReport {
    pub specs: Vec<FamilySpec>,
    pub pairs: usize,
    pub distinguished: usize,
    /// Pairs the profiles do not separate and the search leaves open.
    pub collisions: Vec<(usize, usize)>,
    /// Pairs with an exact witness; must stay empty for distinct canonical
    /// specs.
    pub isomorphic: Vec<(usize, usize)>,
}

impl PairwiseReport {
    /// One line per unresolved or isomorphic pair.
    pub fn collision_text(&self) -> String {
        let show = |i: usize| format!("k={} {}", self.specs[i].k, self.specs[i]);
        let mut out = String::new();
        for &(i, j) in &self.collisions {
            out.push_str(&format!("{} | {} | inconclusive\n", show(i), show(j)));
        }
        for &(i, j) in &self.isomorphic {
            out.push_str(&format!("{} | {} | isomorphic\n", show(i), show(j)));
        }
        out
    }
}

impl fmt::Display for PairwiseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} specs, {} pairs: {} distinguished, {} inconclusive, {} isomorphic",
            self.specs.len(),
            self.pairs,
            self.distinguished,
            self.collisions.len(),
            self.isomorphic.len()
        )
    }
}

pub fn pairwise_report(specs: &[FamilySpec]) -> Result<PairwiseReport> {
    let algebras = specs
        .iter()
        .map(instantiate_family)
        .collect::<Result<Vec<_>>>()?;
    let profiles = algebras
        .iter()
        .map(invariant_profile)
        .collect::<Result<Vec<_>>>()?;
    let mut report = PairwiseReport {
        specs: specs.to_vec(),
        pairs: 0,
        distinguished: 0,
        collisions: Vec::new(),
        isomorphic: Vec::new(),
    };
    for (i, j) in (0..specs.len()).tuple_combinations() {
        if specs[i] == specs[j] {
            continue;
        }
        report.pairs += 1;
        if let Distinction::Distinguished(_) = distinguish_profiles(&profiles[i], &profiles[j]) {
            report.distinguished += 1;
            continue;
        }
        match isomorphism_search(&algebras[i], &algebras[j], IsoBudget::PermutationScaling)? {
            IsoOutcome::Isomorphic(_) => report.isomorphic.push((i, j)),
            IsoOutcome::Inconclusive => report.collisions.push((i, j)),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::tests::l2;
    use crate::families::{rewrite_isomorphism, Label};
    use crate::normalizer::{random_basis_change, ScrambleProfile};

    fn ints(v: &[i64]) -> Vec<Scalar> {
        v.iter().map(|&x| int(x)).collect()
    }

    fn fam(label: Label, k: usize, t: Option<usize>, params: &[i64]) -> Algebra {
        instantiate_family(&FamilySpec::new(label, k, t, ints(params)).unwrap()).unwrap()
    }

    #[test]
    fn abelian_profile() {
        let p = invariant_profile(&Algebra::abelian(3)).unwrap();
        assert_eq!(p.lcs_dims, vec![3, 0]);
        assert_eq!(
            (p.ann_r_dim, p.ann_l_dim, p.center_dim, p.der_dim),
            (3, 3, 3, 9)
        );
    }

    #[test]
    fn l2_profile() {
        let p = invariant_profile(&l2()).unwrap();
        assert_eq!(
            (p.ann_r_dim, p.ann_l_dim, p.center_dim, p.der_dim),
            (1, 1, 0, 1)
        );
    }

    #[test]
    fn annihilator_separates_l1_l2() {
        let a = fam(Label::L1, 3, None, &[2, 5]);
        let b = fam(Label::L2, 3, None, &[2, 5]);
        assert_eq!(
            distinguish(&a, &b).unwrap(),
            Distinction::Distinguished("ann_r_dim")
        );
    }

    #[test]
    fn distinguish_examples() {
        let a = fam(Label::L1, 3, None, &[2, 5]);
        assert_eq!(distinguish(&a, &a).unwrap(), Distinction::Inconclusive);
        let b = fam(Label::L1, 3, None, &[5, 2]);
        assert_eq!(distinguish(&a, &b).unwrap(), Distinction::Inconclusive);
        let z = fam(Label::L1, 3, None, &[0, 0]);
        let d = fam(Label::L5, 3, None, &[1, 0, 0, 0]);
        assert!(matches!(
            distinguish(&z, &d).unwrap(),
            Distinction::Distinguished(_)
        ));
        let c = fam(Label::L1, 3, None, &[2, 6]);
        assert_eq!(
            distinguish(&a, &c).unwrap(),
            Distinction::Distinguished("right_spectrum_multiset")
        );
    }

    #[test]
    fn jordan_block_is_visible() {
        let a = fam(Label::M1, 3, Some(2), &[1, 0]);
        let b = fam(Label::M3, 3, Some(2), &[1, 1]);
        assert_eq!(
            distinguish(&a, &b).unwrap(),
            Distinction::Distinguished("weight_block_shape")
        );
    }

    #[test]
    fn profile_is_basis_invariant() {
        let a = fam(Label::M5, 4, Some(2), &[1, 3]);
        let p = invariant_profile(&a).unwrap();
        assert!(p.spectrum_available);
        for seed in 0..5 {
            let m = random_basis_change(seed, 4, ScrambleProfile::General);
            assert_eq!(
                invariant_profile(&a.change_basis(&m.matrix).unwrap()).unwrap(),
                p
            );
        }
    }

    #[test]
    fn permutation_witness() {
        let a = fam(Label::L1, 3, None, &[2, 5]);
        let b = fam(Label::L1, 3, None, &[5, 2]);
        let IsoOutcome::Isomorphic(w) =
            isomorphism_search(&a, &b, IsoBudget::PermutationScaling).unwrap()
        else {
            panic!("expected a witness");
        };
        assert_eq!(a.change_basis(&w.matrix).unwrap(), b);
        assert_eq!(
            isomorphism_search(&a, &a, IsoBudget::PermutationScaling).unwrap(),
            IsoOutcome::Isomorphic(BasisChange::identity(5))
        );
    }

    #[test]
    fn rewrite_pair_is_found() {
        let src = FamilySpec::new(Label::M2, 4, Some(2), ints(&[1, 0, 2])).unwrap();
        let (dst, _) = rewrite_isomorphism(&src).unwrap().unwrap();
        let (a, b) = (
            instantiate_family(&src).unwrap(),
            instantiate_family(&dst).unwrap(),
        );
        let IsoOutcome::Isomorphic(w) =
            isomorphism_search(&a, &b, IsoBudget::PermutationScaling).unwrap()
        else {
            panic!("expected a witness");
        };
        assert_eq!(a.change_basis(&w.matrix).unwrap(), b);
    }

    #[test]
    fn full_small_budget() {
        let a = fam(Label::L1, 4, None, &[1, 2, 3]);
        assert!(matches!(
            isomorphism_search(&a, &a, IsoBudget::FullSmall),
            Err(AlgebraError::Budget(_))
        ));
        // x <- x + e_1 creates [x, x] = e_1, which no permutation produces
        let a = fam(Label::L1, 2, None, &[1]);
        let mut s = Matrix::identity(3);
        s[(2, 0)] = int(1);
        let b = a.change_basis(&s).unwrap();
        assert!(matches!(
            isomorphism_search(&a, &b, IsoBudget::FullSmall).unwrap(),
            IsoOutcome::Isomorphic(_)
        ));
    }
}
