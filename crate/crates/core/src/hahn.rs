//! Generalized power series with rational exponents and tracked precision.
//!
//! A [`HahnSeries`] is a finite, exponent-sorted list of nonzero terms
//! together with an absolute precision: terms at exponents `>= prec` are
//! unknown and never stored. `prec = None` marks a series known exactly to
//! all orders (used for inputs such as plain polynomials in `t`).
//!
//! Coefficients live in a pluggable ring described by [`SeriesRing`], so the
//! same series plumbing serves both the equal-characteristic case
//! (coefficients in the field tower, exponents are powers of `t`) and the
//! mixed-characteristic case (coefficients in a truncated Witt ring,
//! exponents are powers of `p`). The latter needs a normalisation pass after
//! arithmetic — digit carries move mass to higher exponents — which rings
//! supply through [`NewtonRing::canonicalize`].

use std::collections::BTreeMap;

use num_bigint::BigUint;

use crate::error::Result;
use crate::exponent::{Exp, Valuation};
use crate::gfield::{FieldTower, FqElem};

/// Coefficient ring abstraction for series and root-finding.
pub trait SeriesRing: Clone {
    type Elem: Clone + PartialEq + std::fmt::Debug;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn is_zero(&self, x: &Self::Elem) -> bool;
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Result<Self::Elem>;
    fn neg(&self, x: &Self::Elem) -> Result<Self::Elem>;
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> Result<Self::Elem>;
    fn inv(&self, x: &Self::Elem) -> Result<Self::Elem>;
    fn is_unit(&self, x: &Self::Elem) -> bool;
    fn eq_elem(&self, x: &Self::Elem, y: &Self::Elem) -> Result<bool>;
    /// Image of a nonnegative integer (used for binomial coefficients).
    /// Takes `&self` because the receiver is the ring, not the element.
    #[allow(clippy::wrong_self_convention)]
    fn from_biguint(&self, n: &BigUint) -> Result<Self::Elem>;
}

/// Extra structure the root solvers need: a residue field and a canonical
/// form for series.
pub trait NewtonRing: SeriesRing {
    /// The residue field tower (for polygon residual equations).
    fn residue_tower(&self) -> &FieldTower;
    /// Reduction of a coefficient to the residue field.
    fn residue(&self, x: &Self::Elem) -> Result<FqElem>;
    /// Some lift of a residue element (any preimage of `residue`).
    fn lift_residue(&self, x: &FqElem) -> Result<Self::Elem>;
    /// Rewrites a series into canonical form. For plain field coefficients
    /// this is the identity; for Witt coefficients it performs the digit
    /// carry cascade and tightens the precision honestly.
    fn canonicalize(&self, s: HahnSeries<Self>) -> Result<HahnSeries<Self>>;
}

/// A generalized power series: sorted nonzero terms plus absolute precision.
#[derive(Clone)]
pub struct HahnSeries<R: SeriesRing> {
    /// `(exponent, coefficient)`, exponents strictly increasing, coefficients
    /// nonzero, all exponents `< prec` when `prec` is finite.
    terms: Vec<(Exp, R::Elem)>,
    /// Absolute precision; `None` means exact to all orders.
    prec: Option<Exp>,
}

impl<R: SeriesRing> std::fmt::Debug for HahnSeries<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Series{:?} + O({:?})", self.terms, self.prec)
    }
}

impl<R: SeriesRing> HahnSeries<R> {
    /// Builds a series from raw terms: sorts, merges duplicate exponents,
    /// drops zero coefficients and terms beyond the precision.
    pub fn new(ring: &R, terms: Vec<(Exp, R::Elem)>, prec: Option<Exp>) -> Result<Self> {
        let mut map: BTreeMap<Exp, R::Elem> = BTreeMap::new();
        for (e, c) in terms {
            if let Some(p) = &prec {
                if &e >= p {
                    continue;
                }
            }
            match map.remove(&e) {
                Some(cur) => {
                    let sum = ring.add(&cur, &c)?;
                    map.insert(e, sum);
                }
                None => {
                    map.insert(e, c);
                }
            }
        }
        let terms = map
            .into_iter()
            .filter(|(_, c)| !ring.is_zero(c))
            .collect();
        Ok(HahnSeries { terms, prec })
    }

    /// The zero series known up to `prec`.
    pub fn zero(prec: Option<Exp>) -> Self {
        HahnSeries {
            terms: Vec::new(),
            prec,
        }
    }

    /// `c * t^e`, exact unless a precision is given.
    pub fn monomial(ring: &R, c: R::Elem, e: Exp, prec: Option<Exp>) -> Self {
        let mut terms = Vec::new();
        let keep = match &prec {
            Some(p) => &e < p,
            None => true,
        };
        if keep && !ring.is_zero(&c) {
            terms.push((e, c));
        }
        HahnSeries { terms, prec }
    }

    pub fn constant(ring: &R, c: R::Elem) -> Self {
        Self::monomial(ring, c, Exp::zero(), None)
    }

    pub fn terms(&self) -> &[(Exp, R::Elem)] {
        &self.terms
    }

    pub fn prec(&self) -> Option<&Exp> {
        self.prec.as_ref()
    }

    /// No visible terms (may still be nonzero beyond the precision).
    pub fn is_apparently_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Identically zero to all orders.
    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.prec.is_none()
    }

    /// Valuation bound: `Finite(e0)` when a term is visible, `AtLeast(prec)`
    /// when the series is zero up to a finite precision, `None` for the
    /// exact zero series (valuation `+infinity`).
    pub fn val(&self) -> Option<Valuation> {
        if let Some((e, _)) = self.terms.first() {
            return Some(Valuation::Finite(e.clone()));
        }
        self.prec.clone().map(Valuation::AtLeast)
    }

    /// Lower bound for the valuation used in precision bookkeeping: the
    /// first term's exponent, else the precision for an apparently-zero
    /// series, else `None` for the exact zero.
    fn vbound(&self) -> Option<Exp> {
        if let Some((e, _)) = self.terms.first() {
            Some(e.clone())
        } else {
            self.prec.clone()
        }
    }

    pub fn leading(&self) -> Option<&(Exp, R::Elem)> {
        self.terms.first()
    }

    /// The coefficient at `e` (zero if absent and `e` is within precision;
    /// `None` if `e` is at or beyond the precision).
    pub fn coeff_at(&self, ring: &R, e: &Exp) -> Option<R::Elem> {
        if let Some(p) = &self.prec {
            if e >= p {
                return None;
            }
        }
        match self.terms.binary_search_by(|(te, _)| te.cmp(e)) {
            Ok(i) => Some(self.terms[i].1.clone()),
            Err(_) => Some(ring.zero()),
        }
    }
}

fn prec_min(a: Option<Exp>, b: Option<Exp>) -> Option<Exp> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

/// Addition; the precision is the minimum of the operands'.
pub fn hs_add<R: SeriesRing>(
    ring: &R,
    x: &HahnSeries<R>,
    y: &HahnSeries<R>,
) -> Result<HahnSeries<R>> {
    let prec = prec_min(x.prec.clone(), y.prec.clone());
    let mut terms = x.terms.clone();
    terms.extend(y.terms.iter().cloned());
    HahnSeries::new(ring, terms, prec)
}

pub fn hs_neg<R: SeriesRing>(ring: &R, x: &HahnSeries<R>) -> Result<HahnSeries<R>> {
    let mut terms = Vec::with_capacity(x.terms.len());
    for (e, c) in &x.terms {
        terms.push((e.clone(), ring.neg(c)?));
    }
    Ok(HahnSeries {
        terms,
        prec: x.prec.clone(),
    })
}

pub fn hs_sub<R: SeriesRing>(
    ring: &R,
    x: &HahnSeries<R>,
    y: &HahnSeries<R>,
) -> Result<HahnSeries<R>> {
    let ny = hs_neg(ring, y)?;
    hs_add(ring, x, &ny)
}

/// Multiplication. The product precision accounts for how far each factor's
/// uncertainty is pushed by the other's valuation:
/// `min(prec_x + v(y), prec_y + v(x))`.
pub fn hs_mul<R: SeriesRing>(
    ring: &R,
    x: &HahnSeries<R>,
    y: &HahnSeries<R>,
) -> Result<HahnSeries<R>> {
    if x.is_exact_zero() || y.is_exact_zero() {
        return Ok(HahnSeries::zero(None));
    }
    let px = match (&x.prec, y.vbound()) {
        (Some(p), Some(v)) => Some(p + &v),
        _ => None,
    };
    let py = match (&y.prec, x.vbound()) {
        (Some(p), Some(v)) => Some(p + &v),
        _ => None,
    };
    let prec = prec_min(px, py);
    let mut terms = Vec::new();
    for (ex, cx) in &x.terms {
        for (ey, cy) in &y.terms {
            let e = ex + ey;
            if let Some(p) = &prec {
                if &e >= p {
                    continue;
                }
            }
            terms.push((e, ring.mul(cx, cy)?));
        }
    }
    HahnSeries::new(ring, terms, prec)
}

/// Multiplies by the monomial `t^e` (shifts exponents and precision).
pub fn hs_shift<R: SeriesRing>(x: &HahnSeries<R>, e: &Exp) -> HahnSeries<R> {
    HahnSeries {
        terms: x.terms.iter().map(|(ex, c)| (ex + e, c.clone())).collect(),
        prec: x.prec.as_ref().map(|p| p + e),
    }
}

/// Multiplies every coefficient by a ring element.
pub fn hs_scale<R: SeriesRing>(
    ring: &R,
    c: &R::Elem,
    x: &HahnSeries<R>,
) -> Result<HahnSeries<R>> {
    if ring.is_zero(c) {
        return Ok(HahnSeries::zero(x.prec.clone()));
    }
    let mut terms = Vec::with_capacity(x.terms.len());
    for (e, cx) in &x.terms {
        let prod = ring.mul(c, cx)?;
        if !ring.is_zero(&prod) {
            terms.push((e.clone(), prod));
        }
    }
    Ok(HahnSeries {
        terms,
        prec: x.prec.clone(),
    })
}

/// Caps the precision at `new_prec`, dropping now-invisible terms.
pub fn hs_truncate<R: SeriesRing>(x: &HahnSeries<R>, new_prec: &Exp) -> HahnSeries<R> {
    let prec = match &x.prec {
        Some(p) => p.clone().min(new_prec.clone()),
        None => new_prec.clone(),
    };
    HahnSeries {
        terms: x
            .terms
            .iter()
            .filter(|(e, _)| e < &prec)
            .cloned()
            .collect(),
        prec: Some(prec),
    }
}

/// Equality of the visible parts up to the smaller precision.
pub fn hs_eq<R: SeriesRing>(ring: &R, x: &HahnSeries<R>, y: &HahnSeries<R>) -> Result<bool> {
    let d = hs_sub(ring, x, y)?;
    Ok(d.is_apparently_zero())
}

/// Evaluates a dense polynomial (leading coefficient first) at a series.
pub fn hs_poly_eval<R: SeriesRing>(
    ring: &R,
    poly: &[HahnSeries<R>],
    at: &HahnSeries<R>,
) -> Result<HahnSeries<R>> {
    let mut acc: HahnSeries<R> = HahnSeries::zero(None);
    for c in poly {
        acc = hs_mul(ring, &acc, at)?;
        acc = hs_add(ring, &acc, c)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Field coefficients: the equal-characteristic instantiation.
// ---------------------------------------------------------------------------

/// Coefficients in the field tower `F_p^alg`; series are elements of the
/// generalized power series field in `t`.
#[derive(Clone)]
pub struct FqRing {
    tower: FieldTower,
}

impl FqRing {
    pub fn new(tower: FieldTower) -> Self {
        FqRing { tower }
    }

    pub fn tower(&self) -> &FieldTower {
        &self.tower
    }
}

impl std::fmt::Debug for FqRing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FqRing(p={})", self.tower.p())
    }
}

impl SeriesRing for FqRing {
    type Elem = FqElem;

    fn zero(&self) -> FqElem {
        self.tower.constant(0)
    }

    fn one(&self) -> FqElem {
        self.tower.constant(1)
    }

    fn is_zero(&self, x: &FqElem) -> bool {
        self.tower.is_zero(x)
    }

    fn add(&self, x: &FqElem, y: &FqElem) -> Result<FqElem> {
        self.tower.add(x, y)
    }

    fn neg(&self, x: &FqElem) -> Result<FqElem> {
        Ok(self.tower.neg(x))
    }

    fn mul(&self, x: &FqElem, y: &FqElem) -> Result<FqElem> {
        self.tower.mul(x, y)
    }

    fn inv(&self, x: &FqElem) -> Result<FqElem> {
        self.tower.inv(x)
    }

    fn is_unit(&self, x: &FqElem) -> bool {
        !self.tower.is_zero(x)
    }

    fn eq_elem(&self, x: &FqElem, y: &FqElem) -> Result<bool> {
        self.tower.eq(x, y)
    }

    fn from_biguint(&self, n: &BigUint) -> Result<FqElem> {
        let r = n % BigUint::from(self.tower.p());
        let digits = r.to_u64_digits();
        Ok(self.tower.constant(digits.first().copied().unwrap_or(0)))
    }
}

impl NewtonRing for FqRing {
    fn residue_tower(&self) -> &FieldTower {
        &self.tower
    }

    fn residue(&self, x: &FqElem) -> Result<FqElem> {
        Ok(x.clone())
    }

    fn lift_residue(&self, x: &FqElem) -> Result<FqElem> {
        Ok(x.clone())
    }

    fn canonicalize(&self, s: HahnSeries<Self>) -> Result<HahnSeries<Self>> {
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfield::FieldTower;

    fn ring(p: u64) -> FqRing {
        FqRing::new(FieldTower::new(p, 9).unwrap())
    }

    fn e(n: i64, d: i64) -> Exp {
        Exp::new(n, d)
    }

    fn series(r: &FqRing, terms: &[(i64, i64, u64)], prec: Option<(i64, i64)>) -> HahnSeries<FqRing> {
        let t = terms
            .iter()
            .map(|&(n, d, c)| (e(n, d), r.tower().constant(c)))
            .collect();
        HahnSeries::new(r, t, prec.map(|(n, d)| e(n, d))).unwrap()
    }

    #[test]
    fn construction_merges_and_drops() {
        let r = ring(3);
        // t^{1/2} + 2 t^{1/2} = 3 t^{1/2} = 0 mod 3; terms past prec vanish.
        let s = series(&r, &[(1, 2, 1), (1, 2, 2), (5, 1, 1)], Some((2, 1)));
        assert!(s.is_apparently_zero());
        assert_eq!(s.prec().unwrap(), &e(2, 1));
    }

    #[test]
    fn addition_takes_min_precision() {
        let r = ring(5);
        let a = series(&r, &[(0, 1, 1)], Some((3, 1)));
        let b = series(&r, &[(1, 1, 4)], Some((2, 1)));
        let s = hs_add(&r, &a, &b).unwrap();
        assert_eq!(s.prec().unwrap(), &e(2, 1));
        assert_eq!(s.terms().len(), 2);
    }

    #[test]
    fn multiplication_precision_shifts_by_valuation() {
        let r = ring(5);
        // x = t + O(t^3), y = t^2 + O(t^4):
        // prec = min(3 + 2, 4 + 1) = 5.
        let x = series(&r, &[(1, 1, 1)], Some((3, 1)));
        let y = series(&r, &[(2, 1, 1)], Some((4, 1)));
        let p = hs_mul(&r, &x, &y).unwrap();
        assert_eq!(p.prec().unwrap(), &e(5, 1));
        assert_eq!(p.terms(), &[(e(3, 1), r.tower().constant(1))]);
    }

    #[test]
    fn multiplication_with_exact_operands() {
        let r = ring(2);
        let x = series(&r, &[(0, 1, 1), (1, 1, 1)], None); // 1 + t exact
        let sq = hs_mul(&r, &x, &x).unwrap();
        // (1+t)^2 = 1 + t^2 over F_2.
        assert!(sq.prec().is_none());
        assert_eq!(sq.terms().len(), 2);
        assert_eq!(sq.terms()[1].0, e(2, 1));
    }

    #[test]
    fn apparently_zero_times_series_keeps_shifted_precision() {
        let r = ring(3);
        let z = series(&r, &[], Some((2, 1))); // O(t^2)
        let y = series(&r, &[(1, 1, 1)], None); // t exact
        let p = hs_mul(&r, &z, &y).unwrap();
        assert!(p.is_apparently_zero());
        assert_eq!(p.prec().unwrap(), &e(3, 1));
    }

    #[test]
    fn valuation_reporting() {
        let r = ring(3);
        let s = series(&r, &[(1, 2, 2)], Some((4, 1)));
        assert_eq!(s.val(), Some(Valuation::Finite(e(1, 2))));
        let z = series(&r, &[], Some((4, 1)));
        assert_eq!(z.val(), Some(Valuation::AtLeast(e(4, 1))));
        let exact_zero: HahnSeries<FqRing> = HahnSeries::zero(None);
        assert_eq!(exact_zero.val(), None);
    }

    #[test]
    fn shift_and_truncate() {
        let r = ring(2);
        let s = series(&r, &[(0, 1, 1), (3, 2, 1)], Some((2, 1)));
        let sh = hs_shift(&s, &e(1, 2));
        assert_eq!(sh.terms()[0].0, e(1, 2));
        assert_eq!(sh.prec().unwrap(), &e(5, 2));
        let tr = hs_truncate(&sh, &e(1, 1));
        assert_eq!(tr.terms().len(), 1);
        assert_eq!(tr.prec().unwrap(), &e(1, 1));
    }

    #[test]
    fn polynomial_evaluation_leading_first() {
        let r = ring(3);
        // P = x^2 - t (coefficients leading-first: 1, 0, -t).
        let one = HahnSeries::constant(&r, r.one());
        let zero: HahnSeries<FqRing> = HahnSeries::zero(None);
        let minus_t = series(&r, &[(1, 1, 2)], None);
        let poly = vec![one, zero, minus_t];
        // At x = t: P(t) = t^2 - t.
        let at = series(&r, &[(1, 1, 1)], None);
        let v = hs_poly_eval(&r, &poly, &at).unwrap();
        assert_eq!(v.terms().len(), 2);
        assert_eq!(v.terms()[0].0, e(1, 1));
        assert_eq!(v.terms()[1].0, e(2, 1));
    }

    #[test]
    fn coeff_lookup_respects_precision() {
        let r = ring(5);
        let s = series(&r, &[(1, 1, 3)], Some((2, 1)));
        assert_eq!(s.coeff_at(&r, &e(1, 1)), Some(r.tower().constant(3)));
        assert_eq!(s.coeff_at(&r, &e(0, 1)), Some(r.zero()));
        assert_eq!(s.coeff_at(&r, &e(2, 1)), None);
    }

    mod laws {
        use super::*;
        use proptest::prelude::*;

        fn arb_series() -> impl Strategy<Value = Vec<(i64, i64, u64)>> {
            prop::collection::vec((-4i64..8, 1i64..3, 0u64..5), 0..4)
        }

        fn build(r: &FqRing, spec: &[(i64, i64, u64)], prec: Option<i64>) -> HahnSeries<FqRing> {
            let terms = spec
                .iter()
                .map(|&(n, d, c)| (e(n, d), r.tower().constant(c)))
                .collect();
            HahnSeries::new(r, terms, prec.map(|p| e(p, 1))).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn add_commutes(a in arb_series(), b in arb_series(),
                            pa in prop::option::of(2i64..6), pb in prop::option::of(2i64..6)) {
                let r = ring(5);
                let x = build(&r, &a, pa);
                let y = build(&r, &b, pb);
                let l = hs_add(&r, &x, &y).unwrap();
                let rr = hs_add(&r, &y, &x).unwrap();
                prop_assert!(hs_eq(&r, &l, &rr).unwrap());
            }

            #[test]
            fn mul_distributes(a in arb_series(), b in arb_series(), c in arb_series(),
                               pa in prop::option::of(2i64..6)) {
                let r = ring(5);
                let x = build(&r, &a, pa);
                let y = build(&r, &b, None);
                let z = build(&r, &c, None);
                let lhs = hs_mul(&r, &hs_add(&r, &x, &y).unwrap(), &z).unwrap();
                let rhs = hs_add(&r, &hs_mul(&r, &x, &z).unwrap(), &hs_mul(&r, &y, &z).unwrap()).unwrap();
                prop_assert!(hs_eq(&r, &lhs, &rhs).unwrap());
            }

            #[test]
            fn mul_associates(a in arb_series(), b in arb_series(), c in arb_series()) {
                let r = ring(5);
                let x = build(&r, &a, None);
                let y = build(&r, &b, None);
                let z = build(&r, &c, None);
                let lhs = hs_mul(&r, &hs_mul(&r, &x, &y).unwrap(), &z).unwrap();
                let rhs = hs_mul(&r, &x, &hs_mul(&r, &y, &z).unwrap()).unwrap();
                prop_assert!(hs_eq(&r, &lhs, &rhs).unwrap());
            }
        }
    }
}
