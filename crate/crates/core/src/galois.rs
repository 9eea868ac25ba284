//! Truncated Witt rings `W_m(F_{p^d})` over the field tower.
//!
//! Level `d`, precision `m` is realised as `(Z/p^m)[x]/(f_d)` where `f_d` is
//! the integer lift (same coefficient values) of the level-`d` defining
//! polynomial. Every operation here that depends on the ring structure —
//! Teichmüller lifts, digit decompositions, the Frobenius `sigma`, Witt
//! coordinates — relies only on `R/pR ≅ F_{p^d}` and on exact divisibility
//! by `p`, so it is independent of which monic lift is chosen.
//!
//! Elements carry their own `(level, m)`; binary operations unify levels via
//! digit-wise embeddings and truncate to the smaller precision.

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::gfield::{FieldTower, FqElem};

/// An element of `W_m(F_{p^d})`: coordinates in `[0, p^m)` over the power
/// basis of the level-`d` generator, low degree first, length `d`.
#[derive(Clone, PartialEq, Eq)]
pub struct GrElem {
    level: u32,
    m: u32,
    coeffs: Vec<u64>,
}

impl GrElem {
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Precision: the element is known modulo `p^m`.
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }
}

impl std::fmt::Debug for GrElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "W(m={},d={}){:?}", self.m, self.level, self.coeffs)
    }
}

/// Witt-ring operations layered over a shared [`FieldTower`].
#[derive(Clone)]
pub struct GaloisTower {
    field: FieldTower,
    p: u64,
}

impl GaloisTower {
    pub fn new(field: FieldTower) -> Self {
        let p = field.p();
        GaloisTower { field, p }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// The residue-field tower underneath.
    pub fn field(&self) -> &FieldTower {
        &self.field
    }

    fn modulus(&self, m: u32) -> Result<u64> {
        if m == 0 {
            return Err(Error::InvalidInput("precision m must be >= 1".into()));
        }
        let mut acc: u64 = 1;
        for _ in 0..m {
            acc = acc.checked_mul(self.p).ok_or_else(|| {
                Error::InvalidInput(format!("p^{m} exceeds the supported word size"))
            })?;
            if acc > (1 << 62) {
                return Err(Error::InvalidInput(format!(
                    "p^{m} exceeds the supported bound 2^62"
                )));
            }
        }
        Ok(acc)
    }

    /// Monic defining polynomial of level `d` lifted to `Z` coefficients.
    pub fn lift_poly(&self, d: u32) -> Result<Vec<u64>> {
        self.field.defining_poly(d)
    }

    pub fn zero(&self, d: u32, m: u32) -> Result<GrElem> {
        self.modulus(m)?;
        self.field.ensure_level(d)?;
        Ok(GrElem {
            level: d,
            m,
            coeffs: vec![0; d as usize],
        })
    }

    pub fn one(&self, d: u32, m: u32) -> Result<GrElem> {
        let mut z = self.zero(d, m)?;
        z.coeffs[0] = 1;
        Ok(z)
    }

    /// The integer constant `c` in `W_m(F_p)` (i.e. `Z/p^m`).
    pub fn constant(&self, c: u64, m: u32) -> Result<GrElem> {
        let md = self.modulus(m)?;
        Ok(GrElem {
            level: 1,
            m,
            coeffs: vec![c % md],
        })
    }

    pub fn from_coeffs(&self, d: u32, m: u32, coeffs: &[u64]) -> Result<GrElem> {
        if coeffs.len() != d as usize {
            return Err(Error::InvalidInput(format!(
                "expected {d} coordinates, got {}",
                coeffs.len()
            )));
        }
        let md = self.modulus(m)?;
        self.field.ensure_level(d)?;
        Ok(GrElem {
            level: d,
            m,
            coeffs: coeffs.iter().map(|&c| c % md).collect(),
        })
    }

    /// Reduction modulo `p`.
    pub fn residue(&self, x: &GrElem) -> Result<FqElem> {
        let coeffs: Vec<u64> = x.coeffs.iter().map(|&c| c % self.p).collect();
        self.field.from_coeffs(x.level, &coeffs)
    }

    /// The coordinate-wise lift of a residue element (digits beyond the
    /// first are whatever the lift produces; use [`Self::teichmuller`] for
    /// the multiplicative lift).
    pub fn plain_lift(&self, x: &FqElem, m: u32) -> Result<GrElem> {
        self.modulus(m)?;
        Ok(GrElem {
            level: x.level(),
            m,
            coeffs: x.coeffs().to_vec(),
        })
    }

    pub fn is_zero(&self, x: &GrElem) -> bool {
        x.coeffs.iter().all(|&c| c == 0)
    }

    /// A unit is anything with nonzero residue.
    pub fn is_unit(&self, x: &GrElem) -> bool {
        x.coeffs.iter().any(|&c| c % self.p != 0)
    }

    /// Truncates to precision `m2 <= m`.
    pub fn truncate(&self, x: &GrElem, m2: u32) -> Result<GrElem> {
        if m2 > x.m {
            return Err(Error::PrecisionTooLow(format!(
                "cannot raise precision from {} to {m2}",
                x.m
            )));
        }
        let md = self.modulus(m2)?;
        Ok(GrElem {
            level: x.level,
            m: m2,
            coeffs: x.coeffs.iter().map(|&c| c % md).collect(),
        })
    }

    /// Unifies levels (digit-wise embedding) and precisions (truncation to
    /// the smaller) of two operands.
    pub fn unify(&self, x: &GrElem, y: &GrElem) -> Result<(GrElem, GrElem)> {
        let m = x.m.min(y.m);
        let lvl = x.level.lcm(&y.level);
        let a = self.embed_level(&self.truncate(x, m)?, lvl)?;
        let b = self.embed_level(&self.truncate(y, m)?, lvl)?;
        Ok((a, b))
    }

    pub fn add(&self, x: &GrElem, y: &GrElem) -> Result<GrElem> {
        let (a, b) = self.unify(x, y)?;
        let md = self.modulus(a.m)?;
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(&u, &v)| (u + v) % md)
            .collect();
        Ok(GrElem {
            level: a.level,
            m: a.m,
            coeffs,
        })
    }

    pub fn neg(&self, x: &GrElem) -> Result<GrElem> {
        let md = self.modulus(x.m)?;
        Ok(GrElem {
            level: x.level,
            m: x.m,
            coeffs: x.coeffs.iter().map(|&c| (md - c) % md).collect(),
        })
    }

    pub fn sub(&self, x: &GrElem, y: &GrElem) -> Result<GrElem> {
        let ny = self.neg(y)?;
        self.add(x, &ny)
    }

    pub fn mul(&self, x: &GrElem, y: &GrElem) -> Result<GrElem> {
        let (a, b) = self.unify(x, y)?;
        let md = self.modulus(a.m)?;
        let lift = self.lift_poly(a.level)?;
        let prod = zm_poly_mul(&a.coeffs, &b.coeffs, md);
        let mut r = zm_poly_rem(&prod, &lift, md);
        r.resize(a.level as usize, 0);
        Ok(GrElem {
            level: a.level,
            m: a.m,
            coeffs: r,
        })
    }

    pub fn scalar_mul(&self, c: u64, x: &GrElem) -> Result<GrElem> {
        let md = self.modulus(x.m)?;
        let c = c % md;
        Ok(GrElem {
            level: x.level,
            m: x.m,
            coeffs: x
                .coeffs
                .iter()
                .map(|&u| ((u as u128 * c as u128) % md as u128) as u64)
                .collect(),
        })
    }

    pub fn mul_by_p(&self, x: &GrElem) -> Result<GrElem> {
        self.scalar_mul(self.p, x)
    }

    /// Exact division by `p`. Fails unless every coordinate is divisible.
    /// The result is known to one digit less precision.
    pub fn div_by_p_exact(&self, x: &GrElem) -> Result<GrElem> {
        if x.m <= 1 {
            return Err(Error::PrecisionTooLow(
                "division by p of a precision-1 element".into(),
            ));
        }
        let mut coeffs = Vec::with_capacity(x.coeffs.len());
        for &c in &x.coeffs {
            if c % self.p != 0 {
                return Err(Error::InvalidInput(
                    "element is not divisible by p".into(),
                ));
            }
            coeffs.push(c / self.p);
        }
        Ok(GrElem {
            level: x.level,
            m: x.m - 1,
            coeffs,
        })
    }

    /// `p`-adic valuation, capped at the precision: `Finite(k)` when the
    /// element is `p^k * unit`, `None` when it is indistinguishable from 0.
    pub fn v_p(&self, x: &GrElem) -> Option<u32> {
        if self.is_zero(x) {
            return None;
        }
        let mut k = 0;
        let mut pk = 1u64;
        loop {
            pk *= self.p;
            if x.coeffs.iter().all(|&c| c % pk == 0) {
                k += 1;
            } else {
                return Some(k);
            }
        }
    }

    pub fn inv(&self, x: &GrElem) -> Result<GrElem> {
        if !self.is_unit(x) {
            return Err(Error::NotAUnit);
        }
        // Newton from the residue inverse: z <- z(2 - xz), doubling digits.
        let r = self.residue(x)?;
        let r_inv = self.field.inv(&r)?;
        let mut z = self.plain_lift(&r_inv, x.m)?;
        let two = self.constant(2, x.m)?;
        let mut known = 1u32;
        while known < x.m {
            let xz = self.mul(x, &z)?;
            let corr = self.sub(&two, &xz)?;
            z = self.mul(&z, &corr)?;
            known *= 2;
        }
        Ok(z)
    }

    pub fn div(&self, x: &GrElem, y: &GrElem) -> Result<GrElem> {
        let yi = self.inv(y)?;
        self.mul(x, &yi)
    }

    pub fn eq(&self, x: &GrElem, y: &GrElem) -> Result<bool> {
        let (a, b) = self.unify(x, y)?;
        Ok(a == b)
    }

    /// `x^e` by square and multiply.
    pub fn pow(&self, x: &GrElem, e: u64) -> Result<GrElem> {
        let mut result = self.one(x.level, x.m)?;
        let mut acc = x.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(&result, &acc)?;
            }
            e >>= 1;
            if e > 0 {
                acc = self.mul(&acc, &acc)?;
            }
        }
        Ok(result)
    }

    /// `x^(p^d)` computed as `d` successive p-th powers.
    fn pow_q(&self, x: &GrElem, d: u32) -> Result<GrElem> {
        let mut out = x.clone();
        for _ in 0..d {
            out = self.pow(&out, self.p)?;
        }
        Ok(out)
    }

    /// The Teichmüller (multiplicative) lift of a residue element: the
    /// unique lift fixed by `y -> y^{p^d}`.
    pub fn teichmuller(&self, x: &FqElem, m: u32) -> Result<GrElem> {
        let mut a = self.plain_lift(x, m)?;
        for _ in 0..m.saturating_sub(1) {
            a = self.pow_q(&a, x.level())?;
        }
        Ok(a)
    }

    /// Teichmüller digit decomposition: `x = sum_i [x_i] p^i` with each
    /// `x_i` in the residue field. Returns exactly `m` digits.
    pub fn digits(&self, x: &GrElem) -> Result<Vec<FqElem>> {
        let mut out = Vec::with_capacity(x.m as usize);
        let mut cur = x.clone();
        loop {
            let d0 = self.residue(&cur)?;
            out.push(d0.clone());
            if cur.m == 1 {
                break;
            }
            let t = self.teichmuller(&d0, cur.m)?;
            let diff = self.sub(&cur, &t)?;
            cur = self.div_by_p_exact(&diff)?;
        }
        Ok(out)
    }

    /// Reassembles `sum_i [d_i] p^i` at precision `m`; missing digits are 0.
    /// Digit levels must divide `level`.
    pub fn from_digits(&self, level: u32, m: u32, digits: &[FqElem]) -> Result<GrElem> {
        let mut acc = self.zero(level, m)?;
        let mut p_pow = self.one(level, m)?;
        for (i, d) in digits.iter().enumerate() {
            if i as u32 >= m {
                break;
            }
            if !self.field.is_zero(d) {
                let d_up = self.field.embed(d, level)?;
                let t = self.teichmuller(&d_up, m)?;
                let term = self.mul(&t, &p_pow)?;
                acc = self.add(&acc, &term)?;
            }
            p_pow = self.scalar_mul(self.p, &p_pow)?;
        }
        Ok(acc)
    }

    /// Witt coordinates `(w_0, ..., w_{m-1})`: `w_i = x_i^{p^i}` in terms of
    /// the Teichmüller digits `x_i`.
    pub fn witt_coords(&self, x: &GrElem) -> Result<Vec<FqElem>> {
        let digits = self.digits(x)?;
        Ok(digits
            .iter()
            .enumerate()
            .map(|(i, d)| self.field.frobenius(d, i as i64))
            .collect())
    }

    /// Inverse of [`Self::witt_coords`].
    pub fn from_witt_coords(&self, level: u32, m: u32, w: &[FqElem]) -> Result<GrElem> {
        let digits: Vec<FqElem> = w
            .iter()
            .enumerate()
            .map(|(i, c)| self.field.frobenius(c, -(i as i64)))
            .collect();
        self.from_digits(level, m, &digits)
    }

    /// The Witt-vector Frobenius: acts on Teichmüller digits by the residue
    /// Frobenius, `sum [x_i] p^i -> sum [x_i^p] p^i`. `k` may be negative.
    pub fn sigma(&self, x: &GrElem, k: i64) -> Result<GrElem> {
        if k == 0 {
            return Ok(x.clone());
        }
        let digits = self.digits(x)?;
        let mapped: Vec<FqElem> = digits
            .iter()
            .map(|d| self.field.frobenius(d, k))
            .collect();
        self.from_digits(x.level, x.m, &mapped)
    }

    /// Digit-wise level embedding `W_m(F_{p^a}) -> W_m(F_{p^b})` for `a | b`.
    pub fn embed_level(&self, x: &GrElem, b: u32) -> Result<GrElem> {
        if x.level == b {
            return Ok(x.clone());
        }
        if !b.is_multiple_of(x.level) {
            return Err(Error::InvalidInput(format!(
                "cannot embed level {} into non-multiple level {b}",
                x.level
            )));
        }
        let digits = self.digits(x)?;
        let mut mapped = Vec::with_capacity(digits.len());
        for d in &digits {
            mapped.push(self.field.embed(d, b)?);
        }
        self.from_digits(b, x.m, &mapped)
    }

    /// For level-1 elements this ring is `Z/p^m`; expose the plain value so
    /// results can be checked against word-size integer arithmetic.
    pub fn zpm_value(&self, x: &GrElem) -> Option<u64> {
        if x.level == 1 {
            Some(x.coeffs[0])
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Dense polynomial arithmetic with coefficients mod `md` (u64, products via
// u128). Modulus polynomials must be monic.
// ---------------------------------------------------------------------------

fn zm_poly_mul(a: &[u64], b: &[u64], md: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            let prod = (ai as u128 * bj as u128) % md as u128;
            out[i + j] = ((out[i + j] as u128 + prod) % md as u128) as u64;
        }
    }
    out
}

fn zm_poly_rem(a: &[u64], m: &[u64], md: u64) -> Vec<u64> {
    debug_assert_eq!(*m.last().unwrap(), 1, "modulus must be monic");
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        if lead != 0 {
            for i in 0..dm {
                let sub = (lead as u128 * m[i] as u128) % md as u128;
                let cur = r[shift + i] as u128;
                r[shift + i] = ((cur + md as u128 - sub) % md as u128) as u64;
            }
        }
        r.pop();
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rings(p: u64) -> GaloisTower {
        GaloisTower::new(FieldTower::new(p, 11).unwrap())
    }

    #[test]
    fn z8_matches_integer_arithmetic() {
        let w = rings(2);
        // 3 * 3 = 9 = 1 mod 8.
        let three = w.constant(3, 3).unwrap();
        let nine = w.mul(&three, &three).unwrap();
        assert_eq!(w.zpm_value(&nine), Some(1));
        // Exhaustive add/mul table against u64 arithmetic.
        for a in 0..8u64 {
            for b in 0..8u64 {
                let ea = w.constant(a, 3).unwrap();
                let eb = w.constant(b, 3).unwrap();
                assert_eq!(w.zpm_value(&w.add(&ea, &eb).unwrap()), Some((a + b) % 8));
                assert_eq!(w.zpm_value(&w.mul(&ea, &eb).unwrap()), Some((a * b) % 8));
            }
        }
    }

    #[test]
    fn inverse_in_z_27() {
        let w = rings(3);
        for a in 0..27u64 {
            let e = w.constant(a, 3).unwrap();
            if a % 3 == 0 {
                assert!(w.inv(&e).is_err());
            } else {
                let inv = w.inv(&e).unwrap();
                let prod = w.mul(&e, &inv).unwrap();
                assert_eq!(w.zpm_value(&prod), Some(1));
            }
        }
    }

    #[test]
    fn teichmuller_is_the_fixed_cube_root() {
        // In W_2(F_4) the Teichmüller lift of a generator g is the unique
        // element with x^3 = 1 and x = g mod 2; check by scanning all 16
        // elements of (Z/4)[x]/(f_2).
        let w = rings(2);
        let g = w.field().generator(2).unwrap();
        let t = w.teichmuller(&g, 2).unwrap();
        let mut matches = Vec::new();
        for c0 in 0..4u64 {
            for c1 in 0..4u64 {
                let e = w.from_coeffs(2, 2, &[c0, c1]).unwrap();
                let cube = w.pow(&e, 3).unwrap();
                let residue_is_g = w.residue(&e).unwrap() == g;
                if w.eq(&cube, &w.one(2, 2).unwrap()).unwrap() && residue_is_g {
                    matches.push(e);
                }
            }
        }
        assert_eq!(matches, vec![t]);
    }

    #[test]
    fn teichmuller_is_multiplicative() {
        use rand::SeedableRng;
        let w = rings(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = w.field().random_element(2, &mut rng).unwrap();
            let b = w.field().random_element(2, &mut rng).unwrap();
            let ab = w.field().mul(&a, &b).unwrap();
            let lhs = w.mul(&w.teichmuller(&a, 4).unwrap(), &w.teichmuller(&b, 4).unwrap()).unwrap();
            let rhs = w.teichmuller(&ab, 4).unwrap();
            assert!(w.eq(&lhs, &rhs).unwrap());
        }
    }

    #[test]
    fn digit_decomposition_of_three() {
        // 3 = [1] + [1]*2 in Z/4: digits (1, 1).
        let w = rings(2);
        let three = w.constant(3, 2).unwrap();
        let d = w.digits(&three).unwrap();
        assert_eq!(d.len(), 2);
        assert!(w.field().is_one(&d[0]));
        assert!(w.field().is_one(&d[1]));
    }

    #[test]
    fn digits_round_trip() {
        use rand::{Rng, SeedableRng};
        let w = rings(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let coeffs: Vec<u64> = (0..3).map(|_| rng.gen_range(0..16)).collect();
            let x = w.from_coeffs(3, 4, &coeffs).unwrap();
            let d = w.digits(&x).unwrap();
            assert_eq!(d.len(), 4);
            let back = w.from_digits(3, 4, &d).unwrap();
            assert!(w.eq(&x, &back).unwrap());
        }
    }

    #[test]
    fn witt_coordinates_round_trip() {
        use rand::{Rng, SeedableRng};
        let w = rings(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let coeffs: Vec<u64> = (0..2).map(|_| rng.gen_range(0..27)).collect();
            let x = w.from_coeffs(2, 3, &coeffs).unwrap();
            let wc = w.witt_coords(&x).unwrap();
            let back = w.from_witt_coords(2, 3, &wc).unwrap();
            assert!(w.eq(&x, &back).unwrap());
        }
    }

    #[test]
    fn sigma_fixes_the_prime_subring_and_respects_products() {
        use rand::{Rng, SeedableRng};
        let w = rings(2);
        for a in 0..8u64 {
            let e = w.constant(a, 3).unwrap();
            assert!(w.eq(&w.sigma(&e, 1).unwrap(), &e).unwrap());
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..15 {
            let coeffs: Vec<u64> = (0..2).map(|_| rng.gen_range(0..8)).collect();
            let coeffs2: Vec<u64> = (0..2).map(|_| rng.gen_range(0..8)).collect();
            let x = w.from_coeffs(2, 3, &coeffs).unwrap();
            let y = w.from_coeffs(2, 3, &coeffs2).unwrap();
            let lhs = w.sigma(&w.mul(&x, &y).unwrap(), 1).unwrap();
            let rhs = w.mul(&w.sigma(&x, 1).unwrap(), &w.sigma(&y, 1).unwrap()).unwrap();
            assert!(w.eq(&lhs, &rhs).unwrap());
            // sigma^{-1} inverts sigma.
            let round = w.sigma(&w.sigma(&x, 1).unwrap(), -1).unwrap();
            assert!(w.eq(&round, &x).unwrap());
        }
    }

    #[test]
    fn mixed_precision_takes_the_minimum() {
        let w = rings(2);
        let a = w.constant(7, 4).unwrap();
        let b = w.constant(5, 2).unwrap();
        let prod = w.mul(&a, &b).unwrap();
        assert_eq!(prod.m(), 2);
        assert_eq!(w.zpm_value(&prod), Some(35 % 4));
    }

    #[test]
    fn level_embedding_is_a_ring_homomorphism() {
        use rand::{Rng, SeedableRng};
        let w = rings(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..15 {
            let ca: Vec<u64> = (0..2).map(|_| rng.gen_range(0..8)).collect();
            let cb: Vec<u64> = (0..2).map(|_| rng.gen_range(0..8)).collect();
            let a = w.from_coeffs(2, 3, &ca).unwrap();
            let b = w.from_coeffs(2, 3, &cb).unwrap();
            let ea = w.embed_level(&a, 4).unwrap();
            let eb = w.embed_level(&b, 4).unwrap();
            let sum = w.embed_level(&w.add(&a, &b).unwrap(), 4).unwrap();
            let prod = w.embed_level(&w.mul(&a, &b).unwrap(), 4).unwrap();
            assert!(w.eq(&sum, &w.add(&ea, &eb).unwrap()).unwrap());
            assert!(w.eq(&prod, &w.mul(&ea, &eb).unwrap()).unwrap());
            // Residues commute with the embedding.
            let r1 = w.field().embed(&w.residue(&a).unwrap(), 4).unwrap();
            let r2 = w.residue(&ea).unwrap();
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn valuation_and_exact_division() {
        let w = rings(2);
        let six = w.constant(6, 4).unwrap();
        assert_eq!(w.v_p(&six), Some(1));
        let three = w.div_by_p_exact(&six).unwrap();
        assert_eq!(w.zpm_value(&three), Some(3));
        assert_eq!(three.m(), 3);
        assert!(w.div_by_p_exact(&w.constant(5, 3).unwrap()).is_err());
        assert_eq!(w.v_p(&w.zero(1, 3).unwrap()), None);
    }
}
