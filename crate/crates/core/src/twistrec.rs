//! Twisted linear recurrences over truncated Witt rings.
//!
//! A twisted recurrence of order `k` over `W_m(F_{p^d})` is a relation
//!
//! ```text
//!     d_0 c_n + d_1 sigma(c_{n+1}) + ... + d_{k-1} sigma^{k-1}(c_{n+k-1})
//!                                        + sigma^k(c_{n+k}) = 0
//! ```
//!
//! required for every `n >= 0`, where `sigma` is the Witt Frobenius, the
//! top coefficient is fixed to 1 and `d_0` is a unit. Writing `F` for the
//! semilinear operator `z -> sigma(z)`, the relation is governed by the
//! operator polynomial `P(F) = F^k + d_{k-1} F^{k-1} + ... + d_0`: the
//! solution sequences are exactly the twisted combinations
//!
//! ```text
//!     c_n = sum_i sigma^{-n}(lambda_i) z_i,
//! ```
//!
//! where `z_1, ..., z_k` is a basis of the kernel of `P(F)` and the
//! `lambda_i` range over the ring. Because `d_0` is a unit the kernel is a
//! free module of rank `k` over the sigma-fixed subring `Z/p^m`.
//!
//! This module solves `P(F) = 0` by reducing to an additive polynomial over
//! the residue field and Hensel-lifting digit by digit, reconstructs the
//! minimal recurrence annihilating a prescribed set of solutions (Moore
//! determinants, computed division-free), combines two recurrences into one
//! annihilating sums or products of their solutions, splits a depth-`m`
//! recurrence into `m` residue recurrences on Witt-coordinate sequences and
//! recombines them, and provides the support-class and digit-periodicity
//! analysis used on the outputs of the series solvers.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exponent::Exp;
use crate::galois::{GaloisTower, GrElem};
use crate::gfield::{FieldTower, FqElem};

/// Largest degree `p^k` of an additive residue polynomial the solver will
/// factor; beyond this, root enumeration over the closure is impractical.
const MAX_ADDITIVE_DEGREE: u64 = 4096;

/// Largest number of monomial generators the relation-lifting step will
/// enumerate before giving up.
const MAX_LIFT_MONOMIALS: u64 = 5000;

/// Largest ring size for exhaustive kernel enumeration.
const MAX_ENUMERATION: u64 = 4096;

// ---------------------------------------------------------------------------
// The recurrence type and elementary operations on it.
// ---------------------------------------------------------------------------

/// A monic twisted recurrence, stored through its low coefficients
/// `d_0, ..., d_{k-1}`; the order-`k` coefficient is implicitly 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Recurrence {
    coeffs: Vec<GrElem>,
}

impl Recurrence {
    /// Builds the relation with low coefficients `d_0, ..., d_{k-1}` and an
    /// implicit monic top term. `d_0` must be a unit — otherwise the
    /// solution space is not free and none of the machinery here applies.
    pub fn new(w: &GaloisTower, coeffs: Vec<GrElem>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput(
                "a recurrence needs order at least 1".into(),
            ));
        }
        if !w.is_unit(&coeffs[0]) {
            return Err(Error::NotApplicable(
                "constant coefficient d_0 is not a unit".into(),
            ));
        }
        Ok(Recurrence { coeffs })
    }

    /// Builds from a full coefficient vector `d_0, ..., d_k` (low to high),
    /// dividing through by the leading coefficient, which must be a unit.
    pub fn from_full(w: &GaloisTower, full: &[GrElem]) -> Result<Self> {
        if full.len() < 2 {
            return Err(Error::InvalidInput(
                "a recurrence needs at least two coefficients".into(),
            ));
        }
        let lead = full.last().unwrap();
        if !w.is_unit(lead) {
            return Err(Error::NotApplicable(
                "leading coefficient is not a unit".into(),
            ));
        }
        let inv = w.inv(lead)?;
        let coeffs = full[..full.len() - 1]
            .iter()
            .map(|c| w.mul(c, &inv))
            .collect::<Result<Vec<_>>>()?;
        Recurrence::new(w, coeffs)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Low coefficients `d_0, ..., d_{k-1}`.
    pub fn coeffs(&self) -> &[GrElem] {
        &self.coeffs
    }

    /// Working digit depth: the smallest precision among the coefficients.
    pub fn depth(&self) -> u32 {
        self.coeffs.iter().map(|c| c.m()).min().unwrap_or(0)
    }

    /// Smallest field level containing every coefficient.
    pub fn level(&self) -> u32 {
        self.coeffs.iter().fold(1u32, |acc, c| acc.lcm(&c.level()))
    }

    /// The operator polynomial applied to a single element:
    /// `sigma^k(z) + sum_j d_j sigma^j(z)`.
    pub fn apply(&self, w: &GaloisTower, z: &GrElem) -> Result<GrElem> {
        let k = self.order();
        let mut acc = w.sigma(z, k as i64)?;
        for (j, d) in self.coeffs.iter().enumerate() {
            let t = w.mul(d, &w.sigma(z, j as i64)?)?;
            acc = w.add(&acc, &t)?;
        }
        Ok(acc)
    }
}

/// Applies `sigma^j` to every coefficient. If `(c_n)` satisfies `r` then
/// `(sigma^j(c_n))` satisfies the twisted relation, and conversely.
pub fn twist(w: &GaloisTower, r: &Recurrence, j: i64) -> Result<Recurrence> {
    let coeffs = r
        .coeffs
        .iter()
        .map(|d| w.sigma(d, j))
        .collect::<Result<Vec<_>>>()?;
    Recurrence::new(w, coeffs)
}

/// Truncates every coefficient to digit depth `m`. Solutions of the
/// original relation still satisfy the truncation after reduction.
pub fn truncate_depth(w: &GaloisTower, r: &Recurrence, m: u32) -> Result<Recurrence> {
    let coeffs = r
        .coeffs
        .iter()
        .map(|d| w.truncate(d, m))
        .collect::<Result<Vec<_>>>()?;
    Recurrence::new(w, coeffs)
}

/// Verifies the relation on a window of a sequence. The window must contain
/// at least one full relation instance, i.e. more than `order` terms.
pub fn check_recurrence(w: &GaloisTower, seq: &[GrElem], r: &Recurrence) -> Result<bool> {
    let k = r.order();
    if seq.len() <= k {
        return Err(Error::InvalidInput(format!(
            "need at least {} terms to check an order-{k} recurrence",
            k + 1
        )));
    }
    for n in 0..seq.len() - k {
        let mut acc = w.sigma(&seq[n + k], k as i64)?;
        for (j, d) in r.coeffs.iter().enumerate() {
            let t = w.mul(d, &w.sigma(&seq[n + j], j as i64)?)?;
            acc = w.add(&acc, &t)?;
        }
        if !w.is_zero(&acc) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The twisted combination `c_n = sum_i sigma^{-n}(lambda_i) z_i` — the
/// general solution form — evaluated for `n = 0, ..., len-1`.
pub fn solution_sequence(
    w: &GaloisTower,
    basis: &[GrElem],
    lambdas: &[GrElem],
    len: usize,
) -> Result<Vec<GrElem>> {
    if basis.is_empty() || basis.len() != lambdas.len() {
        return Err(Error::InvalidInput(
            "need one coefficient per basis element".into(),
        ));
    }
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let mut acc: Option<GrElem> = None;
        for (z, l) in basis.iter().zip(lambdas) {
            let t = w.mul(&w.sigma(l, -(n as i64))?, z)?;
            acc = Some(match acc {
                None => t,
                Some(a) => w.add(&a, &t)?,
            });
        }
        out.push(acc.unwrap());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Solving: kernel of the operator polynomial.
// ---------------------------------------------------------------------------

/// A `Z/p^m`-basis of the kernel of the operator polynomial of a
/// recurrence. Every solution sequence of the recurrence has the form
/// `c_n = sum_i sigma^{-n}(lambda_i) basis[i]`.
#[derive(Clone, Debug)]
pub struct SolutionBasis {
    pub basis: Vec<GrElem>,
    /// Field level the basis elements live at.
    pub level: u32,
    /// Digit depth of the basis elements.
    pub m: u32,
}

fn checked_pow_u64(p: u64, e: u32) -> Result<u64> {
    let mut out = 1u64;
    for _ in 0..e {
        out = out
            .checked_mul(p)
            .ok_or_else(|| Error::InvalidInput(format!("{p}^{e} exceeds the word size")))?;
    }
    Ok(out)
}

/// Dense low-degree-first coefficient vector of the additive polynomial
/// `s^{p^k} + sum_j dbar[j] s^{p^j}` plus an optional constant term.
fn additive_poly(
    field: &FieldTower,
    p: u64,
    k: u32,
    dbar: &[FqElem],
    constant: Option<&FqElem>,
) -> Result<Vec<FqElem>> {
    let deg = checked_pow_u64(p, k)?;
    if deg > MAX_ADDITIVE_DEGREE {
        return Err(Error::InvalidInput(format!(
            "additive residue polynomial has degree {deg}, refusing beyond {MAX_ADDITIVE_DEGREE}"
        )));
    }
    let deg = deg as usize;
    let mut poly = vec![field.zero(1)?; deg + 1];
    poly[deg] = field.one(1)?;
    for (j, d) in dbar.iter().enumerate() {
        let pos = checked_pow_u64(p, j as u32)? as usize;
        poly[pos] = d.clone();
    }
    if let Some(c) = constant {
        poly[0] = field.add(&poly[0], c)?;
    }
    Ok(poly)
}

/// Embeds all roots into a common level and returns them sorted by the
/// lexicographic key, for deterministic downstream choices.
fn sorted_roots(field: &FieldTower, roots: &[(FqElem, usize)]) -> Result<Vec<FqElem>> {
    let lvl = roots.iter().fold(1u32, |acc, (r, _)| acc.lcm(&r.level()));
    let mut out = Vec::new();
    for (r, mult) in roots {
        let e = field.embed(r, lvl)?;
        for _ in 0..*mult {
            out.push(e.clone());
        }
    }
    out.sort_by(|a, b| a.lex_key().cmp(&b.lex_key()));
    Ok(out)
}

/// Solves the kernel of the operator polynomial of `r` inside the depth of
/// its coefficients, enlarging the residue field as needed.
///
/// Reduction: modulo `p` the equation `P(F)(z) = 0` becomes the additive
/// polynomial `A(s) = s^{p^k} + sum_j dbar_j s^{p^j}` over the residue
/// field, which is separable because `dbar_0 = A'(s)` is a nonzero
/// constant; its root set is an `F_p`-vector space of dimension `k`. Each
/// residue basis vector then lifts digit by digit: a defect divisible by
/// exactly `p^v` is removed by adding `[u] p^v` where `A(u)` cancels the
/// defect's residue, which never disturbs the digits below `v`.
pub fn solve_semilinear(w: &GaloisTower, r: &Recurrence) -> Result<SolutionBasis> {
    let field = w.field();
    let p = w.p();
    let k = r.order() as u32;
    let m = r.depth();
    let deg = checked_pow_u64(p, k)?;
    if deg > MAX_ADDITIVE_DEGREE {
        return Err(Error::InvalidInput(format!(
            "order {k} over p = {p} needs degree {deg} root finding; beyond supported range"
        )));
    }
    let dbar = r
        .coeffs
        .iter()
        .map(|d| w.residue(d))
        .collect::<Result<Vec<_>>>()?;

    let poly = additive_poly(field, p, k, &dbar, None)?;
    let roots = field.poly_roots(&poly)?;
    let total: usize = roots.iter().map(|(_, mult)| mult).sum();
    if total as u64 != deg || roots.iter().any(|(_, mult)| *mult != 1) {
        return Err(Error::Internal(
            "additive residue polynomial with unit constant slope is not separable".into(),
        ));
    }
    let candidates = sorted_roots(field, &roots)?;

    // Greedy scan for an F_p-basis of the root space, in lexicographic
    // order so the basis is deterministic.
    let lvl = candidates
        .first()
        .map(|c| c.level())
        .unwrap_or(1)
        .lcm(&r.level());
    let mut basis_res: Vec<FqElem> = Vec::new();
    let mut span: Vec<FqElem> = vec![field.zero(lvl)?];
    for cand in &candidates {
        let cand = field.embed(cand, lvl)?;
        let mut in_span = false;
        for s in &span {
            if field.eq(s, &cand)? {
                in_span = true;
                break;
            }
        }
        if in_span {
            continue;
        }
        let mut next = span.clone();
        for c in 1..p {
            let scaled = field.mul(&field.constant(c), &cand)?;
            for s in &span {
                next.push(field.add(s, &scaled)?);
            }
        }
        span = next;
        basis_res.push(cand);
        if basis_res.len() as u32 == k {
            break;
        }
    }
    if basis_res.len() as u32 != k {
        return Err(Error::Internal(
            "additive root space has rank below the recurrence order".into(),
        ));
    }

    // Digit-by-digit lift of each residue basis vector.
    let mut basis = Vec::with_capacity(basis_res.len());
    for zr in &basis_res {
        let mut z = w.teichmuller(zr, m)?;
        loop {
            let defect = r.apply(w, &z)?;
            let Some(v) = w.v_p(&defect) else { break };
            if v >= m {
                break;
            }
            let mut unit_part = defect.clone();
            for _ in 0..v {
                unit_part = w.div_by_p_exact(&unit_part)?;
            }
            let cbar = w.residue(&unit_part)?;
            // A root u of A(s) + cbar kills the current defect digit.
            let correction_poly = additive_poly(field, p, k, &dbar, Some(&cbar))?;
            let correction_roots = field.poly_roots(&correction_poly)?;
            if correction_roots.is_empty() {
                return Err(Error::Internal(
                    "additive polynomial misses a value over the closure".into(),
                ));
            }
            let u = sorted_roots(field, &correction_roots)?.remove(0);
            let mut corr = w.teichmuller(&u, m)?;
            corr = w.scalar_mul(checked_pow_u64(p, v)?, &corr)?;
            z = w.add(&z, &corr)?;
            let new_defect = r.apply(w, &z)?;
            if let Some(v2) = w.v_p(&new_defect) {
                if v2 <= v {
                    return Err(Error::Internal(
                        "digit correction failed to increase the defect valuation".into(),
                    ));
                }
            }
        }
        if !w.is_zero(&r.apply(w, &z)?) {
            return Err(Error::Internal(
                "lifted kernel vector does not satisfy the relation exactly".into(),
            ));
        }
        basis.push(z);
    }

    let level = basis.iter().fold(1u32, |acc, z| acc.lcm(&z.level()));
    let basis = basis
        .iter()
        .map(|z| w.embed_level(z, level))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionBasis { basis, level, m })
}

/// Exhaustively enumerates the kernel of the operator polynomial inside
/// `W_m(F_{p^level})`. Only for small rings (`(p^m)^level <= 4096`); used
/// as an independent certificate that a solved basis spans everything.
pub fn enumerate_solutions(w: &GaloisTower, r: &Recurrence, level: u32) -> Result<Vec<GrElem>> {
    if level == 0 {
        return Err(Error::InvalidInput("field level must be at least 1".into()));
    }
    let m = r.depth();
    let pm = checked_pow_u64(w.p(), m)?;
    let mut size = 1u64;
    for _ in 0..level {
        size = size
            .checked_mul(pm)
            .ok_or_else(|| Error::InvalidInput("enumeration ring overflows".into()))?;
        if size > MAX_ENUMERATION {
            return Err(Error::InvalidInput(format!(
                "ring of size {pm}^{level} too large to enumerate (cap {MAX_ENUMERATION})"
            )));
        }
    }
    let d = level as usize;
    let mut out = Vec::new();
    let mut coords = vec![0u64; d];
    loop {
        let z = w.from_coeffs(level, m, &coords)?;
        if w.is_zero(&r.apply(w, &z)?) {
            out.push(z);
        }
        let mut i = 0;
        loop {
            if i == d {
                return Ok(out);
            }
            coords[i] += 1;
            if coords[i] < pm {
                break;
            }
            coords[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Reconstruction: from solutions back to a recurrence.
// ---------------------------------------------------------------------------

/// Division-free determinant (Bird's algorithm). Needed because truncated
/// Witt rings have zero divisors, so elimination-based determinants do not
/// apply; this variant uses only ring additions and multiplications.
fn bird_det(w: &GaloisTower, a: &[Vec<GrElem>]) -> Result<GrElem> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(Error::Internal("determinant of a non-square matrix".into()));
    }
    if n == 1 {
        return Ok(a[0][0].clone());
    }
    let zero = w.sub(&a[0][0], &a[0][0])?;
    let mut f = a.to_vec();
    for _ in 1..n {
        // mu(f): keep the strict upper triangle, zero the lower one, and
        // put -(sum of the diagonal below position i) at (i, i).
        let mut mu = vec![vec![zero.clone(); n]; n];
        let mut suffix = zero.clone();
        for i in (0..n).rev() {
            mu[i][i] = w.neg(&suffix)?;
            suffix = w.add(&suffix, &f[i][i])?;
        }
        for (i, row) in f.iter().enumerate() {
            mu[i][i + 1..n].clone_from_slice(&row[i + 1..n]);
        }
        let mut nf = vec![vec![zero.clone(); n]; n];
        for i in 0..n {
            for (l, arow) in a.iter().enumerate() {
                if w.is_zero(&mu[i][l]) {
                    continue;
                }
                for j in 0..n {
                    let t = w.mul(&mu[i][l], &arow[j])?;
                    nf[i][j] = w.add(&nf[i][j], &t)?;
                }
            }
        }
        f = nf;
    }
    if (n - 1) % 2 == 1 {
        w.neg(&f[0][0])
    } else {
        Ok(f[0][0].clone())
    }
}

/// Builds the minimal monic recurrence annihilating every twisted
/// combination of the given kernel vectors.
///
/// The coefficients are signed maximal minors of the Moore-style matrix
/// with rows `(z_i, sigma(z_i), ..., sigma^k(z_i))`: appending any `z_i` as
/// an extra row makes the matrix singular, and Laplace expansion along that
/// row yields the relation. The full Moore determinant (the coefficient of
/// the top term) must be a unit; otherwise the family is dependent.
pub fn recurrence_from_solutions(w: &GaloisTower, sols: &[GrElem]) -> Result<Recurrence> {
    if sols.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build a recurrence from no solutions".into(),
        ));
    }
    let k = sols.len();
    let m = sols.iter().map(|z| z.m()).min().unwrap();
    let lvl = sols.iter().fold(1u32, |acc, z| acc.lcm(&z.level()));
    let zs = sols
        .iter()
        .map(|z| w.embed_level(&w.truncate(z, m)?, lvl))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(k);
    for z in &zs {
        let mut row = Vec::with_capacity(k + 1);
        for j in 0..=k {
            row.push(w.sigma(z, j as i64)?);
        }
        rows.push(row);
    }

    // Signed cofactors D_j = (-1)^{k+j} det(matrix without column j), so
    // that sum_j D_j sigma^j(z_i) = 0 for every i.
    let mut signed = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let sub: Vec<Vec<GrElem>> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != j)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect();
        let minor = bird_det(w, &sub)?;
        signed.push(if (k + j) % 2 == 1 { w.neg(&minor)? } else { minor });
    }

    let delta = &signed[k];
    if !w.is_unit(delta) {
        return Err(Error::DependentSolutions);
    }
    // Structural identity of the Moore matrix: removing the first column
    // is the same as applying sigma after removing the last, up to sign.
    let mut expected_d0 = w.sigma(delta, 1)?;
    if k % 2 == 1 {
        expected_d0 = w.neg(&expected_d0)?;
    }
    if !w.eq(&signed[0], &expected_d0)? {
        return Err(Error::Internal(
            "cofactor identity d_0 = (-1)^k sigma(d_k) violated".into(),
        ));
    }

    let dinv = w.inv(delta)?;
    let coeffs = signed[..k]
        .iter()
        .map(|d| w.mul(d, &dinv))
        .collect::<Result<Vec<_>>>()?;
    let rec = Recurrence::new(w, coeffs)?;
    for z in &zs {
        if !w.is_zero(&rec.apply(w, z)?) {
            return Err(Error::Internal(
                "reconstructed recurrence fails to annihilate an input".into(),
            ));
        }
    }
    Ok(rec)
}

// ---------------------------------------------------------------------------
// Saturation: pruning a generating set to an independent one.
// ---------------------------------------------------------------------------

fn mod_inv_u64(a: u64, md: u64) -> Option<u64> {
    let (mut r0, mut r1) = (md as i128, (a % md) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(s0.rem_euclid(md as i128) as u64)
}

/// Reduces a generating family to an independent one whose `Z/p^m`-span
/// contains the span of the input (it may be strictly larger: non-unit
/// content is divided out so that pivots stay units). Deterministic:
/// candidates are processed in order and pivots are chosen left to right.
pub fn saturate_prune(w: &GaloisTower, cands: &[GrElem]) -> Result<Vec<GrElem>> {
    if cands.is_empty() {
        return Ok(Vec::new());
    }
    let p = w.p();
    let m = cands.iter().map(|z| z.m()).min().unwrap();
    let lvl = cands.iter().fold(1u32, |acc, z| acc.lcm(&z.level()));
    let md = checked_pow_u64(p, m)?;

    // Echelon rows keyed by pivot column; every pivot entry is 1.
    let mut rows: Vec<(usize, Vec<u64>)> = Vec::new();
    for cand in cands {
        let z = w.embed_level(&w.truncate(cand, m)?, lvl)?;
        let mut v: Vec<u64> = z.coeffs().to_vec();
        'reduce: loop {
            for (pc, rv) in &rows {
                let factor = v[*pc] % md;
                if factor != 0 {
                    for (vi, ri) in v.iter_mut().zip(rv) {
                        let sub = (factor as u128 * *ri as u128) % md as u128;
                        *vi = ((*vi as u128 + md as u128 - sub) % md as u128) as u64;
                    }
                }
            }
            if v.iter().all(|&c| c == 0) {
                break 'reduce;
            }
            if v.iter().all(|&c| c % p == 0) {
                // Dividing out p only grows the span: v = p * (v / p).
                for c in v.iter_mut() {
                    *c /= p;
                }
                continue 'reduce;
            }
            let pivot = v.iter().position(|&c| c % p != 0).unwrap();
            let inv = mod_inv_u64(v[pivot], md)
                .ok_or_else(|| Error::Internal("unit pivot has no inverse".into()))?;
            for c in v.iter_mut() {
                *c = ((*c as u128 * inv as u128) % md as u128) as u64;
            }
            rows.push((pivot, v.clone()));
            break 'reduce;
        }
    }

    rows.iter()
        .map(|(_, v)| w.from_coeffs(lvl, m, v))
        .collect()
}

// ---------------------------------------------------------------------------
// Combination: recurrences for sums and products of solutions.
// ---------------------------------------------------------------------------

/// A recurrence annihilating every sum `(a_n + b_n)` of a solution of `r1`
/// and a solution of `r2` (and in fact the whole twisted span of both
/// kernels together).
pub fn combine_sum(w: &GaloisTower, r1: &Recurrence, r2: &Recurrence) -> Result<Recurrence> {
    let b1 = solve_semilinear(w, r1)?;
    let b2 = solve_semilinear(w, r2)?;
    let mut cands = b1.basis;
    cands.extend(b2.basis);
    let pruned = saturate_prune(w, &cands)?;
    recurrence_from_solutions(w, &pruned)
}

/// A recurrence annihilating every product `(a_n * b_n)` of solutions of
/// `r1` and `r2`. Products of twisted combinations expand over the
/// pairwise products of kernel vectors, so those generate enough.
pub fn combine_product(w: &GaloisTower, r1: &Recurrence, r2: &Recurrence) -> Result<Recurrence> {
    let b1 = solve_semilinear(w, r1)?;
    let b2 = solve_semilinear(w, r2)?;
    let mut cands = Vec::with_capacity(b1.basis.len() * b2.basis.len());
    for x in &b1.basis {
        for y in &b2.basis {
            cands.push(w.mul(x, y)?);
        }
    }
    let pruned = saturate_prune(w, &cands)?;
    recurrence_from_solutions(w, &pruned)
}

// ---------------------------------------------------------------------------
// Digit splitting: depth-m relations versus m depth-1 relations.
// ---------------------------------------------------------------------------

/// Multinomial coefficient `n! / (e_1! ... e_r!)` reduced mod `md`.
fn multinomial_mod(n: u64, parts: &[u64], md: u64) -> u64 {
    let mut acc = BigUint::one();
    let mut rest = n;
    for &e in parts {
        // Running product of binomial(rest, e).
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        for i in 0..e {
            num *= BigUint::from(rest - i);
            den *= BigUint::from(i + 1);
        }
        acc *= num / den;
        rest -= e;
    }
    (acc % BigUint::from(md)).to_u64().unwrap_or(0)
}

/// All vectors of `parts` nonnegative integers summing to `total`.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn rec(total: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

fn compositions_count(total: u64, parts: usize) -> u64 {
    // binomial(total + parts - 1, parts - 1), saturating.
    let mut acc = BigUint::one();
    for i in 0..(parts as u64).saturating_sub(1) {
        acc *= BigUint::from(total + i + 1);
        acc /= BigUint::from(i + 1);
    }
    acc.to_u64().unwrap_or(u64::MAX)
}

/// Given a depth-1 relation satisfied by residue sequences `(x_n)`, returns
/// a depth-`m` relation satisfied by the multiplicative lifts `([x_n])`.
///
/// Any lift `t` of `sigma^{-m}(x)` satisfies `t^{p^m} = [x]`, so writing
/// the residue solutions as twisted combinations of a kernel basis and
/// raising to the `p^m`-th power expands `[x_n]` over the monomials
/// `multinomial(p^m; e) * prod_i y_i^{e_i}` with `y_i` lifting
/// `sigma^{-m}(z_i)`; the lifted relation is the annihilator of those.
pub fn lift_relation(w: &GaloisTower, r: &Recurrence, m: u32) -> Result<Recurrence> {
    if r.depth() != 1 {
        return Err(Error::InvalidInput(
            "relation lifting starts from digit depth 1".into(),
        ));
    }
    if m == 0 {
        return Err(Error::InvalidInput("target depth must be at least 1".into()));
    }
    let base = solve_semilinear(w, r)?;
    let k = base.basis.len();
    let pm = checked_pow_u64(w.p(), m)?;
    let count = compositions_count(pm, k);
    if count > MAX_LIFT_MONOMIALS {
        return Err(Error::InvalidInput(format!(
            "lifting needs {count} monomials, beyond the supported {MAX_LIFT_MONOMIALS}"
        )));
    }

    let mut ys = Vec::with_capacity(k);
    for z in &base.basis {
        let zr = w.residue(z)?;
        let shifted = w.field().frobenius(&zr, -(m as i64));
        ys.push(w.teichmuller(&shifted, m)?);
    }

    let mut cands = Vec::new();
    for e in compositions(pm, k) {
        let coef = multinomial_mod(pm, &e, pm);
        if coef == 0 {
            continue;
        }
        let mut y = w.one(base.level, m)?;
        for (yi, &ei) in ys.iter().zip(&e) {
            if ei > 0 {
                y = w.mul(&y, &w.pow(yi, ei)?)?;
            }
        }
        let t = w.scalar_mul(coef, &y)?;
        if !w.is_zero(&t) {
            cands.push(t);
        }
    }
    let pruned = saturate_prune(w, &cands)?;
    recurrence_from_solutions(w, &pruned)
}

/// Splits a depth-`m` relation into `m` depth-1 relations on the Witt
/// coordinate sequences of its solutions: if `(c_n)` satisfies `r` and
/// `w_{n,i}` is the `i`-th Witt coordinate of `c_n`, then `(w_{n,i})_n`
/// satisfies the `i`-th returned relation.
pub fn to_components(w: &GaloisTower, r: &Recurrence) -> Result<Vec<Recurrence>> {
    let m = r.depth();
    let comp0 = truncate_depth(w, r, 1)?;
    if m == 1 {
        return Ok(vec![comp0]);
    }
    // c_n minus the lift of its first digit is divisible by p; both terms
    // satisfy known relations, so the quotient satisfies the combined
    // relation one digit lower. Its coordinates are the higher coordinates
    // of c_n shifted once through sigma, whence the twist when reindexing.
    let lifted = lift_relation(w, &comp0, m)?;
    let sum = combine_sum(w, r, &lifted)?;
    let reduced = truncate_depth(w, &sum, m - 1)?;
    let sub = to_components(w, &reduced)?;
    let mut out = vec![comp0];
    for c in sub {
        out.push(twist(w, &c, 1)?);
    }
    Ok(out)
}

/// Reassembles a depth-`m` relation from `m` depth-1 coordinate relations:
/// every sequence whose `i`-th Witt coordinate sequence satisfies
/// `comps[i]` for all `i` satisfies the result. Composed with
/// [`to_components`] this gives containment of solution sets, not equality:
/// the reassembled relation may annihilate more.
pub fn from_components(w: &GaloisTower, comps: &[Recurrence]) -> Result<Recurrence> {
    if comps.is_empty() {
        return Err(Error::InvalidInput("no component relations given".into()));
    }
    let m = comps.len() as u32;
    let mut acc: Option<Recurrence> = None;
    for (i, comp) in comps.iter().enumerate() {
        if comp.depth() != 1 {
            return Err(Error::InvalidInput(
                "component relations must have digit depth 1".into(),
            ));
        }
        // Coordinate w_i relates to the Teichmüller digit x_i through
        // sigma^i, and p^i [x_{n,i}] satisfies whatever [x_{n,i}] does.
        let digit_rel = twist(w, comp, -(i as i64))?;
        let lifted = lift_relation(w, &digit_rel, m)?;
        acc = Some(match acc {
            None => lifted,
            Some(a) => combine_sum(w, &a, &lifted)?,
        });
    }
    Ok(acc.unwrap())
}

// ---------------------------------------------------------------------------
// Support classes.
// ---------------------------------------------------------------------------

/// Parameters of a support class: the set of rationals
/// `(n - b_1/p - b_2/p^2 - ...) / a` where `n` ranges over nonnegative
/// integers, the base-p digits `b_i` are eventually zero, and their sum is
/// at most `b`. Larger `b` gives a larger class; `a` rescales denominators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SabParams {
    pub a: u64,
    pub b: u64,
}

fn base_p_digit_sum(p: u64, frac: &num_rational::BigRational) -> Option<u64> {
    let pbig = BigInt::from(p);
    let mut den = frac.denom().clone();
    while den > BigInt::one() {
        if (&den % &pbig) != BigInt::zero() {
            return None;
        }
        den /= &pbig;
    }
    let mut n = frac.numer().clone();
    let mut sum = 0u64;
    while n > BigInt::zero() {
        sum += (&n % &pbig).to_u64().unwrap_or(0);
        n /= &pbig;
    }
    Some(sum)
}

/// Whether the exponent `q` lies in the class with the given parameters.
pub fn sab_contains(p: u64, params: &SabParams, q: &Exp) -> bool {
    if params.a == 0 {
        return false;
    }
    let r = q.scale(params.a as i64);
    // r = n - f with n a nonnegative integer and f in [0, 1) a terminating
    // base-p fraction of digit sum <= b; so n = ceil(r) and f = n - r.
    let n = r.ceil_int();
    if n.is_negative() {
        return false;
    }
    let frac = num_rational::BigRational::from_integer(n) - r.rational();
    match base_p_digit_sum(p, &frac) {
        Some(sum) => sum <= params.b,
        None => false,
    }
}

/// The lexicographically least `(a, b)` within the caps whose class
/// contains every exponent of `support`, if any. Membership is monotone in
/// `b`, so for each `a` the least workable `b` is found by the inner scan.
pub fn sab_fit(p: u64, support: &[Exp], a_max: u64, b_max: u64) -> Option<SabParams> {
    for a in 1..=a_max {
        for b in 0..=b_max {
            let params = SabParams { a, b };
            if support.iter().all(|q| sab_contains(p, &params, q)) {
                return Some(params);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Digit periodicity along sliding windows of a support.
// ---------------------------------------------------------------------------

/// Verdict for the digit sequence read along one sliding window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WindowVerdict {
    /// `c_{n + period} = c_n` for every sampled index `n >= start`
    /// (indices count from the beginning of the window).
    Periodic { start: u64, period: u64 },
    /// No `(start, period)` within the caps fits the sampled digits.
    AperiodicWithinPrecision,
}

/// One sliding digit window found in a support: the exponent family
/// `head - T * p^{-n}` for `n = 0, 1, ...`, where `T` in `[1/p, 1)` is the
/// value of the digit pattern. An empty pattern marks a vacuous window: an
/// exact support point with no sliding tail under the requested head size.
#[derive(Clone, Debug)]
pub struct WindowReport {
    /// Accumulation exponent the window's members approach.
    pub head: Exp,
    /// Head digits fixed by the split (the first `j - 1` base-p digits).
    pub head_digits: Vec<u64>,
    /// Sliding digit pattern, most significant first; empty when vacuous.
    pub pattern: Vec<u64>,
    /// Digits read along the window, one per slide index starting at 0.
    pub samples: u64,
    pub verdict: WindowVerdict,
}

/// Base-p digits `b_1, b_2, ...` of a terminating fraction in `[0, 1)`,
/// most significant first, or `None` for non-terminating denominators.
fn base_p_digits(p: u64, frac: &num_rational::BigRational) -> Option<Vec<u64>> {
    let pbig = BigInt::from(p);
    let mut e = 0usize;
    let mut den = frac.denom().clone();
    while den > BigInt::one() {
        if (&den % &pbig) != BigInt::zero() {
            return None;
        }
        den /= &pbig;
        e += 1;
    }
    let mut digits = vec![0u64; e];
    let mut n = frac.numer().clone();
    for i in (0..e).rev() {
        digits[i] = (&n % &pbig).to_u64().unwrap_or(0);
        n /= &pbig;
    }
    Some(digits)
}

/// The exponent `p^{-e}` as an exact rational.
fn p_shift(p: u64, e: usize) -> num_rational::BigRational {
    num_rational::BigRational::new(BigInt::one(), num_traits::pow(BigInt::from(p), e))
}

/// Finds the sliding digit windows of a digit expansion and tests each
/// extracted digit sequence for eventual periodicity.
///
/// Every support exponent `q` splits as `ceil(q)` minus a terminating
/// base-p fraction. The first `j - 1` fractional digits are frozen into
/// the window head; the remaining digits, shifted so their leading digit
/// sits right below the head, form the window's sliding pattern `T`. Two
/// support points that share head and pattern are the same window at
/// different slide depths, and the digit sequence read along
/// `head - T * p^{-n}` is tested for `c_{n+N} = c_n` (all `n >= M`) with
/// the least period `N` first, then the least start `M`. Digits at window
/// exponents below the precision but absent from the support count as
/// zero; sampling never crosses the precision bound, so every verdict is
/// a statement about the visible digits only.
pub fn digit_periodicity(
    field: &FieldTower,
    terms: &[(Exp, FqElem)],
    prec: &Exp,
    j: usize,
    cap_start: u64,
    cap_period: u64,
) -> Result<Vec<WindowReport>> {
    if j == 0 {
        return Err(Error::InvalidInput("head size j must be at least 1".into()));
    }
    if cap_period == 0 {
        return Err(Error::InvalidInput("period cap must be at least 1".into()));
    }
    let p = field.p();

    // Group support points into windows.
    type Key = (Exp, Vec<u64>, Vec<u64>);
    let mut windows: std::collections::BTreeMap<Key, Vec<(u64, FqElem)>> =
        std::collections::BTreeMap::new();
    for (q, digit) in terms {
        if q >= prec {
            continue;
        }
        let ceil = q.ceil_int();
        let frac = num_rational::BigRational::from_integer(ceil.clone()) - q.rational();
        let Some(digits) = base_p_digits(p, &frac) else {
            // Not a terminating base-p offset: report as its own vacuous
            // window so the point is still visible in the analysis.
            let key = (q.clone(), Vec::new(), Vec::new());
            windows.entry(key).or_default();
            continue;
        };
        let head_len = (j - 1).min(digits.len());
        let head_digits: Vec<u64> = digits[..head_len].to_vec();
        let tail = &digits[head_len..];
        let first_nonzero = tail.iter().position(|&b| b != 0);
        let mut head_rat = num_rational::BigRational::from_integer(ceil);
        for (i, &b) in head_digits.iter().enumerate() {
            head_rat -= num_rational::BigRational::from_integer(BigInt::from(b)) * p_shift(p, i + 1);
        }
        let head_exp = Exp::from_rational(head_rat);
        match first_nonzero {
            None => {
                // Exact point: no sliding tail below the head.
                let key = (head_exp, head_digits, Vec::new());
                windows.entry(key).or_default();
            }
            Some(f) => {
                let pattern: Vec<u64> = tail[f..].to_vec();
                // Slide index: how far below the head the pattern sits.
                // The leading pattern digit occupies fractional position
                // head_len + f + 1, i.e. slide index head_len + f.
                let slide = (head_len + f) as u64;
                let key = (head_exp, head_digits, pattern);
                windows.entry(key).or_default().push((slide, digit.clone()));
            }
        }
    }

    let zero_digit = field.zero(1)?;
    let mut reports = Vec::new();
    for ((head, head_digits, pattern), members) in windows {
        if pattern.is_empty() {
            reports.push(WindowReport {
                head,
                head_digits,
                pattern,
                samples: 0,
                verdict: WindowVerdict::Periodic { start: 0, period: 1 },
            });
            continue;
        }
        // Pattern value T = sum pattern[i] p^{-(i+1)}, in [1/p, 1).
        let mut tval = num_rational::BigRational::zero();
        for (i, &b) in pattern.iter().enumerate() {
            tval += num_rational::BigRational::from_integer(BigInt::from(b)) * p_shift(p, i + 1);
        }
        let last_nonzero = members.iter().map(|(s, _)| *s).max().unwrap_or(0);
        let horizon = last_nonzero + cap_period;

        let mut samples: Vec<FqElem> = Vec::new();
        for n in 0..=horizon {
            let offset = Exp::from_rational(&tval * p_shift(p, n as usize));
            let qn = &head - &offset;
            if &qn >= prec {
                break;
            }
            let digit = members
                .iter()
                .find(|(s, _)| *s == n)
                .map(|(_, d)| d.clone())
                .unwrap_or_else(|| zero_digit.clone());
            samples.push(digit);
        }

        let verdict = least_periodicity(field, &samples, cap_start, cap_period)?;
        reports.push(WindowReport {
            head,
            head_digits,
            pattern,
            samples: samples.len() as u64,
            verdict,
        });
    }
    Ok(reports)
}

/// Least `(period, start)` (period-major) such that `c_{n+period} = c_n`
/// for all sampled `n >= start`. A claim needs evidence: at least one
/// comparison must actually be made, so starts past the data never match.
/// Windows with fewer than two samples are degenerate and count as
/// periodic from the beginning.
fn least_periodicity(
    field: &FieldTower,
    samples: &[FqElem],
    cap_start: u64,
    cap_period: u64,
) -> Result<WindowVerdict> {
    let len = samples.len();
    if len <= 1 {
        return Ok(WindowVerdict::Periodic { start: 0, period: 1 });
    }
    for period in 1..=cap_period {
        let np = period as usize;
        for start in 0..=cap_start {
            let ns = start as usize;
            if ns + np >= len {
                break;
            }
            let mut ok = true;
            for n in ns..len - np {
                if !field.eq(&samples[n], &samples[n + np])? {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(WindowVerdict::Periodic { start, period });
            }
        }
    }
    Ok(WindowVerdict::AperiodicWithinPrecision)
}
