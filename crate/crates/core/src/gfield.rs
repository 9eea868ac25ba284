//! A monotone tower of finite fields `F_{p^d}`.
//!
//! Each level `d` is realised as `F_p[x]/(f_d)` for a deterministic defining
//! polynomial `f_d`: the lexicographically least monic irreducible of degree
//! `d`, comparing coefficient tuples `(c_0, ..., c_{d-1})` with `c_0` most
//! significant. Elements carry their level and their coordinate vector over
//! `F_p`. Levels and embeddings are created on demand and never removed, so
//! growth is monotone and references to existing elements stay valid.
//!
//! Embeddings between levels `a | b` are cached images of the level-`a`
//! generator. A new embedding is composed through the largest already
//! materialised intermediate level when one exists; otherwise it picks the
//! lexicographically least root of `f_a` in level `b` compatible with every
//! embedding already cached below and above it. This keeps the whole system
//! commuting: `embed(a,c) = embed(b,c) ∘ embed(a,b)` for materialised chains.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Field sizes up to this bound use exhaustive search instead of
/// randomised equal-degree splitting when extracting roots.
const EXHAUSTIVE_FIELD_BOUND: u64 = 1 << 10;

/// Hard cap on tower levels; defining-polynomial search beyond this degree
/// is rejected rather than allowed to run away.
const MAX_LEVEL: u32 = 512;

/// An element of `F_{p^d}`: coordinates over `F_p` in the power basis of the
/// level-`d` generator, low degree first, length exactly `d`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FqElem {
    level: u32,
    coeffs: Vec<u64>,
}

impl FqElem {
    /// Tower level (extension degree over the prime field).
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Coordinate vector over `F_p`, low degree first, length `level`.
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Deterministic total order: by level, then coordinates.
    pub fn lex_key(&self) -> (u32, &[u64]) {
        (self.level, &self.coeffs)
    }
}

impl std::fmt::Debug for FqElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fq{}{:?}", self.level, self.coeffs)
    }
}

struct LevelData {
    /// Monic defining polynomial over `F_p`, low first, length `d + 1`.
    defining: Vec<u64>,
}

struct TowerInner {
    p: u64,
    seed: u64,
    levels: BTreeMap<u32, LevelData>,
    /// `(a, b) -> image of the level-a generator in level b`, for `a | b`.
    embeds: BTreeMap<(u32, u32), FqElem>,
    /// Embedding pairs currently under construction; guards against cyclic
    /// requirements when pre-materialising constraint edges.
    in_progress: std::collections::BTreeSet<(u32, u32)>,
}

/// A shared, append-only tower of finite fields of characteristic `p`.
///
/// Cloning the handle is cheap; all clones see the same levels. Reads may
/// run concurrently, while operations that can create levels or embeddings
/// take the write lock.
#[derive(Clone)]
pub struct FieldTower {
    p: u64,
    inner: Arc<RwLock<TowerInner>>,
}

// ---------------------------------------------------------------------------
// Prime-field dense polynomial arithmetic (coefficients mod p, low first).
// ---------------------------------------------------------------------------

fn pf_trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn pf_deg(v: &[u64]) -> Option<usize> {
    if v.is_empty() {
        None
    } else {
        Some(v.len() - 1)
    }
}

fn pf_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + ai * bj) % p;
        }
    }
    pf_trim(&mut out);
    out
}

/// Remainder of `a` by monic `m`.
fn pf_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    debug_assert_eq!(*m.last().unwrap(), 1, "modulus must be monic");
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    while r.len() > dm {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dm;
        if lead != 0 {
            for (i, &mi) in m[..dm].iter().enumerate() {
                let sub = (lead * mi) % p;
                let idx = shift + i;
                r[idx] = (r[idx] + p - sub) % p;
            }
        }
        r.pop();
        pf_trim(&mut r);
        if r.len() <= dm {
            break;
        }
    }
    pf_trim(&mut r);
    r
}

fn pf_sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let mut out = vec![0u64; n];
    for (i, o) in out.iter_mut().enumerate() {
        let ai = a.get(i).copied().unwrap_or(0);
        let bi = b.get(i).copied().unwrap_or(0);
        *o = (ai + p - bi) % p;
    }
    pf_trim(&mut out);
    out
}

fn pf_make_monic(a: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() {
        return Vec::new();
    }
    let lead = *a.last().unwrap();
    if lead == 1 {
        return a.to_vec();
    }
    let inv = mod_inverse(lead, p);
    a.iter().map(|&c| (c * inv) % p).collect()
}

fn pf_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    pf_trim(&mut x);
    pf_trim(&mut y);
    while !y.is_empty() {
        let ym = pf_make_monic(&y, p);
        let r = pf_rem(&x, &ym, p);
        x = y;
        y = r;
    }
    pf_make_monic(&x, p)
}

/// `base^e mod m` by square and multiply; `e` fits in `u64`.
fn pf_pow_mod(base: &[u64], e: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut result = vec![1u64];
    let mut acc = pf_rem(base, m, p);
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            result = pf_rem(&pf_mul(&result, &acc, p), m, p);
        }
        e >>= 1;
        if e > 0 {
            acc = pf_rem(&pf_mul(&acc, &acc, p), m, p);
        }
    }
    result
}

/// Extended gcd over `F_p[x]`: returns `(g, u)` with `u*a ≡ g (mod m)`,
/// `g` monic. Used for inversion modulo the defining polynomial.
fn pf_half_xgcd(a: &[u64], m: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let mut r0 = m.to_vec();
    let mut r1 = pf_rem(a, m, p);
    let mut u0: Vec<u64> = Vec::new();
    let mut u1: Vec<u64> = vec![1];
    while !r1.is_empty() {
        // Divide r0 by r1.
        let lead_inv = mod_inverse(*r1.last().unwrap(), p);
        let mut q = vec![0u64; r0.len().saturating_sub(r1.len()) + 1];
        let mut rem = r0.clone();
        while rem.len() >= r1.len() && !rem.is_empty() {
            let shift = rem.len() - r1.len();
            let factor = (*rem.last().unwrap() * lead_inv) % p;
            if factor != 0 {
                q[shift] = (q[shift] + factor) % p;
                for (i, &c) in r1.iter().enumerate() {
                    let sub = (factor * c) % p;
                    rem[shift + i] = (rem[shift + i] + p - sub) % p;
                }
            }
            pf_trim(&mut rem);
            if rem.len() < r1.len() {
                break;
            }
        }
        pf_trim(&mut q);
        let new_u = pf_sub(&u0, &pf_mul(&q, &u1, p), p);
        r0 = r1;
        r1 = rem;
        u0 = u1;
        u1 = new_u;
    }
    // r0 = gcd (not necessarily monic), u0*a ≡ r0 (mod m)
    if r0.is_empty() {
        return (r0, u0);
    }
    let lead_inv = mod_inverse(*r0.last().unwrap(), p);
    let g = r0.iter().map(|&c| (c * lead_inv) % p).collect();
    let u = u0.iter().map(|&c| (c * lead_inv) % p).collect();
    (g, u)
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // Fermat: p is prime and a != 0 mod p.
    debug_assert!(!a.is_multiple_of(p));
    let mut result = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = (result * base) % p;
        }
        base = (base * base) % p;
        e >>= 1;
    }
    result
}

/// Degree-`d` monic polynomial has no irreducible factor of degree
/// `<= d/2` iff it is irreducible (given `d >= 2` and nonzero constant term).
fn pf_is_irreducible(f: &[u64], p: u64) -> bool {
    let d = f.len() - 1;
    debug_assert!(d >= 2);
    if f[0] == 0 {
        return false;
    }
    let x = vec![0u64, 1];
    let mut xq = x.clone(); // x^{p^0}
    for _ in 1..=d / 2 {
        xq = pf_pow_mod(&xq, p, f, p); // x^{p^i} mod f
        let g = pf_gcd(&pf_sub(&xq, &x, p), f, p);
        if pf_deg(&g).is_some_and(|dg| dg > 0) {
            return false;
        }
    }
    true
}

/// Lexicographically least monic irreducible of degree `d` over `F_p`,
/// comparing `(c_0, ..., c_{d-1})` with `c_0` most significant.
fn least_irreducible(d: u32, p: u64) -> Vec<u64> {
    let d = d as usize;
    if d == 1 {
        // x itself: F_p = F_p[x]/(x).
        return vec![0, 1];
    }
    // Odometer over (c_0, ..., c_{d-1}); c_{d-1} increments fastest.
    // c_0 = 0 would make the polynomial divisible by x, so start at c_0 = 1.
    let mut c = vec![0u64; d];
    c[0] = 1;
    loop {
        let mut f = c.clone();
        f.push(1); // monic of degree d
        if pf_is_irreducible(&f, p) {
            return f;
        }
        // Increment.
        let mut i = d - 1;
        loop {
            c[i] += 1;
            if c[i] < p {
                break;
            }
            c[i] = 0;
            if i == 0 {
                unreachable!("no irreducible polynomial found, which cannot happen");
            }
            i -= 1;
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

// ---------------------------------------------------------------------------
// Tower internals.
// ---------------------------------------------------------------------------

impl TowerInner {
    fn ensure_level(&mut self, d: u32) -> Result<()> {
        if d == 0 {
            return Err(Error::InvalidInput("tower level must be >= 1".into()));
        }
        if d > MAX_LEVEL {
            return Err(Error::InvalidInput(format!(
                "tower level {d} exceeds the supported maximum {MAX_LEVEL}"
            )));
        }
        if !self.levels.contains_key(&d) {
            let defining = least_irreducible(d, self.p);
            self.levels.insert(d, LevelData { defining });
        }
        Ok(())
    }

    fn defining(&self, d: u32) -> &[u64] {
        &self.levels[&d].defining
    }

    fn zero(&self, d: u32) -> FqElem {
        FqElem {
            level: d,
            coeffs: vec![0; d as usize],
        }
    }

    fn one(&self, d: u32) -> FqElem {
        let mut coeffs = vec![0; d as usize];
        coeffs[0] = 1;
        FqElem { level: d, coeffs }
    }

    fn generator(&self, d: u32) -> FqElem {
        let mut coeffs = vec![0; d as usize];
        if d >= 2 {
            coeffs[1] = 1;
        }
        // Level 1 is F_p[x]/(x): the generator is the class of x, i.e. zero.
        FqElem { level: d, coeffs }
    }

    fn is_zero(&self, x: &FqElem) -> bool {
        x.coeffs.iter().all(|&c| c == 0)
    }

    fn add(&self, x: &FqElem, y: &FqElem) -> FqElem {
        debug_assert_eq!(x.level, y.level);
        let coeffs = x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(&a, &b)| (a + b) % self.p)
            .collect();
        FqElem {
            level: x.level,
            coeffs,
        }
    }

    fn neg(&self, x: &FqElem) -> FqElem {
        let coeffs = x.coeffs.iter().map(|&a| (self.p - a) % self.p).collect();
        FqElem {
            level: x.level,
            coeffs,
        }
    }

    fn scalar_mul(&self, c: u64, x: &FqElem) -> FqElem {
        let c = c % self.p;
        let coeffs = x.coeffs.iter().map(|&a| (a * c) % self.p).collect();
        FqElem {
            level: x.level,
            coeffs,
        }
    }

    fn mul(&self, x: &FqElem, y: &FqElem) -> FqElem {
        debug_assert_eq!(x.level, y.level);
        let d = x.level as usize;
        let prod = pf_mul(&x.coeffs, &y.coeffs, self.p);
        let mut r = pf_rem(&prod, self.defining(x.level), self.p);
        r.resize(d, 0);
        FqElem {
            level: x.level,
            coeffs: r,
        }
    }

    fn inv(&self, x: &FqElem) -> Result<FqElem> {
        if self.is_zero(x) {
            return Err(Error::DivisionByZero);
        }
        let (g, u) = pf_half_xgcd(&x.coeffs, self.defining(x.level), self.p);
        if pf_deg(&g) != Some(0) {
            return Err(Error::Internal(format!(
                "defining polynomial at level {} is not irreducible",
                x.level
            )));
        }
        let mut coeffs = u;
        coeffs.resize(x.level as usize, 0);
        Ok(FqElem {
            level: x.level,
            coeffs,
        })
    }

    /// `x^(p^k)` within its level; `k` is reduced modulo the level.
    fn frobenius(&self, x: &FqElem, k: i64) -> FqElem {
        let d = x.level as i64;
        let k = k.rem_euclid(d) as u32;
        let mut out = x.clone();
        for _ in 0..k {
            out = self.pow_p(&out);
        }
        out
    }

    fn pow_p(&self, x: &FqElem) -> FqElem {
        let mut result = self.one(x.level);
        let mut acc = x.clone();
        let mut e = self.p;
        while e > 0 {
            if e & 1 == 1 {
                result = self.mul(&result, &acc);
            }
            e >>= 1;
            if e > 0 {
                acc = self.mul(&acc, &acc);
            }
        }
        result
    }

    /// Whether `x` lies in the degree-`e` subfield of its level (`e | level`).
    fn is_in_subfield(&self, x: &FqElem, e: u32) -> bool {
        debug_assert!(x.level.is_multiple_of(e));
        self.frobenius(x, e as i64) == *x
    }

    /// Image of the level-`a` generator in level `b` (`a | b`), creating and
    /// caching the embedding if needed.
    fn embedding(&mut self, a: u32, b: u32) -> Result<FqElem> {
        debug_assert!(b.is_multiple_of(a) && a < b);
        if let Some(img) = self.embeds.get(&(a, b)) {
            return Ok(img.clone());
        }
        if !self.in_progress.insert((a, b)) {
            return Err(Error::Internal(format!(
                "cyclic embedding requirement for levels {a} -> {b}"
            )));
        }
        let result = self.embedding_uncached(a, b);
        self.in_progress.remove(&(a, b));
        let img = result?;
        self.embeds.insert((a, b), img.clone());
        Ok(img)
    }

    fn embedding_uncached(&mut self, a: u32, b: u32) -> Result<FqElem> {
        // Compose through the largest materialised strict intermediate whose
        // two legs are not themselves mid-construction.
        let mid = self
            .levels
            .keys()
            .copied()
            .filter(|&e| {
                e > a
                    && e < b
                    && e % a == 0
                    && b.is_multiple_of(e)
                    && !self.in_progress.contains(&(a, e))
                    && !self.in_progress.contains(&(e, b))
            })
            .max();
        let img = if let Some(m) = mid {
            let g_a_in_m = self.embedding(a, m)?;
            self.apply_embedding(&g_a_in_m, b)?
        } else {
            // Materialise sub-embeddings first so they pin the choice here.
            // Pairs already under construction higher up the stack are
            // skipped: they will be defined by composition afterwards.
            let sub_levels: Vec<u32> = self
                .levels
                .keys()
                .copied()
                .filter(|&e| {
                    e < a
                        && a.is_multiple_of(e)
                        && self.embeds.contains_key(&(e, a))
                        && !self.in_progress.contains(&(e, b))
                })
                .collect();
            for &e in &sub_levels {
                self.embedding(e, b)?;
            }
            let defining_a = self.defining(a).to_vec();
            let f: Vec<FqElem> = defining_a
                .iter()
                .map(|&c| {
                    let mut z = self.zero(b);
                    z.coeffs[0] = c;
                    z
                })
                .collect();
            let mut candidates = self.roots_in_field(&f, b)?;
            candidates.sort_by(|x, y| x.coeffs.cmp(&y.coeffs));
            let compatible = |inner: &mut TowerInner, cand: &FqElem| -> Result<bool> {
                // Below: e | a with cached (e,a) and (e,b).
                for &e in &sub_levels {
                    let g_e_in_a = inner.embeds[&(e, a)].clone();
                    let g_e_in_b = inner.embeds[&(e, b)].clone();
                    let via = inner.eval_coords_at(&g_e_in_a.coeffs, cand, b);
                    if via != g_e_in_b {
                        return Ok(false);
                    }
                }
                // Above: b | f with cached (a,f) and (b,f).
                let ups: Vec<u32> = inner
                    .embeds
                    .keys()
                    .filter(|&&(lo, hi)| lo == b && hi % b == 0)
                    .map(|&(_, hi)| hi)
                    .filter(|&hi| inner.embeds.contains_key(&(a, hi)))
                    .collect();
                for f_lvl in ups {
                    let g_b_in_f = inner.embeds[&(b, f_lvl)].clone();
                    let g_a_in_f = inner.embeds[&(a, f_lvl)].clone();
                    let via = inner.eval_coords_at(&cand.coeffs, &g_b_in_f, f_lvl);
                    if via != g_a_in_f {
                        return Ok(false);
                    }
                }
                Ok(true)
            };
            let mut chosen = None;
            for cand in &candidates {
                if compatible(self, cand)? {
                    chosen = Some(cand.clone());
                    break;
                }
            }
            chosen.ok_or_else(|| {
                Error::Internal(format!(
                    "no compatible embedding for levels {a} -> {b}"
                ))
            })?
        };
        Ok(img)
    }

    /// Evaluates a coordinate vector (F_p scalars) at `point` in level `lvl`.
    fn eval_coords_at(&self, coords: &[u64], point: &FqElem, lvl: u32) -> FqElem {
        let mut acc = self.zero(lvl);
        for &c in coords.iter().rev() {
            acc = self.mul(&acc, point);
            if c != 0 {
                let mut con = self.zero(lvl);
                con.coeffs[0] = c;
                acc = self.add(&acc, &con);
            }
        }
        acc
    }

    /// Embeds `x` into level `b` (level of `x` must divide `b`).
    fn apply_embedding(&mut self, x: &FqElem, b: u32) -> Result<FqElem> {
        let a = x.level;
        if a == b {
            return Ok(x.clone());
        }
        if !b.is_multiple_of(a) {
            return Err(Error::InvalidInput(format!(
                "cannot embed level {a} into non-multiple level {b}"
            )));
        }
        self.ensure_level(b)?;
        let g = self.embedding(a, b)?;
        Ok(self.eval_coords_at(&x.coeffs, &g, b))
    }

    fn unify(&mut self, x: &FqElem, y: &FqElem) -> Result<(FqElem, FqElem)> {
        if x.level == y.level {
            return Ok((x.clone(), y.clone()));
        }
        let l = x.level.lcm(&y.level);
        Ok((self.apply_embedding(x, l)?, self.apply_embedding(y, l)?))
    }

    // -- Root extraction over the tower -------------------------------------

    /// All roots of `f` (dense, low first, coefficients at level `lvl`)
    /// that lie in level `lvl` itself. `f` need not be squarefree; the
    /// returned roots are distinct and sorted.
    fn roots_in_field(&mut self, f: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        let f = self.fqp_trim(f.to_vec());
        if f.is_empty() {
            return Err(Error::InvalidInput("root extraction of the zero polynomial".into()));
        }
        if f.len() == 1 {
            return Ok(Vec::new());
        }
        let s = self.fqp_squarefree_part(&f, lvl)?;
        // Product of the linear factors over this field.
        let xq = self.fqp_frobenius_power_of_x(&s, lvl, lvl)?;
        let x_poly = vec![self.zero(lvl), self.one(lvl)];
        let diff = self.fqp_sub(&xq, &x_poly, lvl);
        let lin = self.fqp_gcd(&diff, &s, lvl)?;
        let mut roots = self.split_linear_product(&lin, lvl)?;
        roots.sort_by(|x, y| x.coeffs.cmp(&y.coeffs));
        Ok(roots)
    }

    /// Splits a monic product of distinct linear factors into its roots.
    fn split_linear_product(&mut self, g: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        let g = self.fqp_trim(g.to_vec());
        if g.len() <= 1 {
            return Ok(Vec::new());
        }
        if g.len() == 2 {
            // x + c -> root -c (monic).
            let root = self.neg(&g[0]);
            return Ok(vec![root]);
        }
        let size = (self.p as u128).checked_pow(lvl).unwrap_or(u128::MAX);
        if size <= EXHAUSTIVE_FIELD_BOUND as u128 {
            let mut roots = Vec::new();
            for idx in 0..size as u64 {
                let cand = self.element_from_index(lvl, idx);
                if self.is_zero(&self.fqp_eval(&g, &cand, lvl)) {
                    roots.push(cand);
                }
            }
            return Ok(roots);
        }
        // Randomised equal-degree splitting, deterministic via the tower seed.
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ (lvl as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ g.len() as u64,
        );
        let mut stack = vec![g];
        let mut roots = Vec::new();
        while let Some(cur) = stack.pop() {
            if cur.len() == 2 {
                roots.push(self.neg(&cur[0]));
                continue;
            }
            let mut attempts = 0;
            loop {
                attempts += 1;
                if attempts > 128 {
                    return Err(Error::Internal(
                        "equal-degree splitting failed to make progress".into(),
                    ));
                }
                let a = self.random_element(lvl, &mut rng);
                let h = if self.p == 2 {
                    // Trace polynomial of a*x over F_2.
                    let ax = vec![self.zero(lvl), a.clone()];
                    let mut term = self.fqp_rem(&ax, &cur, lvl)?;
                    let mut acc = term.clone();
                    for _ in 1..lvl as u64 {
                        term = self.fqp_mulrem(&term, &term, &cur, lvl)?;
                        acc = self.fqp_add(&acc, &term, lvl);
                    }
                    acc
                } else {
                    // (x + a)^((q-1)/2) - 1 mod cur.
                    let base = vec![a.clone(), self.one(lvl)];
                    let exp_bits = {
                        // (p^lvl - 1)/2 as bits, most significant first.
                        let q = num_bigint::BigUint::from(self.p).pow(lvl);
                        let e = (&q - 1u32) / 2u32;
                        e.to_radix_be(2)
                    };
                    let mut acc = vec![self.one(lvl)];
                    for bit in exp_bits {
                        acc = self.fqp_mulrem(&acc, &acc, &cur, lvl)?;
                        if bit == 1 {
                            acc = self.fqp_mulrem(&acc, &base, &cur, lvl)?;
                        }
                    }
                    let one = vec![self.one(lvl)];
                    self.fqp_sub(&acc, &one, lvl)
                };
                let d1 = self.fqp_gcd(&h, &cur, lvl)?;
                if d1.len() > 1 && d1.len() < cur.len() {
                    let (q, _r) = self.fqp_divmod(&cur, &d1, lvl)?;
                    stack.push(d1);
                    stack.push(q);
                    break;
                }
            }
        }
        Ok(roots)
    }

    fn random_element(&self, lvl: u32, rng: &mut ChaCha8Rng) -> FqElem {
        let coeffs = (0..lvl).map(|_| rng.gen_range(0..self.p)).collect();
        FqElem { level: lvl, coeffs }
    }

    fn element_from_index(&self, lvl: u32, idx: u64) -> FqElem {
        let mut coeffs = vec![0u64; lvl as usize];
        let mut k = idx;
        for c in coeffs.iter_mut() {
            *c = k % self.p;
            k /= self.p;
        }
        FqElem { level: lvl, coeffs }
    }

    // -- Dense polynomial helpers over a fixed level ------------------------

    fn fqp_trim(&self, mut v: Vec<FqElem>) -> Vec<FqElem> {
        while v.last().is_some_and(|c| self.is_zero(c)) {
            v.pop();
        }
        v
    }

    fn fqp_add(&self, a: &[FqElem], b: &[FqElem], lvl: u32) -> Vec<FqElem> {
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let z = self.zero(lvl);
            let ai = a.get(i).unwrap_or(&z);
            let bi = b.get(i).unwrap_or(&z);
            out.push(self.add(ai, bi));
        }
        self.fqp_trim(out)
    }

    fn fqp_sub(&self, a: &[FqElem], b: &[FqElem], lvl: u32) -> Vec<FqElem> {
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let z = self.zero(lvl);
            let ai = a.get(i).unwrap_or(&z).clone();
            let bi = b.get(i).unwrap_or(&z);
            out.push(self.add(&ai, &self.neg(bi)));
        }
        self.fqp_trim(out)
    }

    fn fqp_mul(&self, a: &[FqElem], b: &[FqElem], lvl: u32) -> Vec<FqElem> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![self.zero(lvl); a.len() + b.len() - 1];
        for (i, ai) in a.iter().enumerate() {
            if self.is_zero(ai) {
                continue;
            }
            for (j, bj) in b.iter().enumerate() {
                let prod = self.mul(ai, bj);
                out[i + j] = self.add(&out[i + j], &prod);
            }
        }
        self.fqp_trim(out)
    }

    fn fqp_divmod(&self, a: &[FqElem], b: &[FqElem], lvl: u32) -> Result<(Vec<FqElem>, Vec<FqElem>)> {
        let b = self.fqp_trim(b.to_vec());
        if b.is_empty() {
            return Err(Error::DivisionByZero);
        }
        let lead_inv = self.inv(b.last().unwrap())?;
        let mut rem = self.fqp_trim(a.to_vec());
        let mut quot = vec![self.zero(lvl); rem.len().saturating_sub(b.len()) + 1];
        while rem.len() >= b.len() {
            let shift = rem.len() - b.len();
            let factor = self.mul(rem.last().unwrap(), &lead_inv);
            if !self.is_zero(&factor) {
                quot[shift] = self.add(&quot[shift], &factor);
                for (i, c) in b.iter().enumerate() {
                    let sub = self.mul(&factor, c);
                    rem[shift + i] = self.add(&rem[shift + i], &self.neg(&sub));
                }
            }
            rem.pop();
            rem = self.fqp_trim(rem);
        }
        Ok((self.fqp_trim(quot), rem))
    }

    fn fqp_rem(&self, a: &[FqElem], m: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        Ok(self.fqp_divmod(a, m, lvl)?.1)
    }

    fn fqp_mulrem(&self, a: &[FqElem], b: &[FqElem], m: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        let prod = self.fqp_mul(a, b, lvl);
        self.fqp_rem(&prod, m, lvl)
    }

    fn fqp_gcd(&self, a: &[FqElem], b: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        let mut x = self.fqp_trim(a.to_vec());
        let mut y = self.fqp_trim(b.to_vec());
        while !y.is_empty() {
            let r = self.fqp_rem(&x, &y, lvl)?;
            x = y;
            y = r;
        }
        if x.is_empty() {
            return Ok(x);
        }
        let inv = self.inv(x.last().unwrap())?;
        Ok(x.iter().map(|c| self.mul(c, &inv)).collect())
    }

    fn fqp_eval(&self, f: &[FqElem], at: &FqElem, lvl: u32) -> FqElem {
        let mut acc = self.zero(lvl);
        for c in f.iter().rev() {
            acc = self.mul(&acc, at);
            acc = self.add(&acc, c);
        }
        acc
    }

    fn fqp_derivative(&self, f: &[FqElem], _lvl: u32) -> Vec<FqElem> {
        let mut out = Vec::new();
        for (i, c) in f.iter().enumerate().skip(1) {
            out.push(self.scalar_mul(i as u64 % self.p, c));
        }
        self.fqp_trim(out)
    }

    /// `x^{p^k} mod m` over level `lvl`, by iterating p-th powers.
    fn fqp_frobenius_power_of_x(&self, m: &[FqElem], lvl: u32, k: u32) -> Result<Vec<FqElem>> {
        let x_poly = vec![self.zero(lvl), self.one(lvl)];
        let mut h = self.fqp_rem(&x_poly, m, lvl)?;
        for _ in 0..k {
            h = self.fqp_pow_small(&h, self.p, m, lvl)?;
        }
        Ok(h)
    }

    fn fqp_pow_small(&self, base: &[FqElem], e: u64, m: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        let mut result = vec![self.one(lvl)];
        let mut acc = base.to_vec();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = self.fqp_mulrem(&result, &acc, m, lvl)?;
            }
            e >>= 1;
            if e > 0 {
                acc = self.fqp_mulrem(&acc, &acc, m, lvl)?;
            }
        }
        Ok(result)
    }

    /// Squarefree polynomial with the same distinct roots as `f` (the
    /// radical). Factors whose multiplicity is prime to p survive in
    /// `f / gcd(f, f')`; factors whose multiplicity is divisible by p hide
    /// entirely inside the gcd and are recovered by recursing on it. A
    /// vanishing derivative means `f` is a polynomial in `x^p`, which p-th
    /// roots of the coefficients undo exactly on perfect fields.
    fn fqp_squarefree_part(&mut self, f: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        let f = self.fqp_trim(f.to_vec());
        if f.len() <= 1 {
            return Ok(f);
        }
        let der = self.fqp_derivative(&f, lvl);
        if der.is_empty() {
            // f(x) = sum a_i x^{p i}; replace by sum a_i^{1/p} x^i.
            let mut reduced = Vec::new();
            let p = self.p as usize;
            for (i, c) in f.iter().enumerate() {
                if i % p == 0 {
                    reduced.push(self.frobenius(c, -1));
                } else if !self.is_zero(c) {
                    return Err(Error::Internal(
                        "vanishing derivative with non-p-power support".into(),
                    ));
                }
            }
            let reduced = self.fqp_trim(reduced);
            return self.fqp_squarefree_part(&reduced, lvl);
        }
        let g = self.fqp_gcd(&f, &der, lvl)?;
        if g.len() == 1 {
            return Ok(f);
        }
        let (separable, _) = self.fqp_divmod(&f, &g, lvl)?;
        let rest = self.fqp_squarefree_part(&g, lvl)?;
        let overlap = self.fqp_gcd(&separable, &rest, lvl)?;
        let (extra, _) = self.fqp_divmod(&rest, &overlap, lvl)?;
        Ok(self.fqp_mul(&separable, &extra, lvl))
    }

    /// Full root extraction over the closure: distinct-degree factorisation,
    /// then linear splitting of each block over the level that contains its
    /// roots. Returns `(root, multiplicity)` pairs, deterministic order.
    fn poly_roots(&mut self, f: &[FqElem]) -> Result<Vec<(FqElem, usize)>> {
        // Unify coefficient levels.
        let lvl = f
            .iter()
            .map(|c| c.level)
            .fold(1u32, |acc, l| acc.lcm(&l));
        self.ensure_level(lvl)?;
        let mut fv = Vec::with_capacity(f.len());
        for c in f {
            fv.push(self.apply_embedding(c, lvl)?);
        }
        let fv = self.fqp_trim(fv);
        if fv.is_empty() {
            return Err(Error::InvalidInput(
                "cannot extract roots of the zero polynomial".into(),
            ));
        }
        let deg = fv.len() - 1;
        if deg == 0 {
            return Ok(Vec::new());
        }

        // Zero roots: strip the power of x.
        let mut low = 0;
        while low < fv.len() && self.is_zero(&fv[low]) {
            low += 1;
        }
        let mut results: Vec<(FqElem, usize)> = Vec::new();
        if low > 0 {
            results.push((self.zero(lvl), low));
        }
        let body = self.fqp_trim(fv[low..].to_vec());

        if body.len() > 1 {
            let s = self.fqp_squarefree_part(&body, lvl)?;
            // Distinct-degree factorisation of s.
            let mut remaining = {
                let inv = self.inv(s.last().unwrap())?;
                s.iter().map(|c| self.mul(c, &inv)).collect::<Vec<_>>()
            };
            let mut blocks: Vec<(u32, Vec<FqElem>)> = Vec::new();
            let x_poly = vec![self.zero(lvl), self.one(lvl)];
            let mut h = self.fqp_rem(&x_poly, &remaining, lvl)?;
            let mut k = 1u32;
            while remaining.len() > 1 {
                if 2 * (k as usize) > remaining.len() - 1 {
                    let d = (remaining.len() - 1) as u32;
                    blocks.push((d, remaining.clone()));
                    break;
                }
                // h = x^{p^{lvl * k}} mod remaining
                for _ in 0..lvl {
                    h = self.fqp_pow_small(&h, self.p, &remaining, lvl)?;
                }
                let diff = self.fqp_sub(&h, &x_poly, lvl);
                let b = self.fqp_gcd(&diff, &remaining, lvl)?;
                if b.len() > 1 {
                    blocks.push((k, b.clone()));
                    let (q, _r) = self.fqp_divmod(&remaining, &b, lvl)?;
                    remaining = q;
                    h = self.fqp_rem(&h, &remaining, lvl)?;
                }
                k += 1;
            }
            // Split each block over the level containing its roots.
            let mut distinct: Vec<FqElem> = Vec::new();
            for (k, block) in blocks {
                let target = lvl * k;
                self.ensure_level(target)?;
                let mut emb = Vec::with_capacity(block.len());
                for c in &block {
                    emb.push(self.apply_embedding(c, target)?);
                }
                let xq = self.fqp_frobenius_power_of_x(&emb, target, target)?;
                let x_t = vec![self.zero(target), self.one(target)];
                let diff = self.fqp_sub(&xq, &x_t, target);
                let lin = self.fqp_gcd(&diff, &emb, target)?;
                if lin.len() != emb.len() {
                    return Err(Error::Internal(
                        "distinct-degree block failed to split at its level".into(),
                    ));
                }
                let roots = self.split_linear_product(&lin, target)?;
                distinct.extend(roots);
            }
            distinct.sort_by(|x, y| (x.level, &x.coeffs).cmp(&(y.level, &y.coeffs)));

            // Multiplicities by repeated division of the original body.
            for r in distinct {
                let target = r.level;
                let mut cur = Vec::with_capacity(body.len());
                for c in &body {
                    cur.push(self.apply_embedding(c, target)?);
                }
                let divisor = vec![self.neg(&r), self.one(target)];
                let mut mult = 0usize;
                loop {
                    let (q, rem) = self.fqp_divmod(&cur, &divisor, target)?;
                    if rem.is_empty() {
                        mult += 1;
                        cur = q;
                        if cur.len() <= 1 {
                            break;
                        }
                    } else {
                        break;
                    }
                }
                if mult == 0 {
                    return Err(Error::Internal("claimed root does not divide".into()));
                }
                results.push((r, mult));
            }
        }

        let total: usize = results.iter().map(|(_, m)| m).sum();
        if total != deg {
            return Err(Error::Internal(format!(
                "root multiplicities sum to {total}, expected {deg}"
            )));
        }
        Ok(results)
    }
}

// ---------------------------------------------------------------------------
// Public handle.
// ---------------------------------------------------------------------------

impl FieldTower {
    /// Creates a tower of characteristic `p`. The `seed` drives the
    /// deterministic PRNG used by randomised root splitting.
    pub fn new(p: u64, seed: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
        if p >= (1 << 20) {
            return Err(Error::InvalidInput(format!(
                "characteristic {p} exceeds the supported bound 2^20"
            )));
        }
        let mut levels = BTreeMap::new();
        levels.insert(1, LevelData { defining: vec![0, 1] });
        Ok(FieldTower {
            p,
            inner: Arc::new(RwLock::new(TowerInner {
                p,
                seed,
                levels,
                embeds: BTreeMap::new(),
                in_progress: std::collections::BTreeSet::new(),
            })),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Levels currently materialised, ascending.
    pub fn levels(&self) -> Vec<u32> {
        self.inner.read().unwrap().levels.keys().copied().collect()
    }

    /// Creates level `d` (and its defining polynomial) if absent.
    pub fn ensure_level(&self, d: u32) -> Result<()> {
        self.inner.write().unwrap().ensure_level(d)
    }

    /// The monic defining polynomial of level `d`, low first, length `d + 1`.
    pub fn defining_poly(&self, d: u32) -> Result<Vec<u64>> {
        self.ensure_level(d)?;
        Ok(self.inner.read().unwrap().defining(d).to_vec())
    }

    pub fn zero(&self, d: u32) -> Result<FqElem> {
        self.ensure_level(d)?;
        Ok(self.inner.read().unwrap().zero(d))
    }

    pub fn one(&self, d: u32) -> Result<FqElem> {
        self.ensure_level(d)?;
        Ok(self.inner.read().unwrap().one(d))
    }

    /// The class of `x` at level `d` (zero at level 1).
    pub fn generator(&self, d: u32) -> Result<FqElem> {
        self.ensure_level(d)?;
        Ok(self.inner.read().unwrap().generator(d))
    }

    /// Element from explicit coordinates; values are reduced mod `p`.
    pub fn from_coeffs(&self, d: u32, coeffs: &[u64]) -> Result<FqElem> {
        if coeffs.len() != d as usize {
            return Err(Error::InvalidInput(format!(
                "expected {d} coordinates, got {}",
                coeffs.len()
            )));
        }
        self.ensure_level(d)?;
        Ok(FqElem {
            level: d,
            coeffs: coeffs.iter().map(|&c| c % self.p).collect(),
        })
    }

    /// The constant `c` as a level-1 element.
    pub fn constant(&self, c: u64) -> FqElem {
        FqElem {
            level: 1,
            coeffs: vec![c % self.p],
        }
    }

    pub fn is_zero(&self, x: &FqElem) -> bool {
        x.coeffs.iter().all(|&c| c == 0)
    }

    pub fn is_one(&self, x: &FqElem) -> bool {
        x.coeffs[0] == 1 && x.coeffs[1..].iter().all(|&c| c == 0)
    }

    pub fn add(&self, x: &FqElem, y: &FqElem) -> Result<FqElem> {
        if x.level == y.level {
            return Ok(self.inner.read().unwrap().add(x, y));
        }
        let mut inner = self.inner.write().unwrap();
        let (a, b) = inner.unify(x, y)?;
        Ok(inner.add(&a, &b))
    }

    pub fn sub(&self, x: &FqElem, y: &FqElem) -> Result<FqElem> {
        let ny = self.neg(y);
        self.add(x, &ny)
    }

    pub fn neg(&self, x: &FqElem) -> FqElem {
        self.inner.read().unwrap().neg(x)
    }

    pub fn mul(&self, x: &FqElem, y: &FqElem) -> Result<FqElem> {
        if x.level == y.level {
            return Ok(self.inner.read().unwrap().mul(x, y));
        }
        let mut inner = self.inner.write().unwrap();
        let (a, b) = inner.unify(x, y)?;
        Ok(inner.mul(&a, &b))
    }

    pub fn inv(&self, x: &FqElem) -> Result<FqElem> {
        self.inner.read().unwrap().inv(x)
    }

    pub fn div(&self, x: &FqElem, y: &FqElem) -> Result<FqElem> {
        let yi = self.inv(y)?;
        self.mul(x, &yi)
    }

    /// Semantic equality across levels (embeds into the common level).
    pub fn eq(&self, x: &FqElem, y: &FqElem) -> Result<bool> {
        if x.level == y.level {
            return Ok(x == y);
        }
        let mut inner = self.inner.write().unwrap();
        let (a, b) = inner.unify(x, y)?;
        Ok(a == b)
    }

    /// `x^(p^k)`; `k` may be negative (inverse Frobenius on a perfect field).
    pub fn frobenius(&self, x: &FqElem, k: i64) -> FqElem {
        self.inner.read().unwrap().frobenius(x, k)
    }

    /// Embeds `x` into level `d` (its level must divide `d`).
    pub fn embed(&self, x: &FqElem, d: u32) -> Result<FqElem> {
        if x.level == d {
            return Ok(x.clone());
        }
        self.inner.write().unwrap().apply_embedding(x, d)
    }

    /// Embeds both operands into the lcm of their levels.
    pub fn unify(&self, x: &FqElem, y: &FqElem) -> Result<(FqElem, FqElem)> {
        self.inner.write().unwrap().unify(x, y)
    }

    /// Whether `x` lies in the degree-`e` subfield of its level.
    pub fn is_in_subfield(&self, x: &FqElem, e: u32) -> Result<bool> {
        if e == 0 || !x.level.is_multiple_of(e) {
            return Err(Error::InvalidInput(format!(
                "{e} does not divide level {}",
                x.level
            )));
        }
        Ok(self.inner.read().unwrap().is_in_subfield(x, e))
    }

    /// Smallest level containing `x` (a divisor of its ambient level).
    pub fn minimal_level(&self, x: &FqElem) -> u32 {
        let inner = self.inner.read().unwrap();
        let d = x.level;
        for e in 1..=d {
            if d.is_multiple_of(e) && inner.is_in_subfield(x, e) {
                return e;
            }
        }
        d
    }

    /// All roots of `f` in the algebraic closure, with multiplicities.
    ///
    /// `f` is dense, low degree first. The tower is enlarged to the levels
    /// containing the roots; the sum of multiplicities equals `deg f`.
    pub fn poly_roots(&self, f: &[FqElem]) -> Result<Vec<(FqElem, usize)>> {
        self.inner.write().unwrap().poly_roots(f)
    }

    /// Roots of `f` lying in level `lvl` only (no tower growth beyond `lvl`).
    pub fn roots_in_level(&self, f: &[FqElem], lvl: u32) -> Result<Vec<FqElem>> {
        let mut inner = self.inner.write().unwrap();
        inner.ensure_level(lvl)?;
        let mut emb = Vec::with_capacity(f.len());
        for c in f {
            emb.push(inner.apply_embedding(c, lvl)?);
        }
        inner.roots_in_field(&emb, lvl)
    }

    /// Enumerates every element of level `d`; guarded against large fields.
    pub fn enumerate_level(&self, d: u32) -> Result<Vec<FqElem>> {
        let size = (self.p as u128).checked_pow(d).unwrap_or(u128::MAX);
        if size > (1 << 20) {
            return Err(Error::InvalidInput(format!(
                "refusing to enumerate a field of size {size}"
            )));
        }
        self.ensure_level(d)?;
        let inner = self.inner.read().unwrap();
        Ok((0..size as u64)
            .map(|i| inner.element_from_index(d, i))
            .collect())
    }

    /// Uniformly random element of level `d` from the caller's RNG.
    pub fn random_element<R: Rng>(&self, d: u32, rng: &mut R) -> Result<FqElem> {
        self.ensure_level(d)?;
        let coeffs = (0..d).map(|_| rng.gen_range(0..self.p)).collect();
        Ok(FqElem { level: d, coeffs })
    }
}

// ---------------------------------------------------------------------------
// Dense polynomials over the tower (crate-internal helper API).
// ---------------------------------------------------------------------------

/// Dense polynomial operations over tower elements, used by the solvers.
/// Coefficients are low degree first; levels are unified lazily.
pub mod fqpoly {
    use super::*;

    pub fn trim(tower: &FieldTower, mut v: Vec<FqElem>) -> Vec<FqElem> {
        while v.last().is_some_and(|c| tower.is_zero(c)) {
            v.pop();
        }
        v
    }

    pub fn add(tower: &FieldTower, a: &[FqElem], b: &[FqElem]) -> Result<Vec<FqElem>> {
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            match (a.get(i), b.get(i)) {
                (Some(x), Some(y)) => out.push(tower.add(x, y)?),
                (Some(x), None) => out.push(x.clone()),
                (None, Some(y)) => out.push(y.clone()),
                (None, None) => unreachable!(),
            }
        }
        Ok(trim(tower, out))
    }

    pub fn neg(tower: &FieldTower, a: &[FqElem]) -> Vec<FqElem> {
        a.iter().map(|c| tower.neg(c)).collect()
    }

    pub fn mul(tower: &FieldTower, a: &[FqElem], b: &[FqElem]) -> Result<Vec<FqElem>> {
        if a.is_empty() || b.is_empty() {
            return Ok(Vec::new());
        }
        let mut out: Vec<Option<FqElem>> = vec![None; a.len() + b.len() - 1];
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                let prod = tower.mul(ai, bj)?;
                out[i + j] = Some(match out[i + j].take() {
                    Some(cur) => tower.add(&cur, &prod)?,
                    None => prod,
                });
            }
        }
        let zero = tower.zero(1)?;
        Ok(trim(
            tower,
            out.into_iter().map(|c| c.unwrap_or_else(|| zero.clone())).collect(),
        ))
    }

    pub fn eval(tower: &FieldTower, f: &[FqElem], at: &FqElem) -> Result<FqElem> {
        let mut acc = tower.zero(1)?;
        for c in f.iter().rev() {
            acc = tower.mul(&acc, at)?;
            acc = tower.add(&acc, c)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower(p: u64) -> FieldTower {
        FieldTower::new(p, 7).unwrap()
    }

    #[test]
    fn rejects_composite_characteristic() {
        assert!(FieldTower::new(4, 0).is_err());
        assert!(FieldTower::new(1, 0).is_err());
    }

    #[test]
    fn prime_field_arithmetic() {
        let t = tower(2);
        let one = t.one(1).unwrap();
        let two = t.add(&one, &one).unwrap();
        assert!(t.is_zero(&two));

        let t3 = tower(3);
        let two = t3.constant(2);
        assert_eq!(t3.inv(&two).unwrap(), two); // 2 * 2 = 4 = 1 mod 3
        assert!(t3.inv(&t3.constant(0)).is_err());
    }

    #[test]
    fn deterministic_defining_polynomials() {
        // Least irreducibles in the documented coefficient order.
        assert_eq!(tower(2).defining_poly(2).unwrap(), vec![1, 1, 1]); // x^2+x+1
        assert_eq!(tower(2).defining_poly(3).unwrap(), vec![1, 0, 1, 1]); // x^3+x^2+1
        assert_eq!(tower(3).defining_poly(2).unwrap(), vec![1, 0, 1]); // x^2+1
    }

    #[test]
    fn f4_generator_multiplication() {
        // g^2 = g + 1 in F_4 with defining x^2 + x + 1; verified here by an
        // independent multiplication table computed from raw reduction.
        let t = tower(2);
        let g = t.generator(2).unwrap();
        let gg = t.mul(&g, &g).unwrap();
        let expected = t.from_coeffs(2, &[1, 1]).unwrap();
        assert_eq!(gg, expected);
        // Exhaustive sanity: multiplication is commutative and has identity.
        let elems = t.enumerate_level(2).unwrap();
        for a in &elems {
            assert_eq!(t.mul(a, &t.one(2).unwrap()).unwrap(), *a);
            for b in &elems {
                assert_eq!(t.mul(a, b).unwrap(), t.mul(b, a).unwrap());
            }
        }
    }

    #[test]
    fn frobenius_fixes_prime_field_and_cycles() {
        let t = tower(5);
        for c in 0..5 {
            let e = t.constant(c);
            assert_eq!(t.frobenius(&e, 1), e);
        }
        let t2 = tower(2);
        let g = t2.generator(2).unwrap();
        let fg = t2.frobenius(&g, 1);
        assert_eq!(fg, t2.from_coeffs(2, &[1, 1]).unwrap()); // g^2 = g+1
        assert_eq!(t2.frobenius(&fg, 1), g); // order 2
        assert_eq!(t2.frobenius(&g, -1), fg); // inverse Frobenius
    }

    #[test]
    fn inverse_matches_exhaustive_search() {
        let t = tower(3);
        let elems = t.enumerate_level(2).unwrap();
        for a in &elems {
            if t.is_zero(a) {
                continue;
            }
            let inv = t.inv(a).unwrap();
            assert!(t.is_one(&t.mul(a, &inv).unwrap()));
        }
    }

    #[test]
    fn roots_of_split_quadratic() {
        let t = tower(2);
        // x^2 + x = x(x+1): roots 0 and 1 in F_2.
        let f = vec![t.constant(0), t.constant(1), t.constant(1)];
        let roots = t.poly_roots(&f).unwrap();
        assert_eq!(roots.len(), 2);
        for (_, m) in &roots {
            assert_eq!(*m, 1);
        }
    }

    #[test]
    fn roots_enlarge_tower() {
        let t = tower(2);
        // x^2 + x + 1 splits in F_4 with two simple roots g, g+1.
        let f = vec![t.constant(1), t.constant(1), t.constant(1)];
        let roots = t.poly_roots(&f).unwrap();
        assert_eq!(roots.len(), 2);
        for (r, m) in &roots {
            assert_eq!(*m, 1);
            assert_eq!(r.level(), 2);
            let val = fqpoly::eval(&t, &f, r).unwrap();
            assert!(t.is_zero(&val));
        }
        assert!(t.levels().contains(&2));
    }

    #[test]
    fn triple_root_multiplicity() {
        let t = tower(3);
        let a = t.constant(2);
        // (x - 2)^3 = x^3 - 6x^2 + 12x - 8 = x^3 + 0x^2 + 0x + 1 mod 3.
        let lin = vec![t.neg(&a), t.one(1).unwrap()];
        let sq = fqpoly::mul(&t, &lin, &lin).unwrap();
        let cube = fqpoly::mul(&t, &sq, &lin).unwrap();
        let roots = t.poly_roots(&cube).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].1, 3);
        assert!(t.eq(&roots[0].0, &a).unwrap());
    }

    #[test]
    fn roots_match_exhaustive_search_small() {
        use rand::Rng;
        let t = tower(3);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let deg = rng.gen_range(1..=4);
            let mut f = Vec::new();
            for _ in 0..deg {
                f.push(t.random_element(2, &mut rng).unwrap());
            }
            f.push(t.one(2).unwrap()); // monic
            let roots = t.poly_roots(&f).unwrap();
            let total: usize = roots.iter().map(|(_, m)| m).sum();
            assert_eq!(total, deg);
            // In-field roots agree with a scan of F_9.
            let mut scan = Vec::new();
            for cand in t.enumerate_level(2).unwrap() {
                if t.is_zero(&fqpoly::eval(&t, &f, &cand).unwrap()) {
                    scan.push(cand);
                }
            }
            let mut in_field: Vec<FqElem> = roots
                .iter()
                .filter(|(r, _)| {
                    r.level() % 2 == 0 && t.is_in_subfield(r, 2).unwrap_or(false)
                })
                .map(|(r, _)| {
                    // project back for comparison by embedding scan upward
                    r.clone()
                })
                .collect();
            in_field.sort_by(|a, b| a.lex_key().cmp(&b.lex_key()));
            let mut scan_up = Vec::new();
            for s in scan {
                let lvl = in_field.first().map(|r| r.level()).unwrap_or(2);
                scan_up.push(t.embed(&s, lvl).unwrap());
            }
            scan_up.sort_by(|a, b| a.lex_key().cmp(&b.lex_key()));
            assert_eq!(in_field, scan_up);
        }
    }

    #[test]
    fn embeddings_are_multiplicative_and_injective() {
        let t = tower(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        t.ensure_level(4).unwrap();
        for _ in 0..200 {
            let a = t.random_element(2, &mut rng).unwrap();
            let b = t.random_element(2, &mut rng).unwrap();
            let ea = t.embed(&a, 4).unwrap();
            let eb = t.embed(&b, 4).unwrap();
            let prod = t.mul(&a, &b).unwrap();
            assert_eq!(t.embed(&prod, 4).unwrap(), t.mul(&ea, &eb).unwrap());
            let sum = t.add(&a, &b).unwrap();
            assert_eq!(t.embed(&sum, 4).unwrap(), t.add(&ea, &eb).unwrap());
            if a != b {
                assert_ne!(ea, eb);
            }
        }
    }

    #[test]
    fn embeddings_commute_across_lattice() {
        // Star pattern with a join: 2 -> 4, 2 -> 6, then 12 from both sides.
        let t = tower(2);
        for d in [2u32, 4, 6] {
            t.ensure_level(d).unwrap();
        }
        let g2 = t.generator(2).unwrap();
        let via4 = {
            let in4 = t.embed(&g2, 4).unwrap();
            t.embed(&in4, 12).unwrap()
        };
        let via6 = {
            let in6 = t.embed(&g2, 6).unwrap();
            t.embed(&in6, 12).unwrap()
        };
        let direct = t.embed(&g2, 12).unwrap();
        assert_eq!(via4, direct);
        assert_eq!(via6, direct);
    }

    #[test]
    fn minimal_level_detection() {
        let t = tower(2);
        let g = t.generator(2).unwrap();
        let up = t.embed(&g, 4).unwrap();
        assert_eq!(t.minimal_level(&up), 2);
        let c = t.embed(&t.constant(1), 4).unwrap();
        assert_eq!(t.minimal_level(&c), 1);
    }
}
