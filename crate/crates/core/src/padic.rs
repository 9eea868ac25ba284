//! Mixed-characteristic series: expansions in rational powers of `p` with
//! Teichmüller digits, and root-finding for polynomials over them.
//!
//! The equal-characteristic solver works verbatim over a coefficient ring of
//! truncated Witt vectors (Galois rings): a series `sum_q c_q p^q` with
//! `c_q` in `W_m(F_{p^d})` plays the role of a power series in `t`, except
//! that coefficients interact across exponents — `p * [1] p^q` *is*
//! `[1] p^{q+1}` — so every arithmetic result is pushed through a digit
//! carry cascade before anything inspects it. The canonical form has one
//! nonzero residue-field digit per exponent (stored as its Teichmüller
//! lift), and the cascade tightens precision honestly: a coefficient known
//! modulo `p^m` at exponent `q` says nothing about exponents `>= q + m`.
//!
//! [`DigitSeries`] is the user-facing form: plain `(exponent, digit)` pairs
//! in the residue field plus an absolute precision. [`solve_over_witt`]
//! lifts polynomial coefficients into the working ring, runs the polygon
//! solver, and returns digit expansions together with substitution
//! certificates (the valuation of the polynomial evaluated at the reported
//! partial sum, taken literally as a finite exact sum).

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::exponent::{Exp, Valuation};
use crate::galois::{GaloisTower, GrElem};
use crate::gfield::{FieldTower, FqElem};
use crate::hahn::{hs_add, hs_mul, HahnSeries, NewtonRing, SeriesRing};
use crate::newton::{root_certificate, solve_roots};

// ---------------------------------------------------------------------------
// The Witt-coefficient series ring.
// ---------------------------------------------------------------------------

/// Series coefficient ring `W_m(F_{p^level})` at a fixed working precision.
///
/// `level` and `m` describe where freshly created constants live; arithmetic
/// on elements from different levels or depths unifies on the fly (largest
/// common level, smallest depth), so mixing is safe and stays honest.
#[derive(Clone)]
pub struct GrRing {
    witt: GaloisTower,
    level: u32,
    m: u32,
}

impl GrRing {
    pub fn new(witt: GaloisTower, level: u32, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput(
                "working depth must be at least one digit".into(),
            ));
        }
        witt.field().ensure_level(level)?;
        // Validates that p^m fits the fixed-width coefficient arithmetic.
        witt.zero(level, m)?;
        Ok(GrRing { witt, level, m })
    }

    pub fn witt(&self) -> &GaloisTower {
        &self.witt
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Digits of working precision carried by ring constants.
    pub fn working_m(&self) -> u32 {
        self.m
    }
}

impl std::fmt::Debug for GrRing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "GrRing(p={}, level={}, m={})",
            self.witt.p(),
            self.level,
            self.m
        )
    }
}

impl SeriesRing for GrRing {
    type Elem = GrElem;

    fn zero(&self) -> GrElem {
        self.witt
            .zero(self.level, self.m)
            .expect("ring parameters validated at construction")
    }

    fn one(&self) -> GrElem {
        self.witt
            .one(self.level, self.m)
            .expect("ring parameters validated at construction")
    }

    fn is_zero(&self, x: &GrElem) -> bool {
        self.witt.is_zero(x)
    }

    fn add(&self, x: &GrElem, y: &GrElem) -> Result<GrElem> {
        self.witt.add(x, y)
    }

    fn neg(&self, x: &GrElem) -> Result<GrElem> {
        self.witt.neg(x)
    }

    fn mul(&self, x: &GrElem, y: &GrElem) -> Result<GrElem> {
        self.witt.mul(x, y)
    }

    fn inv(&self, x: &GrElem) -> Result<GrElem> {
        self.witt.inv(x)
    }

    fn is_unit(&self, x: &GrElem) -> bool {
        self.witt.is_unit(x)
    }

    fn eq_elem(&self, x: &GrElem, y: &GrElem) -> Result<bool> {
        self.witt.eq(x, y)
    }

    fn from_biguint(&self, n: &BigUint) -> Result<GrElem> {
        let modulus = BigUint::from(self.witt.p()).pow(self.m);
        let r = n % &modulus;
        let c = r.to_u64_digits().first().copied().unwrap_or(0);
        self.witt.constant(c, self.m)
    }
}

impl NewtonRing for GrRing {
    fn residue_tower(&self) -> &FieldTower {
        self.witt.field()
    }

    fn residue(&self, x: &GrElem) -> Result<FqElem> {
        self.witt.residue(x)
    }

    fn lift_residue(&self, x: &FqElem) -> Result<GrElem> {
        self.witt.teichmuller(x, self.m)
    }

    /// The digit carry cascade.
    ///
    /// Pops terms in exponent order; at each exponent the combined
    /// coefficient's residue digit is emitted (as a Teichmüller lift) and
    /// the remainder, exactly divisible by `p`, is carried one exponent up
    /// with one less digit of depth. The precision is first capped at
    /// `min_i (q_i + m_i)` over the input terms — the cascade can never
    /// reveal digits past the point where some input coefficient runs out —
    /// which also makes the pass idempotent: re-running it on a canonical
    /// series leaves terms and precision unchanged.
    fn canonicalize(&self, s: HahnSeries<Self>) -> Result<HahnSeries<Self>> {
        if s.is_exact_zero() {
            return Ok(s);
        }
        let mut prec = s.prec().cloned();
        for (q, c) in s.terms() {
            let cap = q + &Exp::from_int(c.m() as i64);
            prec = Some(match prec {
                Some(p) => p.min(cap),
                None => cap,
            });
        }
        let mut queue: BTreeMap<Exp, Vec<GrElem>> = BTreeMap::new();
        for (q, c) in s.terms() {
            queue.entry(q.clone()).or_default().push(c.clone());
        }
        let mut out: Vec<(Exp, GrElem)> = Vec::new();
        while let Some((q, parts)) = queue.pop_first() {
            if let Some(p) = &prec {
                if &q >= p {
                    break;
                }
            }
            let mut acc = parts[0].clone();
            for c in &parts[1..] {
                acc = self.witt.add(&acc, c)?;
            }
            if self.witt.is_zero(&acc) {
                continue;
            }
            let digit = self.witt.residue(&acc)?;
            let rem = if self.witt.field().is_zero(&digit) {
                acc
            } else {
                out.push((q.clone(), self.witt.teichmuller(&digit, self.m)?));
                let t = self.witt.teichmuller(&digit, acc.m())?;
                self.witt.sub(&acc, &t)?
            };
            if rem.m() > 1 {
                let carry = self.witt.div_by_p_exact(&rem)?;
                if !self.witt.is_zero(&carry) {
                    queue.entry(&q + &Exp::one()).or_default().push(carry);
                }
            }
        }
        HahnSeries::new(self, out, prec)
    }
}

// ---------------------------------------------------------------------------
// Digit expansions.
// ---------------------------------------------------------------------------

/// A mixed-characteristic series in reduced form: residue-field digits at
/// strictly increasing rational exponents of `p`, with digits at exponents
/// `>= prec` unknown.
#[derive(Clone, Debug)]
pub struct DigitSeries {
    terms: Vec<(Exp, FqElem)>,
    prec: Exp,
}

impl DigitSeries {
    /// Builds a digit series; terms may arrive unsorted, zero digits and
    /// terms at or past the precision are dropped, duplicate exponents are
    /// rejected.
    pub fn new(field: &FieldTower, terms: Vec<(Exp, FqElem)>, prec: Exp) -> Result<Self> {
        let mut kept: Vec<(Exp, FqElem)> = Vec::with_capacity(terms.len());
        for (q, d) in terms {
            if field.is_zero(&d) || q >= prec {
                continue;
            }
            kept.push((q, d));
        }
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        for w in kept.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidInput(format!(
                    "duplicate digit exponent {}",
                    w[0].0
                )));
            }
        }
        Ok(DigitSeries { terms: kept, prec })
    }

    pub fn zero(prec: Exp) -> Self {
        DigitSeries {
            terms: Vec::new(),
            prec,
        }
    }

    /// The digit expansion of the integer `n` (at residue level 1), with
    /// digits computed out to `prec`.
    pub fn from_integer(w: &GaloisTower, n: i64, prec: &Exp) -> Result<Self> {
        let depth = exp_ceil_u32(prec)?.max(1) + 1;
        let mut modulus: u64 = 1;
        for _ in 0..depth {
            modulus = modulus.checked_mul(w.p()).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "p^{depth} overflows the coefficient arithmetic for p = {}",
                    w.p()
                ))
            })?;
        }
        let r = (n as i128).rem_euclid(modulus as i128) as u64;
        let c = w.constant(r, depth)?;
        let digits = w.digits(&c)?;
        let terms = digits
            .into_iter()
            .enumerate()
            .map(|(i, d)| (Exp::from_int(i as i64), d))
            .collect();
        DigitSeries::new(w.field(), terms, prec.clone())
    }

    /// A single digit `d * p^q`.
    pub fn from_digit(field: &FieldTower, d: FqElem, q: Exp, prec: Exp) -> Result<Self> {
        DigitSeries::new(field, vec![(q, d)], prec)
    }

    pub fn terms(&self) -> &[(Exp, FqElem)] {
        &self.terms
    }

    pub fn prec(&self) -> &Exp {
        &self.prec
    }

    pub fn is_apparently_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Valuation: the first digit's exponent, or `AtLeast(prec)` when no
    /// digit is visible.
    pub fn v_p(&self) -> Valuation {
        match self.terms.first() {
            Some((q, _)) => Valuation::Finite(q.clone()),
            None => Valuation::AtLeast(self.prec.clone()),
        }
    }

    /// The exponents carrying nonzero digits.
    pub fn support(&self) -> Vec<Exp> {
        self.terms.iter().map(|(q, _)| q.clone()).collect()
    }

    pub fn truncate(&self, new_prec: &Exp) -> DigitSeries {
        let prec = self.prec.clone().min(new_prec.clone());
        DigitSeries {
            terms: self
                .terms
                .iter()
                .filter(|(q, _)| q < &prec)
                .cloned()
                .collect(),
            prec,
        }
    }

    /// Equality of the visible digits up to the smaller precision.
    pub fn eq(field: &FieldTower, a: &DigitSeries, b: &DigitSeries) -> Result<bool> {
        let prec = a.prec.clone().min(b.prec.clone());
        let ta: Vec<_> = a.terms.iter().filter(|(q, _)| q < &prec).collect();
        let tb: Vec<_> = b.terms.iter().filter(|(q, _)| q < &prec).collect();
        if ta.len() != tb.len() {
            return Ok(false);
        }
        for ((qa, da), (qb, db)) in ta.iter().zip(tb.iter()) {
            if qa != qb || !field.eq(da, db)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Lifts into the working ring: each digit becomes its Teichmüller
    /// representative at the ring's level and depth.
    pub fn to_hahn(&self, ring: &GrRing) -> Result<HahnSeries<GrRing>> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (q, d) in &self.terms {
            let up = ring.witt().field().embed(d, ring.level())?;
            terms.push((q.clone(), ring.witt().teichmuller(&up, ring.working_m())?));
        }
        HahnSeries::new(ring, terms, Some(self.prec.clone()))
    }

    /// Lifts the visible digits as an *exact* finite sum (no precision cap),
    /// for literal evaluation such as root certificates.
    fn to_hahn_exact(&self, ring: &GrRing) -> Result<HahnSeries<GrRing>> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (q, d) in &self.terms {
            let up = ring.witt().field().embed(d, ring.level())?;
            terms.push((q.clone(), ring.witt().teichmuller(&up, ring.working_m())?));
        }
        HahnSeries::new(ring, terms, None)
    }
}

/// Reads the digits off a canonical series (as produced by
/// [`NewtonRing::canonicalize`] on a [`GrRing`]).
fn digits_from_canonical(
    w: &GaloisTower,
    s: &HahnSeries<GrRing>,
    fallback_prec: &Exp,
) -> Result<DigitSeries> {
    let mut terms = Vec::with_capacity(s.terms().len());
    for (q, c) in s.terms() {
        terms.push((q.clone(), w.residue(c)?));
    }
    let prec = s.prec().cloned().unwrap_or_else(|| fallback_prec.clone());
    DigitSeries::new(w.field(), terms, prec)
}

/// Reduces raw `(exponent, coefficient)` data to a digit series out to
/// `prec`, running the carry cascade. Refuses negative exponents and inputs
/// whose coefficient depth cannot support the requested precision
/// (`q + m < prec` would silently fabricate unknown digits).
pub fn normalize(w: &GaloisTower, raw: &[(Exp, GrElem)], prec: &Exp) -> Result<DigitSeries> {
    let mut max_m = 2u32;
    let mut level = 1u32;
    for (q, c) in raw {
        if q.is_negative() {
            return Err(Error::InvalidInput(format!(
                "digit exponents must be nonnegative, got {q}"
            )));
        }
        let cap = q + &Exp::from_int(c.m() as i64);
        if &cap < prec {
            return Err(Error::PrecisionTooLow(format!(
                "coefficient at p^{q} is known only modulo p^{}, too shallow for O(p^{prec})",
                c.m()
            )));
        }
        max_m = max_m.max(c.m());
        level = lcm_u32(level, c.level());
    }
    let ring = GrRing::new(w.clone(), level, max_m)?;
    let series = HahnSeries::new(
        &ring,
        raw.to_vec(),
        Some(prec.clone()),
    )?;
    let canonical = ring.canonicalize(series)?;
    digits_from_canonical(w, &canonical, prec)
}

fn lcm_u32(a: u32, b: u32) -> u32 {
    (a as u64).lcm(&(b as u64)) as u32
}

fn exp_ceil_u32(e: &Exp) -> Result<u32> {
    let c = e.ceil_int();
    c.to_i64()
        .filter(|v| *v >= 0 && *v <= u32::MAX as i64)
        .map(|v| v as u32)
        .ok_or_else(|| Error::InvalidInput(format!("exponent {e} out of range")))
}

/// Builds the arithmetic scaffolding for combining digit series: a ring
/// whose depth covers the span from the lowest participating exponent out
/// to the target precision, at the common residue level.
fn combining_ring(w: &GaloisTower, inputs: &[&DigitSeries], span_hint: &Exp) -> Result<GrRing> {
    let mut level = 1u32;
    for d in inputs {
        for (_, digit) in d.terms() {
            level = lcm_u32(level, digit.level());
        }
    }
    let m = exp_ceil_u32(&span_hint.clone().max(Exp::zero()))? + 2;
    GrRing::new(w.clone(), level, m)
}

/// Sum of digit series; the precision is the minimum of the operands'.
pub fn ds_add(w: &GaloisTower, a: &DigitSeries, b: &DigitSeries) -> Result<DigitSeries> {
    let prec = a.prec.clone().min(b.prec.clone());
    let mut low = prec.clone();
    for d in [a, b] {
        if let Some((q, _)) = d.terms().first() {
            low = low.min(q.clone());
        }
    }
    let span = &prec - &low;
    let ring = combining_ring(w, &[a, b], &span)?;
    let sum = hs_add(&ring, &a.to_hahn(&ring)?, &b.to_hahn(&ring)?)?;
    let canonical = ring.canonicalize(sum)?;
    digits_from_canonical(w, &canonical, &prec)
}

/// Product of digit series; precision follows the series product rule
/// `min(prec_a + v(b), prec_b + v(a))`.
pub fn ds_mul(w: &GaloisTower, a: &DigitSeries, b: &DigitSeries) -> Result<DigitSeries> {
    // Depth must cover how far each factor's digits reach past its own
    // valuation.
    let reach = |d: &DigitSeries| -> Exp {
        match d.terms().first() {
            Some((q, _)) => d.prec() - q,
            None => Exp::zero(),
        }
    };
    let span = reach(a).max(reach(b));
    let ring = combining_ring(w, &[a, b], &span)?;
    let prod = hs_mul(&ring, &a.to_hahn(&ring)?, &b.to_hahn(&ring)?)?;
    let fallback = a.prec().min(b.prec()).clone();
    let canonical = ring.canonicalize(prod)?;
    digits_from_canonical(w, &canonical, &fallback)
}

// ---------------------------------------------------------------------------
// Root-finding over the mixed-characteristic series field.
// ---------------------------------------------------------------------------

/// One root of a polynomial over the mixed-characteristic series field.
#[derive(Clone, Debug)]
pub struct MixedRoot {
    /// The digit expansion found (truncated at the target or at the point
    /// where the search stopped).
    pub digits: DigitSeries,
    /// How far the expansion is certified: `Finite(s)` when the search
    /// stopped at slope `s`, `AtLeast(b)` when the remaining polynomial
    /// vanished to precision.
    pub slope_reached: Valuation,
    pub multiplicity: u64,
    /// True when the step budget or coefficient precision ran out before
    /// the target.
    pub exhausted: bool,
    /// Valuation of the polynomial evaluated at the visible digits taken
    /// literally as a finite exact sum: `None` means the evaluation is
    /// exactly zero, `Some(v)` certifies `v_p(P(partial sum)) >= v`
    /// (or equals, when finite).
    pub certificate: Option<Valuation>,
}

/// Result of [`solve_over_witt`].
#[derive(Clone, Debug)]
pub struct MixedSolveReport {
    pub roots: Vec<MixedRoot>,
    pub steps_used: u64,
    pub any_exhausted: bool,
    /// Coefficient depth the solve ran at.
    pub working_m: u32,
}

impl MixedSolveReport {
    pub fn total_multiplicity(&self) -> u64 {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// Finds the roots of a polynomial with digit-series coefficients
/// (leading coefficient first), reporting each expansion out to `target`.
///
/// The working coefficient depth is chosen from the polygon data: enough
/// digits to cover the span from the lowest exponent in play out to the
/// target plus the polygon's total rise, with two guard digits. For large
/// targets this can exceed what the fixed-width coefficient arithmetic
/// supports, which is reported as an error rather than silently truncated.
pub fn solve_over_witt(
    w: &GaloisTower,
    poly: &[DigitSeries],
    target: &Exp,
    max_steps: u32,
) -> Result<MixedSolveReport> {
    if poly.len() < 2 {
        return Err(Error::InvalidInput(
            "polynomial must have positive degree".into(),
        ));
    }
    if poly[0].is_apparently_zero() {
        return Err(Error::InvalidInput(
            "leading coefficient has no visible digit".into(),
        ));
    }
    let mut vmin: Option<Exp> = None;
    let mut vmax: Option<Exp> = None;
    let mut level = 1u32;
    for c in poly {
        for (_, d) in c.terms() {
            level = lcm_u32(level, d.level());
        }
        if let Valuation::Finite(v) = c.v_p() {
            vmin = Some(match vmin {
                Some(cur) => cur.min(v.clone()),
                None => v.clone(),
            });
            vmax = Some(match vmax {
                Some(cur) => cur.max(v),
                None => v,
            });
        }
    }
    let vmin = vmin.unwrap_or_else(Exp::zero);
    let vmax = vmax.unwrap_or_else(Exp::zero);
    let rise = (&vmax - &vmin).max(Exp::zero());
    let low = vmin.min(Exp::zero());
    let span = &(target - &low) + &rise;
    let m = exp_ceil_u32(&span.max(Exp::zero()))? + 2;
    let ring = GrRing::new(w.clone(), level, m)?;
    let coeffs: Vec<HahnSeries<GrRing>> = poly
        .iter()
        .map(|c| c.to_hahn(&ring))
        .collect::<Result<_>>()?;
    let report = solve_roots(&ring, &coeffs, target, max_steps)?;
    let mut roots = Vec::with_capacity(report.roots.len());
    for r in &report.roots {
        let canonical = ring.canonicalize(r.value.clone())?;
        let digits = digits_from_canonical(w, &canonical, target)?;
        // Solving may enlarge the residue field past the coefficients'
        // level; the literal re-evaluation needs a ring covering the root.
        let mut root_level = level;
        for (_, d) in digits.terms() {
            root_level = lcm_u32(root_level, d.level());
        }
        let cert_ring = GrRing::new(w.clone(), root_level, m)?;
        let literal = digits.to_hahn_exact(&cert_ring)?;
        let certificate = root_certificate(&cert_ring, &coeffs, &literal)?;
        roots.push(MixedRoot {
            digits,
            slope_reached: r.slope_reached.clone(),
            multiplicity: r.multiplicity,
            exhausted: r.exhausted,
            certificate,
        });
    }
    Ok(MixedSolveReport {
        roots,
        steps_used: report.steps_used,
        any_exhausted: report.any_exhausted,
        working_m: m,
    })
}

// ---------------------------------------------------------------------------
// Pairing roots across the two characteristics.
// ---------------------------------------------------------------------------

/// An equal-characteristic root for pairing: digit terms plus multiplicity.
pub type SeriesRootEntry = (Vec<(Exp, FqElem)>, u64);

/// One matched slope class from [`lift_root_pair`].
#[derive(Clone, Debug)]
pub struct RootPairing {
    pub slope: Exp,
    /// Number of roots (with multiplicity) in the class, equal on both
    /// sides.
    pub count: u64,
    /// Exponent bound below which each matched pair's expansions were
    /// verified to agree digit by digit.
    pub agreement_bound: Exp,
}

/// Pairs the roots of an equal-characteristic polynomial with the roots of
/// a mixed-characteristic polynomial whose coefficients agree to digit
/// depth `k` above the shared polygon.
///
/// Slope classes must match in size exactly; within the class of slope `s`
/// and total count `q`, each pair is required to agree at all exponents
/// below `s + k/q`. Roots enter with their multiplicity. Returns the
/// matched classes, or an error naming the first slope where the pairing
/// breaks down.
pub fn lift_root_pair(
    field: &FieldTower,
    series_roots: &[SeriesRootEntry],
    witt_roots: &[(DigitSeries, u64)],
    k: &Exp,
) -> Result<Vec<RootPairing>> {
    let total = |xs: &[u64]| xs.iter().sum::<u64>();
    let series_total = total(&series_roots.iter().map(|r| r.1).collect::<Vec<_>>());
    let witt_total = total(&witt_roots.iter().map(|r| r.1).collect::<Vec<_>>());
    if series_total != witt_total {
        return Err(Error::NotApplicable(format!(
            "root counts differ: {series_total} in equal characteristic vs {witt_total} in mixed"
        )));
    }
    if series_total > 64 {
        return Err(Error::InvalidInput(
            "pairing supports at most 64 roots with multiplicity".into(),
        ));
    }

    // Group both sides by slope (the leading exponent; expansions with no
    // visible digit cannot be paired meaningfully).
    let slope_of_terms = |terms: &[(Exp, FqElem)]| -> Result<Exp> {
        terms.first().map(|(q, _)| q.clone()).ok_or_else(|| {
            Error::NotApplicable("cannot pair a root with no visible digit".into())
        })
    };
    let mut series_by_slope: BTreeMap<Exp, Vec<&SeriesRootEntry>> = BTreeMap::new();
    for r in series_roots {
        series_by_slope
            .entry(slope_of_terms(&r.0)?)
            .or_default()
            .push(r);
    }
    let mut witt_by_slope: BTreeMap<Exp, Vec<&(DigitSeries, u64)>> = BTreeMap::new();
    for r in witt_roots {
        witt_by_slope
            .entry(slope_of_terms(r.0.terms())?)
            .or_default()
            .push(r);
    }

    let series_slopes: Vec<&Exp> = series_by_slope.keys().collect();
    let witt_slopes: Vec<&Exp> = witt_by_slope.keys().collect();
    if series_slopes != witt_slopes {
        return Err(Error::NotApplicable(
            "the two root sets have different slope supports; the polygons disagree".into(),
        ));
    }

    let mut pairings = Vec::new();
    for (slope, sclass) in &series_by_slope {
        let wclass = &witt_by_slope[slope];
        let scount: u64 = sclass.iter().map(|r| r.1).sum();
        let wcount: u64 = wclass.iter().map(|r| r.1).sum();
        if scount != wcount {
            return Err(Error::NotApplicable(format!(
                "slope {slope} carries {scount} roots in equal characteristic but {wcount} in mixed"
            )));
        }
        let bound = slope + &k.div_int(scount as i64);

        // Expand multiplicities into unit slots and match greedily; digit
        // agreement below a fixed bound is an equivalence, so greedy
        // matching within the class is exact.
        let agrees = |a: &[(Exp, FqElem)], b: &[(Exp, FqElem)]| -> Result<bool> {
            let va: Vec<&(Exp, FqElem)> = a.iter().filter(|(q, _)| q < &bound).collect();
            let vb: Vec<&(Exp, FqElem)> = b.iter().filter(|(q, _)| q < &bound).collect();
            if va.len() != vb.len() {
                return Ok(false);
            }
            for ((qa, da), (qb, db)) in va.iter().zip(vb.iter()) {
                if qa != qb || !field.eq(da, db)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };

        let mut series_slots: Vec<&[(Exp, FqElem)]> = Vec::new();
        for (terms, mult) in sclass.iter() {
            for _ in 0..*mult {
                series_slots.push(terms);
            }
        }
        let mut used = vec![false; series_slots.len()];
        for (ds, mult) in wclass.iter() {
            for _ in 0..*mult {
                let mut matched = false;
                for (i, cand) in series_slots.iter().enumerate() {
                    if used[i] {
                        continue;
                    }
                    if agrees(ds.terms(), cand)? {
                        used[i] = true;
                        matched = true;
                        break;
                    }
                }
                if !matched {
                    return Err(Error::NotApplicable(format!(
                        "no equal-characteristic partner agrees with a mixed root of slope {slope} below {bound}"
                    )));
                }
            }
        }
        pairings.push(RootPairing {
            slope: (*slope).clone(),
            count: scount,
            agreement_bound: bound,
        });
    }
    Ok(pairings)
}

// ---------------------------------------------------------------------------
// The degree-p experiment.
// ---------------------------------------------------------------------------

/// Coefficients (leading first) of `x^p - p^{p-1} x - p^{p-1}`, the
/// classical degree-`p` polynomial whose series-field root has unbounded
/// digit support. Precision is chosen to support a solve out to `target`.
pub fn lampert_polynomial(w: &GaloisTower, target: &Exp) -> Result<Vec<DigitSeries>> {
    let p = w.p();
    let exponent = p - 1;
    let mut c: u64 = 1;
    for _ in 0..exponent {
        c = c.checked_mul(p).ok_or_else(|| {
            Error::InvalidInput(format!("p^{exponent} overflows for p = {p}"))
        })?;
    }
    let c = i64::try_from(c).map_err(|_| {
        Error::InvalidInput(format!("p^{exponent} too large for the experiment (p = {p})"))
    })?;
    let rise = Exp::from_int(exponent as i64);
    let prec = &(target + &rise) + &Exp::one();
    let mut poly = Vec::with_capacity(p as usize + 1);
    poly.push(DigitSeries::from_integer(w, 1, &prec)?);
    for _ in 0..p.saturating_sub(2) {
        poly.push(DigitSeries::zero(prec.clone()));
    }
    poly.push(DigitSeries::from_integer(w, -c, &prec)?);
    poly.push(DigitSeries::from_integer(w, -c, &prec)?);
    Ok(poly)
}

/// Runs the degree-`p` experiment: solves `x^p - p^{p-1} x - p^{p-1} = 0`
/// over the mixed-characteristic series field out to `target`. The digit
/// supports of the reported roots are the observational payload; the
/// expansions do not terminate, so expect `any_exhausted` once the target
/// passes the reachable depth.
pub fn lampert_experiment(
    w: &GaloisTower,
    target: &Exp,
    max_steps: u32,
) -> Result<MixedSolveReport> {
    let poly = lampert_polynomial(w, target)?;
    solve_over_witt(w, &poly, target, max_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfield::FieldTower;

    fn witt(p: u64) -> GaloisTower {
        GaloisTower::new(FieldTower::new(p, 17).unwrap())
    }

    fn e(n: i64, d: i64) -> Exp {
        Exp::new(n, d)
    }

    fn digit_pairs(w: &GaloisTower, d: &DigitSeries) -> Vec<(Exp, u64)> {
        d.terms()
            .iter()
            .map(|(q, c)| {
                assert_eq!(w.field().minimal_level(c), 1, "expected prime-field digit");
                let down = c.coeffs().first().copied().unwrap_or(0);
                (q.clone(), down)
            })
            .collect()
    }

    #[test]
    fn carry_cascade_reduces_integers_to_digits() {
        let w = witt(2);
        let raw = vec![(Exp::zero(), w.constant(3, 4).unwrap())];
        let d = normalize(&w, &raw, &e(3, 1)).unwrap();
        assert_eq!(digit_pairs(&w, &d), vec![(e(0, 1), 1), (e(1, 1), 1)]);

        let raw = vec![(Exp::zero(), w.constant(7, 4).unwrap())];
        let d = normalize(&w, &raw, &e(3, 1)).unwrap();
        assert_eq!(
            digit_pairs(&w, &d),
            vec![(e(0, 1), 1), (e(1, 1), 1), (e(2, 1), 1)]
        );
    }

    #[test]
    fn carry_cascade_annihilates_p_shifts() {
        // p * [1] p^0 and -[1] p^1 describe the same mass; their sum is zero.
        let w = witt(2);
        let minus_one = w.neg(&w.one(1, 4).unwrap()).unwrap();
        let raw = vec![
            (Exp::zero(), w.constant(2, 4).unwrap()),
            (Exp::one(), minus_one),
        ];
        let d = normalize(&w, &raw, &e(3, 1)).unwrap();
        assert!(d.is_apparently_zero());
        assert_eq!(d.prec(), &e(3, 1));
    }

    #[test]
    fn normalize_guards_inputs() {
        let w = witt(2);
        // Too-shallow coefficient: 2 digits cannot support 5 digits of output.
        let raw = vec![(Exp::zero(), w.constant(3, 2).unwrap())];
        match normalize(&w, &raw, &e(5, 1)) {
            Err(Error::PrecisionTooLow(_)) => {}
            other => panic!("expected precision error, got {other:?}"),
        }
        // Negative exponents are not digit positions.
        let raw = vec![(e(-1, 1), w.constant(1, 4).unwrap())];
        match normalize(&w, &raw, &e(2, 1)) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected invalid input, got {other:?}"),
        }
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let w = witt(3);
        let ring = GrRing::new(w.clone(), 2, 5).unwrap();
        // A messy pile: overlapping exponents, mixed depths.
        let s = HahnSeries::new(
            &ring,
            vec![
                (e(0, 1), w.constant(7, 5).unwrap()),
                (e(0, 1), w.constant(11, 4).unwrap()),
                (e(1, 2), w.constant(5, 5).unwrap()),
                (e(3, 2), w.constant(8, 3).unwrap()),
            ],
            None,
        )
        .unwrap();
        let once = ring.canonicalize(s).unwrap();
        let twice = ring.canonicalize(once.clone()).unwrap();
        assert_eq!(once.prec(), twice.prec());
        assert_eq!(once.terms().len(), twice.terms().len());
        for ((qa, ca), (qb, cb)) in once.terms().iter().zip(twice.terms()) {
            assert_eq!(qa, qb);
            assert!(w.eq(ca, cb).unwrap());
        }
        // Every canonical coefficient is a Teichmüller digit.
        for (_, c) in once.terms() {
            let d = w.residue(c).unwrap();
            let t = w.teichmuller(&d, c.m()).unwrap();
            assert!(w.eq(c, &t).unwrap());
        }
    }

    #[test]
    fn digit_arithmetic_matches_integer_arithmetic() {
        for p in [2u64, 3, 5] {
            let w = witt(p);
            let prec = e(6, 1);
            let a = DigitSeries::from_integer(&w, 29, &prec).unwrap();
            let b = DigitSeries::from_integer(&w, 13, &prec).unwrap();
            let sum = ds_add(&w, &a, &b).unwrap();
            let expect = DigitSeries::from_integer(&w, 42, &sum.prec().clone()).unwrap();
            assert!(DigitSeries::eq(w.field(), &sum, &expect).unwrap());
            let prod = ds_mul(&w, &a, &b).unwrap();
            let expect = DigitSeries::from_integer(&w, 29 * 13, &prod.prec().clone()).unwrap();
            assert!(DigitSeries::eq(w.field(), &prod, &expect).unwrap());
        }
    }

    #[test]
    fn fractional_exponents_carry_along_their_own_ladder() {
        // ([1]p^{1/2} + [1]p^{3/2})^2 = p + 2p^2 + p^3: integral exponents,
        // digits of 1 + 2*2 + 2^2... computed over p = 2: p(1+p)^2 = p + 2p^2 + p^3
        // = 2 + 8 + 8 = 18 = 2 + 16: digits at 1 and 4.
        let w = witt(2);
        let prec = e(6, 1);
        let one = w.field().constant(1);
        let a = DigitSeries::new(
            w.field(),
            vec![(e(1, 2), one.clone()), (e(3, 2), one)],
            prec,
        )
        .unwrap();
        let sq = ds_mul(&w, &a, &a).unwrap();
        let expect = DigitSeries::from_integer(&w, 18, &sq.prec().clone()).unwrap();
        assert!(DigitSeries::eq(w.field(), &sq, &expect).unwrap());
    }

    #[test]
    fn square_root_of_p_splits_exactly() {
        // x^2 - p over p = 2: one root is [1]p^{1/2} on the nose, the other
        // is its negative, whose digit tail is all ones (the expansion of -1
        // shifted to half-integer exponents).
        let w = witt(2);
        let target = e(4, 1);
        let prec = e(6, 1);
        let poly = vec![
            DigitSeries::from_integer(&w, 1, &prec).unwrap(),
            DigitSeries::zero(prec.clone()),
            DigitSeries::from_integer(&w, -2, &prec).unwrap(),
        ];
        let rep = solve_over_witt(&w, &poly, &target, 32).unwrap();
        assert_eq!(rep.total_multiplicity(), 2);
        assert!(!rep.any_exhausted);
        assert_eq!(rep.roots.len(), 2);

        let short: Vec<_> = rep.roots.iter().filter(|r| r.digits.terms().len() == 1).collect();
        let long: Vec<_> = rep.roots.iter().filter(|r| r.digits.terms().len() == 4).collect();
        assert_eq!(short.len(), 1, "one exact square root");
        assert_eq!(long.len(), 1, "one all-ones conjugate");
        assert_eq!(digit_pairs(&w, &short[0].digits), vec![(e(1, 2), 1)]);
        assert_eq!(
            digit_pairs(&w, &long[0].digits),
            vec![(e(1, 2), 1), (e(3, 2), 1), (e(5, 2), 1), (e(7, 2), 1)]
        );
        // Substitution certificates clear the target for both expansions.
        for r in &rep.roots {
            match &r.certificate {
                None => {}
                Some(v) => assert!(
                    v.bound() >= &target,
                    "certificate {v:?} below target for {:?}",
                    digit_pairs(&w, &r.digits)
                ),
            }
        }
    }

    #[test]
    fn square_root_of_three_exhausts_with_accumulating_support() {
        // x^2 - 3 over p = 2: the slope sequence 1/2, 3/4, 7/8, ... creeps
        // toward 1 and never reaches it, so the digit support accumulates
        // below exponent 1 and the solve must report exhaustion. The two
        // square roots agree below exponent 3/2, so the branch is still
        // carrying multiplicity 2 when it stops.
        let w = witt(2);
        let target = e(2, 1);
        let rep = solve_over_witt(
            &w,
            &[
                DigitSeries::from_integer(&w, 1, &e(3, 1)).unwrap(),
                DigitSeries::zero(e(3, 1)),
                DigitSeries::from_integer(&w, -3, &e(3, 1)).unwrap(),
            ],
            &target,
            40,
        )
        .unwrap();
        assert!(rep.any_exhausted);
        assert_eq!(rep.roots.len(), 1);
        let root = &rep.roots[0];
        assert_eq!(root.multiplicity, 2);
        assert!(root.exhausted);
        assert!(root.slope_reached.bound() < &e(1, 1));
        let support = root.digits.support();
        assert!(support.len() >= 3);
        assert_eq!(&support[..3], &[e(0, 1), e(1, 2), e(3, 4)]);
        // The partial sum squares to 3 up to at least p^1: the literal
        // substitution confirms every reported digit.
        let cert = root.certificate.as_ref().expect("finite evaluation");
        assert!(cert.bound() >= &e(1, 1), "certificate too weak: {cert:?}");
        assert!(cert.bound() > root.slope_reached.bound());
    }

    #[test]
    fn linear_polynomial_reads_off_its_constant() {
        let w = witt(3);
        let target = e(5, 1);
        let prec = e(6, 1);
        let c = DigitSeries::from_integer(&w, 11, &prec).unwrap();
        // x - 11: coefficients leading-first are [1, -11].
        let neg = DigitSeries::from_integer(&w, -11, &prec).unwrap();
        let poly = vec![DigitSeries::from_integer(&w, 1, &prec).unwrap(), neg];
        let rep = solve_over_witt(&w, &poly, &target, 16).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert!(!rep.roots[0].exhausted);
        assert!(DigitSeries::eq(w.field(), &rep.roots[0].digits, &c.truncate(&target)).unwrap());
        // Multiplicative digits are not positional ones: tau(2) = -1 in Z_3,
        // so 11 = tau(2) + tau(1)*3 + tau(1)*9 = -1 + 3 + 9.
        assert_eq!(
            digit_pairs(&w, &rep.roots[0].digits),
            vec![(e(0, 1), 2), (e(1, 1), 1), (e(2, 1), 1)]
        );
    }

    #[test]
    fn pairing_square_roots_across_characteristics() {
        use crate::hahn::FqRing;
        use crate::newton::solve_roots as solve_series;

        // Equal characteristic: x^2 - t over F_2((t^Q)) has the single root
        // t^{1/2} with multiplicity 2 (inseparable square).
        let field = FieldTower::new(2, 11).unwrap();
        let fq = FqRing::new(field.clone());
        let one = HahnSeries::constant(&fq, field.constant(1));
        let minus_t = HahnSeries::monomial(&fq, field.constant(1), e(1, 1), None);
        let spoly = vec![one, HahnSeries::zero(None), minus_t];
        let sreport = solve_series(&fq, &spoly, &e(4, 1), 16).unwrap();
        let series_roots: Vec<(Vec<(Exp, FqElem)>, u64)> = sreport
            .roots
            .iter()
            .map(|r| (r.value.terms().to_vec(), r.multiplicity))
            .collect();

        // Mixed characteristic: x^2 - p over the same residue field.
        let w = GaloisTower::new(field.clone());
        let prec = e(6, 1);
        let wpoly = vec![
            DigitSeries::from_integer(&w, 1, &prec).unwrap(),
            DigitSeries::zero(prec.clone()),
            DigitSeries::from_integer(&w, -2, &prec).unwrap(),
        ];
        let wreport = solve_over_witt(&w, &wpoly, &e(4, 1), 32).unwrap();
        let witt_roots: Vec<(DigitSeries, u64)> = wreport
            .roots
            .iter()
            .map(|r| (r.digits.clone(), r.multiplicity))
            .collect();

        // The constant terms -t and -p share their digit at exponent 1 and
        // differ from exponent 2 on, so the hypothesis depth is k = 1:
        // pairs must agree below 1/2 + 1/2 = 1, and they do.
        let pairings =
            lift_root_pair(&field, &series_roots, &witt_roots, &Exp::one()).unwrap();
        assert_eq!(pairings.len(), 1);
        assert_eq!(pairings[0].slope, e(1, 2));
        assert_eq!(pairings[0].count, 2);
        assert_eq!(pairings[0].agreement_bound, e(1, 1));

        // Claiming depth k = 3 would demand agreement below 2, where the
        // mixed conjugate carries a digit at 3/2 that the series root
        // lacks; the pairing must refuse.
        match lift_root_pair(&field, &series_roots, &witt_roots, &e(3, 1)) {
            Err(Error::NotApplicable(_)) => {}
            other => panic!("expected pairing refusal, got {other:?}"),
        }
    }

    #[test]
    fn degree_p_experiment_reports_creeping_support() {
        // x^2 - 2x - 2 at p = 2: roots 1 ± sqrt(3); the digit supports
        // creep toward exponent 1 and the solve exhausts honestly.
        let w = witt(2);
        let rep = lampert_experiment(&w, &e(2, 1), 48).unwrap();
        assert!(rep.any_exhausted);
        assert_eq!(rep.total_multiplicity(), 2);
        let root = &rep.roots[0];
        let support = root.digits.support();
        assert!(support.len() >= 3);
        // Fractional, strictly increasing exponents with denominators
        // doubling: the hallmark of the creeping expansion.
        for pair in support.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        assert!(support.iter().all(|q| q < &e(1, 1)));
    }

    #[test]
    fn deep_targets_refuse_rather_than_overflow() {
        let w = witt(2);
        let prec = e(80, 1);
        let poly = [DigitSeries::from_integer(&w, 1, &prec),
            DigitSeries::from_integer(&w, -7, &prec)];
        // Even building the coefficients fails: 80 digits of 2 outrun the
        // fixed-width modulus, and the error says so instead of wrapping.
        assert!(poly.iter().any(|c| c.is_err()));
    }
}
