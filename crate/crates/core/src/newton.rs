//! Newton polygons and the slope-descending root solver for polynomials
//! over generalized power series.
//!
//! Polynomials are dense vectors of series coefficients with the *leading*
//! coefficient first: `poly[i]` multiplies `x^{n-i}` where `n = poly.len()-1`.
//! The polygon is the lower convex hull of the points `(i, v(poly[i]))`;
//! its slopes increase left to right, and a segment of slope `s` and
//! horizontal length `q` certifies exactly `q` roots of valuation `s`
//! (counted with multiplicity).
//!
//! The solver walks branches depth-first. Each step picks a polygon segment,
//! solves its residual equation over the residue field (enlarging the field
//! tower as needed), substitutes `x -> x + c t^s`, and keeps only polygon
//! segments of strictly larger slope — those track exactly the roots that
//! agree with the accumulated expansion so far. A branch ends when its
//! slopes pass the target exponent, when the polynomial's trailing
//! coefficients vanish (the expansion is complete to precision), or when the
//! step budget or coefficient precision runs out, in which case the partial
//! expansion is reported with `exhausted` set.

use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};
use crate::exponent::{Exp, Valuation};
use crate::gfield::FqElem;
use crate::hahn::{
    hs_add, hs_mul, hs_scale, hs_truncate, HahnSeries, NewtonRing, SeriesRing,
};

/// One maximal segment of the lower hull.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonSegment {
    pub slope: Exp,
    /// Horizontal length: the number of roots (with multiplicity) whose
    /// valuation equals `slope`.
    pub length: u64,
    /// Left endpoint `(index, valuation)`.
    pub start: (usize, Exp),
    /// Right endpoint.
    pub end: (usize, Exp),
}

/// Lower convex hull of `(i, v(poly[i]))` for visible coefficients.
///
/// Coefficients that are apparently zero contribute no hull point, but a
/// bound lying strictly below the hull inside its horizontal extent means
/// the polygon is not determined by the data, and the computation refuses
/// to guess. Apparently-zero coefficients *trailing* the last visible one
/// are outside the hull's extent: they correspond to roots of high
/// valuation and are the caller's concern (the solver strips them first).
pub fn newton_polygon<R: NewtonRing>(
    ring: &R,
    poly: &[HahnSeries<R>],
) -> Result<Vec<PolygonSegment>> {
    let _ = ring;
    if poly.len() < 2 {
        return Err(Error::InvalidInput(
            "polygon of a constant polynomial".into(),
        ));
    }
    let mut points: Vec<(usize, Exp)> = Vec::new();
    let mut bounds: Vec<(usize, Exp)> = Vec::new();
    for (i, c) in poly.iter().enumerate() {
        match c.val() {
            Some(Valuation::Finite(e)) => points.push((i, e)),
            Some(Valuation::AtLeast(e)) => bounds.push((i, e)),
            None => {}
        }
    }
    if points.is_empty() || points[0].0 != 0 {
        return Err(Error::DegeneratePolygon(
            "leading coefficient has no visible term".into(),
        ));
    }
    let hull = lower_hull(&points);
    // Bound points must not dip below the hull.
    for (i, b) in &bounds {
        if let Some(h) = hull_value_at(&hull, *i) {
            if b < &h {
                return Err(Error::PrecisionTooLow(format!(
                    "coefficient {i} is zero to precision {b}, below the polygon"
                )));
            }
        }
    }
    let mut segs = Vec::new();
    for w in hull.windows(2) {
        let (i0, v0) = &w[0];
        let (i1, v1) = &w[1];
        let run = (i1 - i0) as i64;
        let rise = v1 - v0;
        segs.push(PolygonSegment {
            slope: rise.div_int(run),
            length: run as u64,
            start: (*i0, v0.clone()),
            end: (*i1, v1.clone()),
        });
    }
    Ok(segs)
}

/// Monotone-chain lower hull; input sorted by `i`, one point per index.
/// Collinear middle points are dropped so slopes strictly increase.
fn lower_hull(points: &[(usize, Exp)]) -> Vec<(usize, Exp)> {
    let mut hull: Vec<(usize, Exp)> = Vec::new();
    for p in points {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // Pop b unless slope(a,b) < slope(b,p):
            // (vb - va) * (ip - ib) >= (vp - vb) * (ib - ia)  => pop.
            let lhs = (&b.1 - &a.1).scale((p.0 - b.0) as i64);
            let rhs = (&p.1 - &b.1).scale((b.0 - a.0) as i64);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p.clone());
    }
    hull
}

/// Height of the hull's piecewise-linear graph at integer index `i`
/// (`None` outside the hull's horizontal extent).
fn hull_value_at(hull: &[(usize, Exp)], i: usize) -> Option<Exp> {
    if hull.is_empty() {
        return None;
    }
    if i < hull[0].0 || i > hull[hull.len() - 1].0 {
        return None;
    }
    for w in hull.windows(2) {
        let (i0, v0) = &w[0];
        let (i1, v1) = &w[1];
        if *i0 <= i && i <= *i1 {
            let slope = (v1 - v0).div_int((i1 - i0) as i64);
            return Some(v0 + &slope.scale((i - i0) as i64));
        }
    }
    if i == hull[0].0 {
        return Some(hull[0].1.clone());
    }
    None
}

/// Residual equation of the slope-`s` polygon segment: the polynomial over
/// the residue field whose nonzero roots are the leading coefficients of
/// roots of valuation `s`. Coefficient `j` of the result (leading first)
/// reads the series coefficient of `poly[start+j]` on the segment line.
pub fn residual_poly<R: NewtonRing>(
    ring: &R,
    poly: &[HahnSeries<R>],
    segment: &PolygonSegment,
) -> Result<Vec<FqElem>> {
    let tower = ring.residue_tower();
    let (i0, v0) = &segment.start;
    let mut out = Vec::with_capacity(segment.length as usize + 1);
    for j in 0..=segment.length as usize {
        let i = i0 + j;
        let line_exp = v0 + &segment.slope.scale(j as i64);
        let c = poly[i].coeff_at(ring, &line_exp).ok_or_else(|| {
            Error::PrecisionTooLow(format!(
                "coefficient {i} is not known at exponent {line_exp}"
            ))
        })?;
        out.push(ring.residue(&c)?);
    }
    let _ = tower;
    Ok(out)
}

/// Binomial coefficient as an arbitrary-precision integer.
fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for j in 0..k {
        acc = acc * BigUint::from(n - j) / BigUint::from(j + 1);
    }
    acc
}

/// Substitutes `x -> x + c * t^s` into `poly` (leading first):
/// `b_i = sum_j a_{i-j} * C(n-i+j, j) * c^j * t^{s j}`.
/// Coefficients are canonicalized in the target ring.
pub fn newton_step<R: NewtonRing>(
    ring: &R,
    poly: &[HahnSeries<R>],
    s: &Exp,
    c: &R::Elem,
) -> Result<Vec<HahnSeries<R>>> {
    let n = poly.len() - 1;
    // Powers of the correction monomial c * t^s.
    let mono = HahnSeries::monomial(ring, c.clone(), s.clone(), None);
    let mut gamma_pow: Vec<HahnSeries<R>> = Vec::with_capacity(n + 1);
    gamma_pow.push(HahnSeries::constant(ring, ring.one()));
    for j in 1..=n {
        let next = hs_mul(ring, &gamma_pow[j - 1], &mono)?;
        gamma_pow.push(ring.canonicalize(next)?);
    }
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut acc: HahnSeries<R> = HahnSeries::zero(None);
        for j in 0..=i {
            let a = &poly[i - j];
            if a.is_exact_zero() {
                continue;
            }
            let bincoef = ring.from_biguint(&binomial((n - i + j) as u64, j as u64))?;
            if ring.is_zero(&bincoef) {
                continue;
            }
            let scaled = hs_scale(ring, &bincoef, a)?;
            let term = hs_mul(ring, &scaled, &gamma_pow[j])?;
            acc = hs_add(ring, &acc, &term)?;
        }
        out.push(ring.canonicalize(acc)?);
    }
    Ok(out)
}

/// What a single substitution did to the polygon: the slopes that continue
/// to track this branch, and the valuation of the new constant coefficient
/// (the residual of the accumulated expansion).
#[derive(Clone, Debug)]
pub struct StepReport {
    /// `(slope, length)` of the segments with slope strictly above `s`.
    pub continuing: Vec<(Exp, u64)>,
    /// Valuation bound of the substituted polynomial's constant coefficient.
    pub residual_valuation: Option<Valuation>,
}

/// [`newton_step`] plus a polygon recomputation of the result.
pub fn newton_step_report<R: NewtonRing>(
    ring: &R,
    poly: &[HahnSeries<R>],
    s: &Exp,
    c: &R::Elem,
) -> Result<(Vec<HahnSeries<R>>, StepReport)> {
    let out = newton_step(ring, poly, s, c)?;
    let segs = newton_polygon(ring, &out)?;
    let continuing = segs
        .iter()
        .filter(|g| &g.slope > s)
        .map(|g| (g.slope.clone(), g.length))
        .collect();
    let residual_valuation = out.last().and_then(|b| b.val());
    Ok((out, StepReport { continuing, residual_valuation }))
}

/// Independent substitution check: evaluates the polynomial at `value` and
/// returns the valuation bound of the result. `Ok(None)` means the
/// evaluation is *exactly* zero — `value` is a root on the nose. A bound of
/// `AtLeast(b)` certifies `v(P(value)) >= b` from the visible data alone.
pub fn root_certificate<R: NewtonRing>(
    ring: &R,
    poly: &[HahnSeries<R>],
    value: &HahnSeries<R>,
) -> Result<Option<Valuation>> {
    let mut acc: HahnSeries<R> = HahnSeries::zero(None);
    for c in poly {
        acc = ring.canonicalize(hs_mul(ring, &acc, value)?)?;
        acc = ring.canonicalize(hs_add(ring, &acc, c)?)?;
    }
    Ok(acc.val())
}

/// One reported root expansion.
#[derive(Clone, Debug)]
pub struct RootApprox<R: SeriesRing> {
    /// Partial expansion; the true roots of this branch agree with it at
    /// every exponent below the series' precision.
    pub value: HahnSeries<R>,
    /// Valuation bound of `true root - value`: `Finite(s)` when the next
    /// correction is known to enter exactly at `s`, `AtLeast(b)` when it can
    /// only be bounded.
    pub slope_reached: Valuation,
    /// How many roots (with multiplicity) share this expansion.
    pub multiplicity: u64,
    /// True when the step budget or coefficient precision ran out before
    /// the target was reached.
    pub exhausted: bool,
}

/// Outcome of a solve: all branches, plus bookkeeping.
#[derive(Clone, Debug)]
pub struct SolveReport<R: SeriesRing> {
    pub roots: Vec<RootApprox<R>>,
    /// Total substitution steps across all branches.
    pub steps_used: u64,
    /// Whether any branch ran out of budget or precision.
    pub any_exhausted: bool,
}

impl<R: SeriesRing> SolveReport<R> {
    /// Sum of reported multiplicities.
    pub fn total_multiplicity(&self) -> u64 {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

struct Branch<R: SeriesRing> {
    poly: Vec<HahnSeries<R>>,
    acc: HahnSeries<R>,
    s_prev: Option<Exp>,
    /// Number of roots this branch still tracks.
    expect: u64,
    steps: u32,
}

/// Finds all roots of `poly` (dense, leading first, leading coefficient a
/// visible unit series) in the algebraic closure of the series field, to
/// agreement below `t^target`. `max_steps` bounds the substitutions along
/// any single branch.
pub fn solve_roots<R: NewtonRing>(
    ring: &R,
    poly: &[HahnSeries<R>],
    target: &Exp,
    max_steps: u32,
) -> Result<SolveReport<R>> {
    if poly.len() < 2 {
        return Err(Error::InvalidInput(
            "root solving needs a polynomial of degree >= 1".into(),
        ));
    }
    match poly[0].leading() {
        Some((_, c)) if ring.is_unit(c) => {}
        _ => {
            return Err(Error::InvalidInput(
                "leading coefficient must be a visible unit".into(),
            ));
        }
    }
    let n = (poly.len() - 1) as u64;

    // Entry gate: every finite coefficient precision must reach
    // target + polygon rise, otherwise the requested agreement is not
    // determined by the data.
    let segs = newton_polygon(ring, poly)?;
    let rise = polygon_rise(&segs);
    let needed = target + &rise;
    for (i, c) in poly.iter().enumerate() {
        if let Some(p) = c.prec() {
            if p < &needed {
                return Err(Error::PrecisionTooLow(format!(
                    "coefficient {i} known to precision {p}, need {needed}"
                )));
            }
        }
    }

    let mut report = SolveReport {
        roots: Vec::new(),
        steps_used: 0,
        any_exhausted: false,
    };
    let mut stack = vec![Branch {
        poly: poly.to_vec(),
        acc: HahnSeries::zero(None),
        s_prev: None,
        expect: n,
        steps: 0,
    }];

    while let Some(branch) = stack.pop() {
        advance_branch(ring, branch, target, max_steps, &mut report, &mut stack)?;
    }

    if report.total_multiplicity() != n {
        return Err(Error::Internal(format!(
            "solver lost roots: reported {} of {n}",
            report.total_multiplicity()
        )));
    }
    Ok(report)
}

fn polygon_rise(segs: &[PolygonSegment]) -> Exp {
    let mut lo: Option<Exp> = None;
    let mut hi: Option<Exp> = None;
    for s in segs {
        for v in [&s.start.1, &s.end.1] {
            lo = Some(match lo {
                Some(l) => l.min(v.clone()),
                None => v.clone(),
            });
            hi = Some(match hi {
                Some(h) => h.max(v.clone()),
                None => v.clone(),
            });
        }
    }
    match (lo, hi) {
        (Some(l), Some(h)) => &h - &l,
        _ => Exp::zero(),
    }
}

fn advance_branch<R: NewtonRing>(
    ring: &R,
    branch: Branch<R>,
    target: &Exp,
    max_steps: u32,
    report: &mut SolveReport<R>,
    stack: &mut Vec<Branch<R>>,
) -> Result<()> {
    let Branch {
        mut poly,
        acc,
        s_prev,
        expect,
        steps,
    } = branch;

    // Strip trailing apparently-zero coefficients: each is a root that
    // agrees with the accumulated expansion as far as the data shows.
    let mut stripped = 0u64;
    let mut strip_bound: Option<Exp> = None; // finite precision among stripped
    while poly.len() > 1 && poly.last().unwrap().is_apparently_zero() {
        if let Some(p) = poly.last().unwrap().prec() {
            strip_bound = Some(match strip_bound {
                Some(b) => b.min(p.clone()),
                None => p.clone(),
            });
        }
        poly.pop();
        stripped += 1;
    }
    if stripped > 0 {
        // How far do the stripped roots provably agree with `acc`? With the
        // last visible coefficient at valuation v_j, a hidden term at
        // exponent >= b in a stripped coefficient perturbs the roots at
        // exponent >= (b - v_j) / stripped.
        let claim = match (&strip_bound, poly.last().and_then(|c| c.val())) {
            (Some(b), Some(v)) => {
                let vj = v.bound().clone();
                Some((b - &vj).div_int(stripped as i64))
            }
            (Some(b), None) => Some(b.clone()),
            (None, _) => None, // all stripped coefficients were exact zeros
        };
        match claim {
            Some(bound) if &bound < target => {
                report.roots.push(RootApprox {
                    value: hs_truncate(&acc, &bound),
                    slope_reached: Valuation::AtLeast(bound),
                    multiplicity: stripped,
                    exhausted: true,
                });
                report.any_exhausted = true;
            }
            _ => {
                report.roots.push(RootApprox {
                    value: hs_truncate(&acc, target),
                    slope_reached: Valuation::AtLeast(target.clone()),
                    multiplicity: stripped,
                    exhausted: false,
                });
            }
        }
    }
    let remaining = expect - stripped.min(expect);
    if poly.len() == 1 {
        if remaining != 0 {
            return Err(Error::Internal(
                "branch exhausted its polynomial with roots unaccounted".into(),
            ));
        }
        return Ok(());
    }
    if remaining == 0 {
        return Ok(());
    }

    // Polygon of the remaining polynomial; only slopes strictly above the
    // previous one still track this branch's roots.
    let segs = match newton_polygon(ring, &poly) {
        Ok(s) => s,
        Err(Error::PrecisionTooLow(_)) => {
            // The hull is not determined by the remaining precision.
            let bound = s_prev.clone().unwrap_or_else(Exp::zero);
            report.roots.push(RootApprox {
                value: hs_truncate(&acc, &bound),
                slope_reached: Valuation::AtLeast(bound),
                multiplicity: remaining,
                exhausted: true,
            });
            report.any_exhausted = true;
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let tracked: Vec<&PolygonSegment> = segs
        .iter()
        .filter(|g| match &s_prev {
            Some(s) => &g.slope > s,
            None => true,
        })
        .collect();
    let tracked_len: u64 = tracked.iter().map(|g| g.length).sum();
    if tracked_len != remaining {
        return Err(Error::Internal(format!(
            "branch tracks {remaining} roots but the polygon continues {tracked_len}"
        )));
    }

    for seg in tracked {
        if &seg.slope >= target {
            // Every root of this segment agrees with `acc` below the target.
            report.roots.push(RootApprox {
                value: hs_truncate(&acc, target),
                slope_reached: Valuation::Finite(seg.slope.clone()),
                multiplicity: seg.length,
                exhausted: false,
            });
            continue;
        }
        if steps >= max_steps {
            report.roots.push(RootApprox {
                value: hs_truncate(&acc, &seg.slope),
                slope_reached: Valuation::Finite(seg.slope.clone()),
                multiplicity: seg.length,
                exhausted: true,
            });
            report.any_exhausted = true;
            continue;
        }
        let residual = match residual_poly(ring, &poly, seg) {
            Ok(r) => r,
            Err(Error::PrecisionTooLow(_)) => {
                report.roots.push(RootApprox {
                    value: hs_truncate(&acc, &seg.slope),
                    slope_reached: Valuation::Finite(seg.slope.clone()),
                    multiplicity: seg.length,
                    exhausted: true,
                });
                report.any_exhausted = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        // Dense low-first for the root finder.
        let low_first: Vec<FqElem> = residual.iter().rev().cloned().collect();
        let tower = ring.residue_tower();
        let rroots = tower.poly_roots(&low_first)?;
        let mut seg_roots = 0u64;
        for (y, mult) in &rroots {
            if tower.is_zero(y) {
                continue; // valuation bookkeeping already accounts for zero
            }
            seg_roots += *mult as u64;
            let c = ring.lift_residue(y)?;
            let new_poly = newton_step(ring, &poly, &seg.slope, &c)?;
            let mono = HahnSeries::monomial(ring, c, seg.slope.clone(), None);
            let new_acc = ring.canonicalize(hs_add(ring, &acc, &mono)?)?;
            report.steps_used += 1;
            stack.push(Branch {
                poly: new_poly,
                acc: new_acc,
                s_prev: Some(seg.slope.clone()),
                expect: *mult as u64,
                steps: steps + 1,
            });
        }
        if seg_roots != seg.length {
            return Err(Error::Internal(format!(
                "segment of length {} produced {} residual roots",
                seg.length, seg_roots
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfield::FieldTower;
    use crate::hahn::{hs_poly_eval, FqRing};

    fn ring(p: u64) -> FqRing {
        FqRing::new(FieldTower::new(p, 13).unwrap())
    }

    fn e(n: i64, d: i64) -> Exp {
        Exp::new(n, d)
    }

    fn mono(r: &FqRing, c: u64, en: i64, ed: i64) -> HahnSeries<FqRing> {
        HahnSeries::monomial(r, r.tower().constant(c), e(en, ed), None)
    }

    fn one_s(r: &FqRing) -> HahnSeries<FqRing> {
        HahnSeries::constant(r, r.one())
    }

    fn zero_s() -> HahnSeries<FqRing> {
        HahnSeries::zero(None)
    }

    #[test]
    fn polygon_of_x2_minus_t() {
        let r = ring(3);
        // x^2 - t: points (0,0) and (2,1); one segment of slope 1/2.
        let poly = vec![one_s(&r), zero_s(), mono(&r, 2, 1, 1)];
        let segs = newton_polygon(&r, &poly).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].slope, e(1, 2));
        assert_eq!(segs[0].length, 2);
    }

    #[test]
    fn polygon_breakpoints_and_collinearity() {
        let r = ring(5);
        // (x-1)(x-t) = x^2 - (1+t)x + t: slopes 0 and 1, breakpoint at i=1.
        let a1 = HahnSeries::new(
            &r,
            vec![(e(0, 1), r.tower().constant(4)), (e(1, 1), r.tower().constant(4))],
            None,
        )
        .unwrap();
        let poly = vec![one_s(&r), a1, mono(&r, 1, 1, 1)];
        let segs = newton_polygon(&r, &poly).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].slope, e(0, 1));
        assert_eq!(segs[1].slope, e(1, 1));

        // (x - t)^2 = x^2 - 2tx + t^2: points (0,0),(1,1),(2,2) are
        // collinear; a single slope-1 segment of length 2, no breakpoint.
        let poly2 = vec![one_s(&r), mono(&r, 3, 1, 1), mono(&r, 1, 2, 1)];
        let segs2 = newton_polygon(&r, &poly2).unwrap();
        assert_eq!(segs2.len(), 1);
        assert_eq!(segs2[0].slope, e(1, 1));
        assert_eq!(segs2[0].length, 2);
    }

    #[test]
    fn polygon_rejects_undetermined_hull() {
        let r = ring(2);
        // Middle coefficient zero only to O(t^{1/4}): the hull through
        // (0,0) and (2,1) passes height 1/2 at i=1, above the bound, so a
        // hidden term could add a breakpoint. The polygon must refuse.
        let fuzzy = HahnSeries::zero(Some(e(1, 4)));
        let poly = vec![one_s(&r), fuzzy, mono(&r, 1, 1, 1)];
        let err = newton_polygon(&r, &poly).unwrap_err();
        assert!(matches!(err, Error::PrecisionTooLow(_)));
        // With the bound above the hull the polygon is determined.
        let safe = HahnSeries::zero(Some(e(2, 1)));
        let poly2 = vec![one_s(&r), safe, mono(&r, 1, 1, 1)];
        assert_eq!(newton_polygon(&r, &poly2).unwrap().len(), 1);
    }

    #[test]
    fn residual_equation_of_final_slope() {
        let r = ring(3);
        // x^2 - t, slope 1/2: residual y^2 - 1.
        let poly = vec![one_s(&r), zero_s(), mono(&r, 2, 1, 1)];
        let segs = newton_polygon(&r, &poly).unwrap();
        let res = residual_poly(&r, &poly, &segs[0]).unwrap();
        assert_eq!(res.len(), 3);
        assert!(r.tower().is_one(&res[0]));
        assert!(r.tower().is_zero(&res[1]));
        assert_eq!(res[2], r.tower().constant(2));
    }

    #[test]
    fn substitution_matches_direct_evaluation() {
        use rand::{Rng, SeedableRng};
        let r = ring(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            // Random cubic with small series coefficients.
            let mut poly = vec![one_s(&r)];
            for _ in 0..3 {
                let c0: u64 = rng.gen_range(0..5);
                let c1: u64 = rng.gen_range(0..5);
                let s = HahnSeries::new(
                    &r,
                    vec![
                        (e(0, 1), r.tower().constant(c0)),
                        (e(1, 2), r.tower().constant(c1)),
                    ],
                    None,
                )
                .unwrap();
                poly.push(s);
            }
            let c = r.tower().constant(rng.gen_range(1..5));
            let s = e(1, 2);
            let shifted = newton_step(&r, &poly, &s, &c).unwrap();
            // Oracle: Q(x0) == P(x0 + c t^s) at random points x0.
            for _ in 0..4 {
                let x0 = mono(&r, rng.gen_range(0..5), rng.gen_range(0..3), 2);
                let lhs = hs_poly_eval(&r, &shifted, &x0).unwrap();
                let gamma = HahnSeries::monomial(&r, c.clone(), s.clone(), None);
                let arg = hs_add(&r, &x0, &gamma).unwrap();
                let rhs = hs_poly_eval(&r, &poly, &arg).unwrap();
                assert!(crate::hahn::hs_eq(&r, &lhs, &rhs).unwrap());
            }
        }
    }

    #[test]
    fn step_report_tracks_continuing_slopes() {
        let r = ring(3);
        // x^2 - t at slope 1/2, c = 1: P(x + t^{1/2}) = x^2 + 2 t^{1/2} x.
        let poly = vec![one_s(&r), zero_s(), mono(&r, 2, 1, 1)];
        let (out, rep) = newton_step_report(&r, &poly, &e(1, 2), &r.tower().constant(1)).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[2].is_apparently_zero());
        // After the exact cancellation the constant coefficient is exactly 0
        // and no finite slope continues past 1/2.
        assert!(rep.continuing.is_empty() || rep.continuing.iter().all(|(s, _)| s > &e(1, 2)));
    }

    #[test]
    fn square_root_of_t_over_f3() {
        let r = ring(3);
        let poly = vec![one_s(&r), zero_s(), mono(&r, 2, 1, 1)];
        let rep = solve_roots(&r, &poly, &e(5, 2), 64).unwrap();
        assert!(!rep.any_exhausted);
        assert_eq!(rep.total_multiplicity(), 2);
        assert_eq!(rep.roots.len(), 2);
        for root in &rep.roots {
            // Each root is c * t^{1/2} with c^2 = 1.
            assert_eq!(root.value.terms().len(), 1);
            let (exp, c) = &root.value.terms()[0];
            assert_eq!(exp, &e(1, 2));
            let sq = r.tower().mul(c, c).unwrap();
            assert!(r.tower().is_one(&sq));
            assert_eq!(root.multiplicity, 1);
        }
        // Substitution check: P(root) vanishes to the visible precision.
        for root in &rep.roots {
            let v = hs_poly_eval(&r, &poly, &root.value).unwrap();
            assert!(v.is_apparently_zero());
        }
    }

    #[test]
    fn distinct_integer_slopes_give_exact_roots() {
        let r = ring(5);
        // (x-1)(x-t) = x^2 - (1+t) x + t.
        let a1 = HahnSeries::new(
            &r,
            vec![(e(0, 1), r.tower().constant(4)), (e(1, 1), r.tower().constant(4))],
            None,
        )
        .unwrap();
        let poly = vec![one_s(&r), a1, mono(&r, 1, 1, 1)];
        let rep = solve_roots(&r, &poly, &e(6, 1), 64).unwrap();
        assert_eq!(rep.roots.len(), 2);
        assert!(!rep.any_exhausted);
        let mut found_const = false;
        let mut found_t = false;
        for root in &rep.roots {
            let terms = root.value.terms();
            if terms.len() == 1 && terms[0].0 == e(0, 1) {
                assert!(r.tower().is_one(&terms[0].1));
                found_const = true;
            }
            if terms.len() == 1 && terms[0].0 == e(1, 1) {
                assert!(r.tower().is_one(&terms[0].1));
                found_t = true;
            }
        }
        assert!(found_const && found_t);
    }

    #[test]
    fn artin_schreier_expansion_has_binary_support() {
        let r = ring(2);
        // x^2 + x + t: one root is sum_{k>=0} t^{2^k}, the other adds 1.
        let poly = vec![one_s(&r), one_s(&r), mono(&r, 1, 1, 1)];
        let rep = solve_roots(&r, &poly, &e(20, 1), 64).unwrap();
        assert!(!rep.any_exhausted);
        assert_eq!(rep.roots.len(), 2);
        let expected: Vec<Exp> = [1i64, 2, 4, 8, 16].iter().map(|&k| e(k, 1)).collect();
        let mut supports: Vec<Vec<Exp>> = rep
            .roots
            .iter()
            .map(|root| root.value.terms().iter().map(|(ex, _)| ex.clone()).collect())
            .collect();
        supports.sort_by_key(|s| s.len());
        assert_eq!(supports[0], expected);
        let mut with_one = vec![e(0, 1)];
        with_one.extend(expected);
        assert_eq!(supports[1], with_one);
    }

    #[test]
    fn double_root_is_tracked_with_multiplicity() {
        let r = ring(5);
        // (x - t)^2 = x^2 - 2 t x + t^2.
        let poly = vec![one_s(&r), mono(&r, 3, 1, 1), mono(&r, 1, 2, 1)];
        let rep = solve_roots(&r, &poly, &e(4, 1), 64).unwrap();
        assert_eq!(rep.roots.len(), 1);
        assert_eq!(rep.roots[0].multiplicity, 2);
        assert!(!rep.roots[0].exhausted);
        let terms = rep.roots[0].value.terms();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].0, e(1, 1));
    }

    #[test]
    fn laurent_roots_with_negative_valuation() {
        let r = ring(5);
        // (x - t^{-1})(x - t) = x^2 - (t^{-1} + t) x + 1.
        let a1 = HahnSeries::new(
            &r,
            vec![(e(-1, 1), r.tower().constant(4)), (e(1, 1), r.tower().constant(4))],
            None,
        )
        .unwrap();
        let poly = vec![one_s(&r), a1, HahnSeries::constant(&r, r.one())];
        let rep = solve_roots(&r, &poly, &e(3, 1), 64).unwrap();
        assert_eq!(rep.roots.len(), 2);
        let mut vals: Vec<Exp> = rep
            .roots
            .iter()
            .map(|root| root.value.terms()[0].0.clone())
            .collect();
        vals.sort();
        assert_eq!(vals, vec![e(-1, 1), e(1, 1)]);
    }

    #[test]
    fn ever_descending_slopes_exhaust_the_budget() {
        let r = ring(2);
        // x^2 + x + t^{-1}: slopes -1/2, -1/4, -1/8, ... never rise; the
        // expansion cannot settle and the branch budget must trip.
        let poly = vec![one_s(&r), one_s(&r), mono(&r, 1, -1, 1)];
        let rep = solve_roots(&r, &poly, &e(1, 1), 12).unwrap();
        assert!(rep.any_exhausted);
        assert_eq!(rep.total_multiplicity(), 2);
        assert!(rep.roots.iter().any(|root| root.exhausted));
        // The partial expansions still carry the known fractional support.
        let ex = rep.roots.iter().find(|root| root.exhausted).unwrap();
        assert!(ex.value.terms().iter().all(|(exp, _)| exp.is_negative()));
    }

    #[test]
    fn translation_equivariance() {
        let r = ring(3);
        // Roots of P(x + gamma) are roots of P shifted by -gamma.
        let poly = vec![one_s(&r), zero_s(), mono(&r, 2, 1, 1)]; // x^2 - t
        let gamma = r.tower().constant(1);
        let shifted = newton_step(&r, &poly, &Exp::zero(), &gamma).unwrap();
        let rep_orig = solve_roots(&r, &poly, &e(3, 1), 64).unwrap();
        let rep_shift = solve_roots(&r, &shifted, &e(3, 1), 64).unwrap();
        assert_eq!(rep_orig.roots.len(), rep_shift.roots.len());
        let g_mono = HahnSeries::monomial(&r, gamma, Exp::zero(), None);
        for root in &rep_shift.roots {
            let back = hs_add(&r, &root.value, &g_mono).unwrap();
            let matches = rep_orig.roots.iter().any(|o| {
                crate::hahn::hs_eq(&r, &o.value, &back).unwrap()
            });
            assert!(matches);
        }
    }

    #[test]
    fn precision_gate_rejects_short_inputs() {
        let r = ring(3);
        // x^2 - (t + O(t^2)) cannot be solved to t^10.
        let fuzzy = HahnSeries::new(
            &r,
            vec![(e(1, 1), r.tower().constant(2))],
            Some(e(2, 1)),
        )
        .unwrap();
        let poly = vec![one_s(&r), zero_s(), fuzzy];
        let err = solve_roots(&r, &poly, &e(10, 1), 64).unwrap_err();
        assert!(matches!(err, Error::PrecisionTooLow(_)));
    }

    #[test]
    fn imprecise_but_sufficient_inputs_solve_to_target() {
        let r = ring(3);
        // x^2 - (t + O(t^8)) to target 5: fine, and the root carries the
        // precision cap implied by the data, not the requested target.
        let fuzzy = HahnSeries::new(
            &r,
            vec![(e(1, 1), r.tower().constant(2))],
            Some(e(8, 1)),
        )
        .unwrap();
        let poly = vec![one_s(&r), zero_s(), fuzzy];
        let rep = solve_roots(&r, &poly, &e(5, 2), 64).unwrap();
        assert_eq!(rep.total_multiplicity(), 2);
        for root in &rep.roots {
            assert!(root.value.prec().is_some());
        }
    }
}
