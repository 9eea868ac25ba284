//! Stable interchange encodings: compact element strings plus JSON shapes
//! for Hahn series, digit expansions, polynomials, and recurrence relations.
//!
//! Scalars render as strings:
//! - residue-field elements: `"p^d:[c0,c1,...]"` — power-basis coordinates
//!   at level `d`, low degree first, reduced mod `p`;
//! - Witt-ring elements: `"W(p,m,d):[c0,...]"` — the same basis with
//!   coordinates mod `p^m`.
//!
//! Exponents always render as `"n/d"`. JSON writers build [`serde_json::Value`]
//! trees whose object keys serialize in sorted order, so a given datum has
//! exactly one byte representation. Parsers validate the declared prime
//! against the tower they are handed and reject malformed coordinates.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::exponent::Exp;
use crate::galois::{GaloisTower, GrElem};
use crate::gfield::{FieldTower, FqElem};
use crate::hahn::{FqRing, HahnSeries};
use crate::padic::DigitSeries;
use crate::twistrec::Recurrence;

/// Version tag stamped on every JSON document the tools emit.
pub const SCHEMA: &str = "closure-forge/1";

// ---------------------------------------------------------------------------
// Element strings.
// ---------------------------------------------------------------------------

fn join_coeffs(coeffs: &[u64]) -> String {
    coeffs
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_coeff_list(s: &str, context: &str) -> Result<Vec<u64>> {
    let inner = s
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("{context}: expected [c0,c1,...], got {s:?}")))?;
    let inner = inner.trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("{context}: bad coordinate {c:?}")))
        })
        .collect()
}

/// Renders a residue-field element as `"p^d:[c0,c1,...]"`.
pub fn fq_to_string(p: u64, x: &FqElem) -> String {
    format!("{p}^{}:[{}]", x.level(), join_coeffs(x.coeffs()))
}

/// Parses `"p^d:[c0,c1,...]"` back into the given tower. The declared prime
/// must match and the coordinate list must have exactly `d` entries.
pub fn fq_from_string(field: &FieldTower, s: &str) -> Result<FqElem> {
    let s = s.trim();
    let (head, tail) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("field element: missing ':' in {s:?}")))?;
    let (p_s, d_s) = head
        .split_once('^')
        .ok_or_else(|| Error::Parse(format!("field element: expected p^d, got {head:?}")))?;
    let p: u64 = p_s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("field element: bad prime {p_s:?}")))?;
    if p != field.p() {
        return Err(Error::Parse(format!(
            "field element declares p = {p}, tower has p = {}",
            field.p()
        )));
    }
    let d: u32 = d_s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("field element: bad level {d_s:?}")))?;
    let coeffs = parse_coeff_list(tail.trim(), "field element")?;
    field.from_coeffs(d, &coeffs)
}

/// Renders a Witt-ring element as `"W(p,m,d):[c0,...]"`.
pub fn gr_to_string(p: u64, x: &GrElem) -> String {
    format!(
        "W({p},{},{}):[{}]",
        x.m(),
        x.level(),
        join_coeffs(x.coeffs())
    )
}

/// Parses `"W(p,m,d):[c0,...]"` back into the given tower.
pub fn gr_from_string(w: &GaloisTower, s: &str) -> Result<GrElem> {
    let s = s.trim();
    let (head, tail) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("ring element: missing ':' in {s:?}")))?;
    let params = head
        .trim()
        .strip_prefix("W(")
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("ring element: expected W(p,m,d), got {head:?}")))?;
    let parts: Vec<&str> = params.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!(
            "ring element: expected three parameters in {head:?}"
        )));
    }
    let p: u64 = parts[0]
        .parse()
        .map_err(|_| Error::Parse(format!("ring element: bad prime {:?}", parts[0])))?;
    if p != w.p() {
        return Err(Error::Parse(format!(
            "ring element declares p = {p}, tower has p = {}",
            w.p()
        )));
    }
    let m: u32 = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("ring element: bad depth {:?}", parts[1])))?;
    let d: u32 = parts[2]
        .parse()
        .map_err(|_| Error::Parse(format!("ring element: bad level {:?}", parts[2])))?;
    let coeffs = parse_coeff_list(tail.trim(), "ring element")?;
    w.from_coeffs(d, m, &coeffs)
}

// ---------------------------------------------------------------------------
// JSON access helpers.
// ---------------------------------------------------------------------------

fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Parse(format!("{what}: expected a JSON object")))
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::Parse(format!("{what}: expected a JSON string")))
}

fn get_array<'a>(obj: &'a Map<String, Value>, key: &str, what: &str) -> Result<&'a Vec<Value>> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse(format!("{what}: missing array field {key:?}")))
}

fn parse_term_pair<'a>(v: &'a Value, what: &str) -> Result<(Exp, &'a str)> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse(format!("{what}: each term must be [exponent, coeff]")))?;
    let e = Exp::parse(as_str(&pair[0], what)?)?;
    Ok((e, as_str(&pair[1], what)?))
}

/// Checks that a `"ring"` annotation, when present, declares the expected
/// prime (the first integer appearing in the string). The rest of the
/// annotation is descriptive.
fn check_ring_p(obj: &Map<String, Value>, p: u64, what: &str) -> Result<()> {
    let Some(ring) = obj.get("ring") else {
        return Ok(());
    };
    let ring = as_str(ring, what)?;
    let digits: String = ring
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    let declared: u64 = digits
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: ring {ring:?} names no prime")))?;
    if declared != p {
        return Err(Error::Parse(format!(
            "{what}: ring {ring:?} declares p = {declared}, expected {p}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Hahn series and polynomials over the residue tower.
// ---------------------------------------------------------------------------

/// Series as `{"prec": "n/d" | null, "terms": [["n/d", "p^d:[...]"], ...]}`.
pub fn series_to_json(p: u64, x: &HahnSeries<FqRing>) -> Value {
    let terms: Vec<Value> = x
        .terms()
        .iter()
        .map(|(e, c)| json!([e.to_string(), fq_to_string(p, c)]))
        .collect();
    let prec = match x.prec() {
        Some(e) => Value::String(e.to_string()),
        None => Value::Null,
    };
    json!({ "prec": prec, "terms": terms })
}

/// Inverse of [`series_to_json`].
pub fn series_from_json(ring: &FqRing, v: &Value) -> Result<HahnSeries<FqRing>> {
    let obj = as_object(v, "series")?;
    let prec = match obj.get("prec") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(Exp::parse(s)?),
        Some(_) => {
            return Err(Error::Parse(
                "series: prec must be a string \"n/d\" or null".into(),
            ))
        }
    };
    let mut terms = Vec::new();
    for t in get_array(obj, "terms", "series")? {
        let (e, coeff) = parse_term_pair(t, "series")?;
        terms.push((e, fq_from_string(ring.tower(), coeff)?));
    }
    HahnSeries::new(ring, terms, prec)
}

/// Polynomial with Hahn-series coefficients, leading coefficient first:
/// `{"coeffs": [<series>...], "ring": "F(p)((t^Q))"}`.
pub fn series_poly_to_json(p: u64, coeffs: &[HahnSeries<FqRing>]) -> Value {
    let coeffs: Vec<Value> = coeffs.iter().map(|c| series_to_json(p, c)).collect();
    json!({ "coeffs": coeffs, "ring": format!("F({p})((t^Q))") })
}

/// Inverse of [`series_poly_to_json`].
pub fn series_poly_from_json(ring: &FqRing, v: &Value) -> Result<Vec<HahnSeries<FqRing>>> {
    let obj = as_object(v, "polynomial")?;
    check_ring_p(obj, ring.tower().p(), "polynomial")?;
    get_array(obj, "coeffs", "polynomial")?
        .iter()
        .map(|c| series_from_json(ring, c))
        .collect()
}

// ---------------------------------------------------------------------------
// Digit series and polynomials over the mixed-characteristic field.
// ---------------------------------------------------------------------------

fn exp_to_json(e: &Exp) -> Value {
    if e.is_integer() {
        if let Ok(n) = i64::try_from(e.floor_int()) {
            return Value::from(n);
        }
    }
    Value::String(e.to_string())
}

fn exp_from_json(v: &Value, what: &str) -> Result<Exp> {
    match v {
        Value::Number(n) => {
            let n = n
                .as_i64()
                .ok_or_else(|| Error::Parse(format!("{what}: expected an integer")))?;
            Ok(Exp::from_int(n))
        }
        Value::String(s) => Exp::parse(s),
        _ => Err(Error::Parse(format!(
            "{what}: expected a number or \"n/d\" string"
        ))),
    }
}

/// Digit expansion as `{"N": <prec>, "p": p, "terms": [["n/d", "p^d:[...]"], ...]}`
/// where `N` is a plain integer when the precision is integral and a
/// `"n/d"` string otherwise.
pub fn digit_series_to_json(p: u64, x: &DigitSeries) -> Value {
    let terms: Vec<Value> = x
        .terms()
        .iter()
        .map(|(e, c)| json!([e.to_string(), fq_to_string(p, c)]))
        .collect();
    json!({ "N": exp_to_json(x.prec()), "p": p, "terms": terms })
}

/// Inverse of [`digit_series_to_json`].
pub fn digit_series_from_json(field: &FieldTower, v: &Value) -> Result<DigitSeries> {
    let obj = as_object(v, "digit series")?;
    let p = obj
        .get("p")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("digit series: missing prime field \"p\"".into()))?;
    if p != field.p() {
        return Err(Error::Parse(format!(
            "digit series declares p = {p}, tower has p = {}",
            field.p()
        )));
    }
    let prec = obj
        .get("N")
        .ok_or_else(|| Error::Parse("digit series: missing precision field \"N\"".into()))?;
    let prec = exp_from_json(prec, "digit series precision")?;
    let mut terms = Vec::new();
    for t in get_array(obj, "terms", "digit series")? {
        let (e, coeff) = parse_term_pair(t, "digit series")?;
        terms.push((e, fq_from_string(field, coeff)?));
    }
    DigitSeries::new(field, terms, prec)
}

/// Polynomial with digit-series coefficients, leading coefficient first:
/// `{"coeffs": [<digit series>...], "ring": "W(F(p))[[p^Q]]"}`.
pub fn witt_poly_to_json(p: u64, coeffs: &[DigitSeries]) -> Value {
    let coeffs: Vec<Value> = coeffs.iter().map(|c| digit_series_to_json(p, c)).collect();
    json!({ "coeffs": coeffs, "ring": format!("W(F({p}))[[p^Q]]") })
}

/// Inverse of [`witt_poly_to_json`].
pub fn witt_poly_from_json(field: &FieldTower, v: &Value) -> Result<Vec<DigitSeries>> {
    let obj = as_object(v, "polynomial")?;
    check_ring_p(obj, field.p(), "polynomial")?;
    get_array(obj, "coeffs", "polynomial")?
        .iter()
        .map(|c| digit_series_from_json(field, c))
        .collect()
}

// ---------------------------------------------------------------------------
// Recurrence relations.
// ---------------------------------------------------------------------------

/// Relation as `{"d": ["W(p,m,d):[...]", ...], "ring": "W(p,m,d)"}`. The
/// coefficient list is the full vector `d_0, ..., d_k` with the monic top
/// coefficient written out explicitly.
pub fn recurrence_to_json(w: &GaloisTower, r: &Recurrence) -> Result<Value> {
    let p = w.p();
    let mut d: Vec<Value> = r
        .coeffs()
        .iter()
        .map(|c| Value::String(gr_to_string(p, c)))
        .collect();
    let top = w.one(r.level(), r.depth())?;
    d.push(Value::String(gr_to_string(p, &top)));
    Ok(json!({
        "d": d,
        "ring": format!("W({p},{},{})", r.depth(), r.level()),
    }))
}

/// Inverse of [`recurrence_to_json`]; accepts any unit leading coefficient
/// and normalizes to monic form.
pub fn recurrence_from_json(w: &GaloisTower, v: &Value) -> Result<Recurrence> {
    let obj = as_object(v, "relation")?;
    check_ring_p(obj, w.p(), "relation")?;
    let full = get_array(obj, "d", "relation")?
        .iter()
        .map(|c| gr_from_string(w, as_str(c, "relation")?))
        .collect::<Result<Vec<_>>>()?;
    Recurrence::from_full(w, &full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfield::FieldTower;

    fn field(p: u64) -> FieldTower {
        FieldTower::new(p, 7).unwrap()
    }

    #[test]
    fn field_elements_round_trip_through_strings() {
        let f = field(3);
        let x = f.from_coeffs(2, &[2, 1]).unwrap();
        let s = fq_to_string(3, &x);
        assert_eq!(s, "3^2:[2,1]");
        let back = fq_from_string(&f, &s).unwrap();
        assert!(f.eq(&x, &back).unwrap());
    }

    #[test]
    fn ring_elements_round_trip_through_strings() {
        let f = field(2);
        let w = GaloisTower::new(f);
        let x = w.from_coeffs(2, 3, &[5, 6]).unwrap();
        let s = gr_to_string(2, &x);
        assert_eq!(s, "W(2,3,2):[5,6]");
        let back = gr_from_string(&w, &s).unwrap();
        assert!(w.eq(&x, &back).unwrap());
    }

    #[test]
    fn mismatched_primes_are_rejected() {
        let f = field(3);
        assert!(matches!(
            fq_from_string(&f, "2^1:[1]"),
            Err(Error::Parse(_))
        ));
        let w = GaloisTower::new(field(2));
        assert!(matches!(
            gr_from_string(&w, "W(3,2,1):[1]"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn malformed_coordinate_lists_are_rejected() {
        let f = field(2);
        assert!(fq_from_string(&f, "2^2:[1]").is_err());
        assert!(fq_from_string(&f, "2^1:1,0").is_err());
        assert!(fq_from_string(&f, "2^1:[x]").is_err());
    }

    #[test]
    fn series_round_trip_preserves_terms_and_precision() {
        let ring = FqRing::new(field(2));
        let f = ring.tower().clone();
        let one = f.one(1).unwrap();
        let s = HahnSeries::new(
            &ring,
            vec![(Exp::new(1, 2), one.clone()), (Exp::from_int(3), one)],
            Some(Exp::from_int(5)),
        )
        .unwrap();
        let v = series_to_json(2, &s);
        let back = series_from_json(&ring, &v).unwrap();
        assert_eq!(back.terms().len(), 2);
        assert_eq!(back.prec(), Some(&Exp::from_int(5)));
        assert_eq!(series_to_json(2, &back), v);
    }

    #[test]
    fn exact_series_serialize_with_null_precision() {
        let ring = FqRing::new(field(2));
        let s: HahnSeries<FqRing> = HahnSeries::zero(None);
        let v = series_to_json(2, &s);
        assert!(v["prec"].is_null());
        let back = series_from_json(&ring, &v).unwrap();
        assert!(back.prec().is_none());
    }

    #[test]
    fn polynomial_round_trip_keeps_coefficient_order() {
        let ring = FqRing::new(field(2));
        let f = ring.tower().clone();
        let one = f.one(1).unwrap();
        let lead = HahnSeries::constant(&ring, one.clone());
        let t = HahnSeries::monomial(&ring, one, Exp::one(), None);
        let poly = vec![lead.clone(), lead, t];
        let v = series_poly_to_json(2, &poly);
        let back = series_poly_from_json(&ring, &v).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(series_poly_to_json(2, &back), v);
    }

    #[test]
    fn digit_series_round_trip_and_integer_precision() {
        let f = field(2);
        let one = f.one(1).unwrap();
        let d = DigitSeries::new(
            &f,
            vec![(Exp::new(1, 2), one.clone()), (Exp::from_int(1), one)],
            Exp::from_int(6),
        )
        .unwrap();
        let v = digit_series_to_json(2, &d);
        assert_eq!(v["N"], Value::from(6));
        let back = digit_series_from_json(&f, &v).unwrap();
        assert_eq!(digit_series_to_json(2, &back), v);

        let frac = DigitSeries::zero(Exp::new(13, 2));
        let v = digit_series_to_json(2, &frac);
        assert_eq!(v["N"], Value::from("13/2"));
        let back = digit_series_from_json(&f, &v).unwrap();
        assert_eq!(back.prec(), &Exp::new(13, 2));
    }

    #[test]
    fn relations_round_trip_with_explicit_monic_top() {
        let f = field(2);
        let w = GaloisTower::new(f);
        let d0 = w.from_coeffs(2, 2, &[3, 1]).unwrap();
        let d1 = w.from_coeffs(2, 2, &[0, 2]).unwrap();
        let r = Recurrence::new(&w, vec![d0, d1]).unwrap();
        let v = recurrence_to_json(&w, &r).unwrap();
        assert_eq!(v["d"].as_array().unwrap().len(), 3);
        let back = recurrence_from_json(&w, &v).unwrap();
        assert_eq!(back.order(), 2);
        for (a, b) in r.coeffs().iter().zip(back.coeffs()) {
            assert!(w.eq(a, b).unwrap());
        }
    }

    #[test]
    fn relation_ring_annotation_must_name_the_right_prime() {
        let w = GaloisTower::new(field(2));
        let one = w.one(1, 2).unwrap();
        let r = Recurrence::new(&w, vec![one]).unwrap();
        let mut v = recurrence_to_json(&w, &r).unwrap();
        v["ring"] = Value::from("W(3,2,1)");
        assert!(matches!(
            recurrence_from_json(&w, &v),
            Err(Error::Parse(_))
        ));
    }
}
