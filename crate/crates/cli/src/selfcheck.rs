//! Built-in oracle suites for `closure-forge selfcheck`.
//!
//! Each suite cross-checks one layer of the arithmetic against an
//! independent reference: plain integers, exhaustive enumeration, or a
//! construct-then-solve round trip. Suites are deterministic in the seed
//! and sized to finish in well under a second each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use closure_forge_core::exponent::Exp;
use closure_forge_core::galois::{GaloisTower, GrElem};
use closure_forge_core::gfield::{FieldTower, FqElem};
use closure_forge_core::hahn::{hs_add, hs_mul, FqRing, HahnSeries};
use closure_forge_core::newton::{newton_polygon, solve_roots};
use closure_forge_core::padic::{ds_add, ds_mul, normalize, DigitSeries};
use closure_forge_core::twistrec::{enumerate_solutions, recurrence_from_solutions, solve_semilinear};

type Outcome = Result<(), String>;

/// Runs every suite and reports `(name, outcome)` pairs in a fixed order.
pub fn run_all(seed: u64) -> Vec<(&'static str, Outcome)> {
    vec![
        (
            "galois-ring arithmetic matches integers mod p^m",
            ring_matches_integers(seed),
        ),
        (
            "teichmuller lift is multiplicative",
            teichmuller_multiplicative(),
        ),
        (
            "root extraction recovers constructed factorizations",
            roots_match_construction(seed),
        ),
        (
            "polygon slopes equal root valuations",
            polygon_duality(seed),
        ),
        (
            "carry normalization is a ring homomorphism",
            carry_homomorphism(seed),
        ),
        (
            "semilinear kernel has full rank",
            semilinear_rank(seed),
        ),
        (
            "quadratic series fixture solves exactly",
            series_fixture(),
        ),
    ]
}

fn check(cond: bool, msg: impl Into<String>) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ring_matches_integers(seed: u64) -> Outcome {
    for &(p, m) in &[(2u64, 5u32), (3, 4), (5, 3)] {
        let field = FieldTower::new(p, seed).map_err(|e| e.to_string())?;
        let w = GaloisTower::new(field);
        let md = p.pow(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x01);
        for _ in 0..200 {
            let a = rng.gen_range(0..md);
            let b = rng.gen_range(0..md);
            let xa = w.constant(a, m).map_err(|e| e.to_string())?;
            let xb = w.constant(b, m).map_err(|e| e.to_string())?;
            let sum = w.add(&xa, &xb).map_err(|e| e.to_string())?;
            let prod = w.mul(&xa, &xb).map_err(|e| e.to_string())?;
            check(
                w.zpm_value(&sum) == Some((a + b) % md),
                format!("{a} + {b} mod {md} disagrees"),
            )?;
            check(
                w.zpm_value(&prod) == Some((a * b) % md),
                format!("{a} * {b} mod {md} disagrees"),
            )?;
        }
    }
    Ok(())
}

fn teichmuller_multiplicative() -> Outcome {
    for &(p, d, m) in &[(2u64, 2u32, 2u32), (3, 1, 3), (2, 1, 4)] {
        let field = FieldTower::new(p, 1).map_err(|e| e.to_string())?;
        let w = GaloisTower::new(field.clone());
        let elems = field.enumerate_level(d).map_err(|e| e.to_string())?;
        for x in &elems {
            for y in &elems {
                let tx = w.teichmuller(x, m).map_err(|e| e.to_string())?;
                let ty = w.teichmuller(y, m).map_err(|e| e.to_string())?;
                let xy = field.mul(x, y).map_err(|e| e.to_string())?;
                let txy = w.teichmuller(&xy, m).map_err(|e| e.to_string())?;
                let prod = w.mul(&tx, &ty).map_err(|e| e.to_string())?;
                check(
                    w.eq(&prod, &txy).map_err(|e| e.to_string())?,
                    format!("multiplicativity fails at p={p} d={d} m={m}"),
                )?;
            }
        }
    }
    Ok(())
}

/// Dense low-first product over the residue tower.
fn fq_poly_mul(field: &FieldTower, a: &[FqElem], b: &[FqElem]) -> Result<Vec<FqElem>, String> {
    let d = a
        .iter()
        .chain(b.iter())
        .map(|c| c.level())
        .fold(1u32, lcm_u32);
    let zero = field.zero(d).map_err(|e| e.to_string())?;
    let mut out = vec![zero; a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            let t = field.mul(ca, cb).map_err(|e| e.to_string())?;
            out[i + j] = field.add(&out[i + j], &t).map_err(|e| e.to_string())?;
        }
    }
    Ok(out)
}

fn roots_match_construction(seed: u64) -> Outcome {
    for &(p, d) in &[(2u64, 3u32), (3, 2)] {
        let field = FieldTower::new(p, seed).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x03 ^ p);
        for _ in 0..10 {
            let deg = rng.gen_range(1..=3usize);
            let mut constructed = Vec::with_capacity(deg);
            let one = field.one(d).map_err(|e| e.to_string())?;
            let mut poly = vec![one.clone()];
            for _ in 0..deg {
                let r = field.random_element(d, &mut rng).map_err(|e| e.to_string())?;
                // factor (x - r), low first
                let factor = vec![field.neg(&r), one.clone()];
                poly = fq_poly_mul(&field, &poly, &factor)?;
                constructed.push(r);
            }
            let mut found = Vec::new();
            for (root, mult) in field.poly_roots(&poly).map_err(|e| e.to_string())? {
                for _ in 0..mult {
                    found.push(root.clone());
                }
            }
            let key = |x: &FqElem| {
                let (lvl, cs) = x.lex_key();
                (lvl, cs.to_vec())
            };
            let mut want: Vec<_> = constructed.iter().map(key).collect();
            let mut got: Vec<_> = found.iter().map(key).collect();
            want.sort();
            got.sort();
            check(
                want == got,
                format!("root multisets differ for degree {deg} over level {d}, p={p}"),
            )?;
        }
    }
    Ok(())
}

/// Leading-first polynomial product with series coefficients.
fn series_poly_mul(
    ring: &FqRing,
    a: &[HahnSeries<FqRing>],
    b: &[HahnSeries<FqRing>],
) -> Result<Vec<HahnSeries<FqRing>>, String> {
    let mut out = vec![HahnSeries::zero(None); a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            let t = hs_mul(ring, ca, cb).map_err(|e| e.to_string())?;
            out[i + j] = hs_add(ring, &out[i + j], &t).map_err(|e| e.to_string())?;
        }
    }
    Ok(out)
}

fn polygon_duality(seed: u64) -> Outcome {
    for &p in &[2u64, 3] {
        let field = FieldTower::new(p, seed).map_err(|e| e.to_string())?;
        let ring = FqRing::new(field.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x04 ^ p);
        for _ in 0..10 {
            let deg = rng.gen_range(1..=4usize);
            let one = field.one(1).map_err(|e| e.to_string())?;
            let mut poly = vec![HahnSeries::constant(&ring, one.clone())];
            let mut valuations = Vec::with_capacity(deg);
            for _ in 0..deg {
                let num = rng.gen_range(-4i64..=6);
                let den = rng.gen_range(1i64..=3);
                let v = Exp::new(num, den);
                // nonzero residue coefficient, so the root is exactly c t^v
                let mut c = field.random_element(2, &mut rng).map_err(|e| e.to_string())?;
                if field.is_zero(&c) {
                    c = field.one(2).map_err(|e| e.to_string())?;
                }
                let factor = vec![
                    HahnSeries::constant(&ring, one.clone()),
                    HahnSeries::monomial(&ring, field.neg(&c), v.clone(), None),
                ];
                poly = series_poly_mul(&ring, &poly, &factor)?;
                valuations.push(v);
            }
            let segments = newton_polygon(&ring, &poly).map_err(|e| e.to_string())?;
            let mut slopes = Vec::new();
            for s in &segments {
                for _ in 0..s.length {
                    slopes.push(s.slope.clone());
                }
            }
            slopes.sort();
            valuations.sort();
            check(
                slopes == valuations,
                format!("slope multiset differs from constructed valuations, p={p}"),
            )?;
        }
    }
    Ok(())
}

fn random_gr(w: &GaloisTower, d: u32, m: u32, rng: &mut ChaCha8Rng) -> Result<GrElem, String> {
    let md = w.p().pow(m);
    let coeffs: Vec<u64> = (0..d).map(|_| rng.gen_range(0..md)).collect();
    w.from_coeffs(d, m, &coeffs).map_err(|e| e.to_string())
}

fn carry_homomorphism(seed: u64) -> Outcome {
    let field = FieldTower::new(2, seed).map_err(|e| e.to_string())?;
    let w = GaloisTower::new(field.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05);
    let prec = Exp::from_int(3);
    for _ in 0..50 {
        let raw_of = |rng: &mut ChaCha8Rng, w: &GaloisTower| -> Result<Vec<(Exp, GrElem)>, String> {
            let n = rng.gen_range(1..=3usize);
            (0..n)
                .map(|_| {
                    let e = Exp::new(rng.gen_range(0i64..=2), rng.gen_range(1i64..=2));
                    Ok((e, random_gr(w, 2, 4, rng)?))
                })
                .collect()
        };
        let ra = raw_of(&mut rng, &w)?;
        let rb = raw_of(&mut rng, &w)?;
        let a = normalize(&w, &ra, &prec).map_err(|e| e.to_string())?;
        let b = normalize(&w, &rb, &prec).map_err(|e| e.to_string())?;
        let mut joined = ra.clone();
        joined.extend(rb.clone());
        let direct = normalize(&w, &joined, &prec).map_err(|e| e.to_string())?;
        let recombined = ds_add(&w, &a, &b).map_err(|e| e.to_string())?;
        check(
            DigitSeries::eq(&field, &direct, &recombined).map_err(|e| e.to_string())?,
            "normalize(x) + normalize(y) != normalize(x + y)",
        )?;
        // Product of single-term masses, same comparison.
        let (ea, xa) = &ra[0];
        let (eb, xb) = &rb[0];
        let pa = normalize(&w, &[(ea.clone(), xa.clone())], &prec).map_err(|e| e.to_string())?;
        let pb = normalize(&w, &[(eb.clone(), xb.clone())], &prec).map_err(|e| e.to_string())?;
        let prod_raw = vec![(ea + eb, w.mul(xa, xb).map_err(|e| e.to_string())?)];
        let direct = normalize(&w, &prod_raw, &prec).map_err(|e| e.to_string())?;
        let recombined = ds_mul(&w, &pa, &pb).map_err(|e| e.to_string())?;
        check(
            DigitSeries::eq(&field, &direct, &recombined).map_err(|e| e.to_string())?,
            "normalize(x) * normalize(y) != normalize(x * y)",
        )?;
    }
    Ok(())
}

fn semilinear_rank(seed: u64) -> Outcome {
    let field = FieldTower::new(2, seed).map_err(|e| e.to_string())?;
    let w = GaloisTower::new(field);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x06);
    for _ in 0..5 {
        let z0 = loop {
            let z = random_gr(&w, 2, 2, &mut rng)?;
            if w.is_unit(&z) {
                break z;
            }
        };
        let r = recurrence_from_solutions(&w, &[z0]).map_err(|e| e.to_string())?;
        let sol = solve_semilinear(&w, &r).map_err(|e| e.to_string())?;
        check(sol.basis.len() == 1, "order-1 kernel basis is not rank 1")?;
        let found = enumerate_solutions(&w, &r, 2).map_err(|e| e.to_string())?;
        check(
            found.len() == 4,
            format!("kernel in W_2(F_4) has {} elements, expected 4", found.len()),
        )?;
        for z in &found {
            let mut in_span = false;
            for c in 0..4u64 {
                let cand = w.scalar_mul(c, &sol.basis[0]).map_err(|e| e.to_string())?;
                if w.eq(z, &cand).map_err(|e| e.to_string())? {
                    in_span = true;
                    break;
                }
            }
            check(in_span, "enumerated solution outside the basis span")?;
        }
    }
    Ok(())
}

fn series_fixture() -> Outcome {
    let field = FieldTower::new(2, 1).map_err(|e| e.to_string())?;
    let ring = FqRing::new(field.clone());
    let one = field.one(1).map_err(|e| e.to_string())?;
    // x^2 + x + t, leading first
    let poly = vec![
        HahnSeries::constant(&ring, one.clone()),
        HahnSeries::constant(&ring, one.clone()),
        HahnSeries::monomial(&ring, one, Exp::one(), None),
    ];
    let target = Exp::from_int(8);
    let report = solve_roots(&ring, &poly, &target, 32).map_err(|e| e.to_string())?;
    check(report.roots.len() == 2, "expected exactly two roots")?;
    let mut supports: Vec<Vec<Exp>> = report
        .roots
        .iter()
        .map(|r| r.value.terms().iter().map(|(e, _)| e.clone()).collect())
        .collect();
    supports.sort();
    let want: Vec<Vec<Exp>> = vec![
        vec![Exp::zero(), Exp::one(), Exp::from_int(2), Exp::from_int(4)],
        vec![Exp::one(), Exp::from_int(2), Exp::from_int(4)],
    ];
    check(
        supports == want,
        format!("root supports {supports:?} differ from the forced pattern"),
    )
}

fn lcm_u32(a: u32, b: u32) -> u32 {
    let g = gcd_u32(a, b);
    a / g * b
}

fn gcd_u32(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
