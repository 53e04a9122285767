//! Exact positivity certificates for the polynomial inequalities behind the
//! `f_theta` construction and the round-case source term, plus a sampled
//! check of the quadratic positivity along numerical `f_theta`.

use std::sync::Arc;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ftheta::{self, FThetaSolution};
use crate::poly::{rat, Poly, PolyError, Rat, UPoly};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("claim {claim} refuted: {witness}")]
    Refuted { claim: String, witness: String },
    #[error("claim {claim}: {source}")]
    Poly { claim: String, source: PolyError },
    #[error("zero polynomial after normalization")]
    ZeroPolynomial,
    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: String, hi: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SturmExact,
    BoundaryFactorizationExact,
    DenseSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Refuted,
    Inconclusive,
}

/// Evidence behind a verdict; unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Witness {
    /// Sturm sign changes at the two ends.
    pub sign_changes: Option<(usize, usize)>,
    pub roots_in_interval: Option<usize>,
    /// Exact values at the ends, as fractions.
    pub endpoint_values: Option<(String, String)>,
    pub min_value: Option<f64>,
    pub min_location: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub resolution: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub claim: String,
    pub region: String,
    pub method: Method,
    pub verdict: Verdict,
    /// Only `dense_sampling` is non-exact.
    pub exact: bool,
    pub witness: Witness,
}

impl CertificateReport {
    fn new(claim: &str, region: &str, method: Method, verdict: Verdict, witness: Witness) -> Self {
        CertificateReport {
            claim: claim.to_string(),
            region: region.to_string(),
            method,
            verdict,
            exact: method != Method::DenseSampling,
            witness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
    NonNegative,
    NonPositive,
}

/// Closed or half-open interval with rational ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Rat,
    pub hi: Rat,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: Rat, hi: Rat) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: Rat, hi: Rat) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn right_open(lo: Rat, hi: Rat) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: false }
    }

    fn describe(&self) -> String {
        format!(
            "{}{}, {}{}",
            if self.lo_closed { "[" } else { "(" },
            self.lo,
            self.hi,
            if self.hi_closed { "]" } else { ")" }
        )
    }
}

type Region = Arc<dyn Fn(&Rat, &Rat) -> bool + Send + Sync>;

/// One checkable statement.
#[derive(Clone)]
pub enum ClaimKind {
    /// `lhs == rhs` as polynomials.
    Identity { lhs: Poly, rhs: Poly },
    /// Sign of a univariate polynomial on an interval.
    Sign { p: UPoly, interval: Interval, sign: Sign },
    /// Sign of a bivariate polynomial at the lattice points `(i, j) / denom`
    /// of `[0, 1]^2` that satisfy `region`. With a seed, each point is moved
    /// by a random multiple of `1/(JITTER denom)` inside its cell.
    Lattice { p: Poly, region: Region, sign: Sign, denom: i64, seed: Option<u64> },
    /// `p(x, curve(x)) == rhs(x)` at `x = i / denom`, `i = 1..=denom`,
    /// evaluating both sides numerically in exact arithmetic.
    Pointwise { p: Poly, curve: Poly, rhs: Poly, denom: i64 },
}

#[derive(Clone)]
pub struct Claim {
    pub id: String,
    pub region: String,
    pub kind: ClaimKind,
}

fn sign_ok(v: &Rat, sign: Sign) -> bool {
    match sign {
        Sign::Positive => v.is_positive(),
        Sign::Negative => v.is_negative(),
        Sign::NonNegative => !v.is_negative(),
        Sign::NonPositive => !v.is_positive(),
    }
}

fn to_f64(v: &Rat) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Distinct roots of `p` in the open interval `(lo, hi)` with the Sturm
/// sign-change counts used.
fn roots_open(p: &UPoly, lo: &Rat, hi: &Rat) -> (usize, (usize, usize)) {
    let mut q = p.clone();
    while q.degree() > 0 && q.eval(lo).is_zero() {
        q = q.deflate(lo);
    }
    while q.degree() > 0 && q.eval(hi).is_zero() {
        q = q.deflate(hi);
    }
    let chain = q.sturm_chain();
    let (va, vb) = (UPoly::sign_changes(&chain, lo), UPoly::sign_changes(&chain, hi));
    (va.saturating_sub(vb), (va, vb))
}

fn check_sign(id: &str, p: &UPoly, iv: &Interval, sign: Sign) -> Result<CertificateReport, CertificateError> {
    if p.is_zero() {
        return Err(CertificateError::ZeroPolynomial);
    }
    if iv.lo >= iv.hi {
        return Err(CertificateError::EmptyInterval { lo: iv.lo.to_string(), hi: iv.hi.to_string() });
    }
    let (pl, ph) = (p.eval(&iv.lo), p.eval(&iv.hi));
    let (roots, changes) = roots_open(p, &iv.lo, &iv.hi);
    let mid = (&iv.lo + &iv.hi) / rat(2, 1);
    let pm = p.eval(&mid);
    let witness = Witness {
        sign_changes: Some(changes),
        roots_in_interval: Some(roots),
        endpoint_values: Some((pl.to_string(), ph.to_string())),
        ..Witness::default()
    };
    let strict = matches!(sign, Sign::Positive | Sign::Negative);
    // With no interior roots the sign is constant on the open interval.
    let interior_ok = roots == 0 && sign_ok(&pm, sign) && !pm.is_zero();
    let ends_ok = [(iv.lo_closed, &pl), (iv.hi_closed, &ph)].iter().all(|(closed, v)| !closed || sign_ok(v, sign));
    let verdict = if interior_ok && ends_ok {
        Verdict::Verified
    } else if (strict && roots > 0) || !sign_ok(&pm, sign) || !ends_ok {
        Verdict::Refuted
    } else {
        Verdict::Inconclusive
    };
    Ok(CertificateReport::new(id, &iv.describe(), Method::SturmExact, verdict, witness))
}

/// Positivity of a univariate polynomial on the closed interval, exactly.
pub fn sturm_positive(coeffs: &[Rat], interval: (Rat, Rat)) -> Result<CertificateReport, CertificateError> {
    let p = UPoly::new(coeffs.to_vec());
    check_sign("sturm_positive", &p, &Interval::closed(interval.0, interval.1), Sign::Positive)
}

/// Subdivisions of a lattice cell available to seeded jitter.
pub const JITTER: i64 = 64;

fn lattice_points(denom: i64, seed: Option<u64>) -> Vec<(Rat, Rat)> {
    match seed {
        None => (0..=denom).flat_map(|i| (0..=denom).map(move |j| (rat(i, denom), rat(j, denom)))).collect(),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fine = JITTER * denom;
            let mut pts = Vec::with_capacity((denom * denom) as usize);
            for i in 0..denom {
                for j in 0..denom {
                    let (di, dj) = (rng.gen_range(0..JITTER), rng.gen_range(0..JITTER));
                    pts.push((rat(JITTER * i + di, fine), rat(JITTER * j + dj, fine)));
                }
            }
            pts
        }
    }
}

fn check_lattice(id: &str, region_text: &str, p: &Poly, region: &Region, sign: Sign, denom: i64, seed: Option<u64>) -> CertificateReport {
    let mut min: Option<(Rat, Rat, Rat)> = None;
    let mut bad = None;
    let mut samples = 0;
    let flip = matches!(sign, Sign::Negative | Sign::NonPositive);
    for (x, y) in lattice_points(denom, seed) {
        if !region(&x, &y) {
            continue;
        }
        samples += 1;
        let v = p.eval(&[x.clone(), y.clone()]);
        if bad.is_none() && !sign_ok(&v, sign) {
            bad = Some((x.clone(), y.clone()));
        }
        let key = if flip { -v.clone() } else { v.clone() };
        if min.as_ref().is_none_or(|m| key < m.0) {
            min = Some((key, x, y));
        }
    }
    let (verdict, loc) = match (&bad, samples) {
        (_, 0) => (Verdict::Inconclusive, None),
        (Some((x, y)), _) => (Verdict::Refuted, Some(vec![to_f64(x), to_f64(y)])),
        (None, _) => (Verdict::Verified, min.as_ref().map(|m| vec![to_f64(&m.1), to_f64(&m.2)])),
    };
    let witness = Witness {
        min_value: min.as_ref().map(|m| if flip { -to_f64(&m.0) } else { to_f64(&m.0) }),
        min_location: loc,
        samples: Some(samples),
        resolution: Some(format!("1/{denom}")),
        note: Some(match seed {
            None => "exact rational evaluation at lattice points".into(),
            Some(s) => format!("exact rational evaluation at lattice points jittered with seed {s}"),
        }),
        ..Witness::default()
    };
    CertificateReport::new(id, region_text, Method::DenseSampling, verdict, witness)
}

/// Check one claim; `Refuted` verdicts are returned, not raised.
pub fn check_claim(claim: &Claim) -> Result<CertificateReport, CertificateError> {
    let id = claim.id.as_str();
    match &claim.kind {
        ClaimKind::Identity { lhs, rhs } => {
            let diff = lhs - rhs;
            let verdict = if diff.is_zero() { Verdict::Verified } else { Verdict::Refuted };
            let note = (!diff.is_zero()).then(|| format!("difference {diff:?}"));
            let witness = Witness { note, ..Witness::default() };
            Ok(CertificateReport::new(id, &claim.region, Method::BoundaryFactorizationExact, verdict, witness))
        }
        ClaimKind::Sign { p, interval, sign } => {
            let mut r = check_sign(id, p, interval, *sign)?;
            r.region = format!("{} on {}", claim.region, r.region);
            Ok(r)
        }
        ClaimKind::Lattice { p, region, sign, denom, seed } => {
            Ok(check_lattice(id, &claim.region, p, region, *sign, *denom, *seed))
        }
        ClaimKind::Pointwise { p, curve, rhs, denom } => {
            let mut mismatch = None;
            for i in 1..=*denom {
                let x = [rat(i, *denom)];
                let y = curve.eval(&x);
                if p.eval(&[x[0].clone(), y]) != rhs.eval(&x) {
                    mismatch = Some(to_f64(&x[0]));
                    break;
                }
            }
            let witness = Witness {
                samples: Some(*denom as usize),
                resolution: Some(format!("1/{denom}")),
                min_location: mismatch.map(|x| vec![x]),
                ..Witness::default()
            };
            let verdict = if mismatch.is_none() { Verdict::Verified } else { Verdict::Refuted };
            Ok(CertificateReport::new(id, &claim.region, Method::BoundaryFactorizationExact, verdict, witness))
        }
    }
}

/// Check every claim, stopping at the first refutation.
pub fn certify(claims: &[Claim]) -> Result<Vec<CertificateReport>, CertificateError> {
    let mut out = Vec::with_capacity(claims.len());
    for c in claims {
        let r = check_claim(c)?;
        if r.verdict == Verdict::Refuted {
            return Err(CertificateError::Refuted { claim: c.id.clone(), witness: format!("{:?}", r.witness) });
        }
        out.push(r);
    }
    Ok(out)
}

/// The quartic whose positivity on `[0, 1]` rules out interior critical points.
pub const QUARTIC: [i64; 5] = [80, 144, -188, -200, 307];

fn parse(id: &str, text: &str, vars: &[&str]) -> Result<Poly, CertificateError> {
    Poly::parse(text, vars).map_err(|source| CertificateError::Poly { claim: id.to_string(), source })
}

fn uni(id: &str, p: &Poly, var: usize) -> Result<UPoly, CertificateError> {
    p.univariate(var).map_err(|source| CertificateError::Poly { claim: id.to_string(), source })
}

/// All polynomial claims, in the order they are checked.
pub fn polynomial_claims() -> Result<Vec<Claim>, CertificateError> {
    let mut v: Vec<Claim> = Vec::new();
    let unit = || Interval::closed(Rat::zero(), Rat::one());
    let open_unit = || Interval::open(Rat::zero(), Rat::one());
    let mut identity = |id: &str, region: &str, lhs: Poly, rhs: Poly| {
        v.push(Claim { id: id.into(), region: region.into(), kind: ClaimKind::Identity { lhs, rhs } })
    };
    let mut signs: Vec<Claim> = Vec::new();
    let mut sign = |id: &str, region: &str, p: UPoly, interval: Interval, s: Sign| {
        signs.push(Claim { id: id.into(), region: region.into(), kind: ClaimKind::Sign { p, interval, sign: s } })
    };

    // Zeroth-order term of the T1 law, as a quadratic in y.
    let qy = ["Q", "y"];
    let src = parse("t1", "-4*y^2 - 4*Q^2*y^2 + 8*Q*y - 16*Q^3*y + 16*Q^2 - 16*Q^4", &qy)?;
    let zero2 = Poly::zero(2);
    identity("t1_source_at_y_0", "y = 0", src.substitute(1, &zero2), parse("t1", "16*Q^2 - 16*Q^4", &qy)?);
    let minus_q = parse("t1", "-1*Q", &qy)?;
    identity("t1_source_at_y_minus_q", "y = -Q", src.substitute(1, &minus_q), parse("t1", "4*Q^2 - 4*Q^4", &qy)?);
    sign("t1_source_endpoint_sign", "16 Q^2 (1 - Q^2) >= 0", UPoly::from_ints(&[0, 0, 16, 0, -16]), unit(), Sign::NonNegative);
    sign("t1_source_concave_in_y", "y^2 coefficient -4 (1 + Q^2) < 0", UPoly::from_ints(&[-4, 0, -4]), unit(), Sign::Negative);

    // Lower bound for G on soliton backgrounds.
    let gv = ["a", "b", "Q"];
    let x = parse("g", "a + Q^2 - 2", &gv)?;
    let y = parse("g", "b - Q", &gv)?;
    let two = parse("g", "2", &gv)?;
    let q2 = parse("g", "Q^2", &gv)?;
    let lower = &(&(&x + &two) * &(&x + &two))
        + &(&q2 * &(&(&two * &(&(&parse("g", "Q", &gv)? * &y) + &parse("g", "2*Q^2 - 2", &gv)?)) + &(&y * &y)));
    let t1 = parse("g", "a + 2*Q^2 - 2", &gv)?;
    let rhs = &parse("g", "a^2 + Q^2*b^2", &gv)? + &(&parse("g", "2*Q^2", &gv)? * &t1);
    identity("g_lower_bound", "polynomial identity in (a_s, b_s, Q)", lower, rhs);

    // p1 and the monotonicity of f.
    let fr = ["f", "r"];
    let p1 = parse("p1", "f^2*r + 3*f*r - 6*f - 6*r + 8", &fr)?;
    let one2 = parse("p1", "1", &fr)?;
    identity("p1_at_q_1", "Q^2 = 1", p1.substitute(1, &one2), parse("p1", "f^2 - 3*f + 2", &fr)?);
    identity("p1_slope", "d/dQ^2", p1.derivative(1), parse("p1", "f^2 + 3*f - 6", &fr)?);
    sign("p1_slope_negative", "f^2 + 3f - 6 < 0", UPoly::from_ints(&[-6, 3, 1]), unit(), Sign::Negative);
    sign("p1_at_q_1_nonnegative", "(f - 1)(f - 2) >= 0", UPoly::from_ints(&[2, -3, 1]), unit(), Sign::NonNegative);

    // p2 in the variables F = f Q^2 and r = Q^2.
    let fv = ["F", "r"];
    let p2 = parse("p2", "f^3*r^3 + 3*f^2*r^3 - 6*f^2*r^2 - 2*f*r^3 + 4*f*r + 4*r^3 - 12*r + 8", &fr)?;
    let p2t = parse("p2", "F^3 + 3*F^2*r - 6*F^2 - 2*F*r^2 + 4*F + 4*r^3 - 12*r + 8", &fv)?;
    let big_f = parse("p2", "f", &fr)?;
    let r_only = parse("p2", "r", &fr)?;
    identity(
        "p2_in_f_and_q2",
        "r^3 p2(F/r, r) = r^3 p~2(F, r)",
        p2.substitute_fraction(0, &big_f, &r_only),
        &p2t * &r_only.pow(3),
    );
    identity("p2_slope", "d/dQ^2 at fixed F", p2t.derivative(1), parse("p2", "3*F^2 - 4*F*r + 12*r^2 - 12", &fv)?);
    // Convex in F, so the slope is largest at F = 0 or F = 1.
    sign("p2_slope_at_f_0", "12 (r^2 - 1) <= 0", UPoly::from_ints(&[-12, 0, 12]), unit(), Sign::NonPositive);
    sign("p2_slope_at_f_1", "12 r^2 - 4 r - 9 < 0", UPoly::from_ints(&[-9, -4, 12]), unit(), Sign::Negative);
    let one_f = parse("p2", "1", &fv)?;
    identity("p2_at_q_1", "Q^2 = 1", p2t.substitute(1, &one_f), parse("p2", "F^3 - 3*F^2 + 2*F", &fv)?);
    sign("p2_at_q_1_nonnegative", "(F - 2)(F - 1) F >= 0", UPoly::from_ints(&[0, 2, -3, 1]), unit(), Sign::NonNegative);

    // p3.
    let p3 = parse("p3", "r^2*f^2 + 2*r^2*f - 4*r*f - 2*r^2 - 2*r + 4", &fr)?;
    identity("p3_slope", "d/dQ^2", p3.derivative(1), parse("p3", "2*f^2*r - 2 + 4*f*r - 4*f - 4*r", &fr)?);
    // Linear in r: negative at both ends.
    sign("p3_slope_at_r_0", "-2 - 4f < 0", UPoly::from_ints(&[-2, -4]), unit(), Sign::Negative);
    sign("p3_slope_at_r_1", "2 f^2 - 6 < 0", UPoly::from_ints(&[-6, 0, 2]), unit(), Sign::Negative);
    let three = parse("p3", "3", &fr)?;
    let three_f = parse("p3", "3 + f", &fr)?;
    identity(
        "p3_on_boundary",
        "(3 + f)^2 p3(f, 3/(3 + f)) = f^2",
        p3.substitute_fraction(1, &three, &three_f),
        parse("p3", "f^2", &fr)?,
    );

    // p4.
    let p4 = parse(
        "p4",
        "-1*r^3*f^3 - 7*r^3*f^2 + 10*r^2*f^2 - 10*r^3*f + 36*r^2*f - 28*r*f + 4*r^3 + 8*r^2 - 36*r + 24",
        &fr,
    )?;
    let p4t = parse(
        "p4",
        "24 - 28*F + 10*F^2 - F^3 - 7*F^2*r + 36*F*r - 36*r + 8*r^2 - 10*F*r^2 + 4*r^3",
        &fv,
    )?;
    identity("p4_in_f_and_q2", "r^3 p4(F/r, r) = r^3 p~4(F, r)", p4.substitute_fraction(0, &big_f, &r_only), &p4t * &r_only.pow(3));
    let p4_slope = parse("p4", "-7*F^2 + 36*F - 20*F*r - 36 + 16*r + 12*r^2", &fv)?;
    identity("p4_slope", "d/dQ^2 at fixed F", p4t.derivative(1), p4_slope.clone());
    let three_minus = parse("p4", "3 - F", &fv)?;
    let three_c = parse("p4", "3", &fv)?;
    identity(
        "p4_on_boundary",
        "27 p~4(F, (3 - F)/3) = F (2F^2 - 3F + 18)",
        p4t.substitute_fraction(1, &three_minus, &three_c),
        parse("p4", "2*F^3 - 3*F^2 + 18*F", &fv)?,
    );
    sign("p4_boundary_factor", "2F^2 - 3F + 18 > 0", UPoly::from_ints(&[18, -3, 2]), unit(), Sign::Positive);

    // p5 and the critical-point exclusion.
    let p5 = parse(
        "p5",
        "3/2*f^3*r^3 + 9/2*f^2*r^3 - 9*f^2*r^2 - 3*f*r^3 - 24*f*r^2 + 30*f*r - 18*r^3 + 54*r - 36",
        &fr,
    )?;
    let p5t = parse("p5", "3/2*F^3 + 9/2*F^2*r - 9*F^2 - 3*F*r^2 - 24*F*r + 30*F - 18*r^3 + 54*r - 36", &fv)?;
    identity("p5_in_f_and_q2", "r^3 p5(F/r, r) = r^3 p~5(F, r)", p5.substitute_fraction(0, &big_f, &r_only), &p5t * &r_only.pow(3));
    let p5_r = parse("p5", "9/2*F^2 - 6*F*r - 24*F - 54*r^2 + 54", &fv)?;
    let p5_f = parse("p5", "9/2*F^2 + 9*F*r - 18*F - 3*r^2 - 24*r + 30", &fv)?;
    identity("p5_slope_q2", "d/dQ^2", p5t.derivative(1), p5_r.clone());
    identity("p5_slope_f", "d/dF", p5t.derivative(0), p5_f.clone());
    identity(
        "p5_critical_line",
        "d/dQ^2 - d/dF = -3 (5Fr + 2F + 17r^2 - 8r - 8)",
        &p5_r - &p5_f,
        parse("p5", "-15*F*r - 6*F - 51*r^2 + 24*r + 24", &fv)?,
    );
    let f_num = parse("p5", "-17*r^2 + 8*r + 8", &fv)?;
    let f_den = parse("p5", "5*r + 2", &fv)?;
    let quartic = parse("p5", "307*r^4 - 200*r^3 - 188*r^2 + 144*r + 80", &fv)?;
    identity(
        "p5_critical_quartic",
        "2 (5r + 2)^2 d/dF p~5(F*(r), r) = 3 (307 r^4 - 200 r^3 - 188 r^2 + 144 r + 80)",
        p5_f.substitute_fraction(0, &f_num, &f_den).scale(&rat(2, 1)),
        quartic.scale(&rat(3, 1)),
    );
    sign("quartic_positive", "307 r^4 - 200 r^3 - 188 r^2 + 144 r + 80 > 0", UPoly::from_ints(&QUARTIC), unit(), Sign::Positive);
    let l1 = p5t.substitute(1, &parse("p5", "1", &fv)?);
    identity("p5_on_l1", "Q^2 = 1", l1, parse("p5", "3/2*F^3 - 9/2*F^2 + 3*F", &fv)?);
    sign("p5_on_l1_nonnegative", "3/2 F (1 - F)(2 - F) >= 0", uni("p5", &parse("p5", "3/2*F^3 - 9/2*F^2 + 3*F", &fv)?, 0)?, unit(), Sign::NonNegative);
    let l2 = p5t.substitute(0, &parse("p5", "1", &fv)?);
    let l2_rhs = &parse("p5", "3/2 - 3/2*r", &fv)? * &parse("p5", "12*r^2 + 14*r - 9", &fv)?;
    identity("p5_on_l2", "F = 1", l2, l2_rhs);
    let two_thirds = Interval::closed(rat(2, 3), Rat::one());
    sign("p5_on_l2_factor", "12 r^2 + 14 r - 9 > 0", UPoly::from_ints(&[-9, 14, 12]), two_thirds.clone(), Sign::Positive);
    let l3 = p5t.substitute(0, &parse("p5", "3 - 3*r", &fv)?);
    let l3_rhs = &parse("p5", "9/2 - 9/2*r", &fv)? * &parse("p5", "2*r^2 - 3*r + 3", &fv)?;
    identity("p5_on_l3", "F = 3 (1 - Q^2)", l3, l3_rhs);
    sign("p5_on_l3_factor", "2 r^2 - 3 r + 3 > 0", UPoly::from_ints(&[3, -3, 2]), two_thirds, Sign::Positive);

    // Source term of T_F2 in the round case.
    let xy = ["X", "Y"];
    let p = parse("cf2", "2*Y^2 - 3*X*Y^2 + 2*X^2*Y - 4*X*Y + 2*Y - 2*X^3 + 4*X^2 - 2*X", &xy)?;
    let curve = parse("cf2", "X - X^2", &xy)?;
    let on_curve = parse("cf2", "-3*X^5 + 6*X^4 - 3*X^3", &xy)?;
    identity("cf2_on_curve", "P(X, X - X^2) = -3 (X - 1)^2 X^3", p.substitute(1, &curve), on_curve.clone());
    sign("cf2_on_curve_negative", "-3 (X - 1)^2 X^3 < 0", uni("cf2", &on_curve, 0)?, open_unit(), Sign::Negative);
    let on_axis = parse("cf2", "-2*X^3 + 4*X^2 - 2*X", &xy)?;
    identity("cf2_on_axis", "P(X, 0) = -2 (X - 1)^2 X", p.substitute(1, &Poly::zero(2)), on_axis.clone());
    sign("cf2_on_axis_negative", "-2 (X - 1)^2 X < 0", uni("cf2", &on_axis, 0)?, open_unit(), Sign::Negative);
    let px = parse("cf2", "-6*X^2 + 8*X - 2 + 4*X*Y - 4*Y - 3*Y^2", &xy)?;
    identity("cf2_slope", "dP/dX", p.derivative(0), px.clone());
    let px_axis = uni("cf2", &px.substitute(1, &Poly::zero(2)), 0)?;
    sign("cf2_slope_on_axis", "dP/dX(X, 0) > 0", px_axis, Interval::right_open(rat(2, 3), Rat::one()), Sign::Positive);
    let cubic = parse("cf2", "3*X^3 + X^2 + 2*X - 2", &xy)?;
    identity(
        "cf2_slope_on_curve",
        "dP/dX(X, X - X^2) = (1 - X)(3X^3 + X^2 + 2X - 2)",
        px.substitute(1, &curve),
        &parse("cf2", "1 - X", &xy)? * &cubic,
    );
    sign("cf2_slope_cubic", "3X^3 + X^2 + 2X - 2 > 0", uni("cf2", &cubic, 0)?, Interval::closed(rat(2, 3), Rat::one()), Sign::Positive);
    let curve1 = Poly::parse("X - X^2", &["X"]).map_err(|source| CertificateError::Poly { claim: "cf2".into(), source })?;
    let direct = Poly::parse("-3*X^5 + 6*X^4 - 3*X^3", &["X"]).map_err(|source| CertificateError::Poly { claim: "cf2".into(), source })?;
    v.extend(signs);
    v.push(Claim {
        id: "cf2_curve_rational_points".into(),
        region: "X = i/256, i = 1..256".into(),
        kind: ClaimKind::Pointwise { p: p.clone(), curve: curve1, rhs: direct, denom: 256 },
    });
    let p_region: Region = Arc::new(|x: &Rat, y: &Rat| !y.is_negative() && *y < x - x * x);
    v.push(Claim {
        id: "cf2_negative_interior".into(),
        region: "0 <= Y < X - X^2".into(),
        kind: ClaimKind::Lattice { p: p.clone(), region: p_region, sign: Sign::Negative, denom: 256, seed: None },
    });
    let p4_region: Region = Arc::new(|f: &Rat, r: &Rat| {
        f.is_positive() && f <= r && *f <= rat(3, 1) * (Rat::one() - r)
    });
    v.push(Claim {
        id: "p4_slope_nonpositive".into(),
        region: "0 < F <= min(Q^2, 3 (1 - Q^2))".into(),
        kind: ClaimKind::Lattice { p: p4_slope, region: p4_region, sign: Sign::NonPositive, denom: 256, seed: None },
    });
    Ok(v)
}

/// Run [`polynomial_claims`] through [`certify`].
pub fn certify_polynomials() -> Result<Vec<CertificateReport>, CertificateError> {
    certify(&polynomial_claims()?)
}

/// Sample every lattice claim at seeded jittered points instead of the grid.
pub fn reseed_lattices(claims: &mut [Claim], seed: u64) {
    for c in claims.iter_mut() {
        if let ClaimKind::Lattice { seed: s, .. } = &mut c.kind {
            *s = Some(seed);
        }
    }
}

/// Replace the constant term of the quartic claim by its negative, for
/// exercising the refutation path.
pub fn inject_fault(claims: &mut [Claim]) {
    for c in claims.iter_mut().filter(|c| c.id == "quartic_positive") {
        if let ClaimKind::Sign { p, .. } = &mut c.kind {
            let mut k: Vec<Rat> = p.coeffs().to_vec();
            k[0] = -k[0].clone();
            *p = UPoly::new(k);
        }
    }
}

/// `beta = w(1) > 0` where `f <= 3 (1 - Q^2)/Q^2`, `gamma = w(3/Q^2 - 2 - f) > 0`
/// elsewhere, and `A2 < 0`, sampled at `samples` points of `(0, q_max)`.
pub fn quadratic_positive_check_profile(
    id: &str,
    f: impl Fn(f64) -> [f64; 3],
    q_max: f64,
    samples: usize,
) -> CertificateReport {
    let mut min = f64::INFINITY;
    let mut at = 0.0;
    let mut bad_a2 = 0;
    let mut zero = false;
    for i in 1..=samples {
        let q = q_max * i as f64 / (samples + 1) as f64;
        let fq = f(q);
        let [a0, a1, a2] = ftheta::w_coefficients(q, fq[0], fq[1], fq[2]);
        let z = if fq[0] <= 3.0 * (1.0 - q * q) / (q * q) { 1.0 } else { 3.0 / (q * q) - 2.0 - fq[0] };
        let w = a0 + a1 * z + a2 * z * z;
        if a2 >= 0.0 {
            bad_a2 += 1;
        }
        if w.abs() <= 1e-12 * (a0.abs() + a1.abs() + a2.abs()) {
            zero = true;
        }
        if w < min {
            min = w;
            at = q;
        }
    }
    let verdict = if zero {
        Verdict::Inconclusive
    } else if min > 0.0 && bad_a2 == 0 {
        Verdict::Verified
    } else {
        Verdict::Refuted
    };
    let note = match (zero, bad_a2) {
        (true, _) => Some("equality edge: w vanishes at a sample".to_string()),
        (_, 0) => None,
        (_, n) => Some(format!("A2 >= 0 at {n} samples")),
    };
    let witness = Witness {
        min_value: Some(min),
        min_location: Some(vec![at]),
        samples: Some(samples),
        resolution: Some(format!("dQ = {:e}", q_max / (samples + 1) as f64)),
        note,
        ..Witness::default()
    };
    CertificateReport::new(id, &format!("0 < Q < {q_max}"), Method::DenseSampling, verdict, witness)
}

/// [`quadratic_positive_check_profile`] along a solved `f_theta`, on `(0, Q_theta)`.
pub fn quadratic_positive_check(sol: &FThetaSolution) -> CertificateReport {
    let id = format!("quadratic_positive_theta_{}", sol.theta);
    quadratic_positive_check_profile(&id, |q| sol.eval(q), sol.q_theta, 2000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_square_is_refuted_on_unit_interval() {
        let r = sturm_positive(&[rat(-1, 4), Rat::zero(), Rat::one()], (Rat::zero(), Rat::one())).unwrap();
        assert_eq!(r.verdict, Verdict::Refuted);
        assert_eq!(r.witness.roots_in_interval, Some(1));
    }

    #[test]
    fn constant_one_is_verified() {
        let r = sturm_positive(&[Rat::one()], (Rat::zero(), Rat::one())).unwrap();
        assert_eq!(r.verdict, Verdict::Verified);
    }

    #[test]
    fn endpoint_root_breaks_strict_positivity_only_on_closed_ends() {
        let p = UPoly::from_ints(&[0, 1]);
        let closed = check_sign("x", &p, &Interval::closed(Rat::zero(), Rat::one()), Sign::Positive).unwrap();
        let open = check_sign("x", &p, &Interval::open(Rat::zero(), Rat::one()), Sign::Positive).unwrap();
        assert_eq!(closed.verdict, Verdict::Refuted);
        assert_eq!(open.verdict, Verdict::Verified);
    }

    #[test]
    fn zero_polynomial_is_an_error() {
        assert_eq!(sturm_positive(&[], (Rat::zero(), Rat::one())), Err(CertificateError::ZeroPolynomial));
    }

    #[test]
    fn all_claims_hold() {
        let reports = certify_polynomials().unwrap();
        for r in &reports {
            assert_eq!(r.verdict, Verdict::Verified, "{r:?}");
        }
        assert!(reports.iter().any(|r| r.method == Method::DenseSampling && !r.exact));
    }

    #[test]
    fn injected_fault_is_refuted() {
        let mut claims = polynomial_claims().unwrap();
        inject_fault(&mut claims);
        match certify(&claims) {
            Err(CertificateError::Refuted { claim, .. }) => assert_eq!(claim, "quartic_positive"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_profile_sits_on_the_equality_edge() {
        let r = quadratic_positive_check_profile("zero", |_| [0.0, 0.0, 0.0], 0.9, 50);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn reseeded_lattices_still_hold_and_move_the_points() {
        let mut claims = polynomial_claims().unwrap();
        reseed_lattices(&mut claims, 7);
        for c in claims.iter().filter(|c| matches!(c.kind, ClaimKind::Lattice { .. })) {
            let r = check_claim(c).unwrap();
            assert_eq!(r.verdict, Verdict::Verified, "{r:?}");
        }
        assert_ne!(lattice_points(8, Some(1)), lattice_points(8, Some(2)));
        assert_eq!(lattice_points(8, Some(3)), lattice_points(8, Some(3)));
    }
}
