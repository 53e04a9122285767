//! Registry of evolution laws for scalar quantities built from the warping
//! functions. Every law has the form
//!
//! ```text
//! q_t = q_ss + drift * q_s + reaction
//! ```
//!
//! at a fixed point of the manifold, with `drift` and `reaction` pointwise
//! functions of `(a, b, a_s, b_s, a_ss, b_ss)`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::Serialize;
use thiserror::Error;

use crate::flow::{self, FlowError, Gauge};
use crate::ftheta;
use crate::geometry;
use crate::run::{self, FlowConfig, OutputCadence, Trajectory};
use crate::state::{MetricState, Parity};

/// Pointwise jet of the warping functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub a: f64,
    pub b: f64,
    pub a_s: f64,
    pub b_s: f64,
    pub a_ss: f64,
    pub b_ss: f64,
}

/// Quantity, drift coefficient and reaction term of a law at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawTerms {
    pub q: f64,
    pub drift: f64,
    pub reaction: f64,
}

/// A profile function `f(Q)` returning `(f, f', f'')`, possibly with a
/// junction in `Q` where it is only continuous.
#[derive(Clone)]
pub struct Profile {
    f: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
    pub junction: Option<f64>,
}

impl Profile {
    pub fn new(f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static, junction: Option<f64>) -> Self {
        Profile { f: Arc::new(f), junction }
    }

    pub fn eval(&self, q: f64) -> [f64; 3] {
        (self.f)(q)
    }
}

type Eval = Arc<dyn Fn(&Jet) -> LawTerms + Send + Sync>;

#[derive(Clone)]
pub struct EvolutionLaw {
    pub name: String,
    /// Reflection parity of the quantity across the tip.
    pub parity: Parity,
    /// Only valid on states with `a = b` everywhere.
    pub round_only: bool,
    /// Value of `Q` where the law's quantity is not smooth; residuals skip
    /// stencils that straddle it.
    pub junction: Option<f64>,
    /// Radius, in units of `b(o)`, around the tip left out of residuals
    /// (see [`TIP_EXCLUSION`] and [`QUOTIENT_EXCLUSION`]).
    pub tip_exclusion: f64,
    eval: Eval,
}

impl fmt::Debug for EvolutionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolutionLaw")
            .field("name", &self.name)
            .field("parity", &self.parity)
            .field("round_only", &self.round_only)
            .finish()
    }
}

impl EvolutionLaw {
    fn new(name: &str, parity: Parity, eval: impl Fn(&Jet) -> LawTerms + Send + Sync + 'static) -> Self {
        EvolutionLaw { name: name.to_string(), parity, round_only: false, junction: None, tip_exclusion: TIP_EXCLUSION, eval: Arc::new(eval) }
    }

    fn round(name: &str, parity: Parity, eval: impl Fn(&Jet) -> LawTerms + Send + Sync + 'static) -> Self {
        EvolutionLaw { round_only: true, ..Self::new(name, parity, eval) }
    }

    pub fn terms(&self, jet: &Jet) -> LawTerms {
        (self.eval)(jet)
    }
}

/// Common shorthands at one point.
struct V {
    a: f64,
    b: f64,
    q: f64,
    a_s: f64,
    b_s: f64,
    a_ss: f64,
    b_ss: f64,
    x: f64,
    y: f64,
    b2: f64,
}

impl V {
    fn of(j: &Jet) -> V {
        let q = j.a / j.b;
        V {
            a: j.a,
            b: j.b,
            q,
            a_s: j.a_s,
            b_s: j.b_s,
            a_ss: j.a_ss,
            b_ss: j.b_ss,
            x: j.a_s + q * q - 2.0,
            y: j.b_s - q,
            b2: j.b * j.b,
        }
    }

    /// Drift of the operator `L = d_ss + (2 b_s/b - a_s/a) d_s`.
    fn l(&self) -> f64 {
        2.0 * self.b_s / self.b - self.a_s / self.a
    }

    /// Drift shared by the `Z`-type laws.
    fn z(&self) -> f64 {
        3.0 * self.a_s / self.a - 2.0 * self.b_s / self.b
    }
}

fn law(q: f64, drift: f64, reaction: f64) -> LawTerms {
    LawTerms { q, drift, reaction }
}

/// Zeroth-order term shared by the `T1` and `Z1` laws (before dividing by `b^2`).
fn t1_source(q: f64, y: f64) -> f64 {
    -4.0 * (1.0 + q * q) * y * y + 8.0 * q * (1.0 - 2.0 * q * q) * y + 16.0 * q * q * (1.0 - q * q)
}

/// `H = b b_ss - sg a_s^2 - b_s^2 + sg C`; `sg = -1` gives `H-`, `sg = +1` gives `H+`.
fn h_law(v: &V, sg: f64, c: f64) -> LawTerms {
    let (a, b, a1, b1, a2) = (v.a, v.b, v.a_s, v.b_s, v.a_ss);
    let h = b * v.b_ss - sg * a1 * a1 - b1 * b1 + sg * c;
    let k = 2.0 * a1 * a1 / (a * a) + 4.0 * a * a / b.powi(4) + 4.0 * b1 * b1 / (b * b);
    let reaction = -h * k + sg * c * k
        + sg * 2.0 * a2 * a2
        + a2 * (-2.0 * b * a1 * b1 / (a * a) - sg * 8.0 * a1 * b1 / b + sg * 4.0 * a1 * a1 / a + 4.0 * a / (b * b))
        + 2.0 * b * a1.powi(3) * b1 / a.powi(3)
        - 32.0 * a * a1 * b1 / b.powi(3)
        - sg * 16.0 * a.powi(3) * a1 * b1 / b.powi(5)
        + 4.0 * a1 * a1 / (b * b)
        + sg * 8.0 * a * a * a1 * a1 / b.powi(4)
        - sg * 2.0 * a1.powi(4) / (a * a)
        + 32.0 * a * a * b1 * b1 / b.powi(4)
        - 16.0 * b1 * b1 / (b * b);
    law(h, a1 / a - 2.0 * b1 / b, reaction)
}

/// Coefficients `(A0, A1, A2)` of the `Z_theta` law, functions of `Q` and `f, f', f''` at `Q`.
pub fn a_coefficients(q: f64, f: [f64; 3]) -> [f64; 3] {
    let [f, fp, fpp] = f;
    let (q2, q3, q4) = (q * q, q * q * q, q * q * q * q);
    let a0 = -q4 * f * f * fpp - 2.0 * q4 * f * fpp - q4 * fpp + 4.0 * q2 * f * fpp + 4.0 * q2 * fpp - 4.0 * fpp
        - 3.0 * q3 * f * f * fp
        - 6.0 * q3 * f * fp
        - 7.0 * q3 * fp
        + 12.0 * q * f * fp
        + 16.0 * q * fp
        - 12.0 * fp / q
        - 2.0 * q2 * f
        + 8.0 * f
        - 2.0 * q2
        - 4.0;
    let a1 = -2.0 * q4 * f * fpp - 2.0 * q4 * fpp + 4.0 * q2 * fpp - 8.0 * q3 * f * fp - 8.0 * q3 * fp + 16.0 * q * fp
        - 4.0 * q2 * f * f
        - 8.0 * q2 * f
        + 8.0 * f
        + 4.0 * q2
        + 8.0;
    let a2 = -q4 * fpp - 5.0 * q3 * fp - 2.0 * q2 * f - 2.0 * q2 - 4.0;
    [a0, a1, a2]
}

/// Coefficients `(C0, C1, C2)` of the `Z_theta` law (after eliminating `a_s`).
pub fn c_coefficients(q: f64, b_s: f64, f: [f64; 3]) -> [f64; 3] {
    let [a0, a1, a2] = a_coefficients(q, f);
    let [f, fp, fpp] = f;
    let (q2, q3, q4) = (q * q, q * q * q, q * q * q * q);
    let w = b_s / q;
    let c0 = a0 + a1 * w + a2 * w * w;
    let c1 = 2.0 * q3 * b_s * fpp + 8.0 * q2 * b_s * fp + 8.0 * f * q * b_s + 8.0 * q * b_s - 8.0 * b_s / q
        + 2.0 * b_s * b_s
        + 2.0 * f * q4 * fpp
        + 2.0 * q4 * fpp
        - 4.0 * q2 * fpp
        + 6.0 * f * q3 * fp
        + 6.0 * q3 * fp
        - 12.0 * q * fp
        + 2.0 * q2
        - 8.0;
    let c2 = -4.0 * q * b_s - q4 * fpp - 3.0 * q3 * fp;
    [c0, c1, c2]
}

/// `W_theta = w(b_s/Q - Z)` with `w(z) = A0 + A1 z + A2 z^2`.
pub fn w_theta(q: f64, b_s: f64, z: f64, f: [f64; 3]) -> f64 {
    let [a0, a1, a2] = a_coefficients(q, f);
    let u = b_s / q - z;
    a0 + a1 * u + a2 * u * u
}

/// `D_theta = C1 + Z C2 + A1 - A2 (Z - 2 b_s/Q)`, so that `W + Z D = C0 + C1 Z + C2 Z^2`.
pub fn d_theta(q: f64, b_s: f64, z: f64, f: [f64; 3]) -> f64 {
    let [_, a1, a2] = a_coefficients(q, f);
    let [_, c1, c2] = c_coefficients(q, b_s, f);
    c1 + z * c2 + a1 - a2 * (z - 2.0 * b_s / q)
}

/// The `Z_theta = x/Q^2 + f(Q)` law for a caller-supplied profile.
pub fn z_theta_law(name: &str, f: Profile) -> EvolutionLaw {
    let junction = f.junction;
    let law_ = EvolutionLaw::new(name, Parity::Even, move |j| {
        let v = V::of(j);
        let fq = f.eval(v.q);
        let z = v.x / (v.q * v.q) + fq[0];
        let [c0, c1, c2] = c_coefficients(v.q, v.b_s, fq);
        law(z, v.z(), (c0 + c1 * z + c2 * z * z) / v.b2)
    });
    EvolutionLaw { junction, tip_exclusion: QUOTIENT_EXCLUSION, ..law_ }
}

/// Tip exclusion used by the laws of quantities divided by `Q^2`.
pub const QUOTIENT_EXCLUSION: f64 = 0.5;

/// Tip exclusion of every other law. At a fixed node index next to the tip
/// the `1/a` coefficients and the tip closure leave an error that decays only
/// like `h` to `h^2`, whatever the law; a fixed physical radius avoids it.
pub const TIP_EXCLUSION: f64 = 0.1;

/// The law of `f(Q)` itself.
pub fn f_of_q_law(name: &str, f: Profile) -> EvolutionLaw {
    let junction = f.junction;
    let law_ = EvolutionLaw::new(name, Parity::Even, move |j| {
        let v = V::of(j);
        let [f0, fp, fpp] = f.eval(v.q);
        let (q, a1, b1) = (v.q, v.a_s, v.b_s);
        let c = (8.0 * a1 * b1 - 3.0 * a1 * a1 / q - 5.0 * q * b1 * b1 + 4.0 * q * (1.0 - q * q)) * fp
            - (a1 - q * b1).powi(2) * fpp;
        law(f0, v.z(), c / v.b2)
    });
    EvolutionLaw { junction, ..law_ }
}

/// Source term `C_F` of the round-case law for `T_F = b b_ss + F(X)`,
/// `X = 1 - b_s^2`, `Y = -b b_ss`.
pub fn c_f(x: f64, y: f64, f: [f64; 3]) -> f64 {
    let [_, fp, fpp] = f;
    4.0 * x * x - 4.0 * x * y - 4.0 * x - 2.0 * y * y + 4.0 * y
        + 2.0 * (2.0 * x * x - 2.0 * x * y - 2.0 * x + y * y + 2.0 * y) * fp
        + 4.0 * (x - 1.0) * y * y * fpp
}

/// The polynomial with `C_F2 = 4 P(X, Y)`.
pub fn p_xy(x: f64, y: f64) -> f64 {
    (2.0 - 3.0 * x) * y * y + (2.0 * x * x - 4.0 * x + 2.0) * y - 2.0 * (x - 1.0).powi(2) * x
}

fn round_t_law(name: &str, f: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> EvolutionLaw {
    EvolutionLaw::round(name, Parity::Even, move |j| {
        let xx = 1.0 - j.b_s * j.b_s;
        let yy = -j.b * j.b_ss;
        let fx = f(xx);
        law(-yy + fx[0], -j.b_s / j.b, c_f(xx, yy, fx) / (j.b * j.b))
    })
}

/// Law of `y` with the first-order term `(a_s/a) y` taken literally instead of
/// `(a_s/a) y_s`. Residual tests single it out as inconsistent with the flow.
pub fn literal_y_variant() -> EvolutionLaw {
    EvolutionLaw::new("y (first-order term on y)", Parity::Odd, |j| {
        let v = V::of(j);
        let r = -v.y / (v.a * v.a) * ((v.x + 2.0).powi(2) + v.q * v.q * (2.0 * v.x + v.y * v.y));
        // The extra term is folded into the reaction so the drift stays zero.
        law(v.y, 0.0, v.a_s / v.a * v.y + r)
    })
}

/// All laws for general states plus the round (`a = b`) specializations.
/// `profile` supplies `f` for the `Z_theta` and `f(Q)` laws.
pub fn registry_with(profile: Profile, c_hpm: f64) -> Vec<EvolutionLaw> {
    use Parity::{Even, Odd};
    let mut v = vec![
        EvolutionLaw::new("Q", Odd, |j| {
            let v = V::of(j);
            law(v.q, 3.0 * v.b_s / v.b, 4.0 * v.q * (1.0 - v.q * v.q) / v.b2)
        }),
        EvolutionLaw::new("a_s", Even, |j| {
            let v = V::of(j);
            let r = -2.0 * v.a_s * v.b_s * v.b_s - 6.0 * v.q * v.q * v.a_s + 8.0 * v.q.powi(3) * v.b_s;
            law(v.a_s, v.l(), r / v.b2)
        }),
        EvolutionLaw::new("Q b_s", Even, |j| {
            let v = V::of(j);
            let (q, a1, b1) = (v.q, v.a_s, v.b_s);
            let r = 4.0 * q * q * a1 - 10.0 * q.powi(3) * b1 - 2.0 * q * b1.powi(3) + 8.0 * q * b1;
            law(q * b1, v.l(), r / v.b2)
        }),
        EvolutionLaw::new("Q^2", Even, |j| {
            let v = V::of(j);
            let (q, a1, b1) = (v.q, v.a_s, v.b_s);
            let r = 4.0 * q * a1 * b1 - 4.0 * q * q * b1 * b1 - 8.0 * q.powi(4) + 8.0 * q * q;
            law(q * q, v.l(), r / v.b2)
        }),
        EvolutionLaw::new("b_s", Odd, |j| {
            let v = V::of(j);
            let (q, a1, b1) = (v.q, v.a_s, v.b_s);
            let r = -a1 * a1 * b1 / (q * q) + 4.0 * q * a1 - 6.0 * q * q * b1 - b1.powi(3) + 4.0 * b1;
            law(b1, a1 / v.a, r / v.b2)
        }),
        EvolutionLaw::new("x", Even, |j| {
            let v = V::of(j);
            let (q, x, y) = (v.q, v.x, v.y);
            let r = -2.0 * (2.0 * q * q + y * y) * x - 2.0 * (q * q + 2.0) * y * y;
            law(x, v.l(), r / v.b2)
        }),
        EvolutionLaw::new("Q y", Even, |j| {
            let v = V::of(j);
            let (q, x, y) = (v.q, v.x, v.y);
            law(q * y, v.l(), -2.0 * q * y * (2.0 * (q * q + x) + q * y + y * y) / v.b2)
        }),
        EvolutionLaw::new("y", Odd, |j| {
            let v = V::of(j);
            let r = -v.y / (v.a * v.a) * ((v.x + 2.0).powi(2) + v.q * v.q * (2.0 * v.x + v.y * v.y));
            law(v.y, v.a_s / v.a, r)
        }),
        EvolutionLaw::new("y/Q", Even, |j| {
            let v = V::of(j);
            let w = v.y / v.q;
            law(w, v.z(), 2.0 * w * (2.0 + w) * (v.q * v.b_s - 2.0 * v.a_s) / v.b2)
        }),
        EvolutionLaw::new("T1", Even, |j| {
            let v = V::of(j);
            let (q, y) = (v.q, v.y);
            let t1 = v.a_s + 2.0 * q * q - 2.0;
            law(t1, v.l(), (t1_source(q, y) + 2.0 * t1 * y * (2.0 * q - y)) / v.b2)
        }),
        EvolutionLaw::new("T2", Even, |j| {
            let v = V::of(j);
            let (q, y) = (v.q, v.y);
            let t2 = q * y - v.x;
            let r = 4.0 * (1.0 - q * q) * y * y - 2.0 * t2 * ((v.b_s - 2.0 * q).powi(2) + q * q);
            law(t2, v.l(), r / v.b2)
        }),
        EvolutionLaw::new("T3", Even, |j| {
            let v = V::of(j);
            let (q, y) = (v.q, v.y);
            let t3 = v.a_s - q * v.b_s - q * q + 1.0;
            let r = 2.0 * (1.0 - q * q) * y * y - 2.0 * t3 * ((v.b_s + q).powi(2) + 4.0 * q * q);
            law(t3, v.l(), r / v.b2)
        }),
        EvolutionLaw::new("T4", Even, |j| {
            let v = V::of(j);
            let (q, b1) = (v.q, v.b_s);
            let t4 = v.a_s - 0.5 * q * b1 - (1.0 - q * q);
            let r = b1 * (5.0 * q.powi(3) - 2.0 * b1) - 2.0 * t4 * (4.0 * q * q - 2.0 * q * b1 + b1 * b1);
            law(t4, v.l(), r / v.b2)
        }),
        EvolutionLaw::new("H-", Even, move |j| h_law(&V::of(j), -1.0, c_hpm)),
        EvolutionLaw::new("H+", Even, move |j| h_law(&V::of(j), 1.0, c_hpm)),
        EvolutionLaw::new("x/Q^2", Even, |j| {
            let v = V::of(j);
            let (q, a1, b1) = (v.q, v.a_s, v.b_s);
            let (q2, q3) = (q * q, q * q * q);
            let c = -4.0 * a1 * a1 * b1 / q3 + 2.0 * a1 * b1 * b1 / q2 + 8.0 * a1 * b1 / q3 - 8.0 * a1 / q2 + 2.0 * a1
                - 8.0 * b1 * b1 / q2
                + 8.0 * q * b1
                + 16.0 / q2
                - 16.0;
            law(v.x / q2, v.z(), c / v.b2)
        }),
        EvolutionLaw::new("Z1", Even, |j| {
            let v = V::of(j);
            let (q, b1) = (v.q, v.b_s);
            let z = v.x / (q * q) + 1.0;
            let c0 = t1_source(q, v.y) / (q * q);
            let c1 = 16.0 * q * b1 - 8.0 * b1 / q + 2.0 * b1 * b1 + 2.0 * q * q - 8.0;
            let c2 = -4.0 * q * b1;
            law(z, v.z(), (c0 + c1 * z + c2 * z * z) / v.b2)
        }),
    ];
    for l in v.iter_mut().filter(|l| l.name == "x/Q^2" || l.name == "Z1") {
        l.tip_exclusion = QUOTIENT_EXCLUSION;
    }
    v.push(z_theta_law("Z_theta", profile.clone()));
    v.push(f_of_q_law("f(Q)", profile));
    v.extend([
        EvolutionLaw::round("round b", Even, |j| law(j.b, 0.0, 2.0 * (j.b_s * j.b_s - 1.0) / j.b)),
        EvolutionLaw::round("round b_s", Odd, |j| {
            law(j.b_s, j.b_s / j.b, 2.0 * j.b_s * (1.0 - j.b_s * j.b_s) / (j.b * j.b))
        }),
        EvolutionLaw::round("round b_ss", Even, |j| {
            let (b, b1, b2) = (j.b, j.b_s, j.b_ss);
            let r = -2.0 * b2 * b2 / b + 4.0 * (b1 * b1 - 1.0) * b1 * b1 / b.powi(3) - 5.0 * b1 * b1 * b2 / (b * b)
                - 2.0 * (b1 * b1 - 1.0) * b2 / (b * b);
            law(b2, b1 / b, r)
        }),
        round_t_law("round T_F0", |_| [0.0; 3]),
        round_t_law("round T_F1", |x| [x, 1.0, 0.0]),
        round_t_law("round T_F2", |x| [x - x * x, 1.0 - 2.0 * x, -2.0]),
    ]);
    v
}

/// `theta` of the `f_theta` member used by [`registry`].
pub const DEFAULT_THETA: f64 = 0.5;

/// Registry with `f_theta` at [`DEFAULT_THETA`]; use [`registry_with`] to
/// supply another profile.
pub fn registry(c_hpm: f64) -> Vec<EvolutionLaw> {
    static DEFAULT: OnceLock<Profile> = OnceLock::new();
    let p = DEFAULT.get_or_init(|| {
        // A valid theta and step never fail.
        ftheta::solve_ftheta(DEFAULT_THETA, 1e-4).map(|s| s.profile()).unwrap_or_else(|_| Profile::new(|_| [1.0, 0.0, 0.0], None))
    });
    registry_with(p.clone(), c_hpm)
}

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error("window [{0}, {1}] holds no equally spaced triple of snapshots")]
    NoTriples(f64, f64),
    #[error("snapshots at t = {0} and t = {1} live on different grids")]
    GridChanged(f64, f64),
    #[error("law {law} is declared odd but extrapolates to {value} at the tip")]
    Parity { law: String, value: f64 },
    #[error("law {law} needs states with a = b")]
    NotRound { law: String },
    #[error("need at least 3 resolutions, got {0}")]
    TooFewResolutions(usize),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Nodes at each end left out of residual norms.
pub const EXCLUDED_END_NODES: usize = 3;

/// A law evaluated on one state: the quantity, its `s`-derivative, the
/// claimed rate `q_ss + drift q_s + reaction`, and where the quantity is smooth.
#[derive(Debug, Clone)]
pub struct LawFields {
    pub q: Vec<f64>,
    pub q_s: Vec<f64>,
    pub spatial: Vec<f64>,
    pub smooth: Vec<bool>,
}

pub fn law_fields(law: &EvolutionLaw, state: &MetricState) -> Result<LawFields, ResidualError> {
    let n = state.len();
    if law.round_only && state.a().iter().zip(state.b()).any(|(a, b)| (a - b).abs() > 1e-12 * b) {
        return Err(ResidualError::NotRound { law: law.name.clone() });
    }
    let d = state.derivatives();
    let first = usize::from(state.is_tip());
    let mut q = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut reaction = vec![0.0; n];
    let mut ratio = vec![0.0; n];
    for j in first..n {
        let jet = Jet {
            a: state.a()[j],
            b: state.b()[j],
            a_s: d.a_s[j],
            b_s: d.b_s[j],
            a_ss: d.a_ss[j],
            b_ss: d.b_ss[j],
        };
        let t = law.terms(&jet);
        q[j] = t.q;
        drift[j] = t.drift;
        reaction[j] = t.reaction;
        ratio[j] = jet.a / jet.b;
    }
    if state.is_tip() && n > 4 {
        let s = geometry::radial_distance(state);
        match law.parity {
            Parity::Odd => {
                let lin = q[1] - s[1] * (q[2] - q[1]) / (s[2] - s[1]);
                let scale = q[1].abs().max(q[2].abs()).max(q[3].abs());
                if lin.abs() > 0.5 * scale && lin.abs() > 1e-8 {
                    return Err(ResidualError::Parity { law: law.name.clone(), value: lin });
                }
                q[0] = 0.0;
            }
            _ => q[0] = ftheta::even_limit([s[1], s[2], s[3]], [q[1], q[2], q[3]]),
        }
    }
    let (q_s, q_ss) = state.s_derivs(&q, law.parity, &d.u_xi);
    let spatial = (0..n).map(|j| q_ss[j] + drift[j] * q_s[j] + reaction[j]).collect();
    let mut smooth = vec![true; n];
    if let Some(qj) = law.junction {
        for (j, ok) in smooth.iter_mut().enumerate() {
            let lo = j.saturating_sub(2);
            let hi = (j + 2).min(n - 1);
            let side = |i: usize| ratio[i] >= qj;
            *ok = (lo..=hi).all(|i| side(i) == side(j));
        }
    }
    Ok(LawFields { q, spatial, q_s, smooth })
}

/// Residual of one law at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualSample {
    /// Number of grid intervals.
    pub resolution: usize,
    pub max_residual: f64,
    pub l2_residual: f64,
    /// Centred time differences used.
    pub centres: usize,
}

/// Residual of `q_t` at fixed points against the law over every equally
/// spaced snapshot triple in `window`, excluding [`EXCLUDED_END_NODES`] at
/// each end. In the arclength gauge the rate at fixed `s` is converted to a
/// fixed point with `ds/dt`.
pub fn evolution_residual(law: &EvolutionLaw, traj: &Trajectory, window: (f64, f64)) -> Result<ResidualSample, ResidualError> {
    let tol = 1e-12 * window.1.abs().max(1.0);
    let snaps: Vec<&MetricState> =
        traj.snapshots.iter().filter(|s| s.t() >= window.0 - tol && s.t() <= window.1 + tol).collect();
    let mut max = 0.0f64;
    let mut l2_sum = 0.0;
    let mut centres = 0;
    let mut resolution = 0;
    for w in snaps.windows(3) {
        let (m, c, p) = (w[0], w[1], w[2]);
        let (d0, d1) = (c.t() - m.t(), p.t() - c.t());
        if !(d0 > 0.0) || (d0 - d1).abs() > 1e-6 * d0 {
            continue;
        }
        for (x, y) in [(m, c), (c, p)] {
            if x.grid().nodes() != y.grid().nodes() {
                return Err(ResidualError::GridChanged(x.t(), y.t()));
            }
        }
        let fm = law_fields(law, m)?;
        let fc = law_fields(law, c)?;
        let fp = law_fields(law, p)?;
        let velocity = match traj.config.gauge {
            Gauge::Arclength => Some(flow::ds_dt(c)?),
            Gauge::Fixed => None,
        };
        let n = c.len();
        let s = geometry::radial_distance(c);
        let (mut l2, mut len) = (0.0, 0.0);
        let s_min = if c.is_tip() { law.tip_exclusion * c.b()[0] } else { 0.0 };
        let lo = EXCLUDED_END_NODES.max(s.partition_point(|v| *v < s_min));
        let hi = n.saturating_sub(EXCLUDED_END_NODES);
        for j in lo..hi {
            if !(fm.smooth[j] && fc.smooth[j] && fp.smooth[j]) {
                continue;
            }
            let mut rate = (fp.q[j] - fm.q[j]) / (2.0 * d0);
            if let Some(v) = &velocity {
                rate += v[j] * fc.q_s[j];
            }
            let r = (rate - fc.spatial[j]).abs();
            max = max.max(r);
            let wgt = 0.5 * (s[(j + 1).min(n - 1)] - s[j - 1]);
            l2 += r * r * wgt;
            len += wgt;
        }
        if len > 0.0 {
            l2_sum += l2 / len;
        }
        centres += 1;
        resolution = c.grid().intervals();
    }
    if centres == 0 {
        return Err(ResidualError::NoTriples(window.0, window.1));
    }
    Ok(ResidualSample { resolution, max_residual: max, l2_residual: (l2_sum / centres as f64).sqrt(), centres })
}

/// Residuals of one law over a resolution ladder with observed orders.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub law: String,
    pub samples: Vec<ResidualSample>,
    /// `ln(r_i / r_{i+1}) / ln(n_{i+1} / n_i)` for consecutive max residuals.
    pub orders: Vec<f64>,
    /// Smallest of `orders`.
    pub order: f64,
}

/// One CSV row per resolution: `law, resolution, max_residual, l2_residual, order`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualRow {
    pub law: String,
    pub resolution: usize,
    pub max_residual: f64,
    pub l2_residual: f64,
    pub order: f64,
}

impl ResidualReport {
    pub fn rows(&self) -> Vec<ResidualRow> {
        self.samples
            .iter()
            .map(|s| ResidualRow {
                law: self.law.clone(),
                resolution: s.resolution,
                max_residual: s.max_residual,
                l2_residual: s.l2_residual,
                order: self.order,
            })
            .collect()
    }
}

/// Observed order between consecutive entries of `(resolution, error)` pairs.
pub fn observed_orders(samples: &[(usize, f64)]) -> Vec<f64> {
    samples
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln())
        .collect()
}

/// [`evolution_residual`] on each trajectory of a refinement ladder.
pub fn residual_report(law: &EvolutionLaw, ladder: &[Trajectory], window: (f64, f64)) -> Result<ResidualReport, ResidualError> {
    if ladder.len() < 3 {
        return Err(ResidualError::TooFewResolutions(ladder.len()));
    }
    let samples = ladder.iter().map(|t| evolution_residual(law, t, window)).collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(usize, f64)> = samples.iter().map(|s| (s.resolution, s.max_residual)).collect();
    let orders = observed_orders(&pairs);
    let order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ResidualReport { law: law.name.clone(), samples, orders, order })
}

/// Fixed-gauge runs at `n, 2n, 4n, ...` intervals that record snapshots at
/// `c - delta, c, c + delta` for each centre `c`, with `delta` and the time
/// step both proportional to the squared spacing.
/// The coarsest `delta` is capped at a quarter of the smallest gap between
/// centres (and of the first centre) so the triples stay disjoint; finer
/// levels divide it by four, keeping the time error in step with the spacing.
pub fn residual_ladder(base: &FlowConfig, levels: usize, centres: &[f64]) -> Result<Vec<Trajectory>, FlowError> {
    let mut sorted = centres.to_vec();
    sorted.sort_by(f64::total_cmp);
    let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(sorted.first().copied().unwrap_or(0.0), f64::min);
    if !(gap > 0.0) {
        return Err(FlowError::Config("residual centres must be positive and distinct".into()));
    }
    let h0 = base.xi_max / base.n as f64;
    let delta0 = (0.5 * h0 * h0).min(0.25 * gap);
    let mut grading = base.grading;
    (0..levels)
        .map(|l| {
            let mut cfg = base.clone();
            cfg.n = base.n << l;
            cfg.grading = grading;
            grading = grading.refined();
            cfg.gauge = Gauge::Fixed;
            cfg.remap = None;
            let delta = delta0 / f64::powi(4.0, l as i32);
            cfg.dt_max = 0.25 * delta;
            cfg.output = OutputCadence {
                dt: f64::INFINITY,
                b_log_step: f64::INFINITY,
                times: centres.iter().flat_map(|c| [c - delta, *c, c + delta]).collect(),
                keep_snapshots: true,
            };
            cfg.t_max = centres.iter().fold(0.0f64, |m, c| m.max(c + delta));
            run::run(&cfg)
        })
        .collect()
}
