//! Rotation-angle distributions for analog noise insertion.
//!
//! A symmetric density `f` with `E[sin^2 theta] = q` turns the random rotation
//! `exp(i theta S)` into the single-string channel `(1-q) rho + q S rho S`
//! on average. Each family is parameterized by one scale `a > 0`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{bisect_increasing, integrate_panels};

/// Absolute tolerance of the moment quadrature.
const QUAD_TOL: f64 = 1e-13;

/// Constraint tolerance on `E[sin^2 theta] = q`.
pub const SIN2_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleKind {
    Gaussian,
    Discrete,
    Uniform,
    /// Laplace density `exp(-|theta|/a) / 2a`.
    Exponential,
    Cauchy,
    Semicircular,
    /// `(1 + cos(pi theta / a)) / 2a` on `[-a, a]`.
    RaisedCosine,
}

impl AngleKind {
    pub const ALL: [AngleKind; 7] = [
        AngleKind::Gaussian,
        AngleKind::Discrete,
        AngleKind::Uniform,
        AngleKind::Exponential,
        AngleKind::Cauchy,
        AngleKind::Semicircular,
        AngleKind::RaisedCosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AngleKind::Gaussian => "gaussian",
            AngleKind::Discrete => "discrete",
            AngleKind::Uniform => "uniform",
            AngleKind::Exponential => "exponential",
            AngleKind::Cauchy => "cauchy",
            AngleKind::Semicircular => "semicircular",
            AngleKind::RaisedCosine => "raised-cosine",
        }
    }

    /// Largest `q` the family can reach.
    fn scale_bracket(self) -> f64 {
        match self {
            AngleKind::Uniform => FRAC_PI_2,
            // E[sin^2] = 1/2 - J1(2a)/2a peaks where J2(2a) = 0, at a ~ 2.568
            AngleKind::Semicircular => 2.5,
            AngleKind::RaisedCosine => PI,
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for AngleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AngleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        AngleKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .or(match norm.as_str() {
                "laplace" => Some(AngleKind::Exponential),
                "semicircle" => Some(AngleKind::Semicircular),
                _ => None,
            })
            .ok_or_else(|| Error::Parse(format!("unknown angle distribution {s:?}")))
    }
}

/// A concrete angle law: `kind` with `scale` centered at `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleDistribution {
    pub kind: AngleKind,
    pub scale: f64,
    #[serde(default)]
    pub mean: f64,
}

/// Quadrature moments of an angle law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub norm: f64,
    pub sin2: f64,
    pub sin4: f64,
    pub sin_cos: f64,
}

fn out_of_domain(q: f64) -> Error {
    Error::OutOfDomain(format!("rotation probability q = {q} must lie in [0, 1/2)"))
}

/// `E[sin^2 theta]` in closed form where the characteristic function is elementary.
fn analytic_sin2(kind: AngleKind, a: f64) -> Option<f64> {
    match kind {
        AngleKind::Gaussian => Some(-0.5 * (-2.0 * a * a).exp_m1()),
        AngleKind::Discrete => Some(a.sin().powi(2)),
        AngleKind::Uniform => Some(if a == 0.0 {
            0.0
        } else {
            0.5 - (2.0 * a).sin() / (4.0 * a)
        }),
        AngleKind::Exponential => Some(2.0 * a * a / (1.0 + 4.0 * a * a)),
        AngleKind::Cauchy => Some(-0.5 * (-2.0 * a).exp_m1()),
        AngleKind::Semicircular | AngleKind::RaisedCosine => None,
    }
}

/// Scale `a` with `E[sin^2 theta] = q` for the symmetric law of `kind`.
pub fn solve_scale(kind: AngleKind, q: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&q) {
        return Err(out_of_domain(q));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    match kind {
        AngleKind::Gaussian => Ok((-0.5 * (-2.0 * q).ln_1p()).sqrt()),
        AngleKind::Discrete => Ok(q.sqrt().asin()),
        AngleKind::Cauchy => Ok(-0.5 * (-2.0 * q).ln_1p()),
        // Direct inversion of 2a^2 / (1 + 4a^2) = q.
        AngleKind::Exponential => Ok((q / (2.0 - 4.0 * q)).sqrt()),
        AngleKind::Uniform | AngleKind::Semicircular | AngleKind::RaisedCosine => {
            let hi = kind.scale_bracket();
            let moment = |a: f64| -> Result<f64> {
                match analytic_sin2(kind, a) {
                    Some(v) => Ok(v),
                    None => Ok(AngleDistribution::symmetric(kind, a).moments()?.sin2),
                }
            };
            if moment(hi)? < q {
                return Err(Error::OutOfDomain(format!(
                    "q = {q} exceeds what the {kind} family reaches on [0, {hi}]"
                )));
            }
            bisect_increasing(moment, q, 0.0, hi)
        }
    }
}

impl AngleDistribution {
    pub fn symmetric(kind: AngleKind, scale: f64) -> Self {
        Self {
            kind,
            scale,
            mean: 0.0,
        }
    }

    /// Symmetric law of `kind` reproducing the single-string channel of strength `q`.
    pub fn for_probability(kind: AngleKind, q: f64) -> Result<Self> {
        Ok(Self::symmetric(kind, solve_scale(kind, q)?))
    }

    /// Gaussian `N(mean, sigma^2)`.
    pub fn gaussian(mean: f64, sigma: f64) -> Self {
        Self {
            kind: AngleKind::Gaussian,
            scale: sigma,
            mean,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.scale == 0.0 && self.mean == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.scale;
        if a == 0.0 {
            return self.mean;
        }
        let offset = match self.kind {
            AngleKind::Gaussian => a * rng.sample::<f64, _>(StandardNormal),
            AngleKind::Discrete => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            AngleKind::Uniform => a * (2.0 * rng.random::<f64>() - 1.0),
            AngleKind::Exponential => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    a * e
                } else {
                    -a * e
                }
            }
            AngleKind::Cauchy => a * (PI * (rng.random::<f64>() - 0.5)).tan(),
            AngleKind::Semicircular => loop {
                let x = 2.0 * rng.random::<f64>() - 1.0;
                let y = 2.0 * rng.random::<f64>() - 1.0;
                if x * x + y * y <= 1.0 {
                    break a * x;
                }
            },
            AngleKind::RaisedCosine => loop {
                let t = 2.0 * rng.random::<f64>() - 1.0;
                if 2.0 * rng.random::<f64>() <= 1.0 + (PI * t).cos() {
                    break a * t;
                }
            },
        };
        self.mean + offset
    }

    /// `E[sin^2]`, `E[sin^4]`, `E[sin cos]` and the total mass by quadrature.
    pub fn moments(&self) -> Result<Moments> {
        let (a, mu) = (self.scale, self.mean);
        let point = |t: f64| Moments {
            norm: 1.0,
            sin2: t.sin().powi(2),
            sin4: t.sin().powi(4),
            sin_cos: t.sin() * t.cos(),
        };
        if a == 0.0 {
            return Ok(point(mu));
        }
        let integrand = |t: f64, w: f64| {
            let (s, c) = t.sin_cos();
            let s2 = s * s;
            [w, w * s2, w * s2 * s2, w * s * c]
        };
        let pack = |v: [f64; 4]| Moments {
            norm: v[0],
            sin2: v[1],
            sin4: v[2],
            sin_cos: v[3],
        };
        match self.kind {
            AngleKind::Discrete => {
                let (p, m) = (point(mu + a), point(mu - a));
                Ok(Moments {
                    norm: 1.0,
                    sin2: 0.5 * (p.sin2 + m.sin2),
                    sin4: 0.5 * (p.sin4 + m.sin4),
                    sin_cos: 0.5 * (p.sin_cos + m.sin_cos),
                })
            }
            AngleKind::Gaussian => {
                let norm = 1.0 / (2.0 * PI).sqrt() / a;
                let f = |t: f64| integrand(t, norm * (-0.5 * ((t - mu) / a).powi(2)).exp());
                integrate_panels(f, &oscillation_breaks(mu, a, 14.0 * a), QUAD_TOL).map(pack)
            }
            AngleKind::Uniform => {
                let f = |t: f64| integrand(t, 0.5 / a);
                integrate_panels(f, &oscillation_breaks(mu, 0.0, a), QUAD_TOL).map(pack)
            }
            AngleKind::Exponential => {
                let f = |t: f64| integrand(t, 0.5 / a * (-(t - mu).abs() / a).exp());
                integrate_panels(f, &oscillation_breaks(mu, a, 60.0 * a), QUAD_TOL).map(pack)
            }
            AngleKind::RaisedCosine => {
                let f = |t: f64| integrand(t, 0.5 / a * (1.0 + (PI * (t - mu) / a).cos()));
                integrate_panels(f, &oscillation_breaks(mu, 0.0, a), QUAD_TOL).map(pack)
            }
            AngleKind::Semicircular => {
                // theta = mu + a sin(phi) removes the endpoint square roots
                let f = |phi: f64| integrand(mu + a * phi.sin(), 2.0 / PI * phi.cos().powi(2));
                integrate_panels(f, &[-FRAC_PI_2, 0.0, FRAC_PI_2], QUAD_TOL).map(pack)
            }
            AngleKind::Cauchy => self.cauchy_moments(),
        }
    }

    /// Heavy tails: integrate on `[-L, L]`, add the exact tail mass times the
    /// tail averages of `sin^2` (1/2) and `sin^4` (3/8), and grow `L` until
    /// two successive domains agree.
    fn cauchy_moments(&self) -> Result<Moments> {
        let (a, mu) = (self.scale, self.mean);
        let f = |t: f64| {
            let w = a / (PI * ((t - mu).powi(2) + a * a));
            let (s, c) = t.sin_cos();
            let s2 = s * s;
            [w, w * s2, w * s2 * s2, w * s * c]
        };
        let at = |half_width: f64| -> Result<Moments> {
            let v = integrate_panels(f, &oscillation_breaks(mu, a, half_width), QUAD_TOL)?;
            let tail = 1.0 - 2.0 / PI * (half_width / a).atan();
            Ok(Moments {
                norm: v[0] + tail,
                sin2: v[1] + 0.5 * tail,
                sin4: v[2] + 0.375 * tail,
                sin_cos: v[3],
            })
        };
        let mut half_width = 2.0e4 * a.max(1.0);
        let mut prev = at(half_width)?;
        for _ in 0..3 {
            half_width *= 2.0;
            let next = at(half_width)?;
            if (next.sin2 - prev.sin2).abs() < 1e-11 && (next.sin4 - prev.sin4).abs() < 1e-11 {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::Quadrature(format!(
            "Cauchy moments with scale {a} did not settle up to |theta| = {half_width}"
        )))
    }
}

/// Panel breakpoints on `[mu - half_width, mu + half_width]`: geometric
/// refinement around the peak down to `peak_width`, then panels no wider than
/// pi/4 so each resolves the oscillation of `sin^4`.
fn oscillation_breaks(mu: f64, peak_width: f64, half_width: f64) -> Vec<f64> {
    let mut right = vec![0.0];
    if peak_width > 0.0 {
        let mut x = peak_width.min(half_width);
        let mut fine = vec![];
        while x > peak_width * 1e-3 {
            fine.push(x);
            x *= 0.25;
        }
        fine.reverse();
        right.extend(fine);
    }
    let mut x = *right.last().unwrap();
    while x < half_width {
        x = (x + FRAC_PI_4).min(half_width);
        right.push(x);
    }
    let mut breaks: Vec<f64> = right.iter().rev().map(|r| mu - r).collect();
    breaks.extend(right.iter().skip(1).map(|r| mu + r));
    breaks
}

/// Outcome of checking one printed closed form against quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormCheck {
    pub kind: AngleKind,
    pub printed: &'static str,
    pub q: f64,
    pub printed_scale: f64,
    /// Total mass of the printed density at the printed scale.
    pub norm: f64,
    pub sin2: f64,
    pub passed: bool,
    /// Scale actually used (from [`solve_scale`]).
    pub adopted_scale: f64,
}

/// Checks the published closed forms (scales, and the printed raised-cosine
/// density) against the integral constraint at `q`.
pub fn closed_form_report(q: f64) -> Result<Vec<ClosedFormCheck>> {
    let mut out = Vec::new();
    let printed_scales: [(AngleKind, &'static str, f64); 4] = [
        (
            AngleKind::Gaussian,
            "a = sqrt(-log(1-2q)/2)",
            (-0.5 * (1.0 - 2.0 * q).ln()).sqrt(),
        ),
        (AngleKind::Discrete, "a = arcsin(sqrt(q))", q.sqrt().asin()),
        (
            AngleKind::Exponential,
            "a = sqrt(q/(4-2q))",
            (q / (4.0 - 2.0 * q)).sqrt(),
        ),
        (AngleKind::Cauchy, "a = -log(1-2q)/2", -0.5 * (1.0 - 2.0 * q).ln()),
    ];
    for (kind, printed, a) in printed_scales {
        let m = AngleDistribution::symmetric(kind, a).moments()?;
        out.push(ClosedFormCheck {
            kind,
            printed,
            q,
            printed_scale: a,
            norm: m.norm,
            sin2: m.sin2,
            passed: (m.sin2 - q).abs() <= SIN2_TOL && (m.norm - 1.0).abs() <= SIN2_TOL,
            adopted_scale: solve_scale(kind, q)?,
        });
    }
    // The printed raised cosine (1/2a) cos(pi theta / a) on [-a, a], at the
    // adopted scale.
    let a = solve_scale(AngleKind::RaisedCosine, q)?;
    let v = integrate_panels(
        |t: f64| {
            let w = 0.5 / a * (PI * t / a).cos();
            [w, w * t.sin().powi(2)]
        },
        &oscillation_breaks(0.0, 0.0, a),
        QUAD_TOL,
    )?;
    out.push(ClosedFormCheck {
        kind: AngleKind::RaisedCosine,
        printed: "f = cos(pi theta/a)/(2a) on [-a, a]",
        q,
        printed_scale: a,
        norm: v[0],
        sin2: v[1],
        passed: (v[1] - q).abs() <= SIN2_TOL && (v[0] - 1.0).abs() <= SIN2_TOL,
        adopted_scale: a,
    });
    Ok(out)
}
