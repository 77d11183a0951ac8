use std::path::Path;

use serde::Deserialize;

use crate::dynamics::{validate_halving, VectorField};
use crate::geometry::{MovingHalfspace, Polynomial, Region, SetFamily, TimeCurve, TimeFn};
use crate::variational::geometric_grid;

use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Sweep,
    LengthStudy,
    Talweg,
    Desingularize,
    Bridge,
    Statedep,
    Monotone,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::LengthStudy => "length_study",
            Experiment::Talweg => "talweg",
            Experiment::Desingularize => "desingularize",
            Experiment::Bridge => "bridge",
            Experiment::Statedep => "statedep",
            Experiment::Monotone => "monotone",
        }
    }
}

/// Scalar function of time: a constant, ascending polynomial coefficients,
/// or a piecewise polynomial.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum TimeFnSpec {
    Constant(f64),
    Poly(Vec<f64>),
    Piecewise {
        breaks: Vec<f64>,
        pieces: Vec<Vec<f64>>,
    },
}

impl TimeFnSpec {
    fn build(&self) -> Result<TimeFn, CliError> {
        Ok(match self {
            TimeFnSpec::Constant(c) => TimeFn::constant(*c),
            TimeFnSpec::Poly(c) if c.is_empty() => TimeFn::constant(0.0),
            TimeFnSpec::Poly(c) => TimeFn::poly(c.clone()),
            TimeFnSpec::Piecewise { breaks, pieces } => TimeFn::piecewise(breaks.clone(), pieces.clone())
                .map_err(|e| CliError::semantic("family", e.to_string()))?,
        })
    }
}

fn curve(specs: &[TimeFnSpec]) -> Result<TimeCurve, CliError> {
    Ok(TimeCurve(specs.iter().map(TimeFnSpec::build).collect::<Result<_, _>>()?))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// Either explicit monomials or `sum w_i x_i^2`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PolySpec {
    Terms { dim: usize, terms: Vec<TermSpec> },
    Squares { squares: Vec<f64> },
}

impl PolySpec {
    pub fn build(&self, field: &str) -> Result<Polynomial, CliError> {
        match self {
            PolySpec::Terms { dim, terms } => {
                let t: Vec<(f64, &[u32])> = terms.iter().map(|t| (t.coeff, t.exponents.as_slice())).collect();
                Polynomial::from_terms(*dim, &t).map_err(|e| CliError::semantic(field, e.to_string()))
            }
            PolySpec::Squares { squares } if squares.is_empty() => {
                Err(CliError::semantic(field, "squares needs at least one weight"))
            }
            PolySpec::Squares { squares } => Ok(Polynomial::weighted_squares(squares)),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacetSpec {
    pub normal: Vec<TimeFnSpec>,
    pub offset: TimeFnSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Ball {
        center: Vec<TimeFnSpec>,
        radius: TimeFnSpec,
    },
    /// `{ y : <normal(t), y> <= offset(t) }`
    Halfspace {
        normal: Vec<TimeFnSpec>,
        offset: TimeFnSpec,
    },
    Polytope {
        facets: Vec<FacetSpec>,
    },
    /// `{ y : poly(y) <= level(t) }`
    Sublevel {
        poly: PolySpec,
        level: TimeFnSpec,
    },
    Intersection {
        members: Vec<FamilySpec>,
    },
    Translate {
        base: Box<FamilySpec>,
        shift: Vec<TimeFnSpec>,
    },
}

impl FamilySpec {
    pub fn build(&self) -> Result<SetFamily, CliError> {
        let sem = |e: crate::geometry::GeometryError| CliError::semantic("family", e.to_string());
        match self {
            FamilySpec::Ball { center, radius } => SetFamily::ball(curve(center)?, radius.build()?).map_err(sem),
            FamilySpec::Halfspace { normal, offset } => {
                SetFamily::halfspace(curve(normal)?, offset.build()?).map_err(sem)
            }
            FamilySpec::Polytope { facets } => {
                let Some(first) = facets.first() else {
                    return Err(CliError::semantic("family", "polytope needs at least one facet"));
                };
                let dim = first.normal.len();
                let hs = facets
                    .iter()
                    .map(|f| {
                        Ok(MovingHalfspace {
                            normal: curve(&f.normal)?,
                            offset: f.offset.build()?,
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                SetFamily::polytope(dim, hs).map_err(sem)
            }
            FamilySpec::Sublevel { poly, level } => {
                SetFamily::sublevel(poly.build("family.poly")?, level.build()?).map_err(sem)
            }
            FamilySpec::Intersection { members } => {
                let Some(first) = members.first() else {
                    return Err(CliError::semantic("family", "intersection needs members"));
                };
                let built = members.iter().map(FamilySpec::build).collect::<Result<Vec<_>, _>>()?;
                let dim = first.build()?.dim();
                SetFamily::intersection(dim, built).map_err(sem)
            }
            FamilySpec::Translate { base, shift } => SetFamily::translate(base.build()?, curve(shift)?).map_err(sem),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub components: Vec<PolySpec>,
    /// Declared monotonicity constant, validated on the region.
    pub alpha: Option<f64>,
}

impl FieldSpec {
    pub fn build(&self) -> Result<VectorField, CliError> {
        let comps = self
            .components
            .iter()
            .map(|p| p.build("field.components"))
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(comps, self.alpha).map_err(|e| CliError::semantic("field", e.to_string()))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl RegionSpec {
    pub fn build(&self) -> Result<Region, CliError> {
        let r = match self {
            RegionSpec::Box { lower, upper } => Region::new_box(lower.clone(), upper.clone()),
            RegionSpec::Ball { center, radius } => Region::new_ball(center.clone(), *radius),
        };
        r.map_err(|e| CliError::semantic("region", e.to_string()))
    }
}

/// Explicit knots or `n` knots spaced geometrically / linearly on `[a, b]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridSpec {
    List(Vec<f64>),
    Geometric { geometric: (f64, f64, usize) },
    Linear { linear: (f64, f64, usize) },
}

impl GridSpec {
    pub fn build(&self) -> Result<Vec<f64>, CliError> {
        let g = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Geometric { geometric: (a, b, n) } => {
                if !(*a > 0.0 && b > a && *n >= 2) {
                    return Err(CliError::semantic("r_grid", "geometric grid needs 0 < a < b and n >= 2"));
                }
                geometric_grid(*a, *b, *n)
            }
            GridSpec::Linear { linear: (a, b, n) } => {
                if !(b > a && *n >= 2) {
                    return Err(CliError::semantic("r_grid", "linear grid needs a < b and n >= 2"));
                }
                (0..*n).map(|i| a + (b - a) * i as f64 / (*n - 1) as f64).collect()
            }
        };
        if g.is_empty() || g.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CliError::semantic("r_grid", "knots must be strictly increasing"));
        }
        Ok(g)
    }
}

fn default_rel_tol() -> f64 {
    0.01
}

fn default_phi_tol() -> f64 {
    0.05
}

fn default_big_phi_tol() -> f64 {
    0.02
}

fn default_gap_floor() -> f64 {
    1e-9
}

/// Acceptance checks; each present key adds one entry to the report.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// `step_speed <= lip * (1 + speed_slack)` on regular steps.
    pub speed_slack: Option<f64>,
    /// Every step satisfies `|dx| <= L h (1 + slack)`, with no breakpoints.
    pub lipschitz: Option<f64>,
    pub expected_length: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub length_rel_tol: f64,
    pub gaps_decreasing: Option<bool>,
    /// Gaps below `gap_floor * length` are at rounding level.
    #[serde(default = "default_gap_floor")]
    pub gap_floor: f64,
    /// `phi(r) = c r^p` as `[c, p]`.
    pub phi_power: Option<(f64, f64)>,
    #[serde(default = "default_phi_tol")]
    pub phi_rel_tol: f64,
    /// `Phi(r) = c r^p` on interior knots as `[c, p]`.
    pub big_phi_power: Option<(f64, f64)>,
    #[serde(default = "default_big_phi_tol")]
    pub big_phi_rel_tol: f64,
    pub desing_slack: Option<f64>,
    pub max_inclusion_residual: Option<f64>,
    pub max_value_residual: Option<f64>,
    /// Relative agreement of flow and swept lengths.
    pub length_agreement: Option<f64>,
    /// `|u(s)|^2 = c0 + c1 s` on `[0, s_max]` as `[c0, c1, s_max]`.
    pub norm_profile: Option<(f64, f64, f64)>,
    pub max_norm: Option<f64>,
    /// `cum_length(T) / T` at `rate_times`.
    pub length_rate: Option<f64>,
    #[serde(default)]
    pub rate_times: Vec<f64>,
    pub expected_speed: Option<f64>,
    pub speed_tol: Option<f64>,
}

fn default_samples() -> usize {
    64
}

fn default_probes() -> usize {
    16
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub experiment: Experiment,
    pub seed: u64,
    pub family: Option<FamilySpec>,
    pub field: Option<FieldSpec>,
    pub f: Option<PolySpec>,
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub t0: f64,
    pub t_end: Option<f64>,
    pub h: Option<f64>,
    pub h_list: Option<Vec<f64>>,
    pub region: Option<RegionSpec>,
    pub r_grid: Option<GridSpec>,
    /// Left end of the desingularization window.
    pub a: Option<f64>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub output_dir: Option<String>,
    #[serde(default)]
    pub checks: Checks,
}

fn need<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::semantic(field, format!("{field} required")))
}

impl Scenario {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn output_dir(&self) -> String {
        self.output_dir.clone().unwrap_or_else(|| self.name.clone())
    }

    pub fn family(&self) -> Result<SetFamily, CliError> {
        need(&self.family, "family")?.build()
    }

    pub fn x0(&self) -> Result<&[f64], CliError> {
        Ok(need(&self.x0, "x0")?)
    }

    pub fn t_end(&self) -> Result<f64, CliError> {
        Ok(*need(&self.t_end, "t_end")?)
    }

    pub fn h(&self) -> Result<f64, CliError> {
        Ok(*need(&self.h, "h")?)
    }

    pub fn r_grid(&self) -> Result<Vec<f64>, CliError> {
        need(&self.r_grid, "r_grid")?.build()
    }

    /// The declared region, else the cube of half-width 2 around `x0` (or
    /// the origin).
    pub fn region(&self, dim: usize) -> Result<Region, CliError> {
        let r = match &self.region {
            Some(r) => r.build()?,
            None => {
                let c = self.x0.clone().unwrap_or_else(|| vec![0.0; dim]);
                Region::cube(&c, 2.0).map_err(|e| CliError::semantic("region", e.to_string()))?
            }
        };
        if r.dim() != dim {
            return Err(CliError::semantic(
                "region",
                format!("region has dimension {}, expected {dim}", r.dim()),
            ));
        }
        Ok(r)
    }

    fn check_dim(&self, dim: usize, field: &str) -> Result<(), CliError> {
        if let Some(x0) = &self.x0 {
            if x0.len() != dim {
                return Err(CliError::semantic(
                    "x0",
                    format!("x0 has dimension {}, {field} has {dim}", x0.len()),
                ));
            }
        }
        self.region(dim).map(|_| ())
    }

    fn check_positive_h(&self) -> Result<(), CliError> {
        let h = self.h()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(CliError::semantic("h", "h must be positive"));
        }
        if !(self.t_end()? > self.t0) {
            return Err(CliError::semantic("t_end", "t_end must exceed t0"));
        }
        Ok(())
    }

    /// Required fields for the experiment kind, and consistent dimensions.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::semantic("name", "name must be nonempty without path separators"));
        }
        if self.samples == 0 {
            return Err(CliError::semantic("samples", "samples must be at least 1"));
        }
        match self.experiment {
            Experiment::Sweep | Experiment::Monotone => {
                let fam = self.family()?;
                self.x0()?;
                self.check_positive_h()?;
                self.check_dim(fam.dim(), "family")?;
                if self.experiment == Experiment::Monotone {
                    let field = need(&self.field, "field")?.build()?;
                    if field.dim() != fam.dim() {
                        return Err(CliError::semantic("field", "field and family dimensions differ"));
                    }
                }
            }
            Experiment::LengthStudy => {
                let fam = self.family()?;
                self.x0()?;
                self.t_end()?;
                let hl = need(&self.h_list, "h_list")?;
                validate_halving(hl).map_err(|e| CliError::semantic("h_list", e.to_string()))?;
                self.check_dim(fam.dim(), "family")?;
            }
            Experiment::Talweg | Experiment::Desingularize => {
                let fam = self.family()?;
                self.r_grid()?;
                self.check_dim(fam.dim(), "family")?;
                if self.experiment == Experiment::Desingularize && self.probes == 0 {
                    return Err(CliError::semantic("probes", "probes must be at least 1"));
                }
            }
            Experiment::Bridge => {
                let f = need(&self.f, "f")?.build("f")?;
                self.x0()?;
                self.check_positive_h()?;
                self.check_dim(f.dim(), "f")?;
            }
            Experiment::Statedep => {
                let field = need(&self.field, "field")?.build()?;
                self.x0()?;
                self.check_positive_h()?;
                self.check_dim(field.dim(), "field")?;
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Scenario::parse(&text, &path.display().to_string())
}
