//! Problem configuration files.
//!
//! The format is line based: `key = value`, `#` starts a comment, and keys
//! use dotted sections (`interior.eps1`, `adapt.gamma`). Complex numbers are
//! written `a+bi`, `a-bi`, `a` or `bi`; points are written `(x, y)`. A value
//! whose comment contains the word `defaulted` keeps that flag, so emitted
//! example files round-trip with their provenance intact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::adapt::{AdaptiveSettings, Problem};
use crate::assembly::AssemblyOptions;
use crate::error::{Error, Result};
use crate::geometry::{default_wedge, Curve};
use crate::kernels::{Domain, MediumPair, PointSource};
use crate::medium::MaterialPair;
use crate::quadrature::AdaptiveBudget;
use crate::Vec2;

/// Boundary shape.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    Ellipse {
        a: f64,
        b: f64,
    },
    Rectangle {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    /// Counter-clockwise vertex list.
    Polygon(Vec<Vec2>),
}

impl GeometrySpec {
    pub fn curve(&self) -> Result<Curve> {
        match self {
            GeometrySpec::Ellipse { a, b } => Curve::ellipse(*a, *b),
            GeometrySpec::Rectangle { x0, y0, x1, y1 } => Curve::rectangle(*x0, *y0, *x1, *y1),
            GeometrySpec::Polygon(v) => Curve::polygon(v.clone()),
        }
    }
}

/// Regular sampling window for the field output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Every parameter of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub name: String,
    pub geometry: GeometrySpec,
    pub interior: MaterialPair,
    pub exterior: MaterialPair,
    pub k0: f64,
    pub source_domain: Domain,
    pub source_location: Vec2,
    pub source_amplitude: Complex64,
    pub m0: usize,
    pub tau: f64,
    pub gamma: f64,
    pub sigma: Option<f64>,
    pub levels: usize,
    pub budget: AdaptiveBudget,
    pub strict_quadrature: bool,
    pub m_ref: Option<usize>,
    pub uniform_m: Option<usize>,
    pub field: Option<FieldGrid>,
    pub output_dir: PathBuf,
    /// Keys whose values were not given explicitly.
    pub defaulted: BTreeSet<String>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let vac = MaterialPair::vacuum();
        Self {
            name: "problem".into(),
            geometry: GeometrySpec::Ellipse { a: 2.0, b: 1.0 },
            interior: vac,
            exterior: vac,
            k0: 1.0,
            source_domain: Domain::Interior,
            source_location: [0.0, 0.0],
            source_amplitude: Complex64::new(-1.0, 0.0),
            m0: 100,
            tau: 0.1,
            gamma: 0.5,
            sigma: None,
            levels: 5,
            budget: AdaptiveBudget::default(),
            strict_quadrature: false,
            m_ref: None,
            uniform_m: None,
            field: None,
            output_dir: PathBuf::from("out"),
            defaulted: BTreeSet::new(),
        }
    }
}

/// Formats a complex literal that [`parse_complex`] reads back exactly.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else {
        format!("{}{}{}i", z.re, if z.im < 0.0 { "-" } else { "+" }, z.im.abs())
    }
}

/// Parses `a+bi`, `a-bi`, `a`, `bi`, `i` with optional exponents.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    // split at the last sign that is neither leading nor part of an exponent
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |t: &str| -> Option<f64> {
        match t {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            _ => t.parse().ok(),
        }
    };
    match split {
        Some(k) => Some(Complex64::new(body[..k].parse().ok()?, imag(&body[k..])?)),
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

fn parse_point(s: &str) -> Option<Vec2> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let mut it = inner.split(',').map(|p| p.trim().parse::<f64>());
    let x = it.next()?.ok()?;
    let y = it.next()?.ok()?;
    if it.next().is_some() {
        return None;
    }
    Some([x, y])
}

fn parse_points(s: &str) -> Option<Vec<Vec2>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let end = rest.find(')')?;
        out.push(parse_point(&rest[..=end])?);
        rest = rest[end + 1..].trim_start();
    }
    Some(out)
}

fn format_point(p: Vec2) -> String {
    format!("({}, {})", p[0], p[1])
}

/// Raw `key → (value, line, defaulted flag)` map.
struct Entries {
    map: BTreeMap<String, (String, usize, bool)>,
    used: BTreeSet<String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let (content, comment) = match raw.find('#') {
                Some(k) => (&raw[..k], &raw[k + 1..]),
                None => (raw, ""),
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(Error::Config {
                    line,
                    message: format!("invalid key `{key}`"),
                });
            }
            let flagged = comment.contains("defaulted");
            if map
                .insert(key.clone(), (value.trim().to_string(), line, flagged))
                .is_some()
            {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            map,
            used: BTreeSet::new(),
        })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize, bool)> {
        self.used.insert(key.to_string());
        self.map.get(key).cloned()
    }

    fn get<T>(
        &mut self,
        key: &str,
        default: T,
        defaulted: &mut BTreeSet<String>,
        parse: impl Fn(&str) -> Option<T>,
        what: &str,
    ) -> Result<T> {
        match self.take(key) {
            None => {
                defaulted.insert(key.to_string());
                Ok(default)
            }
            Some((v, line, flagged)) => {
                if flagged {
                    defaulted.insert(key.to_string());
                }
                parse(&v).ok_or_else(|| Error::Config {
                    line,
                    message: format!("`{key}` expects {what}, found `{v}`"),
                })
            }
        }
    }

    fn require<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>, what: &str) -> Result<(T, bool)> {
        let (v, line, flagged) = self.take(key).ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key `{key}`"),
        })?;
        let val = parse(&v).ok_or_else(|| Error::Config {
            line,
            message: format!("`{key}` expects {what}, found `{v}`"),
        })?;
        Ok((val, flagged))
    }

    fn finish(self) -> Result<()> {
        for (key, (_, line, _)) in &self.map {
            if !self.used.contains(key) {
                return Err(Error::Config {
                    line: *line,
                    message: format!("unknown key `{key}`"),
                });
            }
        }
        Ok(())
    }
}

fn num(s: &str) -> Option<f64> {
    s.parse().ok()
}

fn count(s: &str) -> Option<usize> {
    s.parse().ok()
}

fn boolean(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn optional<T>(f: impl Fn(&str) -> Option<T>) -> impl Fn(&str) -> Option<Option<T>> {
    move |s| if s == "none" { Some(None) } else { f(s).map(Some) }
}

fn material(e: &mut Entries, prefix: &str, defaulted: &mut BTreeSet<String>) -> Result<MaterialPair> {
    let one = Complex64::new(1.0, 0.0);
    let eps1 = e.get(
        &format!("{prefix}.eps1"),
        one,
        defaulted,
        parse_complex,
        "a complex number",
    )?;
    let eps2 = e.get(
        &format!("{prefix}.eps2"),
        one,
        defaulted,
        parse_complex,
        "a complex number",
    )?;
    MaterialPair::new(eps1, eps2)
}

impl ProblemConfig {
    /// Parses and validates a configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let d = ProblemConfig::default();
        let mut def = BTreeSet::new();
        let name = e.get("name", d.name.clone(), &mut def, |s| Some(s.to_string()), "a name")?;
        let (kind, kind_flag) = e.require("geometry.kind", |s| Some(s.to_string()), "a geometry kind")?;
        if kind_flag {
            def.insert("geometry.kind".into());
        }
        let geometry = match kind.as_str() {
            "ellipse" => GeometrySpec::Ellipse {
                a: e.require("geometry.a", num, "a number")?.0,
                b: e.require("geometry.b", num, "a number")?.0,
            },
            "rectangle" => {
                let lo = e.require("geometry.lower", parse_point, "a point `(x, y)`")?.0;
                let hi = e.require("geometry.upper", parse_point, "a point `(x, y)`")?.0;
                GeometrySpec::Rectangle {
                    x0: lo[0],
                    y0: lo[1],
                    x1: hi[0],
                    y1: hi[1],
                }
            }
            "polygon" => GeometrySpec::Polygon(e.get(
                "geometry.vertices",
                default_wedge(),
                &mut def,
                parse_points,
                "a vertex list `(x, y) (x, y) ...`",
            )?),
            other => {
                return Err(Error::Config {
                    line: 0,
                    message: format!("unknown geometry kind `{other}` (ellipse, rectangle, polygon)"),
                })
            }
        };
        let interior = material(&mut e, "interior", &mut def)?;
        let exterior = material(&mut e, "exterior", &mut def)?;
        let k0 = e.get("k0", d.k0, &mut def, num, "a number")?;
        let source_domain = e.get(
            "source.domain",
            d.source_domain,
            &mut def,
            |s| match s {
                "interior" => Some(Domain::Interior),
                "exterior" => Some(Domain::Exterior),
                _ => None,
            },
            "`interior` or `exterior`",
        )?;
        let source_location = e.get("source.location", d.source_location, &mut def, parse_point, "a point")?;
        let source_amplitude = e.get(
            "source.amplitude",
            d.source_amplitude,
            &mut def,
            parse_complex,
            "a complex number",
        )?;
        let m0 = e.get("mesh.m0", d.m0, &mut def, count, "a count")?;
        let tau = e.get("adapt.tau", d.tau, &mut def, num, "a number")?;
        let gamma = e.get("adapt.gamma", d.gamma, &mut def, num, "a number")?;
        let sigma = e.get("adapt.sigma", d.sigma, &mut def, optional(num), "a number or `none`")?;
        let levels = e.get("adapt.levels", d.levels, &mut def, count, "a count")?;
        let budget = AdaptiveBudget {
            rel_tol: e.get("quadrature.rel_tol", d.budget.rel_tol, &mut def, num, "a number")?,
            abs_tol: e.get("quadrature.abs_tol", d.budget.abs_tol, &mut def, num, "a number")?,
            max_depth: e.get("quadrature.max_depth", d.budget.max_depth, &mut def, count, "a count")?,
        };
        let strict_quadrature = e.get(
            "quadrature.strict",
            d.strict_quadrature,
            &mut def,
            boolean,
            "`true` or `false`",
        )?;
        let m_ref = e.get(
            "reference.m_ref",
            d.m_ref,
            &mut def,
            optional(count),
            "a count or `none`",
        )?;
        let uniform_m = e.get("uniform.m", d.uniform_m, &mut def, optional(count), "a count or `none`")?;
        let window = e.get(
            "field.window",
            None,
            &mut def,
            optional(parse_points),
            "`(xmin, ymin) (xmax, ymax)`",
        )?;
        let field = match window {
            None => {
                // the resolution keys are meaningless without a window
                let _ = e.take("field.nx");
                let _ = e.take("field.ny");
                None
            }
            Some(w) if w.len() == 2 => Some(FieldGrid {
                x_min: w[0][0],
                y_min: w[0][1],
                x_max: w[1][0],
                y_max: w[1][1],
                nx: e.get("field.nx", 101, &mut def, count, "a count")?,
                ny: e.get("field.ny", 101, &mut def, count, "a count")?,
            }),
            Some(_) => {
                return Err(Error::Config {
                    line: 0,
                    message: "`field.window` needs exactly two corners".into(),
                })
            }
        };
        let output_dir = e.get(
            "output.dir",
            d.output_dir.clone(),
            &mut def,
            |s| Some(PathBuf::from(s)),
            "a path",
        )?;
        e.finish()?;
        let cfg = Self {
            name,
            geometry,
            interior,
            exterior,
            k0,
            source_domain,
            source_location,
            source_amplitude,
            m0,
            tau,
            gamma,
            sigma,
            levels,
            budget,
            strict_quadrature,
            m_ref,
            uniform_m,
            field,
            output_dir,
            defaulted: def,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks every physical and numerical parameter, including that the
    /// source lies strictly inside its domain.
    pub fn validate(&self) -> Result<()> {
        let curve = self.geometry.curve()?;
        if !(self.k0 >= 0.0 && self.k0.is_finite()) {
            return Err(Error::Validation(format!(
                "k0 must be finite and non-negative, got {}",
                self.k0
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Validation(format!(
                "adapt.tau must be positive, got {}",
                self.tau
            )));
        }
        self.settings().validate()?;
        if self.m0 < 4 {
            return Err(Error::Validation(format!(
                "mesh.m0 must be at least 4, got {}",
                self.m0
            )));
        }
        self.budget.validate()?;
        if let Some(m) = self.m_ref {
            if m < 4 {
                return Err(Error::Validation(format!(
                    "reference.m_ref must be at least 4, got {m}"
                )));
            }
        }
        if let Some(f) = &self.field {
            if !(f.x_max > f.x_min && f.y_max > f.y_min && f.nx >= 2 && f.ny >= 2) {
                return Err(Error::Validation(
                    "field window must be non-empty with at least 2×2 points".into(),
                ));
            }
        }
        let mesh = crate::geometry::Mesh::initial(curve, self.m0)?;
        self.source().validate(&mesh)?;
        self.source().validate(&mesh.uniform_refine())?;
        Ok(())
    }

    pub fn source(&self) -> PointSource {
        PointSource {
            location: self.source_location,
            amplitude: self.source_amplitude,
            domain: self.source_domain,
        }
    }

    pub fn media(&self) -> Result<MediumPair> {
        MediumPair::new(self.interior, self.exterior, self.k0)
    }

    pub fn settings(&self) -> AdaptiveSettings {
        AdaptiveSettings {
            gamma: self.gamma,
            sigma: self.sigma,
            levels: self.levels,
        }
    }

    pub fn problem(&self, parallel: bool) -> Result<Problem> {
        Ok(Problem {
            curve: self.geometry.curve()?,
            media: self.media()?,
            source: self.source(),
            m0: self.m0,
            assembly: AssemblyOptions {
                tau: self.tau,
                budget: self.budget,
                strict: self.strict_quadrature,
                parallel,
                instrument: false,
            },
        })
    }

    /// Resolved `(key, value)` pairs in file order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, val: String| v.push((k.to_string(), val));
        push("name", self.name.clone());
        match &self.geometry {
            GeometrySpec::Ellipse { a, b } => {
                push("geometry.kind", "ellipse".into());
                push("geometry.a", a.to_string());
                push("geometry.b", b.to_string());
            }
            GeometrySpec::Rectangle { x0, y0, x1, y1 } => {
                push("geometry.kind", "rectangle".into());
                push("geometry.lower", format_point([*x0, *y0]));
                push("geometry.upper", format_point([*x1, *y1]));
            }
            GeometrySpec::Polygon(vs) => {
                push("geometry.kind", "polygon".into());
                push(
                    "geometry.vertices",
                    vs.iter().map(|p| format_point(*p)).collect::<Vec<_>>().join(" "),
                );
            }
        }
        push("interior.eps1", format_complex(self.interior.eps1));
        push("interior.eps2", format_complex(self.interior.eps2));
        push("exterior.eps1", format_complex(self.exterior.eps1));
        push("exterior.eps2", format_complex(self.exterior.eps2));
        push("k0", self.k0.to_string());
        push("source.domain", self.source_domain.name().into());
        push("source.location", format_point(self.source_location));
        push("source.amplitude", format_complex(self.source_amplitude));
        push("mesh.m0", self.m0.to_string());
        push("adapt.tau", self.tau.to_string());
        push("adapt.gamma", self.gamma.to_string());
        push("adapt.sigma", self.sigma.map_or("none".into(), |s| s.to_string()));
        push("adapt.levels", self.levels.to_string());
        push("quadrature.rel_tol", format!("{:e}", self.budget.rel_tol));
        push("quadrature.abs_tol", format!("{:e}", self.budget.abs_tol));
        push("quadrature.max_depth", self.budget.max_depth.to_string());
        push("quadrature.strict", self.strict_quadrature.to_string());
        push("reference.m_ref", self.m_ref.map_or("none".into(), |m| m.to_string()));
        push("uniform.m", self.uniform_m.map_or("none".into(), |m| m.to_string()));
        match &self.field {
            None => push("field.window", "none".into()),
            Some(f) => {
                push(
                    "field.window",
                    format!(
                        "{} {}",
                        format_point([f.x_min, f.y_min]),
                        format_point([f.x_max, f.y_max])
                    ),
                );
                push("field.nx", f.nx.to_string());
                push("field.ny", f.ny.to_string());
            }
        }
        push("output.dir", self.output_dir.display().to_string());
        v
    }

    /// Serializes every resolved value; defaulted ones carry a
    /// `# defaulted` comment.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            if self.defaulted.contains(&k) {
                let _ = writeln!(s, "{k} = {v}  # defaulted");
            } else {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }
}

/// The five §4-style example problems.
pub fn example_configs() -> Vec<ProblemConfig> {
    let c = Complex64::new;
    let mat = |a: Complex64, b: Complex64| MaterialPair::new(a, b).expect("example permittivities are valid");
    let vac = MaterialPair::vacuum();
    let base = ProblemConfig::default();
    let flag = |keys: &[&str]| keys.iter().map(|k| k.to_string()).collect::<BTreeSet<_>>();
    let unstated = [
        "adapt.gamma",
        "adapt.sigma",
        "quadrature.rel_tol",
        "quadrature.abs_tol",
        "quadrature.max_depth",
        "quadrature.strict",
        "reference.m_ref",
        "field.window",
        "field.nx",
        "field.ny",
        "output.dir",
    ];
    let ellipse_field = Some(FieldGrid {
        x_min: -3.0,
        x_max: 3.0,
        y_min: -2.0,
        y_max: 2.0,
        nx: 121,
        ny: 81,
    });
    let rect_field = Some(FieldGrid {
        x_min: -0.2,
        x_max: 1.2,
        y_min: -0.3,
        y_max: 0.5,
        nx: 141,
        ny: 81,
    });
    vec![
        ProblemConfig {
            name: "ex1".into(),
            interior: mat(c(1.0, 0.02), c(-2.0, 0.02)),
            exterior: vac,
            m_ref: Some(1400),
            uniform_m: Some(700),
            field: ellipse_field,
            output_dir: "out/ex1".into(),
            defaulted: flag(&unstated),
            ..base.clone()
        },
        ProblemConfig {
            name: "ex2".into(),
            interior: mat(c(-1.0, 0.02), c(1.0, 0.02)),
            exterior: mat(c(-4.0, 0.05), c(1.0, 0.05)),
            source_domain: Domain::Exterior,
            source_location: [0.0, 2.0],
            m_ref: Some(1400),
            uniform_m: Some(1000),
            field: ellipse_field,
            output_dir: "out/ex2".into(),
            defaulted: flag(&unstated),
            ..base.clone()
        },
        ProblemConfig {
            name: "ex3".into(),
            geometry: GeometrySpec::Rectangle {
                x0: 0.0,
                y0: 0.0,
                x1: 1.0,
                y1: 0.2,
            },
            interior: mat(c(1.0, 0.02), c(-3.0, 0.1)),
            exterior: vac,
            source_location: [0.3, 0.1],
            m0: 120,
            levels: 4,
            m_ref: Some(1440),
            uniform_m: Some(672),
            field: rect_field,
            output_dir: "out/ex3".into(),
            defaulted: flag(&unstated),
            ..base.clone()
        },
        ProblemConfig {
            name: "ex4".into(),
            geometry: GeometrySpec::Rectangle {
                x0: 0.0,
                y0: 0.0,
                x1: 1.0,
                y1: 0.2,
            },
            interior: mat(c(-1.0, 0.02), c(1.0, 0.02)),
            exterior: mat(c(-4.0, 0.05), c(1.0, 0.05)),
            k0: 2.0 * std::f64::consts::PI,
            source_domain: Domain::Exterior,
            source_location: [0.5, 0.3],
            m0: 120,
            m_ref: Some(1920),
            uniform_m: Some(1920),
            field: rect_field,
            output_dir: "out/ex4".into(),
            defaulted: flag(&unstated),
            ..base.clone()
        },
        ProblemConfig {
            name: "ex5".into(),
            geometry: GeometrySpec::Polygon(default_wedge()),
            interior: mat(c(2.0, 0.0), c(-3.0, 0.03)),
            exterior: vac,
            source_location: [0.1, 0.1],
            m0: 220,
            levels: 4,
            m_ref: Some(1760),
            uniform_m: Some(1210),
            field: Some(FieldGrid {
                x_min: -0.2,
                x_max: 1.1,
                y_min: -0.3,
                y_max: 0.5,
                nx: 131,
                ny: 81,
            }),
            output_dir: "out/ex5".into(),
            defaulted: flag(&[&unstated[..], &["geometry.vertices"]].concat()),
            ..base
        },
    ]
}

/// Writes `ex1.cfg` … `ex5.cfg` into `dir`.
pub fn make_example_configs(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for cfg in example_configs() {
        let path = dir.join(format!("{}.cfg", cfg.name));
        let mut text = format!(
            "# {} example problem; values marked `defaulted` are implementation choices\n",
            cfg.name
        );
        text.push_str(&cfg.to_text());
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    Ok(paths)
}
