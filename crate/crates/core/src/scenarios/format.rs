//! Flat scenario files: one `key.path = value` per line, `#` starts a comment.
//! Vectors are comma separated; table rows of `tagged.vdes.values` are
//! separated by `;`. The serializer writes every key in sorted order.

use std::collections::BTreeMap;

use crate::error::{Error, Result, ScenarioErrorKind};
use crate::law::GaussianLaw;
use crate::lq::DesiredVelocityLaw;
use crate::lsmc::{BasisFamily, Feature, PicardConfig, RegressionBasis};

use super::spec::{OrdinarySpec, ScenarioKind, ScenarioSpec, SolverSpec, TaggedSpec};

const KEYS: &[&str] = &[
    "dim",
    "horizon",
    "kind",
    "name",
    "ordinary.cont",
    "ordinary.initial.mean",
    "ordinary.initial.std",
    "ordinary.rep",
    "ordinary.sigma",
    "ordinary.target",
    "ordinary.term",
    "solver.basis.degree",
    "solver.basis.family",
    "solver.basis.inputs",
    "solver.basis.per_coordinate",
    "solver.paths",
    "solver.picard.anderson",
    "solver.picard.damping",
    "solver.picard.max_iters",
    "solver.picard.ridge",
    "solver.picard.tol",
    "solver.seed",
    "solver.steps",
    "tagged.attr",
    "tagged.cont",
    "tagged.des",
    "tagged.init",
    "tagged.initial.mean",
    "tagged.initial.std",
    "tagged.noise",
    "tagged.q",
    "tagged.rep",
    "tagged.rep_crowd",
    "tagged.terminal.mean",
    "tagged.terminal.std",
    "tagged.vdes.direction",
    "tagged.vdes.kind",
    "tagged.vdes.magnitude",
    "tagged.vdes.times",
    "tagged.vdes.values",
];

/// Required keys; the ordinary ones only once any `ordinary.*` key appears.
const REQUIRED: &[&str] = &["kind", "dim", "horizon", "tagged.cont", "tagged.terminal.mean"];
const REQUIRED_ORDINARY: &[&str] = &["ordinary.cont", "ordinary.target", "ordinary.initial.mean"];

/// Raw entries keyed by path, remembering where each came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Entries {
    map: BTreeMap<String, (String, String)>,
}

fn scen_err(location: impl Into<String>, kind: ScenarioErrorKind) -> Error {
    Error::Scenario { location: location.into(), kind }
}

impl Entries {
    /// Tokenize a scenario file.
    pub fn parse(text: &str) -> Result<Entries> {
        let mut e = Entries::default();
        for (i, raw) in text.lines().enumerate() {
            let loc = format!("line {}", i + 1);
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| scen_err(&loc, ScenarioErrorKind::Syntax(format!("expected `key = value`, found `{line}`"))))?;
            e.insert(k.trim(), v.trim(), &loc, false)?;
        }
        Ok(e)
    }

    fn insert(&mut self, key: &str, value: &str, loc: &str, replace: bool) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(scen_err(loc, ScenarioErrorKind::UnknownKey(key.to_string())));
        }
        if !replace && self.map.contains_key(key) {
            return Err(scen_err(loc, ScenarioErrorKind::Malformed { field: key.into(), reason: "duplicate key".into() }));
        }
        self.map.insert(key.to_string(), (value.to_string(), loc.to_string()));
        Ok(())
    }

    /// Apply a `key=value` override, replacing any existing entry.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let loc = format!("override `{assignment}`");
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| scen_err(&loc, ScenarioErrorKind::Syntax("expected `key=value`".into())))?;
        self.insert(k.trim(), v.trim(), &loc, true)
    }

    fn get(&self, key: &str) -> Option<(&str, &str)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), l.as_str()))
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }
}

fn bad(loc: &str, field: &str, reason: impl Into<String>) -> Error {
    scen_err(loc, ScenarioErrorKind::Malformed { field: field.into(), reason: reason.into() })
}

fn parse_f64(s: &str, loc: &str, field: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| bad(loc, field, format!("`{s}` is not a number")))
}

fn parse_vec(s: &str, loc: &str, field: &str) -> Result<Vec<f64>> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']').trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|p| parse_f64(p, loc, field)).collect()
}

struct Reader<'a> {
    e: &'a Entries,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Result<(&str, &str)> {
        self.e.get(key).ok_or_else(|| scen_err(key, ScenarioErrorKind::MissingField(key.into())))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.e.get(key) {
            Some((v, l)) => parse_f64(v, l, key),
            None => Ok(default),
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let (v, l) = self.raw(key)?;
        parse_f64(v, l, key)
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.e.get(key) {
            Some((v, l)) => v.parse::<usize>().map_err(|_| bad(l, key, format!("`{v}` is not a non-negative integer"))),
            None => Ok(default),
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.e.get(key) {
            Some((v, l)) => v.parse::<u64>().map_err(|_| bad(l, key, format!("`{v}` is not a non-negative integer"))),
            None => Ok(default),
        }
    }

    fn vec(&self, key: &str) -> Result<Vec<f64>> {
        let (v, l) = self.raw(key)?;
        parse_vec(v, l, key)
    }

    fn vec_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.e.get(key) {
            Some((v, l)) => parse_vec(v, l, key),
            None => Ok(default),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.e.get(key) {
            Some(("true", _)) => Ok(true),
            Some(("false", _)) => Ok(false),
            Some((v, l)) => Err(bad(l, key, format!("`{v}` is not `true` or `false`"))),
            None => Ok(default),
        }
    }
}

/// Build and validate a spec from entries.
pub fn build_spec(e: &Entries) -> Result<ScenarioSpec> {
    for key in REQUIRED {
        if e.get(key).is_none() {
            return Err(scen_err(*key, ScenarioErrorKind::MissingField((*key).into())));
        }
    }
    let r = Reader { e };
    let (kind_s, kind_l) = r.raw("kind")?;
    let kind = ScenarioKind::from_ident(kind_s)
        .ok_or_else(|| bad(kind_l, "kind", "expected keep_together, desired_velocity or bidirectional"))?;
    let dim = r.usize_or("dim", 0)?;
    let zeros = vec![0.0; dim];
    let vdes = match e.get("tagged.vdes.kind").map(|(v, l)| (v, l)) {
        None | Some(("none", _)) => DesiredVelocityLaw::None,
        Some(("piecewise_sign", _)) => DesiredVelocityLaw::PiecewiseSign { magnitude: r.vec("tagged.vdes.magnitude")? },
        Some(("arctan", _)) => DesiredVelocityLaw::Arctan { direction: r.vec("tagged.vdes.direction")? },
        Some(("table", _)) => {
            let times = r.vec("tagged.vdes.times")?;
            let (v, l) = r.raw("tagged.vdes.values")?;
            let values = v.split(';').map(|row| parse_vec(row, l, "tagged.vdes.values")).collect::<Result<Vec<_>>>()?;
            DesiredVelocityLaw::Table { times, values }
        }
        Some((v, l)) => return Err(bad(l, "tagged.vdes.kind", format!("unknown desired-velocity law `{v}`"))),
    };
    let tagged = TaggedSpec {
        noise: r.f64_or("tagged.noise", 0.0)?,
        cont: r.f64("tagged.cont")?,
        des: r.f64_or("tagged.des", 0.0)?,
        rep: r.f64_or("tagged.rep", 0.0)?,
        q: r.vec_or("tagged.q", zeros.clone())?,
        attr: r.f64_or("tagged.attr", 0.0)?,
        rep_crowd: r.f64_or("tagged.rep_crowd", 0.0)?,
        init: r.f64_or("tagged.init", 0.0)?,
        initial: GaussianLaw {
            mean: r.vec_or("tagged.initial.mean", zeros.clone())?,
            std: r.f64_or("tagged.initial.std", 0.0)?,
        },
        terminal: GaussianLaw { mean: r.vec("tagged.terminal.mean")?, std: r.f64_or("tagged.terminal.std", 0.0)? },
        vdes,
    };
    let ordinary = if e.has_prefix("ordinary.") {
        for key in REQUIRED_ORDINARY {
            if e.get(key).is_none() {
                return Err(scen_err(*key, ScenarioErrorKind::MissingField((*key).into())));
            }
        }
        Some(OrdinarySpec {
            sigma: r.f64_or("ordinary.sigma", 0.0)?,
            cont: r.f64("ordinary.cont")?,
            rep: r.f64_or("ordinary.rep", 0.0)?,
            term: r.f64_or("ordinary.term", 0.0)?,
            target: r.vec("ordinary.target")?,
            initial: GaussianLaw { mean: r.vec("ordinary.initial.mean")?, std: r.f64_or("ordinary.initial.std", 0.0)? },
        })
    } else {
        None
    };
    let d = SolverSpec::default();
    let family = match e.get("solver.basis.family") {
        None | Some(("polynomial", _)) => BasisFamily::Polynomial,
        Some(("none", _)) => BasisFamily::None,
        Some((v, l)) => return Err(bad(l, "solver.basis.family", format!("unknown basis family `{v}`"))),
    };
    let inputs = match e.get("solver.basis.inputs") {
        None => d.basis.inputs.clone(),
        Some((v, l)) => v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| Feature::from_ident(s).ok_or_else(|| bad(l, "solver.basis.inputs", format!("unknown input `{s}`"))))
            .collect::<Result<Vec<_>>>()?,
    };
    let solver = SolverSpec {
        steps: r.usize_or("solver.steps", d.steps)?,
        paths: r.usize_or("solver.paths", d.paths)?,
        seed: r.u64_or("solver.seed", d.seed)?,
        picard: PicardConfig {
            max_iters: r.usize_or("solver.picard.max_iters", d.picard.max_iters)?,
            damping: r.f64_or("solver.picard.damping", d.picard.damping)?,
            tol: r.f64_or("solver.picard.tol", d.picard.tol)?,
            ridge: r.f64_or("solver.picard.ridge", d.picard.ridge)?,
            anderson: r.usize_or("solver.picard.anderson", d.picard.anderson)?,
        },
        basis: RegressionBasis {
            family,
            degree: r.usize_or("solver.basis.degree", d.basis.degree)?,
            inputs,
            per_coordinate: r.bool_or("solver.basis.per_coordinate", d.basis.per_coordinate)?,
        },
    };
    let name = e.get("name").map_or_else(|| "custom".to_string(), |(v, _)| v.to_string());
    let spec = ScenarioSpec { name, kind, dim, horizon: r.f64("horizon")?, tagged, ordinary, solver };
    spec.validate().map_err(|err| relocate(err, e))?;
    Ok(spec)
}

/// Point validation errors at the line that set the offending field.
fn relocate(err: Error, e: &Entries) -> Error {
    match err {
        Error::Scenario { location, kind } => {
            let location = e
                .get(&location)
                .map(|(_, l)| l.to_string())
                .or_else(|| e.map.iter().find(|(k, _)| k.starts_with(&location)).map(|(_, (_, l))| l.clone()))
                .unwrap_or(location);
            Error::Scenario { location, kind }
        }
        other => other,
    }
}

/// Parse and validate a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    build_spec(&Entries::parse(text)?)
}

/// Parse a scenario file and apply `key=value` overrides.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ScenarioSpec> {
    let mut e = Entries::parse(text)?;
    for o in overrides {
        e.set(o)?;
    }
    build_spec(&e)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

/// Canonical text: every key, sorted, `key = value` per line.
pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    let mut m: BTreeMap<&str, String> = BTreeMap::new();
    m.insert("name", spec.name.clone());
    m.insert("kind", spec.kind.ident().into());
    m.insert("dim", spec.dim.to_string());
    m.insert("horizon", format!("{}", spec.horizon));
    let t = &spec.tagged;
    m.insert("tagged.noise", format!("{}", t.noise));
    m.insert("tagged.cont", format!("{}", t.cont));
    m.insert("tagged.des", format!("{}", t.des));
    m.insert("tagged.rep", format!("{}", t.rep));
    m.insert("tagged.q", fmt_vec(&t.q));
    m.insert("tagged.attr", format!("{}", t.attr));
    m.insert("tagged.rep_crowd", format!("{}", t.rep_crowd));
    m.insert("tagged.init", format!("{}", t.init));
    m.insert("tagged.initial.mean", fmt_vec(&t.initial.mean));
    m.insert("tagged.initial.std", format!("{}", t.initial.std));
    m.insert("tagged.terminal.mean", fmt_vec(&t.terminal.mean));
    m.insert("tagged.terminal.std", format!("{}", t.terminal.std));
    match &t.vdes {
        DesiredVelocityLaw::None => {
            m.insert("tagged.vdes.kind", "none".into());
        }
        DesiredVelocityLaw::PiecewiseSign { magnitude } => {
            m.insert("tagged.vdes.kind", "piecewise_sign".into());
            m.insert("tagged.vdes.magnitude", fmt_vec(magnitude));
        }
        DesiredVelocityLaw::Arctan { direction } => {
            m.insert("tagged.vdes.kind", "arctan".into());
            m.insert("tagged.vdes.direction", fmt_vec(direction));
        }
        DesiredVelocityLaw::Table { times, values } => {
            m.insert("tagged.vdes.kind", "table".into());
            m.insert("tagged.vdes.times", fmt_vec(times));
            m.insert("tagged.vdes.values", values.iter().map(|v| fmt_vec(v)).collect::<Vec<_>>().join("; "));
        }
    }
    if let Some(o) = &spec.ordinary {
        m.insert("ordinary.sigma", format!("{}", o.sigma));
        m.insert("ordinary.cont", format!("{}", o.cont));
        m.insert("ordinary.rep", format!("{}", o.rep));
        m.insert("ordinary.term", format!("{}", o.term));
        m.insert("ordinary.target", fmt_vec(&o.target));
        m.insert("ordinary.initial.mean", fmt_vec(&o.initial.mean));
        m.insert("ordinary.initial.std", format!("{}", o.initial.std));
    }
    let s = &spec.solver;
    m.insert("solver.steps", s.steps.to_string());
    m.insert("solver.paths", s.paths.to_string());
    m.insert("solver.seed", s.seed.to_string());
    m.insert("solver.picard.max_iters", s.picard.max_iters.to_string());
    m.insert("solver.picard.damping", format!("{}", s.picard.damping));
    m.insert("solver.picard.tol", format!("{:e}", s.picard.tol));
    m.insert("solver.picard.ridge", format!("{:e}", s.picard.ridge));
    m.insert("solver.picard.anderson", s.picard.anderson.to_string());
    m.insert(
        "solver.basis.family",
        match s.basis.family {
            BasisFamily::Polynomial => "polynomial",
            BasisFamily::None => "none",
        }
        .into(),
    );
    m.insert("solver.basis.degree", s.basis.degree.to_string());
    m.insert("solver.basis.inputs", s.basis.inputs.iter().map(|f| f.ident()).collect::<Vec<_>>().join(", "));
    m.insert("solver.basis.per_coordinate", s.basis.per_coordinate.to_string());
    let mut out = String::new();
    for (k, v) in m {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    }
    out
}
