//! Flat `key = value` configuration with `[section]` headers. Every key is
//! namespaced by its section (`basis.alpha`, `geometry.T`, `flux.phi`,
//! `run.seed`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{Basis, DxConvention, FieldSpec, Kernel, Profile};
use crate::flux::{SurfaceWeight, TestFunction};
use crate::geometry::{AffineSphere, AmbitSet, Resolution, SurfaceQuadrature};
use crate::levy::{LevyMeasureSpec, LevyTriplet, StableSpec};
use crate::limit::LimitFieldSpec;

/// Master seed used when a config does not set `run.seed`.
pub const DEFAULT_SEED: u64 = 20261016;

/// Every key the harness understands.
const KNOWN_KEYS: &[&str] = &[
    "run.experiment",
    "run.seed",
    "run.replications",
    "run.out",
    "geometry.dim",
    "geometry.A",
    "geometry.center",
    "geometry.radius",
    "geometry.box_min",
    "geometry.box_max",
    "geometry.T",
    "geometry.p0",
    "basis.kind",
    "basis.alpha",
    "basis.sigma",
    "basis.weight",
    "basis.jumps",
    "basis.gamma0",
    "field.kernel",
    "field.modulation",
    "field.truncation",
    "flux.phi",
    "flux.f",
    "flux.radii",
    "flux.times",
    "flux.nodes",
    "identity.cases",
    "identity.checks",
    "identity.tamper_exponent",
    "fv.delta_factor",
    "fv.pilot",
    "fv.convention",
    "limit.slices",
    "limit.patches",
    "limit.resolution_reps",
    "limit.tail_replications",
    "selfsim.c",
    "selfsim.steps",
];

/// Named experiments, one per CLI subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    VerifyIdentities,
    FluxScan,
    FvLimit,
    LimitLaw,
    YSelfsim,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::VerifyIdentities,
        Experiment::FluxScan,
        Experiment::FvLimit,
        Experiment::LimitLaw,
        Experiment::YSelfsim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyIdentities => "verify-identities",
            Experiment::FluxScan => "flux-scan",
            Experiment::FvLimit => "fv-limit",
            Experiment::LimitLaw => "limit-law",
            Experiment::YSelfsim => "y-selfsim",
        }
    }

    /// Built-in defaults, overridden by the config file and `--override`.
    pub fn defaults(self) -> &'static str {
        match self {
            Experiment::VerifyIdentities => "[identity]\ncases = 1000\n",
            Experiment::FluxScan => "[run]\nreplications = 10000\n[flux]\nradii = 0.2, 0.1, 0.05, 0.025\n",
            Experiment::FvLimit => {
                "[run]\nreplications = 2000\n\
                 [geometry]\ncenter = 0.3, -0.2\n\
                 [basis]\nkind = compound-poisson\njumps = 1, 0.5 : 0.06; -0.3, 0.8 : 0.04\ngamma0 = 0.5, -0.2\n\
                 [field]\nkernel = modulated\nmodulation = 0.4, -0.3\n\
                 [flux]\nphi = kinetic\nradii = 0.2, 0.1, 0.05\n"
            }
            Experiment::LimitLaw => "[run]\nreplications = 2000\n[flux]\nradii = 0.01\n",
            Experiment::YSelfsim => "[run]\nreplications = 5000\n[basis]\nkind = stable\nalpha = 1.5\n",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Key/value pairs after section expansion, ordered by key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses `[section]` headers and `key = value` lines; `#` and `;` start
    /// comment lines. A key before any header must already be namespaced.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            if !full.contains('.') {
                return Err(Error::Config(format!("line {}: key '{full}' needs a section", lineno + 1)));
            }
            if entries.insert(full.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{full}'", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    /// Applies `key=value` with a namespaced key.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
        let key = key.trim();
        if !key.contains('.') {
            return Err(Error::Config(format!("override key '{key}' must be namespaced, e.g. basis.alpha")));
        }
        self.set(key, value.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// `other` wins on shared keys.
    pub fn merged(&self, other: &RawConfig) -> RawConfig {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|(k, v)| (k.clone(), v.clone())));
        RawConfig { entries }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// One `key = value` line per entry, sorted by key.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`Self::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key} = '{v}' is not a valid value"))),
        }
    }

    fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_list(v).map_err(|e| Error::Config(format!("{key}: {e}"))),
        }
    }
}

/// Comma-separated reals; an empty string is an empty list.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Config(format!("'{v}' is not a finite number")))
        })
        .collect()
}

/// `I`, `diag(a, b, ..)` or rows separated by `;`.
pub fn parse_matrix(s: &str, d: usize) -> Result<DMatrix<f64>> {
    let s = s.trim();
    if s == "I" || s.eq_ignore_ascii_case("identity") {
        return Ok(DMatrix::identity(d, d));
    }
    if let Some(inner) = s.strip_prefix("diag(").and_then(|r| r.strip_suffix(')')) {
        let v = parse_list(inner)?;
        if v.len() != d {
            return Err(Error::Config(format!("diag needs {d} entries, got {}", v.len())));
        }
        return Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v)));
    }
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_list).collect::<Result<_>>()?;
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config(format!("matrix '{s}' is not {d}×{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Basis catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisConfig {
    /// `Σ = sigma·I`.
    Gaussian { sigma: f64 },
    /// Symmetric strictly stable basis with spectral mass `weight` on `±e_k`.
    Stable { alpha: f64, weight: f64 },
    /// Finite jump measure with drift `γ₀`.
    CompoundPoisson { jumps: Vec<(Vec<f64>, f64)>, gamma0: Vec<f64> },
    DriftOnly { gamma0: Vec<f64> },
}

impl BasisConfig {
    /// Index of the small-scale limit: `α` for stable, 2 for Gaussian, `None`
    /// for finite-variation bases.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            BasisConfig::Gaussian { .. } => Some(2.0),
            BasisConfig::Stable { alpha, .. } => Some(*alpha),
            BasisConfig::CompoundPoisson { .. } | BasisConfig::DriftOnly { .. } => None,
        }
    }

    pub fn is_finite_variation(&self) -> bool {
        self.alpha().is_none()
    }

    /// Seed law of the limit field.
    pub fn stable_spec(&self, m: usize) -> Result<StableSpec> {
        match self {
            BasisConfig::Gaussian { sigma } => StableSpec::gaussian(DMatrix::identity(m, m) * *sigma),
            BasisConfig::Stable { alpha, weight } => StableSpec::symmetric_axes(*alpha, m, *weight),
            _ => Err(Error::Config("finite-variation bases have no stable limit field".into())),
        }
    }

    fn basis(&self, m: usize) -> Result<Basis> {
        Ok(match self {
            BasisConfig::Gaussian { .. } | BasisConfig::Stable { .. } => Basis::Stable(self.stable_spec(m)?),
            BasisConfig::CompoundPoisson { jumps, gamma0 } => {
                Basis::Triplet(LevyTriplet::from_gamma0(gamma0.clone(), LevyMeasureSpec::point_masses(jumps)?)?)
            }
            BasisConfig::DriftOnly { gamma0 } => Basis::Triplet(LevyTriplet::drift_only(gamma0.clone())?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiName {
    Identity,
    Kinetic,
}

impl PhiName {
    pub fn test_function(self) -> TestFunction {
        match self {
            PhiName::Identity => TestFunction::Identity,
            PhiName::Kinetic => TestFunction::Kinetic,
        }
    }
}

/// Resolved experiment configuration, validated against every catalog.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    pub basis: BasisConfig,
    pub kernel: Kernel,
    pub truncation: Option<f64>,
    pub shape: AmbitSet,
    pub sphere: AffineSphere,
    pub p0: Vec<f64>,
    pub radii: Vec<f64>,
    pub times: Vec<f64>,
    pub phi: PhiName,
    pub f: SurfaceWeight,
    pub nodes: usize,
    pub replications: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub identity_cases: usize,
    /// Subset of the identity checks to run, all when empty.
    pub identity_checks: Vec<String>,
    pub tamper_exponent: Option<f64>,
    pub delta_factor: f64,
    pub pilot: usize,
    pub convention: DxConvention,
    pub slices: usize,
    pub patches: Option<usize>,
    pub resolution_reps: usize,
    pub tail_replications: usize,
    pub selfsim_c: f64,
    pub steps: Vec<f64>,
    raw: RawConfig,
}

impl ExperimentConfig {
    /// Builds the config of `experiment` from the built-in defaults, the file
    /// content `text` and `overrides`, in increasing priority.
    pub fn load(experiment: Experiment, text: &str, overrides: &[String]) -> Result<Self> {
        let mut user = RawConfig::parse(text)?;
        for o in overrides {
            user.apply_override(o)?;
        }
        if let Some(name) = user.get("run.experiment") {
            if name != experiment.name() {
                return Err(Error::Config(format!(
                    "config is for experiment '{name}' but '{}' was requested",
                    experiment.name()
                )));
            }
        }
        let mut raw = RawConfig::parse(experiment.defaults())?.merged(&user);
        raw.set("run.experiment", experiment.name());
        Self::from_raw(raw)
    }

    /// Validates a fully merged key set.
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        if let Some(k) = raw.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
        let experiment: Experiment = raw.get("run.experiment").ok_or_else(|| Error::Config("run.experiment is missing".into()))?.parse()?;
        let dim: usize = raw.parsed_or("geometry.dim", 2)?;
        if !(2..=3).contains(&dim) {
            return Err(Error::Config(format!("geometry.dim must be 2 or 3, got {dim}")));
        }
        let zeros = vec![0.0; dim];
        let shape = match raw.get("geometry.A").unwrap_or("ball") {
            "ball" => AmbitSet::ball(raw.list_or("geometry.center", &zeros)?, raw.parsed_or("geometry.radius", 1.0)?)?,
            "box" => {
                let lo = raw.list_or("geometry.box_min", &vec![-1.0; dim])?;
                let hi = raw.list_or("geometry.box_max", &vec![1.0; dim])?;
                AmbitSet::cuboid(lo, hi)?
            }
            other => return Err(Error::Config(format!("geometry.A must be ball or box, got '{other}'"))),
        };
        if shape.dim() != dim {
            return Err(Error::Config(format!("geometry.A has dimension {}, expected {dim}", shape.dim())));
        }
        let sphere = AffineSphere::new(parse_matrix(raw.get("geometry.T").unwrap_or("I"), dim)?)?;
        let p0 = raw.list_or("geometry.p0", &zeros)?;
        if p0.len() != dim {
            return Err(Error::Config(format!("geometry.p0 needs {dim} entries")));
        }

        let basis = match raw.get("basis.kind").unwrap_or("gaussian") {
            "gaussian" => BasisConfig::Gaussian {
                sigma: positive(&raw, "basis.sigma", 1.0)?,
            },
            "stable" => {
                let alpha: f64 = raw.parsed("basis.alpha")?.ok_or_else(|| Error::Config("basis.alpha is required for a stable basis".into()))?;
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(Error::Config(format!("basis.alpha must lie in (1, 2], got {alpha}")));
                }
                if alpha == 2.0 {
                    BasisConfig::Gaussian {
                        sigma: positive(&raw, "basis.sigma", 1.0)?,
                    }
                } else {
                    BasisConfig::Stable {
                        alpha,
                        weight: positive(&raw, "basis.weight", 1.0)?,
                    }
                }
            }
            "compound-poisson" => {
                let text = raw.get("basis.jumps").ok_or_else(|| Error::Config("basis.jumps is required for compound-poisson".into()))?;
                BasisConfig::CompoundPoisson {
                    jumps: parse_jumps(text, dim)?,
                    gamma0: raw.list_or("basis.gamma0", &zeros)?,
                }
            }
            "drift-only" => BasisConfig::DriftOnly {
                gamma0: raw.list_or("basis.gamma0", &zeros)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "basis.kind must be gaussian, stable, compound-poisson or drift-only, got '{other}'"
                )))
            }
        };
        if let BasisConfig::CompoundPoisson { gamma0, .. } | BasisConfig::DriftOnly { gamma0 } = &basis {
            if gamma0.len() != dim {
                return Err(Error::Config(format!("basis.gamma0 needs {dim} entries")));
            }
        }
        if raw.get("basis.alpha").is_some() && !matches!(raw.get("basis.kind"), Some("stable")) {
            return Err(Error::Config("basis.alpha is only meaningful with basis.kind = stable".into()));
        }

        let profile = match raw.get("field.kernel").unwrap_or("constant") {
            "constant" => Profile::Constant,
            "gaussian-bump" => Profile::GaussianBump,
            "boundary-vanishing" => Profile::BoundaryVanishing,
            "modulated" => Profile::Modulated {
                b: raw.list_or("field.modulation", &zeros)?,
            },
            other => return Err(Error::Config(format!("unknown field.kernel '{other}'"))),
        };
        let kernel = Kernel::new(profile, DMatrix::identity(dim, dim))?;
        let truncation: Option<f64> = raw.parsed("field.truncation")?;

        let phi = match raw.get("flux.phi").unwrap_or("id") {
            "id" | "identity" => PhiName::Identity,
            "kinetic" => PhiName::Kinetic,
            other => return Err(Error::Config(format!("flux.phi must be id or kinetic, got '{other}'"))),
        };
        if phi == PhiName::Kinetic {
            if let Some(alpha) = basis.alpha().filter(|a| *a < 2.0) {
                return Err(Error::Config(format!(
                    "moment guard: the kinetic test function has polynomial growth of order 3, but a stable basis \
                     with alpha = {alpha} has infinite moments of order >= alpha; kinetic experiments need a \
                     Gaussian or bounded-jump compound Poisson basis"
                )));
            }
        }
        let f = parse_weight(raw.get("flux.f").unwrap_or("normal"), dim)?;
        let radii = raw.list_or("flux.radii", &[0.2, 0.1, 0.05, 0.025])?;
        let times = raw.list_or("flux.times", &[1.0])?;
        let nodes: usize = raw.parsed_or("flux.nodes", 64)?;
        let replications: usize = raw.parsed_or("run.replications", 2000)?;
        let seed: u64 = raw.parsed_or("run.seed", DEFAULT_SEED)?;
        let out = PathBuf::from(raw.get("run.out").unwrap_or("out"));

        let convention = match raw.get("fv.convention").unwrap_or("consistent") {
            "consistent" => DxConvention::Consistent,
            "printed" => DxConvention::PrintedIndex,
            "flipped-sign" => DxConvention::FlippedSign,
            other => return Err(Error::Config(format!("fv.convention must be consistent, printed or flipped-sign, got '{other}'"))),
        };

        let cfg = Self {
            experiment,
            dim,
            basis,
            kernel,
            truncation,
            shape,
            sphere,
            p0,
            radii,
            times,
            phi,
            f,
            nodes,
            replications,
            seed,
            out,
            identity_cases: raw.parsed_or("identity.cases", 1000)?,
            identity_checks: raw
                .get("identity.checks")
                .map(|v| v.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect())
                .unwrap_or_default(),
            tamper_exponent: raw.parsed("identity.tamper_exponent")?,
            delta_factor: positive(&raw, "fv.delta_factor", 0.1)?,
            pilot: raw.parsed_or("fv.pilot", 200)?,
            convention,
            slices: raw.parsed_or("limit.slices", crate::limit::DEFAULT_SLICES)?,
            patches: raw.parsed("limit.patches")?,
            resolution_reps: raw.parsed_or("limit.resolution_reps", 100_000)?,
            tail_replications: raw.parsed_or("limit.tail_replications", 100_000)?,
            selfsim_c: positive(&raw, "selfsim.c", 2.0)?,
            steps: raw.list_or("selfsim.steps", &[0.2, 0.1, 0.05, 0.025])?,
            raw,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let needs_radii = matches!(self.experiment, Experiment::FluxScan | Experiment::FvLimit | Experiment::LimitLaw);
        if needs_radii {
            if self.radii.is_empty() {
                return Err(Error::Config("flux.radii is empty".into()));
            }
            if self.radii.iter().any(|r| !(*r > 0.0)) {
                return Err(Error::Config("flux.radii must be positive".into()));
            }
            if self.radii.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("flux.radii must be strictly decreasing".into()));
            }
        }
        if matches!(self.experiment, Experiment::FluxScan | Experiment::FvLimit) && self.radii.len() < 3 {
            return Err(Error::Config(format!("{} needs at least 3 radii", self.experiment)));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("flux.times must be a nonempty list of positive times".into()));
        }
        if self.replications == 0 || self.nodes < 4 {
            return Err(Error::Config("run.replications must be positive and flux.nodes at least 4".into()));
        }
        match self.experiment {
            Experiment::FvLimit if !self.basis.is_finite_variation() => {
                return Err(Error::Config("fv-limit needs a finite-variation basis (compound-poisson or drift-only)".into()));
            }
            Experiment::LimitLaw | Experiment::YSelfsim if self.basis.is_finite_variation() => {
                return Err(Error::Config(format!("{} needs a Gaussian or stable basis", self.experiment)));
            }
            Experiment::FvLimit if self.pilot == 0 => return Err(Error::Config("fv.pilot must be positive".into())),
            Experiment::YSelfsim => {
                if self.steps.len() < 3 || self.steps.iter().any(|h| !(*h > 0.0)) || self.steps.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::Config("selfsim.steps needs at least 3 positive, strictly decreasing steps".into()));
                }
            }
            _ => {}
        }
        if self.experiment == Experiment::LimitLaw && self.basis.alpha().is_some_and(|a| a < 2.0) && self.tail_replications < 1000 {
            return Err(Error::Config("limit.tail_replications must be at least 1000".into()));
        }
        if self.experiment == Experiment::VerifyIdentities && self.identity_cases == 0 {
            return Err(Error::Config("identity.cases must be positive".into()));
        }
        if let Some(c) = self.identity_checks.iter().find(|c| !crate::harness::IDENTITY_CHECKS.contains(&c.as_str())) {
            return Err(Error::Config(format!(
                "unknown identity check '{c}'; expected one of {}",
                crate::harness::IDENTITY_CHECKS.join(", ")
            )));
        }
        Ok(())
    }

    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    /// Provenance hash of the effective configuration.
    pub fn hash(&self) -> String {
        self.raw.hash()
    }

    /// Index of the small-scale limit, `None` for finite-variation bases.
    pub fn alpha(&self) -> Option<f64> {
        self.basis.alpha()
    }

    pub fn field_spec(&self) -> Result<FieldSpec> {
        let basis = self.basis.basis(self.dim)?;
        match self.truncation {
            Some(eps) => FieldSpec::with_truncation(self.shape.clone(), self.kernel.clone(), basis, eps),
            None => FieldSpec::new(self.shape.clone(), self.kernel.clone(), basis),
        }
    }

    pub fn limit_spec(&self) -> Result<LimitFieldSpec> {
        LimitFieldSpec::new(
            self.basis.stable_spec(self.dim)?,
            self.shape.clone(),
            self.sphere.clone(),
            self.kernel.clone(),
            self.p0.clone(),
        )
    }

    /// Surface rule on `M` used by the flux functionals.
    pub fn quadrature(&self) -> SurfaceQuadrature {
        self.sphere.quadrature(Resolution::with_nodes(self.dim, self.nodes))
    }
}

fn positive(raw: &RawConfig, key: &str, default: f64) -> Result<f64> {
    let v: f64 = raw.parsed_or(key, default)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("{key} must be positive, got {v}")));
    }
    Ok(v)
}

/// `x1, x2 : rate; ...`.
fn parse_jumps(s: &str, dim: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (mark, rate) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("basis.jumps entry '{part}' is not 'mark : rate'")))?;
            let mark = parse_list(mark)?;
            if mark.len() != dim {
                return Err(Error::Config(format!("jump mark {mark:?} needs {dim} entries")));
            }
            let rate: f64 = rate.trim().parse().map_err(|_| Error::Config(format!("bad jump rate '{rate}'")))?;
            if !(rate > 0.0) {
                return Err(Error::Config(format!("jump rate must be positive, got {rate}")));
            }
            Ok((mark, rate))
        })
        .collect()
}

/// `normal` or `component:i:j` (1-based): `u_M^{(i)} e_j`.
fn parse_weight(s: &str, dim: usize) -> Result<SurfaceWeight> {
    if s == "normal" {
        return Ok(SurfaceWeight::Normal);
    }
    let parts: Vec<&str> = s.split(':').collect();
    if let ["component", i, j] = parts.as_slice() {
        let i: usize = i.trim().parse().map_err(|_| Error::Config(format!("bad index in '{s}'")))?;
        let j: usize = j.trim().parse().map_err(|_| Error::Config(format!("bad index in '{s}'")))?;
        if !(1..=dim).contains(&i) || !(1..=dim).contains(&j) {
            return Err(Error::Config(format!("component indices in '{s}' must lie in 1..={dim}")));
        }
        return Ok(SurfaceWeight::normal_component(i - 1, j - 1));
    }
    Err(Error::Config(format!("flux.f must be normal or component:i:j, got '{s}'")))
}
