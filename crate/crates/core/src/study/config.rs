//! Flat `key = value` configuration with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys,
//! duplicate keys and malformed values are errors naming the key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dlrom::{Architecture, TrainConfig};
use crate::error::{Error, Result};
use crate::geometry::UniformGrid1D;
use crate::random_fields::CovarianceKernel;
use crate::solvers::{BurgersProblem, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Darcy,
    Burgers,
    Cookie,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Darcy => "darcy",
            ProblemKind::Burgers => "burgers",
            ProblemKind::Cookie => "cookie",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub problem: ProblemKind,
    /// Square mesh divisions (Darcy, cookie).
    pub n_div: usize,
    /// Finite-volume cells (Burgers).
    pub n_cells: usize,
    pub burgers_length: f64,
    pub burgers_dt: f64,
    pub burgers_t_final: f64,
    /// Covariance length scale of the Darcy log-permeability.
    pub length_scale: f64,
    pub n_snapshots: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub sweep_ns: Vec<usize>,
    pub table1_n: usize,
    /// Autoencoder hidden width; `None` selects the problem default.
    pub ae_width: Option<usize>,
    /// Autoencoder variants per latent dimension; `None` selects the
    /// problem default.
    pub ae_variants: Option<usize>,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "problem.kind",
    "mesh.n_div",
    "mesh.n_cells",
    "burgers.length",
    "burgers.dt",
    "burgers.t_final",
    "field.length_scale",
    "snapshots.count",
    "snapshots.seed",
    "snapshots.train_fraction",
    "sweep.ns",
    "table1.n",
    "arch.ae_width",
    "arch.variants",
    "train.alpha1",
    "train.alpha2",
    "train.alpha3",
    "train.rel_first_term",
    "train.epochs",
    "train.lr",
    "train.batch_size",
    "train.weight_decay",
    "output.dir",
];

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// `default` maps to `None`.
fn parse_optional<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "default" {
        Ok(None)
    } else {
        parse_value(key, v).map(Some)
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(|s| parse_value::<usize>(key, s.trim()))
        .collect()
}

impl StudyConfig {
    /// Defaults for a problem; the seed still has to be provided.
    pub fn defaults(problem: ProblemKind) -> Self {
        let (n_div, n_snapshots, train_fraction, ns, epochs) = match problem {
            ProblemKind::Darcy => (30, 1000, 0.9, vec![1, 2, 3, 4, 5, 6], 300),
            ProblemKind::Burgers => (30, 2000, 0.9, vec![1, 2, 3, 4, 5, 6], 300),
            ProblemKind::Cookie => (42, 2000, 0.75, vec![2, 3, 5], 300),
        };
        Self {
            problem,
            n_div,
            n_cells: 500,
            burgers_length: 5.0,
            burgers_dt: 0.01,
            burgers_t_final: 2.0,
            length_scale: 1.0,
            n_snapshots,
            seed: 0,
            train_fraction,
            sweep_ns: ns,
            table1_n: 16,
            ae_width: None,
            ae_variants: None,
            train: TrainConfig {
                epochs,
                ..TrainConfig::default()
            },
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!(
                    "line {}: unknown key {k:?}",
                    lineno + 1
                )));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {k:?}",
                    lineno + 1
                )));
            }
        }
        let kind = match map.get("problem.kind").map(String::as_str) {
            Some("darcy") => ProblemKind::Darcy,
            Some("burgers") => ProblemKind::Burgers,
            Some("cookie") => ProblemKind::Cookie,
            Some(other) => {
                return Err(Error::Config(format!(
                    "problem.kind: expected darcy, burgers or cookie, got {other:?}"
                )))
            }
            None => return Err(Error::Config("problem.kind is required".into())),
        };
        let mut c = Self::defaults(kind);
        let seed = map
            .get("snapshots.seed")
            .ok_or_else(|| Error::Config("snapshots.seed is required".into()))?;
        c.seed = parse_value("snapshots.seed", seed)?;
        for (k, v) in &map {
            let v = v.as_str();
            match k.as_str() {
                "mesh.n_div" => c.n_div = parse_value(k, v)?,
                "mesh.n_cells" => c.n_cells = parse_value(k, v)?,
                "burgers.length" => c.burgers_length = parse_value(k, v)?,
                "burgers.dt" => c.burgers_dt = parse_value(k, v)?,
                "burgers.t_final" => c.burgers_t_final = parse_value(k, v)?,
                "field.length_scale" => c.length_scale = parse_value(k, v)?,
                "snapshots.count" => c.n_snapshots = parse_value(k, v)?,
                "snapshots.train_fraction" => c.train_fraction = parse_value(k, v)?,
                "sweep.ns" => c.sweep_ns = parse_list(k, v)?,
                "table1.n" => c.table1_n = parse_value(k, v)?,
                "arch.ae_width" => c.ae_width = parse_optional(k, v)?,
                "arch.variants" => c.ae_variants = parse_optional(k, v)?,
                "train.alpha1" => c.train.alpha1 = parse_value(k, v)?,
                "train.alpha2" => c.train.alpha2 = parse_value(k, v)?,
                "train.alpha3" => c.train.alpha3 = parse_value(k, v)?,
                "train.rel_first_term" => c.train.rel_first_term = parse_value(k, v)?,
                "train.epochs" => c.train.epochs = parse_value(k, v)?,
                "train.lr" => c.train.lr = parse_value(k, v)?,
                "train.batch_size" => c.train.batch_size = parse_value(k, v)?,
                "train.weight_decay" => c.train.weight_decay = parse_value(k, v)?,
                "output.dir" => c.output_dir = PathBuf::from(v),
                _ => {}
            }
        }
        c.train.seed = c.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, why: String| Err(Error::Config(format!("{key}: {why}")));
        if self.n_snapshots < 2 {
            return fail(
                "snapshots.count",
                format!("need at least 2, got {}", self.n_snapshots),
            );
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(
                "snapshots.train_fraction",
                format!("must lie in (0, 1), got {}", self.train_fraction),
            );
        }
        if self.n_div == 0 {
            return fail("mesh.n_div", "must be positive".into());
        }
        if self.n_cells == 0 {
            return fail("mesh.n_cells", "must be positive".into());
        }
        if !(self.length_scale > 0.0) {
            return fail(
                "field.length_scale",
                format!("must be positive, got {}", self.length_scale),
            );
        }
        for (key, v) in [
            ("burgers.length", self.burgers_length),
            ("burgers.dt", self.burgers_dt),
            ("burgers.t_final", self.burgers_t_final),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(key, format!("must be positive, got {v}"));
            }
        }
        if self.sweep_ns.is_empty()
            || self.sweep_ns[0] == 0
            || self.sweep_ns.windows(2).any(|w| w[0] >= w[1])
        {
            return fail(
                "sweep.ns",
                format!(
                    "must be positive and strictly ascending, got {:?}",
                    self.sweep_ns
                ),
            );
        }
        if self.table1_n == 0 {
            return fail("table1.n", "must be positive".into());
        }
        if self.ae_width == Some(0) {
            return fail("arch.ae_width", "must be positive".into());
        }
        if self.ae_variants == Some(0) {
            return fail("arch.variants", "must be positive".into());
        }
        self.train
            .validate()
            .map_err(|e| Error::Config(format!("train: {e}")))
    }

    /// Canonical `key = value` listing of every resolved setting.
    pub fn canonical(&self) -> String {
        let t = &self.train;
        let ns: Vec<String> = self.sweep_ns.iter().map(usize::to_string).collect();
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("problem.kind", self.problem.name().into());
        put("mesh.n_div", self.n_div.to_string());
        put("mesh.n_cells", self.n_cells.to_string());
        put("burgers.length", format!("{:?}", self.burgers_length));
        put("burgers.dt", format!("{:?}", self.burgers_dt));
        put("burgers.t_final", format!("{:?}", self.burgers_t_final));
        put("field.length_scale", format!("{:?}", self.length_scale));
        put("snapshots.count", self.n_snapshots.to_string());
        put("snapshots.seed", self.seed.to_string());
        put(
            "snapshots.train_fraction",
            format!("{:?}", self.train_fraction),
        );
        put("sweep.ns", ns.join(","));
        put("table1.n", self.table1_n.to_string());
        put(
            "arch.ae_width",
            self.ae_width
                .map_or_else(|| "default".into(), |w| w.to_string()),
        );
        put(
            "arch.variants",
            self.ae_variants
                .map_or_else(|| "default".into(), |v| v.to_string()),
        );
        put("train.alpha1", format!("{:?}", t.alpha1));
        put("train.alpha2", format!("{:?}", t.alpha2));
        put("train.alpha3", format!("{:?}", t.alpha3));
        put("train.rel_first_term", t.rel_first_term.to_string());
        put("train.epochs", t.epochs.to_string());
        put("train.lr", format!("{:?}", t.lr));
        put("train.batch_size", t.batch_size.to_string());
        put("train.weight_decay", format!("{:?}", t.weight_decay));
        s
    }

    /// SHA-256 of [`StudyConfig::canonical`], hex encoded. The output
    /// directory does not enter the hash.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match self.problem {
            ProblemKind::Darcy => ProblemSpec::darcy(
                self.n_div,
                CovarianceKernel::squared_exponential(self.length_scale)?,
            ),
            ProblemKind::Burgers => Ok(ProblemSpec::burgers(BurgersProblem {
                grid: UniformGrid1D::new(self.burgers_length, self.n_cells)?,
                dt: self.burgers_dt,
                t_final: self.burgers_t_final,
            })),
            ProblemKind::Cookie => ProblemSpec::cookie(self.n_div),
        }
    }

    pub fn architecture(&self, spec: &ProblemSpec) -> Architecture {
        let mut a = Architecture::default_for(spec);
        if let Some(w) = self.ae_width {
            a.ae_width = w;
        }
        if let Some(v) = self.ae_variants {
            a.variants = v;
        }
        a
    }
}
