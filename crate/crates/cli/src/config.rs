//! Run configuration: a TOML file read in strict mode. Every problem found is
//! reported, not only the first.

use std::path::{Path, PathBuf};

use gapfield::asymptotics::DomainFamily;
use gapfield::conductivity::{PhiPreset, PhiTerm};
use gapfield::elliptic::DEFAULT_TOL;
use gapfield::{make_preset, CoefficientPreset, MeshOptions, WeightMode};
use toml::{Table, Value};

use crate::CliError;

pub const DEFAULT_GAP_LAYERS: usize = 8;
pub const DEFAULT_H_TARGET: f64 = 0.05;
pub const DEFAULT_OUT_DIR: &str = "gapfield-out";
/// Environment override for the output directory; the only one honored.
pub const OUT_DIR_ENV: &str = "GAPFIELD_OUT";

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryConfig {
    pub family: DomainFamily,
    /// Gap for `solve`.
    pub eps: Option<f64>,
    pub r0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub n: u32,
    pub m: u32,
    pub eps: Vec<f64>,
    pub r0: f64,
}

/// Overrides of the acceptance-suite defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyOverrides {
    pub h_target: Option<f64>,
    pub gap_layers: Option<usize>,
    pub eps: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub geometry: Option<GeometryConfig>,
    pub mesh: MeshOptions,
    pub dump_mesh: bool,
    pub phi: Vec<PhiTerm>,
    pub coefficient: CoefficientPreset,
    pub tol: f64,
    pub sweep_eps: Option<Vec<f64>>,
    pub oracle: Option<OracleConfig>,
    pub verify: VerifyOverrides,
    /// Extra stores merged by `report`.
    pub report_stores: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub workers: Option<usize>,
}

/// Typed access to one table; remembers which keys were read so the rest can
/// be reported as unknown.
struct Block<'a, 'e> {
    path: String,
    table: &'a Table,
    seen: Vec<&'static str>,
    errors: &'e mut Vec<String>,
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

impl<'a, 'e> Block<'a, 'e> {
    fn new(path: &str, table: &'a Table, errors: &'e mut Vec<String>) -> Self {
        Block {
            path: path.to_string(),
            table,
            seen: Vec::new(),
            errors,
        }
    }

    fn key(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.get(key)
    }

    fn mismatch(&mut self, key: &str, want: &str, got: &Value) {
        let k = self.key(key);
        self.errors.push(format!("`{k}`: expected {want}, found {}", type_name(got)));
    }

    fn invalid(&mut self, key: &str, msg: impl std::fmt::Display) {
        let k = self.key(key);
        self.errors.push(format!("`{k}`: {msg}"));
    }

    fn f64(&mut self, key: &'static str) -> Option<f64> {
        match self.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            v => {
                self.mismatch(key, "a number", v);
                None
            }
        }
    }

    fn uint(&mut self, key: &'static str) -> Option<u64> {
        match self.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                self.invalid(key, format!("must be non-negative, got {i}"));
                None
            }
            v => {
                self.mismatch(key, "an integer", v);
                None
            }
        }
    }

    fn string(&mut self, key: &'static str) -> Option<&'a str> {
        match self.get(key)? {
            Value::String(s) => Some(s.as_str()),
            v => {
                self.mismatch(key, "a string", v);
                None
            }
        }
    }

    fn boolean(&mut self, key: &'static str) -> Option<bool> {
        match self.get(key)? {
            Value::Boolean(b) => Some(*b),
            v => {
                self.mismatch(key, "a boolean", v);
                None
            }
        }
    }

    fn f64_list(&mut self, key: &'static str) -> Option<Vec<f64>> {
        let v = self.get(key)?;
        let Value::Array(items) = v else {
            self.mismatch(key, "an array of numbers", v);
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(f) => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                other => {
                    self.mismatch(key, "an array of numbers", other);
                    return None;
                }
            }
        }
        Some(out)
    }

    fn table(&mut self, key: &'static str) -> Option<&'a Table> {
        match self.get(key)? {
            Value::Table(t) => Some(t),
            v => {
                self.mismatch(key, "a table", v);
                None
            }
        }
    }

    fn positive(&mut self, key: &'static str) -> Option<f64> {
        let v = self.f64(key)?;
        if v > 0.0 && v.is_finite() {
            Some(v)
        } else {
            self.invalid(key, format!("must be positive, got {v}"));
            None
        }
    }

    fn required<T>(&mut self, key: &'static str, v: Option<T>) -> Option<T> {
        if v.is_none() && !self.table.contains_key(key) {
            self.invalid(key, "is required");
        }
        v
    }

    fn finish(self) {
        for k in self.table.keys() {
            if !self.seen.iter().any(|s| s == k) {
                let full = if self.path.is_empty() {
                    k.clone()
                } else {
                    format!("{}.{k}", self.path)
                };
                self.errors.push(format!("unknown key `{full}`"));
            }
        }
    }
}

/// Check the gap list: positive, strictly decreasing, every value below 1/2.
pub fn eps_list_errors(eps: &[f64]) -> Vec<String> {
    let mut errs = Vec::new();
    if eps.is_empty() {
        errs.push("eps list is empty".to_string());
    }
    for &e in eps {
        if !(e > 0.0 && e < 0.5) {
            errs.push(format!("eps = {e} outside the admissible range 0 < eps < 1/2"));
        }
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        errs.push("eps values must be strictly decreasing".to_string());
    }
    errs
}

fn check_eps_list(b: &mut Block, key: &'static str, eps: Vec<f64>) -> Option<Vec<f64>> {
    let errs = eps_list_errors(&eps);
    if errs.is_empty() {
        return Some(eps);
    }
    for e in errs {
        b.invalid(key, e);
    }
    None
}

fn parse_geometry(t: &Table, errors: &mut Vec<String>) -> Option<GeometryConfig> {
    let mut b = Block::new("geometry", t, errors);
    let kind = b.string("kind");
    let kind = b.required("kind", kind);
    let eps = b.f64("eps");
    let eps = match eps {
        Some(e) if !(e > 0.0 && e < 0.5) => {
            b.invalid("eps", format!("{e} outside the admissible range 0 < eps < 1/2"));
            None
        }
        e => e,
    };
    let r0 = b.positive("r0");
    let family = match kind {
        Some("disks") => {
            let r = b.positive("r").unwrap_or(0.5);
            let big_r = b.positive("big_r").unwrap_or(1.0);
            let mode = match b.string("mode") {
                None | Some("planar") => Some(WeightMode::Planar),
                Some("axisymmetric") => Some(WeightMode::Axisymmetric),
                Some(other) => {
                    b.invalid("mode", format!("unknown mode `{other}` (planar | axisymmetric)"));
                    None
                }
            };
            mode.map(|mode| DomainFamily::Disks { r, big_r, mode })
        }
        Some("m-profile") => {
            let m = b.uint("m");
            let m = b.required("m", m);
            let lambda = b.positive("lambda").unwrap_or(1.0);
            match m {
                Some(m) if m >= 2 => Some(DomainFamily::MProfile { m: m as u32, lambda }),
                Some(m) => {
                    b.invalid("m", format!("must be at least 2, got {m}"));
                    None
                }
                None => None,
            }
        }
        Some("ellipse") => {
            let a = b.positive("a");
            let a = b.required("a", a);
            let bb = b.positive("b");
            let bb = b.required("b", bb);
            let big_r = b.positive("big_r").unwrap_or(1.0);
            match (a, bb) {
                (Some(a), Some(bb)) => Some(DomainFamily::Ellipse { a, b: bb, big_r }),
                _ => None,
            }
        }
        Some(other) => {
            b.invalid("kind", format!("unknown geometry kind `{other}` (disks | m-profile | ellipse)"));
            None
        }
        None => None,
    };
    b.finish();
    let family = family?;
    // surface geometric impossibilities at config time
    let probe_eps = eps.unwrap_or(1e-2);
    match family.build(probe_eps) {
        Ok(dom) => {
            if let Some(r) = r0 {
                if let Err(e) = dom.with_r0(r) {
                    errors.push(format!("`geometry.r0`: {e}"));
                    return None;
                }
            }
        }
        Err(e) => {
            errors.push(format!("`geometry`: {e}"));
            return None;
        }
    }
    Some(GeometryConfig { family, eps, r0 })
}

fn parse_terms(b: &mut Block, key: &'static str) -> Option<Vec<PhiTerm>> {
    let v = b.get(key)?;
    let Value::Array(items) = v else {
        b.mismatch(key, "an array of {coef, px, py} tables", v);
        return None;
    };
    let mut out = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let Value::Table(t) = item else {
            b.mismatch(key, "an array of {coef, px, py} tables", item);
            return None;
        };
        let path = format!("{}[{i}]", b.key(key));
        let mut tb = Block::new(&path, t, b.errors);
        let coef = tb.f64("coef");
        let coef = tb.required("coef", coef);
        let px = tb.uint("px").unwrap_or(0);
        let py = tb.uint("py").unwrap_or(0);
        tb.finish();
        out.push(PhiTerm {
            coef: coef?,
            px: px as u32,
            py: py as u32,
        });
    }
    Some(out)
}

fn parse_boundary(t: &Table, errors: &mut Vec<String>) -> Option<Vec<PhiTerm>> {
    let mut b = Block::new("boundary", t, errors);
    let preset = b.string("preset");
    let terms = parse_terms(&mut b, "terms");
    let out = match (preset, terms) {
        (Some(_), Some(_)) => {
            b.invalid("preset", "give either `preset` or `terms`, not both");
            None
        }
        (Some(p), None) => match p {
            "linear" => Some(PhiPreset::LinearXn.terms()),
            "constant" => Some(PhiPreset::Constant.terms()),
            "quadratic" => Some(PhiPreset::Quadratic.terms()),
            other => {
                b.invalid("preset", format!("unknown preset `{other}` (linear | constant | quadratic)"));
                None
            }
        },
        (None, Some(t)) if t.is_empty() => {
            b.invalid("terms", "must not be empty");
            None
        }
        (None, t) => t,
    };
    b.finish();
    out
}

fn parse_coefficient(t: &Table, errors: &mut Vec<String>) -> Option<CoefficientPreset> {
    let mut b = Block::new("coefficient", t, errors);
    let preset = b.string("preset");
    let preset = b.required("preset", preset);
    let out = match preset {
        Some("identity") => Some(CoefficientPreset::Identity),
        Some("scaled") => {
            let s = b.positive("s");
            b.required("s", s).map(|s| CoefficientPreset::Scaled { s })
        }
        Some("constant-offdiag") => {
            let s = b.positive("s").unwrap_or(1.0);
            let a_off = b.f64("a_off");
            b.required("a_off", a_off)
                .map(|a_off| CoefficientPreset::ConstantOffdiag { s, a_off })
        }
        Some("smooth-rotation") => {
            let kappa = b.f64("kappa");
            let kappa = b.required("kappa", kappa);
            let theta0 = b.f64("theta0");
            let theta0 = b.required("theta0", theta0);
            let width = b.f64("width");
            let width = b.required("width", width);
            let center = b.f64_list("center");
            let center = match center {
                Some(c) if c.len() == 2 => Some([c[0], c[1]]),
                Some(c) => {
                    b.invalid("center", format!("expected 2 coordinates, got {}", c.len()));
                    None
                }
                None => Some([0.0, 0.0]),
            };
            match (kappa, theta0, width, center) {
                (Some(kappa), Some(theta0), Some(width), Some(center)) => Some(CoefficientPreset::SmoothRotation {
                    kappa,
                    theta0,
                    width,
                    center,
                }),
                _ => None,
            }
        }
        Some(other) => {
            b.invalid(
                "preset",
                format!("unknown preset `{other}` (identity | scaled | constant-offdiag | smooth-rotation)"),
            );
            None
        }
        None => None,
    };
    b.finish();
    let preset = out?;
    if let Err(e) = make_preset(preset.clone()) {
        errors.push(format!("`coefficient`: {e}"));
        return None;
    }
    Some(preset)
}

/// Parse and validate a configuration text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(vec![format!("malformed config: {}", e.message())]))?;
    let mut errors = Vec::new();
    let mut cfg = RunConfig {
        geometry: None,
        mesh: MeshOptions::new(DEFAULT_H_TARGET, DEFAULT_GAP_LAYERS),
        dump_mesh: false,
        phi: PhiPreset::LinearXn.terms(),
        coefficient: CoefficientPreset::Identity,
        tol: DEFAULT_TOL,
        sweep_eps: None,
        oracle: None,
        verify: VerifyOverrides::default(),
        report_stores: Vec::new(),
        out_dir: None,
        seed: 0,
        workers: None,
    };
    let mut top = Block::new("", &root, &mut errors);
    cfg.seed = top.uint("seed").unwrap_or(0);
    cfg.workers = match top.uint("workers") {
        Some(0) => {
            top.invalid("workers", "must be at least 1");
            None
        }
        w => w.map(|w| w as usize),
    };
    cfg.out_dir = top.string("out").map(PathBuf::from);
    let geometry = top.table("geometry");
    let mesh = top.table("mesh");
    let boundary = top.table("boundary");
    let coefficient = top.table("coefficient");
    let solver = top.table("solver");
    let sweep = top.table("sweep");
    let oracle = top.table("oracle");
    let verify = top.table("verify");
    let report = top.table("report");
    top.finish();

    if let Some(t) = geometry {
        cfg.geometry = parse_geometry(t, &mut errors);
    }
    if let Some(t) = mesh {
        let mut b = Block::new("mesh", t, &mut errors);
        if let Some(h) = b.positive("h_target") {
            cfg.mesh.h_target = h;
        }
        match b.uint("gap_layers") {
            Some(0) => b.invalid("gap_layers", "must be at least 1"),
            Some(l) => cfg.mesh.gap_layers = l as usize,
            None => {}
        }
        if let Some(r) = b.positive("band_resolution") {
            cfg.mesh.band_resolution = r;
        }
        match b.f64("band_growth") {
            Some(g) if g < 1.0 => b.invalid("band_growth", format!("must be at least 1, got {g}")),
            Some(g) => cfg.mesh.band_growth = g,
            None => {}
        }
        cfg.dump_mesh = b.boolean("dump").unwrap_or(false);
        b.finish();
    }
    if let Some(t) = boundary {
        if let Some(phi) = parse_boundary(t, &mut errors) {
            cfg.phi = phi;
        }
    }
    if let Some(t) = coefficient {
        if let Some(c) = parse_coefficient(t, &mut errors) {
            cfg.coefficient = c;
        }
    }
    if let Some(t) = solver {
        let mut b = Block::new("solver", t, &mut errors);
        if let Some(tol) = b.positive("tol") {
            cfg.tol = tol;
        }
        b.finish();
    }
    if let Some(t) = sweep {
        let mut b = Block::new("sweep", t, &mut errors);
        let eps = b.f64_list("eps");
        let eps = b.required("eps", eps);
        cfg.sweep_eps = eps.and_then(|e| check_eps_list(&mut b, "eps", e));
        b.finish();
    }
    if let Some(t) = oracle {
        let mut b = Block::new("oracle", t, &mut errors);
        let n = b.uint("n");
        let n = b.required("n", n);
        let m = b.uint("m").unwrap_or(2);
        let r0 = b.positive("r0").unwrap_or(1.0);
        let eps = b
            .f64_list("eps")
            .unwrap_or_else(|| (0..=10).map(|k| 10f64.powf(-2.0 - 0.5 * k as f64)).collect());
        let eps = check_eps_list(&mut b, "eps", eps);
        if let Some(n) = n {
            if n < 2 {
                b.invalid("n", format!("must be at least 2, got {n}"));
            }
        }
        if m < 2 {
            b.invalid("m", format!("must be at least 2, got {m}"));
        }
        if let (Some(n), Some(eps)) = (n, eps) {
            if n >= 2 && m >= 2 {
                cfg.oracle = Some(OracleConfig {
                    n: n as u32,
                    m: m as u32,
                    eps,
                    r0,
                });
            }
        }
        b.finish();
    }
    if let Some(t) = verify {
        let mut b = Block::new("verify", t, &mut errors);
        cfg.verify.h_target = b.positive("h_target");
        cfg.verify.gap_layers = match b.uint("gap_layers") {
            Some(0) => {
                b.invalid("gap_layers", "must be at least 1");
                None
            }
            l => l.map(|l| l as usize),
        };
        cfg.verify.eps = b.f64_list("eps").and_then(|e| check_eps_list(&mut b, "eps", e));
        b.finish();
    }
    if let Some(t) = report {
        let mut b = Block::new("report", t, &mut errors);
        if let Some(v) = b.get("stores") {
            match v {
                Value::Array(items) if items.iter().all(|i| i.is_str()) => {
                    cfg.report_stores = items.iter().filter_map(|i| i.as_str()).map(PathBuf::from).collect();
                }
                other => b.mismatch("stores", "an array of paths", other),
            }
        }
        b.finish();
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(errors))
    }
}

/// Read and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        match parse_config_str(text) {
            Err(CliError::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_disks_config_gets_defaults() {
        let cfg = parse_config_str("[geometry]\nkind = \"disks\"\neps = 0.01\n").unwrap();
        assert_eq!(cfg.mesh.gap_layers, 8);
        assert_eq!(cfg.tol, 1e-10);
        assert_eq!(
            cfg.geometry.unwrap().family,
            DomainFamily::Disks {
                r: 0.5,
                big_r: 1.0,
                mode: WeightMode::Planar
            }
        );
        assert_eq!(cfg.coefficient, CoefficientPreset::Identity);
    }

    #[test]
    fn gap_outside_range_is_rejected() {
        let e = errors("[sweep]\neps = [0.6]\n");
        assert!(e.iter().any(|m| m.contains("0.6") && m.contains("1/2")), "{e:?}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = errors("[geometry]\nkind = \"disks\"\nepsilonn = 0.1\n");
        assert!(e.iter().any(|m| m.contains("geometry.epsilonn")), "{e:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let e = errors(
            "bogus = 1\n[mesh]\nh_target = \"fine\"\n[sweep]\neps = [0.01, 0.1]\n[coefficient]\npreset = \"magic\"\n",
        );
        assert!(e.len() >= 4, "{e:?}");
        assert!(e.iter().any(|m| m.contains("`bogus`")));
        assert!(e.iter().any(|m| m.contains("mesh.h_target") && m.contains("number")));
        assert!(e.iter().any(|m| m.contains("decreasing")));
        assert!(e.iter().any(|m| m.contains("magic")));
    }

    #[test]
    fn explicit_terms_and_presets() {
        let cfg = parse_config_str(
            "[boundary]\nterms = [{coef = 2.0, px = 1}, {coef = -1.0, py = 2}]\n[coefficient]\npreset = \"constant-offdiag\"\na_off = 0.3\n",
        )
        .unwrap();
        assert_eq!(cfg.phi.len(), 2);
        assert_eq!(cfg.phi[1], PhiTerm { coef: -1.0, px: 0, py: 2 });
        assert_eq!(cfg.coefficient, CoefficientPreset::ConstantOffdiag { s: 1.0, a_off: 0.3 });
        let e = errors("[coefficient]\npreset = \"constant-offdiag\"\na_off = 1.5\n");
        assert!(e.iter().any(|m| m.contains("coefficient")), "{e:?}");
    }

    #[test]
    fn impossible_geometry_is_a_config_error() {
        let e = errors("[geometry]\nkind = \"disks\"\nr = 0.9\nbig_r = 0.5\n");
        assert!(e.iter().any(|m| m.contains("geometry")), "{e:?}");
        let e = errors("[geometry]\nkind = \"m-profile\"\n");
        assert!(e.iter().any(|m| m.contains("geometry.m") && m.contains("required")), "{e:?}");
    }
}
