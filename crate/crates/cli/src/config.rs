//! Run configuration: a flat `key = value` file plus `--key value` overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dg3pd_core::scene::MaskSpec;
use dg3pd_core::texture::TextureParams;
use dg3pd_core::tvl2::Tvl2Params;
use dg3pd_core::{SolverParams, Threshold};

use crate::error::CliError;

/// Parameters of the `make-scene` command and of runs without an input file.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub rows: usize,
    pub cols: usize,
    pub sigma: f64,
    pub mask: MaskSpec,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { rows: 64, cols: 64, sigma: 100.0, mask: MaskSpec::Mixed { fraction: 0.3 } }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Region used for texture PSNR; the segmented ROI when absent.
    pub texture_mask: Option<PathBuf>,
    pub output: PathBuf,
    pub solver: SolverParams,
    pub texture: TextureParams,
    pub tvl2: Tvl2Params,
    pub trace: bool,
    pub seed: u64,
    pub scene: SceneConfig,
    /// `(method name, restored image)` pairs ingested by `compare`.
    pub external: Vec<(String, PathBuf)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            mask: None,
            truth: None,
            texture_mask: None,
            output: PathBuf::from("out"),
            solver: SolverParams::default(),
            texture: TextureParams::default(),
            tvl2: Tvl2Params::default(),
            trace: false,
            seed: 0,
            scene: SceneConfig::default(),
            external: Vec::new(),
        }
    }
}

/// A raw value and the directory relative paths in it resolve against.
#[derive(Clone, Debug)]
struct Entry {
    value: String,
    base: PathBuf,
}

/// Keys that set the same parameter and may not be combined.
const ALIASES: [(&str, &str); 6] = [
    ("tv_directions", "l"),
    ("texture_directions", "s"),
    ("nl_iterations", "n"),
    ("c_mu1", "mu1"),
    ("c_mu2", "mu2"),
    ("c_nu", "nu"),
];

fn key_name(raw: &str) -> String {
    raw.trim().replace('-', "_").to_ascii_lowercase()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("config line {}: expected key = value", no + 1)))?;
        let key = key_name(key);
        if key.is_empty() {
            return Err(CliError::validation(format!("config line {}: empty key", no + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Splits `--key value`, `--key=value` and bare `--flag` (meaning `true`).
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let body = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::validation(format!("unexpected argument {arg:?}; use --key value")))?;
        if let Some((k, v)) = body.split_once('=') {
            out.push((key_name(k), v.to_string()));
            i += 1;
        } else if i + 1 < args.len() && !args[i + 1].starts_with("--") {
            out.push((key_name(body), args[i + 1].clone()));
            i += 2;
        } else {
            out.push((key_name(body), "true".to_string()));
            i += 1;
        }
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::validation(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(CliError::validation(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn resolve(entry: &Entry) -> PathBuf {
    let p = PathBuf::from(&entry.value);
    if p.is_absolute() {
        p
    } else {
        entry.base.join(p)
    }
}

fn mask_spec(kind: &str, fraction: f64) -> Result<MaskSpec, CliError> {
    Ok(match kind {
        "none" => MaskSpec::None,
        "blobs" => MaskSpec::Blobs { fraction },
        "scratches" => MaskSpec::Scratches { fraction },
        "mixed" => MaskSpec::Mixed { fraction },
        _ => return Err(CliError::validation(format!("mask_kind: unknown kind {kind:?}"))),
    })
}

impl RunConfig {
    /// Builds the configuration from an optional file and overrides. File
    /// paths resolve against the file's directory, override paths against
    /// the working directory.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let cwd = PathBuf::from(".");
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| cwd.clone());
            for (k, v) in parse_config_text(&text)? {
                entries.insert(k, Entry { value: v, base: base.clone() });
            }
        }
        for (k, v) in parse_overrides(overrides)? {
            entries.insert(k, Entry { value: v, base: cwd.clone() });
        }
        Self::from_entries(entries)
    }

    /// Like [`RunConfig::load`], taking `--config FILE` from the argument list.
    pub fn from_args(args: &[String]) -> Result<Self, CliError> {
        let mut file = None;
        let mut rest = Vec::with_capacity(args.len());
        let mut i = 0;
        while i < args.len() {
            if args[i] == "--config" {
                let path = args.get(i + 1).ok_or_else(|| CliError::validation("--config needs a file"))?;
                file = Some(PathBuf::from(path));
                i += 2;
            } else if let Some(path) = args[i].strip_prefix("--config=") {
                file = Some(PathBuf::from(path));
                i += 1;
            } else {
                rest.push(args[i].clone());
                i += 1;
            }
        }
        Self::load(file.as_deref(), &rest)
    }

    fn from_entries(mut entries: BTreeMap<String, Entry>) -> Result<Self, CliError> {
        for (a, b) in ALIASES {
            if entries.contains_key(a) && entries.contains_key(b) {
                return Err(CliError::validation(format!("{a} and {b} set the same parameter")));
            }
        }
        let mut cfg = RunConfig::default();
        if let Some(preset) = entries.remove("preset") {
            cfg.solver = match preset.value.as_str() {
                "default" => SolverParams::default(),
                "fingerprint" => SolverParams::fingerprint(),
                other => return Err(CliError::validation(format!("preset: unknown preset {other:?}"))),
            };
        }
        let mask_kind = entries.remove("mask_kind");
        let mask_fraction = entries.remove("mask_fraction");
        for (key, entry) in &entries {
            cfg.apply(key, entry)?;
        }
        if mask_kind.is_some() || mask_fraction.is_some() {
            let fraction = match &mask_fraction {
                Some(e) => parse("mask_fraction", &e.value)?,
                None => 0.3,
            };
            let kind = mask_kind.map(|e| e.value).unwrap_or_else(|| "mixed".into());
            cfg.scene.mask = mask_spec(&kind, fraction)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, e: &Entry) -> Result<(), CliError> {
        let v = e.value.as_str();
        let s = &mut self.solver;
        let t = &mut self.texture;
        match key {
            "input" => self.input = Some(resolve(e)),
            "mask" => self.mask = Some(resolve(e)),
            "truth" => self.truth = Some(resolve(e)),
            "texture_mask" => self.texture_mask = Some(resolve(e)),
            "output" => self.output = resolve(e),
            "trace" => self.trace = parse_bool(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "iterations" => s.iterations = parse(key, v)?,
            "beta4" => s.beta4 = parse(key, v)?,
            "theta" => s.theta = parse(key, v)?,
            "c1" => s.c1 = parse(key, v)?,
            "c2" => s.c2 = parse(key, v)?,
            "c3" => s.c3 = parse(key, v)?,
            "tv_directions" | "l" => s.tv_directions = parse(key, v)?,
            "texture_directions" | "s" => s.texture_directions = parse(key, v)?,
            "gamma" => s.gamma = parse(key, v)?,
            "c_mu1" => s.mu1 = Threshold::Adaptive(parse(key, v)?),
            "c_mu2" => s.mu2 = Threshold::Adaptive(parse(key, v)?),
            "mu1" => s.mu1 = Threshold::Fixed(parse(key, v)?),
            "mu2" => s.mu2 = Threshold::Fixed(parse(key, v)?),
            "c_nu" => s.nu = Threshold::Adaptive(parse(key, v)?),
            "nu" => s.nu = Threshold::Fixed(parse(key, v)?),
            "scales" => s.frame.scales = Some(parse(key, v)?),
            "coarse_angles" => s.frame.coarse_angles = parse(key, v)?,
            "patch_size" => t.patch.size = parse(key, v)?,
            "p1" => t.patch.p1 = parse(key, v)?,
            "p2" => t.patch.p2 = parse(key, v)?,
            "p3" => t.patch.p3 = parse(key, v)?,
            "dilation_radius" => t.dilation_radius = parse(key, v)?,
            "min_area" => t.segment.min_area = parse(key, v)?,
            "k" => t.nlmeans.k = parse(key, v)?,
            "nl_iterations" | "n" => t.nlmeans.iterations = parse(key, v)?,
            "nl_size" => t.nlmeans.size = parse(key, v)?,
            "nl_window" => t.nlmeans.window = Some(parse(key, v)?),
            "tvl2_beta" => self.tvl2.beta = parse(key, v)?,
            "tvl2_rho" => self.tvl2.rho = parse(key, v)?,
            "tvl2_iterations" => self.tvl2.iterations = parse(key, v)?,
            "tvl2_isotropic" => self.tvl2.isotropic = parse_bool(key, v)?,
            "rows" => self.scene.rows = parse(key, v)?,
            "cols" => self.scene.cols = parse(key, v)?,
            "sigma" => self.scene.sigma = parse(key, v)?,
            "external" => {
                for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (name, path) = item
                        .split_once(':')
                        .ok_or_else(|| CliError::validation(format!("external: expected name:path, got {item:?}")))?;
                    let entry = Entry { value: path.to_string(), base: e.base.clone() };
                    self.external.push((name.to_string(), resolve(&entry)));
                }
            }
            _ => return Err(CliError::validation(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.solver.validate()?;
        self.texture.patch.validate()?;
        self.tvl2.validate()?;
        let nl = &self.texture.nlmeans;
        if nl.k == 0 || nl.iterations == 0 || nl.size.is_multiple_of(2) {
            return Err(CliError::validation("nlmeans needs k >= 1, n >= 1 and an odd patch size"));
        }
        if self.scene.rows == 0 || self.scene.cols == 0 {
            return Err(CliError::validation("rows and cols must be positive"));
        }
        Ok(())
    }
}
