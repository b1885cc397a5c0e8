//! Subcommand implementations. Every command reads and checks its inputs,
//! computes all results in memory and only then writes the output directory.

use std::fs;
use std::path::{Component, Path};

use dg3pd_core::filters::{build_filter_bank, density_diagnostics, empirical_filters, DensityReport};
use dg3pd_core::io::{self, MetricsRow};
use dg3pd_core::metrics::{regional_scores, RegionalScores};
use dg3pd_core::msdt::msdt_forward;
use dg3pd_core::scene::make_challenge_scene;
use dg3pd_core::solver::{run, run_unmasked};
use dg3pd_core::texture::{restore_texture, synthesize, TextureRestoration};
use dg3pd_core::tvl2::{tvl2_inpaint, Tvl2Outcome};
use dg3pd_core::{Decomposition64, Grid, Mask, Spectrum};

use crate::config::RunConfig;
use crate::error::CliError;

/// Largest analytic unity defect reported as PASS.
pub const UNITY_TOLERANCE: f64 = 1e-10;

/// Offset added to signed components in 8-bit previews.
const PREVIEW_SHIFT: f64 = 128.0;

/// Files waiting to be written, keyed by path relative to the output directory.
#[derive(Default)]
struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    fn bytes(&mut self, name: impl Into<String>, data: Vec<u8>) {
        self.files.push((name.into(), data));
    }

    fn pfm(&mut self, name: &str, img: &Grid) {
        self.bytes(format!("{name}.pfm"), io::encode_pfm(img));
    }

    fn pgm(&mut self, name: &str, img: &Grid) {
        self.bytes(format!("{name}.pgm"), io::encode_pgm(img));
    }

    /// PGM preview of a zero-mean component.
    fn signed_pgm(&mut self, name: &str, img: &Grid) {
        self.pgm(name, &img.map(|x| x + PREVIEW_SHIFT));
    }

    fn mask(&mut self, name: &str, mask: &Mask) {
        let img = Grid::from_fn(mask.rows(), mask.cols(), |r, c| if mask.get(r, c) { 255.0 } else { 0.0 });
        self.pgm(name, &img);
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let data = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.bytes(name, data);
        Ok(())
    }

    fn metrics(&mut self, name: &str, rows: &[MetricsRow]) -> Result<(), CliError> {
        let data = io::encode_metrics_csv(rows)?;
        self.bytes(name, data);
        Ok(())
    }

    fn commit(self, dir: &Path) -> Result<(), CliError> {
        for (name, _) in &self.files {
            let rel = Path::new(name);
            if rel.is_absolute() || rel.components().any(|c| !matches!(c, Component::Normal(_))) {
                return Err(CliError::validation(format!("refusing to write {name:?} outside the output directory")));
            }
        }
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        for (name, data) in self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, data).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn require<'a>(what: &str, path: &'a Option<std::path::PathBuf>) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::validation(format!("{what} is required (set `{what} = PATH`)")))
}

fn read_input(cfg: &RunConfig) -> Result<Grid, CliError> {
    let path = require("input", &cfg.input)?;
    let img: Grid = io::read_image(path).map_err(|e| with_path(e, path))?;
    if !img.is_finite() {
        return Err(CliError::validation(format!("{} contains non-finite samples", path.display())));
    }
    Ok(img)
}

fn with_path(e: dg3pd_core::Error, path: &Path) -> CliError {
    match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn read_mask_for(path: &Path, img: &Grid) -> Result<Mask, CliError> {
    let mask = io::read_mask(path).map_err(|e| with_path(e, path))?;
    if mask.dims() != img.dims() {
        return Err(CliError::validation(format!(
            "{} is {}x{} but the input is {}x{}",
            path.display(),
            mask.rows(),
            mask.cols(),
            img.rows(),
            img.cols()
        )));
    }
    Ok(mask)
}

fn read_truth(path: &Path, img: &Grid) -> Result<Grid, CliError> {
    let truth: Grid = io::read_image(path).map_err(|e| with_path(e, path))?;
    if truth.dims() != img.dims() {
        return Err(CliError::validation(format!("{} does not match the input dimensions", path.display())));
    }
    Ok(truth)
}

fn decompose(f: &Grid, mask: Option<&Mask>, cfg: &RunConfig) -> Result<Decomposition64, CliError> {
    Ok(match mask {
        Some(m) => run(f, m, &cfg.solver)?,
        None => run_unmasked(f, &cfg.solver)?,
    })
}

fn stage_components(out: &mut Staged, d: &Decomposition64) -> Result<(), CliError> {
    out.pfm("u", &d.u);
    out.pfm("v", &d.v);
    out.pfm("eps", &d.eps);
    out.pgm("u", &d.u);
    out.signed_pgm("v", &d.v);
    out.signed_pgm("eps", &d.eps);
    let rows: Vec<MetricsRow> = d.trace.iter().map(MetricsRow::from).collect();
    out.metrics("metrics.csv", &rows)
}

pub fn decompose_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let f = read_input(cfg)?;
    let mask = cfg.mask.as_deref().map(|p| read_mask_for(p, &f)).transpose()?;
    let d = decompose(&f, mask.as_ref(), cfg)?;
    let mut out = Staged::default();
    stage_components(&mut out, &d)?;
    let pyramid = if cfg.trace { Some(msdt_forward(&d.e, &cfg.solver.frame)?) } else { None };
    out.commit(&cfg.output)?;
    if let Some(p) = pyramid {
        io::dump_pyramid(cfg.output.join("e_pyramid"), &p)?;
    }
    Ok(())
}

struct Restoration {
    decomposition: Decomposition64,
    texture: TextureRestoration<f64>,
    restored: Grid,
    preview: Grid,
}

fn restore(f: &Grid, missing: &Mask, cfg: &RunConfig) -> Result<Restoration, CliError> {
    let decomposition = decompose(f, Some(missing), cfg)?;
    let texture = restore_texture(&decomposition.v, missing, &cfg.texture)?;
    let synth = synthesize(&decomposition.u, &texture.texture)?;
    Ok(Restoration { decomposition, texture, restored: synth.image, preview: synth.preview })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn score_row(method: &str, s: &RegionalScores) -> Vec<String> {
    vec![
        method.to_string(),
        s.mse_full.to_string(),
        s.psnr_full.to_string(),
        opt(s.mse_missing),
        opt(s.psnr_missing),
        opt(s.mse_texture),
        opt(s.psnr_texture),
    ]
}

const SCORE_COLUMNS: [&str; 7] =
    ["method", "mse_full", "psnr_full", "mse_missing", "psnr_missing", "mse_texture", "psnr_texture"];

/// The texture region for scoring: the configured mask, else the segmented ROI.
fn texture_region(cfg: &RunConfig, f: &Grid) -> Result<Option<Mask>, CliError> {
    cfg.texture_mask.as_deref().map(|p| read_mask_for(p, f)).transpose()
}

pub fn inpaint_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let f = read_input(cfg)?;
    let missing = read_mask_for(require("mask", &cfg.mask)?, &f)?;
    let truth = cfg.truth.as_deref().map(|p| read_truth(p, &f)).transpose()?;
    let region = texture_region(cfg, &f)?;
    let r = restore(&f, &missing, cfg)?;

    let mut out = Staged::default();
    stage_components(&mut out, &r.decomposition)?;
    out.pfm("restored", &r.restored);
    out.pgm("restored", &r.preview);
    out.pfm("texture", &r.texture.texture);
    out.signed_pgm("texture", &r.texture.texture);
    out.mask("roi", &r.texture.roi.mask);
    out.mask("inpaint_mask", &r.texture.inpaint_mask);
    if cfg.trace {
        for (percent, snap) in &r.texture.inpainting.snapshots {
            out.signed_pgm(&format!("trace/texture_{percent:03}"), snap);
        }
        for (i, w) in r.texture.inpainting.warnings.iter().enumerate() {
            eprintln!("warning {i}: {w}");
        }
    }
    if let Some(truth) = &truth {
        let roi = region.as_ref().unwrap_or(&r.texture.roi.mask);
        let degraded = f.zip_map(&missing.known_weights(), |a, w| a * w);
        let rows = [
            score_row("degraded", &regional_scores(&degraded, truth, &missing, roi)?),
            score_row("restored", &regional_scores(&r.restored, truth, &missing, roi)?),
        ];
        out.csv("scores.csv", &SCORE_COLUMNS, &rows)?;
    }
    out.commit(&cfg.output)
}

fn tvl2_rows(t: &Tvl2Outcome<f64>) -> Vec<MetricsRow> {
    // No frame residual, thresholds or noise bound exist for TVL2.
    t.trace
        .iter()
        .map(|m| MetricsRow {
            iteration: m.iteration,
            unity_residual_l2: m.fidelity_l2,
            sup_coeff_e: f64::NAN,
            nu: f64::NAN,
            mu1: f64::NAN,
            mu2: f64::NAN,
            elapsed_ms: m.elapsed_ms,
        })
        .collect()
}

pub fn compare_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let f = read_input(cfg)?;
    let missing = read_mask_for(require("mask", &cfg.mask)?, &f)?;
    let truth = read_truth(require("truth", &cfg.truth)?, &f)?;
    let region = texture_region(cfg, &f)?;
    let mut external = Vec::with_capacity(cfg.external.len());
    for (name, path) in &cfg.external {
        external.push((name.as_str(), read_truth(path, &f)?));
    }

    let r = restore(&f, &missing, cfg)?;
    let tvl2 = tvl2_inpaint(&f, &missing, &cfg.tvl2)?;
    let roi = region.as_ref().unwrap_or(&r.texture.roi.mask);

    let mut rows = vec![
        score_row("dg3pd", &regional_scores(&r.restored, &truth, &missing, roi)?),
        score_row("tvl2", &regional_scores(&tvl2.u, &truth, &missing, roi)?),
    ];
    for (name, img) in &external {
        rows.push(score_row(name, &regional_scores(img, &truth, &missing, roi)?));
    }

    let mut out = Staged::default();
    out.csv("compare.csv", &SCORE_COLUMNS, &rows)?;
    out.pfm("dg3pd_restored", &r.restored);
    out.pgm("dg3pd_restored", &r.preview);
    out.pfm("tvl2_restored", &tvl2.u);
    out.pgm("tvl2_restored", &tvl2.u);
    let dg3pd_rows: Vec<MetricsRow> = r.decomposition.trace.iter().map(MetricsRow::from).collect();
    out.metrics("dg3pd_metrics.csv", &dg3pd_rows)?;
    out.metrics("tvl2_metrics.csv", &tvl2_rows(&tvl2))?;
    out.commit(&cfg.output)
}

/// `log(1 + |z|)` scaled to `[0, 255]`.
fn log_magnitude(s: &Spectrum) -> Grid {
    let (m, n) = s.dims();
    let mag: Vec<f64> = s.as_slice().iter().map(|z| z.norm().ln_1p()).collect();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    Grid::from_fn(m, n, |r, c| mag[r * n + c] * scale)
}

fn stage_spectrum(out: &mut Staged, name: &str, s: &Spectrum) {
    let (m, n) = s.dims();
    let re = Grid::from_fn(m, n, |r, c| s.get(r, c).re);
    let im = Grid::from_fn(m, n, |r, c| s.get(r, c).im);
    out.pfm(&format!("spectra/{name}_re"), &re);
    out.pfm(&format!("spectra/{name}_im"), &im);
    out.pgm(&format!("spectra/{name}_logmag"), &log_magnitude(s));
}

pub fn analyze_filters_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let f = cfg.input.as_ref().map(|_| read_input(cfg)).transpose()?;
    let mask = match (&f, cfg.mask.as_deref()) {
        (Some(f), Some(p)) => Some(read_mask_for(p, f)?),
        _ => None,
    };
    let (rows, cols) = f.as_ref().map(Grid::dims).unwrap_or((cfg.scene.rows, cfg.scene.cols));
    let bank = build_filter_bank(&cfg.solver, rows, cols)?;

    let mut out = Staged::default();
    stage_spectrum(&mut out, "u_phi", &bank.u.phi);
    for (l, (p, d)) in bank.u.psi.iter().zip(&bank.u.psi_dual).enumerate() {
        stage_spectrum(&mut out, &format!("u_psi{l}"), p);
        stage_spectrum(&mut out, &format!("u_psi_dual{l}"), d);
    }
    for a in 0..bank.g.directions {
        stage_spectrum(&mut out, &format!("g_xi{a}"), &bank.g.xi[a]);
        stage_spectrum(&mut out, &format!("g_psi{a}"), &bank.g.psi[a]);
        stage_spectrum(&mut out, &format!("g_psi_dual{a}"), &bank.g.psi_dual[a]);
    }

    let (u_defect, g_defect) = (bank.u.unity_defect(), bank.g.unity_defect());
    let unity_ok = u_defect <= UNITY_TOLERANCE && g_defect <= UNITY_TOLERANCE;
    let (u_riesz, _) = bank.u.riesz_lower();
    let g_riesz = bank.g.riesz_lower().iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let mut report: Vec<(&str, String)> = vec![
        ("rows", rows.to_string()),
        ("cols", cols.to_string()),
        ("tv_directions", bank.u.directions.to_string()),
        ("texture_directions", bank.g.directions.to_string()),
        ("beta1", bank.u.beta1.to_string()),
        ("beta2", bank.g.beta2.to_string()),
        ("beta3", bank.g.beta3.to_string()),
        ("beta4", bank.u.beta4.to_string()),
        ("u_unity_defect", u_defect.to_string()),
        ("g_unity_defect", g_defect.to_string()),
        ("unity", if unity_ok { "PASS" } else { "FAIL" }.to_string()),
        ("u_riesz_lower", u_riesz.to_string()),
        ("g_riesz_lower", g_riesz.to_string()),
        ("u_symmetry_defect", bank.u.symmetry_defect().to_string()),
        ("g_symmetry_defect", bank.g.symmetry_defect().to_string()),
    ];

    if let Some(f) = &f {
        let d = decompose(f, mask.as_ref(), cfg)?;
        let emp = empirical_filters(f, &d.u, &d.texture_parts, &d.eps)?;
        stage_spectrum(&mut out, "empirical_lp", &emp.lowpass);
        stage_spectrum(&mut out, "empirical_hp", &emp.highpass);
        for (s, bp) in emp.bandpass.iter().enumerate() {
            stage_spectrum(&mut out, &format!("empirical_bp{s}"), bp);
        }
        report.push(("empirical_masked_frequencies", emp.masked.to_string()));
        report.push(("empirical_unity_mse", emp.unity_mse.to_string()));
    }
    let rows: Vec<Vec<String>> = report.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect();
    out.csv("report.csv", &["quantity", "value"], &rows)?;
    out.commit(&cfg.output)
}

type Rows = Vec<Vec<String>>;

/// Histogram, QQ and summary tables.
fn density_rows(reports: &[DensityReport]) -> (Rows, Rows, Rows) {
    let mut hist = Vec::new();
    let mut qq = Vec::new();
    let mut summary = Vec::new();
    for r in reports {
        let h = &r.histogram;
        for (b, count) in h.counts.iter().enumerate() {
            hist.push(vec![r.name.clone(), b.to_string(), h.edges[b].to_string(), h.edges[b + 1].to_string(), count.to_string()]);
        }
        for (t, s) in &r.qq {
            qq.push(vec![r.name.clone(), t.to_string(), s.to_string()]);
        }
        summary.push(vec![
            r.name.clone(),
            r.samples.to_string(),
            r.mean.to_string(),
            r.variance.to_string(),
            r.excess_kurtosis.to_string(),
            r.qq_correlation.to_string(),
        ]);
    }
    (hist, qq, summary)
}

pub fn diagnostics_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let f = read_input(cfg)?;
    let mask = cfg.mask.as_deref().map(|p| read_mask_for(p, &f)).transpose()?;
    let d = decompose(&f, mask.as_ref(), cfg)?;
    let known = mask.as_ref().map(Mask::complement).unwrap_or_else(|| Mask::full(f.rows(), f.cols()));
    let grids = [("u", &d.u), ("v", &d.v), ("eps", &d.eps), ("e", &d.e), ("e1", &d.e1), ("e2", &d.e2)];
    let reports = density_diagnostics(&grids, &known)?;
    let (hist, qq, summary) = density_rows(&reports);

    let mut out = Staged::default();
    out.csv("histograms.csv", &["grid", "bin", "lower", "upper", "count"], &hist)?;
    out.csv("qq.csv", &["grid", "normal_quantile", "standardized_sample"], &qq)?;
    out.csv(
        "summary.csv",
        &["grid", "samples", "mean", "variance", "excess_kurtosis", "qq_correlation"],
        &summary,
    )?;
    out.pfm("e", &d.e);
    out.pfm("e1", &d.e1);
    out.pfm("e2", &d.e2);
    out.commit(&cfg.output)
}

pub fn make_scene_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.scene;
    let sc = make_challenge_scene(s.rows, s.cols, s.sigma, s.mask, cfg.seed)?;
    let degraded = sc.degraded();
    let mut out = Staged::default();
    out.pfm("clean", &sc.clean);
    out.pgm("clean", &sc.clean);
    out.pfm("noisy", &sc.noisy);
    out.pfm("degraded", &degraded);
    out.pgm("degraded", &degraded);
    out.pfm("texture", &sc.texture);
    out.mask("mask", &sc.missing);
    out.mask("texture_region", &sc.texture_region);
    out.bytes(
        "scene.cfg",
        format!(
            "# rows {} cols {} sigma {} seed {}\ninput = degraded.pfm\nmask = mask.pgm\ntruth = clean.pfm\n\
             texture_mask = texture_region.pgm\n",
            s.rows, s.cols, s.sigma, cfg.seed
        )
        .into_bytes(),
    );
    out.commit(&cfg.output)
}
