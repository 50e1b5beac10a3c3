//! `corona eval`: MIP images, CNR/CR report, intensity profiles and MSE curves.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use corona_core::io::{atomic_write, read_movie, write_pgm, write_real_array, JsonlWriter};
use corona_core::metrics::{
    intensity_profile, mip, mse_curve_solver, network_mse, to_db, Image, MetricReport, MsePoint, RoiBox,
};
use corona_core::net::load_weights;
use corona_core::solver::{SolverConfig, Variant};
use serde::{Deserialize, Serialize};

use super::{parse_named, prepare_out};
use crate::args::{Common, SolverArgs};
use crate::config;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPath {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiPair {
    pub name: String,
    pub signal: RoiBox,
    pub background: RoiBox,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sparse-component output of a method as NAME=PATH (repeatable).
    #[arg(long = "method", value_parser = parse_method)]
    pub methods: Vec<NamedPath>,
    /// Signal/background ROI pair as NAME=ROW,COL,H,W/ROW,COL,H,W (repeatable).
    #[arg(long = "roi", value_parser = parse_roi)]
    pub rois: Vec<RoiPair>,
    /// Lower clip of the dB images.
    #[arg(long, default_value_t = -60.0, allow_hyphen_values = true)]
    pub floor_db: f64,
    /// Row of the MIP whose intensity profile is written (repeatable).
    #[arg(long = "profile-row")]
    pub profile_rows: Vec<usize>,
    /// Ground-truth S; enables per-method MSE.
    #[arg(long)]
    pub truth_s: Option<PathBuf>,
    /// Ground-truth L; with --input and --truth-s enables the MSE curve.
    #[arg(long)]
    pub truth_l: Option<PathBuf>,
    /// Input movie D for the MSE curve.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Largest solver iteration on the MSE curve (0 disables it).
    #[arg(long, default_value_t = 0)]
    pub curve_max_k: usize,
    /// Solver weights for the MSE curve.
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Trained network added to the MSE curve at its depth (repeatable).
    #[arg(long = "curve-net")]
    pub curve_nets: Vec<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<NamedPath, String> {
    let (name, path) = parse_named(s)?;
    check_name(&name)?;
    Ok(NamedPath { name, path: path.into() })
}

fn check_name(name: &str) -> std::result::Result<(), String> {
    if name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        Ok(())
    } else {
        Err(format!("method name '{name}' may only use letters, digits, '_' and '-'"))
    }
}

fn parse_box(s: &str) -> std::result::Result<RoiBox, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad ROI field '{x}'")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [row, col, h, w] => Ok(RoiBox::new(row, col, h, w)),
        _ => Err("ROI needs ROW,COL,H,W".into()),
    }
}

fn parse_roi(s: &str) -> std::result::Result<RoiPair, String> {
    let (name, boxes) = parse_named(s)?;
    let (sig, bg) = boxes.split_once('/').ok_or("expected SIGNAL/BACKGROUND boxes")?;
    Ok(RoiPair {
        name,
        signal: parse_box(sig)?,
        background: parse_box(bg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRun {
    pub methods: Vec<NamedPath>,
    pub rois: Vec<RoiPair>,
    pub floor_db: f64,
    pub profile_rows: Vec<usize>,
    pub truth_s: Option<PathBuf>,
    pub truth_l: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub curve_max_k: usize,
    pub curve_solver: SolverConfig,
    pub curve_nets: Vec<PathBuf>,
}

impl EvalArgs {
    fn run_config(&self) -> EvalRun {
        EvalRun {
            methods: self.methods.clone(),
            rois: self.rois.clone(),
            floor_db: self.floor_db,
            profile_rows: self.profile_rows.clone(),
            truth_s: self.truth_s.clone(),
            truth_l: self.truth_l.clone(),
            input: self.input.clone(),
            curve_max_k: self.curve_max_k,
            curve_solver: self.solver.config(Variant::Fista),
            curve_nets: self.curve_nets.clone(),
        }
    }
}

fn write_image(path: &std::path::Path, img: &Image) -> Result<()> {
    write_real_array(path, &[img.height, img.width], &img.data)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let cfg: EvalRun = config::resolve(args.run_config(), args.common.config.as_deref())?;
    for m in &cfg.methods {
        check_name(&m.name).map_err(anyhow::Error::msg)?;
    }
    let mut seen = std::collections::BTreeSet::new();
    for m in &cfg.methods {
        if !seen.insert(&m.name) {
            bail!("method name '{}' given twice", m.name);
        }
    }
    if !(cfg.floor_db < 0.0) {
        bail!("floor_db must be negative, got {}", cfg.floor_db);
    }
    let out = &args.common.out;
    prepare_out(out)?;
    let truth_s = cfg.truth_s.as_deref().map(read_movie).transpose()?;

    let mut report = JsonlWriter::create(&out.join("report.jsonl"))?;
    let mut csv = String::from("method,roi_pair,cnr_db,cr_db\n");
    let mut mse_csv = String::from("method,mse_s\n");
    let mut profiles = String::from("method,row,col,db\n");
    for m in &cfg.methods {
        let s = read_movie(&m.path).with_context(|| format!("method {}", m.name))?;
        let img = mip(&s);
        let db = to_db(&img, cfg.floor_db)?;
        write_image(&out.join(format!("{}_mip.npy", m.name)), &img)?;
        write_image(&out.join(format!("{}_mip_db.npy", m.name)), &db)?;
        write_pgm(&db, cfg.floor_db, 0.0, &out.join(format!("{}_mip_db.pgm", m.name)))?;

        for pair in &cfg.rois {
            pair.signal
                .check(&img)
                .and_then(|_| pair.background.check(&img))
                .with_context(|| format!("ROI pair '{}'", pair.name))?;
            let r = MetricReport::compute(&m.name, &pair.name, &img, &pair.signal, &pair.background)?;
            println!(
                "method={} roi_pair={} cnr_db={} cr_db={}",
                r.method,
                r.roi_pair,
                fmt_opt(r.cnr_db),
                fmt_opt(r.cr_db)
            );
            writeln!(csv, "{},{},{},{}", r.method, r.roi_pair, fmt_opt(r.cnr_db), fmt_opt(r.cr_db))?;
            report.write(&r)?;
        }
        for &row in &cfg.profile_rows {
            for (col, v) in intensity_profile(&img, row)?.iter().enumerate() {
                writeln!(profiles, "{},{row},{col},{v}", m.name)?;
            }
        }
        if let Some(t) = &truth_s {
            s.same_shape(t)?;
            let mse = (&s - t).norm_sq() / t.data().len() as f64;
            println!("method={} mse_s={mse}", m.name);
            writeln!(mse_csv, "{},{mse}", m.name)?;
        }
    }
    atomic_write(&out.join("report.csv"), csv.as_bytes())?;
    if truth_s.is_some() {
        atomic_write(&out.join("mse.csv"), mse_csv.as_bytes())?;
    }
    if !cfg.profile_rows.is_empty() {
        atomic_write(&out.join("profiles.csv"), profiles.as_bytes())?;
    }

    let wants_curve = cfg.curve_max_k > 0 || !cfg.curve_nets.is_empty();
    if wants_curve {
        let (Some(d), Some(l), Some(s)) = (&cfg.input, &cfg.truth_l, &truth_s) else {
            bail!("the MSE curve needs --input, --truth-l and --truth-s");
        };
        let d = read_movie(d)?;
        let l = read_movie(l)?;
        let mut rows = String::from("source,k,mse_s,mse_l,mse_avg\n");
        let mut add = |source: &str, p: &MsePoint| writeln!(rows, "{source},{},{},{},{}", p.k, p.mse_s, p.mse_l, p.mse_avg);
        if cfg.curve_max_k > 0 {
            let label = format!("{:?}", cfg.curve_solver.variant).to_lowercase();
            for p in mse_curve_solver(&d, &l, s, &cfg.curve_solver, cfg.curve_max_k)? {
                add(&label, &p)?;
            }
        }
        let data = [(d.clone(), l.clone(), s.clone())];
        for path in &cfg.curve_nets {
            let net = load_weights(path)?;
            add("corona", &network_mse(&net, net.depth(), &data)?)?;
        }
        atomic_write(&out.join("mse_curve.csv"), rows.as_bytes())?;
    }
    config::echo(out, &cfg)?;
    Ok(())
}
