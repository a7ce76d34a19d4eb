//! Command dispatch for the `openbook` binary: `validate`, `spectrum`,
//! `convergence` and `export`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::bookfile::{parse_book_file, AngularSetting, BookFileError, SolverSettings};
use crate::complex::OpenBookComplex;
use crate::conditions::report;
use crate::discretize::{
    build_full_system, build_mode_system, eliminate_traces, DiscreteSystem, DiscretizeError, Layout, ReducedSystem,
};
use crate::eigensolve::{lowest_eigenpairs_with, merge, EigenError, EigenOptions, SpectrumResult};
use crate::linalg::CMatrix;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Book { path: String, source: BookFileError },
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "openbook", version, about = "Spectra of Laplacians on open books glued by junction conditions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the book and report every binding's condition calculus.
    Validate {
        book: PathBuf,
    },
    /// Compute and tabulate the lowest eigenvalues.
    Spectrum {
        book: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Write the assembled and reduced matrices (coordinate format) into this directory.
        #[arg(long, value_name = "PATH")]
        dump_matrices: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Solve on a geometric sequence of grids and report observed orders.
    Convergence {
        book: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Number of grids; each halves the step of the previous one.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Write eigenfunction samples for external plotting.
    Export {
        book: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, value_name = "PATH")]
        csv: PathBuf,
    },
}

/// Overrides for the book's `[solver]` section.
#[derive(Debug, Args, Default, Clone)]
pub struct SolverFlags {
    /// Mode range `m0..m1`, inclusive.
    #[arg(long, value_name = "M0..M1", allow_hyphen_values = true, value_parser = parse_modes)]
    pub modes: Option<(i64, i64)>,
    #[arg(long)]
    pub full2d: bool,
    /// Full 2-D grid, `NSxNT`.
    #[arg(long, value_name = "NSxNT", value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cluster_tol: Option<f64>,
}

fn parse_modes(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected M0..M1, got `{s}`"))?;
    let a: i64 = a.trim().parse().map_err(|e| format!("bad mode `{a}`: {e}"))?;
    let b: i64 = b.trim().parse().map_err(|e| format!("bad mode `{b}`: {e}"))?;
    if a > b {
        return Err(format!("empty mode range {a}..{b}"));
    }
    Ok((a, b))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NSxNT, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad grid size `{v}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

impl SolverFlags {
    pub fn apply(&self, s: &mut SolverSettings) {
        if let Some(n) = self.nodes {
            s.nodes = n;
        }
        if let Some((first, last)) = self.modes {
            s.angular = AngularSetting::Modes { first, last };
        }
        if self.full2d || self.grid.is_some() {
            let (n_s, n_t) = self.grid.unwrap_or(match s.angular {
                AngularSetting::Full2D { n_s, n_t } => (n_s, n_t),
                AngularSetting::Modes { .. } => (s.nodes, 64),
            });
            s.angular = AngularSetting::Full2D { n_s, n_t };
        }
        if let Some(v) = self.count {
            s.count = v;
        }
        if let Some(v) = self.tol {
            s.tol = v;
        }
        if let Some(v) = self.shift {
            s.shift = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.cluster_tol {
            s.cluster_tol = v;
        }
    }
}

pub fn load_book(path: &Path) -> Result<(OpenBookComplex, SolverSettings), CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_book_file(&text).map_err(|source| CliError::Book {
        path: path.display().to_string(),
        source,
    })
}

/// Assembled and reduced systems behind one spectrum computation.
pub struct Computation {
    pub systems: Vec<(DiscreteSystem, ReducedSystem)>,
    pub spectrum: SpectrumResult,
}

pub fn eigen_options(settings: &SolverSettings) -> EigenOptions {
    EigenOptions {
        count: settings.count,
        tol: settings.tol,
        shift: settings.shift,
        seed: settings.seed,
        cluster_tol: settings.cluster_tol,
    }
}

/// Mode list actually solved: interval-only books have no angular variable.
pub fn effective_modes(book: &OpenBookComplex, first: i64, last: i64) -> Vec<i64> {
    if book.pages.iter().all(|p| p.is_interval()) {
        vec![0]
    } else {
        (first..=last).collect()
    }
}

/// Builds, reduces and solves the book as the settings describe.
pub fn compute_spectrum(book: &OpenBookComplex, settings: &SolverSettings) -> Result<Computation, CliError> {
    let opts = eigen_options(settings);
    match settings.angular {
        AngularSetting::Modes { first, last } => {
            let modes = effective_modes(book, first, last);
            let systems: Vec<(DiscreteSystem, ReducedSystem)> = modes
                .par_iter()
                .map(|&m| {
                    let sys = build_mode_system(book, m, settings.nodes)?;
                    let red = eliminate_traces(&sys)?;
                    Ok((sys, red))
                })
                .collect::<Result<_, DiscretizeError>>()?;
            let parts: Vec<SpectrumResult> = systems
                .par_iter()
                .map(|(_, red)| lowest_eigenpairs_with(red, &opts))
                .collect::<Result<_, _>>()?;
            let spectrum = merge(parts, settings.count, settings.cluster_tol);
            Ok(Computation { systems, spectrum })
        }
        AngularSetting::Full2D { n_s, n_t } => {
            let sys = build_full_system(book, (n_s, n_t))?;
            let red = eliminate_traces(&sys)?;
            let spectrum = lowest_eigenpairs_with(&red, &opts)?;
            Ok(Computation {
                systems: vec![(sys, red)],
                spectrum,
            })
        }
    }
}

fn fmt_real(x: f64) -> String {
    let r = if x.abs() < 1e-12 { 0.0 } else { x };
    let s = format!("{:.10}", r);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn fmt_complex(z: Complex64) -> String {
    if z.im.abs() < 1e-12 {
        fmt_real(z.re)
    } else if z.re.abs() < 1e-12 {
        format!("{}i", fmt_real(z.im))
    } else {
        let sign = if z.im < 0.0 { '-' } else { '+' };
        format!("{}{sign}{}i", fmt_real(z.re), fmt_real(z.im.abs()))
    }
}

pub fn fmt_matrix(m: &CMatrix) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cols: Vec<String> = (0..m.ncols()).map(|j| fmt_complex(m[(i, j)])).collect();
            format!("[{}]", cols.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Text report for `validate`, plus one error line per failing binding.
pub fn validation_text(book: &OpenBookComplex) -> (String, Vec<String>) {
    let mut text = String::new();
    let mut errors = Vec::new();
    let _ = writeln!(
        text,
        "complex: {} pages, {} bindings, well formed",
        book.pages.len(),
        book.bindings.len()
    );
    for b in &book.bindings {
        let pair = &book.conditions[&b.id];
        let r = report(pair);
        let _ = writeln!(text, "binding {} (k = {}):", b.id, r.k);
        if pair.samples().len() > 1 {
            let _ = writeln!(
                text,
                "  samples: {} (max sample-to-sample variation {:.3e})",
                pair.samples().len(),
                r.sample_variation.unwrap_or(0.0)
            );
        }
        let _ = writeln!(text, "  rank: {} of {}", r.rank, r.k);
        match (r.ellipticity.elliptic, r.ellipticity.violating) {
            (true, _) => {
                let _ = writeln!(text, "  elliptic: true");
            }
            (false, Some(l)) => {
                let _ = writeln!(text, "  elliptic: false (violated at λ = {})", fmt_real(l));
                errors.push(format!("binding {}: ellipticity violated at λ = {}", b.id, fmt_real(l)));
            }
            (false, None) => {
                let _ = writeln!(text, "  elliptic: false (pencil identically singular)");
                errors.push(format!("binding {}: ellipticity violated (identically singular pencil)", b.id));
            }
        }
        if r.rank < r.k {
            errors.push(format!("binding {}: rank {} below the maximal rank {}", b.id, r.rank, r.k));
        }
        let _ = writeln!(
            text,
            "  self-adjoint defect: {} ({})",
            if r.selfadjoint_defect == 0.0 {
                "0".to_string()
            } else {
                format!("{:.3e}", r.selfadjoint_defect)
            },
            if r.selfadjoint { "self-adjoint" } else { "not self-adjoint" }
        );
        match &r.canonical {
            Some(us) => {
                let _ = writeln!(text, "  U = {}", fmt_matrix(&us[0].u));
                if us.len() > 1 {
                    let _ = writeln!(text, "  (U shown for node 0 of {})", us.len());
                }
            }
            None => {
                let _ = writeln!(text, "  U: undefined");
            }
        }
    }
    (text, errors)
}

pub const SPECTRUM_CSV_HEADER: &str = "index,re,im,residual,cluster,multiplicity,mode,symmetry_defect,low_mode_defect";

pub fn spectrum_csv(s: &SpectrumResult) -> String {
    let mut out = String::from(SPECTRUM_CSV_HEADER);
    out.push('\n');
    for (ci, c) in s.clusters.iter().enumerate() {
        for i in c.start..c.start + c.len {
            let z = s.eigenvalues[i];
            let mode = s.modes[i].map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{i},{:.16e},{:.16e},{:.16e},{ci},{},{mode},{:.16e},{:.16e}",
                z.re, z.im, s.residuals[i], c.len, s.symmetry_defect, s.low_mode_defect
            );
        }
    }
    out
}

fn spectrum_table(s: &SpectrumResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "symmetry defect: {:.3e}", s.symmetry_defect);
    let _ = writeln!(out, "low-mode defect: {:.3e}", s.low_mode_defect);
    if !s.converged {
        let _ = writeln!(out, "warning: iteration cap reached; {} certified pairs", s.len());
    }
    let _ = writeln!(
        out,
        "{:>5}  {:>22}  {:>10}  {:>10}  {:>7}  {:>5}",
        "#", "eigenvalue", "imag", "residual", "cluster", "mode"
    );
    for (ci, c) in s.clusters.iter().enumerate() {
        for i in c.start..c.start + c.len {
            let z = s.eigenvalues[i];
            let mode = s.modes[i].map(|m| m.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{i:>5}  {:>22.14}  {:>10.2e}  {:>10.2e}  {:>4}x{:<2}  {mode:>5}",
                z.re, z.im, s.residuals[i], ci, c.len
            );
        }
    }
    out
}

fn dump_matrices(dir: &Path, comp: &Computation) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (sys, red) in &comp.systems {
        let tag = sys.layout.to_string().replace(['(', ')', '='], "");
        let write = |name: String, f: &dyn Fn(&mut dyn Write) -> io::Result<()>| -> Result<(), CliError> {
            let path = dir.join(name);
            let mut file = io::BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
            f(&mut file).map_err(io_err(&path))
        };
        write(format!("stiffness-{tag}.coo"), &|w| sys.stiffness.write_coordinates(w))?;
        write(format!("mass-{tag}.coo"), &|w| write_diagonal(w, &sys.mass))?;
        write(format!("reduced-stiffness-{tag}.coo"), &|w| red.stiffness.write_coordinates(w))?;
        write(format!("reduced-mass-{tag}.coo"), &|w| write_diagonal(w, &red.mass))?;
    }
    Ok(())
}

fn write_diagonal(w: &mut dyn Write, d: &[f64]) -> io::Result<()> {
    let nnz = d.iter().filter(|&&x| x != 0.0).count();
    writeln!(w, "% {} {} {}", d.len(), d.len(), nnz)?;
    for (i, &x) in d.iter().enumerate() {
        if x != 0.0 {
            writeln!(w, "{i} {i} {x:.16e} {:.16e}", 0.0)?;
        }
    }
    Ok(())
}

pub const EXPORT_CSV_HEADER: &str = "index,mode,page,s,t,re,im";

/// Eigenfunction samples at every grid node, traces included. Mode-reduced
/// runs are sampled at `t = 0`, where `u = v(s)`.
pub fn export_csv(comp: &Computation) -> String {
    let mut out = String::from(EXPORT_CSV_HEADER);
    out.push('\n');
    let s = &comp.spectrum;
    for i in 0..s.len() {
        let Some(x) = s.vectors.get(i) else { break };
        let red = match s.modes[i] {
            Some(m) => comp
                .systems
                .iter()
                .map(|(_, r)| r)
                .find(|r| r.layout == Layout::Mode(m)),
            None => comp.systems.first().map(|(_, r)| r),
        };
        let Some(red) = red else { continue };
        let full = red.expand(x);
        let mut rows: Vec<(usize, f64, f64, Complex64)> = red
            .unknowns
            .iter()
            .zip(&full)
            .map(|(u, &v)| (u.page, u.s, u.t, v))
            .collect();
        rows.sort_by(|a, b| (a.0, a.1, a.2).partial_cmp(&(b.0, b.1, b.2)).unwrap());
        let mode = s.modes[i].map(|m| m.to_string()).unwrap_or_default();
        for (page, sv, t, v) in rows {
            let _ = writeln!(
                out,
                "{i},{mode},{},{sv:.16e},{t:.16e},{:.16e},{:.16e}",
                red.page_ids[page], v.re, v.im
            );
        }
    }
    out
}

fn refine(settings: &SolverSettings, level: usize) -> SolverSettings {
    let f = 1usize << level;
    let mut s = settings.clone();
    s.nodes = settings.nodes * f;
    if let AngularSetting::Full2D { n_s, n_t } = settings.angular {
        s.angular = AngularSetting::Full2D { n_s: n_s * f, n_t: n_t * f };
    }
    s
}

/// Real parts ordered so that the same index refers to the same eigenfunction
/// across refinement levels: within each multiplicity cluster, pairs are
/// ordered by angular mode rather than by value, since the value order
/// inside a degenerate cluster changes from grid to grid.
pub fn aligned_real_parts(spectrum: &SpectrumResult) -> Vec<f64> {
    let mut out = Vec::with_capacity(spectrum.len());
    for c in &spectrum.clusters {
        let mut idx: Vec<usize> = (c.start..c.start + c.len).collect();
        idx.sort_by_key(|&i| spectrum.modes[i].map(|m| (m.abs(), m)));
        out.extend(idx.into_iter().map(|i| spectrum.eigenvalues[i].re));
    }
    out
}

/// Observed orders `log2(|λ_h − λ_{h/2}| / |λ_{h/2} − λ_{h/4}|)` per eigenvalue index.
pub fn observed_orders(levels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    levels
        .windows(3)
        .map(|w| {
            let n = w.iter().map(Vec::len).min().unwrap_or(0);
            (0..n)
                .map(|i| ((w[0][i] - w[1][i]).abs() / (w[1][i] - w[2][i]).abs()).log2())
                .collect()
        })
        .collect()
}

fn convergence_text(settings: &SolverSettings, levels: &[Vec<f64>]) -> (String, String) {
    let mut text = String::new();
    let mut csv = String::from("level,nodes,index,eigenvalue,observed_order\n");
    let orders = observed_orders(levels);
    for (l, vals) in levels.iter().enumerate() {
        let s = refine(settings, l);
        let res = match s.angular {
            AngularSetting::Modes { .. } => format!("{} nodes/page", s.nodes),
            AngularSetting::Full2D { n_s, n_t } => format!("grid {n_s}x{n_t}"),
        };
        let _ = writeln!(text, "level {l}: {res}");
        for (i, v) in vals.iter().enumerate() {
            let order = if l >= 2 { orders[l - 2].get(i).copied() } else { None };
            let o = order.map(|o| format!("{o:.3}")).unwrap_or_default();
            let _ = writeln!(text, "  {i:>3}  {v:>22.14}  {o}");
            let _ = writeln!(csv, "{l},{},{i},{v:.16e},{}", s.nodes, order.map(|o| format!("{o:.16e}")).unwrap_or_default());
        }
    }
    (text, csv)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<Vec<String>, CliError> {
    let mut soft_errors = Vec::new();
    let w = |out: &mut dyn Write, s: &str| {
        let _ = out.write_all(s.as_bytes());
    };
    match cli.command {
        Command::Validate { book } => {
            let (b, _) = load_book(&book)?;
            let (text, errors) = validation_text(&b);
            w(out, &text);
            soft_errors = errors;
        }
        Command::Spectrum {
            book,
            solver,
            dump_matrices: dump,
            csv,
        } => {
            let (b, mut settings) = load_book(&book)?;
            solver.apply(&mut settings);
            let comp = compute_spectrum(&b, &settings)?;
            if let Some(dir) = dump {
                dump_matrices(&dir, &comp)?;
            }
            w(out, &spectrum_table(&comp.spectrum));
            if let Some(path) = csv {
                write_file(&path, &spectrum_csv(&comp.spectrum))?;
            }
            if !comp.spectrum.converged {
                soft_errors.push(format!(
                    "solver did not converge: {} of {} pairs certified",
                    comp.spectrum.len(),
                    settings.count
                ));
            }
        }
        Command::Convergence {
            book,
            solver,
            levels,
            csv,
        } => {
            if levels < 3 {
                return Err(CliError::Usage("convergence needs at least 3 levels".into()));
            }
            let (b, mut settings) = load_book(&book)?;
            solver.apply(&mut settings);
            let mut values = Vec::new();
            for l in 0..levels {
                let comp = compute_spectrum(&b, &refine(&settings, l))?;
                values.push(aligned_real_parts(&comp.spectrum));
            }
            let (text, table) = convergence_text(&settings, &values);
            w(out, &text);
            if let Some(path) = csv {
                write_file(&path, &table)?;
            }
        }
        Command::Export { book, solver, csv } => {
            let (b, mut settings) = load_book(&book)?;
            solver.apply(&mut settings);
            let comp = compute_spectrum(&b, &settings)?;
            write_file(&csv, &export_csv(&comp))?;
            w(out, &format!("wrote {} eigenfunctions to {}\n", comp.spectrum.len(), csv.display()));
        }
    }
    Ok(soft_errors)
}

/// Runs one command line; returns the process exit status. Diagnostics go
/// to `err` as lines starting with `error:`.
pub fn run_command<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "error: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match execute(cli, out) {
        Ok(errors) if errors.is_empty() => 0,
        Ok(errors) => {
            for e in errors {
                let _ = writeln!(err, "error: {e}");
            }
            1
        }
        Err(CliError::Book { path, source }) => {
            for d in source.diagnostics {
                let _ = writeln!(err, "error: {path}:{}:{}: {}", d.line, d.column, d.message);
            }
            1
        }
        Err(e @ CliError::Usage(_)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
