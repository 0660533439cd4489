mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use wirecm::bundle::{bundle_to_bytes, load_bundle};
use wirecm::experiment::{Check, LengthResult, Reference};
use wirecm::export::{
    complex_matrix_csv, convergence_csv, eigenvalues_csv, length_field_csv, real_matrix_csv, verification_csv,
};
use wirecm::{
    assemble_z, characteristic_modes, cross_radiation, incident_projection, perturbation_in_foreign_basis,
    transform_matrix, transform_scattering, Error, ScatteringMatrix,
};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "wirecm",
    version,
    about = "Characteristic modes of wire dipoles described in a reference basis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rows and columns kept in matrix CSVs.
    #[arg(long)]
    modes: Option<usize>,
    /// Worker threads for the sweep; 0 is rejected.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic modes of the reference dipole: bundle and eigenvalue table.
    Modes(Common),
    /// Every configured length: P, Q, fields at the observation points, convergence.
    Sweep(Common),
    /// Compares reconstruction, P' approximation and direct solution for one length.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Length in wavelengths.
        #[arg(long)]
        length: f64,
        /// Modal bundle of the reference written by `modes`; recomputed when absent.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Intermediate matrices of the basis change for one length.
    Xform {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        length: f64,
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Numerical(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let numerical = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<Error>(),
                Some(
                    Error::SingularKernel
                        | Error::IllConditioned { .. }
                        | Error::IndefiniteRadiationMatrix { .. }
                        | Error::Degenerate(_)
                        | Error::CheckFailed(_)
                )
            )
        });
        if numerical {
            Failure::Numerical(format!("{e:#}"))
        } else {
            Failure::Validation(e)
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

/// Files are rendered in memory first and written only once everything succeeded.
struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            files: BTreeMap::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    fn write(&self) -> anyhow::Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            let tmp = self.dir.join(format!(".{name}.partial"));
            fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
            fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

struct Setup {
    cfg: ExperimentConfig,
    out: PathBuf,
    modes: usize,
}

fn setup(c: &Common) -> Result<Setup, Failure> {
    let cfg = ExperimentConfig::load(&c.config)?;
    if let Some(k) = c.threads {
        if k == 0 {
            return Err(Failure::Validation(anyhow::anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("starting worker pool")?;
    }
    let modes = c.modes.unwrap_or(cfg.modes);
    if modes == 0 {
        return Err(Failure::Validation(anyhow::anyhow!("--modes must be at least 1")));
    }
    let out = c.out.clone().unwrap_or_else(|| cfg.output.clone());
    Ok(Setup { cfg, out, modes })
}

fn reference(cfg: &ExperimentConfig, bundle: Option<&Path>) -> Result<Reference<f64>, Failure> {
    let r = Reference::build(cfg.study()?)?;
    match bundle {
        Some(p) => {
            let basis = load_bundle(p).with_context(|| format!("loading {}", p.display()))?;
            Ok(r.with_basis(basis)
                .context("bundle does not match the configured reference")?)
        }
        None => Ok(r),
    }
}

fn length_tag(l: f64) -> String {
    format!("{l:.3}")
}

fn report(failed: &[(Option<f64>, &Check)]) -> Result<(), Failure> {
    if failed.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = failed
        .iter()
        .map(|(l, c)| {
            let at = l.map(|l| format!(" at l = {}", length_tag(l))).unwrap_or_default();
            format!("{}{at}: {:e} (limit {:e})", c.name, c.value, c.limit)
        })
        .collect();
    Err(Failure::Numerical(format!("failed checks:\n  {}", lines.join("\n  "))))
}

fn cmd_modes(c: &Common) -> Result<(), Failure> {
    let s = setup(c)?;
    let r = reference(&s.cfg, None)?;
    let checks = r.checks();
    let mut out = Outputs::new(s.out);
    out.add("modes.bundle", bundle_to_bytes(&r.basis));
    out.add("eigenvalues.csv", eigenvalues_csv(&r.basis));
    let rows: Vec<_> = checks.iter().map(|c| (None, c)).collect();
    out.add("verification.csv", verification_csv(&rows));
    out.write()?;
    println!(
        "{} modes of {} unknowns written to {}",
        r.basis.mode_count(),
        r.basis.dim(),
        out.dir.display()
    );
    report(&rows.into_iter().filter(|(_, c)| !c.passed()).collect::<Vec<_>>())
}

fn matrices(out: &mut Outputs, res: &LengthResult<f64>, tag: &str, n: usize) {
    let n = n.min(res.perturbation.dim());
    let p = res.perturbation.entries.view((0, 0), (n, n)).into_owned();
    out.add(format!("P_{tag}.csv"), complex_matrix_csv(&p, "1"));
    let q = &res.transform.entries;
    let q = q.view((0, 0), (n, n.min(q.ncols()))).into_owned();
    out.add(format!("Q_{tag}.csv"), real_matrix_csv(&q, "1"));
}

fn cmd_sweep(c: &Common) -> Result<(), Failure> {
    let s = setup(c)?;
    let w = s.cfg.wavelength;
    let lengths: Vec<f64> = s.cfg.sweep_lengths()?.iter().map(|l| l * w).collect();
    let r = reference(&s.cfg, None)?;
    let results = r.sweep(&lengths)?;

    let mut out = Outputs::new(s.out);
    let ref_checks = r.checks();
    let mut rows: Vec<(Option<f64>, &Check)> = ref_checks.iter().map(|c| (None, c)).collect();
    let mut summary = String::from(
        "length[lambda0],length[m],segments,modes_b,offdiag_ratio[1],reconstruction_error[1],p_prime_error[1]\n",
    );
    for res in &results {
        let l = res.length / w;
        let tag = length_tag(l);
        matrices(&mut out, res, &tag, s.modes);
        out.add(format!("field_{tag}.csv"), length_field_csv(res));
        rows.extend(res.checks.iter().map(|c| (Some(l), c)));
        let p0 = &res.points[0];
        summary.push_str(&format!(
            "{l:e},{:e},{},{},{:e},{:e},{:e}\n",
            res.length,
            res.mesh.segments().len(),
            res.basis.mode_count(),
            res.perturbation.off_diagonal_ratio(),
            p0.reconstruction_error(),
            p0.naive_error()
        ));
    }
    out.add("convergence.csv", convergence_csv(&results, w));
    out.add("summary.csv", summary);
    out.add("verification.csv", verification_csv(&rows));
    out.write()?;
    println!("{} lengths written to {}", results.len(), out.dir.display());
    report(&rows.into_iter().filter(|(_, c)| !c.passed()).collect::<Vec<_>>())
}

fn cmd_reconstruct(c: &Common, length: f64, bundle: Option<&Path>) -> Result<(), Failure> {
    let s = setup(c)?;
    let w = s.cfg.wavelength;
    let r = reference(&s.cfg, bundle)?;
    let res = r.run_length(length * w)?;
    let tag = length_tag(res.length / w);
    let mut out = Outputs::new(s.out);
    out.add(format!("reconstruct_{tag}.csv"), length_field_csv(&res));
    out.write()?;
    for (i, p) in res.points.iter().enumerate() {
        println!(
            "point {i}: reconstruction error {:e}, P' error {:e}",
            p.reconstruction_error(),
            p.naive_error()
        );
    }
    let failed: Vec<_> = res.failed_checks().map(|c| (Some(res.length / w), c)).collect();
    report(&failed)
}

fn cmd_xform(c: &Common, length: f64, bundle: Option<&Path>) -> Result<(), Failure> {
    let s = setup(c)?;
    let w = s.cfg.wavelength;
    let r = reference(&s.cfg, bundle)?;
    let st = &r.study;
    let (count, first) = st.snap(length * w)?;
    let mesh_b = r.mesh.submesh(first, count)?;
    let z_b = assemble_z(&mesh_b, r.k, &st.quadrature)?;
    let basis_b = characteristic_modes(&z_b, st.rank_tolerance)?;
    let r_ab = cross_radiation(&r.mesh, &mesh_b, r.k, &st.quadrature)?;
    let u = incident_projection(&r.basis, &r_ab)?;
    let p = perturbation_in_foreign_basis(&u, &z_b)?;
    let q = transform_matrix(&r.basis, &r_ab, &basis_b)?;
    let s_b = ScatteringMatrix::from_perturbation(&wirecm::PerturbationMatrix::own_basis(&basis_b));
    let s_a = transform_scattering(&q, &s_b)?;

    let tag = length_tag(st.segment_length() * count as f64 / w);
    let n = s.modes.min(r.basis.mode_count());
    let nb = s.modes.min(basis_b.mode_count());
    let mut out = Outputs::new(s.out);
    out.add(
        format!("cross_radiation_{tag}.csv"),
        real_matrix_csv(&r_ab.entries, "ohm"),
    );
    out.add(
        format!("projection_{tag}.csv"),
        real_matrix_csv(&u.entries.rows(0, n).into_owned(), "ohm"),
    );
    out.add(
        format!("transform_{tag}.csv"),
        real_matrix_csv(&q.entries.view((0, 0), (n, nb)).into_owned(), "1"),
    );
    out.add(
        format!("perturbation_{tag}.csv"),
        complex_matrix_csv(&p.entries.view((0, 0), (n, n)).into_owned(), "1"),
    );
    out.add(
        format!("scattering_{tag}.csv"),
        complex_matrix_csv(&s_a.entries.view((0, 0), (n, n)).into_owned(), "1"),
    );
    out.add(format!("eigenvalues_b_{tag}.csv"), eigenvalues_csv(&basis_b));
    out.write()?;
    println!(
        "basis of {} modes, structure of {} modes; written to {}",
        r.basis.mode_count(),
        basis_b.mode_count(),
        out.dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Modes(c) => cmd_modes(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Reconstruct { common, length, bundle } => cmd_reconstruct(common, *length, bundle.as_deref()),
        Command::Xform { common, length, bundle } => cmd_xform(common, *length, bundle.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical check failed: {msg}");
            ExitCode::from(2)
        }
    }
}
