use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use curveflow::config::load_config;
use curveflow::eoc::{eoc_harness, EocSettings, DEFAULT_MESHES};
use curveflow::forces::linking_number;
use curveflow::geometry::Curve;
use curveflow::integrator::{ErrorNorm, ErrorScale};
use curveflow::output::{parse_obj_vertices, parse_snapshot};
use curveflow::reduced_ode::{
    hopf_rhs, integrate_reduced, jacobian_trace_det, reduced_integrator_config, steady_state,
    HopfParams, ReducedState,
};
use curveflow::scenario::run_scenario;

#[derive(Parser)]
#[command(
    name = "curveflow",
    version,
    about = "Evolving closed space curves carrying a scalar quantity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config or a previous run's manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the one in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence study against the manufactured solution.
    Eoc {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MESHES)]
        meshes: Vec<usize>,
        #[arg(long, default_value_t = EocSettings::default().t_final)]
        t_final: f64,
        #[arg(long, default_value_t = EocSettings::default().tol)]
        tol: f64,
        /// Time between error samples.
        #[arg(long, default_value_t = EocSettings::default().snapshot_spacing)]
        spacing: f64,
        #[arg(long)]
        rms: bool,
        /// Bound the error of each step instead of the error per unit time.
        #[arg(long)]
        per_step: bool,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Integrate the reduced (r, a) system.
    Hopf {
        #[arg(long)]
        lambda: f64,
        /// Initial radius; defaults to the steady radius + 0.1.
        #[arg(long)]
        r0: Option<f64>,
        /// Initial amplitude; defaults to the steady amplitude.
        #[arg(long)]
        a0: Option<f64>,
        #[arg(long, default_value_t = 200.0)]
        t_final: f64,
        /// Sampling interval of the trajectory.
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value = "hopf_out")]
        out: PathBuf,
    },
    /// Gauss linking number of two curves given as snapshot CSV or OBJ files.
    Linking {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(4, format!("{}: {e}", path.display()))
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, out } => run(&config, out.as_deref()),
        Command::Eoc {
            meshes,
            t_final,
            tol,
            spacing,
            rms,
            per_step,
            csv,
        } => {
            let settings = EocSettings {
                t_final,
                snapshot_spacing: spacing,
                tol,
                norm: if rms { ErrorNorm::Rms } else { ErrorNorm::Max },
                error_scale: if per_step {
                    ErrorScale::Step
                } else {
                    ErrorScale::UnitTime
                },
            };
            eoc(&meshes, &settings, csv.as_deref())
        }
        Command::Hopf {
            lambda,
            r0,
            a0,
            t_final,
            dt,
            tol,
            out,
        } => hopf(lambda, r0, a0, t_final, dt, tol, &out),
        Command::Linking { a, b } => linking(&a, &b),
    }
}

fn run(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let resolved = load_config(config).map_err(|e| Failure::new(2, e.to_string()))?;
    for d in &resolved.defaults {
        eprintln!("default {} = {}", d.key, d.value);
    }
    let report = run_scenario(&resolved, out)
        .map_err(|e| Failure::new(e.exit_code() as u8, e.to_string()))?;
    let last = report.series.last().expect("initial row");
    println!(
        "{}: t = {} in {} steps ({} rejected), length {:.6}, mass {:.6}; output in {}",
        resolved.config.scenario,
        last.t,
        report.stats.steps,
        report.stats.rejections,
        last.length,
        last.mass,
        report.directory.display()
    );
    Ok(())
}

fn eoc(meshes: &[usize], settings: &EocSettings, csv: Option<&Path>) -> Result<(), Failure> {
    let report = eoc_harness(meshes, settings).map_err(|e| Failure::new(2, e.to_string()))?;
    print!("{report}");
    if let Some(path) = csv {
        fs::write(path, report.to_csv()).map_err(|e| Failure::io(path, e))?;
    }
    if report.is_complete() {
        Ok(())
    } else {
        Err(Failure::new(3, "solver failed on at least one mesh"))
    }
}

fn hopf(
    lambda: f64,
    r0: Option<f64>,
    a0: Option<f64>,
    t_final: f64,
    dt: f64,
    tol: f64,
    out: &Path,
) -> Result<(), Failure> {
    let params = HopfParams::new(lambda).map_err(|e| Failure::new(2, e.to_string()))?;
    if !(t_final > 0.0 && dt > 0.0 && tol > 0.0) {
        return Err(Failure::new(
            2,
            "--t-final, --dt and --tol must be positive",
        ));
    }
    let steady = steady_state(&params);
    let lin = jacobian_trace_det(&params);
    println!(
        "steady state r = {:.8}, a = {:.8}; trace = {:.6e}, det = {:.6e} ({})",
        steady.r,
        steady.a,
        lin.trace,
        lin.det,
        if lin.trace < 0.0 {
            "stable focus"
        } else {
            "unstable, limit cycle expected"
        }
    );
    let start = ReducedState {
        r: r0.unwrap_or(steady.r + 0.1),
        a: a0.unwrap_or(steady.a),
    };
    let cfg = curveflow::integrator::IntegratorConfig {
        tol,
        ..reduced_integrator_config()
    };
    let traj = integrate_reduced(&params, start, t_final, dt, &cfg)
        .map_err(|e| Failure::new(3, e.to_string()))?;

    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let mut text = String::from("t,r,a,omega\n");
    for i in 0..traj.len() {
        text.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            traj.t[i], traj.r[i], traj.a[i], traj.omega[i]
        ));
    }
    let path = out.join("trajectory.csv");
    fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;

    // direction field on a box around the steady state and the trajectory
    let r_max = traj.r.iter().cloned().fold(2.0 * steady.r, f64::max);
    let a_max = traj.a.iter().cloned().fold(2.0 * steady.a, f64::max);
    let n = 25;
    let mut phase = String::from("r,a,dr_dt,da_dt\n");
    for i in 1..=n {
        for j in 0..=n {
            let s = ReducedState {
                r: r_max * i as f64 / n as f64,
                a: a_max * j as f64 / n as f64,
            };
            let (dr, da) = hopf_rhs(&s, &params).map_err(|e| Failure::new(3, e.to_string()))?;
            phase.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                s.r, s.a, dr, da
            ));
        }
    }
    let path = out.join("phase.csv");
    fs::write(&path, phase).map_err(|e| Failure::io(&path, e))?;

    let maxima = traj.radius_maxima();
    if let Some(&(t, r)) = maxima.last() {
        println!(
            "last radius maximum {r:.6} at t = {t:.3} ({} maxima)",
            maxima.len()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn read_curve(path: &Path) -> Result<Curve, Failure> {
    let nodes = if path.extension().is_some_and(|e| e == "obj") {
        parse_obj_vertices(path).map_err(|e| Failure::new(4, e.to_string()))?
    } else {
        parse_snapshot(path)
            .map_err(|e| Failure::new(4, e.to_string()))?
            .nodes
    };
    Curve::new(nodes).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

fn linking(a: &Path, b: &Path) -> Result<(), Failure> {
    let ln = linking_number(&read_curve(a)?, &read_curve(b)?);
    println!(
        "linking number {:.6} (rounded {}), minimum distance {:.6e}",
        ln.value,
        ln.rounded(),
        ln.min_distance
    );
    if let Some(w) = &ln.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}
