//! `ruloff`: offset curves, reproduce the reference cases and plot results.
//!
//! Exit codes: 0 success, 2 file or parse error, 3 geometric error, 4 convergence failure.
//! `RULOFF_THREADS` caps the worker pool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ruloff::io::{
    history_from_csv, parse_curves, points_from_csv, points_to_csv, render_svg, serialize_curves, CurveRecord,
    Shape,
};
use ruloff::optimizer::history_csv;
use ruloff::overlap::{eliminate_loops_points, ProjectionBasis};
use ruloff::pipeline::{run_pipeline, PipelineSpec, Repair};
use ruloff::repro;
use ruloff::surface::mesh_to_obj;
use ruloff::{Error, Exec, Vec3};

#[derive(Parser)]
#[command(name = "ruloff", version, about = "Offset 3D NURBS curves for ruled surfaces")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the offset pipeline described by a spec file.
    Offset {
        spec: PathBuf,
        /// Output directory.
        #[arg(short, long, default_value = "ruloff-out")]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reproduce a reference case.
    Repro {
        #[command(subcommand)]
        case: ReproCase,
    },
    /// Write an SVG plot.
    Plot {
        target: PlotTarget,
        #[arg(short, long)]
        out: PathBuf,
        /// Input files: curve files, a point CSV or a convergence CSV depending on the target.
        #[arg(short, long = "input")]
        inputs: Vec<PathBuf>,
        /// Projection direction as `x,y,z`.
        #[arg(long, default_value = "0,0,1", value_parser = parse_vec3)]
        direction: Vec3,
        /// Treat the projected polyline as closed.
        #[arg(long)]
        closed: bool,
    },
}

#[derive(Subcommand)]
enum ReproCase {
    /// Traditional vs improved subdivision on the reference cubic, as CSV.
    Table1 {
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Convex transition on the reference joint.
    Transition {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the curve file and the convergence history.
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotTarget {
    Curves,
    Projection,
    Convergence,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] if Vec3::new(*x, *y, *z).norm() > 0.0 => Ok(Vec3::new(*x, *y, *z).normalize()),
        _ => Err("expected three numbers, not all zero".into()),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input() {
        2
    } else if e.is_convergence() {
        4
    } else {
        3
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).context(dir.display().to_string()))?;
    }
    fs::write(path, text).map_err(|e| Error::from(e).context(path.display().to_string()))
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))
}

fn cmd_offset(spec_path: &Path, out: &Path, seed: Option<u64>, exec: Exec) -> Result<(), Error> {
    let text = read(spec_path)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let mut spec = PipelineSpec::parse(&text, base).map_err(|e| e.context(spec_path.display().to_string()))?;
    spec.exec = exec;
    if let Some(s) = seed {
        spec.pso.seed = s;
    }
    let result = run_pipeline(&spec)?;
    let records: Vec<CurveRecord> = result
        .final_curves()?
        .into_iter()
        .map(|curve| CurveRecord { curve, closed: false })
        .collect();
    write(&out.join("offset.curve"), &serialize_curves(&records))?;
    write(&out.join("joints.csv"), &result.joint_csv())?;
    let mut stats = String::from("curve,piece,mean,max,sd\n");
    let mut loops = 0;
    for (i, c) in result.curves.iter().enumerate() {
        write(&out.join(format!("raw_{i}.csv")), &points_to_csv(&c.raw.points()))?;
        write(&out.join(format!("trimmed_{i}.csv")), &points_to_csv(&c.trimmed.to_points()))?;
        for (j, s) in c.stats.iter().enumerate() {
            stats.push_str(&format!("{i},{j},{},{},{:e}\n", s.mean, s.max, s.sd));
        }
        loops += c.trimmed.eliminated_loops;
    }
    write(&out.join("stats.csv"), &stats)?;
    if let Some(mesh) = &result.mesh {
        write(&out.join("mesh.obj"), &mesh_to_obj(mesh))?;
    }
    println!(
        "curves={} pieces={} eliminated_loops={} joints={}",
        result.curves.len(),
        result.pieces.len(),
        loops,
        result.joints.len()
    );
    for j in &result.joints {
        let repair = match &j.repair {
            Repair::None => "none".to_string(),
            Repair::Convex { quartic, iterations } => {
                format!("quartic fitness={:.4e} iterations={iterations}", quartic.fitness.unwrap_or(f64::NAN))
            }
            Repair::Concave { .. } => "bridge".to_string(),
            Repair::Unrepaired => "unrepaired".to_string(),
        };
        println!("{} {} gap={:.6} {repair}", j.label, j.record.kind.as_str(), j.gap);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_table1(out: Option<&Path>, exec: Exec) -> Result<(), Error> {
    let csv = repro::table1(exec)?.to_csv();
    match out {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_transition(seed: u64, out: &Path, exec: Exec) -> Result<(), Error> {
    let (curve, history, result) = match repro::repro_transition(seed, exec) {
        Ok(sol) => (sol.curve, sol.outcome.history, Ok(())),
        Err(e) => match e.root() {
            Error::Convergence { best, .. } => ((**best).clone(), Vec::new(), Err(e)),
            _ => return Err(e),
        },
    };
    println!("seed={seed}");
    println!("fitness={:.6e}", curve.fitness.unwrap_or(f64::NAN));
    if !history.is_empty() {
        println!("iterations={}", history.len() - 1);
    }
    let w: Vec<String> = curve.weights.iter().map(|w| format!("{w:.6}")).collect();
    println!("weights={}", w.join(","));
    let p: Vec<String> = curve.params[4..].iter().map(|v| format!("{v:.6}")).collect();
    println!("p2={}", p.join(","));
    for (i, c) in curve.control_points.iter().enumerate() {
        println!("P{i}=({:.3},{:.3},{:.3})", c.x, c.y, c.z);
    }
    let record = CurveRecord {
        curve: curve.to_curve()?,
        closed: false,
    };
    write(&out.join("transition.curve"), &serialize_curves(&[record]))?;
    if !history.is_empty() {
        write(&out.join("convergence.csv"), &history_csv(&history))?;
    }
    result
}

const PLOT_SAMPLES: usize = 200;

fn cmd_plot(target: PlotTarget, out: &Path, inputs: &[PathBuf], k: Vec3, closed: bool) -> Result<(), Error> {
    let basis = ProjectionBasis::new(k);
    let svg = match target {
        PlotTarget::Curves => {
            let mut shapes = Vec::new();
            for path in inputs {
                let records = parse_curves(&read(path)?).map_err(|e| e.context(path.display().to_string()))?;
                for r in records {
                    let pts = r.curve.sample_uniform(PLOT_SAMPLES)?;
                    shapes.push(Shape::Polyline {
                        points: pts.iter().map(|p| basis.project(p)).collect(),
                        color: "#1f4e9c".into(),
                    });
                }
            }
            render_svg("curves", &shapes, false)
        }
        PlotTarget::Projection => {
            let [path] = inputs else {
                return Err(Error::Parse {
                    line: 0,
                    msg: "projection plot takes exactly one point CSV".into(),
                });
            };
            let pts = points_from_csv(&read(path)?).map_err(|e| e.context(path.display().to_string()))?;
            let mut shapes = vec![Shape::Polyline {
                points: pts.iter().map(|p| basis.project(p)).collect(),
                color: "#bbbbbb".into(),
            }];
            if pts.len() >= 2 {
                let trimmed = eliminate_loops_points(&pts, closed, k)?;
                for c in &trimmed.chains {
                    shapes.push(Shape::Polyline {
                        points: c.points().iter().map(|p| basis.project(p)).collect(),
                        color: "#1f4e9c".into(),
                    });
                }
                for j in &trimmed.joints {
                    shapes.push(Shape::Marker {
                        at: basis.project(&j.left_point),
                        color: "#c0392b".into(),
                    });
                }
            }
            render_svg("projection", &shapes, false)
        }
        PlotTarget::Convergence => {
            let [path] = inputs else {
                return Err(Error::Parse {
                    line: 0,
                    msg: "convergence plot takes exactly one history CSV".into(),
                });
            };
            let h = history_from_csv(&read(path)?).map_err(|e| e.context(path.display().to_string()))?;
            let points = h
                .iter()
                .enumerate()
                .map(|(i, v)| ruloff::Vec2::new(i as f64, *v))
                .collect();
            render_svg(
                "convergence",
                &[Shape::Polyline {
                    points,
                    color: "#1f4e9c".into(),
                }],
                true,
            )
        }
    };
    write(out, &svg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ruloff::exec::configure_threads_from_env();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let result = match &cli.command {
        Command::Offset { spec, out, seed } => cmd_offset(spec, out, *seed, exec),
        Command::Repro { case } => match case {
            ReproCase::Table1 { out } => cmd_table1(out.as_deref(), exec),
            ReproCase::Transition { seed, out } => cmd_transition(*seed, out, exec),
        },
        Command::Plot {
            target,
            out,
            inputs,
            direction,
            closed,
        } => cmd_plot(*target, out, inputs, *direction, *closed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
