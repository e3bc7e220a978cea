use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use corona_witness::certify::{self, defect_csv, higson_csv, Certifier, CertifyConfig, DefectRow};
use corona_witness::farey_walk::{depth, mediant_vertices, walk, Variant};
use corona_witness::higson::higson_scan;
use corona_witness::modular_group::word_ball;
use corona_witness::projective_line::ProjectivePoint;
use corona_witness::suites::Suite;
use corona_witness::zeta_builder::{
    build_levels, check_level_shift, check_structure, epsilon_scan, LevelConfig, WalkSchedule,
};

#[derive(Parser)]
#[command(
    name = "corona-witness",
    about = "Exact certification of boundary witness measures for SL(2,Z)"
)]
struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "CORONA_WITNESS_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Print the walk toward a boundary point.
    Walk {
        #[arg(long)]
        target: ProjectivePoint,
        #[arg(long, default_value = "naive")]
        variant: Variant,
        /// Number of walk steps to print after the mediant vertices.
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Sizes of the word balls in {S, T, T^-1}.
    Balls {
        #[arg(long, default_value_t = 8)]
        radius: usize,
    },
    /// Annulus maxima of the squared boundary deviation.
    Higson {
        /// Offset `a1,a2`; all nonzero offsets with sup norm at most 2 when omitted.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        a: Option<(i64, i64)>,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
        radii: Vec<i64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pair defects over a sample suite, maximized over x, x' in F_1.
    Defect {
        #[arg(long, default_value = "symmetrized")]
        family: Variant,
        #[arg(long, default_value = "axis")]
        suite: Suite,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a level table and scan the final defect.
    Zeta {
        #[arg(long = "box", default_value_t = 256)]
        radius: i64,
        #[arg(long)]
        margin: Option<i64>,
        #[arg(long, default_value_t = 8)]
        nmax: u8,
        #[arg(long, default_value = "symmetrized")]
        family: Variant,
        #[arg(long, default_value = "identity")]
        schedule: WalkSchedule,
        /// Also run the structural and level-shift checks.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value = "zeta-out")]
        out: PathBuf,
    },
    /// Run the acceptance suite and write its reports.
    Certify {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "certify-out")]
        out: PathBuf,
    },
}

fn parse_pair(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(',').ok_or("expected a1,a2")?;
    let p = |x: &str| x.trim().parse::<i64>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("writing {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_files(dir: &Path, files: &certify::Artifacts) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    Ok(())
}

fn defect_json(rows: &[DefectRow]) -> String {
    let rows: Vec<_> = rows
        .iter()
        .map(|r| {
            let (num, den) = r.value.key();
            json!({
                "family": r.family,
                "g": r.g,
                "y": [r.y.0.to_string(), r.y.1.to_string()],
                "n": r.n,
                "defect": format!("{num}/{den}"),
            })
        })
        .collect();
    let doc = json!({ "schema": certify::SCHEMA, "rows": rows });
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

fn run(command: Command) -> Result<bool, String> {
    match command {
        Command::Walk { target, variant, n } => {
            println!("target {target} variant {variant} depth {}", depth(&target));
            for v in mediant_vertices(&target) {
                println!("vertex {v}");
            }
            for (k, step) in walk(&target, variant).take(n).enumerate() {
                let mut line = format!("step {k} class {} edge {}", step.class, step.edge);
                if let Some(m) = step.mirror {
                    line.push_str(&format!(" mirror {m}"));
                }
                println!("{line}");
            }
            Ok(true)
        }
        Command::Balls { radius } => {
            let ball = word_ball(radius);
            println!("radius,size");
            for r in 0..=radius {
                println!("{r},{}", ball.truncate(r).len());
            }
            Ok(true)
        }
        Command::Higson {
            a,
            radii,
            format,
            out,
        } => {
            let offsets: Vec<(i64, i64)> = match a {
                Some(a) => vec![a],
                None => certify::offsets_f2()
                    .into_iter()
                    .filter(|&a| a != (0, 0))
                    .collect(),
            };
            if offsets.contains(&(0, 0)) || radii.iter().any(|&r| r < 1) {
                return Err("offset must be nonzero and radii positive".into());
            }
            let rows: Vec<_> = offsets
                .into_iter()
                .flat_map(|a| higson_scan(a, &radii))
                .collect();
            let text = match format {
                Format::Csv => higson_csv(&rows),
                Format::Json => {
                    let rows: Vec<_> = rows
                        .iter()
                        .map(|r| {
                            json!({
                                "R": r.radius,
                                "a": [r.a.0, r.a.1],
                                "max_dev_sq": format!("{}/{}", r.num, r.den),
                                "argmax": [r.argmax.0, r.argmax.1],
                            })
                        })
                        .collect();
                    serde_json::to_string_pretty(
                        &json!({ "schema": certify::SCHEMA, "rows": rows }),
                    )
                    .expect("json")
                        + "\n"
                }
            };
            emit(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Defect {
            family,
            suite,
            n,
            seed,
            format,
            out,
        } => {
            if n == 0 {
                return Err("--n must be at least 1".into());
            }
            let rows = certify::suite_rows(family, &suite.points(seed), &[n], suite.name());
            let text = match format {
                Format::Csv => defect_csv(&rows),
                Format::Json => defect_json(&rows),
            };
            emit(out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Zeta {
            radius,
            margin,
            nmax,
            family,
            schedule,
            check,
            out,
        } => {
            let mut config = LevelConfig::new(radius, nmax, family);
            config.schedule = schedule;
            if let Some(m) = margin {
                config.margin = m;
            }
            if nmax == 0 || config.interior_radius() < 1 {
                return Err("need --nmax >= 1 and a nonempty interior".into());
            }
            let table = build_levels(config).map_err(|e| e.to_string())?;
            let scan = epsilon_scan(&table);
            let mut summary = json!({
                "schema": certify::SCHEMA,
                "box": radius,
                "margin": config.margin,
                "nmax": nmax,
                "family": family,
                "schedule": schedule.to_string(),
                "digest": table.digest(),
                "log": table.log(),
                "interior_histogram": table.interior_histogram(),
                "epsilon": { "skipped": scan.skipped, "cohorts": scan.cohorts },
            });
            let mut passed = true;
            if check {
                let structure = check_structure(&table);
                let shift = check_level_shift(&table);
                passed = structure.violations.is_empty() && shift.violations.is_empty();
                summary["checks"] = json!({
                    "structure_pairs": structure.pairs,
                    "structure_triples": structure.triples,
                    "structure_violations": structure.violations.len(),
                    "shift_checked": shift.checked,
                    "shift_violations": shift.violations.len(),
                });
            }
            let mut files = certify::Artifacts::new();
            files.insert("levels.txt".into(), table.to_text());
            files.insert("epsilon.csv".into(), scan.to_csv());
            files.insert(
                "summary.json".into(),
                serde_json::to_string_pretty(&summary).expect("json") + "\n",
            );
            write_files(&out, &files)?;
            for entry in table.log() {
                println!("{entry:?}");
            }
            println!("interior levels {:?}", table.interior_histogram());
            println!("wrote {}", out.display());
            Ok(passed)
        }
        Command::Certify { quick, seed, out } => {
            let config = if quick {
                CertifyConfig::quick(seed)
            } else {
                CertifyConfig::full(seed)
            };
            let certifier = Certifier::new(config);
            let mut reports = Vec::new();
            for id in 1..=11 {
                let report = certifier.criterion(id);
                println!("{}", report.line());
                reports.push(report);
            }
            write_files(&out, &certifier.artifacts(&reports))?;
            let failed = reports.iter().filter(|r| !r.passed).count();
            println!(
                "{} of {} criteria passed; reports in {}",
                reports.len() - failed,
                reports.len(),
                out.display()
            );
            Ok(failed == 0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("--jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("global thread pool is configured once");
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
