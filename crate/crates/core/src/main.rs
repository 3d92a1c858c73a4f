//! `nseb`: randomness extraction from nonstationary Bernoulli sources.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_rational::Ratio;
use serde_json::json;

use nseb::analysis;
use nseb::expand::{plan_for_entropy, PlanOutcome};
use nseb::factor;
use nseb::intervals;
use nseb::matching::Color;
use nseb::source::{sample_window, MarginalSchedule, ScheduleFile};
use nseb::typecode::{build_codebook, default_delta, RationalProb};
use nseb::verify;
use nseb::Error;

#[derive(Parser)]
#[command(
    name = "nseb",
    about = "Equivariant randomness extraction from nonstationary independent symbol streams",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a window of the source and print its symbols.
    Simulate {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        from: i64,
        #[arg(long, allow_negative_numbers = true)]
        to: i64,
        #[arg(long)]
        seed: u64,
        /// Write symbols here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a type codebook and print its summary.
    Codebook {
        /// Limiting law, e.g. "1/2,1/2" (fractions or decimals).
        #[arg(long)]
        p: String,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        eps: f64,
        /// TV radius, e.g. "2/5"; defaults to the capped half-distance to
        /// the nearest degenerate law.
        #[arg(long)]
        delta: Option<String>,
        /// Index of the marker symbol inside p.
        #[arg(long, default_value_t = 0)]
        marker_a: u8,
    },
    /// Run the full factor map over a sampled range.
    Extract {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        from: i64,
        #[arg(long, allow_negative_numbers = true)]
        to: i64,
        #[arg(long)]
        seed: u64,
        /// "text" (index<TAB>symbol<TAB>radius per resolved position) or
        /// "binary" (1 byte per position, 0xFF = unresolved).
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Process in overlapping chunks of this many positions.
        #[arg(long)]
        chunk: Option<i64>,
    },
    /// Entropy / uniformity / independence report for a symbol stream.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alphabet_size: usize,
        #[arg(long, default_value_t = 10)]
        block_length: usize,
        #[arg(long, default_value_t = 4)]
        max_lag: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Kakutani dichotomy verdict for two schedules.
    Kakutani {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        n: i64,
    },
    /// Hellinger-affinity dissipativity series for a binary schedule.
    Dissipativity {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value_t = 1_000)]
        n: i64,
        #[arg(long, default_value_t = 10_000)]
        k: i64,
    },
    /// Text view of markers, intervals, colours and matching for a window.
    Inspect {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        from: i64,
        #[arg(long, allow_negative_numbers = true)]
        to: i64,
        #[arg(long)]
        seed: u64,
    },
    /// Run the desk-scale verification suite.
    Verify {
        #[arg(long, default_value = "desk")]
        suite: String,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("NSEB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("nseb: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> nseb::Result<ExitCode> {
    match cmd {
        Command::Simulate { schedule, from, to, seed, out } => {
            let s = load_schedule(&schedule)?;
            let w = sample_window(&s, from, to, seed)?;
            let mut text = String::new();
            for (i, &sym) in w.symbols.iter().enumerate() {
                text.push_str(s.alphabet.token(sym));
                text.push(if (i + 1) % 64 == 0 { '\n' } else { ' ' });
            }
            text.push('\n');
            write_out(out.as_deref(), text.as_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Codebook { p, k, eps, delta, marker_a } => {
            let p = parse_rational_vector(&p)?;
            let delta = match delta {
                Some(d) => parse_ratio(&d)?,
                None => default_delta(&p),
            };
            let cb = build_codebook(&p, marker_a, k, eps, delta)?;
            let uniform_mass = {
                let pv = nseb::ProbVector::new(p.to_f64())
                    .unwrap_or_else(|_| nseb::ProbVector::uniform(p.len()));
                cb.good_mass_iid(&pv)
            };
            let summary = json!({
                "k": cb.k,
                "epsilon": cb.epsilon,
                "delta": format!("{}/{}", cb.delta.numer(), cb.delta.denom()),
                "b_bits": cb.b_bits,
                "b_size": cb.b_size(),
                "types": cb.entries(),
                "good_words": cb.good_count().to_string(),
                "good_mass_at_limit": uniform_mass,
            });
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract { schedule, k, eps, delta, from, to, seed, format, out, chunk } => {
            let s = load_schedule(&schedule)?;
            let (cb, plan) = codebook_and_plan(&s, k, eps, delta.as_deref())?;
            let output = match chunk {
                Some(c) => factor::extract_chunked(&s, &cb, &plan, from, to, seed, c)?,
                None => {
                    let w = sample_window(&s, from, to, seed)?;
                    factor::extract(&w, &s, &cb, &plan)?
                }
            };
            let bytes = match format.as_str() {
                "text" => {
                    let mut t = String::new();
                    for pos in output.start..output.end() {
                        if let (Some(v), Some(r)) =
                            (output.value_at(pos), output.radius_at(pos))
                        {
                            t.push_str(&format!("{pos}\t{v}\t{r}\n"));
                        }
                    }
                    t.into_bytes()
                }
                "binary" => output
                    .out
                    .iter()
                    .map(|v| v.map(|x| x as u8).unwrap_or(0xFF))
                    .collect(),
                other => return Err(Error::Config(format!("unknown format {other:?}"))),
            };
            write_out(out.as_deref(), &bytes)?;
            let stats = serde_json::to_string(&output.stats).unwrap();
            if out.is_some() {
                println!("{stats}");
            } else {
                eprintln!("{stats}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { input, alphabet_size, block_length, max_lag, seed } => {
            let stream = read_stream(&input)?;
            let report = analysis::plug_in_entropy(&stream, alphabet_size, block_length, seed)?;
            println!("{}", serde_json::to_string(&report).unwrap());
            let tv = analysis::tv_to_uniform(&stream, alphabet_size);
            println!("{}", json!({ "tv_to_uniform": tv }));
            for lag in 1..=max_lag {
                let (stat, p) = analysis::lag_independence(&stream, alphabet_size, lag)?;
                println!("{}", json!({ "lag": lag, "chi_square": stat, "p_value": p }));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Kakutani { a, b, n } => {
            let sa = load_schedule(&a)?;
            let sb = load_schedule(&b)?;
            let r = nseb::source::kakutani_divergence(&sa, &sb, n)?;
            println!("{}", serde_json::to_string(&r).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::Dissipativity { schedule, n, k } => {
            let s = load_schedule(&schedule)?;
            let r = analysis::hellinger_series(&s, n, k, None)?;
            let summary = json!({
                "n_max": n,
                "truncation_k": r.truncation_k,
                "loglog_slope": r.loglog_slope,
                "tail_bound": r.tail_bound,
                "fit_range": r.fit_range,
                "partial_sum": r.partial_sums.last(),
                "affinity_first_10": &r.affinity[..r.affinity.len().min(11)],
            });
            println!("{}", serde_json::to_string(&summary).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { schedule, k, eps, delta, from, to, seed } => {
            let s = load_schedule(&schedule)?;
            let (cb, plan) = codebook_and_plan(&s, k, eps, delta.as_deref())?;
            let w = sample_window(&s, from, to, seed)?;
            let markers = intervals::find_markers(&w, k, &s);
            println!("# window [{from}, {to}], k = {k}, seed = {seed}");
            println!("# markers: {}", markers.len());
            for m in &markers {
                println!("marker\t[{}, {}]", m.start, m.end);
            }
            let output = factor::extract(&w, &s, &cb, &plan)?;
            for rec in &output.intervals {
                let color = match rec.color {
                    Color::Green => "green",
                    Color::Red => "red",
                    Color::Maroon => "maroon",
                };
                match rec.code {
                    Some(c) => println!(
                        "interval\t{}\tlen {}\t{color}\tcode {c}",
                        rec.start, rec.len
                    ),
                    None => println!("interval\t{}\tlen {}\t{color}", rec.start, rec.len),
                }
            }
            println!("# stats: {}", serde_json::to_string(&output.stats).unwrap());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            if suite != "desk" {
                return Err(Error::Config(format!("unknown suite {suite:?}")));
            }
            let reports = verify::run_all();
            let mut all_pass = true;
            for r in &reports {
                let status = if r.pass { "PASS" } else { "FAIL" };
                println!("[{status}] {}: {}", r.name, r.details);
                all_pass &= r.pass;
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn load_schedule(path: &std::path::Path) -> nseb::Result<MarginalSchedule> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ScheduleFile::parse(&text)?.build()
}

fn write_out(path: Option<&std::path::Path>, bytes: &[u8]) -> nseb::Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, bytes).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::Config(format!("stdout: {e}"))),
    }
}

// Codebook over the schedule's limiting law, plus the planner's expansion
// (falling back to the trivial j = 0 plan when the dyadic step cannot keep
// a whole bit per output symbol).
fn codebook_and_plan(
    s: &MarginalSchedule,
    k: u32,
    eps: f64,
    delta: Option<&str>,
) -> nseb::Result<(nseb::typecode::TypeCodebook, nseb::expand::ExpansionPlan)> {
    let p = rational_from_floats(s.limiting.weights())?;
    let delta = match delta {
        Some(d) => parse_ratio(d)?,
        None => default_delta(&p),
    };
    let cb = build_codebook(&p, s.alphabet.marker_a(), k, eps, delta)?;
    let plan = match plan_for_entropy(k, p.entropy_bits(), eps, 0.0) {
        PlanOutcome::Feasible { plan, .. } => plan,
        PlanOutcome::Infeasible { .. } => {
            nseb::expand::ExpansionPlan { k, m_bits: cb.b_bits, j_bits: 0 }
        }
    };
    if plan.m_bits != cb.b_bits {
        return Err(Error::Config("planner and codebook disagree on the code width".into()));
    }
    Ok((cb, plan))
}

// "1/2,1/2" or "0.5,0.5" -> exact rational vector (decimals are read as
// their exact binary values; the last entry absorbs any rounding so the
// weights sum to exactly 1).
fn parse_rational_vector(text: &str) -> nseb::Result<RationalProb> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() < 2 {
        return Err(Error::Config("need at least two weights".into()));
    }
    let mut ratios = Vec::new();
    for p in &parts[..parts.len() - 1] {
        ratios.push(parse_ratio(p)?);
    }
    finish_rational(ratios)
}

fn rational_from_floats(weights: &[f64]) -> nseb::Result<RationalProb> {
    let mut ratios = Vec::new();
    for &w in &weights[..weights.len() - 1] {
        ratios.push(ratio_from_f64(w)?);
    }
    finish_rational(ratios)
}

fn finish_rational(mut ratios: Vec<Ratio<i128>>) -> nseb::Result<RationalProb> {
    let rest: Ratio<i128> = ratios.iter().sum();
    let last = Ratio::new(1, 1) - rest;
    if last < Ratio::new(0, 1) {
        return Err(Error::Config("weights exceed 1".into()));
    }
    ratios.push(last);
    let entries = ratios.into_iter().map(|r| (*r.numer(), *r.denom())).collect();
    RationalProb::new(entries)
}

fn parse_ratio(text: &str) -> nseb::Result<Ratio<i128>> {
    if let Some((n, d)) = text.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad_ratio(text))?;
        let d: i128 = d.trim().parse().map_err(|_| bad_ratio(text))?;
        if d == 0 {
            return Err(bad_ratio(text));
        }
        return Ok(Ratio::new(n, d));
    }
    let f: f64 = text.parse().map_err(|_| bad_ratio(text))?;
    ratio_from_f64(f)
}

fn bad_ratio(text: &str) -> Error {
    Error::Config(format!("cannot parse {text:?} as a rational"))
}

// Exact dyadic value of a float in [0, 1].
fn ratio_from_f64(f: f64) -> nseb::Result<Ratio<i128>> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Config(format!("{f} outside [0, 1]")));
    }
    let mut num = f;
    let mut den: i128 = 1;
    let mut guard = 0;
    while num.fract() != 0.0 {
        num *= 2.0;
        den *= 2;
        guard += 1;
        if guard > 70 {
            return Err(Error::Config(format!(
                "{f} needs more than 70 binary digits; pass a fraction instead"
            )));
        }
    }
    Ok(Ratio::new(num as i128, den))
}

fn read_stream(path: &std::path::Path) -> nseb::Result<Vec<u16>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        // extract text format: index <TAB> symbol <TAB> radius; otherwise
        // one symbol per line
        let sym = if fields.len() >= 2 { fields[1] } else { fields[0] };
        let v: u16 = sym
            .parse()
            .map_err(|_| Error::Config(format!("line {}: cannot parse symbol {sym:?}", ln + 1)))?;
        out.push(v);
    }
    Ok(out)
}
