use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use sheafctx::corpus;
use sheafctx::csp::{
    self, apply_plan, paper_plan, paper_plan_verbatim, parse_counts, proposition_contexts,
    table_report,
};
use sheafctx::lp::{contextual_fraction_with, CfOptions};
use sheafctx::model::EmpiricalModel;
use sheafctx::parity::{build_symmetric_model, parity_satisfiable, parity_scan, ParitySystem};
use sheafctx::possibilistic::{compatible_globals, strong_contextuality, SupportModel};
use sheafctx::scenario::MeasurementScenario;
use sheafctx::support::{classify, solve_support, AffineFamily, Classification, SupportSolution};
use sheafctx::verify::{run_suite, SuiteOptions};
use sheafctx::{Error, Rational};

/// Exact contextuality analysis of empirical models.
///
/// Exit codes: 0 ok, 2 parse or invalid input, 3 precondition violated
/// (e.g. a signaling model), 4 verification failure, 5 resource limit.
#[derive(Parser)]
#[command(name = "sheafctx", version)]
struct Cli {
    /// Worker threads for parallel scans and searches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Contextual fraction of a model.
    Cf {
        /// Model JSON file, `-` for stdin, or `corpus:NAME`.
        model: String,
        /// Drop globals that are incompatible with the support before solving.
        #[arg(long)]
        presolve: bool,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// AMCC / non-AMCC classification of a model or of a family at `--q`.
    Classify {
        /// Model or family JSON file, `-` for stdin, or `corpus:NAME`.
        input: String,
        /// Parameter value for one-dimensional families.
        #[arg(long)]
        q: Option<Rational>,
        #[arg(long)]
        json: bool,
    },
    /// Marginals of every context onto every measurement subset of size k.
    Marginals { model: String, k: usize },
    /// Checks generalized no-signaling; exit 3 with a witness if it fails.
    Nosignaling { model: String },
    /// Counts unsatisfiable parity vectors of the (n, m, 2) Bell scenario.
    ParityScan {
        n: usize,
        m: usize,
        #[arg(long)]
        json: bool,
        /// Also write the symmetric model of this hex parity vector.
        #[arg(long, value_name = "HEX")]
        emit_model: Option<String>,
    },
    /// Symmetric model (weight 1/2^(k-1) on parity-satisfying sections).
    EmitParityModel {
        n: usize,
        m: usize,
        /// Parity vector in hex, bit c = context c.
        hex: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Affine family of no-signaling models with a given support.
    SolveSupport {
        /// SupportModel JSON file or `-`.
        support: String,
        /// Write the symbolic table (dimension <= 1) as CSV.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Solves the augmented (4,2,2) support and compares it with the
    /// bundled one-parameter table; prints the symbolic table as CSV.
    ReconstructTables {
        /// Print the table as two half-tables of eight columns.
        #[arg(long)]
        split: bool,
        /// Write the family JSON here.
        #[arg(long, value_name = "PATH")]
        family: Option<PathBuf>,
        /// Use the addition list without the bundled correction.
        #[arg(long)]
        as_listed: bool,
        /// Print the report as JSON instead of the CSV table.
        #[arg(long)]
        json: bool,
    },
    /// Seeded random search for augmentation plans that stay strongly
    /// contextual and possibilistically no-signaling.
    SearchPlans {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Comma-separated additions per context; `.` or `0` for none.
        #[arg(long, default_value = "3,1,.,2,.,4,3,.,.,1,3,.,5,3,.,.")]
        counts: String,
        /// Base parity vector in hex on (4,2,2).
        #[arg(long, default_value = "1c00")]
        base: String,
    },
    /// Runs the reproduction suite; exit 4 if any check fails.
    VerifyPaper {
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = SuiteOptions::default().seed)]
        seed: u64,
    },
    /// Lists corpus models, or prints one as JSON.
    Corpus {
        name: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Proposition index to context of the (4,2,2) scenario and the
    /// augmentation plan in use.
    Plan {
        #[arg(long)]
        as_listed: bool,
    },
}

// Stdout writes that propagate errors, so a closed pipe ends the command
// quietly instead of panicking.
macro_rules! out {
    ($($t:tt)*) => { write!(io::stdout(), $($t)*)? };
}
macro_rules! outln {
    ($($t:tt)*) => { writeln!(io::stdout(), $($t)*)? };
}

fn read_input(src: &str) -> Result<String> {
    if src == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(src).map_err(|e| Error::Parse(format!("{src}: {e}")).into())
    }
}

fn load_model(src: &str) -> Result<EmpiricalModel> {
    if let Some(name) = src.strip_prefix("corpus:") {
        return Ok(corpus::by_name(name)?);
    }
    let text = read_input(src)?;
    EmpiricalModel::from_json_str(&text).with_context(|| format!("reading model {src}"))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn decimal(r: &Rational) -> String {
    format!("{:.6}", r.to_f64())
}

fn print_classification(c: &Classification, json: bool) -> Result<()> {
    if json {
        outln!("{}", serde_json::to_string_pretty(c)?);
        return Ok(());
    }
    outln!("{}", c.class);
    outln!("CF = {} ({})", c.cf, decimal(&c.cf));
    outln!("maximal marginals: {}", c.maximal_marginals);
    if let Some(w) = &c.marginal_witness {
        outln!(
            "  context {} subset {:?} section {:?}: {} (expected {})",
            w.context,
            w.subset,
            w.section,
            w.weight,
            w.expected
        );
    }
    Ok(())
}

fn cmd_cf(src: &str, presolve: bool, json: bool) -> Result<()> {
    let model = load_model(src)?;
    let res = contextual_fraction_with(&model, CfOptions { presolve })?;
    if json {
        let v = serde_json::json!({
            "cf": res.cf,
            "ncf": res.ncf,
            "pivots": res.pivots,
        });
        outln!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        outln!("CF = {} ({})", res.cf, decimal(&res.cf));
        outln!("NCF = {} ({})", res.ncf, decimal(&res.ncf));
    }
    Ok(())
}

fn cmd_classify(src: &str, q: Option<Rational>, json: bool) -> Result<()> {
    let model = if src.starts_with("corpus:") {
        load_model(src)?
    } else {
        let text = read_input(src)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{src}: {e}")))?;
        if value.get("directions").is_some() {
            let family =
                AffineFamily::from_json(serde_json::from_value(value).map_err(Error::from)?)?;
            let params = match (family.dimension(), q) {
                (0, _) => vec![],
                (1, Some(q)) => vec![q],
                (1, None) => bail!(Error::InvalidArgument(
                    "one-parameter family needs --q".into()
                )),
                (d, _) => bail!(Error::InvalidArgument(format!(
                    "family of dimension {d}; only 0 or 1 supported"
                ))),
            };
            family.model_at(&params)?
        } else {
            EmpiricalModel::from_json(serde_json::from_value(value).map_err(Error::from)?)?
        }
    };
    print_classification(&classify(&model)?, json)
}

fn cmd_marginals(src: &str, k: usize) -> Result<()> {
    let model = load_model(src)?;
    let s = model.scenario();
    for (c, table) in model.marginals_of_size(k) {
        let names: Vec<&str> = table
            .subset
            .iter()
            .map(|&m| s.measurements()[m].as_str())
            .collect();
        let weights: Vec<String> = table.weights.iter().map(Rational::to_string).collect();
        outln!(
            "{} [{}]: {}",
            s.context_label(c),
            names.join(","),
            weights.join(" ")
        );
    }
    Ok(())
}

fn cmd_nosignaling(src: &str) -> Result<()> {
    let model = load_model(src)?;
    match model.no_signaling_witness() {
        None => {
            outln!("no-signaling");
            Ok(())
        }
        Some(w) => {
            outln!("signaling: {}", serde_json::to_string(&w)?);
            Err(Error::Precondition("model is signaling".into()).into())
        }
    }
}

fn cmd_parity_scan(n: usize, m: usize, json: bool, emit: Option<&str>) -> Result<()> {
    let s = MeasurementScenario::bell(n, m, 2)?;
    let rep = parity_scan(&s)?;
    if json {
        outln!("{}", serde_json::to_string_pretty(&rep)?);
    } else {
        outln!("scenario {}", rep.scenario);
        outln!("parity vectors: {}", rep.total);
        outln!("unsatisfiable={}", rep.unsatisfiable);
        outln!(
            "satisfiable={} (2^{} = {})",
            rep.satisfiable,
            rep.rank,
            1u64 << rep.rank
        );
        outln!("deciders agree: {}", rep.deciders_agree);
        outln!("first unsatisfiable: {}", rep.examples.join(" "));
    }
    if let Some(hex) = emit {
        let sys = ParitySystem::from_hex(s, hex)?;
        eprintln!(
            "parity vector {}: {}",
            sys.to_hex(),
            if parity_satisfiable(&sys)?.is_some() {
                "satisfiable"
            } else {
                "unsatisfiable"
            }
        );
        outln!("{}", build_symmetric_model(&sys)?.to_json_string());
    }
    Ok(())
}

fn cmd_emit_parity_model(n: usize, m: usize, hex: &str, out: Option<&Path>) -> Result<()> {
    let sys = ParitySystem::from_hex(MeasurementScenario::bell(n, m, 2)?, hex)?;
    let unsat = parity_satisfiable(&sys)?.is_none();
    eprintln!(
        "parity vector {}: {}",
        sys.to_hex(),
        if unsat {
            "unsatisfiable"
        } else {
            "satisfiable"
        }
    );
    write_output(out, &build_symmetric_model(&sys)?.to_json_string())
}

fn cmd_solve_support(src: &str, csv: Option<&Path>) -> Result<()> {
    let support = SupportModel::from_json_str(&read_input(src)?)?;
    match solve_support(&support)? {
        SupportSolution::Infeasible => {
            outln!("{{\"infeasible\": true}}");
            Ok(())
        }
        SupportSolution::Family(f) => {
            outln!("{}", f.to_json_string());
            if let Some(path) = csv {
                let cols = 0..support.scenario().num_slots();
                fs::write(path, f.to_symbolic_csv(cols)?)?;
            }
            Ok(())
        }
    }
}

fn cmd_reconstruct(
    split: bool,
    family_out: Option<&Path>,
    as_listed: bool,
    json: bool,
) -> Result<()> {
    let plan = if as_listed {
        paper_plan_verbatim()
    } else {
        paper_plan()
    };
    let (family, report) = table_report(&plan)?;
    if let (Some(f), Some(path)) = (&family, family_out) {
        fs::write(path, f.to_json_string() + "\n")?;
    }
    if json {
        outln!("{}", serde_json::to_string_pretty(&report)?);
    } else if let Some(f) = family.as_ref().filter(|f| f.dimension() <= 1) {
        if split {
            out!("{}", f.to_symbolic_csv(0..8)?);
            outln!("");
            out!("{}", f.to_symbolic_csv(8..16)?);
        } else {
            out!("{}", f.to_symbolic_csv(0..16)?);
        }
    }
    let bounds = report.interval.as_ref().map(|b| {
        let show =
            |x: &Option<Rational>| x.as_ref().map_or("unbounded".into(), Rational::to_string);
        format!("[{}, {}]", show(&b.lower), show(&b.upper))
    });
    eprintln!("dimension: {:?}", report.dimension);
    eprintln!("strongly contextual: {}", report.strongly_contextual);
    eprintln!(
        "possibilistic no-signaling: {}",
        report.possibilistic_no_signaling
    );
    eprintln!("interval: {}", bounds.unwrap_or_else(|| "n/a".into()));
    for i in &report.instances {
        eprintln!(
            "q = {}: {} (CF = {})",
            i.q, i.classification.class, i.classification.cf
        );
    }
    if let Some(sc) = report.upper_endpoint_strongly_contextual {
        eprintln!("q = 1/4: strongly contextual {sc}");
    }
    eprintln!("table diffs: {}", report.diffs.len());
    if report.passes() {
        eprintln!("PASS");
        Ok(())
    } else {
        for line in report.failures() {
            eprintln!("  {line}");
        }
        eprintln!("FAIL");
        Err(Error::Verification("reconstruction does not match the bundled table".into()).into())
    }
}

fn cmd_search_plans(seed: u64, trials: u64, counts: &str, base: &str) -> Result<()> {
    let base = ParitySystem::from_hex(MeasurementScenario::bell(4, 2, 2)?, base)?;
    let counts = parse_counts(counts)?;
    let hits = csp::search_plans(&base, &counts, trials, seed)?;
    let reference = paper_plan();
    let out: Vec<_> = hits
        .iter()
        .map(|h| {
            serde_json::json!({
                "trial": h.trial,
                "same_as_bundled_plan": h.plan == reference,
                "strongly_contextual": strong_contextuality(&apply_plan(&h.plan).expect("valid plan")),
                "plan": h.plan.to_json(),
            })
        })
        .collect();
    eprintln!("{} hits in {trials} trials (seed {seed})", hits.len());
    outln!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_verify(json: bool, seed: u64) -> Result<()> {
    let report = run_suite(SuiteOptions {
        seed,
        ..SuiteOptions::default()
    });
    if json {
        outln!("{}", report.to_json_string());
    } else {
        outln!("{report}");
    }
    if report.overall {
        Ok(())
    } else {
        Err(Error::Verification("one or more checks failed".into()).into())
    }
}

fn cmd_corpus(name: Option<&str>, out: Option<&Path>) -> Result<()> {
    match name {
        None => {
            for (name, m) in corpus::all() {
                outln!("{name}\t{}", m.scenario());
            }
            Ok(())
        }
        Some(name) => write_output(out, &corpus::by_name(name)?.to_json_string()),
    }
}

fn cmd_plan(as_listed: bool) -> Result<()> {
    let plan = if as_listed {
        paper_plan_verbatim()
    } else {
        paper_plan()
    };
    let s = plan.base().scenario();
    outln!("B\tcontext\tparity\tadded");
    for (i, label) in proposition_contexts(s) {
        let c = i - 1;
        let added = plan.additions()[c].len();
        outln!(
            "B{i}\t{label}\t{}\t{added}",
            if plan.base().parities()[c] {
                "odd"
            } else {
                "even"
            }
        );
    }
    outln!("{}", serde_json::to_string_pretty(&plan.to_json())?);
    let support = apply_plan(&plan)?;
    eprintln!(
        "strongly contextual: {}, compatible globals: {}",
        strong_contextuality(&support),
        compatible_globals(&support).len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Cf {
            model,
            presolve,
            json,
        } => cmd_cf(&model, presolve, json),
        Command::Classify { input, q, json } => cmd_classify(&input, q, json),
        Command::Marginals { model, k } => cmd_marginals(&model, k),
        Command::Nosignaling { model } => cmd_nosignaling(&model),
        Command::ParityScan {
            n,
            m,
            json,
            emit_model,
        } => cmd_parity_scan(n, m, json, emit_model.as_deref()),
        Command::EmitParityModel { n, m, hex, out } => {
            cmd_emit_parity_model(n, m, &hex, out.as_deref())
        }
        Command::SolveSupport { support, csv } => cmd_solve_support(&support, csv.as_deref()),
        Command::ReconstructTables {
            split,
            family,
            as_listed,
            json,
        } => cmd_reconstruct(split, family.as_deref(), as_listed, json),
        Command::SearchPlans {
            seed,
            trials,
            counts,
            base,
        } => cmd_search_plans(seed, trials, &counts, &base),
        Command::VerifyPaper { json, seed } => cmd_verify(json, seed),
        Command::Corpus { name, out } => cmd_corpus(name.as_deref(), out.as_deref()),
        Command::Plan { as_listed } => cmd_plan(as_listed),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::InvalidArgument(_)) | Some(Error::Parse(_)) => 2,
        Some(Error::Precondition(_)) => 3,
        Some(Error::Verification(_)) => 4,
        Some(Error::ResourceLimit(_)) => 5,
        None if err
            .chain()
            .any(|e| e.is::<io::Error>() || e.is::<serde_json::Error>()) =>
        {
            2
        }
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e)
            if e.chain().any(|c| {
                c.downcast_ref::<io::Error>()
                    .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            }) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
