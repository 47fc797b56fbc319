//! `visual-vault`: enrollment, recovery, parameter management and evaluation.
//!
//! Exit codes: 0 success, 1 no match, 2 malformed or invalid input.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use visual_vault::eval::{self, ReferenceView};
use visual_vault::obfuscator::{MAX_SEED_LEN, MIN_SEED_LEN};
use visual_vault::params::{validate, SystemParams};
use visual_vault::pipeline::{self, Embedding, LabeledTemplate, ProjectionMatrix};
use visual_vault::{enroll, enroll_multi, AnyVault, Template};

#[derive(Parser)]
#[command(name = "visual-vault", version, about = "Wallet seed vault keyed by photographs of a secret object")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check system parameters.
    #[command(subcommand)]
    Params(ParamsCommand),
    /// Generate the sparse projection matrix.
    #[command(subcommand)]
    Matrix(MatrixCommand),
    /// Turn an embeddings CSV into a templates CSV.
    Binarize {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lock a seed under one or more embedding rows.
    Enroll(EnrollArgs),
    /// Recover a seed from fresh embedding rows.
    Recover(RecoverArgs),
    /// FAR/FRR, DET curve and EER over labeled templates.
    Eval(EvalArgs),
}

#[derive(Subcommand)]
enum ParamsCommand {
    Gen {
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 140)]
        r: usize,
        #[arg(long, default_value_t = 87)]
        lambda: u32,
        #[arg(long = "universe", default_value_t = 1024)]
        universe_size: usize,
        #[arg(long)]
        rng_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Treat warnings (security shortfall) as failures.
        #[arg(long)]
        strict: bool,
    },
    Validate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Subcommand)]
enum MatrixCommand {
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Store every nonzero entry instead of only the seed.
        #[arg(long)]
        with_entries: bool,
    },
}

#[derive(Args)]
struct EnrollArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Embedding row as `object_id:view_id`; repeat with --multi.
    #[arg(long = "row", required = true)]
    rows: Vec<String>,
    /// Write a multi-object vault (one member per --row).
    #[arg(long)]
    multi: bool,
    #[arg(long, conflicts_with = "seed_file", required_unless_present = "seed_file")]
    seed_hex: Option<String>,
    /// File holding the seed as hex text.
    #[arg(long)]
    seed_file: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    vault: PathBuf,
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long = "row", required = true)]
    rows: Vec<String>,
    /// Also check the vault against these deployment parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, conflicts_with_all = ["embeddings", "cross"])]
    templates: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Template length when reading templates CSV files.
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 140)]
    r: usize,
    /// Reference view for impostor pairs (default: first view_id).
    #[arg(long)]
    reference_view: Option<String>,
    #[arg(long)]
    det_out: Option<PathBuf>,
    #[arg(long)]
    summary_out: Option<PathBuf>,
    /// Count cross-set false accepts between --probes and --refs.
    #[arg(long, requires_all = ["probes", "refs"])]
    cross: bool,
    #[arg(long)]
    probes: Option<PathBuf>,
    #[arg(long)]
    refs: Option<PathBuf>,
}

/// Exit with status 1 and the generic message.
struct NoMatch;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NoMatch(NoMatch)) => {
            eprintln!("no match");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

enum Outcome {
    Done,
    NoMatch(NoMatch),
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Params(cmd) => params_cmd(cmd),
        Command::Matrix(MatrixCommand::Gen { seed, out, with_entries }) => {
            ProjectionMatrix::generate(seed).save(&out, with_entries)?;
            eprintln!("wrote {}", out.display());
            Ok(Outcome::Done)
        }
        Command::Binarize { embeddings, matrix, out } => {
            let matrix = ProjectionMatrix::load(&matrix).context("reading matrix")?;
            let embs = pipeline::load_embeddings(&embeddings).context("reading embeddings")?;
            let templates = pipeline::binarize_all(&embs, &matrix)?;
            pipeline::write_templates(BufWriter::new(File::create(&out)?), &templates)?;
            Ok(Outcome::Done)
        }
        Command::Enroll(args) => enroll_cmd(args),
        Command::Recover(args) => recover_cmd(args),
        Command::Eval(args) => eval_cmd(args),
    }
}

fn make_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

fn params_cmd(cmd: ParamsCommand) -> Result<Outcome> {
    let (params, strict) = match cmd {
        ParamsCommand::Gen {
            n,
            r,
            lambda,
            universe_size,
            rng_seed,
            out,
            strict,
        } => {
            let mut params = SystemParams::new(n, r, lambda, universe_size);
            // Structural failures are reported before spending time on q.
            let pre = validate(&params);
            let structural = ["length", "radius", "universe"];
            if pre
                .checks
                .iter()
                .any(|c| structural.contains(&c.name) && c.status == visual_vault::params::CheckStatus::Fail)
            {
                println!("{pre}");
                bail!("invalid parameters");
            }
            eprintln!("searching for a {}-bit safe prime", params.q_bits);
            let mut rng = make_rng(rng_seed);
            params.generate_q(&mut rng, |p| {
                if p.fermat_tests % 4096 == 0 && p.fermat_tests > 0 {
                    eprintln!("  {} candidates tested", p.fermat_tests);
                }
            })?;
            params.save(&out)?;
            eprintln!("wrote {}", out.display());
            (params, strict)
        }
        ParamsCommand::Validate { params, strict } => (SystemParams::load(&params)?, strict),
    };
    let report = validate(&params);
    println!("{report}");
    let ok = if strict { report.passed_strict() } else { report.passed() };
    if !ok {
        bail!("parameter validation failed");
    }
    Ok(Outcome::Done)
}

fn parse_row(selector: &str) -> Result<(&str, &str)> {
    selector
        .rsplit_once(':')
        .ok_or_else(|| anyhow!("row selector {selector:?} must be object_id:view_id"))
}

fn select_templates(embeddings: &Path, matrix: &Path, rows: &[String]) -> Result<Vec<Template>> {
    let matrix = ProjectionMatrix::load(matrix).context("reading matrix")?;
    let embs: Vec<Embedding> = pipeline::load_embeddings(embeddings).context("reading embeddings")?;
    rows.iter()
        .map(|sel| {
            let (obj, view) = parse_row(sel)?;
            let e = embs
                .iter()
                .find(|e| e.object_id == obj && e.view_id == view)
                .ok_or_else(|| anyhow!("no embedding row {sel}"))?;
            Ok(pipeline::binarize(e, &matrix)?)
        })
        .collect()
}

fn read_seed(args: &EnrollArgs) -> Result<Vec<u8>> {
    let text = match (&args.seed_hex, &args.seed_file) {
        (Some(h), _) => h.clone(),
        (None, Some(f)) => std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?,
        (None, None) => bail!("a seed is required"),
    };
    let seed = hex::decode(text.trim()).context("seed is not valid hex")?;
    if !(MIN_SEED_LEN..=MAX_SEED_LEN).contains(&seed.len()) {
        bail!("seed must be {MIN_SEED_LEN} to {MAX_SEED_LEN} bytes, got {}", seed.len());
    }
    Ok(seed)
}

fn enroll_cmd(args: EnrollArgs) -> Result<Outcome> {
    if args.rows.len() > 1 && !args.multi {
        bail!("several --row selectors need --multi");
    }
    let params = SystemParams::load(&args.params).context("reading params")?;
    let seed = read_seed(&args)?;
    let templates = select_templates(&args.embeddings, &args.matrix, &args.rows)?;
    let mut rng = make_rng(args.rng_seed);
    let json = if args.multi {
        enroll_multi(&templates, &seed, &params, &mut rng)?.to_json()?
    } else {
        enroll(&templates[0], &seed, &params, &mut rng)?.to_json()?
    };
    std::fs::write(&args.out, json + "\n")?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (sel, t) in args.rows.iter().zip(&templates) {
        writeln!(out, "{sel} {}", t.to_hex())?;
    }
    Ok(Outcome::Done)
}

fn recover_cmd(args: RecoverArgs) -> Result<Outcome> {
    let vault = AnyVault::load(&args.vault).context("malformed record")?;
    if let Some(p) = &args.params {
        vault.check_params(&SystemParams::load(p)?)?;
    }
    if args.rows.len() != vault.m() {
        bail!("vault has {} member(s) but {} --row given", vault.m(), args.rows.len());
    }
    let probes = select_templates(&args.embeddings, &args.matrix, &args.rows)?;
    match vault.retrieve(&probes)? {
        Some(seed) => {
            println!("{}", hex::encode(seed));
            Ok(Outcome::Done)
        }
        None => Ok(Outcome::NoMatch(NoMatch)),
    }
}

fn load_labeled(args: &EvalArgs) -> Result<(Vec<LabeledTemplate>, usize)> {
    if let Some(path) = &args.templates {
        return Ok((pipeline::load_templates(path, args.n)?, args.n));
    }
    let (Some(embs), Some(matrix)) = (&args.embeddings, &args.matrix) else {
        bail!("eval needs --templates, or --embeddings with --matrix");
    };
    let matrix = ProjectionMatrix::load(matrix)?;
    let n = matrix.cols();
    Ok((pipeline::binarize_all(&pipeline::load_embeddings(embs)?, &matrix)?, n))
}

fn eval_cmd(args: EvalArgs) -> Result<Outcome> {
    if args.cross {
        let load = |p: &Option<PathBuf>| -> Result<Vec<Template>> {
            let path = p.as_ref().expect("clap enforces presence");
            Ok(pipeline::load_templates(path, args.n)?.into_iter().map(|t| t.template).collect())
        };
        let c = eval::cross_fa_count(&load(&args.probes)?, &load(&args.refs)?, args.r)?;
        let summary = serde_json::json!({
            "accepts": c.accepts,
            "pairs": c.pairs,
            "ratio": c.ratio,
            "references_hit": c.references_hit,
            "r": args.r,
        });
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(Outcome::Done);
    }

    let (templates, n) = load_labeled(&args)?;
    let reference = args
        .reference_view
        .clone()
        .map_or(ReferenceView::FirstLexicographic, ReferenceView::Named);
    let scores = eval::pair_scores(&templates, &reference)?;
    let curve = eval::det_curve(&scores, n)?;
    let summary = eval::summarize(&scores, n, args.r)?;
    if let Some(p) = &args.det_out {
        eval::write_det_csv(BufWriter::new(File::create(p)?), &curve)?;
    }
    let json = serde_json::to_string_pretty(&summary)?;
    if let Some(p) = &args.summary_out {
        std::fs::write(p, json.clone() + "\n")?;
    }
    println!("{json}");
    Ok(Outcome::Done)
}
