use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};

use fuzzyburst::catalog::{convert_batse_tables, write_catalog};
use fuzzyburst::fanny::{Init, DEFAULT_MAX_ITER, DEFAULT_MEDOID_STARTS, DEFAULT_R, DEFAULT_SEED, DEFAULT_TOL};
use fuzzyburst::study::{describe, run_study, sig6, RunConfig};
use fuzzyburst::validity::DEFAULT_CONNECTIVITY_L;
use fuzzyburst::Error;

#[derive(Parser)]
#[command(name = "fuzzyburst", version, about = "Fuzzy clustering study of a gamma-ray burst catalog")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the catalog at every K and write the artifact set.
    Run {
        /// Catalog CSV (trigger_id,t50,t90,f1,f2,f3,f4,p64,p256,p1024).
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long, env = "FUZZYBURST_OUTDIR")]
        outdir: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Print the version and the effective parameters, then exit.
    Config {
        #[command(flatten)]
        params: Params,
    },
    /// Join the public catalog's duration and flux tables into a catalog CSV.
    Convert {
        #[arg(long)]
        duration: PathBuf,
        #[arg(long)]
        flux: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Params {
    /// Cluster counts, comma separated.
    #[arg(long = "k", value_delimiter = ',', default_value = "3,5")]
    k_list: Vec<usize>,
    /// Fuzzifier exponent (> 1).
    #[arg(long, default_value_t = DEFAULT_R)]
    r: f64,
    /// Relative objective change that ends the iteration.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(
        long,
        default_value = "seeded-random",
        value_parser = PossibleValuesParser::new(["seeded-random", "deterministic-stripes"])
            .map(|s| s.parse::<Init>().expect("restricted to known modes"))
    )]
    init: Init,
    /// Extra crisp nearest-medoid starts; the lowest objective wins.
    #[arg(long, default_value_t = DEFAULT_MEDOID_STARTS)]
    medoid_starts: usize,
    /// Neighbors per object in the connectivity index.
    #[arg(long, default_value_t = DEFAULT_CONNECTIVITY_L)]
    conn_l: usize,
    /// Standardize the log variables before computing distances.
    #[arg(long)]
    standardize: bool,
}

impl Params {
    fn into_config(self, input: PathBuf, outdir: PathBuf) -> RunConfig {
        RunConfig {
            input,
            outdir,
            k_list: self.k_list,
            r: self.r,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            init: self.init,
            medoid_starts: self.medoid_starts,
            conn_l: self.conn_l,
            standardize: self.standardize,
        }
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::InputNotFound(_) => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Config { params } => {
            print!("{}", describe(&params.into_config(PathBuf::new(), PathBuf::new())));
            ExitCode::SUCCESS
        }
        Command::Run { input, outdir, params } => {
            let config = params.into_config(input, outdir);
            print!("{}", describe(&config));
            println!("input={}", config.input.display());
            println!("outdir={}", config.outdir.display());
            match run_study(&config) {
                Ok(outcome) => {
                    println!(
                        "records={} retained={} excluded={}",
                        outcome.n_records,
                        outcome.catalog.bursts.len(),
                        outcome.catalog.excluded.len()
                    );
                    for o in &outcome.per_k {
                        println!(
                            "K={} sizes={:?} n_dpc={} connectivity={:.3} converged={} iterations={}",
                            o.k,
                            o.solve.hard_labels.sizes(),
                            sig6(o.solve.n_dpc),
                            o.connectivity,
                            o.solve.converged,
                            o.solve.n_iter,
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Convert { duration, flux, output } => {
            let read = |p: &PathBuf| {
                std::fs::read_to_string(p).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => Error::InputNotFound(p.clone()),
                    _ => Error::Io(e),
                })
            };
            let result = (|| {
                let records = convert_batse_tables(&read(&duration)?, &read(&flux)?)?;
                let file = std::fs::File::create(&output)?;
                write_catalog(&records, std::io::BufWriter::new(file))?;
                Ok::<_, Error>(records.len())
            })();
            match result {
                Ok(n) => {
                    println!("wrote {n} records to {}", output.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
