//! End-to-end catalog study: ingest, cluster at each K, write the artifact set.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::catalog::{derive_features, load_catalog, summarize_clusters, DerivedCatalog, SUMMARY_COLUMNS};
use crate::distance::{euclidean_distance_matrix, DistanceMatrix};
use crate::error::{Error, Result};
use crate::fanny::{
    fanny_solve, FannyConfig, FannyResult, Init, DEFAULT_MAX_ITER, DEFAULT_MEDOID_STARTS,
    DEFAULT_R, DEFAULT_SEED, DEFAULT_TOL,
};
use crate::features::standardize_columns;
use crate::mpca::{emit_pc_scatter, membership_pca_or_center, PcaResult};
use crate::validity::{
    connectivity_index, cross_tabulate, dunn_index, membership_report, HardPartition, MembershipReport,
    DEFAULT_CONNECTIVITY_L,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Duration separating short from longer bursts in the T90 plots, seconds.
const T90_REFERENCE_S: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub outdir: PathBuf,
    pub k_list: Vec<usize>,
    pub r: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub init: Init,
    pub medoid_starts: usize,
    pub conn_l: usize,
    /// Standardize the log variables before computing distances.
    pub standardize: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, outdir: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            outdir: outdir.into(),
            k_list: vec![3, 5],
            r: DEFAULT_R,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: DEFAULT_SEED,
            init: Init::default(),
            medoid_starts: DEFAULT_MEDOID_STARTS,
            conn_l: DEFAULT_CONNECTIVITY_L,
            standardize: false,
        }
    }

    fn fanny_config(&self, k: usize) -> FannyConfig {
        FannyConfig {
            k,
            r: self.r,
            max_iter: self.max_iter,
            tol: self.tol,
            init: self.init,
            seed: self.seed,
            medoid_starts: self.medoid_starts,
        }
    }
}

/// Version line followed by every effective solver and index parameter, one
/// `key=value` per line. Paths are left out so the text depends only on
/// settings that affect results.
pub fn describe(config: &RunConfig) -> String {
    let k_list: Vec<String> = config.k_list.iter().map(usize::to_string).collect();
    format!(
        "fuzzyburst {VERSION}\n\
         k={}\n\
         r={}\n\
         tol={:e}\n\
         max_iter={}\n\
         seed={}\n\
         init={}\n\
         medoid_starts={}\n\
         conn_l={}\n\
         standardize={}\n",
        k_list.join(","),
        config.r,
        config.tol,
        config.max_iter,
        config.seed,
        config.init,
        config.medoid_starts,
        config.conn_l,
        config.standardize,
    )
}

/// Per-K figures of merit.
#[derive(Debug, Clone)]
pub struct KOutcome {
    pub k: usize,
    pub solve: FannyResult,
    pub connectivity: f64,
    pub dunn: f64,
    pub report: MembershipReport,
}

#[derive(Debug)]
pub struct StudyOutcome {
    pub n_records: usize,
    pub catalog: DerivedCatalog,
    pub per_k: Vec<KOutcome>,
    pub pca: Option<PcaResult>,
    pub files: Vec<PathBuf>,
}

impl StudyOutcome {
    pub fn for_k(&self, k: usize) -> Option<&KOutcome> {
        self.per_k.iter().find(|o| o.k == k)
    }
}

/// Formats `x` with six significant digits, switching to exponent notation
/// outside `[1e-5, 1e6)`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

fn opt6(x: Option<f64>) -> String {
    x.map_or(String::new(), sig6)
}

struct Staging {
    dir: PathBuf,
    outdir: PathBuf,
    names: Vec<String>,
}

impl Staging {
    fn new(outdir: &Path) -> Result<Self> {
        fs::create_dir_all(outdir)?;
        let dir = outdir.join(format!(".fuzzyburst-staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Self {
            dir,
            outdir: outdir.to_path_buf(),
            names: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn commit(self) -> Result<Vec<PathBuf>> {
        let mut files = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let dst = self.outdir.join(name);
            fs::rename(self.dir.join(name), &dst)?;
            files.push(dst);
        }
        fs::remove_dir_all(&self.dir)?;
        Ok(files)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.dir);
    }
}

/// Runs the full study and writes every artifact into `config.outdir`.
///
/// Artifacts are written to a staging directory first; on error nothing is
/// left behind in the output directory.
pub fn run_study(config: &RunConfig) -> Result<StudyOutcome> {
    let records = load_catalog(&config.input)?;
    let catalog = derive_features(&records);
    let table = catalog.feature_table()?;
    let n = table.n_rows();
    for &k in &config.k_list {
        if k < 2 || k >= n {
            return Err(Error::InvalidConfig(format!(
                "k={k} must satisfy 2 <= k < N={n}"
            )));
        }
    }
    if config.k_list.is_empty() {
        return Err(Error::InvalidConfig("empty k list".into()));
    }
    let table = if config.standardize {
        standardize_columns(&table)?
    } else {
        table
    };
    let d = euclidean_distance_matrix(&table)?;

    let solves: Vec<Result<FannyResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .k_list
            .iter()
            .map(|&k| {
                let d = &d;
                let cfg = config.fanny_config(k);
                scope.spawn(move || fanny_solve(d, &cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });

    let mut per_k = Vec::with_capacity(solves.len());
    for (&k, solve) in config.k_list.iter().zip(solves) {
        let solve = solve?;
        per_k.push(evaluate(k, solve, &d, config.conn_l)?);
    }

    let pca = match per_k.iter().find(|o| o.k == 3) {
        Some(o) => Some(membership_pca_or_center(&o.solve.memberships)?),
        None => None,
    };

    let mut staging = Staging::new(&config.outdir)?;
    staging.write("run_config.txt", &describe(config))?;
    let mut exclusions = Vec::new();
    catalog.write_exclusion_log(&mut exclusions)?;
    staging.write("exclusions.txt", &String::from_utf8(exclusions).expect("ascii log"))?;

    for o in &per_k {
        write_k_artifacts(&mut staging, o, &catalog, config)?;
    }
    if let (Some(three), Some(five)) = (
        per_k.iter().find(|o| o.k == 3),
        per_k.iter().find(|o| o.k == 5),
    ) {
        staging.write(
            "crosstab_3x5.csv",
            &crosstab_csv(&five.solve.hard_labels, &three.solve.hard_labels)?,
        )?;
    }
    if let (Some(three), Some(pca)) = (per_k.iter().find(|o| o.k == 3), &pca) {
        write_k3_figures(&mut staging, three, pca, &catalog)?;
    }
    if let Some(five) = per_k.iter().find(|o| o.k == 5) {
        let labels = five.solve.hard_labels.labels();
        staging.write("fig3.tsv", &t90_plot(&catalog, labels, true))?;
        staging.write("fig4.tsv", &t90_plot(&catalog, labels, false))?;
    }

    let files = staging.commit()?;
    Ok(StudyOutcome {
        n_records: records.len(),
        catalog,
        per_k,
        pca,
        files,
    })
}

fn evaluate(k: usize, solve: FannyResult, d: &DistanceMatrix, conn_l: usize) -> Result<KOutcome> {
    let connectivity = connectivity_index(&solve.hard_labels, d, conn_l)?;
    // an empty hard cluster leaves the Dunn index undefined
    let dunn = match dunn_index(&solve.hard_labels, d) {
        Ok(v) => v,
        Err(Error::EmptyCluster { .. }) => f64::NAN,
        Err(e) => return Err(e),
    };
    let report = membership_report(&solve.memberships, &solve.hard_labels)?;
    Ok(KOutcome {
        k,
        solve,
        connectivity,
        dunn,
        report,
    })
}

fn write_k_artifacts(staging: &mut Staging, o: &KOutcome, catalog: &DerivedCatalog, config: &RunConfig) -> Result<()> {
    let k = o.k;
    let m = &o.solve.memberships;
    let ids: Vec<u64> = catalog.bursts.iter().map(|b| b.trigger_id).collect();

    let mut s = String::from("trigger_id");
    for v in 1..=k {
        write!(s, ",m{v}").unwrap();
    }
    s.push('\n');
    for (id, row) in ids.iter().zip(m.rows()) {
        write!(s, "{id}").unwrap();
        for x in row {
            write!(s, ",{}", sig6(*x)).unwrap();
        }
        s.push('\n');
    }
    staging.write(&format!("memberships_k{k}.csv"), &s)?;

    let mut s = String::from("trigger_id,label\n");
    for (id, l) in ids.iter().zip(o.solve.hard_labels.labels()) {
        writeln!(s, "{id},{l}").unwrap();
    }
    staging.write(&format!("hard_labels_k{k}.csv"), &s)?;

    let summary = summarize_clusters(&catalog.bursts, &o.solve.hard_labels)?;
    let mut s = String::from("cluster,size,percent");
    for c in SUMMARY_COLUMNS {
        write!(s, ",{c}_mean,{c}_se").unwrap();
    }
    s.push('\n');
    for c in &summary {
        write!(s, "{},{},{:.3}", c.cluster, c.size, c.percent).unwrap();
        match &c.stats {
            Some(stats) => {
                for st in stats {
                    write!(s, ",{},{}", sig6(st.mean), sig6(st.se)).unwrap();
                }
            }
            None => s.push_str(&",".repeat(2 * SUMMARY_COLUMNS.len())),
        }
        s.push('\n');
    }
    staging.write(&format!("summary_k{k}.csv"), &s)?;

    let labels = o.solve.hard_labels.labels();
    let mut s = String::from("cluster,size,mean_membership,median_membership,mean_percent,median_x100,below_half\n");
    for c in &o.report.clusters {
        let below = labels
            .iter()
            .enumerate()
            .filter(|&(i, &l)| l == c.cluster && m.get(i, l - 1) < 0.5)
            .count();
        writeln!(
            s,
            "{},{},{},{},{},{},{below}",
            c.cluster,
            c.size,
            opt6(c.mean),
            opt6(c.median),
            opt6(c.mean.map(|x| 100.0 * x)),
            opt6(c.median.map(|x| 100.0 * x)),
        )
        .unwrap();
    }
    staging.write(&format!("membership_report_k{k}.csv"), &s)?;

    let mut s = String::new();
    writeln!(s, "k={k}").unwrap();
    writeln!(s, "n={}", m.n()).unwrap();
    writeln!(s, "r={}", config.r).unwrap();
    writeln!(s, "objective={}", sig6(o.solve.objective())).unwrap();
    writeln!(s, "n_iter={}", o.solve.n_iter).unwrap();
    writeln!(s, "converged={}", o.solve.converged).unwrap();
    writeln!(s, "n_dpc={}", sig6(o.solve.n_dpc)).unwrap();
    writeln!(s, "n_dpc_x1e3={:.3}", 1e3 * o.solve.n_dpc).unwrap();
    writeln!(s, "connectivity_l={}", config.conn_l).unwrap();
    writeln!(s, "connectivity={:.3}", o.connectivity).unwrap();
    writeln!(s, "dunn_index={}", sig6(o.dunn)).unwrap();
    let dunn_flag = if o.dunn.is_nan() {
        "empty_cluster"
    } else if o.dunn.is_infinite() {
        "zero_diameter"
    } else {
        "none"
    };
    writeln!(s, "dunn_degenerate={dunn_flag}").unwrap();
    writeln!(s, "cluster_sizes={}", join(&o.solve.hard_labels.sizes())).unwrap();
    writeln!(s, "below_half_count={}", o.report.below_half).unwrap();
    writeln!(s, "below_half_percent={:.3}", o.report.below_half_percent).unwrap();
    staging.write(&format!("indices_k{k}.txt"), &s)?;
    Ok(())
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Rows are the clusters of `rows` (K=5), columns those of `cols` (K=3).
fn crosstab_csv(rows: &HardPartition, cols: &HardPartition) -> Result<String> {
    let t = cross_tabulate(rows, cols)?;
    let mut s = format!("cluster_k{}", rows.k());
    for c in 1..=cols.k() {
        write!(s, ",c{c}").unwrap();
    }
    s.push_str(",total");
    for c in 1..=cols.k() {
        write!(s, ",c{c}_percent").unwrap();
    }
    s.push('\n');
    for (g, (counts, pct)) in t.counts.iter().zip(&t.row_percentages).enumerate() {
        write!(s, "g{}", g + 1).unwrap();
        for c in counts {
            write!(s, ",{c}").unwrap();
        }
        write!(s, ",{}", counts.iter().sum::<usize>()).unwrap();
        for p in pct {
            write!(s, ",{p:.3}").unwrap();
        }
        s.push('\n');
    }
    Ok(s)
}

/// log10 T90 against log10 F_T (`fluence = true`) or log10 H32.
fn t90_plot(catalog: &DerivedCatalog, labels: &[usize], fluence: bool) -> String {
    let (col, name) = if fluence { (3, "log10_ft") } else { (4, "log10_h32") };
    let mut s = format!("log10_t90\t{name}\tlabel");
    if fluence {
        s.push_str("\tref_log10_t90");
    }
    s.push('\n');
    let reference = sig6(T90_REFERENCE_S.log10());
    for (b, l) in catalog.bursts.iter().zip(labels) {
        write!(s, "{}\t{}\t{l}", sig6(b.log_values[1]), sig6(b.log_values[col])).unwrap();
        if fluence {
            write!(s, "\t{reference}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn write_k3_figures(staging: &mut Staging, o: &KOutcome, pca: &PcaResult, catalog: &DerivedCatalog) -> Result<()> {
    let labels = o.solve.hard_labels.labels();
    staging.write("fig1.tsv", &t90_plot(catalog, labels, true))?;
    staging.write("fig2.tsv", &t90_plot(catalog, labels, false))?;

    let m = &o.solve.memberships;
    let mut s = String::from("cluster\trank\tmembership\n");
    for c in 1..=o.k {
        let mut xs: Vec<f64> = labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == c)
            .map(|(i, _)| m.get(i, c - 1))
            .collect();
        xs.sort_by(|a, b| b.total_cmp(a));
        for (rank, x) in xs.iter().enumerate() {
            writeln!(s, "{c}\t{}\t{}", rank + 1, sig6(*x)).unwrap();
        }
    }
    staging.write("fig5.tsv", &s)?;

    let ids: Vec<u64> = catalog.bursts.iter().map(|b| b.trigger_id).collect();
    let mut s = String::from("trigger_id");
    for c in 1..=pca.k() {
        write!(s, ",pc{c}").unwrap();
    }
    s.push_str(",label\n");
    for (i, (id, l)) in ids.iter().zip(labels).enumerate() {
        write!(s, "{id}").unwrap();
        for c in 0..pca.k() {
            write!(s, ",{}", sig6(pca.score(i, c))).unwrap();
        }
        writeln!(s, ",{l}").unwrap();
    }
    staging.write("pca_scores.csv", &s)?;

    let mut s = String::from("component,eigenvalue,fraction_of_all,fraction_of_nondegenerate,scaling\n");
    let scaling = if pca.standardized { "standardized" } else { "centered" };
    for c in 0..pca.k() {
        writeln!(
            s,
            "{},{},{},{},{scaling}",
            c + 1,
            sig6(pca.eigenvalues[c]),
            sig6(pca.explained_fraction[c]),
            sig6(pca.explained_fraction_nondegenerate[c]),
        )
        .unwrap();
    }
    staging.write("pca_variance.csv", &s)?;

    // fewer than two informative components leaves nothing to scatter
    if let Ok(rows) = emit_pc_scatter(pca, &o.solve.hard_labels) {
        let mut s = String::from("pc1\tpc2\tlabel\n");
        for r in rows {
            writeln!(s, "{}\t{}\t{}", sig6(r.pc1), sig6(r.pc2), r.label).unwrap();
        }
        staging.write("fig6.tsv", &s)?;
    }
    Ok(())
}
