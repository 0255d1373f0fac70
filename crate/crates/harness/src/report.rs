//! Plain-text and CSV report rendering.

use std::fmt::Write as _;

use devlab::postselect::{
    avg_validated_architecture, avg_validated_weights, psuts_avg_architecture, psuts_select,
    psuvs_select, summarize_distribution, AuditReport, DistributionSummary, ErrorKind,
    ErrorTable, QUANTILE_METHOD, STD_METHOD, TEST_METHOD,
};

use crate::config::Conditions;

pub const FLAWED: &str = "PROTOCOL-FLAWED";

/// Column names of `summary.csv`.
pub const SUMMARY_HEADER: &str = "population,count,min,q25,median,q75,max,mean,std";

pub fn conditions_block(c: &Conditions) -> String {
    format!(
        "== Three Learning Conditions ==\n\
         framework restrictions: {}\n\
         training experience:    {}\n\
         resource bounds:        {}\n",
        c.framework, c.experience, c.resources
    )
}

pub fn methods_block() -> String {
    format!(
        "quantiles: {QUANTILE_METHOD}\nstd: {STD_METHOD}\naudit test: {TEST_METHOD}\n"
    )
}

/// Summaries of the fitting, validation and test error populations.
pub fn table_summaries(table: &ErrorTable) -> Vec<(&'static str, DistributionSummary)> {
    [
        ("fit", ErrorKind::Fit),
        ("val", ErrorKind::Val),
        ("test", ErrorKind::Test),
    ]
    .into_iter()
    .map(|(name, kind)| {
        let s = summarize_distribution(&table.column(kind)).expect("table is non-empty");
        (name, s)
    })
    .collect()
}

pub fn summary_csv(rows: &[(&str, DistributionSummary)]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (name, s) in rows {
        let _ = writeln!(out, "{name},{}", s.csv_row());
    }
    out
}

fn summary_lines(out: &mut String, rows: &[(&str, DistributionSummary)]) {
    let _ = writeln!(
        out,
        "{:<8} {:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "errors", "count", "min", "q25", "median", "q75", "max", "mean", "std"
    );
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<8} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            name, s.count, s.min, s.q25, s.median, s.q75, s.max, s.mean, s.std
        );
    }
}

/// Selections and distributions for one error table.
pub fn table_section(table: &ErrorTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "== Error table ==\narchitectures k = {}, seeds n = {}, failed runs = {}",
        table.k(),
        table.n(),
        table.failed_count()
    );
    let _ = writeln!(out, "\n== Distributions (all k*n networks) ==");
    summary_lines(&mut out, &table_summaries(table));

    let _ = writeln!(out, "\n== Selections ==");
    let v = psuvs_select(table);
    let _ = writeln!(
        out,
        "PSUVS luckiest (validation):   arch {} seed {}  val {:.4}  test {:.4}",
        v.arch,
        v.seed,
        v.error,
        table.value(v.arch, v.seed, ErrorKind::Test)
    );
    let t = psuts_select(table);
    let _ = writeln!(
        out,
        "PSUTS luckiest (test) [{FLAWED}]: arch {} seed {}  test {:.4}",
        t.arch, t.seed, t.error
    );
    let a = avg_validated_architecture(table);
    let _ = writeln!(
        out,
        "architecture by seed-averaged validation: arch {}  mean val {:.4}",
        a.index, a.mean_error
    );
    let w = avg_validated_weights(table);
    let _ = writeln!(
        out,
        "seed by architecture-averaged validation: seed {}  mean val {:.4}",
        w.index, w.mean_error
    );
    let p = psuts_avg_architecture(table);
    let _ = writeln!(
        out,
        "architecture by seed-averaged test [{FLAWED}]: arch {}  mean test {:.4}",
        p.index, p.mean_error
    );
    out
}

pub fn audit_section(r: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "== Luckiest-network audit ({} repeats) ==",
        r.repeats.len()
    );
    let g = &r.psuvs_gap;
    let _ = writeln!(
        out,
        "PSUVS: audit error minus selected validation error\n  {}\n  positive {} negative {} ties {}  sign-test p = {:.6}",
        g.summary, g.positives, g.negatives, g.ties, g.p_value
    );
    let g = &r.psuts_gap;
    let _ = writeln!(
        out,
        "PSUTS [{FLAWED}]: audit error minus selected test error\n  {}\n  positive {} negative {} ties {}  sign-test p = {:.6}",
        g.summary, g.positives, g.negatives, g.ties, g.p_value
    );
    let _ = writeln!(
        out,
        "luckiest network's mean audit error {:.4}  vs  grid mean validation error {:.4}",
        r.luckiest_audit_mean, r.grid_val_mean
    );
    out
}

/// One row per repeat.
pub fn audit_csv(r: &AuditReport) -> String {
    let mut out = String::from(
        "repeat,master_seed,psuvs_arch,psuvs_seed,psuvs_val,psuvs_audit,psuts_arch,psuts_seed,psuts_test,psuts_audit,grid_mean_val,failed_cells\n",
    );
    for x in &r.repeats {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            x.repeat,
            x.master_seed,
            x.psuvs.arch,
            x.psuvs.seed,
            x.psuvs.error,
            x.psuvs_audit,
            x.psuts.arch,
            x.psuts.seed,
            x.psuts.error,
            x.psuts_audit,
            x.grid_mean_val,
            x.failed_cells
        );
    }
    out
}

pub fn banner(warnings: &[String]) -> String {
    let mut out = String::new();
    for w in warnings {
        let _ = writeln!(out, "!!! WARNING: {w}");
    }
    out
}
