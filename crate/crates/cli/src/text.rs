//! Human-readable summaries of a [`Report`].

use std::fmt::Write;

use metric_dcov::inference::Method;
use metric_dcov::io::Report;
use metric_dcov::negtype::Verdict;

pub fn render(r: &Report) -> String {
    let mut s = String::new();
    let c = &r.config;
    let _ = writeln!(s, "metric-dcov {} ({})", r.version, r.command);
    if let (Some(x), Some(y)) = (&c.metric_x, &c.metric_y) {
        let _ = writeln!(s, "metrics: x {x}, y {y}");
    }
    if let Some(d) = &r.dcov {
        let _ = writeln!(s, "n = {}", d.n);
        let _ = writeln!(s, "dcov  = {:.6e}", d.dcov);
        let _ = writeln!(s, "dvar  = {:.6e} (x), {:.6e} (y)", d.dvar_x, d.dvar_y);
        match d.dcor {
            Some(v) => {
                let _ = writeln!(s, "dcor  = {v:.6}");
            }
            None => {
                let _ = writeln!(s, "dcor  = undefined (degenerate marginal)");
            }
        }
    }
    if let Some(o) = &r.oracles {
        let _ = writeln!(s, "oracles: trace {:.6e}, definition {:.6e}", o.trace, o.definition);
        if let Some(k) = o.kernel6 {
            let _ = writeln!(s, "         kernel6 {k:.6e}");
        }
        if let Some(t) = o.tensor {
            let _ = writeln!(s, "         tensor {t:.6e}");
        }
    }
    for t in &r.tests {
        let name = match t.method {
            Method::Permutation { permutations } => format!("permutation test, {permutations} permutations"),
            Method::Asymptotic { mc_draws } => format!("asymptotic test, {mc_draws} chi-square mixture draws"),
        };
        let _ = writeln!(s, "{name}");
        let _ = writeln!(s, "  normalized statistic (null expectation 1) = {:.6}", t.statistic);
        let _ = writeln!(s, "  p-value = {:.6}", t.p_value);
        if !r.warnings.is_empty() {
            if let Some(p2) = t.p_value_two_sided {
                let _ = writeln!(s, "  two-sided p-value = {p2:.6}");
            }
        }
        if let Some(alpha) = c.alpha {
            let verdict = if t.p_value <= alpha { "reject" } else { "do not reject" };
            let _ = writeln!(s, "  {verdict} independence at alpha = {alpha}");
        }
    }
    for e in &r.negtype {
        let verdict = match e.report.verdict {
            Verdict::NegativeTypeOnSample => "negative type on this sample",
            Verdict::Violation => "violation",
        };
        let _ = writeln!(s, "{} ({}): {verdict}", e.side, e.metric);
        let _ = writeln!(
            s,
            "  centered eigenvalues in [{:.3e}, {:.3e}], tolerance {:.1e} relative",
            e.report.min_eigenvalue, e.report.max_eigenvalue, e.report.tol
        );
        if let Some(w) = &e.report.witness {
            let _ = writeln!(s, "  witness {}", fmt_vec(w));
            if let Some(q) = e.report.witness_quadratic_form {
                let _ = writeln!(s, "  witness quadratic form {q:.6e} > 0");
            }
        }
        if let (Some(dim), Some(err)) = (e.embedding_dim, e.embedding_max_error) {
            let _ = writeln!(s, "  embedding dimension {dim}, max squared-distance error {err:.1e}");
        }
        if let (Some(k), Some(pts)) = (e.search_iteration, &e.points) {
            let _ = writeln!(s, "  found at search iteration {k}:");
            for p in pts {
                let _ = writeln!(s, "    {}", fmt_vec(p));
            }
        }
    }
    if let Some(t) = &r.categorical {
        let _ = writeln!(s, "{}x{} table, n = {}", t.x_labels.len(), t.y_labels.len(), t.n);
        let _ = writeln!(s, "dcov = {:.6e}", t.dcov.dcov);
        if let Some(st) = t.dcov.statistic {
            let _ = writeln!(s, "normalized statistic (null expectation 1) = {st:.6}");
        }
        if let Some(p) = t.pearson_chisq {
            let _ = writeln!(s, "Pearson chi-square = {p:.6}");
        }
    }
    for cal in &r.calibration {
        let _ = writeln!(
            s,
            "{} rejections of {} at alpha = {}: rate {:.4} (binomial SE at nominal {:.4})",
            cal.rejections, cal.config.trials, cal.config.alpha, cal.rate, cal.nominal_se
        );
        let _ = writeln!(s, "mean normalized statistic (null expectation 1) = {:.4}", cal.mean_statistic);
    }
    if let Some(d) = &r.covdist {
        let _ = writeln!(s, "n = {}", d.n);
        let _ = writeln!(s, "cov(|X-X'|, |Y-Y'|) = {:.3e} (jackknife SE {:.3e})", d.distance_cov, d.distance_cov_se);
        let _ = writeln!(s, "dcov = {:.6e}", d.dcov);
        let _ = writeln!(s, "normalized statistic (null expectation 1) = {:.6}", d.statistic);
        let _ = writeln!(s, "permutation p-value = {:.6} ({} permutations)", d.permutation_p, d.permutations);
    }
    if let Some(seed) = r.seed {
        let _ = writeln!(s, "seed {seed}");
    }
    if let Some(ms) = r.runtime_ms {
        let _ = writeln!(s, "runtime {ms:.1} ms");
    }
    s
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}
