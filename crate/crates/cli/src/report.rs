use std::fmt::Write;

use inlet_core::stats::{summarize_batch, AnalysisResult};

fn window_label(hours: f64) -> String {
    format!("{hours}h")
}

/// Plain-text overview of a batch of analyses.
pub fn render(results: &[AnalysisResult], alpha: f64) -> inlet_core::Result<String> {
    if results.is_empty() {
        return Ok("no analyses\n".to_string());
    }
    let summary = summarize_batch(results, alpha)?;
    let mut out = String::new();
    let confounded = results.iter().filter(|r| r.confounded).count();
    // writing to a String cannot fail
    let _ = writeln!(out, "analyses: {} ({} confounded), alpha {}", summary.count, confounded, summary.alpha);
    let _ = writeln!(
        out,
        "mean sensitivity: {:.2} ± {:.2} %/°C (95% CI)",
        summary.mean_sensitivity, summary.ci_half_width
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>8} {:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "window", "n", "min", "q1", "median", "q3", "max", "mean"
    );
    for g in &summary.groups {
        let q = &g.quartiles;
        let _ = writeln!(
            out,
            "{:>8} {:>5} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            window_label(g.window_hours),
            g.count,
            q.min,
            q.q1,
            q.median,
            q.q3,
            q.max,
            g.mean_sensitivity
        );
    }
    let _ = writeln!(out);
    match &summary.anova {
        Some(a) => {
            let _ = writeln!(
                out,
                "anova across windows: F({}, {}) = {:.3}, p = {:.4}",
                a.df_between, a.df_within, a.f, a.p_value
            );
        }
        None => {
            let _ = writeln!(out, "anova across windows: not applicable");
        }
    }
    if let Some(reg) = &summary.regression {
        let _ = writeln!(
            out,
            "sensitivity vs before-temperature: slope {:.4} %/°C per °C, R² = {:.4}",
            reg.slope, reg.r_squared
        );
    }
    let _ = writeln!(out);
    for g in &summary.groups {
        let t = &g.tally;
        let _ = writeln!(
            out,
            "{}: {} positive, {} negative ({} and {} significant)",
            window_label(g.window_hours),
            t.positive(),
            t.negative(),
            t.positive_significant,
            t.negative_significant
        );
    }
    Ok(out)
}
