//! Provenance headers, atomic writes and the optional SVG plot.

use std::io::{self, Write};
use std::path::Path;

use rpseries_core::coefficients::ModelSummary;
use rpseries_core::{CoefficientModel, ScanReport};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

/// Run metadata echoed at the head of every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub master_seed: Option<u64>,
    pub term_budget: u64,
    pub model: ModelSummary,
    pub config: &'a C,
}

impl<'a, C: Serialize> Provenance<'a, C> {
    pub fn new(
        command: &'static str,
        master_seed: Option<u64>,
        term_budget: u64,
        model: &CoefficientModel,
        config: &'a C,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            master_seed,
            term_budget,
            model: ModelSummary::from(model),
            config,
        }
    }

    /// `# `-prefixed lines: the metadata, then the merged config as TOML.
    pub fn csv_header(&self) -> Result<String, CliError> {
        let mut out = String::new();
        out.push_str(&format!("# tool: {} {}\n", self.tool, self.version));
        out.push_str(&format!("# command: {}\n", self.command));
        if let Some(seed) = self.master_seed {
            out.push_str(&format!("# master_seed: {seed}\n"));
        }
        out.push_str(&format!("# term_budget: {}\n", self.term_budget));
        out.push_str(&format!("# values: {}\n", self.model.values.join(",")));
        out.push_str(&format!("# weights: {}\n", self.model.weights.join(",")));
        out.push_str("# config:\n");
        let toml = toml::to_string(self.config).map_err(|e| CliError::Config(e.to_string()))?;
        for line in toml.lines() {
            out.push_str("#   ");
            out.push_str(line);
            out.push('\n');
        }
        Ok(out)
    }

    /// `{"provenance": ..., "data": ...}`, pretty printed with a trailing newline.
    pub fn json_document<D: Serialize>(&self, data: &D) -> Result<String, CliError> {
        #[derive(Serialize)]
        struct Document<'p, P, D> {
            provenance: &'p P,
            data: &'p D,
        }
        let doc = Document { provenance: self, data };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory,
/// or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        None => io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
        Some(path) => write_atomic(path, contents),
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        return Err(CliError::Io(format!("{}: directory does not exist", dir.display())));
    }
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Line chart of the certified lower and upper bounds against `-log10(1 - x)`.
pub fn scan_svg(report: &ScanReport, title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const PAD: f64 = 50.0;
    let xs: Vec<f64> = report.points.iter().map(|p| -p.delta.log10()).collect();
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let ys = report
        .points
        .iter()
        .flat_map(|p| [p.bound.lower(), p.bound.upper()])
        .filter_map(finite);
    let (mut y_min, mut y_max) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !(y_min < y_max) {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let x_min = xs.first().copied().unwrap_or(0.0);
    let mut x_max = xs.last().copied().unwrap_or(1.0);
    if !(x_min < x_max) {
        x_max = x_min + 1.0;
    }
    let px = |x: f64| PAD + (x - x_min) / (x_max - x_min) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y_min) / (y_max - y_min) * (H - 2.0 * PAD);
    let polyline = |values: Vec<f64>, colour: &str| {
        let pts: Vec<String> = xs
            .iter()
            .zip(values)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        )
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    svg.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    svg.push_str(&format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    ));
    if y_min < 0.0 && 0.0 < y_max {
        svg.push_str(&format!(
            "<line x1=\"{PAD}\" x2=\"{}\" y1=\"{1:.2}\" y2=\"{1:.2}\" stroke=\"grey\" stroke-dasharray=\"4 3\"/>\n",
            W - PAD,
            py(0.0)
        ));
    }
    svg.push_str(&polyline(report.points.iter().map(|p| p.bound.lower()).collect(), "#1f77b4"));
    svg.push_str(&polyline(report.points.iter().map(|p| p.bound.upper()).collect(), "#d62728"));
    let text = |x: f64, y: f64, anchor: &str, s: &str| {
        format!("<text x=\"{x:.1}\" y=\"{y:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"{anchor}\">{s}</text>\n")
    };
    svg.push_str(&text(W / 2.0, PAD / 2.0, "middle", &escape(title)));
    svg.push_str(&text(W / 2.0, H - 12.0, "middle", "-log10(1 - x)"));
    svg.push_str(&text(PAD, H - PAD + 16.0, "middle", &format!("{x_min:.2}")));
    svg.push_str(&text(W - PAD, H - PAD + 16.0, "middle", &format!("{x_max:.2}")));
    svg.push_str(&text(PAD - 4.0, H - PAD, "end", &format!("{y_min:.3e}")));
    svg.push_str(&text(PAD - 4.0, PAD + 4.0, "end", &format!("{y_max:.3e}")));
    svg.push_str(&text(W - PAD, PAD - 8.0, "end", "lower (blue), upper (red)"));
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

