//! The `hatrisk` command line.
//!
//! Exit codes: 0 success, 1 validation findings at error severity, 2 usage, I/O or
//! parse failure. Diagnostics go to stderr; data goes to stdout unless `-o` is set.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dsl::{
    parse_lens_catalog, parse_mitigation_catalog, parse_model, parse_sfm_bindings,
    serialize_lens_catalog, DocumentKind, ParseDiagnostic, SourceDocument,
};
use crate::interactions::{extract_interactions, interaction_by_id};
use crate::lenses::{builtin_catalog, merge_catalogs, LensCatalog};
use crate::mapping::{apply_specialisations, map_failure_modes, SpecialisedFailureMode};
use crate::mitigations::{builtin_mitigations, suggest_mitigations, Mitigation};
use crate::model::{has_errors, validate_with, Ooda2Model, Strictness, ValidationContext};
use crate::pipeline::Analysis;
use crate::report::{
    emit_csv, emit_dot_pathways, emit_json, emit_markdown, emit_pathways_json, ReportBundle,
};
use crate::tracing::{trace, TraceDirection, TracePathway, DEFAULT_MAX_DEPTH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hatrisk",
    version,
    about = "Failure-mode analysis of human-autonomy team interactions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model file (.hat)
    model: PathBuf,
    /// Treat interactions that do not target an Observe node as errors
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct LensArgs {
    /// Additional lens catalog (.lens); repeatable
    #[arg(long = "lens", value_name = "FILE")]
    lenses: Vec<PathBuf>,
    /// Leave out the built-in machine-behaviour and human-intent lenses
    #[arg(long)]
    no_builtin: bool,
}

#[derive(Debug, Args)]
struct MitArgs {
    /// Additional mitigation catalog (.mit); repeatable
    #[arg(long = "mit", value_name = "FILE")]
    mitigations: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Write data to this file instead of stdout
    #[arg(short = 'o', long = "output", value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Md,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ListFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TraceFormat {
    Json,
    Dot,
    Md,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Md,
    Json,
    Dot,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionArg {
    Up,
    Down,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model for structural problems
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        lens: LensArgs,
        #[command(flatten)]
        mit: MitArgs,
    },
    /// List human-machine interactions
    Interactions {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: ListFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Map generic failure modes onto every interaction
    Map {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        lens: LensArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Map failure modes and apply specialised failure modes
    #[command(alias = "specialize")]
    Specialise {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        lens: LensArgs,
        /// Specialised failure-mode bindings (.sfm)
        #[arg(long, value_name = "FILE")]
        sfm: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Trace a failure-mode category from one interaction
    Trace {
        #[command(flatten)]
        model: ModelArgs,
        /// Interaction id (I ID)
        #[arg(long, value_name = "I-ID")]
        interaction: usize,
        /// Failure-mode category, e.g. stability
        #[arg(long)]
        category: String,
        /// Follow edges (down), go against them (up), or both
        #[arg(long, value_enum)]
        direction: DirectionArg,
        /// Longest pathway to enumerate, in nodes
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH, value_parser = parse_depth)]
        max_depth: usize,
        #[command(flatten)]
        mit: MitArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: TraceFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Suggest mitigations for each failure-mode row
    Mitigations {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        lens: LensArgs,
        #[arg(long, value_name = "FILE")]
        sfm: Option<PathBuf>,
        #[command(flatten)]
        mit: MitArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: ListFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the whole analysis and emit a report
    Report {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        lens: LensArgs,
        #[arg(long, value_name = "FILE")]
        sfm: Option<PathBuf>,
        #[command(flatten)]
        mit: MitArgs,
        /// Longest pathway to enumerate, in nodes
        #[arg(long, default_value_t = DEFAULT_MAX_DEPTH, value_parser = parse_depth)]
        max_depth: usize,
        #[arg(long, value_enum)]
        format: ReportFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Show or export the lens catalog
    Lenses {
        /// Print the catalog in .lens format
        #[arg(long)]
        export: bool,
        #[command(flatten)]
        lens: LensArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn parse_depth(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

/// A failure that ends the run with the given exit code; the message is already
/// written to stderr.
struct Exit(i32);

struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn err(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.stderr, "{msg}");
    }

    fn parse_failure(&mut self, path: &Path, diags: &[ParseDiagnostic]) -> Exit {
        for d in diags {
            self.err(format!(
                "{}:{}:{}: error: {}",
                path.display(),
                d.line,
                d.column,
                d.message
            ));
        }
        Exit(EXIT_USAGE)
    }

    fn emit(&mut self, out: &OutArgs, data: &str) -> Result<(), Exit> {
        match &out.output {
            Some(path) => std::fs::write(path, data).map_err(|e| {
                self.err(format!("{}: {e}", path.display()));
                Exit(EXIT_USAGE)
            }),
            None => self.stdout.write_all(data.as_bytes()).map_err(|e| {
                self.err(e);
                Exit(EXIT_USAGE)
            }),
        }
    }

    fn read(&mut self, path: &Path, kind: DocumentKind) -> Result<SourceDocument, Exit> {
        SourceDocument::read(path, Some(kind)).map_err(|e| {
            self.err(format!("{}: {e}", path.display()));
            Exit(EXIT_USAGE)
        })
    }

    fn load_model(&mut self, path: &Path) -> Result<Ooda2Model, Exit> {
        let doc = self.read(path, DocumentKind::Model)?;
        parse_model(&doc).map_err(|d| self.parse_failure(path, &d))
    }

    fn load_catalog(&mut self, args: &LensArgs) -> Result<LensCatalog, Exit> {
        let mut catalog = if args.no_builtin {
            LensCatalog::default()
        } else {
            builtin_catalog()
        };
        for path in &args.lenses {
            let doc = self.read(path, DocumentKind::LensCatalog)?;
            let extra = parse_lens_catalog(&doc).map_err(|d| self.parse_failure(path, &d))?;
            catalog = merge_catalogs(&catalog, &extra).map_err(|e| {
                self.err(format!("error: {e}"));
                Exit(EXIT_USAGE)
            })?;
        }
        Ok(catalog)
    }

    fn load_mitigations(&mut self, args: &MitArgs) -> Result<Vec<Mitigation>, Exit> {
        let mut all = builtin_mitigations();
        for path in &args.mitigations {
            let doc = self.read(path, DocumentKind::MitigationCatalog)?;
            for m in parse_mitigation_catalog(&doc).map_err(|d| self.parse_failure(path, &d))? {
                if all.iter().any(|x| x.id == m.id) {
                    self.err(format!(
                        "{}: error: mitigation `{}` is defined twice",
                        path.display(),
                        m.id
                    ));
                    return Err(Exit(EXIT_USAGE));
                }
                all.push(m);
            }
        }
        Ok(all)
    }

    fn load_sfms(&mut self, path: &Path) -> Result<Vec<SpecialisedFailureMode>, Exit> {
        let doc = self.read(path, DocumentKind::SfmBindings)?;
        parse_sfm_bindings(&doc).map_err(|d| self.parse_failure(path, &d))
    }

    /// Validates and reports diagnostics; fails with exit 1 on any error.
    /// Category references are checked only when lenses were chosen explicitly,
    /// mitigation references only when mitigation files were given.
    fn check(
        &mut self,
        model: &Ooda2Model,
        args: &ModelArgs,
        catalog: Option<&LensCatalog>,
        mitigations: Option<&[Mitigation]>,
    ) -> Result<(), Exit> {
        let strictness = if args.strict {
            Strictness::Strict
        } else {
            Strictness::Lenient
        };
        let diags = validate_with(
            model,
            strictness,
            ValidationContext {
                catalog,
                mitigations,
            },
        );
        for d in &diags {
            let line = d.location.line.map(|l| format!(":{l}")).unwrap_or_default();
            self.err(format!(
                "{}{line}: {}[{}]: {}",
                args.model.display(),
                d.severity,
                d.code,
                d.message
            ));
        }
        if has_errors(&diags) {
            Err(Exit(EXIT_FINDINGS))
        } else {
            Ok(())
        }
    }
}

fn explicit_catalog<'c>(args: &LensArgs, catalog: &'c LensCatalog) -> Option<&'c LensCatalog> {
    (args.no_builtin || !args.lenses.is_empty()).then_some(catalog)
}

fn explicit_mitigations<'m>(args: &MitArgs, all: &'m [Mitigation]) -> Option<&'m [Mitigation]> {
    (!args.mitigations.is_empty()).then_some(all)
}

fn csv_line(cells: &[String]) -> String {
    let quoted: Vec<String> = cells
        .iter()
        .map(|c| {
            if c.contains([',', '"', '\n', '\r']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.clone()
            }
        })
        .collect();
    quoted.join(",") + "\n"
}

fn table_output(bundle: &ReportBundle, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => emit_csv(&bundle.table),
        TableFormat::Md => emit_markdown(bundle),
        TableFormat::Json => emit_json(bundle),
    }
}

#[derive(Serialize)]
struct InteractionJson<'a> {
    i_id: usize,
    name: &'a str,
    source: &'a str,
    target: &'a str,
    machine_stage: &'a str,
    human_stage: &'a str,
    direction: &'a str,
}

#[derive(Serialize)]
struct SuggestionJson<'a> {
    row: usize,
    i_id: usize,
    sfm_id: Option<u32>,
    generic_failure_mode: &'a str,
    mitigation: &'a str,
    name: &'a str,
    damping: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    caveat: Option<&'a str>,
}

fn json_text<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

fn execute(cli: Cli, io: &mut Io<'_>) -> Result<(), Exit> {
    match cli.command {
        Command::Validate { model, lens, mit } => {
            let m = io.load_model(&model.model)?;
            let catalog = io.load_catalog(&lens)?;
            let mitigations = io.load_mitigations(&mit)?;
            io.check(
                &m,
                &model,
                explicit_catalog(&lens, &catalog),
                explicit_mitigations(&mit, &mitigations),
            )
        }
        Command::Interactions { model, format, out } => {
            let m = io.load_model(&model.model)?;
            io.check(&m, &model, None, None)?;
            let interactions = extract_interactions(&m);
            let text = match format {
                ListFormat::Csv => {
                    let mut s = String::from(
                        "I ID,Interaction Name,Source,Target,Machine Stage,Human Stage,Direction\n",
                    );
                    for i in &interactions {
                        s.push_str(&csv_line(&[
                            i.i_id.to_string(),
                            i.name.clone(),
                            i.source.clone(),
                            i.target.clone(),
                            i.machine_stage.title().to_owned(),
                            i.human_stage.title().to_owned(),
                            i.direction.arrow().to_owned(),
                        ]));
                    }
                    s
                }
                ListFormat::Json => json_text(
                    &interactions
                        .iter()
                        .map(|i| InteractionJson {
                            i_id: i.i_id,
                            name: &i.name,
                            source: &i.source,
                            target: &i.target,
                            machine_stage: i.machine_stage.title(),
                            human_stage: i.human_stage.title(),
                            direction: i.direction.arrow(),
                        })
                        .collect::<Vec<_>>(),
                ),
            };
            io.emit(&out, &text)
        }
        Command::Map {
            model,
            lens,
            format,
            out,
        } => {
            let m = io.load_model(&model.model)?;
            let catalog = io.load_catalog(&lens)?;
            io.check(&m, &model, explicit_catalog(&lens, &catalog), None)?;
            let table = map_failure_modes(&extract_interactions(&m), &catalog);
            let bundle = ReportBundle {
                table,
                ..Default::default()
            };
            io.emit(&out, &table_output(&bundle, format))
        }
        Command::Specialise {
            model,
            lens,
            sfm,
            format,
            out,
        } => {
            let m = io.load_model(&model.model)?;
            let catalog = io.load_catalog(&lens)?;
            io.check(&m, &model, explicit_catalog(&lens, &catalog), None)?;
            let sfms = io.load_sfms(&sfm)?;
            let generic = map_failure_modes(&extract_interactions(&m), &catalog);
            let table = apply_specialisations(&generic, &sfms).map_err(|e| {
                io.err(format!("{}: error: {e}", sfm.display()));
                Exit(EXIT_USAGE)
            })?;
            let bundle = ReportBundle {
                table,
                ..Default::default()
            };
            io.emit(&out, &table_output(&bundle, format))
        }
        Command::Trace {
            model,
            interaction,
            category,
            direction,
            max_depth,
            mit,
            format,
            out,
        } => {
            let m = io.load_model(&model.model)?;
            let mitigations = io.load_mitigations(&mit)?;
            io.check(&m, &model, None, explicit_mitigations(&mit, &mitigations))?;
            let interactions = extract_interactions(&m);
            let origin = interaction_by_id(&interactions, interaction).map_err(|e| {
                io.err(format!("error: {e}"));
                Exit(EXIT_USAGE)
            })?;
            let directions: &[TraceDirection] = match direction {
                DirectionArg::Up => &[TraceDirection::Upstream],
                DirectionArg::Down => &[TraceDirection::Downstream],
                DirectionArg::Both => &[TraceDirection::Downstream, TraceDirection::Upstream],
            };
            let pathways: Vec<TracePathway> = directions
                .iter()
                .flat_map(|d| trace(&m, origin, &category, *d, max_depth, &mitigations))
                .collect();
            let text = match format {
                TraceFormat::Json => emit_pathways_json(&pathways),
                TraceFormat::Dot => emit_dot_pathways(&m, &pathways).map_err(|e| {
                    io.err(format!("error: {e}"));
                    Exit(EXIT_USAGE)
                })?,
                TraceFormat::Md => {
                    let md = emit_markdown(&ReportBundle {
                        pathways,
                        ..Default::default()
                    });
                    // Only the pathway section is meaningful here.
                    let start = md.find("## Pathways").unwrap_or(0);
                    let end = md.find("\n## Second-order").unwrap_or(md.len());
                    format!("{}\n", md[start..end].trim_end())
                }
            };
            io.emit(&out, &text)
        }
        Command::Mitigations {
            model,
            lens,
            sfm,
            mit,
            format,
            out,
        } => {
            let m = io.load_model(&model.model)?;
            let catalog = io.load_catalog(&lens)?;
            let mitigations = io.load_mitigations(&mit)?;
            io.check(
                &m,
                &model,
                explicit_catalog(&lens, &catalog),
                explicit_mitigations(&mit, &mitigations),
            )?;
            let mut table = map_failure_modes(&extract_interactions(&m), &catalog);
            if let Some(path) = &sfm {
                let sfms = io.load_sfms(path)?;
                table = apply_specialisations(&table, &sfms).map_err(|e| {
                    io.err(format!("{}: error: {e}", path.display()));
                    Exit(EXIT_USAGE)
                })?;
            }
            let suggestions = suggest_mitigations(&table, &mitigations);
            let text = match format {
                ListFormat::Csv => {
                    let mut s =
                        String::from("Row,I ID,SFM ID,Generic Failure Mode,Mitigation,Name\n");
                    for sug in &suggestions {
                        let row = &table.rows[sug.row];
                        s.push_str(&csv_line(&[
                            (sug.row + 1).to_string(),
                            row.i_id.to_string(),
                            row.sfm_id.map(|i| i.to_string()).unwrap_or_default(),
                            row.generic_mode_title.clone(),
                            sug.mitigation.id.clone(),
                            sug.mitigation.name.clone(),
                        ]));
                    }
                    s
                }
                ListFormat::Json => json_text(
                    &suggestions
                        .iter()
                        .map(|sug| {
                            let row = &table.rows[sug.row];
                            SuggestionJson {
                                row: sug.row,
                                i_id: row.i_id,
                                sfm_id: row.sfm_id,
                                generic_failure_mode: &row.generic_mode_title,
                                mitigation: &sug.mitigation.id,
                                name: &sug.mitigation.name,
                                damping: sug.mitigation.damping,
                                caveat: sug.mitigation.caveat.as_deref(),
                            }
                        })
                        .collect::<Vec<_>>(),
                ),
            };
            io.emit(&out, &text)
        }
        Command::Report {
            model,
            lens,
            sfm,
            mit,
            max_depth,
            format,
            out,
        } => {
            let m = io.load_model(&model.model)?;
            let catalog = io.load_catalog(&lens)?;
            let mitigations = io.load_mitigations(&mit)?;
            io.check(
                &m,
                &model,
                explicit_catalog(&lens, &catalog),
                explicit_mitigations(&mit, &mitigations),
            )?;
            let sfms = match &sfm {
                Some(path) => io.load_sfms(path)?,
                None => Vec::new(),
            };
            let bundle = Analysis {
                model: &m,
                catalog: &catalog,
                sfms: &sfms,
                mitigations: &mitigations,
                max_depth,
            }
            .run()
            .map_err(|e| {
                io.err(format!("error: {e}"));
                Exit(EXIT_USAGE)
            })?;
            let text = match format {
                ReportFormat::Csv => emit_csv(&bundle.table),
                ReportFormat::Md => emit_markdown(&bundle),
                ReportFormat::Json => emit_json(&bundle),
                ReportFormat::Dot => emit_dot_pathways(&m, &bundle.pathways).map_err(|e| {
                    io.err(format!("error: {e}"));
                    Exit(EXIT_USAGE)
                })?,
            };
            io.emit(&out, &text)
        }
        Command::Lenses { export, lens, out } => {
            let catalog = io.load_catalog(&lens)?;
            let text = if export {
                serialize_lens_catalog(&catalog).text
            } else {
                let mut s = String::new();
                for l in &catalog.lenses {
                    s.push_str(&format!("{} ({}): {} modes\n", l.id, l.name, l.modes.len()));
                    for mode in &l.modes {
                        let benign = if mode.benign { " [benign]" } else { "" };
                        s.push_str(&format!(
                            "  {} [{}, {}]{benign}: {}\n    {}\n",
                            mode.id,
                            mode.category,
                            mode.applicability.token(),
                            mode.title,
                            mode.question
                        ));
                    }
                }
                s
            };
            io.emit(&out, &text)
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut io = Io { stdout, stderr };
    match execute(cli, &mut io) {
        Ok(()) => EXIT_OK,
        Err(Exit(code)) => code,
    }
}
