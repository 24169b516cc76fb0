use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use taintriv::asm::assemble;
use taintriv::dift::PolicyConfig;
use taintriv::glift::{check_flow_policy, parse_bench, FlowKind, FlowPolicy, VectorSet};
use taintriv::isa::{Machine, Status, DEFAULT_MEM_SIZE};
use taintriv::report::{AnalysisReport, ReportStatus};
use taintriv::scenarios::{run_demo, Demo};

const EXIT_ASM: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "taintriv",
    version,
    about = "Tagged RV32I simulator and gate-level taint analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a source file into a flat image loaded at address 0.
    Asm {
        input: PathBuf,
        /// Image path (default: input with a .bin extension).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write an address/word/source listing.
        #[arg(long, value_name = "FILE")]
        listing: Option<PathBuf>,
        /// Write the symbol table as JSON.
        #[arg(long, value_name = "FILE")]
        symbols: Option<PathBuf>,
    },
    /// Run an image (or a .s file) under the tag-tracking simulator.
    Run {
        image: PathBuf,
        #[arg(long, value_enum, default_value_t = Toggle::On)]
        ift: Toggle,
        /// TOML policy file.
        #[arg(long, value_name = "FILE")]
        policy: Option<PathBuf>,
        /// Bytes served to the untrusted read: literal text, `hex:4142..`
        /// or `@path`.
        #[arg(long, value_name = "BYTES")]
        stdin_script: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        /// Write the per-instruction trace as JSON.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Report path (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MEM_SIZE)]
        mem_size: usize,
    },
    /// Check a netlist against an information-flow policy.
    Glift {
        bench: PathBuf,
        /// Labeled inputs, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "")]
        taint: Vec<String>,
        /// Observed outputs, comma separated (default: all outputs).
        #[arg(long, value_delimiter = ',')]
        outputs: Vec<String>,
        /// `exhaustive`, `random:N:SEED` or a file of 0/1 rows.
        #[arg(long, default_value = "exhaustive")]
        vectors: String,
        #[arg(long, value_enum, default_value_t = PolicyKind::Integrity)]
        policy: PolicyKind,
        /// Report path (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a bundled scenario without and with tracking.
    Demo { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Integrity,
    Confidentiality,
}

struct Fail(u8, String);

type CmdResult = Result<u8, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail(EXIT_USAGE, msg.into())
}

fn read_text(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), Fail> {
    fs::write(path, data).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn color() -> bool {
    std::env::var("TAINTRIV_COLOR").map_or(true, |v| v != "0") && std::io::stderr().is_terminal()
}

fn paint(status: ReportStatus) -> String {
    let (code, text) = match status {
        ReportStatus::Clean => ("32", "Clean"),
        ReportStatus::Violation => ("31", "Violation"),
        ReportStatus::Trap => ("33", "Trap"),
        ReportStatus::StepLimit => ("33", "StepLimit"),
    };
    if color() {
        format!("\x1b[1;{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn emit(report: &AnalysisReport, output: Option<&Path>) -> CmdResult {
    let json = report.to_json();
    match output {
        Some(p) => write(p, json)?,
        None => print!("{json}"),
    }
    Ok(report.exit_code() as u8)
}

fn cmd_asm(
    input: &Path,
    output: Option<PathBuf>,
    listing: Option<PathBuf>,
    symbols: Option<PathBuf>,
) -> CmdResult {
    let source = read_text(input)?;
    let program =
        assemble(&source).map_err(|e| Fail(EXIT_ASM, format!("{}: {e}", input.display())))?;
    let out = output.unwrap_or_else(|| input.with_extension("bin"));
    write(&out, &program.image)?;
    if let Some(p) = listing {
        write(&p, program.listing_text())?;
    }
    if let Some(p) = symbols {
        write(&p, program.symbols_json())?;
    }
    eprintln!("{}: {} bytes", out.display(), program.image.len());
    Ok(0)
}

fn parse_script(arg: &str) -> Result<Vec<u8>, Fail> {
    if let Some(hex) = arg.strip_prefix("hex:") {
        let digits: String = hex.chars().filter(|c| !c.is_whitespace()).collect();
        if digits.len() % 2 != 0 {
            return Err(usage("hex script needs an even number of digits"));
        }
        (0..digits.len())
            .step_by(2)
            .map(|i| {
                u8::from_str_radix(&digits[i..i + 2], 16)
                    .map_err(|_| usage(format!("bad hex byte `{}`", &digits[i..i + 2])))
            })
            .collect()
    } else if let Some(path) = arg.strip_prefix('@') {
        fs::read(path).map_err(|e| usage(format!("{path}: {e}")))
    } else {
        Ok(arg.as_bytes().to_vec())
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    image: &Path,
    ift: Toggle,
    policy: Option<PathBuf>,
    script: Option<String>,
    max_steps: u64,
    trace: Option<PathBuf>,
    output: Option<PathBuf>,
    mem_size: usize,
) -> CmdResult {
    let bytes = if image.extension().is_some_and(|e| e == "s") {
        let source = read_text(image)?;
        assemble(&source)
            .map_err(|e| Fail(EXIT_ASM, format!("{}: {e}", image.display())))?
            .image
    } else {
        fs::read(image).map_err(|e| usage(format!("{}: {e}", image.display())))?
    };
    let mut config = match policy {
        Some(p) => {
            let text = read_text(&p)?;
            PolicyConfig::from_toml(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => PolicyConfig::default(),
    };
    if let Toggle::Off = ift {
        config.ift_enabled = false;
    }
    if max_steps == 0 {
        return Err(usage("--max-steps must be positive"));
    }
    let input = match script {
        Some(s) => parse_script(&s)?,
        None => Vec::new(),
    };
    let mut machine =
        Machine::new(&bytes, mem_size, config, input).map_err(|e| usage(e.to_string()))?;
    let run = machine.run(max_steps, trace.is_some());
    if let Some(p) = trace {
        let json = serde_json::to_string_pretty(&run.trace).expect("trace serializes");
        write(&p, json + "\n")?;
    }
    let report = AnalysisReport::from_dift(&run);
    let detail = match run.status {
        Status::HaltedOk { code } => format!("halted with code {code}"),
        Status::Trapped(t) => format!("{:?} (addr {:#x})", t.cause, t.addr),
        Status::Running => "step limit reached".to_string(),
    };
    eprintln!(
        "{}: {detail} at pc {:#x} after {} steps",
        paint(report.status),
        run.final_pc,
        run.steps
    );
    emit(&report, output.as_deref())
}

fn parse_vectors(arg: &str, width: usize) -> Result<VectorSet, Fail> {
    if arg == "exhaustive" {
        return Ok(VectorSet::Exhaustive);
    }
    if let Some(rest) = arg.strip_prefix("random:") {
        let (n, seed) = rest
            .split_once(':')
            .ok_or_else(|| usage("expected random:N:SEED"))?;
        let count = n
            .parse()
            .map_err(|_| usage(format!("bad vector count `{n}`")))?;
        let seed = seed
            .parse()
            .map_err(|_| usage(format!("bad seed `{seed}`")))?;
        return Ok(VectorSet::Random { count, seed });
    }
    let text = read_text(Path::new(arg))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row: Option<Vec<bool>> = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        match row {
            Some(r) if r.len() == width => rows.push(r),
            _ => {
                return Err(usage(format!(
                    "{arg}:{}: expected {width} bits of 0/1",
                    i + 1
                )))
            }
        }
    }
    Ok(VectorSet::Explicit(rows))
}

fn cmd_glift(
    bench: &Path,
    taint: &[String],
    outputs: &[String],
    vectors: &str,
    kind: PolicyKind,
    output: Option<PathBuf>,
) -> CmdResult {
    let text = read_text(bench)?;
    let name = bench
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let netlist =
        parse_bench(&name, &text).map_err(|e| usage(format!("{}: {e}", bench.display())))?;
    let names = |v: &[String]| -> Vec<String> {
        v.iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    };
    let taint = names(taint);
    let outputs = names(outputs);
    let taint: Vec<&str> = taint.iter().map(String::as_str).collect();
    let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    let kind = match kind {
        PolicyKind::Integrity => FlowKind::Integrity,
        PolicyKind::Confidentiality => FlowKind::Confidentiality,
    };
    let policy =
        FlowPolicy::new(&netlist, kind, &taint, &outputs).map_err(|e| usage(e.to_string()))?;
    let set = parse_vectors(vectors, netlist.inputs().len())?;
    let analysis = check_flow_policy(&netlist, &policy, &set).map_err(|e| usage(e.to_string()))?;
    let report = AnalysisReport::from_glift(analysis);
    let first = report
        .glift
        .as_ref()
        .and_then(|g| g.first_untrusted_gate.as_ref())
        .map(|g| format!(", first untrusted gate {} ({})", g.net, g.gate_type))
        .unwrap_or_default();
    eprintln!(
        "{}: {} of {} vectors violate{first}",
        paint(report.status),
        report.summary.violations,
        report.summary.steps
    );
    emit(&report, output.as_deref())
}

fn describe(report: &AnalysisReport) -> String {
    let status = paint(report.status);
    match (report.outcome(), report.final_pc()) {
        (Some(Status::HaltedOk { code }), Some(pc)) => {
            format!("{status}, halted with code {code} at pc {pc:#x}")
        }
        (Some(Status::Trapped(t)), Some(pc)) => {
            format!("{status}, {:?} at pc {pc:#x}", t.cause)
        }
        _ => format!(
            "{status}, {} violating vectors, {} untrusted gates",
            report.summary.violations, report.summary.untrusted_gates
        ),
    }
}

fn cmd_demo(name: &str) -> CmdResult {
    let demo: Demo = name.parse().map_err(usage)?;
    let outcome = run_demo(demo);
    let (left, right) = match demo {
        Demo::Trojan => ("untainted", "trigger tainted"),
        _ => ("without IFT", "with IFT"),
    };
    println!("{demo}");
    println!("  {left:<16}{}", describe(&outcome.baseline));
    println!("  {right:<16}{}", describe(&outcome.protected));
    println!("verdict: {}", outcome.verdict);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Asm {
            input,
            output,
            listing,
            symbols,
        } => cmd_asm(&input, output, listing, symbols),
        Command::Run {
            image,
            ift,
            policy,
            stdin_script,
            max_steps,
            trace,
            output,
            mem_size,
        } => cmd_run(
            &image,
            ift,
            policy,
            stdin_script,
            max_steps,
            trace,
            output,
            mem_size,
        ),
        Command::Glift {
            bench,
            taint,
            outputs,
            vectors,
            policy,
            output,
        } => cmd_glift(&bench, &taint, &outputs, &vectors, policy, output),
        Command::Demo { name } => cmd_demo(&name),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
