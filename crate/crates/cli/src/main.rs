use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use modcalc_core::blowup::{run_all, EngineOptions, FlagPolicy, Rounds};
use modcalc_core::diag::{check_presentation, diagonalize, structural_matrix};
use modcalc_core::graph::{enumerate_graphs, to_notation};
use modcalc_core::report::{
    diag_json, forest_dot, forest_json, parse_graph, report_json, verify, vocab_json, ALL_KINDS,
};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "modcalc", about = "Vocabularies, blowup simulation and diagonalization for genus-2 dual graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Engine {
    #[arg(long, default_value = "ABCD", value_parser = parse_rounds)]
    rounds: Rounds,
    /// all, none, or a list such as chi=1,hyper=0
    #[arg(long, default_value = "all", value_parser = parse_flags)]
    flags: FlagPolicy,
    #[arg(long)]
    budget: Option<u32>,
    /// Abort on order regressions instead of recording them.
    #[arg(long)]
    strict: bool,
}

impl Engine {
    fn options(&self) -> EngineOptions {
        EngineOptions { rounds: self.rounds, flags: self.flags, budget: self.budget, strict: self.strict }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// List every graph of total weight exactly d.
    Enumerate {
        #[arg(long, alias = "d-max")]
        d: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the reduced, signed and derived vocabularies of a graph.
    Vocab {
        graph: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the blowup rounds on one graph.
    Simulate {
        graph: String,
        #[command(flatten)]
        engine: Engine,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Exhaustive check over all graphs up to the given weight.
    Verify {
        #[arg(long = "d-max")]
        d_max: u32,
        #[command(flatten)]
        engine: Engine,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diagonalize the terminal states of a graph, or one of them by id.
    Diagonalize {
        graph: String,
        #[arg(long)]
        state: Option<String>,
        #[arg(long)]
        n: Option<u32>,
        #[command(flatten)]
        engine: Engine,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the branching forest of a graph as DOT.
    Render {
        input: String,
        #[command(flatten)]
        engine: Engine,
        #[arg(long)]
        dot: PathBuf,
    },
}

fn parse_rounds(s: &str) -> Result<Rounds, String> {
    Rounds::parse(s).ok_or_else(|| format!("unknown rounds '{s}', expected A, AB, ABC or ABCD"))
}

fn parse_flags(s: &str) -> Result<FlagPolicy, String> {
    match s {
        "all" => Ok(FlagPolicy::All),
        "none" => Ok(FlagPolicy::None),
        list => {
            let (mut chi, mut hyperelliptic) = (None, None);
            for item in list.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                let (k, v) = item.split_once('=').ok_or_else(|| format!("expected key=value, got '{item}'"))?;
                let v = match v {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    _ => return Err(format!("flag value must be 0 or 1, got '{v}'")),
                };
                match k {
                    "chi" => chi = Some(v),
                    "hyper" | "hyperelliptic" => hyperelliptic = Some(v),
                    _ => return Err(format!("unknown flag '{k}'")),
                }
            }
            Ok(FlagPolicy::Explicit { chi, hyperelliptic })
        }
    }
}

fn emit(value: &Value, out: &Option<PathBuf>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match out {
        Some(p) => std::fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Enumerate { d, out } => {
            let gs: Vec<String> = enumerate_graphs(d, d).iter().map(to_notation).collect();
            match out {
                Some(p) => std::fs::write(p, serde_json::to_string_pretty(&gs)? + "\n")?,
                None => gs.iter().for_each(|g| println!("{g}")),
            }
            Ok(true)
        }
        Cmd::Vocab { graph, out } => {
            let g = parse_graph(&graph)?;
            emit(&vocab_json(&g)?, &out)?;
            Ok(true)
        }
        Cmd::Simulate { graph, engine, out, dot } => {
            let g = parse_graph(&graph)?;
            let f = run_all(&g, &engine.options())?;
            if let Some(p) = dot {
                std::fs::write(p, forest_dot(&f))?;
            }
            emit(&forest_json(&f), &out)?;
            Ok(true)
        }
        Cmd::Verify { d_max, engine, out } => {
            let r = verify(d_max, &engine.options())?;
            println!("graphs checked: {}", r.graphs.len());
            println!("{:<22} {:>10} {:>22}", "check", "violations", "excl. interior-zero");
            for k in ALL_KINDS {
                let name = k.name();
                println!("{:<22} {:>10} {:>22}", name, r.totals[name], r.totals_excluding_interior_zero[name]);
            }
            if let Some(p) = out {
                std::fs::write(p, report_json(&r))?;
            }
            Ok(r.is_clean())
        }
        Cmd::Diagonalize { graph, state, n, engine, out } => {
            let g = parse_graph(&graph)?;
            let f = run_all(&g, &engine.options())?;
            let d = g.total_weight();
            let mut all_ok = true;
            let mut reports = Vec::new();
            for st in f.terminals.iter().filter(|s| state.as_ref().map_or(true, |id| &s.id == id)) {
                let m = structural_matrix(&st.point)?;
                let r = diagonalize(&m);
                all_ok &= r.success && check_presentation(&r);
                reports.push(diag_json(st, &r, n, d));
            }
            if let Some(id) = &state {
                if reports.is_empty() {
                    return Err(format!("no terminal state with id {id}").into());
                }
            }
            emit(&json!(reports), &out)?;
            Ok(all_ok)
        }
        Cmd::Render { input, engine, dot } => {
            let g = parse_graph(&input)?;
            let f = run_all(&g, &engine.options())?;
            std::fs::write(dot, forest_dot(&f))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
