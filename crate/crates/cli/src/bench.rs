//! `bench`: run a standard example and write the JSON report plus one
//! history CSV per method run.

use std::fs;

use anyhow::{anyhow, Context, Result};
use sylkrylov::bench::{run_benchmark, BenchParams, ExampleId, Method, Scale};

use crate::io::write_history;
use crate::{BenchArgs, EXIT_INPUT, EXIT_OK};

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| anyhow!("invalid {what} '{t}': {e}"))
        })
        .collect()
}

fn execute(args: BenchArgs) -> Result<()> {
    let example: ExampleId = args.example.parse().map_err(|e: String| anyhow!(e))?;
    let scale: Scale = args.scale.parse().map_err(|e: String| anyhow!(e))?;
    let methods = match args.methods.as_deref() {
        None => example.default_methods(),
        Some("all") => Method::family(example.is_symmetric()).to_vec(),
        Some(list) => parse_list::<Method>(list, "method")?,
    };
    let defaults = BenchParams::default();
    let params = BenchParams {
        s: args.s.unwrap_or(defaults.s),
        seed: args.seed.unwrap_or(defaults.seed),
        eps_t: match &args.eps_trunc {
            Some(list) => parse_list::<f64>(list, "truncation threshold")?,
            None => defaults.eps_t.clone(),
        },
        tol: args.tol,
        grid: args.grid,
        max_iter: args.max_iter,
        parallel_methods: args.parallel_methods,
        ..defaults
    };
    let report = run_benchmark(example, scale, &methods, &params)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let stem = format!("{}_{}", example, args.scale);
    let json = args.out.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", json.display()))?;
    for r in &report.records {
        write_history(
            &r.history,
            &args.out.join(format!("{stem}_{}.csv", r.label())),
        )?;
        let eps = r.eps_t.map(|e| format!(" eps_T={e:e}")).unwrap_or_default();
        match (&r.status, &r.error) {
            (Some(status), _) => println!(
                "{}{eps}: {status:?}, {} iterations, {:.3} s, true residual {:e}, rank {}",
                r.method,
                r.iterations,
                r.total_s,
                r.final_true_residual.unwrap_or(f64::NAN),
                r.final_rank.map_or("-".to_string(), |k| k.to_string()),
            ),
            (None, err) => println!(
                "{}{eps}: failed: {}",
                r.method,
                err.as_deref().unwrap_or("unknown error")
            ),
        }
    }
    println!("report written to {}", json.display());
    Ok(())
}

pub(crate) fn cmd_bench(args: BenchArgs) -> i32 {
    match execute(args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_INPUT
        }
    }
}
