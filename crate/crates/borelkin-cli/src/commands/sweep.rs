//! `sweep <dir>`: run every run-config in a directory, each into its own
//! output directory, concurrently.

use std::path::Path;

use anyhow::{bail, Context, Result};

use super::evolve;

pub fn run(dir: &Path) -> Result<i32> {
    let mut configs: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
        .collect();
    configs.sort();
    if configs.is_empty() {
        bail!("no .toml configs in {}", dir.display());
    }

    // Parse and validate everything up front so a bad config is a config
    // error for the whole sweep, not a mid-flight surprise.
    let built: Vec<_> = configs
        .iter()
        .map(|path| {
            evolve::load_config(path)
                .and_then(|c| c.build())
                .with_context(|| format!("in {}", path.display()))
        })
        .collect::<Result<_>>()?;

    let mut worst = 0;
    std::thread::scope(|scope| {
        let handles: Vec<_> = built
            .iter()
            .zip(&configs)
            .map(|(b, path)| {
                scope.spawn(move || (path.clone(), evolve::execute(b)))
            })
            .collect();
        for handle in handles {
            let (path, outcome) = handle.join().expect("sweep worker panicked");
            match outcome {
                Ok(code) => {
                    println!("{}: exit {code}", path.display());
                    worst = worst.max(code);
                }
                Err(err) => {
                    eprintln!("{}: {err:#}", path.display());
                    worst = worst.max(3);
                }
            }
        }
    });
    Ok(worst)
}
