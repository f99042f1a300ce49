//! Runs the vision → vision+pdfm → vision+pdfm+SAFE ladder on synthetic cities.
//!
//! `cargo run --release --example ladder -- [noise_std] [seeds]`

use walkclip::config::{AblationRow, RunConfig};
use walkclip::datamodel::{synthesize_dataset, Dims, SynthConfig};
use walkclip::pipeline::run;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let noise: f64 = args.get(1).map_or(Ok(1.0), |s| s.parse())?;
    let seeds: u64 = args.get(2).map_or(Ok(5), |s| s.parse())?;
    for seed in 0..seeds {
        let ds = synthesize_dataset(&SynthConfig {
            n_locations: 2000,
            dims: Dims::new(16, 16, 16),
            noise_std: noise,
            seed,
            ..Default::default()
        })?;
        let mut cfg = RunConfig {
            seed,
            use_grid: false,
            ablation: vec![
                AblationRow::new("vision", true, true, false, false),
                AblationRow::new("vision+pdfm", true, true, true, false),
                AblationRow::new("vision+pdfm+safe", true, true, true, true),
            ],
            ..Default::default()
        };
        cfg.train.hidden_layers = vec![32, 16];
        let t = std::time::Instant::now();
        let report = run(&cfg, &ds)?;
        let line: Vec<String> = report
            .rows
            .iter()
            .map(|r| {
                format!(
                    "{}: r2={:.3} swd={:.3}",
                    r.row.name,
                    r.test.r2.unwrap_or(f64::NAN),
                    r.test.swd
                )
            })
            .collect();
        println!(
            "seed {seed} ({:.1}s) {}",
            t.elapsed().as_secs_f64(),
            line.join(" | ")
        );
    }
    Ok(())
}
