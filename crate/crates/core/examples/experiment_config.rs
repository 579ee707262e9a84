//! A full run through the command-line entry point: simulate, train,
//! evaluate and write a manifest for a config built in code.

use nldm::cli::config::{ExperimentConfig, ModelConfig, SeriesConfig, SystemConfig};
use nldm::cli::main_with_args;

pub fn run_example() -> nldm::Result<()> {
    let out = std::env::temp_dir().join(format!("nldm-example-{}", std::process::id()));
    let entry = |ic: Vec<f64>| SeriesConfig::generated(ic, [0.0, 10.0], 1000).with_noise(0.1, None);
    let cfg = ExperimentConfig {
        name: Some("lho-from-code".into()),
        global_seed: 42,
        output_dir: out.clone(),
        divergence_threshold: 1e6,
        system: SystemConfig {
            id: nldm::SystemId::Lho,
            params: [("delta".to_string(), 1.0)].into(),
        },
        model: ModelConfig { delay: 2, degree: 1 },
        integrator: Default::default(),
        train: vec![entry(vec![2.0, 0.0]), entry(vec![-2.0, 0.0]), entry(vec![0.0, -2.0]), entry(vec![1.5, 1.5])],
        test: vec![entry(vec![0.0, 2.0])],
        basin: None,
    };
    let text = cfg.to_toml_string()?;
    println!("config:\n{text}");

    std::fs::create_dir_all(&out).map_err(|e| nldm::Error::Io { context: "creating output".into(), source: e })?;
    let path = out.join("config.toml");
    std::fs::write(&path, &text).map_err(|e| nldm::Error::Io { context: "writing config".into(), source: e })?;
    let code = main_with_args(["nldm", "run", "--config", path.to_str().unwrap_or_default()]);
    println!("exit code {code}");

    let mut files: Vec<_> = walk(&out);
    files.sort();
    for f in &files {
        println!("  {}", f.strip_prefix(&out).unwrap_or(f).display());
    }
    let metrics = std::fs::read_to_string(out.join("test_metrics.json")).unwrap_or_default();
    println!("test metrics:\n{metrics}");
    let _ = std::fs::remove_dir_all(&out);
    if code == 0 {
        Ok(())
    } else {
        Err(nldm::Error::Numerical(format!("run exited with {code}")))
    }
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let p = entry.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[allow(dead_code)]
fn main() -> nldm::Result<()> {
    run_example()
}
