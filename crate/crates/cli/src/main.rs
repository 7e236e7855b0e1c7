use clap::Parser;
use sqfree_cli::{run, RunConfig, EXIT_ERROR, EXIT_OK};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

fn main() {
    let cfg = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let cfg = match &cfg.global.config {
        None => cfg,
        Some(path) => {
            let loaded = std::fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<RunConfig>(&t).map_err(|e| e.to_string()));
            match loaded {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: cannot load {}: {e}", path.display());
                    std::process::exit(EXIT_ERROR);
                }
            }
        }
    };
    if cfg.global.dump_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return;
    }
    if let Some(t) = cfg.global.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    let cancel = Arc::new(AtomicBool::new(false));
    let flag = cancel.clone();
    let _ = ctrlc::set_handler(move || {
        eprintln!("interrupted; finishing the current step");
        flag.store(true, Ordering::SeqCst);
    });
    if let Some(secs) = cfg.global.time_limit {
        let flag = cancel.clone();
        std::thread::spawn(move || {
            std::thread::sleep(Duration::from_secs_f64(secs.max(0.0)));
            flag.store(true, Ordering::SeqCst);
        });
    }
    std::process::exit(run(&cfg, &cancel));
}
