//! `params-check`: validate iteration parameters and print the derived
//! constant ledger.

use std::path::Path;

use nmh_core::hypotheses::{render_violations, DerivedConstants};

use crate::config::{self, ParamsCheckConfig};

pub fn exec(config_path: &Path) -> u8 {
    let cfg: ParamsCheckConfig = match config::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    let violations = cfg.params.validate();
    if !violations.is_empty() {
        println!("violations:\n{}", render_violations(&violations));
        return 1;
    }
    println!("violations: none");
    let tame = cfg.tame.unwrap_or_else(config::default_tame);
    match DerivedConstants::derive(&cfg.params, &tame) {
        Ok(derived) => {
            println!("gamma = {}", derived.gamma);
            match serde_json::to_string_pretty(&derived) {
                Ok(text) => {
                    println!("derived constants:\n{text}");
                    0
                }
                Err(e) => {
                    eprintln!("serialization error: {e}");
                    2
                }
            }
        }
        Err(e) => {
            // parameters passed validation, so this is a table problem
            eprintln!("cannot derive constants: {e}");
            2
        }
    }
}
