//! Regenerates `data/synthetic_2024.csv`.

use std::path::PathBuf;

use rdsnet_core::{fixture, save_dataset, Format};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/synthetic_2024.csv"));
    save_dataset(&fixture::synthetic_2024(), &path, Format::Csv).expect("write fixture");
    println!("wrote {}", path.display());
}
