#![allow(dead_code)]

use std::path::{Path, PathBuf};

use transnets::commands::{prepare, synth, PrepareArgs, SynthArgs, TrainArgs};

/// Small synthetic corpus prepared into `root/data`.
pub fn synth_dataset(root: &Path, users: usize, items: usize, reviews: usize, seed: u64) -> PathBuf {
    let raw = root.join("synth.jsonl");
    synth(&SynthArgs {
        out: raw.clone(),
        users,
        items,
        reviews,
        filler: 4,
        seed,
    })
    .unwrap();
    let data = root.join("data");
    prepare(&PrepareArgs {
        input: raw,
        format: "jsonl".into(),
        out: data.clone(),
        seed,
        vocab_size: 2000,
    })
    .unwrap();
    data
}

/// Desk profile args for `data`, writing into `out`.
pub fn desk_args(data: &Path, out: &Path, model: &str, epochs: usize) -> TrainArgs {
    TrainArgs {
        desk: true,
        data: Some(data.to_path_buf()),
        out: Some(out.to_path_buf()),
        model: Some(model.into()),
        epochs: Some(epochs),
        ..TrainArgs::default()
    }
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn twenty_records() -> String {
    (0..20)
        .map(|i| {
            format!(
                "{{\"user_id\":\"u{}\",\"item_id\":\"i{}\",\"rating\":{},\"text\":\"review number {i} was fine\"}}\n",
                i % 7,
                i % 5,
                1 + i % 5
            )
        })
        .collect()
}
