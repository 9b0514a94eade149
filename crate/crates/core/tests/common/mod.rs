#![allow(dead_code)]

use std::path::{Path, PathBuf};

use auction_ddpg::data::PriceSeries;
use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// 50 + 20·sin(2πh/24) + N(0, noise²) hourly prices from 2017-01-01.
pub fn synthetic_series(days: usize, noise: f64, seed: u64) -> PriceSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
    let prices = (0..days * 24)
        .map(|t| {
            let h = (t % 24) as f64;
            let eps = if noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            50.0 + 20.0 * (2.0 * std::f64::consts::PI * h / 24.0).sin() + eps
        })
        .collect();
    PriceSeries::from_date(NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(), prices).unwrap()
}

/// Writes a price file in the exchange layout: `Date;Hour;PUN` with comma decimals.
pub fn write_exchange_csv(path: &Path, start: NaiveDate, prices: &[f64]) {
    let mut text = String::from("Date;Hour;PUN\n");
    for (t, p) in prices.iter().enumerate() {
        let day = start + chrono::Duration::days((t / 24) as i64);
        let price = format!("{p}").replace('.', ",");
        text.push_str(&format!("{};{};{}\n", day.format("%Y%m%d"), t % 24 + 1, price));
    }
    std::fs::write(path, text).unwrap();
}

/// A small, fast run: one-day episodes and narrow networks.
pub fn small_config(dir: &Path, data: &Path, episodes: usize) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        r#"[data]
path = "{}"

[split]
seed = 3

[ddpg]
episodes = {episodes}
episode_days = 1
hidden_size = 8
batch_size = 16
warmup_transitions = 32
seed = 11

[output]
dir = "{}"
checkpoint_every = 1
record_wall_time = false
"#,
        data.display(),
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub fn write_synthetic_csv(dir: &Path, days: usize) -> PathBuf {
    let series = synthetic_series(days, 3.0, 1);
    let path = dir.join("pun.csv");
    write_exchange_csv(&path, series.start().date(), series.prices());
    path
}
