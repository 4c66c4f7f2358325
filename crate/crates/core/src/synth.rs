//! Seeded synthetic datasets shaped like common tabular benchmarks.
//!
//! They stand in for the public files in tests and demos: same column counts,
//! row counts and target types, with class-conditional Gaussian features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;

pub const BANKNOTE_ROWS: usize = 1372;
pub const GLASS_ROWS: usize = 214;
pub const WINE_ROWS: usize = 4898;

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").sample(rng)
}

/// Four numeric features, binary target with labels "0" (genuine) and "1" (forged).
pub fn banknote_like(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let forged = rng.gen_bool(0.445);
        let (variance, skewness) = if forged {
            (normal(&mut rng, -1.87, 1.88), normal(&mut rng, -0.99, 5.4))
        } else {
            (normal(&mut rng, 2.28, 2.02), normal(&mut rng, 4.26, 5.14))
        };
        let curtosis = if forged {
            normal(&mut rng, 2.15, 3.0) - 0.35 * (skewness + 0.99)
        } else {
            normal(&mut rng, 0.8, 2.5) - 0.25 * (skewness - 4.26)
        };
        let entropy = normal(&mut rng, if forged { -1.25 } else { -1.15 }, 2.1);
        rows.push(vec![variance, skewness, curtosis, entropy]);
        targets.push(if forged { "1" } else { "0" }.to_string());
    }
    Dataset::new(
        ["variance", "skewness", "curtosis", "entropy"].map(String::from).to_vec(),
        rows,
    )
    .with_targets("class", targets)
}

/// Nine oxide-style features, six classes labelled 1, 2, 3, 5, 6, 7.
pub fn glass_like(n: usize, seed: u64) -> Dataset {
    const LABELS: [&str; 6] = ["1", "2", "3", "5", "6", "7"];
    const WEIGHTS: [f64; 6] = [70.0, 76.0, 17.0, 13.0, 9.0, 29.0];
    const MEANS: [[f64; 9]; 6] = [
        [1.5187, 13.24, 3.55, 1.16, 72.62, 0.45, 8.80, 0.01, 0.06],
        [1.5186, 13.11, 3.00, 1.41, 72.60, 0.52, 9.07, 0.05, 0.08],
        [1.5180, 13.44, 3.54, 1.20, 72.40, 0.41, 8.78, 0.01, 0.06],
        [1.5189, 12.83, 0.77, 2.03, 72.37, 1.47, 10.12, 0.19, 0.06],
        [1.5175, 14.65, 1.31, 1.37, 73.21, 0.00, 9.36, 0.00, 0.00],
        [1.5171, 14.44, 0.54, 2.12, 72.97, 0.33, 8.49, 1.04, 0.01],
    ];
    const SD: [f64; 9] = [0.002, 0.6, 0.6, 0.35, 0.6, 0.3, 1.0, 0.3, 0.08];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = WEIGHTS.iter().sum();
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        // Every class appears at least once when n >= 6.
        let class = if i < LABELS.len().min(n) {
            i
        } else {
            let mut u = rng.gen_range(0.0..total);
            let mut c = 0;
            while u >= WEIGHTS[c] && c + 1 < WEIGHTS.len() {
                u -= WEIGHTS[c];
                c += 1;
            }
            c
        };
        let row: Vec<f64> = (0..9)
            .map(|j| {
                let v = normal(&mut rng, MEANS[class][j], SD[j]);
                if j == 0 { v } else { v.max(0.0) }
            })
            .collect();
        rows.push(row);
        targets.push(LABELS[class].to_string());
    }
    let cols = ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe"];
    Dataset::new(cols.map(String::from).to_vec(), rows).with_targets("type", targets)
}

/// Eleven physico-chemical features and a continuous quality score.
pub fn wine_like(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let z_alc = normal(&mut rng, 0.0, 1.0);
        let z_sugar = normal(&mut rng, 0.0, 1.0);
        let z_va = normal(&mut rng, 0.0, 1.0);
        let z_free = normal(&mut rng, 0.0, 1.0);
        let fixed_acidity = normal(&mut rng, 6.85, 0.84);
        let volatile_acidity = (0.278 + 0.1 * z_va).max(0.08);
        let citric_acid = normal(&mut rng, 0.334, 0.12).max(0.0);
        let residual_sugar = (6.39 + 5.07 * z_sugar).max(0.6);
        let chlorides = normal(&mut rng, 0.0458, 0.0218).max(0.009);
        let free_so2 = (35.3 + 17.0 * z_free).max(2.0);
        let total_so2 = (free_so2 + normal(&mut rng, 103.0, 35.0)).max(9.0);
        let density = 0.994 - 0.002 * z_alc + 0.0012 * z_sugar + normal(&mut rng, 0.0, 0.0008);
        let ph = normal(&mut rng, 3.19, 0.15);
        let sulphates = normal(&mut rng, 0.49, 0.11).max(0.22);
        let alcohol = (10.5 + 1.23 * z_alc).max(8.0);
        let quality = 5.88 + 0.45 * z_alc - 0.25 * z_va + 0.08 * z_sugar + 0.05 * z_free
            - 0.1 * (density - 0.994) / 0.003
            + normal(&mut rng, 0.0, 0.6);
        rows.push(vec![
            fixed_acidity,
            volatile_acidity,
            citric_acid,
            residual_sugar,
            chlorides,
            free_so2,
            total_so2,
            density,
            ph,
            sulphates,
            alcohol,
        ]);
        targets.push(quality.to_string());
    }
    let cols = [
        "fixed_acidity",
        "volatile_acidity",
        "citric_acid",
        "residual_sugar",
        "chlorides",
        "free_sulfur_dioxide",
        "total_sulfur_dioxide",
        "density",
        "pH",
        "sulphates",
        "alcohol",
    ];
    Dataset::new(cols.map(String::from).to_vec(), rows).with_targets("quality", targets)
}

/// Census-style binary data with two one-hot encoded categoricals.
pub fn adult_like(n: usize, seed: u64) -> Dataset {
    const COUNTRIES: [(&str, f64, f64); 4] = [
        ("United-States", 0.80, 0.0),
        ("Mexico", 0.08, -1.2),
        ("South", 0.04, -0.6),
        ("Other", 0.08, 0.1),
    ];
    const SEX: [(&str, f64, f64); 2] = [("Male", 0.66, 0.5), ("Female", 0.34, -0.5)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng, table: &[(&str, f64, f64)]| {
        let mut u: f64 = rng.gen();
        for (i, (_, p, _)) in table.iter().enumerate() {
            if u < *p {
                return i;
            }
            u -= p;
        }
        table.len() - 1
    };
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let age = normal(&mut rng, 38.0, 13.0).clamp(17.0, 90.0).round();
        let education = normal(&mut rng, 10.0, 2.5).clamp(1.0, 16.0).round();
        let hours = normal(&mut rng, 40.0, 12.0).clamp(1.0, 99.0).round();
        let capital_gain = if rng.gen_bool(0.08) { normal(&mut rng, 8000.0, 4000.0).max(100.0).round() } else { 0.0 };
        let c = pick(&mut rng, &COUNTRIES);
        let s = pick(&mut rng, &SEX);
        let logit = -9.0 + 0.04 * age + 0.45 * education + 0.03 * hours
            + capital_gain / 3000.0
            + COUNTRIES[c].2
            + SEX[s].2;
        let high = rng.gen::<f64>() < 1.0 / (1.0 + (-logit).exp());
        let mut row = vec![age, education, hours, capital_gain];
        row.extend((0..COUNTRIES.len()).map(|i| if i == c { 1.0 } else { 0.0 }));
        row.extend((0..SEX.len()).map(|i| if i == s { 1.0 } else { 0.0 }));
        rows.push(row);
        targets.push(if high { ">50K" } else { "<=50K" }.to_string());
    }
    let mut cols: Vec<String> = ["age", "education_num", "hours_per_week", "capital_gain"]
        .map(String::from)
        .to_vec();
    cols.extend(COUNTRIES.iter().map(|(v, _, _)| format!("native_country={v}")));
    cols.extend(SEX.iter().map(|(v, _, _)| format!("sex={v}")));
    Dataset::new(cols, rows).with_targets("income", targets)
}
