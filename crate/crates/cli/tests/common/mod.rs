#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use morphkit::longitudinal::{Gender, Quad};
use morphkit::volume::gaussian_smooth;
use morphkit::{Group, MorphTable, SubjectRecord, Volume3D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn morphkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphkit")).args(args).env_remove("MORPHKIT_SEED").output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// 26 CDR0 and 18 CDR0.5 subjects; CDR0.5 hippocampi are smaller, shrink
/// faster and sit farther from the template.
pub fn synthetic_table(seed: u64) -> MorphTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut records = Vec::new();
    for i in 0..44 {
        let group = if i < 26 { Group::Cdr0 } else { Group::Cdr05 };
        let sick = group == Group::Cdr05;
        let t = 1.5 + rng.random::<f64>();
        let mut hv = [0.0; 4];
        let mut d = [0.0; 4];
        for side in 0..2 {
            let base = if sick { 1750.0 } else { 2000.0 } + 150.0 * noise.sample(&mut rng);
            let rate = if sick { 0.035 } else { 0.015 } + 0.005 * noise.sample(&mut rng);
            hv[2 * side] = base;
            hv[2 * side + 1] = base * (1.0 - rate * t) + 10.0 * noise.sample(&mut rng);
            let db: f64 = if sick { 2.4 } else { 2.0 } + 0.3 * noise.sample(&mut rng);
            d[2 * side] = db.max(0.5);
            d[2 * side + 1] = (db * (1.0 + if sick { 0.08 } else { 0.03 } * t) + 0.05 * noise.sample(&mut rng)).max(0.5);
        }
        let bv = 1.1e6 + 5e4 * noise.sample(&mut rng);
        let icv = 1.5e6 + 8e4 * noise.sample(&mut rng);
        records.push(SubjectRecord {
            subject_id: format!("s{i:02}"),
            group,
            gender: if rng.random::<bool>() { Gender::F } else { Gender::M },
            age_years: 75.0 + 6.0 * noise.sample(&mut rng),
            education_years: (14.0 + 3.0 * noise.sample(&mut rng)).round(),
            scan_interval_years: t,
            brain_volume: (bv, bv * 0.99),
            icv: (icv, icv),
            hippo_volume: Quad(hv),
            metric_distance: Quad(d),
        });
    }
    MorphTable { records, rejected: Vec::new() }
}

pub fn write_table(table: &MorphTable, path: &Path) {
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}

pub fn ball(n: usize, centre: [f64; 3], radius: f64) -> Volume3D {
    let v = Volume3D::from_fn([n, n, n], [1.0; 3], |x, y, z| {
        let d2 = (x as f64 - centre[0]).powi(2) + (y as f64 - centre[1]).powi(2) + (z as f64 - centre[2]).powi(2);
        (d2 <= radius * radius) as u8 as f32
    })
    .unwrap();
    gaussian_smooth(&v, 5, 1.0).unwrap()
}

pub fn save(v: &Volume3D, dir: &Path, name: &str) -> PathBuf {
    let p = dir.join(name);
    v.save(&p).unwrap();
    p
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}
