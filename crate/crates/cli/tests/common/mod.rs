//! Synthetic descriptor data shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hmdim_core::rng::seeded;
use rand::seq::SliceRandom;
use rand::Rng;

/// Class sizes of the 494-row proxy: 5/10/67/18 %.
pub const PROXY_COUNTS: [usize; 4] = [25, 49, 334, 86];

pub const HEADER: &str = "id,organic_formula,inorganic_formula,num_cation_rings,ring_c_count,ring_non_c_count,\
longest_alkyl_chain,num_alkyl_chains,water_present,terminal_nitrogens,longest_chain_c_count,num_same_cations,dimensionality";

const INORGANIC: [&str; 6] = ["PbI4", "PbBr4", "SnI4", "PbI6", "BiI5", "PbCl4"];

fn formula(parts: &[(&str, u32)]) -> String {
    parts
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(s, n)| if *n == 1 { s.to_string() } else { format!("{s}{n}") })
        .collect()
}

/// Descriptor CSV text with the given class sizes.
///
/// Class 0 rows sit on the diagonal `terminal_nitrogens = longest_chain_c_count + 1`
/// and no other row does, so class 0 is a single band of the
/// `terminal_n_per_chain` ratio but scattered over many cells of the raw
/// (terminal N, chain length) grid. Class 1 has more rings, class 3 more
/// water and repeated cations; everything else is shared noise.
pub fn descriptor_csv(counts: [usize; 4], seed: u64) -> String {
    let mut rng = seeded(seed);
    let mut rows = Vec::new();
    for (class, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            let chain_c: u32 = rng.gen_range(0..=15);
            let terminal = if class == 0 {
                chain_c + 1
            } else {
                loop {
                    let t = rng.gen_range(0..=16);
                    if t != chain_c + 1 {
                        break t;
                    }
                }
            };
            let longest = chain_c + rng.gen_range(0..=2);
            let rings: u32 = if class == 1 { rng.gen_range(2..=3) } else { rng.gen_range(0..=1) };
            let (ring_c, ring_n) = if rings > 0 { (4 * rings + rng.gen_range(0..=2), rng.gen_range(0..=rings)) } else { (0, 0) };
            let chains: u32 = rng.gen_range(0..=3);
            let water = rng.gen_bool(if class == 3 { 0.8 } else { 0.2 });
            let same: u32 = if class == 3 { rng.gen_range(2..=4) } else { rng.gen_range(1..=2) };
            let carbons = chain_c + ring_c + 1;
            let nitrogens = terminal + ring_n;
            let organic = formula(&[("C", carbons), ("H", 2 * carbons + nitrogens + 2), ("N", nitrogens)]);
            let inorganic = INORGANIC[rng.gen_range(0..INORGANIC.len())];
            rows.push(format!(
                "{organic},{inorganic},{rings},{ring_c},{ring_n},{longest},{chains},{water},{terminal},{chain_c},{same},{class}D"
            ));
        }
    }
    rows.shuffle(&mut rng);
    let mut out = String::from(HEADER);
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(out, "hmh-{i:04},{r}");
    }
    out
}

pub fn write_descriptor_csv(dir: &Path, counts: [usize; 4], seed: u64) -> PathBuf {
    let path = dir.join("descriptors.csv");
    std::fs::write(&path, descriptor_csv(counts, seed)).unwrap();
    path
}

pub fn hmdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmdim"))
        .args(args)
        .env_remove("HMDIM_SEEDS")
        .env_remove("HMDIM_THREADS")
        .output()
        .expect("run hmdim")
}

pub fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
