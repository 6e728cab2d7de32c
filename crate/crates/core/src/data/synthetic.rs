//! Generator for NSL-KDD-format records with class-dependent structure. Used
//! by tests and demos when the real files are not at hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::label::ClassLabel;
use super::nslkdd::{RawRecord, FEATURE_COUNT};

const PROTOCOLS: [&str; 3] = ["icmp", "tcp", "udp"];
const SERVICES: [&str; 6] = ["domain_u", "ecr_i", "ftp_data", "http", "private", "smtp"];
const FLAGS: [&str; 4] = ["REJ", "RSTO", "S0", "SF"];

fn attack_name(class: ClassLabel, k: usize) -> &'static str {
    let names: &[&str] = match class {
        ClassLabel::Normal => &["normal"],
        ClassLabel::DoS => &["neptune", "smurf", "back"],
        ClassLabel::Probe => &["satan", "ipsweep", "portsweep"],
        ClassLabel::U2R => &["buffer_overflow", "rootkit"],
        ClassLabel::R2L => &["guess_passwd", "warezclient"],
    };
    names[k % names.len()]
}

/// `counts[c]` records of each class. Continuous features are nonnegative
/// with class-shifted means, symbolic features have class-skewed categories.
pub fn synthetic_records(counts: [usize; ClassLabel::COUNT], seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(counts.iter().sum());
    for class in ClassLabel::ALL {
        let c = class.index();
        for k in 0..counts[c] {
            let mut features = Vec::with_capacity(FEATURE_COUNT);
            for j in 0..FEATURE_COUNT {
                let field = match j {
                    1 => pick(&mut rng, &PROTOCOLS, c),
                    2 => pick(&mut rng, &SERVICES, c),
                    3 => pick(&mut rng, &FLAGS, c),
                    _ => {
                        let centre = 1.0 + ((c * 7 + j * 3) % 5) as f64;
                        let v: f64 = centre + 0.6 * noise.sample(&mut rng);
                        format!("{:.3}", v.max(0.0))
                    }
                };
                features.push(field);
            }
            out.push(RawRecord {
                features,
                attack_name: attack_name(class, k).to_string(),
                difficulty: rng.random_range(1..=21),
            });
        }
    }
    out
}

fn pick(rng: &mut impl Rng, options: &[&str], class: usize) -> String {
    // favoured category with probability 0.7, otherwise uniform
    let idx = if rng.random::<f64>() < 0.7 {
        class % options.len()
    } else {
        rng.random_range(0..options.len())
    };
    options[idx].to_string()
}
