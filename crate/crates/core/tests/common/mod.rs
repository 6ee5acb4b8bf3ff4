#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use omnivqa::media_io::{write_yuv_file, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TRACE_HEADER: &str = "subject_id,sequence_id,sample_index,longitude_deg,latitude_deg\n";

pub fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Frame {
    let luma = (0..w * h).map(|_| rng.gen()).collect();
    let u = (0..w * h / 4).map(|_| rng.gen()).collect();
    let v = (0..w * h / 4).map(|_| rng.gen()).collect();
    Frame::new(w, h, luma, u, v).unwrap()
}

/// Dark ERP frame with a bright square at the front center and dimmer boxes elsewhere.
pub fn dot_scene(w: usize, h: usize) -> Frame {
    let mut luma = vec![40u8; w * h];
    let mut paint = |lon: f64, lat: f64, half_deg: f64, value: u8| {
        let cx = (w - 1) as f64 * (0.5 - lon / 360.0);
        let cy = (h - 1) as f64 * (0.5 - lat / 180.0);
        let rx = half_deg * (w - 1) as f64 / 360.0;
        let ry = half_deg * (h - 1) as f64 / 180.0;
        for y in 0..h {
            for x in 0..w {
                if (x as f64 - cx).abs() <= rx && (y as f64 - cy).abs() <= ry {
                    luma[y * w + x] = value;
                }
            }
        }
    };
    paint(0.0, 0.0, 1.5, 255);
    for &(lon, lat) in &[(24.0, 14.0), (-26.0, -12.0), (30.0, -20.0), (-22.0, 22.0), (90.0, 0.0), (-120.0, 30.0)] {
        paint(lon, lat, 3.0, 95);
    }
    Frame::from_luma(w, h, luma).unwrap()
}

pub fn write_frames(path: &Path, frames: &[Frame]) {
    write_yuv_file(path, frames).unwrap();
}

pub fn trace_text(sample_rate: f64, rows: &[(&str, &str, u64, f64, f64)]) -> String {
    let mut out = format!("# sample_rate={sample_rate}\n{TRACE_HEADER}");
    for (s, q, k, lon, lat) in rows {
        writeln!(out, "{s},{q},{k},{lon},{lat}").unwrap();
    }
    out
}

/// Subjects that start away from the front center and settle on it.
pub fn converging_traces(sequence: &str, frames: usize) -> String {
    let starts = [
        (20.0, 0.0),
        (-20.0, 0.0),
        (0.0, 18.0),
        (0.0, -18.0),
        (14.0, 12.0),
        (-14.0, -12.0),
        (0.0, 0.0),
        (8.0, -6.0),
    ];
    let mut out = format!("# sample_rate=25\n{TRACE_HEADER}");
    for (i, (lon0, lat0)) in starts.iter().enumerate() {
        for k in 0..frames {
            let f = (1.0 - k as f64 / 3.0).max(0.0);
            writeln!(out, "s{i},{sequence},{k},{},{}", lon0 * f, lat0 * f).unwrap();
        }
    }
    out
}

/// Three subjects, one reference `R`, impaired `A`, `B`, `C`.
pub const TOY_SCORES: &str = "subject_id,sequence_id,raw_score
s1,R,90
s1,A,80
s1,B,60
s1,C,40
s2,R,90
s2,A,80
s2,B,70
s2,C,30
s3,R,80
s3,A,60
s3,B,70
s3,C,50
";

pub const TOY_REFERENCES: &str = "sequence_id,reference_id
A,R
B,R
C,R
";

/// s1 looks front only, s2 alternates front/left, s3 looks back only; 3 s at 10 Hz.
pub fn toy_traces() -> String {
    let mut out = format!("# sample_rate=10\n{TRACE_HEADER}");
    for seq in ["A", "B", "C"] {
        for k in 0..30 {
            writeln!(out, "s1,{seq},{k},0,0").unwrap();
            let lon = if k % 2 == 0 { 0 } else { 90 };
            writeln!(out, "s2,{seq},{k},{lon},0").unwrap();
            writeln!(out, "s3,{seq},{k},180,0").unwrap();
        }
    }
    out
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
