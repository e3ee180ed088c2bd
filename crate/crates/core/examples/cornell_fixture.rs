//! Writes the small synthetic Cornell-format dataset used by the tests:
//! 20 table-top scenes of 7 block-shaped objects, 115 positive and 66
//! negative rectangles (the full set's 5110/2909 ratio), scattered missing
//! depth, and one rectangle group poisoned with NaN.
//!
//!     cargo run -p openarms-core --example cornell_fixture -- <out-dir>

use std::f64::consts::FRAC_PI_2;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use openarms::cornell::{write_manifest, write_scene, DepthImage, SceneRecord};
use openarms::grasp::GraspRectangle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: usize = 128;
const H: usize = 96;
const SCENES: usize = 20;
const OBJECTS: usize = 7;
const POSITIVE: usize = 115;
const NEGATIVE: usize = 66;

struct Object {
    length: f64,
    thickness: f64,
    height: f64,
}

fn render(obj: &Object, center: (f64, f64), angle: f64, rng: &mut ChaCha8Rng) -> DepthImage {
    let table = |u: f64, v: f64| 0.70 + 0.0002 * (u - 64.0) - 0.0001 * (v - 48.0);
    let body = GraspRectangle::new(center, angle, obj.length, obj.thickness);
    let mut d = DepthImage::filled(W, H, 0.0);
    for v in 0..H {
        for u in 0..W {
            let (x, y) = (u as f64, v as f64);
            let z = if body.contains((x, y)) { table(x, y) - obj.height } else { table(x, y) };
            d.set(u, v, (z * 1000.0).round() / 1000.0);
            if rng.random::<f64>() < 0.01 {
                d.invalidate(u, v);
            }
        }
    }
    d
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).expect("usage: cornell_fixture <out-dir>").into();
    let mut rng = ChaCha8Rng::seed_from_u64(2019);
    let objects: Vec<Object> = (0..OBJECTS)
        .map(|_| Object {
            length: rng.random_range(36.0..60.0),
            thickness: rng.random_range(12.0..22.0),
            height: rng.random_range(0.03..0.08),
        })
        .collect();

    let mut records = Vec::with_capacity(SCENES);
    for i in 0..SCENES {
        let obj_index = i % OBJECTS;
        let obj = &objects[obj_index];
        let center = (64.0 + rng.random_range(-12.0..12.0), 48.0 + rng.random_range(-8.0..8.0));
        let angle = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let (dx, dy) = (angle.cos(), angle.sin());
        let along = |t: f64| (center.0 + t * dx, center.1 + t * dy);

        let n_pos = POSITIVE / SCENES + usize::from(i < POSITIVE % SCENES);
        let n_neg = NEGATIVE / SCENES + usize::from(i < NEGATIVE % SCENES);
        let pos_rects = (0..n_pos)
            .map(|_| {
                let t = rng.random_range(-obj.length / 3.0..obj.length / 3.0);
                GraspRectangle::new(
                    along(t),
                    angle + FRAC_PI_2 + rng.random_range(-0.15..0.15),
                    obj.thickness + rng.random_range(8.0..14.0),
                    rng.random_range(8.0..12.0),
                )
            })
            .collect();
        let neg_rects = (0..n_neg)
            .map(|k| {
                if k % 2 == 0 {
                    let t = rng.random_range(-obj.length / 4.0..obj.length / 4.0);
                    GraspRectangle::new(along(t), angle + rng.random_range(-0.2..0.2), obj.thickness, 10.0)
                } else {
                    let t = obj.length / 2.0 + rng.random_range(8.0..16.0);
                    let t = if rng.random::<bool>() { t } else { -t };
                    GraspRectangle::new(along(t), angle + FRAC_PI_2, 20.0, 10.0)
                }
            })
            .collect();
        records.push(SceneRecord {
            id: format!("pcd{:04}", 100 + i),
            object_id: format!("object{obj_index}"),
            depth: render(obj, center, angle, &mut rng),
            pos_rects,
            neg_rects,
        });
    }

    for rec in &records {
        write_scene(&out, rec).expect("write scene");
    }
    write_manifest(&out, &records).expect("write manifest");
    let mut poisoned = OpenOptions::new()
        .append(true)
        .open(out.join("pcd0107cpos.txt"))
        .expect("open rectangle file");
    writeln!(poisoned, "NaN NaN\n61.000 40.000\n61.000 52.000\nNaN NaN").expect("append NaN group");
    println!("wrote {SCENES} scenes to {}", out.display());
}
