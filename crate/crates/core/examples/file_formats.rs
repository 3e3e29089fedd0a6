// Relevance maps, ROI files, prediction tables and checkpoints on disk.
//
// ```bash
// cargo run -p saliency-fairness --example file_formats
// ```

use std::fs;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saliency_fairness::io::{self, RoiFile};
use saliency_fairness::nn::{self, NetBuilder, Shape};
use saliency_fairness::{RelevanceMap, Result, Roi, SampleRow, SampleTable};

pub fn run_example() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("salfair-formats-{}", std::process::id()));
    fs::create_dir_all(&dir)?;

    let map = RelevanceMap::from_rows(&[[0.5, -0.25, 0.0], [1.0, 0.125, -2.0]])?;
    let bytes = io::encode_map(&map);
    println!("map {}x{} encodes to {} bytes, magic {}", map.height(), map.width(), bytes.len(), String::from_utf8_lossy(&bytes[..6]));
    io::write_map(&map, dir.join("m0.sfmap"))?;
    assert_eq!(io::read_map(dir.join("m0.sfmap"))?, map);
    println!("truncated map: {}", io::decode_map(&bytes[..bytes.len() - 1]).unwrap_err());

    let mut rois = RoiFile::new(Roi::new(0, 0, 1, 2));
    rois.overrides.insert("m1".into(), Roi::new(1, 1, 1, 2));
    io::write_roi_file(&rois, dir.join("roi.json"))?;
    println!("roi.json: {}", fs::read_to_string(dir.join("roi.json"))?.trim());
    println!("m0 uses {}, m1 uses {}", rois.roi_for("m0"), rois.roi_for("m1"));

    let table = SampleTable::new(vec![
        SampleRow { id: "a".into(), y_true: 1, y_pred: 1, pa: 0, score: 0.8123456789 },
        SampleRow { id: "b".into(), y_true: 0, y_pred: 0, pa: 1, score: 0.1 },
    ])?;
    let mut csv = Vec::new();
    io::write_table_to(&table, &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    let back = io::read_table_from(csv.as_slice())?;
    println!("score after round trip {}", back.rows()[0].score);

    let net = NetBuilder::new(Shape::Flat { len: 4 })
        .dense(3)
        .relu()
        .dense(2)
        .build_random(&mut ChaCha8Rng::seed_from_u64(0))?;
    let mut ckpt = Vec::new();
    nn::write_checkpoint(&net, &mut ckpt)?;
    let restored = nn::read_checkpoint(ckpt.as_slice())?;
    println!("checkpoint {} bytes, {} parameters restored", ckpt.len(), restored.num_params());

    fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
