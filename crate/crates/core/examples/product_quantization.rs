//! Compress a 64-dimensional table with product quantization at several
//! sub-quantizer counts and report size, reconstruction error and how many
//! exact nearest neighbors survive decoding.
//!
//! ```text
//! cargo run --release --example product_quantization
//! ```

use rand::Rng;

use hin_embed::quantize::{compression_report, decode, encode, knn_retention, train_codebook_with, PqTrainConfig};
use hin_embed::rng::rng_for;
use hin_embed::vecmath::Matrix;

fn main() -> hin_embed::Result<()> {
    let mut rng = rng_for(11, &[]);
    let (rows, dim) = (4000, 64);
    let centers: Vec<Vec<f32>> = (0..32).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let c = &centers[rng.gen_range(0..centers.len())];
        data.extend(c.iter().map(|x| x + rng.gen_range(-0.2..0.2)));
    }
    let table = Matrix::from_vec(rows, dim, data);
    let queries = table.select_rows(&(0..100).collect::<Vec<_>>());

    println!("{:>3} {:>7} {:>10} {:>9} {:>9}", "M", "factor", "amortized", "mse", "recall@10");
    for m in [32, 16, 8] {
        let cb = train_codebook_with(&table, &PqTrainConfig::new(m, 11))?;
        let codes = encode(&table, &cb)?;
        let decoded = decode(&codes, &cb)?;
        let report = compression_report(&table, &cb)?;
        let recall = knn_retention(&table, &decoded, &queries, 10)?;
        println!("{m:>3} {:>6.0}x {:>9.1}x {:>9.5} {recall:>9.3}", report.factor, report.amortized_factor, report.mse);
    }
    Ok(())
}
