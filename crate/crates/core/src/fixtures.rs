//! Bundled datasets and synthetic data used by tests, benches and the CLI.

use rand::Rng as _;

use crate::dataset::{read_csv, AttributeSpec, Cell, Dataset, Schema};
use crate::mvn::DiagonalGaussian;
use crate::rng;

pub const IRIS_CSV: &str = include_str!("../data/iris.csv");
pub const IRIS_SCHEMA: &str = include_str!("../data/iris.schema.json");
pub const WINE_CSV: &str = include_str!("../data/wine.csv");
pub const WINE_SCHEMA: &str = include_str!("../data/wine.schema.json");
pub const WDBC_CSV: &str = include_str!("../data/wdbc.csv");
pub const WDBC_SCHEMA: &str = include_str!("../data/wdbc.schema.json");

fn bundled(csv: &str, schema: &str) -> Dataset {
    let schema: Schema = serde_json::from_str(schema).expect("bundled schema is valid");
    read_csv(csv.as_bytes(), &schema).expect("bundled csv is valid")
}

/// Fisher's iris data: 150 rows, 4 numeric attributes, 3 classes.
pub fn iris() -> Dataset {
    bundled(IRIS_CSV, IRIS_SCHEMA)
}

/// UCI wine recognition data: 178 rows, 13 numeric attributes, 3 classes.
pub fn wine() -> Dataset {
    bundled(WINE_CSV, WINE_SCHEMA)
}

/// UCI breast cancer Wisconsin (diagnostic): 569 rows, 30 numeric
/// attributes, 2 classes.
pub fn wdbc() -> Dataset {
    bundled(WDBC_CSV, WDBC_SCHEMA)
}

/// Three unit-variance Gaussian groups of 500 points centered at
/// (-5,-5), (0,0) and (5,5), labelled red, blue and green.
pub fn grid(seed: u64) -> Dataset {
    let schema = Schema::new(vec![
        AttributeSpec::numeric("a1"),
        AttributeSpec::numeric("a2"),
        AttributeSpec::class("class", ["red", "blue", "green"]),
    ])
    .expect("valid schema");
    let mut rows = Vec::with_capacity(1500);
    for (c, center) in [-5.0, 0.0, 5.0].into_iter().enumerate() {
        let g = DiagonalGaussian::new(vec![center, center], vec![1.0, 1.0]);
        for x in g.sample(500, &mut rng::stream(seed, c as u64)) {
            rows.push(vec![Cell::Numeric(x[0]), Cell::Numeric(x[1]), Cell::Category(c)]);
        }
    }
    Dataset::new(schema, rows).expect("valid rows")
}

/// Mixed numeric and nominal attributes with about 5% missing cells,
/// 100 rows per class.
pub fn mixed(seed: u64) -> Dataset {
    let schema = Schema::new(vec![
        AttributeSpec::numeric("size"),
        AttributeSpec::nominal("color", ["red", "green", "blue"]),
        AttributeSpec::numeric("noise"),
        AttributeSpec::nominal("flag", ["no", "yes"]),
        AttributeSpec::class("kind", ["k0", "k1", "k2"]),
    ])
    .expect("valid schema");
    let mut rng = rng::stream(seed, 0);
    let mut rows = Vec::with_capacity(300);
    for i in 0..300 {
        let c = i % 3;
        let size = 4.0 * c as f64 + DiagonalGaussian::new(vec![0.0], vec![1.0]).sample(1, &mut rng)[0][0];
        let color = if rng.random::<f64>() < 0.8 { c } else { rng.random_range(0..3) };
        let noise = rng.random::<f64>() * 10.0;
        let flag = rng.random_range(0..2);
        let mut row = vec![Cell::Numeric(size), Cell::Category(color), Cell::Numeric(noise), Cell::Category(flag), Cell::Category(c)];
        for j in [1, 2] {
            if rng.random::<f64>() < 0.05 {
                row[j] = Cell::Missing;
            }
        }
        rows.push(row);
    }
    Dataset::new(schema, rows).expect("valid rows")
}

/// Two parallel rows of points, one per class, much closer to each other
/// than neighbours within a row are, plus one far anchor per class. Every
/// instance ends up alone in its DDA unit, yet a single threshold on `y`
/// separates the classes.
pub fn single_instance_kernels() -> Dataset {
    let schema = Schema::new(vec![AttributeSpec::numeric("x"), AttributeSpec::numeric("y"), AttributeSpec::class("side", ["low", "high"])])
        .expect("valid schema");
    let per_row = 41;
    let mut rows = Vec::with_capacity(2 * per_row + 2);
    for i in 0..per_row {
        let x = i as f64 / (per_row - 1) as f64;
        rows.push(vec![Cell::Numeric(x), Cell::Numeric(0.495), Cell::Category(0)]);
        rows.push(vec![Cell::Numeric(x), Cell::Numeric(0.505), Cell::Category(1)]);
    }
    rows.push(vec![Cell::Numeric(0.5), Cell::Numeric(0.0), Cell::Category(0)]);
    rows.push(vec![Cell::Numeric(0.5), Cell::Numeric(1.0), Cell::Category(1)]);
    Dataset::new(schema, rows).expect("valid rows")
}

/// Every bundled and synthetic fixture with its name.
pub fn all() -> Vec<(&'static str, Dataset)> {
    vec![
        ("iris", iris()),
        ("wine", wine()),
        ("wdbc", wdbc()),
        ("grid", grid(1)),
        ("mixed", mixed(1)),
        ("single_instance_kernels", single_instance_kernels()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sizes() {
        assert_eq!(iris().len(), 150);
        assert_eq!(wine().len(), 178);
        assert_eq!(wdbc().len(), 569);
        assert_eq!(grid(0).class_counts(), vec![500, 500, 500]);
        assert!(mixed(0).has_missing());
    }
}
