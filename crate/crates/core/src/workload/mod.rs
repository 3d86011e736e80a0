//! Synthetic datasets, benchmark queries and query generators.

mod chain;
mod random;

pub use chain::{chain_query, chain_table, ChainBenchSpec};
pub use random::random_query;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::store::{Column, ColumnKind, ColumnTable, DimensionKind};

const ORD: ColumnKind = ColumnKind::Dimension(DimensionKind::Ordinal);

pub const LOCATIONS: [&str; 8] = ["US", "UK", "DE", "FR", "JP", "CN", "IN", "BR"];
pub const CATEGORIES: [&str; 5] = ["office", "furniture", "tech", "garden", "toys"];
const NAMED: [&str; 4] = ["chair", "table", "stapler", "printer"];

pub fn product_name(i: usize) -> String {
    NAMED
        .get(i)
        .map_or_else(|| format!("p{i:03}"), |s| s.to_string())
}

/// Retail relation: year, month, product, location, category, weight, sales, profit.
///
/// Rows cycle through product × location × year × month, so every combination
/// is present once `rows >= products * 8 * 10 * 12`; smaller tables still
/// cover product × location × year when `rows >= products * 80`.
pub fn sales_table(products: usize, rows: usize, seed: u64) -> ColumnTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trend: Vec<(f64, f64, f64)> = (0..products)
        .map(|_| {
            (
                rng.gen_range(50.0..500.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(0.1..0.5),
            )
        })
        .collect();
    let loc_bias: Vec<(f64, f64)> = (0..LOCATIONS.len())
        .map(|_| (rng.gen_range(0.5..1.5), rng.gen_range(-8.0..8.0)))
        .collect();
    let (
        mut year,
        mut month,
        mut product,
        mut location,
        mut category,
        mut weight,
        mut sales,
        mut profit,
    ) = (
        vec![],
        vec![],
        vec![],
        vec![],
        vec![],
        vec![],
        vec![],
        vec![],
    );
    for i in 0..rows {
        let p = i % products;
        let l = (i / products) % LOCATIONS.len();
        let y = (i / (products * LOCATIONS.len())) % 10;
        let m = (i / (products * LOCATIONS.len() * 10)) % 12;
        let (base, slope, margin) = trend[p];
        let (bias, drift) = loc_bias[l];
        let s = ((base + slope * y as f64) * bias + drift * y as f64).max(1.0)
            + rng.gen_range(0.0..25.0);
        year.push(2010.0 + y as f64);
        month.push(1.0 + m as f64);
        product.push(product_name(p));
        location.push(LOCATIONS[l]);
        category.push(CATEGORIES[p % CATEGORIES.len()]);
        weight.push(1.0 + (i * 7 % 20) as f64);
        sales.push(s.round());
        profit.push((s * (margin + rng.gen_range(-0.05..0.05))).round());
    }
    ColumnTable::new(
        "sales",
        vec![
            Column::numeric("year", ORD, year),
            Column::numeric("month", ORD, month),
            Column::categorical("product", product),
            Column::categorical("location", location),
            Column::categorical("category", category),
            Column::numeric("weight", ORD, weight),
            Column::numeric("sales", ColumnKind::Measure, sales),
            Column::numeric("profit", ColumnKind::Measure, profit),
        ],
    )
    .expect("generated relation is well formed")
}

pub const CARRIERS: [&str; 12] = [
    "AA", "AS", "B6", "DL", "EV", "F9", "HA", "MQ", "NK", "OO", "UA", "WN",
];

pub fn airport_name(i: usize) -> String {
    const A: &[u8] = b"ABCDEFGHJKLMNPRSTUVWXYZ";
    format!(
        "{}{}{}",
        A[i % A.len()] as char,
        A[(i / A.len() + 3) % A.len()] as char,
        A[(i * 7 + 5) % A.len()] as char
    )
}

/// Flight relation: year, month, dayofweek, carrier, origin, dest and three measures.
pub fn airline_table(rows: usize, seed: u64) -> ColumnTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let airports: Vec<String> = (0..30).map(airport_name).collect();
    let carrier_trend: Vec<f64> = (0..CARRIERS.len())
        .map(|_| rng.gen_range(-3.0..3.0))
        .collect();
    let origin_trend: Vec<f64> = (0..airports.len())
        .map(|_| rng.gen_range(-2.0..2.0))
        .collect();
    let mut cols: [Vec<f64>; 6] = Default::default();
    let (mut carrier, mut origin, mut dest) = (vec![], vec![], vec![]);
    for i in 0..rows {
        let y = i % 10;
        let c = (i / 10) % CARRIERS.len();
        let o = (i / 120) % airports.len();
        let d = rng.gen_range(0..airports.len());
        let m = rng.gen_range(0..12);
        let dow = rng.gen_range(0..7);
        let arr =
            carrier_trend[c] * y as f64 + origin_trend[o] * y as f64 + rng.gen_range(-15.0..25.0);
        cols[0].push(2008.0 + y as f64);
        cols[1].push(1.0 + m as f64);
        cols[2].push(1.0 + dow as f64);
        cols[3].push(arr.round());
        cols[4].push((arr * 0.8 + rng.gen_range(-5.0..10.0)).round());
        cols[5].push(200.0 + ((o * 37 + d * 53) % 2400) as f64);
        carrier.push(CARRIERS[c]);
        origin.push(airports[o].clone());
        dest.push(airports[d].clone());
    }
    let [year, month, dow, arr, dep, dist] = cols;
    ColumnTable::new(
        "airline",
        vec![
            Column::numeric("year", ORD, year),
            Column::numeric("month", ORD, month),
            Column::numeric("dayofweek", ORD, dow),
            Column::categorical("carrier", carrier),
            Column::categorical("origin", origin),
            Column::categorical("dest", dest),
            Column::numeric("arr_delay", ColumnKind::Measure, arr),
            Column::numeric("dep_delay", ColumnKind::Measure, dep),
            Column::numeric("distance", ColumnKind::Measure, dist),
        ],
    )
    .expect("generated relation is well formed")
}

/// Realistic airline queries: name, query text, expected requests without and with combination.
pub fn benchmark_queries() -> Vec<(&'static str, &'static str, usize, usize)> {
    vec![("B1", B1, 6, 1), ("B2", B2, 4, 1), ("B3", B3, 8, 2)]
}

/// Carriers with rising arrival delays, carriers whose departure delays diverge most,
/// and origins with the steepest monthly decline.
pub const B1: &str = "\
Name | X | Y | Z | Process
f1 | 'year' | 'arr_delay' | v1 <-- 'carrier'.* | v2 <-- argany_v1[t>0] T(f1)
f2 | 'year' | 'dep_delay' | v1 | v3 <-- argmax_v1[k=3] D(f1,f2)
f3 | 'month' | 'arr_delay' | v4 <-- 'origin'.* | v5 <-- argmin_v4[k=5] T(f3)
*f4 | 'year' | 'arr_delay' | v2 |
*f5 | 'year' | 'dep_delay' | v3 |
*f6 | 'month' | 'arr_delay' | v5 |
";

/// Carriers trending up both overall and at rising origins, reordered by monthly trend.
pub const B2: &str = "\
Name | X | Y | Z | Z2 | Process
f1 | 'year' | 'arr_delay' | v1 <-- 'origin'.* | | v2 <-- argany_v1[t>0] T(f1)
f2 | 'year' | 'dep_delay' | v3 <-- 'carrier'.* | | v4 <-- argmax_v3[k=6] T(f2)
f3 | 'year' | 'arr_delay' | v3 | 'origin'.[? IN v2] | v5 <-- argmax_v3[k=6] T(f3)
f4 | 'month' | 'dep_delay' | v6 <-- 'carrier'.(v4 ^ v5) | | v7 <-- argmin_v6[k=inf] T(f4)
*f5 <-- f4.order | | | v7 --> | |
";

/// Outlier origins, destinations and carriers, compared across the three result sets.
pub const B3: &str = "\
Name | X | Y | Z | Z2 | Process
f1 | 'year' | 'arr_delay' | v1 <-- 'origin'.* | |
f2 | 'year' | 'arr_delay' | w1 <-- 'origin'.* | | v2 <-- argmax_v1[k=4] sum_w1 D(f1,f2)
f3 | 'year' | 'dep_delay' | v3 <-- 'dest'.* | |
f4 | 'year' | 'dep_delay' | w3 <-- 'dest'.* | | v4 <-- argmax_v3[k=4] sum_w3 D(f3,f4)
f5 | 'dayofweek' | 'arr_delay' | v5 <-- 'carrier'.* | |
f6 | 'dayofweek' | 'arr_delay' | w5 <-- 'carrier'.* | | v6 <-- argmax_v5[k=4] sum_w5 D(f5,f6)
f7 | 'dayofweek' | 'arr_delay' | v2 | v4 |
f8 | 'dayofweek' | 'dep_delay' | v6 | v4 |
*f9 <-- f7 + f8 | | | | |
*f10 <-- f9 - f8 | | | | |
*f11 <-- f9.uniq | | | | |
*f12 <-- f9[1:4] | | | | |
";

const REAL2: &str = "\
Name | X | Y | Z | Z2 | Z3 | Process
f1 | 'year' | 'sales' | v1 <-- 'location'.* | | | v2 <-- argany_v1[t<0] T(f1)
f2 | 'year' | 'profit' | v3 <-- 'category'.* | | | v4 <-- argany_v3[t<0] T(f2)
f3 | 'year' | 'profit' | v5 <-- 'product'.* | 'location'.[? IN v2] | 'category'.[? IN v4] | v6 <-- argany_v5[t>0] T(f3)
f4 | 'year' | 'sales' | v5 | 'location'.[? IN v2] | 'category'.[? IN v4] | v7 <-- argany_v5[t>0] T(f4)
*f5 | 'year' | {'profit', 'sales'} | v6 ^ v7 | | |
";

/// Queries transcribed from the language documentation, over [`sales_table`].
pub fn doc_queries() -> Vec<(&'static str, String)> {
    let h = "Name | X | Y | Z | Z2 | Viz | Process\n";
    let v = vec![
        ("overview", "*f1 | 'year' | 'sales' | 'product'.'chair' | | bar.(y=agg('sum')) |"),
        ("overview-all", "*f1 | 'year' | 'sales' | 'product'.* | | bar.(y=agg('sum')) |"),
        ("xy-collection", "*f1 | x1 <-- {'year','month'} | y1 <-- {'sales','profit'} | 'product'.'chair' | | |"),
        ("two-z", "*f1 | 'year' | 'sales' | 'product'.* | 'location'.'US' | |"),
        (
            "name-plus",
            "f1 | 'year' | 'sales' | 'product'.'chair' | | |\n\
             f2 | 'year' | 'profit' | 'location'.'US' | | |\n\
             *f3 <-- f1 + f2 | | | 'weight'.[? < 10] | | |",
        ),
        (
            "proc1",
            "f1 | 'year' | 'profit' | v1 <-- 'product'.* | | |\n\
             f2 | 'year' | 'sales' | v1 | | | v2 <-- argmax_v1[k=10] D(f1,f2)\n\
             *f3 | 'year' | 'profit' | v2 | | |",
        ),
        (
            "trend",
            "f1 | 'year' | 'sales' | v1 <-- 'product'.* | | | v2 <-- argany_v1[t<0] T(f1)\n\
             *f2 | 'year' | 'sales' | v2 | | |",
        ),
        (
            "similarity",
            "f1 | 'year' | 'sales' | 'product'.'chair' | | |\n\
             f2 | 'year' | 'sales' | v1 <-- 'product'.(* - 'chair') | | | v2 <-- argmin_v1[k=10] D(f1,f2)\n\
             *f3 | 'year' | 'sales' | v2 | | |",
        ),
        (
            "outlier",
            "f1 | 'year' | 'sales' | v1 <-- 'product'.* | | |\n\
             f2 | 'year' | 'sales' | v2 <-- 'product'.* | | | v3 <-- argmax_v1[k=10] sum_v2 D(f1,f2)\n\
             *f3 | 'year' | 'sales' | v3 | | |",
        ),
        (
            "representative",
            "f1 | 'year' | 'profit' | 'product'.'stapler' | | bar.(y=agg('sum')) |\n\
             f2 | 'year' | 'profit' | v1 <-- 'product'.(* - {'stapler'}) | | bar.(y=agg('sum')) | v2 <-- argmin_v1[k=40] D(f1,f2)\n\
             f3 | 'year' | 'sales' | v2 | | bar.(y=agg('sum')) | v3 <-- R(10, v2, f3)\n\
             *f4 | 'year' | 'sales' | v3 | | bar.(y=agg('sum')) |",
        ),
        (
            "month-2015",
            "f1 | 'month' | 'profit' | v1 <-- 'product'.* | 'year'.2015 | bar.(y=agg('sum')) |\n\
             f2 | 'month' | 'sales' | v1 | 'year'.2015 | bar.(y=agg('sum')) | v2 <-- argmax_v1[k=10] D(f1,f2)\n\
             *f3 | 'month' | y1 <-- {'sales', 'profit'} | v2 | 'year'.2015 | bar.(y=agg('sum')) |",
        ),
        (
            "scatter-pairs",
            "f1 | 'year' | y1 <-- {'sales','profit'} | v1 <-- 'location'.{'US','UK'} | | |\n\
             f2 | 'year' | y2 <-- {'sales','profit'} | v2 <-- 'location'.{'DE','FR'} | | | y3, v3 <-- argmax_{y1,v1}[k=1] sum_{y2,v2} D(f1,f2)\n\
             *f3 | 'year' | y3 | v3 | | |",
        ),
        ("z-attrs", "*f1 | 'year' | 'sales' | z1.v1 <-- (* - {'year', 'month', 'weight', 'product', 'sales', 'profit'}).* | | |"),
        (
            "order",
            "f1 | 'year' | 'sales' | v1 <-- 'product'.* | | | u1 <-- argmin_v1[k=inf] T(f1)\n\
             *f2 <-- f1.order | | | u1 --> | | |",
        ),
        (
            "name-extra",
            "f1 | 'year' | 'sales' | v1 <-- 'product'.(* - 'stapler') | | |\n\
             f2 | 'year' | 'sales' | 'product'.'stapler' | | |\n\
             f3 <-- f1 + f2 | | | v2 <-- 'product'._ | | |\n\
             f4 | 'year' | 'profit' | v2 | | | v3 <-- argmax_v2[k=10] D(f3,f4)\n\
             *f5 | 'year' | 'sales' | v3 | | |",
        ),
        (
            "two-processes",
            "f1 | 'year' | 'sales' | 'product'.'chair' | | |\n\
             f2 | 'year' | 'sales' | v1 <-- 'product'.* | | | (v2 <-- argmax_v1[k=1] D(f1,f2)), (v3 <-- argmin_v1[k=1] D(f1,f2))\n\
             *f3 | 'year' | 'sales' | v2 | | |\n\
             *f4 | 'year' | 'sales' | v3 | | |",
        ),
    ];
    let mut out: Vec<(&'static str, String)> = v
        .into_iter()
        .map(|(n, body)| (n, format!("{h}{body}\n")))
        .collect();
    out.push(("real2", REAL2.to_string()));
    out
}
