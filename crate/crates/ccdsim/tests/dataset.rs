use ccdsim::dataset::{parse_dataset, CodeTable};
use ccdsim_core::data::{FeatureSchema, Split};

#[rustfmt::skip]
const EXPECTED: [[f64; 21]; 10] = [
    [0.0,  0.0, 0.0,  181.0, 5450.0, 0.0,   8.0,   8.0, 0.0,  1.0,  0.0,  0.0,  0.0,   9.0,   9.0, 1.0,  0.0,  0.11, 0.0, 0.0, 0.0],
    [0.0,  1.0, 1.0,  105.0,  146.0, 0.0,   1.0,   1.0, 0.0,  1.0,  0.0,  0.0,  0.0, 255.0, 254.0, 1.0,  0.01, 0.0,  0.0, 0.0, 0.0],
    [2.0,  0.0, 0.0,    0.0,    0.0, 1.0, 123.0,   6.0, 1.0,  0.05, 0.07, 1.0,  0.0, 255.0,  26.0, 0.1,  0.05, 0.0,  1.0, 0.0, 1.0],
    [0.0,  0.0, 2.0,  239.0,  486.0, 2.0,   2.0,   2.0, 0.5,  1.0,  0.0,  0.5,  0.0,  19.0,  19.0, 1.0,  0.0,  0.05, 0.0, 0.0, 0.0],
    [1.5,  0.0, 3.0, 1032.0,    0.0, 3.0,   1.0,   1.0, 0.0,  1.0,  0.0,  0.0,  0.0,   1.0,   1.0, 1.0,  0.0,  1.0,  0.0, 0.0, 0.0],
    [0.0,  1.0, 1.0,   44.0,    0.0, 0.0, 511.0, 511.0, 0.0,  1.0,  0.0,  0.0,  0.0, 255.0, 255.0, 1.0,  0.0,  1.0,  0.0, 0.0, 0.0],
    [0.0,  2.0, 4.0,    8.0,    0.0, 0.0,   1.0,   1.0, 0.0,  1.0,  0.0,  0.0,  1.0,   1.0,  33.0, 1.0,  0.0,  1.0,  0.0, 0.5, 0.0],
    [0.25, 0.0, 0.0,  300.0, 2000.0, 1.0,   3.0,   3.0, 0.33, 0.67, 0.25, 0.33, 0.5,  40.0,  40.0, 0.95, 0.02, 0.03, 0.0, 0.0, 0.01],
    [12.0, 0.0, 2.0, 1000.0,    0.0, 0.0,   0.0,   0.0, 0.0,  0.0,  0.0,  0.0,  0.0,   0.0,   0.0, 0.0,  0.0,  0.0,  0.0, 0.0, 0.0],
    [0.0,  2.0, 0.0,    7.0,    1.0, 2.0,   4.0,   5.0, 0.75, 0.8,  0.2,  0.6,  0.4, 100.0,  90.0, 0.9,  0.1,  0.2,  0.3, 0.4, 0.5],
];

const LABELS: [usize; 10] = [0, 0, 1, 2, 3, 1, 4, 4, 2, 0];

#[test]
fn ten_row_file_matches_hand_transcription() {
    let text = include_str!("fixtures/ten_rows.csv");
    let mut codes = CodeTable::new();
    let ds = parse_dataset(text, &FeatureSchema::bnat(), &mut codes, Split::Train, "ten_rows.csv").unwrap();
    assert_eq!(ds.len(), 10);
    for (i, s) in ds.samples().iter().enumerate() {
        assert_eq!(s.features, EXPECTED[i], "row {i}");
        assert_eq!(s.label, LABELS[i], "label of row {i}");
    }

    let table: Vec<(&str, &str, u64)> = codes
        .entries()
        .iter()
        .map(|e| (e.column.as_str(), e.raw_value.as_str(), e.code))
        .collect();
    assert_eq!(
        table,
        [
            ("protocol_type", "tcp", 0),
            ("service", "http", 0),
            ("flag", "SF", 0),
            ("protocol_type", "udp", 1),
            ("service", "dns", 1),
            ("flag", "S0", 1),
            ("service", "ftp", 2),
            ("flag", "REJ", 2),
            ("service", "ssh", 3),
            ("flag", "RSTO", 3),
            ("protocol_type", "icmp", 2),
            ("service", "eco_i", 4),
        ]
    );
}
