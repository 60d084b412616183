//! Reads files produced by h5py (the reference HDF5 implementation) and
//! checks exact values frozen when the fixtures were generated.

use pointgn::hdf5::{DataType, H5File, H5Writer, WriteData};

fn fixture(name: &str) -> H5File {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    H5File::open(path).unwrap()
}

const FROZEN: [((usize, usize), [u32; 3]); 3] = [
    ((0, 0), [0x3aa13d19, 0x3e98f52d, 0xbe8c5bcc]),
    ((0, 1023), [0x3edf2341, 0x3e1414cf, 0x3e3484b7]),
    ((1, 2047), [0xbf8cdf9b, 0xbecf96a5, 0xbf6fb94e]),
];

fn check_points(data: &[f32]) {
    assert_eq!(data.len(), 2 * 2048 * 3);
    for ((b, p), bits) in FROZEN {
        let at = (b * 2048 + p) * 3;
        let got: Vec<u32> = data[at..at + 3].iter().map(|v| v.to_bits()).collect();
        assert_eq!(got, bits, "point ({b}, {p})");
    }
    let sum: f64 = data.iter().map(|&v| f64::from(v)).sum();
    assert!((sum - -136.5505059953939).abs() < 1e-9, "sum {sum}");
}

#[test]
fn contiguous_float_and_uint8_labels() {
    let f = fixture("modelnet_style.h5");
    assert_eq!(f.member_names().unwrap(), ["data", "label", "normal"]);
    let data = f.dataset("data").unwrap();
    assert_eq!(data.shape(), [2, 2048, 3]);
    assert_eq!(
        data.dtype(),
        DataType::Float {
            size: 4,
            big_endian: false
        }
    );
    check_points(&data.read_f32().unwrap());
    let label = f.dataset("label").unwrap();
    assert_eq!(label.shape(), [2, 1]);
    assert_eq!(label.read_i64().unwrap(), [3, 17]);
}

#[test]
fn chunked_gzip_shuffle_fletcher_and_big_endian_labels() {
    let f = fixture("scanobjectnn_style.h5");
    let data = f.dataset("data").unwrap();
    assert_eq!(data.shape(), [2, 2048, 3]);
    check_points(&data.read_f32().unwrap());
    let label = f.dataset("label").unwrap();
    assert_eq!(
        label.dtype(),
        DataType::Int {
            size: 8,
            signed: true,
            big_endian: true
        }
    );
    assert_eq!(label.read_i64().unwrap(), [4, 14]);
    assert!(f
        .dataset("mask")
        .unwrap()
        .read_i64()
        .unwrap()
        .iter()
        .all(|&m| m == 1));
}

#[test]
fn newest_file_format_with_link_messages() {
    let f = fixture("latest_format.h5");
    assert_eq!(
        f.member_names().unwrap(),
        ["data", "label", "nested", "tiny"]
    );
    let data = f.dataset("data").unwrap();
    assert_eq!(data.shape(), [2, 16, 3]);
    assert_eq!(
        data.dtype(),
        DataType::Float {
            size: 8,
            big_endian: false
        }
    );
    let v = data.read_f64().unwrap();
    assert_eq!((v[0] as f32).to_bits(), 0x3aa13d19);
    assert_eq!(f.dataset("label").unwrap().read_i64().unwrap(), [1, 2]);
    assert_eq!(f.dataset("tiny").unwrap().read_i64().unwrap(), [-3, 9]);
    assert_eq!(
        f.dataset("nested/x").unwrap().read_f32().unwrap(),
        [0.0, 1.0, 2.0, 3.0, 4.0]
    );
}

#[test]
fn writer_round_trips_fixture_contents_bit_exactly() {
    let src = fixture("scanobjectnn_style.h5");
    let data = src.dataset("data").unwrap().read_f32().unwrap();
    let mut w = H5Writer::new();
    w.add("data", &[2, 2048, 3], WriteData::F32(data.clone()))
        .add("label", &[2], WriteData::I64(vec![4, 14]));
    let back = H5File::from_bytes(w.to_bytes()).unwrap();
    let round: Vec<u32> = back
        .dataset("data")
        .unwrap()
        .read_f32()
        .unwrap()
        .iter()
        .map(|v| v.to_bits())
        .collect();
    let orig: Vec<u32> = data.iter().map(|v| v.to_bits()).collect();
    assert_eq!(round, orig);
    assert_eq!(back.dataset("label").unwrap().read_i64().unwrap(), [4, 14]);
}
