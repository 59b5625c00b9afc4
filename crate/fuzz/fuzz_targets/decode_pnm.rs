#![no_main]

use libfuzzer_sys::fuzz_target;
use tlcr::io::{decode_pnm, encode_pgm, encode_ppm, LoadedImage};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pnm(data) {
        // anything we accept must survive a re-encode
        let bytes = match &img {
            LoadedImage::Gray(g) => encode_pgm(g),
            LoadedImage::Color(c) => encode_ppm(c),
        };
        assert_eq!(decode_pnm(&bytes).unwrap(), img);
    }
});
