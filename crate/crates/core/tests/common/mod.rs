//! Shared helpers for the integration tests: the bundled 30-term fixture's
//! geometry and utilities to stage it into a scratch directory.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

/// The committed end-to-end fixture.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/e2e")
}

pub const EMBEDDING_DIM: usize = 12;

/// Fixture geometry: every term is a unit vector in one of six orthogonal
/// planes (plane p occupies dimensions 2p and 2p+1), at the given angle.
/// Plane 0 holds a temperature/feeling chain plus a cold group; plane 1 a
/// face group with two false friends; planes 2 and 3 two statute/agency
/// groups; plane 4 a car pair; plane 5 a legal-phrase variant group.
pub const ANGLE_TABLE: [(usize, f64); 30] = [
    (0, 0.0),    // sıcak
    (0, 36.0),   // acı
    (0, 72.0),   // ağrı
    (0, 108.0),  // üzüntü
    (0, 144.0),  // depresyon
    (0, -20.0),  // soğuk
    (0, -28.0),  // serin
    (0, -36.0),  // buz gibi
    (1, 30.0),   // yüz
    (1, 0.0),    // çehre
    (1, 8.0),    // surat
    (1, 16.0),   // sima
    (1, 58.0),   // yüzde
    (1, 50.0),   // yüzer
    (2, 0.0),    // VUK
    (2, 7.0),    // Vergi Usul K.
    (2, 14.0),   // 213 Sayılı Kanun
    (2, 21.0),   // Vergi Usul Kanunu
    (2, 28.0),   // Vergi Usul Yasası
    (3, 0.0),    // SSK
    (3, 7.0),    // Sosyal Sigortalar
    (3, 21.0),   // SGK
    (3, 14.0),   // Sosyal Güvenlik Kurumu
    (3, 28.0),   // Sosyal Güvenlik Teşkilatı
    (4, 0.0),    // araba
    (4, 5.0),    // otomobil
    (5, 13.0),   // Mücbir Sebep
    (5, 26.0),   // Mücbir Sebep Halleri
    (5, 6.0),    // Mucbir Sebepler
    (5, 0.0),    // Mücbir Sebe
];

/// Embedding rows implied by [`ANGLE_TABLE`].
pub fn fixture_rows() -> Vec<Vec<f32>> {
    ANGLE_TABLE
        .iter()
        .map(|&(plane, deg)| {
            let r = deg.to_radians();
            let mut v = vec![0f32; EMBEDDING_DIM];
            v[plane * 2] = r.cos() as f32;
            v[plane * 2 + 1] = r.sin() as f32;
            v
        })
        .collect()
}

/// Copies the committed fixture inputs into `dst` so runs never write
/// inside the repository. Returns the staged config path.
pub fn stage_fixture(dst: &Path) -> PathBuf {
    let src = fixture_dir();
    for name in [
        "terms.txt",
        "embeddings.lxemb",
        "scorer.tsv",
        "dictionary.txt",
        "config.json",
    ] {
        fs::copy(src.join(name), dst.join(name))
            .unwrap_or_else(|e| panic!("staging fixture file {name}: {e}"));
    }
    dst.join("config.json")
}
