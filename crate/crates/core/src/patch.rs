//! Patch representation and the image encode/decode scheme the networks
//! consume and emit.
//!
//! A patch is an ordered bit vector: one presence/absence bit per
//! catalog species plus a trailing soil bit (1 = gypsum, 0 = limestone).
//! Networks see patches as grayscale images whose columns repeat the bit
//! pattern; the feature axis is zero-padded to a multiple of 8 so three
//! stride-2 convolutions divide evenly, and a per-column mask marks the
//! padding.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Decoding drops this many rows at each edge of the repeated dimension.
pub const EDGE_ROWS: usize = 1;
/// Pixel threshold for discretizing decoded columns; ties count as present.
pub const DECODE_THRESHOLD: f64 = 0.5;
/// Strip images repeat the feature line this many times.
pub const STRIP_HEIGHT: usize = 8;

/// Ordered species names; feature order is species 0..n−1 then the soil bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesCatalog {
    names: Vec<String>,
}

impl SpeciesCatalog {
    pub fn new(names: Vec<String>) -> Result<SpeciesCatalog> {
        if names.len() < 2 {
            return Err(Error::Data(format!(
                "catalog needs at least 2 species, got {}",
                names.len()
            )));
        }
        if names.len() > 64 {
            return Err(Error::Data(format!(
                "catalog supports at most 64 species, got {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicate species name '{name}'")));
            }
        }
        Ok(SpeciesCatalog { names })
    }

    /// Number of species (excluding the soil bit).
    pub fn species_count(&self) -> usize {
        self.names.len()
    }

    /// Number of patch features: species plus the soil bit.
    pub fn feature_count(&self) -> usize {
        self.names.len() + 1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// One patch: species presence bits plus the soil bit, all strictly binary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Patch {
    bits: Vec<u8>,
}

impl Patch {
    pub fn new(bits: Vec<u8>) -> Result<Patch> {
        if bits.len() < 3 {
            return Err(Error::Data(format!(
                "patch needs at least 2 species bits plus soil, got {} bits",
                bits.len()
            )));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Data(format!("patch bit {bad} is not in {{0,1}}")));
        }
        Ok(Patch { bits })
    }

    /// Builds a patch with only `species` set, on the given soil.
    pub fn single_species(n: usize, species: usize, gypsum: bool) -> Result<Patch> {
        if species >= n {
            return Err(Error::Usage(format!(
                "species index {species} out of range for {n} species"
            )));
        }
        let mut bits = vec![0u8; n + 1];
        bits[species] = 1;
        bits[n] = u8::from(gypsum);
        Patch::new(bits)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Count of species bits set; the soil bit is excluded.
    pub fn species_count(&self) -> usize {
        self.bits[..self.bits.len() - 1]
            .iter()
            .map(|&b| b as usize)
            .sum()
    }

    pub fn soil(&self) -> u8 {
        *self.bits.last().expect("patch is non-empty")
    }

    pub fn has_species(&self, index: usize) -> bool {
        self.bits[index] == 1
    }

    /// Species bits packed into a mask, bit i = species i. Soil excluded.
    pub fn species_mask(&self) -> u64 {
        self.bits[..self.bits.len() - 1]
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &b)| m | (u64::from(b) << i))
    }
}

/// A catalog plus its patches, with optional per-patch site labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchDataset {
    catalog: SpeciesCatalog,
    patches: Vec<Patch>,
    sites: Vec<Option<String>>,
}

impl PatchDataset {
    pub fn new(catalog: SpeciesCatalog, patches: Vec<Patch>) -> Result<PatchDataset> {
        let sites = vec![None; patches.len()];
        PatchDataset::with_sites(catalog, patches, sites)
    }

    pub fn with_sites(
        catalog: SpeciesCatalog,
        patches: Vec<Patch>,
        sites: Vec<Option<String>>,
    ) -> Result<PatchDataset> {
        if sites.len() != patches.len() {
            return Err(Error::Data(format!(
                "{} site labels for {} patches",
                sites.len(),
                patches.len()
            )));
        }
        for (row, patch) in patches.iter().enumerate() {
            if patch.bits().len() != catalog.feature_count() {
                return Err(Error::Data(format!(
                    "patch {row} has {} bits, catalog wants {}",
                    patch.bits().len(),
                    catalog.feature_count()
                )));
            }
        }
        Ok(PatchDataset {
            catalog,
            patches,
            sites,
        })
    }

    pub fn catalog(&self) -> &SpeciesCatalog {
        &self.catalog
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn site(&self, index: usize) -> Option<&str> {
        self.sites[index].as_deref()
    }

    /// Keeps only patches with at least `min_species` species set.
    pub fn filter_min_species(&self, min_species: usize) -> PatchDataset {
        let mut patches = Vec::new();
        let mut sites = Vec::new();
        for (p, s) in self.patches.iter().zip(&self.sites) {
            if p.species_count() >= min_species {
                patches.push(p.clone());
                sites.push(s.clone());
            }
        }
        PatchDataset {
            catalog: self.catalog.clone(),
            patches,
            sites,
        }
    }
}

/// Real-valued 2D image encoding of a patch, with a per-column validity
/// mask: the first `n+1` columns carry features, the rest are padding.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchImage {
    height: usize,
    width: usize,
    /// Row-major `[height][width]`, values clamped to [0, 1].
    pixels: Vec<f32>,
    mask: Vec<bool>,
}

fn padded_width(features: usize) -> usize {
    features.div_ceil(8) * 8
}

impl PatchImage {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_columns(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Network input layout `[height, width, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(&[self.height, self.width, 1], self.pixels.clone())
            .expect("image dims are consistent")
    }

    /// Rebuilds an image from a `[height, width, 1]` tensor, clamping
    /// pixels into [0, 1].
    pub fn from_tensor(tensor: &Tensor, mask: Vec<bool>) -> Result<PatchImage> {
        let shape = tensor.shape();
        if shape.len() != 3 || shape[2] != 1 {
            return Err(Error::Config(format!(
                "expected image tensor [h, w, 1], got {shape:?}"
            )));
        }
        if mask.len() != shape[1] {
            return Err(Error::Config(format!(
                "mask has {} columns, image has {}",
                mask.len(),
                shape[1]
            )));
        }
        Ok(PatchImage {
            height: shape[0],
            width: shape[1],
            pixels: tensor.data().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            mask,
        })
    }
}

fn encode_with_height(patch: &Patch, height: usize) -> PatchImage {
    let features = patch.bits().len();
    let width = padded_width(features);
    let mut pixels = vec![0.0f32; height * width];
    for row in 0..height {
        for (col, &bit) in patch.bits().iter().enumerate() {
            pixels[row * width + col] = f32::from(bit);
        }
    }
    let mask = (0..width).map(|c| c < features).collect();
    PatchImage {
        height,
        width,
        pixels,
        mask,
    }
}

/// Square encoding used by the GAN: each feature column is constant at
/// the bit value, width padded to a multiple of 8, height = width.
pub fn encode_square(patch: &Patch) -> PatchImage {
    let width = padded_width(patch.bits().len());
    encode_with_height(patch, width)
}

/// Strip encoding used by the VAE: the feature line repeated 8 times.
pub fn encode_strip(patch: &Patch) -> PatchImage {
    encode_with_height(patch, STRIP_HEIGHT)
}

/// Discretizes an image back into a patch: drop one row at each edge of
/// the repeated dimension, average the remaining rows per valid column,
/// and threshold at 0.5 (ties count as present). Padded columns are
/// ignored.
pub fn decode_image(image: &PatchImage) -> Result<Patch> {
    if image.height < 2 * EDGE_ROWS + 1 {
        return Err(Error::Data(format!(
            "image height {} too small to remove {EDGE_ROWS} edge row(s) per side",
            image.height
        )));
    }
    let rows = EDGE_ROWS..image.height - EDGE_ROWS;
    let scored_rows = (image.height - 2 * EDGE_ROWS) as f64;
    let mut bits = Vec::with_capacity(image.valid_columns());
    for col in 0..image.width {
        if !image.mask[col] {
            continue;
        }
        let mut sum = 0.0f64;
        for row in rows.clone() {
            sum += f64::from(image.pixel(row, col));
        }
        let mean = sum / scored_rows;
        bits.push(u8::from(mean >= DECODE_THRESHOLD));
    }
    Patch::new(bits)
}

/// Reads the patch CSV schema: a header of species names plus one soil
/// column, species cells in {0,1}, soil cells in {gypsum, limestone, 0, 1}.
/// A column named `site` (if present) is kept as a per-patch label.
pub fn ingest_csv(path: &Path, soil_column: &str) -> Result<PatchDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header in {}: {e}", path.display())))?
        .clone();

    let mut species_cols = Vec::new();
    let mut species_names = Vec::new();
    let mut soil_col = None;
    let mut site_col = None;
    for (i, name) in headers.iter().enumerate() {
        if name == soil_column {
            if soil_col.is_some() {
                return Err(Error::Data(format!("duplicate soil column '{name}'")));
            }
            soil_col = Some(i);
        } else if name == "site" {
            site_col = Some(i);
        } else {
            species_cols.push(i);
            species_names.push(name.to_string());
        }
    }
    let soil_col = soil_col.ok_or_else(|| {
        Error::Data(format!(
            "no soil column '{soil_column}' in {}",
            path.display()
        ))
    })?;
    let catalog = SpeciesCatalog::new(species_names)?;

    let mut patches = Vec::new();
    let mut sites = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1; // 1-based data row for diagnostics
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        let mut bits = Vec::with_capacity(catalog.feature_count());
        for (&col, name) in species_cols.iter().zip(catalog.names()) {
            let cell = record.get(col).unwrap_or("").trim();
            match cell {
                "0" => bits.push(0),
                "1" => bits.push(1),
                other => {
                    return Err(Error::Data(format!(
                        "row {row}, column '{name}': species cell '{other}' is not 0 or 1"
                    )))
                }
            }
        }
        let soil_cell = record.get(soil_col).unwrap_or("").trim();
        let soil = match soil_cell {
            "1" | "gypsum" => 1,
            "0" | "limestone" => 0,
            other => {
                return Err(Error::Data(format!(
                    "row {row}, column '{soil_column}': soil cell '{other}' is not gypsum/limestone/0/1"
                )))
            }
        };
        bits.push(soil);
        patches.push(Patch::new(bits)?);
        sites.push(site_col.and_then(|c| record.get(c)).map(|s| s.to_string()));
    }

    if patches.is_empty() {
        log::warn!("{}: header only, ingested an empty dataset", path.display());
    }
    PatchDataset::with_sites(catalog, patches, sites)
}

/// Writes the same CSV schema [`ingest_csv`] reads (soil emitted as 0/1).
pub fn write_csv(dataset: &PatchDataset, path: &Path, soil_column: &str) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let has_sites = (0..dataset.len()).any(|i| dataset.site(i).is_some());
    let mut header: Vec<&str> = dataset.catalog.names().iter().map(|s| s.as_str()).collect();
    header.push(soil_column);
    if has_sites {
        header.push("site");
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, patch) in dataset.patches().iter().enumerate() {
        let mut cells: Vec<String> = patch.bits().iter().map(|b| b.to_string()).collect();
        if has_sites {
            cells.push(dataset.site(i).unwrap_or("").to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Restricts the dataset to the `k` species with the highest occurrence
/// counts (ties keep the earlier column); the soil bit is retained and
/// patches are re-projected onto the reduced catalog.
pub fn select_top_species(dataset: &PatchDataset, k: usize) -> Result<PatchDataset> {
    let n = dataset.catalog().species_count();
    if k < 2 {
        return Err(Error::Usage(format!("top-species k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Usage(format!(
            "top-species k = {k} exceeds the {n} species in the catalog"
        )));
    }
    let mut counts = vec![0usize; n];
    for patch in dataset.patches() {
        for (i, count) in counts.iter_mut().enumerate() {
            *count += patch.bits()[i] as usize;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(counts[i]), i));
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable(); // preserve original column order among the kept

    let names = keep
        .iter()
        .map(|&i| dataset.catalog().names()[i].clone())
        .collect();
    let catalog = SpeciesCatalog::new(names)?;
    let mut patches = Vec::with_capacity(dataset.len());
    for patch in dataset.patches() {
        let mut bits: Vec<u8> = keep.iter().map(|&i| patch.bits()[i]).collect();
        bits.push(patch.soil());
        patches.push(Patch::new(bits)?);
    }
    let sites = (0..dataset.len())
        .map(|i| dataset.site(i).map(|s| s.to_string()))
        .collect();
    PatchDataset::with_sites(catalog, patches, sites)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn patch(bits: &[u8]) -> Patch {
        Patch::new(bits.to_vec()).unwrap()
    }

    fn all_patches(features: usize) -> impl Iterator<Item = Patch> {
        (0u32..1 << features).map(move |state| {
            let bits = (0..features).map(|i| ((state >> i) & 1) as u8).collect();
            Patch::new(bits).unwrap()
        })
    }

    #[test]
    fn species_count_excludes_soil() {
        assert_eq!(patch(&[1, 1, 0, 0, 0, 0, 0, 0, 1]).species_count(), 2);
        assert_eq!(patch(&[0, 0, 0, 0, 0, 0, 0, 0, 1]).species_count(), 0);
        assert_eq!(patch(&[1, 1, 1, 1, 1, 1, 1, 1, 0]).species_count(), 8);
    }

    #[test]
    fn square_encoding_pads_9_features_to_16() {
        let p = patch(&[1, 0, 0, 0, 0, 0, 0, 0, 0]);
        let img = encode_square(&p);
        assert_eq!((img.height(), img.width()), (16, 16));
        assert_eq!(img.valid_columns(), 9);
        // column 0 all ones, everything else zero
        for row in 0..16 {
            for col in 0..16 {
                let want = if col == 0 { 1.0 } else { 0.0 };
                assert_eq!(img.pixel(row, col), want);
            }
        }
    }

    #[test]
    fn strip_encoding_padding_rules() {
        let p8 = patch(&vec![1; 9]);
        let img = encode_strip(&p8);
        assert_eq!((img.height(), img.width()), (8, 16));
        for col in 0..16 {
            for row in 0..8 {
                let want = if col < 9 { 1.0 } else { 0.0 };
                assert_eq!(img.pixel(row, col), want);
            }
        }

        let p16 = patch(&vec![0; 17]);
        let img = encode_strip(&p16);
        assert_eq!((img.height(), img.width()), (8, 24));
        assert!(img.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_zero_patch_encodes_to_all_zero_image() {
        let img = encode_square(&patch(&[0; 9]));
        assert!(img.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decode_drops_edges_and_applies_threshold() {
        // Column pattern (0.6,0.4,...) over 8 rows: edges dropped, middle
        // six average to exactly 0.5 which counts as present.
        let mut pixels = vec![0.0f32; 8 * 8];
        for row in 0..8 {
            pixels[row * 8] = if row % 2 == 0 { 0.6 } else { 0.4 };
            pixels[row * 8 + 1] = 0.49;
        }
        let img = PatchImage {
            height: 8,
            width: 8,
            pixels,
            mask: vec![true, true, true, false, false, false, false, false],
        };
        let got = decode_image(&img).unwrap();
        assert_eq!(got.bits(), &[1, 0, 0]);
    }

    #[test]
    fn decode_needs_three_rows() {
        let img = PatchImage {
            height: 2,
            width: 8,
            pixels: vec![0.0; 16],
            mask: vec![true; 8],
        };
        assert!(decode_image(&img).is_err());
    }

    #[test]
    fn exhaustive_roundtrip_n8_both_encodings() {
        for p in all_patches(9) {
            let square = decode_image(&encode_square(&p)).unwrap();
            assert_eq!(square, p);
            let strip = decode_image(&encode_strip(&p)).unwrap();
            assert_eq!(strip, p);
        }
    }

    #[test]
    fn padded_columns_do_not_affect_decode() {
        let p = patch(&[1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let mut img = encode_strip(&p);
        // Scribble over the padded columns.
        for row in 0..img.height {
            for col in 9..img.width {
                img.pixels[row * img.width + col] = 1.0;
            }
        }
        assert_eq!(decode_image(&img).unwrap(), p);
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn ingest_small_csv() {
        let f = write_temp("A,B,soil\n1,1,gypsum\n0,1,limestone\n");
        let ds = ingest_csv(f.path(), "soil").unwrap();
        assert_eq!(ds.catalog().names(), &["A".to_string(), "B".to_string()]);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.patches()[0].bits(), &[1, 1, 1]);
        assert_eq!(ds.patches()[1].bits(), &[0, 1, 0]);
    }

    #[test]
    fn ingest_empty_data_section_gives_empty_dataset() {
        let f = write_temp("A,B,soil\n");
        let ds = ingest_csv(f.path(), "soil").unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn ingest_rejects_bad_cell_with_location() {
        let f = write_temp("A,B,soil\n1,2,gypsum\n");
        let err = ingest_csv(f.path(), "soil").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1") && msg.contains("'B'") && msg.contains("'2'"), "{msg}");
    }

    #[test]
    fn ingest_rejects_duplicate_species() {
        let f = write_temp("A,A,soil\n1,1,gypsum\n");
        let err = ingest_csv(f.path(), "soil").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn csv_roundtrip_preserves_dataset() {
        let f = write_temp("A,B,C,soil\n1,0,1,gypsum\n0,1,1,limestone\n1,1,1,1\n");
        let ds = ingest_csv(f.path(), "soil").unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path(), "soil").unwrap();
        let back = ingest_csv(out.path(), "soil").unwrap();
        assert_eq!(back.catalog(), ds.catalog());
        assert_eq!(back.patches(), ds.patches());
    }

    fn toy_dataset() -> PatchDataset {
        // counts: A:5 appears? build A:3,B:3,C:1 over 4 patches
        let catalog = SpeciesCatalog::new(vec!["A".into(), "B".into(), "C".into()]).unwrap();
        let patches = vec![
            patch(&[1, 1, 0, 1]),
            patch(&[1, 1, 0, 0]),
            patch(&[1, 1, 1, 1]),
            patch(&[0, 0, 0, 0]),
        ];
        PatchDataset::new(catalog, patches).unwrap()
    }

    #[test]
    fn select_top_species_counts_and_tiebreak() {
        let ds = toy_dataset(); // counts A:3, B:3, C:1
        let top2 = select_top_species(&ds, 2).unwrap();
        assert_eq!(top2.catalog().names(), &["A".to_string(), "B".to_string()]);
        assert_eq!(top2.patches()[0].bits(), &[1, 1, 1]);

        // k = n keeps everything as-is
        let top3 = select_top_species(&ds, 3).unwrap();
        assert_eq!(top3.catalog(), ds.catalog());
        assert_eq!(top3.patches(), ds.patches());
    }

    #[test]
    fn select_top_species_is_idempotent() {
        let ds = toy_dataset();
        let once = select_top_species(&ds, 2).unwrap();
        let twice = select_top_species(&once, 2).unwrap();
        assert_eq!(once.catalog(), twice.catalog());
        assert_eq!(once.patches(), twice.patches());
    }

    #[test]
    fn select_top_species_rejects_small_k() {
        let ds = toy_dataset();
        assert!(select_top_species(&ds, 1).is_err());
        assert!(select_top_species(&ds, 4).is_err());
    }

    #[test]
    fn min_species_filter() {
        let ds = toy_dataset();
        let filtered = ds.filter_min_species(2);
        assert_eq!(filtered.len(), 3);
        assert!(filtered.patches().iter().all(|p| p.species_count() >= 2));
    }
}
