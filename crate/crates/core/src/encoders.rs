//! Vision and text encoder paths: tokenize, embed, run a prompted frozen
//! stack.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::render::RasterImage;
use crate::rng::Rng;
use crate::tensor::{seeded_init, Init, ParamId, ParamStore, Tensor};
use crate::transformer::{affine, sinusoidal_positions, PromptSet, Stack, StackConfig};

/// Byte vocabulary plus one pad symbol.
pub const VOCAB_SIZE: usize = 257;
pub const PAD_ID: usize = 256;

/// Split an image into non-overlapping `p × p` patches in row-major grid
/// order; each patch is flattened row-major into one output row.
pub fn patchify_image(img: &RasterImage, p: usize) -> Result<Tensor> {
    if p == 0 || img.width % p != 0 || img.height % p != 0 {
        return Err(Error::dim(
            "patchify_image",
            format!("{}x{} image is not divisible by patch size {p}", img.width, img.height),
        ));
    }
    let (gw, gh) = (img.width / p, img.height / p);
    let mut data = Vec::with_capacity(img.width * img.height);
    for gy in 0..gh {
        for gx in 0..gw {
            for y in 0..p {
                let row = (gy * p + y) * img.width + gx * p;
                data.extend_from_slice(&img.pixels[row..row + p]);
            }
        }
    }
    Tensor::new(&[gw * gh, p * p], data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisionEncoder {
    pub patch_size: usize,
    pub patch_weight: ParamId,
    pub patch_bias: ParamId,
    pub stack: Stack,
    pub prompts: PromptSet,
}

impl VisionEncoder {
    pub fn init(
        store: &mut ParamStore,
        patch_size: usize,
        config: StackConfig,
        frozen_rng: &mut Rng,
        prompt_rng: &mut Rng,
        prompt_init: Init,
    ) -> Result<Self> {
        let d = config.d_model;
        let fan_in = patch_size * patch_size;
        let w = seeded_init(
            &[fan_in, d],
            Init::Gaussian {
                sigma: 1.0 / (fan_in as f64).sqrt(),
            },
            frozen_rng,
        );
        let b = seeded_init(&[d], Init::Gaussian { sigma: 0.02 }, frozen_rng);
        let patch_weight = store.add("vision.patch_embed.weight", w);
        let patch_bias = store.add("vision.patch_embed.bias", b);
        let stack = Stack::init(store, "vision", config, frozen_rng)?;
        let prompts = PromptSet::init(
            store,
            "vision",
            config.prompt_length,
            d,
            config.prompt_schedule(),
            prompt_init,
            prompt_rng,
        );
        Ok(Self {
            patch_size,
            patch_weight,
            patch_bias,
            stack,
            prompts,
        })
    }

    /// `O_v^N`: prompt rows followed by one row per patch.
    pub fn forward(&self, tape: &mut Tape, img: &RasterImage) -> Result<Var> {
        let patches = patchify_image(img, self.patch_size)?;
        let n = patches.rows();
        let shape = patches.shape().to_vec();
        let x = tape.constant(&shape, patches.into_data())?;
        let h = affine(tape, x, self.patch_weight, self.patch_bias)?;
        let d = self.stack.config.d_model;
        let pe = tape.constant(&[n, d], sinusoidal_positions(n, d))?;
        let h = tape.add(h, pe)?;
        Ok(self.stack.forward(tape, h, &self.prompts)?.hidden)
    }

    pub fn frozen_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.patch_weight, self.patch_bias];
        ids.extend(self.stack.frozen_ids());
        ids
    }
}

/// UTF-8 bytes as ids, truncated or padded with [`PAD_ID`] to `max_len`.
pub fn tokenize(text: &str, max_len: usize) -> Result<Vec<usize>> {
    if text.is_empty() {
        return Err(Error::Input("cannot tokenize empty text".into()));
    }
    let mut ids: Vec<usize> = text.bytes().take(max_len).map(usize::from).collect();
    ids.resize(max_len, PAD_ID);
    Ok(ids)
}

/// Inverse of [`tokenize`] on the non-padded prefix.
pub fn detokenize(ids: &[usize]) -> Vec<u8> {
    ids.iter()
        .take_while(|&&i| i != PAD_ID)
        .map(|&i| i as u8)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncoder {
    pub max_text_len: usize,
    pub token_embed: ParamId,
    pub stack: Stack,
    pub prompts: PromptSet,
}

impl TextEncoder {
    pub fn init(
        store: &mut ParamStore,
        max_text_len: usize,
        config: StackConfig,
        frozen_rng: &mut Rng,
        prompt_rng: &mut Rng,
        prompt_init: Init,
    ) -> Result<Self> {
        let d = config.d_model;
        let table = seeded_init(&[VOCAB_SIZE, d], Init::Gaussian { sigma: 1.0 }, frozen_rng);
        let token_embed = store.add("text.token_embed", table);
        let stack = Stack::init(store, "text", config, frozen_rng)?;
        let prompts = PromptSet::init(
            store,
            "text",
            config.prompt_length,
            d,
            config.prompt_schedule(),
            prompt_init,
            prompt_rng,
        );
        Ok(Self {
            max_text_len,
            token_embed,
            stack,
            prompts,
        })
    }

    /// `O_t^M`: prompt rows followed by one row per token.
    pub fn forward(&self, tape: &mut Tape, ids: &[usize]) -> Result<Var> {
        if let Some(&bad) = ids.iter().find(|&&i| i >= VOCAB_SIZE) {
            return Err(Error::Input(format!("token id {bad} outside vocabulary")));
        }
        if ids.is_empty() {
            return Err(Error::Input("empty token sequence".into()));
        }
        let table = tape.param(self.token_embed);
        let h = tape.gather_rows(table, ids)?;
        let d = self.stack.config.d_model;
        let pe = tape.constant(&[ids.len(), d], sinusoidal_positions(ids.len(), d))?;
        let h = tape.add(h, pe)?;
        Ok(self.stack.forward(tape, h, &self.prompts)?.hidden)
    }

    pub fn frozen_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.token_embed];
        ids.extend(self.stack.frozen_ids());
        ids
    }
}

/// Free-text description of a dataset, the text-modality input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescription(String);

impl DatasetDescription {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Input("dataset description is empty".into()));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

const BUILTIN_DESCRIPTIONS: &str = include_str!("../data/descriptions.txt");

/// Parse `name = description` lines; blank lines and `#` comments skipped.
pub fn parse_descriptions(text: &str) -> Result<BTreeMap<String, DatasetDescription>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Input(format!("descriptions line {}: expected `name = text`", lineno + 1))
        })?;
        out.insert(key.trim().to_string(), DatasetDescription::new(value.trim())?);
    }
    Ok(out)
}

pub fn builtin_descriptions() -> BTreeMap<String, DatasetDescription> {
    parse_descriptions(BUILTIN_DESCRIPTIONS).expect("bundled descriptions parse")
}

pub fn load_descriptions(path: &Path) -> Result<BTreeMap<String, DatasetDescription>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_descriptions(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transformer::PromptLocation;

    fn cfg(layers: usize, d: usize, l: usize) -> StackConfig {
        StackConfig {
            num_layers: layers,
            d_model: d,
            num_heads: 2,
            causal: false,
            prompt_length: l,
            schedule: PromptLocation::All,
        }
    }

    #[test]
    fn patch_shape_arithmetic() {
        let img = RasterImage::blank(16, 16);
        let t = patchify_image(&img, 8).unwrap();
        assert_eq!(t.shape(), &[4, 64]);
    }

    #[test]
    fn all_ones_patches_are_identical() {
        let mut img = RasterImage::blank(16, 24);
        img.pixels.fill(1.0);
        let t = patchify_image(&img, 8).unwrap();
        for r in 1..t.rows() {
            assert_eq!(t.row(r), t.row(0));
        }
    }

    #[test]
    fn pixel_to_patch_index_mapping() {
        // Brute-force oracle: pixel (x, y) lands in patch (y/p)*(w/p) + x/p at
        // offset (y%p)*p + x%p.
        let (w, h, p) = (24, 16, 8);
        for (x, y) in [(0, 0), (9, 3), (23, 15), (8, 8)] {
            let mut img = RasterImage::blank(w, h);
            img.pixels[y * w + x] = 1.0;
            let t = patchify_image(&img, p).unwrap();
            let patch = (y / p) * (w / p) + x / p;
            let offset = (y % p) * p + x % p;
            for r in 0..t.rows() {
                for c in 0..p * p {
                    let expect = if r == patch && c == offset { 1.0 } else { 0.0 };
                    assert_eq!(t.at(r, c), expect, "pixel ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn indivisible_image_is_rejected() {
        let img = RasterImage::blank(20, 16);
        assert!(matches!(patchify_image(&img, 8), Err(Error::Dimension { .. })));
    }

    #[test]
    fn tokenize_pads_and_truncates() {
        assert_eq!(tokenize("AB", 4).unwrap(), vec![65, 66, 256, 256]);
        let long = tokenize("hello world", 5).unwrap();
        assert_eq!(long, b"hello".iter().map(|&b| usize::from(b)).collect::<Vec<_>>());
        assert!(matches!(tokenize("", 4), Err(Error::Input(_))));
    }

    #[test]
    fn token_round_trip() {
        let text = "Half-hourly demand, °C-adjusted";
        let ids = tokenize(text, 64).unwrap();
        assert_eq!(detokenize(&ids), text.as_bytes());
    }

    #[test]
    fn vision_output_shape() {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(1);
        let mut prng = Rng::new(2);
        let enc = VisionEncoder::init(&mut store, 8, cfg(2, 32, 10), &mut rng, &mut prng, Init::Gaussian { sigma: 0.02 }).unwrap();
        let img = crate::render::render_series(&[0.0, 1.0, 0.5, 0.2], 64, 64, 1).unwrap();
        let mut t = Tape::new(&store);
        let out = enc.forward(&mut t, &img).unwrap();
        assert_eq!(t.shape(out), &[74, 32]);

        let mut store0 = ParamStore::new();
        let enc0 = VisionEncoder::init(&mut store0, 8, cfg(2, 32, 0), &mut Rng::new(1), &mut Rng::new(2), Init::Zeros).unwrap();
        let mut t = Tape::new(&store0);
        let out = enc0.forward(&mut t, &img).unwrap();
        assert_eq!(t.shape(out), &[64, 32]);
    }

    #[test]
    fn text_output_shape_and_vocab_check() {
        let mut store = ParamStore::new();
        let enc = TextEncoder::init(&mut store, 32, cfg(2, 48, 4), &mut Rng::new(1), &mut Rng::new(2), Init::Gaussian { sigma: 0.02 }).unwrap();
        let ids = tokenize("weekly retail profit", 32).unwrap();
        let mut t = Tape::new(&store);
        let out = enc.forward(&mut t, &ids).unwrap();
        assert_eq!(t.shape(out), &[36, 48]);
        assert!(matches!(enc.forward(&mut t, &[3, 300]), Err(Error::Input(_))));
    }

    #[test]
    fn degenerate_text_stack_is_embedding_plus_positions() {
        let mut store = ParamStore::new();
        let enc = TextEncoder::init(&mut store, 4, cfg(0, 6, 0), &mut Rng::new(1), &mut Rng::new(2), Init::Zeros).unwrap();
        let ids = tokenize("AB", 4).unwrap();
        let mut t = Tape::new(&store);
        let out = enc.forward(&mut t, &ids).unwrap();
        let table = store.get(enc.token_embed);
        let pe = sinusoidal_positions(4, 6);
        for (r, &id) in ids.iter().enumerate() {
            for c in 0..6 {
                assert_eq!(t.value(out)[r * 6 + c], table.at(id, c) + pe[r * 6 + c]);
            }
        }
    }

    #[test]
    fn bundled_descriptions_cover_named_datasets() {
        let d = builtin_descriptions();
        for name in ["covid_deaths", "nn5_daily", "car_parts", "au_elec", "cif_2016", "dominick", "hospital", "tourism_monthly", "synthetic"] {
            assert!(d.contains_key(name), "{name}");
        }
    }

    #[test]
    fn malformed_description_line() {
        assert!(parse_descriptions("no separator here").is_err());
        assert!(parse_descriptions("x = ").is_err());
    }
}
