use std::collections::BTreeSet;

use unicast_core::autodiff::Tape;
use unicast_core::encoders::DatasetDescription;
use unicast_core::eval::{count_trainable, ArchSpec};
use unicast_core::model::{ModelConfig, TsfmVariant, UniCastModel};
use unicast_core::train::{build_freeze_mask, mse_on_tape};
use unicast_core::transformer::PromptLocation;

fn variants() -> Vec<ModelConfig> {
    let mut out = Vec::new();
    for location in PromptLocation::ALL_VARIANTS {
        for (vision, text) in [(true, true), (true, false), (false, true), (false, false)] {
            let mut cfg = ModelConfig::desk(16);
            cfg.vision.as_mut().unwrap().image_size = 16;
            cfg.text.as_mut().unwrap().max_text_len = 8;
            cfg.tsfm.dims.num_layers = 3;
            cfg.tsfm.dims.schedule = location;
            if let Some(v) = cfg.vision.as_mut() {
                v.dims.schedule = location;
                v.dims.num_layers = 3;
            }
            if let Some(t) = cfg.text.as_mut() {
                t.dims.schedule = location;
            }
            if !vision {
                cfg.vision = None;
            }
            if !text {
                cfg.text = None;
            }
            out.push(cfg);
        }
    }
    out
}

#[test]
fn formula_agrees_with_construction() {
    for cfg in variants() {
        let model = UniCastModel::build(cfg.clone(), 0).unwrap();
        let head: BTreeSet<_> = model.head.ids().into_iter().collect();
        let built: usize = build_freeze_mask(&model)
            .iter()
            .filter(|id| !head.contains(id))
            .map(|&id| model.store.get(id).len())
            .sum();
        assert_eq!(count_trainable(&ArchSpec::from_model_config(&cfg)), built, "{cfg:?}");
    }
}

#[test]
fn gradients_reach_exactly_the_trainable_set() {
    for variant in [TsfmVariant::TimerLike, TsfmVariant::ChronosLike] {
        let mut cfg = ModelConfig::desk(16);
        cfg.vision.as_mut().unwrap().image_size = 16;
        cfg.text.as_mut().unwrap().max_text_len = 8;
        cfg.tsfm.variant = variant;
        let model = UniCastModel::build(cfg, 2).unwrap();
        let desc = DatasetDescription::new("Daily visits to a regional clinic.").unwrap();
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7 + 11.2).sin()).collect();
        let mut tape = Tape::new(&model.store);
        let pred = model.unicast_forward(&mut tape, &x, &desc).unwrap();
        let loss = mse_on_tape(&mut tape, pred, &y).unwrap();
        let grads = tape.backward(loss).unwrap();
        let nonzero: BTreeSet<_> = model
            .store
            .ids()
            .filter(|&id| grads.param(id).is_some_and(|g| g.iter().any(|v| *v != 0.0)))
            .collect();
        assert_eq!(nonzero, build_freeze_mask(&model), "{variant:?}");
        // Cross-modal flow: the vision prompts are only reachable through I_v.
        let vision_prompt = model.store.find("vision.prompt.1").unwrap();
        assert!(nonzero.contains(&vision_prompt));
    }
}

#[test]
fn golden_forecast_is_stable() {
    let mut cfg = ModelConfig::desk(16);
    cfg.vision.as_mut().unwrap().image_size = 16;
    cfg.text.as_mut().unwrap().max_text_len = 8;
    let model = UniCastModel::build(cfg, 42).unwrap();
    let desc = DatasetDescription::new("Monthly totals of a synthetic series.").unwrap();
    let x: Vec<f64> = (0..16).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
    let y = model.predict(&x, &desc).unwrap();
    let bits: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
    assert_eq!(bits, GOLDEN, "{y:?}");
}

const GOLDEN: [u64; 16] = [
    13816331698615703525,
    4601564334507154522,
    13820312206089568223,
    4601595651918784817,
    4597308582949624027,
    4603535000731994164,
    13825865729094876907,
    4592293934027455533,
    4594822919991938205,
    4602154095633358404,
    13822148271180639041,
    4598312452230143838,
    4595701361307738412,
    13819970156309389422,
    13801699286063836952,
    13814649361404467184,
];
