mod common;
use common::*;
use std::time::Instant;
use stylegen::metrics::{bleu, marker_correlations, MarkerLexicon};
use stylegen::mr::{Granularity, StyleConstraint};
use stylegen::seq2seq::Method;
use stylegen::synth;
use stylegen::textpipe::TokenSequence;

fn eval_model(
    model: &stylegen::seq2seq::Model,
    bench: &Workbench,
    test: &[stylegen::seq2seq::ProcessedRecord],
) -> (f64, f64) {
    let lexicon = MarkerLexicon::default_lexicon();
    let mut outs = Vec::new();
    let mut refsets = Vec::new();
    let mut model_side = Vec::new();
    let mut ref_side = Vec::new();
    for rec in test {
        let gen = generate_tokens(model, &rec.record, &bench.vocabs, 3);
        let toks = TokenSequence::new(ids_to_tokens(&gen.token_ids, &bench.vocabs));
        let ref_toks = stylegen::textpipe::tokenize(&rec.record.references[0]).unwrap();
        if let StyleConstraint::Personality { personality, .. } = &rec.record.constraint {
            model_side.push((personality.label().to_string(), toks.clone()));
            ref_side.push((personality.label().to_string(), ref_toks.clone()));
        }
        outs.push(toks);
        refsets.push(vec![ref_toks]);
    }
    let b = bleu(&outs, &refsets, false).unwrap();
    let corr = marker_correlations(&model_side, &ref_side, lexicon).unwrap();
    (b, corr.pragmatic_avg)
}

#[test]
fn probe_full20() {
    let t0 = Instant::now();
    let corpus = synth::personality_corpus(5, 900, 100, 300);
    let test_processed = stylegen::seq2seq::process_records(&corpus.test, &delex_default());
    let spec = |c_dim| TrainSpec { c_dim, rnn_size: 32, batch_size: 16, epochs: 20, learning_rate: 1.0, lr_decay: 0.5, seed: 9 };
    for (name, method, gran, c_dim) in [
        ("nocon", Method::NoCon, Granularity::Coarse, 0usize),
        ("m1-coarse", Method::M1, Granularity::Coarse, 0),
        ("m2-coarse", Method::M2, Granularity::Coarse, 5),
        ("m3-coarse", Method::M3, Granularity::Coarse, 5),
        ("m3-fine", Method::M3, Granularity::Fine, 41),
    ] {
        let t1 = Instant::now();
        let bench = prepare_corpus(&corpus.train, &corpus.dev, method, gran);
        let model = train_model(&bench, method, gran, &spec(c_dim));
        let (b, prag) = eval_model(&model, &bench, &test_processed);
        println!("{name}: BLEU {b:.2} PRAG {prag:.3} ({:?})", t1.elapsed());
    }
    println!("total {:?}", t0.elapsed());
}
