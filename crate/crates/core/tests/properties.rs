mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use speechdep::graph::tree_score;
use speechdep::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn vocab() -> CtcVocab {
    let symbols = ["<blank>", "<space>", "a", "b", "c"];
    CtcVocab::new(symbols.iter().map(|s| s.to_string()).collect()).unwrap()
}

fn policy() -> impl Strategy<Value = RootPolicy> {
    prop_oneof![Just(RootPolicy::SingleRoot), Just(RootPolicy::MultiRoot)]
}

fn head_vector() -> impl Strategy<Value = Vec<usize>> {
    (1usize..9).prop_flat_map(|n| prop::collection::vec(0..=n, n))
}

fn relpos_label() -> impl Strategy<Value = RelPosLabel> {
    prop_oneof![
        1 => Just(RelPosLabel::root()),
        6 => ((1i32..5), any::<bool>(), 0..TAGS.len()).prop_map(|(k, left, t)| {
            RelPosLabel::new(if left { -k } else { k }, TAGS[t]).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conllu_roundtrip(seed in any::<u64>()) {
        let corpus = random_corpus(&mut rng(seed), 4, 10);
        let text = write_conllu(&corpus);
        prop_assert_eq!(parse_conllu(&text).unwrap(), corpus);
    }

    #[test]
    fn validation_agrees_with_reachability(heads in head_vector(), policy in policy()) {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Token::new(i + 1, "w", "X", h, "dep"))
            .collect();
        let s = Sentence::new("s", tokens);
        let roots = heads.iter().filter(|&&h| h == 0).count();
        let expected = reaches_root(&heads) && (policy == RootPolicy::MultiRoot || roots == 1);
        prop_assert_eq!(validate_tree(&s, policy).is_ok(), expected);
    }

    #[test]
    fn relpos_roundtrip(seed in any::<u64>(), n in 1usize..16, policy in policy()) {
        let s = random_sentence(&mut rng(seed), "", n, policy);
        let labels = encode_relpos(&s);
        let decoded = decode_relpos(&labels, &s.upos(), &s.forms(), policy).unwrap();
        prop_assert_eq!(decoded.heads(), s.heads());
    }

    #[test]
    fn relpos_decoding_is_total(
        labels in prop::collection::vec(relpos_label(), 1..16),
        tag_seed in any::<u64>(),
        policy in policy(),
    ) {
        use rand::seq::SliceRandom;
        let mut r = rng(tag_seed);
        let tags: Vec<&str> = labels.iter().map(|_| *TAGS.choose(&mut r).unwrap()).collect();
        let forms = vec!["w"; labels.len()];
        let s = decode_relpos(&labels, &tags, &forms, policy).unwrap();
        prop_assert!(validate_tree(&s, policy).is_ok());
    }

    /// Labels only look at tokens between dependent and head: changing the
    /// tag of a token outside that window leaves the label unchanged.
    #[test]
    fn relpos_is_local(seed in any::<u64>(), n in 2usize..12, victim in 0usize..12) {
        let mut s = random_sentence(&mut rng(seed), "", n, RootPolicy::MultiRoot);
        let before = encode_relpos(&s);
        let victim = victim % n + 1;
        s.tokens[victim - 1].upos = "UNSEEN".into();
        let after = encode_relpos(&s);
        for (d, (a, b)) in before.iter().zip(&after).enumerate() {
            let d = d + 1;
            let h = s.tokens[d - 1].head;
            let window = h != 0 && victim != d && (d.min(h)..=d.max(h)).contains(&victim);
            if !window {
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn mst_output_is_a_valid_optimal_tree(seed in any::<u64>(), n in 1usize..25, policy in policy()) {
        let mut r = rng(seed);
        let m = random_matrix(&mut r, n, seed % 2 == 0);
        let heads = decode_mst(&m, policy).unwrap();
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| Token::new(i + 1, "w", "X", h, "dep"))
            .collect();
        prop_assert!(validate_tree(&Sentence::new("s", tokens), policy).is_ok());
        // No random tree of the same policy scores higher.
        for _ in 0..20 {
            let other = random_heads(&mut r, n, policy);
            prop_assert!(tree_score(&m, &other) <= tree_score(&m, &heads));
        }
    }

    #[test]
    fn mst_ignores_column_shifts(seed in any::<u64>(), n in 1usize..15, shift in -50i32..50) {
        let m = random_matrix(&mut rng(seed), n, true);
        let mut shifted = m.scores().clone();
        for (j, mut col) in shifted.columns_mut().into_iter().enumerate() {
            col += (shift * (j as i32 % 3 - 1)) as f64;
        }
        for policy in [RootPolicy::SingleRoot, RootPolicy::MultiRoot] {
            prop_assert_eq!(
                decode_mst(&ArcScoreMatrix::new(shifted.clone()).unwrap(), policy).unwrap(),
                decode_mst(&m, policy).unwrap()
            );
        }
    }

    #[test]
    fn biaffine_is_linear_in_the_bilinear_term(seed in any::<u64>(), alpha in -4.0f64..4.0) {
        use rand::Rng;
        let mut r = rng(seed);
        let (n, dh, dd) = (r.gen_range(1..6), r.gen_range(1..5), r.gen_range(1..5));
        let mut fill = |rows, cols| Array2::from_shape_simple_fn((rows, cols), || r.gen_range(-1.0..1.0));
        let (h, d, u) = (fill(n + 1, dh), fill(n, dd), fill(dh, dd));
        let score = |u: Array2<f64>| {
            let p = BiaffineParams::new(u, Array1::zeros(dh), Array1::zeros(dd), 0.0).unwrap();
            biaffine_scores(h.view(), d.view(), &p).unwrap().into_inner()
        };
        let base = score(u.clone());
        let scaled = score(&u * alpha);
        for (a, b) in scaled.iter().zip(base.iter()) {
            prop_assert!((a - alpha * b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn spans_agree_with_collapse(path in prop::collection::vec(0usize..5, 0..30)) {
        let v = vocab();
        let spans = extract_word_spans(&path, &v);
        let words: Vec<&str> = spans.iter().map(|s| s.word.as_str()).collect();
        prop_assert_eq!(words.join(" "), ctc_collapse(&path, &v));
    }

    #[test]
    fn spans_are_disjoint_and_cover_characters(path in prop::collection::vec(0usize..5, 0..30)) {
        let v = vocab();
        let spans = extract_word_spans(&path, &v);
        for w in spans.windows(2) {
            prop_assert!(w[0].end_frame < w[1].begin_frame);
        }
        for (frame, &symbol) in path.iter().enumerate() {
            let owners = spans
                .iter()
                .filter(|s| s.begin_frame <= frame && frame <= s.end_frame)
                .count();
            if symbol == v.space() {
                prop_assert_eq!(owners, 0);
            } else if symbol != v.blank() {
                prop_assert_eq!(owners, 1);
            }
        }
    }

    #[test]
    fn mean_pooling_is_order_free_and_bounded(seed in any::<u64>(), t in 1usize..12, d in 1usize..6) {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut r = rng(seed);
        let frames = Array2::from_shape_simple_fn((t, d), || r.gen_range(-3.0..3.0));
        let mut order: Vec<usize> = (0..t).collect();
        order.shuffle(&mut r);
        let permuted = frames.select(ndarray::Axis(0), &order);
        let span = [WordSpan::new("w", 0, t - 1)];
        let a = &pool_word_vectors(frames.view(), &span, &Pooling::Mean).unwrap()[0];
        let b = &pool_word_vectors(permuted.view(), &span, &Pooling::Mean).unwrap()[0];
        for j in 0..d {
            let col = frames.column(j);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((a[j] - b[j]).abs() < 1e-12);
            prop_assert!(lo - 1e-12 <= a[j] && a[j] <= hi + 1e-12);
        }
    }

    #[test]
    fn timestamp_frames_are_monotone(
        gaps in prop::collection::vec((0u64..400, 0u64..400), 1..10),
        rate in prop_oneof![Just(50.0), Just(100.0), 10.0f64..200.0],
    ) {
        let mut t = 0;
        let tokens: Vec<Token> = gaps
            .iter()
            .enumerate()
            .map(|(i, &(gap, len))| {
                let begin = t + gap;
                t = begin + len;
                Token::new(i + 1, "w", "X", 0, "dep").with_span(TimeSpan::new(begin, t).unwrap())
            })
            .collect();
        let frames = (t as f64 * rate / 1000.0) as usize + 1;
        let spans = spans_from_timestamps(&tokens, rate, frames).unwrap();
        for w in spans.windows(2) {
            prop_assert!(w[0].begin_frame <= w[1].begin_frame);
        }
        for s in &spans {
            prop_assert!(s.begin_frame <= s.end_frame && s.end_frame < frames);
        }
    }

    #[test]
    fn report_bounds_and_wer_consistency(seed in any::<u64>(), spec_seed in any::<u64>(), rate in 0.0f64..0.3) {
        let gold = random_corpus(&mut rng(seed), 5, 10);
        let spec = PerturbSpec {
            sub_rate: rate,
            ins_rate: rate,
            del_rate: rate,
            char_noise_rate: 0.2,
            seed: spec_seed,
        };
        let hyp = perturb_corpus(&gold, &spec).unwrap();
        let r = evaluate_corpus(&hyp, &gold, EvalOptions::default()).unwrap();
        prop_assert!(r.las <= r.uas && r.uas <= 1.0 && r.pos_acc <= 1.0);
        prop_assert_eq!(r.wer, r.counts.word_edits() as f64 / r.counts.ref_tokens as f64);
        let edits: usize = hyp
            .sentences
            .iter()
            .zip(&gold.sentences)
            .map(|(h, g)| dp_edit_distance(&h.forms(), &g.forms()))
            .sum();
        prop_assert_eq!(edits, r.counts.word_edits());
    }

    #[test]
    fn alignment_is_optimal(
        hyp in prop::collection::vec(0u8..4, 0..13),
        reference in prop::collection::vec(0u8..4, 0..13),
    ) {
        let ops = levenshtein_align(&hyp, &reference);
        let cost: usize = ops.iter().map(AlignOp::cost).sum();
        prop_assert_eq!(cost, dp_edit_distance(&hyp, &reference));
    }

    /// Removing tokens from a perfect parse, with orphans sent to the root,
    /// caps UAS at the surviving share; the cap is reached when no survivor
    /// depended on a removed token.
    #[test]
    fn deletion_penalty(seed in any::<u64>(), n in 2usize..12, mask in any::<u16>()) {
        let mut gold = random_sentence(&mut rng(seed), "s", n, RootPolicy::MultiRoot);
        // Distinct forms make the alignment unambiguous.
        for t in &mut gold.tokens {
            t.form = format!("w{}", t.index);
        }
        let keep: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let kept = keep.iter().filter(|&&k| k).count();
        prop_assume!(kept > 0);
        let mut new_index = vec![0; n + 1];
        let mut next = 0;
        for i in 0..n {
            if keep[i] {
                next += 1;
                new_index[i + 1] = next;
            }
        }
        let mut orphaned = false;
        let tokens = gold
            .tokens
            .iter()
            .filter(|t| keep[t.index - 1])
            .map(|t| {
                let head = if t.head == 0 || keep[t.head - 1] {
                    new_index[t.head]
                } else {
                    orphaned = true;
                    0
                };
                Token { index: new_index[t.index], head, ..t.clone() }
            })
            .collect();
        let hyp = Corpus::new(vec![Sentence::new("s", tokens)]);
        let r = evaluate_corpus(&hyp, &Corpus::new(vec![gold]), EvalOptions::default()).unwrap();
        let cap = kept as f64 / n as f64;
        prop_assert!(r.uas <= cap + 1e-12);
        if !orphaned {
            prop_assert_eq!(r.counts.correct_heads, kept);
        }
    }

    /// With a fixed seed, a higher deletion rate removes a superset of tokens.
    #[test]
    fn perturbation_is_nested(seed in any::<u64>(), spec_seed in any::<u64>(), low in 0.0f64..0.5, extra in 0.0f64..0.5) {
        let gold = random_corpus(&mut rng(seed), 6, 10);
        let run = |del_rate| {
            let spec = PerturbSpec { del_rate, seed: spec_seed, ..PerturbSpec::default() };
            let hyp = perturb_corpus(&gold, &spec).unwrap();
            evaluate_corpus(&hyp, &gold, EvalOptions::default()).unwrap()
        };
        let (a, b) = (run(low), run(low + extra));
        prop_assert!(b.counts.hyp_tokens <= a.counts.hyp_tokens);
        prop_assert!(b.counts.deletions >= a.counts.deletions);
    }
}
