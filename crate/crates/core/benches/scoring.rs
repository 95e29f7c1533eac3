use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minictx::corpus::squad::examples_from_squad;
use minictx::embed::EmbeddingTable;
use minictx::exec::Execution;
use minictx::neural::Tensor;
use minictx::pipeline::{select_dataset, Scorer};
use minictx::policy::Policy;
use minictx::selector::{score_paragraph, SelectorParams};
use minictx::synthetic::{generate, SyntheticConfig};

fn bench(c: &mut Criterion) {
    let docs = examples_from_squad(
        &generate(&SyntheticConfig {
            n_questions: 20,
            sentences_per_doc: 20,
            vocab_size: 2000,
            seed: 1,
        })
        .unwrap()
        .file,
    );
    let table = EmbeddingTable::hashed(32, 0);
    let params = SelectorParams::new(32, 32, 1);
    let ex = &docs[0];
    let sentences: Vec<Tensor> = (0..ex.sentences.len())
        .map(|i| table.embed_tokens(ex.sentence_tokens(i)))
        .collect();
    let question = table.embed_tokens(&ex.question_tokens);

    let mut group = c.benchmark_group("score_paragraph");
    group.sample_size(20);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| score_paragraph(&sentences, &question, &params, true, exec))
        });
    }
    group.finish();

    let scorer = Scorer::Neural {
        params: &params,
        table: &table,
        normalize: true,
    };
    let mut group = c.benchmark_group("select_dataset");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| select_dataset(&docs, scorer, Policy::TopK(1), 200, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
