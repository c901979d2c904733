#include <doctest.h>

#include <cmath>

#include "pcv2/harness.hpp"

using namespace pcv2;

TEST_CASE("markov source is seeded and deterministic") {
  MarkovSource src{16, 0.8, {1.0, 1.0}, 5};
  TokenGrid a = gen_markov_grid(src, 8, 8, 3);
  TokenGrid b = gen_markov_grid(src, 8, 8, 3);
  CHECK(a == b);
  TokenGrid c = gen_markov_grid(src, 8, 8, 4);
  CHECK(a != c);
}

TEST_CASE("p=0 gives an i.i.d. uniform source") {
  MarkovSource src{4, 0.0, {1.0, 1.0}, 11};
  auto corpus = gen_markov_corpus(src, 64, 64, 4);
  double h0 = empirical_entropy(corpus, ContextSpec::kOrder0);
  CHECK(h0 == doctest::Approx(2.0).epsilon(0.02));
  double h1 = empirical_entropy(corpus, ContextSpec::kOrder1);
  CHECK(h1 == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("high persistence collapses the conditional entropy") {
  MarkovSource src{64, 0.95, {1.0, 1.0}, 13};
  auto corpus = gen_markov_corpus(src, 64, 64, 4);
  double h0 = empirical_entropy(corpus, ContextSpec::kOrder0);
  double h1 = empirical_entropy(corpus, ContextSpec::kOrder1);
  CHECK(h1 < h0);          // data processing on counts
  CHECK(h1 < 0.5 * 6.0);   // far below log2 V
}

TEST_CASE("constant corpus has zero entropy") {
  TokenGrid g(8, 8, 4);
  for (auto& t : g.indices) t = 2;
  std::vector<TokenGrid> corpus{g};
  CHECK(empirical_entropy(corpus, ContextSpec::kOrder0) == 0.0);
  CHECK(empirical_entropy(corpus, ContextSpec::kOrder1) == 0.0);
}

TEST_CASE("order-0 dominates order-1 on markov corpora") {
  for (u64 seed : {1ull, 2ull, 3ull}) {
    MarkovSource src{16, 0.7, {1.0, 1.0}, seed};
    auto corpus = gen_markov_corpus(src, 32, 32, 3);
    CHECK(empirical_entropy(corpus, ContextSpec::kOrder0) + 1e-9 >=
          empirical_entropy(corpus, ContextSpec::kOrder1));
  }
}

TEST_CASE("corpus spec parsing and split determinism") {
  CorpusSpec spec = parse_corpus_spec("markov:v=32,p=0.85,h=8,w=12,train=6,test=3,seed=21");
  CHECK(spec.source.V == 32);
  CHECK(spec.source.persistence == doctest::Approx(0.85));
  CHECK(spec.h == 8);
  CHECK(spec.w == 12);
  auto train = spec.train();
  auto test = spec.test();
  CHECK(train.size() == 6);
  CHECK(test.size() == 3);
  CHECK(train[0] != test[0]);  // disjoint index streams
  CHECK(spec.train()[0] == train[0]);

  CHECK_THROWS_AS(parse_corpus_spec("gaussian:v=1"), Error);
  CHECK_THROWS_AS(parse_corpus_spec("markov:bogus=1"), Error);
}

TEST_CASE("table report: baseline row, savings arithmetic, csv schema") {
  CorpusSpec spec = parse_corpus_spec("markov:v=16,p=0.9,h=8,w=8,train=24,test=6,seed=33");
  auto train = spec.train();
  auto test = spec.test();

  MaskSchedule ckbd = checkerboard_schedule(8, 8);
  MaskSchedule qlds = qlds_schedule(8, 8, 2.2, 5);
  CountingModel counting(16);
  counting.prime(train, qlds);

  std::vector<BenchEntry> entries;
  entries.push_back({"counting", &counting, "checkerboard", &ckbd});
  entries.push_back({"counting", &counting, "qlds5", &qlds});
  Report report = run_table3(entries, test);

  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].model == "uniform");
  CHECK(report.rows[0].savings_pct == 0.0);
  // V = 16 is a power of two: the baseline row equals rate_uniform exactly.
  CHECK(report.rows[0].bpp == rate_uniform(8, 8, 16, 512, 512));

  const ReportRow* qlds_row = report.find("counting", "qlds5");
  REQUIRE(qlds_row != nullptr);
  CHECK(qlds_row->savings_pct ==
        doctest::Approx(savings_percent(qlds_row->bpp, report.rows[0].bpp)).epsilon(1e-12));
  CHECK(qlds_row->savings_pct > 0.0);  // correlated corpus

  std::string csv = report.to_csv();
  CHECK(csv.rfind("model,schedule,tokens,bpp,savings_pct,header_bits\n", 0) == 0);
  CHECK(csv.find("uniform,-,64,") != std::string::npos);

  // Deterministic regeneration.
  Report again = run_table3(entries, test);
  CHECK(again.to_csv() == csv);
}

TEST_CASE("report aborts on a model/schedule shape mismatch") {
  CorpusSpec spec = parse_corpus_spec("markov:v=8,p=0.5,h=4,w=4,train=2,test=2,seed=3");
  auto test = spec.test();
  MaskSchedule wrong = checkerboard_schedule(6, 6);
  UniformModel uniform(8);
  std::vector<BenchEntry> entries{{"uniform", &uniform, "bad", &wrong}};
  CHECK_THROWS_AS(run_table3(entries, test), Error);
}
