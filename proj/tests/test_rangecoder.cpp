#include <doctest.h>

#include <cmath>

#include "pcv2/rangecoder.hpp"
#include "pcv2/rng.hpp"

using namespace pcv2;

namespace {

struct Symbolizer {
  std::vector<u32> freq;
  std::vector<u32> cum;

  explicit Symbolizer(std::vector<u32> f) : freq(std::move(f)) {
    cum.resize(freq.size() + 1, 0);
    for (std::size_t i = 0; i < freq.size(); ++i) cum[i + 1] = cum[i] + freq[i];
  }
  u32 total() const { return cum.back(); }
};

}  // namespace

TEST_CASE("range coder round trips random sequences under random tables") {
  CounterRng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    u32 v = 2 + static_cast<u32>(rng.next_below(40));
    std::vector<u32> freq(v, 1);
    u32 budget = RangeEncoder::kMaxTotal - v;
    // Random frequency split of the 16-bit total.
    for (u32 i = 0; i < v; ++i) {
      u32 take = static_cast<u32>(rng.next_below(budget / (v - i) * 2 + 1));
      take = std::min(take, budget);
      freq[i] += take;
      budget -= take;
    }
    freq[v - 1] += budget;
    Symbolizer table(freq);
    REQUIRE(table.total() == RangeEncoder::kMaxTotal);

    std::size_t len = 1 + rng.next_below(300);
    std::vector<u32> symbols(len);
    for (auto& s : symbols) s = static_cast<u32>(rng.next_below(v));

    RangeEncoder enc;
    for (u32 s : symbols) enc.encode(table.cum[s], table.freq[s], table.total());
    auto payload = enc.finish();

    RangeDecoder dec(payload);
    for (u32 expected : symbols) {
      u32 target = dec.decode_target(table.total());
      u32 s = 0;
      while (table.cum[s + 1] <= target) ++s;
      dec.consume(table.cum[s], table.freq[s], table.total());
      REQUIRE(s == expected);
    }
  }
}

TEST_CASE("payload lands in [ideal, ideal + 32 bits]") {
  CounterRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    u32 v = 2 + static_cast<u32>(rng.next_below(100));
    u32 base = RangeEncoder::kMaxTotal / v;
    std::vector<u32> freq(v, base);
    freq[0] += RangeEncoder::kMaxTotal - base * v;
    Symbolizer table(freq);

    std::size_t len = 1 + rng.next_below(800);
    double ideal_bits = 0.0;
    RangeEncoder enc;
    for (std::size_t i = 0; i < len; ++i) {
      u32 s = static_cast<u32>(rng.next_below(v));
      enc.encode(table.cum[s], table.freq[s], table.total());
      ideal_bits -= std::log2(static_cast<double>(table.freq[s]) / table.total());
    }
    double payload_bits = static_cast<double>(enc.finish().size()) * 8.0;
    CHECK(payload_bits >= ideal_bits);
    CHECK(payload_bits <= ideal_bits + 32.0);
  }
}

TEST_CASE("identical inputs give byte-identical payloads") {
  Symbolizer table(std::vector<u32>{30000, 20000, 15536});
  auto run = [&]() {
    RangeEncoder enc;
    CounterRng rng(5);
    for (int i = 0; i < 500; ++i) {
      u32 s = static_cast<u32>(rng.next_below(3));
      enc.encode(table.cum[s], table.freq[s], table.total());
    }
    return enc.finish();
  };
  CHECK(run() == run());
}

TEST_CASE("empty stream encodes to an empty payload") {
  RangeEncoder enc;
  CHECK(enc.finish().empty());
}

TEST_CASE("skewed distributions still round trip") {
  // Worst-case carry behavior: the dominant symbol sits at the top of the table.
  std::vector<u32> freq(4, 1);
  freq[3] = RangeEncoder::kMaxTotal - 3;
  Symbolizer table(freq);
  std::vector<u32> symbols(2000, 3);
  symbols[100] = 0;
  symbols[1500] = 2;

  RangeEncoder enc;
  for (u32 s : symbols) enc.encode(table.cum[s], table.freq[s], table.total());
  auto payload = enc.finish();

  RangeDecoder dec(payload);
  for (u32 expected : symbols) {
    u32 target = dec.decode_target(table.total());
    u32 s = 0;
    while (table.cum[s + 1] <= target) ++s;
    dec.consume(table.cum[s], table.freq[s], table.total());
    REQUIRE(s == expected);
  }
}

TEST_CASE("encoder validates intervals") {
  RangeEncoder enc;
  CHECK_THROWS_AS(enc.encode(0, 0, 100), Error);       // zero freq
  CHECK_THROWS_AS(enc.encode(90, 20, 100), Error);     // exceeds total
  CHECK_THROWS_AS(enc.encode(0, 1, 1u << 17), Error);  // total too large
}
