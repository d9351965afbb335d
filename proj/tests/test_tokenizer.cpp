// Copyright 2026 The unilog Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "unilog/log_ingest.hpp"
#include "unilog/tokenizer.hpp"

using namespace unilog;
using namespace unilog::tokenizer;

namespace {

using Strings = std::vector<std::string>;

// Independent cost of one piece: table words by rank, digit runs and hex
// literals at a flat cost, anything else per character.
double oracle_cost(const std::string& piece, const UnigramTable& table) {
  std::string lower = piece;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  double cost = 1000.0 * static_cast<double>(piece.size());
  if (auto r = table.rank(lower)) {
    cost = std::min(cost, std::log((static_cast<double>(*r) + 1.0) * std::log(static_cast<double>(table.size()))));
  }
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  auto hex = [&](char c) { return digit(c) || (c >= 'a' && c <= 'f'); };
  bool numeric = std::all_of(lower.begin(), lower.end(), digit);
  if (!numeric && lower.size() > 2 && lower[0] == '0' && lower[1] == 'x') {
    numeric = std::all_of(lower.begin() + 2, lower.end(), hex);
  }
  if (!numeric) numeric = std::all_of(lower.begin(), lower.end(), hex) && std::any_of(lower.begin(), lower.end(), digit);
  if (numeric) cost = std::min(cost, 1.0);
  return cost;
}

// Minimum cost over all 2^(n-1) ways to cut the fragment.
double brute_force_cost(const std::string& s, const UnigramTable& table) {
  const std::size_t n = s.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
    double total = 0.0;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      if (i == n || (cuts >> (i - 1)) & 1u) {
        total += oracle_cost(s.substr(start, i - start), table);
        start = i;
      }
    }
    best = std::min(best, total);
  }
  return best;
}

}  // namespace

TEST_CASE("split_delimiters") {
  CHECK(split_delimiters("LocalFaultAlarm_clear") == Strings{"LocalFaultAlarm", "clear"});
  CHECK(split_delimiters("").empty());
  CHECK(split_delimiters("a=b-c") == Strings{"a", "b", "c"});
  CHECK(split_delimiters(" x.y,z:w/v;u_t=s-r\"q  p\t") == Strings{"x", "y", "z", "w", "v", "u", "t", "s", "r", "q", "p"});
  CHECK(split_delimiters("...") .empty());
}

TEST_CASE("segment_unigram") {
  const UnigramTable& table = UnigramTable::embedded();
  CHECK(segment_unigram("LocalFaultAlarm", table) == Strings{"Local", "Fault", "Alarm"});
  CHECK(segment_unigram("up", table) == Strings{"up"});
  SUBCASE("pieces concatenate back to the fragment") {
    for (const std::string s : {"PacketResponder", "blk38865", "zzqxv", "DataXceiver", "a"}) {
      std::string joined;
      for (const auto& p : segment_unigram(s, table)) joined += p;
      CHECK(joined == s);
    }
  }
  SUBCASE("a custom table") {
    const UnigramTable t({"foobar", "bar", "foo"});
    CHECK(segment_unigram("foobarbar", t) == Strings{"foobar", "bar"});
    CHECK(segment_unigram("qq", t) == Strings{"qq"});
  }
}

TEST_CASE("dynamic programming matches brute force on 200 fragments") {
  const UnigramTable& table = UnigramTable::embedded();
  Rng rng(2026);
  const auto& words = table.words();
  int checked = 0;
  for (int f = 0; f < 200; ++f) {
    std::string s;
    const std::size_t target = 1 + rng.uniform_int(12);
    while (s.size() < target) {
      const auto kind = rng.uniform_int(4);
      if (kind < 2) {
        s += words[rng.uniform_int(std::min<std::size_t>(words.size(), 3000))];
      } else if (kind == 2) {
        s += static_cast<char>('0' + rng.uniform_int(10));
      } else {
        s += static_cast<char>('a' + rng.uniform_int(26));
      }
    }
    s.resize(target);
    if (rng.bernoulli(0.5)) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    const auto pieces = segment_unigram(s, table);
    double dp = 0.0;
    std::string joined;
    for (const auto& p : pieces) {
      dp += oracle_cost(p, table);
      joined += p;
    }
    REQUIRE(joined == s);
    const double bf = brute_force_cost(s, table);
    INFO("fragment: ", s);
    CHECK(dp == doctest::Approx(bf).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("normalize") {
  CHECK(normalize("Alarm") == "alarm");
  CHECK(normalize("12345") == kNumToken);
  CHECK(normalize("0x1f3a") == kNumToken);
  CHECK(normalize("deadbeef1") == kNumToken);
  CHECK(normalize("blocks") == "block");
  CHECK(normalize("closing") == "close");
  CHECK(normalize("stopped") == "stop");
  CHECK(normalize("received") == "receive");
  CHECK(normalize("status") == "status");
  CHECK(normalize("class") == "class");
  CHECK(normalize("during") == "during");
}

TEST_CASE("tokenize walks through the documented example") {
  CHECK(tokenize("LocalFaultAlarm_clear") == Strings{"local", "fault", "alarm", "clear"});
}

TEST_CASE("token sequence invariants") {
  const auto syn = ingest::generate_synthetic_corpus({10, 300, 0.1, 11});
  for (const auto& r : syn.records) {
    const auto spans = tokenize_with_spans(r.raw_text);
    std::size_t prev = 0;
    for (const auto& s : spans) {
      REQUIRE(!s.token.empty());
      REQUIRE(s.begin >= prev);
      REQUIRE(s.end > s.begin);
      prev = s.end;
      for (char c : s.token) {
        REQUIRE_FALSE(is_delimiter(c));
        REQUIRE_FALSE(std::isspace(static_cast<unsigned char>(c)));
        REQUIRE_FALSE(std::isupper(static_cast<unsigned char>(c)));
      }
    }
  }
}

TEST_CASE("every synthetic pool word survives tokenization as one token") {
  for (const auto& pool : {ingest::synthetic_normal_words(), ingest::synthetic_anomaly_words()}) {
    for (std::string_view w : pool) {
      const auto toks = tokenize(w);
      INFO("word: ", w);
      REQUIRE(toks.size() == 1);
      CHECK(toks[0] == normalize(w));
    }
  }
}

TEST_CASE("vocabulary") {
  SUBCASE("reserved layout") {
    const Vocabulary v;
    CHECK(v.size() == static_cast<std::size_t>(SpecialIds::kFirstRegular));
    CHECK(v.token(SpecialIds::kNum) == kNumToken);
    CHECK(v.id("never-seen") == SpecialIds::kUnk);
    CHECK(SpecialIds::kFirstRegular - SpecialIds::kFirstSentinel == 68);
    for (TaskKind t : kAllTasks) {
      CHECK(v.id(task_prefix_token(t)) == SpecialIds::task_prefix(t));
      CHECK(task_from_prefix_token(task_prefix_token(t)) == t);
    }
    std::set<std::string> sentinel_text;
    for (std::size_t i = 0; i < kNumSentinels; ++i) sentinel_text.insert(v.token(SpecialIds::sentinel(i)));
    CHECK(sentinel_text.size() == kNumSentinels);
  }
  SUBCASE("frequency order and round trip") {
    std::vector<Strings> corpus = {{"b", "a", "b"}, {"c", "b", "a"}};
    const Vocabulary v = build_vocab(corpus);
    CHECK(v.token(SpecialIds::kFirstRegular) == "b");
    CHECK(v.token(SpecialIds::kFirstRegular + 1) == "a");
    CHECK(v.token(SpecialIds::kFirstRegular + 2) == "c");
    const Vocabulary back = Vocabulary::parse(v.serialize());
    CHECK(back == v);
    CHECK(back.content_hash() == v.content_hash());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto id = static_cast<TokenId>(i);
      CHECK(v.id(v.token(id)) == id);
    }
    CHECK(build_vocab(corpus, 2).size() == static_cast<std::size_t>(SpecialIds::kFirstRegular) + 2);
  }
  SUBCASE("file round trip") {
    test::TempDir dir;
    std::vector<Strings> corpus = {{"x", "y"}};
    const Vocabulary v = build_vocab(corpus);
    v.save(dir / "v.txt");
    CHECK(Vocabulary::load(dir / "v.txt") == v);
  }
  SUBCASE("corrupt text is rejected") {
    CHECK_THROWS_AS(Vocabulary::parse("garbage"), DataError);
  }
}
