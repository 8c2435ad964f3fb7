#include "ssmix/corpus.hpp"
#include "ssmix/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace ssmix;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  const auto dir = fs::temp_directory_path() / "ssmix_corpus_tests";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << contents;
  return path;
}

} // namespace

TEST_CASE("tokenize lowercases and splits sentence punctuation") {
  CHECK(tokenize("Fun for only children.") == std::vector<std::string>{"fun", "for", "only", "children", "."});
  CHECK(tokenize("  zzz-unknown-word ") == std::vector<std::string>{"zzz-unknown-word"});
  CHECK(tokenize("don't STOP") == std::vector<std::string>{"don't", "stop"});
  CHECK(detokenize({"problems", "for", "only", "children", "."}) == "problems for only children.");
}

TEST_CASE("build_vocab") {
  SUBCASE("min_count filters rare tokens") {
    const auto v = build_vocab({"a b", "a c"}, 2);
    CHECK(v.size() == 5);
    CHECK(v.contains("a"));
    CHECK(v.id("b") == kUnk);
    CHECK(v.id("c") == kUnk);
  }
  SUBCASE("reserved ids are fixed") {
    const auto v = build_vocab({"x"}, 1);
    CHECK(v.size() == 5);
    CHECK(v.id("[PAD]") == kPad);
    CHECK(v.id("[UNK]") == kUnk);
    CHECK(v.id("[CLS]") == kCls);
    CHECK(v.id("[SEP]") == kSep);
    CHECK(v.id("x") == 4);
  }
  SUBCASE("empty corpus is an error") {
    CHECK_THROWS_AS(build_vocab({}, 1), DataError);
    CHECK_THROWS_AS(build_vocab({"   "}, 1), DataError);
  }
  SUBCASE("synthetic corpus with a 50-word lexicon") {
    SyntheticSpec spec;
    spec.n_train = 1000;
    spec.n_valid = 2;
    spec.lexicon_size = 50;
    const auto data = generate_synthetic(spec);
    std::set<std::string> distinct;
    for (const auto& text : data.train.all_texts()) {
      for (const auto& tok : tokenize(text)) {
        distinct.insert(tok);
      }
    }
    REQUIRE(distinct.size() == 50);
    CHECK(build_vocab(data.train.all_texts(), 1).size() == 54);
  }
}

TEST_CASE("vocabulary is a bijection and survives save/load") {
  const auto v = build_vocab({"the cat sat on the mat"}, 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(v.id(v.token(static_cast<TokenId>(i))) == static_cast<TokenId>(i));
  }
  const auto path = temp_file("vocab.txt", "");
  v.save(path);
  const auto back = Vocabulary::load(path);
  CHECK(back.tokens() == v.tokens());
}

TEST_CASE("encode") {
  const auto v = build_vocab({"fun for children", "one two three four five six seven eight nine ten"}, 1);
  SUBCASE("layout") {
    const auto seq = encode(v, "fun for children", 128);
    CHECK(seq.ids == std::vector<TokenId>{kCls, v.id("fun"), v.id("for"), v.id("children"), kSep});
    CHECK(seq.special_mask == std::vector<bool>{true, false, false, false, true});
    CHECK(seq.content_length() == 3);
  }
  SUBCASE("prefix truncation") {
    const auto seq = encode(v, "one two three four five six seven eight nine ten", 7);
    CHECK(seq.size() == 7);
    CHECK(seq.content_length() == 5);
    CHECK(seq.ids[1] == v.id("one"));
    CHECK(seq.ids[5] == v.id("five"));
    CHECK(seq.ids.back() == kSep);
  }
  SUBCASE("OOV maps to UNK") {
    const auto seq = encode(v, "zzz-unknown-word", 128);
    CHECK(seq.ids == std::vector<TokenId>{kCls, kUnk, kSep});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(encode(v, "   ", 128), DataError);
    CHECK_THROWS_AS(encode(v, "fun", 2), UsageError);
  }
  SUBCASE("decode round-trips in-vocabulary text") {
    CHECK(decode(v, encode(v, "  Fun   for children ", 128)) == "fun for children");
  }
}

TEST_CASE("special mask marks exactly CLS/SEP") {
  const auto v = build_vocab({"a b c"}, 1);
  const auto seq = encode(v, "a b c zz", 128);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq.special_mask[i] == (seq.ids[i] == kCls || seq.ids[i] == kSep));
  }
  CHECK_NOTHROW(validate(seq));
  auto broken = seq;
  broken.special_mask[1] = true;
  CHECK_THROWS_AS(validate(broken), DataError);
}

TEST_CASE("load_dataset") {
  SUBCASE("single TSV") {
    const auto path = temp_file("single.tsv", "great movie\t1\nawful plot\t0\nfine\t1\n");
    const auto d = load_dataset(path, FileFormat::tsv, Schema::single);
    REQUIRE(d.examples.size() == 3);
    CHECK(d.examples[0].text1 == "great movie");
    CHECK(d.labels.name(d.examples[0].label) == "1");
    CHECK(d.examples[0].label == 0); // first-seen order
    CHECK(d.examples[1].label == 1);
    CHECK(d.num_classes() == 2);
    CHECK_FALSE(d.is_paired);
  }
  SUBCASE("paired JSONL") {
    const auto path = temp_file("paired.jsonl",
                                "{\"text1\":\"a\",\"text2\":\"b\",\"label\":\"entailment\"}\n"
                                "{\"text1\":\"c\",\"text2\":\"d\",\"label\":\"neutral\"}\n"
                                "{\"text1\":\"e\",\"text2\":\"f\",\"label\":\"contradiction\"}\n");
    const auto d = load_dataset(path, FileFormat::jsonl, Schema::paired);
    REQUIRE(d.examples.size() == 3);
    CHECK(d.is_paired);
    CHECK(d.examples[0].text2 == "b");
    CHECK(d.num_classes() == 3);
  }
  SUBCASE("missing field names the row") {
    const auto path = temp_file("missing.jsonl", "{\"text\":\"a\",\"label\":\"x\"}\n{\"text\":\"b\"}\n");
    try {
      load_dataset(path, FileFormat::jsonl, Schema::single);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
      CHECK(std::string(e.what()).find("label") != std::string::npos);
    }
  }
  SUBCASE("wrong TSV arity") {
    const auto path = temp_file("arity.tsv", "a\tb\t1\n");
    CHECK_THROWS_AS(load_dataset(path, FileFormat::tsv, Schema::single), DataError);
  }
  SUBCASE("non-train split needs a label map and rejects unknown labels") {
    const auto train = temp_file("t.tsv", "a\tpos\nb\tneg\n");
    const auto valid = temp_file("v.tsv", "c\tneg\nd\tmaybe\n");
    CHECK_THROWS_AS(load_dataset(valid, FileFormat::tsv, Schema::single, Split::valid), DataError);
    const auto t = load_dataset(train, FileFormat::tsv, Schema::single);
    try {
      load_dataset(valid, FileFormat::tsv, Schema::single, Split::valid, &t.labels);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("label map sidecar round trip") {
    LabelMap m;
    m.index_or_add("neg");
    m.index_or_add("pos");
    const auto path = temp_file("labels.tsv", "");
    m.save(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "neg\t0");
    CHECK(LabelMap::load(path).names() == m.names());
  }
}

TEST_CASE("generate_synthetic") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.n_train = 2000;
  spec.n_valid = 500;
  spec.seed = 7;

  SUBCASE("deterministic under a seed") {
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    REQUIRE(a.train.examples.size() == b.train.examples.size());
    for (std::size_t i = 0; i < a.train.examples.size(); ++i) {
      CHECK(a.train.examples[i].text1 == b.train.examples[i].text1);
      CHECK(a.train.examples[i].label == b.train.examples[i].label);
    }
    spec.seed = 8;
    const auto c = generate_synthetic(spec);
    CHECK(c.train.examples[0].text1 != a.train.examples[0].text1);
  }
  SUBCASE("balanced classes and sentence shape") {
    const auto d = generate_synthetic(spec);
    std::vector<std::size_t> counts(2, 0);
    for (const auto& ex : d.train.examples) {
      ++counts[ex.label];
      const auto n = tokenize(ex.text1).size();
      CHECK(n >= 6);
      CHECK(n <= 12);
    }
    CHECK(counts[0] + 1 >= counts[1]);
    CHECK(counts[1] + 1 >= counts[0]);
  }
  SUBCASE("keyword majority vote is a perfect classifier") {
    for (const std::size_t classes : {2, 6}) {
      spec.num_classes = classes;
      const auto d = generate_synthetic(spec);
      for (const auto& ex : d.valid.examples) {
        const auto topic = keyword_topic(ex.text1);
        REQUIRE(topic.has_value());
        CHECK(d.valid.labels.name(ex.label) == "c" + std::to_string(*topic));
      }
    }
  }
  SUBCASE("paired task labels match iff topics agree") {
    spec.task = TaskKind::paired;
    spec.num_classes = 4;
    const auto d = generate_synthetic(spec);
    CHECK(d.valid.is_paired);
    CHECK(d.valid.num_classes() == 2);
    for (const auto& ex : d.valid.examples) {
      const bool same = keyword_topic(ex.text1) == keyword_topic(*ex.text2);
      CHECK(d.valid.labels.name(ex.label) == (same ? "match" : "mismatch"));
    }
  }
  SUBCASE("preconditions") {
    spec.num_classes = 1;
    CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
    spec.num_classes = 3;
    spec.n_valid = 2;
    CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
  }
}
