#include "ssmix/corpus.hpp"

#include "ssmix/error.hpp"
#include "ssmix/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ssmix {

namespace {

const std::array<std::string, kNumReserved> kReservedNames = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

bool is_split_punct(char c) {
  switch (c) {
  case '.':
  case ',':
  case '!':
  case '?':
  case ';':
  case ':':
  case '"':
  case '(':
  case ')':
    return true;
  default:
    return false;
  }
}

bool attaches_left(const std::string& tok) {
  return tok.size() == 1 && tok[0] != '(' && tok[0] != '"' && is_split_punct(tok[0]);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) {
      break;
    }
    start = tab + 1;
  }
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  };
  for (const char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (is_split_punct(raw)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty() && !attaches_left(tok) && out.back() != '(') {
      out.push_back(' ');
    }
    out += tok;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (const auto& name : kReservedNames) {
    add(name);
  }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kNumReserved ||
      !std::equal(kReservedNames.begin(), kReservedNames.end(), tokens.begin())) {
    throw DataError("vocabulary must start with [PAD] [UNK] [CLS] [SEP]");
  }
  Vocabulary vocab;
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (vocab.contains(tokens[i])) {
      throw DataError("duplicate vocabulary token '" + tokens[i] + "'");
    }
    vocab.add(tokens[i]);
  }
  return vocab;
}

TokenId Vocabulary::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return token_to_id_.contains(std::string(token));
}

TokenId Vocabulary::add(const std::string& token) {
  const auto [it, inserted] =
      token_to_id_.try_emplace(token, static_cast<TokenId>(id_to_token_.size()));
  if (inserted) {
    id_to_token_.push_back(token);
  }
  return it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write vocabulary " + path.string());
  }
  for (const auto& tok : id_to_token_) {
    out << tok << '\n';
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read vocabulary " + path.string());
  }
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) {
    tokens.push_back(strip_cr(line));
  }
  return from_tokens(std::move(tokens));
}

Vocabulary build_vocab(const std::vector<std::string>& texts, std::size_t min_count) {
  if (texts.empty()) {
    throw DataError("cannot build a vocabulary from an empty corpus");
  }
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& tok : tokenize(text)) {
      if (counts[tok]++ == 0) {
        order.push_back(tok);
      }
    }
  }
  if (order.empty()) {
    throw DataError("cannot build a vocabulary from an empty corpus");
  }
  Vocabulary vocab;
  for (const auto& tok : order) {
    if (counts[tok] >= min_count && !vocab.contains(tok)) {
      vocab.add(tok);
    }
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// TokenSequence

std::size_t TokenSequence::content_length() const {
  return static_cast<std::size_t>(std::count(special_mask.begin(), special_mask.end(), false));
}

std::vector<std::size_t> TokenSequence::content_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < special_mask.size(); ++i) {
    if (!special_mask[i]) {
      out.push_back(i);
    }
  }
  return out;
}

TokenSequence TokenSequence::from_content(const std::vector<TokenId>& content) {
  TokenSequence seq;
  seq.ids.reserve(content.size() + 2);
  seq.ids.push_back(kCls);
  seq.ids.insert(seq.ids.end(), content.begin(), content.end());
  seq.ids.push_back(kSep);
  seq.special_mask.assign(seq.ids.size(), false);
  seq.special_mask.front() = true;
  seq.special_mask.back() = true;
  return seq;
}

void validate(const TokenSequence& seq) {
  if (seq.ids.size() != seq.special_mask.size()) {
    throw DataError("token sequence ids and special mask differ in length");
  }
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const bool special = seq.ids[i] == kCls || seq.ids[i] == kSep || seq.ids[i] == kPad;
    if (special != seq.special_mask[i]) {
      throw DataError("special mask disagrees with token id at position " + std::to_string(i));
    }
  }
  if (seq.content_length() == 0) {
    throw DataError("token sequence has no content tokens");
  }
}

TokenSequence encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len) {
  if (max_len < 3) {
    throw UsageError("max_len must be at least 3");
  }
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    throw DataError("text has no tokens: '" + std::string(text) + "'");
  }
  std::vector<TokenId> content;
  const std::size_t keep = std::min(tokens.size(), max_len - 2);
  content.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    content.push_back(vocab.id(tokens[i]));
  }
  return TokenSequence::from_content(content);
}

std::string decode(const Vocabulary& vocab, const TokenSequence& seq) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (!seq.special_mask[i]) {
      tokens.push_back(vocab.token(seq.ids[i]));
    }
  }
  return detokenize(tokens);
}

// ---------------------------------------------------------------------------
// Enums

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw UsageError("unknown split '" + std::string(s) + "'");
}

Schema parse_schema(std::string_view s) {
  if (s == "single") return Schema::single;
  if (s == "paired") return Schema::paired;
  throw UsageError("unknown schema '" + std::string(s) + "'");
}

FileFormat parse_format(std::string_view s) {
  if (s == "tsv") return FileFormat::tsv;
  if (s == "jsonl") return FileFormat::jsonl;
  throw UsageError("unknown format '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
  case Split::train:
    return "train";
  case Split::valid:
    return "valid";
  case Split::test:
    return "test";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// LabelMap

std::size_t LabelMap::index_or_add(const std::string& label) {
  const auto [it, inserted] = index_.try_emplace(label, names_.size());
  if (inserted) {
    names_.push_back(label);
  }
  return it->second;
}

std::optional<std::size_t> LabelMap::find(const std::string& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

void LabelMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write label map " + path.string());
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out << names_[i] << '\t' << i << '\n';
  }
}

LabelMap LabelMap::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read label map " + path.string());
  }
  std::vector<std::pair<std::size_t, std::string>> rows;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const auto fields = split_tabs(line);
    std::size_t index = 0;
    const auto& f = fields.back();
    if (fields.size() != 2 ||
        std::from_chars(f.data(), f.data() + f.size(), index).ec != std::errc{}) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected label<TAB>index");
    }
    rows.emplace_back(index, fields[0]);
  }
  std::sort(rows.begin(), rows.end());
  LabelMap map;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != i) {
      throw DataError(path.string() + ": label indices must be contiguous from 0");
    }
    map.index_or_add(rows[i].second);
  }
  return map;
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<std::string> TextDataset::all_texts() const {
  std::vector<std::string> out;
  out.reserve(examples.size() * (is_paired ? 2 : 1));
  for (const auto& ex : examples) {
    out.push_back(ex.text1);
    if (ex.text2) {
      out.push_back(*ex.text2);
    }
  }
  return out;
}

TextDataset load_dataset(const std::filesystem::path& path, FileFormat format, Schema schema,
                         Split split, const LabelMap* known) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open dataset " + path.string());
  }
  TextDataset data;
  data.is_paired = schema == Schema::paired;
  data.split = split;
  if (known != nullptr) {
    data.labels = *known;
  }
  const bool may_add = known == nullptr && split == Split::train;

  std::size_t row = 0;
  for (std::string line; std::getline(in, line);) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) {
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(row);
    TextExample ex;
    std::string label;
    if (format == FileFormat::tsv) {
      const auto fields = split_tabs(line);
      const std::size_t expected = data.is_paired ? 3 : 2;
      if (fields.size() != expected) {
        throw DataError(where + ": expected " + std::to_string(expected) + " tab-separated fields, got " +
                        std::to_string(fields.size()));
      }
      ex.text1 = fields[0];
      if (data.is_paired) {
        ex.text2 = fields[1];
      }
      label = fields.back();
    } else {
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw DataError(where + ": invalid JSON (" + e.what() + ")");
      }
      auto field = [&](const char* key) -> std::string {
        if (!obj.is_object() || !obj.contains(key)) {
          throw DataError(where + ": missing field '" + key + "'");
        }
        const auto& v = obj[key];
        return v.is_string() ? v.get<std::string>() : v.dump();
      };
      if (data.is_paired) {
        ex.text1 = field("text1");
        ex.text2 = field("text2");
      } else {
        ex.text1 = field("text");
      }
      label = field("label");
    }
    if (may_add) {
      ex.label = data.labels.index_or_add(label);
    } else if (const auto idx = data.labels.find(label)) {
      ex.label = *idx;
    } else {
      throw DataError(where + ": unknown label '" + label + "'" +
                      (known == nullptr ? " (no label map given for a non-train split)" : ""));
    }
    data.examples.push_back(std::move(ex));
  }
  if (data.examples.empty()) {
    throw DataError("dataset " + path.string() + " is empty");
  }
  return data;
}

void save_dataset(const TextDataset& data, const std::filesystem::path& path, FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write dataset " + path.string());
  }
  for (const auto& ex : data.examples) {
    const auto& label = data.labels.name(ex.label);
    if (format == FileFormat::tsv) {
      out << ex.text1 << '\t';
      if (ex.text2) {
        out << *ex.text2 << '\t';
      }
      out << label << '\n';
    } else {
      nlohmann::ordered_json obj;
      if (ex.text2) {
        obj["text1"] = ex.text1;
        obj["text2"] = *ex.text2;
      } else {
        obj["text"] = ex.text1;
      }
      obj["label"] = label;
      out << obj.dump() << '\n';
    }
  }
}

Dataset encode_dataset(const TextDataset& data, const Vocabulary& vocab, std::size_t max_len) {
  Dataset out;
  out.num_classes = data.num_classes();
  out.is_paired = data.is_paired;
  out.split = data.split;
  out.examples.reserve(data.examples.size());
  for (const auto& ex : data.examples) {
    if (ex.text2.has_value() != data.is_paired) {
      throw DataError("mixed single and paired examples in one dataset");
    }
    LabeledExample enc;
    enc.first = encode(vocab, ex.text1, max_len);
    if (ex.text2) {
      enc.second = encode(vocab, *ex.text2, max_len);
    }
    enc.label = ex.label;
    out.examples.push_back(std::move(enc));
  }
  if (out.examples.empty()) {
    throw DataError("cannot encode an empty dataset");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic keyword task

namespace {

std::string keyword(std::size_t topic, std::size_t j) {
  return "k" + std::to_string(topic) + "_" + std::to_string(j);
}

std::string noise_word(std::size_t j) { return "w" + std::to_string(j); }

struct SentenceMaker {
  const SyntheticSpec& spec;
  std::size_t noise_count;
  Rng& rng;

  std::string make(std::size_t topic, bool with_distractor) {
    const std::size_t length = uniform_between(rng, 6, 12);
    const std::size_t own = uniform_between(rng, 2, 4);
    std::size_t distract = with_distractor ? uniform_between(rng, 0, own - 1) : 0;
    distract = std::min(distract, length - own);
    std::size_t other = topic;
    if (distract > 0) {
      other = uniform_index(rng, spec.num_classes - 1);
      if (other >= topic) {
        ++other;
      }
    }
    std::vector<std::string> words;
    words.reserve(length);
    for (std::size_t i = 0; i < own; ++i) {
      words.push_back(keyword(topic, uniform_index(rng, spec.keywords_per_class)));
    }
    for (std::size_t i = 0; i < distract; ++i) {
      words.push_back(keyword(other, uniform_index(rng, spec.keywords_per_class)));
    }
    while (words.size() < length) {
      words.push_back(noise_word(uniform_index(rng, noise_count)));
    }
    shuffle(words, rng);
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) {
        out.push_back(' ');
      }
      out += w;
    }
    return out;
  }
};

TextDataset make_split(const SyntheticSpec& spec, std::size_t n, Split split, SentenceMaker& maker) {
  TextDataset data;
  data.split = split;
  data.is_paired = spec.task == TaskKind::paired;
  if (data.is_paired) {
    data.labels.index_or_add("mismatch");
    data.labels.index_or_add("match");
  } else {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      data.labels.index_or_add("c" + std::to_string(c));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    TextExample ex;
    if (data.is_paired) {
      ex.label = i % 2;
      const std::size_t p_topic = uniform_index(maker.rng, spec.num_classes);
      std::size_t q_topic = p_topic;
      if (ex.label == 0) {
        q_topic = uniform_index(maker.rng, spec.num_classes - 1);
        if (q_topic >= p_topic) {
          ++q_topic;
        }
      }
      ex.text1 = maker.make(p_topic, false);
      ex.text2 = maker.make(q_topic, false);
    } else {
      ex.label = i % spec.num_classes;
      ex.text1 = maker.make(ex.label, true);
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

} // namespace

SyntheticSplits generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) {
    throw UsageError("synthetic task needs at least 2 classes");
  }
  const std::size_t labels = spec.task == TaskKind::paired ? 2 : spec.num_classes;
  if (spec.n_train < labels || spec.n_valid < labels) {
    throw UsageError("synthetic split sizes must be at least the number of classes");
  }
  if (spec.keywords_per_class == 0 ||
      spec.lexicon_size <= spec.num_classes * spec.keywords_per_class) {
    throw UsageError("lexicon too small for the requested keyword sets");
  }
  Rng rng(spec.seed);
  SentenceMaker maker{spec, spec.lexicon_size - spec.num_classes * spec.keywords_per_class, rng};
  SyntheticSplits out;
  out.train = make_split(spec, spec.n_train, Split::train, maker);
  out.valid = make_split(spec, spec.n_valid, Split::valid, maker);
  return out;
}

std::optional<std::size_t> keyword_topic(std::string_view sentence) {
  std::vector<std::size_t> counts;
  for (const auto& tok : tokenize(sentence)) {
    if (tok.size() < 4 || tok[0] != 'k') {
      continue;
    }
    const auto underscore = tok.find('_');
    std::size_t topic = 0;
    if (underscore == std::string::npos ||
        std::from_chars(tok.data() + 1, tok.data() + underscore, topic).ec != std::errc{}) {
      continue;
    }
    if (counts.size() <= topic) {
      counts.resize(topic + 1, 0);
    }
    ++counts[topic];
  }
  if (counts.empty()) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

} // namespace ssmix
