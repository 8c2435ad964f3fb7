#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ssmix {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kCls = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kNumReserved = 4;

/// Lowercases and splits on whitespace. Sentence punctuation (. , ! ? ; : and
/// brackets/quotes) is split off into its own token; hyphens and apostrophes
/// stay inside words.
std::vector<std::string> tokenize(std::string_view text);

/// Joins tokens with single spaces, re-attaching closing punctuation to the
/// preceding word.
std::string detokenize(const std::vector<std::string>& tokens);

class Vocabulary {
public:
  /// Vocabulary holding only the four reserved tokens.
  Vocabulary();

  /// Builds from tokens listed in id order; the first four must be the
  /// reserved names.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const; // OOV -> kUnk
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// Appends a token if absent and returns its id.
  TokenId add(const std::string& token);

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Tokens with count >= min_count get ids in first-appearance order.
Vocabulary build_vocab(const std::vector<std::string>& texts, std::size_t min_count);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<bool> special_mask; // true at CLS/SEP (and PAD when padded)

  std::size_t size() const { return ids.size(); }
  std::size_t content_length() const;
  /// Indices of non-special positions, ascending.
  std::vector<std::size_t> content_positions() const;

  /// Wraps content ids as [CLS] ids... [SEP].
  static TokenSequence from_content(const std::vector<TokenId>& content);

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Throws DataError if the layout invariants do not hold.
void validate(const TokenSequence& seq);

TokenSequence encode(const Vocabulary& vocab, std::string_view text, std::size_t max_len);
/// Content tokens only (specials dropped), joined with detokenize().
std::string decode(const Vocabulary& vocab, const TokenSequence& seq);

struct LabeledExample {
  TokenSequence first;
  std::optional<TokenSequence> second;
  std::size_t label = 0;

  bool paired() const { return second.has_value(); }
};

enum class Split { train, valid, test };
enum class Schema { single, paired };
enum class FileFormat { tsv, jsonl };

Split parse_split(std::string_view s);
Schema parse_schema(std::string_view s);
FileFormat parse_format(std::string_view s);
std::string_view to_string(Split s);

/// Label string <-> contiguous index, in first-seen order.
class LabelMap {
public:
  std::size_t index_or_add(const std::string& label);
  std::optional<std::size_t> find(const std::string& label) const;
  const std::string& name(std::size_t index) const { return names_.at(index); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  /// Sidecar format: `label<TAB>index` per line.
  void save(const std::filesystem::path& path) const;
  static LabelMap load(const std::filesystem::path& path);

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TextExample {
  std::string text1;
  std::optional<std::string> text2;
  std::size_t label = 0;
};

/// Raw text examples with resolved label indices.
struct TextDataset {
  std::vector<TextExample> examples;
  LabelMap labels;
  bool is_paired = false;
  Split split = Split::train;

  std::size_t num_classes() const { return labels.size(); }
  std::vector<std::string> all_texts() const;
};

/// Encoded examples ready for the model.
struct Dataset {
  std::vector<LabeledExample> examples;
  std::size_t num_classes = 0;
  bool is_paired = false;
  Split split = Split::train;

  std::size_t size() const { return examples.size(); }
};

/// Reads a TSV or JSONL file. Training splits build the label map in
/// first-seen order unless `known` is given; other splits require `known`
/// and reject labels absent from it.
TextDataset load_dataset(const std::filesystem::path& path, FileFormat format, Schema schema,
                         Split split = Split::train, const LabelMap* known = nullptr);

void save_dataset(const TextDataset& data, const std::filesystem::path& path, FileFormat format);

Dataset encode_dataset(const TextDataset& data, const Vocabulary& vocab, std::size_t max_len = 128);

enum class TaskKind { single, paired };

struct SyntheticSpec {
  TaskKind task = TaskKind::single;
  std::size_t num_classes = 2;
  std::size_t n_train = 2000;
  std::size_t n_valid = 400;
  std::uint64_t seed = 0;
  std::size_t lexicon_size = 50;
  std::size_t keywords_per_class = 5;
};

struct SyntheticSplits {
  TextDataset train;
  TextDataset valid;
};

/// Keyword-topic task. Single: each class owns keywords_per_class words; a
/// sentence has 6-12 tokens with at least two keywords of its class, fewer
/// keywords of one distractor class, and shared noise words. Paired: the
/// label is "match" when both sentences are drawn from the same topic
/// (num_classes is the topic count; the label set is {mismatch, match}).
/// Labels are assigned round-robin.
SyntheticSplits generate_synthetic(const SyntheticSpec& spec);

/// Majority vote over synthetic keywords; ties go to the lowest topic index.
/// Returns nullopt when a sentence holds no keyword.
std::optional<std::size_t> keyword_topic(std::string_view sentence);

} // namespace ssmix
