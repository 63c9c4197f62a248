#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lmeval/corpus.hpp"
#include "lmeval/ffn.hpp"
#include "lmeval/lm.hpp"
#include "lmeval/losses.hpp"
#include "lmeval/vocab.hpp"

namespace lmeval::io {

std::string read_text(const std::filesystem::path& path);
/// Writes via a temporary file and rename, so readers never see partial output.
void write_text(const std::filesystem::path& path, const std::string& content);

// --- pre-tokenized id files ----------------------------------------------
// Header line `#vocab_size=N`, then one sequence per line as space-separated
// decimal ids.

struct IdFile {
  std::size_t vocab_size = 0;
  std::vector<std::vector<TokenId>> sequences;
};

std::string format_ids(const IdFile& file);
IdFile parse_ids(const std::string& text);
void write_ids(const std::filesystem::path& path, const IdFile& file);
IdFile read_ids(const std::filesystem::path& path);

// --- vocabulary ------------------------------------------------------------

struct VocabFile {
  Vocab vocab;
  corpus::Scheme scheme = corpus::Scheme::Word;
};

void write_vocab(const std::filesystem::path& path, const Vocab& vocab, corpus::Scheme scheme);
VocabFile read_vocab(const std::filesystem::path& path);

// --- split manifest --------------------------------------------------------

struct SplitManifest {
  std::size_t seq_len = 0;
  std::array<double, 3> ratios{};
  std::array<std::size_t, 3> counts{};
  std::string tokenizer;
  std::uint64_t seed = 0;
};

std::string manifest_json(const SplitManifest& m);
SplitManifest parse_manifest(const std::string& text);

// --- token label files -----------------------------------------------------
// TSV `surface<TAB>label[<TAB>head_offset]`, blank line between sentences.

enum class LabelColumn { Tag, Head };

/// Each sentence as word-level labels. With LabelColumn::Head the head
/// offset is the class name; rows without one get an empty (masked) label.
std::vector<std::vector<losses::WordLabel>> parse_label_file(const std::string& text,
                                                             LabelColumn column);

// --- model container -------------------------------------------------------
// Layout: the 5 bytes "LMEK1", a little-endian u64 header length, the JSON
// header, then the little-endian payload. FFN payload: f64 parameters in
// layout order. N-gram payload: for each context (sorted), u64 length, u64
// ids, u64 total, u64 number of successors, then (u64 id, u64 count) pairs
// sorted by id.

inline constexpr char kModelMagic[] = "LMEK1";

struct ModelBundle {
  std::unique_ptr<lm::LanguageModel> model;
  std::shared_ptr<const Vocab> vocab;  // may be null for id-only corpora
  corpus::Scheme scheme = corpus::Scheme::Word;
  std::vector<std::string> labels;     // classification head label names
};

std::string serialize_model(const lm::LanguageModel& model, const Vocab* vocab,
                            corpus::Scheme scheme, const std::vector<std::string>& labels = {});
ModelBundle deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const lm::LanguageModel& model,
                const Vocab* vocab, corpus::Scheme scheme,
                const std::vector<std::string>& labels = {});
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace lmeval::io
