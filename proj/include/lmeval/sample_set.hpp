#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lmeval/vocab.hpp"

namespace lmeval {

struct Sample {
  std::string id;
  std::vector<TokenId> prefix;
  std::vector<TokenId> continuation;
  std::uint64_t seed = 0;
};

/// Where a set of continuations came from. Human reference sets leave
/// model/strategy empty.
struct Provenance {
  std::string model;
  std::string strategy;
  std::optional<double> param;
  std::uint64_t seed = 0;
};

struct SampleSet {
  std::vector<Sample> samples;
  Provenance provenance;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::vector<TokenSpan> continuations() const;

  /// Human text wrapped as a set: each sequence becomes one continuation.
  static SampleSet from_sequences(const std::vector<std::vector<TokenId>>& seqs,
                                  const std::string& id_prefix = "ref");

  /// Throws InvalidArgument on duplicate ids.
  void check_unique_ids() const;
};

/// One JSON object per line:
/// {"id","model","strategy","param","seed","prefix_ids","continuation_ids"}
std::string to_jsonl(const SampleSet& set);
SampleSet from_jsonl(const std::string& text);

void write_jsonl(const std::filesystem::path& path, const SampleSet& set);
SampleSet read_jsonl(const std::filesystem::path& path);

}  // namespace lmeval
