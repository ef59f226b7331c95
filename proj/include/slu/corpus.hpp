#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slu/features.hpp"
#include "slu/numerics.hpp"

namespace slu {

inline constexpr const char* kMachineSemantic = "MachineSemantic";
// Speaker marker protocol: kMarkerWidth frames filled with +kMarkerValue (user) or
// -kMarkerValue (wizard) at both ends of the signal.
inline constexpr double kMarkerValue = 5.0;
inline constexpr std::size_t kMarkerWidth = 3;

enum class Speaker { user, wizard };

std::string to_string(Speaker speaker);
Speaker speaker_from_string(const std::string& tag);

struct Utterance {
  std::string id;
  Speaker speaker = Speaker::user;
  FeatureSequence features;
  std::vector<std::string> transcript;
  std::vector<std::string> concepts;
  std::string feature_family;

  bool is_user() const noexcept { return speaker == Speaker::user; }

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

enum class SplitName { train, dev, test };

std::string to_string(SplitName name);
SplitName split_from_string(const std::string& name);

struct CorpusSplit {
  SplitName name = SplitName::train;
  std::vector<Utterance> utterances;
  // Sorted distinct concept / word types found in this split.
  std::vector<std::string> label_vocab;
  std::vector<std::string> word_vocab;

  void refresh_vocab();
  std::size_t user_count() const;

  friend bool operator==(const CorpusSplit&, const CorpusSplit&) = default;
};

struct Corpus {
  CorpusSplit train;
  CorpusSplit dev;
  CorpusSplit test;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Dictionaries of the training split, used as the OOV reference.
struct Vocabularies {
  std::vector<std::string> words;
  std::vector<std::string> labels;

  static Vocabularies of(const CorpusSplit& split);
};

struct CorpusStats {
  double total_audio_h = 0.0;
  double user_audio_h = 0.0;
  std::size_t n_sentences = 0;
  std::size_t n_user_sentences = 0;
  std::size_t n_word_tokens = 0;
  std::size_t n_user_word_tokens = 0;
  std::size_t n_label_tokens = 0;
  std::size_t n_user_label_tokens = 0;
  std::size_t word_dict_size = 0;
  std::size_t label_dict_size = 0;
  double word_oov_pct = 0.0;
  double label_oov_pct = 0.0;
};

// Returns (T + 6) x F frames: the marker block, the input, the marker block.
FeatureSequence inject_speaker_marker(const FeatureSequence& features, Speaker speaker);

// Wizard turns get exactly [MachineSemantic]; user turns are left alone.
CorpusSplit label_wizard_turns(CorpusSplit split);

CorpusStats compute_stats(const CorpusSplit& split, const Vocabularies& train);

// Train/dev/test side by side, in the layout of a corpus statistics table.
std::string format_stats_table(const CorpusStats& train, const CorpusStats& dev,
                               const CorpusStats& test);

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t n_utts = 100;
  std::size_t n_concepts = 5;
  std::size_t dim = 8;
  double noise = 0.1;
  double wizard_fraction = 0.2;
  double frame_duration_s = 0.01;
  std::size_t max_concepts_per_utt = 4;
  std::string feature_family = "synthetic";

  void validate() const;
};

// One generated utterance with the class of every frame (-1 for silence,
// otherwise the 0-based concept index).
struct SyntheticDraw {
  Utterance utterance;
  std::vector<int> frame_classes;
};

// Concept sequences rendered as blocks of frames around per-concept Gaussian-bump
// centroids, separated by silence around the origin.
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(SyntheticOptions options);

  const SyntheticOptions& options() const noexcept { return options_; }
  Vector centroid(std::size_t concept_index) const;
  static std::string concept_name(std::size_t concept_index);

  SyntheticDraw draw(Rng& rng, std::size_t index) const;
  // 70/15/15 split; each split has round(wizard_fraction * size) wizard turns.
  Corpus generate() const;

 private:
  SyntheticOptions options_;
};

Corpus generate_synthetic(const SyntheticOptions& options);

// One JSON object per line. Throws ParseError naming the offending line.
CorpusSplit load_split(const std::filesystem::path& path, SplitName name);
void save_split(const CorpusSplit& split, const std::filesystem::path& path);

// <dir>/train.jsonl, <dir>/dev.jsonl, <dir>/test.jsonl
Corpus load_corpus(const std::filesystem::path& dir);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
std::filesystem::path split_path(const std::filesystem::path& dir, SplitName name);

std::string utterance_to_line(const Utterance& utt);
Utterance utterance_from_line(const std::string& line, std::size_t line_number);

}  // namespace slu
