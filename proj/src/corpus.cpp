#include "slu/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "slu/errors.hpp"

namespace slu {

using nlohmann::json;

std::string to_string(Speaker speaker) { return speaker == Speaker::user ? "user" : "wizard"; }

Speaker speaker_from_string(const std::string& tag) {
  if (tag == "user") return Speaker::user;
  if (tag == "wizard") return Speaker::wizard;
  throw DomainError("unknown speaker tag '" + tag + "'");
}

std::string to_string(SplitName name) {
  switch (name) {
    case SplitName::train: return "train";
    case SplitName::dev: return "dev";
    case SplitName::test: return "test";
  }
  return "train";
}

SplitName split_from_string(const std::string& name) {
  if (name == "train") return SplitName::train;
  if (name == "dev") return SplitName::dev;
  if (name == "test") return SplitName::test;
  throw DomainError("unknown split '" + name + "'");
}

namespace {

std::vector<std::string> sorted_unique(std::set<std::string> items) {
  return {items.begin(), items.end()};
}

bool contains_sorted(const std::vector<std::string>& sorted, const std::string& item) {
  return std::binary_search(sorted.begin(), sorted.end(), item);
}

}  // namespace

void CorpusSplit::refresh_vocab() {
  std::set<std::string> labels;
  std::set<std::string> words;
  for (const auto& utt : utterances) {
    labels.insert(utt.concepts.begin(), utt.concepts.end());
    words.insert(utt.transcript.begin(), utt.transcript.end());
  }
  label_vocab = sorted_unique(std::move(labels));
  word_vocab = sorted_unique(std::move(words));
}

std::size_t CorpusSplit::user_count() const {
  return static_cast<std::size_t>(
      std::count_if(utterances.begin(), utterances.end(), [](const Utterance& u) { return u.is_user(); }));
}

Vocabularies Vocabularies::of(const CorpusSplit& split) {
  CorpusSplit copy;
  copy.utterances = split.utterances;
  copy.refresh_vocab();
  return {std::move(copy.word_vocab), std::move(copy.label_vocab)};
}

FeatureSequence inject_speaker_marker(const FeatureSequence& features, Speaker speaker) {
  const double value = speaker == Speaker::user ? kMarkerValue : -kMarkerValue;
  const std::size_t frames = features.length();
  const std::size_t dim = features.dim();
  FeatureSequence out{Matrix(frames + 2 * kMarkerWidth, dim, value), features.frame_duration_s};
  for (std::size_t t = 0; t < frames; ++t) {
    const auto src = features.frames.row(t);
    std::copy(src.begin(), src.end(), out.frames.row(t + kMarkerWidth).begin());
  }
  return out;
}

CorpusSplit label_wizard_turns(CorpusSplit split) {
  for (auto& utt : split.utterances) {
    if (!utt.is_user()) utt.concepts = {kMachineSemantic};
  }
  split.refresh_vocab();
  return split;
}

CorpusStats compute_stats(const CorpusSplit& split, const Vocabularies& train) {
  CorpusStats stats;
  std::set<std::string> words;
  std::set<std::string> labels;
  std::size_t word_oov = 0;
  std::size_t label_oov = 0;
  for (const auto& utt : split.utterances) {
    const double hours = utt.features.duration_s() / 3600.0;
    stats.total_audio_h += hours;
    ++stats.n_sentences;
    stats.n_word_tokens += utt.transcript.size();
    stats.n_label_tokens += utt.concepts.size();
    if (utt.is_user()) {
      stats.user_audio_h += hours;
      ++stats.n_user_sentences;
      stats.n_user_word_tokens += utt.transcript.size();
      stats.n_user_label_tokens += utt.concepts.size();
    }
    for (const auto& w : utt.transcript) {
      words.insert(w);
      if (!contains_sorted(train.words, w)) ++word_oov;
    }
    for (const auto& c : utt.concepts) {
      labels.insert(c);
      if (!contains_sorted(train.labels, c)) ++label_oov;
    }
  }
  stats.word_dict_size = words.size();
  stats.label_dict_size = labels.size();
  if (stats.n_word_tokens > 0) {
    stats.word_oov_pct = 100.0 * static_cast<double>(word_oov) / static_cast<double>(stats.n_word_tokens);
  }
  if (stats.n_label_tokens > 0) {
    stats.label_oov_pct = 100.0 * static_cast<double>(label_oov) / static_cast<double>(stats.n_label_tokens);
  }
  return stats;
}

std::string format_stats_table(const CorpusStats& train, const CorpusStats& dev,
                               const CorpusStats& test) {
  const CorpusStats* cols[] = {&train, &dev, &test};
  std::ostringstream out;
  char buf[96];
  auto label = [&](const char* text) {
    std::snprintf(buf, sizeof buf, "%-18s", text);
    out << buf;
  };
  auto hours_row = [&](const char* text, double CorpusStats::*field) {
    label(text);
    for (const CorpusStats* s : cols) {
      std::snprintf(buf, sizeof buf, "%17.4fh", s->*field);
      out << buf;
    }
    out << '\n';
  };
  auto count_row = [&](const char* text, std::size_t CorpusStats::*field) {
    label(text);
    for (const CorpusStats* s : cols) {
      std::snprintf(buf, sizeof buf, "%18zu", s->*field);
      out << buf;
    }
    out << '\n';
  };
  auto pair_row = [&](const char* text, std::size_t CorpusStats::*words,
                      std::size_t CorpusStats::*labels) {
    label(text);
    for (const CorpusStats* s : cols) {
      std::snprintf(buf, sizeof buf, "%10zu%8zu", s->*words, s->*labels);
      out << buf;
    }
    out << '\n';
  };

  std::snprintf(buf, sizeof buf, "%-18s%18s%18s%18s\n", "", "Train", "Dev", "Test");
  out << buf;
  hours_row("Total audio", &CorpusStats::total_audio_h);
  hours_row("  of which user", &CorpusStats::user_audio_h);
  count_row("# sentences", &CorpusStats::n_sentences);
  count_row("  of which user", &CorpusStats::n_user_sentences);
  label("");
  for (int i = 0; i < 3; ++i) {
    std::snprintf(buf, sizeof buf, "%10s%8s", "Words", "Labels");
    out << buf;
  }
  out << '\n';
  pair_row("# tokens", &CorpusStats::n_word_tokens, &CorpusStats::n_label_tokens);
  pair_row("  of which user", &CorpusStats::n_user_word_tokens, &CorpusStats::n_user_label_tokens);
  pair_row("dictionary", &CorpusStats::word_dict_size, &CorpusStats::label_dict_size);
  // The training split is its own OOV reference.
  label("OOV%");
  std::snprintf(buf, sizeof buf, "%10s%8s", "-", "-");
  out << buf;
  for (const CorpusStats* s : {&dev, &test}) {
    std::snprintf(buf, sizeof buf, "%10.2f%8.2f", s->word_oov_pct, s->label_oov_pct);
    out << buf;
  }
  out << '\n';
  return out.str();
}

void SyntheticOptions::validate() const {
  if (n_concepts < 2) throw DomainError("synthetic corpus needs at least 2 concepts");
  if (n_utts < 10) throw DomainError("synthetic corpus needs at least 10 utterances");
  if (dim < 1) throw DomainError("feature dimension must be positive");
  if (noise < 0.0) throw DomainError("noise must be non-negative");
  if (wizard_fraction < 0.0 || wizard_fraction >= 1.0) {
    throw DomainError("wizard fraction must lie in [0, 1)");
  }
  if (!(frame_duration_s > 0.0)) throw DomainError("frame duration must be positive");
  if (max_concepts_per_utt < 1) throw DomainError("max_concepts_per_utt must be positive");
}

SyntheticGenerator::SyntheticGenerator(SyntheticOptions options) : options_(std::move(options)) {
  options_.validate();
}

std::string SyntheticGenerator::concept_name(std::size_t concept_index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%02zu", concept_index + 1);
  return buf;
}

Vector SyntheticGenerator::centroid(std::size_t concept_index) const {
  const double dim = static_cast<double>(options_.dim);
  const double n = static_cast<double>(options_.n_concepts);
  const double center = (static_cast<double>(concept_index) + 0.5) * dim / n - 0.5;
  const double width = std::max(0.75, dim / (2.0 * n));
  Vector out(options_.dim);
  for (std::size_t f = 0; f < options_.dim; ++f) {
    const double d = static_cast<double>(f) - center;
    out[f] = std::exp(-d * d / (2.0 * width * width));
  }
  return out;
}

SyntheticDraw SyntheticGenerator::draw(Rng& rng, std::size_t index) const {
  constexpr std::size_t kWordsPerConcept = 3;
  SyntheticDraw result;
  Utterance& utt = result.utterance;
  char id[48];
  std::snprintf(id, sizeof id, "syn-%llu-%05zu", static_cast<unsigned long long>(options_.seed), index);
  utt.id = id;
  utt.feature_family = options_.feature_family;

  std::vector<Vector> frames;
  auto emit = [&](const Vector& mean, int cls) {
    Vector frame(mean);
    for (double& x : frame) x += options_.noise * rng.normal(0.0, 1.0);
    frames.push_back(std::move(frame));
    result.frame_classes.push_back(cls);
  };
  const Vector silence(options_.dim, 0.0);
  auto emit_silence = [&] {
    for (std::size_t k = rng.index(1, 2); k > 0; --k) emit(silence, -1);
  };

  emit_silence();
  const std::size_t n_concepts = rng.index(1, options_.max_concepts_per_utt);
  for (std::size_t i = 0; i < n_concepts; ++i) {
    const std::size_t c = rng.index(0, options_.n_concepts - 1);
    utt.concepts.push_back(concept_name(c));
    const Vector mean = centroid(c);
    // One or two distinct words, each spanning 2-3 frames.
    const std::size_t first = rng.index(0, kWordsPerConcept - 1);
    const std::size_t n_words = rng.index(1, 2);
    for (std::size_t w = 0; w < n_words; ++w) {
      const std::size_t word = (first + w) % kWordsPerConcept;
      utt.transcript.push_back("c" + std::to_string(c + 1) + "w" + std::to_string(word + 1));
      for (std::size_t k = rng.index(2, 3); k > 0; --k) emit(mean, static_cast<int>(c));
    }
    emit_silence();
  }

  utt.features = FeatureSequence{Matrix(frames.size(), options_.dim), options_.frame_duration_s};
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::copy(frames[t].begin(), frames[t].end(), utt.features.frames.row(t).begin());
  }
  return result;
}

Corpus SyntheticGenerator::generate() const {
  Rng rng(options_.seed);
  const std::size_t n = options_.n_utts;
  const std::size_t n_train = n * 70 / 100;
  const std::size_t n_dev = n * 15 / 100;

  Corpus corpus;
  corpus.train.name = SplitName::train;
  corpus.dev.name = SplitName::dev;
  corpus.test.name = SplitName::test;
  for (std::size_t i = 0; i < n; ++i) {
    CorpusSplit& split = i < n_train ? corpus.train : (i < n_train + n_dev ? corpus.dev : corpus.test);
    split.utterances.push_back(draw(rng, i).utterance);
  }
  for (CorpusSplit* split : {&corpus.train, &corpus.dev, &corpus.test}) {
    auto& utts = split->utterances;
    const auto n_wizard = static_cast<std::size_t>(
        std::lround(options_.wizard_fraction * static_cast<double>(utts.size())));
    std::vector<std::size_t> order(utts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t k = 0; k < n_wizard; ++k) {
      Utterance& utt = utts[order[k]];
      utt.speaker = Speaker::wizard;
      utt.concepts = {kMachineSemantic};
    }
    split->refresh_vocab();
  }
  return corpus;
}

Corpus generate_synthetic(const SyntheticOptions& options) {
  return SyntheticGenerator(options).generate();
}

std::string utterance_to_line(const Utterance& utt) {
  json features = json::array();
  for (std::size_t t = 0; t < utt.features.length(); ++t) {
    const auto row = utt.features.frames.row(t);
    features.push_back(std::vector<double>(row.begin(), row.end()));
  }
  json j = {
      {"id", utt.id},
      {"speaker", to_string(utt.speaker)},
      {"frame_duration_s", utt.features.frame_duration_s},
      {"features", std::move(features)},
      {"transcript", utt.transcript},
      {"concepts", utt.concepts},
      {"feature_family", utt.feature_family},
  };
  return j.dump();
}

Utterance utterance_from_line(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_number, std::string("malformed record: ") + e.what());
  }
  try {
    Utterance utt;
    utt.id = j.at("id").get<std::string>();
    utt.speaker = speaker_from_string(j.at("speaker").get<std::string>());
    const double duration = j.at("frame_duration_s").get<double>();
    const auto rows = j.at("features").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw DomainError("record has no feature frames");
    const std::size_t dim = rows.front().size();
    if (dim == 0) throw DomainError("feature frames are empty");
    Matrix frames(rows.size(), dim);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != dim) {
        throw DomainError("frame " + std::to_string(t) + " has " + std::to_string(rows[t].size()) +
                          " values, expected " + std::to_string(dim));
      }
      std::copy(rows[t].begin(), rows[t].end(), frames.row(t).begin());
    }
    utt.features = FeatureSequence{std::move(frames), duration};
    utt.transcript = j.at("transcript").get<std::vector<std::string>>();
    utt.concepts = j.at("concepts").get<std::vector<std::string>>();
    utt.feature_family = j.at("feature_family").get<std::string>();
    return utt;
  } catch (const json::exception& e) {
    throw ParseError(line_number, std::string("invalid record: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(line_number, e.what());
  }
}

CorpusSplit load_split(const std::filesystem::path& path, SplitName name) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open corpus file " + path.string());
  CorpusSplit split;
  split.name = name;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    split.utterances.push_back(utterance_from_line(line, line_number));
  }
  split.refresh_vocab();
  return split;
}

void save_split(const CorpusSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write corpus file " + path.string());
  for (const auto& utt : split.utterances) out << utterance_to_line(utt) << '\n';
  out.flush();
  if (!out) throw Error("failed writing corpus file " + path.string());
}

std::filesystem::path split_path(const std::filesystem::path& dir, SplitName name) {
  return dir / (to_string(name) + ".jsonl");
}

Corpus load_corpus(const std::filesystem::path& dir) {
  return {load_split(split_path(dir, SplitName::train), SplitName::train),
          load_split(split_path(dir, SplitName::dev), SplitName::dev),
          load_split(split_path(dir, SplitName::test), SplitName::test)};
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create corpus directory " + dir.string() + ": " + ec.message());
  save_split(corpus.train, split_path(dir, SplitName::train));
  save_split(corpus.dev, split_path(dir, SplitName::dev));
  save_split(corpus.test, split_path(dir, SplitName::test));
}

}  // namespace slu
