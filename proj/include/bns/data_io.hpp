#pragma once

// Corpus ingestion, vocabulary, word2vec loading, cached preprocessing and
// batching.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "bns/behavior_segmentation.hpp"
#include "bns/checkpoint.hpp"
#include "bns/random.hpp"
#include "bns/sentence_reconstruction.hpp"
#include "bns/text_pipeline.hpp"

namespace bns {

// ---- corpus --------------------------------------------------------------

enum class CorpusFormat : unsigned char {
  Tsv,        // label<TAB>raw text
  Pretagged,  // label<TAB>word/TAG word/TAG ...
};

struct CorpusExample {
  std::string text;
  int label = 0;
  std::vector<std::string> tokens;  // pre-tagged input only
  std::vector<PosTag> tags;         // pre-tagged input only
};

struct Corpus {
  std::string name;
  std::vector<CorpusExample> examples;

  std::size_t size() const noexcept { return examples.size(); }
  std::size_t sarcastic_count() const {
    return static_cast<std::size_t>(std::count_if(examples.begin(), examples.end(), [](const auto& e) { return e.label == 1; }));
  }
};

inline Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string name = "corpus") {
  Corpus corpus;
  corpus.name = std::move(name);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected 'label<TAB>text'", lineno);
    const std::string label = line.substr(0, tab);
    if (label != "0" && label != "1") throw ParseError("label must be 0 or 1, got '" + label + "'", lineno);
    CorpusExample ex;
    ex.label = label == "1" ? 1 : 0;
    ex.text = line.substr(tab + 1);
    if (format == CorpusFormat::Pretagged) {
      std::istringstream words(ex.text);
      std::string item;
      while (words >> item) {
        const auto slash = item.rfind('/');
        if (slash == std::string::npos || slash == 0) throw ParseError("expected word/TAG, got '" + item + "'", lineno);
        const auto tag = parse_pos_tag(item.substr(slash + 1));
        if (!tag) throw ParseError("unknown POS tag in '" + item + "'", lineno);
        ex.tokens.push_back(item.substr(0, slash));
        ex.tags.push_back(*tag);
      }
    }
    corpus.examples.push_back(std::move(ex));
  }
  if (corpus.examples.empty()) throw ParseError("corpus '" + corpus.name + "' is empty", 0);
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format = CorpusFormat::Tsv) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  try {
    return parse_corpus(in, format, path.filename().string());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

/// Surface tokens of one example, from the pre-tagged tokens when present.
inline std::vector<std::string> surface_tokens(const CorpusExample& ex) {
  return ex.tokens.empty() ? tokenize(ex.text) : ex.tokens;
}

// ---- vocabulary ----------------------------------------------------------

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary() : words_{"<pad>", "<unk>"} { rebuild_index(); }

  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.size() < 2 || words_[0] != "<pad>" || words_[1] != "<unk>") {
      throw ParseError("vocabulary must start with <pad> and <unk>", 0);
    }
    rebuild_index();
  }

  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  std::size_t id(const std::string& normalized) const {
    auto it = index_.find(normalized);
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& normalized) const { return index_.contains(normalized); }

  std::string serialize() const {
    std::string out;
    for (const auto& w : words_) out += w + "\n";
    return out;
  }

  static Vocabulary deserialize(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) words.push_back(line);
    return Vocabulary(std::move(words));
  }

 private:
  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
  }

  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Words seen at least `min_freq` times in `corpus` (call with the training
/// split only). Ids after the reserved two follow descending frequency,
/// then lexicographic order.
inline Vocabulary build_vocab(const Corpus& corpus, std::size_t min_freq = 1) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : corpus.examples) {
    for (const auto& t : surface_tokens(ex)) ++counts[to_lower(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [w, c] : counts) {
    if (c >= min_freq && w != "<pad>" && w != "<unk>") kept.emplace_back(w, c);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words{"<pad>", "<unk>"};
  for (const auto& [w, c] : kept) words.push_back(w);
  return Vocabulary(std::move(words));
}

// ---- embeddings ----------------------------------------------------------

inline constexpr double kEmbeddingInitBound = 0.05;

/// Random table: rows uniform in [-0.05, 0.05], padding row zero.
inline Tensor random_embeddings(std::size_t vocab_size, std::size_t dim, Rng& rng) {
  Tensor table(Shape{vocab_size, dim});
  for (std::size_t r = 0; r < vocab_size; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      table.at(r, c) = r == Vocabulary::kPad ? 0.0 : rng.uniform(-kEmbeddingInitBound, kEmbeddingInitBound);
    }
  }
  return table;
}

struct EmbeddingLoadStats {
  std::size_t found = 0;
  std::size_t missing = 0;
};

/// Reads word2vec text format ("count dim" header, then "word v1 .. vdim").
/// A file word fills the vocabulary row of the same string; failing that it
/// fills the row of its lowercased form unless an exact match already did.
inline Tensor load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim, Rng& rng,
                              EmbeddingLoadStats* stats = nullptr) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("embedding file has no header", 1);
  std::istringstream hs(header);
  std::size_t count = 0, file_dim = 0;
  std::string extra;
  if (!(hs >> count >> file_dim) || (hs >> extra)) throw ParseError("malformed header, expected 'count dim'", 1);
  if (file_dim != dim) {
    throw ConfigError("embedding dimension " + std::to_string(file_dim) + " does not match configured embed_dim " +
                      std::to_string(dim));
  }
  Tensor table = random_embeddings(vocab.size(), dim, rng);
  std::vector<int> filled(vocab.size(), 0);  // 0 none, 1 lowercase, 2 exact
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> values;
    std::string field;
    while (ls >> field) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) throw ParseError("bad number '" + field + "'", lineno);
      values.push_back(v);
    }
    if (values.size() != dim) {
      throw ParseError("expected " + std::to_string(dim) + " values, got " + std::to_string(values.size()), lineno);
    }
    std::size_t row = Vocabulary::kUnk;
    int rank = 0;
    if (vocab.contains(word)) {
      row = vocab.id(word);
      rank = 2;
    } else if (vocab.contains(to_lower(word))) {
      row = vocab.id(to_lower(word));
      rank = 1;
    }
    if (rank == 0 || row == Vocabulary::kPad || filled[row] >= rank) continue;
    filled[row] = rank;
    std::copy(values.begin(), values.end(), table.row(row).begin());
  }
  if (stats) {
    stats->found = static_cast<std::size_t>(std::count_if(filled.begin(), filled.end(), [](int f) { return f > 0; }));
    stats->missing = vocab.size() - 1 - stats->found;
  }
  return table;
}

inline Tensor load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim, Rng& rng,
                              EmbeddingLoadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings " + path.string());
  return load_embeddings(in, vocab, dim, rng, stats);
}

// ---- preprocessing -------------------------------------------------------

struct PreprocessSettings {
  std::size_t window_size = 4;
  std::size_t max_seq_len = 150;
  bool warn_truncation = true;
};

struct PreprocessedExample {
  std::vector<Token> tokens;
  std::vector<std::size_t> token_ids;
  Segmentation segmentation;
  SentenceSplit split;
  SubtaskLabels labels;
  int sarcasm_label = 0;
  bool truncated = false;

  friend bool operator==(const PreprocessedExample& a, const PreprocessedExample& b) {
    if (a.tokens.size() != b.tokens.size()) return false;
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
      const auto &x = a.tokens[i], &y = b.tokens[i];
      if (x.surface != y.surface || x.normalized != y.normalized || x.pos != y.pos || x.sentiment != y.sentiment ||
          x.index != y.index)
        return false;
    }
    return a.token_ids == b.token_ids && a.segmentation.chunks == b.segmentation.chunks &&
           a.segmentation.fallback == b.segmentation.fallback &&
           a.split.surface_polarity == b.split.surface_polarity && a.split.explicit_ids == b.split.explicit_ids &&
           a.split.implicit_ids == b.split.implicit_ids && a.split.degenerate == b.split.degenerate &&
           a.labels.explicit_label == b.labels.explicit_label && a.labels.implicit_label == b.labels.implicit_label &&
           a.sarcasm_label == b.sarcasm_label && a.truncated == b.truncated;
  }
};

inline PreprocessedExample preprocess_example(const CorpusExample& ex, const Vocabulary& vocab,
                                              const PreprocessSettings& settings, const SentimentLexicon& lexicon,
                                              const PosTagger& tagger) {
  PreprocessedExample out;
  auto surfaces = surface_tokens(ex);
  std::vector<PosTag> tags = ex.tags;
  if (surfaces.size() > settings.max_seq_len) {
    out.truncated = true;
    if (settings.warn_truncation) {
      std::cerr << "warning: truncating text of " << surfaces.size() << " tokens to " << settings.max_seq_len << "\n";
    }
    surfaces.resize(settings.max_seq_len);
    if (!tags.empty()) tags.resize(settings.max_seq_len);
  }
  out.tokens = make_tokens(surfaces, tagger, lexicon, tags);
  for (const auto& t : out.tokens) out.token_ids.push_back(vocab.id(t.normalized));
  out.segmentation = segment(out.tokens, SegmentationConfig{settings.window_size}, out.token_ids);
  out.split = split(out.tokens);
  out.labels = derive_labels(out.split, ex.label == 1);
  out.sarcasm_label = ex.label;
  return out;
}

/// Share of sarcastic examples whose text shows no opposite-polarity token.
inline double conflict_free_ratio(const std::vector<PreprocessedExample>& examples) {
  std::size_t sarcastic = 0, free = 0;
  for (const auto& e : examples) {
    if (e.sarcasm_label != 1) continue;
    ++sarcastic;
    if (conflict_free(e.tokens, e.split)) ++free;
  }
  return sarcastic == 0 ? 0.0 : static_cast<double>(free) / static_cast<double>(sarcastic);
}

// ---- cache ---------------------------------------------------------------

inline constexpr std::uint32_t kPreprocessCacheVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

inline void put_ids(std::string& out, const std::vector<std::size_t>& ids) {
  put_u32(out, static_cast<std::uint32_t>(ids.size()));
  for (auto id : ids) put_u64(out, id);
}

inline std::vector<std::size_t> get_ids(ByteReader& in) {
  std::vector<std::size_t> ids(in.u32());
  for (auto& id : ids) id = in.u64();
  return ids;
}

}  // namespace detail

/// Canonical description of every preprocessing input; equal fingerprints
/// mean equal outputs.
inline std::string preprocess_fingerprint(const Corpus& corpus, const Vocabulary& vocab,
                                          const PreprocessSettings& settings, const SentimentLexicon& lexicon,
                                          const PosTagger& tagger) {
  std::ostringstream os;
  os << "version=" << kPreprocessCacheVersion << "\nwindow=" << settings.window_size
     << "\nmax_len=" << settings.max_seq_len << "\ntagger=" << tagger.version() << "\n";
  os << "lexicon\n" << lexicon.canonical() << "vocab\n" << vocab.serialize() << "corpus\n";
  for (const auto& ex : corpus.examples) {
    os << ex.label << '\t' << ex.text;
    for (auto t : ex.tags) os << ' ' << to_string(t);
    os << '\n';
  }
  return os.str();
}

inline std::string encode_preprocessed(const std::string& fingerprint, const std::vector<PreprocessedExample>& examples) {
  using namespace detail;
  std::string out = "BNSPREP1";
  put_u32(out, kPreprocessCacheVersion);
  put_str(out, fingerprint);
  put_u32(out, static_cast<std::uint32_t>(examples.size()));
  for (const auto& e : examples) {
    put_u32(out, static_cast<std::uint32_t>(e.tokens.size()));
    for (const auto& t : e.tokens) {
      put_str(out, t.surface);
      put_str(out, t.normalized);
      put_u32(out, static_cast<std::uint32_t>(t.pos));
      put_u64(out, std::bit_cast<std::uint64_t>(t.sentiment));
      put_u64(out, t.index);
    }
    put_ids(out, e.token_ids);
    put_u32(out, static_cast<std::uint32_t>(e.segmentation.chunks.size()));
    for (const auto& c : e.segmentation.chunks) {
      put_u64(out, c.start);
      put_u64(out, c.end);
      put_u64(out, c.core_index);
      put_u64(out, std::bit_cast<std::uint64_t>(c.intensity));
      put_ids(out, c.token_ids);
    }
    put_u32(out, e.segmentation.fallback ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(e.split.surface_polarity));
    put_ids(out, e.split.explicit_ids);
    put_ids(out, e.split.implicit_ids);
    put_u32(out, e.split.degenerate ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(e.labels.explicit_label));
    put_u32(out, static_cast<std::uint32_t>(e.labels.implicit_label));
    put_u32(out, static_cast<std::uint32_t>(e.sarcasm_label));
    put_u32(out, e.truncated ? 1 : 0);
  }
  return out;
}

inline std::vector<PreprocessedExample> decode_preprocessed(const std::string& bytes, std::string* fingerprint) {
  detail::ByteReader in(bytes);
  if (in.str(8) != "BNSPREP1") throw ParseError("not a preprocessing cache (bad magic)", 0);
  if (in.u32() != kPreprocessCacheVersion) throw ParseError("unsupported preprocessing cache version", 0);
  std::string fp = in.str(in.u32());
  if (fingerprint) *fingerprint = fp;
  std::vector<PreprocessedExample> examples(in.u32());
  for (auto& e : examples) {
    e.tokens.resize(in.u32());
    for (auto& t : e.tokens) {
      t.surface = in.str(in.u32());
      t.normalized = in.str(in.u32());
      t.pos = static_cast<PosTag>(in.u32());
      t.sentiment = in.f64();
      t.index = in.u64();
    }
    e.token_ids = detail::get_ids(in);
    e.segmentation.chunks.resize(in.u32());
    for (auto& c : e.segmentation.chunks) {
      c.start = in.u64();
      c.end = in.u64();
      c.core_index = in.u64();
      c.intensity = in.f64();
      c.token_ids = detail::get_ids(in);
    }
    e.segmentation.fallback = in.u32() != 0;
    e.split.surface_polarity = static_cast<Polarity>(in.u32());
    e.split.explicit_ids = detail::get_ids(in);
    e.split.implicit_ids = detail::get_ids(in);
    e.split.degenerate = in.u32() != 0;
    e.labels.explicit_label = static_cast<Polarity>(in.u32());
    e.labels.implicit_label = static_cast<Polarity>(in.u32());
    e.sarcasm_label = static_cast<int>(in.u32());
    e.truncated = in.u32() != 0;
  }
  if (!in.done()) throw ParseError("trailing bytes in preprocessing cache", 0);
  return examples;
}

struct PreprocessResult {
  std::vector<PreprocessedExample> examples;
  double ratio = 0.0;  // conflict-free share of sarcastic texts
  bool cache_hit = false;
  std::filesystem::path cache_file;
};

/// Runs the text pipeline, chunking and splitting for every example. With a
/// cache directory, results are stored under a hash of the fingerprint; a
/// stored file is used only if its embedded fingerprint matches in full.
inline PreprocessResult preprocess_corpus(const Corpus& corpus, const Vocabulary& vocab,
                                          const PreprocessSettings& settings, const SentimentLexicon& lexicon,
                                          const PosTagger& tagger,
                                          const std::optional<std::filesystem::path>& cache_dir = std::nullopt) {
  PreprocessResult result;
  std::string fingerprint;
  if (cache_dir) {
    fingerprint = preprocess_fingerprint(corpus, vocab, settings, lexicon, tagger);
    std::ostringstream name;
    name << "prep-" << std::hex << detail::fnv1a(fingerprint);
    result.cache_file = *cache_dir / (name.str() + ".bin");
    if (std::filesystem::exists(result.cache_file)) {
      std::string stored;
      auto examples = decode_preprocessed(detail::read_file(result.cache_file), &stored);
      if (stored == fingerprint) {
        result.examples = std::move(examples);
        result.ratio = conflict_free_ratio(result.examples);
        result.cache_hit = true;
        return result;
      }
    }
  }
  for (const auto& ex : corpus.examples) {
    result.examples.push_back(preprocess_example(ex, vocab, settings, lexicon, tagger));
  }
  result.ratio = conflict_free_ratio(result.examples);
  if (cache_dir) {
    std::filesystem::create_directories(*cache_dir);
    detail::write_file_atomic(result.cache_file, encode_preprocessed(fingerprint, result.examples));
    Manifest m{{"cache_version", std::to_string(kPreprocessCacheVersion)},
               {"corpus", corpus.name},
               {"examples", std::to_string(result.examples.size())},
               {"sarcastic", std::to_string(corpus.sarcastic_count())},
               {"conflict_free_ratio", std::to_string(result.ratio)},
               {"window_size", std::to_string(settings.window_size)},
               {"max_seq_len", std::to_string(settings.max_seq_len)},
               {"tagger", tagger.version()}};
    auto manifest_path = result.cache_file;
    manifest_path.replace_extension(".manifest");
    save_manifest(manifest_path, m);
  }
  return result;
}

// ---- batching ------------------------------------------------------------

struct Batch {
  std::vector<std::size_t> indices;   // into the example list
  std::size_t max_tokens = 0;
  std::size_t max_chunks = 0;
  std::vector<std::size_t> token_ids;  // (batch x max_tokens), padded with Vocabulary::kPad
  std::vector<unsigned char> token_mask;
  std::vector<unsigned char> chunk_mask;  // (batch x max_chunks)

  std::size_t size() const noexcept { return indices.size(); }
};

/// Splits examples into batches of `batch_size` (last one may be smaller),
/// shuffled by `shuffle_seed` when given.
inline std::vector<Batch> make_batches(const std::vector<PreprocessedExample>& examples, std::size_t batch_size,
                                       std::optional<std::uint64_t> shuffle_seed = std::nullopt) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<Batch> batches;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    Batch batch;
    batch.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + batch_size)));
    for (std::size_t i : batch.indices) {
      batch.max_tokens = std::max(batch.max_tokens, examples[i].token_ids.size());
      batch.max_chunks = std::max(batch.max_chunks, examples[i].segmentation.chunks.size());
    }
    batch.token_ids.assign(batch.size() * batch.max_tokens, Vocabulary::kPad);
    batch.token_mask.assign(batch.size() * batch.max_tokens, 0);
    batch.chunk_mask.assign(batch.size() * batch.max_chunks, 0);
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const auto& ex = examples[batch.indices[r]];
      for (std::size_t t = 0; t < ex.token_ids.size(); ++t) {
        batch.token_ids[r * batch.max_tokens + t] = ex.token_ids[t];
        batch.token_mask[r * batch.max_tokens + t] = 1;
      }
      for (std::size_t c = 0; c < ex.segmentation.chunks.size(); ++c) batch.chunk_mask[r * batch.max_chunks + c] = 1;
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace bns
