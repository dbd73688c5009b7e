#pragma once

// Tokenization, part-of-speech tagging and lexicon sentiment scoring. The
// Token sequence produced here feeds both the behavior chunker and the
// explicit/implicit sentence splitter.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bns/error.hpp"

namespace bns {

/// The 17 universal part-of-speech tags.
enum class PosTag : unsigned char {
  ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM, PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X
};

inline constexpr std::size_t kPosTagCount = 17;

inline constexpr std::array<std::string_view, kPosTagCount> kPosTagNames = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

inline std::string_view to_string(PosTag tag) { return kPosTagNames[static_cast<std::size_t>(tag)]; }

inline std::optional<PosTag> parse_pos_tag(std::string_view name) {
  for (std::size_t i = 0; i < kPosTagCount; ++i) {
    if (kPosTagNames[i] == name) return static_cast<PosTag>(i);
  }
  return std::nullopt;
}

struct Token {
  std::string surface;
  std::string normalized;
  PosTag pos = PosTag::X;
  double sentiment = 0.0;  // signed, in [-1, 1]; 0 when not in the lexicon
  std::size_t index = 0;
};

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// ---- tokenizer -----------------------------------------------------------

inline bool is_detachable_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':': case '\'': case '"': case '(': case ')':
      return true;
    default:
      return false;
  }
}

/// Splits on whitespace, then peels punctuation marks off both ends of each
/// piece as single-character tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i) break;
    std::string_view piece = text.substr(i, j - i);
    i = j;

    std::size_t b = 0, e = piece.size();
    while (b < e && is_detachable_punct(piece[b])) ++b;
    while (e > b && is_detachable_punct(piece[e - 1])) --e;
    for (std::size_t k = 0; k < b; ++k) tokens.emplace_back(1, piece[k]);
    if (e > b) tokens.emplace_back(piece.substr(b, e - b));
    for (std::size_t k = e; k < piece.size(); ++k) tokens.emplace_back(1, piece[k]);
  }
  return tokens;
}

// ---- tagging -------------------------------------------------------------

class PosTagger {
 public:
  virtual ~PosTagger() = default;
  /// One tag per input token.
  virtual std::vector<PosTag> tag(std::span<const std::string> normalized) const = 0;
  /// Identifies the tagger's behavior for preprocessing cache keys.
  virtual std::string version() const = 0;
};

inline const std::unordered_set<std::string>& auxiliary_words() {
  static const std::unordered_set<std::string> words = {
      "be", "am", "is", "are", "was", "were", "been", "being", "do", "does", "did", "have", "has", "had",
      "will", "would", "can", "could", "shall", "should", "may", "might", "must"};
  return words;
}

/// Deterministic closed-class lexicon plus suffix rules. Unknown words are
/// NOUN.
class RuleTagger final : public PosTagger {
 public:
  RuleTagger() {
    add(PosTag::PRON, {"i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him",
                       "his", "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us",
                       "our", "ours", "ourselves", "they", "them", "their", "theirs", "themselves", "who",
                       "whom", "whose", "what", "which", "someone", "somebody", "something", "anyone",
                       "anybody", "anything", "everyone", "everybody", "everything", "nobody", "nothing",
                       "none", "u", "ya"});
    add(PosTag::DET, {"the", "a", "an", "this", "that", "these", "those", "some", "any", "every", "each",
                      "no", "all", "both", "either", "neither", "another", "such"});
    add(PosTag::ADP, {"in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
                      "during", "before", "after", "above", "below", "from", "up", "down", "of", "off",
                      "over", "under", "around", "among", "without", "within", "via", "per", "across",
                      "behind", "beside", "besides", "towards", "toward", "upon", "onto", "than"});
    add(PosTag::CCONJ, {"and", "or", "but", "nor", "yet", "&"});
    add(PosTag::SCONJ, {"if", "because", "although", "though", "while", "whereas", "since", "unless", "until",
                        "whether", "as", "cause", "cuz"});
    add(PosTag::PART, {"to", "not", "n't", "'s"});
    add(PosTag::ADV, {"very", "really", "just", "so", "too", "also", "always", "never", "often", "sometimes",
                      "now", "then", "here", "there", "again", "already", "still", "even", "only", "quite",
                      "rather", "ever", "soon", "today", "tomorrow", "yesterday", "when", "where", "why",
                      "how", "almost", "much", "more", "most", "less", "least", "well", "back", "away",
                      "once", "twice", "maybe", "perhaps", "totally", "definitely", "absolutely"});
    add(PosTag::INTJ, {"oh", "wow", "yeah", "yes", "hey", "ah", "aha", "haha", "hahaha", "lol", "ugh", "yay",
                       "oops", "please", "thanks", "ok", "okay", "omg", "hmm", "duh", "whoa", "sure"});
    add(PosTag::NUM, {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
                      "hundred", "thousand", "million", "billion", "first", "second", "third"});
    add(PosTag::VERB,
        {"love", "loves", "loved", "loving", "like", "likes", "liked", "hate", "hates", "hated", "ignore",
         "ignores", "ignored", "enjoy", "enjoys", "enjoyed", "get", "gets", "got", "gotten", "go", "goes",
         "went", "gone", "make", "makes", "made", "take", "takes", "took", "taken", "see", "sees", "saw",
         "seen", "know", "knows", "knew", "known", "think", "thinks", "thought", "want", "wants", "need",
         "needs", "say", "says", "said", "tell", "tells", "told", "give", "gives", "gave", "given", "come",
         "comes", "came", "feel", "feels", "felt", "keep", "keeps", "kept", "leave", "leaves", "left", "let",
         "lets", "put", "puts", "find", "finds", "found", "wait", "waits", "work", "works", "stuck", "lose",
         "loses", "lost", "miss", "misses", "adore", "adores", "wake", "wakes", "woke", "sit", "sits", "sat",
         "stand", "stands", "stood", "run", "runs", "ran", "spend", "spends", "spent", "pay", "pays", "paid",
         "fail", "fails", "break", "breaks", "broke", "broken", "cancel", "cancels", "forget", "forgets",
         "forgot", "forgotten", "yell", "yells", "cry", "cries", "cried", "eat", "eats", "ate", "eaten",
         "drive", "drives", "drove", "driven", "write", "writes", "wrote", "written", "read", "reads",
         "hear", "hears", "heard", "watch", "watches", "study", "studies", "clean", "cleans", "sleep",
         "sleeps", "slept", "appreciate", "appreciates", "thank", "help", "helps", "try", "tries", "tried",
         "ruin", "ruins", "delay", "delays", "crash", "crashes", "blame", "blames", "insult", "insults",
         "reject", "rejects", "dump", "dumps", "yelled", "stranded", "rains", "rain", "snow", "snows"});
    add(PosTag::ADJ, {"good", "great", "bad", "awful", "nice", "happy", "sad", "wonderful", "terrible",
                      "amazing", "fantastic", "horrible", "best", "worst", "better", "worse", "perfect",
                      "lovely", "fun", "new", "old", "big", "small", "long", "short", "late", "early",
                      "glad", "sick", "tired", "boring", "exciting", "brilliant", "awesome", "cool", "hot",
                      "cold", "favorite", "favourite", "fine", "poor", "rich", "slow", "fast", "broken",
                      "free", "busy", "lucky", "stupid", "smart", "annoying", "delightful", "thrilled"});
  }

  std::vector<PosTag> tag(std::span<const std::string> normalized) const override {
    std::vector<PosTag> tags;
    tags.reserve(normalized.size());
    for (const auto& w : normalized) tags.push_back(tag_word(w));
    return tags;
  }

  std::string version() const override { return "rule-tagger/1"; }

  PosTag tag_word(const std::string& w) const {
    if (w.empty()) return PosTag::X;
    if (w.size() == 1 && is_detachable_punct(w[0])) return PosTag::PUNCT;
    if (w.size() == 1 && std::ispunct(static_cast<unsigned char>(w[0]))) {
      return w[0] == '-' ? PosTag::PUNCT : PosTag::SYM;
    }
    if (w[0] == '#' || w[0] == '@' || w.rfind("http", 0) == 0) return PosTag::X;
    if (std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == ','; })) {
      return PosTag::NUM;
    }
    if (auxiliary_words().contains(w)) return PosTag::AUX;
    if (auto it = closed_.find(w); it != closed_.end()) return it->second;
    if (noun_exceptions().contains(w)) return PosTag::NOUN;
    if (ends_with(w, "ly") && w.size() > 4) return PosTag::ADV;
    if ((ends_with(w, "ed") || ends_with(w, "ing")) && w.size() > 4) return PosTag::VERB;
    for (const char* suffix : {"ous", "ful", "less", "ive", "able", "ible", "ic", "ish"}) {
      if (ends_with(w, suffix) && w.size() > std::char_traits<char>::length(suffix) + 2) return PosTag::ADJ;
    }
    return PosTag::NOUN;
  }

 private:
  static bool ends_with(const std::string& w, std::string_view suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  static const std::unordered_set<std::string>& noun_exceptions() {
    static const std::unordered_set<std::string> words = {
        "thing", "things", "morning", "mornings", "evening", "evenings", "ceiling", "building", "buildings",
        "wedding", "weddings", "meeting", "meetings", "feeling", "feelings", "king", "ring", "spring",
        "string", "wing", "bed", "red", "shed", "need", "seed", "speed", "weed", "family", "reply",
        "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday", "traffic", "music",
        "homework", "supply", "july", "italy", "ally", "belly", "bully", "jelly", "rally", "holly"};
    return words;
  }

  void add(PosTag tag, std::initializer_list<const char*> words) {
    for (const char* w : words) closed_.emplace(w, tag);
  }

  std::unordered_map<std::string, PosTag> closed_;
};

inline std::vector<PosTag> tag_pos(std::span<const std::string> normalized, const PosTagger& tagger) {
  auto tags = tagger.tag(normalized);
  if (tags.size() != normalized.size()) {
    throw Error("tagger " + tagger.version() + " returned " + std::to_string(tags.size()) + " tags for " +
                std::to_string(normalized.size()) + " tokens");
  }
  return tags;
}

// ---- sentiment lexicon ---------------------------------------------------

class SentimentLexicon {
 public:
  SentimentLexicon() = default;

  /// Inserts or overwrites `word` (normalized). Values must lie in [-1, 1].
  void set(const std::string& word, double value) {
    if (!(value >= -1.0 && value <= 1.0)) {
      throw Error("lexicon value for '" + word + "' out of range [-1, 1]: " + std::to_string(value));
    }
    entries_[to_lower(word)] = value;
  }

  std::optional<double> lookup(const std::string& normalized) const {
    auto it = entries_.find(normalized);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::unordered_map<std::string, double>& entries() const noexcept { return entries_; }

  /// Canonical text form (sorted), used for cache fingerprints.
  std::string canonical() const {
    std::vector<std::pair<std::string, double>> sorted(entries_.begin(), entries_.end());
    std::sort(sorted.begin(), sorted.end());
    std::ostringstream os;
    os.precision(17);
    for (const auto& [w, v] : sorted) os << w << '\t' << v << '\n';
    return os.str();
  }

 private:
  std::unordered_map<std::string, double> entries_;
};

/// Parses "word<TAB>value" lines. '#' lines and blank lines are skipped;
/// later duplicates overwrite earlier ones.
inline SentimentLexicon parse_lexicon(std::istream& in) {
  SentimentLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected 'word<TAB>value'", lineno);
    const std::string word = line.substr(0, tab);
    const std::string field = line.substr(tab + 1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw ParseError("cannot parse sentiment value '" + field + "'", lineno);
    }
    if (!(value >= -1.0 && value <= 1.0)) {
      throw ParseError("sentiment value " + field + " out of range [-1, 1]", lineno);
    }
    lex.set(word, value);
  }
  return lex;
}

inline SentimentLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon " + path.string());
  try {
    return parse_lexicon(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

inline std::vector<double> score_sentiment(std::span<const std::string> normalized, const SentimentLexicon& lexicon) {
  std::vector<double> scores;
  scores.reserve(normalized.size());
  for (const auto& w : normalized) scores.push_back(lexicon.lookup(w).value_or(0.0));
  return scores;
}

// ---- full pipeline -------------------------------------------------------

/// Builds tokens from already-split surface strings and (optionally) given
/// tags; when `tags` is empty the tagger is consulted.
inline std::vector<Token> make_tokens(const std::vector<std::string>& surfaces, const PosTagger& tagger,
                                      const SentimentLexicon& lexicon, std::span<const PosTag> tags = {}) {
  std::vector<std::string> normalized;
  normalized.reserve(surfaces.size());
  for (const auto& s : surfaces) normalized.push_back(to_lower(s));
  std::vector<PosTag> pos = tags.empty() ? tag_pos(normalized, tagger) : std::vector<PosTag>(tags.begin(), tags.end());
  if (pos.size() != surfaces.size()) throw Error("pre-tagged input: tag count differs from token count");
  const auto scores = score_sentiment(normalized, lexicon);
  std::vector<Token> tokens(surfaces.size());
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    tokens[i] = Token{surfaces[i], normalized[i], pos[i], scores[i], i};
  }
  return tokens;
}

inline std::vector<Token> analyze(std::string_view text, const PosTagger& tagger, const SentimentLexicon& lexicon) {
  return make_tokens(tokenize(text), tagger, lexicon);
}

}  // namespace bns
