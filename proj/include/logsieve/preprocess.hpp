#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "logsieve/types.hpp"

namespace logsieve {

inline constexpr std::string_view kLmeToken = "[LME]";
inline constexpr std::string_view kPadToken = "[PD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr int kLmeIndex = 0;
inline constexpr int kPadIndex = 1;
inline constexpr int kUnkIndex = 2;
inline constexpr int kReservedTokens = 3;

/// Stopword set loaded from a one-word-per-line file.
class StopwordList {
public:
    StopwordList() = default;
    explicit StopwordList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

    static StopwordList load(const std::filesystem::path& path);

    /// The shipped list, or the file named by LOGSIEVE_STOPWORDS when set.
    static const StopwordList& default_list();

    bool contains(std::string_view w) const { return words_.contains(std::string(w)); }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::string> words_;
};

/// Location of the shipped data files (stopwords, sentiment lexicon).
std::filesystem::path data_dir();

/// Removes every substring of the form (/segment){2,}/? where a segment is a
/// run of non-space, non-slash characters.
std::string remove_paths(std::string_view text);

/// Removes format placeholders from log-instruction static text:
/// printf-style (%s, %5.2f, %lu, %(name)s, %%), brace-style ({}, {0}, {name}) and
/// shell-style ($VAR, ${VAR}). Each placeholder is replaced by a space.
std::string strip_placeholders(std::string_view text);

/// Message normalization shared by target logs and mined static texts:
/// path removal, whitespace split, drop tokens containing a digit, strip
/// ASCII special characters, lowercase, drop stopwords.
std::vector<std::string> normalize_text(std::string_view raw,
                                        const StopwordList& stopwords = StopwordList::default_list());

class Vocabulary {
public:
    /// Reserved tokens followed by every corpus token ordered by descending
    /// frequency, ties lexicographic. Literal reserved tokens in the corpus
    /// are not added twice.
    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus);

    /// Rebuilds from an index-ordered token list (as persisted).
    static Vocabulary from_tokens(std::vector<std::string> tokens);

    /// Index of the token, or the [UNK] index when unseen.
    int index_of(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Fixed-length encoded log: [LME] followed by max_len token slots.
struct TokenSequence {
    std::vector<int> indices;
    std::vector<bool> mask;  // false at [PD] positions

    /// Number of leading unmasked positions ([LME] + real tokens).
    std::size_t active_length() const;
    bool operator==(const TokenSequence&) const = default;
};

TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, int max_len);

/// Selects each sample independently with probability sample_frac; in each
/// selected sample ceil(token_frac * len)
/// distinct positions are replaced by the literal [UNK] token.
std::vector<SLSample> mask_for_pretraining(const std::vector<SLSample>& samples, double sample_frac,
                                           double token_frac, std::uint64_t seed);

}  // namespace logsieve
