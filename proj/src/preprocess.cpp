#include "logsieve/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>

#include "logsieve/rng.hpp"

namespace logsieve {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_ascii(char c) { return static_cast<unsigned char>(c) < 0x80; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("LOGSIEVE_DATA_DIR"); env && *env) return env;
    return LOGSIEVE_DATA_DIR;
}

StopwordList StopwordList::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open stopword list: " + path.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && is_space(line.back())) line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && is_space(line[start])) ++start;
        if (start < line.size() && line[start] != '#') words.insert(line.substr(start));
    }
    return StopwordList(std::move(words));
}

const StopwordList& StopwordList::default_list() {
    static const StopwordList list = [] {
        if (const char* env = std::getenv("LOGSIEVE_STOPWORDS"); env && *env) return load(env);
        return load(data_dir() / "stopwords.txt");
    }();
    return list;
}

std::string remove_paths(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '/') {
            std::size_t j = i;
            int segments = 0;
            while (j + 1 < text.size() && text[j] == '/' && text[j + 1] != '/' && !is_space(text[j + 1])) {
                ++j;
                while (j < text.size() && text[j] != '/' && !is_space(text[j])) ++j;
                ++segments;
            }
            if (segments >= 2) {
                if (j < text.size() && text[j] == '/') ++j;
                i = j;
                continue;
            }
        }
        out.push_back(text[i]);
        ++i;
    }
    return out;
}

std::string strip_placeholders(std::string_view text) {
    static const std::regex placeholder(
        R"(%(\([A-Za-z_][A-Za-z0-9_]*\))?[-+ #0]*(\d+|\*)?(\.(\d+|\*))?(hh|h|ll|l|L|z|j|t|q)?[diouxXeEfFgGaAcspn%])"
        R"(|\{[^{}\s]*\})"
        R"(|\$\{[^}]*\}|\$[A-Za-z_][A-Za-z0-9_]*)");
    return std::regex_replace(std::string(text), placeholder, " ");
}

std::vector<std::string> normalize_text(std::string_view raw, const StopwordList& stopwords) {
    const std::string cleaned = remove_paths(raw);
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && is_space(cleaned[i])) ++i;
        std::size_t start = i;
        while (i < cleaned.size() && !is_space(cleaned[i])) ++i;
        if (start == i) continue;
        std::string_view word(cleaned.data() + start, i - start);
        if (std::any_of(word.begin(), word.end(), is_digit)) continue;
        std::string token;
        token.reserve(word.size());
        for (char c : word) {
            if (is_ascii(c) && !is_alnum(c)) continue;
            token.push_back(is_ascii(c) ? static_cast<char>(std::tolower(static_cast<unsigned char>(c))) : c);
        }
        if (token.empty() || stopwords.contains(token)) continue;
        tokens.push_back(std::move(token));
    }
    return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus) {
    if (corpus.empty()) throw Error("cannot build a vocabulary from an empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& sample : corpus)
        for (const auto& tok : sample)
            if (tok != kLmeToken && tok != kPadToken && tok != kUnkToken) ++counts[tok];
    std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens{std::string(kLmeToken), std::string(kPadToken), std::string(kUnkToken)};
    for (auto& [tok, _] : ordered) tokens.push_back(tok);
    return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < static_cast<std::size_t>(kReservedTokens) || tokens[kLmeIndex] != kLmeToken ||
        tokens[kPadIndex] != kPadToken || tokens[kUnkIndex] != kUnkToken)
        throw Error("vocabulary must start with [LME], [PD], [UNK]");
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
            throw Error("duplicate vocabulary token: " + v.tokens_[i]);
    }
    return v;
}

int Vocabulary::index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkIndex : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::size_t TokenSequence::active_length() const {
    std::size_t n = 0;
    while (n < mask.size() && mask[n]) ++n;
    return n;
}

TokenSequence encode(const std::vector<std::string>& tokens, const Vocabulary& vocab, int max_len) {
    if (max_len < 1) throw Error("max_len must be at least 1");
    const auto total = static_cast<std::size_t>(max_len) + 1;
    TokenSequence seq;
    seq.indices.assign(total, kPadIndex);
    seq.mask.assign(total, false);
    seq.indices[0] = kLmeIndex;
    seq.mask[0] = true;
    const std::size_t n = std::min(tokens.size(), static_cast<std::size_t>(max_len));
    for (std::size_t i = 0; i < n; ++i) {
        seq.indices[i + 1] = vocab.index_of(tokens[i]);
        seq.mask[i + 1] = true;
    }
    return seq;
}

std::vector<SLSample> mask_for_pretraining(const std::vector<SLSample>& samples, double sample_frac,
                                           double token_frac, std::uint64_t seed) {
    if (sample_frac < 0.0 || sample_frac > 1.0 || token_frac < 0.0 || token_frac > 1.0)
        throw Error("masking fractions must lie in [0, 1]");
    Rng rng(seed);
    std::vector<SLSample> out = samples;
    for (auto& s : out) {
        if (!rng.bernoulli(sample_frac)) continue;
        const auto len = s.tokens.size();
        const auto k = std::min(len, static_cast<std::size_t>(std::ceil(token_frac * static_cast<double>(len) - 1e-12)));
        for (std::size_t pos : rng.sample_without_replacement(len, k)) s.tokens[pos] = std::string(kUnkToken);
    }
    return out;
}

}  // namespace logsieve
