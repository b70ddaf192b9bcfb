#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "logsieve/types.hpp"

namespace logsieve {

enum class Sentiment { positive, negative, neutral };
std::string_view to_string(Sentiment s);

struct NGramRecord {
    std::string ngram;  // space-joined tokens
    int n = 0;
    std::size_t count_normal = 0;
    std::size_t count_abnormal = 0;
    double entropy = 0.0;
    Sentiment sentiment = Sentiment::neutral;

    std::size_t total() const { return count_normal + count_abnormal; }
};

struct EntropyStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

struct CategoryCoverage {
    double fraction_normal = 0;
    double fraction_abnormal = 0;
    double fraction_shared = 0;
    std::size_t records = 0;
};

/// Per-sentiment coverage; a category with no records is absent.
struct CoverageReport {
    std::map<Sentiment, std::optional<CategoryCoverage>> categories;
};

/// Maps a token list to a real-valued polarity score.
class SentimentScorer {
public:
    virtual ~SentimentScorer() = default;
    virtual double score(const std::vector<std::string>& tokens) const = 0;
};

/// Word-polarity lexicon; score = sum of polarities / number of tokens.
class LexiconScorer final : public SentimentScorer {
public:
    explicit LexiconScorer(std::unordered_map<std::string, double> polarity) : polarity_(std::move(polarity)) {}

    /// File format: "<word> <polarity>" per line, '#' starts a comment.
    static LexiconScorer load(const std::filesystem::path& path);
    static const LexiconScorer& default_lexicon();

    double score(const std::vector<std::string>& tokens) const override;
    std::optional<double> polarity(const std::string& word) const;

private:
    std::unordered_map<std::string, double> polarity_;
};

/// Sliding-window n-grams counted per severity group. Records whose total
/// count is <= min_count are dropped. Sorted by n-gram text; entropy is filled
/// in, sentiment left neutral.
std::vector<NGramRecord> extract_ngrams(const std::vector<SLSample>& samples, int n, std::size_t min_count = 3);

/// Binary Shannon entropy (base 2) of the normal/abnormal split.
double ngram_entropy(std::size_t count_normal, std::size_t count_abnormal);

/// Min, quartiles (linear interpolation between order statistics) and max.
EntropyStats entropy_stats(std::vector<double> values);
EntropyStats entropy_stats(const std::vector<NGramRecord>& records);

Sentiment classify_sentiment(std::string_view ngram, const SentimentScorer& scorer, double tau = 0.1);

CoverageReport coverage_report(const std::vector<NGramRecord>& records);

struct StudyOptions {
    std::vector<int> ns{3, 4, 5};
    std::size_t min_count = 3;
    double tau = 0.1;
};

struct StudyResult {
    std::map<int, std::optional<EntropyStats>> stats_per_n;
    std::optional<EntropyStats> pooled;
    CoverageReport coverage;
    std::vector<NGramRecord> records;  // all n, ordered by (n, ngram)
};

StudyResult run_study(const std::vector<SLSample>& samples, const StudyOptions& options,
                      const SentimentScorer& scorer = LexiconScorer::default_lexicon());

nlohmann::ordered_json to_json(const StudyResult& result, const StudyOptions& options);
/// Tab-separated dump: ngram, n, count_normal, count_abnormal, entropy, sentiment.
void write_ngram_table(std::ostream& out, const std::vector<NGramRecord>& records);

}  // namespace logsieve
