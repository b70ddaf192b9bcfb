#include "logsieve/corpus_study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "logsieve/preprocess.hpp"

namespace logsieve {

std::string_view to_string(Sentiment s) {
    switch (s) {
        case Sentiment::positive: return "positive";
        case Sentiment::negative: return "negative";
        case Sentiment::neutral: break;
    }
    return "neutral";
}

LexiconScorer LexiconScorer::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open sentiment lexicon: " + path.string());
    std::unordered_map<std::string, double> polarity;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string word;
        double value = 0;
        if (!(fields >> word)) continue;
        if (!(fields >> value)) throw Error("malformed lexicon line: " + line);
        polarity[word] = value;
    }
    return LexiconScorer(std::move(polarity));
}

const LexiconScorer& LexiconScorer::default_lexicon() {
    static const LexiconScorer lexicon = load(data_dir() / "sentiment_lexicon.txt");
    return lexicon;
}

double LexiconScorer::score(const std::vector<std::string>& tokens) const {
    if (tokens.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& t : tokens)
        if (auto p = polarity(t)) sum += *p;
    return sum / static_cast<double>(tokens.size());
}

std::optional<double> LexiconScorer::polarity(const std::string& word) const {
    auto it = polarity_.find(word);
    if (it == polarity_.end()) return std::nullopt;
    return it->second;
}

std::vector<NGramRecord> extract_ngrams(const std::vector<SLSample>& samples, int n, std::size_t min_count) {
    if (n < 1) throw Error("n-gram order must be at least 1");
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    const auto width = static_cast<std::size_t>(n);
    for (const auto& s : samples) {
        if (s.tokens.size() < width) continue;
        for (std::size_t i = 0; i + width <= s.tokens.size(); ++i) {
            std::string gram = s.tokens[i];
            for (std::size_t k = 1; k < width; ++k) gram += ' ' + s.tokens[i + k];
            auto& c = counts[gram];
            (s.group == SeverityGroup::normal ? c.first : c.second) += 1;
        }
    }
    std::vector<NGramRecord> out;
    for (const auto& [gram, c] : counts) {
        if (c.first + c.second <= min_count) continue;
        NGramRecord r;
        r.ngram = gram;
        r.n = n;
        r.count_normal = c.first;
        r.count_abnormal = c.second;
        r.entropy = ngram_entropy(c.first, c.second);
        out.push_back(std::move(r));
    }
    return out;
}

double ngram_entropy(std::size_t count_normal, std::size_t count_abnormal) {
    const std::size_t total = count_normal + count_abnormal;
    if (total == 0) throw Error("entropy undefined for an n-gram with zero occurrences");
    if (count_normal == 0 || count_abnormal == 0) return 0.0;
    const double p = static_cast<double>(count_normal) / static_cast<double>(total);
    const double q = static_cast<double>(count_abnormal) / static_cast<double>(total);
    return -(p * std::log2(p) + q * std::log2(q));
}

EntropyStats entropy_stats(std::vector<double> values) {
    if (values.empty()) throw Error("entropy statistics need at least one record");
    std::sort(values.begin(), values.end());
    auto quantile = [&](double prob) {
        const double h = prob * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return {values.front(), quantile(0.25), quantile(0.5), quantile(0.75), values.back()};
}

EntropyStats entropy_stats(const std::vector<NGramRecord>& records) {
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto& r : records) values.push_back(r.entropy);
    return entropy_stats(std::move(values));
}

Sentiment classify_sentiment(std::string_view ngram, const SentimentScorer& scorer, double tau) {
    std::vector<std::string> tokens;
    std::istringstream words{std::string(ngram)};
    for (std::string w; words >> w;) tokens.push_back(w);
    const double s = scorer.score(tokens);
    if (s > tau) return Sentiment::positive;
    if (s < -tau) return Sentiment::negative;
    return Sentiment::neutral;
}

CoverageReport coverage_report(const std::vector<NGramRecord>& records) {
    struct Tally {
        std::size_t normal = 0, abnormal = 0, shared = 0;
    };
    std::map<Sentiment, Tally> tallies;
    for (const auto& r : records) {
        auto& t = tallies[r.sentiment];
        if (r.count_abnormal == 0)
            ++t.normal;
        else if (r.count_normal == 0)
            ++t.abnormal;
        else
            ++t.shared;
    }
    CoverageReport report;
    for (Sentiment s : {Sentiment::positive, Sentiment::negative, Sentiment::neutral}) {
        auto it = tallies.find(s);
        if (it == tallies.end()) {
            report.categories[s] = std::nullopt;
            continue;
        }
        const auto& t = it->second;
        const double total = static_cast<double>(t.normal + t.abnormal + t.shared);
        report.categories[s] = CategoryCoverage{static_cast<double>(t.normal) / total,
                                                static_cast<double>(t.abnormal) / total,
                                                static_cast<double>(t.shared) / total,
                                                t.normal + t.abnormal + t.shared};
    }
    return report;
}

StudyResult run_study(const std::vector<SLSample>& samples, const StudyOptions& options,
                      const SentimentScorer& scorer) {
    if (samples.empty()) throw Error("study needs a non-empty SL dataset");
    StudyResult result;
    for (int n : options.ns) {
        auto records = extract_ngrams(samples, n, options.min_count);
        for (auto& r : records) r.sentiment = classify_sentiment(r.ngram, scorer, options.tau);
        result.stats_per_n[n] = records.empty() ? std::nullopt : std::optional(entropy_stats(records));
        result.records.insert(result.records.end(), records.begin(), records.end());
    }
    if (!result.records.empty()) result.pooled = entropy_stats(result.records);
    result.coverage = coverage_report(result.records);
    return result;
}

namespace {

nlohmann::ordered_json stats_json(const std::optional<EntropyStats>& s) {
    if (!s) return nullptr;
    nlohmann::ordered_json j;
    j["min"] = s->min;
    j["q1"] = s->q1;
    j["median"] = s->median;
    j["q3"] = s->q3;
    j["max"] = s->max;
    return j;
}

}  // namespace

nlohmann::ordered_json to_json(const StudyResult& result, const StudyOptions& options) {
    nlohmann::ordered_json j;
    j["min_count"] = options.min_count;
    j["tau"] = options.tau;
    nlohmann::ordered_json per_n = nlohmann::ordered_json::object();
    for (const auto& [n, stats] : result.stats_per_n) {
        auto count = std::count_if(result.records.begin(), result.records.end(),
                                   [n = n](const NGramRecord& r) { return r.n == n; });
        per_n[std::to_string(n)] = {{"records", count}, {"entropy", stats_json(stats)}};
    }
    j["entropy_per_n"] = per_n;
    j["entropy_pooled"] = {{"records", result.records.size()}, {"entropy", stats_json(result.pooled)}};
    nlohmann::ordered_json coverage = nlohmann::ordered_json::object();
    for (const auto& [s, cat] : result.coverage.categories) {
        if (!cat) {
            coverage[std::string(to_string(s))] = nullptr;
            continue;
        }
        coverage[std::string(to_string(s))] = {{"records", cat->records},
                                               {"normal", cat->fraction_normal},
                                               {"abnormal", cat->fraction_abnormal},
                                               {"shared", cat->fraction_shared}};
    }
    j["coverage"] = coverage;
    return j;
}

void write_ngram_table(std::ostream& out, const std::vector<NGramRecord>& records) {
    out << "ngram\tn\tcount_normal\tcount_abnormal\tentropy\tsentiment\n";
    for (const auto& r : records) {
        out << r.ngram << '\t' << r.n << '\t' << r.count_normal << '\t' << r.count_abnormal << '\t'
            << std::setprecision(6) << r.entropy << '\t' << to_string(r.sentiment) << '\n';
    }
}

}  // namespace logsieve
