#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logsieve {

/// Raised for contract violations on inputs (empty splits, malformed files, ...).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SeverityGroup { normal, abnormal };

inline std::string_view to_string(SeverityGroup g) {
    return g == SeverityGroup::normal ? "normal" : "abnormal";
}

inline std::optional<SeverityGroup> parse_severity_group(std::string_view s) {
    if (s == "normal") return SeverityGroup::normal;
    if (s == "abnormal") return SeverityGroup::abnormal;
    return std::nullopt;
}

/// 0 for normal, 1 for abnormal; the label convention used in training.
inline int label_of(SeverityGroup g) { return g == SeverityGroup::normal ? 0 : 1; }

/// One preprocessed log-instruction static text with its severity group.
struct SLSample {
    std::vector<std::string> tokens;
    SeverityGroup group = SeverityGroup::normal;
    std::string source;

    bool operator==(const SLSample&) const = default;
};

}  // namespace logsieve
