#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "logsieve/preprocess.hpp"
#include "logsieve/types.hpp"

namespace logsieve {

enum class LanguageProfile { python, java, cpp };

/// A log call found in source code: the literal message text and its level.
struct RawInstruction {
    RawInstruction(std::string text, std::string level, std::string locator, LanguageProfile lang);

    std::string static_text;
    std::string level_name;  // lowercased
    std::string source_locator;
    LanguageProfile language_profile;

    bool operator==(const RawInstruction&) const = default;
};

/// Profile for a file extension (.py, .java, .cpp/.cc/.cxx/.hpp/.h), if any.
std::optional<LanguageProfile> profile_for_path(const std::filesystem::path& path);

/// Pattern-based extraction of log calls from one source file. Calls whose
/// message has no string literal are skipped; placeholders are kept.
/// Literals concatenated within one call are joined with a single space.
std::vector<RawInstruction> extract_instructions(std::string_view source_text, LanguageProfile profile,
                                                 std::string_view path = {});

/// info -> normal; error, fatal, critical -> abnormal; everything else none.
/// A few aliases (err, crit, exception, severe) are folded in first.
std::optional<SeverityGroup> map_severity(std::string_view level_name);

std::vector<SLSample> build_sl_dataset(const std::vector<RawInstruction>& instructions,
                                       const StopwordList& stopwords = StopwordList::default_list());

/// Walks a directory tree and extracts from every recognized source file.
/// Output is ordered by (path, line).
std::vector<RawInstruction> mine_directory(const std::filesystem::path& root);

void write_sl_dataset(std::ostream& out, const std::vector<SLSample>& samples);
std::vector<SLSample> read_sl_dataset(std::istream& in);
std::vector<SLSample> read_sl_dataset(const std::filesystem::path& path);

}  // namespace logsieve
