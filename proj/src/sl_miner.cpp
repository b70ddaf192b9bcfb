#include "logsieve/sl_miner.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace logsieve {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

enum class CallStyle {
    arguments,  // message is the first argument of the call
    stream,     // message literals follow until ';'
};

struct Pattern {
    std::regex re;
    CallStyle style;
};

const std::vector<Pattern>& patterns_for(LanguageProfile profile) {
    // Receivers are identifiers that mention "log" (logger, LOG, self._log, ...).
    static const std::string receiver = R"(\b\w*(?:log|LOG|Log)\w*)";
    static const std::string levels =
        "(trace|debug|info|notice|warn|warning|error|err|exception|critical|crit|fatal|severe|fine|finer|finest)";
    static const std::vector<Pattern> python{
        {std::regex(receiver + R"(\.)" + levels + R"(\s*\()"), CallStyle::arguments},
        {std::regex(receiver + R"(\.log\s*\(\s*(?:[\w.]*\.)?)" + levels + R"(\s*,)", std::regex::icase),
         CallStyle::arguments},
    };
    static const std::vector<Pattern> java{
        {std::regex(receiver + R"(\.)" + levels + R"(\s*\()"), CallStyle::arguments},
        {std::regex(receiver + R"(\.log\s*\(\s*(?:[\w.]*\.)?)" + levels + R"(\s*,)", std::regex::icase),
         CallStyle::arguments},
    };
    static const std::vector<Pattern> cpp{
        {std::regex(receiver + R"((?:\.|->|::))" + levels + R"(\s*\()"), CallStyle::arguments},
        {std::regex(R"(\b[A-Z_]*LOG_(TRACE|DEBUG|INFO|NOTICE|WARN|WARNING|ERROR|ERR|CRITICAL|CRIT|FATAL)\s*\()"),
         CallStyle::arguments},
        {std::regex(R"(\b(?:D?LOG|PLOG|SYSLOG|LOG_IF|DLOG_IF)\s*\(\s*(INFO|WARNING|ERROR|FATAL)\b[^;)]*\))"),
         CallStyle::stream},
        {std::regex(R"(\bBOOST_LOG_TRIVIAL\s*\(\s*(\w+)\s*\))"), CallStyle::stream},
    };
    switch (profile) {
        case LanguageProfile::python: return python;
        case LanguageProfile::java: return java;
        case LanguageProfile::cpp: break;
    }
    return cpp;
}

/// Reads string literals starting at `pos`. Handles the quoting rules of the
/// profile well enough to skip over them and recover their text.
class LiteralScanner {
public:
    LiteralScanner(std::string_view text, LanguageProfile profile) : text_(text), profile_(profile) {}

    /// If a string literal (with optional prefix) starts at pos, returns its
    /// decoded content and advances pos past it.
    std::optional<std::string> string_at(std::size_t& pos) const {
        std::size_t p = pos;
        bool raw = false;
        // prefixes: r/b/u/f combinations (python), u8/L/u/U and R (c++)
        while (p < text_.size() && p - pos < 3 && std::isalpha(static_cast<unsigned char>(text_[p]))) {
            char c = text_[p];
            if (c == 'r' || c == 'R') raw = true;
            ++p;
            if (p < text_.size() && text_[p] == '8') ++p;
        }
        if (p != pos) {
            if (pos > 0 && is_ident(text_[pos - 1])) return std::nullopt;
            std::string_view prefix = text_.substr(pos, p - pos);
            if (!valid_prefix(prefix)) return std::nullopt;
        }
        if (p >= text_.size()) return std::nullopt;
        const char q = text_[p];
        if (q != '"' && !(q == '\'' && profile_ == LanguageProfile::python)) return std::nullopt;
        if (raw && profile_ == LanguageProfile::cpp) return cpp_raw(pos, p);
        const bool triple = profile_ == LanguageProfile::python && text_.substr(p, 3) == std::string(3, q);
        std::size_t i = p + (triple ? 3 : 1);
        std::string out;
        while (i < text_.size()) {
            char c = text_[i];
            if (triple ? text_.substr(i, 3) == std::string(3, q) : c == q) {
                pos = i + (triple ? 3 : 1);
                return out;
            }
            if (!triple && c == '\n') break;  // unterminated
            if (c == '\\' && i + 1 < text_.size()) {
                char e = text_[i + 1];
                if (raw) {
                    out.push_back(c);
                    out.push_back(e);
                } else if (e == 'n' || e == 't' || e == 'r') {
                    out.push_back(' ');
                } else if (e != '\n') {
                    out.push_back(e);
                }
                i += 2;
                continue;
            }
            out.push_back(c);
            ++i;
        }
        pos = i;
        return out;
    }

    /// Skips a non-string quoted token (character literal) at pos.
    bool skip_char_literal(std::size_t& pos) const {
        if (profile_ == LanguageProfile::python || text_[pos] != '\'') return false;
        std::size_t i = pos + 1;
        while (i < text_.size() && text_[i] != '\'' && text_[i] != '\n') i += text_[i] == '\\' ? 2 : 1;
        pos = std::min(i + 1, text_.size());
        return true;
    }

private:
    bool valid_prefix(std::string_view prefix) const {
        std::string p = lowercase(prefix);
        if (profile_ == LanguageProfile::python) {
            static const std::vector<std::string> ok{"r", "u", "b", "f", "rb", "br", "fr", "rf"};
            return std::find(ok.begin(), ok.end(), p) != ok.end();
        }
        if (profile_ == LanguageProfile::cpp) {
            static const std::vector<std::string> ok{"r", "u8", "u", "l", "u8r", "ur", "lr"};
            return std::find(ok.begin(), ok.end(), p) != ok.end();
        }
        return false;
    }

    std::optional<std::string> cpp_raw(std::size_t& pos, std::size_t quote) const {
        std::size_t open = text_.find('(', quote);
        if (open == std::string_view::npos) return std::nullopt;
        std::string delim = ")" + std::string(text_.substr(quote + 1, open - quote - 1)) + "\"";
        std::size_t close = text_.find(delim, open);
        if (close == std::string_view::npos) return std::nullopt;
        pos = close + delim.size();
        return std::string(text_.substr(open + 1, close - open - 1));
    }

    std::string_view text_;
    LanguageProfile profile_;
};

/// Replaces comments by spaces (newlines kept) so that commented-out log
/// calls are ignored and line numbers stay valid.
std::string blank_comments(std::string_view text, LanguageProfile profile) {
    std::string out(text);
    LiteralScanner scanner(text, profile);
    std::size_t i = 0;
    auto blank = [&](std::size_t from, std::size_t to) {
        for (std::size_t k = from; k < to && k < out.size(); ++k)
            if (out[k] != '\n') out[k] = ' ';
    };
    while (i < text.size()) {
        std::size_t p = i;
        if ((i == 0 || !is_ident(text[i - 1])) && scanner.string_at(p)) {
            i = p;
            continue;
        }
        if (scanner.skip_char_literal(p)) {
            i = p;
            continue;
        }
        if (profile == LanguageProfile::python) {
            if (text[i] == '#') {
                std::size_t end = text.find('\n', i);
                if (end == std::string_view::npos) end = text.size();
                blank(i, end);
                i = end;
                continue;
            }
        } else if (text[i] == '/' && i + 1 < text.size()) {
            if (text[i + 1] == '/') {
                std::size_t end = text.find('\n', i);
                if (end == std::string_view::npos) end = text.size();
                blank(i, end);
                i = end;
                continue;
            }
            if (text[i + 1] == '*') {
                std::size_t end = text.find("*/", i + 2);
                end = end == std::string_view::npos ? text.size() : end + 2;
                blank(i, end);
                i = end;
                continue;
            }
        }
        ++i;
    }
    return out;
}

/// Collects the string literals of the message starting at `pos`.
/// arguments: stops at the first top-level ',' or the closing ')'.
/// stream: stops at the first top-level ';'.
std::vector<std::string> collect_literals(std::string_view text, std::size_t pos, LanguageProfile profile,
                                          CallStyle style) {
    LiteralScanner scanner(text, profile);
    std::vector<std::string> literals;
    int depth = 0;
    while (pos < text.size()) {
        std::size_t p = pos;
        if ((pos == 0 || !is_ident(text[pos - 1])) && !(pos > 0 && text[pos - 1] == '.')) {
            if (auto lit = scanner.string_at(p)) {
                literals.push_back(std::move(*lit));
                pos = p;
                continue;
            }
        }
        if (scanner.skip_char_literal(p)) {
            pos = p;
            continue;
        }
        const char c = text[pos];
        if (c == '(' || c == '[' || c == '{') {
            ++depth;
        } else if (c == ')' || c == ']' || c == '}') {
            if (depth == 0) break;
            --depth;
        } else if (depth == 0 && c == ',' && style == CallStyle::arguments) {
            break;
        } else if (c == ';') {
            break;
        }
        ++pos;
    }
    return literals;
}

std::size_t line_of(std::string_view text, std::size_t pos) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

}  // namespace

RawInstruction::RawInstruction(std::string text, std::string level, std::string locator, LanguageProfile lang)
    : static_text(std::move(text)),
      level_name(lowercase(level)),
      source_locator(std::move(locator)),
      language_profile(lang) {
    if (static_text.empty()) throw Error("log instruction static text must not be empty");
}

std::optional<LanguageProfile> profile_for_path(const std::filesystem::path& path) {
    const std::string ext = lowercase(path.extension().string());
    if (ext == ".py") return LanguageProfile::python;
    if (ext == ".java") return LanguageProfile::java;
    if (ext == ".cpp" || ext == ".cc" || ext == ".cxx" || ext == ".hpp" || ext == ".h" || ext == ".hh")
        return LanguageProfile::cpp;
    return std::nullopt;
}

std::vector<RawInstruction> extract_instructions(std::string_view source_text, LanguageProfile profile,
                                                 std::string_view path) {
    const std::string code = blank_comments(source_text, profile);

    struct Hit {
        std::size_t pos;
        std::size_t end;
        std::string level;
        CallStyle style;
    };
    std::vector<Hit> hits;
    for (const auto& pattern : patterns_for(profile)) {
        for (auto it = std::sregex_iterator(code.begin(), code.end(), pattern.re); it != std::sregex_iterator();
             ++it) {
            const auto& m = *it;
            hits.push_back({static_cast<std::size_t>(m.position(0)),
                            static_cast<std::size_t>(m.position(0) + m.length(0)), m[1].str(), pattern.style});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

    std::vector<RawInstruction> out;
    std::size_t covered = 0;
    for (const auto& hit : hits) {
        if (hit.pos < covered) continue;
        covered = hit.end;
        auto literals = collect_literals(code, hit.end, profile, hit.style);
        std::string text;
        for (const auto& lit : literals) {
            if (lit.find_first_not_of(" \t\r\n") == std::string::npos) continue;
            if (!text.empty()) text.push_back(' ');
            text += lit;
        }
        if (text.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::string locator = std::string(path) + ":" + std::to_string(line_of(code, hit.pos));
        out.emplace_back(std::move(text), hit.level, std::move(locator), profile);
    }
    return out;
}

std::optional<SeverityGroup> map_severity(std::string_view level_name) {
    std::string level = lowercase(level_name);
    if (level == "err" || level == "exception" || level == "severe") level = "error";
    if (level == "crit") level = "critical";
    if (level == "info") return SeverityGroup::normal;
    if (level == "error" || level == "fatal" || level == "critical") return SeverityGroup::abnormal;
    return std::nullopt;
}

std::vector<SLSample> build_sl_dataset(const std::vector<RawInstruction>& instructions,
                                       const StopwordList& stopwords) {
    std::vector<SLSample> out;
    for (const auto& ins : instructions) {
        auto group = map_severity(ins.level_name);
        if (!group) continue;
        auto tokens = normalize_text(strip_placeholders(ins.static_text), stopwords);
        if (tokens.empty()) continue;
        out.push_back({std::move(tokens), *group, ins.source_locator});
    }
    return out;
}

std::vector<RawInstruction> mine_directory(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw Error("not a readable directory: " + root.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied)) {
        if (entry.is_regular_file() && profile_for_path(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RawInstruction> out;
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw Error("cannot read source file: " + file.string());
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string rel = fs::relative(file, root).generic_string();
        auto found = extract_instructions(buf.str(), *profile_for_path(file), rel);
        out.insert(out.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
    }
    return out;
}

void write_sl_dataset(std::ostream& out, const std::vector<SLSample>& samples) {
    for (const auto& s : samples) {
        nlohmann::ordered_json j;
        j["tokens"] = s.tokens;
        j["group"] = std::string(to_string(s.group));
        j["source"] = s.source;
        out << j.dump() << '\n';
    }
}

std::vector<SLSample> read_sl_dataset(std::istream& in) {
    std::vector<SLSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            SLSample s;
            s.tokens = j.at("tokens").get<std::vector<std::string>>();
            auto group = parse_severity_group(j.at("group").get<std::string>());
            if (!group) throw Error("unknown group");
            s.group = *group;
            s.source = j.value("source", "");
            if (s.tokens.empty()) throw Error("empty token list");
            out.push_back(std::move(s));
        } catch (const std::exception& e) {
            throw Error("malformed SL record on line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<SLSample> read_sl_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open SL dataset: " + path.string());
    return read_sl_dataset(in);
}

}  // namespace logsieve
