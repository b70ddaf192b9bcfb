#include "logsieve/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "logsieve/rng.hpp"
#include "logsieve/types.hpp"

namespace logsieve {

namespace {

const std::vector<std::string> kNormalWords{
    "accepted",  "allocated", "registered", "served",    "stored",    "received",  "sending",   "opened",
    "started",   "completed", "scheduled",  "committed", "replicated", "verified", "updated",   "loaded",
    "listening", "joined",    "created",    "flushed",   "synced",    "granted",   "ready",     "responder",
    "packet",    "session",   "request",    "heartbeat", "checkpoint", "snapshot", "replica",   "lease",
    "quota",     "volume",    "transfer",   "client",    "worker",    "cache",     "successfully", "renewed"};

const std::vector<std::string> kAbnormalWords{
    "failed",    "failure",     "error",      "exception", "timeout",    "refused",   "corrupt",  "unreachable",
    "denied",    "crashed",     "aborted",    "fatal",     "panic",      "invalid",   "lost",     "missing",
    "overflow",  "interrupted", "unavailable", "broken",   "deadlock",   "rejected",  "killed",   "unrecoverable",
    "mismatch",  "parity",      "kernel",     "socket",    "disk",       "machine",   "severed",  "halted",
    "segfault",  "stalled",     "dropped",    "terminated", "orphaned",  "poisoned",  "fault",    "exhausted"};

// Target-system words never seen in the mined instructions; they map to [UNK].
const std::vector<std::string> kTargetOnlyWords{"fsnamesystem", "datanode", "namenode", "dfsclient",
                                                "blockmap",     "pipeline", "rack",     "torus"};

std::string pick(const std::vector<std::string>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

std::vector<std::string> phrase(const std::vector<std::string>& pool, std::size_t min_len, std::size_t max_len,
                                Rng& rng) {
    const std::size_t len = min_len + static_cast<std::size_t>(rng.below(max_len - min_len + 1));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < len; ++i) words.push_back(pick(pool, rng));
    return words;
}

std::string capitalize(std::string w) {
    if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

/// Message text with a placeholder and a stopword mixed in.
std::string render(const std::vector<std::string>& words, const std::string& placeholder, Rng& rng) {
    std::string out;
    const std::size_t slot = static_cast<std::size_t>(rng.below(words.size() + 1));
    for (std::size_t i = 0; i <= words.size(); ++i) {
        if (i == slot) {
            if (!out.empty()) out += ' ';
            out += (rng.bernoulli(0.5) ? "for " : "on ") + placeholder;
        }
        if (i < words.size()) {
            if (!out.empty()) out += ' ';
            out += i == 0 ? capitalize(words[i]) : words[i];
        }
    }
    return out + ".";
}

struct Instruction {
    std::string text;
    bool abnormal;
};

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

std::string python_file(const std::vector<Instruction>& items, Rng& rng) {
    std::ostringstream out;
    out << "import logging\n\nlogger = logging.getLogger(__name__)\n\n\ndef handle(value, item):\n";
    for (const auto& it : items) {
        const std::string level = it.abnormal ? (rng.bernoulli(0.5) ? "error" : "critical") : "info";
        out << "    logger." << level << "(\"" << it.text << "\", value)\n";
        if (rng.bernoulli(0.2)) out << "    logger.debug(\"Tracing value \" + str(item))\n";
        if (rng.bernoulli(0.1)) out << "    # logger.info(\"commented out\")\n";
        if (rng.bernoulli(0.1)) out << "    logger.warning(message)\n";
    }
    return out.str();
}

std::string java_file(const std::vector<Instruction>& items, std::size_t index, Rng& rng) {
    std::ostringstream out;
    out << "package org.example.gen;\n\nimport org.slf4j.Logger;\n\npublic class Worker" << index
        << " {\n  private static final Logger LOG = LoggerFactory.getLogger(Worker" << index
        << ".class);\n\n  void run(Object id) {\n";
    for (const auto& it : items) {
        const std::string level = it.abnormal ? (rng.bernoulli(0.5) ? "error" : "fatal") : "info";
        out << "    LOG." << level << "(\"" << it.text << "\", id);\n";
        if (rng.bernoulli(0.2)) out << "    LOG.warn(\"Retrying \" + id);\n";
        if (rng.bernoulli(0.1)) out << "    LOG.error(e.getMessage());\n";
    }
    out << "  }\n}\n";
    return out.str();
}

std::string cpp_file(const std::vector<Instruction>& items, Rng& rng) {
    std::ostringstream out;
    out << "#include <spdlog/spdlog.h>\n\nvoid step(int id) {\n";
    for (const auto& it : items) {
        if (it.abnormal) {
            if (rng.bernoulli(0.5))
                out << "  LOG(ERROR) << \"" << it.text << "\" << id;\n";
            else
                out << "  spdlog::critical(\"" << it.text << "\", id);\n";
        } else {
            out << "  spdlog::info(\"" << it.text << "\", id);\n";
        }
        if (rng.bernoulli(0.2)) out << "  spdlog::debug(\"Step {} reached\", id);\n";
        if (rng.bernoulli(0.1)) out << "  /* LOG(ERROR) << \"disabled\"; */\n";
    }
    out << "}\n";
    return out.str();
}

std::string bgl_line(bool anomalous, std::int64_t ts, const std::string& message, Rng& rng) {
    static const std::array<std::string, 4> nodes{"R02-M1-N0-C:J12-U11", "R17-M0-NC-I:J18-U01", "R63-M1-N5-C:J03-U01",
                                                  "R30-M0-N9-C:J16-U01"};
    const std::string& node = nodes[static_cast<std::size_t>(rng.below(nodes.size()))];
    std::ostringstream out;
    out << (anomalous ? "KERNDTLB" : "-") << ' ' << ts << " 2005.06.03 " << node << " 2005-06-03-15.42.50.363779 "
        << node << " RAS KERNEL " << (anomalous ? "FATAL " : "INFO ") << message;
    return out.str();
}

}  // namespace

std::size_t write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticSpec& spec) {
    namespace fs = std::filesystem;
    Rng rng(spec.seed);
    fs::create_directories(dir / "src" / "python");
    fs::create_directories(dir / "src" / "java");
    fs::create_directories(dir / "src" / "cpp");

    // Mined instructions: half normal, half abnormal, spread across languages.
    std::vector<Instruction> instructions;
    static const std::array<std::string, 4> placeholders{"%s", "{}", "%d", "{name}"};
    for (std::size_t i = 0; i < spec.sl_samples; ++i) {
        const bool abnormal = i % 2 == 1;
        const auto words = phrase(abnormal ? kAbnormalWords : kNormalWords, 2, 6, rng);
        instructions.push_back({render(words, placeholders[static_cast<std::size_t>(rng.below(4))], rng), abnormal});
    }
    const std::size_t per_file = 25;
    for (std::size_t start = 0, file = 0; start < instructions.size(); start += per_file, ++file) {
        std::vector<Instruction> chunk(instructions.begin() + static_cast<std::ptrdiff_t>(start),
                                       instructions.begin() +
                                           static_cast<std::ptrdiff_t>(std::min(instructions.size(), start + per_file)));
        switch (file % 3) {
            case 0: write_text(dir / "src" / "python" / ("module_" + std::to_string(file) + ".py"), python_file(chunk, rng)); break;
            case 1: write_text(dir / "src" / "java" / ("Worker" + std::to_string(file) + ".java"), java_file(chunk, file, rng)); break;
            default: write_text(dir / "src" / "cpp" / ("step_" + std::to_string(file) + ".cpp"), cpp_file(chunk, rng)); break;
        }
    }

    // Target system: a fixed set of event templates with runtime parameters.
    std::vector<std::vector<std::string>> normal_templates, anomaly_templates;
    for (int i = 0; i < 30; ++i) {
        auto words = phrase(kNormalWords, 3, 6, rng);
        if (rng.bernoulli(0.3)) words.insert(words.begin() + 1, pick(kTargetOnlyWords, rng));
        normal_templates.push_back(std::move(words));
    }
    for (int i = 0; i < 10; ++i) {
        auto words = phrase(kAbnormalWords, 3, 6, rng);
        if (rng.bernoulli(0.3)) words.push_back(pick(kTargetOnlyWords, rng));
        anomaly_templates.push_back(std::move(words));
    }

    const auto anomaly_count =
        static_cast<std::size_t>(std::llround(spec.anomaly_rate * static_cast<double>(spec.target_logs)));
    std::vector<bool> anomalous(spec.target_logs, false);
    for (std::size_t i : rng.sample_without_replacement(spec.target_logs, anomaly_count)) anomalous[i] = true;

    std::vector<std::string> lines;
    std::int64_t ts = 1117838570;
    const std::int64_t block_base = 4000000000000000000LL;
    for (std::size_t i = 0; i < spec.target_logs; ++i) {
        ts += 1 + static_cast<std::int64_t>(rng.below(30));
        const auto& words = anomalous[i] ? anomaly_templates[static_cast<std::size_t>(rng.below(anomaly_templates.size()))]
                                         : normal_templates[static_cast<std::size_t>(rng.below(normal_templates.size()))];
        std::ostringstream msg;
        for (std::size_t w = 0; w < words.size(); ++w) msg << (w ? " " : "") << words[w];
        const auto block = block_base + static_cast<std::int64_t>(i / spec.logs_per_block);
        msg << " blk_-" << block << " size " << rng.below(1 << 26) << " at /data/hdfs/current/subdir" << rng.below(64)
            << " from 10.250." << rng.below(256) << '.' << rng.below(256) << ":50010";
        lines.push_back(bgl_line(anomalous[i], ts, msg.str(), rng));
    }

    auto join = [](auto begin, auto end) {
        std::string out;
        for (auto it = begin; it != end; ++it) out += *it + "\n";
        return out;
    };
    const auto cut = static_cast<std::ptrdiff_t>(std::floor(spec.train_frac * static_cast<double>(lines.size())));
    write_text(dir / "target.log", join(lines.begin(), lines.end()));
    write_text(dir / "target_train.log", join(lines.begin(), lines.begin() + cut));
    write_text(dir / "target_test.log", join(lines.begin() + cut, lines.end()));

    nlohmann::ordered_json dataset{{"format", "bgl"},
                                   {"path", "target.log"},
                                   {"group_key_regex", "blk_-?[0-9]+"},
                                   {"train_frac", spec.train_frac}};
    write_text(dir / "dataset.json", dataset.dump(2) + "\n");
    dataset["path"] = "target_test.log";
    dataset.erase("train_frac");
    dataset["evaluate_on"] = "all";
    write_text(dir / "test_dataset.json", dataset.dump(2) + "\n");
    return anomaly_count;
}

}  // namespace logsieve
