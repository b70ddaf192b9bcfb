#include "logsieve/artifact.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "logsieve/types.hpp"

namespace logsieve {

namespace {

void put_float_le(std::string& out, float value) {
    const auto bits = std::bit_cast<std::uint32_t>(value);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float get_float_le(const std::string& data, std::size_t offset) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[offset + static_cast<std::size_t>(i)])) << (8 * i);
    return std::bit_cast<float>(bits);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    if (!out) throw Error("failed writing " + path.string());
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

std::string serialize_params(const Parameters& params) {
    std::string out;
    for (const auto& [name, m] : params.tensors()) {
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j) put_float_le(out, static_cast<float>((*m)(i, j)));
    }
    return out;
}

void ModelArtifact::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);

    nlohmann::ordered_json config;
    config["format_version"] = kArtifactFormatVersion;
    config["stage"] = finetuned() ? "finetuned" : "pretrained";
    config["model"] = to_json(model.config);
    if (threshold) {
        config["threshold"] = {{"a_tilde", threshold->a_tilde},
                               {"criterion", std::string(to_string(threshold->criterion))},
                               {"achieved", threshold->achieved}};
    } else {
        config["threshold"] = nullptr;
    }
    write_file(dir / "config.json", config.dump(2) + "\n");

    nlohmann::ordered_json vocab = nlohmann::ordered_json::object();
    for (int i = 0; i < model.vocab.size(); ++i) vocab[model.vocab.token(i)] = i;
    write_file(dir / "vocab.json", vocab.dump() + "\n");

    nlohmann::ordered_json manifest;
    manifest["dtype"] = "float32";
    manifest["byte_order"] = "little";
    manifest["tensors"] = nlohmann::ordered_json::array();
    std::size_t offset = 0;
    for (const auto& [name, m] : model.params.tensors()) {
        manifest["tensors"].push_back({{"name", name}, {"shape", {m->rows(), m->cols()}}, {"offset", offset}});
        offset += static_cast<std::size_t>(m->size()) * 4;
    }
    write_file(dir / "params.manifest", manifest.dump(2) + "\n");
    write_file(dir / "params.bin", serialize_params(model.params));
}

namespace {

ModelArtifact load_checked(const std::filesystem::path& dir) {
    const auto config = parse_json_file(dir / "config.json");
    const int version = config.value("format_version", -1);
    if (version != kArtifactFormatVersion)
        throw Error("artifact format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kArtifactFormatVersion) + ")");

    ModelArtifact artifact;
    artifact.model.config = config_from_json(config.at("model"));
    artifact.model.config.validate();
    if (!config.at("threshold").is_null()) {
        const auto& t = config.at("threshold");
        const auto criterion = parse_criterion(t.at("criterion").get<std::string>());
        if (!criterion) throw Error("unknown threshold criterion in artifact");
        artifact.threshold = DecisionThreshold{t.at("a_tilde").get<double>(), *criterion, t.value("achieved", 0.0)};
    }

    const auto vocab_json = parse_json_file(dir / "vocab.json");
    std::vector<std::string> tokens(vocab_json.size());
    for (const auto& [token, index] : vocab_json.items()) {
        const auto i = index.get<std::size_t>();
        if (i >= tokens.size() || !tokens[i].empty()) throw Error("vocab.json indices are not contiguous");
        tokens[i] = token;
    }
    artifact.model.vocab = Vocabulary::from_tokens(std::move(tokens));

    Rng layout_rng(0);
    artifact.model.params = Parameters::initialize(artifact.model.config, artifact.model.vocab.size(), layout_rng);
    const auto manifest = parse_json_file(dir / "params.manifest");
    const std::string payload = read_file(dir / "params.bin");
    auto expected = artifact.model.params.tensors();
    const auto& listed = manifest.at("tensors");
    if (listed.size() != expected.size()) throw Error("params.manifest does not match the model configuration");
    for (std::size_t k = 0; k < expected.size(); ++k) {
        auto& [name, m] = expected[k];
        const auto& entry = listed[k];
        const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
        if (entry.at("name").get<std::string>() != name || shape.size() != 2 || shape[0] != m->rows() ||
            shape[1] != m->cols())
            throw Error("params.manifest entry " + std::to_string(k) + " does not match tensor " + name);
        std::size_t offset = entry.at("offset").get<std::size_t>();
        if (offset + static_cast<std::size_t>(m->size()) * 4 > payload.size())
            throw Error("params.bin is truncated at tensor " + name);
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j, offset += 4) (*m)(i, j) = get_float_le(payload, offset);
    }
    return artifact;
}

}  // namespace

ModelArtifact ModelArtifact::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("artifact directory not found: " + dir.string());
    try {
        return load_checked(dir);
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed artifact " + dir.string() + ": " + e.what());
    }
}

}  // namespace logsieve
