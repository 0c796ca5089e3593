#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "igd/nn.hpp"

namespace igd {

constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json mlp_to_json(const MlpParams& p) {
    nlohmann::json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["layer_dims"] = p.layer_dims;
    j["hidden_activation"] = "relu";
    auto weights = nlohmann::json::array();
    for (const auto& w : p.weights) {
        auto rows = nlohmann::json::array();
        for (int r = 0; r < w.rows; ++r) {
            auto row = nlohmann::json::array();
            for (int c = 0; c < w.cols; ++c) row.push_back(w(r, c));
            rows.push_back(std::move(row));
        }
        weights.push_back(std::move(rows));
    }
    j["weights"] = std::move(weights);
    j["biases"] = p.biases;
    return j;
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kCheckpointFormatVersion)
        throw std::runtime_error("checkpoint: unknown format_version");
    MlpParams p;
    p.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    if (j.at("hidden_activation").get<std::string>() != "relu")
        throw std::runtime_error("checkpoint: unknown hidden_activation");
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (p.layer_dims.size() < 2 || jw.size() != p.layer_dims.size() - 1 || jb.size() != jw.size())
        throw std::runtime_error("checkpoint: inconsistent layer shapes");
    for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
        const int rows = p.layer_dims[l + 1];
        const int cols = p.layer_dims[l];
        Matrix w(rows, cols);
        const auto& rows_json = jw.at(l);
        if (static_cast<int>(rows_json.size()) != rows)
            throw std::runtime_error("checkpoint: weight shape mismatch");
        for (int r = 0; r < rows; ++r) {
            const auto& row = rows_json.at(static_cast<std::size_t>(r));
            if (static_cast<int>(row.size()) != cols)
                throw std::runtime_error("checkpoint: weight shape mismatch");
            for (int c = 0; c < cols; ++c) w(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
        p.weights.push_back(std::move(w));
        Vec b = jb.at(l).get<Vec>();
        if (static_cast<int>(b.size()) != rows)
            throw std::runtime_error("checkpoint: bias shape mismatch");
        p.biases.push_back(std::move(b));
    }
    return p;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace igd
