#include "vtprune/trace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "vtprune/errors.hpp"

namespace vtprune {

namespace {

using nlohmann::json;

void write_block(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("write_trace: cannot open " + path.string());
    }
    std::vector<unsigned char> bytes;
    bytes.reserve(m.data.size() * 4);
    for (double value : m.data) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
        bytes.push_back(static_cast<unsigned char>(bits & 0xFF));
        bytes.push_back(static_cast<unsigned char>((bits >> 8) & 0xFF));
        bytes.push_back(static_cast<unsigned char>((bits >> 16) & 0xFF));
        bytes.push_back(static_cast<unsigned char>((bits >> 24) & 0xFF));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write_trace: short write to " + path.string());
    }
}

Matrix read_block(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("read_trace: missing block file " + path.string());
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = rows * cols * 4;
    if (size != expected) {
        throw IoError("read_trace: " + path.string() + " has " + std::to_string(size) +
                      " bytes, expected " + std::to_string(expected));
    }
    std::vector<unsigned char> bytes(size);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) {
        throw IoError("read_trace: short read from " + path.string());
    }
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        const float value = std::bit_cast<float>(bits);
        if (std::isnan(value)) {
            throw IoError("read_trace: NaN entry in " + path.string());
        }
        m.data[i] = static_cast<double>(value);
    }
    return m;
}

std::string block_name(std::size_t layer, const char* kind) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "layer_%04zu.%s.bin", layer, kind);
    return buf;
}

} // namespace

TraceManifest write_trace(const AttentionMaps& maps, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("write_trace: cannot create " + dir.string() + ": " + ec.message());
    }

    TraceManifest manifest;
    manifest.sample_id = maps.sample_id;
    manifest.num_layers = maps.per_layer.size();
    manifest.text_count = maps.text_count();

    json layers = json::array();
    for (const LayerAttention& layer : maps.per_layer) {
        TraceLayerInfo info;
        info.layer_index = layer.layer_index;
        info.vision_count = layer.t2v.cols;
        info.t2t_file = block_name(layer.layer_index, "t2t");
        info.t2v_file = block_name(layer.layer_index, "t2v");
        info.vision_origins = layer.vision_origins;
        write_block(layer.t2t, dir / info.t2t_file);
        write_block(layer.t2v, dir / info.t2v_file);

        layers.push_back({{"layer_index", info.layer_index},
                          {"vision_count", info.vision_count},
                          {"t2t_file", info.t2t_file},
                          {"t2v_file", info.t2v_file},
                          {"vision_origins", info.vision_origins}});
        manifest.layers.push_back(std::move(info));
    }

    const json doc = {{"format_version", manifest.format_version},
                      {"sample_id", manifest.sample_id},
                      {"num_layers", manifest.num_layers},
                      {"text_count", manifest.text_count},
                      {"dtype", manifest.dtype},
                      {"byte_order", manifest.byte_order},
                      {"layers", layers}};
    const auto manifest_path = dir / "manifest.json";
    std::ofstream out(manifest_path);
    if (!out) {
        throw IoError("write_trace: cannot open " + manifest_path.string());
    }
    out << doc.dump(2) << "\n";
    if (!out) {
        throw IoError("write_trace: short write to " + manifest_path.string());
    }
    return manifest;
}

TraceReadResult read_trace(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw IoError("read_trace: missing manifest " + manifest_path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("read_trace: malformed manifest " + manifest_path.string() + ": " + e.what());
    }

    TraceReadResult result;
    try {
        if (doc.at("format_version").get<int>() != 1) {
            throw IoError("read_trace: unsupported format_version in " + manifest_path.string());
        }
        if (doc.at("dtype").get<std::string>() != "f32" ||
            doc.at("byte_order").get<std::string>() != "little") {
            throw IoError("read_trace: unsupported dtype/byte_order in " + manifest_path.string());
        }
        result.maps.sample_id = doc.at("sample_id").get<std::string>();
        const auto text_count = doc.at("text_count").get<std::size_t>();
        const auto num_layers = doc.at("num_layers").get<std::size_t>();
        const json& layers = doc.at("layers");
        if (layers.size() != num_layers) {
            throw IoError("read_trace: manifest layer list length mismatch in " +
                          manifest_path.string());
        }

        std::size_t prev_vision = 0;
        bool first = true;
        for (const json& entry : layers) {
            LayerAttention layer;
            layer.layer_index = entry.at("layer_index").get<std::size_t>();
            const auto vision_count = entry.at("vision_count").get<std::size_t>();
            if (!first && vision_count > prev_vision) {
                throw IoError("read_trace: vision counts must be non-increasing across layers in " +
                              manifest_path.string());
            }
            if (!result.maps.per_layer.empty() &&
                layer.layer_index <= result.maps.per_layer.back().layer_index) {
                throw IoError("read_trace: layer indices must strictly increase in " +
                              manifest_path.string());
            }
            first = false;
            prev_vision = vision_count;

            layer.t2t = read_block(dir / entry.at("t2t_file").get<std::string>(),
                                   text_count, text_count);
            layer.t2v = read_block(dir / entry.at("t2v_file").get<std::string>(),
                                   text_count, vision_count);
            if (entry.contains("vision_origins")) {
                layer.vision_origins = entry.at("vision_origins").get<std::vector<std::size_t>>();
                if (layer.vision_origins.size() != vision_count) {
                    throw IoError("read_trace: vision_origins length mismatch in " +
                                  manifest_path.string());
                }
            } else {
                layer.vision_origins.resize(vision_count);
                for (std::size_t i = 0; i < vision_count; ++i) {
                    layer.vision_origins[i] = i;
                }
            }

            for (std::size_t row = 0; row < text_count; ++row) {
                double sum = 0.0;
                for (std::size_t j = 0; j < vision_count; ++j) {
                    sum += layer.t2v.at(row, j);
                }
                for (std::size_t j = 0; j < text_count; ++j) {
                    sum += layer.t2t.at(row, j);
                }
                if (std::abs(sum - 1.0) > 1e-4) {
                    result.warnings.push_back(
                        "layer " + std::to_string(layer.layer_index) + " text row " +
                        std::to_string(row) + " attention mass " + std::to_string(sum));
                    break;
                }
            }
            result.maps.per_layer.push_back(std::move(layer));
        }
    } catch (const json::exception& e) {
        throw IoError("read_trace: malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    return result;
}

std::vector<AttentionMaps> read_trace_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("read_trace_corpus: not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> entries;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.json")) {
            entries.push_back(entry.path());
        }
    }
    std::sort(entries.begin(), entries.end());
    std::vector<AttentionMaps> corpus;
    corpus.reserve(entries.size());
    for (const auto& path : entries) {
        corpus.push_back(read_trace(path).maps);
    }
    return corpus;
}

} // namespace vtprune
