#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vtprune/model.hpp"

namespace vtprune {

/// Manifest for one sample's attention trace on disk: a JSON index next to
/// raw little-endian float32 row-major blocks, one t2t and one t2v file per
/// layer. Values are stored at 32-bit precision and widened on load.
struct TraceLayerInfo {
    std::size_t layer_index = 0;
    std::size_t vision_count = 0;
    std::string t2t_file;
    std::string t2v_file;
    std::vector<std::size_t> vision_origins;
};

struct TraceManifest {
    int format_version = 1;
    std::string sample_id;
    std::size_t num_layers = 0;
    std::size_t text_count = 0;
    std::string dtype = "f32";
    std::string byte_order = "little";
    std::vector<TraceLayerInfo> layers;
};

/// Writes manifest.json plus per-layer blocks into dir (created if needed).
TraceManifest write_trace(const AttentionMaps& maps, const std::filesystem::path& dir);

struct TraceReadResult {
    AttentionMaps maps;
    std::vector<std::string> warnings; // row-sum drift beyond 1e-4, per layer
};

/// Loads and validates a trace directory. Malformed manifests, wrong file
/// sizes, and NaN entries are errors; a text row whose attention mass is not
/// 1 within 1e-4 only adds a warning, so traces exported from other stacks
/// still load.
TraceReadResult read_trace(const std::filesystem::path& dir);

/// Reads every direct subdirectory of dir containing a manifest.json,
/// sorted by directory name.
std::vector<AttentionMaps> read_trace_corpus(const std::filesystem::path& dir);

} // namespace vtprune
