#pragma once

#include <string>
#include <vector>

#include "owd/config.hpp"
#include "owd/core.hpp"
#include "owd/metrics.hpp"
#include "owd/network.hpp"

namespace owd::io {

// "OWFT" feature file: magic, u32 version, u64 n, u32 d, then n*d f32
// payload, everything little-endian. Round-trips are bitwise exact.
void write_features(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_features(const std::string& path);

// Label CSV with a header line, records "index,label", indices 0..n-1 each
// exactly once.
void write_labels(const std::string& path, const std::vector<std::int64_t>& labels);
std::vector<std::int64_t> read_labels(const std::string& path);

// Partition dumps reuse the label CSV with -1 for NOT_CLUSTERED.
void write_partition(const std::string& path, const Partition& p);
Partition read_partition(const std::string& path);

// Flat "section.key = value" config. Unset keys keep defaults, unknown
// keys raise UnknownKey, malformed or out-of-range values raise TypeError.
PipelineConfig read_config(const std::string& path);
PipelineConfig parse_config(const std::string& text);
std::string config_to_text(const PipelineConfig& cfg);

// "OWNT" network checkpoint: magic, u32 version, u32 d_in, u32 n_classes,
// then per layer u32 in, u32 out, f32 weights (out*in, row-major), f32
// biases.
void write_network(const std::string& path, const Network& net);
Network read_network(const std::string& path);

std::string report_kv(const EvalReport& r);

}  // namespace owd::io
