#include "owd/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace owd::io {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    void magic(const char* expect) {
        need(4);
        if (std::memcmp(data_.data() + pos_, expect, 4) != 0)
            raise(Errc::bad_magic, path_ + ": expected magic " + expect);
        pos_ += 4;
    }
    void done() {
        if (pos_ != data_.size())
            raise(Errc::truncated_payload,
                  path_ + ": " + std::to_string(data_.size() - pos_) + " trailing bytes");
    }

private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size())
            raise(Errc::truncated_payload, path_ + ": unexpected end of file");
    }
    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::io_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void spill(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) raise(Errc::io_error, "write failed for " + path);
}

constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::uint32_t kNetworkVersion = 1;

}  // namespace

void write_features(const std::string& path, const FeatureMatrix& m) {
    validate(m);
    std::string out;
    out.reserve(20 + m.data.size() * 4);
    out += "OWFT";
    put_u32(out, kFeatureVersion);
    put_u64(out, static_cast<std::uint64_t>(m.n));
    put_u32(out, static_cast<std::uint32_t>(m.d));
    for (const auto v : m.data) put_f32(out, v);
    spill(path, out);
}

FeatureMatrix read_features(const std::string& path) {
    Reader r(slurp(path), path);
    r.magic("OWFT");
    const auto version = r.u32();
    if (version != kFeatureVersion)
        raise(Errc::version_unsupported, path + ": version " + std::to_string(version));
    FeatureMatrix m;
    m.n = static_cast<std::int64_t>(r.u64());
    m.d = static_cast<std::int32_t>(r.u32());
    if (m.n < 0 || m.d < 1) raise(Errc::shape_mismatch, path + ": bad dimensions");
    m.data.resize(static_cast<std::size_t>(m.n) * static_cast<std::size_t>(m.d));
    for (auto& v : m.data) v = r.f32();
    r.done();
    return m;
}

void write_labels(const std::string& path, const std::vector<std::int64_t>& labels) {
    std::string out = "id,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
    spill(path, out);
}

std::vector<std::int64_t> read_labels(const std::string& path) {
    const auto text = slurp(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) raise(Errc::parse_error, path + ": empty file (line 1)");

    std::map<std::int64_t, std::int64_t> by_index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            raise(Errc::parse_error, path + ": missing comma (line " + std::to_string(line_no) + ")");
        std::int64_t index, label;
        try {
            std::size_t used = 0;
            index = std::stoll(line.substr(0, comma), &used);
            if (used != comma) throw std::invalid_argument("junk");
            const auto rest = line.substr(comma + 1);
            label = std::stoll(rest, &used);
            if (used != rest.size()) throw std::invalid_argument("junk");
        } catch (const std::exception&) {
            raise(Errc::parse_error, path + ": bad record (line " + std::to_string(line_no) + ")");
        }
        if (by_index.count(index))
            raise(Errc::duplicate_index, path + ": index " + std::to_string(index) + " repeated");
        by_index[index] = label;
    }
    std::vector<std::int64_t> out;
    out.reserve(by_index.size());
    std::int64_t expect = 0;
    for (const auto& [idx, label] : by_index) {
        if (idx != expect)
            raise(Errc::missing_index, path + ": index " + std::to_string(expect) + " missing");
        out.push_back(label);
        ++expect;
    }
    return out;
}

void write_partition(const std::string& path, const Partition& p) { write_labels(path, p.labels); }

Partition read_partition(const std::string& path) {
    Partition p;
    p.labels = read_labels(path);
    for (const auto l : p.labels) {
        if (l < kNotClustered)
            raise(Errc::parse_error, path + ": negative cluster id " + std::to_string(l));
        p.next_label = std::max(p.next_label, l + 1);
    }
    return p;
}

namespace {

struct KeyHandler {
    std::function<void(PipelineConfig&, const std::string&)> apply;
};

[[noreturn]] void type_error(const std::string& key, const std::string& value,
                             const std::string& expect) {
    raise(Errc::type_error, key + " = " + value + " (" + expect + ")");
}

std::int64_t parse_int(const std::string& key, const std::string& v, std::int64_t lo,
                       std::int64_t hi) {
    std::int64_t out;
    try {
        std::size_t used = 0;
        out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
        type_error(key, v, "integer expected");
    }
    if (out < lo || out > hi)
        type_error(key, v, "out of [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return out;
}

double parse_real(const std::string& key, const std::string& v, double lo, double hi,
                  bool lo_open = false) {
    double out;
    try {
        std::size_t used = 0;
        out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
        type_error(key, v, "number expected");
    }
    if (out < lo || out > hi || (lo_open && out == lo))
        type_error(key, v, "out of " + std::string(lo_open ? "(" : "[") + std::to_string(lo) +
                               ", " + std::to_string(hi) + "]");
    return out;
}

const std::map<std::string, KeyHandler>& key_table() {
    static const std::map<std::string, KeyHandler> table = {
        {"wta.hashes", {[](PipelineConfig& c, const std::string& v) {
             c.wta.hashes = static_cast<std::int32_t>(parse_int("wta.hashes", v, 1, 1 << 20));
         }}},
        {"wta.window", {[](PipelineConfig& c, const std::string& v) {
             c.wta.window = static_cast<std::int32_t>(parse_int("wta.window", v, 2, 1 << 16));
         }}},
        {"ood.beta", {[](PipelineConfig& c, const std::string& v) {
             c.ood.beta = parse_real("ood.beta", v, 0.0, 1.0, true);
         }}},
        {"ood.seen_beta", {[](PipelineConfig& c, const std::string& v) {
             c.ood.seen_beta = parse_real("ood.seen_beta", v, 0.0, 1.0, true);
         }}},
        {"ood.cap", {[](PipelineConfig& c, const std::string& v) {
             c.ood.cap = parse_int("ood.cap", v, 1, 1LL << 40);
         }}},
        {"ood.distance", {[](PipelineConfig& c, const std::string& v) {
             if (v == "wta_hamming") c.ood.distance = OodDistance::wta_hamming;
             else if (v == "cosine") c.ood.distance = OodDistance::cosine;
             else type_error("ood.distance", v, "wta_hamming or cosine");
         }}},
        {"kmeans.k", {[](PipelineConfig& c, const std::string& v) {
             c.kmeans.k = parse_int("kmeans.k", v, 1, 1LL << 40);
         }}},
        {"kmeans.max_iter", {[](PipelineConfig& c, const std::string& v) {
             c.kmeans.max_iter = static_cast<std::int32_t>(parse_int("kmeans.max_iter", v, 1, 1 << 30));
         }}},
        {"kmeans.tol", {[](PipelineConfig& c, const std::string& v) {
             c.kmeans.tol = parse_real("kmeans.tol", v, 0.0, 1.0);
         }}},
        {"merge.components", {[](PipelineConfig& c, const std::string& v) {
             if (v == "scc") c.merge.components = MergeComponents::scc;
             else if (v == "weak") c.merge.components = MergeComponents::weak;
             else type_error("merge.components", v, "scc or weak");
         }}},
        {"merge.rounds", {[](PipelineConfig& c, const std::string& v) {
             c.merge.rounds = static_cast<std::int32_t>(parse_int("merge.rounds", v, 1, 64));
         }}},
        {"refine.epsilon", {[](PipelineConfig& c, const std::string& v) {
             c.refine.epsilon = parse_real("refine.epsilon", v, 0.0, 1.0);
         }}},
        {"refine.tau", {[](PipelineConfig& c, const std::string& v) {
             c.refine.tau = parse_int("refine.tau", v, 0, 1LL << 40);
         }}},
        {"refine.svm_c", {[](PipelineConfig& c, const std::string& v) {
             c.refine.svm_c = parse_real("refine.svm_c", v, 0.0, 1e12, true);
         }}},
        {"refine.svm_gamma", {[](PipelineConfig& c, const std::string& v) {
             c.refine.svm_gamma = parse_real("refine.svm_gamma", v, 0.0, 1e12);
         }}},
        {"refine.svm_tol", {[](PipelineConfig& c, const std::string& v) {
             c.refine.svm_tol = parse_real("refine.svm_tol", v, 0.0, 1.0, true);
         }}},
        {"refine.svm_max_passes", {[](PipelineConfig& c, const std::string& v) {
             c.refine.svm_max_passes = parse_int("refine.svm_max_passes", v, 0, 1LL << 40);
         }}},
        {"refine.negatives_ratio", {[](PipelineConfig& c, const std::string& v) {
             c.refine.negatives_ratio = parse_real("refine.negatives_ratio", v, 0.0, 1e6);
         }}},
        {"trainer.epochs_first", {[](PipelineConfig& c, const std::string& v) {
             c.trainer.epochs_first = static_cast<std::int32_t>(parse_int("trainer.epochs_first", v, 1, 1 << 24));
         }}},
        {"trainer.epochs_later", {[](PipelineConfig& c, const std::string& v) {
             c.trainer.epochs_later = static_cast<std::int32_t>(parse_int("trainer.epochs_later", v, 1, 1 << 24));
         }}},
        {"trainer.lr", {[](PipelineConfig& c, const std::string& v) {
             c.trainer.lr = parse_real("trainer.lr", v, 0.0, 1e3, true);
         }}},
        {"trainer.beta1", {[](PipelineConfig& c, const std::string& v) {
             c.trainer.beta1 = parse_real("trainer.beta1", v, 0.0, 1.0);
         }}},
        {"trainer.beta2", {[](PipelineConfig& c, const std::string& v) {
             c.trainer.beta2 = parse_real("trainer.beta2", v, 0.0, 1.0);
         }}},
        {"trainer.batch", {[](PipelineConfig& c, const std::string& v) {
             c.trainer.batch = static_cast<std::int32_t>(parse_int("trainer.batch", v, 2, 1 << 24));
         }}},
        {"trainer.dropout", {[](PipelineConfig& c, const std::string& v) {
             const double d = parse_real("trainer.dropout", v, 0.0, 1.0);
             if (d >= 1.0) type_error("trainer.dropout", v, "must be < 1");
             c.trainer.dropout = d;
         }}},
        {"stop.max_iterations", {[](PipelineConfig& c, const std::string& v) {
             c.stop.max_iterations = static_cast<std::int32_t>(parse_int("stop.max_iterations", v, 1, 1 << 24));
         }}},
        {"stop.delta", {[](PipelineConfig& c, const std::string& v) {
             c.stop.delta = parse_real("stop.delta", v, 0.0, 1.0);
         }}},
        {"run.seed", {[](PipelineConfig& c, const std::string& v) {
             c.run.seed = static_cast<std::uint64_t>(parse_int("run.seed", v, 0, std::numeric_limits<std::int64_t>::max()));
         }}},
        {"run.workers", {[](PipelineConfig& c, const std::string& v) {
             c.run.workers = static_cast<std::int32_t>(parse_int("run.workers", v, 0, 4096));
         }}},
    };
    return table;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise(Errc::parse_error, "missing '=' (line " + std::to_string(line_no) + ")");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = key_table().find(key);
        if (it == key_table().end()) raise(Errc::unknown_key, key);
        it->second.apply(cfg, value);
    }
    return cfg;
}

PipelineConfig read_config(const std::string& path) { return parse_config(slurp(path)); }

std::string config_to_text(const PipelineConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "wta.hashes = " << c.wta.hashes << "\n";
    out << "wta.window = " << c.wta.window << "\n";
    out << "ood.beta = " << c.ood.beta << "\n";
    if (c.ood.seen_beta) out << "ood.seen_beta = " << *c.ood.seen_beta << "\n";
    out << "ood.cap = " << c.ood.cap << "\n";
    out << "ood.distance = " << (c.ood.distance == OodDistance::cosine ? "cosine" : "wta_hamming") << "\n";
    out << "kmeans.k = " << c.kmeans.k << "\n";
    out << "kmeans.max_iter = " << c.kmeans.max_iter << "\n";
    out << "kmeans.tol = " << c.kmeans.tol << "\n";
    out << "merge.components = " << (c.merge.components == MergeComponents::weak ? "weak" : "scc") << "\n";
    out << "merge.rounds = " << c.merge.rounds << "\n";
    out << "refine.epsilon = " << c.refine.epsilon << "\n";
    out << "refine.tau = " << c.refine.tau << "\n";
    out << "refine.svm_c = " << c.refine.svm_c << "\n";
    out << "refine.svm_gamma = " << c.refine.svm_gamma << "\n";
    out << "refine.svm_tol = " << c.refine.svm_tol << "\n";
    out << "refine.svm_max_passes = " << c.refine.svm_max_passes << "\n";
    out << "refine.negatives_ratio = " << c.refine.negatives_ratio << "\n";
    out << "trainer.epochs_first = " << c.trainer.epochs_first << "\n";
    out << "trainer.epochs_later = " << c.trainer.epochs_later << "\n";
    out << "trainer.lr = " << c.trainer.lr << "\n";
    out << "trainer.beta1 = " << c.trainer.beta1 << "\n";
    out << "trainer.beta2 = " << c.trainer.beta2 << "\n";
    out << "trainer.batch = " << c.trainer.batch << "\n";
    out << "trainer.dropout = " << c.trainer.dropout << "\n";
    out << "stop.max_iterations = " << c.stop.max_iterations << "\n";
    out << "stop.delta = " << c.stop.delta << "\n";
    out << "run.seed = " << c.run.seed << "\n";
    out << "run.workers = " << c.run.workers << "\n";
    return std::move(out).str();
}

void write_network(const std::string& path, const Network& net) {
    std::string out;
    out += "OWNT";
    put_u32(out, kNetworkVersion);
    put_u32(out, static_cast<std::uint32_t>(net.d_in));
    put_u32(out, static_cast<std::uint32_t>(net.n_classes));
    for (const LinearLayer* l : {&net.fc1, &net.fc2, &net.fc3, &net.head}) {
        put_u32(out, static_cast<std::uint32_t>(l->in));
        put_u32(out, static_cast<std::uint32_t>(l->out));
        for (const auto v : l->w) put_f32(out, v);
        for (const auto v : l->b) put_f32(out, v);
    }
    spill(path, out);
}

Network read_network(const std::string& path) {
    Reader r(slurp(path), path);
    r.magic("OWNT");
    const auto version = r.u32();
    if (version != kNetworkVersion)
        raise(Errc::version_unsupported, path + ": version " + std::to_string(version));
    Network net;
    net.d_in = static_cast<std::int32_t>(r.u32());
    net.n_classes = static_cast<std::int32_t>(r.u32());
    for (LinearLayer* l : {&net.fc1, &net.fc2, &net.fc3, &net.head}) {
        l->in = static_cast<std::int32_t>(r.u32());
        l->out = static_cast<std::int32_t>(r.u32());
        if (l->in < 1 || l->out < 1) raise(Errc::shape_mismatch, path + ": bad layer dims");
        l->w.resize(static_cast<std::size_t>(l->in) * l->out);
        l->b.resize(static_cast<std::size_t>(l->out));
        for (auto& v : l->w) v = r.f32();
        for (auto& v : l->b) v = r.f32();
        l->sync_transpose();
    }
    r.done();
    return net;
}

std::string report_kv(const EvalReport& r) {
    std::ostringstream out;
    out.precision(12);
    out << "purity_cluster_mean = " << r.purity_cluster_mean << "\n";
    out << "purity_sample_weighted = " << r.purity_sample_weighted << "\n";
    out << "nmi = " << r.nmi << "\n";
    out << "pct_clustered = " << r.pct_clustered << "\n";
    out << "sources_discovered = " << r.sources_discovered << "\n";
    out << "sources_total = " << r.sources_total << "\n";
    out << "n_clusters = " << r.n_clusters << "\n";
    return std::move(out).str();
}

}  // namespace owd::io
