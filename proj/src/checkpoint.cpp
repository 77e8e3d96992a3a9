#include "kbc/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace kbc {

namespace {

constexpr char kMagic[8] = {'K', 'B', 'C', 'C', 'K', 'P', 'T', '\n'};
constexpr uint32_t kVersion = 1;

void wr_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void wr(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    wr_bytes(os, &v, sizeof(T));
}

void wr_str(std::ostream& os, const std::string& s) {
    wr<uint64_t>(os, s.size());
    wr_bytes(os, s.data(), s.size());
}

void rd_bytes(std::istream& is, void* p, size_t n, const std::string& path) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n)
        throw std::runtime_error("truncated checkpoint: " + path);
}

template <typename T>
T rd(std::istream& is, const std::string& path) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    rd_bytes(is, &v, sizeof(T), path);
    return v;
}

std::string rd_str(std::istream& is, const std::string& path) {
    const uint64_t n = rd<uint64_t>(is, path);
    if (n > (1ull << 20)) throw std::runtime_error("truncated checkpoint: " + path);
    std::string s(n, '\0');
    rd_bytes(is, s.data(), n, path);
    return s;
}

void wr_tables(std::ostream& os, const ModelParams& p) {
    for (ParamTable t : p.tables()) {
        const auto& v = p.table(t);
        wr_bytes(os, v.data(), v.size() * sizeof(double));
    }
}

void rd_tables(std::istream& is, ModelParams& p, const std::string& path) {
    for (ParamTable t : p.tables()) {
        auto& v = p.table(t);
        rd_bytes(is, v.data(), v.size() * sizeof(double), path);
    }
}

void wr_opt(std::ostream& os, const ModelParams& p, const OptState& opt) {
    wr(os, opt.eps);
    for (ParamTable t : p.tables()) {
        const auto& v = opt.acc[static_cast<int>(t)];
        wr_bytes(os, v.data(), v.size() * sizeof(double));
    }
}

OptState rd_opt(std::istream& is, const ModelParams& p, const std::string& path) {
    const double eps = rd<double>(is, path);
    OptState opt = make_opt_state(p, eps);
    for (ParamTable t : p.tables()) {
        auto& v = opt.acc[static_cast<int>(t)];
        rd_bytes(is, v.data(), v.size() * sizeof(double), path);
    }
    return opt;
}

struct Header {
    ModelKind kind;
    bool reciprocal;
    bool simple_original;
    bool has_opt;
    bool has_train;
    int dim;
    int64_t n_entities;
    int64_t n_relations;
};

void wr_header(std::ostream& os, const ModelParams& p, bool has_opt, bool has_train) {
    wr_bytes(os, kMagic, sizeof(kMagic));
    wr(os, kVersion);
    wr<uint8_t>(os, static_cast<uint8_t>(p.kind));
    wr<uint8_t>(os, p.reciprocal ? 1 : 0);
    wr<uint8_t>(os, p.simple_original ? 1 : 0);
    wr<uint8_t>(os, has_opt ? 1 : 0);
    wr<uint8_t>(os, has_train ? 1 : 0);
    wr<uint32_t>(os, static_cast<uint32_t>(p.dim));
    wr<int64_t>(os, p.n_entities);
    wr<int64_t>(os, p.n_relations);
}

Header rd_header(std::istream& is, const std::string& path) {
    char magic[8];
    rd_bytes(is, magic, sizeof(magic), path);
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const uint32_t ver = rd<uint32_t>(is, path);
    if (ver != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(ver));
    Header h;
    const uint8_t kind = rd<uint8_t>(is, path);
    if (kind > 3) throw std::runtime_error("truncated checkpoint: " + path);
    h.kind = static_cast<ModelKind>(kind);
    h.reciprocal = rd<uint8_t>(is, path) != 0;
    h.simple_original = rd<uint8_t>(is, path) != 0;
    h.has_opt = rd<uint8_t>(is, path) != 0;
    h.has_train = rd<uint8_t>(is, path) != 0;
    h.dim = static_cast<int>(rd<uint32_t>(is, path));
    h.n_entities = rd<int64_t>(is, path);
    h.n_relations = rd<int64_t>(is, path);
    return h;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open file: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open file: " + path);
    return is;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& p, const OptState* opt) {
    std::ofstream os = open_out(path);
    wr_header(os, p, opt != nullptr, false);
    wr_tables(os, p);
    if (opt) wr_opt(os, p, *opt);
    os.flush();
    if (!os) throw std::runtime_error("cannot write file: " + path);
}

void save_train_checkpoint(const std::string& path, const TrainState& st) {
    std::ofstream os = open_out(path);
    wr_header(os, st.params, true, true);
    wr_tables(os, st.params);
    wr_opt(os, st.params, st.opt);
    wr<int64_t>(os, st.next_epoch);
    wr<int64_t>(os, st.evals_since_improve);
    wr<int64_t>(os, st.best_epoch);
    wr(os, st.best_dev_mrr);
    wr<uint8_t>(os, st.has_best ? 1 : 0);
    wr_str(os, st.shuffle_rng);
    wr_str(os, st.sample_rng);
    wr_tables(os, st.best_params);
    wr_opt(os, st.best_params, st.best_opt);
    os.flush();
    if (!os) throw std::runtime_error("cannot write file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is = open_in(path);
    const Header h = rd_header(is, path);
    Checkpoint ck;
    ck.params =
        make_params(h.kind, h.dim, h.n_entities, h.n_relations, h.reciprocal, h.simple_original);
    rd_tables(is, ck.params, path);
    if (h.has_opt) ck.opt = rd_opt(is, ck.params, path);
    if (h.has_train) {
        if (!h.has_opt) throw std::runtime_error("truncated checkpoint: " + path);
        TrainState st;
        st.params = ck.params;
        st.opt = *ck.opt;
        st.next_epoch = rd<int64_t>(is, path);
        st.evals_since_improve = rd<int64_t>(is, path);
        st.best_epoch = rd<int64_t>(is, path);
        st.best_dev_mrr = rd<double>(is, path);
        st.has_best = rd<uint8_t>(is, path) != 0;
        st.shuffle_rng = rd_str(is, path);
        st.sample_rng = rd_str(is, path);
        st.best_params = make_params(h.kind, h.dim, h.n_entities, h.n_relations, h.reciprocal,
                                     h.simple_original);
        rd_tables(is, st.best_params, path);
        st.best_opt = rd_opt(is, st.best_params, path);
        ck.train = std::move(st);
    }
    return ck;
}

ModelParams load_checkpoint_expect(const std::string& path, ModelKind expect) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.params.kind != expect)
        throw std::runtime_error("checkpoint " + path + " holds a " +
                                 std::string(to_string(ck.params.kind)) + " model, expected " +
                                 std::string(to_string(expect)));
    return std::move(ck.params);
}

CheckpointInfo inspect_checkpoint(const std::string& path) {
    std::ifstream is = open_in(path);
    const Header h = rd_header(is, path);
    CheckpointInfo info;
    info.kind = to_string(h.kind);
    info.dim = h.dim;
    info.n_entities = h.n_entities;
    info.n_relations = h.n_relations;
    info.reciprocal = h.reciprocal;
    info.simple_original = h.simple_original;
    info.has_opt = h.has_opt;
    info.has_train = h.has_train;

    ModelParams shape =
        make_params(h.kind, h.dim, h.n_entities, h.n_relations, h.reciprocal, h.simple_original);
    int64_t doubles = 0;
    for (ParamTable t : shape.tables()) doubles += static_cast<int64_t>(shape.table(t).size());
    info.param_doubles = doubles;

    if (h.has_train) {
        // Skip past the tables to the counters.
        is.seekg(static_cast<std::streamoff>(doubles * sizeof(double)), std::ios::cur);
        is.seekg(static_cast<std::streamoff>(sizeof(double) + doubles * sizeof(double)),
                 std::ios::cur);
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        info.next_epoch = rd<int64_t>(is, path);
        is.seekg(sizeof(int64_t), std::ios::cur);
        info.best_epoch = rd<int64_t>(is, path);
        info.best_dev_mrr = rd<double>(is, path);
    }
    return info;
}

std::string CheckpointInfo::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["dim"] = dim;
    j["n_entities"] = n_entities;
    j["n_relations"] = n_relations;
    j["reciprocal"] = reciprocal;
    j["simple_original"] = simple_original;
    j["has_opt"] = has_opt;
    j["has_train"] = has_train;
    j["param_doubles"] = param_doubles;
    if (has_train) {
        j["next_epoch"] = next_epoch;
        j["best_epoch"] = best_epoch;
        j["best_dev_mrr"] = best_dev_mrr;
    }
    return j.dump();
}

}  // namespace kbc
