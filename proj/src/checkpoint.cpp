#include "edulstm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "edulstm/errors.hpp"

namespace edulstm {

namespace {

constexpr char kMagic[8] = {'E', 'D', 'U', 'L', 'S', 'T', 'M', '\0'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::ofstream out;

    explicit Writer(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw DataError("cannot write checkpoint: " + path);
    }
    void bytes(const void* p, std::size_t n) { out.write(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw DataError("cannot open checkpoint: " + p);
    }
    void bytes(void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n))
            throw DataError("truncated checkpoint: " + path);
    }
    std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    Writer w(path);
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    w.u64(ckpt.init_seed);
    w.u64(ckpt.train_seed);

    const ModelConfig& m = ckpt.model;
    w.u64(m.input_dim);
    w.u64(m.static_dim);
    w.u64(m.hidden_dim);
    w.u8(m.fuse_forget_gate ? 1 : 0);
    w.f64(m.dropout_rate);
    w.u32(static_cast<std::uint32_t>(m.tasks.size()));
    for (Task t : m.tasks) w.u8(static_cast<std::uint8_t>(t));

    const EncodingConfig& e = ckpt.encoding;
    w.u64(e.hash_buckets);
    w.u64(e.static_dim);
    w.f64(e.elapsed_mean);
    w.f64(e.elapsed_std);
    w.f64(e.loggap_mean);
    w.f64(e.loggap_std);

    for (auto span : param_spans(ckpt.params)) {
        w.u64(span.size());
        for (double v : span) w.f64(v);
    }
    if (!w.out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw DataError("not a checkpoint file: " + path);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);

    Checkpoint ckpt;
    ckpt.init_seed = r.u64();
    ckpt.train_seed = r.u64();

    ModelConfig& m = ckpt.model;
    m.input_dim = r.u64();
    m.static_dim = r.u64();
    m.hidden_dim = r.u64();
    m.fuse_forget_gate = r.u8() != 0;
    m.dropout_rate = r.f64();
    m.tasks.clear();
    const std::uint32_t n_tasks = r.u32();
    for (std::uint32_t i = 0; i < n_tasks; ++i) m.tasks.push_back(static_cast<Task>(r.u8()));
    m.validate();

    EncodingConfig& e = ckpt.encoding;
    e.hash_buckets = r.u64();
    e.static_dim = r.u64();
    e.elapsed_mean = r.f64();
    e.elapsed_std = r.f64();
    e.loggap_mean = r.f64();
    e.loggap_std = r.f64();

    // Rebuild the parameter skeleton, then fill it in span order.
    ckpt.params.w_f = Matrix(m.hidden_dim, m.forget_input_dim());
    ckpt.params.w_i = Matrix(m.hidden_dim, m.gate_input_dim());
    ckpt.params.w_c = Matrix(m.hidden_dim, m.gate_input_dim());
    ckpt.params.w_o = Matrix(m.hidden_dim, m.gate_input_dim());
    ckpt.params.b_f = Vector(m.hidden_dim);
    ckpt.params.b_i = Vector(m.hidden_dim);
    ckpt.params.b_c = Vector(m.hidden_dim);
    ckpt.params.b_o = Vector(m.hidden_dim);
    ckpt.params.heads.resize(m.tasks.size());
    for (auto& h : ckpt.params.heads) h.w = Vector(m.hidden_dim);

    for (auto span : param_spans(ckpt.params)) {
        const std::uint64_t n = r.u64();
        if (n != span.size())
            throw DataError("checkpoint array size " + std::to_string(n) + " does not match " +
                            "expected " + std::to_string(span.size()) + ": " + path);
        for (double& v : span) v = r.f64();
    }
    return ckpt;
}

}  // namespace edulstm
