#include "fundus/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "fundus/errors.hpp"

namespace fundus {

namespace {

constexpr std::uint64_t kMaxNameBytes = 1 << 20;
constexpr std::uint64_t kMaxRank = 32;
constexpr std::uint64_t kMaxElements = 1ULL << 33;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), std::streamsize(n));
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (unsigned char)(v >> (8 * i));
    put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)(v >> (8 * i));
    put_bytes(out, b, 8);
}

void put_f64(std::ostream& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void get_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), std::streamsize(n));
    if (std::size_t(in.gcount()) != n) {
        throw FormatCorrupt("checkpoint truncated");
    }
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    get_bytes(in, b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    get_bytes(in, b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double get_f64(std::istream& in) {
    return std::bit_cast<double>(get_u64(in));
}

} // namespace

void write_tensor_file(const std::string& path,
                       const std::map<std::string, Tensor>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path + " for writing");
    put_bytes(out, kCheckpointMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u64(out, tensors.size());
    for (const auto& [name, tensor] : tensors) {
        put_u64(out, name.size());
        put_bytes(out, name.data(), name.size());
        put_u64(out, tensor.rank());
        for (std::size_t d = 0; d < tensor.rank(); ++d) put_u64(out, tensor.dim(d));
        for (std::size_t i = 0; i < tensor.size(); ++i) put_f64(out, tensor[i]);
    }
    out.flush();
    if (!out) throw IoFailure("write failed for " + path);
}

std::map<std::string, Tensor> read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path);
    char magic[4];
    get_bytes(in, magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw FormatCorrupt("bad magic in " + path);
    }
    const std::uint32_t version = get_u32(in);
    if (version != kCheckpointVersion) {
        throw FormatCorrupt("unsupported checkpoint version " +
                            std::to_string(version));
    }
    const std::uint64_t count = get_u64(in);
    std::map<std::string, Tensor> tensors;
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::uint64_t name_len = get_u64(in);
        if (name_len == 0 || name_len > kMaxNameBytes) {
            throw FormatCorrupt("implausible tensor name length");
        }
        std::string name(name_len, '\0');
        get_bytes(in, name.data(), name_len);
        const std::uint64_t rank = get_u64(in);
        if (rank == 0 || rank > kMaxRank) {
            throw FormatCorrupt("implausible tensor rank for " + name);
        }
        std::vector<std::size_t> dims(rank);
        std::uint64_t elems = 1;
        for (auto& d : dims) {
            d = get_u64(in);
            if (d == 0 || elems > kMaxElements / d) {
                throw FormatCorrupt("implausible dims for " + name);
            }
            elems *= d;
        }
        std::vector<double> data(elems);
        for (auto& v : data) v = get_f64(in);
        if (!tensors.emplace(std::move(name), Tensor(dims, std::move(data)))
                 .second) {
            throw FormatCorrupt("duplicate tensor name");
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatCorrupt("trailing bytes in " + path);
    }
    return tensors;
}

namespace {

Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

Tensor index_vector(const std::vector<std::size_t>& values) {
    std::vector<double> d(values.begin(), values.end());
    return Tensor({values.size()}, std::move(d));
}

const Tensor& need(const std::map<std::string, Tensor>& t,
                   const std::string& key) {
    auto it = t.find(key);
    if (it == t.end()) throw FormatCorrupt("checkpoint missing " + key);
    return it->second;
}

std::size_t meta_size(const std::map<std::string, Tensor>& t,
                      const std::string& key) {
    const Tensor& s = need(t, key);
    const double v = s[0];
    if (s.size() != 1 || v < 0 || v != std::floor(v)) {
        throw FormatCorrupt("non-integral " + key);
    }
    return std::size_t(v);
}

std::vector<std::size_t> meta_sizes(const std::map<std::string, Tensor>& t,
                                    const std::string& key) {
    const Tensor& s = need(t, key);
    std::vector<std::size_t> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] < 0 || s[i] != std::floor(s[i])) {
            throw FormatCorrupt("non-integral " + key);
        }
        out[i] = std::size_t(s[i]);
    }
    return out;
}

void store_seed(std::map<std::string, Tensor>& t, std::uint64_t seed) {
    t.emplace("meta/seed_lo", scalar(double(seed & 0xFFFFFFFFULL)));
    t.emplace("meta/seed_hi", scalar(double(seed >> 32)));
}

std::uint64_t fetch_seed(const std::map<std::string, Tensor>& t) {
    const std::uint64_t lo = meta_size(t, "meta/seed_lo");
    const std::uint64_t hi = meta_size(t, "meta/seed_hi");
    return (hi << 32) | lo;
}

void store_opt(std::map<std::string, Tensor>& t, const AdamState& opt) {
    t.emplace("opt/t", scalar(double(opt.t)));
    t.emplace("opt/lr", scalar(opt.lr));
    t.emplace("opt/beta1", scalar(opt.beta1));
    t.emplace("opt/beta2", scalar(opt.beta2));
    t.emplace("opt/eps", scalar(opt.eps));
    for (const auto& [name, m] : opt.m) t.emplace("opt/m/" + name, m);
    for (const auto& [name, v] : opt.v) t.emplace("opt/v/" + name, v);
}

bool fetch_opt(const std::map<std::string, Tensor>& t, const ParamMap& params,
               AdamState& opt) {
    if (t.find("opt/t") == t.end()) return false;
    opt.t = meta_size(t, "opt/t");
    opt.lr = need(t, "opt/lr")[0];
    opt.beta1 = need(t, "opt/beta1")[0];
    opt.beta2 = need(t, "opt/beta2")[0];
    opt.eps = need(t, "opt/eps")[0];
    for (const auto& [name, param] : params) {
        const Tensor& m = need(t, "opt/m/" + name);
        const Tensor& v = need(t, "opt/v/" + name);
        if (!m.same_shape(*param) || !v.same_shape(*param)) {
            throw FormatCorrupt("optimizer state shape for " + name);
        }
        opt.m.emplace(name, m);
        opt.v.emplace(name, v);
    }
    return true;
}

void copy_params_in(const std::map<std::string, Tensor>& t, Layer& model) {
    ParamMap params;
    model.collect_params("", params);
    for (auto& [name, param] : params) {
        const Tensor& stored = need(t, name);
        if (!stored.same_shape(*param)) {
            throw FormatCorrupt("shape mismatch for " + name + ": stored " +
                                stored.shape_str() + ", model " +
                                param->shape_str());
        }
        *param = stored;
    }
}

} // namespace

void save_xunet(const std::string& path, XUnet& model, const AdamState* opt) {
    std::map<std::string, Tensor> t;
    ParamMap params;
    model.collect_params("", params);
    for (const auto& [name, param] : params) t.emplace(name, *param);
    const XUnetConfig& c = model.config();
    t.emplace("meta/kind", scalar(1.0));
    t.emplace("meta/depth", scalar(double(c.depth)));
    t.emplace("meta/base_channels", scalar(double(c.base_channels)));
    t.emplace("meta/input_levels", scalar(double(c.input_levels)));
    t.emplace("meta/se_reduction", scalar(double(c.se_reduction)));
    t.emplace("meta/convs_per_block", scalar(double(c.convs_per_block)));
    store_seed(t, model.seed());
    if (opt) store_opt(t, *opt);
    write_tensor_file(path, t);
}

LoadedXUnet load_xunet(const std::string& path) {
    const auto t = read_tensor_file(path);
    if (meta_size(t, "meta/kind") != 1) {
        throw FormatCorrupt(path + " is not a segmentation checkpoint");
    }
    XUnetConfig c;
    c.depth = meta_size(t, "meta/depth");
    c.base_channels = meta_size(t, "meta/base_channels");
    c.input_levels = meta_size(t, "meta/input_levels");
    c.se_reduction = meta_size(t, "meta/se_reduction");
    c.convs_per_block = meta_size(t, "meta/convs_per_block");
    LoadedXUnet r;
    r.model = std::make_unique<XUnet>(c, fetch_seed(t));
    copy_params_in(t, *r.model);
    ParamMap params;
    r.model->collect_params("", params);
    r.has_opt = fetch_opt(t, params, r.opt);
    return r;
}

void save_classifier(const std::string& path, Classifier& model,
                     const AdamState* opt, std::size_t input_scale) {
    std::map<std::string, Tensor> t;
    ParamMap params;
    model.collect_params("", params);
    for (const auto& [name, param] : params) t.emplace(name, *param);
    const ClassifierConfig& c = model.config();
    t.emplace("meta/kind", scalar(2.0));
    t.emplace("meta/head_width", scalar(double(c.head_width)));
    t.emplace("meta/stem_strides", index_vector(c.stem_strides));
    t.emplace("meta/body_rates", index_vector(c.body_rates));
    t.emplace("meta/aspp_branch_channels",
              scalar(double(c.aspp.branch_channels)));
    t.emplace("meta/aspp_rates", index_vector(c.aspp.rates));
    t.emplace("meta/aspp_image_pool",
              scalar(c.aspp.include_image_pool ? 1.0 : 0.0));
    t.emplace("meta/input_scale", scalar(double(input_scale)));
    store_seed(t, model.seed());
    if (opt) store_opt(t, *opt);
    write_tensor_file(path, t);
}

LoadedClassifier load_classifier(const std::string& path) {
    const auto t = read_tensor_file(path);
    if (meta_size(t, "meta/kind") != 2) {
        throw FormatCorrupt(path + " is not a classifier checkpoint");
    }
    ClassifierConfig c;
    c.head_width = meta_size(t, "meta/head_width");
    c.stem_strides = meta_sizes(t, "meta/stem_strides");
    c.body_rates = meta_sizes(t, "meta/body_rates");
    c.aspp.branch_channels = meta_size(t, "meta/aspp_branch_channels");
    c.aspp.rates = meta_sizes(t, "meta/aspp_rates");
    c.aspp.include_image_pool = meta_size(t, "meta/aspp_image_pool") != 0;
    c.aspp.in_channels = c.head_width;
    LoadedClassifier r;
    r.model = std::make_unique<Classifier>(c, fetch_seed(t));
    r.input_scale =
        t.count("meta/input_scale") ? meta_size(t, "meta/input_scale") : 0;
    copy_params_in(t, *r.model);
    ParamMap params;
    r.model->collect_params("", params);
    r.has_opt = fetch_opt(t, params, r.opt);
    return r;
}

} // namespace fundus
