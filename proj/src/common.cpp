#include "adrgraph/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace adrgraph {

int Rng::poisson_min1(double mean) {
    if (mean <= 1.0) return 1;
    // Knuth's product method; fine for the small means used here.
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform();
    } while (p > limit);
    return std::max(1, k - 1);
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double l2_distance(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of empty sample");
    if (p <= 0.0 || p > 100.0) throw ValidationError("percentile p must be in (0, 100]");
    std::sort(values.begin(), values.end());
    const std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

std::string fnv1a_hex(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_file(const std::string& path) {
    std::string content = read_file(path);
    return fnv1a_hex(content.data(), content.size());
}

std::string hash_string(const std::string& s) { return fnv1a_hex(s.data(), s.size()); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("cannot open for write: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw RuntimeError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

namespace {

constexpr char kMatrixMagic[4] = {'A', 'D', 'R', 'M'};
constexpr std::uint32_t kMatrixVersion = 1;

template <typename T>
void write_pod(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(const std::string& buf, std::size_t& off, const std::string& path) {
    if (off + sizeof(T) > buf.size()) throw ValidationError("truncated matrix file: " + path);
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

void save_matrix(const std::string& path, const Matrix& m, std::uint8_t kind, std::uint64_t seed) {
    std::string out;
    out.reserve(32 + m.data.size() * sizeof(float));
    out.append(kMatrixMagic, 4);
    write_pod(out, kMatrixVersion);
    write_pod(out, kind);
    const std::uint8_t pad[3] = {0, 0, 0};
    out.append(reinterpret_cast<const char*>(pad), 3);
    write_pod(out, static_cast<std::uint64_t>(m.rows));
    write_pod(out, static_cast<std::uint32_t>(m.cols));
    write_pod(out, seed);
    for (double v : m.data) write_pod(out, static_cast<float>(v));
    atomic_write(path, out);
}

Matrix load_matrix(const std::string& path, std::uint8_t* kind_out, std::uint64_t* seed_out) {
    const std::string buf = read_file(path);
    std::size_t off = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kMatrixMagic, 4) != 0)
        throw ValidationError("not a matrix file: " + path);
    off = 4;
    const auto version = read_pod<std::uint32_t>(buf, off, path);
    if (version != kMatrixVersion) throw ValidationError("unsupported matrix file version in " + path);
    const auto kind = read_pod<std::uint8_t>(buf, off, path);
    off += 3;  // pad
    const auto rows = read_pod<std::uint64_t>(buf, off, path);
    const auto cols = read_pod<std::uint32_t>(buf, off, path);
    const auto seed = read_pod<std::uint64_t>(buf, off, path);
    Matrix m(static_cast<std::size_t>(rows), cols);
    for (double& v : m.data) v = static_cast<double>(read_pod<float>(buf, off, path));
    if (off != buf.size()) throw ValidationError("trailing bytes in matrix file: " + path);
    if (kind_out) *kind_out = kind;
    if (seed_out) *seed_out = seed;
    return m;
}

namespace {
constexpr char kTensorMagic[4] = {'A', 'D', 'R', 'P'};
constexpr std::uint32_t kTensorVersion = 1;
}  // namespace

void save_tensor_file(const std::string& path, const std::string& meta_json,
                      const std::vector<TensorRef>& tensors) {
    std::string out;
    out.append(kTensorMagic, 4);
    write_pod(out, kTensorVersion);
    write_pod(out, static_cast<std::uint32_t>(meta_json.size()));
    out.append(meta_json);
    write_pod(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        write_pod(out, static_cast<std::uint32_t>(t.name.size()));
        out.append(t.name);
        write_pod(out, static_cast<std::uint64_t>(t.rows));
        write_pod(out, static_cast<std::uint64_t>(t.cols));
        for (std::size_t i = 0; i < t.size(); ++i) write_pod(out, static_cast<float>(t.data[i]));
    }
    atomic_write(path, out);
}

LoadedTensorFile load_tensor_file(const std::string& path) {
    const std::string buf = read_file(path);
    std::size_t off = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kTensorMagic, 4) != 0)
        throw ValidationError("not a checkpoint file: " + path);
    off = 4;
    if (read_pod<std::uint32_t>(buf, off, path) != kTensorVersion)
        throw ValidationError("unsupported checkpoint version in " + path);
    LoadedTensorFile out;
    const auto meta_len = read_pod<std::uint32_t>(buf, off, path);
    if (off + meta_len > buf.size()) throw ValidationError("truncated checkpoint: " + path);
    out.meta_json = buf.substr(off, meta_len);
    off += meta_len;
    const auto n_tensors = read_pod<std::uint32_t>(buf, off, path);
    for (std::uint32_t t = 0; t < n_tensors; ++t) {
        const auto name_len = read_pod<std::uint32_t>(buf, off, path);
        if (off + name_len > buf.size()) throw ValidationError("truncated checkpoint: " + path);
        std::string name = buf.substr(off, name_len);
        off += name_len;
        const auto rows = read_pod<std::uint64_t>(buf, off, path);
        const auto cols = read_pod<std::uint64_t>(buf, off, path);
        Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
        for (double& v : m.data) v = static_cast<double>(read_pod<float>(buf, off, path));
        out.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (off != buf.size()) throw ValidationError("trailing bytes in checkpoint: " + path);
    return out;
}

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace adrgraph
