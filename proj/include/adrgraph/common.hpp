#pragma once

#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace adrgraph {

// Validation errors map to CLI exit code 1, runtime errors to 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

class RuntimeError : public Error {
public:
    explicit RuntimeError(const std::string& msg) : Error(msg) {}
};

/// Deterministic RNG (splitmix64-seeded xorshift*). Self-contained so
/// sequences do not depend on standard library distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(split_seed(seed)) {}

    std::uint64_t next_u64() {
        // xorshift* keeps the generator self-contained and portable
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545F4914F6CDD1DULL;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw RuntimeError("Rng::below called with n = 0");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

    /// Poisson-like positive integer with the given mean (inversion on CDF).
    int poisson_min1(double mean);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t split_seed(std::uint64_t seed) {
        // splitmix64 so nearby seeds produce unrelated streams
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z = z ^ (z >> 31);
        return z == 0 ? 0x8BADF00DULL : z;
    }

    std::uint64_t state_;
};

/// Row-major dense matrix of doubles. All model math runs in double; files
/// store float32 (see io helpers).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

double dot(const double* a, const double* b, std::size_t n);
double l2_distance(const double* a, const double* b, std::size_t n);
double sigmoid(double x);

/// Nearest-rank percentile of an unsorted sample; p in (0, 100].
double percentile(std::vector<double> values, double p);

/// FNV-1a 64-bit over a byte buffer, hex-encoded.
std::string fnv1a_hex(const void* data, std::size_t n);
std::string hash_file(const std::string& path);
std::string hash_string(const std::string& s);

/// Writes content to path via temp file + rename.
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

/// Matrix container file: magic "ADRM", version, kind byte, rows, cols, seed,
/// then row-major float32. Doubles are narrowed on save.
void save_matrix(const std::string& path, const Matrix& m, std::uint8_t kind, std::uint64_t seed);
Matrix load_matrix(const std::string& path, std::uint8_t* kind_out = nullptr, std::uint64_t* seed_out = nullptr);

/// View over one named parameter block, used for checkpoints, Adam state and
/// finite-difference sweeps.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

/// Checkpoint container: magic "ADRP", version, a JSON meta string, then the
/// named tensors as row-major float32. save -> load -> save is byte-identical.
void save_tensor_file(const std::string& path, const std::string& meta_json,
                      const std::vector<TensorRef>& tensors);

struct LoadedTensorFile {
    std::string meta_json;
    std::vector<std::pair<std::string, Matrix>> tensors;
};
LoadedTensorFile load_tensor_file(const std::string& path);

std::string format_g9(double v);  // 9 significant digits, edge-list weight format

}  // namespace adrgraph
