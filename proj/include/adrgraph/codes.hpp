#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adrgraph/common.hpp"

namespace adrgraph {

enum class CodeKind : std::uint8_t { drug = 0, disease = 1 };

/// Five nested prefixes of a 7-character ATC code (lengths 1, 3, 4, 5, 7).
struct AtcLevels {
    std::array<std::string, 5> levels;
};

/// First two classification levels of an ICD-10 code: chapter letter and
/// 3-character category.
struct IcdLevels {
    std::string level1;  // leading letter
    std::string level2;  // first three characters
};

bool is_valid_atc(const std::string& code);
bool is_valid_icd10(const std::string& code);

AtcLevels parse_atc(const std::string& code);        // throws ValidationError on malformed code
IcdLevels parse_icd10(const std::string& code);      // throws ValidationError on malformed code

/// Multi-hot category encoder. Per-level vocabularies are built from the
/// observed codes, so the encoded width is data-dependent.
class CategoryEncoder {
public:
    static CategoryEncoder build(CodeKind kind, const std::vector<std::string>& codes);

    CodeKind kind() const { return kind_; }
    std::size_t total_dim() const { return total_dim_; }
    std::size_t n_levels() const { return level_index_.size(); }
    std::size_t level_size(std::size_t level) const { return level_index_[level].size(); }

    /// 0/1 vector of length total_dim with exactly one 1 per level.
    /// Throws ValidationError on a level value not seen at build time.
    std::vector<double> encode(const std::string& code) const;

    /// Positions of the ones, one per level (offsets into the full vector).
    std::vector<std::size_t> one_positions(const std::string& code) const;

private:
    std::vector<std::string> levels_of(const std::string& code) const;

    CodeKind kind_ = CodeKind::drug;
    std::size_t total_dim_ = 0;
    std::vector<std::map<std::string, std::size_t>> level_index_;  // per level: value -> index
    std::vector<std::size_t> level_offset_;                        // per level: offset in the vector
};

}  // namespace adrgraph
