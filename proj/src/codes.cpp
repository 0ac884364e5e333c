#include "adrgraph/codes.hpp"

#include <cctype>

namespace adrgraph {

namespace {
bool upper(char c) { return c >= 'A' && c <= 'Z'; }
bool digit(char c) { return c >= '0' && c <= '9'; }
}  // namespace

bool is_valid_atc(const std::string& c) {
    // letter, 2 digits, letter, letter, 2 digits
    return c.size() == 7 && upper(c[0]) && digit(c[1]) && digit(c[2]) && upper(c[3]) &&
           upper(c[4]) && digit(c[5]) && digit(c[6]);
}

bool is_valid_icd10(const std::string& c) {
    // leading letter followed by at least two digits
    return c.size() >= 3 && upper(c[0]) && digit(c[1]) && digit(c[2]);
}

AtcLevels parse_atc(const std::string& code) {
    if (!is_valid_atc(code)) throw ValidationError("malformed ATC code: '" + code + "'");
    AtcLevels out;
    static constexpr std::size_t lens[5] = {1, 3, 4, 5, 7};
    for (std::size_t i = 0; i < 5; ++i) out.levels[i] = code.substr(0, lens[i]);
    return out;
}

IcdLevels parse_icd10(const std::string& code) {
    if (!is_valid_icd10(code)) throw ValidationError("malformed ICD-10 code: '" + code + "'");
    return IcdLevels{code.substr(0, 1), code.substr(0, 3)};
}

std::vector<std::string> CategoryEncoder::levels_of(const std::string& code) const {
    if (kind_ == CodeKind::drug) {
        AtcLevels a = parse_atc(code);
        return {a.levels.begin(), a.levels.end()};
    }
    IcdLevels d = parse_icd10(code);
    return {d.level1, d.level2};
}

CategoryEncoder CategoryEncoder::build(CodeKind kind, const std::vector<std::string>& codes) {
    CategoryEncoder enc;
    enc.kind_ = kind;
    const std::size_t n_levels = kind == CodeKind::drug ? 5 : 2;
    enc.level_index_.resize(n_levels);
    for (const auto& code : codes) {
        auto lv = enc.levels_of(code);
        for (std::size_t i = 0; i < n_levels; ++i) enc.level_index_[i].try_emplace(lv[i]);
    }
    // std::map iteration gives lexicographic index assignment, independent of
    // the order codes were observed in.
    enc.level_offset_.resize(n_levels);
    std::size_t off = 0;
    for (std::size_t i = 0; i < n_levels; ++i) {
        enc.level_offset_[i] = off;
        std::size_t j = 0;
        for (auto& [value, idx] : enc.level_index_[i]) idx = j++;
        off += enc.level_index_[i].size();
    }
    enc.total_dim_ = off;
    return enc;
}

std::vector<std::size_t> CategoryEncoder::one_positions(const std::string& code) const {
    auto lv = levels_of(code);
    std::vector<std::size_t> pos(lv.size());
    for (std::size_t i = 0; i < lv.size(); ++i) {
        auto it = level_index_[i].find(lv[i]);
        if (it == level_index_[i].end())
            throw ValidationError("unseen level-" + std::to_string(i + 1) + " value '" + lv[i] +
                                  "' for code '" + code + "'");
        pos[i] = level_offset_[i] + it->second;
    }
    return pos;
}

std::vector<double> CategoryEncoder::encode(const std::string& code) const {
    std::vector<double> v(total_dim_, 0.0);
    for (std::size_t p : one_positions(code)) v[p] = 1.0;
    return v;
}

}  // namespace adrgraph
