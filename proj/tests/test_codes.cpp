#include <doctest.h>

#include <cstdio>
#include <set>

#include "adrgraph/codes.hpp"

using namespace adrgraph;

TEST_CASE("parse_atc slices the five nested prefixes") {
    const AtcLevels a = parse_atc("C03CA01");
    CHECK(a.levels[0] == "C");
    CHECK(a.levels[1] == "C03");
    CHECK(a.levels[2] == "C03C");
    CHECK(a.levels[3] == "C03CA");
    CHECK(a.levels[4] == "C03CA01");
    const AtcLevels b = parse_atc("A01AB02");
    CHECK(b.levels[0] == "A");
    CHECK(b.levels[4] == "A01AB02");
    for (std::size_t i = 0; i + 1 < 5; ++i)
        CHECK(b.levels[i + 1].rfind(b.levels[i], 0) == 0);  // each level prefixes the next
}

TEST_CASE("parse_atc rejects malformed codes") {
    CHECK_THROWS_AS(parse_atc("XX"), ValidationError);
    CHECK_THROWS_AS(parse_atc("C03CA0"), ValidationError);
    CHECK_THROWS_AS(parse_atc("c03ca01"), ValidationError);
    CHECK_THROWS_AS(parse_atc("C03CA012"), ValidationError);
    CHECK_THROWS_AS(parse_atc("103CA01"), ValidationError);
}

TEST_CASE("parse_icd10 keeps chapter letter and 3-character category") {
    const IcdLevels a = parse_icd10("I50");
    CHECK(a.level1 == "I");
    CHECK(a.level2 == "I50");
    const IcdLevels b = parse_icd10("E11.9");
    CHECK(b.level1 == "E");
    CHECK(b.level2 == "E11");
    CHECK_THROWS_AS(parse_icd10("123"), ValidationError);
    CHECK_THROWS_AS(parse_icd10("I5"), ValidationError);
    CHECK_THROWS_AS(parse_icd10("IA0"), ValidationError);
}

TEST_CASE("drug category encoding has exactly five ones") {
    const std::vector<std::string> codes{"A01AA01", "A01AA02", "A01AB01", "B02BC03", "C03CA01"};
    const auto enc = CategoryEncoder::build(CodeKind::drug, codes);
    std::size_t expected = 0;
    for (std::size_t l = 0; l < enc.n_levels(); ++l) expected += enc.level_size(l);
    CHECK(enc.total_dim() == expected);
    for (const auto& c : codes) {
        const auto v = enc.encode(c);
        CHECK(v.size() == enc.total_dim());
        std::size_t ones = 0;
        for (double x : v) {
            CHECK((x == 0.0 || x == 1.0));
            ones += x == 1.0;
        }
        CHECK(ones == 5);
    }
}

TEST_CASE("two codes sharing levels 1-4 differ in exactly two positions") {
    const std::vector<std::string> codes{"A01AA01", "A01AA02"};
    const auto enc = CategoryEncoder::build(CodeKind::drug, codes);
    const auto a = enc.encode("A01AA01");
    const auto b = enc.encode("A01AA02");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
    CHECK(diff == 2);
}

TEST_CASE("disease encodings have two ones and differ pairwise") {
    const std::vector<std::string> codes{"I50", "I51", "E11.9"};
    const auto enc = CategoryEncoder::build(CodeKind::disease, codes);
    const auto a = enc.encode("I50");
    const auto b = enc.encode("I51");
    std::size_t ones = 0, diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ones += a[i] == 1.0;
        diff += a[i] != b[i];
    }
    CHECK(ones == 2);
    CHECK(diff == 2);  // same chapter, different category
    CHECK_THROWS_AS(enc.encode("Z99"), ValidationError);
}

TEST_CASE("encoding is injective over distinct codes") {
    std::vector<std::string> codes;
    for (char l4 : {'A', 'B', 'C'})
        for (int s = 1; s <= 4; ++s) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "N02%cX%02d", l4, s);
            codes.push_back(buf);
        }
    const auto enc = CategoryEncoder::build(CodeKind::drug, codes);
    std::set<std::vector<double>> seen;
    for (const auto& c : codes) CHECK(seen.insert(enc.encode(c)).second);
}
