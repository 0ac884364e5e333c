#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "adrgraph/codes.hpp"
#include "adrgraph/common.hpp"

namespace adrgraph {

enum class ClaimsFormat { csv, jsonl };

/// One calendar day of care for one patient. Same-day rows are merged, so
/// prescriptions/diagnoses are sets and at least one of them is non-empty.
struct Visit {
    int date = 0;  // days since 1970-01-01
    std::set<std::string> prescriptions;  // ATC codes
    std::set<std::string> diagnoses;      // ICD-10 codes
};

struct PatientRecord {
    std::string patient_id;
    std::vector<Visit> visits;  // ascending by date
};

struct CodeVocabulary {
    CodeKind kind = CodeKind::drug;
    std::unordered_map<std::string, int> code_to_id;
    std::vector<std::string> id_to_code;

    std::size_t size() const { return id_to_code.size(); }
    int id_of(const std::string& code) const;  // throws ValidationError when missing
    bool contains(const std::string& code) const { return code_to_id.count(code) > 0; }
};

struct CodeSequence {
    CodeKind kind = CodeKind::drug;
    std::vector<int> tokens;  // dense ids, temporal order
};

/// Per-category counts of rows that were skipped during ingestion.
struct IngestReport {
    std::size_t rows_total = 0;
    std::size_t rows_ok = 0;
    std::size_t bad_field_count = 0;
    std::size_t bad_date = 0;
    std::size_t bad_code_type = 0;
    std::size_t bad_code = 0;
    std::size_t malformed() const { return bad_field_count + bad_date + bad_code_type + bad_code; }
};

/// Strict YYYY-MM-DD calendar day -> days since epoch. Returns false on any
/// format or range violation.
bool parse_iso_date(const std::string& s, int& days_out);
std::string format_iso_date(int days);

/// Reads a claims file and assembles per-patient records, visits merged by
/// day and sorted ascending. Skipped rows are tallied in `report`.
/// Throws ValidationError for an unreadable file or a file yielding no records.
std::vector<PatientRecord> ingest_claims(const std::string& path, ClaimsFormat format,
                                         IngestReport* report = nullptr);

/// Assigns dense ids in first-appearance order over records sorted by
/// patient_id, visits by date, codes lexicographic within a visit.
std::pair<CodeVocabulary, CodeVocabulary> build_vocabularies(const std::vector<PatientRecord>& records);

/// Concatenates per-visit code sets in visit order; within a visit codes are
/// emitted in ascending vocabulary id.
CodeSequence extract_sequences(const PatientRecord& record, const CodeVocabulary& vocab, CodeKind kind);

std::vector<CodeSequence> extract_corpus(const std::vector<PatientRecord>& records,
                                         const CodeVocabulary& vocab, CodeKind kind);

}  // namespace adrgraph
