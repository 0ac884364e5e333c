#include "adrgraph/claims.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace adrgraph {

int CodeVocabulary::id_of(const std::string& code) const {
    auto it = code_to_id.find(code);
    if (it == code_to_id.end())
        throw ValidationError("code not in vocabulary: '" + code + "'");
    return it->second;
}

namespace {

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

constexpr int kDaysInMonth[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

// days_from_civil (Howard Hinnant's public-domain algorithm)
int days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<int>(doe) - 719468;
}

void civil_from_days(int z, int& y, int& m, int& d) {
    z += 719468;
    const int era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int yy = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
    y = yy + (m <= 2);
}

struct RawVisitKey {
    std::string patient_id;
    int date;
    bool operator<(const RawVisitKey& o) const {
        if (patient_id != o.patient_id) return patient_id < o.patient_id;
        return date < o.date;
    }
};

using VisitMap = std::map<RawVisitKey, Visit>;

void add_code(VisitMap& visits, const std::string& pid, int date, bool is_rx, const std::string& code) {
    Visit& v = visits[RawVisitKey{pid, date}];
    v.date = date;
    if (is_rx)
        v.prescriptions.insert(code);
    else
        v.diagnoses.insert(code);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

void ingest_csv(std::istream& in, const std::string& path, VisitMap& visits, IngestReport& rep) {
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("no records: empty claims file " + path);
    {
        auto header = split_csv_line(line);
        if (header != std::vector<std::string>{"patient_id", "date", "code_type", "code"})
            throw ValidationError("bad claims CSV header in " + path);
    }
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++rep.rows_total;
        auto f = split_csv_line(line);
        if (f.size() != 4 || f[0].empty() || f[3].empty()) {
            ++rep.bad_field_count;
            continue;
        }
        int date;
        if (!parse_iso_date(f[1], date)) {
            ++rep.bad_date;
            continue;
        }
        bool is_rx;
        if (f[2] == "RX")
            is_rx = true;
        else if (f[2] == "DX")
            is_rx = false;
        else {
            ++rep.bad_code_type;
            continue;
        }
        if (is_rx ? !is_valid_atc(f[3]) : !is_valid_icd10(f[3])) {
            ++rep.bad_code;
            continue;
        }
        add_code(visits, f[0], date, is_rx, f[3]);
        ++rep.rows_ok;
    }
}

void ingest_jsonl(std::istream& in, const std::string& path, VisitMap& visits, IngestReport& rep) {
    std::string line;
    bool any_line = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        any_line = true;
        ++rep.rows_total;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            ++rep.bad_field_count;
            continue;
        }
        if (!obj.is_object() || !obj.contains("patient_id") || !obj.contains("date") ||
            !obj["patient_id"].is_string() || !obj["date"].is_string()) {
            ++rep.bad_field_count;
            continue;
        }
        int date;
        if (!parse_iso_date(obj["date"].get<std::string>(), date)) {
            ++rep.bad_date;
            continue;
        }
        std::vector<std::string> rx, dx;
        bool shape_ok = true;
        for (const char* key : {"rx", "dx"}) {
            if (!obj.contains(key)) continue;
            if (!obj[key].is_array()) {
                shape_ok = false;
                break;
            }
            for (const auto& item : obj[key]) {
                if (!item.is_string()) {
                    shape_ok = false;
                    break;
                }
                (key[0] == 'r' ? rx : dx).push_back(item.get<std::string>());
            }
        }
        if (!shape_ok || (rx.empty() && dx.empty())) {
            ++rep.bad_field_count;
            continue;
        }
        bool codes_ok = true;
        for (const auto& c : rx) codes_ok = codes_ok && is_valid_atc(c);
        for (const auto& c : dx) codes_ok = codes_ok && is_valid_icd10(c);
        if (!codes_ok) {
            ++rep.bad_code;
            continue;
        }
        const std::string pid = obj["patient_id"].get<std::string>();
        for (const auto& c : rx) add_code(visits, pid, date, true, c);
        for (const auto& c : dx) add_code(visits, pid, date, false, c);
        ++rep.rows_ok;
    }
    if (!any_line) throw ValidationError("no records: empty claims file " + path);
}

}  // namespace

bool parse_iso_date(const std::string& s, int& days_out) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    const std::string ys = s.substr(0, 4), ms = s.substr(5, 2), ds = s.substr(8, 2);
    if (!all_digits(ys) || !all_digits(ms) || !all_digits(ds)) return false;
    const int y = std::stoi(ys), m = std::stoi(ms), d = std::stoi(ds);
    if (m < 1 || m > 12) return false;
    int dim = kDaysInMonth[m - 1];
    if (m == 2 && leap(y)) dim = 29;
    if (d < 1 || d > dim) return false;
    days_out = days_from_civil(y, m, d);
    return true;
}

std::string format_iso_date(int days) {
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

std::vector<PatientRecord> ingest_claims(const std::string& path, ClaimsFormat format,
                                         IngestReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("unreadable claims file: " + path);
    VisitMap visits;
    IngestReport rep;
    if (format == ClaimsFormat::csv)
        ingest_csv(in, path, visits, rep);
    else
        ingest_jsonl(in, path, visits, rep);
    if (visits.empty()) throw ValidationError("no records: no valid rows in " + path);

    std::vector<PatientRecord> records;
    for (auto& [key, visit] : visits) {
        if (records.empty() || records.back().patient_id != key.patient_id)
            records.push_back(PatientRecord{key.patient_id, {}});
        records.back().visits.push_back(std::move(visit));
    }
    // map order already gives patient_id asc, date asc
    if (report) *report = rep;
    return records;
}

std::pair<CodeVocabulary, CodeVocabulary> build_vocabularies(const std::vector<PatientRecord>& records) {
    if (records.empty()) throw ValidationError("build_vocabularies: no records");
    CodeVocabulary drug{CodeKind::drug, {}, {}};
    CodeVocabulary dis{CodeKind::disease, {}, {}};
    auto add = [](CodeVocabulary& v, const std::string& code) {
        if (v.code_to_id.emplace(code, static_cast<int>(v.id_to_code.size())).second)
            v.id_to_code.push_back(code);
    };
    for (const auto& rec : records)
        for (const auto& visit : rec.visits) {
            for (const auto& c : visit.prescriptions) add(drug, c);
            for (const auto& c : visit.diagnoses) add(dis, c);
        }
    return {std::move(drug), std::move(dis)};
}

CodeSequence extract_sequences(const PatientRecord& record, const CodeVocabulary& vocab, CodeKind kind) {
    if (vocab.kind != kind) throw ValidationError("extract_sequences: vocabulary kind mismatch");
    CodeSequence seq{kind, {}};
    for (const auto& visit : record.visits) {
        const auto& codes = kind == CodeKind::drug ? visit.prescriptions : visit.diagnoses;
        std::vector<int> ids;
        ids.reserve(codes.size());
        for (const auto& c : codes) ids.push_back(vocab.id_of(c));
        std::sort(ids.begin(), ids.end());  // within-visit order: ascending vocabulary id
        seq.tokens.insert(seq.tokens.end(), ids.begin(), ids.end());
    }
    return seq;
}

std::vector<CodeSequence> extract_corpus(const std::vector<PatientRecord>& records,
                                         const CodeVocabulary& vocab, CodeKind kind) {
    std::vector<CodeSequence> corpus;
    corpus.reserve(records.size());
    for (const auto& rec : records) corpus.push_back(extract_sequences(rec, vocab, kind));
    return corpus;
}

}  // namespace adrgraph
