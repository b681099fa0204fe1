#include "pipeparse/phv.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace pipeparse {

std::string_view to_string(ExceptionKind k) {
    switch (k) {
        case ExceptionKind::Truncated: return "truncated";
        case ExceptionKind::BadSize: return "bad_size";
        case ExceptionKind::UnknownKey: return "unknown_key";
        case ExceptionKind::Unparsed: return "unparsed";
    }
    return "?";
}

void sort_phvs(std::vector<Phv>& phvs) {
    std::stable_sort(phvs.begin(), phvs.end(),
                     [](const Phv& a, const Phv& b) { return a.header_id < b.header_id; });
}

std::string to_jsonl(const PacketResult& r) {
    std::string out;
    for (const auto& p : r.phvs) {
        nlohmann::ordered_json j;
        j["packet_id"] = p.packet_id;
        j["header"] = p.header;
        j["bits_hex"] = p.bits.to_hex();
        j["bit_count"] = p.bit_count;
        j["valid"] = p.valid;
        out += j.dump() + "\n";
    }
    if (r.exception) {
        nlohmann::ordered_json j;
        j["packet_id"] = r.exception->packet_id;
        j["exception"] = std::string(to_string(r.exception->kind));
        j["header"] = r.exception->header;
        out += j.dump() + "\n";
    }
    return out;
}

std::string to_jsonl(const std::vector<PacketResult>& results) {
    std::string out;
    for (const auto& r : results) out += to_jsonl(r);
    return out;
}

std::string describe(const PacketResult& r) {
    std::ostringstream os;
    os << "packet " << r.packet_id << ":\n";
    for (const auto& p : r.phvs) {
        os << "  " << p.header << " (id " << p.header_id << ") " << (p.valid ? "valid" : "INVALID") << " "
           << p.bit_count << " bits " << p.bits.to_hex() << "\n";
    }
    if (r.exception) {
        os << "  exception " << to_string(r.exception->kind) << " at " << r.exception->header << "\n";
    }
    return os.str();
}

}  // namespace pipeparse
