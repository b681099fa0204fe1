#include "pipeparse/oracle.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace pipeparse {

PacketResult ReferenceParse::to_result(std::uint32_t packet_id) const {
    PacketResult r;
    r.packet_id = packet_id;
    r.phvs = phvs;
    for (auto& p : r.phvs) p.packet_id = packet_id;
    sort_phvs(r.phvs);
    r.exception = exception;
    if (r.exception) r.exception->packet_id = packet_id;
    return r;
}

HeaderIds plan_header_ids(const PipelinePlan& plan) {
    HeaderIds ids;
    for (const auto& [id, e] : plan.engines) ids[e.name] = id;
    ids[std::string(kEnd)] = kEndId;
    ids[std::string(kReject)] = kRejectId;
    return ids;
}

ReferenceParse reference_parse(const ParseGraph& g, std::span<const std::uint8_t> packet, const HeaderIds& ids,
                               std::uint32_t packet_id) {
    ReferenceParse out;
    const std::size_t total = packet.size() * 8;
    const BitVec bits = BitVec::from_bytes(packet, total);
    std::size_t offset = 0;
    std::string state = g.root;

    while (state != kEnd) {
        const auto& s = g.state(state);
        const auto& h = g.header_of(state);
        const auto id_it = ids.find(state);
        const HeaderId id = id_it == ids.end() ? 0 : id_it->second;
        const std::size_t available = total - offset;

        auto stop = [&](ExceptionKind kind) {
            if (kind != ExceptionKind::UnknownKey) {
                out.phvs.push_back({id, state, packet_id, BitVec(), 0, false});
            }
            out.exception = ParseException{packet_id, kind, id, state};
        };

        std::uint32_t size = h.max_size_bits;
        if (h.size_expr) {
            const auto field_at = *h.field_offset(h.size_expr->field);
            const auto field_width = h.find_field(h.size_expr->field)->width_bits;
            if (available < field_at + field_width) {
                stop(ExceptionKind::Truncated);
                break;
            }
            const auto value = bits.field(offset + field_at, field_width);
            if (!std::binary_search(h.valid_size_values.begin(), h.valid_size_values.end(), value)) {
                stop(ExceptionKind::BadSize);
                break;
            }
            size = static_cast<std::uint32_t>(h.size_expr->evaluate(value));
        }
        if (available < size) {
            stop(ExceptionKind::Truncated);
            break;
        }

        out.phvs.push_back({id, state, packet_id, bits.slice(offset, size), size, true});
        out.trail.push_back(state);
        const std::string next =
            s.key ? s.next_for(bits.field(offset + s.key->offset_bits, s.key->width_bits)) : s.default_transition;
        offset += size;
        out.consumed_bits = offset;
        if (next == kReject) {
            stop(ExceptionKind::UnknownKey);
            break;
        }
        state = next;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finaliser
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t random_bits(std::mt19937_64& rng, std::uint32_t width) {
    const std::uint64_t v = rng();
    return width >= 64 ? v : v & ((std::uint64_t{1} << width) - 1);
}

bool fits(std::uint64_t value, std::uint32_t width) {
    return width >= 64 || value < (std::uint64_t{1} << width);
}

// A key value whose lookup lands on `target`, or nullopt.
std::optional<std::uint64_t> choose_key(const ParseState& s, const std::string& target, std::mt19937_64& rng) {
    std::vector<std::uint64_t> direct;
    for (const auto& t : s.transitions) {
        if (t.next_state == target) direct.push_back(t.match_value);
    }
    if (!direct.empty()) {
        return direct[std::uniform_int_distribution<std::size_t>(0, direct.size() - 1)(rng)];
    }
    if (s.default_transition != target) return std::nullopt;

    const std::uint32_t width = s.key->width_bits;
    std::set<std::uint64_t> taken;
    for (const auto& t : s.transitions) taken.insert(t.match_value);
    for (int attempt = 0; attempt < 64; ++attempt) {
        const auto v = random_bits(rng, width);
        if (!taken.contains(v)) return v;
    }
    if (width <= 20) {
        std::vector<std::uint64_t> free;
        for (std::uint64_t v = 0; v < (std::uint64_t{1} << width); ++v) {
            if (!taken.contains(v)) free.push_back(v);
        }
        if (!free.empty()) return free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    }
    return std::nullopt;
}

// Size-field value outside the valid set, if the field width leaves room.
std::optional<std::uint64_t> invalid_size_value(const HeaderTypeSpec& h, std::mt19937_64& rng) {
    const auto width = h.find_field(h.size_expr->field)->width_bits;
    const std::set<std::uint64_t> valid(h.valid_size_values.begin(), h.valid_size_values.end());
    if (width < 64 && valid.size() >= (std::uint64_t{1} << width)) return std::nullopt;
    for (int attempt = 0; attempt < 256; ++attempt) {
        const auto v = random_bits(rng, width);
        if (!valid.contains(v)) return v;
    }
    for (std::uint64_t v = 0;; ++v) {
        if (!valid.contains(v)) return v;
    }
}

}  // namespace

GeneratedPacket gen_packet_detailed(const ParseGraph& g, const PacketSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& seq = spec.header_sequence;
    if (seq.empty()) throw GenerationError("empty header sequence");
    if (seq.front().state != g.root) throw GenerationError("header sequence must start at the root state");

    std::vector<BitVec> headers;
    GeneratedPacket out;
    std::size_t total_bits = 0;

    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& choice = seq[i];
        if (!g.states.contains(choice.state)) throw GenerationError("unknown state '" + choice.state + "'");
        const auto& s = g.state(choice.state);
        const auto& h = g.header_of(choice.state);
        const std::string target = i + 1 < seq.size() ? seq[i + 1].state
                                   : spec.reject_last ? std::string(kReject)
                                                      : std::string(kEnd);

        for (const auto& [field, value] : choice.overrides) {
            const auto f = h.find_field(field);
            if (!f || f->is_remainder() || !h.field_offset(field)) {
                throw GenerationError("'" + choice.state + "' has no fixed field '" + field + "'");
            }
            if (!fits(value, f->width_bits)) {
                throw GenerationError("override " + field + "=" + std::to_string(value) + " does not fit " +
                                      std::to_string(f->width_bits) + " bits");
            }
        }

        std::uint32_t size = h.max_size_bits;
        std::optional<std::uint64_t> size_value;
        if (h.size_expr) {
            if (auto it = choice.overrides.find(h.size_expr->field); it != choice.overrides.end()) {
                if (!std::binary_search(h.valid_size_values.begin(), h.valid_size_values.end(), it->second)) {
                    throw GenerationError("size override for '" + choice.state + "' is outside the valid set");
                }
                size_value = it->second;
            } else {
                size_value = h.valid_size_values[std::uniform_int_distribution<std::size_t>(
                    0, h.valid_size_values.size() - 1)(rng)];
            }
            size = static_cast<std::uint32_t>(h.size_expr->evaluate(*size_value));
        }

        BitVec hdr(size);
        for (std::size_t pos = 0; pos < size; pos += 64) {
            const auto len = static_cast<std::uint32_t>(std::min<std::size_t>(64, size - pos));
            hdr.set_field(pos, len, random_bits(rng, len));
        }
        if (size_value) {
            hdr.set_field(*h.field_offset(h.size_expr->field), h.find_field(h.size_expr->field)->width_bits,
                          *size_value);
        }

        if (s.key) {
            const auto key = choose_key(s, target, rng);
            if (!key) {
                throw GenerationError("no key value of '" + choice.state + "' leads to '" + target + "'");
            }
            hdr.set_field(s.key->offset_bits, s.key->width_bits, *key);
        } else if (s.default_transition != target) {
            throw GenerationError("'" + choice.state + "' cannot be followed by '" + target + "'");
        }

        for (const auto& [field, value] : choice.overrides) {
            hdr.set_field(*h.field_offset(field), h.find_field(field)->width_bits, value);
        }
        if (s.key) {
            const auto key = hdr.field(s.key->offset_bits, s.key->width_bits);
            if (s.next_for(key) != target) {
                throw GenerationError("overrides on '" + choice.state + "' set key " + std::to_string(key) +
                                      ", which does not lead to '" + target + "'");
            }
        }

        out.header_offsets_bits.push_back(total_bits);
        out.header_sizes_bits.push_back(size);
        total_bits += size;
        headers.push_back(std::move(hdr));
    }

    const std::size_t payload_bits = spec.payload_len_bytes * 8;
    BitVec packet(total_bits + payload_bits);
    for (std::size_t i = 0; i < headers.size(); ++i) packet.deposit(headers[i], out.header_offsets_bits[i]);
    for (std::size_t pos = total_bits; pos < packet.width(); pos += 64) {
        const auto len = static_cast<std::uint32_t>(std::min<std::size_t>(64, packet.width() - pos));
        packet.set_field(pos, len, random_bits(rng, len));
    }
    out.bytes = packet.to_bytes();
    return out;
}

std::vector<std::uint8_t> gen_packet(const ParseGraph& g, const PacketSpec& spec, std::uint64_t seed) {
    return gen_packet_detailed(g, spec, seed).bytes;
}

PacketSpec random_packet_spec(const ParseGraph& g, std::mt19937_64& rng, std::size_t max_payload_bytes) {
    PacketSpec spec;
    std::string state = g.root;
    while (state != kEnd) {
        spec.header_sequence.push_back({state, {}});
        const auto& s = g.state(state);
        std::set<std::string> targets;
        for (const auto& t : s.transitions) {
            if (t.next_state != kReject) targets.insert(t.next_state);
        }
        if (s.default_transition != kReject) targets.insert(s.default_transition);
        if (targets.empty()) throw GenerationError("no way forward from '" + state + "'");
        auto it = targets.begin();
        std::advance(it, std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng));
        state = *it;
    }
    spec.payload_len_bytes = std::uniform_int_distribution<std::size_t>(0, max_payload_bytes)(rng);
    return spec;
}

std::string_view to_string(Mutation m) {
    switch (m) {
        case Mutation::None: return "none";
        case Mutation::Truncated: return "truncated";
        case Mutation::UnknownKey: return "unknown_key";
        case Mutation::BadSize: return "bad_size";
    }
    return "?";
}

namespace {

CorpusPacket make_corpus_packet(const ParseGraph& g, std::mt19937_64& rng, const CorpusOptions& opt) {
    CorpusPacket cp;
    cp.spec = random_packet_spec(g, rng, opt.max_payload_bytes);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const std::uint64_t gen_seed = rng();

    if (u < opt.truncate_rate) {
        cp.bytes = gen_packet(g, cp.spec, gen_seed);
        if (cp.bytes.size() >= 2) {
            cp.bytes.resize(std::uniform_int_distribution<std::size_t>(1, cp.bytes.size() - 1)(rng));
            cp.mutation = Mutation::Truncated;
        }
        return cp;
    }

    if (u < opt.truncate_rate + opt.unknown_key_rate) {
        std::vector<std::size_t> spots;
        for (std::size_t i = 0; i < cp.spec.header_sequence.size(); ++i) {
            const auto& s = g.state(cp.spec.header_sequence[i].state);
            std::mt19937_64 probe(0);
            if (s.key && s.default_transition == kReject && choose_key(s, std::string(kReject), probe)) {
                spots.push_back(i);
            }
        }
        if (!spots.empty()) {
            const auto cut = spots[std::uniform_int_distribution<std::size_t>(0, spots.size() - 1)(rng)];
            cp.spec.header_sequence.resize(cut + 1);
            cp.spec.reject_last = true;
            cp.mutation = Mutation::UnknownKey;
        }
        cp.bytes = gen_packet(g, cp.spec, gen_seed);
        return cp;
    }

    if (u < opt.truncate_rate + opt.unknown_key_rate + opt.bad_size_rate) {
        auto gp = gen_packet_detailed(g, cp.spec, gen_seed);
        std::vector<std::size_t> spots;
        for (std::size_t i = 0; i < cp.spec.header_sequence.size(); ++i) {
            const auto& h = g.header_of(cp.spec.header_sequence[i].state);
            std::mt19937_64 probe(0);
            if (h.size_expr && invalid_size_value(h, probe)) spots.push_back(i);
        }
        if (!spots.empty()) {
            const auto i = spots[std::uniform_int_distribution<std::size_t>(0, spots.size() - 1)(rng)];
            const auto& h = g.header_of(cp.spec.header_sequence[i].state);
            const auto bad = *invalid_size_value(h, rng);
            BitVec bits = BitVec::from_bytes(gp.bytes, gp.bytes.size() * 8);
            bits.set_field(gp.header_offsets_bits[i] + *h.field_offset(h.size_expr->field),
                           h.find_field(h.size_expr->field)->width_bits, bad);
            gp.bytes = bits.to_bytes();
            cp.mutation = Mutation::BadSize;
        }
        cp.bytes = std::move(gp.bytes);
        return cp;
    }

    cp.bytes = gen_packet(g, cp.spec, gen_seed);
    return cp;
}

}  // namespace

std::vector<CorpusPacket> generate_corpus(const ParseGraph& g, std::size_t count, std::uint64_t seed,
                                          const CorpusOptions& options) {
    std::vector<CorpusPacket> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix_seed(seed, i));
        out.push_back(make_corpus_packet(g, rng, options));
    }
    return out;
}

PacketSpec packet_spec_from_json(std::string_view text) {
    PacketSpec spec;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& h : j.at("headers")) {
            HeaderChoice c;
            c.state = h.at("state").get<std::string>();
            if (auto it = h.find("fields"); it != h.end()) {
                for (const auto& [name, v] : it->items()) {
                    c.overrides[name] = v.is_string() ? std::stoull(v.get<std::string>(), nullptr, 0)
                                                      : v.get<std::uint64_t>();
                }
            }
            spec.header_sequence.push_back(std::move(c));
        }
        spec.payload_len_bytes = j.value("payload_len", std::size_t{0});
        spec.reject_last = j.value("reject_last", false);
    } catch (const std::exception& e) {
        throw GenerationError(std::string("bad packet spec: ") + e.what());
    }
    return spec;
}

std::string packet_spec_to_json(const PacketSpec& spec) {
    nlohmann::ordered_json j;
    j["headers"] = nlohmann::ordered_json::array();
    for (const auto& c : spec.header_sequence) {
        nlohmann::ordered_json h;
        h["state"] = c.state;
        nlohmann::ordered_json fields = nlohmann::ordered_json::object();
        for (const auto& [k, v] : c.overrides) fields[k] = v;
        h["fields"] = std::move(fields);
        j["headers"].push_back(std::move(h));
    }
    j["payload_len"] = spec.payload_len_bytes;
    j["reject_last"] = spec.reject_last;
    return j.dump();
}

// ---------------------------------------------------------------------------
// pcap

namespace {

constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4;
constexpr std::uint32_t kPcapMagicSwapped = 0xd4c3b2a1;
constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::size_t kFileHeaderSize = 24;
constexpr std::size_t kRecordHeaderSize = 16;

std::uint32_t load_le(const std::uint8_t* p) {
    return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

std::uint32_t load_be(const std::uint8_t* p) {
    return std::uint32_t{p[3]} | std::uint32_t{p[2]} << 8 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[0]} << 24;
}

void store(std::vector<std::uint8_t>& out, std::uint32_t v, bool big_endian, std::size_t width = 4) {
    for (std::size_t i = 0; i < width; ++i) {
        const std::size_t shift = big_endian ? 8 * (width - 1 - i) : 8 * i;
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

}  // namespace

PcapError::PcapError(std::uint64_t offset, const std::string& message)
    : std::runtime_error("pcap offset " + std::to_string(offset) + ": " + message), offset_(offset) {}

PcapReader::PcapReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw PcapError(0, "cannot open '" + path + "'");
    std::uint8_t hdr[kFileHeaderSize];
    in_.read(reinterpret_cast<char*>(hdr), kFileHeaderSize);
    if (static_cast<std::size_t>(in_.gcount()) != kFileHeaderSize) throw PcapError(0, "truncated file header");
    const std::uint32_t magic = load_le(hdr);
    if (magic == kPcapMagic) {
        swapped_ = false;
    } else if (magic == kPcapMagicSwapped) {
        swapped_ = true;
    } else {
        throw PcapError(0, "bad magic number");
    }
    if (u32(hdr + 20) != kLinkEthernet) throw PcapError(20, "link type is not Ethernet");
    offset_ = kFileHeaderSize;
}

std::uint32_t PcapReader::u32(const std::uint8_t* p) const { return swapped_ ? load_be(p) : load_le(p); }

std::optional<PcapRecord> PcapReader::next() {
    std::uint8_t hdr[kRecordHeaderSize];
    in_.read(reinterpret_cast<char*>(hdr), kRecordHeaderSize);
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got == 0) return std::nullopt;
    if (got != kRecordHeaderSize) throw PcapError(offset_, "truncated record header");

    PcapRecord r;
    r.ts_sec = u32(hdr);
    r.ts_usec = u32(hdr + 4);
    const std::uint32_t incl_len = u32(hdr + 8);
    r.orig_len = u32(hdr + 12);
    if (incl_len > (1U << 26)) throw PcapError(offset_, "implausible captured length");
    r.bytes.resize(incl_len);
    in_.read(reinterpret_cast<char*>(r.bytes.data()), incl_len);
    if (static_cast<std::uint32_t>(in_.gcount()) != incl_len) {
        throw PcapError(offset_, "truncated record body");
    }
    offset_ += kRecordHeaderSize + incl_len;
    return r;
}

std::vector<PcapRecord> read_pcap(const std::string& path) {
    PcapReader reader(path);
    std::vector<PcapRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    return out;
}

void write_pcap(const std::string& path, const std::vector<PcapRecord>& records, bool swapped) {
    std::vector<std::uint8_t> buf;
    store(buf, kPcapMagic, swapped);
    store(buf, 2, swapped, 2);
    store(buf, 4, swapped, 2);
    store(buf, 0, swapped);
    store(buf, 0, swapped);
    store(buf, 65535, swapped);
    store(buf, kLinkEthernet, swapped);
    for (const auto& r : records) {
        store(buf, r.ts_sec, swapped);
        store(buf, r.ts_usec, swapped);
        store(buf, static_cast<std::uint32_t>(r.bytes.size()), swapped);
        store(buf, r.orig_len ? r.orig_len : static_cast<std::uint32_t>(r.bytes.size()), swapped);
        buf.insert(buf.end(), r.bytes.begin(), r.bytes.end());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PcapError(0, "cannot create '" + path + "'");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace pipeparse
