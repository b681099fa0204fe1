#include "pipeparse/pipeline_sim.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <utility>

namespace pipeparse {

std::vector<BusWord> segment_packet(std::span<const std::uint8_t> bytes, std::uint32_t packet_id,
                                    std::uint32_t bus_width) {
    if (bytes.empty()) throw ProtocolError("empty packet");
    const std::size_t word_bytes = bus_width / 8;
    std::vector<BusWord> words;
    for (std::size_t off = 0; off < bytes.size(); off += word_bytes) {
        const std::size_t n = std::min(word_bytes, bytes.size() - off);
        BusWord w;
        w.data = BitVec::from_bytes(bytes.subspan(off, n), bus_width);
        w.start = off == 0;
        w.end = off + n == bytes.size();
        w.valid = true;
        w.packet_id = packet_id;
        w.valid_bits = static_cast<std::uint32_t>(n * 8);
        words.push_back(std::move(w));
    }
    return words;
}

void EngineState::reset_packet() {
    received_bits = 0;
    received_words = 0;
    phv_accum = BitVec(phv_accum.width());
    header_size_latched.reset();
    next_header = kPendingId;
    key_resolved = false;
    key_exception = false;
    header_valid = false;
    done = false;
    failed = false;
}

HeaderId EngineState::next_header_out() const {
    if (failed) return kRejectId;
    return key_resolved ? next_header : kPendingId;
}

TransitionOutput state_transition_step(const HeaderLayout& layout, std::uint32_t bus_width, EngineState& st,
                                       const BusWord& w, HeaderId next_header_in) {
    TransitionOutput out;
    out.valid_header = next_header_in == layout.this_header;
    if (!out.valid_header) {
        out.next_header_out = next_header_in;
        return out;
    }
    st.header_valid = true;

    if (!st.key_resolved && !st.failed) {
        if (!layout.has_key) {
            st.next_header = layout.default_next;
            st.key_resolved = true;
        } else if (w.valid && st.received_words == layout.key_word_index) {
            const std::uint32_t loc = layout.key_location_bits % bus_width;
            // a key cut short by the end of the packet is left to truncation
            if (w.valid_bits >= loc + layout.key_width_bits) {
                const BitVec shifted = w.data << loc;
                const std::uint64_t key = shifted.field(0, layout.key_width_bits) & layout.key_mask;
                HeaderId next = layout.default_next;
                for (const auto& m : layout.match_table) {
                    if (m.value == key) {
                        next = m.next;
                        break;
                    }
                }
                st.next_header = next;
                st.key_resolved = true;
                st.key_exception = next == kRejectId;
            }
        }
    }
    out.next_header_out = st.next_header_out();
    out.next_header_valid = st.key_resolved;
    out.header_exception = st.key_exception;
    return out;
}

ExtractionOutput header_extraction_step(const HeaderLayout& layout, std::uint32_t bus_width, EngineState& st,
                                        const BusWord& w, bool valid_header) {
    ExtractionOutput out;
    out.header_size = st.header_size_latched;
    if (!valid_header || !w.valid) return out;

    const std::uint32_t index = st.received_words++;
    st.received_bits += w.valid_bits;
    if (st.done || st.failed) return out;

    const std::size_t accum_width = layout.roms.extract_shifts.size() * bus_width;
    if (st.phv_accum.width() != accum_width) st.phv_accum = BitVec(accum_width);
    if (index < layout.roms.extract_shifts.size()) {
        st.phv_accum.deposit(w.data, layout.roms.extract_shifts[index]);
    }

    // SizeDetector: hardwired for fixed headers, LUT for variable ones
    if (!st.header_size_latched) {
        if (layout.fixed_size_bits) {
            st.header_size_latched = *layout.fixed_size_bits;
        } else if (index == layout.size_field_word_index) {
            const std::uint32_t loc = layout.size_field_offset_bits % bus_width;
            if (w.valid_bits >= loc + layout.size_field_width_bits) {
                const std::uint64_t value = w.data.field(loc, layout.size_field_width_bits);
                out.header_size_field = value;
                const auto it = layout.size_lut->find(value);
                if (it == layout.size_lut->end()) {
                    out.size_exception = true;
                    st.failed = true;
                    return out;
                }
                st.header_size_latched = it->second;
            }
        }
    }
    out.header_size = st.header_size_latched;
    if (st.header_size_latched && st.received_bits >= *st.header_size_latched) {
        st.done = true;
        out.header_done = true;
    }
    return out;
}

AlignmentOutput pipeline_alignment_step(const HeaderLayout& layout, std::uint32_t bus_width, EngineState& st,
                                        const std::optional<BusWord>& w) {
    AlignmentOutput out;
    if (const auto& d = st.delay_reg; d && !st.delay_owned) {
        out.word = *d;
    } else if (d) {
        out.driven = true;
        BusWord o = *d;
        o.next_header = st.next_header_out();
        auto drop = [&] {
            o.valid = false;
            o.valid_bits = 0;
            o.data = BitVec(bus_width);
        };
        const auto size = st.header_size_latched;
        if (!d->valid || !size || st.failed) {
            drop();
        } else if (std::uint64_t{st.delay_index + 1} * bus_width <= *size) {
            // whole word still inside this header
            drop();
        } else {
            const auto r_it = layout.roms.align_right.find(*size);
            const auto l_it = layout.roms.align_left.find(*size);
            if (r_it == layout.roms.align_right.end() || l_it == layout.roms.align_left.end()) {
                drop();
            } else {
                const std::uint32_t right = r_it->second;
                const std::uint32_t left = l_it->second;
                const bool follow = w && w->valid && !w->start && w->packet_id == d->packet_id;
                BitVec data = d->data << right;
                std::uint32_t bits = d->valid_bits > right ? d->valid_bits - right : 0;
                if (right != 0 && follow) {
                    data |= w->data >> left;
                    if (d->valid_bits == bus_width) bits += std::min(w->valid_bits, right);
                }
                o.data = std::move(data);
                o.valid_bits = bits;
                o.valid = bits > 0;
                if (!o.valid) o.data = BitVec(bus_width);
            }
        }
        out.word = std::move(o);
    }
    st.delay_reg = w;
    return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows, const PipelinePlan& plan) {
    std::ostringstream os;
    os << "cycle,level,engine,valid_header,next_header,done\n";
    for (const auto& r : rows) {
        os << r.cycle << "," << r.level << "," << r.engine << "," << (r.valid_header ? 1 : 0) << ","
           << plan.header_name(r.next_header) << "," << (r.done ? 1 : 0) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------

PipelineInstance::PipelineInstance(const PipelinePlan& plan) : plan_(&plan) {
    for (const auto& ids : plan.levels) {
        Level level;
        for (auto id : ids) level.engines.push_back(Engine{&plan.engine(id), {}});
        levels_.push_back(std::move(level));
    }
}

std::vector<TraceRow> PipelineInstance::take_trace() { return std::exchange(trace_, {}); }

std::optional<BusWord> PipelineInstance::clock_level(std::size_t index, const std::optional<BusWord>& in,
                                                     ClockResult& result) {
    const std::uint32_t bus = plan_->bus_width_bits;
    auto& level = levels_[index];

    // alignment runs on the register values from before the clock edge
    std::optional<BusWord> bypass;
    std::optional<BusWord> driven;
    for (auto& e : level.engines) {
        auto a = pipeline_alignment_step(*e.layout, bus, e.state, in);
        if (a.driven) {
            if (driven) throw std::logic_error("two engines drive one level");
            driven = std::move(a.word);
        } else if (!bypass) {
            bypass = std::move(a.word);
        }
    }

    for (auto& e : level.engines) {
        auto& st = e.state;
        const auto& layout = *e.layout;
        bool valid_header = false;
        if (in) {
            if (in->start) st.reset_packet();
            valid_header = in->next_header == layout.this_header;
            const std::uint32_t index = st.received_words;
            state_transition_step(layout, bus, st, *in, in->next_header);
            const auto ex = header_extraction_step(layout, bus, st, *in, valid_header);

            if (valid_header) {
                auto emit_phv = [&](bool valid) {
                    Phv p;
                    p.header_id = layout.this_header;
                    p.header = layout.name;
                    p.packet_id = in->packet_id;
                    p.valid = valid;
                    if (valid) {
                        p.bit_count = *st.header_size_latched;
                        p.bits = st.phv_accum.slice(0, p.bit_count);
                    }
                    result.phvs.push_back(std::move(p));
                };
                auto raise = [&](ExceptionKind kind) {
                    result.exceptions.push_back({in->packet_id, kind, layout.this_header, layout.name});
                };
                if (ex.size_exception) {
                    emit_phv(false);
                    raise(ExceptionKind::BadSize);
                } else if (ex.header_done) {
                    emit_phv(true);
                    if (st.key_exception) raise(ExceptionKind::UnknownKey);
                }
                if (in->end && !st.done && !st.failed) {
                    st.failed = true;
                    emit_phv(false);
                    raise(ExceptionKind::Truncated);
                }
            }
            st.delay_owned = valid_header;
            st.delay_index = index;
        } else {
            st.delay_owned = false;
        }
        if (tracing_) {
            trace_.push_back({cycle_, index, layout.name, valid_header, st.next_header_out(), st.done});
        }
    }
    return driven ? driven : bypass;
}

ClockResult PipelineInstance::clock(std::optional<BusWord> in) {
    ClockResult result;
    if (in) {
        if (in->data.width() != plan_->bus_width_bits) throw ProtocolError("bus word width mismatch");
        if (in->start) {
            if (in_packet_) throw ProtocolError("packet start before the previous packet ended");
            in_packet_ = true;
        } else if (!in_packet_) {
            throw ProtocolError("bus word outside a packet");
        }
        if (in->end) in_packet_ = false;
        in->next_header = plan_->root();
    } else if (in_packet_) {
        throw ProtocolError("idle cycle inside a packet");
    }

    std::optional<BusWord> w = std::move(in);
    for (std::size_t i = 0; i < levels_.size(); ++i) w = clock_level(i, w, result);
    result.out = std::exchange(output_reg_, std::move(w));

    if (result.out && result.out->end && result.out->next_header != kEndId &&
        result.out->next_header != kRejectId) {
        const auto id = result.out->next_header;
        result.exceptions.push_back({result.out->packet_id, ExceptionKind::Unparsed, id, plan_->header_name(id)});
    }
    ++cycle_;
    return result;
}

namespace {

void absorb(std::map<std::uint32_t, PacketResult>& acc, ClockResult& r) {
    for (auto& p : r.phvs) {
        auto& pr = acc[p.packet_id];
        pr.packet_id = p.packet_id;
        pr.phvs.push_back(std::move(p));
    }
    for (auto& e : r.exceptions) {
        auto& pr = acc[e.packet_id];
        pr.packet_id = e.packet_id;
        if (!pr.exception) pr.exception = std::move(e);
    }
}

}  // namespace

PacketResult PipelineInstance::parse_packet(std::span<const std::uint8_t> bytes, std::uint32_t packet_id) {
    if (in_packet_) throw ProtocolError("parse_packet on a busy pipeline");
    std::map<std::uint32_t, PacketResult> acc;
    for (auto& w : segment_packet(bytes, packet_id, plan_->bus_width_bits)) {
        auto r = clock(std::move(w));
        absorb(acc, r);
    }
    for (std::uint32_t i = 0; i < plan_->depth_cycles; ++i) {
        auto r = clock(std::nullopt);
        absorb(acc, r);
    }
    PacketResult out;
    out.packet_id = packet_id;
    if (auto it = acc.find(packet_id); it != acc.end()) out = std::move(it->second);
    sort_phvs(out.phvs);
    return out;
}

SimulationRun simulate_packets(const PipelinePlan& plan, const std::vector<std::vector<std::uint8_t>>& packets,
                               bool trace, std::uint32_t first_packet_id) {
    SimulationRun run;
    if (packets.empty()) return run;

    PipelineInstance pipe(plan);
    pipe.enable_trace(trace);
    std::map<std::uint32_t, PacketResult> acc;
    std::map<std::uint32_t, PacketTiming> timing;

    const std::uint32_t last_id = first_packet_id + static_cast<std::uint32_t>(packets.size()) - 1;
    bool last_out = false;
    auto step = [&](std::optional<BusWord> w) {
        if (w && w->start) timing[w->packet_id] = {w->packet_id, pipe.cycle(), 0};
        auto r = pipe.clock(std::move(w));
        if (r.out && r.out->start) timing[r.out->packet_id].first_out_cycle = pipe.cycle() - 1;
        if (r.out && r.out->end && r.out->packet_id == last_id) last_out = true;
        absorb(acc, r);
    };

    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto id = first_packet_id + static_cast<std::uint32_t>(i);
        for (auto& w : segment_packet(packets[i], id, plan.bus_width_bits)) {
            ++run.words_total;
            step(std::move(w));
        }
    }
    for (std::uint32_t drain = 0; !last_out; ++drain) {
        if (drain > plan.depth_cycles) throw std::logic_error("pipeline failed to drain");
        step(std::nullopt);
    }

    run.cycles_total = pipe.cycle();
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto id = first_packet_id + static_cast<std::uint32_t>(i);
        PacketResult r;
        r.packet_id = id;
        if (auto it = acc.find(id); it != acc.end()) r = std::move(it->second);
        sort_phvs(r.phvs);
        run.results.push_back(std::move(r));
        run.timing.push_back(timing.at(id));
    }
    run.trace = pipe.take_trace();
    return run;
}

}  // namespace pipeparse
