#include "forecastad/context.hpp"

#include <sstream>

namespace forecastad {

std::string to_string(Segment s) {
    switch (s) {
        case Segment::S: return "S";
        case Segment::M: return "M";
        case Segment::E: return "E";
        default: return "unassigned";
    }
}

std::string to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::None: return "none";
        case AnomalyKind::FreezeStreak: return "freeze_streak";
        case AnomalyKind::ColdPatch: return "cold_patch";
        case AnomalyKind::GlobalDrop: return "global_drop";
        case AnomalyKind::HotSpot: return "hot_spot";
        case AnomalyKind::ScheduleReset: return "schedule_reset";
    }
    return "unknown";
}

std::string to_string(SetupTag t) { return t == SetupTag::Tr1 ? "Tr#1" : "Tr#2"; }

SetupTag setup_tag_from_string(const std::string& s) {
    if (s == "Tr#1" || s == "Tr1") return SetupTag::Tr1;
    if (s == "Tr#2" || s == "Tr2") return SetupTag::Tr2;
    throw std::invalid_argument("unknown setup tag: " + s);
}

void DaySequence::validate() const {
    for (size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].t > samples[i - 1].t)) {
            std::ostringstream os;
            os << "day " << day_id << ": timestamps not strictly increasing at index " << i
               << " (t[" << i - 1 << "]=" << samples[i - 1].t << ", t[" << i << "]=" << samples[i].t
               << ")";
            throw std::runtime_error(os.str());
        }
    }
}

std::vector<TimeOffsets> compute_time_offsets(const DaySequence& day, double epsilon) {
    if (day.empty()) throw std::invalid_argument("compute_time_offsets: empty day");
    day.validate();
    std::vector<TimeOffsets> out(day.size());
    out[0] = {epsilon, epsilon};
    const double t0 = day.samples[0].t;
    for (size_t i = 1; i < day.size(); ++i) {
        out[i].tau = day.samples[i].t - day.samples[i - 1].t;
        out[i].delta = day.samples[i].t - t0;
    }
    return out;
}

std::vector<ContextWindow> build_context_windows(const DaySequence& day, int K, double epsilon) {
    if (K < 1) throw std::invalid_argument("build_context_windows: K must be >= 1");
    if (day.empty()) return {};
    const auto offsets = compute_time_offsets(day, epsilon);

    std::vector<ContextWindow> windows;
    windows.reserve(day.size());
    for (int i = 0; i < static_cast<int>(day.size()); ++i) {
        ContextWindow w;
        w.day = &day;
        w.target = {i, offsets[i], false};
        w.context.reserve(K);
        const int available = i;
        for (int k = K - available; k > 0; --k)
            w.context.push_back({0, offsets[0], true});
        for (int j = std::max(0, i - K); j < i; ++j)
            w.context.push_back({j, offsets[j], false});
        windows.push_back(std::move(w));
    }
    return windows;
}

}  // namespace forecastad
