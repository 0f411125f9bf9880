#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "ncf/sim.hpp"

namespace ncf::sim {

inline constexpr const char* kTraceCsvHeader =
    "t,x_vut,y_vut,v_vut,a_vut,yaw_rate,x_tgt,v_tgt,gap,ttc,aeb_fired";

namespace detail {
inline void append_num(std::string& out, double v) {
    if (v == 0.0) v = 0.0;  // fold negative zero
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += buf;
}
}  // namespace detail

/// Column layout mirrors the signals recorded during real vehicle tests.
/// The ttc field is empty while the vehicles are not closing.
inline std::string to_csv(const Trace& trace) {
    std::string out(kTraceCsvHeader);
    out += '\n';
    for (const auto& s : trace.samples) {
        detail::append_num(out, s.vut.t);
        out += ',';
        detail::append_num(out, s.vut.x);
        out += ',';
        detail::append_num(out, s.vut.y);
        out += ',';
        detail::append_num(out, s.vut.v);
        out += ',';
        detail::append_num(out, s.vut.a);
        out += ',';
        detail::append_num(out, s.vut.yaw_rate);
        out += ',';
        detail::append_num(out, s.target.x);
        out += ',';
        detail::append_num(out, s.target.v);
        out += ',';
        detail::append_num(out, s.target.x - s.vut.x);
        out += ',';
        if (s.ttc_s) detail::append_num(out, *s.ttc_s);
        out += ',';
        out += s.aeb_fired ? '1' : '0';
        out += '\n';
    }
    return out;
}

inline void write_csv(std::ostream& os, const Trace& trace) { os << to_csv(trace); }

}  // namespace ncf::sim
