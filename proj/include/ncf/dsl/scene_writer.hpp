#pragma once

#include <algorithm>
#include <charconv>
#include <string>
#include <vector>

#include "ncf/dsl/resolver.hpp"

namespace ncf::dsl {

namespace detail {

// shortest round-trip representation, byte-stable across runs
inline std::string canonical_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string render_value(const Value& v) {
    switch (v.kind) {
        case Value::Kind::string:
        case Value::Kind::identifier:
            return v.text;
        case Value::Kind::number:
            return canonical_number(v.number);
        case Value::Kind::boolean:
            return v.boolean ? "true" : "false";
        case Value::Kind::tuple: {
            std::string out = "(";
            for (std::size_t i = 0; i < v.items.size(); ++i) {
                if (i) out += ",";
                out += render_value(v.items[i]);
            }
            out += ")";
            return out;
        }
    }
    return {};
}

}  // namespace detail

/// Emit the scene document for a resolved scenario. The dialect is this
/// repo's own (documented in the README); output is byte-stable: players
/// sorted by name, misc entries by key, attributes in fixed order.
inline std::string generate_scene(const ResolvedScenario& rs) {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<Scene name=\"" + detail::xml_escape(rs.name) + "\">\n";
    out += "  <Layout database=\"" + detail::xml_escape(rs.layout_database) + "\"/>\n";

    std::vector<const Player*> players;
    for (const auto& p : rs.players) players.push_back(&p);
    std::sort(players.begin(), players.end(),
              [](const Player* a, const Player* b) { return a->name < b->name; });

    out += "  <Players>\n";
    for (const Player* p : players) {
        out += "    <Player control=\"";
        out += p->control == ControlMode::external ? "external" : "internal";
        out += "\" driver=\"" + detail::xml_escape(p->driver);
        out += "\" name=\"" + detail::xml_escape(p->name);
        out += "\" pose=\"" + detail::canonical_number(p->initial_pose.x_m) + " " +
               detail::canonical_number(p->initial_pose.y_m) + " " +
               detail::canonical_number(p->initial_pose.heading_rad);
        out += "\" relative=\"";
        out += p->initial_pose.relative ? "true" : "false";
        out += "\" type=\"" + detail::xml_escape(p->type) + "\"/>\n";
    }
    out += "  </Players>\n";

    auto misc = rs.misc;
    std::sort(misc.begin(), misc.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    out += "  <Misc>\n";
    for (const auto& [key, value] : misc)
        out += "    <Entry key=\"" + detail::xml_escape(key) + "\" value=\"" +
               detail::xml_escape(detail::render_value(value)) + "\"/>\n";
    out += "  </Misc>\n";
    out += "</Scene>\n";
    return out;
}

}  // namespace ncf::dsl
