#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ncf/dsl/ast.hpp"
#include "ncf/errors.hpp"

namespace ncf::dsl {

class ResolveError : public Error {
public:
    using Error::Error;
};

enum class ControlMode { external, internal };

struct Pose {
    double x_m = 0.0;
    double y_m = 0.0;
    double heading_rad = 0.0;
    bool relative = false;
};

struct Player {
    std::string name;
    std::string driver;
    std::string type;
    ControlMode control = ControlMode::internal;
    Pose initial_pose;
};

/// A fully merged scenario: the VUT and other players with their initial
/// poses, the layout reference, and all remaining entries preserved
/// verbatim under dotted paths.
struct ResolvedScenario {
    std::string name;
    std::string layout_database;
    std::vector<Player> players;
    std::vector<std::pair<std::string, Value>> misc;

    const Player& vut() const {
        for (const auto& p : players)
            if (p.control == ControlMode::external) return p;
        throw ResolveError("scenario '" + name + "' has no externally controlled player");
    }
};

using ScenarioRegistry = std::map<std::string, DslAst>;

namespace detail {

inline void merge_block(Block& into, const Block& from) {
    for (const auto& e : from.entries) {
        if (Entry* existing = into.find_entry(e.key)) {
            if (existing->value.kind != e.value.kind)
                throw ResolveError("type mismatch overriding '" + e.key + "': " +
                                   kind_name(existing->value.kind) + " overridden by " +
                                   kind_name(e.value.kind));
            existing->value = e.value;
        } else {
            into.entries.push_back(e);
        }
    }
    for (const auto& child : from.children) {
        if (Block* existing = into.find_child(child.name, child.qualifier))
            merge_block(*existing, child);
        else
            into.children.push_back(child);
    }
}

inline std::string join_path(const std::string& prefix, const Block& b) {
    std::string p = prefix.empty() ? b.name : prefix + "." + b.name;
    if (!b.qualifier.empty()) p += "[" + b.qualifier + "]";
    return p;
}

inline void collect_misc(const Block& block, const std::string& prefix,
                         const std::set<std::string>& consumed,
                         std::vector<std::pair<std::string, Value>>& out) {
    for (const auto& e : block.entries) {
        const std::string path = prefix.empty() ? e.key : prefix + "." + e.key;
        if (!consumed.count(path)) out.emplace_back(path, e.value);
    }
    for (const auto& child : block.children)
        collect_misc(child, join_path(prefix, child), consumed, out);
}

inline Pose pose_from_tuple(const Value& v, const std::string& player) {
    if (v.kind != Value::Kind::tuple || v.items.size() != 4)
        throw ResolveError("PosAbsolute of player '" + player + "' must be a 4-tuple (x, y, heading, relative)");
    for (int i = 0; i < 3; ++i)
        if (v.items[static_cast<std::size_t>(i)].kind != Value::Kind::number)
            throw ResolveError("PosAbsolute of player '" + player + "': element " + std::to_string(i + 1) + " must be a number");
    if (v.items[3].kind != Value::Kind::boolean)
        throw ResolveError("PosAbsolute of player '" + player + "': element 4 must be a boolean");
    return {v.items[0].number, v.items[1].number, v.items[2].number, v.items[3].boolean};
}

}  // namespace detail

/// Merge the full `extends` chain of `child` (root ancestor first, child
/// last) and validate the result. Child leaf entries override parent
/// entries at the same path; blocks merge recursively keyed by
/// (block name, player name).
inline ResolvedScenario resolve(const DslAst& child, const ScenarioRegistry& registry = {}) {
    // ancestry, child first
    std::vector<const DslAst*> chain{&child};
    std::set<std::string> seen{child.scenario_name};
    const DslAst* cur = &child;
    while (cur->parent_name) {
        const auto it = registry.find(*cur->parent_name);
        if (it == registry.end())
            throw ResolveError("unknown parent scenario '" + *cur->parent_name + "' of '" +
                               cur->scenario_name + "'");
        if (!seen.insert(it->first).second)
            throw ResolveError("cyclic extends chain involving '" + it->first + "'");
        cur = &it->second;
        chain.push_back(cur);
    }

    Block merged = chain.back()->root;  // root ancestor
    for (auto it = chain.rbegin() + 1; it != chain.rend(); ++it)
        detail::merge_block(merged, (*it)->root);

    ResolvedScenario rs;
    rs.name = child.scenario_name;

    const Block* layout = merged.find_child("Layout");
    const Entry* database = layout ? layout->find_entry("Database") : nullptr;
    if (!database)
        throw ResolveError("missing required key Layout.Database in scenario '" + rs.name + "'");
    if (database->value.kind != Value::Kind::string)
        throw ResolveError("Layout.Database must be a string");
    rs.layout_database = database->value.text;

    std::set<std::string> consumed{"Layout.Database"};

    int external_count = 0;
    if (const Block* traffic = merged.find_child("TrafficElements")) {
        for (const Block& b : traffic->children) {
            if (b.name != "Player") continue;
            Player p;
            p.name = b.qualifier;
            const std::string base = "TrafficElements.Player[" + p.name + "]";
            if (const Block* desc = b.find_child("Description")) {
                if (const Entry* e = desc->find_entry("Driver")) {
                    p.driver = e->value.text;
                    consumed.insert(base + ".Description.Driver");
                }
                if (const Entry* e = desc->find_entry("Type")) {
                    p.type = e->value.text;
                    consumed.insert(base + ".Description.Type");
                }
                if (const Entry* e = desc->find_entry("Control")) {
                    if (e->value.kind != Value::Kind::identifier ||
                        (e->value.text != "external" && e->value.text != "internal"))
                        throw ResolveError("Control of player '" + p.name + "' must be external or internal");
                    p.control = e->value.text == "external" ? ControlMode::external : ControlMode::internal;
                    consumed.insert(base + ".Description.Control");
                }
            }
            const Block* init = b.find_child("Init");
            const Entry* pos = init ? init->find_entry("PosAbsolute") : nullptr;
            if (!pos)
                throw ResolveError("missing required key Init.PosAbsolute for player '" + p.name +
                                   "' in scenario '" + rs.name + "'");
            p.initial_pose = detail::pose_from_tuple(pos->value, p.name);
            consumed.insert(base + ".Init.PosAbsolute");

            if (p.control == ControlMode::external) ++external_count;
            rs.players.push_back(std::move(p));
        }
    }
    if (external_count != 1)
        throw ResolveError("scenario '" + rs.name + "' must designate exactly one externally controlled player, found " +
                           std::to_string(external_count));

    detail::collect_misc(merged, "", consumed, rs.misc);
    return rs;
}

}  // namespace ncf::dsl
