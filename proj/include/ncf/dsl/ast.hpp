#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ncf::dsl {

struct SourcePos {
    int line = 1;
    int col = 1;
};

/// A scalar or tuple value on the right-hand side of `key = value`.
struct Value {
    enum class Kind { string, number, boolean, identifier, tuple };

    Kind kind = Kind::identifier;
    std::string text;          // string/identifier payload
    double number = 0.0;
    bool boolean = false;
    std::vector<Value> items;  // tuple elements (numbers and booleans)
    SourcePos pos;

    static Value make_string(std::string s) { Value v; v.kind = Kind::string; v.text = std::move(s); return v; }
    static Value make_number(double n) { Value v; v.kind = Kind::number; v.number = n; return v; }
    static Value make_bool(bool b) { Value v; v.kind = Kind::boolean; v.boolean = b; return v; }
    static Value make_identifier(std::string s) { Value v; v.kind = Kind::identifier; v.text = std::move(s); return v; }
    static Value make_tuple(std::vector<Value> items) { Value v; v.kind = Kind::tuple; v.items = std::move(items); return v; }
};

inline const char* kind_name(Value::Kind k) {
    switch (k) {
        case Value::Kind::string: return "string";
        case Value::Kind::number: return "number";
        case Value::Kind::boolean: return "boolean";
        case Value::Kind::identifier: return "identifier";
        case Value::Kind::tuple: return "tuple";
    }
    return "?";
}

struct Entry {
    std::string key;
    Value value;
    SourcePos pos;
};

/// A named block `Name { ... }`, optionally qualified as in
/// `Player VehicleUnderTest { ... }`. Children are unique per
/// (name, qualifier) within one parent.
struct Block {
    std::string name;
    std::string qualifier;
    std::vector<Entry> entries;
    std::vector<Block> children;
    SourcePos pos;

    const Entry* find_entry(const std::string& key) const {
        for (const auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
    Entry* find_entry(const std::string& key) {
        for (auto& e : entries)
            if (e.key == key) return &e;
        return nullptr;
    }
    const Block* find_child(const std::string& name_, const std::string& qualifier_ = {}) const {
        for (const auto& b : children)
            if (b.name == name_ && b.qualifier == qualifier_) return &b;
        return nullptr;
    }
    Block* find_child(const std::string& name_, const std::string& qualifier_ = {}) {
        for (auto& b : children)
            if (b.name == name_ && b.qualifier == qualifier_) return &b;
        return nullptr;
    }
};

/// One parsed `scenario Name [extends Parent] { ... }` unit.
struct DslAst {
    std::string scenario_name;
    std::optional<std::string> parent_name;
    Block root;  // unnamed container for the scenario body
    SourcePos pos;
};

}  // namespace ncf::dsl
