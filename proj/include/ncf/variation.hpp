#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ncf/errors.hpp"

namespace ncf::vary {

/// One permitted interaction with the vehicle under test during the
/// variation period. Lateral nudges shift the imposed lateral offset,
/// speed interactions act on the speed program.
enum class InteractionKind {
    lateral_nudge_left,
    lateral_nudge_right,
    lateral_hold,
    speed_hold,
    speed_increase,
};

struct Interaction {
    InteractionKind kind = InteractionKind::lateral_hold;
    // meters for lateral nudges, m/s^2 for speed_increase, unused otherwise
    double magnitude = 0.0;

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

inline std::string mnemonic(InteractionKind k) {
    switch (k) {
        case InteractionKind::lateral_nudge_left: return "lat-left";
        case InteractionKind::lateral_nudge_right: return "lat-right";
        case InteractionKind::lateral_hold: return "lat-hold";
        case InteractionKind::speed_hold: return "spd-hold";
        case InteractionKind::speed_increase: return "spd-inc";
    }
    return "?";
}

inline std::optional<InteractionKind> kind_from_mnemonic(const std::string& s) {
    if (s == "lat-left") return InteractionKind::lateral_nudge_left;
    if (s == "lat-right") return InteractionKind::lateral_nudge_right;
    if (s == "lat-hold") return InteractionKind::lateral_hold;
    if (s == "spd-hold") return InteractionKind::speed_hold;
    if (s == "spd-inc") return InteractionKind::speed_increase;
    return std::nullopt;
}

/// The variation graph over [T_0, T_End]: `resolution` decision points,
/// each choosing one element of `interaction_set`. A complete choice
/// sequence is one path through the graph.
struct VariationSpec {
    double t0_ttc_s = 4.0;           // TTC at test start
    int resolution = 1;              // interaction points in the variation period
    std::vector<Interaction> interaction_set;
    std::uint64_t seed = 0;

    void validate() const {
        if (resolution < 1) throw ConfigError("variation resolution must be >= 1");
        if (interaction_set.empty()) throw ConfigError("interaction set must be non-empty");
    }
};

enum class PathProvenance { exhaustive, boundary, sampled };

struct VariationPath {
    std::vector<Interaction> steps;   // length == spec.resolution
    PathProvenance provenance = PathProvenance::exhaustive;
    std::uint64_t seed = 0;           // sampled only
    std::size_t index = 0;            // sampled only

    friend bool operator==(const VariationPath& a, const VariationPath& b) {
        return a.steps == b.steps;
    }
};

class CombinatorialOverflow : public Error {
public:
    CombinatorialOverflow(std::uint64_t count, std::uint64_t limit)
        : Error("path count " + std::to_string(count) + " exceeds limit " +
                std::to_string(limit) + "; use sample_paths instead") {}
    explicit CombinatorialOverflow(std::uint64_t limit)
        : Error("path count exceeds limit " + std::to_string(limit) +
                "; use sample_paths instead") {}
};

inline constexpr std::uint64_t kDefaultEnumerationLimit = 100000;

/// b^d with saturation at `cap`. Returns nullopt once the product exceeds cap.
inline std::optional<std::uint64_t> checked_pow(std::uint64_t base, int exp, std::uint64_t cap) {
    std::uint64_t r = 1;
    for (int i = 0; i < exp; ++i) {
        if (base != 0 && r > cap / base) return std::nullopt;
        r *= base;
        if (r > cap) return std::nullopt;
    }
    return r;
}

/// All |interaction_set|^resolution paths in lexicographic interaction order
/// (set order per digit, first step most significant).
inline std::vector<VariationPath> enumerate_paths(const VariationSpec& spec,
                                                  std::uint64_t limit = kDefaultEnumerationLimit) {
    spec.validate();
    const std::uint64_t base = spec.interaction_set.size();
    const auto count = checked_pow(base, spec.resolution, limit);
    if (!count) throw CombinatorialOverflow(limit);

    std::vector<VariationPath> out;
    out.reserve(static_cast<std::size_t>(*count));
    std::vector<std::size_t> digits(static_cast<std::size_t>(spec.resolution), 0);
    for (std::uint64_t n = 0; n < *count; ++n) {
        VariationPath p;
        p.provenance = PathProvenance::exhaustive;
        p.steps.reserve(digits.size());
        for (std::size_t d : digits) p.steps.push_back(spec.interaction_set[d]);
        out.push_back(std::move(p));
        // odometer, last digit fastest
        for (std::size_t i = digits.size(); i-- > 0;) {
            if (++digits[i] < base) break;
            digits[i] = 0;
        }
    }
    return out;
}

enum class SampleStrategy { uniform_random, boundary };

namespace detail {
// splitmix64: stable across platforms, unlike std distributions
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// uniform_random draws n seed-deterministic paths; boundary returns the
/// constant-interaction paths (all-left, all-right, ...) capped at n.
inline std::vector<VariationPath> sample_paths(const VariationSpec& spec,
                                               SampleStrategy strategy,
                                               std::size_t n) {
    spec.validate();
    if (n < 1) throw ConfigError("sample count must be >= 1");

    std::vector<VariationPath> out;
    if (strategy == SampleStrategy::boundary) {
        for (std::size_t i = 0; i < spec.interaction_set.size() && out.size() < n; ++i) {
            VariationPath p;
            p.provenance = PathProvenance::boundary;
            p.steps.assign(static_cast<std::size_t>(spec.resolution), spec.interaction_set[i]);
            out.push_back(std::move(p));
        }
        return out;
    }

    std::uint64_t state = spec.seed;
    for (std::size_t i = 0; i < n; ++i) {
        VariationPath p;
        p.provenance = PathProvenance::sampled;
        p.seed = spec.seed;
        p.index = i;
        p.steps.reserve(static_cast<std::size_t>(spec.resolution));
        for (int j = 0; j < spec.resolution; ++j) {
            const auto r = detail::splitmix64(state);
            p.steps.push_back(spec.interaction_set[static_cast<std::size_t>(r % spec.interaction_set.size())]);
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// One line per path: comma-separated interaction mnemonics.
inline std::string to_line(const VariationPath& path) {
    std::string s;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        if (i) s += ',';
        s += mnemonic(path.steps[i].kind);
    }
    return s;
}

inline VariationPath path_from_line(const std::string& line, const VariationSpec& spec) {
    VariationPath p;
    std::istringstream in(line);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        const auto kind = kind_from_mnemonic(tok);
        if (!kind) throw ConfigError("unknown interaction mnemonic: " + tok);
        const Interaction* match = nullptr;
        for (const auto& cand : spec.interaction_set) {
            if (cand.kind == *kind) { match = &cand; break; }
        }
        if (!match) throw ConfigError("interaction not in spec set: " + tok);
        p.steps.push_back(*match);
    }
    return p;
}

}  // namespace ncf::vary
