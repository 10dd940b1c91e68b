#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sva {

/// Index classes for enumerated coordinate indices.  Real indices are used by
/// the flat and Darboux backends; holomorphic/antiholomorphic pairs by the
/// complex-geometry backends.
enum class IndexClass : std::uint8_t { Real = 0, Hol = 1, AntiHol = 2 };

struct Idx {
    IndexClass cls = IndexClass::Real;
    int ord = 1;  // 1-based ordinal within the class

    friend auto operator<=>(const Idx&, const Idx&) = default;
};

inline Idx conj(Idx i) {
    if (i.cls == IndexClass::Hol) i.cls = IndexClass::AntiHol;
    else if (i.cls == IndexClass::AntiHol) i.cls = IndexClass::Hol;
    return i;
}

inline std::string to_string(const Idx& i) {
    switch (i.cls) {
        case IndexClass::Real: return "x" + std::to_string(i.ord);
        case IndexClass::Hol: return "a" + std::to_string(i.ord);
        case IndexClass::AntiHol: return "b" + std::to_string(i.ord);
    }
    return "?";
}

/// Concrete enumerated index set of a backend: either `dim` real indices or
/// `dim` holomorphic plus `dim` antiholomorphic ones.
struct IndexContext {
    bool complex_pairs = false;
    int dim = 1;

    std::vector<Idx> all() const {
        std::vector<Idx> v;
        if (complex_pairs) {
            for (int k = 1; k <= dim; ++k) v.push_back({IndexClass::Hol, k});
            for (int k = 1; k <= dim; ++k) v.push_back({IndexClass::AntiHol, k});
        } else {
            for (int k = 1; k <= dim; ++k) v.push_back({IndexClass::Real, k});
        }
        return v;
    }

    std::vector<Idx> of_class(IndexClass c) const {
        std::vector<Idx> v;
        for (int k = 1; k <= dim; ++k) v.push_back({c, k});
        return v;
    }

    bool valid(const Idx& i) const {
        if (i.ord < 1 || i.ord > dim) return false;
        if (complex_pairs) return i.cls != IndexClass::Real;
        return i.cls == IndexClass::Real;
    }

    void require(const Idx& i) const {
        if (!valid(i)) throw std::invalid_argument("index " + to_string(i) + " outside context");
    }
};

}  // namespace sva
