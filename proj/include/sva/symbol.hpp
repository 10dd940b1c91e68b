#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sva/index.hpp"
#include "sva/scalar.hpp"

namespace sva {

/// Geometric coefficient symbols.  GBold is the log-volume potential whose
/// derivatives appear in trace rules; Cplx is a complex-structure matrix
/// entry; User covers declared scenario symbols (e.g. a central-charge
/// constant).
enum class SymKind : std::uint8_t {
    Coord,     // x_i            (1 index)
    GLo,       // g_{ij}         (2, symmetric)
    GUp,       // g^{ij}         (2, symmetric)
    WLo,       // omega_{ij}     (2, antisymmetric)
    WUp,       // omega^{ij}     (2, antisymmetric)
    Gamma,     // Gamma^i_{jk}   (3: upper, lower pair symmetric)
    GBold,     // bold-g scalar potential (0 indices)
    EtaLo,     // eta_{ab}       (2, antisymmetric, indices of one class)
    EtaUp,     // eta^{ab}       (2, antisymmetric, indices of one class)
    Cplx,      // I_i^j          (2: lower, upper)
    User,      // named symbol
};

inline int sym_arity(SymKind k) {
    switch (k) {
        case SymKind::Coord: return 1;
        case SymKind::GLo:
        case SymKind::GUp:
        case SymKind::WLo:
        case SymKind::WUp:
        case SymKind::EtaLo:
        case SymKind::EtaUp:
        case SymKind::Cplx: return 2;
        case SymKind::Gamma: return 3;
        case SymKind::GBold: return 0;
        case SymKind::User: return -1;
    }
    return -1;
}

inline const char* sym_name(SymKind k) {
    switch (k) {
        case SymKind::Coord: return "x";
        case SymKind::GLo: return "glo";
        case SymKind::GUp: return "gup";
        case SymKind::WLo: return "wlo";
        case SymKind::WUp: return "wup";
        case SymKind::Gamma: return "Gam";
        case SymKind::GBold: return "g";
        case SymKind::EtaLo: return "elo";
        case SymKind::EtaUp: return "eup";
        case SymKind::Cplx: return "I";
        case SymKind::User: return "";
    }
    return "";
}

/// One symbol occurrence: kind, concrete indices, derivative multiset.
/// All symbols are even and of weight zero.
struct FunctionSymbol {
    SymKind kind = SymKind::User;
    std::string name;          // only for User
    std::vector<Idx> indices;  // slot meaning fixed per kind
    std::vector<Idx> derivs;   // sorted multiset

    friend auto operator<=>(const FunctionSymbol&, const FunctionSymbol&) = default;

    /// Slot-symmetry canonicalization.  Returns +1/-1, or 0 when the symbol
    /// vanishes identically (repeated antisymmetric indices).  Sorts the
    /// derivative multiset in place.
    int canonicalize() {
        std::sort(derivs.begin(), derivs.end());
        auto sort2 = [&](bool antisym) -> int {
            if (indices.size() != 2) throw std::invalid_argument("symbol arity mismatch");
            if (indices[0] == indices[1]) return antisym ? 0 : 1;
            if (indices[1] < indices[0]) {
                std::swap(indices[0], indices[1]);
                return antisym ? -1 : 1;
            }
            return 1;
        };
        switch (kind) {
            case SymKind::GLo:
            case SymKind::GUp: return sort2(false);
            case SymKind::WLo:
            case SymKind::WUp:
            case SymKind::EtaLo:
            case SymKind::EtaUp: return sort2(true);
            case SymKind::Gamma:
                if (indices.size() != 3) throw std::invalid_argument("symbol arity mismatch");
                if (indices[2] < indices[1]) std::swap(indices[1], indices[2]);
                return 1;
            default: return 1;
        }
    }

    FunctionSymbol conjugated() const {
        FunctionSymbol s = *this;
        for (auto& i : s.indices) i = conj(i);
        for (auto& d : s.derivs) d = conj(d);
        std::sort(s.derivs.begin(), s.derivs.end());
        return s;
    }
};

inline FunctionSymbol make_sym(SymKind k, std::vector<Idx> idx, std::vector<Idx> der = {}) {
    FunctionSymbol s;
    s.kind = k;
    s.indices = std::move(idx);
    s.derivs = std::move(der);
    std::sort(s.derivs.begin(), s.derivs.end());
    return s;
}

inline FunctionSymbol make_user(std::string name, std::vector<Idx> idx = {}, std::vector<Idx> der = {}) {
    FunctionSymbol s;
    s.kind = SymKind::User;
    s.name = std::move(name);
    s.indices = std::move(idx);
    s.derivs = std::move(der);
    std::sort(s.derivs.begin(), s.derivs.end());
    return s;
}

inline std::string to_string(const FunctionSymbol& s) {
    std::string out = s.kind == SymKind::User ? s.name : sym_name(s.kind);
    if (!s.indices.empty() || !s.derivs.empty()) {
        out += "[";
        for (size_t k = 0; k < s.indices.size(); ++k) {
            if (k) out += " ";
            out += to_string(s.indices[k]);
        }
        if (!s.derivs.empty()) {
            out += ",";
            for (const auto& d : s.derivs) out += " " + to_string(d);
        }
        out += "]";
    }
    return out;
}

}  // namespace sva
