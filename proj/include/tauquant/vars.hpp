#pragma once

// Canonical variable naming. Dimension 1 uses the short names x, y, k, w
// (with x1, y1, k1, w1 accepted as aliases); dimension n >= 2 uses x1..xn,
// y1..yn, k1..kn, w1..wn. k is the frequency variable.

#include <map>
#include <string>
#include <vector>

#include "tauquant/expr.hpp"

namespace tauq {

inline std::vector<std::string> axis_names(const std::string& base, int dim) {
    if (dim == 1) return {base};
    std::vector<std::string> names;
    names.reserve(dim);
    for (int i = 1; i <= dim; ++i) names.push_back(base + std::to_string(i));
    return names;
}

inline std::vector<std::string> x_names(int dim) { return axis_names("x", dim); }
inline std::vector<std::string> y_names(int dim) { return axis_names("y", dim); }
inline std::vector<std::string> k_names(int dim) { return axis_names("k", dim); }
inline std::vector<std::string> w_names(int dim) { return axis_names("w", dim); }

// Renames dimension-1 aliases (x1 -> x, ...) so symbolic differentiation can
// address variables by a single canonical name. Identity for dim >= 2.
inline SymbolExpr canonicalize_names(const SymbolExpr& e, int dim) {
    if (dim != 1) return e;
    std::map<std::string, SymbolExpr> renames;
    for (const char* base : {"x", "y", "k", "w"})
        renames.emplace(std::string(base) + "1", SymbolExpr::variable(base));
    return e.substitute(renames);
}

// Slot map builder; each listed name group occupies consecutive slots.
inline std::map<std::string, int> make_slots(
    std::initializer_list<std::vector<std::string>> groups) {
    std::map<std::string, int> slots;
    int next = 0;
    for (const auto& g : groups)
        for (const auto& name : g) slots[name] = next++;
    return slots;
}

}  // namespace tauq
