#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tauquant/errors.hpp"

namespace tauq {

// Multi-index in N_0^n. Factorials are exact in 64-bit, which caps |alpha| at 12.
struct MultiIndex {
    std::vector<int> e;

    MultiIndex() = default;
    explicit MultiIndex(int dim) : e(dim, 0) {}
    MultiIndex(std::initializer_list<int> init) : e(init) {}

    int dim() const { return static_cast<int>(e.size()); }
    int order() const { return std::accumulate(e.begin(), e.end(), 0); }

    long long factorial() const {
        if (order() > 12) throw ValidationError("multi-index order exceeds 12");
        long long f = 1;
        for (int c : e)
            for (int k = 2; k <= c; ++k) f *= k;
        return f;
    }

    int operator[](int i) const { return e[i]; }
    int& operator[](int i) { return e[i]; }

    bool operator==(const MultiIndex& o) const { return e == o.e; }
    auto operator<=>(const MultiIndex& o) const { return e <=> o.e; }

    bool is_zero() const { return order() == 0; }

    std::string to_string() const {
        std::string s = "(";
        for (int i = 0; i < dim(); ++i) {
            if (i) s += ",";
            s += std::to_string(e[i]);
        }
        return s + ")";
    }
};

// All multi-indices of the given dimension with |alpha| == order, lexicographic.
inline std::vector<MultiIndex> multi_indices_of_order(int dim, int order) {
    std::vector<MultiIndex> out;
    MultiIndex cur(dim);
    auto rec = [&](auto&& self, int pos, int rem) -> void {
        if (pos == dim - 1) {
            cur[pos] = rem;
            out.push_back(cur);
            return;
        }
        for (int c = 0; c <= rem; ++c) {
            cur[pos] = c;
            self(self, pos + 1, rem - c);
        }
    };
    if (dim == 0) return out;
    rec(rec, 0, order);
    return out;
}

// All multi-indices with |alpha| <= max_order, ordered by (|alpha|, lex).
inline std::vector<MultiIndex> multi_indices_up_to(int dim, int max_order) {
    std::vector<MultiIndex> out;
    for (int k = 0; k <= max_order; ++k) {
        auto v = multi_indices_of_order(dim, k);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

}  // namespace tauq
