#pragma once

// Exact rational implementation of the polarised and standard Heisenberg
// groups: group laws, nilpotent matrix exp/log, the symmetry function
// tau(x) = int_0^1 exp(s log x) ds with its closed forms, the midpoint
// m(x,y) = x tau(y^{-1} x)^{-1}, and the symmetry identity tau(x) = tau(x^{-1}) x.
//
// Matrix models (3x3 upper triangular):
//   polarised: (a,b,c) <-> [[1,a,c],[0,1,b],[0,0,1]]
//   standard:  (a,b,c) <-> [[1,a,ab/2+c],[0,1,b],[0,0,1]]
// The standard coordinate law carries the twist c+s+(av-bu)/2, which is what
// the standard matrix model multiplies out to.

#include <array>
#include <string>

#include "tauquant/rational.hpp"

namespace tauq {

enum class HeisVariant { Polarised, Standard };

struct HeisPoint {
    HeisVariant variant = HeisVariant::Standard;
    Rational a, b, c;

    bool operator==(const HeisPoint& o) const {
        return variant == o.variant && a == o.a && b == o.b && c == o.c;
    }

    std::string to_string() const {
        return a.to_string() + ", " + b.to_string() + ", " + c.to_string();
    }
};

// 3x3 upper-triangular rational matrix with unit (group) or zero (algebra)
// diagonal; the strictly upper part is nilpotent of order 3.
struct NilMatrix {
    bool group = false;  // diagonal entries: 1 when group, 0 when algebra
    Rational a, b, c;    // entries (0,1), (1,2), (0,2)

    bool operator==(const NilMatrix& o) const {
        return group == o.group && a == o.a && b == o.b && c == o.c;
    }
};

enum class HeisOp { Mul, Inv };
enum class ExpLogDir { Exp, Log };
enum class SymmetryMethod { Integral, Closed };

// --- group operations -------------------------------------------------------

inline HeisPoint heis_mul(const HeisPoint& p, const HeisPoint& q) {
    if (p.variant != q.variant) throw ValidationError("Heisenberg variant mismatch");
    HeisPoint r;
    r.variant = p.variant;
    r.a = p.a + q.a;
    r.b = p.b + q.b;
    if (p.variant == HeisVariant::Polarised) {
        // matrix product: c + s + a v
        r.c = p.c + q.c + p.a * q.b;
    } else {
        // c + s + (a v - b u)/2
        r.c = p.c + q.c + (p.a * q.b - p.b * q.a) * Rational(1, 2);
    }
    return r;
}

inline HeisPoint heis_inv(const HeisPoint& p) {
    HeisPoint r;
    r.variant = p.variant;
    r.a = -p.a;
    r.b = -p.b;
    r.c = p.variant == HeisVariant::Polarised ? p.a * p.b - p.c : -p.c;
    return r;
}

inline HeisPoint group_op(const HeisPoint& p, const HeisPoint& q, HeisOp op) {
    return op == HeisOp::Mul ? heis_mul(p, q) : heis_inv(p);
}

inline HeisPoint heis_identity(HeisVariant v) { return HeisPoint{v, 0, 0, 0}; }

// --- matrix model ------------------------------------------------------------

inline NilMatrix to_matrix(const HeisPoint& p) {
    NilMatrix m;
    m.group = true;
    m.a = p.a;
    m.b = p.b;
    m.c = p.variant == HeisVariant::Polarised ? p.c : p.a * p.b * Rational(1, 2) + p.c;
    return m;
}

inline HeisPoint from_matrix(HeisVariant v, const NilMatrix& m) {
    if (!m.group) throw ValidationError("from_matrix expects a group matrix");
    HeisPoint p;
    p.variant = v;
    p.a = m.a;
    p.b = m.b;
    p.c = v == HeisVariant::Polarised ? m.c : m.c - m.a * m.b * Rational(1, 2);
    return p;
}

// exp/log terminate at second order (the strict upper part cubes to zero)
inline NilMatrix exp_log(const NilMatrix& m, ExpLogDir dir) {
    NilMatrix r;
    if (dir == ExpLogDir::Exp) {
        if (m.group) throw ValidationError("exp expects an algebra matrix (zero diagonal)");
        r.group = true;
        r.a = m.a;
        r.b = m.b;
        r.c = m.c + m.a * m.b * Rational(1, 2);
    } else {
        if (!m.group) throw ValidationError("log expects a group matrix (unit diagonal)");
        r.group = false;
        r.a = m.a;
        r.b = m.b;
        r.c = m.c - m.a * m.b * Rational(1, 2);
    }
    return r;
}

// --- symmetry function -------------------------------------------------------

// tau(x) = int_0^1 exp(s log x) ds, computed by expanding the entries of
// exp(s X) as polynomials in s (degree <= 2) and integrating term by term;
// the resulting coordinates are read off the integrated matrix entries.
inline HeisPoint symmetry_tau_integral(const HeisPoint& p) {
    NilMatrix X = exp_log(to_matrix(p), ExpLogDir::Log);
    // exp(sX) entries: a(s) = s X.a, b(s) = s X.b, c(s) = s X.c + s^2 X.a X.b / 2
    // integrate on [0,1]: int s ds = 1/2, int s^2 ds = 1/3
    Rational half(1, 2), third(1, 3);
    HeisPoint r;
    r.variant = p.variant;
    r.a = X.a * half;
    r.b = X.b * half;
    r.c = X.c * half + X.a * X.b * half * third;
    return r;
}

inline HeisPoint symmetry_tau_closed(const HeisPoint& p) {
    HeisPoint r;
    r.variant = p.variant;
    Rational half(1, 2);
    r.a = p.a * half;
    r.b = p.b * half;
    if (p.variant == HeisVariant::Polarised)
        r.c = p.c * half - p.a * p.b * Rational(1, 12);
    else
        r.c = p.c * half + p.a * p.b * Rational(1, 6);
    return r;
}

inline HeisPoint symmetry_tau(const HeisPoint& p,
                              SymmetryMethod method = SymmetryMethod::Closed) {
    return method == SymmetryMethod::Integral ? symmetry_tau_integral(p)
                                              : symmetry_tau_closed(p);
}

// --- midpoint -----------------------------------------------------------------

// m(x, y) = x tau(y^{-1} x)^{-1}, via group operations
inline HeisPoint midpoint_group_path(const HeisPoint& x, const HeisPoint& y) {
    if (x.variant != y.variant) throw ValidationError("Heisenberg variant mismatch");
    HeisPoint t = symmetry_tau_closed(heis_mul(heis_inv(y), x));
    return heis_mul(x, heis_inv(t));
}

// closed form, standard variant only:
//   ((a1+a2)/2, (b1+b2)/2, (c1+c2)/2 - (a1-a2)(b1-b2)/6)
inline HeisPoint midpoint_closed(const HeisPoint& x, const HeisPoint& y) {
    if (x.variant != HeisVariant::Standard || y.variant != HeisVariant::Standard)
        throw ValidationError("the closed midpoint form is stated for the standard variant");
    HeisPoint r;
    r.variant = HeisVariant::Standard;
    Rational half(1, 2);
    r.a = (x.a + y.a) * half;
    r.b = (x.b + y.b) * half;
    r.c = (x.c + y.c) * half - (x.a - y.a) * (x.b - y.b) * Rational(1, 6);
    return r;
}

// Standard variant: computed both ways with exact agreement enforced.
inline HeisPoint midpoint(const HeisPoint& x, const HeisPoint& y) {
    HeisPoint via_group = midpoint_group_path(x, y);
    HeisPoint via_closed = midpoint_closed(x, y);
    if (!(via_group == via_closed))
        throw NumericalError("midpoint paths disagree (exact arithmetic)");
    return via_closed;
}

// --- symmetry identity ---------------------------------------------------------

// tau(x) == tau(x^{-1}) x, evaluated exactly in the point's variant
inline bool check_symmetry(const HeisPoint& p) {
    HeisPoint lhs = symmetry_tau_closed(p);
    HeisPoint rhs = heis_mul(symmetry_tau_closed(heis_inv(p)), p);
    return lhs == rhs;
}

inline HeisPoint parse_heis_point(HeisVariant v, const std::string& text) {
    HeisPoint p;
    p.variant = v;
    std::array<Rational*, 3> slots = {&p.a, &p.b, &p.c};
    std::size_t start = 0;
    int idx = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',') {
            if (idx >= 3) throw ValidationError("Heisenberg point needs exactly 3 coordinates");
            std::string tok = text.substr(start, i - start);
            tok.erase(0, tok.find_first_not_of(" \t"));
            tok.erase(tok.find_last_not_of(" \t") + 1);
            *slots[idx++] = Rational::parse(tok);
            start = i + 1;
        }
    }
    if (idx != 3) throw ValidationError("Heisenberg point needs exactly 3 coordinates");
    return p;
}

}  // namespace tauq
