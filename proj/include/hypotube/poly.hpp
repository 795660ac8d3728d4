#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "hypotube/geometry.hpp"

namespace hypotube {

/// Bivariate polynomial sum_k c_k * x1^i_k * x2^j_k. Coefficient models are
/// built from these, so every derivative used by the library is analytic.
class Poly2 {
  public:
    struct Term {
        double coef;
        int i;  // power of x1
        int j;  // power of x2
    };

    Poly2() = default;
    Poly2(std::initializer_list<Term> terms) : terms_(terms) { normalize(); }
    explicit Poly2(std::vector<Term> terms) : terms_(std::move(terms)) { normalize(); }

    static Poly2 zero() { return {}; }
    static Poly2 constant(double c) { return Poly2{{{c, 0, 0}}}; }
    static Poly2 x1() { return Poly2{{{1.0, 1, 0}}}; }
    static Poly2 x2() { return Poly2{{{1.0, 0, 1}}}; }

    double eval(const Vec2& p) const {
        double s = 0.0;
        for (const Term& t : terms_) s += t.coef * ipow(p.x1, t.i) * ipow(p.x2, t.j);
        return s;
    }

    Poly2 derivative(int dim) const {
        std::vector<Term> out;
        out.reserve(terms_.size());
        for (const Term& t : terms_) {
            if (dim == 0 && t.i > 0) out.push_back({t.coef * t.i, t.i - 1, t.j});
            if (dim == 1 && t.j > 0) out.push_back({t.coef * t.j, t.i, t.j - 1});
        }
        return Poly2(std::move(out));
    }

    Poly2 operator+(const Poly2& o) const {
        std::vector<Term> out = terms_;
        out.insert(out.end(), o.terms_.begin(), o.terms_.end());
        return Poly2(std::move(out));
    }
    Poly2 operator*(const Poly2& o) const {
        std::vector<Term> out;
        out.reserve(terms_.size() * o.terms_.size());
        for (const Term& a : terms_)
            for (const Term& b : o.terms_) out.push_back({a.coef * b.coef, a.i + b.i, a.j + b.j});
        return Poly2(std::move(out));
    }
    Poly2 scaled(double s) const {
        std::vector<Term> out = terms_;
        for (Term& t : out) t.coef *= s;
        return Poly2(std::move(out));
    }

    const std::vector<Term>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

  private:
    static double ipow(double x, int n) {
        double r = 1.0;
        while (n-- > 0) r *= x;
        return r;
    }

    // Merge duplicate exponent pairs and drop exact zeros; keeps evaluation
    // cheap in the simulation inner loop.
    void normalize() {
        std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        std::vector<Term> merged;
        for (const Term& t : terms_) {
            if (!merged.empty() && merged.back().i == t.i && merged.back().j == t.j)
                merged.back().coef += t.coef;
            else
                merged.push_back(t);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const Term& t) { return t.coef == 0.0; }),
                     merged.end());
        terms_ = std::move(merged);
    }

    std::vector<Term> terms_;
};

/// Parse a polynomial from a term list "c i j; c i j; ..." (coefficient and
/// the two exponents, terms separated by ';').
inline Poly2 parse_poly(const std::string& text) {
    std::vector<Poly2::Term> terms;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(';', pos);
        if (end == std::string::npos) end = text.size();
        std::string chunk = text.substr(pos, end - pos);
        double c = 0.0;
        int i = 0, j = 0;
        if (std::sscanf(chunk.c_str(), "%lf %d %d", &c, &i, &j) == 3) {
            if (i < 0 || j < 0) throw ConfigError("polynomial exponents must be >= 0: " + chunk);
            terms.push_back({c, i, j});
        } else {
            // allow empty chunks from trailing separators
            bool blank = chunk.find_first_not_of(" \t") == std::string::npos;
            if (!blank) throw ConfigError("cannot parse polynomial term '" + chunk + "'");
        }
        pos = end + 1;
    }
    return Poly2(std::move(terms));
}

}  // namespace hypotube
