#pragma once

// Sparse multivariate polynomials with real coefficients in up to 16
// variables. Exponents are packed four bits per variable into a 64-bit key.

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <map>
#include <stdexcept>
#include <vector>

namespace yamabe {

class Polynomial {
public:
    static constexpr int max_vars = 16;
    static constexpr int max_exponent = 15;

    explicit Polynomial(int nvars = 0) : nvars_(nvars) {
        if (nvars < 0 || nvars > max_vars) throw std::invalid_argument("Polynomial supports at most 16 variables");
    }

    static Polynomial constant(int nvars, double c) {
        Polynomial p(nvars);
        if (c != 0.0) p.terms_[0] = c;
        return p;
    }

    static Polynomial variable(int nvars, int i) {
        Polynomial p(nvars);
        p.terms_[key_of_single(i, 1)] = 1.0;
        return p;
    }

    static Polynomial monomial(const std::vector<int>& alpha, double c = 1.0) {
        Polynomial p(int(alpha.size()));
        if (c != 0.0) p.terms_[pack(alpha)] = c;
        return p;
    }

    // x^T A x for a square matrix given row-major.
    static Polynomial quadratic_form(int nvars, const std::vector<double>& A) {
        Polynomial p(nvars);
        for (int i = 0; i < nvars; ++i)
            for (int j = 0; j < nvars; ++j) {
                const double c = A[std::size_t(i) * nvars + j];
                if (c == 0.0) continue;
                p.terms_[key_of_single(i, 1) + key_of_single(j, 1)] += c;
            }
        p.prune();
        return p;
    }

    int nvars() const { return nvars_; }
    const std::map<std::uint64_t, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    static std::vector<int> unpack(std::uint64_t key, int nvars) {
        std::vector<int> a(nvars);
        for (int i = 0; i < nvars; ++i) a[i] = int((key >> (4 * i)) & 0xF);
        return a;
    }

    static int degree_of(std::uint64_t key) {
        int d = 0;
        for (int i = 0; i < max_vars; ++i) d += int((key >> (4 * i)) & 0xF);
        return d;
    }

    int total_degree() const {
        int d = 0;
        for (const auto& [k, c] : terms_) d = std::max(d, degree_of(k));
        return d;
    }

    double operator()(const std::vector<double>& x) const {
        double s = 0.0;
        for (const auto& [k, c] : terms_) {
            double t = c;
            for (int i = 0; i < nvars_; ++i) {
                const int e = int((k >> (4 * i)) & 0xF);
                for (int r = 0; r < e; ++r) t *= x[i];
            }
            s += t;
        }
        return s;
    }

    Polynomial& operator+=(const Polynomial& o) {
        check_compatible(o);
        for (const auto& [k, c] : o.terms_) terms_[k] += c;
        prune();
        return *this;
    }

    Polynomial& operator*=(double s) {
        for (auto& [k, c] : terms_) c *= s;
        prune();
        return *this;
    }

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        a.check_compatible(b);
        Polynomial r(a.nvars_);
        for (const auto& [ka, ca] : a.terms_)
            for (const auto& [kb, cb] : b.terms_) {
                check_no_overflow(ka, kb);
                r.terms_[ka + kb] += ca * cb;
            }
        r.prune();
        return r;
    }

    Polynomial pow(int n) const {
        Polynomial r = constant(nvars_, 1.0);
        for (int i = 0; i < n; ++i) r = r * *this;
        return r;
    }

private:
    int nvars_;
    std::map<std::uint64_t, double> terms_;

    static std::uint64_t key_of_single(int i, int e) { return std::uint64_t(e) << (4 * i); }

    static std::uint64_t pack(const std::vector<int>& alpha) {
        if (alpha.size() > std::size_t(max_vars)) throw std::invalid_argument("too many variables");
        std::uint64_t k = 0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            if (alpha[i] < 0 || alpha[i] > max_exponent) throw std::invalid_argument("exponent out of range");
            k |= std::uint64_t(alpha[i]) << (4 * i);
        }
        return k;
    }

    static void check_no_overflow(std::uint64_t a, std::uint64_t b) {
        for (int i = 0; i < max_vars; ++i)
            if (((a >> (4 * i)) & 0xF) + ((b >> (4 * i)) & 0xF) > std::uint64_t(max_exponent))
                throw std::overflow_error("polynomial exponent exceeds 15");
    }

    void check_compatible(const Polynomial& o) const {
        if (o.nvars_ != nvars_) throw std::invalid_argument("polynomial variable count mismatch");
    }

    void prune() {
        for (auto it = terms_.begin(); it != terms_.end();)
            it = (it->second == 0.0) ? terms_.erase(it) : std::next(it);
    }
};

} // namespace yamabe
