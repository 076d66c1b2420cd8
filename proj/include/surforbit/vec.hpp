// Small fixed-size vectors and matrices used throughout the library.
// Dimensions are tiny (chart coordinates are 1- or 2-dimensional, embedded
// points are 3-dimensional, shooting systems are at most 4x4), so everything
// lives on the stack and is constexpr-friendly.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>

namespace surforbit {

template <std::size_t N>
struct Vec {
    std::array<double, N> v{};

    constexpr double& operator[](std::size_t i) { return v[i]; }
    constexpr const double& operator[](std::size_t i) const { return v[i]; }

    static constexpr std::size_t size() { return N; }

    constexpr Vec& operator+=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) v[i] += o.v[i];
        return *this;
    }
    constexpr Vec& operator-=(const Vec& o) {
        for (std::size_t i = 0; i < N; ++i) v[i] -= o.v[i];
        return *this;
    }
    constexpr Vec& operator*=(double s) {
        for (std::size_t i = 0; i < N; ++i) v[i] *= s;
        return *this;
    }

    friend constexpr Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend constexpr Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend constexpr Vec operator*(Vec a, double s) { return a *= s; }
    friend constexpr Vec operator*(double s, Vec a) { return a *= s; }
    friend constexpr Vec operator/(Vec a, double s) { return a *= (1.0 / s); }
    friend constexpr Vec operator-(const Vec& a) {
        Vec r;
        for (std::size_t i = 0; i < N; ++i) r.v[i] = -a.v[i];
        return r;
    }
    friend constexpr bool operator==(const Vec& a, const Vec& b) { return a.v == b.v; }
};

using Vec1 = Vec<1>;
using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

template <std::size_t N>
constexpr double dot(const Vec<N>& a, const Vec<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t N>
inline double norm(const Vec<N>& a) {
    return std::sqrt(dot(a, a));
}

template <std::size_t N>
inline double norm_inf(const Vec<N>& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < N; ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

template <std::size_t N>
inline Vec<N> normalized(const Vec<N>& a) {
    return a / norm(a);
}

inline constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return Vec3{{a[1] * b[2] - a[2] * b[1],
                 a[2] * b[0] - a[0] * b[2],
                 a[0] * b[1] - a[1] * b[0]}};
}

template <std::size_t N>
inline bool all_finite(const Vec<N>& a) {
    for (std::size_t i = 0; i < N; ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

template <std::size_t N>
inline std::ostream& operator<<(std::ostream& os, const Vec<N>& a) {
    os << "(";
    for (std::size_t i = 0; i < N; ++i) os << (i ? ", " : "") << a[i];
    return os << ")";
}

// Row-major fixed-size matrix.
template <std::size_t R, std::size_t C>
struct Mat {
    std::array<double, R * C> m{};

    constexpr double& operator()(std::size_t r, std::size_t c) { return m[r * C + c]; }
    constexpr const double& operator()(std::size_t r, std::size_t c) const { return m[r * C + c]; }

    static constexpr Mat identity() {
        static_assert(R == C);
        Mat I;
        for (std::size_t i = 0; i < R; ++i) I(i, i) = 1.0;
        return I;
    }

    friend constexpr Vec<R> operator*(const Mat& A, const Vec<C>& x) {
        Vec<R> y;
        for (std::size_t r = 0; r < R; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < C; ++c) s += A(r, c) * x[c];
            y[r] = s;
        }
        return y;
    }
};

// Gaussian elimination with partial pivoting. Returns nullopt when the
// pivot falls below `singular_tol` times the largest row entry.
template <std::size_t N>
inline std::optional<Vec<N>> solve_linear(Mat<N, N> A, Vec<N> b,
                                          double singular_tol = 1e-13) {
    std::array<std::size_t, N> perm{};
    for (std::size_t i = 0; i < N; ++i) perm[i] = i;
    double scale = 0.0;
    for (double x : A.m) scale = std::max(scale, std::abs(x));
    if (scale == 0.0) return std::nullopt;

    for (std::size_t k = 0; k < N; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < N; ++r)
            if (std::abs(A(r, k)) > std::abs(A(piv, k))) piv = r;
        if (std::abs(A(piv, k)) <= singular_tol * scale) return std::nullopt;
        if (piv != k) {
            for (std::size_t c = 0; c < N; ++c) std::swap(A(k, c), A(piv, c));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t r = k + 1; r < N; ++r) {
            double f = A(r, k) / A(k, k);
            A(r, k) = 0.0;
            for (std::size_t c = k + 1; c < N; ++c) A(r, c) -= f * A(k, c);
            b[r] -= f * b[k];
        }
    }
    Vec<N> x;
    for (std::size_t ri = N; ri-- > 0;) {
        double s = b[ri];
        for (std::size_t c = ri + 1; c < N; ++c) s -= A(ri, c) * x[c];
        x[ri] = s / A(ri, ri);
    }
    return x;
}

// Deterministic low-discrepancy sequence (van der Corput radical inverse).
inline double radical_inverse(unsigned long long index, unsigned base) {
    double inv = 1.0 / base, f = inv, x = 0.0;
    while (index > 0) {
        x += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return x;
}

// Halton point in [0,1)^D using the first D primes.
template <std::size_t D>
inline Vec<D> halton(unsigned long long index) {
    constexpr std::array<unsigned, 6> primes{2, 3, 5, 7, 11, 13};
    static_assert(D <= 6);
    Vec<D> p;
    for (std::size_t i = 0; i < D; ++i) p[i] = radical_inverse(index + 1, primes[i]);
    return p;
}

}  // namespace surforbit
