#pragma once

#include <array>
#include <cmath>

namespace facetrace {

// Forward-mode dual number carrying N partial derivatives. Used to push
// small shading kernels through differentiation without hand-written
// jacobians.
template <int N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}
    static Dual var(double value, int slot)
    {
        Dual r(value);
        r.d[slot] = 1.0;
        return r;
    }

    Dual operator-() const
    {
        Dual r(-v);
        for (int i = 0; i < N; ++i) r.d[i] = -d[i];
        return r;
    }
    Dual& operator+=(const Dual& o)
    {
        v += o.v;
        for (int i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o)
    {
        v -= o.v;
        for (int i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual& operator*=(const Dual& o)
    {
        for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(const Dual& a, const Dual& b)
    {
        Dual r(a.v / b.v);
        const double inv = 1.0 / b.v;
        for (int i = 0; i < N; ++i)
            r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
        return r;
    }
    friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
    friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
};

template <int N>
Dual<N> sqrt(const Dual<N>& a)
{
    Dual<N> r(std::sqrt(a.v));
    const double s = 0.5 / r.v;
    for (int i = 0; i < N; ++i) r.d[i] = s * a.d[i];
    return r;
}

template <int N>
Dual<N> max(const Dual<N>& a, double b)
{
    return a.v > b ? a : Dual<N>(b);
}

template <int N>
Dual<N> min(const Dual<N>& a, double b)
{
    return a.v < b ? a : Dual<N>(b);
}

template <int N>
Dual<N> pow5(const Dual<N>& a)
{
    Dual<N> a2 = a * a;
    return a2 * a2 * a;
}

inline double pow5(double a)
{
    double a2 = a * a;
    return a2 * a2 * a;
}

// Scalar fallbacks so kernels compile for plain double too.
using std::sqrt;
inline double max(double a, double b) { return a > b ? a : b; }
inline double min(double a, double b) { return a < b ? a : b; }

} // namespace facetrace
