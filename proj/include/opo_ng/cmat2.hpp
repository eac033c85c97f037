#ifndef OPO_NG_CMAT2_HPP
#define OPO_NG_CMAT2_HPP

#include <cmath>
#include <complex>

namespace opo_ng {

using cplx = std::complex<double>;

inline constexpr cplx I{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

// Two-component vector in the (alpha, alpha^dagger) basis.
struct CVec2 {
    cplx a{}, ad{};

    friend CVec2 operator+(CVec2 x, CVec2 y) { return {x.a + y.a, x.ad + y.ad}; }
    friend CVec2 operator-(CVec2 x, CVec2 y) { return {x.a - y.a, x.ad - y.ad}; }
    friend CVec2 operator*(cplx s, CVec2 x) { return {s * x.a, s * x.ad}; }
    friend CVec2 operator*(CVec2 x, cplx s) { return {s * x.a, s * x.ad}; }
};

inline cplx dot(CVec2 x, CVec2 y) { return x.a * y.a + x.ad * y.ad; }

// 2x2 complex matrix, entries named after the (alpha, alpha^dagger) basis.
struct CMat2 {
    cplx aa{}, aad{}, ada{}, adad{};

    static constexpr CMat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr CMat2 swap() { return {0.0, 1.0, 1.0, 0.0}; }
    static constexpr CMat2 diag(cplx x, cplx y) { return {x, 0.0, 0.0, y}; }
    static constexpr CMat2 antidiag(cplx x, cplx y) { return {0.0, x, y, 0.0}; }

    CMat2& operator+=(const CMat2& m) {
        aa += m.aa; aad += m.aad; ada += m.ada; adad += m.adad;
        return *this;
    }
    CMat2& operator-=(const CMat2& m) {
        aa -= m.aa; aad -= m.aad; ada -= m.ada; adad -= m.adad;
        return *this;
    }
    CMat2& operator*=(cplx s) {
        aa *= s; aad *= s; ada *= s; adad *= s;
        return *this;
    }

    friend CMat2 operator+(CMat2 x, const CMat2& y) { return x += y; }
    friend CMat2 operator-(CMat2 x, const CMat2& y) { return x -= y; }
    friend CMat2 operator-(CMat2 x) { return x *= -1.0; }
    friend CMat2 operator*(CMat2 x, cplx s) { return x *= s; }
    friend CMat2 operator*(cplx s, CMat2 x) { return x *= s; }
    friend CMat2 operator*(CMat2 x, double s) { return x *= s; }
    friend CMat2 operator*(double s, CMat2 x) { return x *= s; }
    friend CMat2 operator/(CMat2 x, cplx s) { return x *= 1.0 / s; }
    friend CMat2 operator/(CMat2 x, double s) { return x *= 1.0 / s; }

    friend CMat2 operator*(const CMat2& x, const CMat2& y) {
        return {x.aa * y.aa + x.aad * y.ada, x.aa * y.aad + x.aad * y.adad,
                x.ada * y.aa + x.adad * y.ada, x.ada * y.aad + x.adad * y.adad};
    }
    friend CVec2 operator*(const CMat2& m, CVec2 v) {
        return {m.aa * v.a + m.aad * v.ad, m.ada * v.a + m.adad * v.ad};
    }
    friend bool operator==(const CMat2&, const CMat2&) = default;
};

inline CMat2 transpose(const CMat2& m) { return {m.aa, m.ada, m.aad, m.adad}; }
inline CMat2 conj(const CMat2& m) {
    return {std::conj(m.aa), std::conj(m.aad), std::conj(m.ada), std::conj(m.adad)};
}
inline cplx det(const CMat2& m) { return m.aa * m.adad - m.aad * m.ada; }
inline cplx trace(const CMat2& m) { return m.aa + m.adad; }

inline CMat2 inverse(const CMat2& m) {
    return CMat2{m.adad, -m.aad, -m.ada, m.aa} / det(m);
}

// Largest entry modulus; also the error norm used by the quadrature routines.
inline double abs(const CMat2& m) {
    return std::max({std::abs(m.aa), std::abs(m.aad), std::abs(m.ada), std::abs(m.adad)});
}

// theta^T M theta
inline cplx contract(CVec2 th, const CMat2& m) { return dot(th, m * th); }

// Homodyne weight vector (e^{-i theta}, e^{i theta}) / 2.
inline CVec2 quadrature_vector(double theta) {
    return {0.5 * std::polar(1.0, -theta), 0.5 * std::polar(1.0, theta)};
}

// Squeezed (theta = pi/2) combination (-aa + aad + ada - adad)/4.
inline cplx squeezed_part(const CMat2& m) { return (-m.aa + m.aad + m.ada - m.adad) / 4.0; }
inline cplx antisqueezed_part(const CMat2& m) { return (m.aa + m.aad + m.ada + m.adad) / 4.0; }

}  // namespace opo_ng

#endif
