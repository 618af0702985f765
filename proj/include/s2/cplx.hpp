#pragma once

#include <cmath>

namespace s2 {

// Complex value as an explicit (re, im) pair. All complex algebra in the
// project goes through this type; storage in matrices is interleaved pairs.
struct Cplx {
    double re = 0.0;
    double im = 0.0;

    friend Cplx operator+(Cplx a, Cplx b) { return {a.re + b.re, a.im + b.im}; }
    friend Cplx operator-(Cplx a, Cplx b) { return {a.re - b.re, a.im - b.im}; }
    friend Cplx operator*(Cplx a, Cplx b) {
        return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
    }
    friend Cplx operator*(double s, Cplx a) { return {s * a.re, s * a.im}; }
    friend Cplx operator*(Cplx a, double s) { return {s * a.re, s * a.im}; }
    Cplx& operator+=(Cplx b) {
        re += b.re;
        im += b.im;
        return *this;
    }
    Cplx& operator-=(Cplx b) {
        re -= b.re;
        im -= b.im;
        return *this;
    }
};

inline Cplx conj(Cplx a) { return {a.re, -a.im}; }
inline double abs2(Cplx a) { return a.re * a.re + a.im * a.im; }
inline double cabs(Cplx a) { return std::hypot(a.re, a.im); }
inline Cplx expi(double phi) { return {std::cos(phi), std::sin(phi)}; }

} // namespace s2
