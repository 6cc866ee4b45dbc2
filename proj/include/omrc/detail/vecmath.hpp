#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace omrc::detail {

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

template <typename A>
double norm(std::span<const A> a) {
    double s = 0.0;
    for (const auto& x : a) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

template <typename A, typename B>
double cosine(std::span<const A> a, std::span<const B> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na < 1e-300 || nb < 1e-300) return 0.0;
    return dot(a, b) / (na * nb);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return dot(std::span<const double>(a), std::span<const double>(b));
}
inline double dot(const std::vector<float>& a, const std::vector<float>& b) {
    return dot(std::span<const float>(a), std::span<const float>(b));
}
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    return cosine(std::span<const double>(a), std::span<const double>(b));
}
inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    return cosine(std::span<const float>(a), std::span<const float>(b));
}

// L2-normalize in double; throws on (near-)zero input.
inline std::vector<double> normalized(std::vector<double> v) {
    const double n = norm(std::span<const double>(v));
    if (n < 1e-12) throw std::domain_error("normalize: vector norm below 1e-12");
    for (auto& x : v) x /= n;
    return v;
}

inline std::vector<float> to_float(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

inline std::vector<double> to_double(const std::vector<float>& v) {
    return {v.begin(), v.end()};
}

}  // namespace omrc::detail
