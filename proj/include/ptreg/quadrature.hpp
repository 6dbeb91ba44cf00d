#pragma once

#include <ptreg/error.hpp>

#include <array>
#include <string>
#include <vector>

namespace ptreg {

/// Interior-point rule on a triangle. Points are barycentric coordinates and
/// weights are relative to the element area (they sum to one).
struct QuadratureRule {
    int degree = 0;
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
};

namespace detail {

inline void add_orbit3(QuadratureRule& rule, double a, double w)
{
    const double b = 1.0 - 2.0 * a;
    rule.points.push_back({a, a, b});
    rule.points.push_back({a, b, a});
    rule.points.push_back({b, a, a});
    rule.weights.insert(rule.weights.end(), 3, w);
}

inline void add_orbit6(QuadratureRule& rule, double a, double b, double w)
{
    const double c = 1.0 - a - b;
    for (const auto& p : {std::array{a, b, c}, std::array{a, c, b}, std::array{b, a, c},
                          std::array{b, c, a}, std::array{c, a, b}, std::array{c, b, a}})
        rule.points.push_back(p);
    rule.weights.insert(rule.weights.end(), 6, w);
}

} // namespace detail

/// Symmetric rule of at least the requested polynomial degree (1 to 6).
/// Degree 3 is served by the degree 4 rule.
inline QuadratureRule quadrature_rule(int degree)
{
    QuadratureRule rule;
    switch (degree) {
    case 1:
        rule.degree = 1;
        rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        rule.weights.push_back(1.0);
        break;
    case 2:
        rule.degree = 2;
        detail::add_orbit3(rule, 1.0 / 6.0, 1.0 / 3.0);
        break;
    case 3:
    case 4:
        rule.degree = 4;
        detail::add_orbit3(rule, 0.44594849091596488631832925388305, 0.22338158967801146569500700843312);
        detail::add_orbit3(rule, 0.091576213509770743459571463402202, 0.10995174365532186763832632490021);
        break;
    case 5:
        rule.degree = 5;
        rule.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        rule.weights.push_back(0.225);
        detail::add_orbit3(rule, 0.47014206410511508977044120951345, 0.13239415278850618073764938783315);
        detail::add_orbit3(rule, 0.10128650732345633880098736191512, 0.12593918054482715259568394550018);
        break;
    case 6:
        rule.degree = 6;
        detail::add_orbit3(rule, 0.24928674517091042129163855310702, 0.11678627572637936602528961138558);
        detail::add_orbit3(rule, 0.063089014491502228340331602870819, 0.050844906370206816920936809106869);
        detail::add_orbit6(rule, 0.053145049844816947353249671631398, 0.31035245103378440541660773395655,
                           0.082851075618373575193553456420442);
        break;
    default:
        throw Error("no triangle quadrature rule of degree " + std::to_string(degree));
    }
    return rule;
}

/// Two-point Gauss rule on [0, 1], weights summing to one.
struct EdgeRule {
    std::array<double, 2> points{0.5 - 0.5 / 1.7320508075688772935, 0.5 + 0.5 / 1.7320508075688772935};
    std::array<double, 2> weights{0.5, 0.5};
};

} // namespace ptreg
