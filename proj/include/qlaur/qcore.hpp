#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qlaur/errors.hpp"

namespace qlaur {

/// The base of all q-arithmetic. Restricted to real q strictly inside (0,1)
/// so that infinite q-products converge geometrically and the (q-1) divisors
/// in the Jackson derivative and q-bracket never vanish.
template <class Real>
struct QBase {
    Real q;

    explicit QBase(Real q_) : q(q_)
    {
        if (!(q > Real(0) && q < Real(1)))
            throw Error(ErrorKind::InvalidBase, "base q must lie strictly inside (0,1)");
    }

    friend bool operator==(const QBase&, const QBase&) = default;
};

/// Order of a q-shifted factorial (a,q)_order. Non-negative integers use the
/// finite product, NegInt(n) means order -n via the reciprocal product, and
/// Real(x) with x >= 0 uses the ratio of two infinite products. Negative real
/// orders are not supported.
template <class Real>
class PochOrder {
public:
    enum class Tag { NonNegInt, NegInt, Real };

    static PochOrder non_neg(long n)
    {
        if (n < 0)
            throw std::invalid_argument("PochOrder::non_neg requires n >= 0");
        return PochOrder(Tag::NonNegInt, n, Real(0));
    }

    /// Order -n with n >= 1.
    static PochOrder neg(long n)
    {
        if (n < 1)
            throw std::invalid_argument("PochOrder::neg requires n >= 1");
        return PochOrder(Tag::NegInt, n, Real(0));
    }

    static PochOrder real(Real x)
    {
        if (!(x >= Real(0)))
            throw std::invalid_argument("PochOrder::real requires x >= 0 (negative real orders unsupported)");
        return PochOrder(Tag::Real, 0, x);
    }

    Tag tag() const noexcept { return tag_; }
    long integer() const noexcept { return n_; }
    Real value() const noexcept { return x_; }

private:
    PochOrder(Tag t, long n, Real x) : tag_(t), n_(n), x_(x) {}

    Tag tag_;
    long n_;
    Real x_;
};

namespace detail {

/// Factors in a denominator position smaller than this are treated as poles.
inline constexpr double kSingularFloor = 1e-300;

/// Hard cap on infinite-product truncation length.
inline constexpr long kProductCap = 1000000;

/// Truncated infinite q-product (a,q)_inf = prod_{m>=0} (1 - a q^m).
/// Factors are accumulated until |a q^m| < eps; the dropped tail then differs
/// from 1 by at most ~|a q^m|/(1-q).
template <class Real>
Real qpoch_infinite(Real a, Real q, Real eps)
{
    using std::abs;
    Real prod(1);
    Real aq = a;
    for (long m = 0; m < kProductCap; ++m) {
        if (abs(aq) < eps)
            return prod;
        prod *= Real(1) - aq;
        aq *= q;
    }
    throw Error(ErrorKind::NonConvergent, "q-product truncation bound exceeded the iteration cap");
}

} // namespace detail

/// q-bracket [x]_q = (1 - q^x)/(1 - q), defined for any real x.
template <class Real>
Real q_bracket(Real x, const QBase<Real>& base)
{
    using std::pow;
    if (x == Real(0))
        return Real(0);
    return (Real(1) - pow(base.q, x)) / (Real(1) - base.q);
}

/// q-shifted factorial (a,q)_order in all three extensions.
///
/// NonNegInt(n): prod_{m=0}^{n-1} (1 - a q^m), with (a,q)_0 = 1.
/// NegInt(n):    1 / prod_{m=1}^{n} (1 - a q^{-m}); a pole whenever a = q^m.
/// Real(x):      (a,q)_inf / (a q^x, q)_inf, both truncated at eps_prod.
template <class Real>
Real q_pochhammer(Real a, const QBase<Real>& base, const PochOrder<Real>& order,
                  Real eps_prod = Real(1e-17))
{
    using std::abs;
    using std::pow;
    if (!(eps_prod > Real(0)))
        throw std::invalid_argument("q_pochhammer requires eps_prod > 0");
    const Real q = base.q;
    switch (order.tag()) {
    case PochOrder<Real>::Tag::NonNegInt: {
        Real prod(1);
        Real aq = a;
        for (long m = 0; m < order.integer(); ++m) {
            prod *= Real(1) - aq;
            aq *= q;
        }
        return prod;
    }
    case PochOrder<Real>::Tag::NegInt: {
        Real denom(1);
        Real qinv = Real(1) / q;
        Real aq = a * qinv; // a q^{-m}, starting at m = 1
        for (long m = 1; m <= order.integer(); ++m) {
            Real factor = Real(1) - aq;
            if (abs(factor) < Real(detail::kSingularFloor))
                throw Error(ErrorKind::SingularPochhammer,
                            "factor 1 - a q^{-" + std::to_string(m) + "} vanishes");
            denom *= factor;
            aq *= qinv;
        }
        return Real(1) / denom;
    }
    case PochOrder<Real>::Tag::Real: {
        Real num = detail::qpoch_infinite(a, q, eps_prod);
        Real den = detail::qpoch_infinite(a * pow(q, order.value()), q, eps_prod);
        if (abs(den) < Real(detail::kSingularFloor))
            throw Error(ErrorKind::SingularPochhammer, "(a q^x, q)_inf vanishes");
        return num / den;
    }
    }
    throw std::logic_error("unreachable");
}

/// Jackson q-derivative D_{x,q} f = (f(qx) - f(x)) / ((q-1) x). The defining
/// quotient divides by x, so x = 0 is rejected.
template <class Real, class F>
Real jackson_derivative(F&& f, Real x, const QBase<Real>& base)
{
    if (x == Real(0))
        throw Error(ErrorKind::ZeroPoint, "Jackson derivative is undefined at x = 0");
    return (f(base.q * x) - f(x)) / ((base.q - Real(1)) * x);
}

/// One component of the cyclic q-bracket split.
template <class Real>
struct SplitComponent {
    std::size_t index; // position k within theta/m
    Real weight;       // (1/K) * (1 + sum of cyclic successor q-powers)
    Real bracket;      // [theta_k m_k]_q
};

/// Splits [theta_1 m_1 + ... + theta_K m_K]_q into K weighted single-index
/// brackets. Component k carries the cyclic-successor prefix powers
/// q^{theta_{k+1} m_{k+1}}, q^{theta_{k+1} m_{k+1} + theta_{k+2} m_{k+2}}, ...
/// and the weighted brackets recombine exactly:
///   sum_k weight_k * bracket_k = [theta . m]_q.
template <class Real>
std::vector<SplitComponent<Real>> split_q_bracket(std::span<const Real> theta,
                                                  std::span<const long> m,
                                                  const QBase<Real>& base)
{
    using std::pow;
    if (theta.size() != m.size() || theta.empty())
        throw Error(ErrorKind::DimensionMismatch,
                    "theta and m must have equal nonzero length");
    const std::size_t K = theta.size();
    std::vector<Real> u(K); // u_k = theta_k m_k
    for (std::size_t k = 0; k < K; ++k)
        u[k] = theta[k] * Real(static_cast<long long>(m[k]));

    std::vector<SplitComponent<Real>> out;
    out.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        Real weight(1);
        Real expo(0);
        for (std::size_t step = 1; step < K; ++step) {
            expo += u[(k + step) % K];
            weight += pow(base.q, expo);
        }
        weight /= Real(static_cast<long long>(K));
        out.push_back({k, weight, q_bracket(u[k], base)});
    }
    return out;
}

} // namespace qlaur
