#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qlaur/errors.hpp"
#include "qlaur/param_ref.hpp"
#include "qlaur/qcore.hpp"

namespace qlaur {

/// Summation multi-index s = (s_1, ..., s_n).
using MultiIndex = std::vector<int>;

template <class Real>
struct MultiParam {
    Real value;                  // a_j or c_j
    std::vector<Real> exponents; // theta_j or psi_j row, length n_vars, entries >= 0

    friend bool operator==(const MultiParam&, const MultiParam&) = default;
};

template <class Real>
struct SingleParam {
    Real value;    // b_j^(i) or d_j^(i)
    Real exponent; // phi_j^(i) or delta_j^(i), >= 0

    friend bool operator==(const SingleParam&, const SingleParam&) = default;
};

/// Full descriptor of a Srivastava-Daoust basic series: the base q, the
/// variable count and the four parameter blocks with their exponent data.
template <class Real>
struct SeriesSpec {
    int n_vars;
    QBase<Real> base;
    std::vector<MultiParam<Real>> upper_multi;                // a_j : theta_j
    std::vector<MultiParam<Real>> lower_multi;                // c_j : psi_j
    std::vector<std::vector<SingleParam<Real>>> upper_single; // [var][j] : b, phi
    std::vector<std::vector<SingleParam<Real>>> lower_single; // [var][j] : d, delta

    friend bool operator==(const SeriesSpec&, const SeriesSpec&) = default;
};

/// Truncation and tolerance policy for the summation engine.
struct EvalConfig {
    double eps_term = 1e-16;   // tail threshold, applied as eps_term * max(1, |sum|)
    int n_max_per_index = 200; // hard cap per summation index
    double eps_prod = 1e-17;   // infinite-product truncation threshold
    int shell_stall = 3;       // consecutive negligible shells before stopping
};

template <class Real>
struct EvalResult {
    Real value{};
    int shells_used = 0;
    Real last_shell_magnitude{};
    bool truncated = false; // a per-index cap clipped terms before convergence
};

/// Represents "q^sigma z" variable substitutions and parameter replacements
/// without mutating the spec. Used by the derivative expansions, which reuse
/// one spec under many small shifts.
template <class Real>
struct ShiftState {
    std::vector<Real> q_power_shifts;                       // sigma, empty means all zero
    std::vector<std::pair<ParamRef, Real>> param_overrides; // (ref, new value)
};

struct Diagnostic {
    enum class Code {
        DimensionMismatch,
        NegativeExponent,
        SingularLowerParameter,
        InvalidConfig,
    };
    Code code;
    std::string detail;
};

inline const char* to_string(Diagnostic::Code c) noexcept
{
    switch (c) {
    case Diagnostic::Code::DimensionMismatch: return "DimensionMismatch";
    case Diagnostic::Code::NegativeExponent: return "NegativeExponent";
    case Diagnostic::Code::SingularLowerParameter: return "SingularLowerParameter";
    case Diagnostic::Code::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

/// Read a parameter value addressed by a ParamRef.
template <class Real>
Real param_value(const SeriesSpec<Real>& spec, const ParamRef& p)
{
    auto in_range = [](const auto& v, int i) { return i >= 0 && i < static_cast<int>(v.size()); };
    switch (p.block) {
    case ParamBlock::UpperMulti:
        if (!in_range(spec.upper_multi, p.j))
            break;
        return spec.upper_multi[p.j].value;
    case ParamBlock::LowerMulti:
        if (!in_range(spec.lower_multi, p.j))
            break;
        return spec.lower_multi[p.j].value;
    case ParamBlock::UpperSingle:
        if (!in_range(spec.upper_single, p.var) || !in_range(spec.upper_single[p.var], p.j))
            break;
        return spec.upper_single[p.var][p.j].value;
    case ParamBlock::LowerSingle:
        if (!in_range(spec.lower_single, p.var) || !in_range(spec.lower_single[p.var], p.j))
            break;
        return spec.lower_single[p.var][p.j].value;
    }
    throw std::invalid_argument("ParamRef does not address an existing parameter: " + to_string(p));
}

/// Exponent data of the addressed parameter as a full row over all variables
/// (single-index blocks yield phi * e_var).
template <class Real>
std::vector<Real> exponent_row(const SeriesSpec<Real>& spec, const ParamRef& p)
{
    std::vector<Real> row(spec.n_vars, Real(0));
    switch (p.block) {
    case ParamBlock::UpperMulti: return spec.upper_multi.at(p.j).exponents;
    case ParamBlock::LowerMulti: return spec.lower_multi.at(p.j).exponents;
    case ParamBlock::UpperSingle:
        row.at(p.var) = spec.upper_single.at(p.var).at(p.j).exponent;
        return row;
    case ParamBlock::LowerSingle:
        row.at(p.var) = spec.lower_single.at(p.var).at(p.j).exponent;
        return row;
    }
    throw std::logic_error("unreachable");
}

/// Copy of the spec with override values swapped in.
template <class Real>
SeriesSpec<Real> apply_overrides(const SeriesSpec<Real>& spec,
                                 std::span<const std::pair<ParamRef, Real>> overrides)
{
    SeriesSpec<Real> out = spec;
    for (const auto& [ref, value] : overrides) {
        param_value(spec, ref); // existence check
        switch (ref.block) {
        case ParamBlock::UpperMulti: out.upper_multi[ref.j].value = value; break;
        case ParamBlock::LowerMulti: out.lower_multi[ref.j].value = value; break;
        case ParamBlock::UpperSingle: out.upper_single[ref.var][ref.j].value = value; break;
        case ParamBlock::LowerSingle: out.lower_single[ref.var][ref.j].value = value; break;
        }
    }
    return out;
}

namespace detail {

/// q-Pochhammer of possibly real order r >= 0, routing integer-valued orders
/// to the exact finite product and everything else to the infinite-product
/// ratio.
template <class Real>
Real poch_of_order(Real a, const QBase<Real>& base, Real r, Real eps_prod)
{
    using std::abs;
    using std::round;
    const Real r_round = round(r);
    if (abs(r - r_round) < Real(1e-9)) {
        const long n = static_cast<long>(r_round);
        Real prod(1);
        Real aq = a;
        for (long m = 0; m < n; ++m) {
            prod *= Real(1) - aq;
            aq *= base.q;
        }
        return prod;
    }
    return q_pochhammer(a, base, PochOrder<Real>::real(r), eps_prod);
}

template <class Real>
Real dot_order(std::span<const Real> exponents, const MultiIndex& s)
{
    Real r(0);
    for (std::size_t i = 0; i < exponents.size(); ++i)
        r += exponents[i] * Real(s[i]);
    return r;
}

/// Omega(s): the ratio of parameter Pochhammers of Eq-level orders
/// theta_j.s, phi_j s_i over psi_j.s, delta_j s_i. Lower factors near zero
/// are poles and raise SingularPochhammer.
template <class Real>
Real omega_core(const SeriesSpec<Real>& spec, const MultiIndex& s, Real eps_prod)
{
    using std::abs;
    Real value(1);
    for (const auto& p : spec.upper_multi)
        value *= poch_of_order(p.value, spec.base, dot_order<Real>(p.exponents, s), eps_prod);
    for (int i = 0; i < spec.n_vars; ++i)
        for (const auto& p : spec.upper_single[i])
            value *= poch_of_order(p.value, spec.base, p.exponent * Real(s[i]), eps_prod);
    for (const auto& p : spec.lower_multi) {
        Real den = poch_of_order(p.value, spec.base, dot_order<Real>(p.exponents, s), eps_prod);
        if (abs(den) < Real(kSingularFloor))
            throw Error(ErrorKind::SingularPochhammer,
                        "lower multi-index Pochhammer vanishes at order sum");
        value /= den;
    }
    for (int i = 0; i < spec.n_vars; ++i)
        for (const auto& p : spec.lower_single[i]) {
            Real den = poch_of_order(p.value, spec.base, p.exponent * Real(s[i]), eps_prod);
            if (abs(den) < Real(kSingularFloor))
                throw Error(ErrorKind::SingularPochhammer,
                            "lower single-index Pochhammer vanishes");
            value /= den;
        }
    return value;
}

/// Enumerates the shell {s : |s| = total, 0 <= s_i <= cap} in lexicographic
/// order.
inline void enumerate_shell(int total, int n, int cap, std::vector<MultiIndex>& out)
{
    out.clear();
    MultiIndex s(static_cast<std::size_t>(n), 0);
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == n - 1) {
            if (remaining <= cap) {
                s[pos] = remaining;
                out.push_back(s);
            }
            return;
        }
        const int hi = std::min(cap, remaining);
        for (int v = 0; v <= hi; ++v) {
            s[pos] = v;
            self(self, pos + 1, remaining - v);
        }
    };
    rec(rec, 0, total);
}

/// Everything the shell engine needs to form one weighted/shifted sum:
///   sum_s  [scale * s_k]_q  *  Omega'(s)  *  prod_i q^{sigma_i s_i} x_i^{s_i - [i==deriv]} / (q,q)_{s_i}
/// with the bracket factor present only when bracket_var >= 0 and the x-power
/// stripped only for deriv_var (terms with s_deriv = 0 are then absent).
template <class Real>
struct SumOptions {
    std::vector<Real> sigma;
    std::vector<std::pair<ParamRef, Real>> overrides;
    int bracket_var = -1;
    Real bracket_scale{0};
    int deriv_var = -1;
    std::vector<Real>* shell_trace = nullptr; // optional per-shell magnitude sink
};

/// Shell-summed series evaluation. Terms are grouped in shells of constant
/// total degree |s|; the magnitude of a shell is the sum of |term| over the
/// shell (robust against sign cancellation inside a shell). Summation stops
/// once shell_stall consecutive shells fall below eps_term * max(1, |sum|),
/// raises NonConvergent after five consecutive growing shells, and reports
/// truncation when the per-index cap dropped terms before convergence.
///
/// Within a shell every term is independent; term evaluation is the
/// data-parallel kernel. Accumulation stays in lexicographic order regardless
/// of thread count, so results are bit-reproducible.
template <class Real>
EvalResult<Real> shell_sum(const SeriesSpec<Real>& spec, std::span<const Real> x,
                           const SumOptions<Real>& opt, const EvalConfig& cfg)
{
    using std::abs;
    using std::pow;
    const int n = spec.n_vars;
    if (static_cast<int>(x.size()) != n)
        throw Error(ErrorKind::DimensionMismatch, "evaluation point has wrong dimension");
    if (!opt.sigma.empty() && static_cast<int>(opt.sigma.size()) != n)
        throw Error(ErrorKind::DimensionMismatch, "shift vector has wrong dimension");

    const SeriesSpec<Real> resolved =
        opt.overrides.empty() ? spec : apply_overrides<Real>(spec, opt.overrides);
    const Real q = spec.base.q;
    const Real eps_prod = Real(cfg.eps_prod);
    const int cap = cfg.n_max_per_index;

    // Per-call tables for the non-Omega factors: (q,q)_k, x_i^k and the
    // q^{sigma_i k} shift powers (computed by direct pow for exactness).
    std::vector<Real> qq{Real(1)};
    Real qpow = q; // q^{k} for the next (q,q)_k factor
    std::vector<std::vector<Real>> xpow(n, std::vector<Real>{Real(1)});
    std::vector<std::vector<Real>> sigpow(n);
    auto grow_tables = [&](int k_max) {
        while (static_cast<int>(qq.size()) <= k_max) {
            qq.push_back(qq.back() * (Real(1) - qpow));
            qpow *= q;
        }
        for (int i = 0; i < n; ++i) {
            while (static_cast<int>(xpow[i].size()) <= k_max)
                xpow[i].push_back(xpow[i].back() * x[i]);
            if (!opt.sigma.empty() && opt.sigma[i] != Real(0))
                while (static_cast<int>(sigpow[i].size()) <= k_max)
                    sigpow[i].push_back(pow(q, opt.sigma[i] * Real(sigpow[i].size())));
        }
    };

    auto term_value = [&](const MultiIndex& s) -> Real {
        Real w(1);
        if (opt.bracket_var >= 0) {
            w = q_bracket(opt.bracket_scale * Real(s[opt.bracket_var]), spec.base);
            if (w == Real(0))
                return Real(0);
        }
        if (opt.deriv_var >= 0 && s[opt.deriv_var] == 0)
            return Real(0);
        Real f = w * omega_core(resolved, s, eps_prod);
        for (int i = 0; i < n; ++i) {
            const int si = s[i];
            if (!sigpow[i].empty())
                f *= sigpow[i][si];
            f *= xpow[i][si - (i == opt.deriv_var ? 1 : 0)];
            f /= qq[si];
        }
        return f;
    };

    Real acc(0);
    Real prev_mag(0);
    Real last_mag(0);
    int stall = 0;
    int growing = 0;
    int shells = 0;
    bool converged = false;
    int t_stop = 0;
    const int t_max = n * cap;

    std::vector<MultiIndex> shell;
    std::vector<Real> terms;
    for (int t = 0; t <= t_max; ++t) {
        enumerate_shell(t, n, cap, shell);
        if (shell.empty())
            break; // index box exhausted (only for n = 1 past the cap)
        grow_tables(std::min(t, cap));
        t_stop = t;

        const std::size_t m = shell.size();
        terms.assign(m, Real(0));
        std::exception_ptr err;
        std::mutex err_mu;
#ifdef _OPENMP
        const bool run_par = m >= 64;
#pragma omp parallel for schedule(static) if (run_par)
#endif
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) {
            try {
                terms[i] = term_value(shell[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err)
                    err = std::current_exception();
            }
        }
        if (err)
            std::rethrow_exception(err);

        Real shell_value(0);
        Real shell_mag(0);
        for (const Real& v : terms) {
            shell_value += v;
            shell_mag += abs(v);
        }
        acc += shell_value;
        last_mag = shell_mag;
        ++shells;
        if (opt.shell_trace)
            opt.shell_trace->push_back(shell_mag);

        const Real thresh = Real(cfg.eps_term) * std::max(Real(1), abs(acc));
        if (shell_mag <= thresh) {
            stall += 1;
            if (stall >= cfg.shell_stall) {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
        if (t >= 1 && shell_mag > prev_mag && shell_mag > Real(1e-250)) {
            growing += 1;
            if (growing >= 5)
                throw Error(ErrorKind::NonConvergent,
                            "shell magnitudes grew for 5 consecutive shells");
        } else {
            growing = 0;
        }
        prev_mag = shell_mag;
    }

    EvalResult<Real> result;
    result.value = acc;
    result.shells_used = shells;
    result.last_shell_magnitude = last_mag;
    result.truncated = !converged || t_stop > cap;
    return result;
}

} // namespace detail

/// Structural and numeric guards for a spec. Returns an empty list iff the
/// spec), under cfg, is safe to evaluate: exponent rows sized n_vars and
/// non-negative, positive config, and no lower parameter sitting on (or
/// within 1e-9 of) the q^{-m} pole lattice where its Pochhammer denominator
/// would vanish.
template <class Real>
std::vector<Diagnostic> validate(const SeriesSpec<Real>& spec, const EvalConfig& cfg)
{
    using std::abs;
    std::vector<Diagnostic> out;
    const int n = spec.n_vars;
    if (n < 1) {
        out.push_back({Diagnostic::Code::DimensionMismatch, "n_vars must be >= 1"});
        return out;
    }
    if (!(cfg.eps_term > 0) || !(cfg.eps_prod > 0) || cfg.n_max_per_index < 1 ||
        cfg.shell_stall < 1)
        out.push_back({Diagnostic::Code::InvalidConfig, "all config fields must be positive"});

    auto check_multi = [&](const std::vector<MultiParam<Real>>& block, const char* name) {
        for (std::size_t j = 0; j < block.size(); ++j) {
            if (static_cast<int>(block[j].exponents.size()) != n)
                out.push_back({Diagnostic::Code::DimensionMismatch,
                               std::string(name) + "[" + std::to_string(j) +
                                   "] exponent row length != n_vars"});
            for (const Real& e : block[j].exponents)
                if (e < Real(0))
                    out.push_back({Diagnostic::Code::NegativeExponent,
                                   std::string(name) + "[" + std::to_string(j) +
                                       "] has a negative exponent"});
        }
    };
    auto check_single = [&](const std::vector<std::vector<SingleParam<Real>>>& block,
                            const char* name) {
        if (static_cast<int>(block.size()) != n) {
            out.push_back({Diagnostic::Code::DimensionMismatch,
                           std::string(name) + " must have one list per variable"});
            return;
        }
        for (int i = 0; i < n; ++i)
            for (std::size_t j = 0; j < block[i].size(); ++j)
                if (block[i][j].exponent < Real(0))
                    out.push_back({Diagnostic::Code::NegativeExponent,
                                   std::string(name) + "[var " + std::to_string(i) + "][" +
                                       std::to_string(j) + "] has a negative exponent"});
    };
    check_multi(spec.upper_multi, "upper_multi");
    check_multi(spec.lower_multi, "lower_multi");
    check_single(spec.upper_single, "upper_single");
    check_single(spec.lower_single, "lower_single");
    if (!out.empty())
        return out;

    // Denominator pole scan: a lower value v makes some factor 1 - v q^m
    // vanish iff v lies on the q^{-m} lattice; beyond |v| q^m < 1/2 no factor
    // can come close, so the scan window is short.
    auto scan_lower = [&](Real v, const std::string& where) {
        Real vq = v;
        for (long m = 0; abs(vq) >= Real(0.5) && m < detail::kProductCap; ++m) {
            if (abs(Real(1) - vq) < Real(1e-9)) {
                out.push_back({Diagnostic::Code::SingularLowerParameter,
                               where + " lies on the q^{-" + std::to_string(m) +
                                   "} pole lattice"});
                return;
            }
            vq *= spec.base.q;
        }
    };
    auto row_active = [](const std::vector<Real>& row) {
        for (const Real& e : row)
            if (e > Real(0))
                return true;
        return false;
    };
    for (std::size_t j = 0; j < spec.lower_multi.size(); ++j)
        if (row_active(spec.lower_multi[j].exponents))
            scan_lower(spec.lower_multi[j].value, "lower_multi[" + std::to_string(j) + "]");
    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < spec.lower_single[i].size(); ++j)
            if (spec.lower_single[i][j].exponent > Real(0))
                scan_lower(spec.lower_single[i][j].value,
                           "lower_single[var " + std::to_string(i) + "][" + std::to_string(j) +
                               "]");
    return out;
}

/// Omega(s) for one multi-index.
template <class Real>
Real omega(const SeriesSpec<Real>& spec, const MultiIndex& s, const EvalConfig& cfg = {})
{
    if (static_cast<int>(s.size()) != spec.n_vars)
        throw Error(ErrorKind::DimensionMismatch, "multi-index has wrong dimension");
    return detail::omega_core(spec, s, Real(cfg.eps_prod));
}

/// Shell-summed evaluation of the series at x, optionally under a shift
/// state:  sum_s Omega'(s) prod_i (q^{sigma_i} x_i)^{s_i} / (q,q)_{s_i}.
template <class Real>
EvalResult<Real> evaluate(const SeriesSpec<Real>& spec, std::span<const Real> x,
                          const EvalConfig& cfg = {}, const ShiftState<Real>& shift = {})
{
    detail::SumOptions<Real> opt;
    opt.sigma = shift.q_power_shifts;
    opt.overrides = shift.param_overrides;
    return detail::shell_sum(spec, x, opt, cfg);
}

/// q-derivative of the (shifted) series with respect to variable k, in series
/// form: sum_s [s_k]_q Omega'(s) ... x_k^{s_k - 1}. Regular at x_k = 0, where
/// it reduces to the s_k = 1 shell coefficient.
template <class Real>
Real variable_derivative(const SeriesSpec<Real>& spec, std::span<const Real> x, int k,
                         const EvalConfig& cfg = {}, const ShiftState<Real>& shift = {})
{
    if (k < 0 || k >= spec.n_vars)
        throw Error(ErrorKind::DimensionMismatch, "variable index out of range");
    detail::SumOptions<Real> opt;
    opt.sigma = shift.q_power_shifts;
    opt.overrides = shift.param_overrides;
    opt.bracket_var = k;
    opt.bracket_scale = Real(1);
    opt.deriv_var = k;
    return detail::shell_sum(spec, x, opt, cfg).value;
}

/// Coefficient-level building block of the derivative theorems:
///   sum_s [theta_k s_k]_q * prod_{j in prefix} q^{theta_j s_j} * Omega'(s)
///        * prod_i x_i^{s_i} / (q,q)_{s_i},
/// i.e. the value of "z_k D_{z_k,q} F(..., z_k^{theta_k}, ...)" with unit
/// powers restored.
template <class Real>
Real weighted_evaluate(const SeriesSpec<Real>& spec, std::span<const Real> x, int k,
                       std::span<const Real> theta_row, std::span<const int> prefix,
                       const EvalConfig& cfg = {}, const ShiftState<Real>& shift = {})
{
    if (k < 0 || k >= spec.n_vars)
        throw Error(ErrorKind::DimensionMismatch, "target variable index out of range");
    if (static_cast<int>(theta_row.size()) != spec.n_vars)
        throw Error(ErrorKind::DimensionMismatch, "theta row has wrong dimension");
    detail::SumOptions<Real> opt;
    opt.sigma = shift.q_power_shifts;
    if (opt.sigma.empty())
        opt.sigma.assign(spec.n_vars, Real(0));
    for (int j : prefix) {
        if (j < 0 || j >= spec.n_vars)
            throw Error(ErrorKind::DimensionMismatch, "prefix variable index out of range");
        if (j == k)
            throw std::invalid_argument("target variable may not appear in the prefix");
        opt.sigma[j] += theta_row[j];
    }
    opt.overrides = shift.param_overrides;
    opt.bracket_var = k;
    opt.bracket_scale = theta_row[k];
    return detail::shell_sum(spec, x, opt, cfg).value;
}

} // namespace qlaur
