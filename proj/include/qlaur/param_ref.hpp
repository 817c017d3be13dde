#pragma once

#include <string>

namespace qlaur {

/// Which parameter block of a series spec a reference points into.
enum class ParamBlock {
    UpperMulti,  // a_j with exponent row theta_j
    LowerMulti,  // c_j with exponent row psi_j
    UpperSingle, // b_j^(i) with exponent phi_j^(i)
    LowerSingle, // d_j^(i) with exponent delta_j^(i)
};

inline const char* to_string(ParamBlock b) noexcept
{
    switch (b) {
    case ParamBlock::UpperMulti: return "upper_multi";
    case ParamBlock::LowerMulti: return "lower_multi";
    case ParamBlock::UpperSingle: return "upper_single";
    case ParamBlock::LowerSingle: return "lower_single";
    }
    return "unknown";
}

inline bool is_single(ParamBlock b) noexcept
{
    return b == ParamBlock::UpperSingle || b == ParamBlock::LowerSingle;
}

inline bool is_lower(ParamBlock b) noexcept
{
    return b == ParamBlock::LowerMulti || b == ParamBlock::LowerSingle;
}

/// Addresses one parameter inside a SeriesSpec. `var` is the variable index
/// for single-index blocks and must be -1 for multi-index blocks.
struct ParamRef {
    ParamBlock block = ParamBlock::UpperMulti;
    int j = 0;
    int var = -1;

    friend bool operator==(const ParamRef&, const ParamRef&) = default;
};

inline std::string to_string(const ParamRef& p)
{
    std::string s = to_string(p.block);
    if (is_single(p.block))
        s += "[var " + std::to_string(p.var) + "]";
    s += "[" + std::to_string(p.j) + "]";
    return s;
}

} // namespace qlaur
