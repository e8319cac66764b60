#pragma once

#include <string>

#include "autostat/kernel_expr.hpp"

namespace autostat {

// Compact text form. Bases render as WN, CONST, LIN, SE, PER and SM<q>;
// sums and products are infix ("WN + SE × LIN", product binds tighter);
// change operators render as CP(a, b) and CW(a, b). Parentheses appear
// exactly where needed to reproduce the tree shape, so
// parse_kernel(describe(e)) == e.
std::string describe(const KernelExpr& expr);

// Inverse of describe. Also accepts "C" for CONST and "*" for the product
// sign, and ignores whitespace. Throws ParseError (with byte offset) on
// malformed text.
KernelExpr parse_kernel(const std::string& text);

}  // namespace autostat
