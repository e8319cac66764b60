#pragma once

#include <vector>

#include "autostat/kernel_expr.hpp"

namespace autostat {

// Canonical form: a flat sum of terms. Nested sums are flattened, products
// are distributed over sums, and the children of sums and products are
// sorted by their text rendering. CP/CW nodes are treated as atoms (their
// arguments are canonicalized in place).
//
// Distribution can duplicate subtrees, so the canonical tree may have more
// slots than the original; slot_origin maps each canonical slot back to the
// original slot it shares a value with. The set of free parameters is
// unchanged.
struct CanonicalForm {
  KernelExpr expr;
  std::vector<int> slot_origin;  // size == param_count(expr)

  ParamVector map_params(const ParamVector& original) const;
};

CanonicalForm canonical_form(const KernelExpr& expr);
KernelExpr canonicalize(const KernelExpr& expr);

// Top-level summands of the canonical form ({expr} when it is not a sum).
std::vector<KernelExpr> maximal_summands(const KernelExpr& canonical);

struct GrammarRules {
  enum class Production {
    AddBase,       // S -> S + B
    MultiplyBase,  // S -> S x B
    ChangePoint,   // S -> CP(S, S)
    ChangeWindow,  // S -> CW(S, S)
    ReplaceBase,   // S -> B
    ReplaceConst,  // S -> C
  };

  std::vector<Production> productions;
  std::vector<NodeKind> bases;

  static GrammarRules standard();
  static GrammarRules empty() { return {}; }
};

// One grammar step. Rewrite sites are the root and each maximal summand of
// the canonical form; the multiply rule additionally applies to each pair of
// summands when there are at most four. Candidates are deduplicated by the
// text of their canonical form (keeping, per duplicate group, a tree with the
// fewest slots) and returned sorted by their own text rendering.
std::vector<KernelExpr> expand(const KernelExpr& expr,
                               const GrammarRules& grammar);

}  // namespace autostat
