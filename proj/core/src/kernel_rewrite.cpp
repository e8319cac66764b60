#include "autostat/kernel_rewrite.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "autostat/kernel_text.hpp"

namespace autostat {

namespace {

// A subexpression together with, for each of its slots, the index of the
// original slot whose value it carries.
struct Mapped {
  KernelExpr expr;
  std::vector<int> slots;
  std::string text;  // describe(expr), cached for sorting

  void refresh_text() { text = describe(expr); }
};

bool text_less(const Mapped& a, const Mapped& b) { return a.text < b.text; }

Mapped combine_terms(std::vector<Mapped> terms) {
  if (terms.size() == 1) return std::move(terms[0]);
  std::sort(terms.begin(), terms.end(), text_less);
  Mapped out;
  std::vector<KernelExpr> kids;
  kids.reserve(terms.size());
  for (Mapped& t : terms) {
    kids.push_back(std::move(t.expr));
    out.slots.insert(out.slots.end(), t.slots.begin(), t.slots.end());
  }
  out.expr = KernelExpr::sum(std::move(kids));
  out.refresh_text();
  return out;
}

// Canonicalizes the subtree rooted at `n` whose slots start at `off` in the
// original traversal, returning it as a flat list of summands.
std::vector<Mapped> canon_rec(const KernelExpr& n, int off) {
  switch (n.kind) {
    case NodeKind::Sum: {
      std::vector<Mapped> terms;
      int child_off = off;
      for (const KernelExpr& c : n.children) {
        std::vector<Mapped> sub = canon_rec(c, child_off);
        child_off += param_count(c);
        for (Mapped& t : sub) terms.push_back(std::move(t));
      }
      return terms;
    }
    case NodeKind::Product: {
      // Distribute: the summands of the product are all ways of picking one
      // summand from each child.
      std::vector<std::vector<Mapped>> picks;
      int child_off = off;
      for (const KernelExpr& c : n.children) {
        picks.push_back(canon_rec(c, child_off));
        child_off += param_count(c);
      }
      std::vector<Mapped> terms;
      std::vector<size_t> idx(picks.size(), 0);
      for (;;) {
        // Gather factors, flattening nested products.
        std::vector<Mapped> factors;
        for (size_t i = 0; i < picks.size(); ++i) {
          const Mapped& pick = picks[i][idx[i]];
          if (pick.expr.kind == NodeKind::Product) {
            int foff = 0;
            for (const KernelExpr& f : pick.expr.children) {
              Mapped part;
              part.expr = f;
              int fc = param_count(f);
              part.slots.assign(pick.slots.begin() + foff,
                                pick.slots.begin() + foff + fc);
              foff += fc;
              part.refresh_text();
              factors.push_back(std::move(part));
            }
          } else {
            factors.push_back(pick);
          }
        }
        std::sort(factors.begin(), factors.end(), text_less);
        Mapped term;
        if (factors.size() == 1) {
          term = std::move(factors[0]);
        } else {
          std::vector<KernelExpr> kids;
          kids.reserve(factors.size());
          for (Mapped& f : factors) {
            kids.push_back(std::move(f.expr));
            term.slots.insert(term.slots.end(), f.slots.begin(),
                              f.slots.end());
          }
          term.expr = KernelExpr::product(std::move(kids));
          term.refresh_text();
        }
        terms.push_back(std::move(term));
        // Advance the odometer.
        size_t i = 0;
        for (; i < picks.size(); ++i) {
          if (++idx[i] < picks[i].size()) break;
          idx[i] = 0;
        }
        if (i == picks.size()) break;
      }
      return terms;
    }
    case NodeKind::ChangePoint:
    case NodeKind::ChangeWindow: {
      int own = own_slot_count(n);
      Mapped out;
      out.slots.resize(static_cast<size_t>(own));
      std::iota(out.slots.begin(), out.slots.end(), off);
      int child_off = off + own;
      std::vector<KernelExpr> kids;
      for (const KernelExpr& c : n.children) {
        Mapped sub = combine_terms(canon_rec(c, child_off));
        child_off += param_count(c);
        kids.push_back(std::move(sub.expr));
        out.slots.insert(out.slots.end(), sub.slots.begin(), sub.slots.end());
      }
      out.expr = {n.kind, 0, std::move(kids)};
      out.refresh_text();
      return {std::move(out)};
    }
    default: {  // base kernels
      Mapped out;
      out.expr = n;
      out.slots.resize(static_cast<size_t>(own_slot_count(n)));
      std::iota(out.slots.begin(), out.slots.end(), off);
      out.refresh_text();
      return {std::move(out)};
    }
  }
}

}  // namespace

CanonicalForm canonical_form(const KernelExpr& expr) {
  Mapped m = combine_terms(canon_rec(expr, 0));
  return CanonicalForm{std::move(m.expr), std::move(m.slots)};
}

KernelExpr canonicalize(const KernelExpr& expr) {
  return canonical_form(expr).expr;
}

ParamVector CanonicalForm::map_params(const ParamVector& original) const {
  ParamVector out;
  out.slots = param_layout(expr);
  out.values.resize(static_cast<Eigen::Index>(slot_origin.size()));
  for (size_t i = 0; i < slot_origin.size(); ++i) {
    int src = slot_origin[i];
    if (src < 0 || src >= original.size())
      throw std::invalid_argument("canonical slot map out of range");
    out.values[static_cast<Eigen::Index>(i)] = original.values[src];
  }
  return out;
}

std::vector<KernelExpr> maximal_summands(const KernelExpr& canonical) {
  if (canonical.kind == NodeKind::Sum) return canonical.children;
  return {canonical};
}

GrammarRules GrammarRules::standard() {
  GrammarRules g;
  g.productions = {
      Production::AddBase,     Production::MultiplyBase,
      Production::ChangePoint, Production::ChangeWindow,
      Production::ReplaceBase, Production::ReplaceConst,
  };
  g.bases = {NodeKind::WhiteNoise, NodeKind::Constant, NodeKind::Linear,
             NodeKind::SquaredExp, NodeKind::Periodic};
  return g;
}

namespace {

KernelExpr base_expr(NodeKind kind) {
  switch (kind) {
    case NodeKind::WhiteNoise:
      return KernelExpr::white_noise();
    case NodeKind::Constant:
      return KernelExpr::constant();
    case NodeKind::Linear:
      return KernelExpr::linear();
    case NodeKind::SquaredExp:
      return KernelExpr::squared_exp();
    case NodeKind::Periodic:
      return KernelExpr::periodic();
    default:
      throw std::invalid_argument("grammar base must be a base kernel kind");
  }
}

// The current expression with summand i replaced (or, when the replacement is
// dropped into a single-summand expression, just the replacement).
KernelExpr with_summand(const std::vector<KernelExpr>& summands, size_t i,
                        KernelExpr replacement) {
  if (summands.size() == 1) return replacement;
  std::vector<KernelExpr> kids = summands;
  kids[i] = std::move(replacement);
  return KernelExpr::sum(std::move(kids));
}

}  // namespace

std::vector<KernelExpr> expand(const KernelExpr& expr,
                               const GrammarRules& grammar) {
  using Production = GrammarRules::Production;
  const KernelExpr root = canonicalize(expr);
  const std::vector<KernelExpr> summands = maximal_summands(root);
  const size_t m = summands.size();

  std::vector<KernelExpr> raw;
  auto emit = [&raw](KernelExpr e) { raw.push_back(std::move(e)); };

  for (Production prod : grammar.productions) {
    switch (prod) {
      case Production::AddBase:
        for (NodeKind bk : grammar.bases) {
          std::vector<KernelExpr> kids = summands;
          kids.push_back(base_expr(bk));
          emit(KernelExpr::sum(std::move(kids)));
          for (size_t i = 0; i < m && m > 1; ++i)
            emit(with_summand(summands, i,
                              KernelExpr::sum({summands[i], base_expr(bk)})));
        }
        break;
      case Production::MultiplyBase:
        for (NodeKind bk : grammar.bases) {
          emit(KernelExpr::product({root, base_expr(bk)}));
          for (size_t i = 0; i < m && m > 1; ++i)
            emit(with_summand(
                summands, i, KernelExpr::product({summands[i], base_expr(bk)})));
          if (m >= 2 && m <= 4) {
            for (size_t i = 0; i < m; ++i) {
              for (size_t j = i + 1; j < m; ++j) {
                KernelExpr pair = KernelExpr::product(
                    {KernelExpr::sum({summands[i], summands[j]}),
                     base_expr(bk)});
                std::vector<KernelExpr> rest;
                for (size_t k = 0; k < m; ++k)
                  if (k != i && k != j) rest.push_back(summands[k]);
                rest.push_back(std::move(pair));
                emit(rest.size() == 1 ? std::move(rest[0])
                                      : KernelExpr::sum(std::move(rest)));
              }
            }
          }
        }
        break;
      case Production::ChangePoint:
        emit(KernelExpr::change_point(root, root));
        for (size_t i = 0; i < m && m > 1; ++i)
          emit(with_summand(summands, i,
                            KernelExpr::change_point(summands[i], summands[i])));
        break;
      case Production::ChangeWindow:
        emit(KernelExpr::change_window(root, root));
        for (size_t i = 0; i < m && m > 1; ++i)
          emit(with_summand(summands, i,
                            KernelExpr::change_window(summands[i], summands[i])));
        break;
      case Production::ReplaceBase:
        for (NodeKind bk : grammar.bases) {
          emit(base_expr(bk));
          for (size_t i = 0; i < m && m > 1; ++i)
            emit(with_summand(summands, i, base_expr(bk)));
        }
        break;
      case Production::ReplaceConst:
        emit(KernelExpr::constant());
        for (size_t i = 0; i < m && m > 1; ++i)
          emit(with_summand(summands, i, KernelExpr::constant()));
        break;
    }
  }

  // Deduplicate by canonical text, keeping the cheapest tree (fewest slots)
  // for each equivalence class; generation order breaks remaining ties.
  std::map<std::string, size_t> chosen;
  std::vector<KernelExpr> kept;
  for (KernelExpr& cand : raw) {
    std::string key = describe(canonicalize(cand));
    auto it = chosen.find(key);
    if (it == chosen.end()) {
      chosen.emplace(std::move(key), kept.size());
      kept.push_back(std::move(cand));
    } else if (param_count(cand) < param_count(kept[it->second])) {
      kept[it->second] = std::move(cand);
    }
  }
  std::sort(kept.begin(), kept.end(),
            [](const KernelExpr& a, const KernelExpr& b) {
              return describe(a) < describe(b);
            });
  return kept;
}

}  // namespace autostat
