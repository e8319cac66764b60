#include "autostat/kernel_text.hpp"

#include <cctype>
#include <string>

#include "autostat/errors.hpp"

namespace autostat {

namespace {

constexpr const char* kTimes = "\xc3\x97";  // U+00D7

void render(const KernelExpr& e, std::string& out) {
  switch (e.kind) {
    case NodeKind::WhiteNoise:
      out += "WN";
      return;
    case NodeKind::Constant:
      out += "CONST";
      return;
    case NodeKind::Linear:
      out += "LIN";
      return;
    case NodeKind::SquaredExp:
      out += "SE";
      return;
    case NodeKind::Periodic:
      out += "PER";
      return;
    case NodeKind::SpectralMixture:
      out += "SM";
      out += std::to_string(e.sm_components);
      return;
    case NodeKind::Sum:
      for (size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += " + ";
        const KernelExpr& c = e.children[i];
        bool parens = c.kind == NodeKind::Sum;
        if (parens) out += '(';
        render(c, out);
        if (parens) out += ')';
      }
      return;
    case NodeKind::Product:
      for (size_t i = 0; i < e.children.size(); ++i) {
        if (i) {
          out += ' ';
          out += kTimes;
          out += ' ';
        }
        const KernelExpr& c = e.children[i];
        bool parens = c.kind == NodeKind::Sum || c.kind == NodeKind::Product;
        if (parens) out += '(';
        render(c, out);
        if (parens) out += ')';
      }
      return;
    case NodeKind::ChangePoint:
    case NodeKind::ChangeWindow:
      out += e.kind == NodeKind::ChangePoint ? "CP(" : "CW(";
      render(e.children[0], out);
      out += ", ";
      render(e.children[1], out);
      out += ')';
      return;
  }
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  KernelExpr run() {
    KernelExpr e = parse_sum();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing text");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("kernel text: " + what + " at offset " +
                         std::to_string(pos_),
                     pos_);
  }

  void skip_ws() {
    while (pos_ < s_.size() &&
           std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool eat_times() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '*') {
      ++pos_;
      return true;
    }
    if (pos_ + 1 < s_.size() && s_[pos_] == '\xc3' && s_[pos_ + 1] == '\x97') {
      pos_ += 2;
      return true;
    }
    return false;
  }

  KernelExpr parse_sum() {
    std::vector<KernelExpr> terms;
    terms.push_back(parse_product());
    while (eat('+')) terms.push_back(parse_product());
    if (terms.size() == 1) return std::move(terms[0]);
    return KernelExpr::sum(std::move(terms));
  }

  KernelExpr parse_product() {
    std::vector<KernelExpr> factors;
    factors.push_back(parse_factor());
    while (eat_times()) factors.push_back(parse_factor());
    if (factors.size() == 1) return std::move(factors[0]);
    return KernelExpr::product(std::move(factors));
  }

  KernelExpr parse_factor() {
    skip_ws();
    if (pos_ >= s_.size()) fail("expected a kernel expression");
    if (s_[pos_] == '(') {
      ++pos_;
      KernelExpr e = parse_sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (!std::isalpha(static_cast<unsigned char>(s_[pos_])))
      fail("expected a kernel name");
    size_t start = pos_;
    while (pos_ < s_.size() &&
           std::isalpha(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
    std::string name = s_.substr(start, pos_ - start);

    if (name == "CP" || name == "CW") {
      if (!eat('(')) fail("expected '(' after " + name);
      KernelExpr a = parse_sum();
      if (!eat(',')) fail("expected ',' in " + name);
      KernelExpr b = parse_sum();
      if (!eat(')')) fail("expected ')' closing " + name);
      return name == "CP" ? KernelExpr::change_point(std::move(a), std::move(b))
                          : KernelExpr::change_window(std::move(a), std::move(b));
    }
    if (name == "WN") return KernelExpr::white_noise();
    if (name == "C" || name == "CONST") return KernelExpr::constant();
    if (name == "LIN") return KernelExpr::linear();
    if (name == "SE") return KernelExpr::squared_exp();
    if (name == "PER") return KernelExpr::periodic();
    if (name == "SM") {
      size_t digits = pos_;
      while (pos_ < s_.size() &&
             std::isdigit(static_cast<unsigned char>(s_[pos_])))
        ++pos_;
      if (pos_ == digits) fail("SM needs a component count, e.g. SM3");
      int q = 0;
      for (size_t i = digits; i < pos_; ++i) {
        q = q * 10 + (s_[i] - '0');
        if (q > 64) fail("SM component count out of range");
      }
      if (q < 1) fail("SM needs at least one component");
      return KernelExpr::spectral_mixture(q);
    }
    pos_ = start;
    fail("unknown kernel name '" + name + "'");
  }

  const std::string& s_;
  size_t pos_ = 0;
};

}  // namespace

std::string describe(const KernelExpr& expr) {
  std::string out;
  render(expr, out);
  return out;
}

KernelExpr parse_kernel(const std::string& text) { return Parser(text).run(); }

}  // namespace autostat
