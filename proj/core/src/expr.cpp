#include "qml/expr.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <numbers>

namespace qml {

namespace {

std::uint64_t bit(int k) {
  if (k < 0 || k >= 64) throw DimensionError("variable index out of supported range");
  return std::uint64_t{1} << k;
}

}  // namespace

NodePtr make_const(double c) {
  auto node = std::make_shared<Node>();
  node->op = Op::Const;
  node->value = c;
  return node;
}

NodePtr make_var(int index) {
  auto node = std::make_shared<Node>();
  node->op = Op::Var;
  node->var = index;
  node->deps = bit(index);
  return node;
}

NodePtr make_unary(Op op, NodePtr a) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->deps = a->deps;
  node->lhs = std::move(a);
  return node;
}

NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->deps = a->deps | b->deps;
  node->lhs = std::move(a);
  node->rhs = std::move(b);
  return node;
}

NodePtr make_bracket(NodePtr f, NodePtr g, int n) {
  auto node = std::make_shared<Node>();
  node->op = Op::Bracket;
  node->dim = n;
  node->deps = f->deps | g->deps;
  node->lhs = std::move(f);
  node->rhs = std::move(g);
  return node;
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, int n) : text_(text), n_(n) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make_binary(Op::Add, lhs, term());
      else if (accept('-'))
        lhs = make_binary(Op::Sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make_binary(Op::Mul, lhs, unary());
      else if (accept('/'))
        lhs = make_binary(Op::Div, lhs, unary());
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_unary(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_binary(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if (c == '{') {
      ++pos_;
      NodePtr f = expr();
      expect(',');
      NodePtr g = expr();
      expect('}');
      return make_bracket(f, g, n_);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    std::size_t stop = pos_;
    while (stop < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[stop])) || text_[stop] == '.'))
      ++stop;
    if (stop < text_.size() && (text_[stop] == 'e' || text_[stop] == 'E')) {
      std::size_t k = stop + 1;
      if (k < text_.size() && (text_[k] == '+' || text_[k] == '-')) ++k;
      if (k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k]))) {
        while (k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k]))) ++k;
        stop = k;
      }
    }
    const std::string buf(text_.substr(pos_, stop - pos_));
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    const auto used = static_cast<std::size_t>(end - buf.c_str());
    if (used == 0 || used != buf.size()) fail("malformed number");
    pos_ += used;
    return make_const(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    static constexpr std::pair<std::string_view, Op> kFuncs[] = {
        {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}, {"sin", Op::Sin}, {"cos", Op::Cos}};
    for (auto [fname, op] : kFuncs) {
      if (name == fname) {
        expect('(');
        NodePtr arg = expr();
        expect(')');
        return make_unary(op, arg);
      }
    }
    if (name == "pi") return make_const(std::numbers::pi);

    std::string_view digits;
    bool dual = false;
    if (name.starts_with("xi")) {
      digits = name.substr(2);
      dual = true;
    } else if (name.starts_with("x")) {
      digits = name.substr(1);
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string_view::npos ||
        digits.front() == '0') {
      pos_ = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
    const int k = std::atoi(std::string(digits).c_str());
    if (k > n_) {
      throw DimensionError("variable '" + std::string(name) + "' at position " +
                           std::to_string(start) + " exceeds dimension " + std::to_string(n_));
    }
    return make_var(dual ? n_ + k - 1 : k - 1);
  }

  std::string_view text_;
  int n_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* func_name(Op op) {
  switch (op) {
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    default: return "?";
  }
}

void print_into(const Node& node, int n, std::string& out) {
  switch (node.op) {
    case Op::Const:
      if (node.value < 0.0) {
        out += "(-" + format_number(-node.value) + ")";
      } else {
        out += format_number(node.value);
      }
      return;
    case Op::Var:
      out += node.var < n ? "x" + std::to_string(node.var + 1)
                          : "xi" + std::to_string(node.var - n + 1);
      return;
    case Op::Neg:
      out += "(-";
      print_into(*node.lhs, n, out);
      out += ")";
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow: {
      static constexpr char kSym[] = {'+', '-', '*', '/', '^'};
      const char sym = kSym[static_cast<int>(node.op) - static_cast<int>(Op::Add)];
      out += "(";
      print_into(*node.lhs, n, out);
      out += sym;
      print_into(*node.rhs, n, out);
      out += ")";
      return;
    }
    case Op::Exp:
    case Op::Log:
    case Op::Sqrt:
    case Op::Sin:
    case Op::Cos:
      out += func_name(node.op);
      out += "(";
      print_into(*node.lhs, n, out);
      out += ")";
      return;
    case Op::Bracket:
      out += "{";
      print_into(*node.lhs, n, out);
      out += ", ";
      print_into(*node.rhs, n, out);
      out += "}";
      return;
  }
}

}  // namespace

NodePtr parse_expression(std::string_view text, int n) {
  if (n < 1) throw DimensionError("dimension must be positive");
  return Parser(text, n).parse();
}

std::string print_expression(const Node& node, int n) {
  std::string out;
  print_into(node, n, out);
  return out;
}

}  // namespace qml
