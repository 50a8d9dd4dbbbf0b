#pragma once

// Expression trees over phase-space variables. Variables are laid out as
// z = (x1..xn, xi1..xin); index k < n is x_{k+1}, index n + k is xi_{k+1}.
//
// The grammar (see docs/grammar.md):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'
//            | '{' expr ',' expr '}'
//   func    := exp | log | sqrt | sin | cos
//
// `{f, g}` is the Poisson bracket of f and g.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qml/dual.hpp"
#include "qml/error.hpp"

namespace qml {

enum class Op : std::uint8_t {
  Const,
  Var,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Exp,
  Log,
  Sqrt,
  Sin,
  Cos,
  Bracket,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  double value = 0.0;      // Const
  int var = -1;            // Var
  int dim = 0;             // Bracket: phase-space dimension n
  std::uint64_t deps = 0;  // bit k set if the subtree reads variable k
  NodePtr lhs;
  NodePtr rhs;
};

NodePtr make_const(double c);
NodePtr make_var(int index);
NodePtr make_unary(Op op, NodePtr a);
NodePtr make_binary(Op op, NodePtr a, NodePtr b);
NodePtr make_bracket(NodePtr f, NodePtr g, int n);

/// Parses `text` for phase-space dimension `n`. Throws ParseError on bad
/// syntax or unknown identifiers and DimensionError when a variable index
/// exceeds `n`.
NodePtr parse_expression(std::string_view text, int n);

/// Fully parenthesized text that parses back to an identical tree.
std::string print_expression(const Node& node, int n);

/// Nesting depth of duals the evaluator will create before giving up. Each
/// Poisson bracket costs one level, each requested jet order one more.
inline constexpr int kMaxNesting = 6;

template <class T>
T evaluate(const Node& node, std::span<const T> z);

/// Partial derivative along variable `k`, evaluated in T.
template <class T>
T partial(const Node& node, std::span<const T> z, int k) {
  if (!((node.deps >> k) & 1u)) return T(0.0);
  if constexpr (nesting_v<T> >= kMaxNesting) {
    throw Error("expression nesting exceeds the supported derivative depth");
  } else {
    std::vector<Dual<T>> lifted(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      lifted[i] = Dual<T>(z[i], T(static_cast<int>(i) == k ? 1.0 : 0.0));
    return evaluate<Dual<T>>(node, std::span<const Dual<T>>(lifted)).d;
  }
}

template <class T>
T evaluate(const Node& node, std::span<const T> z) {
  switch (node.op) {
    case Op::Const:
      return T(node.value);
    case Op::Var:
      return z[static_cast<std::size_t>(node.var)];
    case Op::Neg:
      return -evaluate(*node.lhs, z);
    case Op::Add:
      return evaluate(*node.lhs, z) + evaluate(*node.rhs, z);
    case Op::Sub:
      return evaluate(*node.lhs, z) - evaluate(*node.rhs, z);
    case Op::Mul:
      return evaluate(*node.lhs, z) * evaluate(*node.rhs, z);
    case Op::Div:
      return evaluate(*node.lhs, z) * recip_(evaluate(*node.rhs, z));
    case Op::Pow: {
      T base = evaluate(*node.lhs, z);
      if (node.rhs->op == Op::Const) {
        double k = node.rhs->value;
        if (k == static_cast<double>(static_cast<long>(k)) && k >= -64.0 && k <= 64.0)
          return ipow_(base, static_cast<long>(k));
      }
      return exp_(evaluate(*node.rhs, z) * log_(base));
    }
    case Op::Exp:
      return exp_(evaluate(*node.lhs, z));
    case Op::Log:
      return log_(evaluate(*node.lhs, z));
    case Op::Sqrt:
      return sqrt_(evaluate(*node.lhs, z));
    case Op::Sin:
      return sin_(evaluate(*node.lhs, z));
    case Op::Cos:
      return cos_(evaluate(*node.lhs, z));
    case Op::Bracket: {
      // {f, g} = d_xi f . d_x g - d_x f . d_xi g
      const int n = node.dim;
      T acc(0.0);
      for (int i = 0; i < n; ++i) {
        T fxi = partial(*node.lhs, z, n + i);
        T gx = partial(*node.rhs, z, i);
        T fx = partial(*node.lhs, z, i);
        T gxi = partial(*node.rhs, z, n + i);
        acc = acc + fxi * gx - fx * gxi;
      }
      return acc;
    }
  }
  throw Error("corrupt expression node");
}

}  // namespace qml
