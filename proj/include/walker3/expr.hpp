#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "walker3/errors.hpp"

namespace walker3 {

namespace detail {

// Exact rational literal. Falls back to floating point on overflow; `exact`
// tracks which representation is live.
struct Rational {
    long long num = 0;
    long long den = 1;  // > 0
};

inline bool rat_normalize(Rational& r) {
    if (r.den == 0) return false;
    if (r.den < 0) {
        if (r.num == std::numeric_limits<long long>::min() || r.den == std::numeric_limits<long long>::min())
            return false;
        r.num = -r.num;
        r.den = -r.den;
    }
    const long long g = std::gcd(r.num < 0 ? -r.num : r.num, r.den);
    if (g > 1) {
        r.num /= g;
        r.den /= g;
    }
    return true;
}

inline bool fits64(__int128 v) {
    return v <= std::numeric_limits<long long>::max() && v >= std::numeric_limits<long long>::min();
}

inline bool rat_make(__int128 num, __int128 den, Rational& out) {
    if (den == 0) return false;
    __int128 g = num < 0 ? -num : num;
    __int128 d = den < 0 ? -den : den;
    while (d != 0) {
        __int128 t = g % d;
        g = d;
        d = t;
    }
    if (g > 1) {
        num /= g;
        den /= g;
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    if (!fits64(num) || !fits64(den)) return false;
    out.num = static_cast<long long>(num);
    out.den = static_cast<long long>(den);
    return true;
}

inline bool rat_add(const Rational& a, const Rational& b, Rational& out) {
    const __int128 num = static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den;
    const __int128 den = static_cast<__int128>(a.den) * b.den;
    return rat_make(num, den, out);
}

inline bool rat_sub(const Rational& a, const Rational& b, Rational& out) {
    const __int128 num = static_cast<__int128>(a.num) * b.den - static_cast<__int128>(b.num) * a.den;
    const __int128 den = static_cast<__int128>(a.den) * b.den;
    return rat_make(num, den, out);
}

inline bool rat_mul(const Rational& a, const Rational& b, Rational& out) {
    const __int128 num = static_cast<__int128>(a.num) * b.num;
    const __int128 den = static_cast<__int128>(a.den) * b.den;
    return rat_make(num, den, out);
}

inline bool rat_div(const Rational& a, const Rational& b, Rational& out) {
    if (b.num == 0) return false;
    const __int128 num = static_cast<__int128>(a.num) * b.den;
    const __int128 den = static_cast<__int128>(a.den) * b.num;
    return rat_make(num, den, out);
}

inline bool rat_pow(const Rational& a, long long e, Rational& out) {
    if (e < 0) {
        Rational inv;
        if (a.num == 0 || !rat_div(Rational{1, 1}, a, inv)) return false;
        return rat_pow(inv, -e, out);
    }
    Rational acc{1, 1};
    Rational base = a;
    while (e > 0) {
        if (e & 1) {
            if (!rat_mul(acc, base, acc)) return false;
        }
        e >>= 1;
        if (e > 0 && !rat_mul(base, base, base)) return false;
    }
    out = acc;
    return true;
}

inline double rat_value(const Rational& r) {
    return static_cast<double>(r.num) / static_cast<double>(r.den);
}

enum class FuncId { Sin, Cos, Exp, Log, Sqrt };

struct FuncSpec {
    const char* name;
    FuncId id;
    double (*eval)(double);
};

// Single registry of supported functions; adding one means a row here plus a
// derivative case in diff().
inline constexpr FuncSpec kFunctions[] = {
    {"sin", FuncId::Sin, [](double a) { return std::sin(a); }},
    {"cos", FuncId::Cos, [](double a) { return std::cos(a); }},
    {"exp", FuncId::Exp, [](double a) { return std::exp(a); }},
    {"log", FuncId::Log, [](double a) { return std::log(a); }},
    {"sqrt", FuncId::Sqrt, [](double a) { return std::sqrt(a); }},
};

inline const FuncSpec* find_function(std::string_view name) {
    for (const auto& f : kFunctions)
        if (name == f.name) return &f;
    return nullptr;
}

struct Node {
    enum class Kind { Literal, Variable, Add, Sub, Mul, Div, Pow, Neg, Func };

    Kind kind = Kind::Literal;
    long src_pos = -1;  // byte offset in the original source, -1 if synthesized

    // Literal
    bool exact = false;
    Rational rat;
    double value = 0;

    // Variable
    int var_index = -1;

    // Pow
    long long exponent = 0;

    // Func
    const FuncSpec* func = nullptr;

    std::shared_ptr<const Node> a, b;

    double literal_value() const { return exact ? rat_value(rat) : value; }
    bool is_literal() const { return kind == Kind::Literal; }
    bool is_zero() const { return is_literal() && (exact ? rat.num == 0 : value == 0.0); }
    bool is_one() const { return is_literal() && (exact ? (rat.num == 1 && rat.den == 1) : value == 1.0); }
};

using NodePtr = std::shared_ptr<const Node>;

inline NodePtr make_literal(const Rational& r, long pos = -1) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Literal;
    n->exact = true;
    n->rat = r;
    n->src_pos = pos;
    return n;
}

inline NodePtr make_literal(double v, long pos = -1) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Literal;
    n->exact = false;
    n->value = v;
    n->src_pos = pos;
    return n;
}

inline NodePtr make_variable(int index, long pos = -1) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Variable;
    n->var_index = index;
    n->src_pos = pos;
    return n;
}

// Folding helpers: constant folding plus zero/one elimination only.

inline NodePtr fold_binary_literals(Node::Kind kind, const NodePtr& a, const NodePtr& b, long pos) {
    if (a->exact && b->exact) {
        Rational r;
        bool ok = false;
        switch (kind) {
            case Node::Kind::Add: ok = rat_add(a->rat, b->rat, r); break;
            case Node::Kind::Sub: ok = rat_sub(a->rat, b->rat, r); break;
            case Node::Kind::Mul: ok = rat_mul(a->rat, b->rat, r); break;
            case Node::Kind::Div: ok = rat_div(a->rat, b->rat, r); break;
            default: break;
        }
        if (ok) return make_literal(r, pos);
    }
    const double x = a->literal_value(), y = b->literal_value();
    switch (kind) {
        case Node::Kind::Add: return make_literal(x + y, pos);
        case Node::Kind::Sub: return make_literal(x - y, pos);
        case Node::Kind::Mul: return make_literal(x * y, pos);
        case Node::Kind::Div: return make_literal(x / y, pos);
        default: return nullptr;
    }
}

inline NodePtr make_binary(Node::Kind kind, NodePtr a, NodePtr b, long pos = -1);

inline NodePtr make_neg(NodePtr a, long pos = -1) {
    if (a->is_literal()) {
        if (a->exact && a->rat.num != std::numeric_limits<long long>::min())
            return make_literal(Rational{-a->rat.num, a->rat.den}, pos);
        return make_literal(-a->literal_value(), pos);
    }
    if (a->kind == Node::Kind::Neg) return a->a;
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Neg;
    n->a = std::move(a);
    n->src_pos = pos;
    return n;
}

inline NodePtr make_pow(NodePtr base, long long exponent, long pos = -1) {
    if (exponent == 0) return make_literal(Rational{1, 1}, pos);
    if (exponent == 1) return base;
    if (base->is_literal()) {
        if (base->exact) {
            Rational r;
            if ((base->rat.num != 0 || exponent > 0) && rat_pow(base->rat, exponent, r))
                return make_literal(r, pos);
        }
        return make_literal(std::pow(base->literal_value(), static_cast<double>(exponent)), pos);
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Pow;
    n->exponent = exponent;
    n->a = std::move(base);
    n->src_pos = pos;
    return n;
}

inline NodePtr make_binary(Node::Kind kind, NodePtr a, NodePtr b, long pos) {
    switch (kind) {
        case Node::Kind::Add:
            if (a->is_zero()) return b;
            if (b->is_zero()) return a;
            break;
        case Node::Kind::Sub:
            if (b->is_zero()) return a;
            if (a->is_zero()) return make_neg(std::move(b), pos);
            break;
        case Node::Kind::Mul:
            if (a->is_zero() || b->is_zero()) return make_literal(Rational{0, 1}, pos);
            if (a->is_one()) return b;
            if (b->is_one()) return a;
            break;
        case Node::Kind::Div:
            if (b->is_zero()) throw ParseError("division by literal zero", pos < 0 ? ParseError::npos : static_cast<std::size_t>(pos));
            if (a->is_zero()) return make_literal(Rational{0, 1}, pos);
            if (b->is_one()) return a;
            break;
        default:
            break;
    }
    if (a->is_literal() && b->is_literal()) {
        if (auto folded = fold_binary_literals(kind, a, b, pos)) return folded;
    }
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    n->src_pos = pos;
    return n;
}

inline NodePtr make_func(const FuncSpec* spec, NodePtr arg, long pos = -1) {
    // Literal arguments fold only when the value is inside the function's
    // domain; otherwise the node is kept so evaluation reports the location.
    if (arg->is_literal()) {
        const double v = arg->literal_value();
        const bool in_domain = !((spec->id == FuncId::Log && v <= 0.0) || (spec->id == FuncId::Sqrt && v < 0.0));
        if (in_domain) return make_literal(spec->eval(v), pos);
    }
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Func;
    n->func = spec;
    n->a = std::move(arg);
    n->src_pos = pos;
    return n;
}

}  // namespace detail

// Immutable scalar expression over a fixed, shared variable list. Values are
// safe to copy and share across threads.
class ScalarExpr {
public:
    using VarList = std::shared_ptr<const std::vector<std::string>>;

    ScalarExpr() = default;

    static VarList make_vars(std::vector<std::string> names) {
        return std::make_shared<const std::vector<std::string>>(std::move(names));
    }

    static ScalarExpr constant(double value, VarList vars) {
        return ScalarExpr(detail::make_literal(value), std::move(vars));
    }

    static ScalarExpr constant(long long num, long long den, VarList vars) {
        detail::Rational r{num, den};
        if (!detail::rat_normalize(r)) throw ParseError("invalid rational constant");
        return ScalarExpr(detail::make_literal(r), std::move(vars));
    }

    static ScalarExpr variable(std::string_view name, VarList vars) {
        const int idx = index_of(*vars, name);
        if (idx < 0) throw ParseError("unknown identifier '" + std::string(name) + "'");
        return ScalarExpr(detail::make_variable(idx), std::move(vars));
    }

    // Parse `source` over the given variables. Grammar: +,-,*,/ and ^ with an
    // integer literal exponent, unary minus, parentheses, name(arg) calls
    // for sin, cos, exp, log, sqrt. Precedence ^ > unary- > *,/ > +,-;
    // binary operators associate to the left.
    static ScalarExpr parse(std::string_view source, VarList vars);

    static ScalarExpr parse(std::string_view source, const std::vector<std::string>& vars) {
        return parse(source, make_vars(vars));
    }

    bool valid() const { return static_cast<bool>(node_); }
    const VarList& variables() const { return vars_; }

    int variable_index(std::string_view name) const {
        const int idx = index_of(*vars_, name);
        if (idx < 0) throw ParseError("unknown identifier '" + std::string(name) + "'");
        return idx;
    }

    // Exact symbolic partial derivative; the result shares this expression's
    // variable list.
    ScalarExpr derivative(std::string_view var) const { return derivative(variable_index(var)); }

    ScalarExpr derivative(int var_index) const {
        check_valid();
        return ScalarExpr(diff(node_, var_index), vars_);
    }

    // Fast-path evaluation; `values` are in variable-list order.
    double evaluate(std::span<const double> values) const {
        check_valid();
        if (values.size() != vars_->size()) throw EvalError("assignment does not cover all variables");
        return eval(node_.get(), values);
    }

    double evaluate(const std::map<std::string, double>& assignment) const {
        check_valid();
        std::vector<double> values(vars_->size());
        for (std::size_t i = 0; i < vars_->size(); ++i) {
            auto it = assignment.find((*vars_)[i]);
            if (it == assignment.end())
                throw EvalError("assignment missing variable '" + (*vars_)[i] + "'");
            values[i] = it->second;
        }
        return evaluate(values);
    }

    // Central difference (e(p+h) - e(p-h)) / (2h) in the named variable.
    double finite_difference(std::string_view var, const std::map<std::string, double>& point, double step) const {
        std::vector<double> values(vars_->size());
        for (std::size_t i = 0; i < vars_->size(); ++i) {
            auto it = point.find((*vars_)[i]);
            if (it == point.end()) throw EvalError("assignment missing variable '" + (*vars_)[i] + "'");
            values[i] = it->second;
        }
        return finite_difference(variable_index(var), values, step);
    }

    double finite_difference(int var_index, std::span<const double> point, double step) const {
        if (!(step > 0)) throw EvalError("finite-difference step must be positive");
        std::vector<double> p(point.begin(), point.end());
        p[static_cast<std::size_t>(var_index)] += step;
        const double plus = evaluate(p);
        p[static_cast<std::size_t>(var_index)] -= 2 * step;
        const double minus = evaluate(p);
        return (plus - minus) / (2 * step);
    }

    bool is_constant(double* out = nullptr) const {
        check_valid();
        if (!node_->is_literal()) return false;
        if (out) *out = node_->literal_value();
        return true;
    }

    std::string to_string() const {
        check_valid();
        return render(node_.get(), 0, *vars_);
    }

    // Expression-building operators; both sides must share the variable list.
    friend ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b) {
        return ScalarExpr(detail::make_binary(detail::Node::Kind::Add, a.node_, b.node_, -1), merged_vars(a, b));
    }
    friend ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b) {
        return ScalarExpr(detail::make_binary(detail::Node::Kind::Sub, a.node_, b.node_, -1), merged_vars(a, b));
    }
    friend ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b) {
        return ScalarExpr(detail::make_binary(detail::Node::Kind::Mul, a.node_, b.node_, -1), merged_vars(a, b));
    }
    friend ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b) {
        return ScalarExpr(detail::make_binary(detail::Node::Kind::Div, a.node_, b.node_, -1), merged_vars(a, b));
    }
    friend ScalarExpr operator-(const ScalarExpr& a) {
        a.check_valid();
        return ScalarExpr(detail::make_neg(a.node_), a.vars_);
    }

    friend ScalarExpr pow(const ScalarExpr& a, long long exponent) {
        a.check_valid();
        return ScalarExpr(detail::make_pow(a.node_, exponent), a.vars_);
    }

    friend ScalarExpr apply(std::string_view fn, const ScalarExpr& a) {
        a.check_valid();
        const auto* spec = detail::find_function(fn);
        if (!spec) throw ParseError("unknown function '" + std::string(fn) + "'");
        return ScalarExpr(detail::make_func(spec, a.node_), a.vars_);
    }

    friend ScalarExpr sin(const ScalarExpr& a) { return apply("sin", a); }
    friend ScalarExpr cos(const ScalarExpr& a) { return apply("cos", a); }
    friend ScalarExpr exp(const ScalarExpr& a) { return apply("exp", a); }
    friend ScalarExpr log(const ScalarExpr& a) { return apply("log", a); }
    friend ScalarExpr sqrt(const ScalarExpr& a) { return apply("sqrt", a); }

private:
    ScalarExpr(detail::NodePtr node, VarList vars) : node_(std::move(node)), vars_(std::move(vars)) {}

    void check_valid() const {
        if (!node_) throw EvalError("empty expression");
    }

    static int index_of(const std::vector<std::string>& vars, std::string_view name) {
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == name) return static_cast<int>(i);
        return -1;
    }

    static VarList merged_vars(const ScalarExpr& a, const ScalarExpr& b) {
        a.check_valid();
        b.check_valid();
        if (a.vars_ != b.vars_ && *a.vars_ != *b.vars_)
            throw ParseError("operands use different variable lists");
        return a.vars_;
    }

    static detail::NodePtr diff(const detail::NodePtr& n, int var);
    static double eval(const detail::Node* n, std::span<const double> values);
    static std::string render(const detail::Node* n, int parent_prec, const std::vector<std::string>& vars);

    detail::NodePtr node_;
    VarList vars_;

    friend class ExprParser;
};

inline detail::NodePtr ScalarExpr::diff(const detail::NodePtr& n, int var) {
    using detail::Node;
    using detail::make_binary;
    using detail::make_func;
    using detail::make_literal;
    using detail::make_neg;
    using detail::make_pow;
    const auto zero = [] { return make_literal(detail::Rational{0, 1}); };
    switch (n->kind) {
        case Node::Kind::Literal:
            return zero();
        case Node::Kind::Variable:
            return n->var_index == var ? make_literal(detail::Rational{1, 1}) : zero();
        case Node::Kind::Add:
            return make_binary(Node::Kind::Add, diff(n->a, var), diff(n->b, var), -1);
        case Node::Kind::Sub:
            return make_binary(Node::Kind::Sub, diff(n->a, var), diff(n->b, var), -1);
        case Node::Kind::Mul:
            return make_binary(Node::Kind::Add,
                               make_binary(Node::Kind::Mul, diff(n->a, var), n->b, -1),
                               make_binary(Node::Kind::Mul, n->a, diff(n->b, var), -1), -1);
        case Node::Kind::Div: {
            auto num = make_binary(Node::Kind::Sub,
                                   make_binary(Node::Kind::Mul, diff(n->a, var), n->b, -1),
                                   make_binary(Node::Kind::Mul, n->a, diff(n->b, var), -1), -1);
            return make_binary(Node::Kind::Div, std::move(num), make_pow(n->b, 2), -1);
        }
        case Node::Kind::Pow: {
            auto coeff = make_literal(detail::Rational{n->exponent, 1});
            auto inner = make_binary(Node::Kind::Mul, std::move(coeff), make_pow(n->a, n->exponent - 1), -1);
            return make_binary(Node::Kind::Mul, std::move(inner), diff(n->a, var), -1);
        }
        case Node::Kind::Neg:
            return make_neg(diff(n->a, var));
        case Node::Kind::Func: {
            auto darg = diff(n->a, var);
            switch (n->func->id) {
                case detail::FuncId::Sin:
                    return make_binary(Node::Kind::Mul, make_func(detail::find_function("cos"), n->a), std::move(darg), -1);
                case detail::FuncId::Cos:
                    return make_neg(make_binary(Node::Kind::Mul, make_func(detail::find_function("sin"), n->a), std::move(darg), -1));
                case detail::FuncId::Exp:
                    return make_binary(Node::Kind::Mul, make_func(detail::find_function("exp"), n->a), std::move(darg), -1);
                case detail::FuncId::Log:
                    return make_binary(Node::Kind::Div, std::move(darg), n->a, -1);
                case detail::FuncId::Sqrt: {
                    auto two = make_literal(detail::Rational{2, 1});
                    auto denom = make_binary(Node::Kind::Mul, std::move(two), make_func(detail::find_function("sqrt"), n->a), -1);
                    return make_binary(Node::Kind::Div, std::move(darg), std::move(denom), -1);
                }
            }
            break;
        }
    }
    throw EvalError("unreachable expression kind in derivative");
}

inline double ScalarExpr::eval(const detail::Node* n, std::span<const double> values) {
    using detail::Node;
    switch (n->kind) {
        case Node::Kind::Literal:
            return n->literal_value();
        case Node::Kind::Variable:
            return values[static_cast<std::size_t>(n->var_index)];
        case Node::Kind::Add:
            return eval(n->a.get(), values) + eval(n->b.get(), values);
        case Node::Kind::Sub:
            return eval(n->a.get(), values) - eval(n->b.get(), values);
        case Node::Kind::Mul:
            return eval(n->a.get(), values) * eval(n->b.get(), values);
        case Node::Kind::Div: {
            const double num = eval(n->a.get(), values);
            const double den = eval(n->b.get(), values);
            if (den == 0.0) throw EvalError("division by zero", n->src_pos);
            return num / den;
        }
        case Node::Kind::Pow: {
            const double base = eval(n->a.get(), values);
            long long e = n->exponent;
            if (e < 0 && base == 0.0) throw EvalError("zero raised to a negative power", n->src_pos);
            const bool invert = e < 0;
            if (invert) e = -e;
            if (e > 64) {
                const double r = std::pow(base, static_cast<double>(e));
                return invert ? 1.0 / r : r;
            }
            double acc = 1.0, b = base;
            while (e > 0) {
                if (e & 1) acc *= b;
                e >>= 1;
                if (e > 0) b *= b;
            }
            return invert ? 1.0 / acc : acc;
        }
        case Node::Kind::Neg:
            return -eval(n->a.get(), values);
        case Node::Kind::Func: {
            const double arg = eval(n->a.get(), values);
            switch (n->func->id) {
                case detail::FuncId::Log:
                    if (arg <= 0.0) throw EvalError("log of non-positive value", n->src_pos);
                    break;
                case detail::FuncId::Sqrt:
                    if (arg < 0.0) throw EvalError("sqrt of negative value", n->src_pos);
                    break;
                default:
                    break;
            }
            return n->func->eval(arg);
        }
    }
    throw EvalError("unreachable expression kind in eval");
}

inline std::string ScalarExpr::render(const detail::Node* n, int parent_prec, const std::vector<std::string>& vars) {
    using detail::Node;
    const auto wrap = [&](int prec, std::string s) {
        return prec < parent_prec ? "(" + std::move(s) + ")" : std::move(s);
    };
    switch (n->kind) {
        case Node::Kind::Literal: {
            if (n->exact) {
                std::string s = std::to_string(n->rat.num);
                if (n->rat.den != 1) s += "/" + std::to_string(n->rat.den);
                return n->rat.num < 0 ? wrap(2, std::move(s)) : s;
            }
            std::string s = std::to_string(n->value);
            return n->value < 0 ? wrap(2, std::move(s)) : s;
        }
        case Node::Kind::Variable:
            return vars[static_cast<std::size_t>(n->var_index)];
        case Node::Kind::Add:
            return wrap(1, render(n->a.get(), 1, vars) + " + " + render(n->b.get(), 1, vars));
        case Node::Kind::Sub:
            return wrap(1, render(n->a.get(), 1, vars) + " - " + render(n->b.get(), 2, vars));
        case Node::Kind::Mul:
            return wrap(3, render(n->a.get(), 3, vars) + "*" + render(n->b.get(), 3, vars));
        case Node::Kind::Div:
            return wrap(3, render(n->a.get(), 3, vars) + "/" + render(n->b.get(), 4, vars));
        case Node::Kind::Pow:
            return wrap(5, render(n->a.get(), 6, vars) + "^" + std::to_string(n->exponent));
        case Node::Kind::Neg:
            return wrap(2, "-" + render(n->a.get(), 2, vars));
        case Node::Kind::Func:
            return std::string(n->func->name) + "(" + render(n->a.get(), 0, vars) + ")";
    }
    return "?";
}

class ExprParser {
public:
    ExprParser(std::string_view src, ScalarExpr::VarList vars) : src_(src), vars_(std::move(vars)) {}

    ScalarExpr run() {
        if (src_.find_first_not_of(" \t\r\n") == std::string_view::npos)
            throw ParseError("empty expression", 0);
        auto node = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError("unexpected trailing input", pos_);
        return ScalarExpr(std::move(node), vars_);
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    detail::NodePtr parse_sum() {
        auto lhs = parse_term();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (consume('+'))
                lhs = guarded(detail::Node::Kind::Add, std::move(lhs), parse_term(), at);
            else if (consume('-'))
                lhs = guarded(detail::Node::Kind::Sub, std::move(lhs), parse_term(), at);
            else
                return lhs;
        }
    }

    detail::NodePtr parse_term() {
        auto lhs = parse_unary();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (consume('*'))
                lhs = guarded(detail::Node::Kind::Mul, std::move(lhs), parse_unary(), at);
            else if (consume('/'))
                lhs = guarded(detail::Node::Kind::Div, std::move(lhs), parse_unary(), at);
            else
                return lhs;
        }
    }

    detail::NodePtr parse_unary() {
        skip_ws();
        const std::size_t at = pos_;
        if (consume('-')) return detail::make_neg(parse_unary(), static_cast<long>(at));
        return parse_power();
    }

    detail::NodePtr parse_power() {
        auto base = parse_primary();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (!consume('^')) return base;
            base = detail::make_pow(std::move(base), parse_exponent(), static_cast<long>(at));
        }
    }

    long long parse_exponent() {
        skip_ws();
        const std::size_t at = pos_;
        bool negate = false;
        if (consume('-')) negate = true;
        auto operand = parse_primary();
        if (!operand->is_literal())
            throw ParseError("exponent must be an integer literal", at);
        if (!operand->exact || operand->rat.den != 1)
            throw ParseError("non-integer exponent", at);
        const long long e = operand->rat.num;
        if (e > 1000000 || e < -1000000) throw ParseError("exponent out of range", at);
        return negate ? -e : e;
    }

    detail::NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        const std::size_t at = pos_;
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto inner = parse_sum();
            if (!consume(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::string_view name = parse_identifier();
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == '(') {
                const auto* spec = detail::find_function(name);
                if (!spec) throw ParseError("unknown function '" + std::string(name) + "'", at);
                ++pos_;
                auto arg = parse_sum();
                if (!consume(')')) throw ParseError("expected ')'", pos_);
                return guarded_func(spec, std::move(arg), at);
            }
            const int idx = var_index(name);
            if (idx < 0) throw ParseError("unknown identifier '" + std::string(name) + "'", at);
            return detail::make_variable(idx, static_cast<long>(at));
        }
        throw ParseError(std::string("unexpected character '") + c + "'", at);
    }

    std::string_view parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        return src_.substr(start, pos_ - start);
    }

    detail::NodePtr parse_number() {
        const std::size_t start = pos_;
        __int128 mantissa = 0;
        long frac_digits = 0;
        bool digits = false, overflow = false;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            digits = true;
            if (!overflow) {
                mantissa = mantissa * 10 + (src_[pos_] - '0');
                if (mantissa > (static_cast<__int128>(1) << 100)) overflow = true;
            }
            ++pos_;
        }
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                digits = true;
                ++frac_digits;
                if (!overflow) {
                    mantissa = mantissa * 10 + (src_[pos_] - '0');
                    if (mantissa > (static_cast<__int128>(1) << 100)) overflow = true;
                }
                ++pos_;
            }
        }
        if (!digits) throw ParseError("malformed number", start);
        long exp10 = 0;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            const std::size_t mark = pos_;
            ++pos_;
            bool neg = false;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                neg = src_[pos_] == '-';
                ++pos_;
            }
            if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                pos_ = mark;  // 'e' belongs to a following identifier, not this number
            } else {
                long e = 0;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    e = e * 10 + (src_[pos_] - '0');
                    if (e > 10000) throw ParseError("exponent out of range", mark);
                    ++pos_;
                }
                exp10 = neg ? -e : e;
            }
        }
        const long net = exp10 - frac_digits;
        if (!overflow && net > -30 && net < 30) {
            __int128 num = mantissa, den = 1;
            for (long i = 0; i < net; ++i) num *= 10;
            for (long i = 0; i < -net; ++i) den *= 10;
            detail::Rational r;
            if (detail::rat_make(num, den, r)) return detail::make_literal(r, static_cast<long>(start));
        }
        const double v = std::strtod(std::string(src_.substr(start, pos_ - start)).c_str(), nullptr);
        return detail::make_literal(v, static_cast<long>(start));
    }

    int var_index(std::string_view name) const {
        for (std::size_t i = 0; i < vars_->size(); ++i)
            if ((*vars_)[i] == name) return static_cast<int>(i);
        return -1;
    }

    detail::NodePtr guarded(detail::Node::Kind kind, detail::NodePtr a, detail::NodePtr b, std::size_t at) {
        try {
            return detail::make_binary(kind, std::move(a), std::move(b), static_cast<long>(at));
        } catch (const ParseError& e) {
            if (e.offset == ParseError::npos) throw ParseError(e.what(), at);
            throw;
        }
    }

    detail::NodePtr guarded_func(const detail::FuncSpec* spec, detail::NodePtr arg, std::size_t at) {
        return detail::make_func(spec, std::move(arg), static_cast<long>(at));
    }

    std::string_view src_;
    ScalarExpr::VarList vars_;
    std::size_t pos_ = 0;
};

inline ScalarExpr ScalarExpr::parse(std::string_view source, VarList vars) {
    return ExprParser(source, std::move(vars)).run();
}

}  // namespace walker3
