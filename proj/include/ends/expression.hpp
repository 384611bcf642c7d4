#pragma once

/**
 * @file expression.hpp
 * @brief Expression trees over the end coordinates (r, theta).
 *
 * Grammar (whitespace ignored):
 *
 *     expr   := term (('+' | '-') term)*
 *     term   := unary (('*' | '/') unary)*
 *     unary  := '-' unary | power
 *     power  := base ('^' unary)?
 *     base   := number | 'r' | 'theta' | 'pi' | function '(' expr ')' | '(' expr ')'
 *
 * with function one of exp, log, sinh, cosh, sin, cos, sqrt. Exponentiation is
 * right associative and binds tighter than unary minus, so "-r^2" is -(r^2).
 *
 * Trees are immutable and shared. Each Expr carries a compiled postfix program so
 * that pointwise evaluation does not chase pointers.
 */

#include "ends/errors.hpp"
#include "ends/logmath.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ends {

enum class Var { r, theta };

enum class Op {
    constant,
    var_r,
    var_theta,
    add,
    sub,
    mul,
    div,
    pow,
    neg,
    exp,
    log,
    sinh,
    cosh,
    sin,
    cos,
    sqrt,
};

namespace detail {

struct Node {
    Op op;
    double value = 0.0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

using NodePtr = std::shared_ptr<const Node>;

inline bool is_binary(Op op) {
    return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div || op == Op::pow;
}
inline bool is_leaf(Op op) { return op == Op::constant || op == Op::var_r || op == Op::var_theta; }

inline const char* function_name(Op op) {
    switch (op) {
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sinh: return "sinh";
    case Op::cosh: return "cosh";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::sqrt: return "sqrt";
    default: return nullptr;
    }
}

inline double apply_unary(Op op, double a) {
    switch (op) {
    case Op::neg: return -a;
    case Op::exp: return std::exp(a);
    case Op::log: return std::log(a);
    case Op::sinh: return std::sinh(a);
    case Op::cosh: return std::cosh(a);
    case Op::sin: return std::sin(a);
    case Op::cos: return std::cos(a);
    case Op::sqrt: return std::sqrt(a);
    default: return std::numeric_limits<double>::quiet_NaN();
    }
}

inline double apply_binary(Op op, double a, double b) {
    switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::pow: return std::pow(a, b);
    default: return std::numeric_limits<double>::quiet_NaN();
    }
}

// log|sinh x| and log cosh x without overflow.
inline SignedLog slog_sinh(double x) {
    if (std::abs(x) < 20.0) return SignedLog::from_value(std::sinh(x));
    const double ax = std::abs(x);
    return {ax - std::numbers::ln2 + std::log1p(-std::exp(-2.0 * ax)), x > 0 ? 1 : -1};
}
inline SignedLog slog_cosh(double x) {
    if (std::abs(x) < 20.0) return SignedLog::from_value(std::cosh(x));
    const double ax = std::abs(x);
    return {ax - std::numbers::ln2 + std::log1p(std::exp(-2.0 * ax)), 1};
}

inline SignedLog apply_unary(Op op, SignedLog a) {
    switch (op) {
    case Op::neg: return -a;
    case Op::exp: return SignedLog::from_log(a.value());
    case Op::log:
        if (a.sign <= 0) return {std::numeric_limits<double>::quiet_NaN(), 1};
        return SignedLog::from_value(a.log_abs);
    case Op::sinh: return slog_sinh(a.value());
    case Op::cosh: return slog_cosh(a.value());
    case Op::sqrt:
        if (a.sign < 0) return {std::numeric_limits<double>::quiet_NaN(), 1};
        return a.sign == 0 ? SignedLog{} : SignedLog{0.5 * a.log_abs, 1};
    default: return SignedLog::from_value(apply_unary(op, a.value()));
    }
}

inline SignedLog slog_pow(SignedLog base, SignedLog exponent) {
    const double e = exponent.value();
    if (base.sign == 0) {
        if (e > 0) return {};
        if (e == 0) return {0.0, 1};
        return {kInf, 1};
    }
    if (base.sign > 0) return e == 0 ? SignedLog{0.0, 1} : SignedLog{e * base.log_abs, 1};
    if (e != std::floor(e)) return {std::numeric_limits<double>::quiet_NaN(), 1};
    const bool odd = std::fmod(std::abs(e), 2.0) == 1.0;
    return {e * base.log_abs, odd ? -1 : 1};
}

inline SignedLog apply_binary(Op op, SignedLog a, SignedLog b) {
    switch (op) {
    case Op::add: return a + b;
    case Op::sub: return a - b;
    case Op::mul: return a * b;
    case Op::div: return a / b;
    case Op::pow: return slog_pow(a, b);
    default: return {std::numeric_limits<double>::quiet_NaN(), 1};
    }
}

// Value kept in plain double while it stays comfortably inside the double range and
// switched to sign/log form only when it would not. Going through logs eagerly loses
// accuracy: r^3 as exp(3 log r) near r = 4096 is off by about 4e-4 in absolute terms.
struct Mixed {
    bool linear = true;
    double v = 0.0;
    SignedLog s{};

    static Mixed lin(double x) { return {true, x, {}}; }
    static Mixed log(SignedLog x) { return {false, 0.0, x}; }
    SignedLog as_slog() const { return linear ? SignedLog::from_value(v) : s; }
};

inline bool safe(double x) {
    const double a = std::abs(x);
    return x == 0.0 || (a > 1e-290 && a < 1e290);
}

inline Mixed mixed_unary(Op op, const Mixed& a) {
    if (a.linear) {
        double out;
        bool ok = true;
        switch (op) {
        case Op::exp: ok = std::abs(a.v) < 660.0; break;
        case Op::sinh:
        case Op::cosh: ok = std::abs(a.v) < 660.0; break;
        default: break;
        }
        if (ok) {
            out = apply_unary(op, a.v);
            if (std::isnan(out) || safe(out)) return Mixed::lin(out);
        }
    }
    return Mixed::log(apply_unary(op, a.as_slog()));
}

inline Mixed mixed_binary(Op op, const Mixed& a, const Mixed& b) {
    if (a.linear && b.linear) {
        const double out = apply_binary(op, a.v, b.v);
        if (std::isnan(out) || (std::isfinite(out) && safe(out))) {
            // 0 from a product or power of nonzero operands is underflow, not a true zero
            const bool spurious_zero = out == 0.0 && (op == Op::mul || op == Op::div || op == Op::pow) &&
                                       a.v != 0.0 && !(op == Op::mul && b.v == 0.0);
            if (!spurious_zero) return Mixed::lin(out);
        }
    }
    return Mixed::log(apply_binary(op, a.as_slog(), b.as_slog()));
}

struct Instr {
    Op op;
    double value;
};

inline void compile(const NodePtr& n, std::vector<Instr>& code, int& depth, int& max_depth) {
    if (is_leaf(n->op)) {
        code.push_back({n->op, n->value});
        max_depth = std::max(max_depth, ++depth);
        return;
    }
    compile(n->lhs, code, depth, max_depth);
    if (is_binary(n->op)) {
        compile(n->rhs, code, depth, max_depth);
        --depth;
    }
    code.push_back({n->op, 0.0});
}

} // namespace detail

/// Immutable expression over r and theta.
class Expr {
public:
    Expr() : Expr(make_constant(0.0)) {}

    static Expr constant(double v) { return Expr(make_constant(v)); }
    static Expr variable(Var v) {
        return Expr(std::make_shared<const detail::Node>(
            detail::Node{v == Var::r ? Op::var_r : Op::var_theta, 0.0, nullptr, nullptr}));
    }

    /// Node constructors without simplification; the parser uses these to keep the input's shape.
    static Expr binary_raw(Op op, const Expr& a, const Expr& b) {
        return Expr(std::make_shared<const detail::Node>(detail::Node{op, 0.0, a.node_, b.node_}));
    }
    static Expr unary_raw(Op op, const Expr& a) {
        return Expr(std::make_shared<const detail::Node>(detail::Node{op, 0.0, a.node_, nullptr}));
    }

    Op op() const noexcept { return node_->op; }
    double constant_value() const noexcept { return node_->value; }
    Expr lhs() const { return Expr(node_->lhs); }
    Expr rhs() const { return Expr(node_->rhs); }
    bool is_constant() const noexcept { return node_->op == Op::constant; }

    double operator()(double r, double theta = 0.0) const {
        std::array<double, kStackCapacity> small{};
        std::vector<double> big;
        double* stack = small.data();
        if (stack_depth_ > static_cast<int>(kStackCapacity)) {
            big.resize(static_cast<std::size_t>(stack_depth_));
            stack = big.data();
        }
        int sp = 0;
        for (const auto& ins : *code_) {
            switch (ins.op) {
            case Op::constant: stack[sp++] = ins.value; break;
            case Op::var_r: stack[sp++] = r; break;
            case Op::var_theta: stack[sp++] = theta; break;
            default:
                if (detail::is_binary(ins.op)) {
                    --sp;
                    stack[sp - 1] = detail::apply_binary(ins.op, stack[sp - 1], stack[sp]);
                } else {
                    stack[sp - 1] = detail::apply_unary(ins.op, stack[sp - 1]);
                }
            }
        }
        return stack[0];
    }

    /// Evaluation in sign/log-magnitude arithmetic: exp(r^3) at r = 50 is representable.
    SignedLog signed_log(double r, double theta = 0.0) const {
        std::array<detail::Mixed, kStackCapacity> small;
        std::vector<detail::Mixed> big;
        detail::Mixed* stack = small.data();
        if (stack_depth_ > static_cast<int>(kStackCapacity)) {
            big.resize(static_cast<std::size_t>(stack_depth_));
            stack = big.data();
        }
        int sp = 0;
        for (const auto& ins : *code_) {
            switch (ins.op) {
            case Op::constant: stack[sp++] = detail::Mixed::lin(ins.value); break;
            case Op::var_r: stack[sp++] = detail::Mixed::lin(r); break;
            case Op::var_theta: stack[sp++] = detail::Mixed::lin(theta); break;
            default:
                if (detail::is_binary(ins.op)) {
                    --sp;
                    stack[sp - 1] = detail::mixed_binary(ins.op, stack[sp - 1], stack[sp]);
                } else {
                    stack[sp - 1] = detail::mixed_unary(ins.op, stack[sp - 1]);
                }
            }
        }
        return stack[0].as_slog();
    }

    bool depends_on(Var v) const { return depends(node_, v == Var::r ? Op::var_r : Op::var_theta); }

    /// Structural derivative, lightly simplified (constant folding, 0/1 identities).
    Expr derivative(Var v) const { return Expr(diff(node_, v == Var::r ? Op::var_r : Op::var_theta).node_); }

    std::string str() const {
        std::ostringstream os;
        os.precision(17);
        print(os, node_, 0);
        return os.str();
    }

    // Smart constructors. They fold constants and drop neutral elements.
    friend Expr operator+(const Expr& a, const Expr& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.constant_value() + b.constant_value());
        if (a.is_constant() && a.constant_value() == 0.0) return b;
        if (b.is_constant() && b.constant_value() == 0.0) return a;
        return binary_raw(Op::add, a, b);
    }
    friend Expr operator-(const Expr& a, const Expr& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.constant_value() - b.constant_value());
        if (b.is_constant() && b.constant_value() == 0.0) return a;
        if (a.is_constant() && a.constant_value() == 0.0) return -b;
        return binary_raw(Op::sub, a, b);
    }
    friend Expr operator*(const Expr& a, const Expr& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.constant_value() * b.constant_value());
        if ((a.is_constant() && a.constant_value() == 0.0) || (b.is_constant() && b.constant_value() == 0.0))
            return constant(0.0);
        if (a.is_constant() && a.constant_value() == 1.0) return b;
        if (b.is_constant() && b.constant_value() == 1.0) return a;
        return binary_raw(Op::mul, a, b);
    }
    friend Expr operator/(const Expr& a, const Expr& b) {
        if (a.is_constant() && b.is_constant()) return constant(a.constant_value() / b.constant_value());
        if (a.is_constant() && a.constant_value() == 0.0) return constant(0.0);
        if (b.is_constant() && b.constant_value() == 1.0) return a;
        return binary_raw(Op::div, a, b);
    }
    friend Expr operator-(const Expr& a) {
        if (a.is_constant()) return constant(-a.constant_value());
        if (a.op() == Op::neg) return a.lhs();
        return unary_raw(Op::neg, a);
    }
    friend Expr pow(const Expr& b, const Expr& e) {
        if (b.is_constant() && e.is_constant()) return constant(std::pow(b.constant_value(), e.constant_value()));
        if (e.is_constant() && e.constant_value() == 1.0) return b;
        if (e.is_constant() && e.constant_value() == 0.0) return constant(1.0);
        return binary_raw(Op::pow, b, e);
    }
    friend Expr apply(Op fn, const Expr& a) {
        if (a.is_constant()) return constant(detail::apply_unary(fn, a.constant_value()));
        return unary_raw(fn, a);
    }

private:
    static constexpr std::size_t kStackCapacity = 32;

    explicit Expr(detail::NodePtr node) : node_(std::move(node)) {
        auto code = std::make_shared<std::vector<detail::Instr>>();
        int depth = 0;
        int max_depth = 0;
        detail::compile(node_, *code, depth, max_depth);
        stack_depth_ = max_depth;
        code_ = std::move(code);
    }

    static detail::NodePtr make_constant(double v) {
        return std::make_shared<const detail::Node>(detail::Node{Op::constant, v, nullptr, nullptr});
    }

    static bool depends(const detail::NodePtr& n, Op var) {
        if (!n) return false;
        if (n->op == var) return true;
        return depends(n->lhs, var) || depends(n->rhs, var);
    }

    static Expr diff(const detail::NodePtr& n, Op var) {
        const Expr self(n);
        if (!depends(n, var)) return constant(0.0);
        switch (n->op) {
        case Op::var_r:
        case Op::var_theta: return constant(1.0);
        case Op::add: return diff(n->lhs, var) + diff(n->rhs, var);
        case Op::sub: return diff(n->lhs, var) - diff(n->rhs, var);
        case Op::mul: {
            const Expr a(n->lhs), b(n->rhs);
            return diff(n->lhs, var) * b + a * diff(n->rhs, var);
        }
        case Op::div: {
            const Expr a(n->lhs), b(n->rhs);
            return diff(n->lhs, var) / b - a * diff(n->rhs, var) / (b * b);
        }
        case Op::pow: {
            const Expr b(n->lhs), e(n->rhs);
            if (!depends(n->rhs, var)) return e * pow(b, e - constant(1.0)) * diff(n->lhs, var);
            return self * (diff(n->rhs, var) * apply(Op::log, b) + e * diff(n->lhs, var) / b);
        }
        case Op::neg: return -diff(n->lhs, var);
        case Op::exp: return self * diff(n->lhs, var);
        case Op::log: return diff(n->lhs, var) / Expr(n->lhs);
        case Op::sinh: return apply(Op::cosh, Expr(n->lhs)) * diff(n->lhs, var);
        case Op::cosh: return apply(Op::sinh, Expr(n->lhs)) * diff(n->lhs, var);
        case Op::sin: return apply(Op::cos, Expr(n->lhs)) * diff(n->lhs, var);
        case Op::cos: return -(apply(Op::sin, Expr(n->lhs)) * diff(n->lhs, var));
        case Op::sqrt: return diff(n->lhs, var) / (constant(2.0) * self);
        default: return constant(0.0);
        }
    }

    static int precedence(Op op) {
        switch (op) {
        case Op::add:
        case Op::sub: return 1;
        case Op::mul:
        case Op::div: return 2;
        case Op::neg: return 3;
        case Op::pow: return 4;
        default: return 5;
        }
    }

    static void print(std::ostream& os, const detail::NodePtr& n, int parent_prec) {
        const int prec = precedence(n->op);
        const bool paren = prec < parent_prec;
        if (paren) os << '(';
        switch (n->op) {
        case Op::constant:
            if (n->value < 0) os << '(' << n->value << ')';
            else os << n->value;
            break;
        case Op::var_r: os << 'r'; break;
        case Op::var_theta: os << "theta"; break;
        case Op::neg:
            os << '-';
            print(os, n->lhs, prec);
            break;
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div: {
            const char sym = n->op == Op::add ? '+' : n->op == Op::sub ? '-' : n->op == Op::mul ? '*' : '/';
            print(os, n->lhs, prec);
            os << sym;
            // left-associative: the right operand needs parentheses at equal precedence
            print(os, n->rhs, prec + 1);
            break;
        }
        case Op::pow:
            print(os, n->lhs, prec + 1);
            os << '^';
            print(os, n->rhs, prec);
            break;
        default:
            os << detail::function_name(n->op) << '(';
            print(os, n->lhs, 0);
            os << ')';
        }
        if (paren) os << ')';
    }

    detail::NodePtr node_;
    std::shared_ptr<const std::vector<detail::Instr>> code_;
    int stack_depth_ = 0;
};

namespace detail {

class Parser {
public:
    Parser(std::string_view text, bool allow_theta) : text_(text), allow_theta_(allow_theta) {}

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
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
        if (!accept(c)) {
            if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' but reached end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    Expr expr() {
        Expr e = term();
        for (;;) {
            if (accept('+')) e = Expr::binary_raw(Op::add, e, term());
            else if (accept('-')) e = Expr::binary_raw(Op::sub, e, term());
            else return e;
        }
    }

    Expr term() {
        Expr e = unary();
        for (;;) {
            if (accept('*')) e = Expr::binary_raw(Op::mul, e, unary());
            else if (accept('/')) e = Expr::binary_raw(Op::div, e, unary());
            else return e;
        }
    }

    Expr unary() {
        if (accept('-')) {
            Expr a = unary();
            return a.is_constant() ? Expr::constant(-a.constant_value()) : Expr::unary_raw(Op::neg, a);
        }
        return power();
    }

    Expr power() {
        Expr b = base();
        if (accept('^')) return Expr::binary_raw(Op::pow, b, unary());
        return b;
    }

    Expr base() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            const std::string_view id = text_.substr(start, pos_ - start);
            if (id == "r") return Expr::variable(Var::r);
            if (id == "theta") {
                if (!allow_theta_) {
                    pos_ = start;
                    fail("radial profiles may not depend on theta");
                }
                return Expr::variable(Var::theta);
            }
            if (id == "pi") return Expr::constant(std::numbers::pi);
            static constexpr std::pair<std::string_view, Op> functions[] = {
                {"exp", Op::exp}, {"log", Op::log}, {"sinh", Op::sinh}, {"cosh", Op::cosh},
                {"sin", Op::sin}, {"cos", Op::cos}, {"sqrt", Op::sqrt},
            };
            for (const auto& [name, op] : functions) {
                if (id == name) {
                    expect('(');
                    Expr a = expr();
                    expect(')');
                    return Expr::unary_raw(op, a);
                }
            }
            pos_ = start;
            fail("unknown identifier '" + std::string(id) + "'");
        }
        if (accept('(')) {
            Expr e = expr();
            expect(')');
            return e;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        const std::string token(text_.substr(start, pos_ - start));
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            pos_ = start;
            fail("malformed number '" + token + "'");
        }
        if (used != token.size()) {
            pos_ = start;
            fail("malformed number '" + token + "'");
        }
        return Expr::constant(v);
    }

    std::string_view text_;
    bool allow_theta_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Parses an expression in r (and theta when allowed). Throws ParseError.
inline Expr parse_expression(std::string_view text, bool allow_theta = false) {
    return detail::Parser(text, allow_theta).parse();
}

/// Closed-form antiderivative in r for the families that have one by pattern:
/// polynomials in linear forms, powers of linear forms, and exp/sinh/cosh of linear forms.
inline std::optional<Expr> antiderivative(const Expr& e) {
    const Expr r = Expr::variable(Var::r);
    if (e.depends_on(Var::theta)) return std::nullopt;
    if (!e.depends_on(Var::r)) return e * r;

    // slope of a linear form, or nullopt
    auto linear_slope = [](const Expr& g) -> std::optional<double> {
        const Expr d = g.derivative(Var::r);
        if (d.depends_on(Var::r) || d.depends_on(Var::theta)) return std::nullopt;
        return d(0.0);
    };

    switch (e.op()) {
    case Op::var_r: return Expr::constant(0.5) * r * r;
    case Op::add:
    case Op::sub: {
        auto a = antiderivative(e.lhs());
        auto b = antiderivative(e.rhs());
        if (!a || !b) return std::nullopt;
        return e.op() == Op::add ? *a + *b : *a - *b;
    }
    case Op::neg: {
        auto a = antiderivative(e.lhs());
        if (!a) return std::nullopt;
        return -*a;
    }
    case Op::mul: {
        if (!e.lhs().depends_on(Var::r)) {
            auto b = antiderivative(e.rhs());
            if (b) return e.lhs() * *b;
        }
        if (!e.rhs().depends_on(Var::r)) {
            auto a = antiderivative(e.lhs());
            if (a) return *a * e.rhs();
        }
        return std::nullopt;
    }
    case Op::div: {
        if (!e.rhs().depends_on(Var::r)) {
            auto a = antiderivative(e.lhs());
            if (a) return *a / e.rhs();
            return std::nullopt;
        }
        if (!e.lhs().depends_on(Var::r)) {
            const Expr den = e.rhs();
            if (den.op() == Op::exp) return antiderivative(e.lhs() * apply(Op::exp, -den.lhs()));
            if (auto k = linear_slope(den); k && *k != 0.0) return e.lhs() * apply(Op::log, den) / Expr::constant(*k);
            if (den.op() == Op::pow && !den.rhs().depends_on(Var::r))
                return antiderivative(e.lhs() * pow(den.lhs(), -den.rhs()));
        }
        return std::nullopt;
    }
    case Op::pow: {
        if (e.rhs().depends_on(Var::r)) return std::nullopt;
        const double n = e.rhs()(0.0);
        auto k = linear_slope(e.lhs());
        if (!k || *k == 0.0) return std::nullopt;
        if (n == -1.0) return apply(Op::log, e.lhs()) / Expr::constant(*k);
        return pow(e.lhs(), Expr::constant(n + 1.0)) / Expr::constant((n + 1.0) * *k);
    }
    case Op::exp:
    case Op::sinh:
    case Op::cosh: {
        auto k = linear_slope(e.lhs());
        if (!k || *k == 0.0) return std::nullopt;
        const Op prim = e.op() == Op::exp ? Op::exp : e.op() == Op::sinh ? Op::cosh : Op::sinh;
        return apply(prim, e.lhs()) / Expr::constant(*k);
    }
    default: return std::nullopt;
    }
}

} // namespace ends
