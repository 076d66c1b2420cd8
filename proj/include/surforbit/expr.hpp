// Arithmetic expressions in the time variable, used for forcing laws and
// friction coefficients in scenario configs. Supported grammar:
//
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := ('+'|'-') factor | power
//   power   := atom ('^' factor)?
//   atom    := number | 't' | 'T' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | tan | exp | sqrt | abs
//
// 't' is the evaluation time, 'T' the scenario period. Expressions keep their
// source text so that configs round-trip exactly.
#pragma once

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "surforbit/errors.hpp"

namespace surforbit::expr {

namespace detail {

struct Node {
    virtual ~Node() = default;
    virtual double eval(double t, double T) const = 0;
};

struct Const : Node {
    double value;
    explicit Const(double v) : value(v) {}
    double eval(double, double) const override { return value; }
};

struct Var : Node {
    bool is_period;  // false: t, true: T
    explicit Var(bool p) : is_period(p) {}
    double eval(double t, double T) const override { return is_period ? T : t; }
};

struct Unary : Node {
    double (*fn)(double);
    std::shared_ptr<Node> arg;
    Unary(double (*f)(double), std::shared_ptr<Node> a) : fn(f), arg(std::move(a)) {}
    double eval(double t, double T) const override { return fn(arg->eval(t, T)); }
};

struct Binary : Node {
    char op;
    std::shared_ptr<Node> lhs, rhs;
    Binary(char o, std::shared_ptr<Node> l, std::shared_ptr<Node> r)
        : op(o), lhs(std::move(l)), rhs(std::move(r)) {}
    double eval(double t, double T) const override {
        double a = lhs->eval(t, T), b = rhs->eval(t, T);
        switch (op) {
            case '+': return a + b;
            case '-': return a - b;
            case '*': return a * b;
            case '/': return a / b;
            default: return std::pow(a, b);
        }
    }
};

class Parser {
public:
    explicit Parser(const std::string& text) : s_(text) {}

    std::shared_ptr<Node> parse() {
        auto node = expression();
        skip_ws();
        if (pos_ != s_.size())
            fail("unexpected trailing input");
        return node;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression error at column " + std::to_string(pos_ + 1) +
                              ": " + what + " in '" + s_ + "'",
                          0, static_cast<int>(pos_ + 1));
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    std::shared_ptr<Node> expression() {
        auto lhs = term();
        while (true) {
            if (consume('+'))
                lhs = std::make_shared<Binary>('+', lhs, term());
            else if (consume('-'))
                lhs = std::make_shared<Binary>('-', lhs, term());
            else
                return lhs;
        }
    }

    std::shared_ptr<Node> term() {
        auto lhs = factor();
        while (true) {
            if (consume('*'))
                lhs = std::make_shared<Binary>('*', lhs, factor());
            else if (consume('/'))
                lhs = std::make_shared<Binary>('/', lhs, factor());
            else
                return lhs;
        }
    }

    std::shared_ptr<Node> factor() {
        if (consume('-'))
            return std::make_shared<Binary>('-', std::make_shared<Const>(0.0), factor());
        if (consume('+'))
            return factor();
        return power();
    }

    std::shared_ptr<Node> power() {
        auto base = atom();
        if (consume('^'))
            return std::make_shared<Binary>('^', base, factor());
        return base;
    }

    std::shared_ptr<Node> atom() {
        skip_ws();
        if (pos_ >= s_.size()) fail("expected value");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (c == '(') {
            ++pos_;
            auto inner = expression();
            if (!consume(')')) fail("expected ')'");
            return inner;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail("unexpected character");
    }

    std::shared_ptr<Node> number() {
        std::size_t consumed = 0;
        double value = 0.0;
        try {
            value = std::stod(s_.substr(pos_), &consumed);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos_ += consumed;
        return std::make_shared<Const>(value);
    }

    std::shared_ptr<Node> identifier() {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string name = s_.substr(start, pos_ - start);
        if (name == "t") return std::make_shared<Var>(false);
        if (name == "T") return std::make_shared<Var>(true);
        if (name == "pi") return std::make_shared<Const>(3.14159265358979323846);
        if (name == "e") return std::make_shared<Const>(2.71828182845904523536);

        double (*fn)(double) = nullptr;
        if (name == "sin") fn = std::sin;
        else if (name == "cos") fn = std::cos;
        else if (name == "tan") fn = std::tan;
        else if (name == "exp") fn = std::exp;
        else if (name == "sqrt") fn = std::sqrt;
        else if (name == "abs") fn = std::fabs;
        if (!fn) {
            pos_ = start;
            fail("unknown identifier '" + name + "'");
        }
        if (!consume('(')) fail("expected '(' after function name");
        auto arg = expression();
        if (!consume(')')) fail("expected ')'");
        return std::make_shared<Unary>(fn, arg);
    }
};

}  // namespace detail

class Expression {
public:
    Expression() = default;

    static Expression parse(const std::string& text) {
        Expression e;
        e.text_ = text;
        e.root_ = detail::Parser(text).parse();
        return e;
    }

    double operator()(double t, double period) const { return root_->eval(t, period); }

    bool valid() const { return static_cast<bool>(root_); }
    const std::string& text() const { return text_; }

private:
    std::string text_;
    std::shared_ptr<detail::Node> root_;
};

}  // namespace surforbit::expr
