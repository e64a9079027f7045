#pragma once

#include "fraclap/core.hpp"

#include <cctype>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace fraclap {

/// Arithmetic expression in one variable `t`.
///
/// Grammar: + - * / ^ (right associative), unary minus, parentheses, numbers,
/// the variable t, and the functions ln, exp, abs. Parsed once; evaluation is
/// const and safe to call from several threads.
class Expression {
public:
    Expression() = default;

    static Expression parse(const std::string& text) {
        Parser p{text, 0};
        Expression e;
        e.text_ = text;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
        return e;
    }

    double operator()(double t) const { return eval(*root_, t); }

    const std::string& text() const { return text_; }
    bool empty() const { return !root_; }

private:
    enum class Op { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Ln, Exp, Abs };

    struct Node {
        Op op;
        double value = 0.0;
        std::shared_ptr<const Node> a, b;
    };
    using Ptr = std::shared_ptr<const Node>;

    static Ptr make(Op op, Ptr a = nullptr, Ptr b = nullptr, double v = 0.0) {
        return std::make_shared<const Node>(Node{op, v, std::move(a), std::move(b)});
    }

    struct Parser {
        const std::string& s;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& msg) const {
            throw ConfigError("expression '" + s + "': " + msg + " at position " + std::to_string(pos));
        }
        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool accept(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        Ptr expr() {
            Ptr lhs = term();
            for (;;) {
                if (accept('+'))
                    lhs = make(Op::Add, lhs, term());
                else if (accept('-'))
                    lhs = make(Op::Sub, lhs, term());
                else
                    return lhs;
            }
        }
        Ptr term() {
            Ptr lhs = unary();
            for (;;) {
                if (accept('*'))
                    lhs = make(Op::Mul, lhs, unary());
                else if (accept('/'))
                    lhs = make(Op::Div, lhs, unary());
                else
                    return lhs;
            }
        }
        Ptr unary() {
            if (accept('-')) return make(Op::Neg, unary());
            if (accept('+')) return unary();
            return power();
        }
        Ptr power() {
            Ptr base = primary();
            if (accept('^')) return make(Op::Pow, base, unary());
            return base;
        }
        Ptr primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end");
            const char c = s[pos];
            if (accept('(')) {
                Ptr e = expr();
                if (!accept(')')) fail("expected ')'");
                return e;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const char* begin = s.c_str() + pos;
                char* end = nullptr;
                const double v = std::strtod(begin, &end);
                if (end == begin) fail("bad number");
                pos += static_cast<std::size_t>(end - begin);
                return make(Op::Num, nullptr, nullptr, v);
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
                const std::string name = s.substr(start, pos - start);
                if (name == "t") return make(Op::Var);
                Op op;
                if (name == "ln")
                    op = Op::Ln;
                else if (name == "exp")
                    op = Op::Exp;
                else if (name == "abs")
                    op = Op::Abs;
                else {
                    pos = start;
                    fail("unknown name '" + name + "'");
                }
                if (!accept('(')) fail("expected '(' after " + name);
                Ptr arg = expr();
                if (!accept(')')) fail("expected ')'");
                return make(op, arg);
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }
    };

    static double eval(const Node& n, double t) {
        switch (n.op) {
            case Op::Num: return n.value;
            case Op::Var: return t;
            case Op::Add: return eval(*n.a, t) + eval(*n.b, t);
            case Op::Sub: return eval(*n.a, t) - eval(*n.b, t);
            case Op::Mul: return eval(*n.a, t) * eval(*n.b, t);
            case Op::Div: return eval(*n.a, t) / eval(*n.b, t);
            case Op::Pow: return std::pow(eval(*n.a, t), eval(*n.b, t));
            case Op::Neg: return -eval(*n.a, t);
            case Op::Ln: return std::log(eval(*n.a, t));
            case Op::Exp: return std::exp(eval(*n.a, t));
            case Op::Abs: return std::abs(eval(*n.a, t));
        }
        return 0.0;
    }

    std::string text_;
    Ptr root_;
};

}  // namespace fraclap
