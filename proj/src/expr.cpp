#include "conelab/expr.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "conelab/errors.hpp"

namespace conelab {

struct Expr::Node {
    enum class Kind { kConst, kCoord, kUnary, kBinary, kCall2 } kind;
    double value = 0;
    int axis = 0;
    char op = 0;               // for unary '-'/binary ops
    std::string func;          // for calls
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

struct Parser {
    const std::string& s;
    size_t pos = 0;

    explicit Parser(const std::string& text) : s(text) {}

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool peek(char c) {
        skip();
        return pos < s.size() && s[pos] == c;
    }
    bool accept(char c) {
        if (peek(c)) {
            ++pos;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c))
            throw ConfigError("expression parse error: expected '" + std::string(1, c) +
                              "' at position " + std::to_string(pos) + " in \"" + s + "\"");
    }

    NodePtr make_const(double v) {
        auto n = std::make_shared<Expr::Node>();
        n->kind = Expr::Node::Kind::kConst;
        n->value = v;
        return n;
    }

    NodePtr parse_expr() {
        NodePtr left = parse_term();
        while (true) {
            skip();
            if (accept('+')) {
                auto n = std::make_shared<Expr::Node>();
                n->kind = Expr::Node::Kind::kBinary;
                n->op = '+';
                n->a = left;
                n->b = parse_term();
                left = n;
            } else if (accept('-')) {
                auto n = std::make_shared<Expr::Node>();
                n->kind = Expr::Node::Kind::kBinary;
                n->op = '-';
                n->a = left;
                n->b = parse_term();
                left = n;
            } else {
                return left;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr left = parse_unary();
        while (true) {
            skip();
            if (accept('*')) {
                auto n = std::make_shared<Expr::Node>();
                n->kind = Expr::Node::Kind::kBinary;
                n->op = '*';
                n->a = left;
                n->b = parse_unary();
                left = n;
            } else if (accept('/')) {
                auto n = std::make_shared<Expr::Node>();
                n->kind = Expr::Node::Kind::kBinary;
                n->op = '/';
                n->a = left;
                n->b = parse_unary();
                left = n;
            } else {
                return left;
            }
        }
    }

    NodePtr parse_unary() {
        skip();
        if (accept('-')) {
            auto n = std::make_shared<Expr::Node>();
            n->kind = Expr::Node::Kind::kUnary;
            n->op = '-';
            n->a = parse_unary();
            return n;
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        skip();
        if (accept('^')) {
            auto n = std::make_shared<Expr::Node>();
            n->kind = Expr::Node::Kind::kBinary;
            n->op = '^';
            n->a = base;
            n->b = parse_unary();  // right associative
            return n;
        }
        return base;
    }

    NodePtr parse_atom() {
        skip();
        if (pos >= s.size())
            throw ConfigError("expression parse error: unexpected end of \"" + s + "\"");
        const char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            size_t used = 0;
            const double v = std::stod(s.substr(pos), &used);
            pos += used;
            return make_const(v);
        }
        if (c == '(') {
            ++pos;
            NodePtr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (c == '|') {  // |expr| sugar for abs
            ++pos;
            NodePtr inner = parse_expr();
            expect('|');
            auto n = std::make_shared<Expr::Node>();
            n->kind = Expr::Node::Kind::kCall2;
            n->func = "abs";
            n->a = inner;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = pos;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                                      s[pos] == '_'))
                ++pos;
            const std::string name = s.substr(start, pos - start);
            skip();
            if (pos < s.size() && s[pos] == '(') {
                static const char* known[] = {"abs", "sqrt", "sin", "cos", "tan", "exp",
                                              "log", "sign", "pow", "min", "max"};
                bool ok = false;
                for (const char* k : known) ok = ok || name == k;
                if (!ok)
                    throw ConfigError("expression parse error: unknown function '" + name +
                                      "' in \"" + s + "\"");
                ++pos;
                NodePtr a = parse_expr();
                NodePtr b;
                if (accept(',')) b = parse_expr();
                expect(')');
                auto n = std::make_shared<Expr::Node>();
                n->kind = Expr::Node::Kind::kCall2;
                n->func = name;
                n->a = a;
                n->b = b;
                return n;
            }
            auto n = std::make_shared<Expr::Node>();
            n->kind = Expr::Node::Kind::kCoord;
            if (name == "t" || name == "x0") n->axis = 0;
            else if (name == "x" || name == "x1") n->axis = 1;
            else if (name == "y" || name == "x2") n->axis = 2;
            else if (name == "z" || name == "x3") n->axis = 3;
            else if (name == "x4") n->axis = 4;
            else if (name == "x5") n->axis = 5;
            else if (name == "pi") return make_const(M_PI);
            else
                throw ConfigError("expression parse error: unknown symbol '" + name +
                                  "' in \"" + s + "\"");
            return n;
        }
        throw ConfigError("expression parse error: unexpected character '" +
                          std::string(1, c) + "' in \"" + s + "\"");
    }
};

double eval_node(const Expr::Node& n, const VecN& x) {
    using K = Expr::Node::Kind;
    switch (n.kind) {
        case K::kConst: return n.value;
        case K::kCoord: return n.axis < x.n ? x[n.axis] : 0.0;
        case K::kUnary: return -eval_node(*n.a, x);
        case K::kBinary: {
            const double a = eval_node(*n.a, x);
            const double b = eval_node(*n.b, x);
            switch (n.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
                case '^': return std::pow(a, b);
            }
            return 0;
        }
        case K::kCall2: {
            const double a = eval_node(*n.a, x);
            const double b = n.b ? eval_node(*n.b, x) : 0.0;
            if (n.func == "abs") return std::abs(a);
            if (n.func == "sqrt") return std::sqrt(a);
            if (n.func == "sin") return std::sin(a);
            if (n.func == "cos") return std::cos(a);
            if (n.func == "tan") return std::tan(a);
            if (n.func == "exp") return std::exp(a);
            if (n.func == "log") return std::log(a);
            if (n.func == "sign") return a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
            if (n.func == "pow") return std::pow(a, b);
            if (n.func == "min") return std::min(a, b);
            if (n.func == "max") return std::max(a, b);
            throw ConfigError("expression eval error: unknown function '" + n.func + "'");
        }
    }
    return 0;
}

bool uses_axis_node(const Expr::Node& n, int axis) {
    using K = Expr::Node::Kind;
    switch (n.kind) {
        case K::kConst: return false;
        case K::kCoord: return n.axis == axis;
        case K::kUnary: return uses_axis_node(*n.a, axis);
        case K::kBinary:
            return uses_axis_node(*n.a, axis) || uses_axis_node(*n.b, axis);
        case K::kCall2:
            return uses_axis_node(*n.a, axis) || (n.b && uses_axis_node(*n.b, axis));
    }
    return false;
}

}  // namespace

Expr::Expr() = default;
Expr::~Expr() = default;
Expr::Expr(Expr&&) noexcept = default;
Expr& Expr::operator=(Expr&&) noexcept = default;
Expr::Expr(const Expr&) = default;
Expr& Expr::operator=(const Expr&) = default;

Expr Expr::parse(const std::string& text) {
    Parser p(text);
    Expr e;
    e.root_ = p.parse_expr();
    p.skip();
    if (p.pos != text.size())
        throw ConfigError("expression parse error: trailing input at position " +
                          std::to_string(p.pos) + " in \"" + text + "\"");
    return e;
}

double Expr::eval(const VecN& coords) const {
    if (!root_) throw ConfigError("empty expression");
    return eval_node(*root_, coords);
}

bool Expr::uses_axis(int axis) const { return root_ && uses_axis_node(*root_, axis); }

}  // namespace conelab
