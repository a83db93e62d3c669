// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/ltlr.hpp"

#include "mnv/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <tuple>

namespace mnv::ltl {

// ---------------------------------------------------------------------------
// Formula handle and construction

Op Formula::op() const
{
    return _node->op;
}

int Formula::k() const
{
    return _node->k;
}

const Atom& Formula::atom() const
{
    return _node->atom;
}

const std::vector<Formula>& Formula::children() const
{
    return _node->children;
}

bool operator==(const Formula& a, const Formula& b)
{
    if (a._node == b._node)
        return true;
    if (!a._node || !b._node)
        return false;
    const Node& x = *a._node;
    const Node& y = *b._node;
    return x.op == y.op && x.k == y.k && x.atom == y.atom && x.children == y.children;
}

namespace {

Formula make(Op op, int k, std::vector<Formula> children, Atom a = {})
{
    auto n = std::make_shared<Node>();
    n->op = op;
    n->k = k;
    n->atom = std::move(a);
    n->children = std::move(children);
    return Formula(std::move(n));
}

void require_bound(int k, int min, const char* what)
{
    if (k < min)
        throw std::invalid_argument(std::string(what) + ": step bound must be >= " + std::to_string(min));
}

} // namespace

Formula make_atom(Atom a)
{
    for (auto it = a.coeffs.begin(); it != a.coeffs.end();) {
        if (!std::isfinite(it->second))
            throw std::invalid_argument("atom coefficient for '" + it->first + "' is not finite");
        it = it->second == 0.0 ? a.coeffs.erase(it) : std::next(it);
    }
    if (!std::isfinite(a.rhs))
        throw std::invalid_argument("atom right-hand side is not finite");
    return make(Op::atom, 0, {}, std::move(a));
}

Formula make_true()
{
    return make_atom(Atom{ {}, 0.0, false });
}

Formula make_false()
{
    return make_atom(Atom{ {}, -1.0, false });
}

Formula negation(Formula f)
{
    return make(Op::negation, 0, { std::move(f) });
}

Formula conjunction(std::vector<Formula> fs)
{
    if (fs.empty())
        return make_true();
    if (fs.size() == 1)
        return fs.front();
    return make(Op::conjunction, 0, std::move(fs));
}

Formula disjunction(std::vector<Formula> fs)
{
    if (fs.empty())
        return make_false();
    if (fs.size() == 1)
        return fs.front();
    return make(Op::disjunction, 0, std::move(fs));
}

Formula next(int k, Formula f)
{
    require_bound(k, 0, "next");
    if (k == 0)
        return f;
    if (f.op() == Op::next)
        return make(Op::next, k + f.k(), { f.child() });
    return make(Op::next, k, { std::move(f) });
}

Formula always(Formula f)
{
    return make(Op::always, 0, { std::move(f) });
}

Formula eventually(Formula f)
{
    return make(Op::eventually, 0, { std::move(f) });
}

Formula until(Formula lhs, Formula rhs)
{
    return make(Op::until, 0, { std::move(lhs), std::move(rhs) });
}

Formula release(Formula lhs, Formula rhs)
{
    return make(Op::release, 0, { std::move(lhs), std::move(rhs) });
}

Formula bounded_always(int k, Formula f)
{
    require_bound(k, 0, "bounded always");
    return make(Op::bounded_always, k, { std::move(f) });
}

Formula bounded_eventually(int k, Formula f)
{
    require_bound(k, 0, "bounded eventually");
    return make(Op::bounded_eventually, k, { std::move(f) });
}

Formula bounded_until(int k, Formula lhs, Formula rhs)
{
    require_bound(k, 0, "bounded until");
    return make(Op::bounded_until, k, { std::move(lhs), std::move(rhs) });
}

Formula bounded_release(int k, Formula lhs, Formula rhs)
{
    require_bound(k, 0, "bounded release");
    return make(Op::bounded_release, k, { std::move(lhs), std::move(rhs) });
}

// ---------------------------------------------------------------------------
// Parsing

ParseError::ParseError(const std::string& msg, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg), _line{ line },
      _column{ column }
{
}

namespace {

enum class Tok { num, ident, lparen, rparen, bang, amp, bar, le, ge, lt, gt, plus, minus, star, caret, end };

struct Token
{
    Tok kind = Tok::end;
    std::string text;
    double value = 0.0;
    int line = 1;
    int column = 1;
};

std::vector<Token> tokenize(const std::string& s)
{
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (s[i] == '\n') {
                ++line;
                col = 1;
            }
            else
                ++col;
        }
    };
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        auto two = [&](char a, char b) { return c == a && i + 1 < s.size() && s[i + 1] == b; };
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i;
            while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.'))
                ++j;
            if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < s.size() && (s[k] == '+' || s[k] == '-'))
                    ++k;
                if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
                    while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k])))
                        ++k;
                    j = k;
                }
            }
            t.kind = Tok::num;
            t.text = s.substr(i, j - i);
            auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.value);
            if (ec != std::errc{} || ptr != t.text.data() + t.text.size())
                throw ParseError("malformed number '" + t.text + "'", line, col);
            advance(j - i);
        }
        else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.'))
                ++j;
            if (j < s.size() && s[j] == '[') {
                std::size_t k = j + 1;
                while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k])))
                    ++k;
                if (k > j + 1 && k < s.size() && s[k] == ']')
                    j = k + 1;
                else
                    throw ParseError("malformed index in variable name", line, col + static_cast<int>(j - i));
            }
            t.kind = Tok::ident;
            t.text = s.substr(i, j - i);
            advance(j - i);
        }
        else if (two('<', '=')) {
            t.kind = Tok::le;
            advance(2);
        }
        else if (two('>', '=')) {
            t.kind = Tok::ge;
            advance(2);
        }
        else if (two('&', '&')) {
            t.kind = Tok::amp;
            advance(2);
        }
        else if (two('|', '|')) {
            t.kind = Tok::bar;
            advance(2);
        }
        else {
            switch (c) {
            case '(': t.kind = Tok::lparen; break;
            case ')': t.kind = Tok::rparen; break;
            case '!': t.kind = Tok::bang; break;
            case '&': t.kind = Tok::amp; break;
            case '|': t.kind = Tok::bar; break;
            case '<': t.kind = Tok::lt; break;
            case '>': t.kind = Tok::gt; break;
            case '+': t.kind = Tok::plus; break;
            case '-': t.kind = Tok::minus; break;
            case '*': t.kind = Tok::star; break;
            case '^': t.kind = Tok::caret; break;
            default: throw ParseError(std::string("unexpected character '") + c + "'", line, col);
            }
            advance(1);
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::end;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

bool is_keyword(const Token& t)
{
    return t.kind == Tok::ident &&
           (t.text == "X" || t.text == "G" || t.text == "F" || t.text == "U" || t.text == "R" || t.text == "true" ||
            t.text == "false");
}

class Parser
{
public:
    explicit Parser(const std::string& text) : _toks{ tokenize(text) } {}

    Formula parse_all()
    {
        Formula f = parse_or();
        if (peek().kind != Tok::end)
            error("unexpected trailing input");
        return f;
    }

private:
    std::vector<Token> _toks;
    std::size_t _pos = 0;

    const Token& peek(std::size_t ahead = 0) const { return _toks[std::min(_pos + ahead, _toks.size() - 1)]; }
    const Token& take() { return _toks[std::min(_pos++, _toks.size() - 1)]; }

    [[noreturn]] void error(const std::string& msg) const
    {
        const Token& t = peek();
        throw ParseError(msg, t.line, t.column);
    }

    bool at_ident(const char* s) const { return peek().kind == Tok::ident && peek().text == s; }

    void expect(Tok k, const char* what)
    {
        if (peek().kind != k)
            error(std::string("expected ") + what);
        take();
    }

    int integer_bound()
    {
        const Token& t = peek();
        if (t.kind != Tok::num || t.value != std::floor(t.value) || t.value < 0 || t.value > 1e6 ||
            t.text.find_first_of(".eE") != std::string::npos)
            error("expected a non-negative integer step bound");
        take();
        return static_cast<int>(t.value);
    }

    // "<=" k after G/F/U/R marks the bounded variant.
    std::optional<int> optional_bound()
    {
        if (peek().kind == Tok::le && peek(1).kind == Tok::num) {
            take();
            return integer_bound();
        }
        return std::nullopt;
    }

    Formula parse_or()
    {
        std::vector<Formula> parts{ parse_and() };
        while (peek().kind == Tok::bar) {
            take();
            parts.push_back(parse_and());
        }
        return disjunction(std::move(parts));
    }

    Formula parse_and()
    {
        std::vector<Formula> parts{ parse_binary() };
        while (peek().kind == Tok::amp) {
            take();
            parts.push_back(parse_binary());
        }
        return conjunction(std::move(parts));
    }

    Formula parse_binary()
    {
        Formula lhs = parse_unary();
        if (at_ident("U") || at_ident("R")) {
            const bool is_until = peek().text == "U";
            take();
            auto k = optional_bound();
            Formula rhs = parse_binary();
            if (k)
                return is_until ? bounded_until(*k, lhs, rhs) : bounded_release(*k, lhs, rhs);
            return is_until ? until(lhs, rhs) : release(lhs, rhs);
        }
        return lhs;
    }

    Formula parse_unary()
    {
        if (peek().kind == Tok::bang) {
            take();
            return negation(parse_unary());
        }
        if (at_ident("X")) {
            take();
            int k = 1;
            if (peek().kind == Tok::caret) {
                take();
                k = integer_bound();
                if (k < 1)
                    error("next exponent must be >= 1");
            }
            return next(k, parse_unary());
        }
        if (at_ident("G") || at_ident("F")) {
            const bool is_always = peek().text == "G";
            take();
            auto k = optional_bound();
            Formula body = parse_unary();
            if (k)
                return is_always ? bounded_always(*k, body) : bounded_eventually(*k, body);
            return is_always ? always(body) : eventually(body);
        }
        return parse_primary();
    }

    Formula parse_primary()
    {
        if (peek().kind == Tok::lparen) {
            take();
            Formula f = parse_or();
            expect(Tok::rparen, "')'");
            return f;
        }
        if (at_ident("true")) {
            take();
            return make_true();
        }
        if (at_ident("false")) {
            take();
            return make_false();
        }
        return parse_atom();
    }

    struct Sum
    {
        std::map<std::string, double> coeffs;
        double constant = 0.0;
    };

    Sum parse_sum()
    {
        Sum s;
        bool first = true;
        for (;;) {
            double sign = 1.0;
            bool had_op = false;
            while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
                if (take().kind == Tok::minus)
                    sign = -sign;
                had_op = true;
            }
            if (!first && !had_op)
                break;
            const Token& t = peek();
            if (t.kind == Tok::num) {
                take();
                const double v = sign * t.value;
                if (peek().kind == Tok::star) {
                    take();
                    if (peek().kind != Tok::ident || is_keyword(peek()))
                        error("expected a variable after '*'");
                    s.coeffs[take().text] += v;
                }
                else
                    s.constant += v;
            }
            else if (t.kind == Tok::ident && !is_keyword(t)) {
                take();
                double v = sign;
                if (peek().kind == Tok::star) {
                    take();
                    if (peek().kind != Tok::num)
                        error("expected a number after '*'");
                    v *= take().value;
                }
                s.coeffs[t.text] += v;
            }
            else
                error("expected a linear term");
            first = false;
        }
        return s;
    }

    Formula parse_atom()
    {
        Sum lhs = parse_sum();
        const Tok rel = peek().kind;
        if (rel != Tok::le && rel != Tok::ge && rel != Tok::lt && rel != Tok::gt)
            error("expected a comparison ('<=', '>=', '<', '>')");
        take();
        Sum rhs = parse_sum();
        // lhs - rhs (rel) 0, then normalise to  c.x <= d  or  c.x > d
        Atom a;
        a.coeffs = lhs.coeffs;
        for (const auto& [name, v] : rhs.coeffs)
            a.coeffs[name] -= v;
        a.rhs = rhs.constant - lhs.constant;
        if (rel == Tok::ge || rel == Tok::lt) {
            for (auto& [name, v] : a.coeffs)
                v = -v;
            a.rhs = -a.rhs;
        }
        a.strict = rel == Tok::gt || rel == Tok::lt;
        return make_atom(std::move(a));
    }
};

std::string number_text(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

Formula parse(const std::string& text)
{
    return Parser(text).parse_all();
}

std::string print(const Atom& a)
{
    std::string out;
    bool first = true;
    for (const auto& [name, c] : a.coeffs) {
        double mag = c;
        if (first) {
            if (c < 0) {
                out += "-";
                mag = -c;
            }
        }
        else {
            out += c < 0 ? " - " : " + ";
            mag = std::abs(c);
        }
        out += mag == 1.0 ? name : number_text(mag) + "*" + name;
        first = false;
    }
    if (first)
        out = "0";
    out += a.strict ? " > " : " <= ";
    out += number_text(a.rhs);
    return out;
}

std::string print(const Formula& f)
{
    auto join = [](const std::vector<Formula>& cs, const char* sep) {
        std::string s = "(";
        for (std::size_t i = 0; i < cs.size(); ++i) {
            if (i)
                s += sep;
            s += print(cs[i]);
        }
        return s + ")";
    };
    auto bound = [](const char* op, int k) { return std::string(op) + "<=" + std::to_string(k); };
    switch (f.op()) {
    case Op::atom: return print(f.atom());
    case Op::negation: return "!(" + print(f.child()) + ")";
    case Op::conjunction: return join(f.children(), " & ");
    case Op::disjunction: return join(f.children(), " | ");
    case Op::next: return (f.k() == 1 ? std::string("X") : "X^" + std::to_string(f.k())) + " (" + print(f.child()) + ")";
    case Op::always: return "G (" + print(f.child()) + ")";
    case Op::eventually: return "F (" + print(f.child()) + ")";
    case Op::bounded_always: return bound("G", f.k()) + " (" + print(f.child()) + ")";
    case Op::bounded_eventually: return bound("F", f.k()) + " (" + print(f.child()) + ")";
    case Op::until: return "(" + print(f.child(0)) + " U " + print(f.child(1)) + ")";
    case Op::release: return "(" + print(f.child(0)) + " R " + print(f.child(1)) + ")";
    case Op::bounded_until: return "(" + print(f.child(0)) + " " + bound("U", f.k()) + " " + print(f.child(1)) + ")";
    case Op::bounded_release:
        return "(" + print(f.child(0)) + " " + bound("R", f.k()) + " " + print(f.child(1)) + ")";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Structural queries and rewriting

namespace {

bool is_unbounded_op(Op op)
{
    return op == Op::always || op == Op::eventually || op == Op::until || op == Op::release;
}

bool any_node(const Formula& f, bool (*pred)(Op))
{
    if (pred(f.op()))
        return true;
    for (const auto& c : f.children())
        if (any_node(c, pred))
            return true;
    return false;
}

int start_index(const Options& opt)
{
    return opt.include_step_zero ? 0 : 1;
}

} // namespace

bool is_bounded(const Formula& f)
{
    return !any_node(f, is_unbounded_op);
}

bool is_state_predicate(const Formula& f)
{
    return !any_node(f, [](Op op) {
        return op != Op::atom && op != Op::negation && op != Op::conjunction && op != Op::disjunction;
    });
}

bool is_nnf(const Formula& f)
{
    if (f.op() == Op::negation)
        return false;
    for (const auto& c : f.children())
        if (!is_nnf(c))
            return false;
    return true;
}

int horizon(const Formula& f, const Options& opt)
{
    (void)opt;
    switch (f.op()) {
    case Op::atom: return 0;
    case Op::negation: return horizon(f.child(), opt);
    case Op::conjunction:
    case Op::disjunction: {
        int h = 0;
        for (const auto& c : f.children())
            h = std::max(h, horizon(c, opt));
        return h;
    }
    case Op::next: return f.k() + horizon(f.child(), opt);
    case Op::bounded_always:
    case Op::bounded_eventually: return f.k() + horizon(f.child(), opt);
    case Op::bounded_until:
    case Op::bounded_release: return f.k() + std::max(horizon(f.child(0), opt), horizon(f.child(1), opt));
    default: throw std::invalid_argument("horizon: formula contains an unbounded temporal operator");
    }
}

std::vector<std::string> variables(const Formula& f)
{
    std::set<std::string> names;
    auto walk = [&](auto&& self, const Formula& g) -> void {
        if (g.op() == Op::atom)
            for (const auto& [n, c] : g.atom().coeffs)
                names.insert(n);
        for (const auto& c : g.children())
            self(self, c);
    };
    walk(walk, f);
    return { names.begin(), names.end() };
}

namespace {

Formula nnf(const Formula& f, bool neg)
{
    auto map_children = [&](bool child_neg) {
        std::vector<Formula> out;
        for (const auto& c : f.children())
            out.push_back(nnf(c, child_neg));
        return out;
    };
    switch (f.op()) {
    case Op::atom: return neg ? make_atom(f.atom().negated()) : f;
    case Op::negation: return nnf(f.child(), !neg);
    case Op::conjunction: return neg ? disjunction(map_children(true)) : conjunction(map_children(false));
    case Op::disjunction: return neg ? conjunction(map_children(true)) : disjunction(map_children(false));
    case Op::next: return next(f.k(), nnf(f.child(), neg));
    case Op::always: return neg ? eventually(nnf(f.child(), true)) : always(nnf(f.child(), false));
    case Op::eventually: return neg ? always(nnf(f.child(), true)) : eventually(nnf(f.child(), false));
    case Op::until: {
        auto c = map_children(neg);
        return neg ? release(c[0], c[1]) : until(c[0], c[1]);
    }
    case Op::release: {
        auto c = map_children(neg);
        return neg ? until(c[0], c[1]) : release(c[0], c[1]);
    }
    case Op::bounded_always:
        return neg ? bounded_eventually(f.k(), nnf(f.child(), true)) : bounded_always(f.k(), nnf(f.child(), false));
    case Op::bounded_eventually:
        return neg ? bounded_always(f.k(), nnf(f.child(), true)) : bounded_eventually(f.k(), nnf(f.child(), false));
    case Op::bounded_until: {
        auto c = map_children(neg);
        return neg ? bounded_release(f.k(), c[0], c[1]) : bounded_until(f.k(), c[0], c[1]);
    }
    case Op::bounded_release: {
        auto c = map_children(neg);
        return neg ? bounded_until(f.k(), c[0], c[1]) : bounded_release(f.k(), c[0], c[1]);
    }
    }
    return f;
}

} // namespace

Formula to_nnf(const Formula& f)
{
    return nnf(f, false);
}

Formula expand_bounded(const Formula& f, const Options& opt)
{
    const int s = start_index(opt);
    switch (f.op()) {
    case Op::atom: return f;
    case Op::negation: return negation(expand_bounded(f.child(), opt));
    case Op::conjunction:
    case Op::disjunction: {
        std::vector<Formula> cs;
        for (const auto& c : f.children())
            cs.push_back(expand_bounded(c, opt));
        return f.op() == Op::conjunction ? conjunction(std::move(cs)) : disjunction(std::move(cs));
    }
    case Op::next: return next(f.k(), expand_bounded(f.child(), opt));
    case Op::bounded_always:
    case Op::bounded_eventually: {
        const Formula body = expand_bounded(f.child(), opt);
        std::vector<Formula> cs;
        for (int i = s; i <= f.k(); ++i)
            cs.push_back(next(i, body));
        return f.op() == Op::bounded_always ? conjunction(std::move(cs)) : disjunction(std::move(cs));
    }
    case Op::bounded_until: {
        const Formula psi = expand_bounded(f.child(0), opt);
        const Formula phi = expand_bounded(f.child(1), opt);
        std::vector<Formula> terms;
        for (int i = 0; i <= f.k(); ++i) {
            std::vector<Formula> conj;
            for (int j = 0; j < i; ++j)
                conj.push_back(next(j, psi));
            conj.push_back(next(i, phi));
            terms.push_back(conjunction(std::move(conj)));
        }
        return disjunction(std::move(terms));
    }
    case Op::bounded_release: {
        // phi through step k, or psi at some i <= k with phi on 0..i
        const Formula psi = expand_bounded(f.child(0), opt);
        const Formula phi = expand_bounded(f.child(1), opt);
        std::vector<Formula> all_phi;
        for (int i = 0; i <= f.k(); ++i)
            all_phi.push_back(next(i, phi));
        std::vector<Formula> terms{ conjunction(all_phi) };
        for (int i = 0; i <= f.k(); ++i) {
            std::vector<Formula> conj{ next(i, psi) };
            for (int j = 0; j <= i; ++j)
                conj.push_back(next(j, phi));
            terms.push_back(conjunction(std::move(conj)));
        }
        return disjunction(std::move(terms));
    }
    default: throw std::invalid_argument("expand_bounded: formula contains an unbounded temporal operator");
    }
}

// ---------------------------------------------------------------------------
// Resolution

bool LinearAtom::holds(std::span<const double> x) const
{
    double s = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j)
        s += c[j] * x[j];
    return strict ? s > d : s <= d;
}

std::optional<std::size_t> StateSpace::index(const std::string& name) const
{
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name)
            return i;
    if (name.size() >= 4 && name.rfind("x[", 0) == 0 && name.back() == ']') {
        const std::string digits = name.substr(2, name.size() - 3);
        if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            const auto i = static_cast<std::size_t>(std::stoull(digits));
            if (i < dim)
                return i;
        }
    }
    return std::nullopt;
}

StateSpace StateSpace::of(const SystemSpec& spec)
{
    return { spec.state_dim(), spec.state_names };
}

LinearAtom resolve(const Atom& a, const StateSpace& space)
{
    LinearAtom out;
    out.c.assign(space.dim, 0.0);
    out.d = a.rhs;
    out.strict = a.strict;
    for (const auto& [name, c] : a.coeffs) {
        auto i = space.index(name);
        if (!i)
            throw ResolveError("unknown state variable '" + name + "'");
        out.c[*i] += c;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flattening

bool Skeleton::has_disjunction() const
{
    return std::any_of(nodes.begin(), nodes.end(), [](const SNode& n) { return n.kind == Kind::disjunction; });
}

Skeleton flatten_next(const Formula& f, const Options& opt)
{
    const Formula g = expand_bounded(f, opt);
    Skeleton sk;
    std::map<std::tuple<int, bool, Atom>, std::size_t> leaf_ids;
    auto leaf = [&](int step, const Atom& a, bool positive) {
        auto key = std::make_tuple(step, positive, a);
        auto it = leaf_ids.find(key);
        std::size_t id;
        if (it == leaf_ids.end()) {
            id = sk.leaves.size();
            sk.leaves.push_back({ step, a, positive });
            leaf_ids.emplace(key, id);
        }
        else
            id = it->second;
        sk.nodes.push_back({ Skeleton::Kind::leaf, id, {} });
        return sk.nodes.size() - 1;
    };
    auto walk = [&](auto&& self, const Formula& h, int offset) -> std::size_t {
        switch (h.op()) {
        case Op::atom: return leaf(offset, h.atom(), true);
        case Op::negation:
            if (h.child().op() != Op::atom)
                throw std::invalid_argument("flatten_next: negation above a non-atom; convert to NNF first");
            return leaf(offset, h.child().atom(), false);
        case Op::next: return self(self, h.child(), offset + h.k());
        case Op::conjunction:
        case Op::disjunction: {
            const auto kind = h.op() == Op::conjunction ? Skeleton::Kind::conjunction : Skeleton::Kind::disjunction;
            std::vector<std::size_t> kids;
            for (const auto& c : h.children()) {
                const std::size_t k = self(self, c, offset);
                // splice same-kind children
                if (sk.nodes[k].kind == kind)
                    kids.insert(kids.end(), sk.nodes[k].children.begin(), sk.nodes[k].children.end());
                else
                    kids.push_back(k);
            }
            sk.nodes.push_back({ kind, 0, std::move(kids) });
            return sk.nodes.size() - 1;
        }
        default: throw std::logic_error("flatten_next: unexpected operator after expansion");
        }
    };
    sk.root = walk(walk, g, 0);
    return sk;
}

// ---------------------------------------------------------------------------
// Semantics

Verdict3 kleene_and(Verdict3 a, Verdict3 b)
{
    if (a == Verdict3::False || b == Verdict3::False)
        return Verdict3::False;
    if (a == Verdict3::True && b == Verdict3::True)
        return Verdict3::True;
    return Verdict3::Unknown;
}

Verdict3 kleene_or(Verdict3 a, Verdict3 b)
{
    if (a == Verdict3::True || b == Verdict3::True)
        return Verdict3::True;
    if (a == Verdict3::False && b == Verdict3::False)
        return Verdict3::False;
    return Verdict3::Unknown;
}

Verdict3 kleene_not(Verdict3 a)
{
    switch (a) {
    case Verdict3::True: return Verdict3::False;
    case Verdict3::False: return Verdict3::True;
    default: return Verdict3::Unknown;
    }
}

std::string to_string(Verdict3 v)
{
    switch (v) {
    case Verdict3::True: return "true";
    case Verdict3::False: return "false";
    default: return "unknown";
    }
}

namespace {

// Shared concrete evaluator; `pos` maps a raw position to a state index.
template <class PosFn>
bool eval_concrete(const Formula& f, std::size_t i, const std::vector<Vector>& path, const StateSpace& space,
                   const Options& opt, PosFn pos, std::size_t window)
{
    auto ev = [&](const Formula& g, std::size_t j) { return eval_concrete(g, j, path, space, opt, pos, window); };
    const auto k = static_cast<std::size_t>(std::max(0, f.k()));
    const std::size_t s = static_cast<std::size_t>(start_index(opt));
    switch (f.op()) {
    case Op::atom: return resolve(f.atom(), space).holds(path[pos(i)]);
    case Op::negation: return !ev(f.child(), i);
    case Op::conjunction:
        return std::all_of(f.children().begin(), f.children().end(), [&](const Formula& c) { return ev(c, i); });
    case Op::disjunction:
        return std::any_of(f.children().begin(), f.children().end(), [&](const Formula& c) { return ev(c, i); });
    case Op::next: return ev(f.child(), i + k);
    case Op::bounded_always:
        for (std::size_t j = s; j <= k; ++j)
            if (!ev(f.child(), i + j))
                return false;
        return true;
    case Op::bounded_eventually:
        for (std::size_t j = s; j <= k; ++j)
            if (ev(f.child(), i + j))
                return true;
        return false;
    case Op::bounded_until:
        for (std::size_t j = 0; j <= k; ++j) {
            if (ev(f.child(1), i + j))
                return true;
            if (!ev(f.child(0), i + j))
                return false;
        }
        return false;
    case Op::bounded_release:
        for (std::size_t j = 0; j <= k; ++j) {
            if (!ev(f.child(1), i + j))
                return false;
            if (ev(f.child(0), i + j))
                return true;
        }
        return true;
    case Op::always:
    case Op::eventually:
    case Op::until:
    case Op::release: {
        if (window == 0)
            throw std::invalid_argument("eval_on_path: unbounded operator needs a lasso path");
        const std::size_t end = i + window;
        if (f.op() == Op::always) {
            for (std::size_t j = i; j < end; ++j)
                if (!ev(f.child(), j))
                    return false;
            return true;
        }
        if (f.op() == Op::eventually) {
            for (std::size_t j = i; j < end; ++j)
                if (ev(f.child(), j))
                    return true;
            return false;
        }
        if (f.op() == Op::until) {
            for (std::size_t j = i; j < end; ++j) {
                if (ev(f.child(1), j))
                    return true;
                if (!ev(f.child(0), j))
                    return false;
            }
            return false;
        }
        for (std::size_t j = i; j < end; ++j) {
            if (!ev(f.child(1), j))
                return false;
            if (ev(f.child(0), j))
                return true;
        }
        return true;
    }
    }
    return false;
}

Verdict3 eval_boxes(const Formula& f, std::size_t i, const std::vector<Box>& boxes, const StateSpace& space,
                    const Options& opt)
{
    auto ev = [&](const Formula& g, std::size_t j) { return eval_boxes(g, j, boxes, space, opt); };
    const auto k = static_cast<std::size_t>(std::max(0, f.k()));
    const std::size_t s = static_cast<std::size_t>(start_index(opt));
    switch (f.op()) {
    case Op::atom:
        if (i >= boxes.size())
            throw std::out_of_range("eval_on_boxes: no box for step " + std::to_string(i));
        return atom_on_box(resolve(f.atom(), space), boxes[i]);
    case Op::negation: return kleene_not(ev(f.child(), i));
    case Op::conjunction: {
        Verdict3 v = Verdict3::True;
        for (const auto& c : f.children())
            v = kleene_and(v, ev(c, i));
        return v;
    }
    case Op::disjunction: {
        Verdict3 v = Verdict3::False;
        for (const auto& c : f.children())
            v = kleene_or(v, ev(c, i));
        return v;
    }
    case Op::next: return ev(f.child(), i + k);
    case Op::bounded_always: {
        Verdict3 v = Verdict3::True;
        for (std::size_t j = s; j <= k; ++j)
            v = kleene_and(v, ev(f.child(), i + j));
        return v;
    }
    case Op::bounded_eventually: {
        Verdict3 v = Verdict3::False;
        for (std::size_t j = s; j <= k; ++j)
            v = kleene_or(v, ev(f.child(), i + j));
        return v;
    }
    case Op::bounded_until: {
        Verdict3 v = Verdict3::False;
        Verdict3 prefix = Verdict3::True;
        for (std::size_t j = 0; j <= k; ++j) {
            v = kleene_or(v, kleene_and(prefix, ev(f.child(1), i + j)));
            prefix = kleene_and(prefix, ev(f.child(0), i + j));
        }
        return v;
    }
    case Op::bounded_release: {
        Verdict3 prefix = Verdict3::True; // phi on 0..j
        Verdict3 v = Verdict3::False;
        for (std::size_t j = 0; j <= k; ++j) {
            prefix = kleene_and(prefix, ev(f.child(1), i + j));
            v = kleene_or(v, kleene_and(prefix, ev(f.child(0), i + j)));
        }
        return kleene_or(v, prefix);
    }
    default: throw std::invalid_argument("eval_on_boxes: formula contains an unbounded temporal operator");
    }
}

} // namespace

bool eval_on_path(const Formula& f, const std::vector<Vector>& path, const StateSpace& space, const Options& opt)
{
    if (!is_bounded(f))
        throw std::invalid_argument("eval_on_path: formula contains an unbounded temporal operator");
    const int h = horizon(f, opt);
    if (static_cast<std::size_t>(h) >= path.size())
        throw std::out_of_range("eval_on_path: path of length " + std::to_string(path.size()) +
                                " too short for horizon " + std::to_string(h));
    return eval_concrete(f, 0, path, space, opt, [](std::size_t p) { return p; }, 0);
}

bool eval_on_lasso(const Formula& f, const std::vector<Vector>& path, std::size_t loop, const StateSpace& space,
                   const Options& opt)
{
    const std::size_t t = path.size();
    if (loop >= t)
        throw std::invalid_argument("eval_on_lasso: loop index must be below the lasso length");
    const std::size_t period = t - loop;
    auto pos = [t, loop, period](std::size_t p) { return p < t ? p : loop + (p - loop) % period; };
    // From any position, t + period further steps visit every reachable state.
    return eval_concrete(f, 0, path, space, opt, pos, t + period);
}

Verdict3 atom_on_box(const LinearAtom& a, const Box& box)
{
    double lo = 0.0, hi = 0.0;
    for (std::size_t j = 0; j < a.c.size(); ++j) {
        const double c = a.c[j];
        if (c == 0.0)
            continue;
        lo += c > 0 ? c * box.lower[j] : c * box.upper[j];
        hi += c > 0 ? c * box.upper[j] : c * box.lower[j];
    }
    if (a.strict) {
        if (lo > a.d)
            return Verdict3::True;
        if (hi <= a.d)
            return Verdict3::False;
    }
    else {
        if (hi <= a.d)
            return Verdict3::True;
        if (lo > a.d)
            return Verdict3::False;
    }
    return Verdict3::Unknown;
}

Verdict3 eval_on_boxes(const Formula& f, const std::vector<Box>& boxes, const StateSpace& space, const Options& opt)
{
    return eval_boxes(f, 0, boxes, space, opt);
}

Verdict3 eval_skeleton(const Skeleton& s, const std::vector<Verdict3>& leaf_values)
{
    auto walk = [&](auto&& self, std::size_t n) -> Verdict3 {
        const auto& node = s.nodes[n];
        switch (node.kind) {
        case Skeleton::Kind::leaf: {
            const Verdict3 v = leaf_values.at(node.leaf);
            return s.leaves[node.leaf].positive ? v : kleene_not(v);
        }
        case Skeleton::Kind::conjunction: {
            Verdict3 v = Verdict3::True;
            for (auto c : node.children)
                v = kleene_and(v, self(self, c));
            return v;
        }
        case Skeleton::Kind::disjunction: {
            Verdict3 v = Verdict3::False;
            for (auto c : node.children)
                v = kleene_or(v, self(self, c));
            return v;
        }
        }
        return Verdict3::Unknown;
    };
    return walk(walk, s.root);
}

} // namespace mnv::ltl
