#pragma once
// Program language: 14 operations over 7 value types.
//
// Concrete syntax, one step per line (';' also separates steps):
//
//   r0 = gen_entset_equal("/short_title", "sepsis")
//   r1 = count_entset(r0)   # comment
//
// Registers are single-assignment and numbered by step position. String
// arguments are double-quoted with backslash escapes (\" \\ \n \t); whether a
// string is a relation or a literal follows from the operation signature.
// The program's answer is the value of its last register.

#include <array>
#include <cctype>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ehrqa/error.hpp"
#include "ehrqa/kg.hpp"

namespace ehrqa {

enum class ValueType { EntSet, Rel, Lit, LitSet, LitSets, Int, Float };

inline std::string_view type_name(ValueType t) {
    switch (t) {
    case ValueType::EntSet: return "EntSet";
    case ValueType::Rel: return "Rel";
    case ValueType::Lit: return "Lit";
    case ValueType::LitSet: return "LitSet";
    case ValueType::LitSets: return "LitSets";
    case ValueType::Int: return "Int";
    case ValueType::Float: return "Float";
    }
    return "?";
}

enum class OpKind {
    GenEntsetDown,
    GenEntsetUp,
    GenLitset,
    GenEntsetEqual,
    GenEntsetAtleast,
    GenEntsetAtmost,
    GenEntsetLess,
    GenEntsetMore,
    CountEntset,
    IntersectEntsets,
    MaximumLitset,
    MinimumLitset,
    AverageLitset,
    ConcatLitsets,
};

struct OpSignature {
    OpKind kind;
    std::string_view name;
    std::array<ValueType, 2> params;
    int arity;
    ValueType result;
};

namespace detail {
using VT = ValueType;
inline constexpr std::array<OpSignature, 14> signatures{{
    {OpKind::GenEntsetDown, "gen_entset_down", {VT::EntSet, VT::Rel}, 2, VT::EntSet},
    {OpKind::GenEntsetUp, "gen_entset_up", {VT::Rel, VT::EntSet}, 2, VT::EntSet},
    {OpKind::GenLitset, "gen_litset", {VT::EntSet, VT::Rel}, 2, VT::LitSet},
    {OpKind::GenEntsetEqual, "gen_entset_equal", {VT::Rel, VT::Lit}, 2, VT::EntSet},
    {OpKind::GenEntsetAtleast, "gen_entset_atleast", {VT::Rel, VT::Lit}, 2, VT::EntSet},
    {OpKind::GenEntsetAtmost, "gen_entset_atmost", {VT::Rel, VT::Lit}, 2, VT::EntSet},
    {OpKind::GenEntsetLess, "gen_entset_less", {VT::Rel, VT::Lit}, 2, VT::EntSet},
    {OpKind::GenEntsetMore, "gen_entset_more", {VT::Rel, VT::Lit}, 2, VT::EntSet},
    {OpKind::CountEntset, "count_entset", {VT::EntSet, VT::EntSet}, 1, VT::Int},
    {OpKind::IntersectEntsets, "intersect_entsets", {VT::EntSet, VT::EntSet}, 2, VT::EntSet},
    {OpKind::MaximumLitset, "maximum_litset", {VT::LitSet, VT::LitSet}, 1, VT::Float},
    {OpKind::MinimumLitset, "minimum_litset", {VT::LitSet, VT::LitSet}, 1, VT::Float},
    {OpKind::AverageLitset, "average_litset", {VT::LitSet, VT::LitSet}, 1, VT::Float},
    {OpKind::ConcatLitsets, "concat_litsets", {VT::LitSet, VT::LitSet}, 2, VT::LitSets},
}};
}  // namespace detail

inline const OpSignature& signature(OpKind k) { return detail::signatures[static_cast<std::size_t>(k)]; }

inline std::span<const OpSignature> all_signatures() { return detail::signatures; }

inline std::optional<OpKind> op_from_name(std::string_view name) {
    for (const auto& s : detail::signatures)
        if (s.name == name) return s.kind;
    return std::nullopt;
}

struct Register {
    int index;
    bool operator==(const Register&) const = default;
};

using Arg = std::variant<Register, Relation, Literal>;

inline ValueType arg_literal_type(const Arg& a) {
    return std::holds_alternative<Relation>(a) ? ValueType::Rel : ValueType::Lit;
}

struct Step {
    int result_register;
    OpKind op;
    std::vector<Arg> args;

    bool operator==(const Step&) const = default;
};

// Assigns each register its result type; throws TypeError on the first
// argument whose type differs from the signature.
inline std::vector<ValueType> type_check(std::span<const Step> steps) {
    std::vector<ValueType> types;
    types.reserve(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        const auto& sig = signature(s.op);
        const int step = static_cast<int>(i);
        if (s.result_register != step)
            throw TypeError(step, -1, "result register r" + std::to_string(s.result_register) +
                                          " out of order");
        if (static_cast<int>(s.args.size()) != sig.arity)
            throw TypeError(step, -1, std::string(sig.name) + " takes " + std::to_string(sig.arity) +
                                          " arguments, found " + std::to_string(s.args.size()));
        for (int a = 0; a < sig.arity; ++a) {
            const auto& arg = s.args[a];
            ValueType found;
            if (const auto* r = std::get_if<Register>(&arg)) {
                if (r->index < 0 || r->index >= step)
                    throw TypeError(step, a, "register r" + std::to_string(r->index) + " is not defined");
                found = types[r->index];
            } else {
                found = arg_literal_type(arg);
            }
            if (found != sig.params[a])
                throw TypeError(step, a, "expected " + std::string(type_name(sig.params[a])) + ", found " +
                                             std::string(type_name(found)));
        }
        types.push_back(sig.result);
    }
    return types;
}

class Program {
public:
    // Validates SSA order, arity and types.
    static Program from_steps(std::vector<Step> steps) {
        if (steps.empty()) throw TypeError(0, -1, "empty program");
        Program p;
        p.types_ = type_check(steps);
        p.steps_ = std::move(steps);
        return p;
    }

    const std::vector<Step>& steps() const noexcept { return steps_; }
    std::size_t size() const noexcept { return steps_.size(); }
    const std::vector<ValueType>& register_types() const noexcept { return types_; }
    ValueType result_type() const { return types_.back(); }

    bool operator==(const Program& o) const { return steps_ == o.steps_; }

private:
    Program() = default;
    std::vector<Step> steps_;
    std::vector<ValueType> types_;
};

// Incremental builder; each call appends a step and returns its register.
class ProgramBuilder {
public:
    Register add(OpKind op, std::vector<Arg> args) {
        const int r = static_cast<int>(steps_.size());
        steps_.push_back({r, op, std::move(args)});
        return Register{r};
    }

    bool empty() const noexcept { return steps_.empty(); }
    Program build() && { return Program::from_steps(std::move(steps_)); }

private:
    std::vector<Step> steps_;
};

// ---------------------------------------------------------------------------
// Rendering

inline std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    out += '"';
    return out;
}

inline std::string render_step(const Step& s) {
    std::string out = "r" + std::to_string(s.result_register) + " = " + std::string(signature(s.op).name) + "(";
    for (std::size_t i = 0; i < s.args.size(); ++i) {
        if (i) out += ", ";
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, Register>)
                    out += "r" + std::to_string(a.index);
                else if constexpr (std::is_same_v<T, Relation>)
                    out += quote(a.str());
                else
                    out += quote(a.text());
            },
            s.args[i]);
    }
    return out + ")";
}

// Canonical text: one step per line, no trailing newline.
inline std::string render(const Program& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += '\n';
        out += render_step(p.steps()[i]);
    }
    return out;
}

// Single-line form used by record files.
inline std::string render_inline(const Program& p) {
    std::string out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i) out += " ; ";
        out += render_step(p.steps()[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class ProgramParser {
public:
    explicit ProgramParser(std::string_view src) : src_(src) {}

    Program parse() {
        std::vector<Step> steps;
        skip_separators();
        while (!at_end()) {
            steps.push_back(parse_step(static_cast<int>(steps.size())));
            skip_blank();
            if (!at_end()) {
                if (peek() != '\n' && peek() != ';') fail("expected end of step");
            }
            skip_separators();
        }
        if (steps.empty()) fail("empty program");
        // Syntax is valid here; argument type mismatches surface as TypeError.
        return Program::from_steps(std::move(steps));
    }

private:
    bool at_end() const { return i_ >= src_.size(); }
    char peek() const { return src_[i_]; }

    void advance() {
        if (src_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, col_, what); }

    // Spaces, tabs and comments, but not step separators.
    void skip_blank() {
        while (!at_end()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (!at_end() && peek() != '\n') advance();
            } else {
                break;
            }
        }
    }

    void skip_separators() {
        for (;;) {
            skip_blank();
            if (!at_end() && (peek() == '\n' || peek() == ';'))
                advance();
            else
                break;
        }
    }

    void expect(char c) {
        skip_blank();
        if (at_end() || peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    std::string identifier() {
        skip_blank();
        std::string out;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
            out += peek();
            advance();
        }
        if (out.empty()) fail("expected identifier");
        return out;
    }

    static std::optional<int> register_index(std::string_view id) {
        if (id.size() < 2 || id[0] != 'r') return std::nullopt;
        int v = 0;
        for (char c : id.substr(1)) {
            if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
            v = v * 10 + (c - '0');
            if (v > 1'000'000) return std::nullopt;
        }
        return v;
    }

    std::string string_literal() {
        // Opening quote already current.
        advance();
        std::string out;
        for (;;) {
            if (at_end() || peek() == '\n') fail("unterminated string");
            char c = peek();
            if (c == '"') {
                advance();
                return out;
            }
            if (c == '\\') {
                advance();
                if (at_end()) fail("unterminated string");
                char e = peek();
                switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(std::string("unknown escape '\\") + e + "'");
                }
                advance();
                continue;
            }
            out += c;
            advance();
        }
    }

    Step parse_step(int index) {
        skip_blank();
        const int reg_line = line_, reg_col = col_;
        auto target = identifier();
        auto reg = register_index(target);
        if (!reg) throw ParseError(reg_line, reg_col, "expected register, found '" + target + "'");
        if (*reg != index)
            throw ParseError(reg_line, reg_col,
                             "step " + std::to_string(index) + " must assign r" + std::to_string(index));
        expect('=');
        skip_blank();
        const int op_line = line_, op_col = col_;
        auto name = identifier();
        auto op = op_from_name(name);
        if (!op) throw ParseError(op_line, op_col, "unknown operation '" + name + "'");
        const auto& sig = signature(*op);
        expect('(');
        std::vector<Arg> args;
        skip_blank();
        if (!at_end() && peek() == ')') {
            advance();
        } else {
            for (;;) {
                skip_blank();
                if (at_end()) fail("unexpected end of input");
                const int arg_line = line_, arg_col = col_;
                const std::size_t pos = args.size();
                const bool rel_slot = pos < static_cast<std::size_t>(sig.arity) && sig.params[pos] == ValueType::Rel;
                if (peek() == '"') {
                    auto s = string_literal();
                    try {
                        if (rel_slot)
                            args.emplace_back(Relation(std::move(s)));
                        else
                            args.emplace_back(Literal(std::move(s)));
                    } catch (const InputError& e) {
                        throw ParseError(arg_line, arg_col, e.what());
                    }
                } else {
                    auto id = identifier();
                    auto r = register_index(id);
                    if (!r) throw ParseError(arg_line, arg_col, "expected register or string, found '" + id + "'");
                    if (*r >= index)
                        throw ParseError(arg_line, arg_col,
                                         "register r" + std::to_string(*r) + " is not defined before step " +
                                             std::to_string(index));
                    args.emplace_back(Register{*r});
                }
                skip_blank();
                if (at_end()) fail("unexpected end of input");
                if (peek() == ',') {
                    advance();
                    continue;
                }
                if (peek() == ')') {
                    advance();
                    break;
                }
                fail("expected ',' or ')'");
            }
        }
        if (static_cast<int>(args.size()) != sig.arity)
            throw ParseError(op_line, op_col,
                             std::string(sig.name) + " takes " + std::to_string(sig.arity) +
                                 " arguments, found " + std::to_string(args.size()));
        return Step{index, *op, std::move(args)};
    }

    std::string_view src_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;
};

}  // namespace detail

inline Program parse_program(std::string_view text) { return detail::ProgramParser(text).parse(); }

// ---------------------------------------------------------------------------
// Tokenization
//
// Operation names, registers and punctuation are single tokens; steps are
// separated by ";". Quoted strings become a quote token, one token per piece
// of the content (whitespace runs, single '/' characters, and the runs in
// between), and a closing quote token. Content pieces are kept in escaped
// form so a piece can never be confused with a quote token, and
// concatenating the tokens yields parseable program text.

namespace detail {

inline void string_tokens(std::string_view content, std::vector<std::string>& out) {
    out.emplace_back("\"");
    std::size_t i = 0;
    while (i < content.size()) {
        std::size_t j = i;
        if (content[i] == '/') {
            j = i + 1;
        } else if (text::is_space(content[i])) {
            while (j < content.size() && text::is_space(content[j])) ++j;
        } else {
            while (j < content.size() && content[j] != '/' && !text::is_space(content[j])) ++j;
        }
        auto q = quote(content.substr(i, j - i));
        out.push_back(q.substr(1, q.size() - 2));
        i = j;
    }
    out.emplace_back("\"");
}

}  // namespace detail

inline std::vector<std::string> tokenize_program(const Program& p) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& s = p.steps()[i];
        if (i) out.emplace_back(";");
        out.push_back("r" + std::to_string(s.result_register));
        out.emplace_back("=");
        out.emplace_back(signature(s.op).name);
        out.emplace_back("(");
        for (std::size_t a = 0; a < s.args.size(); ++a) {
            if (a) out.emplace_back(",");
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, Register>)
                        out.push_back("r" + std::to_string(v.index));
                    else if constexpr (std::is_same_v<T, Relation>)
                        detail::string_tokens(v.str(), out);
                    else
                        detail::string_tokens(v.text(), out);
                },
                s.args[a]);
        }
        out.emplace_back(")");
    }
    return out;
}

inline Program detokenize(std::span<const std::string> tokens) {
    std::string joined;
    for (const auto& t : tokens) joined += t;
    return parse_program(joined);
}

}  // namespace ehrqa
