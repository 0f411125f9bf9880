#pragma once

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "ncf/dsl/ast.hpp"
#include "ncf/errors.hpp"

namespace ncf::dsl {

class ParseError : public Error {
public:
    ParseError(SourcePos pos, const std::string& msg)
        : Error("line " + std::to_string(pos.line) + ", col " + std::to_string(pos.col) + ": " + msg),
          pos_(pos) {}

    SourcePos pos() const { return pos_; }

private:
    SourcePos pos_;
};

namespace detail {

enum class TokKind { identifier, number, string, lbrace, rbrace, lparen, rparen, comma, equals, eof };

struct Token {
    TokKind kind = TokKind::eof;
    std::string text;
    double number = 0.0;
    SourcePos pos;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws_and_comments();
        Token tok;
        tok.pos = pos_;
        if (at_end()) return tok;

        const char c = peek();
        if (c == '{') { advance(); tok.kind = TokKind::lbrace; return tok; }
        if (c == '}') { advance(); tok.kind = TokKind::rbrace; return tok; }
        if (c == '(') { advance(); tok.kind = TokKind::lparen; return tok; }
        if (c == ')') { advance(); tok.kind = TokKind::rparen; return tok; }
        if (c == ',') { advance(); tok.kind = TokKind::comma; return tok; }
        if (c == '=') { advance(); tok.kind = TokKind::equals; return tok; }
        if (c == '"') return lex_string(tok);
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' ||
            (c == '.' && i_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_ + 1]))))
            return lex_number(tok);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_identifier(tok);

        throw ParseError(pos_, "unknown token starting with byte 0x" + to_hex(c));
    }

private:
    bool at_end() const { return i_ >= src_.size(); }
    char peek() const { return src_[i_]; }

    void advance() {
        if (src_[i_] == '\n') { ++pos_.line; pos_.col = 1; }
        else ++pos_.col;
        ++i_;
    }

    void skip_ws_and_comments() {
        while (!at_end()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') { advance(); continue; }
            if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
                while (!at_end() && peek() != '\n') advance();
                continue;
            }
            break;
        }
    }

    Token lex_string(Token tok) {
        advance();  // opening quote
        std::string s;
        while (!at_end() && peek() != '"') {
            if (peek() == '\n') throw ParseError(tok.pos, "unterminated string");
            s += peek();
            advance();
        }
        if (at_end()) throw ParseError(tok.pos, "unterminated string");
        advance();  // closing quote
        tok.kind = TokKind::string;
        tok.text = std::move(s);
        return tok;
    }

    Token lex_number(Token tok) {
        const std::size_t start = i_;
        if (peek() == '-' || peek() == '+') advance();
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
        if (!at_end() && peek() == '.') {
            advance();
            while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
        if (!at_end() && (peek() == 'e' || peek() == 'E')) {
            advance();
            if (!at_end() && (peek() == '-' || peek() == '+')) advance();
            while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) advance();
        }
        const std::string text(src_.substr(start, i_ - start));
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (end != text.c_str() + text.size())
            throw ParseError(tok.pos, "malformed number '" + text + "'");
        tok.kind = TokKind::number;
        tok.number = v;
        tok.text = text;
        return tok;
    }

    Token lex_identifier(Token tok) {
        const std::size_t start = i_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) advance();
        tok.kind = TokKind::identifier;
        tok.text = std::string(src_.substr(start, i_ - start));
        return tok;
    }

    static std::string to_hex(char c) {
        static const char* d = "0123456789abcdef";
        const auto u = static_cast<unsigned char>(c);
        return {d[u >> 4], d[u & 0xF]};
    }

    std::string_view src_;
    std::size_t i_ = 0;
    SourcePos pos_;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lexer_(src) { consume(); }

    DslAst parse_scenario() {
        DslAst ast = parse_one();
        if (cur_.kind != TokKind::eof)
            throw ParseError(cur_.pos, "unexpected content after the scenario block");
        return ast;
    }

    std::vector<DslAst> parse_scenarios() {
        std::vector<DslAst> out;
        while (cur_.kind != TokKind::eof) out.push_back(parse_one());
        if (out.empty()) throw ParseError(cur_.pos, "expected at least one scenario");
        return out;
    }

private:
    DslAst parse_one() {
        DslAst ast;
        ast.pos = cur_.pos;
        expect_keyword("scenario");
        ast.scenario_name = expect_identifier("scenario name");
        if (cur_.kind == TokKind::identifier && cur_.text == "extends") {
            consume();
            ast.parent_name = expect_identifier("parent scenario name");
        }
        ast.root = parse_block_body("", "", ast.pos);
        return ast;
    }

    void consume() { cur_ = lexer_.next(); }

    void expect_keyword(const std::string& kw) {
        if (cur_.kind != TokKind::identifier || cur_.text != kw)
            throw ParseError(cur_.pos, "expected '" + kw + "'");
        consume();
    }

    std::string expect_identifier(const std::string& what) {
        if (cur_.kind != TokKind::identifier)
            throw ParseError(cur_.pos, "expected " + what);
        std::string s = cur_.text;
        consume();
        return s;
    }

    Block parse_block_body(std::string name, std::string qualifier, SourcePos pos) {
        Block block;
        block.name = std::move(name);
        block.qualifier = std::move(qualifier);
        block.pos = pos;
        if (cur_.kind != TokKind::lbrace) throw ParseError(cur_.pos, "expected '{'");
        consume();

        while (cur_.kind != TokKind::rbrace) {
            if (cur_.kind == TokKind::eof) throw ParseError(cur_.pos, "unbalanced braces: missing '}'");
            if (cur_.kind != TokKind::identifier)
                throw ParseError(cur_.pos, "expected an entry or a nested block");

            const Token head = cur_;
            consume();

            if (cur_.kind == TokKind::equals) {
                consume();
                if (block.find_entry(head.text))
                    throw ParseError(head.pos, "duplicate key '" + head.text + "' within a block");
                Entry e;
                e.key = head.text;
                e.pos = head.pos;
                e.value = parse_value();
                block.entries.push_back(std::move(e));
            } else if (cur_.kind == TokKind::lbrace) {
                if (block.find_child(head.text))
                    throw ParseError(head.pos, "duplicate block '" + head.text + "' within a parent block");
                block.children.push_back(parse_block_body(head.text, "", head.pos));
            } else if (cur_.kind == TokKind::identifier) {
                const Token qual = cur_;
                consume();
                if (cur_.kind != TokKind::lbrace)
                    throw ParseError(cur_.pos, "expected '{' after '" + head.text + " " + qual.text + "'");
                if (block.find_child(head.text, qual.text))
                    throw ParseError(head.pos, "duplicate block '" + head.text + " " + qual.text + "' within a parent block");
                block.children.push_back(parse_block_body(head.text, qual.text, head.pos));
            } else {
                throw ParseError(cur_.pos, "expected '=' or '{' after '" + head.text + "'");
            }
        }
        consume();  // closing brace
        return block;
    }

    Value parse_value() {
        const Token tok = cur_;
        switch (tok.kind) {
            case TokKind::string: {
                consume();
                Value v = Value::make_string(tok.text);
                v.pos = tok.pos;
                return v;
            }
            case TokKind::number: {
                consume();
                Value v = Value::make_number(tok.number);
                v.pos = tok.pos;
                return v;
            }
            case TokKind::identifier: {
                consume();
                Value v = (tok.text == "true" || tok.text == "false")
                              ? Value::make_bool(tok.text == "true")
                              : Value::make_identifier(tok.text);
                v.pos = tok.pos;
                return v;
            }
            case TokKind::lparen:
                return parse_tuple();
            default:
                throw ParseError(tok.pos, "expected a value");
        }
    }

    Value parse_tuple() {
        const SourcePos pos = cur_.pos;
        consume();  // '('
        std::vector<Value> items;
        while (true) {
            const Token tok = cur_;
            if (tok.kind == TokKind::number) {
                consume();
                items.push_back(Value::make_number(tok.number));
            } else if (tok.kind == TokKind::identifier && (tok.text == "true" || tok.text == "false")) {
                consume();
                items.push_back(Value::make_bool(tok.text == "true"));
            } else {
                throw ParseError(tok.pos, "tuple elements must be numbers or booleans");
            }
            if (cur_.kind == TokKind::comma) { consume(); continue; }
            if (cur_.kind == TokKind::rparen) { consume(); break; }
            throw ParseError(cur_.pos, "expected ',' or ')' in tuple");
        }
        Value v = Value::make_tuple(std::move(items));
        v.pos = pos;
        return v;
    }

    Lexer lexer_;
    Token cur_;
};

}  // namespace detail

/// Parse one scenario definition. Never crashes on arbitrary bytes: the
/// result is an AST or a ParseError carrying line/column.
inline DslAst parse(std::string_view source) {
    return detail::Parser(source).parse_scenario();
}

/// Parse a source holding one or more scenario definitions (a scenario and
/// its ancestors may share one file).
inline std::vector<DslAst> parse_many(std::string_view source) {
    return detail::Parser(source).parse_scenarios();
}

}  // namespace ncf::dsl
