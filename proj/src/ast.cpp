#include "codegaze/ast.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <memory>
#include <sstream>
#include <unordered_set>

namespace codegaze::ast {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string lower_str(const std::string& s) {
    std::string out = s;
    for (auto& c : out) c = lower(c);
    return out;
}

struct Piece {
    std::string text;  // original casing
    int offset = 0;    // within the token
};

// camelCase/underscore boundaries over an identifier-shaped token.
std::vector<Piece> split_pieces(const std::string& tok) {
    std::vector<Piece> out;
    int start = -1;
    auto flush = [&](int end) {
        if (start >= 0 && end > start) out.push_back({tok.substr(start, end - start), start});
        start = -1;
    };
    int n = static_cast<int>(tok.size());
    for (int i = 0; i < n; ++i) {
        char c = tok[i];
        if (c == '_') {
            flush(i);
            continue;
        }
        if (start < 0) {
            start = i;
            continue;
        }
        char prev = tok[i - 1];
        bool upper = std::isupper(static_cast<unsigned char>(c)) != 0;
        bool prev_lower_or_digit = std::islower(static_cast<unsigned char>(prev)) ||
                                   std::isdigit(static_cast<unsigned char>(prev));
        bool acronym_end = upper && std::isupper(static_cast<unsigned char>(prev)) &&
                           i + 1 < n && std::islower(static_cast<unsigned char>(tok[i + 1]));
        if ((upper && prev_lower_or_digit) || acronym_end) {
            flush(i);
            start = i;
        }
    }
    flush(n);
    if (out.empty()) out.push_back({tok, 0});  // e.g. "_" alone
    return out;
}

}  // namespace

std::vector<std::string> split_identifier(const std::string& token) {
    if (token.empty() || !is_ident_start(token[0])) return {token};
    std::vector<std::string> out;
    for (const auto& p : split_pieces(token)) out.push_back(lower_str(p.text));
    return out;
}

// ---- lexer -----------------------------------------------------------------

namespace {

const std::array<const char*, 24> kMultiOps = {
    ">>>=", "...", ">>>", "<<=", ">>=", "==", "!=", "<=", ">=", "&&", "||", "++",
    "--",   "+=", "-=",  "*=",  "/=",  "%=", "&=", "|=", "^=", "->", "::", "<<"};
// ">>" is intentionally absent: generic closers would otherwise fuse.

struct Lexer {
    const std::string& src;
    size_t pos = 0;
    int line = 1;
    int col = 1;

    explicit Lexer(const std::string& s) : src(s) {}

    bool done() const { return pos >= src.size(); }
    char cur() const { return src[pos]; }
    char at(size_t k) const { return pos + k < src.size() ? src[pos + k] : '\0'; }

    void advance() {
        if (src[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }

    void skip_space_and_comments() {
        while (!done()) {
            char c = cur();
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && at(1) == '/') {
                while (!done() && cur() != '\n') advance();
            } else if (c == '/' && at(1) == '*') {
                int l = line, co = col;
                advance();
                advance();
                bool closed = false;
                while (!done()) {
                    if (cur() == '*' && at(1) == '/') {
                        advance();
                        advance();
                        closed = true;
                        break;
                    }
                    advance();
                }
                if (!closed) throw ParseError("unterminated block comment", l, co);
            } else {
                break;
            }
        }
    }

    LexToken next() {
        skip_space_and_comments();
        LexToken t;
        t.line = line;
        t.column = col;
        char c = cur();
        if (is_ident_start(c)) {
            size_t start = pos;
            while (!done() && is_ident_char(cur())) advance();
            t.text = src.substr(start, pos - start);
            t.kind = LexToken::Kind::Word;
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && std::isdigit(static_cast<unsigned char>(at(1))))) {
            size_t start = pos;
            while (!done()) {
                char d = cur();
                bool sign_after_exp =
                    (d == '+' || d == '-') && pos > start &&
                    (src[pos - 1] == 'e' || src[pos - 1] == 'E') &&
                    src.compare(start, 2, "0x") != 0 && src.compare(start, 2, "0X") != 0;
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || sign_after_exp)
                    advance();
                else
                    break;
            }
            t.text = src.substr(start, pos - start);
            t.kind = LexToken::Kind::Number;
            return t;
        }
        if (c == '"' || c == '\'') {
            char quote = c;
            int l = line, co = col;
            size_t start = pos;
            advance();
            while (!done() && cur() != quote) {
                if (cur() == '\\') advance();
                if (!done()) advance();
            }
            if (done()) throw ParseError("unterminated literal", l, co);
            advance();
            t.text = src.substr(start, pos - start);
            t.kind = quote == '"' ? LexToken::Kind::String : LexToken::Kind::Char;
            return t;
        }
        for (const char* op : kMultiOps) {
            size_t n = std::strlen(op);
            if (src.compare(pos, n, op) == 0) {
                t.text = op;
                t.kind = LexToken::Kind::Op;
                for (size_t k = 0; k < n; ++k) advance();
                return t;
            }
        }
        static const std::string singles = "+-*/%=<>!&|^~?:.,;(){}[]@";
        if (singles.find(c) != std::string::npos) {
            t.text = std::string(1, c);
            t.kind = LexToken::Kind::Op;
            advance();
            return t;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
};

}  // namespace

std::vector<LexToken> lex(const std::string& source) {
    Lexer lx(source);
    std::vector<LexToken> out;
    while (true) {
        lx.skip_space_and_comments();
        if (lx.done()) break;
        out.push_back(lx.next());
    }
    return out;
}

namespace {

// Content of string/char literals: identifier runs get the usual subtoken
// split; runs of other printable characters come through as single pieces.
void literal_content_pieces(const std::string& raw, int line, int base_col,
                            std::vector<VisiblePiece>& out) {
    size_t i = 0;
    while (i < raw.size()) {
        char c = raw[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        size_t start = i;
        if (is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c))) {
            while (i < raw.size() && is_ident_char(raw[i])) ++i;
            std::string run = raw.substr(start, i - start);
            for (const auto& p : split_pieces(run))
                out.push_back({lower_str(p.text),
                               {line, base_col + static_cast<int>(start) + p.offset,
                                static_cast<int>(p.text.size())}});
        } else {
            while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i])) &&
                   !is_ident_char(raw[i]))
                ++i;
            out.push_back({lower_str(raw.substr(start, i - start)),
                           {line, base_col + static_cast<int>(start), static_cast<int>(i - start)}});
        }
    }
}

}  // namespace

std::vector<VisiblePiece> visible_pieces(const LexToken& tok) {
    std::vector<VisiblePiece> out;
    switch (tok.kind) {
        case LexToken::Kind::Word:
            for (const auto& p : split_pieces(tok.text))
                out.push_back({lower_str(p.text),
                               {tok.line, tok.column + p.offset, static_cast<int>(p.text.size())}});
            break;
        case LexToken::Kind::Number:
            out.push_back({lower_str(tok.text),
                           {tok.line, tok.column, static_cast<int>(tok.text.size())}});
            break;
        case LexToken::Kind::String:
        case LexToken::Kind::Char: {
            std::string quote(1, tok.text.front());
            out.push_back({quote, {tok.line, tok.column, 1}});
            literal_content_pieces(tok.text.substr(1, tok.text.size() - 2), tok.line,
                                   tok.column + 1, out);
            out.push_back({quote,
                           {tok.line, tok.column + static_cast<int>(tok.text.size()) - 1, 1}});
            break;
        }
        case LexToken::Kind::Op:
            out.push_back({tok.text, {tok.line, tok.column, static_cast<int>(tok.text.size())}});
            break;
    }
    return out;
}

std::vector<std::string> visible_token_stream(const std::string& source) {
    std::vector<std::string> out;
    for (const auto& tok : lex(source))
        for (const auto& p : visible_pieces(tok)) out.push_back(p.label);
    return out;
}

// ---- parser ----------------------------------------------------------------

namespace {

struct TreeNode {
    std::string label;
    bool visible = false;
    std::optional<SourceSpan> span;
    std::vector<std::unique_ptr<TreeNode>> kids;
};

const std::unordered_set<std::string> kModifiers = {
    "public", "private",   "protected", "static",   "final",    "abstract",
    "native", "transient", "volatile",  "strictfp", "synchronized"};

const std::unordered_set<std::string> kFlatStatementKeywords = {
    "switch", "try", "do", "throw", "break", "continue", "assert", "synchronized"};

struct Parser {
    const std::vector<LexToken>& toks;
    size_t i = 0;
    std::vector<std::string> warnings;
    bool degraded = false;

    explicit Parser(const std::vector<LexToken>& t) : toks(t) {}

    bool at_end() const { return i >= toks.size(); }

    const LexToken& peek(size_t k = 0) const {
        if (i + k >= toks.size()) throw ParseError("unexpected end of input", last_line(), last_col());
        return toks[i + k];
    }

    int last_line() const { return toks.empty() ? 1 : toks.back().line; }
    int last_col() const { return toks.empty() ? 1 : toks.back().column; }

    bool is(const char* text, size_t k = 0) const {
        return i + k < toks.size() && toks[i + k].text == text;
    }

    bool is_word(size_t k = 0) const {
        return i + k < toks.size() && toks[i + k].kind == LexToken::Kind::Word;
    }

    const std::string& text_at(size_t k = 0) const { return toks[i + k].text; }

    ParseError err(const std::string& msg) const {
        if (at_end()) return ParseError(msg, last_line(), last_col());
        return ParseError(msg + " near '" + toks[i].text + "'", toks[i].line, toks[i].column);
    }

    TreeNode* tag(TreeNode* parent, const char* label) {
        parent->kids.push_back(std::make_unique<TreeNode>());
        TreeNode* n = parent->kids.back().get();
        n->label = label;
        return n;
    }

    // Consume the current token and attach its visible pieces to `parent`.
    void take(TreeNode* parent) {
        const LexToken& tok = peek();
        for (const auto& p : visible_pieces(tok)) {
            parent->kids.push_back(std::make_unique<TreeNode>());
            TreeNode* leaf = parent->kids.back().get();
            leaf->label = p.label;
            leaf->visible = true;
            leaf->span = p.span;
        }
        ++i;
    }

    void expect(TreeNode* parent, const char* text) {
        if (!is(text)) throw err(std::string("expected '") + text + "'");
        take(parent);
    }

    void warn(const std::string& msg) {
        warnings.push_back(msg);
        degraded = true;
    }

    // ---- header ----

    void parse_function(TreeNode* unit) {
        TreeNode* fn = tag(unit, "function");
        while (is("@")) parse_annotation(fn);
        while (is_word() && kModifiers.count(text_at()) &&
               !(text_at() == "synchronized" && is("(", 1))) {
            TreeNode* spec = tag(fn, "specifier");
            take(spec);
            while (is("@")) parse_annotation(fn);
        }
        if (!is_word()) throw err("expected return type or constructor name");
        if (!is("(", 1)) parse_type(fn);
        if (!is_word()) throw err("expected method name");
        TreeNode* name = tag(fn, "name");
        take(name);
        parse_parameter_list(fn);
        if (is("throws")) {
            warn("throws clause flattened");
            TreeNode* e = tag(fn, "expr");
            while (!at_end() && !is("{") && !is(";")) take(e);
        }
        if (!is("{")) throw err("expected method body");
        parse_block(fn);
    }

    void parse_annotation(TreeNode* parent) {
        warn("annotation flattened");
        TreeNode* e = tag(parent, "expr");
        take(e);  // '@'
        if (is_word()) take(e);
        if (is("(")) take_balanced(e);
    }

    // Consume one balanced ( ) / [ ] / { } group flat into `parent`.
    void take_balanced(TreeNode* parent) {
        int depth = 0;
        bool saw_semicolon = false;
        do {
            const std::string& t = text_at();
            if (t == "(" || t == "[" || t == "{") ++depth;
            if (t == ")" || t == "]" || t == "}") --depth;
            if (t == ";") saw_semicolon = true;
            take(parent);
        } while (depth > 0 && !at_end());
        if (depth > 0) throw err("unbalanced brackets");
        if (saw_semicolon) warn("statement-bearing construct flattened");
    }

    void parse_type(TreeNode* parent) {
        TreeNode* type = tag(parent, "type");
        while (is_word() && text_at() == "final") {
            TreeNode* spec = tag(type, "specifier");
            take(spec);
        }
        if (!is_word()) throw err("expected type name");
        parse_dotted_name(type);
        if (is("<")) {
            warn("generics flattened");
            TreeNode* e = tag(type, "expr");
            int depth = 0;
            while (!at_end()) {
                const std::string& t = text_at();
                if (t == "<") ++depth;
                if (t == ">") --depth;
                if (t == ">>>") depth -= 3;
                take(e);
                if (depth <= 0) break;
            }
        }
        while (is("[") && is("]", 1)) {
            take(type);
            take(type);
        }
        if (is("...")) take(type);
    }

    // name, or name( name . name . ... ) for qualified names
    void parse_dotted_name(TreeNode* parent) {
        bool dotted = is(".", 1) && is_word(2);
        TreeNode* name = tag(parent, "name");
        if (!dotted) {
            take(name);
            return;
        }
        TreeNode* seg = tag(name, "name");
        take(seg);
        while (is(".") && is_word(1)) {
            TreeNode* op = tag(name, "operator");
            take(op);
            seg = tag(name, "name");
            take(seg);
        }
    }

    void parse_parameter_list(TreeNode* fn) {
        TreeNode* pl = tag(fn, "parameter_list");
        expect(pl, "(");
        while (!is(")")) {
            TreeNode* param = tag(pl, "parameter");
            TreeNode* decl = tag(param, "decl");
            parse_type(decl);
            if (!is_word()) throw err("expected parameter name");
            TreeNode* name = tag(decl, "name");
            take(name);
            while (is("[") && is("]", 1)) {
                take(name);
                take(name);
            }
            if (is(",")) take(pl);
        }
        expect(pl, ")");
    }

    // ---- statements ----

    void parse_block(TreeNode* parent) {
        TreeNode* b = tag(parent, "block");
        expect(b, "{");
        while (!is("}")) {
            if (at_end()) throw err("unterminated block");
            parse_statement(b);
        }
        expect(b, "}");
    }

    // Single statements after if/else/for/while get a brace-less block, the
    // way srcML wraps them.
    void parse_body(TreeNode* parent) {
        if (is("{")) {
            parse_block(parent);
        } else {
            TreeNode* b = tag(parent, "block");
            parse_statement(b);
        }
    }

    void parse_statement(TreeNode* parent) {
        if (is("{")) {
            parse_block(parent);
            return;
        }
        if (is(";")) {
            TreeNode* e = tag(parent, "expr");
            take(e);
            return;
        }
        if (is_word()) {
            const std::string& kw = text_at();
            if (kw == "if") {
                parse_if(parent);
                return;
            }
            if (kw == "while") {
                parse_while(parent);
                return;
            }
            if (kw == "for") {
                parse_for(parent);
                return;
            }
            if (kw == "return") {
                TreeNode* r = tag(parent, "return");
                take(r);
                if (!is(";")) {
                    TreeNode* e = tag(r, "expr");
                    parse_expr_into(e, {";"});
                }
                expect(r, ";");
                return;
            }
            if (kFlatStatementKeywords.count(kw) && !(kw == "synchronized" && !is("(", 1))) {
                parse_flat_statement(parent, kw);
                return;
            }
        }
        if (looks_like_decl({"=", ";", ",", "["})) {
            parse_decl_stmt(parent);
            return;
        }
        TreeNode* e = tag(parent, "expr");
        parse_expr_into(e, {";"});
        expect(e, ";");
    }

    void parse_if(TreeNode* parent) {
        TreeNode* node = tag(parent, "if");
        take(node);  // 'if'
        parse_condition_parens(node);
        TreeNode* then = tag(node, "then");
        parse_body(then);
        if (is("else")) {
            TreeNode* els = tag(node, "else");
            take(els);
            if (is("if"))
                parse_if(els);
            else
                parse_body(els);
        }
    }

    void parse_while(TreeNode* parent) {
        TreeNode* node = tag(parent, "while");
        take(node);
        parse_condition_parens(node);
        parse_body(node);
    }

    void parse_condition_parens(TreeNode* node) {
        TreeNode* cond = tag(node, "condition");
        expect(cond, "(");
        TreeNode* e = tag(cond, "expr");
        parse_expr_into(e, {")"});
        expect(cond, ")");
    }

    void parse_for(TreeNode* parent) {
        TreeNode* f = tag(parent, "for");
        take(f);  // 'for'
        expect(f, "(");
        TreeNode* init = tag(f, "init");
        bool enhanced = false;
        if (is(";")) {
            take(init);
        } else if (looks_like_decl({"=", ";", ",", ":", "["})) {
            parse_decl(init, {";", ",", ":", ")"});
            if (is(":")) {
                enhanced = true;
                take(init);
                TreeNode* e = tag(init, "expr");
                parse_expr_into(e, {")"});
            } else {
                while (is(",")) {
                    take(init);
                    parse_declarator(init, {";", ","});
                }
                expect(init, ";");
            }
        } else {
            TreeNode* e = tag(init, "expr");
            parse_expr_into(e, {";"});
            expect(init, ";");
        }
        if (!enhanced) {
            TreeNode* cond = tag(f, "condition");
            if (is(";")) {
                take(cond);
            } else {
                TreeNode* e = tag(cond, "expr");
                parse_expr_into(e, {";"});
                expect(cond, ";");
            }
            if (!is(")")) {
                TreeNode* incr = tag(f, "expr");
                parse_expr_into(incr, {")"});
            }
        }
        expect(f, ")");
        parse_body(f);
    }

    void parse_decl_stmt(TreeNode* parent) {
        TreeNode* ds = tag(parent, "decl_stmt");
        parse_decl(ds, {";", ","});
        while (is(",")) {
            take(ds);
            parse_declarator(ds, {";", ","});
        }
        expect(ds, ";");
    }

    // decl with a leading type
    void parse_decl(TreeNode* parent, const std::vector<std::string>& init_stops) {
        TreeNode* d = tag(parent, "decl");
        parse_type(d);
        declarator_tail(d, init_stops);
    }

    // declarator without a type (second and later names of a decl_stmt)
    void parse_declarator(TreeNode* parent, const std::vector<std::string>& init_stops) {
        TreeNode* d = tag(parent, "decl");
        declarator_tail(d, init_stops);
    }

    void declarator_tail(TreeNode* d, const std::vector<std::string>& init_stops) {
        if (!is_word()) throw err("expected variable name");
        TreeNode* name = tag(d, "name");
        take(name);
        while (is("[") && is("]", 1)) {
            take(name);
            take(name);
        }
        if (is("=")) {
            TreeNode* init = tag(d, "init");
            take(init);  // '=' is raw text inside init
            TreeNode* e = tag(init, "expr");
            if (is("{"))
                take_balanced(e);  // array initializer
            else
                parse_expr_into(e, init_stops);
        }
    }

    // Unsupported statement kinds are kept as one flat expr node holding all
    // their tokens.
    void parse_flat_statement(TreeNode* parent, const std::string& kw) {
        warn("'" + kw + "' statement flattened");
        TreeNode* e = tag(parent, "expr");
        int depth = 0;
        while (!at_end()) {
            const std::string& t = text_at();
            if (t == "(" || t == "[" || t == "{") ++depth;
            if (t == ")" || t == "]" || t == "}") --depth;
            bool stmt_end = depth == 0 && (t == ";" || t == "}");
            take(e);
            if (stmt_end) {
                if (is("catch") || is("finally") || (t == "}" && is("while") && kw == "do"))
                    continue;
                break;
            }
        }
    }

    // ---- expressions (flat srcML-style element sequences) ----

    bool stop_hit(const std::vector<std::string>& stops) const {
        if (at_end()) return true;
        if (toks[i].kind != LexToken::Kind::Op) return false;
        return std::find(stops.begin(), stops.end(), toks[i].text) != stops.end();
    }

    void parse_expr_into(TreeNode* parent, const std::vector<std::string>& stops) {
        int depth = 0;
        while (true) {
            if (at_end()) {
                if (depth == 0) break;
                throw err("unexpected end of expression");
            }
            if (depth == 0 && stop_hit(stops)) break;
            const LexToken& t = peek();
            if (t.kind == LexToken::Kind::Word) {
                if (t.text == "new" || t.text == "instanceof") {
                    TreeNode* op = tag(parent, "operator");
                    take(op);
                } else if (t.text == "true" || t.text == "false" || t.text == "null") {
                    TreeNode* lit = tag(parent, "literal");
                    take(lit);
                } else {
                    parse_name_or_call(parent);
                }
                continue;
            }
            if (t.kind == LexToken::Kind::Number || t.kind == LexToken::Kind::String ||
                t.kind == LexToken::Kind::Char) {
                TreeNode* lit = tag(parent, "literal");
                take(lit);
                continue;
            }
            const std::string& op = t.text;
            if (op == "(") {
                ++depth;
                take(parent);
            } else if (op == ")") {
                if (depth == 0) throw err("unbalanced ')' in expression");
                --depth;
                take(parent);
            } else if (op == "[") {
                ++depth;
                take(parent);
            } else if (op == "]") {
                if (depth == 0) throw err("unbalanced ']' in expression");
                --depth;
                take(parent);
            } else if (op == "{") {
                take_balanced(parent);
            } else if (op == "}") {
                throw err("unexpected '}' in expression");
            } else if (op == ";") {
                throw err("unexpected ';' in expression");
            } else if (op == ",") {
                take(parent);
            } else if (op == "@") {
                parse_annotation(parent);
            } else {
                if (op == "->") warn("lambda flattened");
                TreeNode* opn = tag(parent, "operator");
                take(opn);
            }
        }
    }

    // Dotted name chains, calls, and index suffixes:
    //   board.add(x).size  ->  call(name(board . add), argument_list) . name(size)
    void parse_name_or_call(TreeNode* parent) {
        while (true) {
            size_t j = i;
            while (j + 2 < toks.size() && toks[j + 1].text == "." &&
                   toks[j + 2].kind == LexToken::Kind::Word)
                j += 2;
            bool is_call = j + 1 < toks.size() && toks[j + 1].text == "(";
            TreeNode* container = is_call ? tag(parent, "call") : parent;
            TreeNode* name = nullptr;
            if (j > i) {
                name = tag(container, "name");
                TreeNode* seg = tag(name, "name");
                take(seg);
                while (i <= j && is(".") && is_word(1)) {
                    TreeNode* op = tag(name, "operator");
                    take(op);
                    seg = tag(name, "name");
                    take(seg);
                }
            } else {
                name = tag(container, "name");
                take(name);
            }
            if (is_call) {
                parse_argument_list(container);
            } else {
                while (is("[")) {
                    take(name);
                    parse_expr_into(name, {"]"});
                    expect(name, "]");
                }
            }
            if (is(".") && is_word(1)) {
                TreeNode* op = tag(parent, "operator");
                take(op);
                continue;
            }
            break;
        }
    }

    void parse_argument_list(TreeNode* call) {
        TreeNode* al = tag(call, "argument_list");
        expect(al, "(");
        if (!is(")")) {
            while (true) {
                TreeNode* arg = tag(al, "argument");
                TreeNode* e = tag(arg, "expr");
                parse_expr_into(e, {",", ")"});
                if (is(",")) {
                    take(al);
                    continue;
                }
                break;
            }
        }
        expect(al, ")");
    }

    // Bounded lookahead distinguishing a local declaration from an expression
    // statement. `enders` are the tokens allowed right after the declared name.
    bool looks_like_decl(const std::vector<std::string>& enders) const {
        size_t j = i;
        auto word = [&](size_t k) {
            return k < toks.size() && toks[k].kind == LexToken::Kind::Word;
        };
        auto txt = [&](size_t k) -> const std::string& {
            static const std::string empty;
            return k < toks.size() ? toks[k].text : empty;
        };
        while (word(j) && txt(j) == "final") ++j;
        if (!word(j)) return false;
        ++j;
        while (txt(j) == "." && word(j + 1)) j += 2;
        if (txt(j) == "<") {  // balanced generic argument scan
            int depth = 0;
            size_t guard = j + 64;
            while (j < toks.size() && j < guard) {
                const std::string& t = txt(j);
                if (t == "<") ++depth;
                else if (t == ">") --depth;
                else if (t == ">>>") depth -= 3;
                else if (t == ";" || t == "(" || t == "{" || t == "=") return false;
                ++j;
                if (depth == 0) break;
            }
            if (depth != 0) return false;
        }
        while (txt(j) == "[" && txt(j + 1) == "]") j += 2;
        if (!word(j)) return false;
        ++j;
        while (txt(j) == "[" && txt(j + 1) == "]") j += 2;
        return std::find(enders.begin(), enders.end(), txt(j)) != enders.end();
    }
};

void flatten(const TreeNode* n, int parent, AstGraph& g) {
    int idx = static_cast<int>(g.nodes.size());
    g.nodes.push_back({n->label, n->visible, n->span});
    if (parent >= 0) g.edges.emplace_back(parent, idx);
    for (const auto& kid : n->kids) flatten(kid.get(), idx, g);
}

}  // namespace

AstGraph parse_method(const std::string& source, const std::string& method_id) {
    std::vector<LexToken> toks = lex(source);
    if (toks.empty()) throw ParseError("empty input", 1, 1);
    Parser p(toks);
    TreeNode root;
    root.label = "unit";
    p.parse_function(&root);
    if (!p.at_end()) throw p.err("unexpected tokens after method body");
    AstGraph g;
    g.method_id = method_id;
    flatten(&root, -1, g);
    g.warnings = std::move(p.warnings);
    g.degraded = p.degraded;
    return g;
}

int AstGraph::visible_count() const {
    int n = 0;
    for (const auto& node : nodes) n += node.visible ? 1 : 0;
    return n;
}

void AstGraph::validate() const {
    if (nodes.empty()) throw UsageError("empty graph");
    std::vector<int> parent_count(nodes.size(), 0);
    for (const auto& [p, c] : edges) {
        if (p < 0 || c < 0 || p >= static_cast<int>(nodes.size()) ||
            c >= static_cast<int>(nodes.size()))
            throw UsageError("edge index out of range");
        ++parent_count[c];
    }
    int roots = 0;
    for (size_t k = 0; k < nodes.size(); ++k) {
        if (parent_count[k] == 0) ++roots;
        if (parent_count[k] > 1) throw UsageError("node has multiple parents");
    }
    if (roots != 1) throw UsageError("graph must have exactly one root");
    if (linearize(*this).size() != nodes.size())
        throw UsageError("graph is not fully connected");
    for (const auto& node : nodes)
        if (node.visible != node.span.has_value())
            throw UsageError("visibility and source span disagree");
}

std::vector<int> linearize(const AstGraph& g) {
    std::vector<std::vector<int>> children(g.nodes.size());
    std::vector<char> has_parent(g.nodes.size(), 0);
    for (const auto& [p, c] : g.edges) {
        children[p].push_back(c);
        has_parent[c] = 1;
    }
    int root = -1;
    for (size_t k = 0; k < g.nodes.size(); ++k)
        if (!has_parent[k]) {
            root = static_cast<int>(k);
            break;
        }
    std::vector<int> order;
    order.reserve(g.nodes.size());
    std::vector<int> stack = {root};
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto it = children[n].rbegin(); it != children[n].rend(); ++it) stack.push_back(*it);
    }
    return order;
}

Adjacency adjacency(const AstGraph& g, const std::vector<int>& order, int m_cap,
                    bool self_loops) {
    Adjacency a;
    a.dim = m_cap;
    a.data.assign(static_cast<size_t>(m_cap) * m_cap, 0.0);
    a.truncated = static_cast<int>(order.size()) > m_cap;
    std::vector<int> pos(g.nodes.size(), -1);
    int true_len = std::min<int>(static_cast<int>(order.size()), m_cap);
    for (int k = 0; k < true_len; ++k) pos[order[k]] = k;
    for (const auto& [p, c] : g.edges) {
        int pi = pos[p], ci = pos[c];
        if (pi < 0 || ci < 0) continue;
        a.data[static_cast<size_t>(pi) * m_cap + ci] = 1.0;
        a.data[static_cast<size_t>(ci) * m_cap + pi] = 1.0;
    }
    if (self_loops)
        for (int k = 0; k < true_len; ++k) a.data[static_cast<size_t>(k) * m_cap + k] = 1.0;
    return a;
}

std::vector<std::string> preorder_labels(const AstGraph& g) {
    std::vector<std::string> labels;
    for (int idx : linearize(g)) labels.push_back(g.nodes[idx].label);
    return labels;
}

std::string AstGraph::dump() const {
    std::vector<std::vector<int>> children(nodes.size());
    std::vector<char> has_parent(nodes.size(), 0);
    for (const auto& [p, c] : edges) {
        children[p].push_back(c);
        has_parent[c] = 1;
    }
    std::ostringstream out;
    struct Frame {
        int node;
        int depth;
    };
    std::vector<Frame> stack;
    for (int k = static_cast<int>(nodes.size()) - 1; k >= 0; --k)
        if (!has_parent[k]) stack.push_back({k, 0});
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        for (int d = 0; d < f.depth; ++d) out << "  ";
        if (nodes[f.node].visible) out << "* ";
        out << nodes[f.node].label << "\n";
        for (auto it = children[f.node].rbegin(); it != children[f.node].rend(); ++it)
            stack.push_back({*it, f.depth + 1});
    }
    return out.str();
}

}  // namespace codegaze::ast
