#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "codegaze/errors.hpp"

namespace codegaze::ast {

struct SourceSpan {
    int line = 0;    // 1-based
    int column = 0;  // 1-based
    int length = 0;
};

// Either a structural tag node (visible=false) or a lexical leaf carrying one
// lowercased subtoken the programmer sees on screen (visible=true).
struct AstNode {
    std::string label;
    bool visible = false;
    std::optional<SourceSpan> span;
};

struct AstGraph {
    std::vector<AstNode> nodes;
    std::vector<std::pair<int, int>> edges;  // (parent_index, child_index)
    std::string method_id;
    std::vector<std::string> warnings;
    bool degraded = false;  // some construct outside the subset was flattened

    int visible_count() const;
    // Tree invariants: one root, single parent per non-root, fully connected.
    void validate() const;
    // Indented tag tree, one node per line, '*' marking visible nodes.
    std::string dump() const;
};

// camelCase / underscore subtoken splitting; digits stay attached to the
// preceding piece; non-identifier tokens pass through unchanged.
std::vector<std::string> split_identifier(const std::string& token);

// ---- lexing (exposed for round-trip tests and heatmap rendering) ----------

struct LexToken {
    enum class Kind { Word, Number, String, Char, Op };
    std::string text;
    Kind kind = Kind::Op;
    int line = 1;
    int column = 1;
};

// Tokenizes one method body; comments are stripped here.
std::vector<LexToken> lex(const std::string& source);

struct VisiblePiece {
    std::string label;  // lowercased
    SourceSpan span;
};

// The on-screen pieces one lexical token contributes, in order.
std::vector<VisiblePiece> visible_pieces(const LexToken& tok);

// Identifier-split, lowercased token stream of the whole source.
std::vector<std::string> visible_token_stream(const std::string& source);

// ---- parsing ---------------------------------------------------------------

AstGraph parse_method(const std::string& source, const std::string& method_id);

// Preorder DFS over the edge structure; parent before children, children in
// source order.
std::vector<int> linearize(const AstGraph& g);

struct Adjacency {
    int dim = 0;  // m_cap
    std::vector<double> data;
    bool truncated = false;

    double at(int i, int j) const { return data[static_cast<size_t>(i) * dim + j]; }
};

Adjacency adjacency(const AstGraph& g, const std::vector<int>& order, int m_cap,
                    bool self_loops = true);

// Preorder labels of the graph (structural tags and visible subtokens).
std::vector<std::string> preorder_labels(const AstGraph& g);

constexpr int kDefaultNodeCap = 400;

}  // namespace codegaze::ast
