#pragma once

#include <optional>
#include <string>
#include <vector>

#include "codegaze/ast.hpp"

namespace codegaze::heatmap {

// Renders the method source with per-token background color on a
// blue-white-red scale anchored at the mean attention value. `token_values`
// aligns with the visible tokens in preorder; entries without a value (tokens
// past a truncation cap) render unhighlighted. When `node_labels`/`node_values`
// are given (all-node predicted attention), a side listing of the linearized
// AST is included.
std::string render_html(const std::string& source, const ast::AstGraph& graph,
                        const std::vector<std::optional<double>>& token_values,
                        const std::vector<std::string>& node_labels = {},
                        const std::vector<double>& node_values = {});

std::vector<std::optional<double>> cover_all(const std::vector<double>& values);

// rgb css color for value v against the distribution anchors
std::string color_for(double v, double mean, double lo, double hi);

}  // namespace codegaze::heatmap
