#include "codegaze/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace codegaze::heatmap {

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::vector<std::string> source_lines(const std::string& source) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : source) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    lines.push_back(cur);
    return lines;
}

}  // namespace

std::string color_for(double v, double mean, double lo, double hi) {
    auto rgb = [](int r, int g, int b) {
        std::ostringstream out;
        out << "rgb(" << r << "," << g << "," << b << ")";
        return out.str();
    };
    double t;
    if (v >= mean) {
        t = hi > mean ? (v - mean) / (hi - mean) : 0.0;
        int gb = static_cast<int>(std::lround(255.0 - 191.0 * std::clamp(t, 0.0, 1.0)));
        return rgb(255, gb, gb);
    }
    t = mean > lo ? (mean - v) / (mean - lo) : 0.0;
    int rg = static_cast<int>(std::lround(255.0 - 191.0 * std::clamp(t, 0.0, 1.0)));
    return rgb(rg, rg, 255);
}

std::vector<std::optional<double>> cover_all(const std::vector<double>& values) {
    return std::vector<std::optional<double>>(values.begin(), values.end());
}

std::string render_html(const std::string& source, const ast::AstGraph& graph,
                        const std::vector<std::optional<double>>& token_values,
                        const std::vector<std::string>& node_labels,
                        const std::vector<double>& node_values) {
    struct Tok {
        const ast::AstNode* node;
        std::optional<double> value;
    };
    std::vector<int> order = ast::linearize(graph);
    std::vector<Tok> tokens;
    for (int idx : order) {
        const ast::AstNode& node = graph.nodes[static_cast<size_t>(idx)];
        if (!node.visible) continue;
        tokens.push_back({&node, std::nullopt});
    }
    if (tokens.size() != token_values.size())
        throw LookupError("heatmap: " + std::to_string(token_values.size()) +
                          " attention values for " + std::to_string(tokens.size()) +
                          " visible tokens of " + graph.method_id);
    for (size_t k = 0; k < tokens.size(); ++k) tokens[k].value = token_values[k];

    double mean = 0.0, lo = 0.0, hi = 0.0;
    long covered = 0;
    for (const auto& v : token_values) {
        if (!v) continue;
        if (covered == 0) {
            lo = hi = *v;
        } else {
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
        }
        mean += *v;
        ++covered;
    }
    if (covered == 0) throw LookupError("heatmap: no attention values for " + graph.method_id);
    mean /= static_cast<double>(covered);

    // group tokens by line; within a line they arrive in column order
    std::vector<std::string> lines = source_lines(source);
    std::vector<std::vector<const Tok*>> by_line(lines.size());
    for (const auto& tok : tokens) {
        int line = tok.node->span->line;
        if (line < 1 || line > static_cast<int>(lines.size()))
            throw LookupError("heatmap: token span outside the source text");
        by_line[static_cast<size_t>(line - 1)].push_back(&tok);
    }

    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n"
         << "<style>body{font-family:monospace;white-space:pre;}"
         << ".tok{border-radius:2px;}"
         << ".ast{margin-top:1em;padding:0.5em;border-top:1px solid #ccc;"
         << "white-space:normal;line-height:1.8;}</style>\n"
         << "<title>" << escape(graph.method_id) << "</title></head><body>\n";
    html << "<div class=\"code\">";
    for (size_t li = 0; li < lines.size(); ++li) {
        size_t col = 0;  // 0-based position within the line
        for (const Tok* tok : by_line[li]) {
            const auto& span = *tok->node->span;
            size_t start = static_cast<size_t>(span.column - 1);
            if (start > lines[li].size()) continue;
            if (start > col) html << escape(lines[li].substr(col, start - col));
            size_t len = std::min<size_t>(static_cast<size_t>(span.length),
                                          lines[li].size() - start);
            if (tok->value) {
                html << "<span class=\"tok\" data-token=\"" << escape(tok->node->label)
                     << "\" title=\"" << *tok->value << "\" style=\"background-color:"
                     << color_for(*tok->value, mean, lo, hi) << "\">"
                     << escape(lines[li].substr(start, len)) << "</span>";
            } else {
                html << "<span class=\"tok\" data-token=\"" << escape(tok->node->label)
                     << "\">" << escape(lines[li].substr(start, len)) << "</span>";
            }
            col = start + len;
        }
        if (col < lines[li].size()) html << escape(lines[li].substr(col));
        html << "\n";
    }
    html << "</div>\n";

    if (!node_labels.empty()) {
        if (node_labels.size() != node_values.size())
            throw LookupError("heatmap: node label/value counts differ");
        double nmean = 0.0, nlo = node_values[0], nhi = node_values[0];
        for (double v : node_values) {
            nmean += v;
            nlo = std::min(nlo, v);
            nhi = std::max(nhi, v);
        }
        nmean /= static_cast<double>(node_values.size());
        html << "<div class=\"ast\">";
        for (size_t k = 0; k < node_labels.size(); ++k) {
            html << "<span class=\"tok\" title=\"" << node_values[k]
                 << "\" style=\"background-color:"
                 << color_for(node_values[k], nmean, nlo, nhi) << "\">"
                 << escape(node_labels[k]) << "</span> ";
        }
        html << "</div>\n";
    }
    html << "</body></html>\n";
    return html.str();
}

}  // namespace codegaze::heatmap
