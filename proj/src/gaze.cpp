#include "codegaze/gaze.hpp"

#include <fstream>
#include <sstream>

namespace codegaze::gaze {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

IngestResult ingest_fixations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open fixation file " + path, 0);
    return ingest_fixations(in);
}

IngestResult ingest_fixations(std::istream& in) {
    IngestResult result;
    std::string line;
    long line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cols = split_csv_row(line);
        if (!header_seen) {
            if (cols.size() != 5 || cols[0] != "programmer_id")
                throw IngestError("expected header programmer_id,method_id,token_index,token_text,duration_ms",
                                  line_no);
            header_seen = true;
            continue;
        }
        if (cols.size() != 5) throw IngestError("expected 5 columns, found " + std::to_string(cols.size()), line_no);
        FixationRecord rec;
        rec.programmer_id = cols[0];
        rec.method_id = cols[1];
        rec.token_text = cols[3];
        try {
            size_t used = 0;
            rec.token_index = std::stoi(cols[2], &used);
            if (used != cols[2].size()) throw std::invalid_argument("trailing");
            rec.duration_ms = std::stod(cols[4], &used);
            if (used != cols[4].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw IngestError("malformed numeric field", line_no);
        }
        if (rec.token_index < 0) throw IngestError("negative token_index", line_no);
        if (rec.duration_ms < 0) throw IngestError("negative duration_ms", line_no);
        if (rec.duration_ms < kFixationThresholdMs) {
            ++result.dropped_short;
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    if (!header_seen) throw IngestError("empty fixation file", line_no);
    return result;
}

GazeVector aggregate_gaze(const std::vector<FixationRecord>& records, const std::string& method_id,
                          const std::string& programmer_id, int visible_token_count) {
    GazeVector gv;
    gv.method_id = method_id;
    gv.programmer_id = programmer_id;
    gv.g.assign(static_cast<size_t>(visible_token_count), 0.0);
    for (const auto& rec : records) {
        if (rec.method_id != method_id || rec.programmer_id != programmer_id)
            throw UsageError("aggregate_gaze: record for (" + rec.programmer_id + ", " +
                             rec.method_id + ") mixed into (" + programmer_id + ", " + method_id + ")");
        if (rec.token_index >= visible_token_count)
            throw AlignError("fixation on token " + std::to_string(rec.token_index) + " ('" +
                             rec.token_text + "') outside method " + method_id + " with " +
                             std::to_string(visible_token_count) + " visible tokens");
        gv.g[static_cast<size_t>(rec.token_index)] += rec.duration_ms;
    }
    return gv;
}

PtgtVector compute_ptgt(const GazeVector& gv) {
    double total = 0.0;
    for (double v : gv.g) total += v;
    if (total <= 0.0)
        throw EmptyGazeError("no gaze time recorded for (" + gv.programmer_id + ", " +
                             gv.method_id + ")");
    PtgtVector pv;
    pv.method_id = gv.method_id;
    pv.programmer_id = gv.programmer_id;
    pv.ptgt.reserve(gv.g.size());
    for (double v : gv.g) pv.ptgt.push_back(v / total);
    return pv;
}

std::vector<PtgtSample> align_to_ast(const PtgtVector& pv, const ast::AstGraph& graph,
                                     const std::vector<int>& order, int m_cap,
                                     const std::vector<std::string>& fixation_tokens) {
    std::vector<std::string> parser_tokens;
    std::vector<int> visible_positions;  // preorder position of each visible token
    for (size_t pos = 0; pos < order.size(); ++pos) {
        const ast::AstNode& node = graph.nodes[static_cast<size_t>(order[pos])];
        if (!node.visible) continue;
        parser_tokens.push_back(node.label);
        visible_positions.push_back(static_cast<int>(pos));
    }
    if (parser_tokens.size() != pv.ptgt.size()) {
        std::ostringstream msg;
        msg << "tokenization mismatch for method " << pv.method_id << ": parser sees "
            << parser_tokens.size() << " visible tokens, gaze data has " << pv.ptgt.size();
        msg << "\n  parser:";
        for (const auto& t : parser_tokens) msg << " " << t;
        if (!fixation_tokens.empty()) {
            msg << "\n  fixation:";
            for (const auto& t : fixation_tokens) msg << " " << t;
        }
        throw AlignError(msg.str());
    }
    std::vector<PtgtSample> samples;
    for (size_t k = 0; k < pv.ptgt.size(); ++k) {
        if (visible_positions[k] >= m_cap) continue;  // truncated away
        samples.push_back({pv.method_id, pv.programmer_id, visible_positions[k], pv.ptgt[k]});
    }
    return samples;
}

}  // namespace codegaze::gaze
