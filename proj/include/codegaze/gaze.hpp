#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "codegaze/ast.hpp"
#include "codegaze/errors.hpp"

namespace codegaze::gaze {

struct FixationRecord {
    std::string programmer_id;
    std::string method_id;
    int token_index = 0;  // position in the visible token stream
    std::string token_text;
    double duration_ms = 0.0;
};

struct IngestResult {
    std::vector<FixationRecord> records;
    long dropped_short = 0;  // rows under the fixation threshold
};

constexpr double kFixationThresholdMs = 100.0;

// CSV with header programmer_id,method_id,token_index,token_text,duration_ms.
IngestResult ingest_fixations(const std::string& path);
IngestResult ingest_fixations(std::istream& in);

struct GazeVector {
    std::string method_id;
    std::string programmer_id;
    std::vector<double> g;  // milliseconds per visible token, regressions summed
};

// `records` must already be filtered to one (programmer, method) pair.
GazeVector aggregate_gaze(const std::vector<FixationRecord>& records, const std::string& method_id,
                          const std::string& programmer_id, int visible_token_count);

struct PtgtVector {
    std::string method_id;
    std::string programmer_id;
    std::vector<double> ptgt;
};

PtgtVector compute_ptgt(const GazeVector& gv);

struct PtgtSample {
    std::string method_id;
    std::string programmer_id;
    int focal_node_index = 0;  // position in the linearized AST
    double target = 0.0;
};

// One sample per visible node within the first m_cap preorder positions.
// `fixation_tokens`, when provided, enriches the mismatch diagnostic.
std::vector<PtgtSample> align_to_ast(const PtgtVector& pv, const ast::AstGraph& graph,
                                     const std::vector<int>& order, int m_cap,
                                     const std::vector<std::string>& fixation_tokens = {});

}  // namespace codegaze::gaze
