#pragma once

#include <stdexcept>
#include <string>

namespace codegaze {

// Parse failure with source position.
struct ParseError : std::runtime_error {
    int line;
    int column;
    ParseError(const std::string& msg, int line_, int column_)
        : std::runtime_error(msg + " at " + std::to_string(line_) + ":" + std::to_string(column_)),
          line(line_),
          column(column_) {}
};

// Malformed input row during file ingestion.
struct IngestError : std::runtime_error {
    long line_number;
    IngestError(const std::string& msg, long line_number_)
        : std::runtime_error(msg + " (line " + std::to_string(line_number_) + ")"),
          line_number(line_number_) {}
};

struct AlignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A gaze vector that sums to zero; the sample carries no signal.
struct EmptyGazeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NormalizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Correlation of a constant vector is undefined.
struct DegenerateCorrelation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Paired test with zero-variance differences.
struct DegenerateTest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace codegaze
