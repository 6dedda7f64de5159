#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "codegaze/errors.hpp"

namespace codegaze::corpus {

struct MethodRecord {
    std::string id;
    std::string project;
    std::string source;
    std::string summary;
};

// Line-delimited JSON records {id, project, source, summary}.
std::vector<MethodRecord> read_corpus_jsonl(const std::string& path);
void write_corpus_jsonl(const std::string& path, const std::vector<MethodRecord>& records);

struct SplitRatios {
    double train = 0.90;
    double val = 0.05;
    double test = 0.05;
};

struct PreparedCorpus {
    std::vector<MethodRecord> train;
    std::vector<MethodRecord> val;
    std::vector<MethodRecord> test;
    long duplicates_removed = 0;
    long parse_failures = 0;
    long excluded_methods = 0;
    long kept_methods = 0;
    std::map<std::string, std::string> project_split;  // project -> train|val|test
};

// Exclusion list first, then exact-source dedup, then the top fraction by
// visible-token count (ties by id), then a greedy by-project partition.
PreparedCorpus prepare_corpus(const std::vector<MethodRecord>& records, double top_fraction,
                              bool dedup, const std::set<std::string>& excluded_projects,
                              const SplitRatios& ratios = {});

}  // namespace codegaze::corpus
