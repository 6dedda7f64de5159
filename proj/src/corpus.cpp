#include "codegaze/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "codegaze/ast.hpp"

namespace codegaze::corpus {

std::vector<MethodRecord> read_corpus_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open corpus file " + path, 0);
    std::vector<MethodRecord> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw IngestError("malformed JSON record", line_no);
        MethodRecord rec;
        try {
            rec.id = j.at("id").get<std::string>();
            rec.project = j.at("project").get<std::string>();
            rec.source = j.at("source").get<std::string>();
            rec.summary = j.value("summary", std::string());
        } catch (const nlohmann::json::exception& e) {
            throw IngestError(std::string("missing corpus field: ") + e.what(), line_no);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_corpus_jsonl(const std::string& path, const std::vector<MethodRecord>& records) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write corpus file " + path);
    for (const auto& rec : records) {
        nlohmann::json j{{"id", rec.id},
                         {"project", rec.project},
                         {"source", rec.source},
                         {"summary", rec.summary}};
        out << j.dump() << "\n";
    }
}

PreparedCorpus prepare_corpus(const std::vector<MethodRecord>& records, double top_fraction,
                              bool dedup, const std::set<std::string>& excluded_projects,
                              const SplitRatios& ratios) {
    if (top_fraction <= 0.0 || top_fraction > 1.0)
        throw ConfigError("top_fraction must be in (0, 1]");
    PreparedCorpus result;

    std::vector<MethodRecord> pool;
    std::unordered_set<std::string> seen_sources;
    for (const auto& rec : records) {
        if (excluded_projects.count(rec.project)) {
            ++result.excluded_methods;
            continue;
        }
        if (dedup && !seen_sources.insert(rec.source).second) {
            ++result.duplicates_removed;
            continue;
        }
        pool.push_back(rec);
    }

    std::set<std::string> projects;
    for (const auto& rec : pool) projects.insert(rec.project);
    if (projects.size() < 3)
        throw ConfigError("cannot split by project: only " + std::to_string(projects.size()) +
                          " projects after exclusion");

    struct Sized {
        const MethodRecord* rec;
        int visible = 0;
    };
    std::vector<Sized> sized;
    for (const auto& rec : pool) {
        try {
            ast::AstGraph g = ast::parse_method(rec.source, rec.id);
            sized.push_back({&rec, g.visible_count()});
        } catch (const ParseError&) {
            ++result.parse_failures;
        }
    }
    std::sort(sized.begin(), sized.end(), [](const Sized& a, const Sized& b) {
        if (a.visible != b.visible) return a.visible > b.visible;
        return a.rec->id < b.rec->id;
    });
    long keep = std::max<long>(1, std::llround(top_fraction * static_cast<double>(sized.size())));
    keep = std::min<long>(keep, static_cast<long>(sized.size()));
    sized.resize(static_cast<size_t>(keep));
    result.kept_methods = keep;

    // greedy bin packing by project size toward the target ratios
    std::map<std::string, long> project_size;
    for (const auto& s : sized) ++project_size[s.rec->project];
    std::vector<std::pair<std::string, long>> by_size(project_size.begin(), project_size.end());
    std::sort(by_size.begin(), by_size.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    const char* split_names[3] = {"train", "val", "test"};
    double targets[3] = {ratios.train, ratios.val, ratios.test};
    long current[3] = {0, 0, 0};
    double total = static_cast<double>(keep);
    for (const auto& [project, size] : by_size) {
        int best = 0;
        double best_deficit = -1e300;
        for (int s = 0; s < 3; ++s) {
            double deficit = targets[s] * total - static_cast<double>(current[s]);
            if (deficit > best_deficit) {
                best_deficit = deficit;
                best = s;
            }
        }
        current[best] += size;
        result.project_split[project] = split_names[best];
    }
    for (const auto& s : sized) {
        const std::string& split = result.project_split.at(s.rec->project);
        if (split == "train") result.train.push_back(*s.rec);
        else if (split == "val") result.val.push_back(*s.rec);
        else result.test.push_back(*s.rec);
    }
    return result;
}

}  // namespace codegaze::corpus
