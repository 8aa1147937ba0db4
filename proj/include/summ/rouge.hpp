#pragma once

#include <string>
#include <vector>

namespace summ {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // a side had nothing to score; values are 0
};

// Lowercases ASCII letters and splits on whitespace.
std::vector<std::string> rouge_tokenize(const std::string& text);

// N-gram overlap with per-gram clipping: each reference n-gram credits at
// most its reference count.
RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Longest-common-subsequence overlap.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

}  // namespace summ
