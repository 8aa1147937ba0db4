#include "summ/rouge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "summ/error.hpp"

namespace summ {

std::vector<std::string> rouge_tokenize(const std::string& text) {
    std::string lowered = text;
    for (char& c : lowered) c = char(std::tolower(static_cast<unsigned char>(c)));
    std::vector<std::string> tokens;
    std::istringstream ss(lowered);
    std::string t;
    while (ss >> t) tokens.push_back(t);
    return tokens;
}

static RougeScore from_counts(double matches, double cand_total, double ref_total) {
    RougeScore s;
    if (cand_total <= 0.0 || ref_total <= 0.0) {
        s.degenerate = true;
        return s;
    }
    s.precision = matches / cand_total;
    s.recall = matches / ref_total;
    if (s.precision + s.recall > 0.0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

static std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::map<std::string, int> counts;
    if (int(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + std::size_t(n) <= tokens.size(); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) {
            if (k) key += '\x1f';
            key += tokens[i + std::size_t(k)];
        }
        ++counts[key];
    }
    return counts;
}

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
    if (n < 1) throw DataError("BadConfig: n-gram order must be at least 1");
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    double cand_total = 0.0, ref_total = 0.0, matches = 0.0;
    for (const auto& [k, c] : cand) {
        (void)k;
        cand_total += c;
    }
    for (const auto& [k, c] : ref) {
        (void)k;
        ref_total += c;
    }
    for (const auto& [k, c] : cand) {
        auto it = ref.find(k);
        if (it != ref.end()) matches += std::min(c, it->second);
    }
    return from_counts(matches, cand_total, ref_total);
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
    const std::size_t n = candidate.size(), m = reference.size();
    if (n == 0 || m == 0) return from_counts(0.0, double(n), double(m));
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            if (candidate[i - 1] == reference[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return from_counts(double(prev[m]), double(n), double(m));
}

}  // namespace summ
