/*
 * Copyright 2026 The DynRAG Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Brute-force reference implementations. They share no code with the
// library beyond plain data types, so agreement means something.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dynrag/corpus.hpp"

namespace dynrag::oracle {

inline std::vector<std::string> words(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c >= 0x80) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Scores every document directly from its token list.
inline std::vector<std::pair<std::string, double>> bm25_rank(const std::vector<Document>& docs, const std::string& query,
                                                             std::size_t n, double k1 = 1.2, double b = 0.75) {
    std::vector<std::vector<std::string>> toks;
    double total = 0;
    for (const auto& d : docs) {
        toks.push_back(words(d.title + " " + d.content));
        total += static_cast<double>(toks.back().size());
    }
    const double N = static_cast<double>(docs.size());
    const double avgdl = docs.empty() ? 0.0 : total / N;
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0;
        bool hit = false;
        for (const auto& q : words(query)) {
            double df = 0;
            for (const auto& t : toks) df += std::find(t.begin(), t.end(), q) != t.end();
            const double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), q));
            if (tf == 0) continue;
            const double idf = std::log(1.0 + (N - df + 0.5) / (df + 0.5));
            const double norm = k1 * (1.0 - b + b * static_cast<double>(toks[i].size()) / avgdl);
            score += idf * tf * (k1 + 1.0) / (tf + norm);
            hit = true;
        }
        if (hit) scored.emplace_back(docs[i].id, score);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    if (scored.size() > n) scored.resize(n);
    return scored;
}

// Full (|a|+1) x (|b|+1) table, filled from the far corner.
template <typename T>
std::size_t lcs_full_table(const std::vector<T>& a, const std::vector<T>& b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = a.size(); i-- > 0;)
        for (std::size_t j = b.size(); j-- > 0;)
            t[i][j] = a[i] == b[j] ? 1 + t[i + 1][j + 1] : std::max(t[i + 1][j], t[i][j + 1]);
    return t[0][0];
}

// Longest common subsequence by enumerating every subsequence of the shorter
// side. Only usable for short inputs.
template <typename T>
std::size_t lcs_enumerate(const std::vector<T>& a, const std::vector<T>& b) {
    const auto& s = a.size() <= b.size() ? a : b;
    const auto& l = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << s.size()); ++mask) {
        std::size_t bits = static_cast<std::size_t>(__builtin_popcountll(mask));
        if (bits <= best) continue;
        std::size_t j = 0;
        bool ok = true;
        for (std::size_t i = 0; i < s.size() && ok; ++i) {
            if (!(mask >> i & 1)) continue;
            while (j < l.size() && l[j] != s[i]) ++j;
            if (j == l.size()) ok = false;
            else ++j;
        }
        if (ok) best = bits;
    }
    return best;
}

inline double rouge_f(std::size_t lcs, std::size_t gold, std::size_t resp) {
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / static_cast<double>(resp);
    const double r = static_cast<double>(lcs) / static_cast<double>(gold);
    return 2 * p * r / (p + r);
}

// Max-margin pair over all (i, j); ties go to the lexicographically
// smallest (chosen, rejected) index pair.
inline std::optional<std::pair<std::size_t, std::size_t>> best_pair(const std::vector<double>& r) {
    std::optional<std::pair<std::size_t, std::size_t>> best;
    double margin = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < r.size(); ++j)
            if (r[i] - r[j] > margin) {
                margin = r[i] - r[j];
                best = {i, j};
            }
    return best;
}

// Threshold, sort best-first with id tie-break, truncate.
inline std::vector<std::string> expert(const std::vector<std::pair<std::string, double>>& scored, double tau,
                                       std::size_t k_max) {
    std::vector<std::pair<std::string, double>> keep;
    for (const auto& s : scored)
        if (s.second >= tau) keep.push_back(s);
    for (std::size_t i = 0; i < keep.size(); ++i)
        for (std::size_t j = i + 1; j < keep.size(); ++j) {
            const bool swap = keep[j].second > keep[i].second ||
                              (keep[j].second == keep[i].second && keep[j].first < keep[i].first);
            if (swap) std::swap(keep[i], keep[j]);
        }
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < keep.size() && i < k_max; ++i) ids.push_back(keep[i].first);
    return ids;
}

}  // namespace dynrag::oracle
